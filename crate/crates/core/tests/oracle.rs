mod common;

use common::{dnf_passes, mask_of, random_clauses, random_coarsening, random_nap};
use napkit::fixtures::{fixture_2x2, fixture_domain};
use napkit::{oracle_from_verifier, CountingOracle, Nap, Oracle, Outcome, RobustnessQuery, Signature, SyntheticOracle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn synthetic_is_monotone(seed in any::<u64>(), n in 4usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clauses = random_clauses(&mut rng, n, 3, 4);
        let o = SyntheticOracle::new(Signature::flat(n), clauses.clone()).unwrap();
        let fine = random_nap(&mut rng, &Signature::flat(n), 0.3);
        let coarse = random_coarsening(&mut rng, &fine, 0.4);
        let pf = o.check(&fine).unwrap().passed();
        let pc = o.check(&coarse).unwrap().passed();
        prop_assert!(!pc || pf);
        prop_assert_eq!(pf, dnf_passes(&clauses, mask_of(&fine)));
    }
}

#[test]
fn counting_counts_every_call() {
    let sig = Signature::flat(4);
    let o = CountingOracle::new(SyntheticOracle::new(sig.clone(), vec![vec![1]]).unwrap());
    for _ in 0..7 {
        o.check(&Nap::coarsest(&sig)).unwrap();
    }
    assert_eq!(o.calls(), 7);
    assert!(o.check(&Nap::coarsest(&Signature::flat(3))).is_err());
    assert_eq!(o.calls(), 8);
    o.reset();
    assert_eq!(o.calls(), 0);
}

/// Every coarsening pair of the 81 fixture NAPs, for each class.
#[test]
fn verifier_oracle_is_monotone_on_fixture() {
    let net = fixture_2x2();
    let sig = net.signature().clone();
    let all: Vec<Nap> = (0..81)
        .map(|mut k| {
            let text: String = (0..4)
                .map(|_| {
                    let c = ['0', '1', '*'][k % 3];
                    k /= 3;
                    c
                })
                .collect();
            Nap::parse(&sig, &text).unwrap()
        })
        .collect();
    for class in 0..2 {
        let o = oracle_from_verifier(net.clone(), RobustnessQuery::new(class, fixture_domain())).unwrap();
        let verdicts: Vec<Outcome> = all.iter().map(|p| o.check(p).unwrap().outcome).collect();
        assert!(verdicts.iter().all(|v| *v != Outcome::Unknown));
        let mut pairs = 0;
        for (i, fine) in all.iter().enumerate() {
            for (j, coarse) in all.iter().enumerate() {
                if coarse.subsumes(fine).unwrap() {
                    pairs += 1;
                    if verdicts[j] == Outcome::Pass {
                        assert_eq!(verdicts[i], Outcome::Pass, "{coarse} passes but {fine} does not");
                    }
                }
            }
        }
        assert_eq!(pairs, 625);
    }
}

#[test]
fn verifier_oracle_golden_verdicts() {
    let net = fixture_2x2();
    let sig = net.signature().clone();
    let check = |class, text: &str| {
        let o = oracle_from_verifier(net.clone(), RobustnessQuery::new(class, fixture_domain())).unwrap();
        o.check(&Nap::parse(&sig, text).unwrap()).unwrap()
    };
    assert!(check(0, "1**0").passed());
    assert!(check(0, "***0").passed());
    assert!(check(1, "**01").passed());
    let v = check(0, "1*1*");
    assert_eq!(v.outcome, Outcome::Fail);
    let x = v.counterexample.unwrap();
    assert!(net.margin(&x, 0).unwrap() <= 1e-6);
    assert!(Nap::parse(&sig, "1*1*").unwrap().is_exhibited_by(&net, &x).unwrap());
}

#[test]
fn exhausted_budget_is_not_a_pass() {
    let net = fixture_2x2();
    let mut q = RobustnessQuery::new(0, fixture_domain());
    q.phase_budget = 0;
    let o = oracle_from_verifier(net.clone(), q).unwrap();
    let v = o.check(&Nap::parse(net.signature(), "1**0").unwrap()).unwrap();
    assert_eq!(v.outcome, Outcome::Unknown);
    assert!(!v.passed());
}
