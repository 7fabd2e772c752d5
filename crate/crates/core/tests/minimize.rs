mod common;

use common::{all_refined, brute_force_min, dnf_passes, mask_of, random_oracle};
use napkit::minimize::{
    coarsen, refine_search, sample_nap, sample_refine, stoch_coarsen, Outside, SampleRefineConfig, StochConfig,
    Termination, ThetaSchedule,
};
use napkit::{ActivationState, CountingOracle, Nap, Oracle, Signature, SyntheticOracle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference<R: Rng>(rng: &mut R, n: usize) -> Nap {
    let pattern: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    all_refined(&Signature::flat(n), &pattern)
}

fn assert_minimal(o: &SyntheticOracle, p: &Nap) {
    assert!(o.check(p).unwrap().passed());
    for i in p.refined() {
        assert!(
            !o.check(&p.coarsen(i).unwrap()).unwrap().passed(),
            "{p} is not minimal at {i}"
        );
    }
}

#[test]
fn coarsen_is_minimal_with_linear_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let n = rng.gen_range(8..=64);
        let count = rng.gen_range(1..4);
        let o = random_oracle(&mut rng, n, count, 6);
        let p = reference(&mut rng, n);
        let r = coarsen(&p, &o, None).unwrap();
        assert_eq!(r.calls, n as u64 + 1);
        assert_eq!(r.terminated_by, Termination::Minimal);
        let result = r.result.unwrap();
        assert!(result.subsumes(&p).unwrap());
        assert_minimal(&o, &result);
    }
}

#[test]
fn coarsen_order_matters_but_result_stays_minimal() {
    let sig = Signature::flat(4);
    let o = SyntheticOracle::new(sig.clone(), vec![vec![0, 1], vec![2]]).unwrap();
    let p = Nap::parse(&sig, "1111").unwrap();
    let forward = coarsen(&p, &o, None).unwrap().result.unwrap();
    assert_eq!(forward.to_string(), "**1*");
    let reversed = coarsen(&p, &o, Some(&[3, 2, 1, 0])).unwrap().result.unwrap();
    assert_eq!(reversed.to_string(), "11**");
    assert!(coarsen(&p, &o, Some(&[0, 1, 2])).is_err());
    assert!(coarsen(&p, &o, Some(&[0, 1, 2, 2])).is_err());
}

#[test]
fn refine_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let n = rng.gen_range(2..=12);
        let count = rng.gen_range(1..4);
        let clauses = common::random_clauses(&mut rng, n, count, 5);
        let o = CountingOracle::new(SyntheticOracle::new(Signature::flat(n), clauses.clone()).unwrap());
        let p = reference(&mut rng, n);
        let r = refine_search(&o, &p, false).unwrap();
        let result = r.result.unwrap();
        assert_eq!(result.size(), brute_force_min(&clauses, n));
        assert!(dnf_passes(&clauses, mask_of(&result)));
        assert!(r.calls <= 1 << n);
        assert_eq!(r.calls, o.calls());
    }
}

#[test]
fn refine_refuses_large_without_override() {
    let n = 21;
    let o = SyntheticOracle::new(Signature::flat(n), vec![vec![0]]).unwrap();
    let p = all_refined(&Signature::flat(n), &[true; 21]);
    assert!(refine_search(&o, &p, false).is_err());
    let r = refine_search(&o, &p, true).unwrap();
    assert_eq!(r.result.unwrap().refined(), vec![0]);
}

#[test]
fn refined_failure_is_reported() {
    let sig = Signature::flat(6);
    let o = SyntheticOracle::new(sig.clone(), vec![]).unwrap();
    let p = Nap::parse(&sig, "101010").unwrap();
    for r in [
        coarsen(&p, &o, None).unwrap(),
        refine_search(&o, &p, false).unwrap(),
        stoch_coarsen(&p, &o, &StochConfig::with_target(2, 100, 0)).unwrap(),
        sample_refine(&o, &p, &SampleRefineConfig::new(10, 2, 100, 0)).unwrap(),
    ] {
        assert_eq!(r.terminated_by, Termination::RefinedFails);
        assert_eq!(r.calls, 1);
        assert!(r.result.is_none() && !r.passes);
    }
}

#[test]
fn stoch_coarsen_with_target_finds_planted_clause() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for seed in 0..30 {
        let n = 64;
        let clause = rand::seq::index::sample(&mut rng, n, 4).into_vec();
        let o = SyntheticOracle::new(Signature::flat(n), vec![clause.clone()]).unwrap();
        let p = reference(&mut rng, n);
        let r = stoch_coarsen(&p, &o, &StochConfig::with_target(4, 100_000, seed)).unwrap();
        assert_eq!(r.terminated_by, Termination::SizeTarget);
        let mut got = r.result.unwrap().refined();
        let mut want = clause;
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
    }
}

#[test]
fn adaptive_stoch_coarsen_ends_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for seed in 0..40 {
        let n = rng.gen_range(8..40);
        let count = rng.gen_range(1..4);
        let o = random_oracle(&mut rng, n, count, 5);
        let p = reference(&mut rng, n);
        let r = stoch_coarsen(&p, &o, &StochConfig::adaptive(1_000_000, seed)).unwrap();
        assert_eq!(r.terminated_by, Termination::Minimal);
        assert_minimal(&o, &r.result.unwrap());
        assert!(r.trace.iter().skip(1).any(|e| e.theta.is_some()));
    }
}

#[test]
fn stoch_coarsen_respects_budget() {
    let sig = Signature::flat(32);
    let o = CountingOracle::new(SyntheticOracle::new(sig.clone(), vec![(0..8).collect()]).unwrap());
    let p = all_refined(&sig, &[true; 32]);
    let r = stoch_coarsen(&p, &o, &StochConfig::with_target(1, 5, 0)).unwrap();
    assert_eq!(r.terminated_by, Termination::Budget);
    assert_eq!(r.calls, 5);
    assert_eq!(o.calls(), 5);
    assert!(r.result.unwrap().subsumes(&p).unwrap());
}

#[test]
fn runs_are_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let o = random_oracle(&mut rng, 48, 3, 4);
    let p = reference(&mut rng, 48);
    let a = stoch_coarsen(&p, &o, &StochConfig::adaptive(100_000, 9))
        .unwrap()
        .to_json()
        .unwrap();
    let b = stoch_coarsen(&p, &o, &StochConfig::adaptive(100_000, 9))
        .unwrap()
        .to_json()
        .unwrap();
    assert_eq!(a, b);
    let cfg = SampleRefineConfig::new(50, 3, 10_000, 9);
    let a = sample_refine(&o, &p, &cfg).unwrap().to_json().unwrap();
    let b = sample_refine(&o, &p, &cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}

/// Keep frequencies match θ within five standard errors.
#[test]
fn sample_nap_keeps_with_probability_theta() {
    let sig = Signature::flat(20);
    let p = all_refined(&sig, &[true; 20]);
    let candidates: Vec<usize> = (0..10).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let trials = 20_000;
    for theta in [0.1, (-0.25f64).exp(), 0.9] {
        let mut kept = [0usize; 20];
        for _ in 0..trials {
            let s = sample_nap(&candidates, theta, &mut rng, &p, Outside::Keep);
            for (k, st) in kept.iter_mut().zip(s.states()) {
                *k += st.is_refined() as usize;
            }
            let star = sample_nap(&candidates, theta, &mut rng, &p, Outside::Star);
            assert!(star.refined().iter().all(|i| *i < 10));
        }
        let se = (theta * (1.0 - theta) / trials as f64).sqrt();
        for (i, k) in kept.iter().enumerate() {
            let f = *k as f64 / trials as f64;
            if i < 10 {
                assert!((f - theta).abs() < 5.0 * se, "neuron {i}: {f} vs {theta}");
            } else {
                assert_eq!(*k, trials);
            }
        }
    }
}

#[test]
fn adaptive_theta_converges_to_inverse_e_pass_rate() {
    // stationary: the candidate set never shrinks
    let n = 32;
    let sig = Signature::flat(n);
    let o = SyntheticOracle::new(sig.clone(), vec![vec![5, 9]]).unwrap();
    let p = all_refined(&sig, &vec![true; n]);
    let candidates: Vec<usize> = (0..n).collect();
    let mut schedule = ThetaSchedule::adaptive();
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let mut outcomes = Vec::new();
    for _ in 0..2000 {
        let s = sample_nap(&candidates, schedule.theta(), &mut rng, &p, Outside::Star);
        let passed = o.check(&s).unwrap().passed();
        schedule.observe(passed);
        outcomes.push(passed);
    }
    let rate = outcomes[1800..].iter().filter(|v| **v).count() as f64 / 200.0;
    assert!((rate - (-1.0f64).exp()).abs() <= 0.1, "rate {rate}");
    // θ² ≈ 1/e for a two-neuron clause
    assert!((schedule.theta().powi(2) - (-1.0f64).exp()).abs() < 0.15);
}

#[test]
fn sample_refine_collects_a_clause() {
    let mut hits = 0;
    for seed in 0..20 {
        let sig = Signature::flat(24);
        let o = SyntheticOracle::new(sig.clone(), vec![vec![4, 11]]).unwrap();
        let p = all_refined(&sig, &[false; 24]);
        let r = sample_refine(&o, &p, &SampleRefineConfig::new(400, 2, 2_000, seed)).unwrap();
        assert!(r.calls <= 2_000);
        assert_eq!(r.picked.len(), r.result.as_ref().unwrap().size());
        if r.passes {
            assert_eq!(r.terminated_by, Termination::SizeTarget);
            assert_eq!(r.result.unwrap().refined(), vec![4, 11]);
            hits += 1;
        } else {
            assert_eq!(r.terminated_by, Termination::SizeExhausted);
        }
    }
    assert!(hits >= 16, "{hits}");
}

#[test]
fn sample_refine_ignores_star_neurons_and_checks_budget() {
    let sig = Signature::flat(8);
    let o = SyntheticOracle::new(sig.clone(), vec![vec![2]]).unwrap();
    let p = Nap::parse(&sig, "**1*0101").unwrap();
    let r = sample_refine(&o, &p, &SampleRefineConfig::new(100, 1, 1_000, 1)).unwrap();
    assert!(r.picked.iter().all(|i| p.state(*i) != ActivationState::Star));
    assert!(sample_refine(&o, &p, &SampleRefineConfig::new(100, 11, 1_000, 1)).is_err());
    let mut cfg = SampleRefineConfig::new(10, 2, 1_000, 1);
    cfg.seed_set = vec![0];
    assert!(sample_refine(&o, &p, &cfg).is_err());
    cfg.seed_set = vec![2];
    let r = sample_refine(&o, &p, &cfg).unwrap();
    assert_eq!(r.terminated_by, Termination::SizeTarget);
    assert_eq!(r.result.unwrap().refined(), vec![2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coarsen_output_is_coarser_and_minimal(seed in any::<u64>(), n in 1usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = random_oracle(&mut rng, n, 2, 4);
        let p = reference(&mut rng, n);
        let r = coarsen(&p, &o, None).unwrap();
        let result = r.result.unwrap();
        prop_assert!(result.subsumes(&p).unwrap());
        prop_assert!(o.check(&result).unwrap().passed());
        for i in result.refined() {
            prop_assert!(!o.check(&result.coarsen(i).unwrap()).unwrap().passed());
        }
        prop_assert_eq!(r.trace.len() as u64, r.calls);
    }

    #[test]
    fn refine_never_beats_brute_force(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clauses = common::random_clauses(&mut rng, n, 3, 4);
        let o = SyntheticOracle::new(Signature::flat(n), clauses.clone()).unwrap();
        let p = reference(&mut rng, n);
        let r = refine_search(&o, &p, false).unwrap();
        prop_assert_eq!(r.size().unwrap(), brute_force_min(&clauses, n));
    }
}
