//! Verification oracles `V: P -> {pass, fail}`.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nap::Nap;
use crate::network::{Network, Signature};
use crate::verifier::{verify, RobustnessQuery, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Pass,
    Fail,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleVerdict {
    pub outcome: Outcome,
    /// Only present with [`Outcome::Fail`].
    pub counterexample: Option<Vec<f64>>,
}

impl OracleVerdict {
    pub fn pass() -> Self {
        Self {
            outcome: Outcome::Pass,
            counterexample: None,
        }
    }

    pub fn fail(counterexample: Option<Vec<f64>>) -> Self {
        Self {
            outcome: Outcome::Fail,
            counterexample,
        }
    }

    pub fn unknown() -> Self {
        Self {
            outcome: Outcome::Unknown,
            counterexample: None,
        }
    }

    /// Search loops treat `Unknown` like `Fail`.
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

pub trait Oracle: Send + Sync {
    fn signature(&self) -> &Signature;

    fn check(&self, nap: &Nap) -> Result<OracleVerdict>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn signature(&self) -> &Signature {
        (**self).signature()
    }

    fn check(&self, nap: &Nap) -> Result<OracleVerdict> {
        (**self).check(nap)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn signature(&self) -> &Signature {
        (**self).signature()
    }

    fn check(&self, nap: &Nap) -> Result<OracleVerdict> {
        (**self).check(nap)
    }
}

/// Monotone DNF oracle: passes iff some clause has all its neurons refined.
/// The clauses play the role of the planted minimal specifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SyntheticOracleFile", into = "SyntheticOracleFile")]
pub struct SyntheticOracle {
    signature: Signature,
    clauses: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct SyntheticOracleFile {
    signature: Vec<usize>,
    clauses: Vec<Vec<usize>>,
}

impl TryFrom<SyntheticOracleFile> for SyntheticOracle {
    type Error = Error;

    fn try_from(f: SyntheticOracleFile) -> Result<Self> {
        SyntheticOracle::new(Signature::new(f.signature), f.clauses)
    }
}

impl From<SyntheticOracle> for SyntheticOracleFile {
    fn from(o: SyntheticOracle) -> Self {
        Self {
            signature: o.signature.sizes().to_vec(),
            clauses: o.clauses,
        }
    }
}

impl SyntheticOracle {
    pub fn new(signature: Signature, clauses: Vec<Vec<usize>>) -> Result<Self> {
        let n = signature.num_neurons();
        for clause in &clauses {
            if let Some(&bad) = clause.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidNeuron { layer: 0, index: bad });
            }
        }
        Ok(Self { signature, clauses })
    }

    pub fn clauses(&self) -> &[Vec<usize>] {
        &self.clauses
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Evaluates the DNF on a set of refined ordinals.
    pub fn passes_refined(&self, refined: &[bool]) -> bool {
        self.clauses.iter().any(|c| c.iter().all(|&i| refined[i]))
    }
}

impl Oracle for SyntheticOracle {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn check(&self, nap: &Nap) -> Result<OracleVerdict> {
        self.signature.check_same(nap.signature())?;
        let refined: Vec<bool> = nap.states().iter().map(|s| s.is_refined()).collect();
        Ok(if self.passes_refined(&refined) {
            OracleVerdict::pass()
        } else {
            OracleVerdict::fail(None)
        })
    }
}

/// Counts every verdict request made through it.
#[derive(Debug)]
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn signature(&self) -> &Signature {
        self.inner.signature()
    }

    fn check(&self, nap: &Nap) -> Result<OracleVerdict> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.check(nap)
    }
}

/// Oracle backed by the built-in verifier for a fixed query.
#[derive(Debug, Clone)]
pub struct VerifierOracle {
    net: Network,
    query: RobustnessQuery,
}

impl VerifierOracle {
    pub fn query(&self) -> &RobustnessQuery {
        &self.query
    }
}

pub fn oracle_from_verifier(net: Network, query: RobustnessQuery) -> Result<VerifierOracle> {
    query.validate(&net)?;
    Ok(VerifierOracle { net, query })
}

impl Oracle for VerifierOracle {
    fn signature(&self) -> &Signature {
        self.net.signature()
    }

    fn check(&self, nap: &Nap) -> Result<OracleVerdict> {
        let r = verify(&self.net, nap, &self.query)?;
        Ok(match r.verdict {
            Verdict::Verified => OracleVerdict::pass(),
            Verdict::Falsified => OracleVerdict::fail(r.counterexample.map(|c| c.x)),
            Verdict::Unknown => OracleVerdict::unknown(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        Signature::new(vec![2, 2])
    }

    #[test]
    fn synthetic_examples() {
        let o = SyntheticOracle::new(sig(), vec![vec![2]]).unwrap();
        assert!(o.check(&Nap::parse(&sig(), "**1*").unwrap()).unwrap().passed());
        assert!(!o.check(&Nap::coarsest(&sig())).unwrap().passed());
        let empty = SyntheticOracle::new(sig(), vec![vec![]]).unwrap();
        assert!(empty.check(&Nap::coarsest(&sig())).unwrap().passed());
        let none = SyntheticOracle::new(sig(), vec![]).unwrap();
        assert!(!none.check(&Nap::parse(&sig(), "1010").unwrap()).unwrap().passed());
    }

    #[test]
    fn synthetic_rejects_bad_input() {
        assert!(SyntheticOracle::new(sig(), vec![vec![4]]).is_err());
        let o = SyntheticOracle::new(sig(), vec![vec![0]]).unwrap();
        assert!(o.check(&Nap::coarsest(&Signature::new(vec![4]))).is_err());
    }

    #[test]
    fn json_round_trip() {
        let o = SyntheticOracle::from_json(r#"{"signature":[2,2],"clauses":[[0,1],[3]]}"#).unwrap();
        assert_eq!(o.clauses(), &[vec![0, 1], vec![3]]);
        let text = serde_json::to_string(&o).unwrap();
        assert_eq!(SyntheticOracle::from_json(&text).unwrap(), o);
        assert!(SyntheticOracle::from_json(r#"{"signature":[2],"clauses":[[5]]}"#).is_err());
    }

    #[test]
    fn counter() {
        let o = CountingOracle::new(SyntheticOracle::new(sig(), vec![vec![0]]).unwrap());
        for _ in 0..3 {
            o.check(&Nap::coarsest(&sig())).unwrap();
        }
        assert_eq!(o.calls(), 3);
        o.reset();
        assert_eq!(o.calls(), 0);
    }
}
