//! Neural activation pattern (NAP) specifications for feed-forward ReLU
//! networks.
//!
//! The crate extracts NAPs from data, searches for minimal NAPs that still
//! pass a verification oracle, verifies NAP and NAP-augmented robustness with
//! a built-in complete verifier, estimates essential neurons without the
//! verifier, and measures the input regions NAPs describe.

pub mod data;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod fixtures;
pub mod io;
pub mod lp;
pub mod minimize;
pub mod nap;
pub mod network;
pub mod oracle;
pub mod verifier;
pub mod volume;

pub use data::{Dataset, InputDomain, Sample};
pub use error::{Error, Result};
pub use nap::{
    abstract_binary, abstract_statistical, class_nap, exhibits, AbstractionConfig, ActivationState, Nap, NapFile,
};
pub use network::{ActivationTrace, Layer, Network, NeuronId, Signature};
pub use oracle::{oracle_from_verifier, CountingOracle, Oracle, OracleVerdict, Outcome, SyntheticOracle};
pub use verifier::{check_non_ambiguity, verify, Ambiguity, RobustnessQuery, Verdict, VerificationResult};
