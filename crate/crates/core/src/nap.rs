//! Neural activation patterns.
//!
//! A [`Nap`] assigns every hidden neuron one of three abstraction states:
//! `0` (post-activation exactly zero), `1` (strictly positive) or `*`
//! (unconstrained). `*` abstracts both binary states, which induces the
//! subsumption order `P' ≼ P` ("`P'` is coarser than `P`"). The region of a
//! NAP is the set of inputs whose binary pattern it subsumes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ActivationTrace, Network, NeuronId, Signature};

/// Abstraction state of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationState {
    Zero,
    One,
    Star,
}

impl ActivationState {
    /// `self ⪯ other`: `self` equals `other` or is `Star`.
    pub fn abstracts(self, other: ActivationState) -> bool {
        self == ActivationState::Star || self == other
    }

    pub fn is_refined(self) -> bool {
        self != ActivationState::Star
    }

    pub fn of_post_activation(value: f64) -> Self {
        if value > 0.0 {
            ActivationState::One
        } else {
            ActivationState::Zero
        }
    }

    pub fn symbol(self) -> char {
        match self {
            ActivationState::Zero => '0',
            ActivationState::One => '1',
            ActivationState::Star => '*',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '0' => Some(ActivationState::Zero),
            '1' => Some(ActivationState::One),
            '*' => Some(ActivationState::Star),
            _ => None,
        }
    }
}

/// Confidence ratio for the statistical abstraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstractionConfig {
    delta: f64,
}

impl AbstractionConfig {
    /// `delta` must lie in `(0.5, 1]` so that at most one binary state can
    /// reach the threshold.
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.5 && delta <= 1.0) {
            return Err(Error::InvalidConfig(format!("delta must be in (0.5, 1], got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Default for AbstractionConfig {
    fn default() -> Self {
        Self { delta: 0.99 }
    }
}

/// A neural activation pattern over a fixed signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Nap {
    signature: Signature,
    states: Vec<ActivationState>,
}

impl Nap {
    pub fn new(signature: Signature, states: Vec<ActivationState>) -> Result<Self> {
        if states.len() != signature.num_neurons() {
            return Err(Error::Dimension {
                expected: signature.num_neurons(),
                actual: states.len(),
            });
        }
        Ok(Self { signature, states })
    }

    /// All states `*`.
    pub fn coarsest(signature: &Signature) -> Self {
        Self {
            states: vec![ActivationState::Star; signature.num_neurons()],
            signature: signature.clone(),
        }
    }

    /// Parses the textual form, e.g. `"10*1"`.
    pub fn parse(signature: &Signature, text: &str) -> Result<Self> {
        let states = text
            .chars()
            .map(|c| {
                ActivationState::from_symbol(c).ok_or_else(|| Error::Parse(format!("invalid NAP state symbol {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(signature.clone(), states)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn states(&self) -> &[ActivationState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, ordinal: usize) -> ActivationState {
        self.states[ordinal]
    }

    pub fn state_of(&self, id: NeuronId) -> Result<ActivationState> {
        Ok(self.states[self.signature.ordinal(id)?])
    }

    /// Number of refined (non-`*`) neurons.
    pub fn size(&self) -> usize {
        self.states.iter().filter(|s| s.is_refined()).count()
    }

    /// Ordinals of refined neurons, ascending.
    pub fn refined(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&i| self.states[i].is_refined())
            .collect()
    }

    /// `self ≼ finer`: every state of `self` abstracts the state in `finer`.
    pub fn subsumes(&self, finer: &Nap) -> Result<bool> {
        self.signature.check_same(&finer.signature)?;
        Ok(self.states.iter().zip(&finer.states).all(|(a, b)| a.abstracts(*b)))
    }

    fn check_ordinal(&self, ordinal: usize) -> Result<()> {
        if ordinal >= self.states.len() {
            return Err(Error::InvalidNeuron {
                layer: 0,
                index: ordinal,
            });
        }
        Ok(())
    }

    /// Sets the neuron to `*`.
    pub fn coarsen(&self, ordinal: usize) -> Result<Nap> {
        self.check_ordinal(ordinal)?;
        let mut out = self.clone();
        out.states[ordinal] = ActivationState::Star;
        Ok(out)
    }

    /// Copies the state of `reference` at the neuron.
    pub fn refine(&self, ordinal: usize, reference: &Nap) -> Result<Nap> {
        self.check_ordinal(ordinal)?;
        self.signature.check_same(&reference.signature)?;
        let mut out = self.clone();
        out.states[ordinal] = reference.states[ordinal];
        Ok(out)
    }

    pub fn coarsen_neuron(&self, id: NeuronId) -> Result<Nap> {
        self.coarsen(self.signature.ordinal(id)?)
    }

    pub fn refine_neuron(&self, id: NeuronId, reference: &Nap) -> Result<Nap> {
        self.refine(self.signature.ordinal(id)?, reference)
    }

    /// `reference` restricted to `ordinals`, `*` elsewhere.
    pub fn restrict(reference: &Nap, ordinals: impl IntoIterator<Item = usize>) -> Nap {
        let mut out = Nap::coarsest(&reference.signature);
        for i in ordinals {
            out.states[i] = reference.states[i];
        }
        out
    }

    /// Combines two NAPs whose regions intersect in the region of the result.
    /// `None` when they lock some neuron to opposite binary states.
    pub fn meet(&self, other: &Nap) -> Result<Option<Nap>> {
        self.signature.check_same(&other.signature)?;
        let mut states = Vec::with_capacity(self.states.len());
        for (a, b) in self.states.iter().zip(&other.states) {
            let s = match (a, b) {
                (ActivationState::Star, s) | (s, ActivationState::Star) => *s,
                (x, y) if x == y => *x,
                _ => return Ok(None),
            };
            states.push(s);
        }
        Ok(Some(Nap {
            signature: self.signature.clone(),
            states,
        }))
    }

    /// `true` if the trace's binary pattern lies in the region of this NAP.
    pub fn matches_trace(&self, trace: &ActivationTrace) -> bool {
        self.states
            .iter()
            .zip(trace.hidden_post())
            .all(|(s, v)| s.abstracts(ActivationState::of_post_activation(v)))
    }

    /// `true` if the binary pattern of `x` lies in the region of this NAP.
    pub fn is_exhibited_by(&self, net: &Network, x: &[f64]) -> Result<bool> {
        exhibits(net, x, self)
    }
}

impl fmt::Display for Nap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.states {
            write!(f, "{}", s.symbol())?;
        }
        Ok(())
    }
}

/// Serialized NAP: `{"signature": [...], "states": "10*"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NapFile {
    pub signature: Vec<usize>,
    pub states: String,
}

impl From<&Nap> for NapFile {
    fn from(nap: &Nap) -> Self {
        Self {
            signature: nap.signature.sizes().to_vec(),
            states: nap.to_string(),
        }
    }
}

impl TryFrom<NapFile> for Nap {
    type Error = Error;

    fn try_from(file: NapFile) -> Result<Nap> {
        Nap::parse(&Signature::new(file.signature), &file.states)
    }
}

impl FromStr for NapFile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_network(net: &Network, nap: &Nap) -> Result<()> {
    net.signature().check_same(nap.signature())
}

/// Binary abstraction of the input's activation pattern.
pub fn abstract_binary(net: &Network, x: &[f64]) -> Result<Nap> {
    let trace = net.forward(x)?;
    Ok(Nap {
        signature: net.signature().clone(),
        states: trace.hidden_post().map(ActivationState::of_post_activation).collect(),
    })
}

/// Statistical abstraction: a neuron takes a binary state when at least a
/// `delta` fraction of the inputs agree on it, and `*` otherwise.
pub fn abstract_statistical(net: &Network, inputs: &[Vec<f64>], cfg: AbstractionConfig) -> Result<Nap> {
    if inputs.is_empty() {
        return Err(Error::EmptyData(
            "statistical abstraction needs at least one input".into(),
        ));
    }
    let n = net.num_hidden();
    let mut active = vec![0usize; n];
    for x in inputs {
        let trace = net.forward(x)?;
        for (count, v) in active.iter_mut().zip(trace.hidden_post()) {
            if v > 0.0 {
                *count += 1;
            }
        }
    }
    let total = inputs.len() as f64;
    let reaches = |count: usize| count as f64 / total + 1e-12 >= cfg.delta;
    let states = active
        .into_iter()
        .map(|a| {
            if reaches(inputs.len() - a) {
                ActivationState::Zero
            } else if reaches(a) {
                ActivationState::One
            } else {
                ActivationState::Star
            }
        })
        .collect();
    Ok(Nap {
        signature: net.signature().clone(),
        states,
    })
}

/// Statistical abstraction over the rows labelled `class`: the most refined
/// NAP for that class.
pub fn class_nap(net: &Network, data: &crate::data::Dataset, class: usize, cfg: AbstractionConfig) -> Result<Nap> {
    let inputs = data.class_inputs(class);
    if inputs.is_empty() {
        return Err(Error::EmptyData(format!("no rows of class {class}")));
    }
    abstract_statistical(net, &inputs, cfg)
}

/// `true` iff `nap` subsumes the binary pattern of `x`.
pub fn exhibits(net: &Network, x: &[f64], nap: &Nap) -> Result<bool> {
    check_network(net, nap)?;
    let trace = net.forward(x)?;
    Ok(nap.matches_trace(&trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;

    fn sig22() -> Signature {
        Signature::new(vec![2, 2])
    }

    fn nap(s: &str) -> Nap {
        Nap::parse(&sig22(), s).unwrap()
    }

    #[test]
    fn coarsest_is_all_star() {
        let p = Nap::coarsest(&sig22());
        assert_eq!(p.to_string(), "****");
        assert_eq!(p.size(), 0);
    }

    #[test]
    fn displayed_chain_is_ordered() {
        let chain = ["****", "10**", "101*", "1010"].map(nap);
        for w in chain.windows(2) {
            assert!(w[0].subsumes(&w[1]).unwrap());
            assert!(!w[1].subsumes(&w[0]).unwrap());
        }
        assert!(chain[0].subsumes(&chain[3]).unwrap());
    }

    #[test]
    fn siblings_are_incomparable() {
        let a = nap("10**");
        let b = nap("11**");
        assert!(!a.subsumes(&b).unwrap());
        assert!(!b.subsumes(&a).unwrap());
        assert!(a.subsumes(&a).unwrap());
    }

    #[test]
    fn subsumes_rejects_mismatched_signature() {
        let a = nap("10**");
        let b = Nap::parse(&Signature::new(vec![4]), "10**").unwrap();
        assert!(matches!(a.subsumes(&b), Err(Error::SignatureMismatch { .. })));
    }

    #[test]
    fn sizes() {
        assert_eq!(nap("10**").size(), 2);
        assert_eq!(nap("1010").size(), 4);
    }

    #[test]
    fn coarsen_then_refine() {
        let sig = Signature::flat(2);
        let p = Nap::parse(&sig, "10").unwrap();
        let c = p.coarsen(0).unwrap();
        assert_eq!(c.to_string(), "*0");
        assert_eq!(c.size(), 1);
        assert_eq!(c.refine(0, &p).unwrap(), p);
        let star_ref = Nap::parse(&sig, "*0").unwrap();
        assert_eq!(c.refine(0, &star_ref).unwrap(), c);
        assert!(p.coarsen(2).is_err());
        assert!(p.coarsen_neuron(NeuronId::new(2, 0)).is_err());
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(Nap::parse(&sig22(), "10*").is_err());
        assert!(Nap::parse(&sig22(), "10*x").is_err());
    }

    #[test]
    fn delta_range() {
        assert!(AbstractionConfig::new(0.5).is_err());
        assert!(AbstractionConfig::new(1.01).is_err());
        assert!(AbstractionConfig::new(1.0).is_ok());
        assert!(AbstractionConfig::new(0.51).is_ok());
    }

    fn two_unit_net() -> Network {
        Network::new(
            1,
            vec![
                Layer::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]),
                Layer::new(vec![vec![1.0, 1.0]], vec![0.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn binary_abstraction_hand_example() {
        let net = two_unit_net();
        assert_eq!(abstract_binary(&net, &[2.0]).unwrap().to_string(), "10");
    }

    #[test]
    fn statistical_vote() {
        let net = Network::new(
            1,
            vec![
                Layer::new(vec![vec![1.0]], vec![0.0]),
                Layer::new(vec![vec![1.0]], vec![0.0]),
            ],
        )
        .unwrap();
        let cfg = AbstractionConfig::new(0.99).unwrap();
        // active on 99 of 100
        let mut xs: Vec<Vec<f64>> = (0..99).map(|_| vec![1.0]).collect();
        xs.push(vec![-1.0]);
        assert_eq!(abstract_statistical(&net, &xs, cfg).unwrap().to_string(), "1");
        // active on 50 of 100
        let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
        assert_eq!(abstract_statistical(&net, &xs, cfg).unwrap().to_string(), "*");
        assert!(abstract_statistical(&net, &[], cfg).is_err());
    }

    #[test]
    fn strict_delta_with_disagreement() {
        let net = two_unit_net();
        let rows = vec![
            crate::data::Sample { x: vec![1.0], label: 0 },
            crate::data::Sample {
                x: vec![-1.0],
                label: 0,
            },
            crate::data::Sample { x: vec![5.0], label: 1 },
        ];
        let data = crate::data::Dataset::new(rows).unwrap();
        let cfg = AbstractionConfig::new(1.0).unwrap();
        assert_eq!(class_nap(&net, &data, 0, cfg).unwrap().to_string(), "**");
        assert_eq!(class_nap(&net, &data, 1, cfg).unwrap().to_string(), "10");
        assert!(matches!(class_nap(&net, &data, 2, cfg), Err(Error::EmptyData(_))));
    }

    #[test]
    fn exhibits_cases() {
        let net = two_unit_net();
        let sig = Signature::flat(2);
        assert!(exhibits(&net, &[3.0], &Nap::coarsest(&sig)).unwrap());
        let own = abstract_binary(&net, &[3.0]).unwrap();
        assert!(exhibits(&net, &[3.0], &own).unwrap());
        // neuron 1 is zero at x = 3 but the NAP demands it active
        let wrong = Nap::parse(&sig, "*1").unwrap();
        assert!(!exhibits(&net, &[3.0], &wrong).unwrap());
    }

    #[test]
    fn meet_of_conflicting_naps_is_none() {
        assert!(nap("1***").meet(&nap("0***")).unwrap().is_none());
        assert_eq!(nap("1***").meet(&nap("*0**")).unwrap().unwrap().to_string(), "10**");
    }

    #[test]
    fn nap_file_round_trip() {
        let p = nap("1*0*");
        let file = NapFile::from(&p);
        let json = serde_json::to_string(&file).unwrap();
        assert_eq!(json, r#"{"signature":[2,2],"states":"1*0*"}"#);
        let back: Nap = json.parse::<NapFile>().unwrap().try_into().unwrap();
        assert_eq!(back, p);
    }
}
