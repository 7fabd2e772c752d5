//! Interval bound propagation over an input box.

use serde::Serialize;

use crate::nap::{ActivationState, Nap};
use crate::network::Network;

/// ReLU phase of one hidden neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Phase {
    /// `z <= 0`, `ẑ = 0`.
    Inactive,
    /// `z >= 0`, `ẑ = z`.
    Active,
}

impl Phase {
    pub fn of_state(state: ActivationState) -> Option<Phase> {
        match state {
            ActivationState::Zero => Some(Phase::Inactive),
            ActivationState::One => Some(Phase::Active),
            ActivationState::Star => None,
        }
    }
}

/// A total phase assignment in global neuron order.
pub type PhaseAssignment = Vec<Phase>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Pre-activation bounds of every hidden neuron for inputs in
/// `[lower, upper]`, with the NAP's binary states locking phases.
pub fn bound_propagation(net: &Network, lower: &[f64], upper: &[f64], nap: &Nap) -> Vec<Interval> {
    let phases: Vec<Option<Phase>> = nap.states().iter().map(|s| Phase::of_state(*s)).collect();
    propagate(net, lower, upper, &phases)
}

/// Same as [`bound_propagation`] for a partial phase assignment. A locked
/// phase clamps the post-activation passed on to the next layer; the
/// reported pre-activation interval itself is not clamped, so a locked phase
/// that contradicts its interval stays visible.
pub(crate) fn propagate(net: &Network, lower: &[f64], upper: &[f64], phases: &[Option<Phase>]) -> Vec<Interval> {
    let layers = net.layers();
    let hidden = layers.len() - 1;
    let mut out = Vec::with_capacity(phases.len());
    let mut lo: Vec<f64> = lower.to_vec();
    let mut hi: Vec<f64> = upper.to_vec();
    let mut ordinal = 0;
    for layer in &layers[..hidden] {
        let mut next_lo = Vec::with_capacity(layer.outputs());
        let mut next_hi = Vec::with_capacity(layer.outputs());
        for (row, b) in layer.weights.iter().zip(&layer.bias) {
            let mut zl = *b;
            let mut zh = *b;
            for (w, (l, h)) in row.iter().zip(lo.iter().zip(&hi)) {
                if *w >= 0.0 {
                    zl += w * l;
                    zh += w * h;
                } else {
                    zl += w * h;
                    zh += w * l;
                }
            }
            out.push(Interval { lo: zl, hi: zh });
            let (pl, ph) = match phases[ordinal] {
                Some(Phase::Inactive) => (0.0, 0.0),
                _ => (zl.max(0.0), zh.max(0.0)),
            };
            next_lo.push(pl);
            next_hi.push(ph);
            ordinal += 1;
        }
        lo = next_lo;
        hi = next_hi;
    }
    out
}
