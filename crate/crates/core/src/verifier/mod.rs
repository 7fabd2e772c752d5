//! Complete verifier for NAP and NAP-augmented robustness.
//!
//! The region `B(x, ε) ∩ domain ∩ R_P` is split into linear pieces by
//! enumerating ReLU phases of the `*` neurons depth-first in global order.
//! Interval bounds prune phases that cannot occur, and each remaining piece
//! is decided by a small LP. Constraints use the closure of `R_P`
//! (`z >= 0` for `1`), so `Verified` is sound; counterexamples are
//! re-checked by a concrete forward pass with the strict pattern.

mod bounds;
mod phase;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::data::InputDomain;
use crate::error::{Error, Result};
use crate::nap::{ActivationState, Nap};
use crate::network::{margin_of, Network};

pub use bounds::{bound_propagation, Interval, Phase, PhaseAssignment};
pub use phase::{min_margin_under_phase, PhaseMin};

use phase::{max_lift, minimize_piece, LinearPiece};

/// Bound slack below which a phase is not considered excluded.
const BOUND_EPS: f64 = 1e-9;
/// Smallest lift accepted as a strict interior point.
const LIFT_EPS: f64 = 1e-9;

pub const DEFAULT_TAU: f64 = 1e-6;
pub const DEFAULT_PHASE_BUDGET: u64 = 1 << 20;
pub const DEFAULT_TIME_BUDGET_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub eps: f64,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_phase_budget() -> u64 {
    DEFAULT_PHASE_BUDGET
}

fn default_time_budget() -> u64 {
    DEFAULT_TIME_BUDGET_MS
}

/// Robustness property of a class over `domain ∩ ball ∩ R_P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessQuery {
    pub class: usize,
    pub domain: InputDomain,
    #[serde(default)]
    pub ball: Option<Ball>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_phase_budget")]
    pub phase_budget: u64,
    #[serde(default = "default_time_budget")]
    pub time_budget_ms: u64,
}

impl RobustnessQuery {
    pub fn new(class: usize, domain: InputDomain) -> Self {
        Self {
            class,
            domain,
            ball: None,
            tau: DEFAULT_TAU,
            phase_budget: DEFAULT_PHASE_BUDGET,
            time_budget_ms: DEFAULT_TIME_BUDGET_MS,
        }
    }

    pub fn with_ball(mut self, center: Vec<f64>, eps: f64) -> Self {
        self.ball = Some(Ball { center, eps });
        self
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        self.domain.validate()?;
        if self.domain.dim() != net.input_dim() {
            return Err(Error::Dimension {
                expected: net.input_dim(),
                actual: self.domain.dim(),
            });
        }
        net.check_class(self.class)?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if let Some(ball) = &self.ball {
            if !(ball.eps >= 0.0 && ball.eps.is_finite()) {
                return Err(Error::InvalidConfig(format!("eps must be >= 0, got {}", ball.eps)));
            }
            if !self.domain.contains(&ball.center) {
                return Err(Error::InvalidConfig("ball center lies outside the domain".into()));
            }
        }
        Ok(())
    }

    /// The queried input box: the domain, intersected with the ball if any.
    pub fn region(&self) -> InputDomain {
        match &self.ball {
            Some(b) => self.domain.intersect_ball(&b.center, b.eps),
            None => self.domain.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Verified,
    Falsified,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub x: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VerifyStats {
    /// Total phase assignments reached and handed to the LP.
    pub phases_explored: u64,
    /// Total phase assignments excluded by bound propagation.
    pub phases_pruned: u64,
    pub lp_solves: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationResult {
    pub verdict: Verdict,
    pub counterexample: Option<Counterexample>,
    pub stats: VerifyStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub pruning: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { pruning: true }
    }
}

/// Checks the robustness query over the region of `nap`.
pub fn verify(net: &Network, nap: &Nap, query: &RobustnessQuery) -> Result<VerificationResult> {
    verify_with(net, nap, query, VerifyOptions::default())
}

pub fn verify_with(
    net: &Network,
    nap: &Nap,
    query: &RobustnessQuery,
    opts: VerifyOptions,
) -> Result<VerificationResult> {
    net.signature().check_same(nap.signature())?;
    query.validate(net)?;
    let region = query.region();
    let mut stats = VerifyStats::default();
    let mut unresolved = false;
    let mut found: Option<Counterexample> = None;
    let rivals: Vec<Option<usize>> = if net.output_dim() == 1 {
        vec![None]
    } else {
        (0..net.output_dim()).filter(|k| *k != query.class).map(Some).collect()
    };
    let lift_masks = lift_masks(nap);
    let explorer = Explorer {
        net,
        region: &region,
        pruning: opts.pruning,
        phase_budget: query.phase_budget,
        deadline: Instant::now() + Duration::from_millis(query.time_budget_ms),
    };
    let flow = explorer.run(nap, &mut stats, &mut |phases, stats| {
        let piece = LinearPiece::new(net, phases);
        for rival in &rivals {
            stats.lp_solves += 1;
            let min = match minimize_piece(&piece, phases, &region.lower, &region.upper, query.class, *rival) {
                Ok(m) => m,
                Err(Error::Lp(_)) => {
                    unresolved = true;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (value, argmin) = match min {
                PhaseMin::Infeasible => return Ok(false),
                PhaseMin::Optimal { value, argmin } => (value, argmin),
            };
            if value > query.tau {
                continue;
            }
            if let Some(cx) = validate(net, nap, &region, query, &argmin) {
                found = Some(cx);
                return Ok(true);
            }
            // the optimum sits on a locked boundary: look for a point that
            // still violates with the locked neurons strictly off zero, first
            // on both sides, then only for the active ones
            let cap = value + (query.tau - value) / 2.0;
            let form = piece.margin_form(query.class, *rival);
            let mut lift_failed = false;
            for lifted in &lift_masks {
                stats.lp_solves += 1;
                match max_lift(&piece, phases, &region.lower, &region.upper, lifted, Some((&form, cap))) {
                    Ok(Some((x, t))) if t > LIFT_EPS => {
                        if let Some(cx) = validate(net, nap, &region, query, &x) {
                            found = Some(cx);
                            return Ok(true);
                        }
                        lift_failed = true;
                    }
                    Ok(Some(_)) | Ok(None) => {}
                    Err(Error::Lp(_)) => lift_failed = true,
                    Err(e) => return Err(e),
                }
            }
            unresolved |= lift_failed;
        }
        Ok(false)
    })?;
    let verdict = match (found.is_some(), flow, unresolved) {
        (true, _, _) => Verdict::Falsified,
        (false, Flow::Exhausted, _) | (false, _, true) => Verdict::Unknown,
        _ => Verdict::Verified,
    };
    Ok(VerificationResult {
        verdict,
        counterexample: found,
        stats,
    })
}

/// Neurons to push strictly off zero when searching for an interior point:
/// every locked neuron first, then only the active ones.
fn lift_masks(nap: &Nap) -> [Vec<bool>; 2] {
    [
        nap.states().iter().map(|s| s.is_refined()).collect(),
        nap.states().iter().map(|s| *s == ActivationState::One).collect(),
    ]
}

fn validate(
    net: &Network,
    nap: &Nap,
    region: &InputDomain,
    query: &RobustnessQuery,
    x: &[f64],
) -> Option<Counterexample> {
    let mut x = x.to_vec();
    region.clamp(&mut x);
    let trace = net.forward(&x).ok()?;
    if !nap.matches_trace(&trace) {
        return None;
    }
    let margin = margin_of(&trace.output, query.class);
    (margin <= query.tau).then_some(Counterexample { x, margin })
}

/// Outcome of the non-ambiguity check for two NAPs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Ambiguity {
    Disjoint,
    /// A point exhibiting both NAPs.
    Overlap(Vec<f64>),
    Unknown,
}

/// Decides whether some input of `domain` exhibits both NAPs.
pub fn check_non_ambiguity(net: &Network, p1: &Nap, p2: &Nap, domain: &InputDomain) -> Result<Ambiguity> {
    let mut stats = VerifyStats::default();
    check_non_ambiguity_with(net, p1, p2, domain, DEFAULT_PHASE_BUDGET, &mut stats)
}

pub fn check_non_ambiguity_with(
    net: &Network,
    p1: &Nap,
    p2: &Nap,
    domain: &InputDomain,
    phase_budget: u64,
    stats: &mut VerifyStats,
) -> Result<Ambiguity> {
    net.signature().check_same(p1.signature())?;
    net.signature().check_same(p2.signature())?;
    domain.validate()?;
    if domain.dim() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            actual: domain.dim(),
        });
    }
    let Some(meet) = p1.meet(p2)? else {
        return Ok(Ambiguity::Disjoint);
    };
    let lift_masks = lift_masks(&meet);
    let mut witness = None;
    let mut unresolved = false;
    let explorer = Explorer {
        net,
        region: domain,
        pruning: true,
        phase_budget,
        deadline: Instant::now() + Duration::from_millis(DEFAULT_TIME_BUDGET_MS),
    };
    let flow = explorer.run(&meet, stats, &mut |phases, stats| {
        let piece = LinearPiece::new(net, phases);
        let mut lift_failed = false;
        for lifted in &lift_masks {
            stats.lp_solves += 1;
            match max_lift(&piece, phases, &domain.lower, &domain.upper, lifted, None) {
                Ok(Some((mut x, t))) if t > LIFT_EPS => {
                    domain.clamp(&mut x);
                    let trace = net.forward(&x)?;
                    if p1.matches_trace(&trace) && p2.matches_trace(&trace) {
                        witness = Some(x);
                        return Ok(true);
                    }
                    lift_failed = true;
                }
                Ok(_) => {}
                Err(Error::Lp(_)) => lift_failed = true,
                Err(e) => return Err(e),
            }
        }
        unresolved |= lift_failed;
        Ok(false)
    })?;
    Ok(match (witness, flow, unresolved) {
        (Some(x), _, _) => Ambiguity::Overlap(x),
        (None, Flow::Exhausted, _) | (None, _, true) => Ambiguity::Unknown,
        _ => Ambiguity::Disjoint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Done,
    Stopped,
    Exhausted,
}

type LeafFn<'a> = dyn FnMut(&[Phase], &mut VerifyStats) -> Result<bool> + 'a;

/// Depth-first enumeration of the total phase assignments extending a NAP.
struct Explorer<'a> {
    net: &'a Network,
    region: &'a InputDomain,
    pruning: bool,
    phase_budget: u64,
    deadline: Instant,
}

impl Explorer<'_> {
    fn run(&self, nap: &Nap, stats: &mut VerifyStats, leaf: &mut LeafFn<'_>) -> Result<Flow> {
        let mut phases: Vec<Option<Phase>> = nap.states().iter().map(|s| Phase::of_state(*s)).collect();
        let stars: Vec<usize> = (0..phases.len()).filter(|i| phases[*i].is_none()).collect();
        self.visit(&mut phases, &stars, 0, stats, leaf)
    }

    fn visit(
        &self,
        phases: &mut Vec<Option<Phase>>,
        stars: &[usize],
        depth: usize,
        stats: &mut VerifyStats,
        leaf: &mut LeafFn<'_>,
    ) -> Result<Flow> {
        let remaining = (stars.len() - depth) as u32;
        let mut allowed = [true, true];
        if self.pruning {
            let bounds = bounds::propagate(self.net, &self.region.lower, &self.region.upper, phases);
            let contradicted = phases.iter().zip(&bounds).any(|(p, b)| match p {
                Some(Phase::Active) => b.hi < -BOUND_EPS,
                Some(Phase::Inactive) => b.lo > BOUND_EPS,
                None => false,
            });
            if contradicted {
                stats.phases_pruned = stats.phases_pruned.saturating_add(leaves(remaining));
                return Ok(Flow::Done);
            }
            if depth < stars.len() {
                let b = bounds[stars[depth]];
                allowed = [b.lo <= BOUND_EPS, b.hi >= -BOUND_EPS];
            }
        }
        if depth == stars.len() {
            if stats.phases_explored >= self.phase_budget || Instant::now() >= self.deadline {
                return Ok(Flow::Exhausted);
            }
            stats.phases_explored += 1;
            let total: Vec<Phase> = phases.iter().map(|p| p.expect("total assignment")).collect();
            return Ok(if leaf(&total, stats)? {
                Flow::Stopped
            } else {
                Flow::Done
            });
        }
        let ordinal = stars[depth];
        for (phase, ok) in [Phase::Inactive, Phase::Active].into_iter().zip(allowed) {
            if !ok {
                stats.phases_pruned = stats.phases_pruned.saturating_add(leaves(remaining - 1));
                continue;
            }
            phases[ordinal] = Some(phase);
            let flow = self.visit(phases, stars, depth + 1, stats, leaf)?;
            phases[ordinal] = None;
            if flow != Flow::Done {
                return Ok(flow);
            }
        }
        Ok(Flow::Done)
    }
}

fn leaves(remaining: u32) -> u64 {
    1u64.checked_shl(remaining).unwrap_or(u64::MAX)
}
