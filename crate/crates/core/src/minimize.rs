//! Searches for minimal NAPs that still pass a verification oracle.
//!
//! All algorithms issue oracle calls sequentially and count every call,
//! including failing and `Unknown` ones. `Unknown` is treated as a failure,
//! so the neuron under test stays refined.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::nap::{ActivationState, Nap};
use crate::oracle::{CountingOracle, Oracle, OracleVerdict, Outcome};

/// Largest signature `refine_search` accepts without an explicit override.
pub const REFINE_SEARCH_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    /// Every single-neuron coarsening of the result fails.
    Minimal,
    /// The result passes and is within the requested size.
    SizeTarget,
    /// The call budget ran out; the result is the best passing NAP seen.
    Budget,
    /// The most refined NAP itself fails.
    RefinedFails,
    /// The size limit was reached without a passing NAP.
    SizeExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    #[serde(serialize_with = "nap_text")]
    pub nap: Nap,
    pub size: usize,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeReport {
    #[serde(serialize_with = "opt_nap_text")]
    pub result: Option<Nap>,
    pub signature: Vec<usize>,
    pub calls: u64,
    pub terminated_by: Termination,
    /// Whether the oracle passed `result` when it was last checked.
    pub passes: bool,
    /// Neurons picked per iteration (sample refine only).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub picked: Vec<usize>,
    pub trace: Vec<TraceEntry>,
}

impl MinimizeReport {
    pub fn size(&self) -> Option<usize> {
        self.result.as_ref().map(Nap::size)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn nap_text<S: Serializer>(nap: &Nap, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(nap)
}

fn opt_nap_text<S: Serializer>(nap: &Option<Nap>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match nap {
        Some(n) => s.collect_str(n),
        None => s.serialize_none(),
    }
}

/// Counts calls and records the trace.
struct Session<'a, O: Oracle> {
    oracle: CountingOracle<&'a O>,
    trace: Vec<TraceEntry>,
    budget: u64,
}

impl<'a, O: Oracle> Session<'a, O> {
    fn new(oracle: &'a O, budget: u64) -> Self {
        Self {
            oracle: CountingOracle::new(oracle),
            trace: Vec::new(),
            budget,
        }
    }

    fn exhausted(&self) -> bool {
        self.oracle.calls() >= self.budget
    }

    fn check(&mut self, nap: &Nap, theta: Option<f64>) -> Result<OracleVerdict> {
        let verdict = self.oracle.check(nap)?;
        self.trace.push(TraceEntry {
            nap: nap.clone(),
            size: nap.size(),
            outcome: verdict.outcome,
            theta,
        });
        Ok(verdict)
    }

    fn finish(
        self,
        result: Option<Nap>,
        terminated_by: Termination,
        passes: bool,
        picked: Vec<usize>,
    ) -> MinimizeReport {
        let signature = self.oracle.signature().sizes().to_vec();
        MinimizeReport {
            result,
            signature,
            calls: self.oracle.calls(),
            terminated_by,
            passes,
            picked,
            trace: self.trace,
        }
    }
}

/// Deterministic single-neuron coarsening over `order` (the global order
/// when `None`): keeps a neuron coarsened whenever the oracle still passes.
/// Uses exactly `1 + |order|` calls when the refined NAP passes.
pub fn coarsen<O: Oracle>(refined: &Nap, oracle: &O, order: Option<&[usize]>) -> Result<MinimizeReport> {
    oracle.signature().check_same(refined.signature())?;
    let n = refined.len();
    let order: Vec<usize> = match order {
        Some(o) => {
            if o.len() != n || o.iter().copied().sorted().ne(0..n) {
                return Err(Error::InvalidConfig(
                    "coarsen order must be a permutation of all neurons".into(),
                ));
            }
            o.to_vec()
        }
        None => (0..n).collect(),
    };
    let mut session = Session::new(oracle, u64::MAX);
    if !session.check(refined, None)?.passed() {
        return Ok(session.finish(None, Termination::RefinedFails, false, Vec::new()));
    }
    let mut current = refined.clone();
    for i in order {
        let candidate = current.coarsen(i)?;
        if session.check(&candidate, None)?.passed() {
            current = candidate;
        }
    }
    Ok(session.finish(Some(current), Termination::Minimal, true, Vec::new()))
}

/// How neurons outside the candidate set are filled in by [`sample_nap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outside {
    Star,
    Keep,
}

/// Each candidate independently takes `reference`'s state with probability
/// `theta`, else `*`. Other neurons are `*` or keep `reference`'s state.
pub fn sample_nap<R: Rng + ?Sized>(
    candidates: &[usize],
    theta: f64,
    rng: &mut R,
    reference: &Nap,
    outside: Outside,
) -> Nap {
    let mut states = match outside {
        Outside::Star => vec![ActivationState::Star; reference.len()],
        Outside::Keep => reference.states().to_vec(),
    };
    for &i in candidates {
        let keep = rng.gen::<f64>() < theta;
        states[i] = if keep {
            reference.state(i)
        } else {
            ActivationState::Star
        };
    }
    Nap::new(reference.signature().clone(), states).expect("same length")
}

pub fn sigmoid(lambda: f64) -> f64 {
    1.0 / (1.0 + (-lambda).exp())
}

/// `λ - η (v - 1/e)`: a pass lowers θ, a failure raises it, steering the
/// pass rate towards `1/e`.
pub fn update_theta(lambda: f64, passed: bool, eta: f64) -> f64 {
    let v = if passed { 1.0 } else { 0.0 };
    lambda - eta * (v - (-1.0f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSchedule {
    Fixed(f64),
    Adaptive { lambda: f64, eta: f64 },
}

impl ThetaSchedule {
    /// `θ = e^{-1/s}`.
    pub fn for_size(s: usize) -> Self {
        ThetaSchedule::Fixed((-1.0 / s.max(1) as f64).exp())
    }

    pub fn adaptive() -> Self {
        ThetaSchedule::Adaptive { lambda: 0.0, eta: 0.1 }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            ThetaSchedule::Fixed(t) => t,
            ThetaSchedule::Adaptive { lambda, .. } => sigmoid(lambda),
        }
    }

    pub fn observe(&mut self, passed: bool) {
        if let ThetaSchedule::Adaptive { lambda, eta } = self {
            *lambda = update_theta(*lambda, passed, *eta);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochConfig {
    pub schedule: ThetaSchedule,
    /// Stop once the passing NAP has at most this many refined neurons.
    pub target_size: Option<usize>,
    pub max_calls: u64,
    pub seed: u64,
    /// Consecutive non-shrinking passes that count as convergence when no
    /// target size is given.
    pub patience: usize,
}

impl StochConfig {
    pub fn with_target(s: usize, max_calls: u64, seed: u64) -> Self {
        Self {
            schedule: ThetaSchedule::for_size(s),
            target_size: Some(s),
            max_calls,
            seed,
            patience: 3,
        }
    }

    pub fn adaptive(max_calls: u64, seed: u64) -> Self {
        Self {
            schedule: ThetaSchedule::adaptive(),
            target_size: None,
            max_calls,
            seed,
            patience: 3,
        }
    }
}

/// Randomized coarsening: repeatedly coarsens a random subset of the
/// current candidates and shrinks the candidates to any sample that passes.
pub fn stoch_coarsen<O: Oracle>(refined: &Nap, oracle: &O, cfg: &StochConfig) -> Result<MinimizeReport> {
    oracle.signature().check_same(refined.signature())?;
    if let ThetaSchedule::Fixed(t) = cfg.schedule {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig(format!("theta must be in [0, 1], got {t}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut schedule = cfg.schedule;
    let mut session = Session::new(oracle, cfg.max_calls);
    if session.exhausted() {
        return Ok(session.finish(None, Termination::Budget, false, Vec::new()));
    }
    if !session.check(refined, None)?.passed() {
        return Ok(session.finish(None, Termination::RefinedFails, false, Vec::new()));
    }
    let mut current = refined.clone();
    let mut candidates = refined.refined();
    let mut streak = 0;
    loop {
        if let Some(s) = cfg.target_size {
            if current.size() <= s {
                return Ok(session.finish(Some(current), Termination::SizeTarget, true, Vec::new()));
            }
        } else if streak >= cfg.patience {
            break;
        }
        if session.exhausted() {
            return Ok(session.finish(Some(current), Termination::Budget, true, Vec::new()));
        }
        let theta = schedule.theta();
        let sample = sample_nap(&candidates, theta, &mut rng, refined, Outside::Star);
        let passed = session.check(&sample, Some(theta))?.passed();
        schedule.observe(passed);
        if passed {
            let kept = sample.refined();
            if kept == candidates {
                streak += 1;
            } else {
                streak = 0;
            }
            candidates = kept;
            current = sample;
        }
    }
    // certify minimality over the survivors
    for i in current.refined() {
        if session.exhausted() {
            return Ok(session.finish(Some(current), Termination::Budget, true, Vec::new()));
        }
        let candidate = current.coarsen(i)?;
        if session.check(&candidate, None)?.passed() {
            current = candidate;
        }
    }
    Ok(session.finish(Some(current), Termination::Minimal, true, Vec::new()))
}

/// Exhaustive search by increasing size over the refined neurons of
/// `reference`; the first passing NAP has globally minimum size.
pub fn refine_search<O: Oracle>(oracle: &O, reference: &Nap, allow_large: bool) -> Result<MinimizeReport> {
    oracle.signature().check_same(reference.signature())?;
    if reference.len() > REFINE_SEARCH_LIMIT && !allow_large {
        return Err(Error::InvalidConfig(format!(
            "refine search over {} neurons needs an explicit override (limit {REFINE_SEARCH_LIMIT})",
            reference.len()
        )));
    }
    let mut session = Session::new(oracle, u64::MAX);
    if !session.check(reference, None)?.passed() {
        return Ok(session.finish(None, Termination::RefinedFails, false, Vec::new()));
    }
    let refined = reference.refined();
    for k in 0..refined.len() {
        for comb in refined.iter().copied().combinations(k) {
            let candidate = Nap::restrict(reference, comb);
            if session.check(&candidate, None)?.passed() {
                return Ok(session.finish(Some(candidate), Termination::Minimal, true, Vec::new()));
            }
        }
    }
    // only the reference itself passes
    Ok(session.finish(Some(reference.clone()), Termination::Minimal, true, Vec::new()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRefineConfig {
    /// Defaults to `(s/(s+1))^s`.
    pub theta: Option<f64>,
    /// Samples per iteration.
    pub k: usize,
    /// Maximum number of collected neurons.
    pub s: usize,
    pub max_calls: u64,
    pub seed: u64,
    /// Neurons collected before the first iteration.
    pub seed_set: Vec<usize>,
}

impl SampleRefineConfig {
    pub fn new(k: usize, s: usize, max_calls: u64, seed: u64) -> Self {
        Self {
            theta: None,
            k,
            s,
            max_calls,
            seed,
            seed_set: Vec::new(),
        }
    }

    pub fn default_theta(s: usize) -> f64 {
        let m = s as f64;
        (m / (m + 1.0)).powf(m)
    }
}

/// Statistical refinement: each iteration samples `k` NAPs over the
/// uncollected neurons (collected ones stay refined) and collects the neuron
/// that appears most often in passing samples.
pub fn sample_refine<O: Oracle>(oracle: &O, reference: &Nap, cfg: &SampleRefineConfig) -> Result<MinimizeReport> {
    oracle.signature().check_same(reference.signature())?;
    if cfg.k == 0 {
        return Err(Error::InvalidConfig("sample refine needs k >= 1".into()));
    }
    if (cfg.k as u64).saturating_mul(cfg.s as u64) > cfg.max_calls {
        return Err(Error::InvalidConfig(format!(
            "k * s = {} exceeds the call budget {}",
            cfg.k * cfg.s,
            cfg.max_calls
        )));
    }
    let theta = cfg.theta.unwrap_or_else(|| SampleRefineConfig::default_theta(cfg.s));
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidConfig(format!("theta must be in [0, 1], got {theta}")));
    }
    let refined = reference.refined();
    let mut visited: Vec<usize> = Vec::new();
    for &i in &cfg.seed_set {
        if !refined.contains(&i) {
            return Err(Error::InvalidConfig(format!(
                "seed neuron {i} is not refined in the reference"
            )));
        }
        if !visited.contains(&i) {
            visited.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut session = Session::new(oracle, cfg.max_calls);
    if !session.check(reference, None)?.passed() {
        return Ok(session.finish(None, Termination::RefinedFails, false, Vec::new()));
    }
    let mut picked = Vec::new();
    loop {
        let current = Nap::restrict(reference, visited.iter().copied());
        if visited.len() >= cfg.s {
            if session.exhausted() {
                return Ok(session.finish(Some(current), Termination::Budget, false, picked));
            }
            let passes = session.check(&current, None)?.passed();
            let end = if passes {
                Termination::SizeTarget
            } else {
                Termination::SizeExhausted
            };
            return Ok(session.finish(Some(current), end, passes, picked));
        }
        if session.exhausted() {
            return Ok(session.finish(Some(current), Termination::Budget, false, picked));
        }
        if session.check(&current, None)?.passed() {
            return Ok(session.finish(Some(current), Termination::SizeTarget, true, picked));
        }
        let unvisited: Vec<usize> = refined.iter().copied().filter(|i| !visited.contains(i)).collect();
        if unvisited.is_empty() {
            return Ok(session.finish(Some(current), Termination::SizeExhausted, false, picked));
        }
        if session.oracle.calls() + cfg.k as u64 > session.budget {
            return Ok(session.finish(Some(current), Termination::Budget, false, picked));
        }
        let mut counts = vec![0u64; reference.len()];
        for _ in 0..cfg.k {
            // visited neurons are outside the candidates, so they keep their state
            let sample = sample_nap(&unvisited, theta, &mut rng, reference, Outside::Keep);
            if session.check(&sample, Some(theta))?.passed() {
                for &i in &unvisited {
                    if sample.state(i).is_refined() {
                        counts[i] += 1;
                    }
                }
            }
        }
        // lowest ordinal wins ties
        let best = unvisited
            .iter()
            .copied()
            .fold(None::<usize>, |best, i| match best {
                Some(b) if counts[b] >= counts[i] => Some(b),
                _ => Some(i),
            })
            .expect("nonempty");
        visited.push(best);
        picked.push(best);
    }
}
