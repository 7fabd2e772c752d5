//! Call counts of the minimization algorithms on synthetic oracles.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use napkit::minimize::{
    coarsen, refine_search, sample_refine, stoch_coarsen, MinimizeReport, SampleRefineConfig, StochConfig, Termination,
    ThetaSchedule,
};
use napkit::{ActivationState, Nap, Oracle, Signature, SyntheticOracle};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimAlgo {
    Coarsen,
    Stoch,
    Refine,
    SampleRefine,
}

impl SimAlgo {
    fn name(self) -> &'static str {
        match self {
            SimAlgo::Coarsen => "coarsen",
            SimAlgo::Stoch => "stoch",
            SimAlgo::Refine => "refine",
            SimAlgo::SampleRefine => "sample-refine",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThetaMode {
    Fixed,
    Adaptive,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    algo: SimAlgo,
    /// Number of neurons.
    #[arg(long)]
    n: Option<usize>,
    /// Target size for stoch and sample-refine.
    #[arg(long)]
    s: Option<usize>,
    /// Size of the single planted clause (default: --s, else 2).
    #[arg(long)]
    planted_size: Option<usize>,
    /// Fixed clause file instead of a fresh planted clause per trial.
    #[arg(long, conflicts_with = "planted_size")]
    clauses: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = ThetaMode::Fixed)]
    theta_mode: ThetaMode,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    #[arg(long)]
    allow_large: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Trial {
    calls: u64,
    success: bool,
}

pub fn run(a: SimulateArgs) -> Result<u8> {
    let fixed = match &a.clauses {
        Some(p) => Some(
            SyntheticOracle::from_json(
                &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            )
            .with_context(|| format!("clauses {}", p.display()))?,
        ),
        None => None,
    };
    let n = match (&fixed, a.n) {
        (Some(o), None) => o.signature().num_neurons(),
        (Some(o), Some(n)) if n == o.signature().num_neurons() => n,
        (Some(_), Some(_)) => bail!("--n disagrees with the clause file"),
        (None, Some(n)) => n,
        (None, None) => bail!("give --n or --clauses"),
    };
    let planted = a.planted_size.or(a.s).unwrap_or(2);
    if fixed.is_none() && (planted == 0 || planted > n) {
        bail!("planted size {planted} must be in 1..={n}");
    }
    let needs_s = a.algo == SimAlgo::SampleRefine || (a.algo == SimAlgo::Stoch && a.theta_mode == ThetaMode::Fixed);
    if needs_s && a.s.is_none() {
        bail!("{} needs --s", a.algo.name());
    }
    if a.trials == 0 {
        bail!("--trials must be positive");
    }
    let trials: Vec<Trial> = (0..a.trials)
        .into_par_iter()
        .map(|t| run_trial(&a, fixed.as_ref(), n, planted, t))
        .collect::<Result<_>>()?;

    let s_col = a.s.unwrap_or(planted);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["algo", "n", "s", "trial", "calls", "success"])?;
    for (t, r) in trials.iter().enumerate() {
        csv.write_record([
            a.algo.name().to_string(),
            n.to_string(),
            s_col.to_string(),
            t.to_string(),
            r.calls.to_string(),
            (r.success as u8).to_string(),
        ])?;
    }
    let mut calls: Vec<u64> = trials.iter().map(|r| r.calls).collect();
    calls.sort_unstable();
    let m = calls.len();
    let median = if m % 2 == 1 {
        calls[m / 2] as f64
    } else {
        (calls[m / 2 - 1] + calls[m / 2]) as f64 / 2.0
    };
    let mean = calls.iter().sum::<u64>() as f64 / m as f64;
    let rate = trials.iter().filter(|r| r.success).count() as f64 / m as f64;
    for (label, value) in [("median", median), ("mean", mean)] {
        csv.write_record([
            a.algo.name().to_string(),
            n.to_string(),
            s_col.to_string(),
            label.to_string(),
            value.to_string(),
            rate.to_string(),
        ])?;
    }
    let bytes = csv.into_inner().map_err(|e| e.into_error())?;
    crate::emit(&String::from_utf8(bytes)?, a.out.as_deref())?;
    eprintln!("median calls {median}, success rate {rate}");
    Ok(0)
}

/// Each trial draws its clause, reference pattern and algorithm seed from
/// its own stream, so results do not depend on scheduling.
fn run_trial(a: &SimulateArgs, fixed: Option<&SyntheticOracle>, n: usize, planted: usize, t: usize) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    rng.set_stream(t as u64);
    let sig = Signature::flat(n);
    let oracle = match fixed {
        Some(o) => o.clone(),
        None => SyntheticOracle::new(sig.clone(), vec![sample(&mut rng, n, planted).into_vec()])?,
    };
    let states = (0..n)
        .map(|_| {
            if rng.gen() {
                ActivationState::One
            } else {
                ActivationState::Zero
            }
        })
        .collect();
    let reference = Nap::new(sig, states)?;
    let seed: u64 = rng.gen();
    let report: MinimizeReport = match a.algo {
        SimAlgo::Coarsen => coarsen(&reference, &oracle, None)?,
        SimAlgo::Refine => refine_search(&oracle, &reference, a.allow_large)?,
        SimAlgo::Stoch => {
            let mut cfg = match a.theta_mode {
                ThetaMode::Fixed => StochConfig::with_target(a.s.unwrap_or(planted), a.budget, seed),
                ThetaMode::Adaptive => {
                    let mut c = StochConfig::adaptive(a.budget, seed);
                    c.schedule = ThetaSchedule::Adaptive {
                        lambda: 0.0,
                        eta: a.eta,
                    };
                    c.target_size = a.s;
                    c
                }
            };
            if let (ThetaMode::Fixed, Some(theta)) = (a.theta_mode, a.theta) {
                cfg.schedule = ThetaSchedule::Fixed(theta);
            }
            stoch_coarsen(&reference, &oracle, &cfg)?
        }
        SimAlgo::SampleRefine => {
            let mut cfg = SampleRefineConfig::new(a.k, a.s.unwrap_or(planted), a.budget, seed);
            cfg.theta = a.theta;
            sample_refine(&oracle, &reference, &cfg)?
        }
    };
    let success = report.passes && matches!(report.terminated_by, Termination::Minimal | Termination::SizeTarget);
    Ok(Trial {
        calls: report.calls,
        success,
    })
}
