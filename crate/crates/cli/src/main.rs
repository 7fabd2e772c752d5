//! `napkit` command-line interface.
//!
//! Data goes to stdout (or `--out`), diagnostics to stderr. Exit codes: 2 for
//! input errors, 3 when the most refined NAP fails, 4 for an Unknown verdict.

mod simulate;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use napkit::estimate::{gradient_search, opt_adv_prune, AttackConfig, GradientSearchConfig};
use napkit::eval::{adversarial_rejection, coverage_detail, non_ambiguity_empirical};
use napkit::io::{load_dataset, load_model, load_nap, load_query, nap_to_json};
use napkit::minimize::{
    coarsen, refine_search, sample_refine, stoch_coarsen, MinimizeReport, SampleRefineConfig, StochConfig, Termination,
    ThetaSchedule,
};
use napkit::verifier::{verify_with, VerifyOptions};
use napkit::volume::{expand_orthotope, log_volume, pseudo_center, DEFAULT_TOL};
use napkit::{
    check_non_ambiguity, class_nap, oracle_from_verifier, AbstractionConfig, ActivationState, Ambiguity, Dataset,
    InputDomain, Nap, Network, Oracle, SyntheticOracle, Verdict,
};

const EXIT_INPUT: u8 = 2;
const EXIT_REFINED_FAILS: u8 = 3;
const EXIT_UNKNOWN: u8 = 4;

#[derive(Parser)]
#[command(
    name = "napkit",
    version,
    about = "Neural activation pattern specifications for ReLU networks"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Class NAP of the rows labelled CLASS.
    Extract(ExtractArgs),
    /// Coarsen a NAP against an oracle.
    Minimize(MinimizeArgs),
    /// Decide a robustness query under a NAP.
    Verify(VerifyArgs),
    /// Orthotope estimate of a NAP region.
    Volume(VolumeArgs),
    /// Data coverage of a NAP, optionally with adversarial rejection.
    Coverage(CoverageArgs),
    /// Check that two NAPs share no input.
    Ambiguity(AmbiguityArgs),
    /// Verification-free estimate of essential neurons.
    Estimate(EstimateArgs),
    /// Call-count simulation on synthetic oracles; writes CSV.
    Simulate(simulate::SimulateArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    class: usize,
    #[arg(long, default_value_t = 0.99)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MinimizeAlgo {
    Coarsen,
    Stoch,
    Refine,
    SampleRefine,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleKind {
    Verifier,
    Synthetic,
}

#[derive(Args)]
struct MinimizeArgs {
    #[arg(long, value_enum)]
    algo: MinimizeAlgo,
    #[arg(long, value_enum, default_value_t = OracleKind::Verifier)]
    oracle: OracleKind,
    /// Clause file for the synthetic oracle.
    #[arg(long)]
    clauses: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    query: Option<PathBuf>,
    /// Most refined NAP; otherwise extracted from --data for the query class.
    #[arg(long)]
    nap: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.99)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Adaptive step size for stoch without --s.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Fixed sampling probability; overrides the size-derived default.
    #[arg(long)]
    theta: Option<f64>,
    /// Target size (stoch) or number of collected neurons (sample-refine).
    #[arg(long)]
    s: Option<usize>,
    /// Samples per iteration for sample-refine.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Maximum oracle calls.
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    /// Allow refine over more than 20 neurons.
    #[arg(long)]
    allow_large: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    nap: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Disable interval pruning (same verdicts, more LPs).
    #[arg(long)]
    no_pruning: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DomainArg {
    /// JSON `{"lower": [...], "upper": [...]}`; defaults to the unit box.
    #[arg(long)]
    domain: Option<PathBuf>,
}

impl DomainArg {
    fn load(&self, net: &Network) -> Result<InputDomain> {
        let domain = match &self.domain {
            Some(p) => {
                let d: InputDomain =
                    serde_json::from_str(&read(p)?).with_context(|| format!("domain file {}", p.display()))?;
                d.validate()?;
                d
            }
            None => InputDomain::unit(net.input_dim()),
        };
        if domain.dim() != net.input_dim() {
            bail!("domain has {} dimensions, the model {}", domain.dim(), net.input_dim());
        }
        Ok(domain)
    }
}

#[derive(Args)]
struct VolumeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    nap: PathBuf,
    /// Rows to pick the anchor from.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    domain: DomainArg,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    nap: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    class: usize,
    /// Also attack the covered rows with this L∞ radius.
    #[arg(long)]
    attack_eps: Option<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    domain: DomainArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AmbiguityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Two NAP files.
    #[arg(long, num_args = 2, required = true)]
    nap: Vec<PathBuf>,
    /// Also count rows exhibiting both.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    domain: DomainArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateAlgo {
    AdvPrune,
    Gradient,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    algo: EstimateAlgo,
    #[arg(long)]
    model: PathBuf,
    /// The refined NAP whose neurons are tested.
    #[arg(long)]
    nap: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Class whose rows are searched (gradient); all rows when omitted for adv-prune.
    #[arg(long)]
    class: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 40)]
    iterations: usize,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    domain: DomainArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Extract(a) => extract(a),
        Command::Minimize(a) => minimize(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Volume(a) => volume(a),
        Command::Coverage(a) => coverage_cmd(a),
        Command::Ambiguity(a) => ambiguity(a),
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate::run(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn model(path: &Path) -> Result<Network> {
    load_model(path).with_context(|| format!("model {}", path.display()))
}

fn dataset(path: &Path) -> Result<Dataset> {
    load_dataset(path).with_context(|| format!("dataset {}", path.display()))
}

fn nap_for(net: &Network, path: &Path) -> Result<Nap> {
    let nap = load_nap(path).with_context(|| format!("NAP {}", path.display()))?;
    net.signature().check_same(nap.signature())?;
    Ok(nap)
}

pub(crate) fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"), out)
}

fn extract(a: ExtractArgs) -> Result<u8> {
    let net = model(&a.model)?;
    let data = dataset(&a.data)?;
    let nap = class_nap(&net, &data, a.class, AbstractionConfig::new(a.delta)?)?;
    emit(&nap_to_json(&nap)?, a.out.as_deref())?;
    let count = |s: ActivationState| nap.states().iter().filter(|x| **x == s).count();
    eprintln!(
        "size {}: {} zero, {} one, {} star",
        nap.size(),
        count(ActivationState::Zero),
        count(ActivationState::One),
        count(ActivationState::Star)
    );
    Ok(0)
}

fn minimize(a: MinimizeArgs) -> Result<u8> {
    let (oracle, reference): (Box<dyn Oracle>, Nap) = match a.oracle {
        OracleKind::Synthetic => {
            let path = a.clauses.as_deref().context("--oracle synthetic needs --clauses")?;
            let o = SyntheticOracle::from_json(&read(path)?).with_context(|| format!("clauses {}", path.display()))?;
            let reference = match &a.nap {
                Some(p) => load_nap(p)?,
                None => Nap::new(
                    o.signature().clone(),
                    vec![ActivationState::One; o.signature().num_neurons()],
                )?,
            };
            (Box::new(o), reference)
        }
        OracleKind::Verifier => {
            let net = model(a.model.as_deref().context("--oracle verifier needs --model")?)?;
            let qpath = a.query.as_deref().context("--oracle verifier needs --query")?;
            let query = load_query(qpath).with_context(|| format!("query {}", qpath.display()))?;
            let reference = match (&a.nap, &a.data) {
                (Some(p), _) => nap_for(&net, p)?,
                (None, Some(d)) => class_nap(&net, &dataset(d)?, query.class, AbstractionConfig::new(a.delta)?)?,
                (None, None) => bail!("give the refined NAP with --nap or extract it from --data"),
            };
            (Box::new(oracle_from_verifier(net, query)?), reference)
        }
    };
    oracle.signature().check_same(reference.signature())?;
    let report: MinimizeReport = match a.algo {
        MinimizeAlgo::Coarsen => coarsen(&reference, &oracle, None)?,
        MinimizeAlgo::Refine => refine_search(&oracle, &reference, a.allow_large)?,
        MinimizeAlgo::Stoch => {
            let mut cfg = match a.s {
                Some(s) => StochConfig::with_target(s, a.budget, a.seed),
                None => {
                    let mut c = StochConfig::adaptive(a.budget, a.seed);
                    c.schedule = ThetaSchedule::Adaptive {
                        lambda: 0.0,
                        eta: a.eta,
                    };
                    c
                }
            };
            if let Some(t) = a.theta {
                cfg.schedule = ThetaSchedule::Fixed(t);
            }
            stoch_coarsen(&reference, &oracle, &cfg)?
        }
        MinimizeAlgo::SampleRefine => {
            let s = a.s.context("sample-refine needs --s")?;
            let mut cfg = SampleRefineConfig::new(a.k, s, a.budget, a.seed);
            cfg.theta = a.theta;
            sample_refine(&oracle, &reference, &cfg)?
        }
    };
    emit(&(report.to_json()? + "\n"), a.out.as_deref())?;
    eprintln!(
        "{} calls, terminated by {:?}, size {}",
        report.calls,
        report.terminated_by,
        report.size().map_or("-".to_string(), |s| s.to_string())
    );
    Ok(if report.terminated_by == Termination::RefinedFails {
        EXIT_REFINED_FAILS
    } else {
        0
    })
}

fn verify_cmd(a: VerifyArgs) -> Result<u8> {
    let net = model(&a.model)?;
    let nap = nap_for(&net, &a.nap)?;
    let query = load_query(&a.query).with_context(|| format!("query {}", a.query.display()))?;
    let r = verify_with(&net, &nap, &query, VerifyOptions { pruning: !a.no_pruning })?;
    emit_json(&r, a.out.as_deref())?;
    eprintln!("{:?}", r.verdict);
    Ok(if r.verdict == Verdict::Unknown { EXIT_UNKNOWN } else { 0 })
}

fn volume(a: VolumeArgs) -> Result<u8> {
    let net = model(&a.model)?;
    let nap = nap_for(&net, &a.nap)?;
    let domain = a.domain.load(&net)?;
    let rows = dataset(&a.data)?.inputs();
    let center = pseudo_center(&net, &nap, &rows, a.seed)?;
    let o = expand_orthotope(&net, &nap, &center, &domain, a.tol)?;
    let lv = log_volume(&o);
    let out = json!({
        "center": o.center,
        "lower": o.lower,
        "upper": o.upper,
        "log_volume": if lv.degenerate { None } else { Some(lv.value) },
        "degenerate": lv.degenerate,
    });
    emit_json(&out, a.out.as_deref())?;
    Ok(0)
}

fn coverage_cmd(a: CoverageArgs) -> Result<u8> {
    let net = model(&a.model)?;
    let nap = nap_for(&net, &a.nap)?;
    let data = dataset(&a.data)?;
    let cov = coverage_detail(&net, &nap, &data, a.class)?;
    let mut out = json!({ "coverage": cov });
    if let Some(eps) = a.attack_eps {
        let domain = a.domain.load(&net)?;
        let rows: Vec<_> = data.rows().iter().filter(|r| r.label == a.class).cloned().collect();
        let r = adversarial_rejection(&net, &nap, &rows, &domain, &AttackConfig::new(eps, a.seed), a.trials)?;
        out["rejection"] = serde_json::to_value(r)?;
    }
    emit_json(&out, a.out.as_deref())?;
    Ok(0)
}

fn ambiguity(a: AmbiguityArgs) -> Result<u8> {
    let net = model(&a.model)?;
    let p1 = nap_for(&net, &a.nap[0])?;
    let p2 = nap_for(&net, &a.nap[1])?;
    let domain = a.domain.load(&net)?;
    let result = check_non_ambiguity(&net, &p1, &p2, &domain)?;
    let (verdict, witness) = match &result {
        Ambiguity::Disjoint => ("Disjoint", None),
        Ambiguity::Overlap(x) => ("Overlap", Some(x.clone())),
        Ambiguity::Unknown => ("Unknown", None),
    };
    let mut body = json!({ "result": verdict, "witness": witness });
    if let Some(d) = &a.data {
        body["empirical"] = json!(non_ambiguity_empirical(&net, &[p1, p2], &dataset(d)?)?);
    }
    emit_json(&json!({ "ambiguity": body }), a.out.as_deref())?;
    Ok(if result == Ambiguity::Unknown { EXIT_UNKNOWN } else { 0 })
}

fn estimate(a: EstimateArgs) -> Result<u8> {
    let net = model(&a.model)?;
    let nap = nap_for(&net, &a.nap)?;
    let data = dataset(&a.data)?;
    let set = match a.algo {
        EstimateAlgo::AdvPrune => {
            let domain = a.domain.load(&net)?;
            let rows: Vec<_> = match a.class {
                Some(c) => data.rows().iter().filter(|r| r.label == c).cloned().collect(),
                None => data.rows().to_vec(),
            };
            let cfg = AttackConfig {
                iterations: a.iterations,
                restarts: a.restarts,
                ..AttackConfig::new(a.eps, a.seed)
            };
            opt_adv_prune(&net, &rows, &nap, &domain, &cfg)?
        }
        EstimateAlgo::Gradient => {
            let class = a.class.context("gradient search needs --class")?;
            let inputs = data.class_inputs(class);
            let defaults = GradientSearchConfig::defaults_for(&net, &inputs, class)?;
            let cfg = GradientSearchConfig {
                beta: a.beta.unwrap_or(defaults.beta),
                gamma: a.gamma.unwrap_or(defaults.gamma),
            };
            gradient_search(&net, &inputs, &nap, &cfg, class)?
        }
    };
    emit_json(&set, a.out.as_deref())?;
    eprintln!("{} neurons flagged", set.len());
    Ok(0)
}
