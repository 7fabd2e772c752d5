//! Verification-free estimates of essential neurons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{InputDomain, Sample};
use crate::error::{Error, Result};
use crate::nap::{abstract_binary, ActivationState, Nap};
use crate::network::{margin_of, Network, NeuronId};

/// L∞ projected gradient descent on the margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub eps: f64,
    /// Step size; `eps / 10` when `None`.
    pub alpha: Option<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(eps: f64, seed: u64) -> Self {
        Self {
            eps,
            alpha: None,
            iterations: 40,
            restarts: 5,
            seed,
        }
    }

    pub fn step(&self) -> f64 {
        self.alpha.unwrap_or(self.eps / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!("eps must be >= 0, got {}", self.eps)));
        }
        let alpha = self.step();
        if alpha < 0.0 || !alpha.is_finite() || (self.eps > 0.0 && alpha == 0.0) {
            return Err(Error::InvalidConfig(format!("step must be positive, got {alpha}")));
        }
        if alpha > self.eps && self.iterations != 1 {
            return Err(Error::InvalidConfig(format!("step {alpha} exceeds eps {}", self.eps)));
        }
        Ok(())
    }

    /// Generator for the attacks on row `row`; independent of scheduling.
    pub fn rng_for(&self, row: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(row as u64);
        rng
    }
}

/// Returns the first adversarial example found over all restarts.
pub fn pgd_attack(
    net: &Network,
    x: &[f64],
    class: usize,
    domain: &InputDomain,
    cfg: &AttackConfig,
) -> Result<Option<Vec<f64>>> {
    let mut rng = cfg.rng_for(0);
    Ok(pgd_restarts(net, x, class, domain, cfg, &mut rng, true)?
        .into_iter()
        .next())
}

/// One attack per restart; returns the successful ones in restart order.
/// With `first_only` the search stops at the first success.
pub fn pgd_restarts<R: Rng + ?Sized>(
    net: &Network,
    x: &[f64],
    class: usize,
    domain: &InputDomain,
    cfg: &AttackConfig,
    rng: &mut R,
    first_only: bool,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    net.check_class(class)?;
    if domain.dim() != x.len() {
        return Err(Error::Dimension {
            expected: domain.dim(),
            actual: x.len(),
        });
    }
    let mut found = Vec::new();
    if cfg.eps == 0.0 || net.margin(x, class)? <= 0.0 {
        return Ok(found);
    }
    let region = domain.intersect_ball(x, cfg.eps);
    let alpha = cfg.step();
    for _ in 0..cfg.restarts {
        let mut xa: Vec<f64> = region
            .lower
            .iter()
            .zip(&region.upper)
            .map(|(l, u)| if u > l { rng.gen_range(*l..=*u) } else { *l })
            .collect();
        let mut hit = None;
        for _ in 0..=cfg.iterations {
            let trace = net.forward(&xa)?;
            if margin_of(&trace.output, class) <= 0.0 {
                hit = Some(xa.clone());
                break;
            }
            let g = net.grad_margin_wrt_input(&xa, class)?;
            for (v, gi) in xa.iter_mut().zip(&g) {
                if *gi > 0.0 {
                    *v -= alpha;
                } else if *gi < 0.0 {
                    *v += alpha;
                }
            }
            region.clamp(&mut xa);
        }
        if let Some(adv) = hit {
            found.push(adv);
            if first_only {
                break;
            }
        }
    }
    Ok(found)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// An adversarial example disagrees with the refined state.
    AdversarialFlip,
    /// Active at a near-boundary sample with a steep gradient, state `0`.
    SteepNearBoundary,
    /// Inactive at a misclassified sample, state `1`.
    InactiveMisclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedNeuron {
    #[serde(skip)]
    pub ordinal: usize,
    pub layer: usize,
    pub index: usize,
    pub witness: Vec<f64>,
    pub rule: Rule,
}

/// Flagged neurons ordered by ordinal, one witness each.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct NeuronSet {
    pub neurons: Vec<FlaggedNeuron>,
}

impl NeuronSet {
    pub fn ordinals(&self) -> Vec<usize> {
        self.neurons.iter().map(|n| n.ordinal).collect()
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    /// First witness per ordinal wins.
    fn from_candidates(net: &Network, mut found: Vec<(usize, Vec<f64>, Rule)>) -> Result<Self> {
        found.sort_by_key(|(ordinal, _, _)| *ordinal);
        found.dedup_by_key(|(ordinal, _, _)| *ordinal);
        let neurons = found
            .into_iter()
            .map(|(ordinal, witness, rule)| {
                let NeuronId { layer, index } = net.signature().neuron(ordinal)?;
                Ok(FlaggedNeuron {
                    ordinal,
                    layer,
                    index,
                    witness,
                    rule,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { neurons })
    }
}

/// Refined neurons of `refined` whose binary state disagrees with `observed`.
pub fn xor_flags(refined: &Nap, observed: &Nap) -> Result<Vec<usize>> {
    refined.signature().check_same(observed.signature())?;
    Ok(refined
        .states()
        .iter()
        .zip(observed.states())
        .enumerate()
        .filter(|(_, (p, o))| p.is_refined() && o.is_refined() && p != o)
        .map(|(i, _)| i)
        .collect())
}

/// Attacks every row against its own label and flags each refined neuron
/// whose state flips at some adversarial example.
pub fn opt_adv_prune(
    net: &Network,
    rows: &[Sample],
    refined: &Nap,
    domain: &InputDomain,
    cfg: &AttackConfig,
) -> Result<NeuronSet> {
    net.signature().check_same(refined.signature())?;
    cfg.validate()?;
    let per_row: Vec<Vec<(usize, Vec<f64>, Rule)>> = rows
        .par_iter()
        .enumerate()
        .map(|(j, row)| {
            let mut rng = cfg.rng_for(j);
            let mut hits = Vec::new();
            for adv in pgd_restarts(net, &row.x, row.label, domain, cfg, &mut rng, false)? {
                let pattern = abstract_binary(net, &adv)?;
                for i in xor_flags(refined, &pattern)? {
                    hits.push((i, adv.clone(), Rule::AdversarialFlip));
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    NeuronSet::from_candidates(net, per_row.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSearchConfig {
    pub beta: f64,
    pub gamma: f64,
}

impl GradientSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::InvalidConfig("beta and gamma must be positive".into()));
        }
        Ok(())
    }

    /// `beta = 0.1 · median |margin|`, `gamma = median |∂margin/∂ẑ|` over all
    /// neuron/row pairs.
    pub fn defaults_for(net: &Network, inputs: &[Vec<f64>], class: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyData("gradient search needs at least one input".into()));
        }
        let mut margins = Vec::with_capacity(inputs.len());
        let mut grads = Vec::new();
        for x in inputs {
            let trace = net.forward(x)?;
            margins.push(margin_of(&trace.output, class).abs());
            grads.extend(net.grad_margin_wrt_all_hidden(&trace, class).into_iter().map(f64::abs));
        }
        Ok(Self {
            beta: 0.1 * median(&mut margins),
            gamma: median(&mut grads),
        })
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Gradient heuristic: a `0` neuron that is active at a sample close to the
/// decision boundary with a steep margin gradient, or a `1` neuron that is
/// inactive at a misclassified sample, is flagged.
pub fn gradient_search(
    net: &Network,
    inputs: &[Vec<f64>],
    refined: &Nap,
    cfg: &GradientSearchConfig,
    class: usize,
) -> Result<NeuronSet> {
    net.signature().check_same(refined.signature())?;
    net.check_class(class)?;
    cfg.validate()?;
    let mut found = Vec::new();
    for x in inputs {
        let trace = net.forward(x)?;
        let margin = margin_of(&trace.output, class);
        let grads = net.grad_margin_wrt_all_hidden(&trace, class);
        for (i, (post, g)) in trace.hidden_post().zip(&grads).enumerate() {
            let state = refined.state(i);
            if post > 0.0 {
                if margin.abs() < cfg.beta && g.abs() > cfg.gamma && state == ActivationState::Zero {
                    found.push((i, x.clone(), Rule::SteepNearBoundary));
                }
            } else if margin < 0.0 && state == ActivationState::One {
                found.push((i, x.clone(), Rule::InactiveMisclassified));
            }
        }
    }
    NeuronSet::from_candidates(net, found)
}
