//! Linear programs over one total phase assignment.
//!
//! With every ReLU phase fixed the network is affine in `x`, so each hidden
//! pre-activation and output is `a·x + c`. The LP variables are the shifted
//! inputs `y = x - lower`, which keeps them nonnegative as the simplex needs.

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::network::{dot, Network};

use super::bounds::Phase;

pub(crate) const MAX_PIVOTS: usize = 20_000;

#[derive(Debug, Clone)]
pub(crate) struct Affine {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl Affine {
    fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) + self.offset
    }

    fn minus(&self, other: &Affine) -> Affine {
        Affine {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
            offset: self.offset - other.offset,
        }
    }
}

/// Affine form of every hidden pre-activation and every output under a
/// total phase assignment.
#[derive(Debug, Clone)]
pub(crate) struct LinearPiece {
    pub hidden: Vec<Affine>,
    pub output: Vec<Affine>,
}

impl LinearPiece {
    pub fn new(net: &Network, phases: &[Phase]) -> Self {
        let d = net.input_dim();
        let mut current: Vec<Affine> = (0..d)
            .map(|i| {
                let mut coeffs = vec![0.0; d];
                coeffs[i] = 1.0;
                Affine { coeffs, offset: 0.0 }
            })
            .collect();
        let layers = net.layers();
        let last = layers.len() - 1;
        let mut hidden = Vec::with_capacity(phases.len());
        let mut ordinal = 0;
        for (l, layer) in layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.outputs());
            for (row, b) in layer.weights.iter().zip(&layer.bias) {
                let mut coeffs = vec![0.0; d];
                let mut offset = *b;
                for (w, input) in row.iter().zip(&current) {
                    if *w == 0.0 {
                        continue;
                    }
                    for (c, a) in coeffs.iter_mut().zip(&input.coeffs) {
                        *c += w * a;
                    }
                    offset += w * input.offset;
                }
                next.push(Affine { coeffs, offset });
            }
            if l == last {
                return LinearPiece { hidden, output: next };
            }
            let mut post = Vec::with_capacity(next.len());
            for z in next {
                let a = match phases[ordinal] {
                    Phase::Active => z.clone(),
                    Phase::Inactive => Affine {
                        coeffs: vec![0.0; d],
                        offset: 0.0,
                    },
                };
                hidden.push(z);
                post.push(a);
                ordinal += 1;
            }
            current = post;
        }
        unreachable!("networks have at least one hidden layer")
    }

    /// `F_c - F_k`, or `F` itself for scalar outputs.
    pub fn margin_form(&self, class: usize, rival: Option<usize>) -> Affine {
        match rival {
            Some(k) => self.output[class].minus(&self.output[k]),
            None => self.output[0].clone(),
        }
    }
}

/// LP over `y = x - lower` (plus an optional lift variable `t` appended last)
/// with the box and the phase rows. Neurons flagged in `lifted` get
/// `z >= t` or `z <= -t` instead of `z >= 0` or `z <= 0`.
pub(crate) fn phase_program(
    piece: &LinearPiece,
    phases: &[Phase],
    lower: &[f64],
    upper: &[f64],
    objective: Vec<f64>,
    lifted: Option<&[bool]>,
) -> LinearProgram {
    let d = lower.len();
    let width = objective.len();
    let mut lp = LinearProgram::minimize(objective);
    for i in 0..d {
        let mut row = vec![0.0; width];
        row[i] = 1.0;
        lp.add(row, Relation::Le, upper[i] - lower[i]);
    }
    for (n, (z, phase)) in piece.hidden.iter().zip(phases).enumerate() {
        let mut row = z.coeffs.clone();
        row.resize(width, 0.0);
        let shifted = z.offset + dot(&z.coeffs, lower);
        let lift = lifted.is_some_and(|mask| mask[n]);
        match phase {
            Phase::Inactive => {
                if lift {
                    row[d] = 1.0;
                }
                lp.add(row, Relation::Le, -shifted);
            }
            Phase::Active => {
                if lift {
                    row[d] = -1.0;
                }
                lp.add(row, Relation::Ge, -shifted);
            }
        }
    }
    if width > d {
        let mut row = vec![0.0; width];
        row[d] = 1.0;
        lp.add(row, Relation::Le, 1.0);
    }
    lp
}

/// Result of minimizing the margin over one phase polytope.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseMin {
    Infeasible,
    Optimal { value: f64, argmin: Vec<f64> },
}

/// Minimizes `F_c - F_k` (or `F` for scalar outputs, where `rival` is
/// ignored) over the inputs in `[lower, upper]` whose ReLU phases match the
/// total assignment `phases`, using the closed phase constraints.
pub fn min_margin_under_phase(
    net: &Network,
    phases: &[Phase],
    lower: &[f64],
    upper: &[f64],
    class: usize,
    rival: Option<usize>,
) -> Result<PhaseMin> {
    if phases.len() != net.num_hidden() {
        return Err(Error::Dimension {
            expected: net.num_hidden(),
            actual: phases.len(),
        });
    }
    if lower.len() != net.input_dim() || upper.len() != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            actual: lower.len(),
        });
    }
    net.check_class(class)?;
    let rival = if net.output_dim() == 1 { None } else { rival };
    if let Some(k) = rival {
        net.check_class(k)?;
    }
    let piece = LinearPiece::new(net, phases);
    minimize_piece(&piece, phases, lower, upper, class, rival)
}

pub(crate) fn minimize_piece(
    piece: &LinearPiece,
    phases: &[Phase],
    lower: &[f64],
    upper: &[f64],
    class: usize,
    rival: Option<usize>,
) -> Result<PhaseMin> {
    let form = piece.margin_form(class, rival);
    let lp = phase_program(piece, phases, lower, upper, form.coeffs.clone(), None);
    match lp.solve(MAX_PIVOTS)? {
        LpOutcome::Infeasible => Ok(PhaseMin::Infeasible),
        LpOutcome::Unbounded => Err(Error::InvalidConfig("margin LP unbounded over a box".into())),
        LpOutcome::Optimal(sol) => {
            let argmin: Vec<f64> = sol.x.iter().zip(lower).map(|(y, l)| y + l).collect();
            let value = form.eval(&argmin);
            Ok(PhaseMin::Optimal { value, argmin })
        }
    }
}

/// Maximizes the lift `t <= 1` of the `lifted` neurons above zero, subject to
/// the phase rows and, when given, `margin_form(x) <= margin_cap`. Returns
/// the point and the lift, or `None` when infeasible.
pub(crate) fn max_lift(
    piece: &LinearPiece,
    phases: &[Phase],
    lower: &[f64],
    upper: &[f64],
    lifted: &[bool],
    margin_cap: Option<(&Affine, f64)>,
) -> Result<Option<(Vec<f64>, f64)>> {
    let d = lower.len();
    let mut objective = vec![0.0; d + 1];
    objective[d] = -1.0;
    let mut lp = phase_program(piece, phases, lower, upper, objective, Some(lifted));
    if let Some((form, cap)) = margin_cap {
        let mut row = form.coeffs.clone();
        row.push(0.0);
        lp.add(row, Relation::Le, cap - form.offset - dot(&form.coeffs, lower));
    }
    match lp.solve(MAX_PIVOTS)? {
        LpOutcome::Optimal(sol) => {
            let x = sol.x[..d].iter().zip(lower).map(|(y, l)| y + l).collect();
            Ok(Some((x, sol.x[d])))
        }
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::InvalidConfig("lift LP unbounded".into())),
    }
}
