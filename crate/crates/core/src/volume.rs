//! Orthotope estimates of the volume of a NAP region.
//!
//! An anchor row is chosen among the data exhibiting the NAP, then each axis
//! ray from it is grown as far as the NAP stays exhibited.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::InputDomain;
use crate::error::{Error, Result};
use crate::nap::Nap;
use crate::network::Network;

pub const PSEUDO_CENTER_SAMPLE: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-4;
const COARSE_STEPS: usize = 32;
const PROBES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orthotope {
    pub center: Vec<f64>,
    /// Extent below the center per dimension.
    pub lower: Vec<f64>,
    /// Extent above the center per dimension.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogVolume {
    pub value: f64,
    /// Some dimension has zero width.
    pub degenerate: bool,
}

impl Orthotope {
    pub fn log_volume(&self) -> LogVolume {
        log_volume(self)
    }
}

/// `Σ ln(U_i + L_i)`; `-∞` and flagged when a dimension has zero width.
pub fn log_volume(o: &Orthotope) -> LogVolume {
    let mut value = 0.0;
    let mut degenerate = false;
    for (l, u) in o.lower.iter().zip(&o.upper) {
        let w = l + u;
        if w <= 0.0 {
            degenerate = true;
            value = f64::NEG_INFINITY;
        } else if !degenerate {
            value += w.ln();
        }
    }
    LogVolume { value, degenerate }
}

/// Order of magnitude of `exp(a) / exp(b)`.
pub fn volume_ratio_order(a: f64, b: f64) -> Result<i64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidConfig("volume ratio of a degenerate volume".into()));
    }
    Ok(((a - b) / std::f64::consts::LN_10).round() as i64)
}

/// The exhibiting row minimizing the largest L∞ distance to the other
/// exhibiting rows. Above [`PSEUDO_CENTER_SAMPLE`] rows a seeded subsample
/// is used. Ties go to the lexicographically smallest row.
pub fn pseudo_center(net: &Network, nap: &Nap, rows: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
    let mut pool = Vec::new();
    for x in rows {
        if nap.is_exhibited_by(net, x)? {
            pool.push(x);
        }
    }
    if pool.is_empty() {
        return Err(Error::EmptyData("no row exhibits the NAP".into()));
    }
    if pool.len() > PSEUDO_CENTER_SAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, pool.len(), PSEUDO_CENTER_SAMPLE).into_vec();
        picked.sort_unstable();
        pool = picked.into_iter().map(|i| pool[i]).collect();
    }
    let radii: Vec<f64> = pool
        .par_iter()
        .map(|a| pool.iter().map(|b| linf(a, b)).fold(0.0, f64::max))
        .collect();
    let mut best = 0;
    for i in 1..pool.len() {
        let better = match radii[i].total_cmp(&radii[best]) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => lex_less(pool[i], pool[best]),
            std::cmp::Ordering::Greater => false,
        };
        if better {
            best = i;
        }
    }
    Ok(pool[best].clone())
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Grows the box around `center` one axis ray at a time.
pub fn expand_orthotope(net: &Network, nap: &Nap, center: &[f64], domain: &InputDomain, tol: f64) -> Result<Orthotope> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidConfig(format!("tol must be positive, got {tol}")));
    }
    if center.len() != domain.dim() {
        return Err(Error::Dimension {
            expected: domain.dim(),
            actual: center.len(),
        });
    }
    if !domain.contains(center) {
        return Err(Error::InvalidConfig("center lies outside the domain".into()));
    }
    if !nap.is_exhibited_by(net, center)? {
        return Err(Error::InvalidConfig("center does not exhibit the NAP".into()));
    }
    let rays: Vec<(usize, f64)> = (0..center.len()).flat_map(|i| [(i, -1.0), (i, 1.0)]).collect();
    let extents = rays
        .par_iter()
        .map(|&(i, dir)| {
            let slack = if dir < 0.0 {
                center[i] - domain.lower[i]
            } else {
                domain.upper[i] - center[i]
            };
            let inside = |e: f64| -> Result<bool> {
                let mut x = center.to_vec();
                x[i] = if e >= slack {
                    if dir < 0.0 {
                        domain.lower[i]
                    } else {
                        domain.upper[i]
                    }
                } else {
                    center[i] + dir * e
                };
                nap.is_exhibited_by(net, &x)
            };
            expand_ray(inside, slack, tol)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lower = extents.iter().step_by(2).copied().collect();
    let upper = extents.iter().skip(1).step_by(2).copied().collect();
    Ok(Orthotope {
        center: center.to_vec(),
        lower,
        upper,
    })
}

/// Largest extent `e <= slack` found inside, with `e + tol` outside or past
/// the wall. A coarse scan brackets the first exit, bisection narrows it,
/// and interior probes catch holes the scan stepped over.
fn expand_ray(inside: impl Fn(f64) -> Result<bool>, slack: f64, tol: f64) -> Result<f64> {
    if slack <= 0.0 {
        return Ok(0.0);
    }
    // smallest extent known to be outside
    let mut outside: Option<f64> = None;
    'search: loop {
        let top = outside.unwrap_or(slack);
        let mut lo = 0.0;
        let mut hi = None;
        for k in 1..=COARSE_STEPS {
            let e = top * k as f64 / COARSE_STEPS as f64;
            if (k == COARSE_STEPS && outside.is_some()) || !inside(e)? {
                hi = Some(e);
                break;
            }
            lo = e;
        }
        let candidate = match hi {
            None => slack,
            Some(mut hi) => {
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if inside(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let e = (hi - tol).max(0.0);
                if e > 0.0 && !inside(e)? {
                    outside = Some(e);
                    continue 'search;
                }
                e
            }
        };
        for k in 1..=PROBES {
            let p = candidate * k as f64 / (PROBES + 1) as f64;
            if p > 0.0 && !inside(p)? {
                outside = Some(p);
                continue 'search;
            }
        }
        return Ok(candidate);
    }
}
