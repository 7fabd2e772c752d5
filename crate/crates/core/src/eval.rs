//! Empirical metrics: coverage, adversarial rejection, ambiguity.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, InputDomain, Sample};
use crate::error::{Error, Result};
use crate::estimate::{pgd_restarts, AttackConfig};
use crate::nap::Nap;
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub fraction: f64,
    pub covered: usize,
    pub total: usize,
    /// Dataset row indices of the covered class rows.
    #[serde(skip)]
    pub rows: Vec<usize>,
}

/// Fraction of the class rows that exhibit the NAP.
pub fn coverage(net: &Network, nap: &Nap, data: &Dataset, class: usize) -> Result<f64> {
    Ok(coverage_detail(net, nap, data, class)?.fraction)
}

pub fn coverage_detail(net: &Network, nap: &Nap, data: &Dataset, class: usize) -> Result<Coverage> {
    net.signature().check_same(nap.signature())?;
    let class_rows: Vec<usize> = (0..data.len()).filter(|&i| data.rows()[i].label == class).collect();
    if class_rows.is_empty() {
        return Err(Error::EmptyData(format!("no rows of class {class}")));
    }
    let flags: Vec<bool> = class_rows
        .par_iter()
        .map(|&i| nap.is_exhibited_by(net, &data.rows()[i].x))
        .collect::<Result<_>>()?;
    let rows: Vec<usize> = class_rows
        .iter()
        .zip(&flags)
        .filter(|(_, f)| **f)
        .map(|(i, _)| *i)
        .collect();
    Ok(Coverage {
        fraction: rows.len() as f64 / class_rows.len() as f64,
        covered: rows.len(),
        total: class_rows.len(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// Rows attacked: correctly classified and exhibiting the NAP.
    pub attempted: usize,
    /// Successful attacks over all rows and trials.
    pub succeeded: usize,
    /// Successful attacks whose adversarial example leaves the NAP region.
    pub rejected: usize,
}

/// Attacks each eligible row `trials` times and counts how many successful
/// adversarial examples the NAP rejects.
pub fn adversarial_rejection(
    net: &Network,
    nap: &Nap,
    rows: &[Sample],
    domain: &InputDomain,
    cfg: &AttackConfig,
    trials: usize,
) -> Result<Rejection> {
    net.signature().check_same(nap.signature())?;
    cfg.validate()?;
    let per_row: Vec<Option<(usize, usize)>> = rows
        .par_iter()
        .enumerate()
        .map(|(j, row)| {
            if net.margin(&row.x, row.label)? <= 0.0 || !nap.is_exhibited_by(net, &row.x)? {
                return Ok(None);
            }
            let mut rng = cfg.rng_for(j);
            let mut succeeded = 0;
            let mut rejected = 0;
            for _ in 0..trials {
                if let Some(adv) = pgd_restarts(net, &row.x, row.label, domain, cfg, &mut rng, true)?.pop() {
                    succeeded += 1;
                    if !nap.is_exhibited_by(net, &adv)? {
                        rejected += 1;
                    }
                }
            }
            Ok(Some((succeeded, rejected)))
        })
        .collect::<Result<_>>()?;
    let mut out = Rejection::default();
    for (s, r) in per_row.into_iter().flatten() {
        out.attempted += 1;
        out.succeeded += s;
        out.rejected += r;
    }
    Ok(out)
}

/// Number of rows exhibiting at least two of the NAPs.
pub fn non_ambiguity_empirical(net: &Network, naps: &[Nap], data: &Dataset) -> Result<usize> {
    if naps.len() < 2 {
        return Err(Error::InvalidConfig("ambiguity needs at least two NAPs".into()));
    }
    for nap in naps {
        net.signature().check_same(nap.signature())?;
    }
    let flags: Vec<bool> = data
        .rows()
        .par_iter()
        .map(|row| {
            let trace = net.forward(&row.x)?;
            Ok(naps.iter().filter(|n| n.matches_trace(&trace)).count() >= 2)
        })
        .collect::<Result<_>>()?;
    Ok(flags.into_iter().filter(|f| *f).count())
}
