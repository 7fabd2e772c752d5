//! Labelled inputs and the input-domain box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned input box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let domain = Self { lower, upper };
        domain.validate()?;
        Ok(domain)
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::Dimension {
                expected: self.lower.len(),
                actual: self.upper.len(),
            });
        }
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(Error::InvalidConfig(format!(
                    "domain dimension {i}: lower {l} must be <= upper {u}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Intersection with the L-infinity ball `B(center, eps)`.
    pub fn intersect_ball(&self, center: &[f64], eps: f64) -> InputDomain {
        let lower = self.lower.iter().zip(center).map(|(l, c)| l.max(c - eps)).collect();
        let upper = self.upper.iter().zip(center).map(|(u, c)| u.min(c + eps)).collect();
        InputDomain { lower, upper }
    }
}

/// One labelled input.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: usize,
}

/// Labelled rows sharing one input dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    rows: Vec<Sample>,
}

impl Dataset {
    pub fn new(rows: Vec<Sample>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let d = first.x.len();
            if let Some(bad) = rows.iter().find(|r| r.x.len() != d) {
                return Err(Error::Dimension {
                    expected: d,
                    actual: bad.x.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Sample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.rows.first().map(|r| r.x.len())
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.x.clone()).collect()
    }

    /// Inputs labelled `class`.
    pub fn class_inputs(&self, class: usize) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .filter(|r| r.label == class)
            .map(|r| r.x.clone())
            .collect()
    }

    pub fn validate_within(&self, domain: &InputDomain) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if !domain.contains(&row.x) {
                return Err(Error::InvalidConfig(format!("row {i} lies outside the input domain")));
            }
        }
        Ok(())
    }
}
