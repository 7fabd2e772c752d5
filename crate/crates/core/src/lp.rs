//! Dense two-phase simplex with Bland's pivoting rule.
//!
//! Solves `min c·x` subject to linear rows (`<=`, `>=`, `=`) and `x >= 0`.
//! Problems here are tiny (input dimension plus one row per hidden neuron),
//! so the tableau is dense and reduced costs are recomputed every pivot.
//! Bland's rule (lowest eligible index for both entering and leaving
//! variables) rules out cycling on degenerate vertices.

use thiserror::Error;

const EPS: f64 = 1e-9;
const FEASIBILITY_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
    #[error("malformed program: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// `min objective·x` over `x >= 0` and the added rows.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Row>,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push(Row { coeffs, relation, rhs });
        self
    }

    pub fn solve(&self, max_pivots: usize) -> Result<LpOutcome, LpError> {
        let n = self.num_vars();
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} has a non-finite entry")));
            }
        }
        Tableau::build(self).run(&self.objective, max_pivots)
    }
}

struct Tableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    artificial: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();
        let normalized: Vec<Row> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    Row {
                        coeffs: r.coeffs.iter().map(|v| -v).collect(),
                        relation: match r.relation {
                            Relation::Le => Relation::Ge,
                            Relation::Ge => Relation::Le,
                            Relation::Eq => Relation::Eq,
                        },
                        rhs: -r.rhs,
                    }
                } else {
                    r.clone()
                }
            })
            .collect();
        let slack_count = normalized.iter().filter(|r| r.relation != Relation::Eq).count();
        let artificial_count = normalized.iter().filter(|r| r.relation != Relation::Le).count();
        let cols = n + slack_count + artificial_count;

        let mut a = vec![vec![0.0; cols]; m];
        let mut b = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut artificial = vec![false; cols];
        let mut next_slack = n;
        let mut next_artificial = n + slack_count;
        for (i, row) in normalized.iter().enumerate() {
            a[i][..n].copy_from_slice(&row.coeffs);
            b[i] = row.rhs;
            match row.relation {
                Relation::Le => {
                    a[i][next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    a[i][next_slack] = -1.0;
                    next_slack += 1;
                    a[i][next_artificial] = 1.0;
                    artificial[next_artificial] = true;
                    basis[i] = next_artificial;
                    next_artificial += 1;
                }
                Relation::Eq => {
                    a[i][next_artificial] = 1.0;
                    artificial[next_artificial] = true;
                    basis[i] = next_artificial;
                    next_artificial += 1;
                }
            }
        }
        Self {
            a,
            b,
            basis,
            artificial,
            pivots: 0,
        }
    }

    fn cols(&self) -> usize {
        self.artificial.len()
    }

    fn run(mut self, objective: &[f64], max_pivots: usize) -> Result<LpOutcome, LpError> {
        let n = objective.len();
        if self.artificial.iter().any(|&x| x) {
            let phase_one: Vec<f64> = self.artificial.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
            match self.optimize(&phase_one, true, max_pivots)? {
                Phase::Unbounded => unreachable!("phase one objective is bounded below by zero"),
                Phase::Optimal => {}
            }
            if self.value(&phase_one) > FEASIBILITY_EPS {
                return Ok(LpOutcome::Infeasible);
            }
            self.drive_out_artificials();
        }
        let mut cost = vec![0.0; self.cols()];
        cost[..n].copy_from_slice(objective);
        match self.optimize(&cost, false, max_pivots)? {
            Phase::Unbounded => Ok(LpOutcome::Unbounded),
            Phase::Optimal => {
                let mut x = vec![0.0; n];
                for (i, &j) in self.basis.iter().enumerate() {
                    if j < n {
                        x[j] = self.b[i].max(0.0);
                    }
                }
                let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                Ok(LpOutcome::Optimal(LpSolution {
                    x,
                    value,
                    pivots: self.pivots,
                }))
            }
        }
    }

    fn value(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.b).map(|(&j, v)| cost[j] * v).sum()
    }

    fn optimize(&mut self, cost: &[f64], allow_artificial: bool, max_pivots: usize) -> Result<Phase, LpError> {
        let cols = self.cols();
        loop {
            let mut is_basic = vec![false; cols];
            for &j in &self.basis {
                is_basic[j] = true;
            }
            let entering = (0..cols).find(|&j| {
                if is_basic[j] || (!allow_artificial && self.artificial[j]) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .zip(&self.a)
                        .map(|(&bj, row)| cost[bj] * row[j])
                        .sum::<f64>();
                reduced < -EPS
            });
            let Some(col) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.a.len() {
                let coef = self.a[i][col];
                if coef <= EPS {
                    continue;
                }
                let ratio = self.b[i] / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - EPS || (ratio <= best + EPS && self.basis[i] < self.basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Ok(Phase::Unbounded);
            };
            if self.pivots >= max_pivots {
                return Err(LpError::PivotLimit(max_pivots));
            }
            self.pivot(row, col);
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        self.b[row] /= p;
        let pivot_row = self.a[row].clone();
        let pivot_b = self.b[row];
        for i in 0..self.a.len() {
            if i == row {
                continue;
            }
            let factor = self.a[i][col];
            if factor == 0.0 {
                continue;
            }
            for (v, pv) in self.a[i].iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            self.b[i] -= factor * pivot_b;
            if self.b[i].abs() < 1e-13 {
                self.b[i] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// After phase one, replaces artificial basics (all at level zero) by
    /// structural columns where the row allows it. Rows without such a column
    /// are redundant and keep their artificial at zero.
    fn drive_out_artificials(&mut self) {
        for i in 0..self.a.len() {
            if !self.artificial[self.basis[i]] {
                continue;
            }
            if let Some(j) = (0..self.cols()).find(|&j| !self.artificial[j] && self.a[i][j].abs() > EPS) {
                self.pivot(i, j);
            }
        }
    }
}

enum Phase {
    Optimal,
    Unbounded,
}
