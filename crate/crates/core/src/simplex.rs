//! Dense two-phase primal simplex for small LPs.
//!
//! The occupancy-measure programs solved here stay around a couple hundred
//! variables, so a plain dense tableau is the robust choice. Degenerate
//! pivots (common in occupancy polytopes) are handled with Bland's rule,
//! which guarantees termination: the entering column is the lowest index
//! with a negative reduced cost and ratio-test ties leave the basis at the
//! lowest basic-variable index.
//!
//! Phase 1 minimizes the sum of artificial variables from a slack/artificial
//! starting basis; phase 2 optimizes the caller's objective with artificial
//! columns barred from re-entering.

use crate::error::{Error, Result};

/// Comparison direction of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
}

/// One constraint row `coeffs . x (=|<=) rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation: Relation::Eq,
            rhs,
        }
    }

    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation: Relation::Le,
            rhs,
        }
    }
}

/// Optimal point of a solved LP.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Outcome of a solve: infeasibility is an ordinary answer, not an error.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;
const MAX_PIVOTS: usize = 50_000;

/// Maximize `objective . x` subject to `constraints` and `x >= 0`.
pub fn maximize(objective: &[f64], constraints: &[Constraint]) -> Result<LpOutcome> {
    let n = objective.len();
    if n == 0 {
        return Err(Error::InvalidInput("LP has no variables".into()));
    }
    if objective.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(
            "LP objective has non-finite entries".into(),
        ));
    }
    for (i, c) in constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "constraint {i} has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        if c.coeffs.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
            return Err(Error::InvalidInput(format!(
                "constraint {i} has non-finite entries"
            )));
        }
    }

    let mut tableau = Tableau::build(objective, constraints);
    if !tableau.phase_one()? {
        return Ok(LpOutcome::Infeasible);
    }
    tableau.phase_two(objective)?;
    Ok(LpOutcome::Optimal(tableau.solution(objective)))
}

struct Tableau {
    /// `rows[i]` holds the constraint coefficients followed by the rhs.
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row over all columns (rhs slot unused).
    cost: Vec<f64>,
    /// Basic variable per row.
    basis: Vec<usize>,
    /// Total structural + slack columns; artificials start here.
    artificial_start: usize,
    num_cols: usize,
}

impl Tableau {
    fn build(objective: &[f64], constraints: &[Constraint]) -> Self {
        let n = objective.len();
        let m = constraints.len();
        let num_slack = constraints
            .iter()
            .filter(|c| c.relation == Relation::Le)
            .count();
        let artificial_start = n + num_slack;

        // Worst case one artificial per row; unused columns stay zero.
        let num_cols = artificial_start + m;
        let mut rows = vec![vec![0.0; num_cols + 1]; m];
        let mut basis = vec![usize::MAX; m];

        let mut slack_idx = n;
        let mut artificial_idx = artificial_start;
        for (i, c) in constraints.iter().enumerate() {
            let row = &mut rows[i];
            row[..n].copy_from_slice(&c.coeffs);
            row[num_cols] = c.rhs;
            let mut slack_col = None;
            if c.relation == Relation::Le {
                row[slack_idx] = 1.0;
                slack_col = Some(slack_idx);
                slack_idx += 1;
            }
            if row[num_cols] < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            // A slack with +1 coefficient and nonnegative rhs can start in the
            // basis; everything else needs an artificial.
            match slack_col {
                Some(col) if row[col] > 0.0 => basis[i] = col,
                _ => {
                    row[artificial_idx] = 1.0;
                    basis[i] = artificial_idx;
                    artificial_idx += 1;
                }
            }
        }

        Tableau {
            rows,
            cost: vec![0.0; num_cols],
            basis,
            artificial_start,
            num_cols,
        }
    }

    /// Minimize the sum of artificials. Returns false if the LP is infeasible.
    fn phase_one(&mut self) -> Result<bool> {
        let phase_cost: Vec<f64> = (0..self.num_cols)
            .map(|j| if j >= self.artificial_start { 1.0 } else { 0.0 })
            .collect();
        self.price_out(&phase_cost);
        self.pivot_until_optimal(self.num_cols)?;

        let residual: f64 = self
            .basis
            .iter()
            .zip(&self.rows)
            .filter(|(&b, _)| b >= self.artificial_start)
            .map(|(_, row)| row[self.num_cols])
            .sum();
        if residual > FEAS_EPS {
            return Ok(false);
        }

        // Degenerate artificials left in the basis: pivot them out where any
        // original column is available, otherwise the row is redundant and
        // stays inert (all-zero outside artificial columns).
        for i in 0..self.rows.len() {
            if self.basis[i] < self.artificial_start {
                continue;
            }
            if let Some(j) = (0..self.artificial_start).find(|&j| self.rows[i][j].abs() > PIVOT_EPS)
            {
                self.pivot(i, j);
            }
        }
        Ok(true)
    }

    fn phase_two(&mut self, objective: &[f64]) -> Result<()> {
        // Internally minimize the negated objective.
        let mut cost = vec![0.0; self.num_cols];
        for (j, &c) in objective.iter().enumerate() {
            cost[j] = -c;
        }
        self.price_out(&cost);
        self.pivot_until_optimal(self.artificial_start)
    }

    /// Set the reduced-cost row for `cost`, pricing out current basic columns.
    fn price_out(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for j in 0..self.num_cols {
                    self.cost[j] -= cb * self.rows[i][j];
                }
            }
        }
    }

    /// Bland-rule pivoting until no column below `col_limit` can improve.
    fn pivot_until_optimal(&mut self, col_limit: usize) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..col_limit).find(|&j| self.cost[j] < -COST_EPS);
            let Some(j) = entering else { return Ok(()) };

            let mut leaving: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[j];
                if a > PIVOT_EPS {
                    let ratio = row[self.num_cols] / a;
                    let better = match leaving {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - PIVOT_EPS
                                || (ratio < lr + PIVOT_EPS && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((i, _)) = leaving else {
                return Err(Error::SolverFailure("LP is unbounded".into()));
            };
            self.pivot(i, j);
        }
        Err(Error::SolverFailure(format!(
            "simplex did not converge within {MAX_PIVOTS} pivots"
        )))
    }

    fn pivot(&mut self, pivot_row: usize, pivot_col: usize) {
        let scale = self.rows[pivot_row][pivot_col];
        for v in self.rows[pivot_row].iter_mut() {
            *v /= scale;
        }
        let pivot_data = self.rows[pivot_row].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == pivot_row {
                continue;
            }
            let factor = row[pivot_col];
            if factor != 0.0 {
                for (v, &p) in row.iter_mut().zip(&pivot_data) {
                    *v -= factor * p;
                }
            }
        }
        let factor = self.cost[pivot_col];
        if factor != 0.0 {
            for (j, c) in self.cost.iter_mut().enumerate() {
                *c -= factor * pivot_data[j];
            }
        }
        self.basis[pivot_row] = pivot_col;
    }

    fn solution(&self, objective: &[f64]) -> LpSolution {
        let mut x = vec![0.0; objective.len()];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < objective.len() {
                // Clip pivot dust so callers see a clean nonnegative point.
                x[b] = self.rows[i][self.num_cols].max(0.0);
            }
        }
        let objective_value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution {
            x,
            objective: objective_value,
        }
    }
}
