//! Dense two-phase simplex for small inequality-form programs.
//!
//! A program `min c.x  s.t.  A x <= b, x_j >= l_j` with few variables and many rows
//! is solved through its Lagrangian dual `min b.y  s.t.  A^T y = -c, y >= 0`. The
//! dual tableau has one row per primal variable, so its size is
//! `(#vars + 1) x (#rows + #vars + 1)` regardless of how many constraints there are.
//! The primal point is recovered as the simplex multipliers of the optimal basis.

use std::io::{self, Write};

use crate::error::{Error, Result};

use super::{FEAS_TOL, OPT_TOL};

const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

/// `coeffs . x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    /// `None` means the variable is free.
    pub lower: Vec<Option<f64>>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpSolution {
    pub fn optimal(self) -> Option<(f64, Vec<f64>)> {
        match self {
            LpSolution::Optimal { value, x } => Some((value, x)),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// `min objective . x` over free variables with the given names.
    pub fn minimize<S: Into<String>>(names: impl IntoIterator<Item = S>, objective: Vec<f64>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let lower = vec![None; objective.len()];
        Self {
            names,
            objective,
            lower,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_lower(&mut self, var: usize, bound: f64) {
        self.lower[var] = Some(bound);
    }

    pub fn le(&mut self, coeffs: Vec<f64>, rhs: f64, label: impl Into<String>) {
        self.rows.push(Row {
            coeffs,
            rhs,
            label: label.into(),
        });
    }

    pub fn ge(&mut self, coeffs: Vec<f64>, rhs: f64, label: impl Into<String>) {
        self.le(coeffs.into_iter().map(|c| -c).collect(), -rhs, label);
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.names.len() != n || self.lower.len() != n {
            return Err(Error::InvalidParameter(
                "LP names/bounds do not match the objective length".into(),
            ));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("LP objective is not finite".into()));
        }
        for (k, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "LP row {k} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter(format!("LP row {k} is not finite")));
            }
        }
        if self.lower.iter().flatten().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter("LP bound is not finite".into()));
        }
        Ok(())
    }

    /// Largest amount by which `x` violates a row or a bound (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| dot(&r.coeffs, x) - r.rhs);
        let bounds = self
            .lower
            .iter()
            .zip(x)
            .filter_map(|(l, v)| l.map(|l| l - v));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Plain-text dump, one record per line:
    ///
    /// ```text
    /// vars <name>...
    /// minimize <c_1> ... <c_n>
    /// lower <l_1|free> ... <l_n|free>
    /// row <label> <a_1> ... <a_n> <= <rhs>
    /// ```
    pub fn write_tableau<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "vars {}", self.names.join(" "))?;
        writeln!(out, "minimize {}", join_numbers(&self.objective))?;
        let lower: Vec<String> = self
            .lower
            .iter()
            .map(|l| l.map_or_else(|| "free".to_string(), |v| v.to_string()))
            .collect();
        writeln!(out, "lower {}", lower.join(" "))?;
        for row in &self.rows {
            let label = if row.label.is_empty() { "-" } else { &row.label };
            writeln!(out, "row {label} {} <= {}", join_numbers(&row.coeffs), row.rhs)?;
        }
        Ok(())
    }
}

fn join_numbers(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the program; infeasibility and unboundedness are statuses, not errors.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let nv = lp.num_vars();

    // bounds become ordinary rows: -x_j <= -l_j
    let mut rows: Vec<(Vec<f64>, f64)> = lp.rows.iter().map(|r| (r.coeffs.clone(), r.rhs)).collect();
    for (j, l) in lp.lower.iter().enumerate() {
        if let Some(l) = l {
            let mut coeffs = vec![0.0; nv];
            coeffs[j] = -1.0;
            rows.push((coeffs, -l));
        }
    }
    let costs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let target: Vec<f64> = lp.objective.iter().map(|c| -c).collect();

    match DualTableau::new(&rows, &target, &costs).solve()? {
        Outcome::Optimal(x) => {
            let value = dot(&lp.objective, &x);
            let violation = lp.max_violation(&x);
            let scale = 1.0 + costs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
            if violation > 1e3 * FEAS_TOL * scale {
                return Err(Error::Solver(format!(
                    "recovered point violates a constraint by {violation:e}"
                )));
            }
            Ok(LpSolution::Optimal { value, x })
        }
        // dual unbounded: primal infeasible
        Outcome::Unbounded => Ok(LpSolution::Infeasible),
        // dual infeasible: primal is unbounded if it is feasible at all
        Outcome::Infeasible => {
            let zero = vec![0.0; nv];
            match DualTableau::new(&rows, &zero, &costs).solve()? {
                Outcome::Unbounded => Ok(LpSolution::Infeasible),
                _ => Ok(LpSolution::Unbounded),
            }
        }
    }
}

enum Outcome {
    /// Simplex multipliers of the optimal basis, i.e. the primal point.
    Optimal(Vec<f64>),
    Infeasible,
    Unbounded,
}

enum Phase {
    Optimal,
    Unbounded,
}

/// Standard-form tableau for `min cost.y  s.t.  M y = target, y >= 0`, where column
/// `k` of `M` is the coefficient vector of primal row `k`.
struct DualTableau<'a> {
    rows: &'a [(Vec<f64>, f64)],
    /// Number of equality rows (primal variables).
    m: usize,
    /// Number of structural columns (primal rows).
    ncols: usize,
    width: usize,
    /// `(m + 1) x width`, row-major; the last row holds reduced costs, the last
    /// column the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
    sign: Vec<f64>,
    costs: &'a [f64],
}

impl<'a> DualTableau<'a> {
    fn new(rows: &'a [(Vec<f64>, f64)], target: &[f64], costs: &'a [f64]) -> Self {
        let m = target.len();
        let ncols = rows.len();
        let width = ncols + m + 1;
        let mut t = vec![0.0; (m + 1) * width];
        let sign: Vec<f64> = target
            .iter()
            .map(|&d| if d < 0.0 { -1.0 } else { 1.0 })
            .collect();
        for i in 0..m {
            let row = &mut t[i * width..(i + 1) * width];
            for (k, (coeffs, _)) in rows.iter().enumerate() {
                row[k] = sign[i] * coeffs[i];
            }
            row[ncols + i] = 1.0;
            row[width - 1] = sign[i] * target[i];
        }
        // phase-one objective: sum of artificials, priced out
        for i in 0..m {
            for k in 0..ncols {
                t[m * width + k] -= t[i * width + k];
            }
            t[m * width + width - 1] -= t[i * width + width - 1];
        }
        Self {
            rows,
            m,
            ncols,
            width,
            t,
            basis: (ncols..ncols + m).collect(),
            sign,
            costs,
        }
    }

    fn at(&self, i: usize, k: usize) -> f64 {
        self.t[i * self.width + k]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn solve(mut self) -> Result<Outcome> {
        let infeasibility_scale = 1.0 + (0..self.m).map(|i| self.rhs(i)).sum::<f64>();
        if -self.rhs(self.m) > FEAS_TOL * infeasibility_scale {
            self.iterate()?;
            if -self.rhs(self.m) > FEAS_TOL * infeasibility_scale {
                return Ok(Outcome::Infeasible);
            }
        }
        self.evict_artificials();
        self.price_phase_two();
        match self.iterate()? {
            Phase::Unbounded => Ok(Outcome::Unbounded),
            Phase::Optimal => Ok(Outcome::Optimal(self.multipliers())),
        }
    }

    fn iterate(&mut self) -> Result<Phase> {
        let limit = 10_000 + 100 * (self.m + self.ncols);
        let obj = self.m * self.width;
        let mut streak = 0;
        for _ in 0..limit {
            let reduced = &self.t[obj..obj + self.ncols];
            let entering = if streak >= DEGENERATE_STREAK {
                reduced.iter().position(|&r| r < -OPT_TOL)
            } else {
                reduced
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r < -OPT_TOL)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k)
            };
            let Some(enter) = entering else {
                return Ok(Phase::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, enter);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((l, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if (!tie && ratio < best) || (tie && self.basis[i] < self.basis[l]) {
                            Some((i, ratio))
                        } else {
                            Some((l, best))
                        }
                    }
                };
            }
            let Some((leave, ratio)) = leave else {
                return Ok(Phase::Unbounded);
            };
            if ratio <= FEAS_TOL {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(leave, enter);
        }
        Err(Error::Solver(format!("simplex iteration limit {limit} reached")))
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.t[row * w + col];
        {
            let pivot_row = &mut self.t[row * w..(row + 1) * w];
            for v in pivot_row.iter_mut() {
                *v /= p;
            }
            pivot_row[col] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(row * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        let eliminate = |other: &mut [f64]| {
            let factor = other[col];
            if factor != 0.0 {
                for (o, p) in other.iter_mut().zip(pivot_row.iter()) {
                    *o -= factor * p;
                }
                other[col] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[row] = col;
    }

    /// Pivots zero-level artificials out of the basis where a structural column allows it.
    /// Rows where none does are redundant and keep their artificial at zero.
    fn evict_artificials(&mut self) {
        for i in 0..self.m {
            if self.basis[i] < self.ncols {
                continue;
            }
            let best = (0..self.ncols)
                .map(|k| (k, self.at(i, k).abs()))
                .filter(|&(_, a)| a > PIVOT_TOL)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((k, _)) = best {
                self.pivot(i, k);
            }
        }
    }

    fn cost(&self, col: usize) -> f64 {
        if col < self.ncols {
            self.costs[col]
        } else {
            0.0
        }
    }

    fn price_phase_two(&mut self) {
        let w = self.width;
        let obj = self.m * w;
        for k in 0..w {
            let mut r = if k < w - 1 { self.cost(k) } else { 0.0 };
            for i in 0..self.m {
                r -= self.cost(self.basis[i]) * self.t[i * w + k];
            }
            self.t[obj + k] = r;
        }
    }

    /// Solves `B^T pi = c_B` against the original columns; falls back to the
    /// tableau's priced artificial columns if the basis matrix looks singular.
    fn multipliers(&self) -> Vec<f64> {
        let m = self.m;
        let mut g = vec![0.0; m * (m + 1)];
        for (j, &col) in self.basis.iter().enumerate() {
            let row = &mut g[j * (m + 1)..(j + 1) * (m + 1)];
            if col < self.ncols {
                for (r, cell) in row[..m].iter_mut().enumerate() {
                    *cell = self.sign[r] * self.rows[col].0[r];
                }
            } else {
                row[col - self.ncols] = 1.0;
            }
            row[m] = self.cost(col);
        }
        let scaled = gaussian_solve(&mut g, m).unwrap_or_else(|| {
            let obj = m * self.width;
            (0..m).map(|i| -self.t[obj + self.ncols + i]).collect()
        });
        scaled.iter().zip(&self.sign).map(|(p, s)| p * s).collect()
    }
}

/// In-place elimination with partial pivoting on an `m x (m + 1)` augmented matrix.
fn gaussian_solve(g: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let w = m + 1;
    for c in 0..m {
        let p = (c..m).max_by(|&a, &b| g[a * w + c].abs().total_cmp(&g[b * w + c].abs()))?;
        if g[p * w + c].abs() < 1e-13 {
            return None;
        }
        if p != c {
            for k in 0..w {
                g.swap(p * w + k, c * w + k);
            }
        }
        for r in 0..m {
            if r == c {
                continue;
            }
            let factor = g[r * w + c] / g[c * w + c];
            if factor != 0.0 {
                for k in c..w {
                    g[r * w + k] -= factor * g[c * w + k];
                }
            }
        }
    }
    Some((0..m).map(|r| g[r * w + m] / g[r * w + r]).collect())
}
