//! Closed-form prices of anarchy for submodular, covering and supermodular welfare,
//! plus the curvature-based approximation ratio they are compared against.
//!
//! Every function checks its hypotheses and refuses to evaluate outside them.

use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::mechanisms::{
    check_assumption, curvature, Assumption, Mechanism, WelfareBasis, SHAPE_TOL,
};
use crate::poa_lp::{Argmax, Method, PoaReport};

/// `beta(j) = j/(j+1) * w(j+1)/w(j)` for `j` in `[n]`; `beta(n) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaProfile {
    values: Vec<f64>,
}

impl BetaProfile {
    pub fn new(w: &WelfareBasis) -> Self {
        let values = (1..=w.n())
            .map(|j| j as f64 / (j + 1) as f64 * w.get(j + 1) / w.get(j))
            .collect();
        Self { values }
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Running maximum that keeps the first candidate among near-ties, so the reported
/// argmax does not flip on rounding noise.
struct Best {
    value: f64,
    argmax: Option<Argmax>,
}

impl Best {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            argmax: None,
        }
    }

    fn offer(&mut self, value: f64, at: Argmax) {
        if self.argmax.is_none() || value > self.value + 1e-12 * (1.0 + self.value.abs()) {
            self.value = value;
            self.argmax = Some(at);
        }
    }
}

fn check_n(w: Option<&WelfareBasis>, f: Option<&Mechanism>, n: usize) -> Result<()> {
    let bad = w.is_some_and(|w| w.n() != n) || f.is_some_and(|f| f.n() != n);
    if n == 0 || bad {
        return Err(Error::InvalidParameter(format!(
            "inputs must be defined on [n] with n = {n}"
        )));
    }
    Ok(())
}

fn require(w: &WelfareBasis, kind: Assumption) -> Result<()> {
    let name = match kind {
        Assumption::Submodular => "w submodular",
        Assumption::Supermodular => "w supermodular",
        Assumption::Covering => "w covering",
    };
    match check_assumption(w, kind).violations.first() {
        None => Ok(()),
        Some(v) => Err(Error::precondition(
            format!("{name} ({:?})", v.condition),
            Some(v.index),
        )),
    }
}

fn require_unit_head(f: &Mechanism) -> Result<()> {
    if (f.get(1) - 1.0).abs() > SHAPE_TOL {
        return Err(Error::precondition(
            format!("f(1) = 1, got {}", f.get(1)),
            Some(1),
        ));
    }
    Ok(())
}

fn require_nonincreasing(f: &Mechanism) -> Result<()> {
    match f.first_increase() {
        None => Ok(()),
        Some(j) => Err(Error::precondition("f non-increasing", Some(j))),
    }
}

fn require_at_least(f: &Mechanism, floor: f64, name: &str) -> Result<()> {
    match (1..=f.n()).find(|&j| f.get(j) < floor - SHAPE_TOL) {
        None => Ok(()),
        Some(j) => Err(Error::precondition(name, Some(j))),
    }
}

/// `1/W*` with `W* = max_{1 <= l <= j <= n} w(l)/w(j) + min(j, n-l) f(j)/w(j) - min(l, n-j) f(j+1)/w(j)`.
///
/// Needs submodular `w` and a non-increasing `f` with `f(1) = 1` and `f >= f_MC`.
pub fn poa_submodular(f: &Mechanism, w: &WelfareBasis, n: usize) -> Result<PoaReport> {
    check_n(Some(w), Some(f), n)?;
    require(w, Assumption::Submodular)?;
    require_unit_head(f)?;
    require_nonincreasing(f)?;
    if let Some(j) = f.first_below_marginal(w) {
        return Err(Error::precondition("f >= f_MC", Some(j)));
    }
    let mut best = Best::new();
    for j in 1..=n {
        for l in 1..=j {
            let wj = w.get(j);
            let value = w.get(l) / wj + j.min(n - l) as f64 * f.get(j) / wj
                - l.min(n - j) as f64 * f.get(j + 1) / wj;
            best.offer(value, Argmax::Pair { l, j });
        }
    }
    Ok(PoaReport::from_w_star(best.value, Method::ClosedFormSubmodular, best.argmax))
}

/// Shapley-value specialization of [`poa_submodular`], written directly in terms of `w`.
pub fn poa_shapley_submodular(w: &WelfareBasis, n: usize) -> Result<PoaReport> {
    check_n(Some(w), None, n)?;
    require(w, Assumption::Submodular)?;
    let mut best = Best::new();
    for j in 1..=n {
        for l in 1..=j {
            let wj = w.get(j);
            let value = w.get(l) / wj + j.min(n - l) as f64 / j as f64
                - l.min(n - j) as f64 * w.get(j + 1) / ((j + 1) as f64 * wj);
            best.offer(value, Argmax::Pair { l, j });
        }
    }
    Ok(PoaReport::from_w_star(best.value, Method::ClosedFormSubmodular, best.argmax))
}

/// Shapley value through `beta`:
/// `W* = 1 + max_{l <= j} w(l)/w(j) - (max(j+l-n, 0) + min(l, n-j) beta(j)) / j`.
pub fn poa_shapley_reformulated(w: &WelfareBasis, n: usize) -> Result<PoaReport> {
    check_n(Some(w), None, n)?;
    require(w, Assumption::Submodular)?;
    let beta = BetaProfile::new(w);
    let mut best = Best::new();
    for j in 1..=n {
        for l in 1..=j {
            let overflow = (j + l).saturating_sub(n) as f64;
            let value = w.get(l) / w.get(j)
                - (overflow + l.min(n - j) as f64 * beta.get(j)) / j as f64;
            best.offer(value, Argmax::Pair { l, j });
        }
    }
    Ok(PoaReport::from_w_star(1.0 + best.value, Method::ClosedFormSubmodular, best.argmax))
}

/// Marginal contribution: `W* = 1 + max_j min(j, n-j) (2w(j) - w(j-1) - w(j+1)) / w(j)`.
pub fn poa_marginal_submodular(w: &WelfareBasis, n: usize) -> Result<PoaReport> {
    check_n(Some(w), None, n)?;
    require(w, Assumption::Submodular)?;
    let mut best = Best::new();
    for j in 1..=n {
        let bend = 2.0 * w.get(j) - w.get(j - 1) - w.get(j + 1);
        best.offer(j.min(n - j) as f64 * bend / w.get(j), Argmax::Index { j });
    }
    Ok(PoaReport::from_w_star(1.0 + best.value, Method::ClosedFormSubmodular, best.argmax))
}

/// Set covering (`w = 1`) for any `f >= 0` with `f(1) = 1`:
/// `W* = 1 + max_{j < n} max{(j+1) f(j+1) - 1, j f(j) - f(j+1), j f(j+1)}`.
pub fn poa_covering(f: &Mechanism, n: usize) -> Result<PoaReport> {
    check_n(None, Some(f), n)?;
    require_at_least(f, 0.0, "f >= 0")?;
    require_unit_head(f)?;
    let mut best = Best::new();
    for j in 1..n {
        let (jf, here, next) = (j as f64, f.get(j), f.get(j + 1));
        best.offer((jf + 1.0) * next - 1.0, Argmax::CoveringTerm { term: 1, j });
        best.offer(jf * here - next, Argmax::CoveringTerm { term: 2, j });
        best.offer(jf * next, Argmax::CoveringTerm { term: 3, j });
    }
    // n = 1: no candidates, a single agent always picks the optimum
    let excess = if best.argmax.is_some() { best.value } else { 0.0 };
    Ok(PoaReport::from_w_star(1.0 + excess, Method::ClosedFormCovering, best.argmax))
}

/// Set covering with non-increasing `f`: `W* = 1 + max{j f(j) - f(j+1) (j < n), (n-1) f(n)}`.
pub fn poa_covering_nonincreasing(f: &Mechanism, n: usize) -> Result<PoaReport> {
    check_n(None, Some(f), n)?;
    require_at_least(f, 0.0, "f >= 0")?;
    require_unit_head(f)?;
    require_nonincreasing(f)?;
    let mut best = Best::new();
    for j in 1..n {
        best.offer(j as f64 * f.get(j) - f.get(j + 1), Argmax::CoveringTerm { term: 1, j });
    }
    best.offer((n - 1) as f64 * f.get(n), Argmax::CoveringTerm { term: 2, j: n });
    Ok(PoaReport::from_w_star(1.0 + best.value, Method::ClosedFormCovering, best.argmax))
}

/// Supermodular `w` with `f(1) = 1` and `f >= 1`:
/// `PoA = (n / w(n)) / max_j j f(j) / w(j)`.
pub fn poa_supermodular(f: &Mechanism, w: &WelfareBasis, n: usize) -> Result<PoaReport> {
    check_n(Some(w), Some(f), n)?;
    require(w, Assumption::Supermodular)?;
    require_unit_head(f)?;
    require_at_least(f, 1.0, "f >= 1")?;
    let mut best = Best::new();
    for j in 1..=n {
        // f(j) / (w(j)/j) is exactly 1 when f is the Shapley value
        best.offer(f.get(j) / (w.get(j) / j as f64), Argmax::Index { j });
    }
    let poa = n as f64 / w.get(n) / best.value;
    let mut report = PoaReport::from_w_star(1.0 / poa, Method::ClosedFormSupermodular, best.argmax);
    report.poa = poa;
    Ok(report)
}

/// `1 - c/e` with `c = 1 + w(n-1) - w(n)` the curvature.
pub fn approximation_ratio_curvature(w: &WelfareBasis, n: usize) -> Result<f64> {
    check_n(Some(w), None, n)?;
    Ok(1.0 - curvature(w)? / E)
}
