//! Linear-programming route to the price of anarchy.
//!
//! [`poa_dual_lp`] evaluates a fixed mechanism; [`design_optimal_mechanism`] and
//! [`design_optimal_mechanism_submodular`] search over mechanisms. All of them are
//! indexed by the tuple set produced by [`enumerate_index_set`].

mod design;
mod dual;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, WelfareBasis};

pub use design::{
    design_optimal_mechanism, design_optimal_mechanism_submodular, design_program,
    submodular_design_program,
};
pub use dual::{dual_program, poa_dual_lp};
pub use simplex::{solve_lp, LinearProgram, LpSolution, Row};

/// Feasibility tolerance of the simplex backend.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance of the simplex backend.
pub const OPT_TOL: f64 = 1e-9;
/// A constraint counts as binding when its slack is below this.
pub const BINDING_TOL: f64 = 1e-7;

/// `f` and `w` must both be defined on exactly `[n]`, so that `f(n+1) = w(n+1) = 0`.
pub(crate) fn check_dimensions(f: &Mechanism, w: &WelfareBasis, n: usize) -> Result<()> {
    if n == 0 || f.n() != n || w.n() != n {
        return Err(Error::InvalidParameter(format!(
            "f is defined on [{}] and w on [{}], expected n = {n}",
            f.n(),
            w.n()
        )));
    }
    Ok(())
}

/// One `(a, x, b)` triple indexing a constraint of the PoA programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IndexTuple {
    pub a: usize,
    pub x: usize,
    pub b: usize,
}

impl IndexTuple {
    pub fn new(a: usize, x: usize, b: usize) -> Self {
        Self { a, x, b }
    }

    pub fn sum(&self) -> usize {
        self.a + self.x + self.b
    }

    /// Membership in the index set for `n` agents.
    ///
    /// The sum is capped at `n` so that `a + x + 1 <= n + 1` and `b + x <= n`
    /// always index inside the boundary-extended `f` and `w`.
    pub fn is_member(&self, n: usize) -> bool {
        let s = self.sum();
        (1..=n).contains(&s) && (self.a * self.x * self.b == 0 || s == n)
    }
}

/// All members of the index set for `n`, in lexicographic `(a, x, b)` order.
pub fn enumerate_index_set(n: usize) -> Vec<IndexTuple> {
    let mut out = Vec::new();
    for a in 0..=n {
        for x in 0..=n - a {
            for b in 0..=n - a - x {
                let t = IndexTuple::new(a, x, b);
                if t.is_member(n) {
                    out.push(t);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lp,
    ClosedFormSubmodular,
    ClosedFormCovering,
    ClosedFormSupermodular,
}

/// Which candidate attained the maximum in a closed-form expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Argmax {
    Pair { l: usize, j: usize },
    Index { j: usize },
    /// `term` is the 1-based position of the winning expression inside the max.
    CoveringTerm { term: u8, j: usize },
}

/// Price of anarchy together with the data certifying it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoaReport {
    pub poa: f64,
    #[serde(with = "infinite_as_null")]
    pub w_star: f64,
    pub lambda_star: Option<f64>,
    #[serde(with = "infinite_as_null")]
    pub mu_star: f64,
    pub binding: Vec<IndexTuple>,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmax: Option<Argmax>,
}

impl PoaReport {
    /// Report for `f(1) <= 0`, where every equilibrium can have zero welfare.
    pub fn degenerate(method: Method) -> Self {
        Self {
            poa: 0.0,
            w_star: f64::INFINITY,
            lambda_star: None,
            mu_star: f64::INFINITY,
            binding: Vec::new(),
            method,
            argmax: None,
        }
    }

    pub(crate) fn from_w_star(w_star: f64, method: Method, argmax: Option<Argmax>) -> Self {
        Self {
            poa: 1.0 / w_star,
            w_star,
            lambda_star: None,
            mu_star: w_star,
            binding: Vec::new(),
            method,
            argmax,
        }
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over the full cube `[0, n]^3`.
    fn brute_force(n: usize) -> Vec<IndexTuple> {
        let mut out = Vec::new();
        for a in 0..=n {
            for x in 0..=n {
                for b in 0..=n {
                    let s = a + x + b;
                    if s >= 1 && s <= n && (a * x * b == 0 || s == n) {
                        out.push(IndexTuple::new(a, x, b));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn small_index_sets() {
        let one = enumerate_index_set(1);
        assert_eq!(
            one,
            vec![
                IndexTuple::new(0, 0, 1),
                IndexTuple::new(0, 1, 0),
                IndexTuple::new(1, 0, 0)
            ]
        );
        assert_eq!(enumerate_index_set(2).len(), 9);
    }

    #[test]
    fn matches_brute_force_and_is_sorted() {
        for n in 1..=12 {
            let got = enumerate_index_set(n);
            assert_eq!(got, brute_force(n), "n = {n}");
            assert!(got.windows(2).all(|w| w[0] < w[1]));
            let refiltered: Vec<_> = got.iter().copied().filter(|t| t.is_member(n)).collect();
            assert_eq!(refiltered, got);
        }
    }

    #[test]
    fn degenerate_report_json() {
        let r = PoaReport::degenerate(Method::Lp);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains(r#""w_star":null"#));
        let back: PoaReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
