//! Welfare bases, utility-generating mechanisms and the named families built on them.
//!
//! Both [`WelfareBasis`] and [`Mechanism`] are functions on `{1, ..., n}` stored as
//! vectors. Their accessors extend them to `{0, ..., n + 1}` with zeros at both ends,
//! and never extrapolate past `n + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack allowed on first and second differences by the shape predicates.
pub const SHAPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VectorRecord {
    n: usize,
    values: Vec<f64>,
    #[serde(default)]
    label: String,
}

fn check_record(record: &VectorRecord) -> Result<()> {
    if record.n != record.values.len() {
        return Err(Error::InvalidParameter(format!(
            "n = {} but {} values given",
            record.n,
            record.values.len()
        )));
    }
    Ok(())
}

/// The welfare basis `w`, normalized so that `w(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorRecord", into = "VectorRecord")]
pub struct WelfareBasis {
    values: Vec<f64>,
    label: String,
}

impl WelfareBasis {
    /// Builds a basis from `w(1..=n)`, rescaling by `w(1)`.
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("welfare basis needs n >= 1".into()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "welfare basis must be positive and finite, w({}) = {}",
                j + 1,
                values[j]
            )));
        }
        let w1 = values[0];
        let values = values.into_iter().map(|v| v / w1).collect();
        Ok(Self {
            values,
            label: label.into(),
        })
    }

    /// Set covering: `w(j) = 1`.
    pub fn covering(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n], "covering")
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `w(j)` for `j` in `0..=n + 1`; zero at both boundaries.
    pub fn get(&self, j: usize) -> f64 {
        debug_assert!(j <= self.n() + 1, "w({j}) outside [0, n + 1]");
        if j == 0 || j > self.n() {
            0.0
        } else {
            self.values[j - 1]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_concave(&self) -> bool {
        check_assumption(self, Assumption::Submodular).holds
    }

    pub fn is_convex(&self) -> bool {
        check_assumption(self, Assumption::Supermodular).holds
    }

    pub fn is_covering(&self) -> bool {
        check_assumption(self, Assumption::Covering).holds
    }
}

impl TryFrom<VectorRecord> for WelfareBasis {
    type Error = Error;

    fn try_from(record: VectorRecord) -> Result<Self> {
        check_record(&record)?;
        WelfareBasis::new(record.values, record.label)
    }
}

impl From<WelfareBasis> for VectorRecord {
    fn from(w: WelfareBasis) -> Self {
        VectorRecord {
            n: w.n(),
            values: w.values,
            label: w.label,
        }
    }
}

/// A utility-generating mechanism `f`. No sign or scale constraint is imposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VectorRecord", into = "VectorRecord")]
pub struct Mechanism {
    values: Vec<f64>,
    label: String,
}

impl Mechanism {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("mechanism needs n >= 1".into()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mechanism value f({}) is not finite",
                j + 1
            )));
        }
        Ok(Self {
            values,
            label: label.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `f(j)` for `j` in `0..=n + 1`; zero at both boundaries.
    pub fn get(&self, j: usize) -> f64 {
        debug_assert!(j <= self.n() + 1, "f({j}) outside [0, n + 1]");
        if j == 0 || j > self.n() {
            0.0
        } else {
            self.values[j - 1]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `c * f`, keeping the label.
    pub fn scaled(&self, c: f64) -> Mechanism {
        Mechanism {
            values: self.values.iter().map(|v| c * v).collect(),
            label: self.label.clone(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn has_positive_head(&self) -> bool {
        self.values[0] > 0.0
    }

    /// First `j` with `f(j + 1) > f(j)`, if any.
    pub fn first_increase(&self) -> Option<usize> {
        (1..self.n()).find(|&j| self.get(j + 1) > self.get(j) + SHAPE_TOL)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.first_increase().is_none()
    }

    /// First `j` with `f(j) < w(j) - w(j - 1)`, if any.
    pub fn first_below_marginal(&self, w: &WelfareBasis) -> Option<usize> {
        (1..=self.n()).find(|&j| self.get(j) < w.get(j) - w.get(j - 1) - SHAPE_TOL)
    }

    pub fn dominates_marginal(&self, w: &WelfareBasis) -> bool {
        self.first_below_marginal(w).is_none()
    }
}

impl TryFrom<VectorRecord> for Mechanism {
    type Error = Error;

    fn try_from(record: VectorRecord) -> Result<Self> {
        check_record(&record)?;
        Mechanism::new(record.values, record.label)
    }
}

impl From<Mechanism> for VectorRecord {
    fn from(f: Mechanism) -> Self {
        VectorRecord {
            n: f.n(),
            values: f.values,
            label: f.label,
        }
    }
}

/// `f_SV(j) = w(j) / j`.
pub fn shapley_value(w: &WelfareBasis) -> Mechanism {
    let values = (1..=w.n()).map(|j| w.get(j) / j as f64).collect();
    Mechanism {
        values,
        label: "sv".into(),
    }
}

/// `f_MC(j) = w(j) - w(j - 1)`.
pub fn marginal_contribution(w: &WelfareBasis) -> Mechanism {
    let values = (1..=w.n()).map(|j| w.get(j) - w.get(j - 1)).collect();
    Mechanism {
        values,
        label: "mc".into(),
    }
}

/// The optimal covering mechanism with closed form
/// `f(j) = (j-1)! (c + sum_{i=j}^{n-1} 1/i!) / (c + sum_{i=1}^{n-1} 1/i!)`, `c = 1/((n-1)(n-1)!)`.
///
/// With `g(j) = (j-1)! (c + sum_{i=j}^{n-1} 1/i!)` one has `g(n) = 1/(n-1)` and
/// `g(j) = (1 + g(j+1)) / j`, so the factorials never need to be formed.
pub fn gairing_optimal_covering(n: usize) -> Result<Mechanism> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "optimal covering mechanism needs n >= 2, got {n}"
        )));
    }
    let mut g = vec![0.0; n + 1];
    g[n] = 1.0 / (n - 1) as f64;
    for j in (1..n).rev() {
        g[j] = (1.0 + g[j + 1]) / j as f64;
    }
    let head = g[1];
    let values = g[1..].iter().map(|v| v / head).collect();
    Ok(Mechanism {
        values,
        label: "gairing".into(),
    })
}

/// Normalized kill-probability basis `w(j) = (1 - (1-p)^j) / p`.
pub fn vehicle_target_basis(p: f64, n: usize) -> Result<WelfareBasis> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "success probability must lie in (0, 1], got {p}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("welfare basis needs n >= 1".into()));
    }
    // 1 - (1-p)^j = -expm1(j ln(1-p)), exact even for tiny p
    let log_miss = (-p).ln_1p();
    let values = (1..=n)
        .map(|j| -(j as f64 * log_miss).exp_m1() / p)
        .collect();
    WelfareBasis::new(values, BasisFamily::Vehicle { p }.label())
}

/// `w(j) = j^d`.
pub fn power_basis(d: f64, n: usize) -> Result<WelfareBasis> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "power exponent must be finite and >= 0, got {d}"
        )));
    }
    let values = (1..=n).map(|j| (j as f64).powf(d)).collect();
    WelfareBasis::new(values, BasisFamily::Power { d }.label())
}

/// Curvature `c = 1 + w(n-1) - w(n)`.
pub fn curvature(w: &WelfareBasis) -> Result<f64> {
    let n = w.n();
    if n < 2 {
        return Err(Error::InvalidParameter("curvature needs n >= 2".into()));
    }
    Ok(1.0 + w.get(n - 1) - w.get(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Non-decreasing and concave.
    Submodular,
    /// Non-decreasing and convex.
    Supermodular,
    /// `w(j) = 1` for every `j`.
    Covering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeCondition {
    NonDecreasing,
    Concave,
    Convex,
    UnitValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub condition: ShapeCondition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssumptionCheck {
    pub holds: bool,
    pub violations: Vec<Violation>,
}

/// Checks monotonicity and the sign of second differences on `j in [n-1]`
/// (with `w(0) = 0`), or `w = 1` for covering.
pub fn check_assumption(w: &WelfareBasis, kind: Assumption) -> AssumptionCheck {
    let n = w.n();
    let mut violations = Vec::new();
    match kind {
        Assumption::Covering => {
            for j in 1..=n {
                if (w.get(j) - 1.0).abs() > SHAPE_TOL {
                    violations.push(Violation {
                        index: j,
                        condition: ShapeCondition::UnitValue,
                    });
                }
            }
        }
        Assumption::Submodular | Assumption::Supermodular => {
            for j in 1..n {
                let step = w.get(j + 1) - w.get(j);
                let prev = w.get(j) - w.get(j - 1);
                if step < -SHAPE_TOL {
                    violations.push(Violation {
                        index: j,
                        condition: ShapeCondition::NonDecreasing,
                    });
                }
                if kind == Assumption::Submodular && step > prev + SHAPE_TOL {
                    violations.push(Violation {
                        index: j,
                        condition: ShapeCondition::Concave,
                    });
                }
                if kind == Assumption::Supermodular && step < prev - SHAPE_TOL {
                    violations.push(Violation {
                        index: j,
                        condition: ShapeCondition::Convex,
                    });
                }
            }
        }
    }
    AssumptionCheck {
        holds: violations.is_empty(),
        violations,
    }
}

/// Parametric welfare-basis families addressable by a short label
/// (`covering`, `power:d=<d>`, `vehicle:p=<p>`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisFamily {
    Covering,
    Power { d: f64 },
    Vehicle { p: f64 },
}

impl BasisFamily {
    pub fn parse(label: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognized basis label `{label}`"));
        let label = label.trim();
        if label == "covering" {
            return Ok(BasisFamily::Covering);
        }
        let (family, param) = label.split_once(':').ok_or_else(bad)?;
        let (key, value) = param.split_once('=').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        match (family.trim(), key.trim()) {
            ("power", "d") => Ok(BasisFamily::Power { d: value }),
            ("vehicle", "p") => Ok(BasisFamily::Vehicle { p: value }),
            _ => Err(bad()),
        }
    }

    pub fn build(&self, n: usize) -> Result<WelfareBasis> {
        match *self {
            BasisFamily::Covering => WelfareBasis::covering(n),
            BasisFamily::Power { d } => power_basis(d, n),
            BasisFamily::Vehicle { p } => vehicle_target_basis(p, n),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisFamily::Covering => write!(f, "covering"),
            BasisFamily::Power { d } => write!(f, "power:d={d}"),
            BasisFamily::Vehicle { p } => write!(f, "vehicle:p={p}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    /// Direct evaluation of the factorial-sum closed form; only usable for small n.
    fn gairing_by_factorials(n: usize) -> Vec<f64> {
        let c = 1.0 / ((n - 1) as f64 * factorial(n - 1));
        let tail = |from: usize| c + (from..n).map(|i| 1.0 / factorial(i)).sum::<f64>();
        let den = tail(1);
        (1..=n).map(|j| factorial(j - 1) * tail(j) / den).collect()
    }

    #[test]
    fn shapley_examples() {
        let f = shapley_value(&WelfareBasis::covering(3).unwrap());
        assert!(close(f.values(), &[1.0, 0.5, 1.0 / 3.0], 1e-15));
        let f = shapley_value(&power_basis(1.0, 3).unwrap());
        assert!(close(f.values(), &[1.0, 1.0, 1.0], 1e-15));
        let f = shapley_value(&vehicle_target_basis(0.5, 3).unwrap());
        assert!(close(f.values(), &[1.0, 0.75, 1.75 / 3.0], 1e-15));
    }

    #[test]
    fn marginal_examples() {
        let f = marginal_contribution(&WelfareBasis::covering(3).unwrap());
        assert_eq!(f.values(), &[1.0, 0.0, 0.0]);
        let f = marginal_contribution(&power_basis(2.0, 3).unwrap());
        assert!(close(f.values(), &[1.0, 3.0, 5.0], 1e-12));
        let f = marginal_contribution(&power_basis(1.0, 4).unwrap());
        assert!(close(f.values(), &[1.0; 4], 1e-15));
    }

    #[test]
    fn gairing_matches_factorial_form() {
        assert!(close(gairing_optimal_covering(2).unwrap().values(), &[1.0, 0.5], 1e-15));
        for n in 2..=20 {
            let f = gairing_optimal_covering(n).unwrap();
            assert_eq!(f.get(1), 1.0);
            assert!(close(f.values(), &gairing_by_factorials(n), 1e-13), "n = {n}");
        }
        assert!(gairing_optimal_covering(1).is_err());
        assert!(gairing_optimal_covering(0).is_err());
    }

    #[test]
    fn gairing_shape_holds_up_to_large_n() {
        for n in 2..=100 {
            let f = gairing_optimal_covering(n).unwrap();
            assert!(f.is_nonincreasing(), "n = {n}");
            for j in 1..=n {
                assert!(j as f64 * f.get(j) <= 1.0 + 1e-12, "n = {n}, j = {j}");
            }
        }
        let f = gairing_optimal_covering(400).unwrap();
        assert!(f.values().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn vehicle_examples() {
        let w = vehicle_target_basis(1.0, 4).unwrap();
        assert!(w.is_covering());
        let w = vehicle_target_basis(0.5, 3).unwrap();
        assert!(close(w.values(), &[1.0, 1.5, 1.75], 1e-15));
        let w = vehicle_target_basis(1e-8, 3).unwrap();
        assert!((w.get(2) - 2.0).abs() < 1e-6);
        assert!(w.is_concave());
        assert!(vehicle_target_basis(0.0, 3).is_err());
        assert!(vehicle_target_basis(1.2, 3).is_err());
        assert!(vehicle_target_basis(f64::NAN, 3).is_err());
    }

    #[test]
    fn power_examples() {
        assert!(power_basis(0.0, 5).unwrap().is_covering());
        let w = power_basis(1.0, 5).unwrap();
        assert!(w.is_concave() && w.is_convex());
        assert!(close(power_basis(2.0, 3).unwrap().values(), &[1.0, 4.0, 9.0], 0.0));
        assert!(power_basis(-0.5, 3).is_err());
        for k in 0..=20 {
            let d = k as f64 * 0.1;
            let w = power_basis(d, 12).unwrap();
            assert_eq!(w.is_concave(), d <= 1.0 + 1e-12, "d = {d}");
            assert_eq!(w.is_convex(), d >= 1.0 - 1e-12, "d = {d}");
        }
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(curvature(&WelfareBasis::covering(5).unwrap()).unwrap(), 1.0);
        assert_eq!(curvature(&power_basis(1.0, 5).unwrap()).unwrap(), 0.0);
        let c = curvature(&vehicle_target_basis(0.5, 10).unwrap()).unwrap();
        assert!((c - 0.998046875).abs() < 1e-12);
        assert!(curvature(&WelfareBasis::covering(1).unwrap()).is_err());
    }

    #[test]
    fn assumption_examples() {
        assert!(check_assumption(&power_basis(0.5, 8).unwrap(), Assumption::Submodular).holds);
        let sq = power_basis(2.0, 8).unwrap();
        assert!(check_assumption(&sq, Assumption::Supermodular).holds);
        let sub = check_assumption(&sq, Assumption::Submodular);
        assert!(!sub.holds);
        assert!(sub
            .violations
            .iter()
            .all(|v| v.condition == ShapeCondition::Concave));
        let cov = WelfareBasis::covering(6).unwrap();
        assert!(check_assumption(&cov, Assumption::Submodular).holds);
        assert!(check_assumption(&cov, Assumption::Covering).holds);
        // w(0) = 0 makes the first step a drop in slope
        assert!(!check_assumption(&cov, Assumption::Supermodular).holds);
        let bumpy = WelfareBasis::new(vec![1.0, 2.0, 1.5], "bumpy").unwrap();
        let check = check_assumption(&bumpy, Assumption::Submodular);
        assert_eq!(
            check.violations,
            vec![Violation {
                index: 2,
                condition: ShapeCondition::NonDecreasing
            }]
        );
    }

    #[test]
    fn constructor_normalizes_and_validates() {
        let w = WelfareBasis::new(vec![2.0, 3.0, 4.0], "raw").unwrap();
        assert_eq!(w.values(), &[1.0, 1.5, 2.0]);
        assert!(WelfareBasis::new(vec![], "x").is_err());
        assert!(WelfareBasis::new(vec![1.0, 0.0], "x").is_err());
        assert!(WelfareBasis::new(vec![1.0, -1.0], "x").is_err());
        assert!(Mechanism::new(vec![1.0, f64::INFINITY], "x").is_err());
        assert!(Mechanism::new(vec![-1.0, 2.0], "x").is_ok());
    }

    #[test]
    fn boundary_extension_is_zero() {
        let bases = [
            WelfareBasis::covering(4).unwrap(),
            power_basis(1.7, 6).unwrap(),
            vehicle_target_basis(0.3, 5).unwrap(),
        ];
        for w in &bases {
            assert_eq!(w.get(0), 0.0);
            assert_eq!(w.get(w.n() + 1), 0.0);
            for f in [shapley_value(w), marginal_contribution(w)] {
                assert_eq!(f.get(0), 0.0);
                assert_eq!(f.get(f.n() + 1), 0.0);
            }
        }
        let f = gairing_optimal_covering(7).unwrap();
        assert_eq!((f.get(0), f.get(8)), (0.0, 0.0));
    }

    #[test]
    fn library_bases_sv_dominates_mc() {
        let mut bases = Vec::new();
        for k in 0..=10 {
            bases.push(power_basis(k as f64 / 10.0, 15).unwrap());
            if k > 0 {
                bases.push(vehicle_target_basis(k as f64 / 10.0, 15).unwrap());
            }
        }
        for w in &bases {
            let sv = shapley_value(w);
            assert!(sv.is_nonincreasing(), "{}", w.label());
            assert!(sv.dominates_marginal(w), "{}", w.label());
        }
    }

    #[test]
    fn family_labels_roundtrip() {
        for fam in [
            BasisFamily::Covering,
            BasisFamily::Power { d: 0.5 },
            BasisFamily::Vehicle { p: 0.8 },
        ] {
            assert_eq!(BasisFamily::parse(&fam.label()).unwrap(), fam);
        }
        assert!(BasisFamily::parse("power:p=2").is_err());
        assert!(BasisFamily::parse("cubic").is_err());
        assert_eq!(vehicle_target_basis(0.8, 3).unwrap().label(), "vehicle:p=0.8");
    }

    #[test]
    fn json_shape() {
        let w = vehicle_target_basis(0.5, 3).unwrap();
        let text = serde_json::to_string(&w).unwrap();
        assert_eq!(text, r#"{"n":3,"values":[1.0,1.5,1.75],"label":"vehicle:p=0.5"}"#);
        let back: WelfareBasis = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
        let bad = r#"{"n":2,"values":[1.0],"label":"x"}"#;
        assert!(serde_json::from_str::<Mechanism>(bad).is_err());
    }
}
