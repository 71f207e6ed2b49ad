//! Mechanism design: the mechanism with the largest price of anarchy as an LP in
//! `(f(1), ..., f(n), mu)`.

use crate::error::{Error, Result};
use crate::mechanisms::{check_assumption, marginal_contribution, Assumption, Mechanism, WelfareBasis};

use super::simplex::{solve_lp, LinearProgram, LpSolution};
use super::{enumerate_index_set, IndexTuple, Method, PoaReport, BINDING_TOL};

/// A design-LP row `sum_j coeff_j f(j) - w_coeff mu <= -rhs` tied to the tuple it came from.
struct DesignRow {
    tuple: IndexTuple,
    /// `(j, coefficient)` pairs; `f(n + 1)` never appears since it is the constant 0.
    terms: Vec<(usize, f64)>,
    w_coeff: f64,
    rhs: f64,
}

fn blank(n: usize) -> LinearProgram {
    let mut names: Vec<String> = (1..=n).map(|j| format!("f{j}")).collect();
    names.push("mu".into());
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut lp = LinearProgram::minimize(names, objective);
    lp.set_lower(0, 1.0);
    lp
}

fn push_row(lp: &mut LinearProgram, n: usize, row: &DesignRow) {
    let mut coeffs = vec![0.0; n + 1];
    for &(j, c) in &row.terms {
        if (1..=n).contains(&j) {
            coeffs[j - 1] += c;
        }
    }
    coeffs[n] = -row.w_coeff;
    let t = row.tuple;
    lp.le(coeffs, -row.rhs, format!("({},{},{})", t.a, t.x, t.b));
}

fn tuple_rows(w: &WelfareBasis, n: usize) -> Vec<DesignRow> {
    enumerate_index_set(n)
        .into_iter()
        .map(|t| DesignRow {
            tuple: t,
            terms: vec![(t.a + t.x, t.a as f64), (t.a + t.x + 1, -(t.b as f64))],
            w_coeff: w.get(t.a + t.x),
            rhs: w.get(t.b + t.x),
        })
        .collect()
}

/// Rows indexed by `n >= j >= l >= 0`, each mapped back to the tuple it restricts:
/// `(j, 0, l)` when `1 <= j + l <= n` and `(n - l, j + l - n, n - j)` when `j + l >= n`.
fn pair_rows(w: &WelfareBasis, n: usize) -> Vec<DesignRow> {
    let mut rows = Vec::new();
    for j in 1..=n {
        for l in 0..=j {
            let (jf, lf) = (j as f64, l as f64);
            if j + l <= n {
                rows.push(DesignRow {
                    tuple: IndexTuple::new(j, 0, l),
                    terms: vec![(j, jf), (j + 1, -lf)],
                    w_coeff: w.get(j),
                    rhs: w.get(l),
                });
            }
            if j + l >= n {
                rows.push(DesignRow {
                    tuple: IndexTuple::new(n - l, j + l - n, n - j),
                    terms: vec![(j, (n - l) as f64), (j + 1, -((n - j) as f64))],
                    w_coeff: w.get(j),
                    rhs: w.get(l),
                });
            }
        }
    }
    rows
}

fn check_n(w: &WelfareBasis, n: usize) -> Result<()> {
    if n == 0 || w.n() != n {
        return Err(Error::InvalidParameter(format!(
            "welfare basis is defined on [{}] but n = {n}",
            w.n()
        )));
    }
    Ok(())
}

/// The unrestricted design program over every index tuple, with `f(1) >= 1`.
pub fn design_program(w: &WelfareBasis, n: usize) -> Result<LinearProgram> {
    check_n(w, n)?;
    let mut lp = blank(n);
    for row in tuple_rows(w, n) {
        push_row(&mut lp, n, &row);
    }
    Ok(lp)
}

/// The design program restricted to non-increasing mechanisms dominating `f_MC`.
/// Requires a submodular `w`.
pub fn submodular_design_program(w: &WelfareBasis, n: usize) -> Result<LinearProgram> {
    check_n(w, n)?;
    let check = check_assumption(w, Assumption::Submodular);
    if let Some(v) = check.violations.first() {
        return Err(Error::InvalidParameter(format!(
            "welfare basis is not submodular: {:?} fails at j = {}",
            v.condition, v.index
        )));
    }
    let mut lp = blank(n);
    for row in pair_rows(w, n) {
        push_row(&mut lp, n, &row);
    }
    let mc = marginal_contribution(w);
    for j in 1..=n {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[j - 1] = 1.0;
        lp.ge(coeffs.clone(), mc.get(j), format!("f{j}>=mc"));
        if j < n {
            coeffs[j] = -1.0;
        }
        lp.ge(coeffs, 0.0, format!("f{j}>=f{}", j + 1));
    }
    Ok(lp)
}

fn solve_design(lp: &LinearProgram, rows: &[DesignRow], n: usize, label: &str) -> Result<(Mechanism, PoaReport)> {
    let (mu, x) = match solve_lp(lp)? {
        LpSolution::Optimal { value, x } => (value, x),
        other => return Err(Error::Solver(format!("design program returned {other:?}"))),
    };
    let f = Mechanism::new(x[..n].to_vec(), label)?;
    let mut binding: Vec<IndexTuple> = rows
        .iter()
        .filter(|row| {
            let lhs: f64 = row.terms.iter().map(|&(j, c)| c * f.get(j)).sum();
            (lhs - row.w_coeff * mu + row.rhs).abs() <= BINDING_TOL
        })
        .map(|row| row.tuple)
        .collect();
    binding.sort();
    binding.dedup();
    let report = PoaReport {
        poa: 1.0 / mu,
        w_star: mu,
        lambda_star: Some(1.0),
        mu_star: mu,
        binding,
        method: Method::Lp,
        argmax: None,
    };
    Ok((f, report))
}

/// Optimal mechanism for `(w, n)` and its price of anarchy. The optimizer is in
/// general not unique; this returns the basic solution found by the simplex.
pub fn design_optimal_mechanism(w: &WelfareBasis, n: usize) -> Result<(Mechanism, PoaReport)> {
    let lp = design_program(w, n)?;
    solve_design(&lp, &tuple_rows(w, n), n, "optimal")
}

/// Best mechanism among the non-increasing ones with `f >= f_MC`, for submodular `w`.
pub fn design_optimal_mechanism_submodular(w: &WelfareBasis, n: usize) -> Result<(Mechanism, PoaReport)> {
    let lp = submodular_design_program(w, n)?;
    solve_design(&lp, &pair_rows(w, n), n, "optimal_submodular")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{gairing_optimal_covering, power_basis, shapley_value, vehicle_target_basis};
    use crate::poa_lp::poa_dual_lp;

    #[test]
    fn covering_n2_matches_gairing() {
        let w = WelfareBasis::covering(2).unwrap();
        let (f, r) = design_optimal_mechanism(&w, 2).unwrap();
        assert!((r.poa - 2.0 / 3.0).abs() < 1e-9);
        let g = gairing_optimal_covering(2).unwrap();
        let pg = poa_dual_lp(&g, &w, 2).unwrap();
        assert!((pg.poa - r.poa).abs() < 1e-6);
        assert!((poa_dual_lp(&f, &w, 2).unwrap().poa - r.poa).abs() < 1e-9);
        let (_, rs) = design_optimal_mechanism_submodular(&w, 2).unwrap();
        assert!((rs.poa - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn vehicle_design_values() {
        let w = vehicle_target_basis(0.8, 10).unwrap();
        let (f, r) = design_optimal_mechanism(&w, 10).unwrap();
        assert!((r.poa - 0.688).abs() < 5e-4, "{}", r.poa);
        assert!((poa_dual_lp(&f, &w, 10).unwrap().poa - r.poa).abs() < 1e-7);
        let (_, rs) = design_optimal_mechanism_submodular(&w, 10).unwrap();
        assert!(rs.poa >= 0.556 && rs.poa <= r.poa + 1e-6, "{}", rs.poa);
        let sv = poa_dual_lp(&shapley_value(&w), &w, 10).unwrap().poa;
        assert!(rs.poa >= sv - 1e-7);
    }

    #[test]
    fn squares_design_is_shapley_bound() {
        let w = power_basis(2.0, 5).unwrap();
        let (_, r) = design_optimal_mechanism(&w, 5).unwrap();
        assert!((r.poa - 0.2).abs() < 1e-7);
    }

    #[test]
    fn linear_restricted_design_is_efficient() {
        let w = power_basis(1.0, 6).unwrap();
        let (f, r) = design_optimal_mechanism_submodular(&w, 6).unwrap();
        assert!((r.poa - 1.0).abs() < 1e-7);
        assert!(f.values().iter().all(|v| (v - 1.0).abs() < 1e-7));
    }

    #[test]
    fn restricted_design_needs_submodular_basis() {
        let w = power_basis(2.0, 4).unwrap();
        assert!(matches!(
            design_optimal_mechanism_submodular(&w, 4),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn pair_rows_map_to_index_tuples() {
        for n in 1..=8 {
            let w = WelfareBasis::covering(n).unwrap();
            for row in pair_rows(&w, n) {
                assert!(row.tuple.is_member(n), "{:?}", row.tuple);
            }
        }
    }
}
