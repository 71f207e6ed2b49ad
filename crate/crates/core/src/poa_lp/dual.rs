//! Price of anarchy of a fixed mechanism through the two-variable dual program
//! `min mu  s.t.  lambda >= 0,  w(b+x) - mu w(a+x) + lambda [a f(a+x) - b f(a+x+1)] <= 0`.

use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, WelfareBasis};

use super::simplex::{solve_lp, LinearProgram, LpSolution};
use super::{check_dimensions, enumerate_index_set, IndexTuple, Method, PoaReport, BINDING_TOL};

/// Coefficients of one tuple's row as `g lambda - h mu <= -r`.
#[derive(Debug, Clone, Copy)]
struct DualRow {
    tuple: IndexTuple,
    g: f64,
    h: f64,
    r: f64,
}

fn dual_rows(f: &Mechanism, w: &WelfareBasis, n: usize) -> Vec<DualRow> {
    enumerate_index_set(n)
        .into_iter()
        .map(|t| {
            let (a, x, b) = (t.a as f64, t.x, t.b as f64);
            DualRow {
                tuple: t,
                g: a * f.get(t.a + x) - b * f.get(t.a + x + 1),
                h: w.get(t.a + x),
                r: w.get(t.b + x),
            }
        })
        .collect()
}

/// The dual program over `(lambda, mu)`, one row per index tuple.
pub fn dual_program(f: &Mechanism, w: &WelfareBasis, n: usize) -> Result<LinearProgram> {
    check_dimensions(f, w, n)?;
    let mut lp = LinearProgram::minimize(["lambda", "mu"], vec![0.0, 1.0]);
    lp.set_lower(0, 0.0);
    for row in dual_rows(f, w, n) {
        let t = row.tuple;
        lp.le(
            vec![row.g, -row.h],
            -row.r,
            format!("({},{},{})", t.a, t.x, t.b),
        );
    }
    Ok(lp)
}

/// `1 / W*` for mechanism `f`, together with `(lambda*, mu*)` and the binding tuples.
///
/// Returns the degenerate report when `f(1) <= 0`. The program is solved by walking
/// the upper envelope of the lines `mu >= (r + g lambda) / h`; debug builds also
/// solve it with the simplex and compare.
pub fn poa_dual_lp(f: &Mechanism, w: &WelfareBasis, n: usize) -> Result<PoaReport> {
    check_dimensions(f, w, n)?;
    if !f.has_positive_head() {
        return Ok(PoaReport::degenerate(Method::Lp));
    }
    let rows = dual_rows(f, w, n);
    let (lambda, mu) = envelope_minimum(&rows)?;

    if cfg!(debug_assertions) {
        let lp = dual_program(f, w, n)?;
        match solve_lp(&lp)? {
            LpSolution::Optimal { value, .. } if (value - mu).abs() <= 1e-7 * mu.abs().max(1.0) => {}
            other => {
                return Err(Error::Solver(format!(
                    "envelope optimum mu = {mu} disagrees with simplex result {other:?}"
                )))
            }
        }
    }

    let binding = rows
        .iter()
        .filter(|row| (row.g * lambda - row.h * mu + row.r).abs() <= BINDING_TOL)
        .map(|row| row.tuple)
        .collect();
    Ok(PoaReport {
        poa: 1.0 / mu,
        w_star: mu,
        lambda_star: Some(lambda),
        mu_star: mu,
        binding,
        method: Method::Lp,
        argmax: None,
    })
}

/// Minimizes `F(lambda) = max_k (c_k + s_k lambda)` over `lambda >= lambda_lo`.
///
/// Rows with `a + x = 0` carry no `mu` and only bound `lambda` from below. Starting at
/// that bound, the walk follows the active line to the next breakpoint until the
/// active slope is non-negative. Requires `f(1) > 0`, which makes the `(1,0,0)` line
/// increasing and the minimum finite.
fn envelope_minimum(rows: &[DualRow]) -> Result<(f64, f64)> {
    let mut lambda = 0.0_f64;
    let mut lines = Vec::with_capacity(rows.len());
    for row in rows {
        if row.h > 0.0 {
            lines.push((row.r / row.h, row.g / row.h));
        } else if row.g < 0.0 {
            // g lambda <= -r with g = -b f(1) < 0
            lambda = lambda.max(row.r / -row.g);
        } else if row.r > 0.0 {
            return Err(Error::Solver("dual program has an unsatisfiable row".into()));
        }
    }
    let value = |l: f64| lines.iter().map(|&(c, s)| c + s * l).fold(f64::NEG_INFINITY, f64::max);
    let close = |u: f64, v: f64| (u - v).abs() <= 1e-12 * (1.0 + u.abs().max(v.abs()));

    let top = value(lambda);
    let (mut c0, mut s0) = lines
        .iter()
        .copied()
        .filter(|&(c, s)| close(c + s * lambda, top))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or_else(|| Error::Solver("dual program has no mu rows".into()))?;

    for _ in 0..=lines.len() {
        if s0 >= 0.0 {
            let mu = value(lambda);
            return Ok((lambda, mu));
        }
        // next line to overtake the active one
        let mut next: Option<(f64, f64, f64)> = None;
        for &(c, s) in &lines {
            if s <= s0 {
                continue;
            }
            let t = ((c0 - c) / (s - s0)).max(lambda);
            next = match next {
                None => Some((t, c, s)),
                Some((bt, bc, bs)) => {
                    if close(t, bt) {
                        if s > bs {
                            Some((bt.min(t), c, s))
                        } else {
                            Some((bt.min(t), bc, bs))
                        }
                    } else if t < bt {
                        Some((t, c, s))
                    } else {
                        Some((bt, bc, bs))
                    }
                }
            };
        }
        let (t, c, s) =
            next.ok_or_else(|| Error::Solver("dual program is unbounded in mu".into()))?;
        lambda = t;
        c0 = c;
        s0 = s;
    }
    Err(Error::Solver("envelope walk did not terminate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{marginal_contribution, shapley_value, vehicle_target_basis};

    fn simplex_mu(f: &Mechanism, w: &WelfareBasis, n: usize) -> (f64, Vec<f64>) {
        solve_lp(&dual_program(f, w, n).unwrap())
            .unwrap()
            .optimal()
            .unwrap()
    }

    #[test]
    fn covering_shapley_n2() {
        let w = WelfareBasis::covering(2).unwrap();
        let r = poa_dual_lp(&shapley_value(&w), &w, 2).unwrap();
        assert!((r.poa - 2.0 / 3.0).abs() < 1e-9);
        let doubled = shapley_value(&w).scaled(2.0);
        let r2 = poa_dual_lp(&doubled, &w, 2).unwrap();
        assert!((r2.poa - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn vehicle_p08_n10() {
        let w = vehicle_target_basis(0.8, 10).unwrap();
        let sv = poa_dual_lp(&shapley_value(&w), &w, 10).unwrap();
        assert!((sv.poa - 0.568).abs() < 5e-4, "{}", sv.poa);
        let mc = poa_dual_lp(&marginal_contribution(&w), &w, 10).unwrap();
        assert!((mc.lambda_star.unwrap() - 1.0).abs() < 1e-9);
        assert!((mc.mu_star - 1.8).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_head_is_degenerate() {
        let w = WelfareBasis::covering(3).unwrap();
        for head in [0.0, -1.0] {
            let f = Mechanism::new(vec![head, 0.5, 0.2], "").unwrap();
            let r = poa_dual_lp(&f, &w, 3).unwrap();
            assert_eq!(r.poa, 0.0);
            assert!(r.mu_star.is_infinite());
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let w = WelfareBasis::covering(3).unwrap();
        let f = shapley_value(&WelfareBasis::covering(4).unwrap());
        assert!(poa_dual_lp(&f, &w, 3).is_err());
    }

    #[test]
    fn envelope_agrees_with_simplex_on_odd_mechanisms() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..9);
            let mut w = vec![1.0];
            for _ in 1..n {
                let last = *w.last().unwrap();
                w.push(last + rng.gen_range(0.0..2.0));
            }
            let w = WelfareBasis::new(w, "").unwrap();
            let f: Vec<f64> = (0..n).map(|j| if j == 0 { rng.gen_range(0.1..2.0) } else { rng.gen_range(-1.0..2.0) }).collect();
            let f = Mechanism::new(f, "").unwrap();
            let r = poa_dual_lp(&f, &w, n).unwrap();
            let (mu, _) = simplex_mu(&f, &w, n);
            assert!((r.mu_star - mu).abs() <= 1e-7 * mu.max(1.0), "{} vs {mu}", r.mu_star);
            let lp = dual_program(&f, &w, n).unwrap();
            assert!(lp.max_violation(&[r.lambda_star.unwrap(), r.mu_star]) <= 1e-9);
            assert!(!r.binding.is_empty());
        }
    }
}
