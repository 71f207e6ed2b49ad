use serde::Serialize;

use crate::error::{Error, Result};

use super::dynamics::respond;
use super::instance::{Action, Allocation, GameInstance};

/// Default bound on the number of allocations the oracle will enumerate.
pub const DEFAULT_ORACLE_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub allocations: u128,
    pub optimum: f64,
    pub optimal_allocation: Allocation,
    pub equilibria: Vec<Allocation>,
    pub worst_equilibrium: f64,
    pub worst_allocation: Allocation,
    /// Worst equilibrium welfare over optimal welfare.
    pub efficiency: f64,
    pub epsilon: f64,
}

/// Enumerates every allocation to find the optimum and all pure Nash equilibria
/// (at the instance's default epsilon).
pub fn exhaustive_oracle(g: &GameInstance, cap: Option<u128>) -> Result<OracleReport> {
    let cap = cap.unwrap_or(DEFAULT_ORACLE_CAP);
    let size = g.allocation_count();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let epsilon = g.default_epsilon();
    let menus: Vec<Vec<Action>> = g.action_sets().iter().map(|s| s.enumerate()).collect();
    let m = g.resources().len();
    let mut digits = vec![0usize; menus.len()];
    let mut a = Allocation::new(menus.iter().map(|menu| menu[0].clone()).collect());

    let mut best: Option<(f64, Allocation)> = None;
    let mut worst: Option<(f64, Allocation)> = None;
    let mut equilibria = Vec::new();
    loop {
        let counts = a.counts(m);
        let welfare = g.welfare_with(&counts);
        if best.as_ref().is_none_or(|(v, _)| welfare > *v) {
            best = Some((welfare, a.clone()));
        }
        let stable = (0..g.agents()).all(|i| respond(g, &a, &counts, i).gain() <= epsilon);
        if stable {
            if worst.as_ref().is_none_or(|(v, _)| welfare < *v) {
                worst = Some((welfare, a.clone()));
            }
            equilibria.push(a.clone());
        }

        // mixed-radix increment, last agent fastest, so allocations come out in
        // lexicographic order
        let Some(pos) = (0..digits.len()).rev().find(|&i| digits[i] + 1 < menus[i].len()) else {
            break;
        };
        digits[pos] += 1;
        a.set(pos, menus[pos][digits[pos]].clone());
        for i in pos + 1..digits.len() {
            digits[i] = 0;
            a.set(i, menus[i][0].clone());
        }
    }

    let (optimum, optimal_allocation) = best.expect("at least one allocation");
    if optimum <= 0.0 {
        return Err(Error::ZeroOptimum);
    }
    let (worst_equilibrium, worst_allocation) = worst.ok_or_else(|| {
        Error::Solver("no pure equilibrium found, which a potential game cannot have".into())
    })?;
    Ok(OracleReport {
        allocations: size,
        optimum,
        optimal_allocation,
        equilibria,
        worst_equilibrium,
        worst_allocation,
        efficiency: worst_equilibrium / optimum,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::instance::{ActionSet, Resource};
    use crate::mechanisms::{shapley_value, WelfareBasis};

    fn resources(values: &[f64]) -> Vec<Resource> {
        values
            .iter()
            .enumerate()
            .map(|(k, &v)| Resource {
                id: format!("r{}", k + 1),
                value: v,
            })
            .collect()
    }

    #[test]
    fn worst_case_ratio() {
        let w = WelfareBasis::covering(2).unwrap();
        let f = shapley_value(&w);
        let actions = vec![
            ActionSet::explicit(vec![vec![0], vec![1]]),
            ActionSet::explicit(vec![vec![0], vec![2]]),
        ];
        let g = GameInstance::new(2, resources(&[1.0, 0.5, 0.5]), actions, w, f).unwrap();
        let r = exhaustive_oracle(&g, None).unwrap();
        assert_eq!(r.allocations, 4);
        assert_eq!(r.optimum, 1.5);
        assert_eq!(r.worst_equilibrium, 1.0);
        assert!((r.efficiency - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.worst_allocation, Allocation::new(vec![vec![0], vec![0]]));
        assert_eq!(r.equilibria.len(), 3);
    }

    #[test]
    fn single_agent_picks_best() {
        let w = WelfareBasis::covering(1).unwrap();
        let f = shapley_value(&w);
        let actions = vec![ActionSet::structured(vec![0, 1, 2], 2)];
        let g = GameInstance::new(1, resources(&[0.3, 0.9, 0.5]), actions, w, f).unwrap();
        let r = exhaustive_oracle(&g, None).unwrap();
        assert_eq!(r.equilibria, vec![Allocation::new(vec![vec![1, 2]])]);
        assert_eq!(r.efficiency, 1.0);
    }

    #[test]
    fn zero_values_and_cap() {
        let w = WelfareBasis::covering(2).unwrap();
        let f = shapley_value(&w);
        let actions = vec![ActionSet::explicit(vec![vec![0], vec![1]]); 2];
        let g = GameInstance::new(2, resources(&[0.0, 0.0]), actions.clone(), w.clone(), f.clone())
            .unwrap();
        assert!(matches!(exhaustive_oracle(&g, None), Err(Error::ZeroOptimum)));
        let g = GameInstance::new(2, resources(&[1.0, 1.0]), actions, w, f).unwrap();
        assert!(matches!(
            exhaustive_oracle(&g, Some(3)),
            Err(Error::CapExceeded { size: 4, cap: 3 })
        ));
    }
}
