//! Named mechanisms, resolvable against a welfare basis.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mechanisms::{
    gairing_optimal_covering, marginal_contribution, shapley_value, Mechanism, WelfareBasis,
};
use crate::poa_lp::{design_optimal_mechanism, design_optimal_mechanism_submodular};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MechanismChoice {
    Shapley,
    Marginal,
    /// The optimal covering mechanism; only depends on `n`.
    Gairing,
    /// Solution of the unrestricted design LP.
    Optimal,
    /// Solution of the design LP restricted to non-increasing `f >= f_MC`.
    OptimalSubmodular,
}

impl MechanismChoice {
    pub const ALL: [MechanismChoice; 5] = [
        MechanismChoice::Shapley,
        MechanismChoice::Marginal,
        MechanismChoice::Gairing,
        MechanismChoice::Optimal,
        MechanismChoice::OptimalSubmodular,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MechanismChoice::Shapley => "sv",
            MechanismChoice::Marginal => "mc",
            MechanismChoice::Gairing => "gairing",
            MechanismChoice::Optimal => "optimal",
            MechanismChoice::OptimalSubmodular => "optimal_submodular",
        }
    }

    pub fn resolve(&self, w: &WelfareBasis) -> Result<Mechanism> {
        let n = w.n();
        match self {
            MechanismChoice::Shapley => Ok(shapley_value(w)),
            MechanismChoice::Marginal => Ok(marginal_contribution(w)),
            MechanismChoice::Gairing => gairing_optimal_covering(n),
            MechanismChoice::Optimal => Ok(design_optimal_mechanism(w, n)?.0),
            MechanismChoice::OptimalSubmodular => Ok(design_optimal_mechanism_submodular(w, n)?.0),
        }
    }
}

impl FromStr for MechanismChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|c| c.label()).collect();
                Error::InvalidParameter(format!(
                    "unknown mechanism `{s}` (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

impl fmt::Display for MechanismChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
