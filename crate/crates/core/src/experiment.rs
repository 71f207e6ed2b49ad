//! Parameter sweeps over basis families and seeded simulation batches, with CSV
//! output. Work is spread over the rayon pool; output order always follows input order.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::choice::MechanismChoice;
use crate::error::{Error, Result};
use crate::game::{
    exhaustive_oracle, run_best_response_dynamics, DynamicsOptions, GameInstance,
};
use crate::instance_gen::{
    gen_content_distribution_with, gen_vehicle_target_with, total_query_mass,
    ContentDistributionConfig, VehicleTargetConfig,
};
use crate::mechanisms::{BasisFamily, Mechanism, WelfareBasis};
use crate::poa_closed::approximation_ratio_curvature;
use crate::poa_lp::{design_optimal_mechanism, design_optimal_mechanism_submodular, poa_dual_lp};

/// Formats with 12 significant digits, in plain notation where `{}` would use it.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("round-trips");
    rounded.to_string()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

/// A mechanism given by name or by explicit values.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismSpec {
    Named(MechanismChoice),
    Fixed(Mechanism),
}

impl MechanismSpec {
    pub fn label(&self) -> String {
        match self {
            MechanismSpec::Named(c) => c.label().to_string(),
            MechanismSpec::Fixed(f) if !f.label().is_empty() => f.label().to_string(),
            MechanismSpec::Fixed(_) => "custom".to_string(),
        }
    }

    pub fn resolve(&self, w: &WelfareBasis) -> Result<Mechanism> {
        match self {
            MechanismSpec::Named(c) => c.resolve(w),
            MechanismSpec::Fixed(f) if f.n() == w.n() => Ok(f.clone()),
            MechanismSpec::Fixed(f) => Err(Error::InvalidParameter(format!(
                "mechanism is defined on [{}] but n = {}",
                f.n(),
                w.n()
            ))),
        }
    }

    /// Price of anarchy of this mechanism on `(w, n)`, through the LP.
    pub fn poa(&self, w: &WelfareBasis) -> Result<f64> {
        let n = w.n();
        match self {
            MechanismSpec::Named(MechanismChoice::Optimal) => Ok(design_optimal_mechanism(w, n)?.1.poa),
            MechanismSpec::Named(MechanismChoice::OptimalSubmodular) => {
                Ok(design_optimal_mechanism_submodular(w, n)?.1.poa)
            }
            _ => Ok(poa_dual_lp(&self.resolve(w)?, w, n)?.poa),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepFamily {
    Power { from: f64, to: f64 },
    Vehicle { from: f64, to: f64 },
    Covering,
}

impl SweepFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SweepFamily::Power { .. } => "power",
            SweepFamily::Vehicle { .. } => "vehicle",
            SweepFamily::Covering => "covering",
        }
    }

    /// `steps` evenly spaced parameters from `from` to `to` inclusive.
    fn grid(&self, steps: usize) -> Vec<Option<f64>> {
        let (from, to) = match *self {
            SweepFamily::Power { from, to } | SweepFamily::Vehicle { from, to } => (from, to),
            SweepFamily::Covering => return vec![None],
        };
        if steps <= 1 {
            return vec![Some(from)];
        }
        (0..steps)
            .map(|k| Some(from + (to - from) * k as f64 / (steps - 1) as f64))
            .collect()
    }

    fn basis(&self, param: Option<f64>) -> BasisFamily {
        match (self, param) {
            (SweepFamily::Power { .. }, Some(d)) => BasisFamily::Power { d },
            (SweepFamily::Vehicle { .. }, Some(p)) => BasisFamily::Vehicle { p },
            _ => BasisFamily::Covering,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: SweepFamily,
    pub steps: usize,
    pub n: usize,
    pub mechanisms: Vec<MechanismSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub family: &'static str,
    pub param: Option<f64>,
    pub n: usize,
    pub mechanism: String,
    pub poa: f64,
    /// `1 - c/e`; left empty where `w` is not submodular or `n < 2`.
    pub app_ratio: Option<f64>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("sweep needs n >= 1".into()));
    }
    let points = spec.family.grid(spec.steps);
    let per_point: Vec<Result<Vec<SweepRow>>> = points
        .par_iter()
        .map(|&param| {
            let w = spec.family.basis(param).build(spec.n)?;
            let app = if spec.n >= 2 && w.is_concave() {
                Some(approximation_ratio_curvature(&w, spec.n)?)
            } else {
                None
            };
            spec.mechanisms
                .iter()
                .map(|m| {
                    Ok(SweepRow {
                        family: spec.family.name(),
                        param,
                        n: spec.n,
                        mechanism: m.label(),
                        poa: m.poa(&w)?,
                        app_ratio: app,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for point in per_point {
        rows.extend(point?);
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "family,param,n,mechanism,poa,app_ratio")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.family,
            fmt_opt(r.param),
            r.n,
            r.mechanism,
            fmt_sig(r.poa),
            fmt_opt(r.app_ratio)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimulationFamily {
    Vehicle(VehicleTargetConfig),
    Content(ContentDistributionConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub family: SimulationFamily,
    pub count: usize,
    /// Instance `i` uses seed `seed + i`.
    pub seed: u64,
    /// Run the exhaustive oracle on each instance (vehicle family only).
    pub oracle: bool,
    pub oracle_cap: Option<u128>,
    pub dynamics: DynamicsOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceResult {
    pub index: usize,
    pub seed: u64,
    /// Welfare of the equilibrium reached by best-response dynamics.
    pub welfare_ne: f64,
    pub rounds: usize,
    pub moves: usize,
    pub queries: usize,
    pub converged: bool,
    pub move_bound: u128,
    pub optimum: Option<f64>,
    pub worst_ne: Option<f64>,
    /// Worst equilibrium over optimum.
    pub efficiency: Option<f64>,
    pub total_mass: Option<f64>,
    /// `efficiency` with the oracle, `welfare_ne / total_mass` for content, else empty.
    pub ratio: Option<f64>,
    /// The oracle was requested but the instance exceeded its cap.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub family: &'static str,
    pub mechanism: String,
    pub count: usize,
    pub skipped: usize,
    pub theoretical_poa: f64,
    pub min_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub max_rounds: usize,
    pub all_converged: bool,
    pub all_within_move_bound: bool,
    pub schedule: crate::game::Schedule,
    pub seed: u64,
}

fn instance_for(family: &SimulationFamily, seed: u64, f: &Mechanism) -> Result<GameInstance> {
    match family {
        SimulationFamily::Vehicle(cfg) => {
            gen_vehicle_target_with(&VehicleTargetConfig { seed, ..cfg.clone() }, f)
        }
        SimulationFamily::Content(cfg) => {
            gen_content_distribution_with(&ContentDistributionConfig { seed, ..cfg.clone() }, f)
        }
    }
}

fn run_instance(spec: &SimulationSpec, index: usize, f: &Mechanism) -> Result<InstanceResult> {
    let seed = spec.seed.wrapping_add(index as u64);
    let g = instance_for(&spec.family, seed, f)?;
    let (end, trace) = run_best_response_dynamics(&g, &g.default_start(), &spec.dynamics)?;
    let welfare_ne = g.welfare(&end)?;
    let mut result = InstanceResult {
        index,
        seed,
        welfare_ne,
        rounds: trace.rounds,
        moves: trace.accepted(),
        queries: trace.queries,
        converged: trace.converged,
        move_bound: g.best_response_bound(),
        optimum: None,
        worst_ne: None,
        efficiency: None,
        total_mass: None,
        ratio: None,
        skipped: false,
    };
    match spec.family {
        SimulationFamily::Content(_) => {
            let mass = total_query_mass(&g);
            result.total_mass = Some(mass);
            result.ratio = Some(welfare_ne / mass);
        }
        SimulationFamily::Vehicle(_) if spec.oracle => match exhaustive_oracle(&g, spec.oracle_cap) {
            Ok(report) => {
                result.optimum = Some(report.optimum);
                result.worst_ne = Some(report.worst_equilibrium);
                result.efficiency = Some(report.efficiency);
                result.ratio = Some(report.efficiency);
            }
            Err(Error::CapExceeded { .. }) => result.skipped = true,
            Err(e) => return Err(e),
        },
        SimulationFamily::Vehicle(_) => {}
    }
    Ok(result)
}

/// Generates `count` instances, runs best-response dynamics (and optionally the
/// oracle) on each, and summarizes the ratios against the mechanism's PoA.
pub fn run_simulation(
    spec: &SimulationSpec,
    f: &Mechanism,
) -> Result<(Vec<InstanceResult>, SimulationSummary)> {
    let (family, w) = match &spec.family {
        SimulationFamily::Vehicle(cfg) => ("vehicle", cfg.basis()?),
        SimulationFamily::Content(cfg) => ("content", cfg.basis()?),
    };
    let theoretical_poa = poa_dual_lp(f, &w, w.n())?.poa;
    let results = (0..spec.count)
        .into_par_iter()
        .map(|i| run_instance(spec, i, f))
        .collect::<Result<Vec<_>>>()?;

    let ratios: Vec<f64> = results.iter().filter_map(|r| r.ratio).collect();
    let summary = SimulationSummary {
        family,
        mechanism: if f.label().is_empty() { "custom".into() } else { f.label().into() },
        count: spec.count,
        skipped: results.iter().filter(|r| r.skipped).count(),
        theoretical_poa,
        min_ratio: ratios.iter().copied().reduce(f64::min),
        mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        max_rounds: results.iter().map(|r| r.rounds).max().unwrap_or(0),
        all_converged: results.iter().all(|r| r.converged),
        all_within_move_bound: results.iter().all(|r| r.moves as u128 <= r.move_bound),
        schedule: spec.dynamics.schedule,
        seed: spec.seed,
    };
    Ok((results, summary))
}

pub fn write_simulation_csv<W: Write>(results: &[InstanceResult], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "index,seed,welfare_ne,rounds,moves,queries,converged,move_bound,optimum,worst_ne,efficiency,total_mass,ratio,skipped"
    )?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.seed,
            fmt_sig(r.welfare_ne),
            r.rounds,
            r.moves,
            r.queries,
            r.converged,
            r.move_bound,
            fmt_opt(r.optimum),
            fmt_opt(r.worst_ne),
            fmt_opt(r.efficiency),
            fmt_opt(r.total_mass),
            fmt_opt(r.ratio),
            r.skipped
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(10.0 / 19.0), "0.526315789474");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(2.0 / 3.0), "0.666666666667");
    }

    #[test]
    fn power_sweep_endpoints() {
        let spec = SweepSpec {
            family: SweepFamily::Power { from: 0.0, to: 1.0 },
            steps: 11,
            n: 20,
            mechanisms: vec![
                MechanismSpec::Named(MechanismChoice::Shapley),
                MechanismSpec::Named(MechanismChoice::Marginal),
                MechanismSpec::Named(MechanismChoice::Optimal),
            ],
        };
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 33);
        assert!((rows[0].poa - 20.0 / 39.0).abs() < 1e-9);
        assert!((rows[0].app_ratio.unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        for r in &rows[30..] {
            assert!((r.poa - 1.0).abs() < 1e-9);
            assert!((r.app_ratio.unwrap() - 1.0).abs() < 1e-12);
        }
        let mut a = Vec::new();
        write_sweep_csv(&rows, &mut a).unwrap();
        let mut b = Vec::new();
        write_sweep_csv(&run_sweep(&spec).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("family,param,n,mechanism,poa,app_ratio\npower,0,20,sv,0.512820512821,"));
    }

    #[test]
    fn small_simulations() {
        let spec = SimulationSpec {
            family: SimulationFamily::Vehicle(VehicleTargetConfig::default()),
            count: 8,
            seed: 1,
            oracle: true,
            oracle_cap: None,
            dynamics: DynamicsOptions::default(),
        };
        let f = VehicleTargetConfig::default().resolve_mechanism().unwrap();
        let (rows, summary) = run_simulation(&spec, &f).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[3].seed, 4);
        assert!(summary.min_ratio.unwrap() >= summary.theoretical_poa - 1e-9);
        assert!(summary.all_converged && summary.all_within_move_bound);

        let capped = SimulationSpec {
            oracle_cap: Some(10),
            ..spec.clone()
        };
        let (_, summary) = run_simulation(&capped, &f).unwrap();
        assert_eq!(summary.skipped, 8);
        assert_eq!(summary.min_ratio, None);

        let content = SimulationSpec {
            family: SimulationFamily::Content(ContentDistributionConfig::default()),
            count: 3,
            oracle: false,
            ..spec
        };
        let f = ContentDistributionConfig::default().resolve_mechanism().unwrap();
        let (rows, _) = run_simulation(&content, &f).unwrap();
        assert!(rows.iter().all(|r| r.ratio.unwrap() > 0.0 && r.ratio.unwrap() <= 1.0));
    }
}
