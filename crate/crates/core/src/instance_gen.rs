//! Seeded generators for the vehicle-target and content-distribution families.
//!
//! All randomness comes from a ChaCha8 stream seeded with the config's `seed`, so a
//! config always produces the same instance.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choice::MechanismChoice;
use crate::error::{Error, Result};
use crate::game::{ActionSet, GameInstance, Resource};
use crate::mechanisms::{vehicle_target_basis, Mechanism, WelfareBasis};

fn resource_list(values: Vec<f64>) -> Vec<Resource> {
    values
        .into_iter()
        .enumerate()
        .map(|(k, value)| Resource {
            id: format!("r{}", k + 1),
            value,
        })
        .collect()
}

/// Agents each choose one of two targets; targets are worth `U[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleTargetConfig {
    pub agents: usize,
    /// Defaults to `agents + 1`.
    pub resources: Option<usize>,
    pub p: f64,
    pub seed: u64,
    pub mechanism: String,
}

impl Default for VehicleTargetConfig {
    fn default() -> Self {
        Self {
            agents: 10,
            resources: None,
            p: 0.8,
            seed: 0,
            mechanism: "sv".into(),
        }
    }
}

impl VehicleTargetConfig {
    pub fn resource_count(&self) -> usize {
        self.resources.unwrap_or(self.agents + 1)
    }

    pub fn basis(&self) -> Result<WelfareBasis> {
        vehicle_target_basis(self.p, self.agents)
    }

    pub fn resolve_mechanism(&self) -> Result<Mechanism> {
        self.mechanism.parse::<MechanismChoice>()?.resolve(&self.basis()?)
    }
}

pub fn gen_vehicle_target(cfg: &VehicleTargetConfig) -> Result<GameInstance> {
    gen_vehicle_target_with(cfg, &cfg.resolve_mechanism()?)
}

/// Like [`gen_vehicle_target`] with a pre-built mechanism, which saves re-solving
/// an LP per instance in batches.
pub fn gen_vehicle_target_with(cfg: &VehicleTargetConfig, f: &Mechanism) -> Result<GameInstance> {
    let m = cfg.resource_count();
    if cfg.agents == 0 || m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least one agent and two targets, got {} and {m}",
            cfg.agents
        )));
    }
    let w = cfg.basis()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    loop {
        let values: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let actions: Vec<ActionSet> = (0..cfg.agents)
            .map(|_| {
                let pair = sample(&mut rng, m, 2);
                ActionSet::explicit(pair.iter().map(|r| vec![r]).collect())
            })
            .collect();
        let reachable = actions.iter().any(|set| match set {
            ActionSet::Explicit(list) => list.iter().flatten().any(|&r| values[r] > 0.0),
            ActionSet::Structured { .. } => unreachable!(),
        });
        // an all-zero draw has no positive-welfare allocation; draw again
        if reachable {
            return GameInstance::new(cfg.agents, resource_list(values), actions, w, f.clone());
        }
    }
}

/// Caching nodes and items on an integer grid; item `r` has query rate `r^-alpha` and
/// node `i` may store up to `cap` items within distance `radius` of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContentDistributionConfig {
    pub grid_x: usize,
    pub grid_y: usize,
    pub nodes: usize,
    pub items: usize,
    pub alpha: f64,
    pub radius: f64,
    /// Per-item radii overriding `radius`.
    pub radii: Option<Vec<f64>>,
    pub cap: usize,
    pub seed: u64,
    pub mechanism: String,
}

impl Default for ContentDistributionConfig {
    fn default() -> Self {
        Self {
            grid_x: 100,
            grid_y: 100,
            nodes: 20,
            items: 100,
            alpha: 0.7,
            radius: 25.0,
            radii: None,
            cap: 3,
            seed: 0,
            mechanism: "gairing".into(),
        }
    }
}

impl ContentDistributionConfig {
    /// `q_r = r^-alpha` for ranks `1..=items`.
    pub fn query_rates(&self) -> Vec<f64> {
        (1..=self.items).map(|r| (r as f64).powf(-self.alpha)).collect()
    }

    /// `W_tot = sum_r q_r`.
    pub fn total_query_mass(&self) -> f64 {
        self.query_rates().iter().sum()
    }

    pub fn basis(&self) -> Result<WelfareBasis> {
        WelfareBasis::covering(self.nodes)
    }

    pub fn resolve_mechanism(&self) -> Result<Mechanism> {
        self.mechanism.parse::<MechanismChoice>()?.resolve(&self.basis()?)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.grid_x == 0 || self.grid_y == 0 || self.nodes == 0 || self.items == 0 {
            return bad("grid, node count and item count must be positive".into());
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        let radii_ok = match &self.radii {
            Some(r) => r.len() == self.items && r.iter().all(|v| v.is_finite() && *v >= 0.0),
            None => self.radius.is_finite() && self.radius >= 0.0,
        };
        if !radii_ok {
            return bad("radii must be finite, >= 0 and one per item".into());
        }
        Ok(())
    }

    fn radius_of(&self, item: usize) -> f64 {
        self.radii.as_ref().map_or(self.radius, |r| r[item])
    }
}

pub fn gen_content_distribution(cfg: &ContentDistributionConfig) -> Result<GameInstance> {
    gen_content_distribution_with(cfg, &cfg.resolve_mechanism()?)
}

pub fn gen_content_distribution_with(
    cfg: &ContentDistributionConfig,
    f: &Mechanism,
) -> Result<GameInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut place = |count: usize| -> Vec<(i64, i64)> {
        (0..count)
            .map(|_| {
                (
                    rng.gen_range(0..cfg.grid_x) as i64,
                    rng.gen_range(0..cfg.grid_y) as i64,
                )
            })
            .collect()
    };
    let nodes = place(cfg.nodes);
    let items = place(cfg.items);
    let actions = nodes
        .iter()
        .map(|&(px, py)| {
            let feasible = items
                .iter()
                .enumerate()
                .filter(|&(r, &(ox, oy))| {
                    let d2 = ((ox - px).pow(2) + (oy - py).pow(2)) as f64;
                    let rho = cfg.radius_of(r);
                    d2 <= rho * rho
                })
                .map(|(r, _)| r)
                .collect();
            ActionSet::structured(feasible, cfg.cap)
        })
        .collect();
    GameInstance::new(
        cfg.nodes,
        resource_list(cfg.query_rates()),
        actions,
        cfg.basis()?,
        f.clone(),
    )
}

/// `sum_r v_r`, which bounds the welfare of any allocation under a covering basis.
pub fn total_query_mass(g: &GameInstance) -> f64 {
    g.resources().iter().map(|r| r.value).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::exhaustive_oracle;
    use crate::poa_lp::poa_dual_lp;

    #[test]
    fn vehicle_is_deterministic_and_well_formed() {
        let cfg = VehicleTargetConfig {
            seed: 5,
            ..Default::default()
        };
        let a = gen_vehicle_target(&cfg).unwrap();
        let b = gen_vehicle_target(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.agents(), 10);
        assert_eq!(a.resources().len(), 11);
        for set in a.action_sets() {
            let ActionSet::Explicit(list) = set else { panic!() };
            assert_eq!(list.len(), 2);
            assert!(list.iter().all(|act| act.len() == 1));
            assert_ne!(list[0], list[1]);
        }
        assert!(a.resources().iter().all(|r| (0.0..1.0).contains(&r.value)));
        let other = gen_vehicle_target(&VehicleTargetConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(other, a);
    }

    #[test]
    fn vehicle_p1_is_covering() {
        let cfg = VehicleTargetConfig {
            p: 1.0,
            ..Default::default()
        };
        assert!(gen_vehicle_target(&cfg).unwrap().basis().is_covering());
    }

    #[test]
    fn vehicle_batch_respects_poa() {
        let cfg = VehicleTargetConfig::default();
        let f = cfg.resolve_mechanism().unwrap();
        let poa = poa_dual_lp(&f, &cfg.basis().unwrap(), 10).unwrap().poa;
        for seed in 0..30 {
            let g = gen_vehicle_target_with(&VehicleTargetConfig { seed, ..cfg.clone() }, &f).unwrap();
            let r = exhaustive_oracle(&g, None).unwrap();
            assert!(r.efficiency >= poa - 1e-9);
        }
    }

    #[test]
    fn zipf_rates() {
        let cfg = ContentDistributionConfig {
            items: 3,
            alpha: 1.0,
            ..Default::default()
        };
        assert!((cfg.total_query_mass() - 11.0 / 6.0).abs() < 1e-15);
        let cfg = ContentDistributionConfig::default();
        let q = cfg.query_rates();
        assert_eq!(q[0], 1.0);
        assert!((q[1] - 0.61557).abs() < 1e-5);
        assert!(q.windows(2).all(|p| p[1] <= p[0]));
        let flat = ContentDistributionConfig {
            alpha: 0.0,
            ..Default::default()
        };
        assert_eq!(flat.total_query_mass(), 100.0);
    }

    #[test]
    fn content_is_deterministic() {
        let cfg = ContentDistributionConfig {
            seed: 17,
            ..Default::default()
        };
        let a = gen_content_distribution(&cfg).unwrap();
        let b = gen_content_distribution(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.agents(), 20);
        assert!(a.basis().is_covering());
        assert_eq!(a.mechanism().label(), "gairing");
        assert!((total_query_mass(&a) - cfg.total_query_mass()).abs() < 1e-12);
        let w = a.welfare(&a.default_start()).unwrap();
        assert!(w <= total_query_mass(&a) + 1e-12);
    }

    #[test]
    fn huge_radius_reaches_everything() {
        let cfg = ContentDistributionConfig {
            grid_x: 10,
            grid_y: 10,
            items: 12,
            radius: (200.0f64).sqrt(),
            ..Default::default()
        };
        let g = gen_content_distribution(&cfg).unwrap();
        for set in g.action_sets() {
            let ActionSet::Structured { feasible, cap } = set else { panic!() };
            assert_eq!(feasible.len(), 12);
            assert_eq!(*cap, 3);
        }
    }

    #[test]
    fn nodes_out_of_range_get_the_empty_action() {
        let cfg = ContentDistributionConfig {
            radius: 0.0,
            items: 1,
            ..Default::default()
        };
        let g = gen_content_distribution(&cfg).unwrap();
        let start = g.default_start();
        for (set, action) in g.action_sets().iter().zip(start.actions()) {
            let ActionSet::Structured { feasible, .. } = set else { panic!() };
            assert!(feasible.is_empty() || feasible == &vec![0]);
            assert_eq!(action, feasible);
            assert_eq!(set.len(), 1);
        }
    }

    #[test]
    fn config_validation() {
        let bad = ContentDistributionConfig {
            radii: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(gen_content_distribution(&bad).is_err());
        let bad = VehicleTargetConfig {
            resources: Some(1),
            ..Default::default()
        };
        assert!(gen_vehicle_target(&bad).is_err());
        let json = serde_json::to_string(&ContentDistributionConfig::default()).unwrap();
        let back: ContentDistributionConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ContentDistributionConfig::default());
    }
}
