use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::choice::MechanismChoice;
use crate::error::{Error, Result};
use crate::mechanisms::{BasisFamily, Mechanism, WelfareBasis};

/// A set of resources, as strictly increasing resource indices.
pub type Action = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: String,
    pub value: f64,
}

/// The actions available to one agent.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    Explicit(Vec<Action>),
    /// Every subset of `feasible` with exactly `min(cap, |feasible|)` elements.
    Structured { feasible: Vec<usize>, cap: usize },
}

fn normalize(mut action: Action) -> Action {
    action.sort_unstable();
    action.dedup();
    action
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc = 1u128;
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

impl ActionSet {
    pub fn explicit(actions: Vec<Action>) -> Self {
        let mut actions: Vec<Action> = actions.into_iter().map(normalize).collect();
        actions.sort();
        actions.dedup();
        ActionSet::Explicit(actions)
    }

    pub fn structured(feasible: Vec<usize>, cap: usize) -> Self {
        ActionSet::Structured {
            feasible: normalize(feasible),
            cap,
        }
    }

    /// Size of every structured action.
    fn pick(feasible: &[usize], cap: usize) -> usize {
        cap.min(feasible.len())
    }

    pub fn len(&self) -> u128 {
        match self {
            ActionSet::Explicit(actions) => actions.len() as u128,
            ActionSet::Structured { feasible, cap } => {
                binomial(feasible.len(), Self::pick(feasible, *cap))
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The lexicographically first action.
    pub fn first(&self) -> Action {
        match self {
            ActionSet::Explicit(actions) => actions[0].clone(),
            ActionSet::Structured { feasible, cap } => {
                feasible[..Self::pick(feasible, *cap)].to_vec()
            }
        }
    }

    pub fn contains(&self, action: &[usize]) -> bool {
        match self {
            ActionSet::Explicit(actions) => actions.iter().any(|a| a == action),
            ActionSet::Structured { feasible, cap } => {
                action.len() == Self::pick(feasible, *cap)
                    && action.windows(2).all(|p| p[0] < p[1])
                    && action.iter().all(|r| feasible.binary_search(r).is_ok())
            }
        }
    }

    /// All actions in lexicographic order.
    pub fn enumerate(&self) -> Vec<Action> {
        match self {
            ActionSet::Explicit(actions) => actions.clone(),
            ActionSet::Structured { feasible, cap } => {
                let k = Self::pick(feasible, *cap);
                let mut out = Vec::new();
                let mut idx: Vec<usize> = (0..k).collect();
                loop {
                    out.push(idx.iter().map(|&i| feasible[i]).collect());
                    // advance the rightmost index that still has room
                    let Some(pos) = (0..k).rev().find(|&p| idx[p] < feasible.len() - k + p) else {
                        break;
                    };
                    idx[pos] += 1;
                    for q in pos + 1..k {
                        idx[q] = idx[q - 1] + 1;
                    }
                }
                out
            }
        }
    }

    /// Rank of the matroid whose bases are these actions.
    pub fn rank(&self) -> usize {
        match self {
            ActionSet::Explicit(actions) => actions.iter().map(Vec::len).max().unwrap_or(0),
            ActionSet::Structured { feasible, cap } => Self::pick(feasible, *cap),
        }
    }
}

/// One action per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation(Vec<Action>);

impl Allocation {
    pub fn new(actions: Vec<Action>) -> Self {
        Self(actions.into_iter().map(normalize).collect())
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }

    pub fn action(&self, agent: usize) -> &Action {
        &self.0[agent]
    }

    pub(crate) fn set(&mut self, agent: usize, action: Action) {
        self.0[agent] = action;
    }

    /// `|a|_r` for every resource.
    pub fn counts(&self, resources: usize) -> Vec<usize> {
        let mut counts = vec![0; resources];
        for action in &self.0 {
            for &r in action {
                counts[r] += 1;
            }
        }
        counts
    }
}

/// A resource-allocation game: agents pick resources, welfare is
/// `sum_r v_r w(|a|_r)` and agent `i` earns `sum_{r in a_i} v_r f(|a|_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    n: usize,
    resources: Vec<Resource>,
    actions: Vec<ActionSet>,
    basis: WelfareBasis,
    mechanism: Mechanism,
}

impl GameInstance {
    /// `basis` and `mechanism` must be defined on `[n]`, with at most `n` agents.
    pub fn new(
        n: usize,
        resources: Vec<Resource>,
        actions: Vec<ActionSet>,
        basis: WelfareBasis,
        mechanism: Mechanism,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidInstance(msg));
        let actions: Vec<ActionSet> = actions
            .into_iter()
            .map(|set| match set {
                ActionSet::Explicit(list) => ActionSet::explicit(list),
                ActionSet::Structured { feasible, cap } => ActionSet::structured(feasible, cap),
            })
            .collect();
        if basis.n() != n || mechanism.n() != n {
            return invalid(format!(
                "basis on [{}] and mechanism on [{}] do not match n = {n}",
                basis.n(),
                mechanism.n()
            ));
        }
        if actions.is_empty() {
            return invalid("no agents".into());
        }
        if actions.len() > n {
            return invalid(format!("{} agents exceed n = {n}", actions.len()));
        }
        let mut seen = HashMap::new();
        for (k, r) in resources.iter().enumerate() {
            if !(r.value.is_finite() && r.value >= 0.0) {
                return invalid(format!("resource `{}` has value {}", r.id, r.value));
            }
            if seen.insert(r.id.as_str(), k).is_some() {
                return invalid(format!("duplicate resource id `{}`", r.id));
            }
        }
        let m = resources.len();
        for (i, set) in actions.iter().enumerate() {
            let refs: Box<dyn Iterator<Item = &usize>> = match set {
                ActionSet::Explicit(list) => {
                    if list.is_empty() {
                        return invalid(format!("agent {i} has no actions"));
                    }
                    Box::new(list.iter().flatten())
                }
                ActionSet::Structured { feasible, .. } => Box::new(feasible.iter()),
            };
            if let Some(r) = refs.into_iter().find(|&&r| r >= m) {
                return invalid(format!("agent {i} references resource index {r} of {m}"));
            }
        }
        Ok(Self {
            n,
            resources,
            actions,
            basis,
            mechanism,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn agents(&self) -> usize {
        self.actions.len()
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn action_sets(&self) -> &[ActionSet] {
        &self.actions
    }

    pub fn basis(&self) -> &WelfareBasis {
        &self.basis
    }

    pub fn mechanism(&self) -> &Mechanism {
        &self.mechanism
    }

    pub fn max_value(&self) -> f64 {
        self.resources.iter().map(|r| r.value).fold(0.0, f64::max)
    }

    /// Default tolerance for accepting a deviation: `1e-9 * max_r v_r`.
    pub fn default_epsilon(&self) -> f64 {
        let top = self.max_value();
        if top > 0.0 {
            1e-9 * top
        } else {
            1e-12
        }
    }

    /// Each agent's lexicographically first action.
    pub fn default_start(&self) -> Allocation {
        Allocation(self.actions.iter().map(ActionSet::first).collect())
    }

    pub fn resource_ids(&self, action: &[usize]) -> Vec<&str> {
        action.iter().map(|&r| self.resources[r].id.as_str()).collect()
    }

    pub fn check(&self, a: &Allocation) -> Result<()> {
        if a.0.len() != self.agents() {
            return Err(Error::InvalidInstance(format!(
                "allocation has {} actions for {} agents",
                a.0.len(),
                self.agents()
            )));
        }
        for (i, (action, set)) in a.0.iter().zip(&self.actions).enumerate() {
            if !set.contains(action) {
                return Err(Error::InfeasibleAllocation {
                    agent: i,
                    reason: format!("action {action:?} is not in the agent's action set"),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn welfare_with(&self, counts: &[usize]) -> f64 {
        counts
            .iter()
            .zip(&self.resources)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, r)| r.value * self.basis.get(c))
            .sum()
    }

    /// `sum_{r in action} v_r f(others_r + 1)`: the payoff of `action` when
    /// `others` counts everybody else.
    pub(crate) fn payoff_against(&self, action: &[usize], others: &[usize]) -> f64 {
        action
            .iter()
            .map(|&r| self.resources[r].value * self.mechanism.get(others[r] + 1))
            .sum()
    }

    pub(crate) fn potential_with(&self, counts: &[usize]) -> f64 {
        counts
            .iter()
            .zip(&self.resources)
            .map(|(&c, r)| r.value * (1..=c).map(|k| self.mechanism.get(k)).sum::<f64>())
            .sum()
    }

    /// `W(a) = sum_r v_r w(|a|_r)`.
    pub fn welfare(&self, a: &Allocation) -> Result<f64> {
        self.check(a)?;
        Ok(self.welfare_with(&a.counts(self.resources.len())))
    }

    /// `u_i(a) = sum_{r in a_i} v_r f(|a|_r)`.
    pub fn utility(&self, a: &Allocation, agent: usize) -> Result<f64> {
        self.check(a)?;
        if agent >= self.agents() {
            return Err(Error::InvalidParameter(format!("no agent {agent}")));
        }
        let mut others = a.counts(self.resources.len());
        for &r in a.action(agent) {
            others[r] -= 1;
        }
        Ok(self.payoff_against(a.action(agent), &others))
    }

    /// Rosenthal potential `sum_r v_r sum_{k <= |a|_r} f(k)`.
    pub fn potential(&self, a: &Allocation) -> Result<f64> {
        self.check(a)?;
        Ok(self.potential_with(&a.counts(self.resources.len())))
    }

    /// Upper bound `agents^2 * m * max rank` on the number of improving moves when
    /// every action set is the basis family of a matroid.
    pub fn best_response_bound(&self) -> u128 {
        let agents = self.agents() as u128;
        let rank = self.actions.iter().map(ActionSet::rank).max().unwrap_or(0) as u128;
        agents * agents * self.resources.len() as u128 * rank
    }

    /// `prod_i |A_i|`, saturating.
    pub fn allocation_count(&self) -> u128 {
        self.actions
            .iter()
            .fold(1u128, |acc, set| acc.saturating_mul(set.len()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ActionRecord {
    Explicit(Vec<Vec<String>>),
    Structured { feasible: Vec<String>, cap: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FunctionRecord {
    Label(String),
    Values(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    n: usize,
    resources: Vec<Resource>,
    actions: Vec<ActionRecord>,
    basis: FunctionRecord,
    mechanism: FunctionRecord,
}

fn basis_from(record: FunctionRecord, n: usize) -> Result<WelfareBasis> {
    match record {
        FunctionRecord::Label(label) => BasisFamily::parse(&label)?.build(n),
        FunctionRecord::Values(values) => WelfareBasis::new(values, ""),
    }
}

fn mechanism_from(record: FunctionRecord, w: &WelfareBasis) -> Result<Mechanism> {
    match record {
        FunctionRecord::Label(label) => label.parse::<MechanismChoice>()?.resolve(w),
        FunctionRecord::Values(values) => Mechanism::new(values, ""),
    }
}

impl GameInstance {
    pub fn from_json(text: &str) -> Result<Self> {
        let record: InstanceRecord = serde_json::from_str(text)?;
        let index: HashMap<&str, usize> = record
            .resources
            .iter()
            .enumerate()
            .map(|(k, r)| (r.id.as_str(), k))
            .collect();
        let lookup = |id: &String| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidInstance(format!("unknown resource id `{id}`")))
        };
        let actions = record
            .actions
            .iter()
            .map(|a| match a {
                ActionRecord::Explicit(list) => Ok(ActionSet::explicit(
                    list.iter()
                        .map(|action| action.iter().map(lookup).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?,
                )),
                ActionRecord::Structured { feasible, cap } => Ok(ActionSet::structured(
                    feasible.iter().map(lookup).collect::<Result<Vec<_>>>()?,
                    *cap,
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        let basis = basis_from(record.basis, record.n)?;
        let mechanism = mechanism_from(record.mechanism, &basis)?;
        GameInstance::new(record.n, record.resources, actions, basis, mechanism)
    }

    /// Bases and mechanisms are written by label when the label rebuilds the same
    /// values, and as value lists otherwise.
    pub fn to_json(&self) -> Result<String> {
        let ids = |action: &[usize]| -> Vec<String> {
            self.resource_ids(action).into_iter().map(String::from).collect()
        };
        let actions = self
            .actions
            .iter()
            .map(|set| match set {
                ActionSet::Explicit(list) => {
                    ActionRecord::Explicit(list.iter().map(|a| ids(a)).collect())
                }
                ActionSet::Structured { feasible, cap } => ActionRecord::Structured {
                    feasible: ids(feasible),
                    cap: *cap,
                },
            })
            .collect();
        let basis = match BasisFamily::parse(self.basis.label()).and_then(|b| b.build(self.n)) {
            Ok(rebuilt) if rebuilt.values() == self.basis.values() => {
                FunctionRecord::Label(self.basis.label().to_string())
            }
            _ => FunctionRecord::Values(self.basis.values().to_vec()),
        };
        let rebuilt = self
            .mechanism
            .label()
            .parse::<MechanismChoice>()
            .and_then(|c| c.resolve(&self.basis));
        let mechanism = match rebuilt {
            Ok(f) if f.values() == self.mechanism.values() => {
                FunctionRecord::Label(self.mechanism.label().to_string())
            }
            _ => FunctionRecord::Values(self.mechanism.values().to_vec()),
        };
        let record = InstanceRecord {
            n: self.n,
            resources: self.resources.clone(),
            actions,
            basis,
            mechanism,
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }
}
