use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::instance::{Action, ActionSet, Allocation, GameInstance};

/// Identifier of the generator behind [`Schedule::Random`], recorded in traces.
pub const RNG_ALGORITHM: &str = "chacha8";

fn tie_tol(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}

/// An agent's best reply and what it would gain by switching to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub action: Action,
    pub utility: f64,
    pub current: f64,
}

impl Response {
    pub fn gain(&self) -> f64 {
        self.utility - self.current
    }
}

/// Best reply of agent `i` against `counts` (congestion including `i` itself).
/// Ties go to the current action, then to the lexicographically smallest one.
pub(crate) fn respond(g: &GameInstance, a: &Allocation, counts: &[usize], i: usize) -> Response {
    let mut others = counts.to_vec();
    let current_action = a.action(i);
    for &r in current_action {
        others[r] -= 1;
    }
    let current = g.payoff_against(current_action, &others);
    let mut best = Response {
        action: current_action.clone(),
        utility: current,
        current,
    };
    match &g.action_sets()[i] {
        ActionSet::Explicit(list) => {
            for action in list {
                let u = g.payoff_against(action, &others);
                if u > best.utility + tie_tol(best.utility) {
                    best.action = action.clone();
                    best.utility = u;
                }
            }
        }
        ActionSet::Structured { feasible, cap } => {
            // utility is additive over resources, so the best k-subset is the top-k scores
            let score = |r: usize| g.resources()[r].value * g.mechanism().get(others[r] + 1);
            let mut ranked: Vec<(f64, usize)> = feasible.iter().map(|&r| (score(r), r)).collect();
            ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            let mut top: Action = ranked.iter().take(*cap).map(|&(_, r)| r).collect();
            top.sort_unstable();
            let u = g.payoff_against(&top, &others);
            if u > best.utility + tie_tol(best.utility) {
                best.action = top;
                best.utility = u;
            }
        }
    }
    best
}

/// A utility-maximizing action for agent `i` given everybody else's choice in `a`.
pub fn best_response(g: &GameInstance, a: &Allocation, i: usize) -> Result<Action> {
    g.check(a)?;
    if i >= g.agents() {
        return Err(Error::InvalidParameter(format!("no agent {i}")));
    }
    let counts = a.counts(g.resources().len());
    Ok(respond(g, a, &counts, i).action)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Agents `0, 1, ..., n'-1` in turn; a round is one full pass.
    RoundRobin,
    /// Agents drawn uniformly at random; a round is `n'` draws.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsOptions {
    pub schedule: Schedule,
    /// Minimum utility gain for a move to be accepted; defaults to
    /// [`GameInstance::default_epsilon`].
    pub epsilon: Option<f64>,
    pub max_rounds: usize,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            schedule: Schedule::RoundRobin,
            epsilon: None,
            max_rounds: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Move {
    /// 1-based position among accepted moves.
    pub step: usize,
    pub agent: usize,
    pub old: Action,
    pub new: Action,
    pub gain: f64,
    /// Potential after the move.
    pub potential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsTrace {
    pub schedule: Schedule,
    pub rng: Option<&'static str>,
    pub epsilon: f64,
    pub start: Allocation,
    pub initial_potential: f64,
    pub moves: Vec<Move>,
    /// Rounds started, including the final one in which nobody moved.
    pub rounds: usize,
    /// Best-response evaluations, accepted or not.
    pub queries: usize,
    pub converged: bool,
}

impl DynamicsTrace {
    pub fn accepted(&self) -> usize {
        self.moves.len()
    }

    /// `step,agent,gain,potential`, one line per accepted move.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,agent,gain,potential")?;
        for m in &self.moves {
            writeln!(out, "{},{},{},{}", m.step, m.agent, m.gain, m.potential)?;
        }
        Ok(())
    }
}

/// Repeated best responses until nobody can gain more than `epsilon`.
///
/// Running out of rounds is not an error: the trace comes back with
/// `converged = false`.
pub fn run_best_response_dynamics(
    g: &GameInstance,
    start: &Allocation,
    options: &DynamicsOptions,
) -> Result<(Allocation, DynamicsTrace)> {
    g.check(start)?;
    let epsilon = options.epsilon.unwrap_or_else(|| g.default_epsilon());
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let agents = g.agents();
    let m = g.resources().len();
    let mut a = start.clone();
    let mut counts = a.counts(m);
    let initial_potential = g.potential_with(&counts);
    let mut moves = Vec::new();
    let mut queries = 0;

    // returns whether agent i moved
    let mut query = |i: usize, a: &mut Allocation, counts: &mut Vec<usize>| -> bool {
        queries += 1;
        let reply = respond(g, a, counts, i);
        let gain = reply.gain();
        if gain <= epsilon {
            return false;
        }
        for &r in a.action(i) {
            counts[r] -= 1;
        }
        for &r in &reply.action {
            counts[r] += 1;
        }
        let old = a.action(i).clone();
        a.set(i, reply.action.clone());
        moves.push(Move {
            step: moves.len() + 1,
            agent: i,
            old,
            new: reply.action,
            gain,
            potential: g.potential_with(counts),
        });
        true
    };

    let mut converged = false;
    let rounds = match options.schedule {
        Schedule::RoundRobin => {
            let mut rounds = 0;
            while rounds < options.max_rounds {
                rounds += 1;
                let mut moved = false;
                for i in 0..agents {
                    moved |= query(i, &mut a, &mut counts);
                }
                if !moved {
                    converged = true;
                    break;
                }
            }
            rounds
        }
        Schedule::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // agents known to be at a best reply since the last accepted move
            let mut settled = vec![false; agents];
            let mut settled_count = 0;
            let limit = options.max_rounds.saturating_mul(agents);
            let mut draws = 0;
            while draws < limit {
                if settled_count == agents {
                    converged = true;
                    break;
                }
                let i = rng.gen_range(0..agents);
                draws += 1;
                if query(i, &mut a, &mut counts) {
                    settled.fill(false);
                    settled[i] = true;
                    settled_count = 1;
                } else if !settled[i] {
                    settled[i] = true;
                    settled_count += 1;
                }
            }
            converged |= settled_count == agents;
            draws.div_ceil(agents)
        }
    };

    let trace = DynamicsTrace {
        schedule: options.schedule,
        rng: matches!(options.schedule, Schedule::Random { .. }).then_some(RNG_ALGORITHM),
        epsilon,
        start: start.clone(),
        initial_potential,
        moves,
        rounds,
        queries,
        converged,
    };
    Ok((a, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub agent: usize,
    pub action: Action,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashCheck {
    pub is_nash: bool,
    /// The most profitable deviation, when one beats `epsilon`.
    pub deviation: Option<Deviation>,
}

/// Whether no agent can gain more than `epsilon` (default
/// [`GameInstance::default_epsilon`]) by deviating alone.
pub fn is_nash(g: &GameInstance, a: &Allocation, epsilon: Option<f64>) -> Result<NashCheck> {
    g.check(a)?;
    let epsilon = epsilon.unwrap_or_else(|| g.default_epsilon());
    let counts = a.counts(g.resources().len());
    let mut deviation: Option<Deviation> = None;
    for i in 0..g.agents() {
        let reply = respond(g, a, &counts, i);
        let gain = reply.gain();
        if gain > epsilon && deviation.as_ref().is_none_or(|d| gain > d.gain) {
            deviation = Some(Deviation {
                agent: i,
                action: reply.action,
                gain,
            });
        }
    }
    Ok(NashCheck {
        is_nash: deviation.is_none(),
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::instance::Resource;
    use crate::mechanisms::{shapley_value, Mechanism, WelfareBasis};

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

    /// A_1 = {{r1},{r2}}, A_2 = {{r1},{r3}}, v = (1, 1/2, 1/2), covering with f_SV.
    fn worst_case() -> GameInstance {
        let w = WelfareBasis::covering(2).unwrap();
        let f = shapley_value(&w);
        let actions = vec![
            ActionSet::explicit(vec![vec![0], vec![1]]),
            ActionSet::explicit(vec![vec![0], vec![2]]),
        ];
        GameInstance::new(2, resources(&[1.0, 0.5, 0.5]), actions, w, f).unwrap()
    }

    #[test]
    fn best_response_examples() {
        let w = WelfareBasis::covering(1).unwrap();
        let f = shapley_value(&w);
        let g = GameInstance::new(
            1,
            resources(&[3.0, 1.0]),
            vec![ActionSet::explicit(vec![vec![0], vec![1]])],
            w,
            f,
        )
        .unwrap();
        let a = Allocation::new(vec![vec![1]]);
        assert_eq!(best_response(&g, &a, 0).unwrap(), vec![0]);

        let w = WelfareBasis::covering(1).unwrap();
        let f = shapley_value(&w);
        let g = GameInstance::new(
            1,
            resources(&[1.0, 0.8, 0.5]),
            vec![ActionSet::structured(vec![0, 1, 2], 2)],
            w,
            f,
        )
        .unwrap();
        let a = Allocation::new(vec![vec![1, 2]]);
        assert_eq!(best_response(&g, &a, 0).unwrap(), vec![0, 1]);

        let w = WelfareBasis::covering(2).unwrap();
        let f = Mechanism::new(vec![1.0, 0.5], "").unwrap();
        let g = GameInstance::new(
            2,
            resources(&[1.0, 0.6]),
            vec![
                ActionSet::explicit(vec![vec![0]]),
                ActionSet::explicit(vec![vec![0], vec![1]]),
            ],
            w,
            f,
        )
        .unwrap();
        let a = Allocation::new(vec![vec![0], vec![0]]);
        assert_eq!(best_response(&g, &a, 1).unwrap(), vec![1]);
    }

    #[test]
    fn ties_keep_current_action() {
        let g = worst_case();
        let a = Allocation::new(vec![vec![0], vec![0]]);
        // both deviations are exact ties (1/2 against 1/2)
        assert_eq!(best_response(&g, &a, 0).unwrap(), vec![0]);
        assert_eq!(best_response(&g, &a, 1).unwrap(), vec![0]);
    }

    #[test]
    fn worst_case_dynamics_and_nash() {
        let g = worst_case();
        let start = Allocation::new(vec![vec![0], vec![0]]);
        let (end, trace) =
            run_best_response_dynamics(&g, &start, &DynamicsOptions::default()).unwrap();
        assert_eq!(end, start);
        assert_eq!(trace.accepted(), 0);
        assert_eq!(trace.rounds, 1);
        assert!(trace.converged);

        assert!(is_nash(&g, &start, None).unwrap().is_nash);
        assert!(is_nash(&g, &Allocation::new(vec![vec![1], vec![0]]), None).unwrap().is_nash);
        let check = is_nash(&g, &Allocation::new(vec![vec![1], vec![2]]), None).unwrap();
        assert!(!check.is_nash);
        let dev = check.deviation.unwrap();
        assert_eq!(dev.action, vec![0]);
        assert!((dev.gain - 0.5).abs() < 1e-12);
    }

    #[test]
    fn moves_raise_potential_and_end_at_nash() {
        let g = worst_case();
        let start = Allocation::new(vec![vec![1], vec![2]]);
        for schedule in [Schedule::RoundRobin, Schedule::Random { seed: 3 }] {
            let options = DynamicsOptions {
                schedule,
                ..DynamicsOptions::default()
            };
            let (end, trace) = run_best_response_dynamics(&g, &start, &options).unwrap();
            assert!(trace.converged);
            assert_eq!(trace.accepted(), 1);
            let mut last = trace.initial_potential;
            for m in &trace.moves {
                assert!(m.potential > last && m.gain > trace.epsilon);
                assert!((m.potential - last - m.gain).abs() < 1e-12);
                last = m.potential;
            }
            assert!(is_nash(&g, &end, Some(trace.epsilon)).unwrap().is_nash);
        }
    }

    #[test]
    fn random_schedule_replays() {
        let g = worst_case();
        let start = Allocation::new(vec![vec![1], vec![2]]);
        let options = DynamicsOptions {
            schedule: Schedule::Random { seed: 99 },
            ..DynamicsOptions::default()
        };
        let a = run_best_response_dynamics(&g, &start, &options).unwrap();
        let b = run_best_response_dynamics(&g, &start, &options).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.rng, Some(RNG_ALGORITHM));
    }

    #[test]
    fn round_limit_reports_non_convergence() {
        let g = worst_case();
        let start = Allocation::new(vec![vec![1], vec![2]]);
        let options = DynamicsOptions {
            max_rounds: 0,
            ..DynamicsOptions::default()
        };
        let (_, trace) = run_best_response_dynamics(&g, &start, &options).unwrap();
        assert!(!trace.converged);
        let bad = DynamicsOptions {
            epsilon: Some(0.0),
            ..DynamicsOptions::default()
        };
        assert!(run_best_response_dynamics(&g, &start, &bad).is_err());
    }

    #[test]
    fn trace_csv() {
        let g = worst_case();
        let start = Allocation::new(vec![vec![1], vec![2]]);
        let (_, trace) =
            run_best_response_dynamics(&g, &start, &DynamicsOptions::default()).unwrap();
        let mut out = Vec::new();
        trace.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "step,agent,gain,potential\n1,0,0.5,1.5\n");
    }
}
