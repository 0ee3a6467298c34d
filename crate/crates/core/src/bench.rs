//! Built-in benchmark generators.
//!
//! - recycling robots: two battery-powered robots that search, wait or
//!   recharge, with a joint term coupling simultaneous searching;
//! - random teams: n recycling robots tied together by random interaction
//!   events, drawn in four density classes;
//! - meeting in a grid: two agents on a `side × side` grid rewarded whenever
//!   they end a step in the same cell;
//! - small random instances and a flip/stay toy used by the tests.
//!
//! The exact dynamics of the published benchmark files are not reproduced
//! here; every number that shapes a generator is a parameter.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{numbered_ids, FactoredDecMdp, LocalAgentModel};
use crate::policy::RuleSpace;

/// A joint `(s, a)` pair whose reward receives a random bonus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionEvent {
    pub state: usize,
    pub action: usize,
    pub value: f64,
}

/// Parameters of the recycling-robot family.
#[derive(Debug, Clone, PartialEq)]
pub struct RecyclingParams {
    /// Probability that searching from `high` keeps the battery high.
    pub alpha: f64,
    /// Probability that searching from `low` keeps the battery low; otherwise
    /// the robot runs flat and is rescued back to `high`.
    pub beta: f64,
    pub search_reward: f64,
    pub wait_reward: f64,
    pub rescue_penalty: f64,
    /// Added when every robot searches in the same step.
    pub joint_search: f64,
    pub horizon: usize,
}

impl Default for RecyclingParams {
    fn default() -> Self {
        RecyclingParams {
            alpha: 0.8,
            beta: 0.6,
            search_reward: 2.0,
            wait_reward: 1.0,
            rescue_penalty: -3.0,
            joint_search: -1.0,
            horizon: 10,
        }
    }
}

const HIGH: usize = 0;
const LOW: usize = 1;
const SEARCH: usize = 0;
const WAIT: usize = 1;
const RECHARGE: usize = 2;

fn recycling_agent(p: &RecyclingParams) -> LocalAgentModel {
    let (alpha, beta) = (p.alpha, p.beta);
    LocalAgentModel::from_fn(
        vec!["high".into(), "low".into()],
        vec!["search".into(), "wait".into(), "recharge".into()],
        move |z, a, z2| match (z, a) {
            (HIGH, SEARCH) => if z2 == HIGH { alpha } else { 1.0 - alpha },
            (LOW, SEARCH) => if z2 == LOW { beta } else { 1.0 - beta },
            (_, WAIT) => (z2 == z) as u8 as f64,
            (_, _) => (z2 == HIGH) as u8 as f64,
        },
    )
}

fn recycling_local_reward(p: &RecyclingParams, z: usize, a: usize) -> f64 {
    match (z, a) {
        (HIGH, SEARCH) => p.search_reward,
        (LOW, SEARCH) => p.beta * p.search_reward + (1.0 - p.beta) * p.rescue_penalty,
        (_, WAIT) => p.wait_reward,
        (_, RECHARGE) => 0.0,
        _ => unreachable!(),
    }
}

/// Builds `n` recycling robots with reward `Σ_i local + joint_search·[all search]`,
/// starting with every battery high.
fn recycling_team(p: &RecyclingParams, n: usize) -> FactoredDecMdp {
    let agents: Vec<_> = (0..n).map(|_| recycling_agent(p)).collect();
    let states = crate::model::MixedRadix::new(vec![2; n]);
    let actions = crate::model::MixedRadix::new(vec![3; n]);
    let mut reward = Vec::new();
    for s in 0..states.size() {
        let zs = states.decode(s);
        for a in 0..actions.size() {
            let acts = actions.decode(a);
            let mut r: f64 = zs.iter().zip(&acts).map(|(&z, &x)| recycling_local_reward(p, z, x)).sum();
            if acts.iter().all(|&x| x == SEARCH) {
                r += p.joint_search;
            }
            reward.push(((s, a), r));
        }
    }
    let mut initial = vec![0.0; states.size()];
    initial[0] = 1.0;
    FactoredDecMdp::new(agents, reward, p.horizon, initial).expect("consistent shapes")
}

/// Two recycling robots: |S| = 4, |A| = 9.
pub fn gen_recycling(params: &RecyclingParams) -> FactoredDecMdp {
    recycling_team(params, 2)
}

/// Inclusive-exclusive band `[k·e_max/4, (k+1)·e_max/4)` of event counts for
/// class `k`, clamped to be non-empty.
pub fn event_band(e_max: usize, klass: usize) -> (usize, usize) {
    let lo = (klass * e_max).div_ceil(4);
    let hi = ((klass + 1) * e_max).div_ceil(4).max(lo + 1).min(e_max.max(lo + 1));
    (lo, hi)
}

/// Interaction events of a random team: `e` distinct `(s, a)` pairs with
/// `e` uniform in the class band and rewards uniform in `[0, 1)`.
pub fn random_team_events(n_agents: usize, klass: usize, seed: u64) -> Vec<InteractionEvent> {
    assert!(n_agents >= 2, "a team needs at least two agents");
    assert!(klass <= 3, "interaction class must be 0..=3");
    let num_states = 2usize.pow(n_agents as u32);
    let num_actions = 3usize.pow(n_agents as u32);
    let e_max = num_states * num_actions;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = event_band(e_max, klass);
    let e = rng.gen_range(lo as u64..hi as u64) as usize;
    let mut picks: Vec<usize> = sample(&mut rng, e_max, e.min(e_max)).into_vec();
    picks.sort_unstable();
    picks
        .into_iter()
        .map(|k| InteractionEvent {
            state: k / num_actions,
            action: k % num_actions,
            value: rng.gen::<f64>(),
        })
        .collect()
}

/// `n` recycling robots whose independent rewards are augmented by the
/// interaction events of class `klass`.
pub fn gen_random_team(n_agents: usize, klass: usize, seed: u64, base: &RecyclingParams) -> FactoredDecMdp {
    let team = recycling_team(base, n_agents);
    let events = random_team_events(n_agents, klass, seed);
    let mut reward: std::collections::BTreeMap<(usize, usize), f64> =
        team.reward_entries().map(|(s, a, v)| ((s, a), v)).collect();
    for ev in events {
        *reward.entry((ev.state, ev.action)).or_insert(0.0) += ev.value;
    }
    FactoredDecMdp::new(team.agents().to_vec(), reward, team.horizon(), team.initial().to_vec())
        .expect("consistent shapes")
}

/// Parameters of the meeting-in-a-grid family.
#[derive(Debug, Clone, PartialEq)]
pub struct MeetingGridParams {
    pub side: usize,
    /// Probability that a move fails and the agent stays put.
    pub slip: f64,
    /// Start cells `(row, col)` of the two agents.
    pub starts: [(usize, usize); 2],
    pub horizon: usize,
}

impl MeetingGridParams {
    /// Agents start in opposite corners.
    pub fn new(side: usize, slip: f64, horizon: usize) -> Self {
        MeetingGridParams {
            side,
            slip,
            starts: [(0, 0), (side - 1, side - 1)],
            horizon,
        }
    }
}

pub const GRID_ACTIONS: [&str; 5] = ["north", "south", "west", "east", "stay"];

fn grid_target(side: usize, cell: usize, action: usize) -> usize {
    let (r, c) = (cell / side, cell % side);
    match action {
        0 if r > 0 => cell - side,
        1 if r + 1 < side => cell + side,
        2 if c > 0 => cell - 1,
        3 if c + 1 < side => cell + 1,
        _ => cell,
    }
}

fn grid_agent(side: usize, slip: f64) -> LocalAgentModel {
    let obs = (0..side * side)
        .map(|k| format!("r{}c{}", k / side, k % side))
        .collect();
    LocalAgentModel::from_fn(obs, GRID_ACTIONS.iter().map(|s| s.to_string()).collect(), |z, a, z2| {
        let target = grid_target(side, z, a);
        if target == z {
            (z2 == z) as u8 as f64
        } else if z2 == target {
            1.0 - slip
        } else if z2 == z {
            slip
        } else {
            0.0
        }
    })
}

/// Two agents on a `side × side` grid. Moves succeed with probability
/// `1 − slip`, otherwise the agent stays; moves into a wall stay. The reward
/// of `(s, a)` is the probability that both agents share a cell after the
/// transition.
pub fn gen_meeting_grid(params: &MeetingGridParams) -> FactoredDecMdp {
    let side = params.side;
    assert!(side >= 2, "grid side must be at least 2");
    assert!((0.0..1.0).contains(&params.slip), "slip must lie in [0, 1)");
    let agent = grid_agent(side, params.slip);
    let cells = side * side;
    let mut reward = Vec::new();
    for z1 in 0..cells {
        for z2 in 0..cells {
            let s = z1 * cells + z2;
            for a1 in 0..5 {
                for a2 in 0..5 {
                    let mut meet = 0.0;
                    for &(c, p) in agent.successors(z1, a1) {
                        let q = agent.prob(z2, a2, c);
                        meet += p * q;
                    }
                    if meet > 0.0 {
                        reward.push(((s, a1 * 5 + a2), meet));
                    }
                }
            }
        }
    }
    let cell = |(r, c): (usize, usize)| r * side + c;
    let mut initial = vec![0.0; cells * cells];
    initial[cell(params.starts[0]) * cells + cell(params.starts[1])] = 1.0;
    FactoredDecMdp::new(vec![agent.clone(), agent], reward, params.horizon, initial)
        .expect("consistent shapes")
}

/// Two agents with observations {z0, z1} and actions {flip, stay}; reward 1
/// whenever both observations agree; start in (z0, z1).
pub fn gen_flip_stay(horizon: usize) -> FactoredDecMdp {
    let agent = LocalAgentModel::from_fn(
        numbered_ids("z", 2),
        vec!["flip".into(), "stay".into()],
        |z, a, z2| match a {
            0 => (z2 != z) as u8 as f64,
            _ => (z2 == z) as u8 as f64,
        },
    );
    let mut reward = Vec::new();
    for s in [0usize, 3] {
        for a in 0..4 {
            reward.push(((s, a), 1.0));
        }
    }
    FactoredDecMdp::new(vec![agent.clone(), agent], reward, horizon, vec![0.0, 1.0, 0.0, 0.0])
        .expect("consistent shapes")
}

/// Shape of a random small instance.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub space: RuleSpace,
    pub horizon: usize,
    /// Draw the initial occupancy as a product of local distributions.
    pub product_start: bool,
    /// Probability that a given `(s, a)` carries a nonzero reward.
    pub reward_density: f64,
}

fn random_distribution(rng: &mut impl Rng, n: usize, zero_prob: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<f64>() < zero_prob { 0.0 } else { rng.gen::<f64>() + 1e-3 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        let k = rng.gen_range(0..n as u32) as usize;
        w[k] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// A random transition-independent instance with sparse-ish rows and
/// rewards uniform in `[-1, 1)`.
pub fn gen_random_instance(rng: &mut impl Rng, shape: &RandomInstance) -> FactoredDecMdp {
    let space = &shape.space;
    let agents: Vec<LocalAgentModel> = space
        .observations
        .iter()
        .zip(&space.actions)
        .map(|(&nz, &na)| {
            let mut table = Vec::with_capacity(nz * na * nz);
            for _ in 0..nz * na {
                table.extend(random_distribution(rng, nz, 0.3));
            }
            LocalAgentModel::new(numbered_ids("z", nz), numbered_ids("a", na), table).expect("shape")
        })
        .collect();
    let ns: usize = space.observations.iter().product();
    let na: usize = space.actions.iter().product();
    let mut reward = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            if rng.gen::<f64>() < shape.reward_density {
                reward.push(((s, a), rng.gen_range(-1.0..1.0)));
            }
        }
    }
    let initial = if shape.product_start {
        let locals: Vec<Vec<f64>> = space
            .observations
            .iter()
            .map(|&nz| random_distribution(rng, nz, 0.3))
            .collect();
        let codec = crate::model::MixedRadix::new(space.observations.clone());
        (0..ns)
            .map(|s| (0..locals.len()).map(|i| locals[i][codec.digit(s, i)]).product())
            .collect()
    } else {
        random_distribution(rng, ns, 0.4)
    };
    FactoredDecMdp::new(agents, reward, shape.horizon, initial).expect("shape")
}
