//! Decentralized Markov decision rules and policies.
//!
//! A decision rule maps every agent's local observation to one of its local
//! actions. Rules are ordered by their canonical index: a mixed-radix number
//! whose digits are the chosen actions, agent-major and observation-minor,
//! with agent 0 / observation 0 as the most significant digit. Every argmax in
//! the crate breaks ties toward the smallest canonical index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{MpsError, Result};
use crate::model::FactoredDecMdp;
use crate::occupancy::OccupancyDistribution;

/// Default cap on the number of rules an enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// One decision rule per agent: `actions[i][z]` is agent `i`'s action when it
/// observes `z`.
///
/// The derived ordering is lexicographic over the per-agent vectors, which is
/// exactly the canonical-index order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecisionRule {
    actions: Vec<Vec<usize>>,
}

impl DecisionRule {
    pub fn new(actions: Vec<Vec<usize>>) -> Self {
        DecisionRule { actions }
    }

    /// Every observation mapped to action 0.
    pub fn zeros(shape: &RuleSpace) -> Self {
        DecisionRule {
            actions: shape.observations.iter().map(|&n| vec![0; n]).collect(),
        }
    }

    #[inline]
    pub fn action(&self, agent: usize, observation: usize) -> usize {
        self.actions[agent][observation]
    }

    pub fn set(&mut self, agent: usize, observation: usize, action: usize) {
        self.actions[agent][observation] = action;
    }

    pub fn agent_actions(&self, agent: usize) -> &[usize] {
        &self.actions[agent]
    }

    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    /// Joint action prescribed in joint state `s`.
    #[inline]
    pub fn joint_action(&self, model: &FactoredDecMdp, s: usize) -> usize {
        let codec = model.state_codec();
        let acts = model.action_codec();
        let mut a = 0;
        for (i, local) in self.actions.iter().enumerate() {
            a += local[codec.digit(s, i)] * acts.stride(i);
        }
        a
    }

    /// Canonical linear index, or `None` if it does not fit in a `u128`.
    pub fn canonical_index(&self, shape: &RuleSpace) -> Option<u128> {
        let mut index: u128 = 0;
        for (i, local) in self.actions.iter().enumerate() {
            for &a in local {
                index = index
                    .checked_mul(shape.actions[i] as u128)?
                    .checked_add(a as u128)?;
            }
        }
        Some(index)
    }

    /// True if the rule is total and every action is in range.
    pub fn fits(&self, shape: &RuleSpace) -> bool {
        self.actions.len() == shape.observations.len()
            && self.actions.iter().enumerate().all(|(i, local)| {
                local.len() == shape.observations[i] && local.iter().all(|&a| a < shape.actions[i])
            })
    }
}

/// Observation and action counts that define the space of decision rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSpace {
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
}

/// Size of a rule space, saturating at `u64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleCount {
    pub count: u64,
    pub saturated: bool,
}

impl RuleSpace {
    pub fn new(observations: Vec<usize>, actions: Vec<usize>) -> Self {
        assert_eq!(observations.len(), actions.len());
        RuleSpace {
            observations,
            actions,
        }
    }

    pub fn of(model: &FactoredDecMdp) -> Self {
        RuleSpace::new(
            model.agents().iter().map(|a| a.num_observations()).collect(),
            model.agents().iter().map(|a| a.num_actions()).collect(),
        )
    }

    pub fn count(&self) -> RuleCount {
        let mut count: u64 = 1;
        let mut saturated = false;
        for (&nz, &na) in self.observations.iter().zip(&self.actions) {
            for _ in 0..nz {
                match count.checked_mul(na as u64) {
                    Some(c) => count = c,
                    None => {
                        count = u64::MAX;
                        saturated = true;
                    }
                }
            }
        }
        RuleCount { count, saturated }
    }

    /// All rules in increasing canonical order.
    pub fn iter(&self) -> RuleIter {
        RuleIter {
            actions: self.actions.clone(),
            next: if self.actions.contains(&0) {
                None
            } else {
                Some(DecisionRule::zeros(self))
            },
        }
    }
}

/// Odometer over decision rules; the last (agent, observation) slot moves
/// fastest.
#[derive(Debug, Clone)]
pub struct RuleIter {
    actions: Vec<usize>,
    next: Option<DecisionRule>,
}

impl Iterator for RuleIter {
    type Item = DecisionRule;

    fn next(&mut self) -> Option<DecisionRule> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut advanced = false;
        'outer: for i in (0..succ.actions.len()).rev() {
            for z in (0..succ.actions[i].len()).rev() {
                succ.actions[i][z] += 1;
                if succ.actions[i][z] < self.actions[i] {
                    advanced = true;
                    break 'outer;
                }
                succ.actions[i][z] = 0;
            }
        }
        if advanced {
            self.next = Some(succ);
        }
        Some(current)
    }
}

pub fn rule_count(model: &FactoredDecMdp) -> RuleCount {
    RuleSpace::of(model).count()
}

/// Streams every decision rule of the model in canonical order, refusing
/// spaces larger than `cap`.
pub fn enumerate_rules(model: &FactoredDecMdp, cap: u64) -> Result<RuleIter> {
    let space = RuleSpace::of(model);
    let count = space.count();
    if count.saturated || count.count > cap {
        return Err(MpsError::Capacity {
            what: "decision rule enumeration",
            needed: count.count,
            cap,
            hint: "use the constraint-optimization backup (--mode cop)",
        });
    }
    Ok(space.iter())
}

/// A horizon-length sequence of decision rules.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarkovPolicy {
    rules: Vec<DecisionRule>,
}

impl MarkovPolicy {
    pub fn new(rules: Vec<DecisionRule>) -> Self {
        MarkovPolicy { rules }
    }

    pub fn rules(&self) -> &[DecisionRule] {
        &self.rules
    }

    pub fn rule(&self, tau: usize) -> &DecisionRule {
        &self.rules[tau]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Checks length and rule shapes against the model.
    pub fn check(&self, model: &FactoredDecMdp) -> Result<()> {
        if self.rules.len() != model.horizon() {
            return Err(MpsError::Shape(format!(
                "policy has {} rules but the horizon is {}",
                self.rules.len(),
                model.horizon()
            )));
        }
        let space = RuleSpace::of(model);
        if let Some(tau) = self.rules.iter().position(|r| !r.fits(&space)) {
            return Err(MpsError::Shape(format!("rule at stage {tau} does not fit the model")));
        }
        Ok(())
    }
}

/// `v_τ(s)` for τ = 0..=T, with `v_T ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateValueTable {
    values: Vec<Vec<f64>>,
}

impl StateValueTable {
    pub fn zeros(horizon: usize, num_states: usize) -> Self {
        StateValueTable {
            values: vec![vec![0.0; num_states]; horizon + 1],
        }
    }

    pub fn stage(&self, tau: usize) -> &[f64] {
        &self.values[tau]
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// `Σ_s η(s) v_τ(s)`; the value of a policy is linear in the occupancy.
    pub fn value_at(&self, tau: usize, eta: &OccupancyDistribution) -> f64 {
        dot_support(eta, &self.values[tau])
    }
}

pub(crate) fn dot_support(eta: &OccupancyDistribution, v: &[f64]) -> f64 {
    eta.probs()
        .iter()
        .zip(v)
        .filter(|(p, _)| **p != 0.0)
        .map(|(p, x)| p * x)
        .sum()
}

pub fn value_at(table: &StateValueTable, tau: usize, eta: &OccupancyDistribution) -> f64 {
    table.value_at(tau, eta)
}

/// Exact backward induction of a Markov policy over joint states:
/// `v_τ(s) = r(s, σ_τ(s)) + Σ_{s'} p(s, σ_τ(s), s') v_{τ+1}(s')`.
pub fn evaluate_policy(model: &FactoredDecMdp, policy: &MarkovPolicy) -> Result<StateValueTable> {
    policy.check(model)?;
    let horizon = model.horizon();
    let ns = model.num_states();
    let mut table = StateValueTable::zeros(horizon, ns);
    for tau in (0..horizon).rev() {
        let rule = policy.rule(tau);
        let (head, tail) = table.values.split_at_mut(tau + 1);
        let next = &tail[0];
        let current = &mut head[tau];
        for (s, out) in current.iter_mut().enumerate() {
            let a = rule.joint_action(model, s);
            let mut future = 0.0;
            model.for_each_successor(s, a, |s2, p| future += p * next[s2]);
            *out = model.reward_unchecked(s, a) + future;
        }
    }
    Ok(table)
}

/// Uniformly random policy drawn from a ChaCha8 stream seeded with `seed`.
/// Slots are filled in (stage, agent, observation) order.
pub fn random_policy(model: &FactoredDecMdp, seed: u64) -> MarkovPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = RuleSpace::of(model);
    let rules = (0..model.horizon())
        .map(|_| {
            let mut rule = DecisionRule::zeros(&space);
            for (i, &nz) in space.observations.iter().enumerate() {
                for z in 0..nz {
                    rule.set(i, z, rng.gen_range(0..space.actions[i] as u32) as usize);
                }
            }
            rule
        })
        .collect();
    MarkovPolicy::new(rules)
}

/// Policy that always plays action 0.
pub fn zero_policy(model: &FactoredDecMdp) -> MarkovPolicy {
    let space = RuleSpace::of(model);
    MarkovPolicy::new(vec![DecisionRule::zeros(&space); model.horizon()])
}
