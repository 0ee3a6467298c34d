//! Upper and lower bounds on the optimal value-to-go at visited occupancies.
//!
//! The upper bound starts from the value of the underlying centralized MDP
//! and is tightened at every visited occupancy by storing, per decision rule,
//! the backed-up value q̄. The lower bound is the value of the incumbent
//! policy (linear in the occupancy), raised at visited occupancies by the
//! best suffix policy found below them.

use std::collections::HashMap;

use crate::error::{MpsError, Result};
use crate::model::FactoredDecMdp;
use crate::occupancy::{OccupancyDistribution, OccupancyKey};
use crate::policy::{dot_support, evaluate_policy, DecisionRule, MarkovPolicy, StateValueTable};

/// Default cap on `Π_i |A^i|` for the centralized heuristic.
pub const DEFAULT_ACTION_CAP: u64 = 1_000_000;

/// Default cap on stored (occupancy, rule) entries.
pub const DEFAULT_STORE_CAP: usize = 10_000_000;

/// Value function of the underlying centralized MDP.
#[derive(Debug, Clone)]
pub struct MdpHeuristic {
    values: Vec<Vec<f64>>,
    greedy: Vec<Vec<usize>>,
}

impl MdpHeuristic {
    /// `v_mdp_τ(s)`, τ in 0..=T.
    pub fn values(&self, tau: usize) -> &[f64] {
        &self.values[tau]
    }

    /// Greedy joint action at `(τ, s)`, τ < T; ties go to the smallest index.
    pub fn greedy_action(&self, tau: usize, s: usize) -> usize {
        self.greedy[tau][s]
    }

    /// `Σ_s η(s) v_mdp_τ(s)`.
    pub fn bound(&self, eta: &OccupancyDistribution) -> f64 {
        dot_support(eta, &self.values[eta.stage()])
    }

    /// `r(s, a) + Σ_{s'} p(s, a, s') v_mdp_{τ+1}(s')`.
    pub fn q_value(&self, model: &FactoredDecMdp, tau: usize, s: usize, a: usize) -> f64 {
        let next = &self.values[tau + 1];
        let mut future = 0.0;
        model.for_each_successor(s, a, |s2, p| future += p * next[s2]);
        model.reward_unchecked(s, a) + future
    }
}

pub fn build_mdp_heuristic(model: &FactoredDecMdp, action_cap: u64) -> Result<MdpHeuristic> {
    let na = model.num_joint_actions();
    if na as u64 > action_cap {
        return Err(MpsError::Capacity {
            what: "joint action enumeration",
            needed: na as u64,
            cap: action_cap,
            hint: "the centralized heuristic enumerates joint actions",
        });
    }
    let horizon = model.horizon();
    let ns = model.num_states();
    let mut values = vec![vec![0.0; ns]; horizon + 1];
    let mut greedy = vec![vec![0; ns]; horizon];
    for tau in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut(tau + 1);
        let next = &tail[0];
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for a in 0..na {
                let mut q = model.reward_unchecked(s, a);
                model.for_each_successor(s, a, |s2, p| q += p * next[s2]);
                if q > best {
                    best = q;
                    arg = a;
                }
            }
            head[tau][s] = best;
            greedy[tau][s] = arg;
        }
    }
    Ok(MdpHeuristic { values, greedy })
}

/// Bounds attached to one visited occupancy.
#[derive(Debug, Clone, Default)]
pub struct RuleBag {
    q: HashMap<DecisionRule, f64>,
    bound: Option<f64>,
    lower: Option<(f64, Vec<DecisionRule>)>,
}

impl RuleBag {
    /// Stored q̄ values keyed by rule.
    pub fn values(&self) -> &HashMap<DecisionRule, f64> {
        &self.q
    }

    pub fn get(&self, rule: &DecisionRule) -> Option<f64> {
        self.q.get(rule).copied()
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Upper bound certified by the most recent backup at this occupancy.
    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    /// Best suffix policy found from this occupancy and its value.
    pub fn lower(&self) -> Option<(f64, &[DecisionRule])> {
        self.lower.as_ref().map(|(v, s)| (*v, s.as_slice()))
    }
}

/// Per-stage tables of visited occupancies with their bounds, plus the
/// incumbent policy and the centralized heuristic.
#[derive(Debug, Clone)]
pub struct BoundStore {
    mdp: MdpHeuristic,
    stages: Vec<HashMap<OccupancyKey, RuleBag>>,
    incumbent: MarkovPolicy,
    incumbent_values: StateValueTable,
    incumbent_root: f64,
    root: OccupancyDistribution,
    entries: usize,
    entry_cap: usize,
}

impl BoundStore {
    /// Evaluates `incumbent` exactly and starts with no visited occupancy.
    pub fn new(
        model: &FactoredDecMdp,
        mdp: MdpHeuristic,
        incumbent: MarkovPolicy,
        entry_cap: usize,
    ) -> Result<Self> {
        let incumbent_values = evaluate_policy(model, &incumbent)?;
        let root = OccupancyDistribution::initial(model);
        let incumbent_root = incumbent_values.value_at(0, &root);
        Ok(BoundStore {
            mdp,
            stages: vec![HashMap::new(); model.horizon() + 1],
            incumbent,
            incumbent_values,
            incumbent_root,
            root,
            entries: 0,
            entry_cap,
        })
    }

    pub fn mdp(&self) -> &MdpHeuristic {
        &self.mdp
    }

    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn bag(&self, eta: &OccupancyDistribution) -> Option<&RuleBag> {
        self.stages[eta.stage()].get(eta.key())
    }

    fn bag_mut(&mut self, eta: &OccupancyDistribution) -> &mut RuleBag {
        self.stages[eta.stage()].entry(eta.key().clone()).or_default()
    }

    /// Upper bound on the optimal value-to-go at `eta`: zero at the horizon,
    /// the latest backup value at a visited occupancy, and the centralized
    /// bound elsewhere.
    pub fn ub_value(&self, eta: &OccupancyDistribution) -> f64 {
        if eta.stage() >= self.horizon() {
            return 0.0;
        }
        match self.bag(eta).and_then(|b| b.bound) {
            Some(b) => b,
            None => self.mdp.bound(eta),
        }
    }

    /// Records the value of a backup at `eta` (the max over all rules of the
    /// current q̄). The stored bound never increases.
    pub fn record_bound(&mut self, eta: &OccupancyDistribution, value: f64) {
        let bag = self.bag_mut(eta);
        bag.bound = Some(bag.bound.map_or(value, |b| b.min(value)));
    }

    /// `q̄(η, σ) ← min(q̄(η, σ), new_q)`.
    pub fn ub_update(&mut self, eta: &OccupancyDistribution, rule: &DecisionRule, new_q: f64) -> Result<()> {
        let cap = self.entry_cap;
        let fresh = {
            let bag = self.bag_mut(eta);
            match bag.q.get_mut(rule) {
                Some(v) => {
                    *v = v.min(new_q);
                    false
                }
                None => {
                    bag.q.insert(rule.clone(), new_q);
                    true
                }
            }
        };
        if fresh {
            self.entries += 1;
            if self.entries > cap {
                return Err(MpsError::Capacity {
                    what: "bound store entries",
                    needed: self.entries as u64,
                    cap: cap as u64,
                    hint: "raise the store cap or loosen epsilon",
                });
            }
        }
        Ok(())
    }

    /// Lower bound at `eta`: the incumbent's value there, or the best suffix
    /// recorded at `eta` if that is higher.
    pub fn lb_value(&self, eta: &OccupancyDistribution) -> f64 {
        let tau = eta.stage();
        if tau >= self.horizon() {
            return 0.0;
        }
        let inc = self.incumbent_values.value_at(tau, eta);
        match self.bag(eta).and_then(|b| b.lower.as_ref()) {
            Some((v, _)) if *v > inc => *v,
            _ => inc,
        }
    }

    /// Rules `σ_τ..σ_{T−1}` that achieve [`lb_value`](Self::lb_value) at `eta`.
    pub fn lb_suffix(&self, eta: &OccupancyDistribution) -> Vec<DecisionRule> {
        let tau = eta.stage();
        if tau >= self.horizon() {
            return Vec::new();
        }
        let inc = self.incumbent_values.value_at(tau, eta);
        match self.bag(eta).and_then(|b| b.lower.as_ref()) {
            Some((v, suffix)) if *v > inc => suffix.clone(),
            _ => self.incumbent.rules()[tau..].to_vec(),
        }
    }

    /// Keeps `suffix` as the best known continuation from `eta` if `value`
    /// beats the one on record.
    pub fn record_lower(&mut self, eta: &OccupancyDistribution, value: f64, suffix: Vec<DecisionRule>) {
        let bag = self.bag_mut(eta);
        if bag.lower.as_ref().is_none_or(|(v, _)| value > *v) {
            bag.lower = Some((value, suffix));
        }
    }

    /// Evaluates `candidate` and makes it the incumbent iff it strictly
    /// improves the value at the initial occupancy.
    pub fn lb_update(&mut self, model: &FactoredDecMdp, candidate: &MarkovPolicy) -> Result<bool> {
        let values = evaluate_policy(model, candidate)?;
        let root = values.value_at(0, &self.root);
        if root > self.incumbent_root {
            self.incumbent = candidate.clone();
            self.incumbent_values = values;
            self.incumbent_root = root;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn incumbent(&self) -> &MarkovPolicy {
        &self.incumbent
    }

    pub fn incumbent_values(&self) -> &StateValueTable {
        &self.incumbent_values
    }

    /// Exact value of the incumbent at the initial occupancy.
    pub fn incumbent_value(&self) -> f64 {
        self.incumbent_root
    }

    /// Number of stored (occupancy, rule) entries.
    pub fn entries(&self) -> usize {
        self.entries
    }

    /// Number of visited occupancies across all stages.
    pub fn visited(&self) -> usize {
        self.stages.iter().map(|s| s.len()).sum()
    }

    /// Every stored `(stage, key, rule, q̄)`.
    pub fn stored(&self) -> impl Iterator<Item = (usize, &OccupancyKey, &DecisionRule, f64)> {
        self.stages.iter().enumerate().flat_map(|(tau, table)| {
            table
                .iter()
                .flat_map(move |(k, bag)| bag.q.iter().map(move |(r, &v)| (tau, k, r, v)))
        })
    }
}
