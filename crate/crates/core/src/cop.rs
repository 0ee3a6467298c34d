//! Greedy backups at an occupancy, posed as a weighted constraint
//! optimization problem.
//!
//! Variables are the `(agent, observation)` slots of a decision rule, each
//! ranging over the agent's actions. Every joint state `s` carrying mass adds
//! a soft constraint over the n variables it names, valued
//! `η(s) · c(s, a)` with `c(s, a) = r(s, a) + Σ_{s'} p(s, a, s') v_mdp(s')`.
//! Every rule already stored at the occupancy adds a full-scope correction
//! `g(σ) = q̄(η, σ) − q̄_mdp(η, σ) ≤ 0`, so that the optimum is the rule with
//! the highest current upper bound.
//!
//! Decision rules that differ only on observations with no mass are
//! interchangeable at a given occupancy. Both backups score a rule through
//! its projection, which sets those observations to action 0, so the
//! canonical representative of each class always wins the tie.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{MpsError, Result};
use crate::heuristics::BoundStore;
use crate::model::FactoredDecMdp;
use crate::occupancy::OccupancyDistribution;
use crate::policy::{DecisionRule, RuleSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopVariable {
    pub agent: usize,
    pub observation: usize,
    pub domain: usize,
}

/// Soft constraint of one joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateConstraint {
    pub state: usize,
    /// `η(s)`.
    pub weight: f64,
    /// One variable per agent, in agent order.
    pub scope: Vec<usize>,
    /// `c(s, a)` for every joint action `a`.
    pub table: Vec<f64>,
}

/// Full-scope correction for a stored rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub rule: DecisionRule,
    /// Stored `q̄(η, σ)`.
    pub stored: f64,
    /// `stored − q̄_mdp(η, σ)`.
    pub g: f64,
}

#[derive(Debug, Clone)]
pub struct CopProblem {
    stage: usize,
    space: RuleSpace,
    variables: Vec<CopVariable>,
    var_offset: Vec<usize>,
    action_strides: Vec<usize>,
    constraints: Vec<StateConstraint>,
    corrections: Vec<Correction>,
    correction_index: HashMap<DecisionRule, usize>,
    /// Variables named by a constraint with positive weight.
    carries_mass: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopSolution {
    pub assignment: DecisionRule,
    pub objective: f64,
    pub nodes: u64,
    /// True when the search closed the optimality gap.
    pub proved: bool,
}

impl CopProblem {
    /// Assembles a problem over `space`. Corrections are re-keyed by their
    /// projected rule; the `g` of each correction is recomputed from the
    /// constraints.
    pub fn new(
        stage: usize,
        space: RuleSpace,
        constraints: Vec<StateConstraint>,
        corrections: impl IntoIterator<Item = (DecisionRule, f64)>,
    ) -> Result<Self> {
        let mut variables = Vec::new();
        let mut var_offset = Vec::new();
        for (i, &nz) in space.observations.iter().enumerate() {
            var_offset.push(variables.len());
            for z in 0..nz {
                variables.push(CopVariable {
                    agent: i,
                    observation: z,
                    domain: space.actions[i],
                });
            }
        }
        let n = space.actions.len();
        let mut action_strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            action_strides[i] = action_strides[i + 1] * space.actions[i + 1];
        }
        let joint_actions: usize = space.actions.iter().product();
        let mut carries_mass = vec![false; variables.len()];
        for (k, c) in constraints.iter().enumerate() {
            if c.scope.len() != n || c.table.len() != joint_actions {
                return Err(MpsError::Shape(format!("constraint {k} has the wrong scope or table size")));
            }
            for (i, &v) in c.scope.iter().enumerate() {
                if v >= variables.len() || variables[v].agent != i {
                    return Err(MpsError::Shape(format!(
                        "constraint {k} scope slot {i} does not name a variable of agent {i}"
                    )));
                }
                if c.weight > 0.0 {
                    carries_mass[v] = true;
                }
            }
        }
        let mut problem = CopProblem {
            stage,
            space,
            variables,
            var_offset,
            action_strides,
            constraints,
            corrections: Vec::new(),
            correction_index: HashMap::new(),
            carries_mass,
        };
        for (rule, stored) in corrections {
            if !rule.fits(&problem.space) {
                return Err(MpsError::Shape("stored rule does not fit the rule space".into()));
            }
            let rule = problem.project(&rule);
            if problem.correction_index.contains_key(&rule) {
                continue;
            }
            let g = stored - problem.base_value(&rule);
            problem.correction_index.insert(rule.clone(), problem.corrections.len());
            problem.corrections.push(Correction { rule, stored, g });
        }
        Ok(problem)
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn space(&self) -> &RuleSpace {
        &self.space
    }

    pub fn variables(&self) -> &[CopVariable] {
        &self.variables
    }

    pub fn variable(&self, agent: usize, observation: usize) -> usize {
        self.var_offset[agent] + observation
    }

    pub fn constraints(&self) -> &[StateConstraint] {
        &self.constraints
    }

    pub fn corrections(&self) -> &[Correction] {
        &self.corrections
    }

    /// Sets every variable that carries no mass to action 0.
    pub fn project(&self, rule: &DecisionRule) -> DecisionRule {
        let mut out = rule.clone();
        for (v, var) in self.variables.iter().enumerate() {
            if !self.carries_mass[v] {
                out.set(var.agent, var.observation, 0);
            }
        }
        out
    }

    #[inline]
    fn joint_action(&self, c: &StateConstraint, rule: &DecisionRule) -> usize {
        c.scope
            .iter()
            .enumerate()
            .map(|(i, &v)| rule.action(i, self.variables[v].observation) * self.action_strides[i])
            .sum()
    }

    /// `Σ_s η(s) c(s, σ(s))`, summed in constraint order.
    pub fn base_value(&self, rule: &DecisionRule) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.weight * c.table[self.joint_action(c, rule)])
            .sum()
    }

    /// Objective of `rule`: the stored q̄ if its projection is stored, the
    /// uncorrected weighted sum otherwise.
    pub fn evaluate(&self, rule: &DecisionRule) -> f64 {
        let rule = self.project(rule);
        match self.correction_index.get(&rule) {
            Some(&j) => self.corrections[j].stored,
            None => self.base_value(&rule),
        }
    }

    /// Tab-separated listing of variables, constraint tables and corrections.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (v, var) in self.variables.iter().enumerate() {
            let _ = writeln!(out, "var\t{v}\t{}\t{}\t{}", var.agent, var.observation, var.domain);
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let scope: Vec<String> = c.scope.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "state\t{k}\t{}\t{:.17e}\t{}", c.state, c.weight, scope.join(","));
            for (a, x) in c.table.iter().enumerate() {
                let _ = writeln!(out, "c\t{k}\t{a}\t{x:.17e}");
            }
        }
        for (j, corr) in self.corrections.iter().enumerate() {
            let acts: Vec<String> = (0..corr.rule.num_agents())
                .map(|i| {
                    corr.rule
                        .agent_actions(i)
                        .iter()
                        .map(|a| a.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect();
            let _ = writeln!(out, "g\t{j}\t{}\t{:.17e}", acts.join(";"), corr.g);
        }
        out
    }
}

/// Builds the backup problem at `eta`; states without mass are left out.
pub fn build_backup_cop(model: &FactoredDecMdp, store: &BoundStore, eta: &OccupancyDistribution) -> Result<CopProblem> {
    build_backup_cop_with(model, store, eta, false)
}

/// As [`build_backup_cop`], optionally keeping zero-mass states as
/// zero-weight constraints.
pub fn build_backup_cop_with(
    model: &FactoredDecMdp,
    store: &BoundStore,
    eta: &OccupancyDistribution,
    include_zero_mass: bool,
) -> Result<CopProblem> {
    let tau = eta.stage();
    if tau >= model.horizon() {
        return Err(MpsError::HorizonExceeded {
            stage: tau,
            horizon: model.horizon(),
        });
    }
    let space = RuleSpace::of(model);
    let mut offsets = Vec::with_capacity(space.observations.len());
    let mut acc = 0;
    for &nz in &space.observations {
        offsets.push(acc);
        acc += nz;
    }
    let na = model.num_joint_actions();
    let mdp = store.mdp();
    let constraints = eta
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| include_zero_mass || p > 0.0)
        .map(|(s, &p)| StateConstraint {
            state: s,
            weight: p,
            scope: (0..model.num_agents())
                .map(|i| offsets[i] + model.local_observation(s, i))
                .collect(),
            table: (0..na).map(|a| mdp.q_value(model, tau, s, a)).collect(),
        })
        .collect();
    let stored: Vec<(DecisionRule, f64)> = store
        .bag(eta)
        .map(|bag| {
            let mut v: Vec<_> = bag.values().iter().map(|(r, &q)| (r.clone(), q)).collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        })
        .unwrap_or_default();
    CopProblem::new(tau, space, constraints, stored)
}

/// Prefix tree over the stored rules, keyed by the search order of the
/// variables.
struct CorrectionTrie {
    children: Vec<Vec<(usize, usize)>>,
    leaf: Vec<Option<usize>>,
}

impl CorrectionTrie {
    fn build(problem: &CopProblem, order: &[usize]) -> Self {
        let mut trie = CorrectionTrie {
            children: vec![Vec::new()],
            leaf: vec![None],
        };
        let mut searched = vec![false; problem.variables.len()];
        order.iter().for_each(|&v| searched[v] = true);
        'rules: for (j, corr) in problem.corrections.iter().enumerate() {
            // Unsearched variables are fixed to 0; others cannot match.
            for (v, var) in problem.variables.iter().enumerate() {
                if !searched[v] && corr.rule.action(var.agent, var.observation) != 0 {
                    continue 'rules;
                }
            }
            let mut node = 0;
            for &v in order {
                let var = problem.variables[v];
                let a = corr.rule.action(var.agent, var.observation);
                node = match trie.children[node].iter().find(|(x, _)| *x == a) {
                    Some(&(_, child)) => child,
                    None => {
                        trie.children.push(Vec::new());
                        trie.leaf.push(None);
                        let child = trie.children.len() - 1;
                        trie.children[node].push((a, child));
                        child
                    }
                };
            }
            trie.leaf[node] = Some(j);
        }
        trie
    }

    fn step(&self, node: Option<usize>, action: usize) -> Option<usize> {
        let node = node?;
        self.children[node].iter().find(|(a, _)| *a == action).map(|&(_, c)| c)
    }
}

struct Search<'a> {
    problem: &'a CopProblem,
    order: Vec<usize>,
    /// Constraints naming each variable.
    touching: Vec<Vec<usize>>,
    /// Scope slot of the variable each constraint is charged to: the one
    /// searched last.
    bucket_slot: Vec<usize>,
    buckets: Vec<Vec<usize>>,
    assigned: Vec<Option<usize>>,
    /// `m[k][a]`: best weighted entry of constraint `k` when its bucket
    /// variable takes `a`, over the free variables of the rest of its scope.
    m: Vec<Vec<f64>>,
    /// Contribution of each bucket to the bound.
    contrib: Vec<f64>,
    total: f64,
    correction_slack: f64,
    trie: CorrectionTrie,
    best: Option<(f64, DecisionRule)>,
    nodes: u64,
}

struct Undo {
    m: Vec<(usize, Vec<f64>)>,
    contrib: Vec<(usize, f64)>,
    total: f64,
}

impl<'a> Search<'a> {
    fn new(problem: &'a CopProblem, canonical: bool) -> Self {
        let nv = problem.variables.len();
        // how much the choice at each variable can move the objective
        let mut spread = vec![0.0; nv];
        let mut touching = vec![Vec::new(); nv];
        for (k, c) in problem.constraints.iter().enumerate() {
            let (lo, hi) = c
                .table
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            for &v in &c.scope {
                spread[v] += c.weight * (hi - lo);
                if !touching[v].contains(&k) {
                    touching[v].push(k);
                }
            }
        }
        let mut order: Vec<usize> = (0..nv).filter(|&v| !touching[v].is_empty()).collect();
        if !canonical {
            // agents with fewer free variables first, then the variables
            // that matter most
            let n = problem.space.actions.len();
            let mut width = vec![0usize; n];
            order.iter().for_each(|&v| width[problem.variables[v].agent] += 1);
            order.sort_by(|&a, &b| {
                let (va, vb) = (problem.variables[a], problem.variables[b]);
                (width[va.agent], va.agent)
                    .cmp(&(width[vb.agent], vb.agent))
                    .then(spread[b].total_cmp(&spread[a]))
                    .then(a.cmp(&b))
            });
        }
        let mut position = vec![usize::MAX; nv];
        for (p, &v) in order.iter().enumerate() {
            position[v] = p;
        }
        let mut buckets = vec![Vec::new(); nv];
        let bucket_slot: Vec<usize> = problem
            .constraints
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let slot = (0..c.scope.len())
                    .max_by_key(|&i| position[c.scope[i]])
                    .expect("constraints have a scope");
                buckets[c.scope[slot]].push(k);
                slot
            })
            .collect();
        let correction_slack = problem
            .corrections
            .iter()
            .map(|c| c.g)
            .fold(0.0f64, f64::max);
        let trie = CorrectionTrie::build(problem, &order);
        let mut search = Search {
            problem,
            order,
            touching,
            bucket_slot,
            buckets,
            assigned: vec![None; nv],
            m: Vec::new(),
            contrib: vec![0.0; nv],
            total: 0.0,
            correction_slack,
            trie,
            best: None,
            nodes: 0,
        };
        search.m = (0..problem.constraints.len()).map(|k| search.bucket_maxima(k)).collect();
        for v in 0..nv {
            search.contrib[v] = search.bucket_value(v);
        }
        search.total = search.contrib.iter().sum();
        search
    }

    fn bucket_maxima(&self, k: usize) -> Vec<f64> {
        let c = &self.problem.constraints[k];
        let strides = &self.problem.action_strides;
        let domains = &self.problem.space.actions;
        let slot = self.bucket_slot[k];
        let mut out = vec![f64::NEG_INFINITY; domains[slot]];
        'actions: for (a, &x) in c.table.iter().enumerate() {
            for (i, &v) in c.scope.iter().enumerate() {
                if i == slot {
                    continue;
                }
                if let Some(fixed) = self.assigned[v] {
                    if (a / strides[i]) % domains[i] != fixed {
                        continue 'actions;
                    }
                }
            }
            let b = (a / strides[slot]) % domains[slot];
            out[b] = out[b].max(c.weight * x);
        }
        out
    }

    fn bucket_value(&self, v: usize) -> f64 {
        let bucket = &self.buckets[v];
        if bucket.is_empty() {
            return 0.0;
        }
        let sum_at = |a: usize| bucket.iter().map(|&k| self.m[k][a]).sum::<f64>();
        match self.assigned[v] {
            Some(a) => sum_at(a),
            None => (0..self.problem.variables[v].domain)
                .map(sum_at)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn bound(&self) -> f64 {
        self.total + self.correction_slack
    }

    fn assign(&mut self, v: usize, a: usize) -> Undo {
        self.assigned[v] = Some(a);
        let mut undo = Undo {
            m: Vec::new(),
            contrib: Vec::new(),
            total: self.total,
        };
        let mut dirty = vec![v];
        for idx in 0..self.touching[v].len() {
            let k = self.touching[v][idx];
            let owner = self.problem.constraints[k].scope[self.bucket_slot[k]];
            if owner == v {
                continue;
            }
            let fresh = self.bucket_maxima(k);
            undo.m.push((k, std::mem::replace(&mut self.m[k], fresh)));
            if !dirty.contains(&owner) {
                dirty.push(owner);
            }
        }
        for u in dirty {
            let fresh = self.bucket_value(u);
            undo.contrib.push((u, self.contrib[u]));
            self.total += fresh - self.contrib[u];
            self.contrib[u] = fresh;
        }
        undo
    }

    fn restore(&mut self, v: usize, undo: Undo) {
        self.assigned[v] = None;
        for (k, m) in undo.m {
            self.m[k] = m;
        }
        for (u, c) in undo.contrib {
            self.contrib[u] = c;
        }
        self.total = undo.total;
    }

    fn leaf(&self, trie_node: Option<usize>) -> (f64, DecisionRule) {
        let mut rule = DecisionRule::zeros(&self.problem.space);
        for &v in &self.order {
            let var = self.problem.variables[v];
            rule.set(var.agent, var.observation, self.assigned[v].expect("complete assignment"));
        }
        let rule = self.problem.project(&rule);
        let value = match trie_node.and_then(|n| self.trie.leaf[n]) {
            Some(j) => self.problem.corrections[j].stored,
            None => self.problem.evaluate(&rule),
        };
        debug_assert_eq!(value, self.problem.evaluate(&rule));
        (value, rule)
    }

    /// Alternating best responses from the per-variable optimistic choice;
    /// the resulting rule seeds the branch and bound.
    fn seed(&mut self) {
        let p = self.problem;
        let strides = &p.action_strides;
        let mut current: Vec<usize> = (0..p.variables.len())
            .map(|v| {
                let bucket = &self.buckets[v];
                if bucket.is_empty() {
                    return 0;
                }
                (0..p.variables[v].domain)
                    .map(|a| (bucket.iter().map(|&k| self.m[k][a]).sum::<f64>(), a))
                    .fold((f64::NEG_INFINITY, 0), |x, y| if y.0 > x.0 { y } else { x })
                    .1
            })
            .collect();
        let value_of = |current: &[usize]| {
            let mut rule = DecisionRule::zeros(&p.space);
            for &v in &self.order {
                let var = p.variables[v];
                rule.set(var.agent, var.observation, current[v]);
            }
            let rule = p.project(&rule);
            (p.evaluate(&rule), rule)
        };
        let mut best = value_of(&current);
        for _ in 0..50 {
            let mut changed = false;
            for i in 0..p.space.actions.len() {
                for &v in self.order.iter().filter(|&&v| p.variables[v].agent == i) {
                    let mut gains = vec![0.0; p.variables[v].domain];
                    for &k in &self.touching[v] {
                        let c = &p.constraints[k];
                        let base: usize = c
                            .scope
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(j, &u)| current[u] * strides[j])
                            .sum();
                        for (a, g) in gains.iter_mut().enumerate() {
                            *g += c.weight * c.table[base + a * strides[i]];
                        }
                    }
                    let pick = (0..gains.len()).fold(current[v], |x, a| if gains[a] > gains[x] { a } else { x });
                    if pick != current[v] {
                        current[v] = pick;
                        changed = true;
                    }
                }
            }
            let candidate = value_of(&current);
            if candidate.0 > best.0 {
                best = candidate;
            }
            if !changed {
                break;
            }
        }
        self.best = Some(best);
    }

    /// Branch and bound for the maximum; subtrees that can at best tie the
    /// incumbent, up to rounding in the bound, are pruned.
    fn maximize(&mut self, depth: usize, trie_node: Option<usize>) {
        self.nodes += 1;

        if depth == self.order.len() {
            let (value, rule) = self.leaf(trie_node);
            if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
                self.best = Some((value, rule));
            }
            return;
        }
        let v = self.order[depth];
        let domain = self.problem.variables[v].domain;
        let mut children = Vec::with_capacity(domain);
        for a in 0..domain {
            let undo = self.assign(v, a);
            children.push((self.bound(), a));
            self.restore(v, undo);
        }
        children.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for (bound, a) in children {
            if self.best.as_ref().is_some_and(|(b, _)| bound <= *b + BOUND_SLACK * (1.0 + b.abs())) {
                break;
            }
            let undo = self.assign(v, a);
            let next = self.trie.step(trie_node, a);
            self.maximize(depth + 1, next);
            self.restore(v, undo);
        }
    }

    /// Depth-first search in canonical order for the first rule scoring at
    /// least `threshold`.
    fn first_reaching(&mut self, depth: usize, trie_node: Option<usize>, threshold: f64, slack: f64) -> bool {
        self.nodes += 1;
        if depth == self.order.len() {
            let (value, rule) = self.leaf(trie_node);
            if value >= threshold {
                self.best = Some((value, rule));
                return true;
            }
            return false;
        }
        let v = self.order[depth];
        for a in 0..self.problem.variables[v].domain {
            let undo = self.assign(v, a);
            let found = self.bound() + slack >= threshold && {
                let next = self.trie.step(trie_node, a);
                self.first_reaching(depth + 1, next, threshold, slack)
            };
            self.restore(v, undo);
            if found {
                return true;
            }
        }
        false
    }
}

/// Relative rounding allowance of the branch-and-bound bound.
const BOUND_SLACK: f64 = 1e-12;

/// Relative tolerance under which two backup values count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// Lowest value that ties with the maximum `best`.
pub fn tie_threshold(best: f64) -> f64 {
    best - TIE_TOL * (1.0 + best.abs())
}

/// Exact greedy backup by depth-first branch and bound.
///
/// The objective is the maximum over all rules; the assignment is the
/// canonically first rule within [`tie_threshold`] of it. Variables are
/// branched agent by agent. The bound charges each constraint to its last
/// variable and maximizes every other free variable out of it, so once all
/// agents but the last are fixed it is exact up to the corrections.
pub fn solve_cop(problem: &CopProblem) -> CopSolution {
    let mut search = Search::new(problem, false);
    search.seed();
    search.maximize(0, Some(0));
    let (objective, fallback) = search.best.take().expect("finite domains always yield an assignment");
    let mut nodes = search.nodes;
    let mut canonical = Search::new(problem, true);
    let slack = BOUND_SLACK * (1.0 + objective.abs());
    let assignment = if canonical.first_reaching(0, Some(0), tie_threshold(objective), slack) {
        canonical.best.take().expect("found").1
    } else {
        fallback
    };
    nodes += canonical.nodes;
    CopSolution {
        assignment,
        objective,
        nodes,
        proved: true,
    }
}

fn for_each_projected(problem: &CopProblem, mut f: impl FnMut(&DecisionRule)) {
    let slots: Vec<usize> = (0..problem.variables.len()).filter(|&v| problem.carries_mass[v]).collect();
    let mut rule = DecisionRule::zeros(&problem.space);
    loop {
        f(&rule);
        // odometer: the last slot in canonical order moves fastest
        let mut k = slots.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let var = problem.variables[slots[k]];
            let next = rule.action(var.agent, var.observation) + 1;
            if next < var.domain {
                rule.set(var.agent, var.observation, next);
                break;
            }
            rule.set(var.agent, var.observation, 0);
        }
    }
}

/// Enumerates the projected rule space of `problem` and returns the
/// canonically first rule within [`tie_threshold`] of the maximum of
/// [`CopProblem::evaluate`], together with that maximum.
pub fn enumerate_backup(problem: &CopProblem) -> (DecisionRule, f64) {
    let mut best = f64::NEG_INFINITY;
    for_each_projected(problem, |r| best = best.max(problem.evaluate(r)));
    let threshold = tie_threshold(best);
    let mut chosen = None;
    for_each_projected(problem, |r| {
        if chosen.is_none() && problem.evaluate(r) >= threshold {
            chosen = Some(r.clone());
        }
    });
    (chosen.expect("the maximizer reaches the threshold"), best)
}

/// Greedy rule at `eta` by explicit enumeration: stored rules score their
/// stored q̄, the others their centralized-heuristic q-value.
pub fn exhaustive_backup(
    model: &FactoredDecMdp,
    store: &BoundStore,
    eta: &OccupancyDistribution,
    cap: u64,
) -> Result<(DecisionRule, f64)> {
    let count = RuleSpace::of(model).count();
    if count.saturated || count.count > cap {
        return Err(MpsError::Capacity {
            what: "exhaustive backup",
            needed: count.count,
            cap,
            hint: "use the constraint-optimization backup (--mode cop)",
        });
    }
    let problem = build_backup_cop(model, store, eta)?;
    Ok(enumerate_backup(&problem))
}
