//! Brute-force references for tiny instances.
//!
//! [`best_markov`] enumerates every Markov policy, [`best_history`] every
//! history-dependent decentralized policy. Both work over any
//! [`JointModel`], which lets them run on the transition-dependent
//! counterexamples of [`DependentDecMdp`] as well as on factored models.

use rand::Rng;

use crate::error::{MpsError, Result};
use crate::model::{FactoredDecMdp, MixedRadix};
use crate::policy::{DecisionRule, MarkovPolicy, RuleSpace, DEFAULT_ENUMERATION_CAP};

/// Largest dense transition table the oracles will build.
const DENSE_CAP: u64 = 10_000_000;

/// A finite-horizon Dec-MDP whose joint state is the tuple of local
/// observations, without any independence assumption.
pub trait JointModel {
    fn space(&self) -> RuleSpace;
    fn horizon(&self) -> usize;
    fn initial(&self) -> &[f64];
    fn reward(&self, s: usize, a: usize) -> f64;
    fn for_each_successor(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64));

    fn num_states(&self) -> usize {
        self.space().observations.iter().product()
    }

    fn num_joint_actions(&self) -> usize {
        self.space().actions.iter().product()
    }
}

impl JointModel for FactoredDecMdp {
    fn space(&self) -> RuleSpace {
        RuleSpace::of(self)
    }

    fn horizon(&self) -> usize {
        FactoredDecMdp::horizon(self)
    }

    fn initial(&self) -> &[f64] {
        FactoredDecMdp::initial(self)
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward_unchecked(s, a)
    }

    fn for_each_successor(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64)) {
        FactoredDecMdp::for_each_successor(self, s, a, f)
    }
}

/// Two agents where agent 0's next observation also depends on agent 1's
/// current observation. Used to show that the history/Markov equality is
/// not vacuous.
#[derive(Debug, Clone)]
pub struct DependentDecMdp {
    states: MixedRadix,
    actions: MixedRadix,
    /// `[z1][z0][a0][z0']`, flattened.
    coupled: Vec<f64>,
    /// `[z1][a1][z1']`, flattened.
    free: Vec<f64>,
    reward: Vec<f64>,
    initial: Vec<f64>,
    horizon: usize,
}

impl DependentDecMdp {
    pub fn observations(&self) -> &[usize] {
        self.states.radices()
    }
}

fn random_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(3) + 1e-3).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Mostly deterministic row: one random successor takes 0.9 of the mass.
fn sharp_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = random_row(rng, n).iter().map(|p| 0.1 * p).collect();
    w[rng.gen_range(0..n)] += 0.9;
    w
}

/// Random transition-dependent instance with a product-form start.
pub fn gen_dependent(rng: &mut impl Rng, space: &RuleSpace, horizon: usize) -> DependentDecMdp {
    assert_eq!(space.observations.len(), 2, "counterexamples have two agents");
    let (n0, n1) = (space.observations[0], space.observations[1]);
    let (m0, m1) = (space.actions[0], space.actions[1]);
    let mut coupled = Vec::with_capacity(n1 * n0 * m0 * n0);
    for _ in 0..n1 * n0 * m0 {
        coupled.extend(sharp_row(rng, n0));
    }
    let mut free = Vec::with_capacity(n1 * m1 * n1);
    for _ in 0..n1 * m1 {
        free.extend(sharp_row(rng, n1));
    }
    let states = MixedRadix::new(space.observations.clone());
    let actions = MixedRadix::new(space.actions.clone());
    let reward = (0..states.size() * actions.size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (p0, p1) = (random_row(rng, n0), random_row(rng, n1));
    let initial = (0..states.size())
        .map(|s| p0[states.digit(s, 0)] * p1[states.digit(s, 1)])
        .collect();
    DependentDecMdp {
        states,
        actions,
        coupled,
        free,
        reward,
        initial,
        horizon,
    }
}

impl JointModel for DependentDecMdp {
    fn space(&self) -> RuleSpace {
        RuleSpace::new(self.states.radices().to_vec(), self.actions.radices().to_vec())
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial(&self) -> &[f64] {
        &self.initial
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.actions.size() + a]
    }

    fn for_each_successor(&self, s: usize, a: usize, f: &mut dyn FnMut(usize, f64)) {
        let (n0, n1) = (self.states.radices()[0], self.states.radices()[1]);
        let (m0, m1) = (self.actions.radices()[0], self.actions.radices()[1]);
        let (z0, z1) = (self.states.digit(s, 0), self.states.digit(s, 1));
        let (a0, a1) = (self.actions.digit(a, 0), self.actions.digit(a, 1));
        let row0 = &self.coupled[((z1 * n0 + z0) * m0 + a0) * n0..][..n0];
        let row1 = &self.free[(z1 * m1 + a1) * n1..][..n1];
        for (y0, &p) in row0.iter().enumerate() {
            for (y1, &q) in row1.iter().enumerate() {
                if p * q > 0.0 {
                    f(self.states.encode(&[y0, y1]), p * q);
                }
            }
        }
    }
}

/// Dense tables shared by the enumerations.
struct Dense {
    ns: usize,
    na: usize,
    /// `[s][agent]` local observations.
    obs: Vec<Vec<usize>>,
    actions: MixedRadix,
    reward: Vec<f64>,
    /// `[(s·na + a)·ns + s']`.
    trans: Vec<f64>,
}

impl Dense {
    fn build(model: &dyn JointModel) -> Result<Dense> {
        let space = model.space();
        let states = MixedRadix::new(space.observations.clone());
        let actions = MixedRadix::new(space.actions.clone());
        let (ns, na) = (states.size(), actions.size());
        let needed = (ns as u64).saturating_mul(ns as u64).saturating_mul(na as u64);
        if needed > DENSE_CAP {
            return Err(MpsError::Capacity {
                what: "oracle transition table",
                needed,
                cap: DENSE_CAP,
                hint: "oracles are meant for tiny instances",
            });
        }
        let mut reward = vec![0.0; ns * na];
        let mut trans = vec![0.0; ns * na * ns];
        for s in 0..ns {
            for a in 0..na {
                reward[s * na + a] = model.reward(s, a);
                model.for_each_successor(s, a, &mut |s2, p| trans[(s * na + a) * ns + s2] += p);
            }
        }
        Ok(Dense {
            ns,
            na,
            obs: (0..ns).map(|s| states.decode(s)).collect(),
            actions,
            reward,
            trans,
        })
    }

    fn joint_action(&self, rule: &DecisionRule, s: usize) -> usize {
        let acts: Vec<usize> = self.obs[s].iter().enumerate().map(|(i, &z)| rule.action(i, z)).collect();
        self.actions.encode(&acts)
    }

    fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.trans[(s * self.na + a) * self.ns..][..self.ns]
    }
}

fn check_cap(what: &'static str, per_stage: u64, stages: usize, cap: u64) -> Result<()> {
    let mut total: u64 = 1;
    for _ in 0..stages {
        total = total.saturating_mul(per_stage);
    }
    if total > cap {
        return Err(MpsError::Capacity {
            what,
            needed: total,
            cap,
            hint: "shrink the instance or raise the cap",
        });
    }
    Ok(())
}

/// Optimal Markov value and the first maximizer in canonical order, with the
/// default cap on `rule_count^T`.
pub fn best_markov(model: &dyn JointModel) -> Result<(f64, MarkovPolicy)> {
    best_markov_with_cap(model, DEFAULT_ENUMERATION_CAP)
}

pub fn best_markov_with_cap(model: &dyn JointModel, cap: u64) -> Result<(f64, MarkovPolicy)> {
    let space = model.space();
    let count = space.count();
    let horizon = model.horizon();
    if count.saturated {
        return Err(MpsError::Capacity {
            what: "Markov policy enumeration",
            needed: u64::MAX,
            cap,
            hint: "shrink the instance or raise the cap",
        });
    }
    check_cap("Markov policy enumeration", count.count, horizon, cap)?;
    let dense = Dense::build(model)?;
    let rules: Vec<DecisionRule> = space.iter().collect();
    // joint action of every rule at every state
    let table: Vec<Vec<usize>> = rules
        .iter()
        .map(|r| (0..dense.ns).map(|s| dense.joint_action(r, s)).collect())
        .collect();
    let mut search = MarkovSearch {
        dense: &dense,
        table: &table,
        horizon,
        best: f64::NEG_INFINITY,
        best_path: Vec::new(),
        path: Vec::with_capacity(horizon),
    };
    if horizon == 0 {
        return Ok((0.0, MarkovPolicy::new(Vec::new())));
    }
    search.dfs(model.initial().to_vec(), 0.0);
    let policy = MarkovPolicy::new(search.best_path.iter().map(|&k| rules[k].clone()).collect());
    Ok((search.best, policy))
}

struct MarkovSearch<'a> {
    dense: &'a Dense,
    table: &'a [Vec<usize>],
    horizon: usize,
    best: f64,
    best_path: Vec<usize>,
    path: Vec<usize>,
}

impl MarkovSearch<'_> {
    fn dfs(&mut self, eta: Vec<f64>, acc: f64) {
        let d = self.dense;
        let last = self.path.len() + 1 == self.horizon;
        for k in 0..self.table.len() {
            let acts = &self.table[k];
            let mut r = 0.0;
            for (s, &p) in eta.iter().enumerate() {
                if p != 0.0 {
                    r += p * d.reward[s * d.na + acts[s]];
                }
            }
            self.path.push(k);
            if last {
                if acc + r > self.best {
                    self.best = acc + r;
                    self.best_path.clone_from(&self.path);
                }
            } else {
                let mut next = vec![0.0; d.ns];
                for (s, &p) in eta.iter().enumerate() {
                    if p != 0.0 {
                        for (s2, &q) in d.row(s, acts[s]).iter().enumerate() {
                            next[s2] += p * q;
                        }
                    }
                }
                self.dfs(next, acc + r);
            }
            self.path.pop();
        }
    }
}

/// Exact value of a Markov policy by forward occupancy propagation.
pub fn evaluate_markov(model: &dyn JointModel, policy: &MarkovPolicy) -> Result<f64> {
    let dense = Dense::build(model)?;
    let mut eta = model.initial().to_vec();
    let mut value = 0.0;
    for rule in policy.rules() {
        let mut next = vec![0.0; dense.ns];
        for (s, &p) in eta.iter().enumerate() {
            if p != 0.0 {
                let a = dense.joint_action(rule, s);
                value += p * dense.reward[s * dense.na + a];
                for (s2, &q) in dense.row(s, a).iter().enumerate() {
                    next[s2] += p * q;
                }
            }
        }
        eta = next;
    }
    Ok(value)
}

/// Decentralized policy keyed by each agent's own observation sequence
/// `z_0 … z_τ`; the agent's own past actions are functions of that sequence,
/// so they add no information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryPolicy {
    /// `[agent][τ][history index]`, histories in mixed radix with `z_0` most
    /// significant.
    actions: Vec<Vec<Vec<usize>>>,
    observations: Vec<usize>,
}

impl HistoryPolicy {
    pub fn action(&self, agent: usize, history: &[usize]) -> usize {
        let tau = history.len() - 1;
        let idx = history
            .iter()
            .fold(0usize, |acc, &z| acc * self.observations[agent] + z);
        self.actions[agent][tau][idx]
    }

    pub fn horizon(&self) -> usize {
        self.actions.first().map_or(0, |a| a.len())
    }

    /// The policy that ignores everything but the last observation.
    pub fn from_markov(space: &RuleSpace, policy: &MarkovPolicy) -> Self {
        let actions = (0..space.observations.len())
            .map(|i| {
                let nz = space.observations[i];
                (0..policy.len())
                    .map(|tau| {
                        let count = nz.pow(tau as u32 + 1);
                        (0..count).map(|h| policy.rule(tau).action(i, h % nz)).collect()
                    })
                    .collect()
            })
            .collect();
        HistoryPolicy {
            actions,
            observations: space.observations.clone(),
        }
    }
}

fn history_slots(space: &RuleSpace, horizon: usize) -> Vec<(usize, usize, usize)> {
    // (agent, stage, history) in policy order
    let mut slots = Vec::new();
    for (i, &nz) in space.observations.iter().enumerate() {
        for tau in 0..horizon {
            for h in 0..nz.pow(tau as u32 + 1) {
                slots.push((i, tau, h));
            }
        }
    }
    slots
}

/// Exact value of a history policy by expanding every joint trajectory.
pub fn evaluate_history(model: &dyn JointModel, policy: &HistoryPolicy) -> Result<f64> {
    let dense = Dense::build(model)?;
    Ok(history_value(&dense, policy, model.initial(), model.horizon()))
}

fn history_value(dense: &Dense, policy: &HistoryPolicy, initial: &[f64], horizon: usize) -> f64 {
    let n = dense.obs.first().map_or(0, |o| o.len());
    let mut total = 0.0;
    let mut hist = vec![0usize; n];
    for (s, &p) in initial.iter().enumerate() {
        if p != 0.0 {
            for i in 0..n {
                hist[i] = dense.obs[s][i];
            }
            total += expand(dense, policy, horizon, 0, s, &mut hist, p);
        }
    }
    total
}

fn expand(
    dense: &Dense,
    policy: &HistoryPolicy,
    horizon: usize,
    tau: usize,
    s: usize,
    hist: &mut [usize],
    prob: f64,
) -> f64 {
    let acts: Vec<usize> = hist
        .iter()
        .enumerate()
        .map(|(i, &h)| policy.actions[i][tau][h])
        .collect();
    let a = dense.actions.encode(&acts);
    let mut value = prob * dense.reward[s * dense.na + a];
    if tau + 1 < horizon {
        let saved = hist.to_vec();
        for (s2, &q) in dense.row(s, a).iter().enumerate() {
            if q != 0.0 {
                for i in 0..hist.len() {
                    hist[i] = saved[i] * policy.observations[i] + dense.obs[s2][i];
                }
                value += expand(dense, policy, horizon, tau + 1, s2, hist, prob * q);
            }
        }
        hist.copy_from_slice(&saved);
    }
    value
}

/// Optimal value over all decentralized history-dependent policies, with the
/// default cap on the number of joint policies.
pub fn best_history(model: &dyn JointModel) -> Result<(f64, HistoryPolicy)> {
    best_history_with_cap(model, DEFAULT_ENUMERATION_CAP)
}

pub fn best_history_with_cap(model: &dyn JointModel, cap: u64) -> Result<(f64, HistoryPolicy)> {
    let space = model.space();
    let horizon = model.horizon();
    let slots = history_slots(&space, horizon);
    let mut total: u64 = 1;
    for &(i, _, _) in &slots {
        total = total.saturating_mul(space.actions[i] as u64);
    }
    if total > cap {
        return Err(MpsError::Capacity {
            what: "history policy enumeration",
            needed: total,
            cap,
            hint: "shrink the instance or raise the cap",
        });
    }
    let dense = Dense::build(model)?;
    let mut policy = HistoryPolicy {
        actions: space
            .observations
            .iter()
            .map(|&nz| (0..horizon).map(|tau| vec![0; nz.pow(tau as u32 + 1)]).collect())
            .collect(),
        observations: space.observations.clone(),
    };
    let mut best = f64::NEG_INFINITY;
    let mut best_policy = policy.clone();
    loop {
        let v = history_value(&dense, &policy, model.initial(), horizon);
        if v > best {
            best = v;
            best_policy = policy.clone();
        }
        // odometer, last slot fastest
        let mut k = slots.len();
        loop {
            if k == 0 {
                return Ok((if horizon == 0 { 0.0 } else { best }, best_policy));
            }
            k -= 1;
            let (i, tau, h) = slots[k];
            let slot = &mut policy.actions[i][tau][h];
            *slot += 1;
            if *slot < space.actions[i] {
                break;
            }
            *slot = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{gen_flip_stay, gen_random_instance, RandomInstance};
    use crate::model::LocalAgentModel;
    use crate::policy::{evaluate_policy, random_policy};
    use crate::OccupancyDistribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn product_instance(rng: &mut ChaCha8Rng, obs: usize, acts: usize, horizon: usize) -> FactoredDecMdp {
        gen_random_instance(
            rng,
            &RandomInstance {
                space: RuleSpace::new(vec![obs, obs], vec![acts, acts]),
                horizon,
                product_start: true,
                reward_density: 0.7,
            },
        )
    }

    #[test]
    fn toy_values() {
        let m = gen_flip_stay(2);
        assert_eq!(best_markov(&m).unwrap().0, 1.0);
        assert_eq!(best_history(&m).unwrap().0, 1.0);
    }

    #[test]
    fn zero_reward_gives_first_policy() {
        let toy = gen_flip_stay(3);
        let m = FactoredDecMdp::new(toy.agents().to_vec(), [], 3, toy.initial().to_vec()).unwrap();
        let (v, pi) = best_markov(&m).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(pi, crate::policy::zero_policy(&m));
    }

    #[test]
    fn single_agent_matches_backward_induction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let base = product_instance(&mut rng, 3, 3, 3);
            let solo = base.agent(0).clone();
            let trivial = LocalAgentModel::new(vec!["only".into()], vec!["noop".into()], vec![1.0]).unwrap();
            let reward: Vec<_> = (0..3)
                .flat_map(|z| (0..3).map(move |a| ((z, a), ((z * 7 + a * 3) % 5) as f64 - 2.0)))
                .collect();
            let m = FactoredDecMdp::new(vec![solo.clone(), trivial], reward.clone(), 3, vec![0.2, 0.5, 0.3]).unwrap();
            // backward induction on the single-agent MDP
            let r = |z: usize, a: usize| reward.iter().find(|e| e.0 == (z, a)).unwrap().1;
            let mut v = vec![0.0; 3];
            for _ in 0..3 {
                v = (0..3)
                    .map(|z| {
                        (0..3)
                            .map(|a| r(z, a) + (0..3).map(|y| solo.prob(z, a, y) * v[y]).sum::<f64>())
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
            }
            let want: f64 = [0.2, 0.5, 0.3].iter().zip(&v).map(|(p, x)| p * x).sum();
            let (got, _) = best_markov(&m).unwrap();
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn horizon_one_history_equals_markov() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let m = product_instance(&mut rng, 2, 3, 1);
            assert_eq!(best_markov(&m).unwrap().0, best_history(&m).unwrap().0);
        }
    }

    #[test]
    fn history_equals_markov_on_independent_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let m = product_instance(&mut rng, 2, 2, 2);
            let (hv, _) = best_history(&m).unwrap();
            let (mv, _) = best_markov(&m).unwrap();
            assert!((hv - mv).abs() < 1e-9, "{hv} vs {mv}");
        }
    }

    #[test]
    fn best_markov_dominates_and_evaluates() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..20 {
            let m = product_instance(&mut rng, 2, 2, 3);
            let (best, pi) = best_markov(&m).unwrap();
            let eta0 = OccupancyDistribution::initial(&m);
            let exact = evaluate_policy(&m, &pi).unwrap().value_at(0, &eta0);
            assert!((exact - best).abs() < 1e-9);
            let other = evaluate_policy(&m, &random_policy(&m, seed)).unwrap().value_at(0, &eta0);
            assert!(other <= best + 1e-9);
            assert!((evaluate_markov(&m, &pi).unwrap() - best).abs() < 1e-9);
            let lifted = HistoryPolicy::from_markov(&RuleSpace::of(&m), &pi);
            assert!((evaluate_history(&m, &lifted).unwrap() - best).abs() < 1e-9);
        }
    }

    #[test]
    fn dependent_model_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = gen_dependent(&mut rng, &RuleSpace::new(vec![2, 3], vec![2, 2]), 2);
        for s in 0..m.num_states() {
            for a in 0..m.num_joint_actions() {
                let mut total = 0.0;
                m.for_each_successor(s, a, &mut |_, p| total += p);
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
        assert!((m.initial().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn caps_are_enforced() {
        let m = gen_flip_stay(4);
        assert!(matches!(best_markov_with_cap(&m, 1000), Err(MpsError::Capacity { .. })));
        assert!(matches!(best_history_with_cap(&m, 1000), Err(MpsError::Capacity { .. })));
    }
}
