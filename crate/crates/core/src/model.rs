//! Factored, transition-independent Dec-MDP models.
//!
//! Each agent owns a local Markov chain over its observations, controlled by
//! its local actions. The joint state is the tuple of local observations and
//! the joint transition is the product of the local ones:
//!
//!   p(s, a, s') = Π_i p^i(z^i, a^i, z'^i)
//!
//! Only the reward couples the agents. Joint states and joint actions are
//! addressed by a mixed-radix linear index with agent 0 as the most
//! significant digit.

use std::collections::BTreeMap;

use crate::error::{check_range, MpsError, Result};

/// Tolerance used when checking that probability vectors sum to one.
pub const PROB_TOL: f64 = 1e-9;

/// Dense reward tables are materialized below this many (s, a) pairs.
const DENSE_REWARD_LIMIT: usize = 1 << 24;

/// Mixed-radix codec between digit tuples and linear indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    radices: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl MixedRadix {
    /// Panics if the product of the radices overflows `usize`.
    pub fn new(radices: Vec<usize>) -> Self {
        let mut strides = vec![0; radices.len()];
        let mut size = 1usize;
        for i in (0..radices.len()).rev() {
            strides[i] = size;
            size = size
                .checked_mul(radices[i])
                .expect("mixed-radix space overflows usize");
        }
        MixedRadix {
            radices,
            strides,
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.radices.len());
        digits
            .iter()
            .zip(&self.strides)
            .map(|(d, s)| d * s)
            .sum()
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        self.decode_into(index, &mut out);
        out
    }

    pub fn decode_into(&self, index: usize, out: &mut [usize]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (index / self.strides[i]) % self.radices[i];
        }
    }

    #[inline]
    pub fn digit(&self, index: usize, position: usize) -> usize {
        (index / self.strides[position]) % self.radices[position]
    }

    #[inline]
    pub fn stride(&self, position: usize) -> usize {
        self.strides[position]
    }
}

/// Joint state as its canonical linear index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JointState(pub usize);

/// Joint action as its canonical linear index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JointAction(pub usize);

/// One agent's local model: observations, actions and the controlled local
/// transition table `p^i(z, a, z')`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalAgentModel {
    observations: Vec<String>,
    actions: Vec<String>,
    /// Row-major `[z][a][z']`.
    transition: Vec<f64>,
    /// Nonzero entries of each `(z, a)` row, indexed `z * |A| + a`.
    successors: Vec<Vec<(usize, f64)>>,
}

impl LocalAgentModel {
    /// `transition` is row-major over `(z, a, z')`.
    pub fn new(observations: Vec<String>, actions: Vec<String>, transition: Vec<f64>) -> Result<Self> {
        let nz = observations.len();
        let na = actions.len();
        if transition.len() != nz * na * nz {
            return Err(MpsError::Shape(format!(
                "local transition table has {} entries, expected {}x{}x{} = {}",
                transition.len(),
                nz,
                na,
                nz,
                nz * na * nz
            )));
        }
        let successors = (0..nz * na)
            .map(|row| {
                transition[row * nz..(row + 1) * nz]
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(z2, &p)| (z2, p))
                    .collect()
            })
            .collect();
        Ok(LocalAgentModel {
            observations,
            actions,
            transition,
            successors,
        })
    }

    /// Builds the table from a closure `(z, a, z') -> p`.
    pub fn from_fn(
        observations: Vec<String>,
        actions: Vec<String>,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let nz = observations.len();
        let na = actions.len();
        let mut table = Vec::with_capacity(nz * na * nz);
        for z in 0..nz {
            for a in 0..na {
                for z2 in 0..nz {
                    table.push(f(z, a, z2));
                }
            }
        }
        Self::new(observations, actions, table).expect("shape is correct by construction")
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    #[inline]
    pub fn prob(&self, z: usize, a: usize, z2: usize) -> f64 {
        let nz = self.observations.len();
        self.transition[(z * self.actions.len() + a) * nz + z2]
    }

    pub fn row(&self, z: usize, a: usize) -> &[f64] {
        let nz = self.observations.len();
        let start = (z * self.actions.len() + a) * nz;
        &self.transition[start..start + nz]
    }

    /// Nonzero `(z', p)` pairs of row `(z, a)` in ascending `z'`.
    #[inline]
    pub fn successors(&self, z: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[z * self.actions.len() + a]
    }

    pub fn observation_index(&self, id: &str) -> Option<usize> {
        self.observations.iter().position(|o| o == id)
    }

    pub fn action_index(&self, id: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == id)
    }
}

/// An n-agent Dec-MDP with independent transitions and observations.
#[derive(Debug, Clone)]
pub struct FactoredDecMdp {
    agents: Vec<LocalAgentModel>,
    reward: BTreeMap<(usize, usize), f64>,
    dense_reward: Option<Vec<f64>>,
    horizon: usize,
    initial: Vec<f64>,
    states: MixedRadix,
    joint_actions: MixedRadix,
}

impl PartialEq for FactoredDecMdp {
    fn eq(&self, other: &Self) -> bool {
        self.agents == other.agents
            && self.reward == other.reward
            && self.horizon == other.horizon
            && self.initial == other.initial
    }
}

impl FactoredDecMdp {
    /// Builds a model. Structural mismatches (initial vector length) are
    /// errors; semantic problems are left for [`validate`].
    pub fn new(
        agents: Vec<LocalAgentModel>,
        reward: impl IntoIterator<Item = ((usize, usize), f64)>,
        horizon: usize,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let states = MixedRadix::new(agents.iter().map(|a| a.num_observations()).collect());
        let joint_actions = MixedRadix::new(agents.iter().map(|a| a.num_actions()).collect());
        if initial.len() != states.size() {
            return Err(MpsError::Shape(format!(
                "initial occupancy has {} entries but the joint state space has {}",
                initial.len(),
                states.size()
            )));
        }
        let mut table = BTreeMap::new();
        for (k, v) in reward {
            if v != 0.0 {
                table.insert(k, v);
            } else {
                table.remove(&k);
            }
        }
        let pairs = states.size().saturating_mul(joint_actions.size());
        let dense_reward = (pairs <= DENSE_REWARD_LIMIT).then(|| {
            let mut dense = vec![0.0; pairs];
            for (&(s, a), &v) in &table {
                if s < states.size() && a < joint_actions.size() {
                    dense[s * joint_actions.size() + a] = v;
                }
            }
            dense
        });
        Ok(FactoredDecMdp {
            agents,
            reward: table,
            dense_reward,
            horizon,
            initial,
            states,
            joint_actions,
        })
    }

    /// Same model with a different horizon.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    /// Same model with a different initial occupancy.
    pub fn with_initial(self, initial: Vec<f64>) -> Result<Self> {
        let reward = self.reward.clone();
        FactoredDecMdp::new(self.agents, reward, self.horizon, initial)
    }

    pub fn agents(&self) -> &[LocalAgentModel] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &LocalAgentModel {
        &self.agents[i]
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn num_states(&self) -> usize {
        self.states.size()
    }

    pub fn num_joint_actions(&self) -> usize {
        self.joint_actions.size()
    }

    pub fn state_codec(&self) -> &MixedRadix {
        &self.states
    }

    pub fn action_codec(&self) -> &MixedRadix {
        &self.joint_actions
    }

    /// Sparse reward entries in ascending `(s, a)` order.
    pub fn reward_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.reward.iter().map(|(&(s, a), &v)| (s, a, v))
    }

    pub fn encode_state(&self, observations: &[usize]) -> JointState {
        JointState(self.states.encode(observations))
    }

    pub fn decode_state(&self, s: JointState) -> Vec<usize> {
        self.states.decode(s.0)
    }

    pub fn encode_action(&self, actions: &[usize]) -> JointAction {
        JointAction(self.joint_actions.encode(actions))
    }

    pub fn decode_action(&self, a: JointAction) -> Vec<usize> {
        self.joint_actions.decode(a.0)
    }

    /// Local observation of agent `i` in joint state `s`.
    #[inline]
    pub fn local_observation(&self, s: usize, i: usize) -> usize {
        self.states.digit(s, i)
    }

    /// `p(s, a, s')` as the product of the local factors, multiplied in
    /// ascending agent order.
    pub fn joint_transition(&self, s: JointState, a: JointAction, s2: JointState) -> Result<f64> {
        check_range("joint state", s.0, self.num_states())?;
        check_range("joint action", a.0, self.num_joint_actions())?;
        check_range("joint state", s2.0, self.num_states())?;
        Ok(self.joint_transition_unchecked(s.0, a.0, s2.0))
    }

    #[inline]
    pub(crate) fn joint_transition_unchecked(&self, s: usize, a: usize, s2: usize) -> f64 {
        let mut p = 1.0;
        for (i, agent) in self.agents.iter().enumerate() {
            p *= agent.prob(
                self.states.digit(s, i),
                self.joint_actions.digit(a, i),
                self.states.digit(s2, i),
            );
        }
        p
    }

    pub fn reward(&self, s: JointState, a: JointAction) -> Result<f64> {
        check_range("joint state", s.0, self.num_states())?;
        check_range("joint action", a.0, self.num_joint_actions())?;
        Ok(self.reward_unchecked(s.0, a.0))
    }

    #[inline]
    pub(crate) fn reward_unchecked(&self, s: usize, a: usize) -> f64 {
        match &self.dense_reward {
            Some(d) => d[s * self.joint_actions.size() + a],
            None => self.reward.get(&(s, a)).copied().unwrap_or(0.0),
        }
    }

    /// Calls `f(s', p)` for every joint successor with nonzero probability.
    /// Successors are visited in ascending linear index.
    pub fn for_each_successor(&self, s: usize, a: usize, mut f: impl FnMut(usize, f64)) {
        let n = self.agents.len();
        let lists: Vec<&[(usize, f64)]> = (0..n)
            .map(|i| {
                self.agents[i].successors(self.states.digit(s, i), self.joint_actions.digit(a, i))
            })
            .collect();
        if lists.iter().any(|l| l.is_empty()) {
            return;
        }
        let mut cursor = vec![0usize; n];
        loop {
            let mut index = 0;
            let mut p = 1.0;
            for i in 0..n {
                let (z2, q) = lists[i][cursor[i]];
                index += z2 * self.states.stride(i);
                p *= q;
            }
            f(index, p);
            let mut i = n;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                cursor[i] += 1;
                if cursor[i] < lists[i].len() {
                    break;
                }
                cursor[i] = 0;
            }
        }
    }

    /// Checks every model invariant; violations are returned as data.
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

/// Outcome of [`validate`]: empty iff the model is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(MpsError::Invalid(self.to_string()))
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}: {}", v.location, v.message)?;
        }
        Ok(())
    }
}

fn check_ids(report: &mut ValidationReport, location: &str, kind: &str, ids: &[String]) {
    if ids.is_empty() {
        report.push(location, format!("{kind} set is empty"));
    }
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            report.push(location, format!("duplicate {kind} identifier `{id}`"));
        }
    }
}

pub fn validate(model: &FactoredDecMdp) -> ValidationReport {
    let mut report = ValidationReport::default();
    if model.num_agents() < 2 {
        report.push("agents", format!("need at least 2 agents, got {}", model.num_agents()));
    }
    if model.horizon == 0 {
        report.push("horizon", "horizon must be positive");
    }
    for (i, agent) in model.agents.iter().enumerate() {
        let loc = format!("agent {i}");
        check_ids(&mut report, &loc, "observation", &agent.observations);
        check_ids(&mut report, &loc, "action", &agent.actions);
        for z in 0..agent.num_observations() {
            for a in 0..agent.num_actions() {
                let row = agent.row(z, a);
                if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    report.push(
                        format!("agent {i} row (z={z}, a={a})"),
                        format!("probability {bad} outside [0, 1]"),
                    );
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    report.push(
                        format!("agent {i} row (z={z}, a={a})"),
                        format!("transition row sums to {sum}, expected 1"),
                    );
                }
            }
        }
    }
    for (&(s, a), v) in &model.reward {
        if s >= model.num_states() || a >= model.num_joint_actions() {
            report.push(
                format!("reward (s={s}, a={a})"),
                "entry indexes a joint state or action outside the model",
            );
        }
        if !v.is_finite() {
            report.push(format!("reward (s={s}, a={a})"), "reward is not finite");
        }
    }
    if let Some(bad) = model.initial.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        report.push("initial occupancy", format!("probability {bad} outside [0, 1]"));
    }
    let sum: f64 = model.initial.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        report.push("initial occupancy", format!("sums to {sum}, expected 1"));
    }
    report
}

/// Identifiers `prefix0, prefix1, ...`.
pub fn numbered_ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flip_stay_agent() -> LocalAgentModel {
        // action 0 = flip, action 1 = stay
        LocalAgentModel::from_fn(
            numbered_ids("z", 2),
            vec!["flip".into(), "stay".into()],
            |z, a, z2| match a {
                0 => (z2 != z) as u8 as f64,
                _ => (z2 == z) as u8 as f64,
            },
        )
    }

    fn toy() -> FactoredDecMdp {
        let agents = vec![flip_stay_agent(), flip_stay_agent()];
        let mut init = vec![0.0; 4];
        init[1] = 1.0;
        FactoredDecMdp::new(agents, [((1usize, 0usize), 1.0)], 2, init).unwrap()
    }

    #[test]
    fn mixed_radix_round_trip() {
        let r = MixedRadix::new(vec![3, 2, 4]);
        assert_eq!(r.size(), 24);
        for i in 0..24 {
            assert_eq!(r.encode(&r.decode(i)), i);
        }
        // agent 0 is the most significant digit
        assert_eq!(r.encode(&[1, 0, 0]), 8);
        assert_eq!(r.encode(&[0, 0, 1]), 1);
    }

    #[test]
    fn deterministic_stay_is_identity() {
        let m = toy();
        let stay = m.encode_action(&[1, 1]);
        for s in 0..4 {
            assert_eq!(m.joint_transition(JointState(s), stay, JointState(s)).unwrap(), 1.0);
        }
    }

    #[test]
    fn product_of_local_factors() {
        let a = LocalAgentModel::new(numbered_ids("z", 2), numbered_ids("a", 1), vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let b = LocalAgentModel::new(numbered_ids("z", 2), numbered_ids("a", 1), vec![0.4, 0.6, 0.4, 0.6]).unwrap();
        let m = FactoredDecMdp::new(vec![a, b], [], 1, vec![0.25; 4]).unwrap();
        let p = m.joint_transition(JointState(0), JointAction(0), JointState(0)).unwrap();
        assert!((p - 0.2).abs() < 1e-15);
    }

    #[test]
    fn reward_lookup_and_default() {
        let m = toy();
        assert_eq!(m.reward(JointState(0), JointAction(0)).unwrap(), 0.0);
        // s = (0,1), a = (flip, stay)
        let s = m.encode_state(&[0, 1]);
        let a = m.encode_action(&[0, 1]);
        assert_eq!(m.reward(s, a).unwrap(), 0.0);
        assert_eq!(m.reward(JointState(1), JointAction(0)).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let m = toy();
        assert!(matches!(
            m.reward(JointState(4), JointAction(0)),
            Err(MpsError::Range { .. })
        ));
        assert!(m.joint_transition(JointState(0), JointAction(9), JointState(0)).is_err());
    }

    #[test]
    fn validation_flags_bad_row() {
        let bad = LocalAgentModel::new(
            numbered_ids("z", 2),
            numbered_ids("a", 1),
            vec![0.5, 0.4, 0.0, 1.0],
        )
        .unwrap();
        let m = FactoredDecMdp::new(vec![bad, flip_stay_agent()], [], 1, vec![0.25; 4]).unwrap();
        let report = validate(&m);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].location.contains("z=0, a=0"));
    }

    #[test]
    fn validation_flags_initial_mass() {
        let m = FactoredDecMdp::new(
            vec![flip_stay_agent(), flip_stay_agent()],
            [],
            1,
            vec![0.5, 0.2, 0.2, 0.2],
        )
        .unwrap();
        let report = validate(&m);
        assert!(report.violations.iter().any(|v| v.location == "initial occupancy"));
    }

    #[test]
    fn validation_flags_bad_reward_index_and_duplicates() {
        let dup = LocalAgentModel::from_fn(vec!["x".into(), "x".into()], vec!["a".into()], |z, _, z2| {
            (z == z2) as u8 as f64
        });
        let m = FactoredDecMdp::new(vec![dup, flip_stay_agent()], [((7, 0), 1.0)], 1, vec![0.25; 4]).unwrap();
        let report = validate(&m);
        assert!(report.violations.iter().any(|v| v.message.contains("duplicate")));
        assert!(report.violations.iter().any(|v| v.location.starts_with("reward")));
    }

    #[test]
    fn toy_is_valid() {
        assert!(validate(&toy()).is_valid());
    }

    #[test]
    fn successors_enumerate_nonzero_product() {
        let m = toy();
        let a = m.encode_action(&[0, 1]);
        let mut seen = vec![];
        m.for_each_successor(1, a.0, |s2, p| seen.push((s2, p)));
        assert_eq!(seen, vec![(m.encode_state(&[1, 1]).0, 1.0)]);
    }
}
