//! State occupancy distributions and their deterministic dynamics.
//!
//! The occupancy at stage τ is the distribution over joint states induced by
//! the initial occupancy and the rules played at stages 0..τ. It evolves
//! deterministically:
//!
//!   η_{τ+1}(s') = Σ_s p(s, σ_τ(s), s') · η_τ(s)

use std::sync::OnceLock;

use crate::error::{MpsError, Result};
use crate::model::{FactoredDecMdp, PROB_TOL};
use crate::policy::DecisionRule;

/// Occupancy entries are rounded to this many decimal digits in keys.
pub const KEY_DIGITS: i32 = 10;

/// Tolerance of the rank-1 check that detects a product-form occupancy.
pub const FACTOR_TOL: f64 = 1e-12;

/// Probability vector over joint states at a given stage.
#[derive(Debug, Clone)]
pub struct OccupancyDistribution {
    probs: Vec<f64>,
    stage: usize,
    key: OnceLock<OccupancyKey>,
}

impl PartialEq for OccupancyDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.stage == other.stage && self.probs == other.probs
    }
}

impl OccupancyDistribution {
    pub fn new(probs: Vec<f64>, stage: usize) -> Self {
        OccupancyDistribution {
            probs,
            stage,
            key: OnceLock::new(),
        }
    }

    /// The model's initial occupancy at stage 0.
    pub fn initial(model: &FactoredDecMdp) -> Self {
        Self::new(model.initial().to_vec(), 0)
    }

    pub fn point_mass(num_states: usize, s: usize, stage: usize) -> Self {
        let mut probs = vec![0.0; num_states];
        probs[s] = 1.0;
        Self::new(probs, stage)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `(s, η(s))` for every state with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| (s, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Whether the entries lie in [0, 1] and sum to one.
    pub fn is_distribution(&self) -> bool {
        self.probs.iter().all(|p| (0.0..=1.0).contains(p)) && (self.total() - 1.0).abs() <= PROB_TOL
    }

    pub fn key(&self) -> &OccupancyKey {
        self.key.get_or_init(|| key_of(self))
    }

    /// Marginal distribution of agent `i`'s observation.
    pub fn marginal(&self, model: &FactoredDecMdp, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; model.agent(i).num_observations()];
        for (s, p) in self.support() {
            out[model.local_observation(s, i)] += p;
        }
        out
    }
}

/// Hashable identity of an occupancy: its stage and the entries rounded
/// half-to-even at `KEY_DIGITS` decimals, as little-endian bytes of the
/// nonzero `(index, scaled value)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupancyKey {
    stage: usize,
    bytes: Vec<u8>,
}

impl OccupancyKey {
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

pub fn key_of(eta: &OccupancyDistribution) -> OccupancyKey {
    let scale = 10f64.powi(KEY_DIGITS);
    let mut bytes = Vec::new();
    for (s, &p) in eta.probs.iter().enumerate() {
        let q = (p * scale).round_ties_even() as i64;
        if q != 0 {
            bytes.extend_from_slice(&(s as u64).to_le_bytes());
            bytes.extend_from_slice(&q.to_le_bytes());
        }
    }
    OccupancyKey {
        stage: eta.stage,
        bytes,
    }
}

fn check_stage(model: &FactoredDecMdp, stage: usize) -> Result<()> {
    if stage >= model.horizon() {
        Err(MpsError::HorizonExceeded {
            stage,
            horizon: model.horizon(),
        })
    } else {
        Ok(())
    }
}

/// One step of the occupancy dynamics under `rule`, iterating only over the
/// support of `eta`.
pub fn advance(
    model: &FactoredDecMdp,
    eta: &OccupancyDistribution,
    rule: &DecisionRule,
) -> Result<OccupancyDistribution> {
    check_stage(model, eta.stage)?;
    if eta.len() != model.num_states() {
        return Err(MpsError::Shape("occupancy length does not match the model".into()));
    }
    let mut next = vec![0.0; model.num_states()];
    for (s, p) in eta.support() {
        let a = rule.joint_action(model, s);
        model.for_each_successor(s, a, |s2, q| next[s2] += p * q);
    }
    Ok(OccupancyDistribution::new(next, eta.stage + 1))
}

/// `Σ_s η(s) r(s, σ(s))`.
pub fn expected_reward(model: &FactoredDecMdp, eta: &OccupancyDistribution, rule: &DecisionRule) -> f64 {
    eta.support()
        .map(|(s, p)| p * model.reward_unchecked(s, rule.joint_action(model, s)))
        .sum()
}

/// Per-agent marginals of a product-form occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredOccupancy {
    marginals: Vec<Vec<f64>>,
    stage: usize,
}

impl FactoredOccupancy {
    pub fn new(marginals: Vec<Vec<f64>>, stage: usize) -> Self {
        FactoredOccupancy { marginals, stage }
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Outer product of the marginals in joint-state order.
    pub fn join(&self, model: &FactoredDecMdp) -> OccupancyDistribution {
        let codec = model.state_codec();
        let mut probs = vec![0.0; codec.size()];
        // Only expand over the support of each factor.
        let supports: Vec<Vec<(usize, f64)>> = self
            .marginals
            .iter()
            .map(|m| m.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(z, &p)| (z, p)).collect())
            .collect();
        if supports.iter().any(|s| s.is_empty()) {
            return OccupancyDistribution::new(probs, self.stage);
        }
        let n = supports.len();
        let mut cursor = vec![0usize; n];
        'outer: loop {
            let mut index = 0;
            let mut p = 1.0;
            for i in 0..n {
                let (z, q) = supports[i][cursor[i]];
                index += z * codec.stride(i);
                p *= q;
            }
            probs[index] = p;
            let mut i = n;
            loop {
                if i == 0 {
                    break 'outer;
                }
                i -= 1;
                cursor[i] += 1;
                if cursor[i] < supports[i].len() {
                    break;
                }
                cursor[i] = 0;
            }
        }
        OccupancyDistribution::new(probs, self.stage)
    }

    /// Recovers the marginals of `eta` if it equals their product within
    /// `FACTOR_TOL` everywhere.
    pub fn factorize(model: &FactoredDecMdp, eta: &OccupancyDistribution) -> Option<Self> {
        let marginals: Vec<Vec<f64>> = (0..model.num_agents()).map(|i| eta.marginal(model, i)).collect();
        let candidate = FactoredOccupancy::new(marginals, eta.stage);
        let joined = candidate.join(model);
        let ok = joined
            .probs()
            .iter()
            .zip(eta.probs())
            .all(|(a, b)| (a - b).abs() <= FACTOR_TOL);
        ok.then_some(candidate)
    }
}

/// Local-marginal update: agent `i`'s marginal evolves under its own local
/// chain and its own rule, independently of the others.
pub fn advance_factored(
    model: &FactoredDecMdp,
    feta: &FactoredOccupancy,
    rule: &DecisionRule,
) -> Result<FactoredOccupancy> {
    check_stage(model, feta.stage)?;
    let marginals = feta
        .marginals
        .iter()
        .enumerate()
        .map(|(i, local)| {
            let agent = model.agent(i);
            let mut next = vec![0.0; agent.num_observations()];
            for (z, &p) in local.iter().enumerate() {
                if p > 0.0 {
                    for &(z2, q) in agent.successors(z, rule.action(i, z)) {
                        next[z2] += p * q;
                    }
                }
            }
            next
        })
        .collect();
    Ok(FactoredOccupancy::new(marginals, feta.stage + 1))
}
