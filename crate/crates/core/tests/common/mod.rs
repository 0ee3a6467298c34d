#![allow(dead_code)]

use mps_core::bench::{gen_random_instance, RandomInstance};
use mps_core::model::{JointAction, JointState};
use mps_core::policy::RuleSpace;
use mps_core::FactoredDecMdp;
use rand::Rng;

/// Largest `rules^T` handed to the brute-force oracle.
pub const ORACLE_POLICY_CAP: u128 = 1_000_000;

/// Draws a two-agent shape with `|Z^i|, |A^i| ≤ 3` and `T ≤ 3`, redrawing
/// until the Markov policy space fits under [`ORACLE_POLICY_CAP`].
pub fn small_shape(rng: &mut impl Rng) -> (RuleSpace, usize) {
    loop {
        let obs: Vec<usize> = (0..2).map(|_| rng.gen_range(1..=3)).collect();
        let acts: Vec<usize> = (0..2).map(|_| rng.gen_range(1..=3)).collect();
        let horizon = rng.gen_range(1..=3);
        let space = RuleSpace::new(obs, acts);
        let rules = space.count().count as u128;
        if rules.pow(horizon as u32) <= ORACLE_POLICY_CAP {
            return (space, horizon);
        }
    }
}

pub fn small_instance(rng: &mut impl Rng, product_start: bool) -> FactoredDecMdp {
    let (space, horizon) = small_shape(rng);
    gen_random_instance(
        rng,
        &RandomInstance {
            space,
            horizon,
            product_start,
            reward_density: 0.6,
        },
    )
}

/// Largest absolute difference between two models with the same shape and
/// names; `None` when shapes or names differ.
pub fn model_distance(a: &FactoredDecMdp, b: &FactoredDecMdp) -> Option<f64> {
    if a.num_agents() != b.num_agents() || a.horizon() != b.horizon() {
        return None;
    }
    let mut worst = 0.0f64;
    for (x, y) in a.agents().iter().zip(b.agents()) {
        if x.observations() != y.observations() || x.actions() != y.actions() {
            return None;
        }
        for z in 0..x.num_observations() {
            for u in 0..x.num_actions() {
                for (p, q) in x.row(z, u).iter().zip(y.row(z, u)) {
                    worst = worst.max((p - q).abs());
                }
            }
        }
    }
    for (p, q) in a.initial().iter().zip(b.initial()) {
        worst = worst.max((p - q).abs());
    }
    for s in 0..a.num_states() {
        for u in 0..a.num_joint_actions() {
            let (x, y) = (
                a.reward(JointState(s), JointAction(u)).ok()?,
                b.reward(JointState(s), JointAction(u)).ok()?,
            );
            worst = worst.max((x - y).abs());
        }
    }
    Some(worst)
}
