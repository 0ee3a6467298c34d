//! Exact ε-optimal planning for transition-independent Dec-MDPs by search
//! over occupancies with decentralized Markov decision rules.
//!
//! The crate is organized around a [`model::FactoredDecMdp`], the
//! [`occupancy`] dynamics it induces, the bound store of [`heuristics`] and
//! the search driver in [`mps`]. Greedy decision rules are selected either by
//! enumeration or by the constraint optimization of [`cop`]. [`oracle`]
//! holds brute-force references used to check the planner, [`bench`] the
//! problem generators and [`io`] the text formats used by the `mps` binary.

pub mod bench;
pub mod cli;
pub mod cop;
pub mod error;
pub mod heuristics;
pub mod io;
pub mod model;
pub mod mps;
pub mod occupancy;
pub mod oracle;
pub mod policy;

pub use error::{MpsError, Result};
pub use model::{FactoredDecMdp, LocalAgentModel};
pub use mps::{solve, BackupMode, SolveConfig, Solution};
pub use occupancy::OccupancyDistribution;
pub use policy::{DecisionRule, MarkovPolicy};

#[cfg(test)]
pub(crate) mod testutil {
    use rand::Rng;

    use crate::bench::{gen_flip_stay, gen_random_instance, RandomInstance};
    use crate::model::FactoredDecMdp;
    use crate::policy::RuleSpace;

    pub fn toy_flip_stay(horizon: usize) -> FactoredDecMdp {
        gen_flip_stay(horizon)
    }

    pub fn random_model(rng: &mut impl Rng, space: &RuleSpace, horizon: usize) -> FactoredDecMdp {
        gen_random_instance(
            rng,
            &RandomInstance {
                space: space.clone(),
                horizon,
                product_start: false,
                reward_density: 0.6,
            },
        )
    }
}
