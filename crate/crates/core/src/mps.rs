//! Markov policy search: trial-based heuristic search over occupancies.
//!
//! The Dec-MDP is searched as a deterministic MDP whose states are
//! occupancies and whose actions are decentralized decision rules. A trial
//! backs up the root, descends into the occupancy reached by the greedy rule,
//! and at every level keeps backing up and descending until the local gap
//! between the upper and lower bound is at most ε. On the way back up the
//! stored q̄ of the greedy rule is refreshed from the child's upper bound and
//! the child's best suffix policy is offered as a lower bound. After each
//! trial the best full policy found from the root replaces the incumbent if
//! it is strictly better.

use std::time::{Duration, Instant};

use crate::cop::{build_backup_cop, exhaustive_backup, solve_cop};
use crate::error::{MpsError, Result};
use crate::heuristics::{build_mdp_heuristic, BoundStore, DEFAULT_ACTION_CAP, DEFAULT_STORE_CAP};
use crate::model::FactoredDecMdp;
use crate::occupancy::{advance, advance_factored, expected_reward, FactoredOccupancy, OccupancyDistribution};
use crate::policy::{
    random_policy, rule_count, zero_policy, DecisionRule, MarkovPolicy, DEFAULT_ENUMERATION_CAP,
};

/// How the greedy rule is selected at an occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackupMode {
    Exhaustive,
    Cop,
}

impl BackupMode {
    pub fn name(self) -> &'static str {
        match self {
            BackupMode::Exhaustive => "exhaustive",
            BackupMode::Cop => "cop",
        }
    }
}

impl std::str::FromStr for BackupMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exhaustive" | "exh" => Ok(BackupMode::Exhaustive),
            "cop" => Ok(BackupMode::Cop),
            other => Err(format!("unknown backup mode `{other}` (expected exhaustive or cop)")),
        }
    }
}

/// Initial incumbent policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerInit {
    /// Uniformly random actions drawn from the configured seed.
    Random,
    /// Action 0 everywhere.
    ZeroActions,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub epsilon: f64,
    pub mode: BackupMode,
    pub trial_cap: u64,
    pub seed: u64,
    pub lower_init: LowerInit,
    pub enumeration_cap: u64,
    /// Backups per level per visit; `None` means the rule count in
    /// exhaustive mode and 10^4 in COP mode.
    pub inner_cap: Option<u64>,
    pub action_cap: u64,
    pub store_cap: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            epsilon: 1e-4,
            mode: BackupMode::Cop,
            trial_cap: 1_000_000,
            seed: 0,
            lower_init: LowerInit::Random,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            inner_cap: None,
            action_cap: DEFAULT_ACTION_CAP,
            store_cap: DEFAULT_STORE_CAP,
        }
    }
}

/// Bounds at the end of a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub trial: u64,
    pub lower: f64,
    pub upper: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub policy: MarkovPolicy,
    /// Exact value of `policy` at the initial occupancy.
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub converged: bool,
    pub trials: u64,
    pub backups: u64,
    pub wall_time: Duration,
    pub trace: Vec<TraceRow>,
}

/// One level of a trial's descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTrace {
    pub rule: DecisionRule,
    pub gap_before: f64,
    pub gap_after: f64,
}

/// Greedy path of a trial with the gap at each level on entry and exit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialTrace {
    pub levels: Vec<LevelTrace>,
}

impl TrialTrace {
    pub fn path(&self) -> impl Iterator<Item = &DecisionRule> {
        self.levels.iter().map(|l| &l.rule)
    }
}

/// Search state: the joint occupancy and, when the start factorizes, the
/// per-agent marginals that generate it.
#[derive(Debug, Clone)]
struct SearchNode {
    joint: OccupancyDistribution,
    factored: Option<FactoredOccupancy>,
}

impl SearchNode {
    fn child(&self, model: &FactoredDecMdp, rule: &DecisionRule) -> Result<SearchNode> {
        match &self.factored {
            Some(f) => {
                let next = advance_factored(model, f, rule)?;
                Ok(SearchNode {
                    joint: next.join(model),
                    factored: Some(next),
                })
            }
            None => Ok(SearchNode {
                joint: advance(model, &self.joint, rule)?,
                factored: None,
            }),
        }
    }
}

/// Incremental driver; [`solve`] runs it to convergence.
pub struct Solver<'m> {
    model: &'m FactoredDecMdp,
    config: SolveConfig,
    store: BoundStore,
    root: SearchNode,
    root_backup: Option<(DecisionRule, f64)>,
    inner_cap: u64,
    backups: u64,
    hit_inner_cap: bool,
}

impl<'m> Solver<'m> {
    pub fn new(model: &'m FactoredDecMdp, config: SolveConfig) -> Result<Self> {
        if !(config.epsilon > 0.0) {
            return Err(MpsError::Shape(format!("epsilon must be positive, got {}", config.epsilon)));
        }
        model.validate().into_result()?;
        let count = rule_count(model);
        if config.mode == BackupMode::Exhaustive && (count.saturated || count.count > config.enumeration_cap) {
            return Err(MpsError::Capacity {
                what: "exhaustive backup",
                needed: count.count,
                cap: config.enumeration_cap,
                hint: "use the constraint-optimization backup (--mode cop)",
            });
        }
        let inner_cap = config.inner_cap.unwrap_or(match config.mode {
            BackupMode::Exhaustive => count.count,
            BackupMode::Cop => 10_000,
        });
        let mdp = build_mdp_heuristic(model, config.action_cap)?;
        let incumbent = match config.lower_init {
            LowerInit::Random => random_policy(model, config.seed),
            LowerInit::ZeroActions => zero_policy(model),
        };
        let store = BoundStore::new(model, mdp, incumbent, config.store_cap)?;
        let joint = OccupancyDistribution::initial(model);
        let factored = FactoredOccupancy::factorize(model, &joint);
        let joint = match &factored {
            Some(f) => f.join(model),
            None => joint,
        };
        Ok(Solver {
            model,
            config,
            store,
            root: SearchNode { joint, factored },
            root_backup: None,
            inner_cap,
            backups: 0,
            hit_inner_cap: false,
        })
    }

    pub fn store(&self) -> &BoundStore {
        &self.store
    }

    pub fn config(&self) -> &SolveConfig {
        &self.config
    }

    /// Exact value of the incumbent at the initial occupancy.
    pub fn lower(&self) -> f64 {
        self.store.incumbent_value()
    }

    /// Upper bound at the initial occupancy.
    pub fn upper(&self) -> f64 {
        self.store.ub_value(&self.root.joint)
    }

    pub fn gap(&self) -> f64 {
        self.upper() - self.lower()
    }

    pub fn backups(&self) -> u64 {
        self.backups
    }

    /// Whether some level stopped at its backup cap before closing its gap.
    pub fn hit_inner_cap(&self) -> bool {
        self.hit_inner_cap
    }

    fn backup(&mut self, eta: &OccupancyDistribution) -> Result<(DecisionRule, f64)> {
        self.backups += 1;
        let (rule, value) = match self.config.mode {
            BackupMode::Exhaustive => exhaustive_backup(self.model, &self.store, eta, self.config.enumeration_cap)?,
            BackupMode::Cop => {
                let sol = solve_cop(&build_backup_cop(self.model, &self.store, eta)?);
                (sol.assignment, sol.objective)
            }
        };
        self.store.record_bound(eta, value);
        Ok((rule, value))
    }

    fn local_gap(&self, eta: &OccupancyDistribution) -> f64 {
        self.store.ub_value(eta) - self.store.lb_value(eta)
    }

    /// Refreshes q̄ of `rule` at `node` from the child's upper bound and
    /// offers the child's best suffix as a lower bound at `node`.
    fn refresh(&mut self, node: &SearchNode, rule: &DecisionRule, child: &SearchNode) -> Result<()> {
        let reward = expected_reward(self.model, &node.joint, rule);
        let new_q = reward + self.store.ub_value(&child.joint);
        self.store.ub_update(&node.joint, rule, new_q)?;
        let lower = reward + self.store.lb_value(&child.joint);
        let mut suffix = Vec::with_capacity(self.model.horizon() - node.joint.stage());
        suffix.push(rule.clone());
        suffix.extend(self.store.lb_suffix(&child.joint));
        self.store.record_lower(&node.joint, lower, suffix);
        Ok(())
    }

    /// Backs up and descends from `node` until its local gap is at most ε.
    fn visit(&mut self, node: &SearchNode) -> Result<Vec<LevelTrace>> {
        if node.joint.stage() >= self.model.horizon() {
            return Ok(Vec::new());
        }
        let eps = self.config.epsilon;
        let mut gap_before = None;
        let mut below = Vec::new();
        let mut iterations = 0u64;
        let (final_rule, gap_after) = loop {
            let (rule, _) = self.backup(&node.joint)?;
            let gap = self.local_gap(&node.joint);
            gap_before.get_or_insert(gap);
            if gap <= eps {
                break (rule, gap);
            }
            if iterations >= self.inner_cap {
                self.hit_inner_cap = true;
                break (rule, gap);
            }
            iterations += 1;
            let child = node.child(self.model, &rule)?;
            below = self.visit(&child)?;
            self.refresh(node, &rule, &child)?;
            below.insert(
                0,
                LevelTrace {
                    rule,
                    gap_before: 0.0,
                    gap_after: 0.0,
                },
            );
        };
        if below.is_empty() {
            below.push(LevelTrace {
                rule: final_rule,
                gap_before: 0.0,
                gap_after: 0.0,
            });
        }
        below[0].gap_before = gap_before.unwrap_or(0.0);
        below[0].gap_after = gap_after;
        Ok(below)
    }

    fn root_backup(&mut self) -> Result<(DecisionRule, f64)> {
        match self.root_backup.take() {
            Some(b) => Ok(b),
            None => {
                let root = self.root.joint.clone();
                self.backup(&root)
            }
        }
    }

    /// One trial: a backup at the root, a full descent into the greedy
    /// child, the bound refresh at the root and the incumbent update.
    pub fn trial(&mut self) -> Result<TrialTrace> {
        let root = self.root.clone();
        let (rule, _) = self.root_backup()?;
        let gap_before = self.gap();
        if gap_before <= self.config.epsilon || self.model.horizon() == 0 {
            self.root_backup = Some((rule.clone(), self.upper()));
            return Ok(TrialTrace {
                levels: vec![LevelTrace {
                    rule,
                    gap_before,
                    gap_after: gap_before,
                }],
            });
        }
        let child = root.child(self.model, &rule)?;
        let below = self.visit(&child)?;
        self.refresh(&root, &rule, &child)?;
        let candidate = MarkovPolicy::new(self.store.lb_suffix(&root.joint));
        self.store.lb_update(self.model, &candidate)?;
        let refreshed = self.backup(&root.joint)?;
        self.root_backup = Some(refreshed);
        let mut levels = vec![LevelTrace {
            rule,
            gap_before,
            gap_after: self.gap(),
        }];
        levels.extend(below);
        Ok(TrialTrace { levels })
    }

    /// Runs trials until the root gap is at most ε or the trial cap is hit.
    pub fn run(mut self, mut observer: impl FnMut(&TrialReport<'_>, &BoundStore)) -> Result<Solution> {
        let start = Instant::now();
        let mut trials = 0u64;
        let mut trace = Vec::new();
        let eps = self.config.epsilon;
        let mut stalled = false;
        while self.gap() > eps && trials < self.config.trial_cap {
            let before = (self.lower(), self.upper());
            let t = self.trial()?;
            trials += 1;
            let row = TraceRow {
                trial: trials,
                lower: self.lower(),
                upper: self.upper(),
                seconds: start.elapsed().as_secs_f64(),
            };
            trace.push(row);
            observer(
                &TrialReport {
                    row,
                    trace: &t,
                },
                &self.store,
            );
            if (self.lower(), self.upper()) == before && self.root_closed() {
                // the root is closed by its own suffix bound; the incumbent
                // differs from it only by rounding
                stalled = true;
                break;
            }
        }
        let lower = self.lower();
        let upper = self.upper();
        let converged = upper - lower <= eps || (stalled && self.root_closed());
        Ok(Solution {
            policy: self.store.incumbent().clone(),
            lower,
            upper,
            gap: upper - lower,
            converged,
            trials,
            backups: self.backups,
            wall_time: start.elapsed(),
            trace,
        })
    }

    fn root_closed(&self) -> bool {
        self.local_gap(&self.root.joint) <= self.config.epsilon
    }
}

/// What an observer sees after each trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialReport<'a> {
    pub row: TraceRow,
    pub trace: &'a TrialTrace,
}

pub fn solve(model: &FactoredDecMdp, config: &SolveConfig) -> Result<Solution> {
    Solver::new(model, config.clone())?.run(|_, _| {})
}

/// [`solve`] with a callback after every trial, for instrumentation.
pub fn solve_observed(
    model: &FactoredDecMdp,
    config: &SolveConfig,
    observer: impl FnMut(&TrialReport<'_>, &BoundStore),
) -> Result<Solution> {
    Solver::new(model, config.clone())?.run(observer)
}
