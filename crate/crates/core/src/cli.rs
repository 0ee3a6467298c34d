//! Command-line front end of the `mps` binary.
//!
//! Exit codes: 0 on success (a converged solve), 2 when a solve stops
//! before closing the gap, 1 on any error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    gen_flip_stay, gen_meeting_grid, gen_random_team, gen_recycling, MeetingGridParams, RecyclingParams,
};
use crate::error::{MpsError, Result};
use crate::io::{parse_problem, serialize_problem, stats_csv, trace_csv, write_policy, PolicyMeta, StatsRow};
use crate::model::FactoredDecMdp;
use crate::mps::{solve, BackupMode, SolveConfig};
use crate::oracle::{best_history_with_cap, best_markov_with_cap};
use crate::policy::DEFAULT_ENUMERATION_CAP;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mps", version, about = "ε-optimal planning for transition-independent Dec-MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file or a built-in benchmark.
    Solve(SolveArgs),
    /// Check a problem file.
    Validate {
        path: PathBuf,
    },
    /// Brute-force optimum of a tiny instance.
    Oracle(OracleArgs),
    /// Write a built-in benchmark as a problem file.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchName {
    Recycling,
    MeetingGrid,
    RandomTeam,
    FlipStay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Cop,
}

impl From<ModeArg> for BackupMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exhaustive => BackupMode::Exhaustive,
            ModeArg::Cop => BackupMode::Cop,
        }
    }
}

/// Where the model comes from.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Problem file.
    #[arg(long, conflicts_with = "bench", required_unless_present = "bench")]
    pub problem: Option<PathBuf>,
    /// Built-in benchmark.
    #[arg(long, value_enum)]
    pub bench: Option<BenchName>,
    /// Planning horizon; overrides the file's horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Grid side (meeting-grid).
    #[arg(long, default_value_t = 3)]
    pub side: usize,
    /// Probability that a move fails (meeting-grid).
    #[arg(long, default_value_t = 0.1)]
    pub slip: f64,
    /// Team size (random-team).
    #[arg(long, default_value_t = 2)]
    pub agents: usize,
    /// Interaction class 0..=3 (random-team).
    #[arg(long, default_value_t = 0)]
    pub class: usize,
    /// Seed of random benchmarks and of the initial policy.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Source {
    fn label(&self) -> String {
        match (&self.problem, self.bench) {
            (Some(p), _) => p.display().to_string(),
            (None, Some(BenchName::MeetingGrid)) => format!("meeting-grid-{}x{}", self.side, self.side),
            (None, Some(BenchName::RandomTeam)) => {
                format!("random-team-n{}-k{}-s{}", self.agents, self.class, self.seed)
            }
            (None, Some(BenchName::Recycling)) => "recycling".into(),
            (None, Some(BenchName::FlipStay)) => "flip-stay".into(),
            (None, None) => "?".into(),
        }
    }

    fn load(&self) -> Result<FactoredDecMdp> {
        let model = match (&self.problem, self.bench) {
            (Some(path), _) => {
                let text = read(path)?;
                let model = parse_problem(&text).map_err(|e| with_path(path, e))?;
                match self.horizon {
                    Some(t) => model.with_horizon(t),
                    None => model,
                }
            }
            (None, Some(bench)) => {
                let horizon = self.horizon.unwrap_or(match bench {
                    BenchName::FlipStay => 2,
                    _ => 10,
                });
                match bench {
                    BenchName::Recycling => gen_recycling(&RecyclingParams {
                        horizon,
                        ..RecyclingParams::default()
                    }),
                    BenchName::MeetingGrid => {
                        if self.side < 2 || !(0.0..1.0).contains(&self.slip) {
                            return Err(MpsError::Shape("meeting-grid needs --side >= 2 and --slip in [0, 1)".into()));
                        }
                        gen_meeting_grid(&MeetingGridParams::new(self.side, self.slip, horizon))
                    }
                    BenchName::RandomTeam => {
                        if self.agents < 2 || self.class > 3 {
                            return Err(MpsError::Shape("random-team needs --agents >= 2 and --class in 0..=3".into()));
                        }
                        gen_random_team(
                            self.agents,
                            self.class,
                            self.seed,
                            &RecyclingParams {
                                horizon,
                                ..RecyclingParams::default()
                            },
                        )
                    }
                    BenchName::FlipStay => gen_flip_stay(horizon),
                }
            }
            (None, None) => return Err(MpsError::Shape("either --problem or --bench is required".into())),
        };
        model.validate().into_result()?;
        Ok(model)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Cop)]
    pub mode: ModeArg,
    /// Maximum number of trials.
    #[arg(long, default_value_t = 1_000_000)]
    pub trial_cap: u64,
    /// Backups per level per visit before returning to the parent.
    #[arg(long)]
    pub inner_cap: Option<u64>,
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
    /// CSV of per-trial bounds.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// CSV row of final metrics.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: Source,
    /// Also enumerate history-dependent policies.
    #[arg(long)]
    pub history: bool,
    /// Enumeration cap.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: Source,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| MpsError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| MpsError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn with_path(path: &Path, e: MpsError) -> MpsError {
    match e {
        MpsError::Parse { line, column, message } => MpsError::Parse {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn run_solve(args: &SolveArgs) -> Result<i32> {
    let model = args.source.load()?;
    let config = SolveConfig {
        epsilon: args.epsilon,
        mode: args.mode.into(),
        trial_cap: args.trial_cap,
        seed: args.source.seed,
        inner_cap: args.inner_cap,
        ..SolveConfig::default()
    };
    let sol = solve(&model, &config)?;
    println!(
        "value {:.2}  lower {}  upper {}  gap {:.3e}",
        sol.lower, sol.lower, sol.upper, sol.gap
    );
    println!(
        "trials {}  backups {}  time {:.3}s  {}",
        sol.trials,
        sol.backups,
        sol.wall_time.as_secs_f64(),
        if sol.converged { "converged" } else { "NOT converged" }
    );
    if let Some(path) = &args.policy_out {
        let meta = PolicyMeta {
            lower: sol.lower,
            upper: sol.upper,
            epsilon: args.epsilon,
            seed: args.source.seed,
        };
        write(path, &write_policy(&model, &sol.policy, &meta))?;
    }
    if let Some(path) = &args.trace_out {
        write(path, &trace_csv(&sol.trace))?;
    }
    if let Some(path) = &args.stats_out {
        let row = StatsRow {
            problem: args.source.label(),
            n_agents: model.num_agents(),
            horizon: model.horizon(),
            epsilon: args.epsilon,
            mode: config.mode.name().into(),
            lower: sol.lower,
            upper: sol.upper,
            gap: sol.gap,
            trials: sol.trials,
            backups: sol.backups,
            wall_seconds: sol.wall_time.as_secs_f64(),
        };
        write(path, &stats_csv(&row))?;
    }
    Ok(if sol.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn run_oracle(args: &OracleArgs) -> Result<i32> {
    let model = args.source.load()?;
    let (value, _) = best_markov_with_cap(&model, args.cap)?;
    println!("markov {value}");
    if args.history {
        let (value, _) = best_history_with_cap(&model, args.cap)?;
        println!("history {value}");
    }
    Ok(EXIT_OK)
}

fn run_command(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Validate { path } => {
            let model = parse_problem(&read(path)?).map_err(|e| with_path(path, e))?;
            println!(
                "ok: {} agents, {} joint states, {} joint actions, horizon {}",
                model.num_agents(),
                model.num_states(),
                model.num_joint_actions(),
                model.horizon()
            );
            Ok(EXIT_OK)
        }
        Command::Oracle(args) => run_oracle(args),
        Command::Gen(args) => {
            let text = serialize_problem(&args.source.load()?);
            match &args.out {
                Some(path) => write(path, &text)?,
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Diagnostics go to standard error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_command(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
