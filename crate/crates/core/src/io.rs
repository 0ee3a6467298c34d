//! Text formats: problem files, policy files and the CSV outputs of the CLI.
//!
//! Problem file, one directive per line, `#` starts a comment:
//!
//! ```text
//! agents 2
//! obs z0 z1            # agent 0
//! actions flip stay
//! t z0 flip z1 1.0     # p(z' | z, a); unlisted triples are 0
//! ...
//! obs z0 z1            # agent 1
//! actions flip stay
//! t ...
//! reward z0 z0 flip flip 1.0   # observations then actions, one per agent
//! start 0 1 0 0                # over joint states, agent 0 most significant
//! horizon 2
//! ```
//!
//! `start-factored` followed by one line of probabilities per agent may
//! replace `start`.
//!
//! Floats are written with 17 significant digits so every table survives a
//! round trip bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{MpsError, Result};
use crate::model::{FactoredDecMdp, LocalAgentModel, MixedRadix, PROB_TOL};
use crate::mps::TraceRow;
use crate::policy::{DecisionRule, MarkovPolicy};

pub const POLICY_HEADER: &str = "mps-policy v1";

/// Lossless float formatting.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

#[derive(Debug)]
struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
}

impl Line<'_> {
    fn end_column(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.column + t.text.chars().count())
    }
}

fn err(line: usize, column: usize, message: impl Into<String>) -> MpsError {
    MpsError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in content.char_indices().chain(std::iter::once((content.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push(Token {
                        text: &content[s..pos],
                        column: content[..s].chars().count() + 1,
                    });
                }
            } else if start.is_none() {
                start = Some(pos);
            }
        }
        if !tokens.is_empty() {
            lines.push(Line { number: k + 1, tokens });
        }
    }
    lines
}

fn parse_real(line: usize, tok: Token<'_>) -> Result<f64> {
    let ok_chars = tok
        .text
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    match tok.text.parse::<f64>() {
        Ok(v) if ok_chars && v.is_finite() => Ok(v),
        _ => Err(err(line, tok.column, format!("expected a decimal number, found `{}`", tok.text))),
    }
}

fn parse_count(line: usize, tok: Token<'_>) -> Result<usize> {
    tok.text
        .parse::<usize>()
        .map_err(|_| err(line, tok.column, format!("expected a non-negative integer, found `{}`", tok.text)))
}

fn probability(line: usize, tok: Token<'_>) -> Result<f64> {
    let p = parse_real(line, tok)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(err(line, tok.column, format!("probability {p} outside [0, 1]")));
    }
    Ok(p)
}

fn lookup(line: usize, tok: Token<'_>, ids: &[String], kind: &str, agent: usize) -> Result<usize> {
    ids.iter()
        .position(|id| id == tok.text)
        .ok_or_else(|| err(line, tok.column, format!("unknown {kind} `{}` for agent {agent}", tok.text)))
}

fn identifiers(line: &Line<'_>, kind: &str) -> Result<Vec<String>> {
    let ids: Vec<String> = line.tokens[1..].iter().map(|t| t.text.to_string()).collect();
    if ids.is_empty() {
        return Err(err(line.number, line.end_column(), format!("{kind} list is empty")));
    }
    for (k, t) in line.tokens[1..].iter().enumerate() {
        if ids[..k].contains(&ids[k]) {
            return Err(err(line.number, t.column, format!("duplicate {kind} `{}`", t.text)));
        }
    }
    Ok(ids)
}

struct Cursor<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn peek_keyword(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|l| l.tokens[0].text)
    }

    fn next(&mut self, expected: &str) -> Result<&Line<'a>> {
        match self.lines.get(self.pos) {
            Some(l) => {
                self.pos += 1;
                Ok(l)
            }
            None => Err(err(self.last_line + 1, 1, format!("unexpected end of file, expected `{expected}`"))),
        }
    }

    fn expect(&mut self, keyword: &str) -> Result<&Line<'a>> {
        let line = self.next(keyword)?;
        let head = line.tokens[0];
        if head.text != keyword {
            return Err(unexpected(line.number, head, keyword));
        }
        Ok(line)
    }
}

const KEYWORDS: [&str; 8] = ["agents", "obs", "actions", "t", "reward", "start", "start-factored", "horizon"];

fn unexpected(line: usize, head: Token<'_>, expected: &str) -> MpsError {
    if KEYWORDS.contains(&head.text) {
        err(line, head.column, format!("`{}` is out of order here, expected `{expected}`", head.text))
    } else {
        err(line, head.column, format!("unknown keyword `{}`, expected `{expected}`", head.text))
    }
}

fn arity(line: &Line<'_>, n: usize) -> Result<()> {
    if line.tokens.len() != n {
        let column = if line.tokens.len() > n {
            line.tokens[n].column
        } else {
            line.end_column()
        };
        return Err(err(
            line.number,
            column,
            format!("`{}` takes {} arguments, found {}", line.tokens[0].text, n - 1, line.tokens.len() - 1),
        ));
    }
    Ok(())
}

/// Parses a problem file. Syntax and semantic errors name the line and
/// column of the first problem found.
pub fn parse_problem(text: &str) -> Result<FactoredDecMdp> {
    let lines = lex(text);
    let last_line = text.lines().count();
    let mut cur = Cursor { lines, pos: 0, last_line };

    let head = cur.expect("agents")?;
    arity(head, 2)?;
    let n = parse_count(head.number, head.tokens[1])?;
    if n < 2 {
        return Err(err(head.number, head.tokens[1].column, format!("need at least 2 agents, got {n}")));
    }

    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let obs_line = cur.expect("obs")?;
        let obs = identifiers(obs_line, "observation")?;
        let obs_at = obs_line.number;
        let act_line = cur.expect("actions")?;
        let acts = identifiers(act_line, "action")?;
        let (nz, na) = (obs.len(), acts.len());
        let mut table = vec![0.0; nz * na * nz];
        let mut seen = vec![false; nz * na * nz];
        // first line mentioning each (z, a) row
        let mut row_line = vec![None; nz * na];
        while cur.peek_keyword() == Some("t") {
            let line = cur.next("t")?;
            arity(line, 5)?;
            let t = &line.tokens;
            let z = lookup(line.number, t[1], &obs, "observation", i)?;
            let a = lookup(line.number, t[2], &acts, "action", i)?;
            let z2 = lookup(line.number, t[3], &obs, "observation", i)?;
            let p = probability(line.number, t[4])?;
            let k = (z * na + a) * nz + z2;
            if seen[k] {
                return Err(err(line.number, t[0].column, format!("duplicate transition ({}, {}, {})", t[1].text, t[2].text, t[3].text)));
            }
            seen[k] = true;
            table[k] = p;
            row_line[z * na + a].get_or_insert(line.number);
        }
        for z in 0..nz {
            for a in 0..na {
                let sum: f64 = table[(z * na + a) * nz..][..nz].iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    let line = row_line[z * na + a].unwrap_or(obs_at);
                    return Err(err(
                        line,
                        1,
                        format!("agent {i}: transition row ({}, {}) sums to {sum}, expected 1", obs[z], acts[a]),
                    ));
                }
            }
        }
        agents.push(LocalAgentModel::new(obs, acts, table)?);
    }

    let states = MixedRadix::new(agents.iter().map(|a| a.num_observations()).collect());
    let actions = MixedRadix::new(agents.iter().map(|a| a.num_actions()).collect());
    let mut reward: HashMap<(usize, usize), f64> = HashMap::new();
    let mut reward_order = Vec::new();
    while cur.peek_keyword() == Some("reward") {
        let line = cur.next("reward")?;
        arity(line, 2 * n + 2)?;
        let t = &line.tokens;
        let mut zs = Vec::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        for (i, agent) in agents.iter().enumerate() {
            zs.push(lookup(line.number, t[1 + i], agent.observations(), "observation", i)?);
            xs.push(lookup(line.number, t[1 + n + i], agent.actions(), "action", i)?);
        }
        let v = parse_real(line.number, t[2 * n + 1])?;
        let key = (states.encode(&zs), actions.encode(&xs));
        if reward.insert(key, v).is_some() {
            return Err(err(line.number, t[0].column, "duplicate reward entry"));
        }
        reward_order.push(key);
    }

    let line = cur.next("start")?;
    let start_at = line.number;
    let initial = match line.tokens[0].text {
        "start" => {
            arity(line, states.size() + 1)?;
            line.tokens[1..]
                .iter()
                .map(|&t| probability(start_at, t))
                .collect::<Result<Vec<f64>>>()?
        }
        "start-factored" => {
            arity(line, 1)?;
            let mut marginals = Vec::with_capacity(n);
            for agent in &agents {
                let line = cur.next("a start-factored row")?;
                let nz = agent.num_observations();
                if line.tokens.len() != nz {
                    return Err(err(
                        line.number,
                        line.end_column(),
                        format!("expected {nz} probabilities, found {}", line.tokens.len()),
                    ));
                }
                let row = line
                    .tokens
                    .iter()
                    .map(|&t| probability(line.number, t))
                    .collect::<Result<Vec<f64>>>()?;
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(err(line.number, 1, format!("marginal sums to {sum}, expected 1")));
                }
                marginals.push(row);
            }
            (0..states.size())
                .map(|s| marginals.iter().enumerate().map(|(i, m)| m[states.digit(s, i)]).product())
                .collect()
        }
        _ => return Err(unexpected(line.number, line.tokens[0], "start")),
    };
    let sum: f64 = initial.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(err(start_at, 1, format!("initial occupancy sums to {sum}, expected 1")));
    }

    let line = cur.expect("horizon")?;
    arity(line, 2)?;
    let horizon = parse_count(line.number, line.tokens[1])?;
    if horizon == 0 {
        return Err(err(line.number, line.tokens[1].column, "horizon must be positive"));
    }
    if let Some(extra) = cur.lines.get(cur.pos) {
        return Err(unexpected(extra.number, extra.tokens[0], "end of file"));
    }

    let model = FactoredDecMdp::new(agents, reward_order.into_iter().map(|k| (k, reward[&k])), horizon, initial)?;
    let report = model.validate();
    if !report.is_valid() {
        return Err(err(last_line.max(1), 1, report.to_string().trim_end().to_string()));
    }
    Ok(model)
}

/// Canonical text of a model; zero entries are omitted.
pub fn serialize_problem(model: &FactoredDecMdp) -> String {
    let mut out = String::new();
    let n = model.num_agents();
    writeln!(out, "agents {n}").unwrap();
    for (i, agent) in model.agents().iter().enumerate() {
        writeln!(out, "# agent {i}").unwrap();
        writeln!(out, "obs {}", agent.observations().join(" ")).unwrap();
        writeln!(out, "actions {}", agent.actions().join(" ")).unwrap();
        for z in 0..agent.num_observations() {
            for a in 0..agent.num_actions() {
                for (z2, &p) in agent.row(z, a).iter().enumerate() {
                    if p != 0.0 {
                        writeln!(
                            out,
                            "t {} {} {} {}",
                            agent.observations()[z],
                            agent.actions()[a],
                            agent.observations()[z2],
                            fmt_f64(p)
                        )
                        .unwrap();
                    }
                }
            }
        }
    }
    for (s, a, v) in model.reward_entries() {
        let zs = model.state_codec().decode(s);
        let xs = model.action_codec().decode(a);
        out.push_str("reward");
        for (i, &z) in zs.iter().enumerate() {
            write!(out, " {}", model.agent(i).observations()[z]).unwrap();
        }
        for (i, &x) in xs.iter().enumerate() {
            write!(out, " {}", model.agent(i).actions()[x]).unwrap();
        }
        writeln!(out, " {}", fmt_f64(v)).unwrap();
    }
    out.push_str("start");
    for &p in model.initial() {
        write!(out, " {}", fmt_f64(p)).unwrap();
    }
    out.push('\n');
    writeln!(out, "horizon {}", model.horizon()).unwrap();
    out
}

/// Metadata carried by a policy file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyMeta {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub seed: u64,
}

/// One line per `(τ, agent, observation)`, stages outermost.
pub fn write_policy(model: &FactoredDecMdp, policy: &MarkovPolicy, meta: &PolicyMeta) -> String {
    let mut out = String::new();
    writeln!(out, "{POLICY_HEADER}").unwrap();
    writeln!(out, "lower {}", fmt_f64(meta.lower)).unwrap();
    writeln!(out, "upper {}", fmt_f64(meta.upper)).unwrap();
    writeln!(out, "epsilon {}", fmt_f64(meta.epsilon)).unwrap();
    writeln!(out, "seed {}", meta.seed).unwrap();
    for (tau, rule) in policy.rules().iter().enumerate() {
        for (i, agent) in model.agents().iter().enumerate() {
            for z in 0..agent.num_observations() {
                writeln!(
                    out,
                    "{tau} {i} {} {}",
                    agent.observations()[z],
                    agent.actions()[rule.action(i, z)]
                )
                .unwrap();
            }
        }
    }
    out
}

/// Parses a policy file against `model`; the policy must be total.
pub fn parse_policy(text: &str, model: &FactoredDecMdp) -> Result<(PolicyMeta, MarkovPolicy)> {
    let lines = lex(text);
    let last_line = text.lines().count();
    let mut it = lines.iter();
    let head = it
        .next()
        .ok_or_else(|| err(1, 1, format!("empty policy file, expected `{POLICY_HEADER}`")))?;
    let header: Vec<&str> = head.tokens.iter().map(|t| t.text).collect();
    if header.join(" ") != POLICY_HEADER {
        return Err(err(head.number, 1, format!("expected header `{POLICY_HEADER}`")));
    }
    let mut meta = [None::<f64>; 3];
    let mut seed = None;
    let horizon = model.horizon();
    let mut slots: Vec<Vec<Vec<Option<usize>>>> = (0..horizon)
        .map(|_| model.agents().iter().map(|a| vec![None; a.num_observations()]).collect())
        .collect();
    for line in it {
        let t = &line.tokens;
        let slot = match t[0].text {
            "lower" => Some(0),
            "upper" => Some(1),
            "epsilon" => Some(2),
            _ => None,
        };
        if let Some(k) = slot {
            arity(line, 2)?;
            meta[k] = Some(parse_real(line.number, t[1])?);
            continue;
        }
        if t[0].text == "seed" {
            arity(line, 2)?;
            seed = Some(t[1].text.parse::<u64>().map_err(|_| err(line.number, t[1].column, "expected an unsigned seed"))?);
            continue;
        }
        arity(line, 4)?;
        let tau = parse_count(line.number, t[0])?;
        if tau >= horizon {
            return Err(err(line.number, t[0].column, format!("stage {tau} is beyond the horizon {horizon}")));
        }
        let i = parse_count(line.number, t[1])?;
        if i >= model.num_agents() {
            return Err(err(line.number, t[1].column, format!("agent {i} does not exist")));
        }
        let agent = model.agent(i);
        let z = lookup(line.number, t[2], agent.observations(), "observation", i)?;
        let a = lookup(line.number, t[3], agent.actions(), "action", i)?;
        let cell = &mut slots[tau][i][z];
        if cell.is_some() {
            return Err(err(line.number, t[0].column, format!("duplicate entry for stage {tau}, agent {i}, observation {}", t[2].text)));
        }
        *cell = Some(a);
    }
    let names = ["lower", "upper", "epsilon"];
    let mut values = [0.0; 3];
    for k in 0..3 {
        values[k] = meta[k].ok_or_else(|| err(last_line + 1, 1, format!("missing `{}` line", names[k])))?;
    }
    let seed = seed.ok_or_else(|| err(last_line + 1, 1, "missing `seed` line"))?;
    let mut rules = Vec::with_capacity(horizon);
    for (tau, stage) in slots.into_iter().enumerate() {
        let mut actions = Vec::with_capacity(stage.len());
        for (i, agent_slots) in stage.into_iter().enumerate() {
            let mut acts = Vec::with_capacity(agent_slots.len());
            for (z, a) in agent_slots.into_iter().enumerate() {
                acts.push(a.ok_or_else(|| {
                    err(
                        last_line + 1,
                        1,
                        format!("no action for stage {tau}, agent {i}, observation {}", model.agent(i).observations()[z]),
                    )
                })?);
            }
            actions.push(acts);
        }
        rules.push(DecisionRule::new(actions));
    }
    Ok((
        PolicyMeta {
            lower: values[0],
            upper: values[1],
            epsilon: values[2],
            seed,
        },
        MarkovPolicy::new(rules),
    ))
}

pub const STATS_HEADER: &str = "problem,n_agents,horizon,epsilon,mode,lower,upper,gap,trials,backups,wall_seconds";
pub const TRACE_HEADER: &str = "trial,lower,upper,seconds";

/// One row of the stats CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub problem: String,
    pub n_agents: usize,
    pub horizon: usize,
    pub epsilon: f64,
    pub mode: String,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub trials: u64,
    pub backups: u64,
    pub wall_seconds: f64,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Header plus one data row.
pub fn stats_csv(row: &StatsRow) -> String {
    format!(
        "{STATS_HEADER}\n{},{},{},{},{},{},{},{},{},{},{:.6}\n",
        csv_field(&row.problem),
        row.n_agents,
        row.horizon,
        fmt_f64(row.epsilon),
        csv_field(&row.mode),
        fmt_f64(row.lower),
        fmt_f64(row.upper),
        fmt_f64(row.gap),
        row.trials,
        row.backups,
        row.wall_seconds
    )
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{},{:.6}", r.trial, fmt_f64(r.lower), fmt_f64(r.upper), r.seconds).unwrap();
    }
    out
}
