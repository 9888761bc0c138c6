//! Seeded simulation episodes and the dialogue-level metrics.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::act::{split_label, ActMap, DialogAct};
use crate::agent::DialogueSystem;
use crate::embeddings::fnv1a;
use crate::error::{Error, Result};
use crate::metrics::Prf;
use crate::schema::Schema;
use crate::sim::{judge_success, sample_goal, GoalConfig, SimConfig, UserGoal, UserSimulator};

/// Shown with every report: the return is a convention, not a given.
pub const RETURN_CONVENTION: &str = "return = (success ? +2L : -L) - turns, L = max_turns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Gold user acts go straight to the state tracker.
    #[default]
    Oracle,
    /// The user utterance is parsed by the NLU.
    Full,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub goal: GoalConfig,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub user_acts: Vec<DialogAct>,
    pub predicted_acts: Vec<DialogAct>,
    pub user_utterance: String,
    /// FNV-1a of the JSON state after the turn, as hex.
    pub state_hash: String,
    pub system_action: ActMap,
    pub system_utterance: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub booked: Vec<String>,
    /// Ended by a goodbye before the turn limit.
    pub terminated: bool,
    pub unanswered: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueLog {
    pub episode: usize,
    pub seed: u64,
    pub goal: UserGoal,
    pub turns: Vec<TurnRecord>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: usize,
    pub seed: u64,
    pub success_rate: f64,
    pub average_return: f64,
    pub average_turns: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub book_rate: f64,
    /// No episode had a domain that needed booking; `book_rate` is 1.
    pub no_booking_domains: bool,
    pub termination_rate: f64,
    pub unanswered: usize,
    pub errors: usize,
    pub max_turns: usize,
    pub return_convention: String,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of episode `i`: `splitmix64(master ^ splitmix64(i))`.
pub fn episode_seed(master: u64, i: usize) -> u64 {
    splitmix64(master ^ splitmix64(i as u64))
}

pub fn compute_return(log: &DialogueLog, max_turns: usize) -> f64 {
    let l = max_turns as f64;
    let bonus = if log.outcome.success { 2.0 * l } else { -l };
    bonus - log.turns.len() as f64
}

fn state_hash(state: &impl Serialize) -> String {
    let json = serde_json::to_vec(state).unwrap_or_default();
    format!("{:016x}", fnv1a(&json))
}

fn episode_inner(
    system: &DialogueSystem,
    goal: &UserGoal,
    cfg: &EvalConfig,
    rng: &mut ChaCha8Rng,
    session_seed: u64,
    turns: &mut Vec<TurnRecord>,
) -> Result<bool> {
    let schema = &system.dm.schema;
    let mut sim = UserSimulator::new(goal.clone(), cfg.sim.clone());
    let mut session = system.session(session_seed);
    for _ in 0..cfg.sim.max_turns {
        let ut = sim.step(schema, rng);
        let text = ut.realized.text.clone();
        let predicted = match cfg.mode {
            EvalMode::Oracle => ut.acts.clone(),
            EvalMode::Full => system.understand(&session, &text)?.acts,
        };
        let r = system.respond_acts(&mut session, &predicted, &text);
        turns.push(TurnRecord {
            user_acts: ut.acts,
            predicted_acts: predicted,
            user_utterance: text,
            state_hash: state_hash(&session.state),
            system_action: r.action.clone(),
            system_utterance: r.utterance,
        });
        if ut.done || r.closed {
            return Ok(true);
        }
        sim.observe(&r.action, schema, &system.dm.db, rng);
    }
    Ok(false)
}

/// One episode on a given goal. Errors and panics end the episode as a
/// failure and are recorded in the outcome.
pub fn run_episode(system: &DialogueSystem, goal: UserGoal, cfg: &EvalConfig, seed: u64, episode: usize) -> DialogueLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut turns = Vec::new();
    let res = catch_unwind(AssertUnwindSafe(|| {
        episode_inner(system, &goal, cfg, &mut rng, splitmix64(seed), &mut turns)
    }));
    let (terminated, error) = match res {
        Ok(Ok(t)) => (t, None),
        Ok(Err(e)) => (false, Some(e.to_string())),
        Err(p) => (
            false,
            Some(
                p.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into()),
            ),
        ),
    };
    let j = judge_success(
        &goal,
        turns.iter().map(|t| (t.user_acts.as_slice(), &t.system_action)),
        &system.dm.schema,
        &system.dm.db,
    );
    DialogueLog {
        episode,
        seed,
        goal,
        turns,
        outcome: Outcome {
            success: error.is_none() && j.success,
            booked: j.booked,
            terminated,
            unanswered: j.unanswered,
            error,
        },
    }
}

/// `n` independent episodes; goal and simulation of episode `i` draw
/// from `episode_seed(seed, i)`. Runs in parallel, returns in index order.
pub fn run_episodes(system: &DialogueSystem, n: usize, seed: u64, cfg: &EvalConfig) -> Result<Vec<DialogueLog>> {
    if n == 0 {
        return Err(Error::Param("need at least one episode".into()));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let s = episode_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            match sample_goal(&system.dm.schema, &system.dm.db, &cfg.goal, &mut rng) {
                Ok(goal) => run_episode(system, goal, cfg, s, i),
                Err(e) => DialogueLog {
                    episode: i,
                    seed: s,
                    goal: UserGoal::default(),
                    turns: Vec::new(),
                    outcome: Outcome {
                        error: Some(e.to_string()),
                        ..Outcome::default()
                    },
                },
            }
        })
        .collect())
}

/// Replays fixed goals, e.g. loaded from a goal file.
pub fn run_goals(system: &DialogueSystem, goals: &[UserGoal], seed: u64, cfg: &EvalConfig) -> Vec<DialogueLog> {
    goals
        .par_iter()
        .enumerate()
        .map(|(i, g)| run_episode(system, g.clone(), cfg, episode_seed(seed, i), i))
        .collect()
}

/// `(domain, slot)` pairs the system told the user about, leaving out
/// counts, references, names and echoes of the goal's own constraints.
pub fn informed_pairs(log: &DialogueLog, schema: &Schema) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for t in &log.turns {
        for (label, pairs) in &t.system_action.0 {
            let Ok((d, intent)) = split_label(label) else { continue };
            if intent != "Inform" && intent != "Recommend" {
                continue;
            }
            let d = d.to_lowercase();
            let Ok(ds) = schema.domain(&d) else { continue };
            let echoed = log.goal.domains.get(&d).map(|g| &g.constraints);
            for [slot, _] in pairs {
                let skip = matches!(slot.as_str(), "Choice" | "Ref" | "Name" | "none")
                    || !ds.requestable.contains(slot)
                    || echoed.is_some_and(|c| c.contains_key(slot));
                if !skip {
                    out.insert((d.clone(), slot.clone()));
                }
            }
        }
    }
    out
}

pub fn requested_pairs(goal: &UserGoal) -> BTreeSet<(String, String)> {
    goal.domains
        .iter()
        .flat_map(|(d, g)| g.requests.iter().map(move |s| (d.clone(), s.clone())))
        .collect()
}

pub fn compute_metrics(logs: &[DialogueLog], schema: &Schema, seed: u64, max_turns: usize) -> Result<MetricsReport> {
    if logs.is_empty() {
        return Err(Error::Param("no dialogue logs".into()));
    }
    let n = logs.len() as f64;
    let mut prf = Prf::default();
    let (mut need_book, mut got_book) = (0usize, 0usize);
    for log in logs {
        prf.add(Prf::of_sets(&requested_pairs(&log.goal), &informed_pairs(log, schema)));
        for (d, g) in &log.goal.domains {
            if !g.book.is_empty() {
                need_book += 1;
                if log.outcome.booked.contains(d) {
                    got_book += 1;
                }
            }
        }
    }
    let mean = |f: &dyn Fn(&DialogueLog) -> f64| logs.iter().map(f).sum::<f64>() / n;
    Ok(MetricsReport {
        episodes: logs.len(),
        seed,
        success_rate: mean(&|l| l.outcome.success as u8 as f64),
        average_return: mean(&|l| compute_return(l, max_turns)),
        average_turns: mean(&|l| l.turns.len() as f64),
        precision: prf.precision(),
        recall: prf.recall(),
        f1: prf.f1(),
        book_rate: if need_book == 0 { 1.0 } else { got_book as f64 / need_book as f64 },
        no_booking_domains: need_book == 0,
        termination_rate: mean(&|l| l.outcome.terminated as u8 as f64),
        unanswered: logs.iter().map(|l| l.outcome.unanswered.len()).sum(),
        errors: logs.iter().filter(|l| l.outcome.error.is_some()).count(),
        max_turns,
        return_convention: RETURN_CONVENTION.to_string(),
    })
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.return_convention)?;
        writeln!(f, "# episodes {}  seed {}  max_turns {}", self.episodes, self.seed, self.max_turns)?;
        let rows = [
            ("success rate", format!("{:.4}", self.success_rate)),
            ("average return", format!("{:.2}", self.average_return)),
            ("average turns", format!("{:.2}", self.average_turns)),
            ("precision", format!("{:.4}", self.precision)),
            ("recall", format!("{:.4}", self.recall)),
            ("f1", format!("{:.4}", self.f1)),
            (
                "book rate",
                format!("{:.4}{}", self.book_rate, if self.no_booking_domains { " (no booking domains)" } else { "" }),
            ),
            ("terminated", format!("{:.4}", self.termination_rate)),
            ("unanswered", self.unanswered.to_string()),
            ("errors", self.errors.to_string()),
        ];
        for (k, v) in rows {
            writeln!(f, "{k:<16}{v:>12}")?;
        }
        Ok(())
    }
}

pub fn save_logs(path: impl AsRef<Path>, logs: &[DialogueLog]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in logs {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_logs(path: impl AsRef<Path>) -> Result<Vec<DialogueLog>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
