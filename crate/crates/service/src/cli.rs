//! The `hceds` command line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hceds::embeddings::ContextualEmbeddingProvider;
use hceds::eval::{compute_metrics, run_episodes, run_goals, save_logs, EvalConfig, EvalMode};
use hceds::hcenlu::{
    checkpoint, examples_from_corpus, nlu_component_metrics, read_corpus, train, write_corpus, AnnotatedDialogue, NluConfig,
    NluScores, TrainConfig,
};
use hceds::metrics::Prf;
use hceds::nlg::{builtin_corpus, mine_templates};
use hceds::sim::{load_goals, save_goals};
use hceds::toy::{context_dependent_slice, generate_toy_corpus, toy_nlu_config, toy_train_config, ToyConfig};
use serde::{Deserialize, Serialize};

use crate::config::{load_pipeline, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "hceds", version, about = "Multi-domain task-oriented dialogue pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an NLU checkpoint on an annotated corpus or the generated toy corpus.
    Train(TrainArgs),
    /// Score a checkpoint on an annotated corpus: intent, tag and overall P/R/F1.
    EvalNlu(EvalNluArgs),
    /// Run seeded user-simulator episodes and print the metrics table.
    Simulate(SimulateArgs),
    /// Mine multi-intent NLG templates from (action, utterance) pairs.
    MineTemplates(MineArgs),
    /// Serve the HTTP chat API.
    Serve(ServeArgs),
    /// Chat with the system in the terminal.
    Chat(ChatArgs),
    /// Convert a `sentence<TAB>position<TAB>floats` dump into a vector store.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML with optional [nlu], [train], [toy] tables and corpus paths.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Annotated JSONL corpus; overrides the config.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Validation corpus for best-epoch selection.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Train on the generated two-domain toy corpus.
    #[arg(long)]
    pub toy: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Dialogue context window (past turns).
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Write the toy corpus splits here as JSONL.
    #[arg(long)]
    pub dump_corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub corpus: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub nlu: Option<NluConfig>,
    pub train: Option<TrainConfig>,
    pub toy: Option<ToyConfig>,
}

#[derive(Debug, Args)]
pub struct EvalNluArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Only turns whose domain can be read off the history alone.
    #[arg(long)]
    pub context_slice: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gold user acts bypass the NLU.
    #[arg(long)]
    pub oracle: bool,
    /// Service-style TOML selecting checkpoint, DB, rules and templates.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Goal domains, comma separated. Full mode defaults to the domains the NLU knows.
    #[arg(long, value_delimiter = ',')]
    pub domains: Vec<String>,
    /// Replay goals from a JSONL file instead of sampling.
    #[arg(long)]
    pub goals: Option<PathBuf>,
    #[arg(long)]
    pub save_goals: Option<PathBuf>,
    /// Write per-episode logs as JSONL.
    #[arg(long)]
    pub logs: Option<PathBuf>,
    #[arg(long)]
    pub max_turns: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// JSONL of {"action": ..., "text": ...}; the bundled corpus if omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print inferred acts and the system action each turn.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::EvalNlu(a) => cmd_eval_nlu(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::MineTemplates(a) => cmd_mine(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Chat(a) => cmd_chat(a, io::stdin().lock(), &mut io::stdout()),
        Command::Ingest(a) => cmd_ingest(a),
    }
}

fn load_train_file(path: Option<&Path>) -> Result<TrainFile> {
    let Some(path) = path else { return Ok(TrainFile::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut f: TrainFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut f.corpus, &mut f.valid, &mut f.embeddings].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(f)
}

/// Without a validation corpus the last tenth of the dialogues is held out.
fn split_valid(mut train: Vec<AnnotatedDialogue>) -> (Vec<AnnotatedDialogue>, Vec<AnnotatedDialogue>) {
    let n = (train.len() / 10).max(1).min(train.len().saturating_sub(1));
    let valid = train.split_off(train.len() - n);
    (train, valid)
}

pub fn cmd_train(a: TrainArgs) -> Result<()> {
    let file = load_train_file(a.config.as_deref())?;
    let corpus = a.corpus.clone().or(file.corpus.clone());
    let toy = if a.toy || (corpus.is_none() && file.toy.is_some()) { Some(file.toy.clone().unwrap_or_default()) } else { None };
    let (train_d, valid_d) = match (&toy, &corpus) {
        (Some(tc), _) => {
            let c = generate_toy_corpus(&hceds::DialogueSystem::default(), tc)?;
            if let Some(dir) = &a.dump_corpus {
                std::fs::create_dir_all(dir)?;
                write_corpus(dir.join("train.jsonl"), &c.train)?;
                write_corpus(dir.join("valid.jsonl"), &c.valid)?;
                write_corpus(dir.join("test.jsonl"), &c.test)?;
            }
            (c.train, c.valid)
        }
        (None, Some(path)) => {
            let d = read_corpus(path).with_context(|| format!("reading {}", path.display()))?;
            match a.valid.clone().or(file.valid.clone()) {
                Some(v) => (d, read_corpus(&v)?),
                None => split_valid(d),
            }
        }
        (None, None) => bail!("no corpus: pass --corpus, --toy or a config with one"),
    };
    let mut nlu = file.nlu.clone().unwrap_or_else(|| if toy.is_some() { toy_nlu_config() } else { NluConfig::default() });
    let mut tc = file.train.clone().unwrap_or_else(|| if toy.is_some() { toy_train_config() } else { TrainConfig::default() });
    if let Some(s) = a.seed {
        tc.seed = s;
    }
    if let Some(e) = a.epochs {
        tc.epochs = e;
    }
    if let Some(w) = a.window {
        nlu.window = w;
    }
    let provider = match a.embeddings.clone().or(file.embeddings.clone()) {
        Some(p) => ContextualEmbeddingProvider::load(p)?,
        None => ContextualEmbeddingProvider::hash_only(nlu.ctx_dim),
    };
    let train_ex = examples_from_corpus(&train_d)?;
    let valid_ex = examples_from_corpus(&valid_d)?;
    println!("training on {} utterances, validating on {}", train_ex.len(), valid_ex.len());
    let t0 = Instant::now();
    let out = train::<f64>(&train_ex, &valid_ex, nlu, &tc, Arc::new(provider))?;
    for r in &out.history {
        println!(
            "epoch {:>3}  loss {:.4}  intent f1 {:.4}  tag f1 {:.4}  overall f1 {:.4}",
            r.epoch,
            r.train_loss,
            r.validation.intent.f1(),
            r.validation.tag.f1(),
            r.validation.overall.f1()
        );
    }
    checkpoint::save(&out.pipeline, &a.out)?;
    println!("best epoch {}; saved {} ({:.1}s)", out.best_epoch, a.out.display(), t0.elapsed().as_secs_f64());
    Ok(())
}

pub fn format_scores(s: &NluScores) -> String {
    let row = |name: &str, p: &Prf| format!("{name:<10}{:>11.4}{:>9.4}{:>9.4}\n", p.precision(), p.recall(), p.f1());
    let mut out = format!("{:<10}{:>11}{:>9}{:>9}\n", "", "precision", "recall", "f1");
    out += &row("intent", &s.intent);
    out += &row("tag", &s.tag);
    out += &row("overall", &s.overall);
    out += &format!("biox repairs {}\n", s.repairs);
    out
}

pub fn cmd_eval_nlu(a: EvalNluArgs) -> Result<()> {
    let p = load_pipeline(&a.checkpoint, a.embeddings.as_deref(), a.window, None)?;
    let dialogues = read_corpus(&a.test).with_context(|| format!("reading {}", a.test.display()))?;
    let examples = if a.context_slice { context_dependent_slice(&dialogues)? } else { examples_from_corpus(&dialogues)? };
    let s = nlu_component_metrics(&p, &examples)?;
    println!("# {} utterances", examples.len());
    print!("{}", format_scores(&s));
    Ok(())
}

pub fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = ServiceConfig::load_or_default(a.config.as_deref())?;
    if a.checkpoint.is_some() {
        cfg.checkpoint = a.checkpoint.clone();
    }
    if a.oracle {
        cfg.checkpoint = None;
    }
    let system = cfg.build_system()?;
    let mut ec = EvalConfig {
        mode: if a.oracle { EvalMode::Oracle } else { EvalMode::Full },
        ..EvalConfig::default()
    };
    if let Some(m) = a.max_turns.or(a.config.as_ref().map(|_| cfg.max_turns)) {
        ec.sim.max_turns = m;
    }
    if ec.mode == EvalMode::Full {
        let Some(nlu) = &system.nlu else { bail!("full mode needs a checkpoint; pass --checkpoint or --oracle") };
        if a.domains.is_empty() {
            let mut known: Vec<String> = nlu
                .model
                .labels
                .iter()
                .filter_map(|l| l.split_once('-').map(|(d, _)| d.to_lowercase()))
                .filter(|d| system.dm.schema.contains(d))
                .collect();
            known.sort();
            known.dedup();
            ec.goal.domains = known;
        }
    }
    if !a.domains.is_empty() {
        ec.goal.domains = a.domains.clone();
    }
    if !ec.goal.domains.is_empty() {
        ec.goal.max_domains = ec.goal.max_domains.min(ec.goal.domains.len()).max(1);
        ec.goal.min_domains = ec.goal.min_domains.min(ec.goal.max_domains);
    }
    let t0 = Instant::now();
    let logs = match &a.goals {
        Some(path) => run_goals(&system, &load_goals(path)?, a.seed, &ec),
        None => run_episodes(&system, a.episodes, a.seed, &ec)?,
    };
    if let Some(path) = &a.save_goals {
        save_goals(path, &logs.iter().map(|l| l.goal.clone()).collect::<Vec<_>>())?;
    }
    if let Some(path) = &a.logs {
        save_logs(path, &logs)?;
    }
    let m = compute_metrics(&logs, &system.dm.schema, a.seed, ec.sim.max_turns)?;
    print!("{m}");
    println!("# {:?} mode, {:.1}s", ec.mode, t0.elapsed().as_secs_f64());
    Ok(())
}

pub fn cmd_mine(a: MineArgs) -> Result<()> {
    let corpus = match &a.corpus {
        Some(p) => hceds::nlg::read_corpus(BufReader::new(File::open(p).with_context(|| format!("reading {}", p.display()))?))?,
        None => builtin_corpus(),
    };
    let (store, report) = mine_templates(&corpus);
    store.save(&a.out)?;
    println!("mined {} pairs into {} templates, skipped {}", report.mined, store.len(), report.skipped);
    Ok(())
}

pub fn cmd_serve(a: ServeArgs) -> Result<()> {
    let mut cfg = ServiceConfig::load_or_default(a.config.as_deref())?;
    if let Some(h) = a.host {
        cfg.host = h;
    }
    if let Some(p) = a.port {
        cfg.port = p;
    }
    let system = cfg.build_system()?;
    if system.nlu.is_none() {
        log::warn!("no checkpoint configured; messages must carry acts");
    }
    tokio::runtime::Runtime::new()?.block_on(crate::server::serve(system, &cfg))
}

/// Reads user lines until EOF or a closing action.
pub fn cmd_chat(a: ChatArgs, input: impl BufRead, out: &mut impl Write) -> Result<()> {
    let mut cfg = ServiceConfig::load_or_default(a.config.as_deref())?;
    if a.checkpoint.is_some() {
        cfg.checkpoint = a.checkpoint.clone();
    }
    let system = cfg.build_system()?;
    if system.nlu.is_none() {
        bail!("chat needs an NLU checkpoint (--checkpoint or config)");
    }
    let mut session = system.session(a.seed);
    writeln!(out, "hello , how can i help you ? (empty line or ctrl-d ends)")?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            break;
        }
        let r = system.respond_text(&mut session, &line)?;
        if a.verbose {
            let acts: Vec<String> = r.acts.iter().map(|x| x.to_string()).collect();
            writeln!(out, "  acts:   {}", acts.join(" "))?;
            writeln!(out, "  action: {}", r.action)?;
        }
        writeln!(out, "{}", r.utterance)?;
        if r.closed {
            break;
        }
    }
    Ok(())
}

pub fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let p = ContextualEmbeddingProvider::ingest_file(&a.input, a.dim)?;
    p.save(&a.out)?;
    println!("stored {} vectors of dim {}", p.stored(), p.dim());
    Ok(())
}
