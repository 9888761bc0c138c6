//! Small annotated corpus from oracle simulation, for training and testing
//! the NLU at desk scale.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::act::{split_label, ActMap, Speaker};
use crate::agent::DialogueSystem;
use crate::embeddings::ContextualEmbeddingProvider;
use crate::error::Result;
use crate::eval::{episode_seed, splitmix64};
use crate::hcenlu::{examples_from_corpus, train, AnnotatedDialogue, AnnotatedTurn, NluConfig, TrainConfig, TrainOutcome, TrainingExample};
use crate::sim::{realize_user_utterance, sample_goal, GoalConfig, SimConfig, UserSimulator};

/// Slots both toy domains share; with only these, the domain of a turn
/// that does not name it can be read off the history alone.
pub const SHARED_SLOTS: [&str; 5] = ["Area", "Addr", "Post", "Phone", "Name"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub domains: Vec<String>,
    pub train_dialogues: usize,
    /// Held out for best-epoch selection.
    pub valid_dialogues: usize,
    pub test_dialogues: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            domains: vec!["hotel".into(), "attraction".into()],
            train_dialogues: 420,
            valid_dialogues: 40,
            test_dialogues: 90,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub train: Vec<AnnotatedDialogue>,
    pub valid: Vec<AnnotatedDialogue>,
    pub test: Vec<AnnotatedDialogue>,
}

/// Small dims for desk-scale training; training settings stay at the
/// defaults (lr 1e-3, clip 5, dropout 0.5).
pub fn toy_nlu_config() -> NluConfig {
    NluConfig {
        ctx_dim: 24,
        char_dim: 8,
        n_filters: 16,
        token_hidden: 24,
        sentence_hidden: 24,
        window: 4,
        ..NluConfig::default()
    }
}

pub fn toy_train_config() -> TrainConfig {
    TrainConfig {
        epochs: 16,
        batch_size: 8,
        seed: 1,
        ..TrainConfig::default()
    }
}

/// One dialogue between the simulator and the system with gold acts.
/// `meta.implicit[i]` says whether user turn `i` left its domain unnamed.
pub fn simulate_dialogue(system: &DialogueSystem, goal_cfg: &GoalConfig, seed: u64, id: String) -> Result<AnnotatedDialogue> {
    let schema = &system.dm.schema;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goal = sample_goal(schema, &system.dm.db, goal_cfg, &mut rng)?;
    let cfg = SimConfig::default();
    let mut sim = UserSimulator::new(goal.clone(), cfg.clone());
    let mut session = system.session(splitmix64(seed));
    let mut turns = Vec::new();
    let mut implicit = Vec::new();
    for _ in 0..cfg.max_turns {
        let (acts, done) = sim.next_acts(&mut rng);
        let explicit = sim.explicit_domains(&acts, &mut rng);
        let r = realize_user_utterance(&acts, schema, &explicit, &mut rng);
        implicit.push(explicit.is_empty() && acts.iter().any(|a| !a.is_general()));
        let out = system.respond_acts(&mut session, &acts, &r.text);
        turns.push(AnnotatedTurn {
            speaker: Speaker::User,
            text: r.text,
            dialog_act: ActMap::from_acts(&acts),
            spans: r.spans,
        });
        turns.push(AnnotatedTurn {
            speaker: Speaker::System,
            text: out.utterance,
            dialog_act: out.action.clone(),
            spans: Vec::new(),
        });
        if done || out.closed {
            break;
        }
        sim.observe(&out.action, schema, &system.dm.db, &mut rng);
    }
    Ok(AnnotatedDialogue {
        id,
        turns,
        meta: Some(json!({ "goal": goal, "implicit": implicit })),
    })
}

pub fn generate_toy_corpus(system: &DialogueSystem, cfg: &ToyConfig) -> Result<ToyCorpus> {
    let goal_cfg = GoalConfig {
        domains: cfg.domains.clone(),
        max_domains: cfg.domains.len().max(1),
        ..GoalConfig::default()
    };
    let make = |prefix: &str, n: usize, salt: u64| -> Result<Vec<AnnotatedDialogue>> {
        (0..n)
            .map(|i| simulate_dialogue(system, &goal_cfg, episode_seed(cfg.seed ^ salt, i), format!("{prefix}{i}")))
            .collect()
    };
    Ok(ToyCorpus {
        train: make("train-", cfg.train_dialogues, 0)?,
        valid: make("valid-", cfg.valid_dialogues, 0x5a11)?,
        test: make("test-", cfg.test_dialogues, 0x7e57)?,
    })
}

fn implicit_flags(d: &AnnotatedDialogue) -> Vec<bool> {
    d.meta
        .as_ref()
        .and_then(|m| m.get("implicit"))
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_default()
}

/// User turns that leave the domain unnamed and only touch shared slots,
/// so the intent label is recoverable from the context alone.
pub fn context_dependent_slice(dialogues: &[AnnotatedDialogue]) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for d in dialogues {
        let flags = implicit_flags(d);
        let examples = examples_from_corpus(std::slice::from_ref(d))?;
        let user_turns = d.turns.iter().filter(|t| t.speaker == Speaker::User);
        for ((ex, turn), implicit) in examples.into_iter().zip(user_turns).zip(flags) {
            let shared = turn.dialog_act.0.iter().all(|(label, pairs)| {
                split_label(label).is_ok_and(|(dom, _)| !dom.eq_ignore_ascii_case("general"))
                    && pairs.iter().all(|[s, _]| SHARED_SLOTS.contains(&s.as_str()))
            });
            if implicit && shared && !ex.context.is_empty() {
                out.push(ex);
            }
        }
    }
    Ok(out)
}

/// Trains on hash-fallback embeddings of `cfg.ctx_dim` dimensions.
pub fn train_toy(
    train_set: &[TrainingExample],
    valid_set: &[TrainingExample],
    cfg: NluConfig,
    tc: &TrainConfig,
) -> Result<TrainOutcome<f64>> {
    let provider = Arc::new(ContextualEmbeddingProvider::hash_only(cfg.ctx_dim));
    train::<f64>(train_set, valid_set, cfg, tc, provider)
}

/// Turns carrying more than one domain-intent label.
pub fn multi_label_turns(examples: &[TrainingExample]) -> usize {
    examples.iter().filter(|e| e.labels.len() > 1).count()
}

pub fn label_set(examples: &[TrainingExample]) -> BTreeSet<String> {
    examples.iter().flat_map(|e| e.labels.iter().cloned()).collect()
}
