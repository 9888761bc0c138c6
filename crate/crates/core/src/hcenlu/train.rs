use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::act::DialogAct;
use crate::embeddings::{CharVocab, ContextualEmbeddingProvider};
use crate::error::{Error, Result};
use crate::hcenlu::data::{label_inventory, tag_inventory, TrainingExample};
use crate::hcenlu::model::{HcenluModel, NluConfig, Targets};
use crate::hcenlu::pipeline::{decode_acts, Featurized, NluOutput, NluPipeline};
use crate::metrics::Prf;
use crate::optim::{clip_global_norm, Adam, AdamConfig};
use crate::scalar::Scalar;
use crate::tensor::Parameterized;
use crate::text::{biox_align, biox_decode, BioxSequence, BpeCodec, Tag, TokenizedUtterance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub bpe_merges: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            clip: 5.0,
            epochs: 10,
            batch_size: 16,
            seed: 1,
            bpe_merges: 4000,
        }
    }
}

/// Intent, span-level tag and act-level scores.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NluScores {
    pub intent: Prf,
    pub tag: Prf,
    pub overall: Prf,
    pub repairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: NluScores,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// The parameters from the epoch with the best validation overall F1.
    pub pipeline: NluPipeline<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Word-level view of one utterance's annotation, used for scoring.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NluAnnotation {
    pub labels: BTreeSet<String>,
    pub spans: BTreeSet<(String, usize, usize)>,
    pub acts: BTreeSet<DialogAct>,
}

impl NluAnnotation {
    /// Gold annotation; acts are decoded the same way predictions are.
    pub fn gold(ex: &TrainingExample, tok: &TokenizedUtterance) -> Result<Self> {
        let seq = biox_align(tok, &ex.spans)?;
        let labels: Vec<String> = ex.labels.iter().cloned().collect();
        Ok(Self::from_parts(&labels, &seq, tok))
    }

    pub fn from_parts(labels: &[String], seq: &BioxSequence, tok: &TokenizedUtterance) -> Self {
        let spans = biox_decode(tok, seq)
            .spans
            .into_iter()
            .map(|s| (s.label, s.first_word, s.last_word))
            .collect();
        NluAnnotation {
            labels: labels.iter().cloned().collect(),
            spans,
            acts: decode_acts(labels, seq, tok).0.into_iter().collect(),
        }
    }

    pub fn predicted(out: &NluOutput, tok: &TokenizedUtterance) -> Self {
        let seq = BioxSequence {
            tags: out.tags.iter().map(|t| t.parse().unwrap_or(Tag::O)).collect(),
        };
        Self::from_parts(&out.labels, &seq, tok)
    }
}

/// Micro-averaged scores of `pred` against `gold`, item by item.
pub fn score_annotations(gold: &[NluAnnotation], pred: &[NluAnnotation]) -> NluScores {
    let mut s = NluScores::default();
    for (g, p) in gold.iter().zip(pred) {
        s.intent.add(Prf::of_sets(&g.labels, &p.labels));
        s.tag.add(Prf::of_sets(&g.spans, &p.spans));
        s.overall.add(Prf::of_sets(&g.acts, &p.acts));
    }
    s
}

/// Prepared example: features, targets and gold annotation.
struct Prepared<T> {
    feat: Featurized<T>,
    targets: Targets<T>,
    gold: NluAnnotation,
}

fn prepare<T: Scalar>(p: &NluPipeline<T>, examples: &[TrainingExample]) -> Result<Vec<Prepared<T>>> {
    examples
        .iter()
        .map(|ex| {
            let feat = p.featurize(&ex.utterance, &ex.context)?;
            let targets = p.targets(ex, &feat.tok)?;
            let gold = NluAnnotation::gold(ex, &feat.tok)?;
            Ok(Prepared { feat, targets, gold })
        })
        .collect()
}

fn evaluate<T: Scalar>(p: &NluPipeline<T>, data: &[Prepared<T>]) -> NluScores {
    let mut gold = Vec::with_capacity(data.len());
    let mut pred = Vec::with_capacity(data.len());
    let mut repairs = 0;
    for d in data {
        let out = p.parse_featurized(&d.feat);
        repairs += out.repairs;
        pred.push(NluAnnotation::predicted(&out, &d.feat.tok));
        gold.push(d.gold.clone());
    }
    let mut s = score_annotations(&gold, &pred);
    s.repairs = repairs;
    s
}

/// Scores a trained pipeline on annotated examples.
pub fn nlu_component_metrics<T: Scalar>(p: &NluPipeline<T>, examples: &[TrainingExample]) -> Result<NluScores> {
    if examples.is_empty() {
        return Err(Error::Param("empty test set".into()));
    }
    Ok(evaluate(p, &prepare(p, examples)?))
}

/// Builds codec, inventories and model from `train_set`, then trains with
/// Adam and global-norm clipping. Fully determined by `tc.seed`.
pub fn train<T: Scalar>(
    train_set: &[TrainingExample],
    valid_set: &[TrainingExample],
    config: NluConfig,
    tc: &TrainConfig,
    provider: Arc<ContextualEmbeddingProvider>,
) -> Result<TrainOutcome<T>> {
    if train_set.is_empty() {
        return Err(Error::Param("empty training set".into()));
    }
    if tc.batch_size == 0 || tc.epochs == 0 {
        return Err(Error::Param("batch size and epochs must be positive".into()));
    }
    if config.ctx_dim != provider.dim() {
        return Err(Error::Param(format!(
            "config ctx_dim {} differs from provider dim {}",
            config.ctx_dim,
            provider.dim()
        )));
    }
    let mut texts: Vec<&str> = Vec::new();
    for ex in train_set {
        texts.push(&ex.utterance);
        texts.extend(ex.context.iter().map(|(_, t)| t.as_str()));
    }
    let codec = BpeCodec::train(&texts, tc.bpe_merges)?;
    let chars = CharVocab::build(&texts);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let model = HcenluModel::<T>::new(config, label_inventory(train_set), tag_inventory(train_set), chars, &mut rng)?;
    let mut pipeline = NluPipeline {
        model,
        codec,
        provider,
    };
    let train_data = prepare(&pipeline, train_set)?;
    let valid_data = prepare(&pipeline, if valid_set.is_empty() { train_set } else { valid_set })?;

    let mut adam = Adam::new(AdamConfig {
        learning_rate: tc.learning_rate,
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, HcenluModel<T>)> = None;
    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(tc.batch_size) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| (&train_data[i].feat.input, &train_data[i].targets))
                .collect();
            pipeline.model.zero_grad();
            let loss = pipeline.model.compute_loss(&batch, Some(&mut rng))?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("training loss diverged in epoch {epoch}")));
            }
            total += loss.as_f64() * chunk.len() as f64;
            clip_global_norm(&mut pipeline.model.params_mut(), tc.clip);
            adam.step(&mut pipeline.model.params_mut());
        }
        let validation = evaluate(&pipeline, &valid_data);
        let rec = EpochRecord {
            epoch,
            train_loss: total / train_data.len() as f64,
            validation,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} intent F1 {:.4} tag F1 {:.4} overall F1 {:.4}",
            rec.train_loss,
            validation.intent.f1(),
            validation.tag.f1(),
            validation.overall.f1()
        );
        let f1 = validation.overall.f1();
        if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
            best = Some((f1, epoch, pipeline.model.clone()));
        }
        history.push(rec);
    }
    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    pipeline.model = model;
    Ok(TrainOutcome {
        pipeline,
        history,
        best_epoch,
    })
}
