use std::collections::BTreeSet;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::act::{split_label, split_tag_label, DialogAct, Speaker, REQUESTED};
use crate::embeddings::{ContextualEmbeddingProvider, EmbedStats};
use crate::error::{Error, Result};
use crate::hcenlu::context::build_context;
use crate::hcenlu::data::TrainingExample;
use crate::hcenlu::model::{argmax, select_labels, HcenluModel, ModelInput, Targets, TokenFeatures};
use crate::scalar::Scalar;
use crate::text::bpe::PAD;
use crate::text::{biox_align, biox_decode, pretokenize, BioxSequence, BpeCodec, Tag, TokenizedUtterance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluOutput {
    pub intent_probs: IndexMap<String, f64>,
    pub labels: Vec<String>,
    pub tags: Vec<String>,
    pub tag_distributions: Vec<Vec<f64>>,
    pub acts: Vec<DialogAct>,
    pub repairs: usize,
    pub fallback_fraction: f64,
}

/// Codec, frozen provider and model: everything `parse` needs.
#[derive(Debug, Clone)]
pub struct NluPipeline<T> {
    pub model: HcenluModel<T>,
    pub codec: BpeCodec,
    pub provider: Arc<ContextualEmbeddingProvider>,
}

/// Features of one example plus the tokenization they came from.
#[derive(Debug, Clone)]
pub struct Featurized<T> {
    pub input: ModelInput<T>,
    pub tok: TokenizedUtterance,
    pub stats: EmbedStats,
}

impl<T: Scalar> NluPipeline<T> {
    pub fn tokenize(&self, text: &str) -> TokenizedUtterance {
        self.codec.tokenize(&pretokenize(text))
    }

    fn features(&self, tok: &TokenizedUtterance, stats: &mut EmbedStats) -> TokenFeatures<T> {
        TokenFeatures {
            ctx: self.provider.embed(tok, stats),
            chars: tok.pieces.iter().map(|p| self.model.char_cnn.vocab.encode(p)).collect(),
        }
    }

    /// UU and DC features. The DC is the last `window` turns, each opened
    /// by its speaker marker; with no turns it is the single pad sentinel.
    pub fn featurize(&self, utterance: &str, history: &[(Speaker, String)]) -> Result<Featurized<T>> {
        let tok = self.tokenize(utterance);
        if tok.is_empty() {
            return Err(Error::Input("empty utterance".into()));
        }
        let mut stats = EmbedStats::default();
        let uu = self.features(&tok, &mut stats);
        let window = build_context(history, self.model.config.window);
        let mut dc = TokenFeatures::default();
        if window.is_empty() {
            dc.ctx.push(self.provider.embed_marker(PAD));
            dc.chars.push(Vec::new());
        }
        for (speaker, text) in &window.turns {
            dc.ctx.push(self.provider.embed_marker(speaker.marker()));
            dc.chars.push(Vec::new());
            let t = self.tokenize(text);
            let f = self.features(&t, &mut stats);
            dc.ctx.extend(f.ctx);
            dc.chars.extend(f.chars);
        }
        Ok(Featurized {
            input: ModelInput { uu, dc },
            tok,
            stats,
        })
    }

    pub fn targets(&self, ex: &TrainingExample, tok: &TokenizedUtterance) -> Result<Targets<T>> {
        let mut labels = vec![T::zero(); self.model.labels.len()];
        for l in &ex.labels {
            if let Some(i) = self.model.labels.iter().position(|x| x == l) {
                labels[i] = T::one();
            }
        }
        let seq = biox_align(tok, &ex.spans)?;
        let tags = seq
            .tags
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if !tok.is_word_initial(i) {
                    return None;
                }
                let s = t.to_string();
                Some(self.model.tags.iter().position(|x| *x == s).unwrap_or(0))
            })
            .collect();
        Ok(Targets { labels, tags })
    }

    /// Runs the model with dropout off.
    pub fn parse(&self, utterance: &str, history: &[(Speaker, String)]) -> Result<NluOutput> {
        let f = self.featurize(utterance, history)?;
        Ok(self.parse_featurized(&f))
    }

    pub fn parse_featurized(&self, f: &Featurized<T>) -> NluOutput {
        let out = self
            .model
            .forward(&f.input, None::<&mut rand_chacha::ChaCha8Rng>)
            .expect("featurized input is well-formed");
        let probs = HcenluModel::<T>::intent_probs(&out.intent_logits);
        let chosen = select_labels(&probs, self.model.config.threshold);
        let labels: Vec<String> = chosen.iter().map(|&i| self.model.labels[i].clone()).collect();
        let dists = HcenluModel::<T>::tag_distributions(&out.tag_logits);
        let seq = predict_tags(&dists, &self.model.tags, &f.tok);
        let (acts, repairs) = decode_acts(&labels, &seq, &f.tok);
        NluOutput {
            intent_probs: self
                .model
                .labels
                .iter()
                .zip(&probs)
                .map(|(l, p)| (l.clone(), p.as_f64()))
                .collect(),
            labels,
            tags: seq.tags.iter().map(Tag::to_string).collect(),
            tag_distributions: dists
                .iter()
                .map(|d| d.iter().map(|v| v.as_f64()).collect())
                .collect(),
            acts,
            repairs,
            fallback_fraction: f.stats.fallback_fraction(),
        }
    }
}

/// Argmax tag at each word-initial subword, `X` elsewhere. A tag string
/// that does not parse falls back to `O`.
pub fn predict_tags<T: Scalar>(dists: &[Vec<T>], tags: &[String], tok: &TokenizedUtterance) -> BioxSequence {
    let tags = dists
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if !tok.is_word_initial(i) {
                return Tag::X;
            }
            match tags[argmax(d)].parse::<Tag>() {
                Ok(Tag::X) | Err(_) => Tag::O,
                Ok(t) => t,
            }
        })
        .collect();
    BioxSequence { tags }
}

/// Turns classifier labels and tagged spans into acts. Every span yields
/// an act even if its domain-intent was not predicted; Request spans take
/// the value `?`; predicted labels without any span become slot-less acts.
/// Returns the acts and the number of BIOX repairs.
pub fn decode_acts(labels: &[String], tags: &BioxSequence, tok: &TokenizedUtterance) -> (Vec<DialogAct>, usize) {
    let decoded = biox_decode(tok, tags);
    let mut acts = Vec::new();
    let mut covered = BTreeSet::new();
    for (label, value) in decoded.labelled_values() {
        let Ok((di, slot)) = split_tag_label(&label) else {
            continue;
        };
        let Ok((domain, intent)) = split_label(di) else {
            continue;
        };
        let value = if intent == "Request" { REQUESTED.to_string() } else { value };
        let act = DialogAct::new(domain, intent, slot, &value);
        if !acts.contains(&act) {
            acts.push(act);
        }
        covered.insert(di.to_string());
    }
    for l in labels {
        if covered.contains(l) {
            continue;
        }
        if let Ok((d, i)) = split_label(l) {
            acts.push(DialogAct::bare(d, i));
        }
    }
    (acts, decoded.repairs)
}
