//! Annotated dialogue corpus: one JSON dialogue per line.
//!
//! ```json
//! {"id": "d1", "turns": [
//!   {"speaker": "user", "text": "i want free parking",
//!    "dialog_act": {"Hotel-Inform": [["Parking", "yes"]]},
//!    "spans": [["Hotel-Inform+Parking", 3, 3]]},
//!   {"speaker": "system", "text": "...", "dialog_act": {}}]}
//! ```
//!
//! Span word indices refer to the words of the pretokenized text.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::act::{ActMap, Speaker};
use crate::error::{Error, Result};
use crate::text::{pretokenize, SlotSpan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTurn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default)]
    pub dialog_act: ActMap,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spans: Vec<(String, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDialogue {
    pub id: String,
    pub turns: Vec<AnnotatedTurn>,
    /// Free-form metadata such as the goal that produced the dialogue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<AnnotatedDialogue>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d = serde_json::from_str(&line)
            .map_err(|e| Error::format(path.display().to_string(), format!("line {}: {e}", n + 1)))?;
        out.push(d);
    }
    Ok(out)
}

pub fn write_corpus(path: impl AsRef<Path>, dialogues: &[AnnotatedDialogue]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in dialogues {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// One user turn with everything the NLU is trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub utterance: String,
    pub context: Vec<(Speaker, String)>,
    pub labels: BTreeSet<String>,
    pub spans: Vec<SlotSpan>,
}

impl TrainingExample {
    pub fn new(utterance: &str, context: Vec<(Speaker, String)>, labels: &[&str], spans: Vec<SlotSpan>) -> Self {
        TrainingExample {
            utterance: pretokenize(utterance),
            context,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            spans,
        }
    }
}

/// Every user turn of every dialogue, with all earlier turns as context.
/// Spans outside the pretokenized word range are an annotation error.
pub fn examples_from_corpus(dialogues: &[AnnotatedDialogue]) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for d in dialogues {
        let mut history = Vec::new();
        for turn in &d.turns {
            let text = pretokenize(&turn.text);
            if turn.speaker == Speaker::User {
                let n_words = text.split(' ').filter(|w| !w.is_empty()).count();
                let mut spans = Vec::new();
                for (label, a, b) in &turn.spans {
                    if a > b || *b >= n_words {
                        return Err(Error::Annotation(format!(
                            "dialogue {}: span {label}[{a}..={b}] outside {n_words} words of `{text}`",
                            d.id
                        )));
                    }
                    spans.push(SlotSpan::new(label.clone(), *a, *b));
                }
                out.push(TrainingExample {
                    utterance: text.clone(),
                    context: history.clone(),
                    labels: turn.dialog_act.labels().cloned().collect(),
                    spans,
                });
            }
            history.push((turn.speaker, text));
        }
    }
    Ok(out)
}

/// Sorted domain-intent labels seen in the examples.
pub fn label_inventory(examples: &[TrainingExample]) -> Vec<String> {
    let set: BTreeSet<&String> = examples.iter().flat_map(|e| &e.labels).collect();
    set.into_iter().cloned().collect()
}

/// `O`, `X`, then `B-`/`I-` for every span label in sorted order.
pub fn tag_inventory(examples: &[TrainingExample]) -> Vec<String> {
    let set: BTreeSet<&String> = examples.iter().flat_map(|e| e.spans.iter().map(|s| &s.label)).collect();
    let mut tags = vec!["O".to_string(), "X".to_string()];
    for l in set {
        tags.push(format!("B-{l}"));
        tags.push(format!("I-{l}"));
    }
    tags
}
