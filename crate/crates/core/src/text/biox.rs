//! BIOX span tagging over subword sequences.
//!
//! The first subword of a span's first word is `B-label`, the first subword
//! of each following word in the span is `I-label`, every non-initial
//! subword of any word is `X`, and everything else is `O`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::text::TokenizedUtterance;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    O,
    X,
    B(String),
    I(String),
}

impl Tag {
    pub fn label(&self) -> Option<&str> {
        match self {
            Tag::B(l) | Tag::I(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::X => f.write_str("X"),
            Tag::B(l) => write!(f, "B-{l}"),
            Tag::I(l) => write!(f, "I-{l}"),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Tag::O),
            "X" => Ok(Tag::X),
            _ => {
                if let Some(l) = s.strip_prefix("B-") {
                    Ok(Tag::B(l.to_string()))
                } else if let Some(l) = s.strip_prefix("I-") {
                    Ok(Tag::I(l.to_string()))
                } else {
                    Err(Error::format("tag", format!("`{s}` is not a BIOX tag")))
                }
            }
        }
    }
}

/// A labelled span over an inclusive word range.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotSpan {
    pub label: String,
    pub first_word: usize,
    pub last_word: usize,
}

impl SlotSpan {
    pub fn new(label: impl Into<String>, first_word: usize, last_word: usize) -> Self {
        SlotSpan {
            label: label.into(),
            first_word,
            last_word,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioxSequence {
    pub tags: Vec<Tag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodedSpans {
    pub spans: Vec<SlotSpan>,
    /// Surface text of each span, joined from the normalized words.
    pub values: Vec<String>,
    pub repairs: usize,
}

impl DecodedSpans {
    pub fn labelled_values(&self) -> Vec<(String, String)> {
        self.spans
            .iter()
            .zip(&self.values)
            .map(|(s, v)| (s.label.clone(), v.clone()))
            .collect()
    }
}

pub fn biox_align(tok: &TokenizedUtterance, spans: &[SlotSpan]) -> Result<BioxSequence> {
    let n_words = tok.words.len();
    let mut sorted: Vec<&SlotSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.first_word, s.last_word));
    for s in &sorted {
        if s.first_word > s.last_word || s.last_word >= n_words {
            return Err(Error::Annotation(format!(
                "span {}[{}..={}] outside {n_words} words",
                s.label, s.first_word, s.last_word
            )));
        }
    }
    for w in sorted.windows(2) {
        if w[1].first_word <= w[0].last_word {
            return Err(Error::Annotation(format!(
                "overlapping spans {}[{}..={}] and {}[{}..={}]",
                w[0].label, w[0].first_word, w[0].last_word, w[1].label, w[1].first_word, w[1].last_word
            )));
        }
    }
    let mut word_tag = vec![Tag::O; n_words];
    for s in sorted {
        word_tag[s.first_word] = Tag::B(s.label.clone());
        for t in &mut word_tag[s.first_word + 1..=s.last_word] {
            *t = Tag::I(s.label.clone());
        }
    }
    let tags = (0..tok.len())
        .map(|i| {
            if tok.is_word_initial(i) {
                word_tag[tok.word_of_subword[i]].clone()
            } else {
                Tag::X
            }
        })
        .collect();
    Ok(BioxSequence { tags })
}

/// Recovers spans from word-initial tags. An `I` that does not continue a
/// span of the same label opens a new span, and an `X` on a word-initial
/// position is read as `O`; both count as repairs.
pub fn biox_decode(tok: &TokenizedUtterance, tags: &BioxSequence) -> DecodedSpans {
    let mut out = DecodedSpans::default();
    let mut open: Option<SlotSpan> = None;
    let close = |open: &mut Option<SlotSpan>, out: &mut DecodedSpans| {
        if let Some(s) = open.take() {
            out.values.push(tok.words[s.first_word..=s.last_word].join(" "));
            out.spans.push(s);
        }
    };
    for i in tok.word_starts() {
        let w = tok.word_of_subword[i];
        match tags.tags.get(i).unwrap_or(&Tag::O) {
            Tag::B(l) => {
                close(&mut open, &mut out);
                open = Some(SlotSpan::new(l.clone(), w, w));
            }
            Tag::I(l) => match &mut open {
                Some(s) if &s.label == l => s.last_word = w,
                _ => {
                    close(&mut open, &mut out);
                    out.repairs += 1;
                    open = Some(SlotSpan::new(l.clone(), w, w));
                }
            },
            Tag::X => {
                out.repairs += 1;
                close(&mut open, &mut out);
            }
            Tag::O => close(&mut open, &mut out),
        }
    }
    close(&mut open, &mut out);
    out
}
