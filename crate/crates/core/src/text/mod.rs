//! Normalization, BPE subword tokenization and BIOX span tagging.

pub mod biox;
pub mod bpe;

pub use biox::{biox_align, biox_decode, BioxSequence, DecodedSpans, SlotSpan, Tag};
pub use bpe::{BpeCodec, TokenizedUtterance, END_OF_WORD};

/// Lowercases and collapses runs of whitespace to single spaces.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Detaches trailing sentence punctuation from words (`"museum."` becomes
/// `"museum ."`) and normalizes. Inner punctuation such as `14:30` or
/// `christ's` is kept.
pub fn pretokenize(text: &str) -> String {
    let mut out: Vec<String> = Vec::new();
    for word in normalize(text).split(' ').filter(|w| !w.is_empty()) {
        let trimmed = word.trim_end_matches(['?', '!', '.', ',', ';']);
        if trimmed.is_empty() || trimmed.len() == word.len() {
            out.push(word.to_string());
            continue;
        }
        out.push(trimmed.to_string());
        out.extend(word[trimmed.len()..].chars().map(String::from));
    }
    out.join(" ")
}
