//! Byte-pair-encoding subword codec (character level, end-of-word marked).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::normalize;

pub const END_OF_WORD: &str = "</w>";
pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const USER_MARK: &str = "<usr>";
pub const SYSTEM_MARK: &str = "<sys>";
const SPECIALS: [&str; 4] = [PAD, UNK, USER_MARK, SYSTEM_MARK];

#[derive(Debug, Clone, PartialEq)]
pub struct BpeCodec {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    vocab: BTreeMap<String, u32>,
    tokens: Vec<String>,
}

/// A normalized utterance split into words and subword ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedUtterance {
    pub raw: String,
    pub words: Vec<String>,
    pub subwords: Vec<u32>,
    /// Subword surface strings with the end-of-word marker removed. Kept
    /// even for unknown ids so character features still see the text.
    pub pieces: Vec<String>,
    pub word_of_subword: Vec<usize>,
}

impl TokenizedUtterance {
    pub fn len(&self) -> usize {
        self.subwords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subwords.is_empty()
    }

    /// True when subword `i` starts a word.
    pub fn is_word_initial(&self, i: usize) -> bool {
        i == 0 || self.word_of_subword[i] != self.word_of_subword[i - 1]
    }

    /// Index of the first subword of each word.
    pub fn word_starts(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_word_initial(i)).collect()
    }
}

fn split_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    chars
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            if i + 1 == n {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn merge_pair(symbols: &[String], a: &str, b: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == a && symbols[i + 1] == b {
            out.push(format!("{a}{b}"));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

impl BpeCodec {
    /// Learns up to `num_merges` merges by repeatedly joining the most
    /// frequent adjacent symbol pair. Ties go to the lexicographically
    /// smallest pair. Stops early once every word is a single symbol.
    pub fn train<S: AsRef<str>>(corpus: &[S], num_merges: usize) -> Result<Self> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for line in corpus {
            for w in normalize(line.as_ref()).split(' ').filter(|w| !w.is_empty()) {
                if SPECIALS.contains(&w) {
                    continue;
                }
                *counts.entry(w.to_string()).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::Param("bpe_train: empty corpus".into()));
        }
        let mut words: Vec<(Vec<String>, usize)> =
            counts.iter().map(|(w, &c)| (split_symbols(w), c)).collect();
        let mut alphabet: Vec<String> = words
            .iter()
            .flat_map(|(s, _)| s.iter().cloned())
            .collect();
        // Every character in both its inner and word-final form.
        let base: Vec<String> = alphabet
            .iter()
            .map(|s| s.trim_end_matches(END_OF_WORD).to_string())
            .collect();
        for c in base {
            alphabet.push(c.clone());
            alphabet.push(format!("{c}{END_OF_WORD}"));
        }
        alphabet.sort();
        alphabet.dedup();

        let mut merges = Vec::new();
        for _ in 0..num_merges {
            let mut pair_counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
            for (syms, c) in &words {
                for w in syms.windows(2) {
                    *pair_counts.entry((&w[0], &w[1])).or_default() += c;
                }
            }
            // max by count; BTreeMap order makes the first maximum the smallest pair
            let Some(((a, b), _)) = pair_counts
                .iter()
                .fold(None::<(&(&str, &str), usize)>, |best, (p, &c)| match best {
                    Some((_, bc)) if bc >= c => best,
                    _ => Some((p, c)),
                })
            else {
                break;
            };
            let (a, b) = (a.to_string(), b.to_string());
            for (syms, _) in words.iter_mut() {
                *syms = merge_pair(syms, &a, &b);
            }
            merges.push((a, b));
        }
        Ok(Self::from_merges(merges, alphabet))
    }

    fn from_merges(merges: Vec<(String, String)>, alphabet: Vec<String>) -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut vocab: BTreeMap<String, u32> = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            vocab.insert(t.clone(), i as u32);
        }
        let merged = merges.iter().map(|(a, b)| format!("{a}{b}"));
        for t in alphabet.into_iter().chain(merged) {
            if !vocab.contains_key(&t) {
                vocab.insert(t.clone(), tokens.len() as u32);
                tokens.push(t);
            }
        }
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        BpeCodec {
            merges,
            ranks,
            vocab,
            tokens,
        }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn unk_id(&self) -> u32 {
        1
    }

    pub fn pad_id(&self) -> u32 {
        0
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Subword symbols of a single word after applying merges in rank order.
    pub fn segment(&self, word: &str) -> Vec<String> {
        if SPECIALS.contains(&word) {
            return vec![word.to_string()];
        }
        let mut syms = split_symbols(word);
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|&r| (r, w)))
                .min_by_key(|(r, _)| *r);
            let Some((_, w)) = best else { break };
            let (a, b) = (w[0].clone(), w[1].clone());
            syms = merge_pair(&syms, &a, &b);
        }
        syms
    }

    pub fn encode_word(&self, word: &str) -> Vec<u32> {
        self.segment(word)
            .iter()
            .map(|s| self.id(s).unwrap_or(self.unk_id()))
            .collect()
    }

    /// Concatenates subwords back into whitespace-separated words.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut s = String::new();
        for &id in ids {
            let t = self.token(id).unwrap_or(UNK);
            if SPECIALS.contains(&t) {
                s.push_str(t);
                s.push(' ');
            } else if let Some(stem) = t.strip_suffix(END_OF_WORD) {
                s.push_str(stem);
                s.push(' ');
            } else {
                s.push_str(t);
            }
        }
        s.trim_end().to_string()
    }

    pub fn tokenize(&self, text: &str) -> TokenizedUtterance {
        let raw = normalize(text);
        let words: Vec<String> = raw
            .split(' ')
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect();
        let mut subwords = Vec::new();
        let mut pieces = Vec::new();
        let mut word_of_subword = Vec::new();
        for (wi, w) in words.iter().enumerate() {
            for sym in self.segment(w) {
                subwords.push(self.id(&sym).unwrap_or(self.unk_id()));
                pieces.push(sym.trim_end_matches(END_OF_WORD).to_string());
                word_of_subword.push(wi);
            }
        }
        TokenizedUtterance {
            raw,
            words,
            subwords,
            pieces,
            word_of_subword,
        }
    }

    /// Plain-text form: a header, one merge pair per line, then `token<TAB>id` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::from("#bpe-codec v1\n#merges\n");
        for (a, b) in &self.merges {
            let _ = writeln!(s, "{a} {b}");
        }
        s.push_str("#vocab\n");
        for (i, t) in self.tokens.iter().enumerate() {
            let _ = writeln!(s, "{t}\t{i}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |d: String| Error::format("bpe codec", d);
        let mut lines = text.lines();
        if lines.next() != Some("#bpe-codec v1") {
            return Err(bad("missing header".into()));
        }
        if lines.next() != Some("#merges") {
            return Err(bad("missing #merges section".into()));
        }
        let mut merges = Vec::new();
        let mut tokens = Vec::new();
        let mut in_vocab = false;
        for (n, line) in lines.enumerate() {
            if line == "#vocab" {
                in_vocab = true;
                continue;
            }
            if in_vocab {
                let (tok, id) = line
                    .rsplit_once('\t')
                    .ok_or_else(|| bad(format!("line {}: expected token<TAB>id", n + 3)))?;
                let id: usize = id.parse().map_err(|_| bad(format!("bad id `{id}`")))?;
                if id != tokens.len() {
                    return Err(bad(format!("ids must be dense, got {id} at {}", tokens.len())));
                }
                tokens.push(tok.to_string());
            } else {
                let (a, b) = line
                    .split_once(' ')
                    .ok_or_else(|| bad(format!("line {}: expected merge pair", n + 3)))?;
                merges.push((a.to_string(), b.to_string()));
            }
        }
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(bad("vocabulary must start with the special tokens".into()));
        }
        let vocab = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        Ok(BpeCodec {
            merges,
            ranks,
            vocab,
            tokens,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_merges_splits_into_characters() {
        let codec = BpeCodec::train(&["parking lot"], 0).unwrap();
        assert_eq!(codec.segment("lot"), vec!["l", "o", "t</w>"]);
        assert!(codec.merges().is_empty());
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        // pairs in "aaab" x2: (a,a) 4 times, (a,b</w>) 2 times
        let codec = BpeCodec::train(&["aaab aaab"], 1).unwrap();
        assert_eq!(codec.merges()[0], ("a".to_string(), "a".to_string()));
    }

    #[test]
    fn ties_break_lexicographically() {
        // "ab" and "cd": both pairs occur once; (a, b</w>) sorts first
        let codec = BpeCodec::train(&["cd ab"], 1).unwrap();
        assert_eq!(codec.merges()[0], ("a".to_string(), "b</w>".to_string()));
    }

    #[test]
    fn corpus_words_round_trip() {
        let corpus = ["i want free parking", "the parking is free", "what is the postcode ?"];
        for merges in [0, 3, 10, 4000] {
            let codec = BpeCodec::train(&corpus, merges).unwrap();
            for line in corpus {
                for w in line.split(' ') {
                    assert_eq!(codec.decode(&codec.encode_word(w)), w);
                }
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_empty_corpus_fails() {
        let corpus = ["hello world", "held word"];
        assert_eq!(
            BpeCodec::train(&corpus, 5).unwrap().merges(),
            BpeCodec::train(&corpus, 5).unwrap().merges()
        );
        assert!(BpeCodec::train::<&str>(&[], 5).is_err());
        assert!(BpeCodec::train(&["   "], 5).is_err());
    }

    #[test]
    fn tokenize_alignment() {
        let codec = BpeCodec::train(&["i want free parking"], 4000).unwrap();
        let t = codec.tokenize("I want  free parking");
        assert_eq!(t.subwords.len(), 4);
        assert_eq!(t.word_of_subword, vec![0, 1, 2, 3]);

        let small = BpeCodec::train(&["i want free parking"], 0).unwrap();
        let t = small.tokenize("want");
        assert_eq!(t.word_of_subword, vec![0, 0, 0, 0]);
        assert_eq!(t.pieces.concat(), "want");

        let t = codec.tokenize("");
        assert!(t.words.is_empty() && t.subwords.is_empty());
    }

    #[test]
    fn unknown_characters_keep_alignment() {
        let codec = BpeCodec::train(&["abc"], 10).unwrap();
        let t = codec.tokenize("abc zé");
        assert_eq!(t.words.len(), 2);
        assert!(t.subwords.contains(&codec.unk_id()));
        assert_eq!(*t.word_of_subword.last().unwrap(), 1);
        assert_eq!(t.pieces[1..].concat(), "zé");
    }

    #[test]
    fn speaker_marks_are_atomic() {
        let codec = BpeCodec::train(&["hello"], 10).unwrap();
        let t = codec.tokenize("<usr> hello <sys>");
        assert_eq!(t.subwords[0], codec.id(USER_MARK).unwrap());
        assert_eq!(*t.subwords.last().unwrap(), codec.id(SYSTEM_MARK).unwrap());
    }

    #[test]
    fn text_format_round_trip() {
        let codec = BpeCodec::train(&["the attraction phone number", "its postcode"], 20).unwrap();
        let back = BpeCodec::from_text(&codec.to_text()).unwrap();
        assert_eq!(back, codec);
        assert!(BpeCodec::from_text("garbage").is_err());
    }
}
