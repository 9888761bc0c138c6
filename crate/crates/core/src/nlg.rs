//! Template NLG. Templates are mined from (action, utterance) pairs by
//! delexicalizing slot values into `{Label.Slot}` placeholders; an action is
//! realized by covering its pairs with the largest matching templates first
//! and falling back to single-slot templates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::act::{ActMap, NONE, REQUESTED};
use crate::error::{Error, Result};
use crate::schema::{act_domain, Schema};
use crate::text::normalize;

pub const REQMORE_TEXT: &str = "is there anything else i can help you with ?";

/// Sorted `(Domain-Intent, Slot)` pairs.
pub type Signature = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub signature: Signature,
    pub text: String,
    pub source_count: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningReport {
    pub mined: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    pub fragments: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub action: ActMap,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateStore {
    index: BTreeMap<Signature, Template>,
}

fn placeholder(label: &str, slot: &str) -> String {
    format!("{{{label}.{slot}}}")
}

/// Values that are written out in text; `none` and `?` are not.
fn is_lexical(value: &str) -> bool {
    value != NONE && value != REQUESTED
}

fn word_char(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

/// Byte offset of the first whole-word occurrence of `needle` in `text`
/// that does not overlap `taken`.
fn find_free(text: &str, needle: &str, taken: &[(usize, usize)]) -> Option<usize> {
    let mut from = 0;
    while let Some(i) = text[from..].find(needle) {
        let start = from + i;
        let end = start + needle.len();
        let before = text[..start].chars().next_back();
        let after = text[end..].chars().next();
        let free = taken.iter().all(|&(s, e)| end <= s || start >= e);
        if free && !word_char(before) && !word_char(after) {
            return Some(start);
        }
        from = start + text[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

/// Replaces each `{name}` whose name is a key of `values`. Substituted text
/// is not rescanned, so values may contain braces.
pub fn fill_slots(template: &str, values: &BTreeMap<String, String>) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            out.push_str(&rest[open..]);
            return Ok(out);
        };
        let name = &after[..close];
        if is_placeholder_name(name) {
            let v = values.get(name).ok_or_else(|| Error::Template(name.to_string()))?;
            out.push_str(v);
        } else {
            out.push('{');
            out.push_str(name);
            out.push('}');
        }
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn is_placeholder_name(name: &str) -> bool {
    !name.is_empty()
        && !name.contains(char::is_whitespace)
        && !name.contains('{')
        && name.split_once('.').is_some_and(|(l, s)| !l.is_empty() && !s.is_empty())
}

fn placeholders(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else { break };
        let name = &after[..close];
        if is_placeholder_name(name) {
            out.push(name.to_string());
        }
        rest = &after[close + 1..];
    }
    out
}

fn signature_string(sig: &Signature) -> String {
    sig.iter().map(|(l, s)| format!("{l}.{s}")).collect::<Vec<_>>().join("|")
}

fn parse_signature(s: &str) -> Result<Signature> {
    let mut sig: Signature = s
        .split('|')
        .map(|p| {
            p.split_once('.')
                .filter(|(l, s)| !l.is_empty() && !s.is_empty())
                .map(|(l, s)| (l.to_string(), s.to_string()))
                .ok_or_else(|| Error::format("template store", format!("bad signature entry `{p}`")))
        })
        .collect::<Result<_>>()?;
    sig.sort();
    Ok(sig)
}

/// Delexicalizes one pair. Values are located longest first so a value
/// that is a substring of another is not claimed inside it.
fn delexicalize(action: &ActMap, text: &str) -> Option<Template> {
    let text = normalize(text);
    let mut items: Vec<(String, String, String)> = Vec::new();
    for (label, pairs) in &action.0 {
        for [slot, value] in pairs {
            if items.iter().any(|(l, s, _)| l == label && s == slot) {
                return None;
            }
            items.push((label.clone(), slot.clone(), normalize(value)));
        }
    }
    if items.is_empty() {
        return None;
    }
    let mut lexical: Vec<&(String, String, String)> = items.iter().filter(|(_, _, v)| is_lexical(v)).collect();
    lexical.sort_by(|a, b| b.2.len().cmp(&a.2.len()));
    let mut spans: Vec<(usize, usize, String)> = Vec::new();
    for (l, s, v) in lexical {
        if v.is_empty() {
            return None;
        }
        let taken: Vec<(usize, usize)> = spans.iter().map(|(a, b, _)| (*a, *b)).collect();
        let start = find_free(&text, v, &taken)?;
        spans.push((start, start + v.len(), placeholder(l, s)));
    }
    spans.sort();
    let mut out = String::new();
    let mut pos = 0;
    for (s, e, p) in spans {
        out.push_str(&text[pos..s]);
        out.push_str(&p);
        pos = e;
    }
    out.push_str(&text[pos..]);
    let mut signature: Signature = items.into_iter().map(|(l, s, _)| (l, s)).collect();
    signature.sort();
    Some(Template {
        signature,
        text: out,
        source_count: 1,
    })
}

/// Mines templates; pairs whose values cannot all be located are skipped.
pub fn mine_templates(corpus: &[CorpusEntry]) -> (TemplateStore, MiningReport) {
    let mut counts: BTreeMap<(Signature, String), usize> = BTreeMap::new();
    let mut report = MiningReport::default();
    for entry in corpus {
        match delexicalize(&entry.action, &entry.text) {
            Some(t) => {
                *counts.entry((t.signature, t.text)).or_default() += 1;
                report.mined += 1;
            }
            None => report.skipped += 1,
        }
    }
    let mut store = TemplateStore::default();
    for ((signature, text), source_count) in counts {
        store.offer(Template {
            signature,
            text,
            source_count,
        });
    }
    (store, report)
}

fn better(a: &Template, b: &Template) -> bool {
    (b.source_count, std::cmp::Reverse(b.text.len()), &b.text) < (a.source_count, std::cmp::Reverse(a.text.len()), &a.text)
}

fn slot_words(slot: &str) -> &str {
    match slot {
        "Addr" => "address",
        "Post" => "postcode",
        "Phone" => "phone number",
        "Fee" => "entrance fee",
        "Price" => "price range",
        "Stars" => "star rating",
        "Leave" => "departure time",
        "Arrive" => "arrival time",
        "Dest" => "destination",
        "Depart" => "departure",
        "People" => "number of people",
        "Stay" => "number of nights",
        "Ticket" => "ticket price",
        "Time" => "time",
        "Id" => "train id",
        "Ref" => "reference number",
        "Choice" => "number of options",
        other => other,
    }
}

fn floor_text(domain: &str, intent: &str, slot: &str, key_slot: &str) -> Option<String> {
    let label = format!("{}-{intent}", act_domain(domain));
    let p = placeholder(&label, slot);
    let w = slot_words(slot).to_lowercase();
    Some(match (intent, slot) {
        ("Inform", "Choice") => format!("there are {p} {domain} options that match ."),
        ("Inform", _) => format!("the {domain} {w} is {p} ."),
        ("Recommend", s) if s == key_slot => format!("i would recommend the {domain} {p} ."),
        ("Recommend", _) => format!("i would recommend a {domain} with {w} {p} ."),
        ("NoOffer", NONE) => format!("there is no {domain} matching your request ."),
        ("NoOffer", _) => format!("there is no {domain} with {w} {p} ."),
        ("Request", _) => format!("what {w} would you like for the {domain} ?"),
        ("Book", "Ref") => format!("your {domain} booking is confirmed , the reference number is {p} ."),
        ("Book", _) => format!("i have booked the {domain} {p} ."),
        _ => return None,
    })
}

const GENERAL: [(&str, &str); 4] = [
    ("general-greet", "hello , how can i help you ?"),
    ("general-welcome", "you are welcome ."),
    ("general-bye", "goodbye ."),
    ("general-reqmore", REQMORE_TEXT),
];

impl TemplateStore {
    /// Keeps `t` if its signature is new or it beats the current template
    /// (more sources, then shorter text).
    pub fn offer(&mut self, t: Template) {
        match self.index.get(&t.signature) {
            Some(cur) if !better(&t, cur) => {}
            _ => {
                self.index.insert(t.signature.clone(), t);
            }
        }
    }

    /// Adds a single-slot template for every domain-intent and slot the
    /// schema allows, wherever none was mined.
    pub fn with_floor(mut self, schema: &Schema) -> Self {
        for (domain, ds) in &schema.domains {
            let d = act_domain(domain);
            let mut slots: Vec<&str> = ds.slots.keys().map(String::as_str).collect();
            slots.push("Choice");
            slots.push(NONE);
            for intent in ["Inform", "Recommend", "NoOffer", "Request", "Book"] {
                for slot in &slots {
                    let allowed = match (intent, *slot) {
                        (_, NONE) => intent == "NoOffer",
                        ("Inform", _) => true,
                        (_, "Choice") => false,
                        ("Book", s) => s == "Ref" || s == ds.key_slot,
                        _ => true,
                    };
                    if !allowed {
                        continue;
                    }
                    let Some(text) = floor_text(domain, intent, slot, &ds.key_slot) else { continue };
                    let sig = vec![(format!("{d}-{intent}"), slot.to_string())];
                    self.index.entry(sig.clone()).or_insert(Template {
                        signature: sig,
                        text,
                        source_count: 0,
                    });
                }
            }
        }
        for (label, text) in GENERAL {
            let sig = vec![(label.to_string(), NONE.to_string())];
            self.index.entry(sig.clone()).or_insert(Template {
                signature: sig,
                text: text.to_string(),
                source_count: 0,
            });
        }
        self
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, sig: &Signature) -> Option<&Template> {
        self.index.get(sig)
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.index.values()
    }

    /// Bundled mined corpus plus the schema floor.
    pub fn builtin(schema: &Schema) -> Self {
        let corpus = builtin_corpus();
        mine_templates(&corpus).0.with_floor(schema)
    }

    /// `count<TAB>signature<TAB>text` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in self.index.values() {
            let _ = writeln!(out, "{}\t{}\t{}", t.source_count, signature_string(&t.signature), t.text);
        }
        out
    }

    pub fn from_reader(r: impl BufRead) -> Result<Self> {
        let mut store = TemplateStore::default();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, '\t');
            let (Some(c), Some(sig), Some(text)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::format("template store", format!("line {} has fewer than 3 fields", n + 1)));
            };
            let source_count = c
                .parse()
                .map_err(|_| Error::format("template store", format!("line {}: bad count `{c}`", n + 1)))?;
            let signature = parse_signature(sig)?;
            for p in placeholders(text) {
                let (l, s) = p.split_once('.').expect("placeholder has a dot");
                if !signature.iter().any(|(a, b)| a == l && b == s) {
                    return Err(Error::format(
                        "template store",
                        format!("line {}: placeholder `{p}` outside signature", n + 1),
                    ));
                }
            }
            store.offer(Template {
                signature,
                text: text.to_string(),
                source_count,
            });
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(fs::File::open(path)?))
    }

    /// Realizes `action`. Every lexical value appears verbatim.
    pub fn generate(&self, action: &ActMap) -> (String, Realization) {
        let items: Vec<(&str, &str, &str)> = action
            .0
            .iter()
            .flat_map(|(l, pairs)| pairs.iter().map(move |[s, v]| (l.as_str(), s.as_str(), v.as_str())))
            .collect();
        if items.is_empty() {
            return (
                REQMORE_TEXT.to_string(),
                Realization {
                    fragments: 1,
                    fallbacks: 0,
                },
            );
        }
        let mut used = vec![false; items.len()];
        let mut chosen: Vec<(usize, String)> = Vec::new();
        let mut stats = Realization::default();
        loop {
            let mut best: Option<(&Template, Vec<usize>)> = None;
            for t in self.index.values() {
                if best.as_ref().is_some_and(|(b, _)| b.signature.len() > t.signature.len()) {
                    continue;
                }
                let Some(cover) = self.cover(t, &items, &used) else { continue };
                let wins = match &best {
                    None => true,
                    Some((b, _)) => t.signature.len() > b.signature.len() || better(t, b),
                };
                if wins {
                    best = Some((t, cover));
                }
            }
            let Some((t, cover)) = best else { break };
            let values: BTreeMap<String, String> = cover
                .iter()
                .map(|&i| (format!("{}.{}", items[i].0, items[i].1), items[i].2.to_string()))
                .collect();
            let text = fill_slots(&t.text, &values).expect("cover supplies every placeholder");
            for &i in &cover {
                used[i] = true;
            }
            chosen.push((cover[0], text));
        }
        for (i, (_, slot, value)) in items.iter().enumerate() {
            if !used[i] {
                stats.fallbacks += 1;
                chosen.push((i, format!("the {slot} is {value} .")));
            }
        }
        chosen.sort_by_key(|(i, _)| *i);
        stats.fragments = chosen.len();
        (chosen.into_iter().map(|(_, t)| t).collect::<Vec<_>>().join(" "), stats)
    }

    /// Item indices the template covers, if it fits the unused items: each
    /// signature entry needs its own item, and a placeholder is present
    /// exactly when the item's value is lexical.
    fn cover(&self, t: &Template, items: &[(&str, &str, &str)], used: &[bool]) -> Option<Vec<usize>> {
        let ph = placeholders(&t.text);
        let mut cover = Vec::with_capacity(t.signature.len());
        for (l, s) in &t.signature {
            let i = (0..items.len()).find(|&i| !used[i] && !cover.contains(&i) && items[i].0 == l && items[i].1 == s)?;
            let has_ph = ph.iter().any(|p| p.split_once('.') == Some((l.as_str(), s.as_str())));
            if has_ph != is_lexical(items[i].2) {
                return None;
            }
            cover.push(i);
        }
        cover.sort();
        Some(cover)
    }
}

const BUILTIN_CORPUS: &str = include_str!("../data/nlg_corpus.jsonl");

pub fn builtin_corpus() -> Vec<CorpusEntry> {
    read_corpus(BUILTIN_CORPUS.as_bytes()).expect("bundled nlg corpus is valid")
}

/// One JSON object `{"action": .., "text": ..}` per line.
pub fn read_corpus(r: impl BufRead) -> Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn action(items: &[(&str, &str, &str)]) -> ActMap {
        let mut a = ActMap::new();
        for (l, s, v) in items {
            a.push(l, s, v);
        }
        a
    }

    fn phone_post() -> ActMap {
        action(&[
            ("Attraction-Inform", "Phone", "01223336265"),
            ("Attraction-Inform", "Post", "cb21jf"),
        ])
    }

    fn entry(a: ActMap, text: &str) -> CorpusEntry {
        CorpusEntry {
            action: a,
            text: text.into(),
        }
    }

    #[test]
    fn mines_two_slot_template() {
        let (store, report) = mine_templates(&[entry(
            phone_post(),
            "The attraction phone number is 01223336265. and its postcode is cb21jf.",
        )]);
        assert_eq!(report, MiningReport { mined: 1, skipped: 0 });
        let t = store.templates().next().unwrap();
        assert_eq!(
            t.text,
            "the attraction phone number is {Attraction-Inform.Phone}. and its postcode is {Attraction-Inform.Post}."
        );
        assert_eq!(t.signature.len(), 2);
    }

    #[test]
    fn missing_value_skips_and_duplicates_count() {
        let e = entry(action(&[("Hotel-Inform", "Area", "east")]), "it is in the east .");
        let bad = entry(action(&[("Hotel-Inform", "Area", "west")]), "it is in the east .");
        let (store, report) = mine_templates(&[e.clone(), e, bad]);
        assert_eq!(report, MiningReport { mined: 2, skipped: 1 });
        assert_eq!(store.templates().next().unwrap().source_count, 2);
    }

    #[test]
    fn longest_value_first_and_word_boundaries() {
        let e = entry(
            action(&[("Hotel-Inform", "Stars", "4"), ("Hotel-Inform", "Addr", "4 high street")]),
            "it has 4 stars and is at 4 high street .",
        );
        let (store, _) = mine_templates(&[e]);
        assert_eq!(
            store.templates().next().unwrap().text,
            "it has {Hotel-Inform.Stars} stars and is at {Hotel-Inform.Addr} ."
        );
        assert_eq!(find_free("cb21jf 2", "2", &[]), Some(7));
    }

    #[test]
    fn fill_slots_cases() {
        let mut v = BTreeMap::new();
        assert_eq!(fill_slots("no placeholders here .", &v).unwrap(), "no placeholders here .");
        v.insert("a.b".to_string(), "x".to_string());
        assert_eq!(fill_slots("{a.b}", &v).unwrap(), "x");
        v.insert("a.b".to_string(), "{c.d}".to_string());
        assert_eq!(fill_slots("<{a.b}>", &v).unwrap(), "<{c.d}>");
        assert!(matches!(fill_slots("{c.d}", &v), Err(Error::Template(p)) if p == "c.d"));
        assert_eq!(fill_slots("{ not a placeholder }", &v).unwrap(), "{ not a placeholder }");
    }

    #[test]
    fn multi_intent_versus_single_intent() {
        let schema = Schema::builtin();
        let (mined, _) = mine_templates(&[entry(
            phone_post(),
            "the attraction phone number is 01223336265 . and its postcode is cb21jf .",
        )]);
        let multi = mined.with_floor(&schema);
        let (text, r) = multi.generate(&phone_post());
        assert_eq!(text, "the attraction phone number is 01223336265 . and its postcode is cb21jf .");
        assert_eq!(r.fragments, 1);
        let single = TemplateStore::default().with_floor(&schema);
        let (text, r) = single.generate(&phone_post());
        assert_eq!(text, "the attraction phone number is 01223336265 . the attraction postcode is cb21jf .");
        assert_eq!(r.fragments, 2);
    }

    #[test]
    fn empty_action_and_fallback() {
        let store = TemplateStore::default();
        assert_eq!(store.generate(&ActMap::new()).0, REQMORE_TEXT);
        let (text, r) = store.generate(&action(&[("Moon-Inform", "Crater", "tycho")]));
        assert_eq!(text, "the Crater is tycho .");
        assert_eq!(r.fallbacks, 1);
    }

    #[test]
    fn store_text_round_trip() {
        let store = TemplateStore::builtin(&Schema::builtin());
        let text = store.to_text();
        let back = TemplateStore::from_reader(text.as_bytes()).unwrap();
        assert_eq!(back, store);
        assert!(TemplateStore::from_reader("1\tA-Inform.X\tthe {B-Inform.Y}".as_bytes()).is_err());
        assert!(TemplateStore::from_reader("x\tA-Inform.X\tthe".as_bytes()).is_err());
    }

    #[test]
    fn bundled_corpus_mines_cleanly() {
        let (store, report) = mine_templates(&builtin_corpus());
        assert_eq!(report.skipped, 0);
        let sig = vec![
            ("Attraction-Inform".to_string(), "Choice".to_string()),
            ("Attraction-Recommend".to_string(), "Name".to_string()),
        ];
        assert_eq!(store.get(&sig).unwrap().source_count, 3);
    }

    #[test]
    fn request_template_has_no_placeholder() {
        let store = TemplateStore::default().with_floor(&Schema::builtin());
        let (text, r) = store.generate(&action(&[("Hotel-Request", "Stay", "?")]));
        assert_eq!(text, "what number of nights would you like for the hotel ?");
        assert_eq!(r.fallbacks, 0);
    }
}
