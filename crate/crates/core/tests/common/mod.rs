#![allow(dead_code)]

use std::collections::BTreeSet;

use hceds::act::{ActMap, DialogAct, Speaker};
use hceds::db::Database;
use hceds::eval::{DialogueLog, Outcome, TurnRecord};
use hceds::hcenlu::{NluPipeline, TrainingExample};
use hceds::schema::{act_domain, Schema};
use hceds::sim::{DomainGoal, UserGoal};
use hceds::text::SlotSpan;
use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixtures() -> (Schema, Database) {
    let s = Schema::builtin();
    let db = Database::builtin().with_numeric(&s);
    (s, db)
}

/// A system action drawn from the schema: values from real entities,
/// sometimes replaced by odd strings.
pub fn random_system_action<R: Rng>(rng: &mut R, schema: &Schema, db: &Database) -> ActMap {
    let domains: Vec<&String> = schema.domains.keys().collect();
    let mut action = ActMap::new();
    let n_labels = rng.gen_range(1..=3);
    for _ in 0..n_labels {
        if rng.gen_bool(0.1) {
            let g = ["general-reqmore", "general-welcome", "general-bye", "general-greet"].choose(rng).unwrap();
            action.push(g, "none", "none");
            continue;
        }
        let d = *domains.choose(rng).unwrap();
        let ds = schema.domain(d).unwrap();
        let records = db.records(d).unwrap();
        let entity = records.choose(rng);
        let intent = ["Inform", "Recommend", "NoOffer", "Request", "Book", "Inform"].choose(rng).unwrap();
        let label = format!("{}-{}", act_domain(d), intent);
        let slots: Vec<&String> = ds.slots.keys().collect();
        let k = rng.gen_range(1..=slots.len().min(4));
        let mut chosen: Vec<&String> = slots.choose_multiple(rng, k).copied().collect();
        if *intent == "Book" {
            chosen = vec![&ds.key_slot];
        }
        for slot in chosen {
            if action.contains(&label, slot) {
                continue;
            }
            let value = if *intent == "Request" {
                "?".to_string()
            } else if rng.gen_bool(0.15) {
                format!("v{}-{}", rng.gen_range(0..1000), ["x", "y's", "z z"].choose(rng).unwrap())
            } else {
                entity
                    .and_then(|e| ds.db_field(slot).and_then(|f| e.get(f)))
                    .filter(|v| !v.is_empty())
                    .cloned()
                    .unwrap_or_else(|| format!("{}{}", slot.to_lowercase(), rng.gen_range(0..100)))
            };
            action.push(&label, slot, &value);
        }
        if *intent == "Book" {
            let r: String = (0..8).map(|_| *b"ABCDEFGH12345678".choose(rng).unwrap() as char).collect();
            action.push(&label, "Ref", &r);
        }
    }
    action
}

/// Values that must show up in the text.
pub fn lexical_values(action: &ActMap) -> Vec<String> {
    action
        .0
        .values()
        .flatten()
        .map(|[_, v]| v.clone())
        .filter(|v| v != "none" && v != "?" && !v.is_empty())
        .collect()
}

fn goal(parts: &[(&str, &[(&str, &str)], &[&str], &[(&str, &str)])]) -> UserGoal {
    let mut g = UserGoal::default();
    for (d, c, r, b) in parts {
        g.domains.insert(
            d.to_string(),
            DomainGoal {
                constraints: c.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
                requests: r.iter().map(|s| s.to_string()).collect(),
                book: b.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<IndexMap<_, _>>(),
            },
        );
    }
    g
}

fn turn(action: &[(&str, &str, &str)]) -> TurnRecord {
    let mut a = ActMap::new();
    for (l, s, v) in action {
        a.push(l, s, v);
    }
    TurnRecord {
        user_acts: vec![DialogAct::bare("general", "thank")],
        predicted_acts: vec![],
        user_utterance: String::new(),
        state_hash: String::new(),
        system_action: a,
        system_utterance: String::new(),
    }
}

/// 24 episodes over five goals with four answering behaviours: all
/// answered, one missing, extra slots, and counts/names/echoes only noise.
pub fn hand_built_logs() -> Vec<DialogueLog> {
    let booking = [("People", "2"), ("Day", "monday"), ("Stay", "3")];
    let goals = [
        goal(&[("attraction", &[("Type", "museum")], &["Addr", "Fee"], &[])]),
        goal(&[("hotel", &[("Price", "moderate")], &["Post"], &booking)]),
        goal(&[
            ("attraction", &[], &["Phone"], &[]),
            ("hotel", &[("Area", "north")], &["Addr", "Phone"], &[]),
        ]),
        goal(&[("taxi", &[("Leave", "14:30")], &["Car", "Phone"], &[])]),
        goal(&[("restaurant", &[("Food", "chinese")], &["Addr"], &[("People", "4"), ("Day", "friday"), ("Time", "19:00")])]),
    ];
    let mut logs = Vec::new();
    for k in 0..24 {
        let g = goals[k % goals.len()].clone();
        let pattern = k % 4;
        let mut turns = Vec::new();
        let mut booked = Vec::new();
        for (d, dg) in &g.domains {
            let label = format!("{}-Inform", act_domain(d));
            let reqs: Vec<&String> = if pattern == 1 { dg.requests.iter().skip(1).collect() } else { dg.requests.iter().collect() };
            let mut pairs: Vec<(String, String, String)> =
                reqs.iter().map(|s| (label.clone(), s.to_string(), "val".to_string())).collect();
            match pattern {
                2 => {
                    pairs.push((label.clone(), "Post".into(), "cb11aa".into()));
                    pairs.push((format!("{}-Recommend", act_domain(d)), "Area".into(), "east".into()));
                }
                3 => {
                    pairs.push((label.clone(), "Choice".into(), "4".into()));
                    pairs.push((format!("{}-Recommend", act_domain(d)), "Name".into(), "somewhere".into()));
                    for c in dg.constraints.keys() {
                        pairs.push((label.clone(), c.clone(), "echo".into()));
                    }
                }
                _ => {}
            }
            let refs: Vec<(&str, &str, &str)> = pairs.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
            turns.push(turn(&refs));
            if !dg.book.is_empty() && k % 3 != 0 {
                let l = format!("{}-Book", act_domain(d));
                turns.push(turn(&[(&l, "Name", "x"), (&l, "Ref", "ABCD1234")]));
                booked.push(d.clone());
            }
        }
        for _ in 0..(k % 5) {
            turns.push(turn(&[("general-reqmore", "none", "none")]));
        }
        let need_book = g.domains.values().any(|d| !d.book.is_empty());
        let success = pattern != 1 && (!need_book || k % 3 != 0);
        logs.push(DialogueLog {
            episode: k,
            seed: k as u64,
            goal: g,
            turns,
            outcome: Outcome {
                success,
                booked,
                terminated: k != 23,
                unanswered: Vec::new(),
                error: None,
            },
        });
    }
    logs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteMetrics {
    pub success_rate: f64,
    pub average_return: f64,
    pub average_turns: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub book_rate: f64,
}

/// Recount written without the library's helpers: plain loops and
/// sorted, deduplicated vectors.
pub fn brute_force_metrics(logs: &[DialogueLog], schema: &Schema, max_turns: usize) -> BruteMetrics {
    let (mut succ, mut ret, mut turns) = (0.0, 0.0, 0.0);
    let (mut tp, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    let (mut need, mut got) = (0usize, 0usize);
    for log in logs {
        let t = log.turns.len() as f64;
        turns += t;
        if log.outcome.success {
            succ += 1.0;
            ret += 2.0 * max_turns as f64 - t;
        } else {
            ret += -(max_turns as f64) - t;
        }
        let mut gold: Vec<String> = Vec::new();
        for (d, g) in &log.goal.domains {
            for r in &g.requests {
                gold.push(format!("{d}/{r}"));
            }
        }
        gold.sort();
        gold.dedup();
        let mut pred: Vec<String> = Vec::new();
        for tr in &log.turns {
            for (label, pairs) in &tr.system_action.0 {
                let mut it = label.splitn(2, '-');
                let d = it.next().unwrap().to_lowercase();
                let intent = it.next().unwrap_or("");
                if intent != "Inform" && intent != "Recommend" {
                    continue;
                }
                let Ok(ds) = schema.domain(&d) else { continue };
                for [slot, _] in pairs {
                    if ["Choice", "Ref", "Name", "none"].contains(&slot.as_str()) {
                        continue;
                    }
                    if !ds.requestable.iter().any(|r| r == slot) {
                        continue;
                    }
                    if log.goal.domains.get(&d).is_some_and(|g| g.constraints.keys().any(|c| c == slot)) {
                        continue;
                    }
                    pred.push(format!("{d}/{slot}"));
                }
            }
        }
        pred.sort();
        pred.dedup();
        n_gold += gold.len();
        n_pred += pred.len();
        tp += pred.iter().filter(|p| gold.contains(p)).count();
        for (d, g) in &log.goal.domains {
            if !g.book.is_empty() {
                need += 1;
                if log.outcome.booked.iter().any(|b| b == d) {
                    got += 1;
                }
            }
        }
    }
    let n = logs.len() as f64;
    let p = if n_pred == 0 { 0.0 } else { tp as f64 / n_pred as f64 };
    let r = if n_gold == 0 { 0.0 } else { tp as f64 / n_gold as f64 };
    BruteMetrics {
        success_rate: succ / n,
        average_return: ret / n,
        average_turns: turns / n,
        precision: p,
        recall: r,
        f1: if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 },
        book_rate: if need == 0 { 1.0 } else { got as f64 / need as f64 },
    }
}

/// (tp, fp, fn) triples for intent, tag and overall.
pub type Counts = [(usize, usize, usize); 3];

fn count<T: Ord + Clone>(gold: &[T], pred: &[T]) -> (usize, usize, usize) {
    let mut g = gold.to_vec();
    g.sort();
    g.dedup();
    let mut p = pred.to_vec();
    p.sort();
    p.dedup();
    let tp = p.iter().filter(|x| g.binary_search(x).is_ok()).count();
    (tp, p.len() - tp, g.len() - tp)
}

/// Word-level spans read off subword tags: `B` opens, a matching `I`
/// extends, a stray `I` opens, `X` or `O` on a word start closes.
fn spans_from_tags(tags: &[String], word_of_subword: &[usize]) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<(String, usize, usize)> = None;
    for (i, t) in tags.iter().enumerate() {
        let w = word_of_subword[i];
        let initial = i == 0 || word_of_subword[i - 1] != w;
        if !initial {
            continue;
        }
        if let Some(l) = t.strip_prefix("B-") {
            out.extend(open.take());
            open = Some((l.to_string(), w, w));
        } else if let Some(l) = t.strip_prefix("I-") {
            match &mut open {
                Some((ol, _, e)) if ol == l => *e = w,
                _ => {
                    out.extend(open.take());
                    open = Some((l.to_string(), w, w));
                }
            }
        } else {
            out.extend(open.take());
        }
    }
    out.extend(open);
    out
}

fn acts_from(labels: &[String], spans: &[(String, usize, usize)], words: &[String]) -> Vec<String> {
    let mut acts = Vec::new();
    let mut covered = BTreeSet::new();
    for (label, a, b) in spans {
        let Some((di, slot)) = label.split_once('+') else { continue };
        let Some((d, i)) = di.split_once('-') else { continue };
        let value = if i == "Request" { "?".to_string() } else { words[*a..=*b].join(" ") };
        acts.push(format!("{d}|{i}|{slot}|{value}"));
        covered.insert(di.to_string());
    }
    for l in labels {
        if !covered.contains(l) {
            if let Some((d, i)) = l.split_once('-') {
                acts.push(format!("{d}|{i}|none|none"));
            }
        }
    }
    acts
}

/// Parses every example and counts matches without the library scorer.
pub fn brute_force_nlu(p: &NluPipeline<f64>, examples: &[TrainingExample]) -> Counts {
    let mut c = [(0, 0, 0); 3];
    let mut add = |k: usize, x: (usize, usize, usize)| {
        c[k].0 += x.0;
        c[k].1 += x.1;
        c[k].2 += x.2;
    };
    for ex in examples {
        let out = p.parse(&ex.utterance, &ex.context).unwrap();
        let tok = p.tokenize(&ex.utterance);
        let gold_labels: Vec<String> = ex.labels.iter().cloned().collect();
        add(0, count(&gold_labels, &out.labels));
        let gold_spans: Vec<(String, usize, usize)> =
            ex.spans.iter().map(|s| (s.label.clone(), s.first_word, s.last_word)).collect();
        let pred_spans = spans_from_tags(&out.tags, &tok.word_of_subword);
        add(1, count(&gold_spans, &pred_spans));
        add(
            2,
            count(
                &acts_from(&gold_labels, &gold_spans, &tok.words),
                &acts_from(&out.labels, &pred_spans, &tok.words),
            ),
        );
    }
    c
}

pub fn f1_of((tp, fp, fn_): (usize, usize, usize)) -> f64 {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ex(text: &str, ctx: &[(Speaker, &str)], labels: &[&str], spans: &[(&str, usize, usize)]) -> TrainingExample {
    TrainingExample::new(
        text,
        ctx.iter().map(|(s, t)| (*s, t.to_string())).collect(),
        labels,
        spans.iter().map(|(l, a, b)| SlotSpan::new(*l, *a, *b)).collect(),
    )
}

/// Written out by hand; includes multi-label turns, implicit domains and
/// multi-word values.
pub fn hand_annotated_examples() -> Vec<TrainingExample> {
    use Speaker::{System as S, User as U};
    vec![
        ex("i prefer something related to museum .", &[], &["Attraction-Inform"], &[("Attraction-Inform+Type", 5, 5)]),
        ex(
            "what is the entrance fee ? what is the address ?",
            &[(U, "i prefer something related to museum ."), (S, "there are 23 museums . i recommend broughton house gallery .")],
            &["Attraction-Request"],
            &[("Attraction-Request+Fee", 4, 4), ("Attraction-Request+Addr", 9, 9)],
        ),
        ex("i am looking for a hotel in the moderate price range .", &[], &["Hotel-Inform"], &[("Hotel-Inform+Price", 8, 8)]),
        ex(
            "i want free parking .",
            &[(U, "i am looking for a hotel ."), (S, "there are 33 hotels .")],
            &["Hotel-Inform"],
            &[("Hotel-Inform+Parking", 3, 3)],
        ),
        ex(
            "what is the address of the attraction ? and the postcode of the hotel ?",
            &[],
            &["Attraction-Request", "Hotel-Request"],
            &[("Attraction-Request+Addr", 3, 3), ("Hotel-Request+Post", 10, 10)],
        ),
        ex("it should be in the north .", &[(S, "what area would you like ?")], &["Hotel-Inform"], &[("Hotel-Inform+Area", 5, 5)]),
        ex("thanks , bye .", &[], &["general-thank", "general-bye"], &[]),
        ex("please book it for 2 people on monday .", &[], &["Hotel-Inform"], &[("Hotel-Inform+People", 4, 4), ("Hotel-Inform+Day", 7, 7)]),
        ex(
            "i am looking for an attraction called christ's college .",
            &[],
            &["Attraction-Inform"],
            &[("Attraction-Inform+Name", 7, 8)],
        ),
        ex("with any area please .", &[], &["Hotel-Inform"], &[("Hotel-Inform+Area", 1, 1)]),
        ex("hello", &[], &["general-greet"], &[]),
        ex("what is the phone number ?", &[(S, "i recommend a and b guest house .")], &["Hotel-Request"], &[("Hotel-Request+Phone", 3, 3)]),
    ]
}
