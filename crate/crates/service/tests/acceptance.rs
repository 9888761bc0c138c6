//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::http::Request;
use hceds::act::{ActMap, DialogAct};
use hceds::embeddings::{CharCnn, CharVocab};
use hceds::eval::{compute_metrics, run_episodes, DialogueLog, EvalConfig, EvalMode, Outcome, TurnRecord};
use hceds::gradcheck::{central_difference, gradcheck, relative_error};
use hceds::hcenlu::{
    checkpoint, examples_from_corpus, nlu_component_metrics, HcenluModel, ModelInput, NluConfig, NluPipeline, Targets,
    TokenFeatures, TrainConfig, TrainingExample,
};
use hceds::nlg::{mine_templates, CorpusEntry, TemplateStore};
use hceds::nn::{multilabel_bce_loss, softmax_slice, tag_xent_loss, Affine, BiLstm, BilinearAttention, LstmCell};
use hceds::policy::{is_close_session, DialogueManager};
use hceds::sim::GoalConfig;
use hceds::state::{fulfilled_requests, init_state, update, DialogState};
use hceds::tensor::dot;
use hceds::text::{biox_align, biox_decode, BioxSequence, BpeCodec, SlotSpan, Tag};
use hceds::toy::{context_dependent_slice, generate_toy_corpus, multi_label_turns, toy_nlu_config, toy_train_config, train_toy, ToyConfig};
use hceds::DialogueSystem;
use hceds_service::server::{MessageResponse, OpenResponse, Snapshot};
use hceds_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

struct Outcomes {
    failed: usize,
}

impl Outcomes {
    fn report(&mut self, n: usize, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} [{n:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn rvec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_input_error(analytic: &[f64], x: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    (0..x.len())
        .map(|i| {
            let n = central_difference(1e-5, |d| {
                let mut y = x.to_vec();
                y[i] += d;
                f(&y)
            });
            relative_error(analytic[i], n)
        })
        .fold(0.0, f64::max)
}

/// Largest relative error over every op and the full loss, and the same for
/// the linear layer alone.
fn gradient_checks() -> (f64, f64, Vec<(String, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut rows: Vec<(String, f64)> = Vec::new();

    let mut lin = Affine::<f64>::new("lin", 5, 4, &mut rng);
    let x = rvec(&mut rng, 5);
    let w = rvec(&mut rng, 4);
    let r = gradcheck(&mut lin, 1e-5, |m| {
        let y = m.forward(&x);
        let mut dx = vec![0.0; 5];
        m.backward(&x, &w, &mut dx);
        Ok(dot(&y, &w))
    })
    .unwrap();
    let mut dx = vec![0.0; 5];
    lin.backward(&x, &w, &mut dx);
    let linear = r.max_relative_error.max(max_input_error(&dx, &x, |x| dot(&lin.forward(x), &w)));

    let logits = rvec(&mut rng, 6);
    let p = softmax_slice(&logits);
    let wv = rvec(&mut rng, 6);
    let mut ds = vec![0.0; 6];
    hceds::nn::activation::softmax_backward(&p, &wv, &mut ds);
    rows.push(("softmax".into(), max_input_error(&ds, &logits, |x| dot(&softmax_slice(x), &wv))));

    let targets = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    let (_, g) = multilabel_bce_loss(&logits, &targets).unwrap();
    rows.push(("bce".into(), max_input_error(&g, &logits, |x| multilabel_bce_loss(x, &targets).unwrap().0)));

    let steps: Vec<Vec<f64>> = (0..4).map(|_| rvec(&mut rng, 5)).collect();
    let gold = [0, 3, 4, 1];
    let (_, g) = tag_xent_loss(&steps, &gold).unwrap();
    let flat: Vec<f64> = steps.concat();
    let gflat: Vec<f64> = g.concat();
    rows.push((
        "tag xent".into(),
        max_input_error(&gflat, &flat, |x| {
            let s: Vec<Vec<f64>> = x.chunks(5).map(<[f64]>::to_vec).collect();
            tag_xent_loss(&s, &gold).unwrap().0
        }),
    ));

    let mut cell = LstmCell::<f64>::new("cell", 3, 4, &mut rng);
    let (x, h, c, wh, wc) = (rvec(&mut rng, 3), rvec(&mut rng, 4), rvec(&mut rng, 4), rvec(&mut rng, 4), rvec(&mut rng, 4));
    let cell_loss = |m: &LstmCell<f64>, x: &[f64]| {
        let (h2, c2, _) = m.step(x, &h, &c);
        dot(&h2, &wh) + dot(&c2, &wc)
    };
    let r = gradcheck(&mut cell, 1e-5, |m| {
        let (h2, c2, cache) = m.step(&x, &h, &c);
        let mut dx = vec![0.0; 3];
        m.step_backward(&cache, &wh, &wc, &mut dx);
        Ok(dot(&h2, &wh) + dot(&c2, &wc))
    })
    .unwrap();
    let (_, _, cache) = cell.step(&x, &h, &c);
    let mut dx = vec![0.0; 3];
    cell.step_backward(&cache, &wh, &wc, &mut dx);
    rows.push(("lstm cell".into(), r.max_relative_error.max(max_input_error(&dx, &x, |x| cell_loss(&cell, x)))));

    let mut enc = BiLstm::<f64>::new("enc", 3, 4, &mut rng);
    let seq: Vec<Vec<f64>> = (0..5).map(|_| rvec(&mut rng, 3)).collect();
    let wo: Vec<Vec<f64>> = (0..5).map(|_| rvec(&mut rng, 8)).collect();
    let enc_loss = |m: &BiLstm<f64>, s: &[Vec<f64>]| m.forward(s).unwrap().0.iter().zip(&wo).map(|(a, b)| dot(a, b)).sum::<f64>();
    let r = gradcheck(&mut enc, 1e-5, |m| {
        let (out, cache) = m.forward(&seq)?;
        m.backward(&cache, &wo);
        Ok(out.iter().zip(&wo).map(|(a, b)| dot(a, b)).sum())
    })
    .unwrap();
    let (_, cache) = enc.forward(&seq).unwrap();
    let d_in = enc.backward(&cache, &wo).concat();
    let flat = seq.concat();
    let e_in = max_input_error(&d_in, &flat, |x| enc_loss(&enc, &x.chunks(3).map(<[f64]>::to_vec).collect::<Vec<_>>()));
    rows.push(("bilstm".into(), r.max_relative_error.max(e_in)));

    let mut att = BilinearAttention::<f64>::new("att", 3, 4, &mut rng);
    let q = rvec(&mut rng, 3);
    let keys: Vec<Vec<f64>> = (0..5).map(|_| rvec(&mut rng, 4)).collect();
    let wa = rvec(&mut rng, 4);
    let r = gradcheck(&mut att, 1e-5, |m| {
        let (ctx, cache) = m.forward(&q, &keys)?;
        let mut dq = vec![0.0; 3];
        let mut dk = vec![vec![0.0; 4]; 5];
        m.backward(&q, &keys, &cache, &wa, &mut dq, &mut dk);
        Ok(dot(&ctx, &wa))
    })
    .unwrap();
    let (_, cache) = att.forward(&q, &keys).unwrap();
    let mut dq = vec![0.0; 3];
    let mut dk = vec![vec![0.0; 4]; 5];
    att.backward(&q, &keys, &cache, &wa, &mut dq, &mut dk);
    let eq = max_input_error(&dq, &q, |x| dot(&att.forward(x, &keys).unwrap().0, &wa));
    let ek = max_input_error(&dk.concat(), &keys.concat(), |x| {
        let k: Vec<Vec<f64>> = x.chunks(4).map(<[f64]>::to_vec).collect();
        dot(&att.forward(&q, &k).unwrap().0, &wa)
    });
    rows.push(("attention".into(), r.max_relative_error.max(eq).max(ek)));

    let mut cnn = CharCnn::<f64>::new(CharVocab::build(&["parking"]), 3, 4, 3, &mut rng).unwrap();
    cnn.bias.value.data_mut().copy_from_slice(&[0.1, -0.2, 0.3, 0.05]);
    let wc4 = [0.7, -1.3, 0.4, 2.0];
    let r = gradcheck(&mut cnn, 1e-6, |m: &mut CharCnn<f64>| {
        let mut loss = 0.0;
        for word in ["park", "ing", "x"] {
            let (y, cache) = m.forward(word);
            loss += dot(&y, &wc4);
            m.backward(&cache, &wc4);
        }
        Ok(loss)
    })
    .unwrap();
    rows.push(("char cnn".into(), r.max_relative_error));

    let tiny = NluConfig {
        ctx_dim: 3,
        char_dim: 2,
        n_filters: 3,
        char_width: 3,
        token_hidden: 2,
        sentence_hidden: 3,
        window: 2,
        ..NluConfig::default()
    };
    let features = |n: usize, rng: &mut ChaCha8Rng| TokenFeatures {
        ctx: (0..n).map(|_| rvec(rng, 3)).collect(),
        chars: (0..n).map(|i| (0..(i % 3 + 1)).map(|_| rng.gen_range(1..7)).collect()).collect(),
    };
    let input = ModelInput {
        uu: features(6, &mut rng),
        dc: features(5, &mut rng),
    };
    let targets = Targets {
        labels: vec![1.0, 0.0],
        tags: vec![Some(2), None, Some(3), Some(0), Some(4), None],
    };
    for (name, cfg) in [
        ("full loss", tiny.clone()),
        ("full loss, no tag context", NluConfig { tag_context: false, ..tiny.clone() }),
        ("full loss, no intent attention", NluConfig { intent_attention: false, ..tiny.clone() }),
        ("full loss, no char cnn", NluConfig { use_char_cnn: false, ..tiny.clone() }),
    ] {
        let mut model = HcenluModel::<f64>::new(
            cfg,
            vec!["A-Inform".into(), "B-Request".into()],
            ["O", "X", "B-a", "I-a", "B-b"].map(String::from).to_vec(),
            CharVocab::build(&["abcde"]),
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let r = gradcheck(&mut model, 1e-5, |m: &mut HcenluModel<f64>| {
            let mut drop_rng = ChaCha8Rng::seed_from_u64(99);
            m.compute_loss(&[(&input, &targets)], Some(&mut drop_rng))
        })
        .unwrap();
        rows.push((name.into(), r.max_relative_error));
    }
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    (worst, linear, rows)
}

fn attention_trials() -> (usize, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut bad, mut max_sum, mut max_perm) = (0, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (qd, kd, n) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..9));
        let att = BilinearAttention::<f64>::new("a", qd, kd, &mut rng);
        let q: Vec<f64> = (0..qd).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let keys: Vec<Vec<f64>> = (0..n).map(|_| (0..kd).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect();
        let (ctx, cache) = att.forward(&q, &keys).unwrap();
        max_sum = max_sum.max((cache.weights.iter().sum::<f64>() - 1.0).abs());
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| keys[i].clone()).collect();
        let (ctx2, _) = att.forward(&q, &shuffled).unwrap();
        for (a, b) in ctx.iter().zip(&ctx2) {
            max_perm = max_perm.max((a - b).abs());
        }
        let (single, c1) = att.forward(&q, &keys[..1]).unwrap();
        if c1.weights != [1.0] || single != keys[0] {
            bad += 1;
        }
    }
    (bad, max_sum, max_perm)
}

const BIOX_WORDS: [&str; 24] = [
    "i", "want", "a", "cheap", "guesthouse", "in", "the", "north", "free", "parking", "museum", "14:30", "christ's", "college",
    "please", "?", "broughton", "house", "gallery", "moderate", "price", "range", "address", "postcode",
];
const BIOX_LABELS: [&str; 6] = [
    "Hotel-Inform+Area",
    "Hotel-Inform+Parking",
    "Attraction-Inform+Type",
    "Attraction-Inform+Name",
    "Hotel-Request+Post",
    "Taxi-Inform+Leave",
];

fn random_annotated(rng: &mut ChaCha8Rng) -> (String, Vec<SlotSpan>) {
    let n = rng.gen_range(1..16);
    let words: Vec<String> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                (0..rng.gen_range(1..12)).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
            } else {
                BIOX_WORDS.choose(rng).unwrap().to_string()
            }
        })
        .collect();
    let mut spans = Vec::new();
    let mut w = 0;
    while w < n {
        if rng.gen_bool(0.3) {
            let end = (w + rng.gen_range(0..3)).min(n - 1);
            spans.push(SlotSpan::new(*BIOX_LABELS.choose(rng).unwrap(), w, end));
            w = end + 1;
        } else {
            w += 1;
        }
    }
    (words.join(" "), spans)
}

fn biox_round_trip() -> (usize, usize, usize, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let data: Vec<(String, Vec<SlotSpan>)> = (0..1000).map(|_| random_annotated(&mut rng)).collect();
    let texts: Vec<&str> = data.iter().map(|d| d.0.as_str()).collect();
    let codec = BpeCodec::train(&texts, 4000).unwrap();
    let mut mismatches = 0;
    let mut split_words = 0;
    for (text, spans) in &data {
        let tok = codec.tokenize(text);
        split_words += tok.subwords.len() - tok.words.len();
        let dec = biox_decode(&tok, &biox_align(&tok, spans).unwrap());
        if dec.spans != *spans || dec.repairs != 0 {
            mismatches += 1;
        }
    }
    // malformed sequences on "i want free parking"
    let tok = codec.tokenize("i want free parking");
    let seq = |tags: Vec<Tag>| {
        let mut full = Vec::new();
        for (i, t) in tags.into_iter().enumerate() {
            full.push(t);
            let pieces = tok.word_of_subword.iter().filter(|&&w| w == i).count();
            full.extend(std::iter::repeat_n(Tag::X, pieces - 1));
        }
        BioxSequence { tags: full }
    };
    let l = |s: &str| s.to_string();
    let stray_i = biox_decode(&tok, &seq(vec![Tag::O, Tag::O, Tag::O, Tag::I(l("Hotel-Inform+Parking"))]));
    let switched = biox_decode(
        &tok,
        &seq(vec![Tag::B(l("Hotel-Inform+Area")), Tag::I(l("Hotel-Inform+Parking")), Tag::O, Tag::O]),
    );
    let x_start = biox_decode(&tok, &seq(vec![Tag::B(l("Hotel-Inform+Area")), Tag::X, Tag::O, Tag::O]));
    let negatives_ok = stray_i.repairs == 1
        && stray_i.spans == vec![SlotSpan::new("Hotel-Inform+Parking", 3, 3)]
        && switched.repairs == 1
        && switched.spans.len() == 2
        && x_start.repairs == 1
        && x_start.spans == vec![SlotSpan::new("Hotel-Inform+Area", 0, 0)]
        && biox_align(&tok, &[SlotSpan::new("a", 1, 2), SlotSpan::new("b", 2, 3)]).is_err()
        && biox_align(&tok, &[SlotSpan::new("a", 2, 4)]).is_err()
        && biox_align(&tok, &[SlotSpan::new("a", 2, 1)]).is_err();
    (data.len(), mismatches, split_words, negatives_ok)
}

struct PolicyRun {
    dm: DialogueManager,
    state: DialogState,
    rng: ChaCha8Rng,
}

impl PolicyRun {
    fn new() -> Self {
        let dm = DialogueManager::default();
        let state = init_state(&dm.schema);
        PolicyRun { dm, state, rng: ChaCha8Rng::seed_from_u64(8) }
    }

    fn turn(&mut self, acts: &[DialogAct]) -> ActMap {
        self.state = update(&self.state, &self.dm.schema, acts, "");
        let action = self.dm.decide(&self.state, &mut self.rng);
        self.state = fulfilled_requests(&self.state, &action, "");
        action
    }
}

fn shape(a: &ActMap) -> BTreeSet<String> {
    a.0.iter().flat_map(|(l, ps)| ps.iter().map(move |[s, _]| format!("{l}.{s}"))).collect()
}

fn policy_goldens() -> (usize, usize) {
    let a = DialogAct::new;
    let mut passed = 0;
    let college = PolicyRun::new().turn(&[a("Attraction", "Inform", "Type", "college")]);
    passed += (college.to_string() == r#"{"Attraction-Recommend":[["Name","christ's college"]]}"#) as usize;

    let mut r = PolicyRun::new();
    let turns: Vec<(Vec<DialogAct>, Vec<&str>, Vec<(&str, &str, &str)>)> = vec![
        (
            vec![a("Attraction", "Inform", "Type", "museum")],
            vec!["Attraction-Inform.Choice", "Attraction-Recommend.Name"],
            vec![("Attraction-Inform", "Choice", "23"), ("Attraction-Recommend", "Name", "broughton house gallery")],
        ),
        (
            vec![a("Attraction", "Request", "Fee", "?"), a("Attraction", "Request", "Addr", "?")],
            vec!["Attraction-Inform.Addr", "Attraction-Inform.Fee"],
            vec![("Attraction-Inform", "Addr", "98 king street"), ("Attraction-Inform", "Fee", "free")],
        ),
        (
            vec![a("Hotel", "Inform", "Price", "moderate")],
            vec!["Hotel-Inform.Choice", "Hotel-Recommend.Name"],
            vec![("Hotel-Inform", "Choice", "18"), ("Hotel-Recommend", "Name", "a and b guest house")],
        ),
        (
            vec![a("Attraction", "Request", "Addr", "?"), a("Hotel", "Request", "Addr", "?"), a("Hotel", "Request", "Post", "?")],
            vec!["Attraction-Inform.Addr", "Hotel-Inform.Addr", "Hotel-Inform.Post"],
            vec![("Hotel-Inform", "Addr", "124 tenison road"), ("Hotel-Inform", "Post", "cb12dp")],
        ),
        (vec![a("Hotel", "Request", "Addr", "?")], vec!["Hotel-Inform.Addr"], vec![]),
        (
            vec![a("Taxi", "Inform", "Leave", "14:30")],
            vec!["Taxi-Inform.Car", "Taxi-Inform.Phone"],
            vec![("Taxi-Inform", "Car", "ford"), ("Taxi-Inform", "Phone", "83307313274")],
        ),
    ];
    for (acts, want, values) in turns {
        let got = r.turn(&acts);
        let want: BTreeSet<String> = want.into_iter().map(String::from).collect();
        if shape(&got) == want && values.iter().all(|(l, s, v)| got.value(l, s) == Some(v)) {
            passed += 1;
        }
    }
    let bye = r.turn(&[DialogAct::bare("general", "thank"), DialogAct::bare("general", "bye")]);
    passed += (is_close_session(&bye) && bye.len() == 1) as usize;
    (passed, 8)
}

fn synthetic_return() -> f64 {
    let (schema, _) = common::fixtures();
    let record = TurnRecord {
        user_acts: vec![],
        predicted_acts: vec![],
        user_utterance: String::new(),
        state_hash: String::new(),
        system_action: ActMap::new(),
        system_utterance: String::new(),
    };
    let logs: Vec<DialogueLog> = (0..1000)
        .map(|i| DialogueLog {
            episode: i,
            seed: i as u64,
            goal: Default::default(),
            turns: vec![record.clone(); 7],
            outcome: Outcome { success: i < 888, terminated: true, ..Outcome::default() },
        })
        .collect();
    compute_metrics(&logs, &schema, 0, 40).unwrap().average_return
}

fn nlg_checks() -> (usize, usize, bool) {
    let (schema, db) = common::fixtures();
    let store = TemplateStore::builtin(&schema);
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let mut missing = 0;
    let mut values = 0;
    for _ in 0..1000 {
        let action = common::random_system_action(&mut rng, &schema, &db);
        let (text, _) = store.generate(&action);
        for v in common::lexical_values(&action) {
            values += 1;
            if !text.contains(&v) {
                missing += 1;
            }
        }
    }
    let mut action = ActMap::new();
    action.push("Attraction-Inform", "Phone", "01223336265");
    action.push("Attraction-Inform", "Post", "cb21jf");
    let sentence = "the attraction phone number is 01223336265 . and its postcode is cb21jf .";
    let (mined, _) = mine_templates(&[CorpusEntry { action: action.clone(), text: sentence.into() }]);
    let (multi, rm) = mined.with_floor(&schema).generate(&action);
    let (single, rs) = TemplateStore::default().with_floor(&schema).generate(&action);
    let shape_ok = multi == sentence
        && rm.fragments == 1
        && rs.fragments == 2
        && single == "the attraction phone number is 01223336265 . the attraction postcode is cb21jf .";
    (values, missing, shape_ok)
}

async fn http(app: &axum::Router, method: &str, uri: &str, body: Option<serde_json::Value>) -> serde_json::Value {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap_or(serde_json::Value::Null)
}

/// Runs a scripted text session on a fresh service and returns the
/// transcript without timestamps.
async fn serve_script(system: DialogueSystem, script: &[&str]) -> Vec<(String, Vec<DialogAct>, ActMap, String)> {
    let app = router(Arc::new(AppState::new(system, &ServiceConfig { seed: 11, ..ServiceConfig::default() })));
    let open: OpenResponse = serde_json::from_value(http(&app, "POST", "/sessions", None).await).unwrap();
    for line in script {
        let v = http(&app, "POST", &format!("/sessions/{}/messages", open.id), Some(serde_json::json!({ "text": line }))).await;
        match serde_json::from_value::<MessageResponse>(v) {
            Ok(r) if !r.closed => {}
            _ => break,
        }
    }
    let snap: Snapshot = serde_json::from_value(http(&app, "GET", &format!("/sessions/{}", open.id), None).await).unwrap();
    snap.transcript.into_iter().map(|t| (t.user, t.acts, t.action, t.utterance)).collect()
}

fn parses(p: &NluPipeline<f64>, examples: &[TrainingExample]) -> Vec<hceds::hcenlu::NluOutput> {
    examples.iter().map(|e| p.parse(&e.utterance, &e.context).unwrap()).collect()
}

fn main() {
    let started = Instant::now();
    let mut out = Outcomes { failed: 0 };

    let t = Instant::now();
    let (worst, linear, rows) = gradient_checks();
    let secs = t.elapsed().as_secs_f64();
    let detail: Vec<String> = rows.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    out.report(
        1,
        "gradient correctness",
        worst < 1e-4 && linear < 1e-8 && secs < 120.0,
        format!("max rel err {worst:.2e} (< 1e-4), linear {linear:.2e} (< 1e-8), {secs:.1}s; {}", detail.join(", ")),
    );

    let (bad, max_sum, max_perm) = attention_trials();
    out.report(
        2,
        "attention properties",
        bad == 0 && max_sum <= 1e-12 && max_perm <= 1e-12,
        format!("1000 trials: |sum-1| max {max_sum:.1e}, permutation diff max {max_perm:.1e}, single-key failures {bad}"),
    );

    let (n, mismatches, split, negatives_ok) = biox_round_trip();
    out.report(
        3,
        "BIOX round trip",
        mismatches == 0 && negatives_ok,
        format!("{n} utterances, 4000-merge BPE ({split} continuation subwords), {mismatches} mismatches; repair negatives {}", if negatives_ok { "ok" } else { "wrong" }),
    );

    let sys = DialogueSystem::default();
    let corpus = generate_toy_corpus(&sys, &ToyConfig::default()).unwrap();
    let train_ex = examples_from_corpus(&corpus.train).unwrap();
    let valid_ex = examples_from_corpus(&corpus.valid).unwrap();
    let test_ex = examples_from_corpus(&corpus.test).unwrap();
    let slice = context_dependent_slice(&corpus.test).unwrap();
    let t = Instant::now();
    let trained = train_toy(&train_ex, &valid_ex, toy_nlu_config(), &toy_train_config()).unwrap().pipeline;
    let train_secs = t.elapsed().as_secs_f64();
    let s = nlu_component_metrics(&trained, &test_ex).unwrap();
    let t = Instant::now();
    let no_ctx = train_toy(&train_ex, &valid_ex, NluConfig { window: 0, ..toy_nlu_config() }, &toy_train_config()).unwrap().pipeline;
    let ablation_secs = t.elapsed().as_secs_f64();
    let with = nlu_component_metrics(&trained, &slice).unwrap();
    let without = nlu_component_metrics(&no_ctx, &slice).unwrap();
    out.report(
        4,
        "toy-corpus NLU",
        train_ex.len() >= 2000
            && test_ex.len() >= 400
            && multi_label_turns(&train_ex) > 0
            && s.intent.f1() >= 0.95
            && s.tag.f1() >= 0.90
            && train_secs < 300.0
            && without.intent.f1() < with.intent.f1(),
        format!(
            "{} train / {} test utterances ({} multi-label); intent F1 {:.4} (>= 0.95), tag F1 {:.4} (>= 0.90), overall F1 {:.4}, trained in {:.0}s (< 300); context slice of {}: intent F1 w=4 {:.4} vs w=0 {:.4} (w=0 trained in {:.0}s)",
            train_ex.len(),
            test_ex.len(),
            multi_label_turns(&train_ex),
            s.intent.f1(),
            s.tag.f1(),
            s.overall.f1(),
            train_secs,
            slice.len(),
            with.intent.f1(),
            without.intent.f1(),
            ablation_secs
        ),
    );

    let (passed, total) = policy_goldens();
    out.report(5, "policy golden cases", passed == total, format!("{passed}/{total} cases (college recommendation, seven case-study turns)"));

    let t = Instant::now();
    let oracle_logs = run_episodes(&sys, 500, 7, &EvalConfig::default()).unwrap();
    let om = compute_metrics(&oracle_logs, &sys.dm.schema, 7, 40).unwrap();
    let full_sys = DialogueSystem::default().with_nlu(trained.clone());
    let full_cfg = EvalConfig {
        mode: EvalMode::Full,
        goal: GoalConfig {
            domains: vec!["hotel".into(), "attraction".into()],
            max_domains: 2,
            ..GoalConfig::default()
        },
        ..EvalConfig::default()
    };
    let full_logs = run_episodes(&full_sys, 500, 7, &full_cfg).unwrap();
    let fm = compute_metrics(&full_logs, &sys.dm.schema, 7, 40).unwrap();
    let sim_secs = t.elapsed().as_secs_f64();
    out.report(
        6,
        "end-to-end simulation",
        om.success_rate >= 0.95 && om.termination_rate == 1.0 && om.unanswered == 0 && fm.success_rate >= 0.80 && sim_secs < 180.0,
        format!(
            "oracle: success {:.3} (>= 0.95), terminated {:.3}, unanswered {}; full (toy NLU, hotel+attraction goals): success {:.3} (>= 0.80), F1 {:.3}; 2x500 episodes in {:.1}s",
            om.success_rate, om.termination_rate, om.unanswered, fm.success_rate, fm.f1, sim_secs
        ),
    );

    let ret = synthetic_return();
    out.report(
        7,
        "return consistency",
        (ret - 61.56).abs() <= 5.0,
        format!("success 0.888, 7 turns, L=40: average return {ret:.2}, within 5 of 61.56"),
    );

    let (schema, _) = common::fixtures();
    let logs = common::hand_built_logs();
    let m = compute_metrics(&logs, &schema, 0, 40).unwrap();
    let b = common::brute_force_metrics(&logs, &schema, 40);
    let episode_ok = m.success_rate == b.success_rate
        && m.average_return == b.average_return
        && m.average_turns == b.average_turns
        && m.precision == b.precision
        && m.recall == b.recall
        && m.f1 == b.f1
        && m.book_rate == b.book_rate;
    let mut annotated = common::hand_annotated_examples();
    annotated.extend(test_ex.iter().take(120).cloned());
    let ns = nlu_component_metrics(&trained, &annotated).unwrap();
    let c = common::brute_force_nlu(&trained, &annotated);
    let nlu_ok = (ns.intent.tp, ns.intent.fp, ns.intent.fn_) == c[0]
        && (ns.tag.tp, ns.tag.fp, ns.tag.fn_) == c[1]
        && (ns.overall.tp, ns.overall.fp, ns.overall.fn_) == c[2];
    out.report(
        8,
        "metrics oracle equivalence",
        episode_ok && nlu_ok && logs.len() >= 20 && annotated.len() >= 50,
        format!(
            "{} episodes: episode metrics {}; {} utterances: intent/tag/overall counts {}",
            logs.len(),
            if episode_ok { "identical" } else { "differ" },
            annotated.len(),
            if nlu_ok { "identical" } else { "differ" }
        ),
    );

    let (values, missing, shape_ok) = nlg_checks();
    out.report(
        9,
        "NLG faithfulness and multi-intent gain",
        missing == 0 && shape_ok,
        format!("1000 random actions, {values} values, {missing} missing; 2-slot example one mined sentence vs two single-intent: {}", if shape_ok { "yes" } else { "no" }),
    );

    let small = ToyConfig { train_dialogues: 40, valid_dialogues: 4, test_dialogues: 6, ..ToyConfig::default() };
    let sc = generate_toy_corpus(&sys, &small).unwrap();
    let (a_ex, v_ex) = (examples_from_corpus(&sc.train).unwrap(), examples_from_corpus(&sc.valid).unwrap());
    let tc = TrainConfig { epochs: 2, ..toy_train_config() };
    let p1 = train_toy(&a_ex, &v_ex, toy_nlu_config(), &tc).unwrap().pipeline;
    let p2 = train_toy(&a_ex, &v_ex, toy_nlu_config(), &tc).unwrap().pipeline;
    let train_same = checkpoint::to_bytes(&p1).unwrap() == checkpoint::to_bytes(&p2).unwrap();
    let sim_same = run_episodes(&sys, 100, 3, &EvalConfig::default()).unwrap() == run_episodes(&sys, 100, 3, &EvalConfig::default()).unwrap()
        && run_episodes(&full_sys, 50, 3, &full_cfg).unwrap() == run_episodes(&full_sys, 50, 3, &full_cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.ckpt");
    checkpoint::save(&trained, &path).unwrap();
    let loaded = checkpoint::load::<f64>(&path, trained.provider.clone()).unwrap();
    let load_same = parses(&trained, &test_ex) == parses(&loaded, &test_ex);
    let script = [
        "i prefer something related to museum .",
        "what is the entrance fee ? what is the address ?",
        "i am looking for a hotel in the moderate price range .",
        "what is the postcode ?",
        "thanks , bye .",
    ];
    let rt = tokio::runtime::Runtime::new().unwrap();
    let r1 = rt.block_on(serve_script(full_sys.clone(), &script));
    let r2 = rt.block_on(serve_script(full_sys.clone(), &script));
    let serve_same = !r1.is_empty() && r1 == r2;
    out.report(
        10,
        "determinism",
        train_same && sim_same && load_same && serve_same,
        format!(
            "train twice: {}; simulate twice: {}; checkpoint save/load parses: {}; serve replay of {} turns: {}",
            if train_same { "identical checkpoints" } else { "differ" },
            if sim_same { "identical logs" } else { "differ" },
            if load_same { "identical" } else { "differ" },
            r1.len(),
            if serve_same { "identical" } else { "differ" }
        ),
    );

    println!(
        "{} of 10 criteria passed in {:.0}s",
        10 - out.failed,
        started.elapsed().as_secs_f64()
    );
    if out.failed > 0 {
        std::process::exit(1);
    }
}
