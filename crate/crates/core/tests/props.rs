mod common;

use hceds::act::DialogAct;
use hceds::db::QueryConstraint;
use hceds::nlg::TemplateStore;
use hceds::nn::BilinearAttention;
use hceds::state::{init_state, update};
use hceds::text::{biox_align, biox_decode, BpeCodec, SlotSpan};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 14] = [
    "i", "want", "a", "cheap", "guesthouse", "in", "the", "north", "parking", "museum", "14:30", "christ's", "please", "?",
];

fn utterance() -> impl Strategy<Value = (Vec<String>, Vec<SlotSpan>)> {
    prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..14).prop_flat_map(|ws| {
        let n = ws.len();
        let words: Vec<String> = ws.into_iter().map(String::from).collect();
        prop::collection::vec((0..n, 0..3usize, 0..3usize), 0..4).prop_map(move |raw| {
            let mut spans: Vec<SlotSpan> = Vec::new();
            let mut sorted = raw.clone();
            sorted.sort();
            let mut next_free = 0;
            for (start, len, lab) in sorted {
                if start < next_free {
                    continue;
                }
                let end = (start + len).min(n - 1);
                let label = ["Hotel-Inform+Area", "Attraction-Inform+Type", "Hotel-Request+Phone"][lab];
                spans.push(SlotSpan::new(label, start, end));
                next_free = end + 1;
            }
            (words.clone(), spans)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn biox_round_trip((words, spans) in utterance(), merges in 0usize..60) {
        let text = words.join(" ");
        let codec = BpeCodec::train(&[text.as_str(), "guest house parking museum"], merges).unwrap();
        let tok = codec.tokenize(&text);
        prop_assert_eq!(&tok.words, &words);
        let seq = biox_align(&tok, &spans).unwrap();
        let dec = biox_decode(&tok, &seq);
        prop_assert_eq!(dec.repairs, 0);
        prop_assert_eq!(dec.spans, spans);
    }

    #[test]
    fn attention_weights_form_a_distribution(seed in any::<u64>(), n in 1usize..8, qd in 1usize..5, kd in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let att = BilinearAttention::<f64>::new("a", qd, kd, &mut rng);
        let q: Vec<f64> = (0..qd).map(|_| rand::Rng::gen_range(&mut rng, -3.0..3.0)).collect();
        let keys: Vec<Vec<f64>> = (0..n).map(|_| (0..kd).map(|_| rand::Rng::gen_range(&mut rng, -3.0..3.0)).collect()).collect();
        let (ctx, cache) = att.forward(&q, &keys).unwrap();
        let sum: f64 = cache.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(cache.weights.iter().all(|w| *w >= 0.0));
        for j in 0..kd {
            let lo = keys.iter().map(|k| k[j]).fold(f64::INFINITY, f64::min);
            let hi = keys.iter().map(|k| k[j]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(ctx[j] >= lo - 1e-9 && ctx[j] <= hi + 1e-9);
        }
        let mut rev = keys.clone();
        rev.reverse();
        let (ctx2, _) = att.forward(&q, &rev).unwrap();
        for (a, b) in ctx.iter().zip(&ctx2) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn adding_a_constraint_never_grows_the_result(seed in any::<u64>(), k in 0usize..4) {
        let (schema, db) = common::fixtures();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in ["hotel", "attraction", "restaurant", "train"] {
            let ds = schema.domain(d).unwrap();
            let records = db.records(d).unwrap();
            let mut cons = Vec::new();
            let mut prev = db.query(d, &cons).unwrap().len();
            for _ in 0..=k {
                let slot = &ds.semi[rand::Rng::gen_range(&mut rng, 0..ds.semi.len())];
                let field = ds.db_field(ds.act_slot_for_belief(slot).unwrap_or(slot)).unwrap_or(slot);
                let e = &records[rand::Rng::gen_range(&mut rng, 0..records.len())];
                let v = e.get(field).cloned().unwrap_or_else(|| "dontcare".into());
                cons.push(QueryConstraint::new(field, &v));
                let got = db.query(d, &cons).unwrap();
                prop_assert!(got.len() <= prev);
                let bigger = db.query(d, &cons[..cons.len() - 1]).unwrap();
                for r in &got {
                    prop_assert!(bigger.iter().any(|b| std::ptr::eq(*b, *r)));
                }
                prev = got.len();
            }
        }
    }

    #[test]
    fn generated_text_carries_every_value(seed in any::<u64>()) {
        let (schema, db) = common::fixtures();
        let store = TemplateStore::builtin(&schema);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let action = common::random_system_action(&mut rng, &schema, &db);
        let (text, _) = store.generate(&action);
        for v in common::lexical_values(&action) {
            prop_assert!(text.contains(&v), "{:?} missing from {:?} for {:?}", v, text, action);
        }
    }

    #[test]
    fn update_leaves_the_previous_state_alone(seed in any::<u64>()) {
        let (schema, _) = common::fixtures();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s0 = init_state(&schema);
        let snapshot = s0.clone();
        let slots = ["Area", "Price", "Type", "Phone", "People"];
        let acts: Vec<DialogAct> = (0..3)
            .map(|_| {
                let d = ["Hotel", "Attraction", "Taxi", "Nowhere"][rand::Rng::gen_range(&mut rng, 0..4)];
                let i = ["Inform", "Request"][rand::Rng::gen_range(&mut rng, 0..2)];
                let s = slots[rand::Rng::gen_range(&mut rng, 0..slots.len())];
                DialogAct::new(d, i, s, if i == "Request" { "?" } else { "north" })
            })
            .collect();
        let a = update(&s0, &schema, &acts, "text");
        let b = update(&s0, &schema, &acts, "text");
        prop_assert_eq!(&s0, &snapshot);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.history.len(), 1);
    }
}
