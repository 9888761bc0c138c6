//! Template surface forms for simulated user turns. Each realization also
//! returns the word spans of informed values and requested slot names, so
//! the same generator annotates training data.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::act::DialogAct;
use crate::db::DONTCARE;
use crate::schema::Schema;
use crate::text::pretokenize;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realized {
    pub text: String,
    /// `(Domain-Intent+Slot, first_word, last_word)` over pretokenized words.
    pub spans: Vec<(String, usize, usize)>,
}

#[derive(Default)]
struct Builder {
    words: Vec<String>,
    spans: Vec<(String, usize, usize)>,
}

impl Builder {
    fn lit(&mut self, s: &str) {
        let p = pretokenize(s);
        self.words.extend(p.split(' ').filter(|w| !w.is_empty()).map(String::from));
    }

    fn span(&mut self, s: &str, label: &str) {
        let start = self.words.len();
        self.lit(s);
        if self.words.len() > start {
            self.spans.push((label.to_string(), start, self.words.len() - 1));
        }
    }

    /// Expands `pattern`; `{v}` is the value span, `{w}` slot words.
    fn pattern(&mut self, pattern: &str, value: &str, words: &str, label: &str) {
        for tok in pattern.split(' ') {
            match tok {
                "{v}" => self.span(value, label),
                "{w}" => self.lit(words),
                t => self.lit(t),
            }
        }
    }
}

pub fn slot_words(slot: &str) -> &str {
    match slot {
        "Addr" => "address",
        "Post" => "postcode",
        "Phone" => "phone number",
        "Fee" => "entrance fee",
        "Price" => "price range",
        "Stars" => "star rating",
        "Food" => "food type",
        "Leave" => "departure time",
        "Arrive" => "arrival time",
        "Ticket" => "ticket price",
        "Time" => "travel time",
        "Id" => "train id",
        "Car" => "car type",
        "Ref" => "reference number",
        "Dest" => "destination",
        "Depart" => "departure",
        "Day" => "day",
        "Area" => "area",
        "Type" => "type",
        "Name" => "name",
        "Parking" => "parking",
        "Internet" => "internet",
        "Department" => "department",
        "People" => "number of people",
        "Stay" => "number of nights",
        _ => "",
    }
}

fn domain_phrases(domain: &str) -> &'static [&'static str] {
    match domain {
        "hotel" => &["a hotel", "a place to stay"],
        "attraction" => &["an attraction", "a place to go"],
        "restaurant" => &["a restaurant", "a place to eat"],
        "train" => &["a train"],
        "taxi" => &["a taxi"],
        "police" => &["the police station"],
        "hospital" => &["a hospital"],
        _ => &["something"],
    }
}

fn domain_noun(domain: &str) -> &str {
    match domain {
        "police" => "police station",
        d => d,
    }
}

fn inform_fragments(domain: &str, slot: &str) -> &'static [&'static str] {
    match (domain, slot) {
        ("attraction", "Type") => &["related to {v}", "that is a {v}", "of type {v}"],
        (_, "Type") => &["that is a {v}", "of type {v}"],
        (_, "Area") => &["in the {v}", "in the {v} area", "located in the {v}"],
        (_, "Price") => &["in the {v} price range", "that is {v} priced"],
        (_, "Stars") => &["with {v} stars", "rated {v} stars"],
        (_, "Parking") => &["with parking {v}", "that says {v} to free parking"],
        (_, "Internet") => &["with internet {v}", "that says {v} to wifi"],
        (_, "Fee") => &["with entrance fee {v}"],
        (_, "Name") => &["called {v}", "named {v}"],
        (_, "Food") => &["serving {v} food", "that serves {v} food"],
        (_, "Leave") => &["leaving after {v}", "that will leave by {v}"],
        (_, "Arrive") => &["arriving by {v}", "that gets there by {v}"],
        (_, "Dest") => &["going to {v}", "to {v}"],
        (_, "Depart") => &["departing from {v}", "from {v}"],
        (_, "Day") => &["on {v}"],
        (_, "Department") => &["with the {v} department"],
        (_, "People") => &["for {v} people"],
        (_, "Stay") => &["for {v} nights"],
        (_, "Time") => &["at {v}"],
        _ => &["with {w} {v}"],
    }
}

const EXPLICIT_INFORM: [&str; 4] = ["i am looking for {d}", "i need {d}", "how about {d}", "i want to find {d}"];
const IMPLICIT_INFORM: [&str; 4] = ["i want something", "i prefer something", "it should be", "i would like one"];
const EXPLICIT_BOOK: [&str; 2] = ["i would like to book {n}", "please make a booking at the {n}"];
const IMPLICIT_BOOK: [&str; 3] = ["please book it", "book it", "can you book it"];
const EXPLICIT_REQUEST: [&str; 2] = ["what is the {ws} of the {n} ?", "can you tell me the {ws} of the {n} ?"];
const IMPLICIT_REQUEST: [&str; 4] = [
    "what is the {ws} ?",
    "can i get the {ws} please ?",
    "could you tell me the {ws} ?",
    "what are the {ws} ?",
];
const BYE: [&str; 3] = [
    "that 's all i need today . thanks ! bye !",
    "thank you , goodbye .",
    "thanks for your help , bye .",
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Semi,
    Book,
    Request,
    General,
    Other,
}

fn kind(act: &DialogAct, schema: &Schema) -> Kind {
    if act.is_general() {
        return Kind::General;
    }
    let book = schema.domain(&act.domain_key()).is_ok_and(|d| d.is_book_slot(&act.slot));
    match (act.intent.as_str(), book) {
        ("Inform", true) => Kind::Book,
        ("Inform", false) => Kind::Semi,
        ("Request", _) => Kind::Request,
        _ => Kind::Other,
    }
}

fn words_of(s: &str) -> impl Iterator<Item = &str> {
    s.split(' ')
}

/// Realizes a user turn. Groups of consecutive acts sharing domain and
/// kind become one sentence; domains in `explicit` are named outright.
pub fn realize_user_utterance<R: Rng + ?Sized>(
    acts: &[DialogAct],
    schema: &Schema,
    explicit: &[String],
    rng: &mut R,
) -> Realized {
    let mut b = Builder::default();
    let mut i = 0;
    while i < acts.len() {
        let k = kind(&acts[i], schema);
        let mut j = i + 1;
        while j < acts.len() && acts[j].domain == acts[i].domain && kind(&acts[j], schema) == k {
            j += 1;
        }
        let group = &acts[i..j];
        let domain = group[0].domain_key();
        let named = explicit.contains(&domain);
        match k {
            Kind::General => {
                let has = |i: &str| group.iter().any(|a| a.intent == i);
                if has("bye") {
                    b.lit(BYE.choose(rng).unwrap());
                } else if has("thank") {
                    b.lit("thank you .");
                } else if has("greet") {
                    b.lit("hello .");
                } else {
                    b.lit("okay .");
                }
            }
            Kind::Semi | Kind::Book => {
                let opener = match (k, named) {
                    (Kind::Semi, true) => EXPLICIT_INFORM.choose(rng).unwrap(),
                    (Kind::Semi, false) => IMPLICIT_INFORM.choose(rng).unwrap(),
                    (_, true) => EXPLICIT_BOOK.choose(rng).unwrap(),
                    (_, false) => IMPLICIT_BOOK.choose(rng).unwrap(),
                };
                let d = domain_phrases(&domain).choose(rng).unwrap();
                for t in words_of(opener) {
                    match t {
                        "{d}" => b.lit(d),
                        "{n}" => b.lit(domain_noun(&domain)),
                        t => b.lit(t),
                    }
                }
                for (n, a) in group.iter().enumerate() {
                    if n > 0 && k == Kind::Semi {
                        b.lit("and");
                    }
                    let label = format!("{}+{}", a.label(), a.slot);
                    if a.value == DONTCARE {
                        b.pattern("with {v} {w}", "any", slot_words(&a.slot), &label);
                        continue;
                    }
                    let frag = inform_fragments(&domain, &a.slot).choose(rng).unwrap();
                    b.pattern(frag, &a.value, slot_words(&a.slot), &label);
                }
                b.lit(".");
            }
            Kind::Request => {
                let template = if named {
                    EXPLICIT_REQUEST.choose(rng).unwrap()
                } else {
                    IMPLICIT_REQUEST.choose(rng).unwrap()
                };
                for t in words_of(template) {
                    match t {
                        "{ws}" => {
                            for (n, a) in group.iter().enumerate() {
                                if n > 0 {
                                    b.lit("and");
                                }
                                let w = slot_words(&a.slot);
                                let w = if w.is_empty() { a.slot.as_str() } else { w };
                                b.span(w, &format!("{}+{}", a.label(), a.slot));
                            }
                        }
                        "{n}" => b.lit(domain_noun(&domain)),
                        t => b.lit(t),
                    }
                }
            }
            Kind::Other => {
                for a in group {
                    b.lit("i want");
                    b.span(&a.value, &format!("{}+{}", a.label(), a.slot));
                    b.lit(&a.slot.to_lowercase());
                    b.lit(".");
                }
            }
        }
        i = j;
    }
    Realized {
        text: b.words.join(" "),
        spans: b.spans,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn words(r: &Realized, s: &(String, usize, usize)) -> String {
        r.text.split(' ').collect::<Vec<_>>()[s.1..=s.2].join(" ")
    }

    #[test]
    fn museum_inform_is_verbatim_with_span() {
        let schema = Schema::builtin();
        let acts = [DialogAct::new("Attraction", "Inform", "Type", "museum")];
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..40 {
            let r = realize_user_utterance(&acts, &schema, &[], &mut ChaCha8Rng::seed_from_u64(seed));
            assert!(r.text.contains("museum"));
            assert_eq!(r.spans.len(), 1);
            assert_eq!(words(&r, &r.spans[0]), "museum");
            assert_eq!(r.spans[0].0, "Attraction-Inform+Type");
            seen.insert(r.text);
        }
        assert!(seen.contains("i prefer something related to museum ."));
    }

    #[test]
    fn requests_name_the_slot() {
        let schema = Schema::builtin();
        let acts = [
            DialogAct::new("Hotel", "Request", "Addr", "?"),
            DialogAct::new("Hotel", "Request", "Phone", "?"),
        ];
        let r = realize_user_utterance(&acts, &schema, &["hotel".into()], &mut ChaCha8Rng::seed_from_u64(1));
        assert!(r.text.contains("address") && r.text.contains("phone number") && r.text.contains("hotel"));
        assert_eq!(words(&r, &r.spans[1]), "phone number");
    }

    #[test]
    fn same_seed_same_paraphrase_and_multi_word_values() {
        let schema = Schema::builtin();
        let acts = [
            DialogAct::new("Taxi", "Inform", "Leave", "14:30"),
            DialogAct::new("Taxi", "Inform", "Dest", "christ's college"),
            DialogAct::new("Hotel", "Inform", "Area", DONTCARE),
        ];
        let a = realize_user_utterance(&acts, &schema, &["taxi".into()], &mut ChaCha8Rng::seed_from_u64(4));
        let b = realize_user_utterance(&acts, &schema, &["taxi".into()], &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert_eq!(words(&a, &a.spans[1]), "christ's college");
        assert_eq!(words(&a, &a.spans[2]), "any");
        assert!(a.text.contains("taxi"));
    }
}
