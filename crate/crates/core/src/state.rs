//! Rule-based dialogue state: the current user action, per-domain belief
//! (semi constraints, book slots, bookings made), open requests and the
//! transcript.

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::act::{ActMap, DialogAct, Speaker};
use crate::db::{QueryConstraint, DONTCARE};
use crate::schema::Schema;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookedEntry {
    /// Key field value of the booked entity.
    pub name: String,
    pub reference: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookState {
    pub booked: Vec<BookedEntry>,
    #[serde(flatten)]
    pub slots: IndexMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainBelief {
    pub book: BookState,
    pub semi: IndexMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogState {
    pub user_action: ActMap,
    pub belief_state: IndexMap<String, DomainBelief>,
    pub request_state: IndexMap<String, IndexSet<String>>,
    pub history: Vec<(Speaker, String)>,
}

pub fn init_state(schema: &Schema) -> DialogState {
    let belief_state = schema
        .domains
        .iter()
        .map(|(name, d)| {
            let belief = DomainBelief {
                book: BookState {
                    booked: Vec::new(),
                    slots: d.book.iter().map(|s| (s.clone(), String::new())).collect(),
                },
                semi: d.semi.iter().map(|s| (s.clone(), String::new())).collect(),
            };
            (name.clone(), belief)
        })
        .collect();
    DialogState {
        belief_state,
        ..DialogState::default()
    }
}

/// Lowercased, trimmed value; "don't care" phrasings collapse to `dontcare`.
pub fn normalize_value(v: &str) -> String {
    let v = crate::text::normalize(v);
    match v.as_str() {
        "any" | "dont care" | "don't care" | "do n't care" | "do not care" => DONTCARE.to_string(),
        _ => v,
    }
}

/// Records one user turn. Acts in domains outside the schema are logged
/// and otherwise ignored; `prev` is left untouched.
pub fn update(prev: &DialogState, schema: &Schema, acts: &[DialogAct], utterance: &str) -> DialogState {
    let mut s = prev.clone();
    for act in acts {
        if act.is_general() {
            continue;
        }
        let key = act.domain_key();
        let Ok(ds) = schema.domain(&key) else {
            log::warn!("ignoring act in unknown domain: {act}");
            continue;
        };
        let Some(belief) = s.belief_state.get_mut(&key) else {
            log::warn!("state has no belief for domain {key}");
            continue;
        };
        match act.intent.as_str() {
            "Inform" => {
                let Some(b) = ds.belief_slot(&act.slot) else {
                    log::warn!("ignoring inform of non-belief slot: {act}");
                    continue;
                };
                let value = normalize_value(&act.value);
                if ds.book.iter().any(|x| x == b) {
                    belief.book.slots.insert(b.to_string(), value);
                } else {
                    belief.semi.insert(b.to_string(), value);
                }
            }
            "Request" => {
                s.request_state.entry(key).or_default().insert(act.slot.clone());
            }
            _ => {}
        }
    }
    s.user_action = ActMap::from_acts(acts);
    s.history.push((Speaker::User, utterance.to_string()));
    s
}

/// Drains requests the system action answered, records bookings it made
/// and appends the system utterance to the history.
pub fn fulfilled_requests(prev: &DialogState, action: &ActMap, utterance: &str) -> DialogState {
    let mut s = prev.clone();
    for (label, pairs) in &action.0 {
        let Some((domain, intent)) = label.split_once('-') else {
            continue;
        };
        let key = domain.to_lowercase();
        match intent {
            "Inform" | "Recommend" => {
                if let Some(open) = s.request_state.get_mut(&key) {
                    for [slot, _] in pairs {
                        open.shift_remove(slot);
                    }
                }
            }
            "NoOffer" => {
                s.request_state.shift_remove(&key);
            }
            "Book" => {
                let reference = pairs.iter().find(|[k, _]| k == "Ref").map(|[_, v]| v.clone());
                let name = pairs.iter().find(|[k, _]| k != "Ref").map(|[_, v]| v.clone());
                if let (Some(reference), Some(b)) = (reference, s.belief_state.get_mut(&key)) {
                    b.book.booked.push(BookedEntry {
                        name: name.unwrap_or_default(),
                        reference,
                    });
                }
            }
            _ => {}
        }
    }
    s.request_state.retain(|_, v| !v.is_empty());
    s.history.push((Speaker::System, utterance.to_string()));
    s
}

impl DialogState {
    /// DB constraints from the domain's filled semi slots.
    pub fn constraints(&self, schema: &Schema, domain: &str) -> Vec<QueryConstraint> {
        let (Some(b), Ok(ds)) = (self.belief_state.get(domain), schema.domain(domain)) else {
            return Vec::new();
        };
        b.semi
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .filter_map(|(slot, v)| {
                let act_slot = ds.act_slot_for_belief(slot)?;
                Some(QueryConstraint::new(ds.db_field(act_slot)?, v))
            })
            .collect()
    }

    /// Filled semi slots as act-slot/value pairs.
    pub fn informed(&self, schema: &Schema, domain: &str) -> Vec<(String, String)> {
        let (Some(b), Ok(ds)) = (self.belief_state.get(domain), schema.domain(domain)) else {
            return Vec::new();
        };
        b.semi
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .filter_map(|(slot, v)| Some((ds.act_slot_for_belief(slot)?.to_string(), v.clone())))
            .collect()
    }
}
