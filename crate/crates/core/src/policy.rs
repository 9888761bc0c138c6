//! Rule policy: every (domain, intent, slot) of the current user action is
//! answered by the request, inform or general sub-policy, and the partial
//! actions are merged into one system action.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::act::{split_label, ActMap, DialogAct, NONE, REQUESTED};
use crate::db::{BookingOutcome, Database, EntityRecord};
use crate::error::{Error, Result};
use crate::schema::{act_domain, Schema, DOMAINS};
use crate::state::DialogState;

pub type SystemAction = ActMap;

/// Label of the act that ends a session.
pub const CLOSE_SESSION: &str = "general-bye";
/// Value used when the selected entity lacks the asked-for field.
pub const UNKNOWN: &str = "unknown";

const BUILTIN_RULES: &str = include_str!("../data/policy_rules.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cardinality {
    None,
    One,
    Many,
    #[default]
    Any,
}

impl Cardinality {
    fn admits(self, n: usize) -> bool {
        match self {
            Cardinality::None => n == 0,
            Cardinality::One => n == 1,
            Cardinality::Many => n > 1,
            Cardinality::Any => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Semi,
    Book,
    #[default]
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotRef {
    Choice,
    Key,
    Slot,
    Constraints,
    MissingBook,
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionTemplate {
    pub intent: String,
    pub slot: SlotRef,
}

impl ActionTemplate {
    fn parse(s: &str) -> Result<Self> {
        let (intent, slot) = s
            .split_once(':')
            .filter(|(i, s)| !i.is_empty() && !s.is_empty())
            .ok_or_else(|| Error::format("policy rules", format!("action `{s}` is not Intent:Slot")))?;
        let slot = match slot {
            "Choice" => SlotRef::Choice,
            "@key" => SlotRef::Key,
            "@slot" => SlotRef::Slot,
            "@constraints" => SlotRef::Constraints,
            "@missing_book" => SlotRef::MissingBook,
            s if s.starts_with('@') => {
                return Err(Error::format("policy rules", format!("unknown reference `{s}`")));
            }
            s => SlotRef::Literal(s.to_string()),
        };
        Ok(ActionTemplate {
            intent: intent.to_string(),
            slot,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawRule {
    domain: Option<String>,
    intent: String,
    #[serde(default)]
    cardinality: Cardinality,
    #[serde(default)]
    slot_kind: SlotKind,
    actions: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawTable {
    #[serde(default = "default_max_slots")]
    max_slots: usize,
    #[serde(default)]
    rule: Vec<RawRule>,
}

fn default_max_slots() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub domain: Option<String>,
    pub intent: String,
    pub cardinality: Cardinality,
    pub slot_kind: SlotKind,
    pub actions: Vec<ActionTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    pub max_slots: usize,
    pub rules: Vec<Rule>,
}

impl RuleTable {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_RULES).expect("bundled rule table is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawTable = toml::from_str(text).map_err(|e| Error::format("policy rules", e.to_string()))?;
        if raw.max_slots == 0 {
            return Err(Error::format("policy rules", "max_slots must be positive"));
        }
        let rules = raw
            .rule
            .into_iter()
            .map(|r| {
                let intent = r.intent.to_lowercase();
                if intent != "inform" && intent != "request" {
                    return Err(Error::format("policy rules", format!("rule intent `{}`", r.intent)));
                }
                Ok(Rule {
                    domain: r.domain.map(|d| d.to_lowercase()),
                    intent,
                    cardinality: r.cardinality,
                    slot_kind: r.slot_kind,
                    actions: r.actions.iter().map(|a| ActionTemplate::parse(a)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(RuleTable {
            max_slots: raw.max_slots,
            rules,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    fn find(&self, domain: &str, intent: &str, n: usize, kind: SlotKind) -> Option<&Rule> {
        self.rules.iter().find(|r| {
            r.intent == intent
                && r.domain.as_deref().is_none_or(|d| d == domain)
                && r.cardinality.admits(n)
                && (r.slot_kind == SlotKind::Any || r.slot_kind == kind)
        })
    }
}

/// Schema, DB and rule table: everything a decision reads.
#[derive(Debug, Clone)]
pub struct DialogueManager {
    pub schema: Schema,
    pub db: Database,
    pub rules: RuleTable,
}

impl Default for DialogueManager {
    fn default() -> Self {
        let schema = Schema::builtin();
        DialogueManager {
            db: Database::builtin().with_numeric(&schema),
            schema,
            rules: RuleTable::builtin(),
        }
    }
}

/// DB matches for the domain's constraints and the entity they select.
#[derive(Debug, Clone)]
pub struct DbResult<'a> {
    pub matches: Vec<&'a EntityRecord>,
}

impl<'a> DbResult<'a> {
    pub fn selected(&self) -> Option<&'a EntityRecord> {
        self.matches.first().copied()
    }
}

impl DialogueManager {
    pub fn query_db(&self, state: &DialogState, domain: &str) -> Result<DbResult<'_>> {
        let c = state.constraints(&self.schema, domain);
        Ok(DbResult {
            matches: self.db.query(domain, &c)?,
        })
    }

    /// The entity the conversation is about in `domain`: the first match of
    /// the current constraints. It changes only when the constraints do.
    pub fn pinned_entity(&self, state: &DialogState, domain: &str) -> Option<&EntityRecord> {
        self.query_db(state, domain).ok()?.selected()
    }

    fn field_value(&self, domain: &str, entity: Option<&EntityRecord>, slot: &str) -> String {
        let field = self.schema.domain(domain).ok().and_then(|d| d.db_field(slot));
        match (entity, field) {
            (Some(e), Some(f)) => e.get(f).cloned().unwrap_or_else(|| UNKNOWN.to_string()),
            _ => UNKNOWN.to_string(),
        }
    }

    fn expand(
        &self,
        t: &ActionTemplate,
        state: &DialogState,
        db_result: &DbResult<'_>,
        domain: &str,
        slot: &str,
        out: &mut Vec<DialogAct>,
    ) {
        let d = act_domain(domain);
        let entity = db_result.selected();
        let mut push = |s: &str, v: &str| out.push(DialogAct::new(&d, &t.intent, s, v));
        match &t.slot {
            SlotRef::Choice => push("Choice", &db_result.matches.len().to_string()),
            SlotRef::Key => {
                let Ok(ds) = self.schema.domain(domain) else { return };
                if entity.is_some() {
                    push(&ds.key_slot, &self.field_value(domain, entity, &ds.key_slot));
                }
            }
            SlotRef::Slot => {
                if slot == "Ref" {
                    let r = state.belief_state.get(domain).and_then(|b| b.book.booked.last());
                    push("Ref", r.map_or(UNKNOWN, |b| b.reference.as_str()));
                } else {
                    push(slot, &self.field_value(domain, entity, slot));
                }
            }
            SlotRef::Constraints => {
                let informed = state.informed(&self.schema, domain);
                if informed.is_empty() {
                    push(NONE, NONE);
                }
                for (s, v) in informed {
                    push(&s, &v);
                }
            }
            SlotRef::MissingBook => {
                let (Ok(ds), Some(b)) = (self.schema.domain(domain), state.belief_state.get(domain)) else {
                    return;
                };
                for bs in &ds.required_book {
                    if b.book.slots.get(bs).is_none_or(|v| v.is_empty()) {
                        if let Some(s) = ds.act_slot_for_belief(bs) {
                            push(s, REQUESTED);
                        }
                    }
                }
            }
            SlotRef::Literal(s) => push(s, &self.field_value(domain, entity, s)),
        }
    }

    fn apply_rule(
        &self,
        state: &DialogState,
        db_result: &DbResult<'_>,
        domain: &str,
        intent: &str,
        slot: &str,
        kind: SlotKind,
    ) -> Vec<DialogAct> {
        let mut out = Vec::new();
        if let Some(rule) = self.rules.find(domain, intent, db_result.matches.len(), kind) {
            for t in &rule.actions {
                self.expand(t, state, db_result, domain, slot, &mut out);
            }
        }
        out
    }

    pub fn request_policy(&self, state: &DialogState, db_result: &DbResult<'_>, domain: &str, slot: &str) -> Vec<DialogAct> {
        let mut out = self.apply_rule(state, db_result, domain, "request", slot, SlotKind::Any);
        if out.is_empty() {
            out.push(DialogAct::new(&act_domain(domain), "Inform", slot, UNKNOWN));
        }
        out
    }

    pub fn inform_policy(&self, state: &DialogState, db_result: &DbResult<'_>, domain: &str, slot: &str) -> Vec<DialogAct> {
        let Ok(ds) = self.schema.domain(domain) else {
            return Vec::new();
        };
        let kind = if ds.is_book_slot(slot) { SlotKind::Book } else { SlotKind::Semi };
        self.apply_rule(state, db_result, domain, "inform", slot, kind)
    }

    /// Books the selected entity once its required book slots are filled;
    /// an entity already booked gets its existing reference repeated.
    pub fn try_booking<R: Rng + ?Sized>(
        &self,
        state: &DialogState,
        db_result: &DbResult<'_>,
        domain: &str,
        rng: &mut R,
    ) -> Option<Vec<DialogAct>> {
        let ds = self.schema.domain(domain).ok()?;
        if !ds.needs_booking() {
            return None;
        }
        let entity = db_result.selected()?;
        let belief = state.belief_state.get(domain)?;
        let name = self.field_value(domain, Some(entity), &ds.key_slot);
        let d = act_domain(domain);
        if let Some(done) = belief.book.booked.iter().find(|b| b.name == name) {
            return Some(vec![
                DialogAct::new(&d, "Book", &ds.key_slot, &name),
                DialogAct::new(&d, "Book", "Ref", &done.reference),
            ]);
        }
        match self.db.make_booking(ds, &belief.book.slots, rng) {
            BookingOutcome::Reference(r) => Some(vec![
                DialogAct::new(&d, "Book", &ds.key_slot, &name),
                DialogAct::new(&d, "Book", "Ref", &r),
            ]),
            BookingOutcome::Refused { .. } => None,
        }
    }

    pub fn general_policy(&self, _domain: &str, intent: &str, _slot: &str) -> Vec<DialogAct> {
        let reply = match intent.to_lowercase().as_str() {
            "greet" => "greet",
            "thank" => "welcome",
            "bye" => "bye",
            _ => "reqmore",
        };
        vec![DialogAct::bare("general", reply)]
    }

    /// Maps the dialog state to a system action.
    pub fn decide<R: Rng + ?Sized>(&self, state: &DialogState, rng: &mut R) -> SystemAction {
        let mut partial = Vec::new();
        let mut informed: Vec<String> = Vec::new();
        for (label, pairs) in &state.user_action.0 {
            let Ok((d, intent)) = split_label(label) else {
                continue;
            };
            let domain = d.to_lowercase();
            let in_d = DOMAINS.contains(&domain.as_str()) && self.schema.contains(&domain);
            for [slot, _] in pairs {
                let db_result = if in_d { self.query_db(state, &domain).ok() } else { None };
                match (intent.to_lowercase().as_str(), db_result) {
                    ("request", Some(r)) => partial.extend(self.request_policy(state, &r, &domain, slot)),
                    ("inform", Some(r)) => {
                        partial.extend(self.inform_policy(state, &r, &domain, slot));
                        if !informed.contains(&domain) {
                            informed.push(domain.clone());
                        }
                    }
                    ("request" | "inform", None) => {}
                    _ => partial.extend(self.general_policy(&domain, intent, slot)),
                }
            }
        }
        for domain in &informed {
            if let Ok(r) = self.query_db(state, domain) {
                partial.extend(self.try_booking(state, &r, domain, rng).unwrap_or_default());
            }
        }
        let merged = merge_rule(&partial, self.rules.max_slots);
        if merged.get(CLOSE_SESSION).is_some() {
            let mut close = ActMap::new();
            close.push(CLOSE_SESSION, NONE, NONE);
            return close;
        }
        if merged.is_empty() {
            let mut reqmore = ActMap::new();
            reqmore.push("general-reqmore", NONE, NONE);
            return reqmore;
        }
        merged
    }
}

/// Groups partial actions by domain-intent in first-seen order, drops exact
/// duplicates and keeps at most `max_slots` pairs per domain-intent.
pub fn merge_rule(partial: &[DialogAct], max_slots: usize) -> SystemAction {
    let mut out = ActMap::new();
    for a in partial {
        let pairs = out.0.entry(a.label()).or_default();
        let pair = [a.slot.clone(), a.value.clone()];
        if !pairs.contains(&pair) && pairs.len() < max_slots {
            pairs.push(pair);
        }
    }
    out
}

pub fn is_close_session(action: &SystemAction) -> bool {
    action.get(CLOSE_SESSION).is_some()
}
