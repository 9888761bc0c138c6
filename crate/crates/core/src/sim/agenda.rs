//! Agenda-based user: a queue of pending acts built from the goal, popped a
//! little at a time and reshaped by what the system says.

use std::collections::{HashMap, VecDeque};

use indexmap::{IndexMap, IndexSet};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::act::{split_label, ActMap, DialogAct, REQUESTED};
use crate::db::{Database, DONTCARE};
use crate::schema::{act_domain, Schema};
use crate::sim::goal::{db_constraints, UserGoal};
use crate::sim::realize::{realize_user_utterance, Realized};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgendaItem {
    Inform { domain: String, slot: String, value: String },
    Request { domain: String, slot: String },
    Book { domain: String },
}

impl AgendaItem {
    pub fn domain(&self) -> &str {
        match self {
            AgendaItem::Inform { domain, .. } | AgendaItem::Request { domain, .. } | AgendaItem::Book { domain } => domain,
        }
    }

    fn same_kind(&self, other: &AgendaItem) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub max_turns: usize,
    /// Chance of popping a second item of the same kind and domain.
    pub same_kind_pair: f64,
    /// Chance of popping a second item of another kind, same domain.
    pub mixed_pair: f64,
    /// Chance of leaving the domain unnamed when it is the last one used.
    pub implicit: f64,
    /// Times an unanswered request or unconfirmed booking is asked again.
    pub retries: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_turns: 40,
            same_kind_pair: 0.5,
            mixed_pair: 0.25,
            implicit: 0.6,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTurn {
    pub acts: Vec<DialogAct>,
    pub realized: Realized,
    /// The user said goodbye.
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct UserSimulator {
    pub goal: UserGoal,
    pub cfg: SimConfig,
    agenda: VecDeque<AgendaItem>,
    /// Constraint values after relaxation, per domain.
    current: IndexMap<String, IndexMap<String, String>>,
    answered: IndexMap<String, IndexMap<String, String>>,
    booked: IndexSet<String>,
    no_offers: HashMap<(String, String), usize>,
    attempts: HashMap<AgendaItem, usize>,
    last_popped: Vec<AgendaItem>,
    last_domain: Option<String>,
    pub turns: usize,
    pub done: bool,
}

fn initial_agenda(goal: &UserGoal) -> VecDeque<AgendaItem> {
    let mut a = VecDeque::new();
    for (d, g) in &goal.domains {
        for (slot, value) in &g.constraints {
            a.push_back(AgendaItem::Inform {
                domain: d.clone(),
                slot: slot.clone(),
                value: value.clone(),
            });
        }
        for slot in &g.requests {
            a.push_back(AgendaItem::Request {
                domain: d.clone(),
                slot: slot.clone(),
            });
        }
        if !g.book.is_empty() {
            a.push_back(AgendaItem::Book { domain: d.clone() });
        }
    }
    a
}

/// Case-insensitive, or numerically equal when both parse.
pub fn same_value(a: &str, b: &str) -> bool {
    let (a, b) = (a.trim(), b.trim());
    if a.eq_ignore_ascii_case(b) {
        return true;
    }
    matches!((a.parse::<f64>(), b.parse::<f64>()), (Ok(x), Ok(y)) if x == y)
}

impl UserSimulator {
    pub fn new(goal: UserGoal, cfg: SimConfig) -> Self {
        let agenda = initial_agenda(&goal);
        let current = goal.domains.iter().map(|(d, g)| (d.clone(), g.constraints.clone())).collect();
        UserSimulator {
            goal,
            cfg,
            agenda,
            current,
            answered: IndexMap::new(),
            booked: IndexSet::new(),
            no_offers: HashMap::new(),
            attempts: HashMap::new(),
            last_popped: Vec::new(),
            last_domain: None,
            turns: 0,
            done: false,
        }
    }

    pub fn agenda(&self) -> &VecDeque<AgendaItem> {
        &self.agenda
    }

    pub fn agenda_len(&self) -> usize {
        self.agenda.len()
    }

    /// Constraint values after any relaxation.
    pub fn current_constraints(&self, domain: &str) -> Option<&IndexMap<String, String>> {
        self.current.get(domain)
    }

    fn acts_for(&self, item: &AgendaItem) -> Vec<DialogAct> {
        match item {
            AgendaItem::Inform { domain, slot, value } => vec![DialogAct::new(&act_domain(domain), "Inform", slot, value)],
            AgendaItem::Request { domain, slot } => vec![DialogAct::new(&act_domain(domain), "Request", slot, REQUESTED)],
            AgendaItem::Book { domain } => self.goal.domains[domain.as_str()]
                .book
                .iter()
                .map(|(s, v)| DialogAct::new(&act_domain(domain), "Inform", s, v))
                .collect(),
        }
    }

    /// Next user acts: up to two items from the head of the agenda, or
    /// thank and bye once it is empty.
    pub fn next_acts<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (Vec<DialogAct>, bool) {
        self.turns += 1;
        let Some(first) = self.agenda.pop_front() else {
            self.done = true;
            self.last_popped.clear();
            return (vec![DialogAct::bare("general", "thank"), DialogAct::bare("general", "bye")], true);
        };
        let mut popped = vec![first];
        if let Some(next) = self.agenda.front() {
            let first = &popped[0];
            let p = if next.same_kind(first) { self.cfg.same_kind_pair } else { self.cfg.mixed_pair };
            if next.domain() == first.domain() && rng.gen_bool(p) {
                popped.push(self.agenda.pop_front().expect("front exists"));
            }
        }
        let acts = popped.iter().flat_map(|i| self.acts_for(i)).collect();
        for i in &popped {
            *self.attempts.entry(i.clone()).or_default() += 1;
        }
        self.last_popped = popped;
        (acts, false)
    }

    /// Domains to name outright in the surface form.
    pub fn explicit_domains<R: Rng + ?Sized>(&mut self, acts: &[DialogAct], rng: &mut R) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen: IndexSet<String> = IndexSet::new();
        let mut last = None;
        for a in acts.iter().filter(|a| !a.is_general()) {
            let d = a.domain_key();
            if seen.insert(d.clone()) {
                let implicit = self.last_domain.as_deref() == Some(d.as_str()) && rng.gen_bool(self.cfg.implicit);
                if !implicit {
                    out.push(d.clone());
                }
            }
            last = Some(d);
        }
        if last.is_some() {
            self.last_domain = last;
        }
        out
    }

    /// Acts plus their realization.
    pub fn step<R: Rng + ?Sized>(&mut self, schema: &Schema, rng: &mut R) -> UserTurn {
        let (acts, done) = self.next_acts(rng);
        let explicit = self.explicit_domains(&acts, rng);
        let realized = realize_user_utterance(&acts, schema, &explicit, rng);
        UserTurn { acts, realized, done }
    }

    fn relax<R: Rng + ?Sized>(&mut self, schema: &Schema, db: &Database, domain: &str, slot: &str, rng: &mut R) -> String {
        let n = self.no_offers.entry((domain.to_string(), slot.to_string())).or_default();
        *n += 1;
        let first = *n == 1;
        let Some(cur) = self.current.get(domain) else {
            return DONTCARE.to_string();
        };
        let old = cur.get(slot).cloned().unwrap_or_default();
        if first {
            let mut others = cur.clone();
            others.shift_remove(slot);
            let field = schema.domain(domain).ok().and_then(|d| d.db_field(slot));
            if let (Some(field), Ok(matches)) = (field, db.query(domain, &db_constraints(schema, domain, &others))) {
                let alts: IndexSet<&String> = matches
                    .iter()
                    .filter_map(|e| e.get(field))
                    .filter(|v| !v.is_empty() && !v.eq_ignore_ascii_case(&old))
                    .collect();
                if !alts.is_empty() {
                    return alts[rng.gen_range(0..alts.len())].clone();
                }
            }
        }
        DONTCARE.to_string()
    }

    fn violated(&self, schema: &Schema, db: &Database, domain: &str, key_value: &str) -> Vec<(String, String)> {
        let (Ok(ds), Some(cur)) = (schema.domain(domain), self.current.get(domain)) else {
            return Vec::new();
        };
        let Some(key_field) = ds.db_field(&ds.key_slot) else {
            return Vec::new();
        };
        let Some(entity) = db
            .records(domain)
            .ok()
            .and_then(|rs| rs.iter().find(|r| r.get(key_field).is_some_and(|v| v.eq_ignore_ascii_case(key_value))))
        else {
            return Vec::new();
        };
        cur.iter()
            .filter(|(s, v)| {
                v.as_str() != DONTCARE
                    && ds
                        .db_field(s)
                        .and_then(|f| entity.get(f))
                        .is_some_and(|have| !same_value(have, v))
            })
            .map(|(s, v)| (s.clone(), v.clone()))
            .collect()
    }

    /// Updates the agenda from a system action.
    pub fn observe<R: Rng + ?Sized>(&mut self, action: &ActMap, schema: &Schema, db: &Database, rng: &mut R) {
        let mut front: Vec<AgendaItem> = Vec::new();
        for (label, pairs) in &action.0 {
            let Ok((d, intent)) = split_label(label) else { continue };
            let domain = d.to_lowercase();
            let Some(g) = self.goal.domains.get(&domain) else { continue };
            match intent {
                "Inform" | "Recommend" => {
                    for [slot, value] in pairs {
                        if g.requests.contains(slot) {
                            self.answered.entry(domain.clone()).or_default().insert(slot.clone(), value.clone());
                        }
                    }
                    if intent == "Recommend" {
                        let key = schema.domain(&domain).map(|s| s.key_slot.clone()).unwrap_or_default();
                        if let Some([_, name]) = pairs.iter().find(|[s, _]| *s == key) {
                            for (slot, value) in self.violated(schema, db, &domain, name) {
                                front.push(AgendaItem::Inform { domain: domain.clone(), slot, value });
                            }
                        }
                    }
                }
                "Book" => {
                    if pairs.iter().any(|[s, _]| s == "Ref") {
                        self.booked.insert(domain.clone());
                    }
                }
                "NoOffer" => {
                    let cur = self.current.get(&domain).cloned().unwrap_or_default();
                    let slot = pairs
                        .iter()
                        .rev()
                        .map(|[s, _]| s)
                        .find(|s| cur.get(*s).is_some_and(|v| v != DONTCARE))
                        .or_else(|| cur.iter().rev().find(|(_, v)| v.as_str() != DONTCARE).map(|(s, _)| s))
                        .cloned();
                    if let Some(slot) = slot {
                        let value = self.relax(schema, db, &domain, &slot, rng);
                        self.current.entry(domain.clone()).or_default().insert(slot.clone(), value.clone());
                        self.agenda.retain(|i| !matches!(i, AgendaItem::Inform { domain: d2, slot: s2, .. } if *d2 == domain && *s2 == slot));
                        front.push(AgendaItem::Inform { domain: domain.clone(), slot, value });
                    }
                }
                "Request" => {
                    for [slot, _] in pairs {
                        if g.book.contains_key(slot) {
                            if !front.iter().chain(self.agenda.iter()).any(|i| matches!(i, AgendaItem::Book { domain: d2 } if *d2 == domain)) {
                                front.push(AgendaItem::Book { domain: domain.clone() });
                            }
                        } else if let Some(v) = self.current.get(&domain).and_then(|c| c.get(slot)) {
                            front.push(AgendaItem::Inform { domain: domain.clone(), slot: slot.clone(), value: v.clone() });
                        }
                    }
                }
                _ => {}
            }
        }
        for item in std::mem::take(&mut self.last_popped) {
            let pending = match &item {
                AgendaItem::Request { domain, slot } => !self.is_answered(domain, slot),
                AgendaItem::Book { domain } => !self.booked.contains(domain),
                AgendaItem::Inform { .. } => false,
            };
            let tries = self.attempts.get(&item).copied().unwrap_or(0);
            if pending && tries <= self.cfg.retries && !front.contains(&item) && !self.agenda.contains(&item) {
                front.push(item);
            }
        }
        for item in front.into_iter().rev() {
            self.agenda.push_front(item);
        }
        let answered = self.answered.clone();
        let booked = self.booked.clone();
        self.agenda.retain(|i| match i {
            AgendaItem::Request { domain, slot } => !answered.get(domain).is_some_and(|a| a.contains_key(slot)),
            AgendaItem::Book { domain } => !booked.contains(domain),
            AgendaItem::Inform { .. } => true,
        });
    }

    fn is_answered(&self, domain: &str, slot: &str) -> bool {
        self.answered.get(domain).is_some_and(|a| a.contains_key(slot))
    }
}
