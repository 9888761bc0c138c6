use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::act::{split_label, ActMap, DialogAct};
use crate::db::Database;
use crate::schema::Schema;
use crate::sim::agenda::same_value;
use crate::sim::goal::{db_constraints, UserGoal};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub success: bool,
    /// Domains that received a booking reference.
    pub booked: Vec<String>,
    /// `(domain, slot)` goal requests that never got a value.
    pub unanswered: Vec<(String, String)>,
    /// Domains whose answers match no entity under the final constraints.
    pub inconsistent: Vec<String>,
}

/// Scores a finished dialogue from the goal, the gold user acts and the
/// system actions of each turn.
///
/// The final constraints are the user's last informed value per goal
/// slot (so relaxations count), else the goal value. The answer to a
/// request is the latest system Inform or Recommend of that slot.
pub fn judge_success<'a, I>(goal: &UserGoal, turns: I, schema: &Schema, db: &Database) -> Judgement
where
    I: IntoIterator<Item = (&'a [DialogAct], &'a ActMap)>,
{
    let mut finals: IndexMap<String, IndexMap<String, String>> =
        goal.domains.iter().map(|(d, g)| (d.clone(), g.constraints.clone())).collect();
    let mut answers: IndexMap<String, IndexMap<String, String>> = IndexMap::new();
    let mut booked: IndexSet<String> = IndexSet::new();
    for (user, system) in turns {
        for a in user.iter().filter(|a| a.intent == "Inform") {
            if let Some(c) = finals.get_mut(&a.domain_key()) {
                if let Some(v) = c.get_mut(&a.slot) {
                    *v = a.value.clone();
                }
            }
        }
        for (label, pairs) in &system.0 {
            let Ok((d, intent)) = split_label(label) else { continue };
            let d = d.to_lowercase();
            match intent {
                "Inform" | "Recommend" => {
                    let ans = answers.entry(d).or_default();
                    for [s, v] in pairs {
                        ans.insert(s.clone(), v.clone());
                    }
                }
                "Book" if pairs.iter().any(|[s, _]| s == "Ref") => {
                    booked.insert(d);
                }
                _ => {}
            }
        }
    }

    let mut j = Judgement::default();
    for (d, g) in &goal.domains {
        if g.requests.is_empty() {
            continue;
        }
        let got = answers.get(d);
        let mut pairs = Vec::new();
        for slot in &g.requests {
            match got.and_then(|a| a.get(slot)) {
                Some(v) => pairs.push((slot, v)),
                None => j.unanswered.push((d.clone(), slot.clone())),
            }
        }
        let Ok(ds) = schema.domain(d) else {
            j.inconsistent.push(d.clone());
            continue;
        };
        let matches = db.query(d, &db_constraints(schema, d, &finals[d.as_str()])).unwrap_or_default();
        let consistent = matches.iter().any(|e| {
            pairs.iter().all(|(slot, v)| {
                ds.db_field(slot)
                    .and_then(|f| e.get(f))
                    .is_some_and(|have| same_value(have, v))
            })
        });
        if !consistent {
            j.inconsistent.push(d.clone());
        }
    }
    let mut bookings_ok = true;
    for (d, g) in &goal.domains {
        if booked.contains(d) {
            j.booked.push(d.clone());
        } else if !g.book.is_empty() {
            bookings_ok = false;
        }
    }
    j.success = j.unanswered.is_empty() && j.inconsistent.is_empty() && bookings_ok;
    j
}
