use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::db::{Database, QueryConstraint};
use crate::error::{Error, Result};
use crate::schema::{Schema, DOMAINS};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    /// Act slot to value.
    pub constraints: IndexMap<String, String>,
    /// Act slots the user wants told.
    pub requests: Vec<String>,
    /// Act slot to value for booking.
    #[serde(default)]
    pub book: IndexMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    /// Lowercase domain to its goal, in the order the user pursues them.
    pub domains: IndexMap<String, DomainGoal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    pub min_domains: usize,
    pub max_domains: usize,
    pub domains: Vec<String>,
    pub max_constraints: usize,
    pub max_requests: usize,
    pub book_probability: f64,
}

impl Default for GoalConfig {
    fn default() -> Self {
        GoalConfig {
            min_domains: 1,
            max_domains: 3,
            domains: DOMAINS.iter().map(|d| d.to_string()).collect(),
            max_constraints: 3,
            max_requests: 3,
            book_probability: 0.5,
        }
    }
}

const TIMES: [&str; 8] = ["09:15", "10:30", "11:45", "13:00", "14:30", "16:15", "17:45", "19:00"];
const DAYS: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const PLACE_DOMAINS: [&str; 3] = ["attraction", "hotel", "restaurant"];

fn book_value<R: Rng + ?Sized>(belief: &str, rng: &mut R) -> String {
    match belief {
        "people" => rng.gen_range(1..=8).to_string(),
        "stay" => rng.gen_range(1..=5).to_string(),
        "day" => DAYS.choose(rng).unwrap().to_string(),
        _ => TIMES.choose(rng).unwrap().to_string(),
    }
}

fn taxi_constraints<R: Rng + ?Sized>(db: &Database, rng: &mut R) -> IndexMap<String, String> {
    let mut names: Vec<&str> = Vec::new();
    for d in PLACE_DOMAINS {
        if let Ok(rs) = db.records(d) {
            names.extend(rs.iter().filter_map(|r| r.get("name").map(String::as_str)));
        }
    }
    let mut c = IndexMap::new();
    if rng.gen_bool(0.5) {
        c.insert("Leave".to_string(), TIMES.choose(rng).unwrap().to_string());
    } else {
        c.insert("Arrive".to_string(), TIMES.choose(rng).unwrap().to_string());
    }
    if names.len() >= 2 && rng.gen_bool(0.5) {
        let picked: Vec<&&str> = names.choose_multiple(rng, 2).collect();
        c.insert("Depart".to_string(), picked[0].to_string());
        c.insert("Dest".to_string(), picked[1].to_string());
    }
    c
}

/// Draws a goal whose constraints are read off a real entity, so every
/// constrained domain has at least one match.
pub fn sample_goal<R: Rng + ?Sized>(schema: &Schema, db: &Database, cfg: &GoalConfig, rng: &mut R) -> Result<UserGoal> {
    let pool: Vec<&String> = cfg
        .domains
        .iter()
        .filter(|d| schema.contains(d) && db.records(d).is_ok_and(|r| !r.is_empty()))
        .collect();
    if pool.is_empty() || cfg.min_domains == 0 || cfg.min_domains > cfg.max_domains {
        return Err(Error::Param("goal config admits no domain".into()));
    }
    let n = rng.gen_range(cfg.min_domains..=cfg.max_domains).min(pool.len());
    let chosen: Vec<&String> = pool.choose_multiple(rng, n).copied().collect();
    let mut goal = UserGoal::default();
    for d in chosen {
        let ds = schema.domain(d)?;
        let records = db.records(d)?;
        let entity = records.choose(rng).expect("pool has records");
        let constraints = if d == "taxi" {
            taxi_constraints(db, rng)
        } else {
            let mut cands: Vec<(String, String)> = ds
                .semi
                .iter()
                .filter_map(|b| {
                    let slot = ds.act_slot_for_belief(b)?;
                    if slot == ds.key_slot && ds.semi.len() > 1 || slot == "Name" {
                        return None;
                    }
                    let v = entity.get(ds.db_field(slot)?)?;
                    (!v.is_empty()).then(|| (slot.to_string(), v.clone()))
                })
                .collect();
            cands.shuffle(rng);
            let k = if cands.is_empty() { 0 } else { rng.gen_range(1..=cands.len().min(cfg.max_constraints)) };
            cands.truncate(k);
            // keep schema order so agendas read naturally
            let order = |s: &str| ds.slots.get_index_of(s).unwrap_or(usize::MAX);
            cands.sort_by_key(|(s, _)| order(s));
            cands.into_iter().collect()
        };
        let mut req: Vec<String> = ds
            .requestable
            .iter()
            .filter(|s| {
                *s != "Ref"
                    && *s != "Name"
                    && !constraints.contains_key(*s)
                    && ds.db_field(s).is_some_and(|f| entity.contains_key(f))
            })
            .cloned()
            .collect();
        req.shuffle(rng);
        let k = if req.is_empty() { 0 } else { rng.gen_range(1..=req.len().min(cfg.max_requests)) };
        req.truncate(k);
        req.sort_by_key(|s| ds.requestable.iter().position(|x| x == s));
        let mut book = IndexMap::new();
        if ds.needs_booking() && rng.gen_bool(cfg.book_probability) {
            for b in &ds.required_book {
                if let Some(slot) = ds.act_slot_for_belief(b) {
                    book.insert(slot.to_string(), book_value(b, rng));
                }
            }
        }
        goal.domains.insert(
            d.clone(),
            DomainGoal {
                constraints,
                requests: req,
                book,
            },
        );
    }
    debug_assert!(goal_is_satisfiable(&goal, schema, db));
    Ok(goal)
}

/// DB constraints of a domain goal, given its current act-slot values.
pub fn db_constraints(schema: &Schema, domain: &str, constraints: &IndexMap<String, String>) -> Vec<QueryConstraint> {
    let Ok(ds) = schema.domain(domain) else {
        return Vec::new();
    };
    constraints
        .iter()
        .filter_map(|(s, v)| Some(QueryConstraint::new(ds.db_field(s)?, v)))
        .collect()
}

pub fn goal_is_satisfiable(goal: &UserGoal, schema: &Schema, db: &Database) -> bool {
    goal.domains.iter().all(|(d, g)| {
        db.query(d, &db_constraints(schema, d, &g.constraints))
            .is_ok_and(|m| !m.is_empty())
    })
}

/// One goal per line.
pub fn save_goals(path: impl AsRef<Path>, goals: &[UserGoal]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for g in goals {
        writeln!(f, "{}", serde_json::to_string(g)?)?;
    }
    Ok(())
}

pub fn load_goals(path: impl AsRef<Path>) -> Result<Vec<UserGoal>> {
    let mut out = Vec::new();
    for line in BufReader::new(fs::File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
