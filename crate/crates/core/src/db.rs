//! Entity tables per domain, equality queries and booking references.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::schema::{DomainSchema, DOMAINS};

pub type EntityRecord = IndexMap<String, String>;

/// Value that matches anything.
pub const DONTCARE: &str = "dontcare";

const BUILTIN: [(&str, &str); 7] = [
    ("hotel", include_str!("../data/db/hotel.json")),
    ("restaurant", include_str!("../data/db/restaurant.json")),
    ("police", include_str!("../data/db/police.json")),
    ("taxi", include_str!("../data/db/taxi.json")),
    ("attraction", include_str!("../data/db/attraction.json")),
    ("hospital", include_str!("../data/db/hospital.json")),
    ("train", include_str!("../data/db/train.json")),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryConstraint {
    /// DB field name.
    pub slot: String,
    pub value: String,
}

impl QueryConstraint {
    pub fn new(slot: &str, value: &str) -> Self {
        QueryConstraint {
            slot: slot.to_string(),
            value: value.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BookingOutcome {
    Reference(String),
    Refused { missing: Vec<String> },
}

#[derive(Debug, Clone, Default)]
pub struct Database {
    tables: IndexMap<String, Vec<EntityRecord>>,
    numeric: IndexMap<String, Vec<String>>,
}

fn norm(v: &str) -> String {
    v.trim().to_lowercase()
}

fn parse_records(domain: &str, text: &str) -> Result<Vec<EntityRecord>> {
    let raw: Vec<IndexMap<String, Value>> =
        serde_json::from_str(text).map_err(|e| Error::format(format!("{domain} db"), e.to_string()))?;
    raw.into_iter()
        .map(|r| {
            r.into_iter()
                .map(|(k, v)| match v {
                    Value::String(s) => Ok((k, s)),
                    Value::Number(n) => Ok((k, n.to_string())),
                    Value::Bool(b) => Ok((k, if b { "yes" } else { "no" }.to_string())),
                    other => Err(Error::format(format!("{domain} db"), format!("field `{k}` holds {other}"))),
                })
                .collect()
        })
        .collect()
}

impl Database {
    /// The bundled fixture tables.
    pub fn builtin() -> Self {
        let mut db = Database::default();
        for (d, text) in BUILTIN {
            db.tables.insert(d.to_string(), parse_records(d, text).expect("bundled db is valid"));
        }
        db
    }

    /// Reads `<dir>/<domain>.json` for every domain of the dispatch list.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut db = Database::default();
        for d in DOMAINS {
            let path = dir.as_ref().join(format!("{d}.json"));
            if !path.exists() {
                return Err(Error::format("db", format!("missing table {}", path.display())));
            }
            db.tables.insert(d.to_string(), parse_records(d, &fs::read_to_string(&path)?)?);
        }
        Ok(db)
    }

    pub fn from_tables(tables: IndexMap<String, Vec<EntityRecord>>) -> Self {
        Database {
            tables,
            numeric: IndexMap::new(),
        }
    }

    /// Declares which DB fields compare numerically, from the schema.
    pub fn with_numeric(mut self, schema: &crate::schema::Schema) -> Self {
        for (d, s) in &schema.domains {
            self.numeric.insert(d.clone(), s.numeric.clone());
        }
        self
    }

    pub fn domains(&self) -> impl Iterator<Item = &String> {
        self.tables.keys()
    }

    pub fn records(&self, domain: &str) -> Result<&[EntityRecord]> {
        self.tables
            .get(domain)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Domain(domain.to_string()))
    }

    fn matches(&self, domain: &str, r: &EntityRecord, c: &QueryConstraint) -> bool {
        let want = norm(&c.value);
        if want.is_empty() || want == DONTCARE {
            return true;
        }
        let Some(have) = r.get(&c.slot) else {
            return false;
        };
        let numeric = self.numeric.get(domain).is_some_and(|n| n.contains(&c.slot));
        if numeric {
            if let (Ok(a), Ok(b)) = (have.trim().parse::<f64>(), want.parse::<f64>()) {
                return a == b;
            }
        }
        norm(have) == want
    }

    /// Records matching every constraint, in file order.
    pub fn query(&self, domain: &str, constraints: &[QueryConstraint]) -> Result<Vec<&EntityRecord>> {
        Ok(self
            .records(domain)?
            .iter()
            .filter(|r| constraints.iter().all(|c| self.matches(domain, r, c)))
            .collect())
    }

    /// Issues a reference when every required book slot is filled.
    pub fn make_booking<R: Rng + ?Sized>(
        &self,
        schema: &DomainSchema,
        book: &IndexMap<String, String>,
        rng: &mut R,
    ) -> BookingOutcome {
        let missing: Vec<String> = schema
            .required_book
            .iter()
            .filter(|s| book.get(*s).is_none_or(|v| v.trim().is_empty()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return BookingOutcome::Refused { missing };
        }
        BookingOutcome::Reference(booking_reference(rng))
    }
}

pub fn booking_reference<R: Rng + ?Sized>(rng: &mut R) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    (0..8)
        .map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char)
        .collect()
}
