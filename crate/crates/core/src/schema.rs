//! Per-domain slot schema: which belief slots are semi vs book, which act
//! slots are requestable, and how act slot names map to belief and DB
//! field names.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The domain list the policy dispatches on, in the order it is declared.
pub const DOMAINS: [&str; 7] = ["hotel", "restaurant", "police", "taxi", "attraction", "hospital", "train"];

const BUILTIN: &str = include_str!("../data/schema.json");

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotMapping {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub db: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    /// Act slot naming the entity (`Name`, `Id`, `Car`, `Department`).
    pub key_slot: String,
    pub semi: Vec<String>,
    pub book: Vec<String>,
    pub required_book: Vec<String>,
    pub key_fields: Vec<String>,
    #[serde(default)]
    pub numeric: Vec<String>,
    pub requestable: Vec<String>,
    /// Act slot name to belief / DB field.
    pub slots: IndexMap<String, SlotMapping>,
}

impl DomainSchema {
    pub fn belief_slot(&self, act_slot: &str) -> Option<&str> {
        self.slots.get(act_slot)?.belief.as_deref()
    }

    pub fn db_field(&self, act_slot: &str) -> Option<&str> {
        self.slots.get(act_slot)?.db.as_deref()
    }

    /// Act slot whose belief field is `belief`.
    pub fn act_slot_for_belief(&self, belief: &str) -> Option<&str> {
        self.slots
            .iter()
            .find(|(_, m)| m.belief.as_deref() == Some(belief))
            .map(|(k, _)| k.as_str())
    }

    pub fn is_book_slot(&self, act_slot: &str) -> bool {
        self.belief_slot(act_slot).is_some_and(|b| self.book.iter().any(|x| x == b))
    }

    pub fn needs_booking(&self) -> bool {
        !self.required_book.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub domains: IndexMap<String, DomainSchema>,
}

impl Schema {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("bundled schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::format("schema", "no domains"));
        }
        for (name, d) in &self.domains {
            if name != &name.to_lowercase() {
                return Err(Error::format("schema", format!("domain `{name}` is not lowercase")));
            }
            for (slot, m) in &d.slots {
                if let Some(b) = &m.belief {
                    if !d.semi.contains(b) && !d.book.contains(b) {
                        return Err(Error::format(
                            "schema",
                            format!("{name}.{slot} maps to belief `{b}` outside semi and book"),
                        ));
                    }
                }
            }
            for b in d.semi.iter().chain(&d.book) {
                if d.act_slot_for_belief(b).is_none() {
                    return Err(Error::format("schema", format!("{name} belief slot `{b}` has no act slot")));
                }
            }
            if let Some(b) = d.required_book.iter().find(|b| !d.book.contains(b)) {
                return Err(Error::format("schema", format!("{name} requires unknown book slot `{b}`")));
            }
        }
        Ok(())
    }

    pub fn domain(&self, key: &str) -> Result<&DomainSchema> {
        self.domains.get(key).ok_or_else(|| Error::Domain(key.to_string()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.domains.contains_key(key)
    }
}

/// `"hotel"` to the act form `"Hotel"`.
pub fn act_domain(key: &str) -> String {
    let mut c = key.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_covers_the_domain_list() {
        let s = Schema::builtin();
        for d in DOMAINS {
            assert!(s.contains(d), "{d}");
        }
        let a = s.domain("attraction").unwrap();
        assert_eq!(a.semi, ["type", "name", "area", "entrance fee"]);
        assert_eq!(a.db_field("Fee"), Some("entrance fee"));
        assert_eq!(a.db_field("Addr"), Some("address"));
        assert!(s.domain("hotel").unwrap().is_book_slot("Stay"));
        assert!(!s.domain("hotel").unwrap().is_book_slot("Area"));
    }

    #[test]
    fn rejects_empty_and_bad_mappings() {
        assert!(Schema::from_json(r#"{"domains": {}}"#).is_err());
        let bad = r#"{"domains": {"x": {"key_slot": "Name", "semi": [], "book": [], "required_book": [],
            "key_fields": [], "requestable": [], "slots": {"Name": {"belief": "name"}}}}}"#;
        assert!(Schema::from_json(bad).is_err());
    }

    #[test]
    fn act_domain_capitalizes() {
        assert_eq!(act_domain("hotel"), "Hotel");
        assert_eq!(act_domain(""), "");
    }
}
