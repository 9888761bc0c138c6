//! Dialog acts: `(domain, intent, slot, value)` quadruples and the
//! `{"Domain-Intent": [[slot, value], ..]}` map form used on the wire.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NONE: &str = "none";
pub const REQUESTED: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

impl Speaker {
    /// The pseudo-token that opens a turn in the dialogue context.
    pub fn marker(self) -> &'static str {
        match self {
            Speaker::User => crate::text::bpe::USER_MARK,
            Speaker::System => crate::text::bpe::SYSTEM_MARK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DialogAct {
    pub domain: String,
    pub intent: String,
    pub slot: String,
    pub value: String,
}

impl DialogAct {
    pub fn new(domain: &str, intent: &str, slot: &str, value: &str) -> Self {
        DialogAct {
            domain: domain.to_string(),
            intent: intent.to_string(),
            slot: slot.to_string(),
            value: value.to_string(),
        }
    }

    /// Slot-less act such as `general-thank`.
    pub fn bare(domain: &str, intent: &str) -> Self {
        Self::new(domain, intent, NONE, NONE)
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.domain, self.intent)
    }

    pub fn is_request(&self) -> bool {
        self.intent == "Request"
    }

    pub fn is_general(&self) -> bool {
        self.domain.eq_ignore_ascii_case("general")
    }

    /// Lowercase domain, the form the schema and DB use.
    pub fn domain_key(&self) -> String {
        self.domain.to_lowercase()
    }
}

impl fmt::Display for DialogAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}({}={})", self.domain, self.intent, self.slot, self.value)
    }
}

/// Splits `"Attraction-Inform"` into its domain and intent.
pub fn split_label(label: &str) -> Result<(&str, &str)> {
    label
        .split_once('-')
        .filter(|(d, i)| !d.is_empty() && !i.is_empty())
        .ok_or_else(|| Error::format("dialog act label", format!("`{label}` is not Domain-Intent")))
}

/// Splits a tag label `"Hotel-Inform+Parking"` into `("Hotel-Inform", "Parking")`.
pub fn split_tag_label(label: &str) -> Result<(&str, &str)> {
    label
        .split_once('+')
        .filter(|(l, s)| !l.is_empty() && !s.is_empty())
        .ok_or_else(|| Error::format("tag label", format!("`{label}` is not Domain-Intent+Slot")))
}

/// Ordered map form of a set of acts. Insertion order is kept.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActMap(pub IndexMap<String, Vec<[String; 2]>>);

impl ActMap {
    pub fn new() -> Self {
        ActMap(IndexMap::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    pub fn push(&mut self, label: &str, slot: &str, value: &str) {
        self.0
            .entry(label.to_string())
            .or_default()
            .push([slot.to_string(), value.to_string()]);
    }

    pub fn from_acts(acts: &[DialogAct]) -> Self {
        let mut m = ActMap::new();
        for a in acts {
            m.push(&a.label(), &a.slot, &a.value);
        }
        m
    }

    pub fn to_acts(&self) -> Result<Vec<DialogAct>> {
        let mut out = Vec::new();
        for (label, pairs) in &self.0 {
            let (d, i) = split_label(label)?;
            if pairs.is_empty() {
                out.push(DialogAct::bare(d, i));
            }
            for [s, v] in pairs {
                out.push(DialogAct::new(d, i, s, v));
            }
        }
        Ok(out)
    }

    pub fn get(&self, label: &str) -> Option<&Vec<[String; 2]>> {
        self.0.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn contains(&self, label: &str, slot: &str) -> bool {
        self.0
            .get(label)
            .is_some_and(|p| p.iter().any(|[s, _]| s == slot))
    }

    pub fn value(&self, label: &str, slot: &str) -> Option<&str> {
        self.0
            .get(label)?
            .iter()
            .find(|[s, _]| s == slot)
            .map(|[_, v]| v.as_str())
    }
}

impl fmt::Display for ActMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(&self.0).map_err(|_| fmt::Error)?)
    }
}
