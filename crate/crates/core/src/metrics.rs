//! Precision / recall / F1 bookkeeping.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Micro-averaged counts. Precision with no predictions and recall with no
/// gold items are both defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Prf {
    /// Counts for one predicted set against one gold set.
    pub fn of_sets<K: Ord>(gold: &BTreeSet<K>, pred: &BTreeSet<K>) -> Self {
        let tp = gold.intersection(pred).count();
        Prf {
            tp,
            fp: pred.len() - tp,
            fn_: gold.len() - tp,
        }
    }

    pub fn add(&mut self, other: Prf) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}
