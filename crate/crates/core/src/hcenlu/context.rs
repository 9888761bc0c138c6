use serde::{Deserialize, Serialize};

use crate::act::Speaker;

/// The last `w` completed turns before the current user utterance, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogContextWindow {
    pub turns: Vec<(Speaker, String)>,
    pub w: usize,
}

impl DialogContextWindow {
    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }
}

pub fn build_context(history: &[(Speaker, String)], w: usize) -> DialogContextWindow {
    let start = history.len().saturating_sub(w);
    DialogContextWindow {
        turns: history[start..].to_vec(),
        w,
    }
}
