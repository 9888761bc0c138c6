//! The assembled system: NLU, state tracking, policy and NLG behind one
//! turn function.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::act::{ActMap, DialogAct};
use crate::error::{Error, Result};
use crate::hcenlu::{NluOutput, NluPipeline};
use crate::nlg::{Realization, TemplateStore};
use crate::policy::{is_close_session, DialogueManager};
use crate::state::{fulfilled_requests, init_state, update, DialogState};

#[derive(Debug, Clone)]
pub struct DialogueSystem {
    pub dm: DialogueManager,
    pub nlg: TemplateStore,
    pub nlu: Option<Arc<NluPipeline<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub state: DialogState,
    pub rng: ChaCha8Rng,
    pub closed: bool,
    pub turns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub acts: Vec<DialogAct>,
    pub action: ActMap,
    pub utterance: String,
    pub realization: Realization,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nlu: Option<NluOutput>,
    pub closed: bool,
}

impl Default for DialogueSystem {
    fn default() -> Self {
        let dm = DialogueManager::default();
        let nlg = TemplateStore::builtin(&dm.schema);
        DialogueSystem { dm, nlg, nlu: None }
    }
}

impl DialogueSystem {
    pub fn new(dm: DialogueManager, nlg: TemplateStore, nlu: Option<Arc<NluPipeline<f64>>>) -> Self {
        DialogueSystem { dm, nlg, nlu }
    }

    pub fn with_nlu(mut self, nlu: NluPipeline<f64>) -> Self {
        self.nlu = Some(Arc::new(nlu));
        self
    }

    pub fn session(&self, seed: u64) -> Session {
        Session {
            state: init_state(&self.dm.schema),
            rng: ChaCha8Rng::seed_from_u64(seed),
            closed: false,
            turns: 0,
        }
    }

    pub fn understand(&self, session: &Session, text: &str) -> Result<NluOutput> {
        let nlu = self.nlu.as_ref().ok_or_else(|| Error::Param("no NLU model loaded".into()))?;
        nlu.parse(text, &session.state.history)
    }

    /// One pass with the user acts given: update, decide, mark fulfilled,
    /// generate.
    pub fn respond_acts(&self, session: &mut Session, acts: &[DialogAct], text: &str) -> TurnResult {
        let state = update(&session.state, &self.dm.schema, acts, text);
        let action = self.dm.decide(&state, &mut session.rng);
        let (utterance, realization) = self.nlg.generate(&action);
        session.state = fulfilled_requests(&state, &action, &utterance);
        session.turns += 1;
        session.closed = is_close_session(&action);
        TurnResult {
            acts: acts.to_vec(),
            action,
            utterance,
            realization,
            nlu: None,
            closed: session.closed,
        }
    }

    /// The full pipeline from user text.
    pub fn respond_text(&self, session: &mut Session, text: &str) -> Result<TurnResult> {
        if text.trim().is_empty() {
            return Err(Error::Input("empty utterance".into()));
        }
        let out = self.understand(session, text)?;
        let mut r = self.respond_acts(session, &out.acts.clone(), text);
        r.nlu = Some(out);
        Ok(r)
    }
}
