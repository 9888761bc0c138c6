//! TOML configuration for the service, `chat` and `simulate`.
//!
//! ```toml
//! checkpoint = "toy.ckpt"        # NLU checkpoint; without it only acts are accepted
//! embeddings = "ctx.store"       # contextual vector store; hash fallback if absent
//! schema = "data/schema.json"
//! db_dir = "data/db"
//! rules = "data/policy_rules.toml"
//! templates = "templates.tsv"    # mined store; builtin corpus if absent
//! window = 4                     # overrides the checkpoint's context window
//! threshold = 0.5                # overrides the intent threshold
//! max_turns = 40
//! host = "127.0.0.1"
//! port = 8080
//! session_ttl_secs = 1800
//! persist_dir = "transcripts"    # append-only JSONL transcripts
//! seed = 0
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use hceds::db::Database;
use hceds::embeddings::ContextualEmbeddingProvider;
use hceds::hcenlu::{checkpoint, NluPipeline};
use hceds::nlg::TemplateStore;
use hceds::policy::{DialogueManager, RuleTable};
use hceds::schema::Schema;
use hceds::DialogueSystem;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub checkpoint: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub db_dir: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub window: Option<usize>,
    pub threshold: Option<f64>,
    pub max_turns: usize,
    pub host: String,
    pub port: u16,
    pub session_ttl_secs: u64,
    pub persist_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            checkpoint: None,
            embeddings: None,
            schema: None,
            db_dir: None,
            rules: None,
            templates: None,
            window: None,
            threshold: None,
            max_turns: 40,
            host: "127.0.0.1".into(),
            port: 8080,
            session_ttl_secs: 1800,
            persist_dir: None,
            seed: 0,
        }
    }
}

impl ServiceConfig {
    /// Relative paths in the file are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ServiceConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.checkpoint,
            &mut cfg.embeddings,
            &mut cfg.schema,
            &mut cfg.db_dir,
            &mut cfg.rules,
            &mut cfg.templates,
            &mut cfg.persist_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map(Self::load).unwrap_or_else(|| Ok(Self::default()))
    }

    pub fn build_system(&self) -> Result<DialogueSystem> {
        let schema = match &self.schema {
            Some(p) => Schema::load(p)?,
            None => Schema::builtin(),
        };
        let db = match &self.db_dir {
            Some(p) => Database::load_dir(p)?,
            None => Database::builtin(),
        }
        .with_numeric(&schema);
        let rules = match &self.rules {
            Some(p) => RuleTable::load(p)?,
            None => RuleTable::builtin(),
        };
        let nlg = match &self.templates {
            Some(p) => TemplateStore::load(p)?.with_floor(&schema),
            None => TemplateStore::builtin(&schema),
        };
        let nlu = self.checkpoint.as_ref().map(|p| self.load_nlu(p)).transpose()?;
        Ok(DialogueSystem::new(DialogueManager { schema, db, rules }, nlg, nlu.map(Arc::new)))
    }

    pub fn load_nlu(&self, path: &Path) -> Result<NluPipeline<f64>> {
        load_pipeline(path, self.embeddings.as_deref(), self.window, self.threshold)
    }
}

/// Loads a checkpoint with the given store, or hash fallback vectors of the
/// checkpoint's own width.
pub fn load_pipeline(
    path: &Path,
    embeddings: Option<&Path>,
    window: Option<usize>,
    threshold: Option<f64>,
) -> Result<NluPipeline<f64>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let provider = match embeddings {
        Some(p) => ContextualEmbeddingProvider::load(p)?,
        None => ContextualEmbeddingProvider::hash_only(checkpoint::read_manifest(&bytes)?.config.ctx_dim),
    };
    let mut p: NluPipeline<f64> = checkpoint::from_bytes(&bytes, Arc::new(provider))?;
    if let Some(w) = window {
        p.model.config.window = w;
    }
    if let Some(t) = threshold {
        p.model.config.threshold = t;
    }
    p.model.config.validate()?;
    Ok(p)
}
