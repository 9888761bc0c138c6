use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::{CharCnn, CharCnnCache, CharVocab};
use crate::error::{Error, Result};
use crate::nn::{multilabel_bce_loss, softmax_slice, tag_xent_loss, Affine, AttentionCache, BiLstm, BiLstmCache, BilinearAttention, SeqDropout};
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Parameterized};

/// Architecture hyperparameters. Defaults give 768 + 128 = 896 token
/// inputs, hidden 200 everywhere and a 1200-wide concatenation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NluConfig {
    pub ctx_dim: usize,
    pub char_dim: usize,
    pub n_filters: usize,
    pub char_width: usize,
    pub token_hidden: usize,
    pub sentence_hidden: usize,
    /// Number of past turns in the dialogue context.
    pub window: usize,
    pub threshold: f64,
    pub dropout: f64,
    pub use_char_cnn: bool,
    pub tag_context: bool,
    pub intent_attention: bool,
}

impl Default for NluConfig {
    fn default() -> Self {
        NluConfig {
            ctx_dim: 768,
            char_dim: 16,
            n_filters: 128,
            char_width: 3,
            token_hidden: 200,
            sentence_hidden: 200,
            window: 4,
            threshold: 0.5,
            dropout: 0.5,
            use_char_cnn: true,
            tag_context: true,
            intent_attention: true,
        }
    }
}

impl NluConfig {
    pub fn token_input(&self) -> usize {
        self.ctx_dim + if self.use_char_cnn { self.n_filters } else { 0 }
    }

    /// Width of the intent and per-step tag concatenations.
    pub fn concat_dim(&self) -> usize {
        4 * self.token_hidden + 2 * self.sentence_hidden
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("ctx_dim", self.ctx_dim),
            ("token_hidden", self.token_hidden),
            ("sentence_hidden", self.sentence_hidden),
        ];
        if let Some((n, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Param(format!("{n} must be positive")));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Param(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Param(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Frozen contextual vectors plus character ids, one entry per token.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenFeatures<T> {
    pub ctx: Vec<Vec<T>>,
    pub chars: Vec<Vec<u32>>,
}

impl<T> TokenFeatures<T> {
    pub fn len(&self) -> usize {
        self.ctx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ctx.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput<T> {
    pub uu: TokenFeatures<T>,
    pub dc: TokenFeatures<T>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    uu_cnn: Vec<CharCnnCache>,
    dc_cnn: Vec<CharCnnCache>,
    uu_lstm: BiLstmCache<T>,
    dc_lstm: BiLstmCache<T>,
    intent_lstm: BiLstmCache<T>,
    tag_lstm: BiLstmCache<T>,
    drop_uu: SeqDropout<T>,
    drop_dc: SeqDropout<T>,
    drop_intent: SeqDropout<T>,
    drop_tag: SeqDropout<T>,
    s_uu: Vec<Vec<T>>,
    s_dc: Vec<Vec<T>>,
    query: Vec<T>,
    attention: Option<AttentionCache<T>>,
    intent_concat: Vec<T>,
    tag_concat: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    pub intent_logits: Vec<T>,
    pub tag_logits: Vec<Vec<T>>,
    /// Attention weights over DC tokens; empty when attention is off.
    pub attention: Vec<T>,
    /// The attended DC context vector.
    pub c_dc: Vec<T>,
    pub cache: ForwardCache<T>,
}

/// The two-headed hierarchical-context encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct HcenluModel<T> {
    pub config: NluConfig,
    pub labels: Vec<String>,
    /// BIOX tag strings; index 0 is `O`.
    pub tags: Vec<String>,
    pub char_cnn: CharCnn<T>,
    pub uu_encoder: BiLstm<T>,
    pub dc_encoder: BiLstm<T>,
    pub intent_encoder: BiLstm<T>,
    pub tag_encoder: BiLstm<T>,
    pub attention: BilinearAttention<T>,
    pub intent_head: Affine<T>,
    pub tag_head: Affine<T>,
}

fn last<T: Clone>(v: &[Vec<T>]) -> Vec<T> {
    v.last().cloned().unwrap_or_default()
}

impl<T: Scalar> HcenluModel<T> {
    pub fn new<R: Rng + ?Sized>(
        config: NluConfig,
        labels: Vec<String>,
        tags: Vec<String>,
        chars: CharVocab,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if labels.is_empty() {
            return Err(Error::Param("empty label inventory".into()));
        }
        if tags.first().map(String::as_str) != Some("O") {
            return Err(Error::Param("tag inventory must start with `O`".into()));
        }
        let k = 2 * config.token_hidden;
        let q = 2 * config.sentence_hidden;
        let char_cnn = CharCnn::new(chars, config.char_dim.max(1), config.n_filters.max(1), config.char_width, rng)?;
        let input = config.token_input();
        let concat = config.concat_dim();
        Ok(HcenluModel {
            uu_encoder: BiLstm::new("uu", input, config.token_hidden, rng),
            dc_encoder: BiLstm::new("dc", input, config.token_hidden, rng),
            intent_encoder: BiLstm::new("intent", k, config.sentence_hidden, rng),
            tag_encoder: BiLstm::new("tag", k, config.sentence_hidden, rng),
            attention: BilinearAttention::new("attention", q, k, rng),
            intent_head: Affine::new("intent_head", concat, labels.len(), rng),
            tag_head: Affine::new("tag_head", concat, tags.len(), rng),
            char_cnn,
            config,
            labels,
            tags,
        })
    }

    fn embed(&self, feats: &TokenFeatures<T>) -> (Vec<Vec<T>>, Vec<CharCnnCache>) {
        let mut caches = Vec::new();
        let emb = feats
            .ctx
            .iter()
            .zip(&feats.chars)
            .map(|(ctx, chars)| {
                let mut v = ctx.clone();
                if self.config.use_char_cnn {
                    let (c, cache) = self.char_cnn.forward_ids(chars);
                    v.extend(c);
                    caches.push(cache);
                }
                v
            })
            .collect();
        (emb, caches)
    }

    /// Full forward pass. Dropout is active iff `rng` is given.
    pub fn forward<R: Rng + ?Sized>(&self, input: &ModelInput<T>, mut rng: Option<&mut R>) -> Result<ForwardOutput<T>> {
        if input.uu.is_empty() {
            return Err(Error::Input("the user utterance has no tokens".into()));
        }
        if input.dc.is_empty() {
            return Err(Error::Input("the dialogue context has no tokens; pass the sentinel".into()));
        }
        for f in [&input.uu, &input.dc] {
            if let Some(v) = f.ctx.iter().find(|v| v.len() != self.config.ctx_dim) {
                return Err(Error::shape(
                    "hcenlu",
                    format!("contextual vector of dim {}, model expects {}", v.len(), self.config.ctx_dim),
                ));
            }
        }
        let rate = rng.is_some().then_some(self.config.dropout);
        let (k, q) = (2 * self.config.token_hidden, 2 * self.config.sentence_hidden);
        let (m, n) = (input.uu.len(), input.dc.len());
        let mut sample = |steps: usize, dim: usize| -> Result<SeqDropout<T>> {
            match rng.as_deref_mut() {
                Some(r) => SeqDropout::sample(steps, dim, rate, r),
                None => Ok(SeqDropout::none()),
            }
        };
        let drop_uu = sample(m, k)?;
        let drop_dc = sample(n, k)?;
        let drop_intent = sample(m, q)?;
        let drop_tag = sample(m, q)?;

        let (e_uu, uu_cnn) = self.embed(&input.uu);
        let (e_dc, dc_cnn) = self.embed(&input.dc);
        let (mut s_uu, uu_lstm) = self.uu_encoder.forward(&e_uu)?;
        let (mut s_dc, dc_lstm) = self.dc_encoder.forward(&e_dc)?;
        drop_uu.apply(&mut s_uu);
        drop_dc.apply(&mut s_dc);

        let (mut h_int, intent_lstm) = self.intent_encoder.forward(&s_uu)?;
        let (mut h_tag, tag_lstm) = self.tag_encoder.forward(&s_uu)?;
        drop_intent.apply(&mut h_int);
        drop_tag.apply(&mut h_tag);

        let query = last(&h_int);
        let last_dc = last(&s_dc);
        let (c_dc, attention) = if self.config.intent_attention {
            let (c, cache) = self.attention.forward(&query, &s_dc)?;
            (c, Some(cache))
        } else {
            (vec![T::zero(); k], None)
        };

        let mut intent_concat = Vec::with_capacity(self.config.concat_dim());
        intent_concat.extend_from_slice(&c_dc);
        intent_concat.extend_from_slice(&last_dc);
        intent_concat.extend_from_slice(&query);
        let intent_logits = self.intent_head.forward(&intent_concat);

        let mut context = Vec::with_capacity(2 * k);
        if self.config.tag_context {
            context.extend_from_slice(&c_dc);
            context.extend_from_slice(&last_dc);
        } else {
            context.resize(2 * k, T::zero());
        }
        let tag_concat: Vec<Vec<T>> = h_tag
            .iter()
            .map(|h| {
                let mut v = context.clone();
                v.extend_from_slice(h);
                v
            })
            .collect();
        let tag_logits = tag_concat.iter().map(|x| self.tag_head.forward(x)).collect();

        let weights = attention.as_ref().map(|a| a.weights.clone()).unwrap_or_default();
        Ok(ForwardOutput {
            intent_logits,
            tag_logits,
            attention: weights,
            c_dc,
            cache: ForwardCache {
                uu_cnn,
                dc_cnn,
                uu_lstm,
                dc_lstm,
                intent_lstm,
                tag_lstm,
                drop_uu,
                drop_dc,
                drop_intent,
                drop_tag,
                s_uu,
                s_dc,
                query,
                attention,
                intent_concat,
                tag_concat,
            },
        })
    }

    /// Accumulates parameter gradients given the gradients of the logits.
    pub fn backward(&mut self, cache: &ForwardCache<T>, d_intent: &[T], d_tags: &[Vec<T>]) {
        let k = 2 * self.config.token_hidden;
        let m = cache.s_uu.len();
        let n = cache.s_dc.len();

        let mut d_ic = vec![T::zero(); cache.intent_concat.len()];
        self.intent_head.backward(&cache.intent_concat, d_intent, &mut d_ic);
        let mut d_cdc = d_ic[..k].to_vec();
        let mut d_last_dc = d_ic[k..2 * k].to_vec();
        let mut d_h_int = vec![vec![T::zero(); 2 * self.config.sentence_hidden]; m];
        d_h_int[m - 1].copy_from_slice(&d_ic[2 * k..]);

        let mut d_h_tag = Vec::with_capacity(m);
        for (x, dy) in cache.tag_concat.iter().zip(d_tags) {
            let mut dx = vec![T::zero(); x.len()];
            self.tag_head.backward(x, dy, &mut dx);
            if self.config.tag_context {
                for i in 0..k {
                    d_cdc[i] += dx[i];
                    d_last_dc[i] += dx[k + i];
                }
            }
            d_h_tag.push(dx[2 * k..].to_vec());
        }

        let mut d_s_dc = vec![vec![T::zero(); k]; n];
        for (a, b) in d_s_dc[n - 1].iter_mut().zip(&d_last_dc) {
            *a += *b;
        }
        if let Some(att) = &cache.attention {
            let mut d_query = vec![T::zero(); cache.query.len()];
            self.attention
                .backward(&cache.query, &cache.s_dc, att, &d_cdc, &mut d_query, &mut d_s_dc);
            for (a, b) in d_h_int[m - 1].iter_mut().zip(&d_query) {
                *a += *b;
            }
        }

        cache.drop_intent.apply(&mut d_h_int);
        cache.drop_tag.apply(&mut d_h_tag);
        let mut d_s_uu = self.intent_encoder.backward(&cache.intent_lstm, &d_h_int);
        let d_from_tag = self.tag_encoder.backward(&cache.tag_lstm, &d_h_tag);
        for (a, b) in d_s_uu.iter_mut().zip(&d_from_tag) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
        cache.drop_uu.apply(&mut d_s_uu);
        cache.drop_dc.apply(&mut d_s_dc);

        let d_e_uu = self.uu_encoder.backward(&cache.uu_lstm, &d_s_uu);
        let d_e_dc = self.dc_encoder.backward(&cache.dc_lstm, &d_s_dc);
        if self.config.use_char_cnn {
            let ctx = self.config.ctx_dim;
            for (c, d) in cache.uu_cnn.iter().zip(&d_e_uu) {
                self.char_cnn.backward(c, &d[ctx..]);
            }
            for (c, d) in cache.dc_cnn.iter().zip(&d_e_dc) {
                self.char_cnn.backward(c, &d[ctx..]);
            }
        }
    }

    /// Joint loss of one example: BCE over labels plus tag cross-entropy
    /// over the word-initial positions. Gradients, scaled by `scale`, are
    /// accumulated into the parameters.
    pub fn example_loss<R: Rng + ?Sized>(
        &mut self,
        input: &ModelInput<T>,
        targets: &Targets<T>,
        scale: T,
        rng: Option<&mut R>,
    ) -> Result<T> {
        let out = self.forward(input, rng)?;
        let (l_int, mut d_int) = multilabel_bce_loss(&out.intent_logits, &targets.labels)?;
        let positions: Vec<usize> = (0..out.tag_logits.len())
            .filter(|&i| targets.tags[i].is_some())
            .collect();
        let gold: Vec<usize> = positions.iter().map(|&i| targets.tags[i].unwrap()).collect();
        let step_logits: Vec<Vec<T>> = positions.iter().map(|&i| out.tag_logits[i].clone()).collect();
        let (l_tag, d_sel) = tag_xent_loss(&step_logits, &gold)?;
        let mut d_tags = vec![vec![T::zero(); self.tags.len()]; out.tag_logits.len()];
        for (&i, d) in positions.iter().zip(d_sel) {
            d_tags[i] = d;
        }
        d_int.iter_mut().for_each(|g| *g *= scale);
        d_tags.iter_mut().flatten().for_each(|g| *g *= scale);
        self.backward(&out.cache, &d_int, &d_tags);
        Ok(l_int + l_tag)
    }

    /// Mean joint loss over a batch, accumulating mean gradients.
    pub fn compute_loss<R: Rng + ?Sized>(
        &mut self,
        batch: &[(&ModelInput<T>, &Targets<T>)],
        mut rng: Option<&mut R>,
    ) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::Empty("compute_loss"));
        }
        let scale = T::one() / T::lit(batch.len() as f64);
        let mut total = T::zero();
        for (input, targets) in batch {
            total += self.example_loss(input, targets, scale, rng.as_deref_mut())?;
        }
        Ok(total * scale)
    }

    pub fn intent_probs(logits: &[T]) -> Vec<T> {
        logits.iter().map(|x| x.sigmoid()).collect()
    }

    pub fn tag_distributions(logits: &[Vec<T>]) -> Vec<Vec<T>> {
        logits.iter().map(|l| softmax_slice(l)).collect()
    }
}

/// Training targets: a 0/1 vector over labels and a gold tag id for every
/// word-initial position (`None` elsewhere).
#[derive(Debug, Clone, PartialEq)]
pub struct Targets<T> {
    pub labels: Vec<T>,
    pub tags: Vec<Option<usize>>,
}

/// Indices with probability at least `threshold`, or the single argmax if
/// none qualifies. Ties in the argmax go to the lowest index.
pub fn select_labels<T: Scalar>(probs: &[T], threshold: f64) -> Vec<usize> {
    let t = T::lit(threshold);
    let chosen: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] >= t).collect();
    if !chosen.is_empty() || probs.is_empty() {
        return chosen;
    }
    vec![argmax(probs)]
}

pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> Parameterized<T> for HcenluModel<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        let mut v = self.char_cnn.params();
        v.extend(self.uu_encoder.params());
        v.extend(self.dc_encoder.params());
        v.extend(self.intent_encoder.params());
        v.extend(self.tag_encoder.params());
        v.extend(self.attention.params());
        v.extend(self.intent_head.params());
        v.extend(self.tag_head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut v = self.char_cnn.params_mut();
        v.extend(self.uu_encoder.params_mut());
        v.extend(self.dc_encoder.params_mut());
        v.extend(self.intent_encoder.params_mut());
        v.extend(self.tag_encoder.params_mut());
        v.extend(self.attention.params_mut());
        v.extend(self.intent_head.params_mut());
        v.extend(self.tag_head.params_mut());
        v
    }
}
