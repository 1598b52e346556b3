//! The transducer: configuration, vocabularies, parameters and checkpoints.

mod decoder;
mod encoder;
mod vocab;

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{relative_error, AutodiffError, GradBuffer, GradCheckReport, ParamId, ParamStore, Tensor, Var};
use crate::convert::SenseTable;
use crate::graph::Framework;
use crate::io::{load_checkpoint, save_checkpoint, Checkpoint, FormatError, NamedTensor};
use crate::nn::{BiLstm, Biaffine, Bilinear, CharCnn, Embedding, Ffn, Lstm, Mlp};

pub use decoder::{DecoderState, NodeRecord, Origin, Run, TargetDist};
pub use encoder::{EncodedSentence, EncoderInput};
pub use vocab::{Vocab, Vocabularies, EOS, UNK};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Network sizes and per-framework settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub framework: Framework,
    pub word_dim: usize,
    /// Width of the frozen per-token external channel; 0 disables it.
    pub external_dim: usize,
    pub char_dim: usize,
    pub char_channels: usize,
    pub char_kernel: usize,
    pub pos_dim: usize,
    pub feature_dim: usize,
    pub anonymization_dim: usize,
    /// Categorical feature columns fed to the encoder, in order.
    pub features: Vec<String>,
    pub index_dim: usize,
    pub index_table: usize,
    pub relation_dim: usize,
    pub encoder_hidden: usize,
    pub encoder_layers: usize,
    pub decoder_hidden: usize,
    pub decoder_layers: usize,
    pub attention_dim: usize,
    pub biaffine_dim: usize,
    pub bilinear_dim: usize,
    pub encoder_dropout: f64,
    pub decoder_dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::for_framework(Framework::Amr)
    }
}

impl ModelConfig {
    /// Full-size defaults.
    pub fn for_framework(framework: Framework) -> Self {
        let (bilinear_dim, dropout) = match framework {
            Framework::Amr => (128, 0.33),
            Framework::Dm => (256, 0.2),
            Framework::Ucca => (128, 0.33),
        };
        ModelConfig {
            framework,
            word_dim: 300,
            external_dim: 0,
            char_dim: 100,
            char_channels: 100,
            char_kernel: 3,
            pos_dim: 100,
            feature_dim: 100,
            anonymization_dim: 50,
            features: Vec::new(),
            index_dim: 50,
            index_table: 512,
            relation_dim: 100,
            encoder_hidden: 512,
            encoder_layers: 2,
            decoder_hidden: 1024,
            decoder_layers: 2,
            attention_dim: 256,
            biaffine_dim: 256,
            bilinear_dim,
            encoder_dropout: dropout,
            decoder_dropout: dropout,
        }
    }

    /// Desk-scale sizes: encoder 32 per direction, decoder 64.
    pub fn scaled(framework: Framework) -> Self {
        ModelConfig {
            word_dim: 32,
            char_dim: 8,
            char_channels: 16,
            pos_dim: 8,
            feature_dim: 8,
            anonymization_dim: 4,
            index_dim: 16,
            index_table: 64,
            relation_dim: 16,
            encoder_hidden: 32,
            decoder_hidden: 64,
            attention_dim: 32,
            biaffine_dim: 32,
            bilinear_dim: 32,
            ..ModelConfig::for_framework(framework)
        }
    }

    /// Smallest sizes, for gradient checks and property tests.
    pub fn tiny(framework: Framework) -> Self {
        ModelConfig {
            word_dim: 3,
            char_dim: 2,
            char_channels: 2,
            pos_dim: 2,
            feature_dim: 2,
            anonymization_dim: 2,
            index_dim: 2,
            index_table: 16,
            relation_dim: 2,
            encoder_hidden: 2,
            encoder_layers: 1,
            decoder_hidden: 4,
            decoder_layers: 1,
            attention_dim: 3,
            biaffine_dim: 3,
            bilinear_dim: 3,
            ..ModelConfig::for_framework(framework)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.decoder_hidden != 2 * self.encoder_hidden {
            return err("decoder_hidden must be twice encoder_hidden (the decoder starts from encoder states)");
        }
        if self.decoder_layers != self.encoder_layers {
            return err("decoder_layers must equal encoder_layers");
        }
        if self.encoder_layers == 0 {
            return err("at least one layer is required");
        }
        if self.char_kernel % 2 == 0 {
            return err("char_kernel must be odd");
        }
        if self.index_table < 2 {
            return err("index_table must have at least two rows");
        }
        for d in [self.encoder_dropout, self.decoder_dropout] {
            if !(0.0..1.0).contains(&d) {
                return err("dropout must lie in [0, 1)");
            }
        }
        let sizes = [
            self.word_dim,
            self.char_dim,
            self.char_channels,
            self.pos_dim,
            self.index_dim,
            self.relation_dim,
            self.encoder_hidden,
            self.attention_dim,
            self.biaffine_dim,
            self.bilinear_dim,
        ];
        if sizes.contains(&0) {
            return err("all sizes must be positive");
        }
        Ok(())
    }

    fn feature_width(&self, name: &str) -> usize {
        if name == "anonymization" {
            self.anonymization_dim
        } else {
            self.feature_dim
        }
    }

    /// Width of one embedded encoder token.
    pub fn token_dim(&self) -> usize {
        self.word_dim
            + self.external_dim
            + self.char_channels
            + self.pos_dim
            + self.features.iter().map(|f| self.feature_width(f)).sum::<usize>()
    }

    /// Width of one embedded decoder node label.
    pub fn node_dim(&self) -> usize {
        self.word_dim + self.char_channels + self.pos_dim
    }
}

pub(crate) struct EncoderParams {
    pub words: Embedding,
    pub chars: CharCnn,
    pub features: Vec<(String, Embedding)>,
    pub lstm: BiLstm,
}

pub(crate) struct DecoderParams {
    pub words: Embedding,
    pub chars: CharCnn,
    pub root: ParamId,
    pub index: Embedding,
    pub relation: Embedding,
    pub lstm: Vec<Lstm>,
    pub attn_h: Ffn,
    pub attn_s: Ffn,
    pub attn_v: ParamId,
    pub relation_ffn: Ffn,
    pub vocab_ffn: Ffn,
    pub copy_q: Ffn,
    pub copy_k: Ffn,
    pub copy_v: ParamId,
    pub switch: Ffn,
    pub start: Mlp,
    pub end: Mlp,
    pub pointer: Biaffine,
    pub rel_src: Mlp,
    pub rel_tgt: Mlp,
    pub bilinear: Bilinear,
}

/// A trained or freshly initialized transducer.
pub struct Model {
    pub config: ModelConfig,
    pub vocabs: Vocabularies,
    pub params: ParamStore,
    pub(crate) pos: Embedding,
    pub(crate) enc: EncoderParams,
    pub(crate) dec: DecoderParams,
}

impl Model {
    /// Builds a model with parameters drawn from `seed`.
    pub fn new(config: ModelConfig, vocabs: Vocabularies, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        for f in &config.features {
            if !vocabs.features.contains_key(f) {
                return Err(ModelError::Config(format!("no vocabulary for feature `{f}`")));
            }
        }
        if vocabs.relations.len() < 2 {
            return Err(ModelError::Config("relation vocabulary needs at least one type besides `root`".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = &mut rng;
        let c = &config;
        let mut p = ParamStore::new();
        let pos = Embedding::new(&mut p, "pos", vocabs.pos.len(), c.pos_dim, r);
        let enc = EncoderParams {
            words: Embedding::new(&mut p, "enc.words", vocabs.words.len(), c.word_dim, r),
            chars: CharCnn::new(&mut p, "enc.chars", vocabs.chars.len(), c.char_dim, c.char_channels, c.char_kernel, r),
            features: c
                .features
                .iter()
                .map(|f| {
                    let e = Embedding::new(&mut p, &format!("enc.feat.{f}"), vocabs.features[f].len(), c.feature_width(f), r);
                    (f.clone(), e)
                })
                .collect(),
            lstm: BiLstm::new(&mut p, "enc.lstm", c.token_dim(), c.encoder_hidden, c.encoder_layers, r),
        };
        let h = c.decoder_hidden;
        let node = c.node_dim();
        let s = 2 * c.encoder_hidden;
        let z_in = h + s + c.relation_dim + node + c.index_dim;
        let k = vocabs.relations.len() - 1;
        let dec = DecoderParams {
            words: Embedding::new(&mut p, "dec.words", vocabs.labels.len(), c.word_dim, r),
            chars: CharCnn::new(&mut p, "dec.chars", vocabs.chars.len(), c.char_dim, c.char_channels, c.char_kernel, r),
            root: p.uniform("dec.root", vec![node], (3.0 / node as f64).sqrt(), r),
            index: Embedding::new(&mut p, "dec.index", c.index_table, c.index_dim, r),
            relation: Embedding::new(&mut p, "dec.relation", vocabs.relations.len(), c.relation_dim, r),
            lstm: (0..c.decoder_layers)
                .map(|l| {
                    let input = if l == 0 { node + c.index_dim } else { h };
                    Lstm::new(&mut p, &format!("dec.lstm.l{l}"), input, h, r)
                })
                .collect(),
            attn_h: Ffn::new(&mut p, "dec.attn.h", h, c.attention_dim, r),
            attn_s: Ffn::new(&mut p, "dec.attn.s", s, c.attention_dim, r),
            attn_v: p.glorot("dec.attn.v", vec![c.attention_dim], r),
            relation_ffn: Ffn::new(&mut p, "dec.relation_ffn", z_in, h, r),
            vocab_ffn: Ffn::new(&mut p, "dec.vocab", h, vocabs.labels.len(), r),
            copy_q: Ffn::new(&mut p, "dec.copy.q", h, c.attention_dim, r),
            copy_k: Ffn::new(&mut p, "dec.copy.k", h, c.attention_dim, r),
            copy_v: p.glorot("dec.copy.v", vec![c.attention_dim], r),
            switch: Ffn::new(&mut p, "dec.switch", h, 3, r),
            start: Mlp::new(&mut p, "dec.start", h, c.biaffine_dim, r),
            end: Mlp::new(&mut p, "dec.end", h, c.biaffine_dim, r),
            pointer: Biaffine::new(&mut p, "dec.pointer", c.biaffine_dim, c.biaffine_dim, r),
            rel_src: Mlp::new(&mut p, "dec.rel_src", h, c.bilinear_dim, r),
            rel_tgt: Mlp::new(&mut p, "dec.rel_tgt", h, c.bilinear_dim, r),
            bilinear: Bilinear::new(&mut p, "dec.bilinear", c.bilinear_dim, c.bilinear_dim, k, r),
        };
        Ok(Model {
            config,
            vocabs,
            params: p,
            pos,
            enc,
            dec,
        })
    }

    /// Number of predictable relation types (excluding `root`).
    pub fn relation_types(&self) -> usize {
        self.vocabs.relations.len() - 1
    }

    /// Overwrites the encoder word table rows with pretrained vectors.
    pub fn load_word_vectors(&mut self, table: &crate::io::EmbeddingTable) -> Result<usize, ModelError> {
        if table.dim() != self.config.word_dim {
            return Err(FormatError::Dimension {
                expected: self.config.word_dim,
                found: table.dim(),
            }
            .into());
        }
        let dim = self.config.word_dim;
        let id = self.enc.words.table;
        let mut hits = 0;
        for (row, word) in self.vocabs.words.items().iter().enumerate() {
            if let Some(v) = table.get(word) {
                let dst = &mut self.params.get_mut(id).data[row * dim..(row + 1) * dim];
                dst.iter_mut().zip(v).for_each(|(d, s)| *d = f64::from(*s));
                hits += 1;
            }
        }
        Ok(hits)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            hyperparameters: serde_json::to_value(&self.config).expect("config serializes"),
            vocabularies: serde_json::to_value(&self.vocabs).expect("vocabularies serialize"),
            tensors: self
                .params
                .ids()
                .map(|id| {
                    let t = self.params.get(id);
                    NamedTensor {
                        name: self.params.name(id).to_string(),
                        shape: t.shape.clone(),
                        data: t.data.iter().map(|v| *v as f32).collect(),
                    }
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ModelError> {
        let config: ModelConfig = serde_json::from_value(ck.hyperparameters.clone())
            .map_err(|e| FormatError::Checkpoint(format!("hyperparameters: {e}")))?;
        let vocabs: Vocabularies = serde_json::from_value(ck.vocabularies.clone())
            .map_err(|e| FormatError::Checkpoint(format!("vocabularies: {e}")))?;
        let mut model = Model::new(config, vocabs, 0)?;
        let mut seen = std::collections::HashSet::new();
        for t in &ck.tensors {
            let id = model
                .params
                .id(&t.name)
                .ok_or_else(|| FormatError::Checkpoint(format!("unknown tensor `{}`", t.name)))?;
            if model.params.get(id).shape != t.shape {
                return Err(FormatError::Checkpoint(format!(
                    "tensor `{}` has shape {:?}, model expects {:?}",
                    t.name,
                    t.shape,
                    model.params.get(id).shape
                ))
                .into());
            }
            *model.params.get_mut(id) = Tensor::new(t.shape.clone(), t.data.iter().map(|v| f64::from(*v)).collect());
            seen.insert(id);
        }
        if seen.len() != model.params.len() {
            return Err(FormatError::Checkpoint("checkpoint is missing tensors".into()).into());
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        save_checkpoint(path, &self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Model::from_checkpoint(&load_checkpoint(path)?)
    }

    pub fn senses(&self) -> &SenseTable {
        &self.vocabs.senses
    }

    /// Compares backpropagated gradients of the scalar built by `f` with
    /// fourth-order central differences at `coords`.
    pub fn grad_check<F>(&mut self, coords: &[(ParamId, usize)], h: f64, f: F) -> Result<GradCheckReport, ModelError>
    where
        F: Fn(&mut Run) -> Result<Var, ModelError>,
    {
        let mut grads = GradBuffer::new(&self.params);
        {
            let mut run = Run::new(self);
            let loss = f(&mut run)?;
            run.t.backward(loss, &mut grads)?;
        }
        let eval = |m: &Model| -> Result<f64, ModelError> {
            let mut run = Run::new(m);
            let loss = f(&mut run)?;
            Ok(run.t.value(loss).data[0])
        };
        let mut entries = Vec::with_capacity(coords.len());
        for &(id, k) in coords {
            let orig = self.params.get(id).data[k];
            let mut at = |delta: f64| -> Result<f64, ModelError> {
                self.params.get_mut(id).data[k] = orig + delta;
                eval(self)
            };
            let (p2, p1, m1, m2) = (at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?);
            self.params.get_mut(id).data[k] = orig;
            let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
            let analytic = grads.get(id)[k];
            entries.push((id, k, analytic, numeric, relative_error(analytic, numeric)));
        }
        Ok(GradCheckReport { entries })
    }

    /// Parameter count by name prefix, for reporting.
    pub fn parameter_summary(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for id in self.params.ids() {
            let name = self.params.name(id);
            let prefix = name.split('.').take(2).collect::<Vec<_>>().join(".");
            *out.entry(prefix).or_default() += self.params.get(id).len();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_token_width() {
        let mut c = ModelConfig::for_framework(Framework::Amr);
        assert_eq!(c.token_dim(), 300 + 100 + 100);
        c.external_dim = 1024;
        c.features = vec!["anonymization".into()];
        assert_eq!(c.token_dim(), 300 + 1024 + 100 + 100 + 50);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn mismatched_decoder_is_rejected() {
        let mut c = ModelConfig::scaled(Framework::Dm);
        c.decoder_hidden = 50;
        assert!(c.validate().is_err());
    }
}
