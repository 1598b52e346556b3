use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, Var};
use crate::graph::Framework;

use super::{ModelError, Run};

/// One tokenized sentence with its annotation columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EncoderInput {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub pos: Vec<String>,
    #[serde(default)]
    pub features: BTreeMap<String, Vec<String>>,
    /// Frozen contextual vectors, one per token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<Vec<Vec<f32>>>,
}

impl EncoderInput {
    pub fn new(tokens: Vec<String>) -> Self {
        EncoderInput {
            tokens,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Strings a source copy produces: the `lemma` column for AMR and DM
    /// when present, the tokens otherwise.
    pub fn copy_labels(&self, framework: Framework) -> Vec<String> {
        match (framework, self.features.get("lemma")) {
            (Framework::Amr | Framework::Dm, Some(l)) if l.len() == self.tokens.len() => l.clone(),
            _ => self.tokens.clone(),
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if self.tokens.is_empty() {
            return Err(ModelError::Input("empty sentence".into()));
        }
        let n = self.tokens.len();
        if !self.pos.is_empty() && self.pos.len() != n {
            return Err(ModelError::Input(format!("{} POS tags for {n} tokens", self.pos.len())));
        }
        for (name, col) in &self.features {
            if col.len() != n {
                return Err(ModelError::Input(format!("feature `{name}` has {} values for {n} tokens", col.len())));
            }
        }
        if let Some(ext) = &self.external {
            if ext.len() != n {
                return Err(ModelError::Input(format!("{} external vectors for {n} tokens", ext.len())));
            }
        }
        Ok(())
    }
}

/// Encoder outputs kept on the tape for the whole decode.
#[derive(Debug, Clone)]
pub struct EncodedSentence {
    pub framework: Framework,
    pub n: usize,
    /// Top-layer states `[n, 2H]`.
    pub states: Var,
    /// Projected attention keys `[n, attention_dim]`.
    pub keys: Var,
    /// Per-layer summaries, the decoder's initial hidden states.
    pub summary: Vec<Var>,
    pub copy_labels: Vec<String>,
    pub pos_ids: Vec<usize>,
}

impl<'m> Run<'m> {
    /// Embeds and encodes `input`.
    pub fn encode(&mut self, input: &EncoderInput, framework: Framework) -> Result<EncodedSentence, ModelError> {
        input.check()?;
        let m = self.model;
        let c = &m.config;
        let v = &m.vocabs;
        let pos_ids: Vec<usize> = (0..input.len())
            .map(|k| input.pos.get(k).map_or(0, |p| v.pos.id(p)))
            .collect();
        if c.external_dim > 0 && input.external.is_none() {
            return Err(ModelError::Input("model expects external vectors".into()));
        }
        let mut tokens = Vec::with_capacity(input.len());
        for (k, word) in input.tokens.iter().enumerate() {
            let mut parts = vec![m.enc.words.lookup(&mut self.t, v.words.id(word))?];
            if c.external_dim > 0 {
                let ext = &input.external.as_ref().expect("checked above")[k];
                if ext.len() != c.external_dim {
                    return Err(ModelError::Input(format!(
                        "external vector of width {}, model expects {}",
                        ext.len(),
                        c.external_dim
                    )));
                }
                parts.push(self.t.input(Tensor::vector(ext.iter().map(|x| f64::from(*x)).collect())));
            }
            parts.push(self.encoder_chars(word)?);
            parts.push(m.pos.lookup(&mut self.t, pos_ids[k])?);
            for (name, table) in &m.enc.features {
                let value = input
                    .features
                    .get(name)
                    .ok_or_else(|| ModelError::Input(format!("missing feature column `{name}`")))?;
                parts.push(table.lookup(&mut self.t, v.features[name].id(&value[k]))?);
            }
            let x = self.t.concat(&parts)?;
            tokens.push(self.dropout(x, c.encoder_dropout)?);
        }
        let dropout = c.encoder_dropout;
        let out = match self.rng.as_mut() {
            Some(r) => m.enc.lstm.encode(&mut self.t, &tokens, dropout, Some(r as &mut dyn rand::RngCore)),
            None => m.enc.lstm.encode(&mut self.t, &tokens, dropout, None),
        }?;
        let top = out.states.last().expect("at least one layer");
        let states = self.t.stack_rows(top)?;
        let keys = m.dec.attn_s.forward(&mut self.t, states)?;
        Ok(EncodedSentence {
            framework,
            n: input.len(),
            states,
            keys,
            summary: out.summary,
            copy_labels: input.copy_labels(framework),
            pos_ids,
        })
    }

    fn encoder_chars(&mut self, word: &str) -> Result<Var, ModelError> {
        if let Some(v) = self.enc_chars.get(word) {
            return Ok(*v);
        }
        let ids = self.model.vocabs.char_ids(word);
        let v = self.model.enc.chars.forward(&mut self.t, &ids)?;
        self.enc_chars.insert(word.to_string(), v);
        Ok(v)
    }
}
