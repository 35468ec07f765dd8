//! Low-level agent: one word generator per (direction, parameterized
//! operator), each with its own encoder and output layer.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::autograd::{BiLstm, Graph, Grads, ParamId, ParamSet, Tensor, Var};
use crate::config::EncoderConfig;
use crate::corpus::{Direction, TokenId, Vocab};
use crate::edit::OperatorKind;
use crate::error::{Error, Result};

/// Word distribution conditioned on the encoder state at one position.
#[derive(Clone, Debug)]
pub struct WordGenerator {
    params: ParamSet,
    encoder: BiLstm,
    out_w: ParamId,
    out_b: ParamId,
    /// Output entries forced to probability zero (reserved ids).
    mask: Arc<[bool]>,
}

impl WordGenerator {
    pub fn new<R: Rng>(vocab_size: usize, cfg: &EncoderConfig, rng: &mut R) -> Self {
        let mut ps = ParamSet::new();
        let encoder = BiLstm::new(&mut ps, "enc", vocab_size, cfg.emb_dim, cfg.hidden, rng);
        let d = encoder.state_dim();
        let out_w = ps.add("out.w", Tensor::uniform(vocab_size, d, 1.0 / (d as f64).sqrt(), rng));
        let out_b = ps.add("out.b", Tensor::zeros(vocab_size, 1));
        let mask: Vec<bool> = (0..vocab_size)
            .map(|id| Vocab::is_reserved(id as TokenId))
            .collect();
        assert!(mask.iter().any(|m| !m), "vocabulary has no ordinary words");
        WordGenerator {
            params: ps,
            encoder,
            out_w,
            out_b,
            mask: mask.into(),
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.mask.len()
    }

    /// Whether `word` can ever be generated.
    pub fn can_generate(&self, word: TokenId) -> bool {
        self.mask.get(word as usize).is_some_and(|m| !m)
    }

    /// Masked log-probabilities over the vocabulary as a graph node.
    pub fn log_probs_node(&self, g: &mut Graph, tokens: &[TokenId], position: usize) -> Var {
        let enc = self.encoder.encode(g, tokens);
        let logits = g.affine(self.out_w, self.out_b, enc.states[position]);
        g.log_softmax_masked(logits, self.mask.clone())
    }

    pub fn log_probs(&self, tokens: &[TokenId], position: usize) -> Vec<f64> {
        let mut g = Graph::new(&self.params);
        let lp = self.log_probs_node(&mut g, tokens, position);
        g.value(lp).to_vec()
    }

    pub fn distribution(&self, tokens: &[TokenId], position: usize) -> Vec<f64> {
        self.log_probs(tokens, position)
            .into_iter()
            .map(f64::exp)
            .collect()
    }

    /// Most probable word; ties go to the lower id.
    pub fn argmax(&self, tokens: &[TokenId], position: usize) -> TokenId {
        let lp = self.log_probs(tokens, position);
        let mut best = 0usize;
        for (i, &v) in lp.iter().enumerate() {
            if v > lp[best] {
                best = i;
            }
        }
        best as TokenId
    }

    pub fn sample<R: Rng>(&self, tokens: &[TokenId], position: usize, rng: &mut R) -> TokenId {
        let p = self.distribution(tokens, position);
        let mut u: f64 = rng.gen();
        let mut last = 0;
        for (i, &pi) in p.iter().enumerate() {
            if pi > 0.0 {
                last = i;
                u -= pi;
                if u < 0.0 {
                    return i as TokenId;
                }
            }
        }
        last as TokenId
    }

    /// Negative log-probability of `word` at `position`.
    pub fn nll(&self, tokens: &[TokenId], position: usize, word: TokenId) -> f64 {
        -self.log_probs(tokens, position)[word as usize]
    }

    /// Gradient of the negative log-probability of `word`, and its value.
    pub fn nll_grads(&self, tokens: &[TokenId], position: usize, word: TokenId) -> (Grads, f64) {
        let mut g = Graph::new(&self.params);
        let lp = self.log_probs_node(&mut g, tokens, position);
        let picked = g.pick(lp, word as usize);
        let mut grads = Grads::zeros_like(&self.params);
        g.backward_scaled(picked, -1.0, &mut grads);
        (grads, -g.scalar(picked))
    }

    /// REINFORCE gradient of `-reward * log M(word | tokens, position)`.
    pub fn policy_gradient(&self, tokens: &[TokenId], position: usize, word: TokenId, reward: f64) -> Grads {
        let mut g = Graph::new(&self.params);
        let lp = self.log_probs_node(&mut g, tokens, position);
        let picked = g.pick(lp, word as usize);
        let mut grads = Grads::zeros_like(&self.params);
        g.backward_scaled(picked, -reward, &mut grads);
        grads
    }
}

/// The six word generators, indexed by direction and operator.
#[derive(Clone, Debug)]
pub struct OperatorAgent {
    generators: Vec<WordGenerator>,
}

impl OperatorAgent {
    pub const NUM_GENERATORS: usize = 6;

    pub fn new<R: Rng>(vocab_size: usize, cfg: &EncoderConfig, rng: &mut R) -> Self {
        let generators = (0..Self::NUM_GENERATORS)
            .map(|_| WordGenerator::new(vocab_size, cfg, rng))
            .collect();
        OperatorAgent { generators }
    }

    /// Flat index of the generator for `(direction, op)`.
    pub fn index(direction: Direction, op: OperatorKind) -> Result<usize> {
        let k = op.generator_index().ok_or_else(|| {
            Error::Contract(format!("operator {op} does not generate a word"))
        })?;
        Ok(direction.index() * 3 + k)
    }

    /// Inverse of [`OperatorAgent::index`].
    pub fn key(index: usize) -> (Direction, OperatorKind) {
        let dir = if index < 3 { Direction::S1ToS2 } else { Direction::S2ToS1 };
        (dir, OperatorKind::PARAMETERIZED[index % 3])
    }

    /// Name used for checkpoint arrays and diagnostics, e.g. `s1-to-s2/Rep`.
    pub fn name(index: usize) -> String {
        let (d, op) = Self::key(index);
        format!("{d}/{op}")
    }

    pub fn generator(&self, direction: Direction, op: OperatorKind) -> Result<&WordGenerator> {
        Ok(&self.generators[Self::index(direction, op)?])
    }

    pub fn generator_mut(&mut self, direction: Direction, op: OperatorKind) -> Result<&mut WordGenerator> {
        let k = Self::index(direction, op)?;
        Ok(&mut self.generators[k])
    }

    pub fn generators(&self) -> &[WordGenerator] {
        &self.generators
    }

    pub fn generators_mut(&mut self) -> &mut [WordGenerator] {
        &mut self.generators
    }

    pub fn word_distribution(
        &self,
        tokens: &[TokenId],
        position: usize,
        op: OperatorKind,
        direction: Direction,
    ) -> Result<Vec<f64>> {
        if position >= tokens.len() {
            return Err(Error::IndexOutOfRange {
                position,
                len: tokens.len(),
            });
        }
        Ok(self.generator(direction, op)?.distribution(tokens, position))
    }

    pub fn export(&self) -> Vec<(String, Tensor)> {
        self.generators
            .iter()
            .enumerate()
            .flat_map(|(k, g)| g.params.export_named(&format!("gen.{}.", Self::name(k))))
            .collect()
    }

    pub fn load(&mut self, arrays: &HashMap<String, Tensor>) -> Result<()> {
        for (k, g) in self.generators.iter_mut().enumerate() {
            g.params.load_named(arrays, &format!("gen.{}.", Self::name(k)))?;
        }
        Ok(())
    }
}

/// Uniform draw from the valid operators.
pub fn sample_uniform_operator<R: Rng>(valid: &[OperatorKind], rng: &mut R) -> OperatorKind {
    assert!(!valid.is_empty(), "no valid operator to sample");
    valid[rng.gen_range(0..valid.len())]
}

/// Probability mass outside the masked entries; exposed for checks.
pub fn unmasked_mass(dist: &[f64]) -> f64 {
    dist.iter()
        .enumerate()
        .filter(|&(i, _)| !Vocab::is_reserved(i as TokenId))
        .map(|(_, p)| p)
        .sum()
}
