//! High-level agent: bidirectional encoder, attention over positions, and
//! the attention-pooled style classifier that shares those weights.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{self, clip_grad_norm, Adam, AdamConfig, BiLstm, Graph, Grads, ParamId, ParamSet, Tensor, Var};
use crate::config::{ClassifierConfig, EncoderConfig};
use crate::corpus::{Sentence, Style, TokenId, Vocab};
use crate::error::{Error, Result};

/// Distribution over the positions of one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionDistribution {
    pub probs: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl PositionDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        PositionDistribution { probs, mask: None }
    }

    /// Zeroes masked entries without renormalizing.
    pub fn masked(mut self, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), self.probs.len(), "mask length mismatch");
        for (p, &m) in self.probs.iter_mut().zip(&mask) {
            if m {
                *p = 0.0;
            }
        }
        self.mask = Some(mask);
        self
    }

    fn is_masked(&self, i: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[i])
    }

    /// Most probable unmasked position; ties go to the lower index.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.probs.len() {
            if self.is_masked(i) {
                continue;
            }
            if best.is_none_or(|b| self.probs[i] > self.probs[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Samples an unmasked position, renormalizing over the unmasked mass.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Option<usize> {
        let total: f64 = (0..self.probs.len())
            .filter(|&i| !self.is_masked(i))
            .map(|i| self.probs[i])
            .sum();
        if !(total > 0.0) {
            return None;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut last = None;
        for i in 0..self.probs.len() {
            if self.is_masked(i) {
                continue;
            }
            last = Some(i);
            u -= self.probs[i];
            if u < 0.0 {
                return Some(i);
            }
        }
        last
    }
}

/// Graph nodes of one pointer forward pass.
pub struct PointerForward {
    /// Attention scores, one per position.
    pub scores: Var,
    pub mu: Var,
    pub log_mu: Var,
    /// Log-probabilities of (s1, s2).
    pub class_logp: Var,
    /// Attention-pooled sentence representation.
    pub pooled: Var,
}

#[derive(Clone, Debug)]
pub struct PointerNet {
    params: ParamSet,
    encoder: BiLstm,
    w1: ParamId,
    w2: ParamId,
    v: ParamId,
    cls: ParamId,
    vocab_size: usize,
}

impl PointerNet {
    /// The classifier projection starts at zero, so an untrained model
    /// predicts (0.5, 0.5) everywhere.
    pub fn new<R: Rng>(vocab_size: usize, cfg: &EncoderConfig, rng: &mut R) -> Self {
        let mut ps = ParamSet::new();
        let encoder = BiLstm::new(&mut ps, "enc", vocab_size, cfg.emb_dim, cfg.hidden, rng);
        let d = encoder.state_dim();
        let k = 1.0 / (d as f64).sqrt();
        let w1 = ps.add("attn.w1", Tensor::uniform(cfg.attn_dim, d, k, rng));
        let w2 = ps.add("attn.w2", Tensor::uniform(cfg.attn_dim, d, k, rng));
        let v = ps.add(
            "attn.v",
            Tensor::uniform(cfg.attn_dim, 1, 1.0 / (cfg.attn_dim as f64).sqrt(), rng),
        );
        let cls = ps.add("cls.w", Tensor::zeros(2, d));
        PointerNet {
            params: ps,
            encoder,
            w1,
            w2,
            v,
            cls,
            vocab_size,
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn state_dim(&self) -> usize {
        self.encoder.state_dim()
    }

    pub fn load(&mut self, arrays: &HashMap<String, Tensor>, prefix: &str) -> Result<()> {
        self.params.load_named(arrays, prefix)
    }

    /// Per-position encoder states and the sentence state.
    pub fn encode(&self, tokens: &[TokenId]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut g = Graph::new(&self.params);
        let enc = self.encoder.encode(&mut g, tokens);
        let states = enc.states.iter().map(|&s| g.value(s).to_vec()).collect();
        (states, g.value(enc.sentence).to_vec())
    }

    pub fn forward(&self, g: &mut Graph, tokens: &[TokenId]) -> PointerForward {
        let enc = self.encoder.encode(g, tokens);
        let query = g.linear(self.w1, enc.sentence);
        let v = g.param(self.v);
        let mut scores = Vec::with_capacity(tokens.len());
        for &h in &enc.states {
            let key = g.linear(self.w2, h);
            let s = g.add(query, key);
            let s = g.tanh(s);
            scores.push(g.dot(v, s));
        }
        let scores = g.concat(&scores);
        let mu = g.softmax(scores);
        let log_mu = g.log_softmax(scores);
        let pooled = g.weighted_sum(mu, &enc.states);
        let logits = g.linear(self.cls, pooled);
        let class_logp = g.log_softmax(logits);
        PointerForward {
            scores,
            mu,
            log_mu,
            class_logp,
            pooled,
        }
    }

    pub fn policy(&self, tokens: &[TokenId]) -> PositionDistribution {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, tokens);
        PositionDistribution::new(g.value(f.mu).to_vec())
    }

    /// `(p(s1|x), p(s2|x))`.
    pub fn classify(&self, tokens: &[TokenId]) -> [f64; 2] {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, tokens);
        let lp = g.value(f.class_logp);
        [lp[0].exp(), lp[1].exp()]
    }

    /// Policy and class probabilities from a single forward pass.
    pub fn policy_and_classify(&self, tokens: &[TokenId]) -> (PositionDistribution, [f64; 2]) {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, tokens);
        let lp = g.value(f.class_logp);
        let probs = [lp[0].exp(), lp[1].exp()];
        (PositionDistribution::new(g.value(f.mu).to_vec()), probs)
    }

    /// Classifier output applied to an arbitrary pooled vector.
    pub fn classify_pooled(&self, pooled: &[f64]) -> [f64; 2] {
        let w = self.params.get(self.cls);
        let logits: Vec<f64> = (0..2)
            .map(|r| w.row(r).iter().zip(pooled).map(|(a, b)| a * b).sum())
            .collect();
        let p = autograd::softmax(&logits);
        [p[0], p[1]]
    }

    /// Mean negative log-likelihood over a labeled batch.
    pub fn classification_loss(&self, batch: &[(&[TokenId], Style)]) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        let total: f64 = batch
            .iter()
            .map(|(t, s)| -self.classify(t)[s.index()].max(f64::MIN_POSITIVE).ln())
            .sum();
        total / batch.len() as f64
    }

    /// Gradient of the mean classification NLL over `batch`, and the loss.
    pub fn classification_grads(&self, batch: &[(Vec<TokenId>, Style)]) -> (Grads, f64) {
        let (mut grads, loss) = autograd::parallel_grads(&self.params, batch, |g, (t, s)| {
            let f = self.forward(g, t);
            let lp = g.pick(f.class_logp, s.index());
            Some(g.neg(lp))
        });
        let n = batch.len().max(1) as f64;
        grads.scale(1.0 / n);
        (grads, loss / n)
    }

    /// Gradient of `log mu(position | tokens)`.
    pub fn log_policy_grads(&self, tokens: &[TokenId], position: usize) -> Grads {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, tokens);
        let lp = g.pick(f.log_mu, position);
        let mut grads = Grads::zeros_like(&self.params);
        g.backward(lp, &mut grads);
        grads
    }

    /// REINFORCE gradient of `-reward * log mu(position | tokens)`; the
    /// reward is a constant, so nothing flows through it.
    pub fn policy_gradient(&self, tokens: &[TokenId], position: usize, reward: f64) -> Grads {
        let mut grads = self.log_policy_grads(tokens, position);
        grads.scale(-reward);
        grads
    }
}

/// Per-epoch progress of classifier pretraining.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub train_loss: Vec<f64>,
    pub dev_accuracy: Vec<f64>,
    pub epochs: usize,
}

impl ClassifierReport {
    pub fn final_dev_accuracy(&self) -> f64 {
        self.dev_accuracy.last().copied().unwrap_or(0.0)
    }
}

/// Replaces each token by `unk` independently with probability `rate`.
pub fn unk_noise<R: Rng>(tokens: &[TokenId], rate: f64, rng: &mut R) -> Vec<TokenId> {
    tokens
        .iter()
        .map(|&t| if rate > 0.0 && rng.gen_bool(rate) { Vocab::UNK_ID } else { t })
        .collect()
}

/// Fraction of `data` whose argmax class matches the label.
pub fn accuracy(net: &PointerNet, data: &[Sentence]) -> f64 {
    use rayon::prelude::*;
    if data.is_empty() {
        return 0.0;
    }
    let hits: usize = data
        .par_iter()
        .map(|s| {
            let p = net.classify(s.tokens());
            let pred = if p[1] > p[0] { Style::S2 } else { Style::S1 };
            usize::from(pred == s.style())
        })
        .sum();
    hits as f64 / data.len() as f64
}

/// Trains the classifier head (and the shared encoder) on labeled
/// sentences, optionally with unk noise. Stops early once clean dev
/// accuracy reaches the configured target.
pub fn train_classifier(
    net: &mut PointerNet,
    train: &[Sentence],
    dev: &[Sentence],
    cfg: &ClassifierConfig,
    unk_noise_rate: f64,
) -> Result<ClassifierReport> {
    if train.is_empty() {
        return Err(Error::Config("classifier training data is empty".into()));
    }
    if !(0.0..=1.0).contains(&unk_noise_rate) {
        return Err(Error::Config(format!("unk_noise_rate must lie in [0, 1], got {unk_noise_rate}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr), &net.params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = ClassifierReport::default();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<(Vec<TokenId>, Style)> = chunk
                .iter()
                .map(|&k| (unk_noise(train[k].tokens(), unk_noise_rate, &mut rng), train[k].style()))
                .collect();
            let (mut grads, loss) = net.classification_grads(&batch);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    episode: epoch as u64,
                    detail: "classifier loss is not finite".into(),
                });
            }
            clip_grad_norm(&mut grads, cfg.clip);
            opt.step(&mut net.params, &grads);
            epoch_loss += loss * chunk.len() as f64;
        }
        let acc = accuracy(net, if dev.is_empty() { train } else { dev });
        report.train_loss.push(epoch_loss / train.len() as f64);
        report.dev_accuracy.push(acc);
        report.epochs = epoch + 1;
        log::info!(
            "classifier epoch {}: loss {:.4}, dev acc {:.4}",
            epoch + 1,
            epoch_loss / train.len() as f64,
            acc
        );
        if acc >= cfg.target_dev_acc {
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(seed: u64) -> PointerNet {
        let cfg = EncoderConfig {
            emb_dim: 6,
            hidden: 5,
            attn_dim: 4,
        };
        PointerNet::new(12, &cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn shapes_and_normalization() {
        let n = net(1);
        for tokens in [vec![5u32], vec![4, 5, 6, 7, 8]] {
            let d = n.policy(&tokens);
            assert_eq!(d.probs.len(), tokens.len());
            assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let (states, sent) = n.encode(&tokens);
            assert_eq!(states.len(), tokens.len());
            assert_eq!(sent.len(), n.state_dim());
        }
        assert_eq!(n.policy(&[9]).probs, vec![1.0]);
    }

    #[test]
    fn zero_classifier_is_uniform() {
        let n = net(2);
        for tokens in [vec![4u32, 5], vec![11, 10, 9]] {
            assert_eq!(n.classify(&tokens), [0.5, 0.5]);
        }
        let batch: Vec<(&[TokenId], Style)> = vec![(&[4, 5], Style::S1), (&[6], Style::S2)];
        assert!((n.classification_loss(&batch) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_attention_vector_gives_uniform_policy() {
        let mut n = net(3);
        let v = n.v;
        n.params_mut().get_mut(v).data.iter_mut().for_each(|x| *x = 0.0);
        let d = n.policy(&[4, 5, 6, 7]);
        for p in d.probs {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_and_order_sensitive() {
        let n = net(4);
        assert_eq!(n.encode(&[4, 5, 6]), n.encode(&[4, 5, 6]));
        assert_ne!(n.encode(&[4, 5, 6]).0, n.encode(&[5, 4, 6]).0);
    }

    #[test]
    fn masking_never_promotes() {
        let d = PositionDistribution::new(vec![0.1, 0.5, 0.4]);
        assert_eq!(d.argmax(), Some(1));
        let m = d.clone().masked(vec![false, true, false]);
        assert_eq!(m.argmax(), Some(2));
        assert_eq!(m.probs, vec![0.1, 0.0, 0.4]);
        let all = d.masked(vec![true; 3]);
        assert_eq!(all.argmax(), None);
        assert_eq!(all.sample(&mut ChaCha8Rng::seed_from_u64(0)), None);
    }

    #[test]
    fn zero_reward_gives_zero_gradient() {
        let n = net(5);
        let g = n.policy_gradient(&[4, 5, 6], 1, 0.0);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn one_hot_pooling_matches_single_state() {
        let n = net(6);
        let tokens = [4u32, 7, 9];
        let (states, _) = n.encode(&tokens);
        for (i, state) in states.iter().enumerate() {
            let mut onehot = vec![0.0; tokens.len()];
            onehot[i] = 1.0;
            let mut g = Graph::new(n.params());
            let enc = n.encoder.encode(&mut g, &tokens);
            let w = g.input(onehot);
            let pooled = g.weighted_sum(w, &enc.states);
            assert_eq!(g.value(pooled), state.as_slice());
        }
    }

    #[test]
    fn noise_rate_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(unk_noise(&[4, 5, 6], 0.0, &mut rng), vec![4, 5, 6]);
        assert_eq!(unk_noise(&[4, 5, 6], 1.0, &mut rng), vec![Vocab::UNK_ID; 3]);
    }
}
