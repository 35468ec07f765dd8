//! Per-style forward and backward LSTM language models.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{self, clip_grad_norm, Adam, AdamConfig, Graph, ParamId, ParamSet, Tensor, Var};
use crate::autograd::Lstm;
use crate::config::LmConfig;
use crate::corpus::{Sentence, Style, TokenId, Vocab};
use crate::error::{Error, Result};

/// Single-direction next-token model. A backward model reads the sentence
/// right to left, starting from `⟨eos⟩` and finishing with `⟨bos⟩`.
#[derive(Clone, Debug)]
pub struct LstmLm {
    params: ParamSet,
    emb: ParamId,
    lstm: Lstm,
    out_w: ParamId,
    out_b: ParamId,
    reverse: bool,
    mask: Arc<[bool]>,
}

impl LstmLm {
    pub fn new<R: Rng>(vocab_size: usize, emb_dim: usize, hidden: usize, reverse: bool, rng: &mut R) -> Self {
        let mut ps = ParamSet::new();
        let emb = ps.add("emb", Tensor::uniform(vocab_size, emb_dim, 0.3, rng));
        let lstm = Lstm::new(&mut ps, "lstm", emb_dim, hidden, rng);
        let out_w = ps.add("out.w", Tensor::uniform(vocab_size, hidden, 1.0 / (hidden as f64).sqrt(), rng));
        let out_b = ps.add("out.b", Tensor::zeros(vocab_size, 1));
        let start = if reverse { Vocab::EOS_ID } else { Vocab::BOS_ID };
        let mask: Vec<bool> = (0..vocab_size as TokenId)
            .map(|id| id == Vocab::PAD_ID || id == start)
            .collect();
        LstmLm {
            params: ps,
            emb,
            lstm,
            out_w,
            out_b,
            reverse,
            mask: mask.into(),
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn is_reverse(&self) -> bool {
        self.reverse
    }

    /// Input and target sequences in reading order.
    fn sequences(&self, tokens: &[TokenId]) -> (Vec<TokenId>, Vec<TokenId>) {
        let (start, end) = if self.reverse {
            (Vocab::EOS_ID, Vocab::BOS_ID)
        } else {
            (Vocab::BOS_ID, Vocab::EOS_ID)
        };
        let body: Vec<TokenId> = if self.reverse {
            tokens.iter().rev().copied().collect()
        } else {
            tokens.to_vec()
        };
        let mut input = Vec::with_capacity(body.len() + 1);
        input.push(start);
        input.extend_from_slice(&body);
        let mut target = body;
        target.push(end);
        (input, target)
    }

    /// Log-probability vectors for each of the `T + 1` predictions, in
    /// reading order.
    fn step_log_probs(&self, g: &mut Graph, tokens: &[TokenId]) -> (Vec<Var>, Vec<TokenId>) {
        let (input, target) = self.sequences(tokens);
        let xs: Vec<Var> = input.iter().map(|&t| g.embed(self.emb, t as usize)).collect();
        let hs = self.lstm.run(g, &xs);
        let lps = hs
            .into_iter()
            .map(|h| {
                let logits = g.affine(self.out_w, self.out_b, h);
                g.log_softmax_masked(logits, self.mask.clone())
            })
            .collect();
        (lps, target)
    }

    /// Summed negative log-likelihood of the sentence (including the end
    /// symbol) as a graph node, and the number of predictions.
    pub fn nll_node(&self, g: &mut Graph, tokens: &[TokenId]) -> (Var, usize) {
        let (lps, target) = self.step_log_probs(g, tokens);
        let picked: Vec<Var> = lps
            .iter()
            .zip(&target)
            .map(|(&lp, &t)| g.pick(lp, t as usize))
            .collect();
        let total = g.add_all(&picked);
        (g.neg(total), target.len())
    }

    pub fn nll(&self, tokens: &[TokenId]) -> (f64, usize) {
        let mut g = Graph::new(&self.params);
        let (v, n) = self.nll_node(&mut g, tokens);
        (g.scalar(v), n)
    }

    /// Next-token distributions for each of the `T + 1` predictions, in
    /// reading order.
    pub fn next_token_distributions(&self, tokens: &[TokenId]) -> Vec<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let (lps, _) = self.step_log_probs(&mut g, tokens);
        lps.iter()
            .map(|&lp| g.value(lp).iter().map(|v| v.exp()).collect())
            .collect()
    }

    /// `P(x_i | context)` for every position, indexed by sentence position.
    /// The context is the left side for a forward model and the right side
    /// for a backward one.
    pub fn token_probs(&self, tokens: &[TokenId]) -> Vec<f64> {
        let mut g = Graph::new(&self.params);
        let (lps, target) = self.step_log_probs(&mut g, tokens);
        let t = tokens.len();
        let mut out: Vec<f64> = (0..t)
            .map(|k| g.value(lps[k])[target[k] as usize].exp())
            .collect();
        if self.reverse {
            out.reverse();
        }
        out
    }
}

/// Forward and backward models of one style.
#[derive(Clone, Debug)]
pub struct StyleLm {
    pub style: Style,
    pub forward: LstmLm,
    pub backward: LstmLm,
    pub vocab_hash: String,
}

impl StyleLm {
    pub fn new<R: Rng>(style: Style, vocab: &Vocab, cfg: &LmConfig, rng: &mut R) -> Self {
        StyleLm {
            style,
            forward: LstmLm::new(vocab.len(), cfg.emb_dim, cfg.hidden, false, rng),
            backward: LstmLm::new(vocab.len(), cfg.emb_dim, cfg.hidden, true, rng),
            vocab_hash: vocab.hash(),
        }
    }

    /// Mean of the forward and backward probabilities of each token.
    pub fn word_probs(&self, tokens: &[TokenId]) -> Vec<f64> {
        let f = self.forward.token_probs(tokens);
        let b = self.backward.token_probs(tokens);
        f.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
    }

    /// Probability of the word at `position` given the rest of the sentence.
    pub fn word_prob(&self, tokens: &[TokenId], position: usize) -> Result<f64> {
        if position >= tokens.len() {
            return Err(Error::IndexOutOfRange {
                position,
                len: tokens.len(),
            });
        }
        // Each direction only needs the prefix it conditions on.
        let f = self.forward.token_probs(&tokens[..=position])[position];
        let b = self.backward.token_probs(&tokens[position..])[0];
        Ok(0.5 * (f + b))
    }

    /// Length-normalized sentence score: geometric mean of the per-token
    /// word probabilities.
    pub fn sentence_score(&self, tokens: &[TokenId]) -> f64 {
        sentence_score_from(&self.word_probs(tokens))
    }

    /// Per-direction perplexities over `sentences`, counting the end symbol.
    pub fn perplexity(&self, sentences: &[Sentence]) -> (f64, f64) {
        (
            perplexity(&self.forward, sentences),
            perplexity(&self.backward, sentences),
        )
    }

    pub fn export(&self) -> Vec<(String, Tensor)> {
        let mut out = self.forward.params.export_named("fwd.");
        out.extend(self.backward.params.export_named("bwd."));
        out
    }

    pub fn load(&mut self, arrays: &HashMap<String, Tensor>) -> Result<()> {
        self.forward.params.load_named(arrays, "fwd.")?;
        self.backward.params.load_named(arrays, "bwd.")
    }
}

/// Geometric mean of `probs`.
pub fn sentence_score_from(probs: &[f64]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let mean_log = probs.iter().map(|p| p.ln()).sum::<f64>() / probs.len() as f64;
    mean_log.exp()
}

pub fn perplexity(lm: &LstmLm, sentences: &[Sentence]) -> f64 {
    use rayon::prelude::*;
    let (nll, n) = sentences
        .par_iter()
        .map(|s| lm.nll(s.tokens()))
        .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if n == 0 {
        return f64::NAN;
    }
    (nll / n as f64).exp()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LmReport {
    pub style: Option<Style>,
    /// Mean per-token training NLL per epoch, forward then backward.
    pub train_nll: Vec<(f64, f64)>,
    pub dev_perplexity: Vec<(f64, f64)>,
    pub best_epoch: usize,
}

fn train_direction(
    lm: &mut LstmLm,
    train: &[Sentence],
    dev: &[Sentence],
    cfg: &LmConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr), &lm.params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, lm.params.clone(), 0usize);
    let mut since_best = 0;
    let mut train_hist = Vec::new();
    let mut dev_hist = Vec::new();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&Sentence> = chunk.iter().map(|&k| &train[k]).collect();
            let n_tokens: usize = batch.iter().map(|s| s.len() + 1).sum();
            let (mut grads, loss) = autograd::parallel_grads(&lm.params, &batch, |g, s| {
                Some(lm.nll_node(g, s.tokens()).0)
            });
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    episode: epoch as u64,
                    detail: "language model loss is not finite".into(),
                });
            }
            grads.scale(1.0 / n_tokens as f64);
            clip_grad_norm(&mut grads, cfg.clip);
            opt.step(&mut lm.params, &grads);
            total += loss;
            count += n_tokens;
        }
        let eval = if dev.is_empty() { train } else { dev };
        let ppl = perplexity(lm, eval);
        train_hist.push(total / count as f64);
        dev_hist.push(ppl);
        log::info!(
            "lm ({}) epoch {}: train nll {:.4}, dev ppl {:.3}",
            if lm.reverse { "backward" } else { "forward" },
            epoch + 1,
            total / count as f64,
            ppl
        );
        if ppl < best.0 {
            best = (ppl, lm.params.clone(), epoch + 1);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    lm.params = best.1;
    Ok((train_hist, dev_hist, best.2))
}

/// Trains both directions on `train`, early-stopping on `dev` perplexity.
/// The best epoch's parameters are kept.
pub fn train_lm(
    style: Style,
    vocab: &Vocab,
    train: &[Sentence],
    dev: &[Sentence],
    cfg: &LmConfig,
) -> Result<(StyleLm, LmReport)> {
    if train.is_empty() {
        return Err(Error::Config(format!("no {style} training sentences for the language model")));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((style.index() as u64 + 1) * 0x9e37_79b9));
    let mut lm = StyleLm::new(style, vocab, cfg, &mut init_rng);
    let mut rng_f = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_f.set_stream(2 * style.index() as u64);
    let mut rng_b = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_b.set_stream(2 * style.index() as u64 + 1);
    let (ft, fd, fbest) = train_direction(&mut lm.forward, train, dev, cfg, &mut rng_f)?;
    let (bt, bd, bbest) = train_direction(&mut lm.backward, train, dev, cfg, &mut rng_b)?;
    let pad = |v: &[f64], k: usize| v.get(k).or(v.last()).copied().unwrap_or(f64::NAN);
    let epochs = ft.len().max(bt.len());
    let report = LmReport {
        style: Some(style),
        train_nll: (0..epochs).map(|k| (pad(&ft, k), pad(&bt, k))).collect(),
        dev_perplexity: (0..epochs).map(|k| (pad(&fd, k), pad(&bd, k))).collect(),
        best_epoch: fbest.max(bbest),
    };
    Ok((lm, report))
}
