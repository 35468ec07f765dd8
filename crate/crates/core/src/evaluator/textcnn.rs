//! Convolutional style classifier used only for evaluation. It shares no
//! parameters or architecture with the pointer's classifier.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{self, clip_grad_norm, Adam, AdamConfig, Graph, Grads, ParamId, ParamSet, Tensor, Var};
use crate::config::EvalClassifierConfig;
use crate::corpus::{Sentence, Style, TokenId, Vocab};
use crate::error::{Error, Result};
use crate::pointer::ClassifierReport;

#[derive(Clone, Debug)]
pub struct TextCnn {
    params: ParamSet,
    emb: ParamId,
    convs: Vec<(usize, ParamId, ParamId)>,
    out_w: ParamId,
    out_b: ParamId,
}

impl TextCnn {
    pub fn new<R: Rng>(vocab_size: usize, cfg: &EvalClassifierConfig, rng: &mut R) -> Self {
        let mut ps = ParamSet::new();
        let emb = ps.add("emb", Tensor::uniform(vocab_size, cfg.emb_dim, 0.3, rng));
        let mut convs = Vec::new();
        for &w in &cfg.widths {
            let fan_in = w * cfg.emb_dim;
            let k = ps.add(
                format!("conv{w}.w"),
                Tensor::uniform(cfg.filters, fan_in, 1.0 / (fan_in as f64).sqrt(), rng),
            );
            let b = ps.add(format!("conv{w}.b"), Tensor::zeros(cfg.filters, 1));
            convs.push((w, k, b));
        }
        let feat = cfg.filters * cfg.widths.len();
        let out_w = ps.add("out.w", Tensor::uniform(2, feat, 1.0 / (feat as f64).sqrt(), rng));
        let out_b = ps.add("out.b", Tensor::zeros(2, 1));
        TextCnn {
            params: ps,
            emb,
            convs,
            out_w,
            out_b,
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn load(&mut self, arrays: &HashMap<String, Tensor>) -> Result<()> {
        self.params.load_named(arrays, "cnn.")
    }

    pub fn export(&self) -> Vec<(String, Tensor)> {
        self.params.export_named("cnn.")
    }

    fn max_width(&self) -> usize {
        self.convs.iter().map(|c| c.0).max().unwrap_or(1)
    }

    /// Log-probabilities of (s1, s2). Inputs shorter than the widest
    /// filter are right-padded.
    pub fn forward(&self, g: &mut Graph, tokens: &[TokenId]) -> Var {
        let mut ids = tokens.to_vec();
        while ids.len() < self.max_width() {
            ids.push(Vocab::PAD_ID);
        }
        let xs: Vec<Var> = ids.iter().map(|&t| g.embed(self.emb, t as usize)).collect();
        let mut pooled = Vec::with_capacity(self.convs.len());
        for &(w, k, b) in &self.convs {
            let maps: Vec<Var> = xs
                .windows(w)
                .map(|win| {
                    let x = g.concat(win);
                    let h = g.affine(k, b, x);
                    g.relu(h)
                })
                .collect();
            pooled.push(g.max_pool(&maps));
        }
        let feat = g.concat(&pooled);
        let logits = g.affine(self.out_w, self.out_b, feat);
        g.log_softmax(logits)
    }

    pub fn classify(&self, tokens: &[TokenId]) -> [f64; 2] {
        let mut g = Graph::new(&self.params);
        let lp = self.forward(&mut g, tokens);
        let v = g.value(lp);
        [v[0].exp(), v[1].exp()]
    }

    pub fn predict(&self, tokens: &[TokenId]) -> Style {
        let p = self.classify(tokens);
        if p[1] > p[0] {
            Style::S2
        } else {
            Style::S1
        }
    }

    fn grads(&self, batch: &[(Vec<TokenId>, Style)]) -> (Grads, f64) {
        let (mut grads, loss) = autograd::parallel_grads(&self.params, batch, |g, (t, s)| {
            let lp = self.forward(g, t);
            let p = g.pick(lp, s.index());
            Some(g.neg(p))
        });
        let n = batch.len().max(1) as f64;
        grads.scale(1.0 / n);
        (grads, loss / n)
    }
}

/// Fraction of `data` whose predicted style equals its label.
pub fn accuracy(cnn: &TextCnn, data: &[(Vec<TokenId>, Style)]) -> f64 {
    use rayon::prelude::*;
    if data.is_empty() {
        return 0.0;
    }
    let hits: usize = data
        .par_iter()
        .map(|(t, s)| usize::from(cnn.predict(t) == *s))
        .sum();
    hits as f64 / data.len() as f64
}

fn labeled(data: &[Sentence]) -> Vec<(Vec<TokenId>, Style)> {
    data.iter().map(|s| (s.tokens().to_vec(), s.style())).collect()
}

/// Trains on labeled sentences; stops once dev accuracy reaches the target.
pub fn train_eval_classifier(
    vocab_size: usize,
    train: &[Sentence],
    dev: &[Sentence],
    cfg: &EvalClassifierConfig,
) -> Result<(TextCnn, ClassifierReport)> {
    train_labeled(vocab_size, &labeled(train), &labeled(dev), cfg)
}

/// As [`train_eval_classifier`] but over explicit (tokens, label) pairs,
/// which lets callers train on permuted labels as a control.
pub fn train_labeled(
    vocab_size: usize,
    train: &[(Vec<TokenId>, Style)],
    dev: &[(Vec<TokenId>, Style)],
    cfg: &EvalClassifierConfig,
) -> Result<(TextCnn, ClassifierReport)> {
    if train.is_empty() {
        return Err(Error::Config("evaluation classifier training data is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cnn = TextCnn::new(vocab_size, cfg, &mut rng);
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr), &cnn.params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = ClassifierReport::default();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<(Vec<TokenId>, Style)> = chunk.iter().map(|&k| train[k].clone()).collect();
            let (mut grads, loss) = cnn.grads(&batch);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    episode: epoch as u64,
                    detail: "evaluation classifier loss is not finite".into(),
                });
            }
            clip_grad_norm(&mut grads, 5.0);
            opt.step(&mut cnn.params, &grads);
            total += loss * chunk.len() as f64;
        }
        let acc = accuracy(&cnn, if dev.is_empty() { train } else { dev });
        report.train_loss.push(total / train.len() as f64);
        report.dev_accuracy.push(acc);
        report.epochs = epoch + 1;
        log::info!("textcnn epoch {}: loss {:.4}, dev acc {:.4}", epoch + 1, total / train.len() as f64, acc);
        if acc >= cfg.target_dev_acc {
            break;
        }
    }
    Ok((cnn, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_sum_to_one_even_for_short_inputs() {
        let cfg = EvalClassifierConfig {
            emb_dim: 4,
            filters: 3,
            ..EvalClassifierConfig::default()
        };
        let cnn = TextCnn::new(10, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        for t in [vec![4u32], vec![4, 5, 6, 7, 8, 9]] {
            let p = cnn.classify(&t);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }
}
