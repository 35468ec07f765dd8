//! Corpus BLEU-4 with the conventions of the Moses `multi-bleu.perl`
//! script: clipped n-gram counts against the per-n-gram maximum over
//! references, closest reference length (shorter wins ties), brevity
//! penalty `exp(1 - r/c)` when `c < r`, no smoothing.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const MAX_N: usize = 4;

/// Aggregate statistics from which corpus BLEU is computed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BleuStats {
    pub correct: [usize; MAX_N],
    pub total: [usize; MAX_N],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_N {
            if self.total[n] == 0 || self.correct[n] == 0 {
                return 0.0;
            }
            log_sum += (self.correct[n] as f64 / self.total[n] as f64).ln();
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / MAX_N as f64).exp()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn lower(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

/// Accumulates one hypothesis against its references.
pub fn sentence_stats(hyp: &[String], refs: &[Vec<String>], stats: &mut BleuStats) {
    let hyp = lower(hyp);
    let refs: Vec<Vec<String>> = refs.iter().map(|r| lower(r)).collect();
    let c = hyp.len();
    let mut closest: Option<(usize, usize)> = None;
    for r in &refs {
        let d = r.len().abs_diff(c);
        closest = match closest {
            None => Some((d, r.len())),
            Some((bd, bl)) if d < bd || (d == bd && r.len() < bl) => Some((d, r.len())),
            keep => keep,
        };
    }
    stats.hyp_len += c;
    stats.ref_len += closest.map_or(0, |(_, l)| l);
    for n in 1..=MAX_N {
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in &refs {
            for (g, k) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(k);
            }
        }
        for (g, k) in ngram_counts(&hyp, n) {
            stats.total[n - 1] += k;
            stats.correct[n - 1] += k.min(max_ref.get(g).copied().unwrap_or(0));
        }
    }
}

/// Case-insensitive corpus BLEU in `[0, 100]`.
pub fn corpus_bleu(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<f64> {
    Ok(corpus_stats(hyps, refs)?.score())
}

pub fn corpus_stats(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> Result<BleuStats> {
    if hyps.len() != refs.len() {
        return Err(Error::Contract(format!(
            "{} outputs but {} reference sets",
            hyps.len(),
            refs.len()
        )));
    }
    let mut stats = BleuStats::default();
    for (k, (h, r)) in hyps.iter().zip(refs).enumerate() {
        if r.is_empty() {
            return Err(Error::Contract(format!("sentence {k} has no reference")));
        }
        sentence_stats(h, r, &mut stats);
    }
    Ok(stats)
}
