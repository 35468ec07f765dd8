//! Checks shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use styledit::autograd::{Grads, Graph, ParamSet};
use styledit::config::{EncoderConfig, InferenceConfig};
use styledit::corpus::{Sentence, Style, TokenId, Vocab};
use styledit::edit::{apply, reachable_set, reconstruction_targets, valid_operators_for_len, EditAction, OperatorKind};
use styledit::inference::{transfer_text, TransferModels};
use styledit::lm::LstmLm;
use styledit::operator::WordGenerator;
use styledit::pointer::PointerNet;
use styledit::trainer::conf_reward;

// ---------------------------------------------------------------- edits

/// Every sentence of length 1..=max_len over `words`.
pub fn all_sentences(words: &[TokenId], max_len: usize) -> Vec<Vec<TokenId>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<TokenId>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                words.iter().map(move |&w| {
                    let mut t = s.clone();
                    t.push(w);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

pub fn words(n: u32) -> Vec<TokenId> {
    (4..4 + n).collect()
}

/// Applies every valid delete and replace to every sentence and undoes it
/// with each reconstruction target. Returns the number of round trips.
pub fn inverse_exhaustive(vocab_size: u32, max_len: usize) -> Result<usize, String> {
    use OperatorKind::*;
    let vocab = words(vocab_size);
    let mut checked = 0usize;
    for toks in all_sentences(&vocab, max_len) {
        let x = Sentence::new(toks.clone(), Style::S1).map_err(|e| e.to_string())?;
        for pos in 0..toks.len() {
            for op in valid_operators_for_len(toks.len(), pos).map_err(|e| e.to_string())? {
                let actions: Vec<EditAction> = match op {
                    Rep => vocab.iter().map(|&w| EditAction::with_word(Rep, pos, w)).collect(),
                    DC | DF | DB => vec![EditAction::delete(op, pos)],
                    _ => continue,
                };
                for a in actions {
                    let edited = apply(&x, &a).map_err(|e| e.to_string())?;
                    let targets = reconstruction_targets(&a, &x).map_err(|e| e.to_string())?;
                    if targets.is_empty() {
                        return Err(format!("{a:?} on {toks:?} has no inverse"));
                    }
                    for t in targets {
                        let back = apply(&edited, &t.action()).map_err(|e| e.to_string())?;
                        if back.tokens() != &toks[..] {
                            return Err(format!("{a:?} then {t:?} gives {:?} from {toks:?}", back.tokens()));
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(checked)
}

/// Confirms every pair of sentences up to `max_len` is connected both ways.
/// A search from one sentence must cover the whole space, and every
/// one-step edge must have a one-step reverse; a sample of sources is also
/// searched directly.
pub fn reachability_complete(vocab_size: u32, max_len: usize) -> Result<usize, String> {
    let vocab = words(vocab_size);
    let all: HashSet<Vec<TokenId>> = all_sentences(&vocab, max_len).into_iter().collect();
    let reached: HashSet<Vec<TokenId>> = reachable_set(&vocab[..1], &vocab, usize::MAX, max_len)
        .into_keys()
        .collect();
    if reached != all {
        return Err(format!("{} of {} sentences reached", reached.len(), all.len()));
    }
    let neighbours: HashMap<&Vec<TokenId>, HashSet<Vec<TokenId>>> = all
        .iter()
        .map(|s| (s, reachable_set(s, &vocab, 1, max_len).into_keys().collect()))
        .collect();
    for (s, next) in &neighbours {
        for t in next {
            if !neighbours[t].contains(*s) {
                return Err(format!("{t:?} cannot undo the step from {s:?}"));
            }
        }
    }
    let mut sources: Vec<&Vec<TokenId>> = all.iter().collect();
    sources.sort();
    for s in sources.iter().step_by(97) {
        let n = reachable_set(s, &vocab, usize::MAX, max_len).len();
        if n != all.len() {
            return Err(format!("{s:?} reaches {n} of {}", all.len()));
        }
    }
    Ok(all.len())
}

// ------------------------------------------------------------ gradients

const H: f64 = 1e-6;
pub const TOKENS: [TokenId; 4] = [4, 7, 5, 6];

pub fn toy() -> EncoderConfig {
    EncoderConfig {
        emb_dim: 4,
        hidden: 3,
        attn_dim: 3,
    }
}

fn numeric<M: Clone>(model: &M, params: impl Fn(&mut M) -> &mut ParamSet, f: impl Fn(&M) -> f64) -> Vec<f64> {
    let mut m = model.clone();
    let n = params(&mut m).num_scalars();
    (0..n)
        .map(|k| {
            let x = params(&mut m).scalar(k);
            params(&mut m).set_scalar(k, x + H);
            let up = f(&m);
            params(&mut m).set_scalar(k, x - H);
            let down = f(&m);
            params(&mut m).set_scalar(k, x);
            (up - down) / (2.0 * H)
        })
        .collect()
}

/// Norm of the difference over the larger norm.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn perturbed<M>(mut model: M, params: impl Fn(&mut M) -> &mut ParamSet, seed: u64, scale: f64) -> M {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ps = params(&mut model);
    for k in 0..ps.num_scalars() {
        let x = ps.scalar(k);
        ps.set_scalar(k, x + scale * (rng.gen::<f64>() - 0.5));
    }
    model
}

/// Worst relative error of the pointer's log-policy gradient over positions.
pub fn pointer_fd_error() -> f64 {
    let net = PointerNet::new(8, &toy(), &mut ChaCha8Rng::seed_from_u64(1));
    (0..TOKENS.len())
        .map(|i| {
            let analytic = net.log_policy_grads(&TOKENS, i).flatten();
            let num = numeric(&net, |m| m.params_mut(), |m| m.policy(&TOKENS).probs[i].ln());
            rel_err(&analytic, &num)
        })
        .fold(0.0, f64::max)
}

pub fn generator_fd_error() -> f64 {
    let gen = WordGenerator::new(8, &toy(), &mut ChaCha8Rng::seed_from_u64(2));
    [(0usize, 4u32), (2, 7), (3, 5)]
        .iter()
        .map(|&(pos, word)| {
            let (grads, _) = gen.nll_grads(&TOKENS, pos, word);
            let analytic: Vec<f64> = grads.flatten().iter().map(|g| -g).collect();
            let num = numeric(&gen, |m| m.params_mut(), |m| m.log_probs(&TOKENS, pos)[word as usize]);
            rel_err(&analytic, &num)
        })
        .fold(0.0, f64::max)
}

pub fn classifier_fd_error() -> f64 {
    // Move the zero-initialized head so every parameter carries gradient.
    let net = perturbed(
        PointerNet::new(8, &toy(), &mut ChaCha8Rng::seed_from_u64(3)),
        |m| m.params_mut(),
        4,
        0.2,
    );
    let batch = vec![(TOKENS.to_vec(), Style::S1), (vec![6, 6, 4], Style::S2)];
    let (grads, _) = net.classification_grads(&batch);
    let num = numeric(&net, |m| m.params_mut(), |m| {
        let refs: Vec<(&[TokenId], Style)> = batch.iter().map(|(t, s)| (t.as_slice(), *s)).collect();
        m.classification_loss(&refs)
    });
    rel_err(&grads.flatten(), &num)
}

pub fn lm_fd_error() -> f64 {
    [false, true]
        .iter()
        .map(|&reverse| {
            let lm = LstmLm::new(8, 3, 4, reverse, &mut ChaCha8Rng::seed_from_u64(5));
            let mut g = Graph::new(lm.params());
            let (nll, _) = lm.nll_node(&mut g, &TOKENS);
            let mut grads = Grads::zeros_like(lm.params());
            g.backward(nll, &mut grads);
            let num = numeric(&lm, |m| m.params_mut(), |m| m.nll(&TOKENS).0);
            rel_err(&grads.flatten(), &num)
        })
        .fold(0.0, f64::max)
}

/// Arbitrary fixed reward table over (position, word).
pub fn reward(i: usize, w: usize) -> f64 {
    ((i * 7 + w * 3) % 11) as f64 / 5.0 - 1.0
}

/// Pointer REINFORCE summed over all positions, weighted by their
/// probabilities, against the exact gradient of the expected reward.
/// Returns (max abs difference, norm of the exact gradient).
pub fn pointer_reinforce_diff() -> (f64, f64) {
    let net = PointerNet::new(8, &toy(), &mut ChaCha8Rng::seed_from_u64(6));
    let gen = WordGenerator::new(8, &toy(), &mut ChaCha8Rng::seed_from_u64(7));
    let values: Vec<f64> = (0..TOKENS.len())
        .map(|i| {
            gen.distribution(&TOKENS, i)
                .iter()
                .enumerate()
                .map(|(w, p)| p * reward(i, w))
                .sum()
        })
        .collect();
    let mu = net.policy(&TOKENS).probs;
    let mut estimator = Grads::zeros_like(net.params());
    for (i, &r) in values.iter().enumerate() {
        let mut gi = net.policy_gradient(&TOKENS, i, r);
        // policy_gradient descends -R log mu; the ascent direction is its negation.
        gi.scale(-mu[i]);
        estimator.add_assign(&gi);
    }
    let mut g = Graph::new(net.params());
    let f = net.forward(&mut g, &TOKENS);
    let r = g.input(values);
    let j = g.dot(f.mu, r);
    let mut exact = Grads::zeros_like(net.params());
    g.backward(j, &mut exact);
    (max_abs_diff(&estimator.flatten(), &exact.flatten()), exact.norm())
}

/// As [`pointer_reinforce_diff`] for a word generator, enumerating every
/// position and word.
pub fn generator_reinforce_diff() -> (f64, f64) {
    let gen = WordGenerator::new(8, &toy(), &mut ChaCha8Rng::seed_from_u64(8));
    let net = PointerNet::new(8, &toy(), &mut ChaCha8Rng::seed_from_u64(9));
    let mu = net.policy(&TOKENS).probs;
    let mut estimator = Grads::zeros_like(gen.params());
    let mut exact = Grads::zeros_like(gen.params());
    for i in 0..TOKENS.len() {
        let pi = gen.distribution(&TOKENS, i);
        for (w, &p) in pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut gw = gen.policy_gradient(&TOKENS, i, w as TokenId, reward(i, w));
            gw.scale(-mu[i] * p);
            estimator.add_assign(&gw);
        }
        // The softmax of log-probabilities recovers the probabilities.
        let mut g = Graph::new(gen.params());
        let lp = gen.log_probs_node(&mut g, &TOKENS, i);
        let probs = g.softmax(lp);
        let r = g.input((0..pi.len()).map(|w| mu[i] * reward(i, w)).collect());
        let j = g.dot(probs, r);
        g.backward(j, &mut exact);
    }
    let x = exact.flatten();
    if x.iter().any(|v| !v.is_finite()) {
        return (f64::INFINITY, 0.0);
    }
    (max_abs_diff(&estimator.flatten(), &x), exact.norm())
}

// -------------------------------------------------------- normalization

pub fn random_tokens(rng: &mut ChaCha8Rng, vocab_size: u32, max_len: usize) -> Vec<TokenId> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| rng.gen_range(Vocab::NUM_RESERVED as u32..vocab_size)).collect()
}

/// Largest deviation from 1 of any distribution's total mass over random
/// models and sentences: pointer policy, classifier, generators and both
/// language-model directions.
pub fn normalization_max_dev(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = 14u32;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let cfg = EncoderConfig {
            emb_dim: rng.gen_range(2..8),
            hidden: rng.gen_range(2..8),
            attn_dim: rng.gen_range(2..8),
        };
        let net = perturbed(
            PointerNet::new(v as usize, &cfg, &mut rng),
            |m| m.params_mut(),
            rng.gen(),
            2.0,
        );
        let gen = WordGenerator::new(v as usize, &cfg, &mut rng);
        let fwd = LstmLm::new(v as usize, cfg.emb_dim, cfg.hidden, false, &mut rng);
        let bwd = LstmLm::new(v as usize, cfg.emb_dim, cfg.hidden, true, &mut rng);
        let toks = random_tokens(&mut rng, v, 9);
        let mut dev = |xs: &[f64]| worst = worst.max((xs.iter().sum::<f64>() - 1.0).abs());
        let (policy, cls) = net.policy_and_classify(&toks);
        dev(&policy.probs);
        dev(&cls);
        for i in 0..toks.len() {
            dev(&gen.distribution(&toks, i));
        }
        for lm in [&fwd, &bwd] {
            for d in lm.next_token_distributions(&toks) {
                dev(&d);
            }
        }
    }
    worst
}

/// Counts violations of the confidence reward's exact antisymmetry and of
/// zero reward for unchanged sentences.
pub fn conf_reward_violations(trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = perturbed(
        PointerNet::new(14, &toy(), &mut ChaCha8Rng::seed_from_u64(seed)),
        |m| m.params_mut(),
        seed + 1,
        2.0,
    );
    let mut bad = 0;
    for _ in 0..trials {
        let a = random_tokens(&mut rng, 14, 8);
        let b = random_tokens(&mut rng, 14, 8);
        let target = *[Style::S1, Style::S2].choose(&mut rng).unwrap();
        let lambda = rng.gen_range(0.1..3.0);
        let ab = conf_reward(&net, &a, &b, target, lambda);
        let ba = conf_reward(&net, &b, &a, target, lambda);
        if ab != -ba || conf_reward(&net, &a, &a, target, lambda) != 0.0 {
            bad += 1;
        }
    }
    bad
}

// ------------------------------------------------------------ inference

#[derive(Debug, Default)]
pub struct InferenceStats {
    pub sentences: usize,
    pub steps: usize,
}

/// Masking, step bound, determinism, monotonicity in p_stop and replay
/// over every input.
pub fn inference_invariants(
    models: TransferModels,
    vocab: &Vocab,
    inputs: &[(Vec<String>, Style)],
    base: &InferenceConfig,
    p_stops: &[f64],
) -> Result<InferenceStats, String> {
    use styledit::corpus::Direction;
    let mut stats = InferenceStats::default();
    for (k, (words, style)) in inputs.iter().enumerate() {
        let mut prev_len = usize::MAX;
        for &p in p_stops {
            let cfg = InferenceConfig {
                p_stop: p,
                direction: Direction::from_source(*style),
                ..base.clone()
            };
            let t = transfer_text(words, vocab, &cfg, models).map_err(|e| e.to_string())?;
            if t.trace.len() > cfg.j_max {
                return Err(format!("input {k}: {} steps exceed j_max {}", t.trace.len(), cfg.j_max));
            }
            for d in &t.details {
                let pos = d.selection.chosen.action.position;
                if d.mask_before.contains(&pos) {
                    return Err(format!("input {k}: masked position {pos} selected"));
                }
            }
            let again = transfer_text(words, vocab, &cfg, models).map_err(|e| e.to_string())?;
            if again != t {
                return Err(format!("input {k}: transfer is not deterministic at p_stop {p}"));
            }
            if t.trace.replay(words).map_err(|e| e.to_string())? != t.surface {
                return Err(format!("input {k}: replay differs from output"));
            }
            if t.trace.len() > prev_len {
                return Err(format!(
                    "input {k}: trace grew from {prev_len} to {} steps at p_stop {p}",
                    t.trace.len()
                ));
            }
            prev_len = t.trace.len();
            stats.steps += t.trace.len();
        }
        stats.sentences += 1;
    }
    Ok(stats)
}

// ----------------------------------------------------------------- bleu

/// Corpus BLEU-4 by direct enumeration: every hypothesis n-gram is counted
/// by scanning the sentence, and clipped against the most occurrences in
/// any single reference, also by scanning.
pub fn brute_bleu(hyps: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> f64 {
    fn occurrences(hay: &[String], gram: &[String]) -> usize {
        if gram.len() > hay.len() {
            return 0;
        }
        (0..=hay.len() - gram.len()).filter(|&s| &hay[s..s + gram.len()] == gram).count()
    }
    let low = |v: &[String]| v.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>();
    let mut correct = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rs) in hyps.iter().zip(refs) {
        let h = low(h);
        let rs: Vec<Vec<String>> = rs.iter().map(|x| low(x)).collect();
        c += h.len();
        let mut lens: Vec<usize> = rs.iter().map(|x| x.len()).collect();
        lens.sort_by_key(|&l| (l.abs_diff(h.len()), l));
        r += lens[0];
        for n in 1..=4 {
            if h.len() < n {
                continue;
            }
            let mut seen: Vec<&[String]> = Vec::new();
            for s in 0..=h.len() - n {
                let g = &h[s..s + n];
                total[n - 1] += 1;
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let in_hyp = occurrences(&h, g);
                let in_ref = rs.iter().map(|x| occurrences(x, g)).max().unwrap_or(0);
                correct[n - 1] += in_hyp.min(in_ref);
            }
        }
    }
    if c == 0 || correct.iter().any(|&k| k == 0) {
        return 0.0;
    }
    let mut p = 1.0;
    for n in 0..4 {
        p *= correct[n] as f64 / total[n] as f64;
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    100.0 * bp * p.powf(0.25)
}

/// Random small corpus over a tiny alphabet, with 1 to 3 references each.
/// The first reference is a noisy copy of the hypothesis so that higher
/// order matches are common.
pub fn random_corpus(rng: &mut ChaCha8Rng) -> (Vec<Vec<String>>, Vec<Vec<Vec<String>>>) {
    const ALPHA: [&str; 5] = ["a", "b", "C", "c", "d"];
    let word = |rng: &mut ChaCha8Rng| ALPHA.choose(rng).unwrap().to_string();
    let sent = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let n = rng.gen_range(1..12);
        (0..n).map(|_| word(rng)).collect()
    };
    let m = rng.gen_range(1..6);
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for _ in 0..m {
        let h = sent(rng);
        let mut near: Vec<String> = h.iter().map(|w| if rng.gen_bool(0.15) { word(rng) } else { w.clone() }).collect();
        for _ in 0..rng.gen_range(0..3) {
            let at = rng.gen_range(0..=near.len());
            near.insert(at, word(rng));
        }
        let mut rs = vec![near];
        for _ in 0..rng.gen_range(0..3) {
            rs.push(sent(rng));
        }
        hyps.push(h);
        refs.push(rs);
    }
    (hyps, refs)
}

/// Largest disagreement between the library and the brute-force counter
/// over `n` random corpora, and how many of them had a nonzero score.
pub fn bleu_oracle_max_diff(n: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut nonzero = 0;
    for _ in 0..n {
        let (h, r) = random_corpus(&mut rng);
        let lib = styledit::evaluator::corpus_bleu(&h, &r).unwrap();
        let oracle = brute_bleu(&h, &r);
        if oracle > 0.0 {
            nonzero += 1;
        }
        worst = worst.max((lib - oracle).abs());
    }
    (worst, nonzero)
}
