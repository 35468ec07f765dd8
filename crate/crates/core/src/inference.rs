//! Masked multi-step transfer: point at the most salient unmasked
//! position, try every valid operator there, keep the best candidate, and
//! stop once the termination classifier no longer sees the source style.

use std::collections::BTreeSet;

use crate::config::InferenceConfig;
use crate::corpus::{Direction, Sentence, Style, TokenId, Vocab};
use crate::edit::{apply_tokens, valid_operators_for_len, EditAction, OperatorKind, StepScores, TraceAction, TraceStep, TransferTrace};
use crate::error::{Error, Result};
use crate::lm::StyleLm;
use crate::operator::OperatorAgent;
use crate::pointer::PointerNet;

/// Frozen models used at inference.
#[derive(Clone, Copy)]
pub struct TransferModels<'a> {
    pub pointer: &'a PointerNet,
    pub termination: &'a PointerNet,
    pub operators: &'a OperatorAgent,
    pub lms: &'a [StyleLm; 2],
}

/// Masked positions of the sentence being revised.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MaskState {
    masked: BTreeSet<usize>,
}

impl MaskState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_masked(&self, position: usize) -> bool {
        self.masked.contains(&position)
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.masked.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.masked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked.is_empty()
    }

    pub fn vector(&self, len: usize) -> Vec<bool> {
        (0..len).map(|i| self.is_masked(i)).collect()
    }

    pub fn all_masked(&self, len: usize) -> bool {
        (0..len).all(|i| self.is_masked(i))
    }

    /// Masks `center` and `window` positions on each side, within `[0, len)`.
    pub fn mask_window(&mut self, center: usize, window: usize, len: usize) {
        let lo = center.saturating_sub(window);
        let hi = (center + window).min(len.saturating_sub(1));
        self.masked.extend(lo..=hi);
    }

    /// Updates the mask for `action`, which was applied to a sentence of
    /// length `len_before`. Inserts shift later positions right, deletes
    /// shift them left and add no masks; inserts, replacements and skips
    /// mask the window around the resulting word.
    pub fn apply(&mut self, action: &EditAction, len_before: usize, window: usize) {
        match action.op {
            OperatorKind::IF | OperatorKind::IB => {
                let p = action.generated_position().expect("insert");
                self.masked = self
                    .masked
                    .iter()
                    .map(|&m| if m >= p { m + 1 } else { m })
                    .collect();
                self.mask_window(p, window, len_before + 1);
            }
            OperatorKind::Rep | OperatorKind::Skip => {
                self.mask_window(action.position, window, len_before);
            }
            OperatorKind::DC | OperatorKind::DF | OperatorKind::DB => {
                let d = action.deleted_index().expect("delete");
                self.masked = self
                    .masked
                    .iter()
                    .filter(|&&m| m != d)
                    .map(|&m| if m > d { m - 1 } else { m })
                    .collect();
            }
        }
    }
}

/// Copy of `tokens` with masked positions replaced by the unknown id.
pub fn masked_sentence_for_termination(tokens: &[TokenId], mask: &MaskState) -> Vec<TokenId> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, &t)| if mask.is_masked(i) { Vocab::UNK_ID } else { t })
        .collect()
}

/// One scored candidate at the selected position.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub action: EditAction,
    pub tokens: Vec<TokenId>,
    pub lm_score: f64,
    pub target_prob: f64,
    pub criterion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub chosen: Candidate,
    /// Unmasked pointer probability of the chosen position.
    pub pointer_prob: f64,
    /// All candidates in operator order.
    pub candidates: Vec<Candidate>,
}

/// `lm_score * target_prob^eta`.
pub fn criterion(lm_score: f64, target_prob: f64, eta: f64) -> f64 {
    lm_score * target_prob.powf(eta)
}

/// Picks the argmax unmasked position and the best operator there.
/// Returns `None` when every position is masked.
pub fn select_action(
    tokens: &[TokenId],
    mask: &MaskState,
    models: TransferModels,
    cfg: &InferenceConfig,
    direction: Direction,
) -> Result<Option<Selection>> {
    let tgt = direction.target();
    let dist = models.pointer.policy(tokens);
    let raw = dist.probs.clone();
    let Some(position) = dist.masked(mask.vector(tokens.len())).argmax() else {
        return Ok(None);
    };
    let mut candidates = Vec::new();
    for op in valid_operators_for_len(tokens.len(), position)? {
        if !cfg.operators_allowed.contains(&op) {
            continue;
        }
        let word = if op.is_parameterized() {
            Some(models.operators.generator(direction, op)?.argmax(tokens, position))
        } else {
            None
        };
        let action = EditAction::new(op, position, word)?;
        let cand = apply_tokens(tokens, op, position, word)?;
        let lm_score = models.lms[tgt.index()].sentence_score(&cand);
        let target_prob = models.pointer.classify(&cand)[tgt.index()];
        candidates.push(Candidate {
            action,
            tokens: cand,
            lm_score,
            target_prob,
            criterion: criterion(lm_score, target_prob, cfg.eta),
        });
    }
    let mut best = 0;
    for (k, c) in candidates.iter().enumerate() {
        if c.criterion > candidates[best].criterion {
            best = k;
        }
    }
    let chosen = candidates
        .get(best)
        .cloned()
        .ok_or_else(|| Error::Contract("no operator is allowed at the selected position".into()))?;
    Ok(Some(Selection {
        chosen,
        pointer_prob: raw[position],
        candidates,
    }))
}

/// Source-style confidence of the termination classifier on the masked
/// sentence.
pub fn source_confidence(tokens: &[TokenId], mask: &MaskState, models: TransferModels, direction: Direction) -> f64 {
    let masked = masked_sentence_for_termination(tokens, mask);
    models.termination.classify(&masked)[direction.source().index()]
}

/// Per-step details kept alongside the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDetail {
    pub mask_before: Vec<usize>,
    pub selection: Selection,
}

/// Result of transferring one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub output: Vec<TokenId>,
    /// Output with untouched input words kept verbatim.
    pub surface: Vec<String>,
    pub trace: TransferTrace,
    pub details: Vec<StepDetail>,
}

/// Transfers `input` (surface words) from `cfg.direction`'s source style.
/// Generated words are decoded through `vocab`; all other words are
/// carried through unchanged, so zero edits reproduce the input exactly.
pub fn transfer_text<S: AsRef<str>>(
    input: &[S],
    vocab: &Vocab,
    cfg: &InferenceConfig,
    models: TransferModels,
) -> Result<Transfer> {
    let direction = cfg.direction;
    let mut surface: Vec<String> = input.iter().map(|s| s.as_ref().to_string()).collect();
    let mut tokens = vocab.encode(&surface, direction.source())?.tokens().to_vec();
    let mut mask = MaskState::new();
    let mut trace = TransferTrace::default();
    let mut details = Vec::new();
    let mut j = 1;
    while j <= cfg.j_max {
        let conf = source_confidence(&tokens, &mask, models, direction);
        if conf <= cfg.p_stop {
            break;
        }
        let Some(sel) = select_action(&tokens, &mask, models, cfg, direction)? else {
            break;
        };
        let action = sel.chosen.action;
        let word_str = action.word.map(|w| vocab.token(w).to_string());
        let before = surface.join(" ");
        let next_surface = apply_tokens(&surface, action.op, action.position, word_str.clone())?;
        trace.steps.push(TraceStep {
            sentence: 0,
            step: j,
            before,
            action: TraceAction {
                op: action.op,
                position: action.position,
                word: word_str,
            },
            after: next_surface.join(" "),
            scores: StepScores {
                criterion: sel.chosen.criterion,
                pointer_prob: sel.pointer_prob,
                source_confidence: conf,
            },
        });
        details.push(StepDetail {
            mask_before: mask.positions().collect(),
            selection: sel.clone(),
        });
        mask.apply(&action, tokens.len(), cfg.window);
        tokens = sel.chosen.tokens;
        surface = next_surface;
        j += 1;
    }
    Ok(Transfer {
        output: tokens,
        surface,
        trace,
        details,
    })
}

/// Transfers an encoded sentence. The sentence's style must be the
/// configured direction's source.
pub fn transfer(
    x: &Sentence,
    vocab: &Vocab,
    cfg: &InferenceConfig,
    models: TransferModels,
) -> Result<(Sentence, TransferTrace)> {
    if x.style() != cfg.direction.source() {
        return Err(Error::Contract(format!(
            "sentence has style {} but direction {} expects {}",
            x.style(),
            cfg.direction,
            cfg.direction.source()
        )));
    }
    let words = vocab.decode(x);
    let t = transfer_text(&words, vocab, cfg, models)?;
    Ok((Sentence::new(t.output, cfg.direction.target())?, t.trace))
}

/// Transfers many inputs in parallel, each from its own style to the
/// other. Trace steps are tagged with the input index.
pub fn transfer_many(
    inputs: &[(Vec<String>, Style)],
    vocab: &Vocab,
    cfg: &InferenceConfig,
    models: TransferModels,
) -> Result<Vec<Transfer>> {
    use rayon::prelude::*;
    inputs
        .par_iter()
        .enumerate()
        .map(|(k, (words, style))| {
            let cfg = InferenceConfig {
                direction: Direction::from_source(*style),
                ..cfg.clone()
            };
            let mut t = transfer_text(words, vocab, &cfg, models)?;
            for s in &mut t.trace.steps {
                s.sentence = k;
            }
            Ok(t)
        })
        .collect()
}
