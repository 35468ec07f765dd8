//! Word-level edit operators, their boundary rules, and the inverse
//! (reconstruction) mapping used for self-supervision.
//!
//! Positions are 0-based. Deletions never produce an empty sentence.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, TokenId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    /// Insert a word in front of the position.
    IF,
    /// Insert a word behind the position.
    IB,
    /// Replace the word at the position.
    Rep,
    /// Delete the current word.
    DC,
    /// Delete the word in front of the position.
    DF,
    /// Delete the word behind the position.
    DB,
    Skip,
}

impl OperatorKind {
    /// Canonical order; also the tie-break order at inference.
    pub const ALL: [OperatorKind; 7] = [
        OperatorKind::IF,
        OperatorKind::IB,
        OperatorKind::Rep,
        OperatorKind::DC,
        OperatorKind::DF,
        OperatorKind::DB,
        OperatorKind::Skip,
    ];

    pub const PARAMETERIZED: [OperatorKind; 3] =
        [OperatorKind::IF, OperatorKind::IB, OperatorKind::Rep];

    pub fn is_parameterized(self) -> bool {
        matches!(self, OperatorKind::IF | OperatorKind::IB | OperatorKind::Rep)
    }

    pub fn is_delete(self) -> bool {
        matches!(self, OperatorKind::DC | OperatorKind::DF | OperatorKind::DB)
    }

    pub fn is_insert(self) -> bool {
        matches!(self, OperatorKind::IF | OperatorKind::IB)
    }

    /// Index among the parameterized operators (IF=0, IB=1, Rep=2).
    pub fn generator_index(self) -> Option<usize> {
        match self {
            OperatorKind::IF => Some(0),
            OperatorKind::IB => Some(1),
            OperatorKind::Rep => Some(2),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::IF => "IF",
            OperatorKind::IB => "IB",
            OperatorKind::Rep => "Rep",
            OperatorKind::DC => "DC",
            OperatorKind::DF => "DF",
            OperatorKind::DB => "DB",
            OperatorKind::Skip => "Skip",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorKind::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown operator {s:?}")))
    }
}

/// One low-level action: an operator at a position, with a word iff the
/// operator is parameterized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditAction {
    pub op: OperatorKind,
    pub position: usize,
    pub word: Option<TokenId>,
}

impl EditAction {
    pub fn new(op: OperatorKind, position: usize, word: Option<TokenId>) -> Result<Self> {
        if op.is_parameterized() != word.is_some() {
            return Err(Error::Contract(format!(
                "operator {op} {} a word",
                if op.is_parameterized() { "requires" } else { "takes no" }
            )));
        }
        Ok(EditAction { op, position, word })
    }

    pub fn delete(op: OperatorKind, position: usize) -> Self {
        debug_assert!(!op.is_parameterized());
        EditAction {
            op,
            position,
            word: None,
        }
    }

    pub fn with_word(op: OperatorKind, position: usize, word: TokenId) -> Self {
        debug_assert!(op.is_parameterized());
        EditAction {
            op,
            position,
            word: Some(word),
        }
    }

    /// Index of the generated word in the edited sentence.
    pub fn generated_position(&self) -> Option<usize> {
        match self.op {
            OperatorKind::IF | OperatorKind::Rep => Some(self.position),
            OperatorKind::IB => Some(self.position + 1),
            _ => None,
        }
    }

    /// Index of the removed word in the original sentence.
    pub fn deleted_index(&self) -> Option<usize> {
        match self.op {
            OperatorKind::DC => Some(self.position),
            OperatorKind::DF => Some(self.position.wrapping_sub(1)),
            OperatorKind::DB => Some(self.position + 1),
            _ => None,
        }
    }
}

/// Operators that may act at `position` of a length-`len` sentence.
pub fn valid_operators_for_len(len: usize, position: usize) -> Result<Vec<OperatorKind>> {
    if position >= len {
        return Err(Error::IndexOutOfRange { position, len });
    }
    Ok(OperatorKind::ALL
        .into_iter()
        .filter(|&op| match op {
            OperatorKind::DC => len > 1,
            OperatorKind::DF => position > 0,
            OperatorKind::DB => position + 1 < len,
            _ => true,
        })
        .collect())
}

pub fn valid_operators(sentence: &Sentence, position: usize) -> Result<Vec<OperatorKind>> {
    valid_operators_for_len(sentence.len(), position)
}

pub fn is_valid(len: usize, action: &EditAction) -> bool {
    valid_operators_for_len(len, action.position).is_ok_and(|ops| ops.contains(&action.op))
        && action.op.is_parameterized() == action.word.is_some()
}

/// Applies an action to any token sequence. `word` supplies the inserted
/// or replacement element for parameterized operators.
pub fn apply_tokens<T: Clone>(tokens: &[T], op: OperatorKind, position: usize, word: Option<T>) -> Result<Vec<T>> {
    let len = tokens.len();
    if !valid_operators_for_len(len, position)?.contains(&op) {
        return Err(Error::InvalidOperator { op, position, len });
    }
    let need_word = || {
        word.clone()
            .ok_or_else(|| Error::Contract(format!("operator {op} requires a word")))
    };
    let mut out = tokens.to_vec();
    match op {
        OperatorKind::IF => out.insert(position, need_word()?),
        OperatorKind::IB => out.insert(position + 1, need_word()?),
        OperatorKind::Rep => out[position] = need_word()?,
        OperatorKind::DC => {
            out.remove(position);
        }
        OperatorKind::DF => {
            out.remove(position - 1);
        }
        OperatorKind::DB => {
            out.remove(position + 1);
        }
        OperatorKind::Skip => {}
    }
    Ok(out)
}

/// Returns a new sentence; the input is never modified.
pub fn apply(sentence: &Sentence, action: &EditAction) -> Result<Sentence> {
    if action.op.is_parameterized() != action.word.is_some() {
        return Err(Error::Contract(format!(
            "action {:?} has a mismatched word",
            action
        )));
    }
    let toks = apply_tokens(sentence.tokens(), action.op, action.position, action.word)?;
    sentence.with_tokens(toks)
}

/// Inverse action data: applying `(op_prime, position_prime, gold_word)` to
/// the edited sentence restores the original.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionTarget {
    pub op_prime: OperatorKind,
    pub position_prime: usize,
    pub gold_word: TokenId,
}

impl ReconstructionTarget {
    pub fn action(&self) -> EditAction {
        EditAction::with_word(self.op_prime, self.position_prime, self.gold_word)
    }
}

/// Reconstruction operators and positions in the edited sentence's
/// coordinates. Pairs that fall outside the edited sentence are dropped.
pub fn reconstruction_targets(
    action: &EditAction,
    original: &Sentence,
) -> Result<Vec<ReconstructionTarget>> {
    use OperatorKind::*;
    let len = original.len();
    if !matches!(action.op, Rep | DC | DF | DB) {
        return Err(Error::NoReconstructionTarget(action.op));
    }
    if !is_valid(len, action) {
        return Err(Error::InvalidOperator {
            op: action.op,
            position: action.position,
            len,
        });
    }
    let i = action.position as isize;
    let x = original.tokens();
    let (gold, candidates): (TokenId, Vec<(OperatorKind, isize)>) = match action.op {
        Rep => (x[action.position], vec![(Rep, i)]),
        DC => (x[action.position], vec![(IF, i), (IB, i - 1)]),
        DF => (x[action.position - 1], vec![(IF, i - 1), (IB, i - 2)]),
        DB => (x[action.position + 1], vec![(IF, i + 1), (IB, i)]),
        _ => unreachable!(),
    };
    let edited_len = if action.op == Rep { len } else { len - 1 } as isize;
    Ok(candidates
        .into_iter()
        .filter(|&(_, p)| p >= 0 && p < edited_len)
        .map(|(op_prime, p)| ReconstructionTarget {
            op_prime,
            position_prime: p as usize,
            gold_word: gold,
        })
        .collect())
}

/// All sentences reachable from `source` within `max_steps` edits with
/// words drawn from `words`, with their minimal step counts. States longer
/// than `max_len` are not expanded.
pub fn reachable_set(
    source: &[TokenId],
    words: &[TokenId],
    max_steps: usize,
    max_len: usize,
) -> HashMap<Vec<TokenId>, usize> {
    let mut dist: HashMap<Vec<TokenId>, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(source.to_vec(), 0);
    queue.push_back(source.to_vec());
    while let Some(cur) = queue.pop_front() {
        let d = dist[&cur];
        if d == max_steps {
            continue;
        }
        for pos in 0..cur.len() {
            let ops = valid_operators_for_len(cur.len(), pos).expect("in range");
            for op in ops {
                let candidates: Vec<Option<TokenId>> = if op.is_parameterized() {
                    words.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for w in candidates {
                    if op.is_insert() && cur.len() >= max_len {
                        continue;
                    }
                    let next = apply_tokens(&cur, op, pos, w).expect("valid");
                    if !dist.contains_key(&next) {
                        dist.insert(next.clone(), d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    dist
}

/// Whether `target` is reachable from `source` in at most `max_steps`
/// edits using words from `words`.
pub fn reachable(source: &Sentence, target: &Sentence, words: &[TokenId], max_steps: usize) -> bool {
    if source.tokens() == target.tokens() {
        return true;
    }
    let mut vocab: HashSet<TokenId> = words.iter().copied().collect();
    vocab.extend(target.tokens());
    let mut words: Vec<TokenId> = vocab.into_iter().collect();
    words.sort_unstable();
    let max_len = source.len().max(target.len()) + 1;
    reachable_set(source.tokens(), &words, max_steps, max_len).contains_key(target.tokens())
}

/// One step of an interpretable revision history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Index of the input sentence this step belongs to.
    #[serde(default)]
    pub sentence: usize,
    pub step: usize,
    pub before: String,
    pub action: TraceAction,
    pub after: String,
    pub scores: StepScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceAction {
    pub op: OperatorKind,
    pub position: usize,
    pub word: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepScores {
    /// Operator-selection criterion of the chosen candidate.
    pub criterion: f64,
    /// Pointer probability of the chosen position (unmasked distribution).
    pub pointer_prob: f64,
    /// Termination classifier's source-style confidence before the step.
    pub source_confidence: f64,
}

/// Ordered revision history for one input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferTrace {
    pub steps: Vec<TraceStep>,
}

impl TransferTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Re-applies the recorded actions to surface tokens.
    pub fn replay(&self, input: &[String]) -> Result<Vec<String>> {
        let mut cur = input.to_vec();
        for s in &self.steps {
            cur = apply_tokens(&cur, s.action.op, s.action.position, s.action.word.clone())?;
        }
        Ok(cur)
    }
}

/// Parses a JSON-lines trace file into per-sentence traces.
pub fn parse_traces(text: &str, n_sentences: usize) -> Result<Vec<TransferTrace>> {
    let mut out = vec![TransferTrace::default(); n_sentences];
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let step: TraceStep = serde_json::from_str(line)?;
        let slot = out.get_mut(step.sentence).ok_or_else(|| {
            Error::Contract(format!(
                "trace line {} refers to sentence {} of {n_sentences}",
                ln + 1,
                step.sentence
            ))
        })?;
        slot.steps.push(step);
    }
    Ok(out)
}
