//! Automatic evaluation: style accuracy under an independent classifier,
//! BLEU, oracle metrics on synthetic data, and the p_stop sweep.

pub mod bleu;
pub mod sweep;
pub mod textcnn;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bleu::corpus_bleu;
pub use sweep::{render_svg, tradeoff_sweep, write_csv, SweepRow};
pub use textcnn::{train_eval_classifier, TextCnn};

use crate::corpus::{Style, SyntheticSpec, Vocab};
use crate::error::{Error, Result};

/// One system output to score.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalItem {
    pub source: Vec<String>,
    pub output: Vec<String>,
    pub target: Style,
    /// Number of edits made, when known.
    pub edits: Option<usize>,
    /// Position chosen at the first edit step, when known.
    pub first_position: Option<usize>,
    pub references: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub index: usize,
    pub source: String,
    pub output: String,
    pub target_style: Style,
    pub predicted_style: Style,
    pub edits: Option<usize>,
    pub oracle_style: Option<Style>,
    /// Fraction of the source's style-independent words kept in order.
    pub content_kept: Option<f64>,
    pub first_position_hit: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMetrics {
    /// Fraction of outputs whose rule-derived style is the target.
    pub style_flip_rate: f64,
    /// Kept style-independent source words over all such words.
    pub content_preservation_rate: f64,
    /// Fraction of first edit positions that hit a stylized word or its
    /// negator; `None` when no sentence was edited.
    pub pointer_precision: Option<f64>,
    /// BLEU against the lexicon-flip references.
    pub reference_bleu: f64,
    /// As `reference_bleu`, with every lexicon word replaced by its
    /// polarity class on both sides, so any antonym counts as a match.
    pub class_reference_bleu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sentences: usize,
    /// Fraction of outputs the evaluation classifier assigns the target style.
    pub accuracy: f64,
    /// BLEU against supplied references.
    pub bleu: Option<f64>,
    /// BLEU against the unedited inputs.
    pub bleu_source: f64,
    pub synthetic_oracle: Option<SyntheticMetrics>,
    pub records: Vec<SentenceRecord>,
    pub notes: Vec<String>,
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Style-independent words of `source`, and how many of them survive in
/// `output` in order.
pub fn content_counts(spec: &SyntheticSpec, source: &[String], output: &[String]) -> (usize, usize) {
    let stylized = spec.annotate(source).stylized_positions();
    let content: Vec<&String> = source
        .iter()
        .enumerate()
        .filter(|(i, _)| !stylized.contains(i))
        .map(|(_, w)| w)
        .collect();
    let out: Vec<&String> = output.iter().collect();
    (lcs_len(&content, &out), content.len())
}

/// Replaces lexicon words by a per-polarity placeholder.
pub fn polarity_classes(spec: &SyntheticSpec, tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            if spec.pos_lexicon.contains(t) {
                "<s1>".to_string()
            } else if spec.neg_lexicon.contains(t) {
                "<s2>".to_string()
            } else {
                t.clone()
            }
        })
        .collect()
}

pub fn evaluate(
    items: &[EvalItem],
    classifier: &TextCnn,
    vocab: &Vocab,
    oracle: Option<&SyntheticSpec>,
) -> Result<EvalReport> {
    if items.is_empty() {
        return Err(Error::Contract("nothing to evaluate".into()));
    }
    let with_refs = items.iter().filter(|i| i.references.is_some()).count();
    if with_refs != 0 && with_refs != items.len() {
        return Err(Error::Contract("references must be given for all outputs or none".into()));
    }
    let records: Vec<(SentenceRecord, usize, usize)> = items
        .par_iter()
        .enumerate()
        .map(|(index, it)| {
            let enc = vocab.encode(&it.output, it.target)?;
            let predicted_style = classifier.predict(enc.tokens());
            let (mut oracle_style, mut content_kept, mut hit) = (None, None, None);
            let (mut kept, mut total) = (0, 0);
            if let Some(spec) = oracle {
                oracle_style = spec.annotate(&it.output).style;
                (kept, total) = content_counts(spec, &it.source, &it.output);
                content_kept = Some(if total == 0 { 1.0 } else { kept as f64 / total as f64 });
                if let Some(p) = it.first_position {
                    hit = Some(spec.annotate(&it.source).stylized_positions().contains(&p));
                }
            }
            Ok((
                SentenceRecord {
                    index,
                    source: it.source.join(" "),
                    output: it.output.join(" "),
                    target_style: it.target,
                    predicted_style,
                    edits: it.edits,
                    oracle_style,
                    content_kept,
                    first_position_hit: hit,
                },
                kept,
                total,
            ))
        })
        .collect::<Result<_>>()?;
    let n = items.len() as f64;
    let accuracy = records
        .iter()
        .filter(|(r, _, _)| r.predicted_style == r.target_style)
        .count() as f64
        / n;
    let outputs: Vec<Vec<String>> = items.iter().map(|i| i.output.clone()).collect();
    let bleu = if with_refs > 0 {
        let refs: Vec<Vec<Vec<String>>> = items.iter().map(|i| i.references.clone().unwrap()).collect();
        Some(corpus_bleu(&outputs, &refs)?)
    } else {
        None
    };
    let sources: Vec<Vec<Vec<String>>> = items.iter().map(|i| vec![i.source.clone()]).collect();
    let bleu_source = corpus_bleu(&outputs, &sources)?;
    let mut notes = Vec::new();
    let synthetic_oracle = match oracle {
        Some(spec) => {
            let flips = records
                .iter()
                .filter(|(r, _, _)| r.oracle_style == Some(r.target_style))
                .count();
            let (kept, total) = records
                .iter()
                .fold((0, 0), |(a, b), (_, k, t)| (a + k, b + t));
            let hits: Vec<bool> = records.iter().filter_map(|(r, _, _)| r.first_position_hit).collect();
            let refs: Vec<Vec<Vec<String>>> = items.iter().map(|i| spec.flip_references(&i.source)).collect();
            let class_outputs: Vec<Vec<String>> = outputs.iter().map(|o| polarity_classes(spec, o)).collect();
            let class_refs: Vec<Vec<Vec<String>>> = refs
                .iter()
                .map(|rs| rs.iter().map(|r| polarity_classes(spec, r)).collect())
                .collect();
            Some(SyntheticMetrics {
                style_flip_rate: flips as f64 / n,
                content_preservation_rate: if total == 0 { 1.0 } else { kept as f64 / total as f64 },
                pointer_precision: (!hits.is_empty())
                    .then(|| hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64),
                reference_bleu: corpus_bleu(&outputs, &refs)?,
                class_reference_bleu: corpus_bleu(&class_outputs, &class_refs)?,
            })
        }
        None => {
            notes.push(
                "accuracy of human references is itself low on real data, so accuracy is not \
                 comparable across reference sets"
                    .to_string(),
            );
            None
        }
    };
    Ok(EvalReport {
        sentences: items.len(),
        accuracy,
        bleu,
        bleu_source,
        synthetic_oracle,
        records: records.into_iter().map(|(r, _, _)| r).collect(),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcs_basics() {
        assert_eq!(lcs_len(&[1, 2, 3, 4], &[1, 3, 4]), 3);
        assert_eq!(lcs_len(&[1, 2], &[3]), 0);
        assert_eq!(lcs_len::<u8>(&[], &[1]), 0);
        assert_eq!(lcs_len(&[1, 2, 3], &[3, 2, 1]), 1);
    }

    #[test]
    fn classes_hide_which_antonym_was_used() {
        let spec = SyntheticSpec::default();
        let w = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        assert_eq!(
            polarity_classes(&spec, &w("the food was bland .")),
            polarity_classes(&spec, &w("the food was terrible ."))
        );
        assert_ne!(
            polarity_classes(&spec, &w("the food was good .")),
            polarity_classes(&spec, &w("the food was bad ."))
        );
    }

    #[test]
    fn content_ignores_style_words() {
        let spec = SyntheticSpec::default();
        let w = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        let src = w("the food was not bad .");
        assert_eq!(content_counts(&spec, &src, &w("the food was good .")), (4, 4));
        assert_eq!(content_counts(&spec, &src, &w("the was good")), (2, 4));
    }
}
