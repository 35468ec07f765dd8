//! Templated two-style corpus with exact annotations of stylized positions.
//!
//! `s1` sentences carry positive lexicon words (or negated negative ones),
//! `s2` sentences the reverse. Lexicons are paired by index so every style
//! word has a fixed counterpart, which gives exact flip references.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Style, StyleCorpus};
use crate::error::{Error, Result};

const STYLE_SLOT: &str = "{s}";
const NEUTRAL_SLOT: &str = "{n}";
const MAX_LEN: usize = 12;

fn default_negators() -> Vec<String> {
    vec!["not".to_string()]
}

fn default_dev_size() -> usize {
    200
}

fn default_test_size() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    /// Space-separated patterns; `{s}` is a style slot, `{n}` a neutral slot.
    pub templates: Vec<String>,
    pub pos_lexicon: Vec<String>,
    pub neg_lexicon: Vec<String>,
    pub neutral_lexicon: Vec<String>,
    #[serde(default = "default_negators")]
    pub negators: Vec<String>,
    pub negation_rate: f64,
    pub seed: u64,
    #[serde(default = "default_dev_size")]
    pub dev_size: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
}

fn words(s: &[&str]) -> Vec<String> {
    s.iter().map(|w| w.to_string()).collect()
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            templates: words(&[
                "the {n} was {s} .",
                "i thought the {n} was really {s} .",
                "the {n} was {s} and the {n} was {s} .",
                "they have {s} {n} here .",
                "we had a {s} {n} at this place .",
                "the {n} here is always {s} .",
                "my friend said the {n} tasted {s} .",
                "{s} {n} and {s} {n} !",
                "overall the {n} is {s} .",
                "the {n} and the {n} were both {s} .",
            ]),
            pos_lexicon: words(&[
                "good", "great", "delicious", "friendly", "amazing", "excellent", "tasty",
                "wonderful", "fresh", "helpful", "lovely", "perfect",
            ]),
            neg_lexicon: words(&[
                "bad", "terrible", "bland", "rude", "awful", "poor", "disgusting", "horrible",
                "stale", "unhelpful", "nasty", "mediocre",
            ]),
            neutral_lexicon: words(&[
                "food", "service", "staff", "pizza", "waiter", "room", "menu", "coffee",
                "burger", "bar", "price", "salad",
            ]),
            negators: default_negators(),
            negation_rate: 0.2,
            seed: 7,
            dev_size: default_dev_size(),
            test_size: default_test_size(),
        }
    }
}

/// Gold annotation of one synthetic sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleEntry {
    /// Rule-derived style, `None` when the style evidence cancels out.
    pub style: Option<Style>,
    /// Positions holding lexicon words.
    pub style_positions: Vec<usize>,
    /// Positions holding a negator that modifies the following style word.
    pub negator_positions: Vec<usize>,
}

impl OracleEntry {
    /// Style words and their negators.
    pub fn stylized_positions(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self
            .style_positions
            .iter()
            .chain(&self.negator_positions)
            .copied()
            .collect();
        p.sort_unstable();
        p
    }
}

/// Annotations keyed by the space-joined sentence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOracle {
    pub entries: BTreeMap<String, OracleEntry>,
}

impl SyntheticOracle {
    pub fn get(&self, tokens: &[String]) -> Option<&OracleEntry> {
        self.entries.get(&tokens.join(" "))
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            sentence: &'a str,
            #[serde(flatten)]
            entry: &'a OracleEntry,
        }
        let mut out = String::new();
        for (sentence, entry) in &self.entries {
            out.push_str(&serde_json::to_string(&Line { sentence, entry })?);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.pos_lexicon.is_empty() || self.pos_lexicon.len() != self.neg_lexicon.len() {
            return bad("pos_lexicon and neg_lexicon must be nonempty and paired".into());
        }
        if self.neutral_lexicon.is_empty() {
            return bad("neutral_lexicon must be nonempty".into());
        }
        if !(0.0..=1.0).contains(&self.negation_rate) {
            return bad(format!("negation_rate {} outside [0,1]", self.negation_rate));
        }
        let pos: HashSet<&str> = self.pos_lexicon.iter().map(String::as_str).collect();
        let neg: HashSet<&str> = self.neg_lexicon.iter().map(String::as_str).collect();
        if let Some(w) = pos.intersection(&neg).next() {
            return bad(format!("{w:?} appears in both lexicons"));
        }
        if self.negation_rate > 0.0 && self.negators.is_empty() {
            return bad("negation_rate > 0 needs at least one negator".into());
        }
        if self.templates.is_empty() {
            return bad("no templates".into());
        }
        for t in &self.templates {
            let toks: Vec<&str> = t.split_whitespace().collect();
            if !toks.contains(&STYLE_SLOT) {
                return bad(format!("template {t:?} has no style slot"));
            }
            for w in &toks {
                if pos.contains(w) || neg.contains(w) || self.negators.iter().any(|n| n == w) {
                    return bad(format!("template {t:?} uses reserved word {w:?} literally"));
                }
            }
        }
        Ok(())
    }

    fn polarity(&self, word: &str) -> Option<(Style, usize)> {
        if let Some(i) = self.pos_lexicon.iter().position(|w| w == word) {
            return Some((Style::S1, i));
        }
        self.neg_lexicon
            .iter()
            .position(|w| w == word)
            .map(|i| (Style::S2, i))
    }

    fn is_negator(&self, word: &str) -> bool {
        self.negators.iter().any(|n| n == word)
    }

    fn lexicon(&self, style: Style) -> &[String] {
        match style {
            Style::S1 => &self.pos_lexicon,
            Style::S2 => &self.neg_lexicon,
        }
    }

    /// Rule-based annotation: each lexicon word votes for its polarity,
    /// inverted when directly preceded by a negator.
    pub fn annotate<S: AsRef<str>>(&self, tokens: &[S]) -> OracleEntry {
        let mut score = 0i64;
        let mut style_positions = Vec::new();
        let mut negator_positions = Vec::new();
        for (i, t) in tokens.iter().enumerate() {
            if let Some((pol, _)) = self.polarity(t.as_ref()) {
                let mut vote = if pol == Style::S1 { 1 } else { -1 };
                if i > 0 && self.is_negator(tokens[i - 1].as_ref()) {
                    vote = -vote;
                    negator_positions.push(i - 1);
                }
                score += vote;
                style_positions.push(i);
            }
        }
        let style = match score.cmp(&0) {
            std::cmp::Ordering::Greater => Some(Style::S1),
            std::cmp::Ordering::Less => Some(Style::S2),
            std::cmp::Ordering::Equal => None,
        };
        OracleEntry {
            style,
            style_positions,
            negator_positions,
        }
    }

    /// Swaps every lexicon word with its paired counterpart.
    pub fn swap_style_words<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| match self.polarity(t.as_ref()) {
                Some((pol, i)) => self.lexicon(pol.opposite())[i].clone(),
                None => t.as_ref().to_string(),
            })
            .collect()
    }

    /// Gold transfers of a sentence: the lexicon swap, plus (when negations
    /// are present) the variant that drops negators instead of swapping
    /// the words they negate.
    pub fn flip_references<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Vec<String>> {
        let mut refs = vec![self.swap_style_words(tokens)];
        let entry = self.annotate(tokens);
        if !entry.negator_positions.is_empty() {
            let negated: HashSet<usize> = entry.negator_positions.iter().map(|p| p + 1).collect();
            let mut alt = Vec::with_capacity(tokens.len());
            for (i, t) in tokens.iter().enumerate() {
                let t = t.as_ref();
                if entry.negator_positions.contains(&i) {
                    continue;
                }
                match self.polarity(t) {
                    Some((pol, k)) if !negated.contains(&i) => {
                        alt.push(self.lexicon(pol.opposite())[k].clone())
                    }
                    _ => alt.push(t.to_string()),
                }
            }
            refs.push(alt);
        }
        refs
    }

    fn sample(&self, style: Style, rng: &mut ChaCha8Rng) -> Vec<String> {
        let template: Vec<&str> = self
            .templates
            .choose(rng)
            .expect("validated")
            .split_whitespace()
            .collect();
        let mut budget = MAX_LEN.saturating_sub(template.len());
        let mut out = Vec::with_capacity(MAX_LEN);
        for slot in template {
            match slot {
                STYLE_SLOT => {
                    let k = rng.gen_range(0..self.pos_lexicon.len());
                    if budget > 0 && rng.gen_bool(self.negation_rate) {
                        budget -= 1;
                        out.push(self.negators.choose(rng).expect("validated").clone());
                        out.push(self.lexicon(style.opposite())[k].clone());
                    } else {
                        out.push(self.lexicon(style)[k].clone());
                    }
                }
                NEUTRAL_SLOT => out.push(self.neutral_lexicon.choose(rng).expect("validated").clone()),
                lit => out.push(lit.to_string()),
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let spec: SyntheticSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Generates `n_per_style` training sentences per style plus dev/test
/// splits. All sentences are distinct, so splits are disjoint.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    n_per_style: usize,
) -> Result<(StyleCorpus, StyleCorpus, SyntheticOracle)> {
    spec.validate()?;
    if n_per_style == 0 {
        return Err(Error::Config("n_per_style must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut oracle = SyntheticOracle::default();
    let mut corpora = [StyleCorpus::new(Style::S1), StyleCorpus::new(Style::S2)];
    for style in Style::ALL {
        let sizes = [n_per_style, spec.dev_size, spec.test_size];
        for (split, &size) in sizes.iter().enumerate() {
            let mut out = Vec::with_capacity(size);
            let mut attempts = 0usize;
            while out.len() < size {
                attempts += 1;
                if attempts > 1000 * size + 10_000 {
                    return Err(Error::Config(format!(
                        "templates cannot produce {size} distinct {style} sentences"
                    )));
                }
                let s = spec.sample(style, &mut rng);
                if seen.insert(s.clone()) {
                    oracle.entries.insert(s.join(" "), spec.annotate(&s));
                    out.push(s);
                }
            }
            let c = &mut corpora[style.index()];
            match split {
                0 => c.train = out,
                1 => c.dev = out,
                _ => c.test = out,
            }
        }
    }
    let [s1, s2] = corpora;
    Ok((s1, s2, oracle))
}
