//! Tokenization, vocabulary construction and corpus loading.
//!
//! Corpora are whitespace-tokenized and lowercased at load time. A corpus
//! root holds one directory per style (`s1/`, `s2/`), each with
//! `train.txt`, `dev.txt` and `test.txt`, one sentence per line.

mod synthetic;
mod vocab;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synthetic::{generate_synthetic, OracleEntry, SyntheticOracle, SyntheticSpec};
pub use vocab::{build_vocab, Vocab, BOS, EOS, PAD, UNK};

pub type TokenId = u32;

/// One of the two styles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Style {
    #[serde(rename = "s1")]
    S1,
    #[serde(rename = "s2")]
    S2,
}

impl Style {
    pub const ALL: [Style; 2] = [Style::S1, Style::S2];

    pub fn index(self) -> usize {
        match self {
            Style::S1 => 0,
            Style::S2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Style {
        if i == 0 {
            Style::S1
        } else {
            Style::S2
        }
    }

    pub fn opposite(self) -> Style {
        match self {
            Style::S1 => Style::S2,
            Style::S2 => Style::S1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Style::S1 => "s1",
            Style::S2 => "s2",
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Style {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(Style::S1),
            "s2" => Ok(Style::S2),
            other => Err(Error::Config(format!("unknown style {other:?}"))),
        }
    }
}

/// Transfer direction, named by its source style.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "s1-to-s2")]
    S1ToS2,
    #[serde(rename = "s2-to-s1")]
    S2ToS1,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::S1ToS2, Direction::S2ToS1];

    pub fn from_source(source: Style) -> Direction {
        match source {
            Style::S1 => Direction::S1ToS2,
            Style::S2 => Direction::S2ToS1,
        }
    }

    pub fn source(self) -> Style {
        match self {
            Direction::S1ToS2 => Style::S1,
            Direction::S2ToS1 => Style::S2,
        }
    }

    pub fn target(self) -> Style {
        self.source().opposite()
    }

    pub fn reverse(self) -> Direction {
        Direction::from_source(self.target())
    }

    pub fn index(self) -> usize {
        self.source().index()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::S1ToS2 => "s1-to-s2",
            Direction::S2ToS1 => "s2-to-s1",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1-to-s2" => Ok(Direction::S1ToS2),
            "s2-to-s1" => Ok(Direction::S2ToS1),
            other => Err(Error::Config(format!(
                "unknown direction {other:?} (expected s1-to-s2 or s2-to-s1)"
            ))),
        }
    }
}

/// A non-empty sequence of token ids tagged with its style.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<TokenId>,
    style: Style,
}

impl Sentence {
    pub fn new(tokens: Vec<TokenId>, style: Style) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        Ok(Sentence { tokens, style })
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn style(&self) -> Style {
        self.style
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn with_tokens(&self, tokens: Vec<TokenId>) -> Result<Self> {
        Sentence::new(tokens, self.style)
    }

    pub fn with_style(mut self, style: Style) -> Self {
        self.style = style;
        self
    }
}

/// Whitespace tokenization with case folding.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(|t| t.to_lowercase()).collect()
}

/// Text-level corpus for one style, as loaded from disk or generated.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StyleCorpus {
    pub style: Option<Style>,
    pub train: Vec<Vec<String>>,
    pub dev: Vec<Vec<String>>,
    pub test: Vec<Vec<String>>,
    /// Blank lines skipped while loading.
    #[serde(default)]
    pub skipped_blank: usize,
}

/// A corpus whose splits have been mapped through a [`Vocab`].
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedCorpus {
    pub style: Style,
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
}

impl StyleCorpus {
    pub fn new(style: Style) -> Self {
        StyleCorpus {
            style: Some(style),
            ..Default::default()
        }
    }

    pub fn style(&self) -> Style {
        self.style.unwrap_or(Style::S1)
    }

    pub fn splits(&self) -> [(&'static str, &Vec<Vec<String>>); 3] {
        [("train", &self.train), ("dev", &self.dev), ("test", &self.test)]
    }

    pub fn encode(&self, vocab: &Vocab) -> Result<EncodedCorpus> {
        let style = self.style();
        let enc = |split: &Vec<Vec<String>>| -> Result<Vec<Sentence>> {
            split
                .iter()
                .map(|toks| vocab.encode(toks, style))
                .collect()
        };
        Ok(EncodedCorpus {
            style,
            train: enc(&self.train)?,
            dev: enc(&self.dev)?,
            test: enc(&self.test)?,
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, split) in self.splits() {
            let mut text = String::new();
            for s in split {
                text.push_str(&s.join(" "));
                text.push('\n');
            }
            fs::write(dir.join(format!("{name}.txt")), text)?;
        }
        Ok(())
    }
}

/// Reads a one-sentence-per-line file. Blank lines are skipped and counted.
pub fn read_sentences(path: &Path) -> Result<(Vec<Vec<String>>, usize)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    let mut blank = 0;
    for line in text.lines() {
        let toks = tokenize(line);
        if toks.is_empty() {
            blank += 1;
        } else {
            out.push(toks);
        }
    }
    Ok((out, blank))
}

/// Loads `dir/{train,dev,test}.txt` for one style.
pub fn load_corpus(dir: &Path, style: Style) -> Result<StyleCorpus> {
    let mut corpus = StyleCorpus::new(style);
    let mut blank = 0;
    for name in ["train", "dev", "test"] {
        let (sents, b) = read_sentences(&dir.join(format!("{name}.txt")))?;
        blank += b;
        match name {
            "train" => corpus.train = sents,
            "dev" => corpus.dev = sents,
            _ => corpus.test = sents,
        }
    }
    if blank > 0 {
        log::warn!("{}: skipped {blank} blank line(s)", dir.display());
    }
    corpus.skipped_blank = blank;
    Ok(corpus)
}

/// Loads both styles from `<root>/s1` and `<root>/s2`.
pub fn load_corpora(root: &Path) -> Result<[StyleCorpus; 2]> {
    Ok([
        load_corpus(&root.join("s1"), Style::S1)?,
        load_corpus(&root.join("s2"), Style::S2)?,
    ])
}
