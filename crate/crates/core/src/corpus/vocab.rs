use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Sentence, Style, StyleCorpus, TokenId};
use crate::error::{Error, Result};

pub const PAD: &str = "⟨pad⟩";
pub const UNK: &str = "⟨unk⟩";
pub const BOS: &str = "⟨bos⟩";
pub const EOS: &str = "⟨eos⟩";

const RESERVED: [&str; 4] = [PAD, UNK, BOS, EOS];

/// Word-level vocabulary. Reserved tokens occupy ids 0..4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
    min_freq: usize,
}

impl Vocab {
    pub const PAD_ID: TokenId = 0;
    pub const UNK_ID: TokenId = 1;
    pub const BOS_ID: TokenId = 2;
    pub const EOS_ID: TokenId = 3;
    pub const NUM_RESERVED: usize = RESERVED.len();

    fn from_tokens(tokens: impl IntoIterator<Item = String>, min_freq: usize) -> Self {
        let mut id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(tokens);
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Vocab {
            token_to_id,
            id_to_token,
            min_freq,
        }
    }

    /// Vocabulary over `words` in the given order, after the reserved ids.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for w in words {
            let w = w.as_ref();
            if RESERVED.contains(&w) || !seen.insert(w) {
                return Err(Error::Config(format!("duplicate or reserved vocabulary entry {w:?}")));
            }
        }
        Ok(Self::from_tokens(words.iter().map(|w| w.as_ref().to_string()), 1))
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn unk_id(&self) -> TokenId {
        Self::UNK_ID
    }

    pub fn pad_id(&self) -> TokenId {
        Self::PAD_ID
    }

    pub fn bos_id(&self) -> TokenId {
        Self::BOS_ID
    }

    pub fn eos_id(&self) -> TokenId {
        Self::EOS_ID
    }

    pub fn is_reserved(id: TokenId) -> bool {
        (id as usize) < Self::NUM_RESERVED
    }

    /// Maps a token to its id. Unknown tokens and the pseudo-tokens
    /// pad/bos/eos map to the unk id.
    pub fn id(&self, token: &str) -> TokenId {
        match self.token_to_id.get(token) {
            Some(&id) if id == Self::UNK_ID || !Self::is_reserved(id) => id,
            _ => Self::UNK_ID,
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id
            .get(token)
            .is_some_and(|&id| !Self::is_reserved(id))
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.id_to_token
            .get(id as usize)
            .map(String::as_str)
            .unwrap_or(UNK)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn encode<S: AsRef<str>>(&self, text: &[S], style: Style) -> Result<Sentence> {
        if text.is_empty() {
            return Err(Error::EmptySentence);
        }
        let ids = text.iter().map(|t| self.id(t.as_ref())).collect();
        Sentence::new(ids, style)
    }

    pub fn decode(&self, sentence: &Sentence) -> Vec<String> {
        self.decode_ids(sentence.tokens())
    }

    pub fn decode_ids(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&id| self.token(id).to_string()).collect()
    }

    /// Hex SHA-256 over the token list; stored in checkpoints to detect
    /// vocabulary mismatches.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.id_to_token {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for t in &self.id_to_token {
            text.push_str(t);
            text.push('\n');
        }
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let lines: Vec<&str> = text.lines().collect();
        for (i, r) in RESERVED.iter().enumerate() {
            if lines.get(i) != Some(r) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected reserved token {r}"),
                });
            }
        }
        let rest: Vec<String> = lines[RESERVED.len()..]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut seen = std::collections::HashSet::new();
        for (i, t) in rest.iter().enumerate() {
            if t.is_empty() || !seen.insert(t.as_str()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + RESERVED.len() + 1,
                    msg: format!("empty or duplicate token {t:?}"),
                });
            }
        }
        Ok(Vocab::from_tokens(rest, 0))
    }
}

/// Builds a vocabulary from the train splits. Ordering is frequency
/// descending, then lexicographic.
pub fn build_vocab(corpora: &[&StyleCorpus], min_freq: usize) -> Result<Vocab> {
    if corpora.is_empty() {
        return Err(Error::Config("build_vocab needs at least one corpus".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for c in corpora {
        for s in &c.train {
            for t in s {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, n)| n >= min_freq.max(1) && !RESERVED.contains(&t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocab::from_tokens(
        kept.into_iter().map(|(t, _)| t.to_string()),
        min_freq,
    ))
}
