//! Lexicon + suffix-rule part-of-speech tagger over a closed tagset.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::sentiment::tsv_pairs;
use crate::tokenize::is_punctuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Det,
    Adp,
    Num,
    Punct,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; 10] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Num,
        PosTag::Punct,
        PosTag::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Num => "NUM",
            PosTag::Punct => "PUNCT",
            PosTag::X => "X",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PosTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown POS tag {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosLexicon {
    words: HashMap<String, PosTag>,
    suffixes: Vec<(String, PosTag)>,
}

impl PosLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_word(&mut self, word: &str, tag: PosTag) {
        self.words.insert(word.to_lowercase(), tag);
    }

    /// Rules are tried in insertion order.
    pub fn push_suffix(&mut self, suffix: &str, tag: PosTag) {
        self.suffixes.push((suffix.to_lowercase(), tag));
    }

    /// `word<TAB>TAG` rows.
    pub fn load_words(&mut self, tsv: &str) -> Result<()> {
        for (idx, word, tag) in tsv_pairs(tsv)? {
            let tag = tag
                .parse()
                .map_err(|e: Error| Error::parse(idx, e.to_string()))?;
            self.insert_word(word, tag);
        }
        Ok(())
    }

    /// `suffix<TAB>TAG` rows, in priority order.
    pub fn load_suffixes(&mut self, tsv: &str) -> Result<()> {
        for (idx, suffix, tag) in tsv_pairs(tsv)? {
            let tag = tag
                .parse()
                .map_err(|e: Error| Error::parse(idx, e.to_string()))?;
            self.push_suffix(suffix, tag);
        }
        Ok(())
    }

    pub(crate) fn parts(&self) -> (&HashMap<String, PosTag>, &[(String, PosTag)]) {
        (&self.words, &self.suffixes)
    }

    fn tag_one(&self, token: &str) -> PosTag {
        let lower = token.to_lowercase();
        if let Some(&t) = self.words.get(&lower) {
            return t;
        }
        if !token.is_empty() && token.chars().all(is_punctuation) {
            return PosTag::Punct;
        }
        if !token.is_empty()
            && token
                .chars()
                .all(|c| c.is_ascii_digit() || c == '.' || c == ',')
            && token.chars().any(|c| c.is_ascii_digit())
        {
            return PosTag::Num;
        }
        for (suffix, tag) in &self.suffixes {
            if lower.len() > suffix.len() && lower.ends_with(suffix.as_str()) {
                return *tag;
            }
        }
        PosTag::X
    }
}

/// Lexicon lookup, then punctuation/number rules, then the first matching
/// suffix rule, else `X`.
pub fn pos_tag<S: AsRef<str>>(tokens: &[S], lex: &PosLexicon) -> Vec<PosTag> {
    tokens.iter().map(|t| lex.tag_one(t.as_ref())).collect()
}
