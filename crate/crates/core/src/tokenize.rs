//! Basic word/punctuation splitting, greedy longest-match WordPiece and
//! n-gram extraction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";
pub const PAD_TOKEN: &str = "[PAD]";
pub const UNK_TOKEN: &str = "[UNK]";

/// Words longer than this (in chars) map straight to the unknown token.
pub const MAX_WORD_CHARS: usize = 100;

/// Joins the units of a word or POS n-gram (U+241F SYMBOL FOR UNIT SEPARATOR).
pub const NGRAM_SEPARATOR: char = '\u{241F}';

pub fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32,
            0x00A1..=0x00BF | 0x2010..=0x2027 | 0x2030..=0x205E | 0x3000..=0x303F | 0xFF01..=0xFF0F)
}

/// Splits on whitespace and makes every punctuation character its own token.
pub fn basic_tokenize(text: &str, lowercase: bool) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    if lowercase {
        for t in &mut tokens {
            *t = t.to_lowercase();
        }
    }
    tokens
}

/// Token-to-id table for WordPiece. Ids are dense, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct WordPieceVocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    pub continuation_prefix: String,
    pub unk_token: String,
    pub lowercase: bool,
}

impl WordPieceVocab {
    /// Builds a vocabulary from tokens in id order. The special tokens
    /// `[CLS]`, `[SEP]`, `[PAD]` and `[UNK]` must be present.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::invalid(format!("empty vocabulary entry at id {i}")));
            }
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        for special in [CLS_TOKEN, SEP_TOKEN, PAD_TOKEN, UNK_TOKEN] {
            if !ids.contains_key(special) {
                return Err(Error::invalid(format!(
                    "vocabulary lacks special token {special}"
                )));
            }
        }
        Ok(WordPieceVocab {
            tokens,
            ids,
            continuation_prefix: "##".to_string(),
            unk_token: UNK_TOKEN.to_string(),
            lowercase: true,
        })
    }

    /// One token per line; id = zero-based line number.
    pub fn from_lines(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(|l| l.trim_end_matches('\r').to_string())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn to_lines(&self) -> String {
        let mut out = self.tokens.join("\n");
        out.push('\n');
        out
    }

    /// Whole-word vocabulary over a training corpus: every word seen at least
    /// `min_count` times (most frequent first, capped at `max_words`), plus
    /// every character both as a word start and as a `##` continuation, so
    /// any word built from seen characters tokenises without `[UNK]`.
    pub fn from_corpus<'a, I>(words: I, min_count: usize, max_words: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut chars = BTreeMap::new();
        for w in words {
            *counts.entry(w).or_default() += 1;
            for c in w.chars() {
                chars.entry(c).or_insert(());
            }
        }
        let mut frequent: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(w, c)| c >= min_count && w.chars().count() > 1)
            .collect();
        frequent.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        frequent.truncate(max_words);

        let mut tokens: Vec<String> = [PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for c in chars.keys() {
            tokens.push(c.to_string());
        }
        for c in chars.keys() {
            tokens.push(format!("##{c}"));
        }
        for (w, _) in frequent {
            if !tokens.iter().any(|t| t == w) {
                tokens.push(w.to_string());
            }
        }
        Self::new(tokens).expect("generated vocabulary is well-formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn special_id(&self, token: &str) -> u32 {
        self.id(token)
            .expect("special tokens are validated at construction")
    }

    pub fn cls_id(&self) -> u32 {
        self.special_id(CLS_TOKEN)
    }

    pub fn sep_id(&self) -> u32 {
        self.special_id(SEP_TOKEN)
    }

    pub fn pad_id(&self) -> u32 {
        self.special_id(PAD_TOKEN)
    }

    pub fn unk_id(&self) -> u32 {
        self.special_id(&self.unk_token)
    }

    /// `[CLS]` + WordPiece ids of the basic tokens + `[SEP]`, truncated to
    /// `max_len` while keeping the trailing `[SEP]`.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<u32> {
        let mut ids = vec![self.cls_id()];
        'outer: for word in basic_tokenize(text, self.lowercase) {
            for piece in wordpiece_tokenize(&word, self) {
                if ids.len() + 1 >= max_len {
                    break 'outer;
                }
                ids.push(self.id(&piece).unwrap_or_else(|| self.unk_id()));
            }
        }
        ids.push(self.sep_id());
        ids
    }
}

/// Greedy longest-match-first WordPiece. If any position has no matching
/// piece the whole word becomes `[UNK]`.
pub fn wordpiece_tokenize(word: &str, v: &WordPieceVocab) -> Vec<String> {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    if chars.len() > MAX_WORD_CHARS {
        return vec![v.unk_token.clone()];
    }
    let byte_at = |i: usize| {
        if i == chars.len() {
            word.len()
        } else {
            chars[i].0
        }
    };
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while end > start {
            candidate.clear();
            if start > 0 {
                candidate.push_str(&v.continuation_prefix);
            }
            candidate.push_str(&word[byte_at(start)..byte_at(end)]);
            if v.contains(&candidate) {
                found = Some(candidate.clone());
                break;
            }
            end -= 1;
        }
        match found {
            Some(piece) => {
                pieces.push(piece);
                start = end;
            }
            None => return vec![v.unk_token.clone()],
        }
    }
    pieces
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NGramUnit {
    Word,
    PosTag,
    Char,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramSpec {
    pub unit: NGramUnit,
    pub n_values: Vec<usize>,
}

impl NGramSpec {
    pub fn new(unit: NGramUnit, n_values: Vec<usize>) -> Result<Self> {
        let spec = NGramSpec { unit, n_values };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::invalid("n-gram spec needs at least one n"));
        }
        if self.n_values.contains(&0) {
            return Err(Error::invalid("n-gram sizes must be >= 1"));
        }
        Ok(())
    }
}

impl Default for NGramSpec {
    fn default() -> Self {
        NGramSpec {
            unit: NGramUnit::Word,
            n_values: vec![1, 2, 3],
        }
    }
}

/// All contiguous n-grams for each n in the spec, with multiplicity.
///
/// Word and POS n-grams join their units with [`NGRAM_SEPARATOR`]. Char
/// n-grams slide over the units joined by single spaces (the word-boundary
/// marker) and are emitted as plain substrings.
pub fn extract_ngrams<S: AsRef<str>>(units: &[S], spec: &NGramSpec) -> Result<Vec<String>> {
    spec.validate()?;
    let mut out = Vec::new();
    match spec.unit {
        NGramUnit::Char => {
            let joined: Vec<char> = units
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(" ")
                .chars()
                .collect();
            for &n in &spec.n_values {
                if n <= joined.len() {
                    out.extend(joined.windows(n).map(|w| w.iter().collect::<String>()));
                }
            }
        }
        NGramUnit::Word | NGramUnit::PosTag => {
            let sep = NGRAM_SEPARATOR.to_string();
            for &n in &spec.n_values {
                if n <= units.len() {
                    out.extend(
                        units
                            .windows(n)
                            .map(|w| w.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(&sep)),
                    );
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(extra: &[&str]) -> WordPieceVocab {
        let mut t: Vec<String> = [PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .collect();
        t.extend(extra.iter().map(|s| s.to_string()));
        WordPieceVocab::new(t).unwrap()
    }

    #[test]
    fn basic_examples() {
        assert_eq!(
            basic_tokenize("Hello, world!", true),
            vec!["hello", ",", "world", "!"]
        );
        assert!(basic_tokenize("", true).is_empty());
        assert_eq!(basic_tokenize("a  b", false), vec!["a", "b"]);
        assert_eq!(
            basic_tokenize("Fun :fire:", false),
            vec!["Fun", ":", "fire", ":"]
        );
    }

    #[test]
    fn wordpiece_examples() {
        let v = vocab(&["un", "able", "##able"]);
        assert_eq!(wordpiece_tokenize("unable", &v), vec!["un", "##able"]);
        assert_eq!(wordpiece_tokenize("able", &v), vec!["able"]);
        assert_eq!(wordpiece_tokenize("xyz", &v), vec!["[UNK]"]);
        // dead end after a greedy match
        assert_eq!(wordpiece_tokenize("unx", &v), vec!["[UNK]"]);
    }

    #[test]
    fn long_words_are_unknown() {
        let v = vocab(&["a", "##a"]);
        assert_eq!(wordpiece_tokenize(&"a".repeat(100), &v).len(), 100);
        assert_eq!(wordpiece_tokenize(&"a".repeat(101), &v), vec!["[UNK]"]);
    }

    #[test]
    fn vocab_requires_specials() {
        assert!(WordPieceVocab::new(vec!["[CLS]".into(), "[SEP]".into()]).is_err());
        assert!(WordPieceVocab::from_lines("[PAD]\n[UNK]\n[CLS]\n[SEP]\nhello\n").is_ok());
        assert!(WordPieceVocab::from_lines("[PAD]\n[UNK]\n[CLS]\n[SEP]\n[SEP]\n").is_err());
    }

    #[test]
    fn corpus_vocab_covers_seen_characters() {
        let v = WordPieceVocab::from_corpus(["hello", "hello", "world"], 2, 100);
        assert_eq!(wordpiece_tokenize("hello", &v), vec!["hello"]);
        assert_eq!(
            wordpiece_tokenize("world", &v),
            vec!["w", "##o", "##r", "##l", "##d"]
        );
        assert_eq!(wordpiece_tokenize("lower", &v).len(), 5);
    }

    #[test]
    fn encode_truncates_keeping_sep() {
        let v = vocab(&["a", "b"]);
        let ids = v.encode("a b a b a b", 4);
        assert_eq!(ids.len(), 4);
        assert_eq!(ids[0], v.cls_id());
        assert_eq!(ids[3], v.sep_id());
        assert_eq!(v.encode("", 8), vec![v.cls_id(), v.sep_id()]);
    }

    #[test]
    fn ngram_examples() {
        let s = |n: Vec<usize>, unit| NGramSpec { unit, n_values: n };
        let sep = NGRAM_SEPARATOR;
        assert_eq!(
            extract_ngrams(&["a", "b", "c"], &s(vec![2], NGramUnit::Word)).unwrap(),
            vec![format!("a{sep}b"), format!("b{sep}c")]
        );
        assert!(extract_ngrams(&["a"], &s(vec![2], NGramUnit::Word))
            .unwrap()
            .is_empty());
        let mut chars = extract_ngrams(&["ab"], &s(vec![1, 2], NGramUnit::Char)).unwrap();
        chars.sort();
        assert_eq!(chars, vec!["a", "ab", "b"]);
        assert_eq!(
            extract_ngrams(&["ab", "c"], &s(vec![3], NGramUnit::Char)).unwrap(),
            vec!["ab ", "b c"]
        );
        assert!(extract_ngrams(&["a"], &s(vec![], NGramUnit::Word)).is_err());
    }
}
