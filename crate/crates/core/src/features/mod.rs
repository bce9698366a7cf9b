//! The baseline feature stack.
//!
//! A [`FeatureVector`] has a dense segment followed by three sparse TF-IDF
//! families. The dense segment is, in order:
//!
//! | index | feature                          |
//! |-------|----------------------------------|
//! | 0     | characters                       |
//! | 1     | words                            |
//! | 2     | syllables                        |
//! | 3     | Flesch-Kincaid grade (0 if no words) |
//! | 4..8  | sentiment pos, neg, neu, compound |
//!
//! Sparse columns follow in family order: word n-grams over stemmed tokens,
//! POS-tag n-grams, character n-grams over the lowercased preprocessed text.

pub mod pos;
pub mod readability;
pub mod sentiment;
pub mod stem;
pub mod tfidf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::{basic_tokenize, is_punctuation, NGramSpec, NGramUnit};

pub use pos::{pos_tag, PosLexicon, PosTag};
pub use readability::{count_syllables, flesch_kincaid, text_counts};
pub use sentiment::{sentiment_scores, SentimentLexicon, SentimentScores};
pub use stem::{Identity, SuffixStemmer, TokenNormalizer};
pub use tfidf::{SparseWeights, TfIdfModel};

pub const DENSE_LEN: usize = 8;

pub const DENSE_NAMES: [&str; DENSE_LEN] = [
    "n_chars",
    "n_words",
    "n_syllables",
    "fk_grade",
    "sent_pos",
    "sent_neg",
    "sent_neu",
    "sent_compound",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerKind {
    #[default]
    Stem,
    Lowercase,
}

impl NormalizerKind {
    pub fn normalizer(self) -> Box<dyn TokenNormalizer> {
        match self {
            NormalizerKind::Stem => Box::new(SuffixStemmer),
            NormalizerKind::Lowercase => Box::new(Identity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub word_n: Vec<usize>,
    pub pos_n: Vec<usize>,
    pub char_n: Vec<usize>,
    pub word_min_df: usize,
    pub pos_min_df: usize,
    pub char_min_df: usize,
    pub normalizer: NormalizerKind,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            word_n: vec![1, 2, 3],
            pos_n: vec![1, 2, 3],
            char_n: vec![1, 2, 3],
            word_min_df: 2,
            pos_min_df: 2,
            char_min_df: 5,
            normalizer: NormalizerKind::Stem,
        }
    }
}

impl FeatureConfig {
    pub fn specs(&self) -> Result<[NGramSpec; 3]> {
        Ok([
            NGramSpec::new(NGramUnit::Word, self.word_n.clone())?,
            NGramSpec::new(NGramUnit::PosTag, self.pos_n.clone())?,
            NGramSpec::new(NGramUnit::Char, self.char_n.clone())?,
        ])
    }
}

/// Sentiment and POS resources.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicons {
    pub sentiment: SentimentLexicon,
    pub pos: PosLexicon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub dense: [f64; DENSE_LEN],
    pub word: SparseWeights,
    pub pos: SparseWeights,
    pub chars: SparseWeights,
}

impl FeatureVector {
    /// Flattens into one sparse row using the column offsets of `layout`.
    /// Zero entries are omitted.
    pub fn to_row(&self, layout: &FeatureLayout) -> Vec<(u32, f64)> {
        let mut row: Vec<(u32, f64)> = self
            .dense
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        for (offset, family) in [
            (layout.word_offset, &self.word),
            (layout.pos_offset, &self.pos),
            (layout.char_offset, &self.chars),
        ] {
            row.extend(family.iter().map(|&(c, w)| (offset + c, w)));
        }
        row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub word_offset: u32,
    pub pos_offset: u32,
    pub char_offset: u32,
    pub n_features: u32,
}

/// Per-text unit sequences for the three families.
struct Units {
    words: Vec<String>,
    tags: Vec<&'static str>,
    text: String,
}

fn units(
    text: &str,
    lexicons: &Lexicons,
    normalizer: &dyn TokenNormalizer,
) -> (Vec<String>, Units) {
    let tokens = basic_tokenize(text, false);
    let tags = pos_tag(&tokens, &lexicons.pos)
        .into_iter()
        .map(PosTag::as_str)
        .collect();
    let words = tokens
        .iter()
        .filter(|t| !t.chars().all(is_punctuation))
        .map(|t| normalizer.normalize(t))
        .collect();
    let u = Units {
        words,
        tags,
        text: text.to_lowercase(),
    };
    (tokens, u)
}

fn dense_segment(text: &str, tokens: &[String], lexicons: &Lexicons) -> [f64; DENSE_LEN] {
    let counts = text_counts(text);
    let grade = if counts.words == 0 {
        0.0
    } else {
        readability::grade_level(&counts)
    };
    let s = sentiment_scores(tokens, &lexicons.sentiment);
    [
        counts.chars as f64,
        counts.words as f64,
        counts.syllables as f64,
        grade,
        s.pos,
        s.neg,
        s.neu,
        s.compound,
    ]
}

/// Builds the feature vector of one (already preprocessed) text from fitted
/// TF-IDF models. No fitting happens here.
pub fn assemble_features(
    text: &str,
    models: [&TfIdfModel; 3],
    lexicons: &Lexicons,
    normalizer: &dyn TokenNormalizer,
) -> Result<FeatureVector> {
    let [word, pos, chars] = models;
    for m in models {
        if m.n_documents == 0 {
            return Err(Error::invalid("TF-IDF model has not been fitted"));
        }
    }
    let (tokens, u) = units(text, lexicons, normalizer);
    Ok(FeatureVector {
        dense: dense_segment(text, &tokens, lexicons),
        word: word.transform(&u.words)?,
        pos: pos.transform(&u.tags)?,
        chars: chars.transform(&[u.text.as_str()])?,
    })
}

/// The three fitted TF-IDF families plus the lexicons they were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer {
    pub config: FeatureConfig,
    pub lexicons: Lexicons,
    pub word: TfIdfModel,
    pub pos: TfIdfModel,
    pub chars: TfIdfModel,
}

impl Featurizer {
    /// Fits all three families on `texts`, which must be the training split only.
    pub fn fit<S: AsRef<str> + Sync>(
        texts: &[S],
        config: FeatureConfig,
        lexicons: Lexicons,
    ) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::invalid("cannot fit features on an empty corpus"));
        }
        let [word_spec, pos_spec, char_spec] = config.specs()?;
        let normalizer = config.normalizer.normalizer();
        let all: Vec<Units> = texts
            .iter()
            .map(|t| units(t.as_ref(), &lexicons, normalizer.as_ref()).1)
            .collect();
        let words: Vec<Vec<&str>> = all
            .iter()
            .map(|u| u.words.iter().map(String::as_str).collect())
            .collect();
        let tags: Vec<Vec<&str>> = all.iter().map(|u| u.tags.clone()).collect();
        let chars: Vec<Vec<&str>> = all.iter().map(|u| vec![u.text.as_str()]).collect();
        let word = TfIdfModel::fit(&words, &word_spec, config.word_min_df)?;
        let pos = TfIdfModel::fit(&tags, &pos_spec, config.pos_min_df)?;
        let chars = TfIdfModel::fit(&chars, &char_spec, config.char_min_df)?;
        Ok(Featurizer {
            config,
            lexicons,
            word,
            pos,
            chars,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        let word_offset = DENSE_LEN as u32;
        let pos_offset = word_offset + self.word.len() as u32;
        let char_offset = pos_offset + self.pos.len() as u32;
        FeatureLayout {
            word_offset,
            pos_offset,
            char_offset,
            n_features: char_offset + self.chars.len() as u32,
        }
    }

    pub fn transform(&self, text: &str) -> Result<FeatureVector> {
        let normalizer = self.config.normalizer.normalizer();
        assemble_features(
            text,
            [&self.word, &self.pos, &self.chars],
            &self.lexicons,
            normalizer.as_ref(),
        )
    }

    /// Human-readable name of a flattened column.
    pub fn column_name(&self, col: u32) -> Option<String> {
        let l = self.layout();
        let c = col as usize;
        if c < DENSE_LEN {
            Some(DENSE_NAMES[c].to_string())
        } else if col < l.pos_offset {
            Some(format!(
                "word:{}",
                self.word.vocabulary()[(col - l.word_offset) as usize]
            ))
        } else if col < l.char_offset {
            Some(format!(
                "pos:{}",
                self.pos.vocabulary()[(col - l.pos_offset) as usize]
            ))
        } else if col < l.n_features {
            Some(format!(
                "char:{}",
                self.chars.vocabulary()[(col - l.char_offset) as usize]
            ))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicons() -> Lexicons {
        let mut l = Lexicons::default();
        l.sentiment.insert_valence("good", 1.9).unwrap();
        l.pos
            .load_words("the\tDET\ncat\tNOUN\nsat\tVERB\n")
            .unwrap();
        l
    }

    fn small_config() -> FeatureConfig {
        FeatureConfig {
            word_min_df: 1,
            pos_min_df: 1,
            char_min_df: 1,
            ..FeatureConfig::default()
        }
    }

    #[test]
    fn dense_prefix_of_fixture() {
        let f =
            Featurizer::fit(&["The cat sat.", "a good dog"], small_config(), lexicons()).unwrap();
        let v = f.transform("The cat sat.").unwrap();
        assert_eq!(&v.dense[..3], &[12.0, 3.0, 3.0]);
        assert!((v.dense[3] + 2.62).abs() < 1e-9);
        assert_eq!(v.dense[6], 4.0);
    }

    #[test]
    fn degenerate_and_deterministic() {
        let f = Featurizer::fit(
            &["The cat sat.", "a good dog"],
            FeatureConfig::default(),
            lexicons(),
        )
        .unwrap();
        let v = f.transform("a.").unwrap();
        assert!(v.dense.iter().all(|x| x.is_finite()));
        assert_eq!(
            f.transform("good cat").unwrap(),
            f.transform("good cat").unwrap()
        );
        let v = f.transform("!!!").unwrap();
        assert_eq!(v.dense[3], 0.0);
    }

    #[test]
    fn flattened_columns_are_in_range() {
        let f = Featurizer::fit(
            &["The cat sat.", "a good dog", "the dog sat"],
            small_config(),
            lexicons(),
        )
        .unwrap();
        let layout = f.layout();
        let row = f.transform("the good cat sat").unwrap().to_row(&layout);
        assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(row.iter().all(|&(c, _)| c < layout.n_features));
        assert_eq!(f.column_name(1).unwrap(), "n_words");
        assert!(f
            .column_name(layout.word_offset)
            .unwrap()
            .starts_with("word:"));
        assert!(f.column_name(layout.n_features).is_none());
    }

    #[test]
    fn word_ngrams_use_stems() {
        let f = Featurizer::fit(&["cats jumped", "cat jump"], small_config(), lexicons()).unwrap();
        assert!(f.word.column("cat").is_some());
        assert!(f.word.column("cats").is_none());
        assert!(f.word.column("jump").is_some());
    }

    #[test]
    fn unfitted_model_rejected() {
        let spec = NGramSpec::default();
        let empty = TfIdfModel::from_parts(vec![], vec![], spec, 1, 0);
        let err = assemble_features("x", [&empty, &empty, &empty], &lexicons(), &Identity);
        assert!(err.is_err());
    }
}
