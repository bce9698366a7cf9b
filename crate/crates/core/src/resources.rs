//! Lexicons and tables shipped with the crate, optionally overridden from a
//! directory.
//!
//! A resource directory may contain any of the files in [`FILES`]; missing
//! files fall back to the bundled copies. The directory is taken from the
//! run configuration or, failing that, from the `OFFDETECT_RESOURCES`
//! environment variable.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{Lexicons, PosLexicon, SentimentLexicon};
use crate::preprocess::{EmojiTable, Preprocessor, SegmenterLexicon};
use crate::tokenize::WordPieceVocab;

pub const RESOURCES_ENV: &str = "OFFDETECT_RESOURCES";

pub const EMOJI: &str = "emoji.tsv";
pub const SEGMENTER_WORDS: &str = "segmenter_words.txt";
pub const SENTIMENT_VALENCE: &str = "sentiment_valence.tsv";
pub const SENTIMENT_NEGATORS: &str = "sentiment_negators.txt";
pub const SENTIMENT_INTENSIFIERS: &str = "sentiment_intensifiers.tsv";
pub const POS_LEXICON: &str = "pos_lexicon.tsv";
pub const POS_SUFFIXES: &str = "pos_suffixes.tsv";
/// Optional WordPiece vocabulary; without it one is built from training text.
pub const VOCAB: &str = "vocab.txt";

pub const FILES: [(&str, &str); 7] = [
    (EMOJI, include_str!("../resources/emoji.tsv")),
    (
        SEGMENTER_WORDS,
        include_str!("../resources/segmenter_words.txt"),
    ),
    (
        SENTIMENT_VALENCE,
        include_str!("../resources/sentiment_valence.tsv"),
    ),
    (
        SENTIMENT_NEGATORS,
        include_str!("../resources/sentiment_negators.txt"),
    ),
    (
        SENTIMENT_INTENSIFIERS,
        include_str!("../resources/sentiment_intensifiers.tsv"),
    ),
    (POS_LEXICON, include_str!("../resources/pos_lexicon.tsv")),
    (POS_SUFFIXES, include_str!("../resources/pos_suffixes.tsv")),
];

fn bundled(name: &str) -> &'static str {
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .unwrap_or("")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resources {
    pub preprocessor: Preprocessor,
    pub lexicons: Lexicons,
    pub vocab: Option<WordPieceVocab>,
}

impl Resources {
    pub fn bundled() -> Self {
        Self::from_source(|name| {
            Ok(FILES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_string()))
        })
        .expect("bundled resources are valid")
    }

    /// Loads from `dir`, falling back to bundled files. A missing directory
    /// is an error.
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "resource directory {} does not exist",
                dir.display()
            )));
        }
        Self::from_source(|name| {
            let path = dir.join(name);
            if path.is_file() {
                fs::read_to_string(&path)
                    .map(Some)
                    .map_err(|e| Error::io(path.display().to_string(), e))
            } else if name == VOCAB {
                Ok(None)
            } else {
                Ok(Some(bundled(name).to_string()))
            }
        })
        .map_err(|e| Error::Config(format!("resources in {}: {e}", dir.display())))
    }

    /// Explicit directory if given, else the environment variable, else bundled.
    pub fn resolve(dir: Option<&Path>) -> Result<Self> {
        match dir.map(Path::to_path_buf).or_else(env_dir) {
            Some(d) => Self::load(&d),
            None => Ok(Self::bundled()),
        }
    }

    fn from_source(read: impl Fn(&str) -> Result<Option<String>>) -> Result<Self> {
        let get = |name: &str| -> Result<String> { Ok(read(name)?.unwrap_or_default()) };
        let emoji = EmojiTable::from_tsv(&get(EMOJI)?).map_err(|e| in_file(EMOJI, e))?;
        let lexicon = SegmenterLexicon::from_lines(&get(SEGMENTER_WORDS)?);
        let mut sentiment = SentimentLexicon::new();
        sentiment
            .load_valences(&get(SENTIMENT_VALENCE)?)
            .map_err(|e| in_file(SENTIMENT_VALENCE, e))?;
        sentiment.load_negators(&get(SENTIMENT_NEGATORS)?);
        sentiment
            .load_intensifiers(&get(SENTIMENT_INTENSIFIERS)?)
            .map_err(|e| in_file(SENTIMENT_INTENSIFIERS, e))?;
        let mut pos = PosLexicon::new();
        pos.load_words(&get(POS_LEXICON)?)
            .map_err(|e| in_file(POS_LEXICON, e))?;
        pos.load_suffixes(&get(POS_SUFFIXES)?)
            .map_err(|e| in_file(POS_SUFFIXES, e))?;
        let vocab = match read(VOCAB)? {
            Some(text) => Some(WordPieceVocab::from_lines(&text).map_err(|e| in_file(VOCAB, e))?),
            None => None,
        };
        Ok(Resources {
            preprocessor: Preprocessor::new(emoji, lexicon),
            lexicons: Lexicons { sentiment, pos },
            vocab,
        })
    }
}

fn env_dir() -> Option<PathBuf> {
    std::env::var_os(RESOURCES_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn in_file(name: &str, e: Error) -> Error {
    Error::Config(format!("{name}: {e}"))
}
