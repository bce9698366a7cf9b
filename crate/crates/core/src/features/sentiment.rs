//! Lexicon-rule sentiment scoring in the style of VADER, reduced to valence
//! lookup, a three-token negation window and intensifier boosts.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalisation constant of the compound score.
pub const COMPOUND_ALPHA: f64 = 15.0;
const NEGATION_WINDOW: usize = 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SentimentLexicon {
    valence: HashMap<String, f64>,
    negators: HashSet<String>,
    intensifiers: HashMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_valence(&mut self, word: &str, valence: f64) -> Result<()> {
        if !(-4.0..=4.0).contains(&valence) {
            return Err(Error::invalid(format!(
                "valence of {word:?} outside [-4, 4]: {valence}"
            )));
        }
        self.valence.insert(word.to_lowercase(), valence);
        Ok(())
    }

    pub fn insert_negator(&mut self, word: &str) {
        self.negators.insert(word.to_lowercase());
    }

    pub fn insert_intensifier(&mut self, word: &str, boost: f64) {
        self.intensifiers.insert(word.to_lowercase(), boost);
    }

    /// `word<TAB>valence` rows.
    pub fn load_valences(&mut self, tsv: &str) -> Result<()> {
        for (idx, word, value) in tsv_pairs(tsv)? {
            let v: f64 = value
                .parse()
                .map_err(|_| Error::parse(idx, format!("bad valence {value:?}")))?;
            self.insert_valence(word, v)
                .map_err(|e| Error::parse(idx, e.to_string()))?;
        }
        Ok(())
    }

    /// One word per line.
    pub fn load_negators(&mut self, text: &str) {
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            self.insert_negator(line);
        }
    }

    /// `word<TAB>boost` rows.
    pub fn load_intensifiers(&mut self, tsv: &str) -> Result<()> {
        for (idx, word, value) in tsv_pairs(tsv)? {
            let b: f64 = value
                .parse()
                .map_err(|_| Error::parse(idx, format!("bad boost {value:?}")))?;
            self.insert_intensifier(word, b);
        }
        Ok(())
    }

    pub fn valence(&self, word: &str) -> Option<f64> {
        self.valence.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.valence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valence.is_empty()
    }

    pub(crate) fn parts(
        &self,
    ) -> (
        &HashMap<String, f64>,
        &HashSet<String>,
        &HashMap<String, f64>,
    ) {
        (&self.valence, &self.negators, &self.intensifiers)
    }
}

pub(crate) fn tsv_pairs(tsv: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (i, line) in tsv.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected two tab-separated columns"))?;
        out.push((i + 1, a.trim(), b.trim()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SentimentScores {
    pub pos: f64,
    pub neg: f64,
    pub neu: f64,
    pub compound: f64,
}

/// Sums per-token valences. A hit is boosted in magnitude by an intensifier
/// right before it and sign-flipped when a negator occurs among the three
/// preceding tokens. `neu` counts tokens without a valence entry.
pub fn sentiment_scores<S: AsRef<str>>(tokens: &[S], lex: &SentimentLexicon) -> SentimentScores {
    let lower: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let mut scores = SentimentScores::default();
    let mut signed_sum = 0.0;
    for (i, tok) in lower.iter().enumerate() {
        let Some(mut v) = lex.valence(tok) else {
            scores.neu += 1.0;
            continue;
        };
        if i > 0 {
            if let Some(boost) = lex.intensifiers.get(&lower[i - 1]) {
                v += boost * v.signum();
            }
        }
        let window = &lower[i.saturating_sub(NEGATION_WINDOW)..i];
        if window.iter().any(|w| lex.negators.contains(w)) {
            v = -v;
        }
        if v > 0.0 {
            scores.pos += v;
        } else {
            scores.neg += v;
        }
        signed_sum += v;
    }
    scores.neg = scores.neg.abs();
    scores.compound = compound(signed_sum);
    scores
}

/// S / sqrt(S^2 + 15).
pub fn compound(signed_sum: f64) -> f64 {
    signed_sum / (signed_sum * signed_sum + COMPOUND_ALPHA).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> SentimentLexicon {
        let mut l = SentimentLexicon::new();
        l.insert_valence("good", 1.9).unwrap();
        l.insert_valence("bad", -2.5).unwrap();
        l.insert_negator("not");
        l.insert_intensifier("very", 0.293);
        l
    }

    #[test]
    fn single_word() {
        let s = sentiment_scores(&["good"], &lex());
        assert!((s.compound - 0.4404).abs() < 1e-4, "{}", s.compound);
        assert_eq!((s.pos, s.neg, s.neu), (1.9, 0.0, 0.0));
    }

    #[test]
    fn empty() {
        let s = sentiment_scores::<&str>(&[], &lex());
        assert_eq!(s, SentimentScores::default());
    }

    #[test]
    fn negation_and_window() {
        let s = sentiment_scores(&["not", "good"], &lex());
        assert!((s.compound + 0.4404).abs() < 1e-4);
        assert!((s.neg - 1.9).abs() < 1e-12);
        assert_eq!(s.neu, 1.0);
        // negator four tokens back is out of the window
        let s = sentiment_scores(&["not", "a", "b", "c", "good"], &lex());
        assert!(s.compound > 0.0);
        let s = sentiment_scores(&["not", "a", "b", "good"], &lex());
        assert!(s.compound < 0.0);
    }

    #[test]
    fn intensifier_boosts_magnitude() {
        let s = sentiment_scores(&["very", "bad"], &lex());
        assert!((s.neg - 2.793).abs() < 1e-12);
        let s = sentiment_scores(&["not", "very", "good"], &lex());
        assert!((s.neg - 2.193).abs() < 1e-12);
    }

    #[test]
    fn lexicon_bounds() {
        let mut l = SentimentLexicon::new();
        assert!(l.insert_valence("x", 4.5).is_err());
        assert!(l.load_valences("good\t1.9\nbad\t-2.5\n").is_ok());
        assert!(l.load_valences("worse\tvery\n").is_err());
    }
}
