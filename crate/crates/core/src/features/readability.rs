//! Character, word and syllable counts and the Flesch-Kincaid grade level.

use crate::error::{Error, Result};
use crate::tokenize::basic_tokenize;

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group count with a silent-final-`e` correction; at least 1.
///
/// The final `e` is not subtracted after a consonant + `l` ("table",
/// "readable"), where it carries its own syllable.
pub fn count_syllables(word: &str) -> Result<usize> {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if letters.is_empty() {
        return Err(Error::invalid(format!("{word:?} contains no letters")));
    }
    let mut groups = 0;
    let mut in_group = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = letters.len();
    let silent_e = n >= 2
        && letters[n - 1] == 'e'
        && !is_vowel(letters[n - 2])
        && !(n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]));
    if silent_e && groups > 1 {
        groups -= 1;
    }
    Ok(groups.max(1))
}

/// Counts used by the dense feature segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextCounts {
    pub chars: usize,
    pub words: usize,
    pub syllables: usize,
    pub sentences: usize,
}

/// A word is a token containing at least one letter.
pub fn text_counts(text: &str) -> TextCounts {
    let mut words = 0;
    let mut syllables = 0;
    for tok in basic_tokenize(text, false) {
        if let Ok(s) = count_syllables(&tok) {
            words += 1;
            syllables += s;
        }
    }
    TextCounts {
        chars: text.chars().count(),
        words,
        syllables,
        sentences: sentence_count(text),
    }
}

/// Number of maximal runs of `.`, `!` or `?`; at least 1.
pub fn sentence_count(text: &str) -> usize {
    let mut runs = 0;
    let mut in_run = false;
    for c in text.chars() {
        let terminal = matches!(c, '.' | '!' | '?');
        if terminal && !in_run {
            runs += 1;
        }
        in_run = terminal;
    }
    runs.max(1)
}

/// Grade level: 0.39 * words/sentences + 11.8 * syllables/words - 15.59.
pub fn flesch_kincaid(text: &str) -> Result<f64> {
    let c = text_counts(text);
    if c.words == 0 {
        return Err(Error::invalid("flesch-kincaid needs at least one word"));
    }
    Ok(grade_level(&c))
}

pub(crate) fn grade_level(c: &TextCounts) -> f64 {
    0.39 * (c.words as f64 / c.sentences as f64) + 11.8 * (c.syllables as f64 / c.words as f64)
        - 15.59
}
