//! Token normalisers applied before word n-grams.

/// Maps a token to the form used for word n-gram identity.
pub trait TokenNormalizer: Send + Sync {
    fn normalize(&self, token: &str) -> String;
}

/// Lowercases only.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl TokenNormalizer for Identity {
    fn normalize(&self, token: &str) -> String {
        token.to_lowercase()
    }
}

/// Lowercasing suffix stripper: a subset of Porter step 1 (`-ing`, `-ed`,
/// `-ly`, plural `-s`). Every rule leaves a stem of at least three chars.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuffixStemmer;

const MIN_STEM: usize = 3;

impl TokenNormalizer for SuffixStemmer {
    fn normalize(&self, token: &str) -> String {
        let lower = token.to_lowercase();
        if !lower.chars().all(char::is_alphabetic) {
            return lower;
        }
        for suffix in ["ing", "ed", "ly"] {
            if let Some(stem) = lower.strip_suffix(suffix) {
                if stem.chars().count() >= MIN_STEM {
                    return stem.to_string();
                }
            }
        }
        if let Some(stem) = lower.strip_suffix('s') {
            if !stem.ends_with('s') && !stem.ends_with('u') && stem.chars().count() >= MIN_STEM {
                return stem.to_string();
            }
        }
        lower
    }
}
