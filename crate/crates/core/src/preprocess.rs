//! Twitter-specific normalisation applied before tokenisation: emoji
//! textualisation and hashtag segmentation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Emoji codepoint sequence to `:name:` mapping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmojiTable {
    mapping: HashMap<String, String>,
    longest: usize,
}

impl EmojiTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, emoji: impl Into<String>, name: impl Into<String>) -> Result<()> {
        let emoji = emoji.into();
        let name = name.into();
        if emoji.is_empty() {
            return Err(Error::invalid("empty emoji key"));
        }
        if name.len() < 3
            || !name.is_ascii()
            || !name.starts_with(':')
            || !name.ends_with(':')
            || name.chars().any(char::is_whitespace)
        {
            return Err(Error::invalid(format!(
                "emoji name must be a colon-delimited ASCII word, got {name:?}"
            )));
        }
        self.longest = self.longest.max(emoji.chars().count());
        self.mapping.insert(emoji, name);
        Ok(())
    }

    /// Parses `codepoints<TAB>name` lines; codepoints are space-separated hex
    /// values with an optional `U+` prefix. `#` starts a comment line.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut table = EmojiTable::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (cps, name) = line.split_once('\t').ok_or_else(|| {
                Error::parse(idx + 1, "emoji table row needs codepoints<TAB>name")
            })?;
            let mut emoji = String::new();
            for cp in cps.split_whitespace() {
                let hex = cp.trim_start_matches("U+").trim_start_matches("u+");
                let c = u32::from_str_radix(hex, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| Error::parse(idx + 1, format!("bad codepoint {cp:?}")))?;
                emoji.push(c);
            }
            table
                .insert(emoji, name.trim())
                .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn get(&self, emoji: &str) -> Option<&str> {
        self.mapping.get(emoji).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.mapping.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Ranked word list used to segment lowercase hashtags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmenterLexicon {
    word_rank: HashMap<String, u32>,
    longest: usize,
}

impl SegmenterLexicon {
    /// Rank is the 1-based position in `words`; repeated words keep their first rank.
    pub fn from_ranked<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = SegmenterLexicon::default();
        for (i, w) in words.into_iter().enumerate() {
            let w = w.as_ref().trim().to_lowercase();
            if w.is_empty() {
                continue;
            }
            lex.longest = lex.longest.max(w.chars().count());
            lex.word_rank.entry(w).or_insert(i as u32 + 1);
        }
        lex
    }

    /// Builds from explicit `(word, rank)` pairs.
    pub fn from_ranks<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: AsRef<str>,
    {
        let mut lex = SegmenterLexicon::default();
        for (w, rank) in entries {
            let w = w.as_ref().trim().to_lowercase();
            if w.is_empty() {
                continue;
            }
            lex.longest = lex.longest.max(w.chars().count());
            lex.word_rank.entry(w).or_insert(rank);
        }
        lex
    }

    /// `(word, rank)` pairs ordered by rank, then word.
    pub fn entries(&self) -> Vec<(&str, u32)> {
        let mut v: Vec<(&str, u32)> = self
            .word_rank
            .iter()
            .map(|(w, &r)| (w.as_str(), r))
            .collect();
        v.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
        v
    }

    /// Newline-delimited list, most frequent first.
    pub fn from_lines(text: &str) -> Self {
        Self::from_ranked(text.lines())
    }

    pub fn rank(&self, word: &str) -> Option<u32> {
        self.word_rank.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.word_rank.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.word_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_rank.is_empty()
    }

    /// Minimal-word-count segmentation of a lowercase string, ties broken by
    /// lower summed rank, then by longer leading words. Returns the byte
    /// offsets where each word starts, or `None` if no segmentation exists.
    pub fn segment(&self, word: &str) -> Option<Vec<usize>> {
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        let n = chars.len();
        if n == 0 {
            return None;
        }
        let byte_at = |i: usize| if i == n { word.len() } else { chars[i].0 };
        // best[i] = (word count, rank sum, next boundary) for the suffix starting at char i.
        let mut best: Vec<Option<(usize, u64, usize)>> = vec![None; n + 1];
        best[n] = Some((0, 0, n));
        for i in (0..n).rev() {
            let max_len = self.longest.min(n - i);
            // Longest first, so equal-cost candidates keep the longer leading word.
            for len in (1..=max_len).rev() {
                let j = i + len;
                let Some((count, ranks, _)) = best[j] else {
                    continue;
                };
                let Some(rank) = self.rank(&word[byte_at(i)..byte_at(j)]) else {
                    continue;
                };
                let cand = (count + 1, ranks + rank as u64, j);
                match best[i] {
                    Some((c, r, _)) if (c, r) <= (cand.0, cand.1) => {}
                    _ => best[i] = Some(cand),
                }
            }
        }
        best[0]?;
        let mut starts = Vec::new();
        let mut i = 0;
        while i < n {
            starts.push(byte_at(i));
            i = best[i].expect("reachable suffix").2;
        }
        Some(starts)
    }
}

/// Replaces every known emoji sequence (longest match, leftmost first) with
/// its name padded by single spaces. Unknown emoji are kept.
pub fn replace_emojis(text: &str, table: &EmojiTable) -> String {
    if table.is_empty() {
        return text.to_string();
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| {
        if i == chars.len() {
            text.len()
        } else {
            chars[i].0
        }
    };
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i].1.is_ascii() {
            out.push(chars[i].1);
            i += 1;
            continue;
        }
        let max_len = table.longest.min(chars.len() - i);
        let hit = (1..=max_len).rev().find_map(|len| {
            table
                .get(&text[byte_at(i)..byte_at(i + len)])
                .map(|name| (len, name))
        });
        match hit {
            Some((len, name)) => {
                out.push(' ');
                out.push_str(name);
                out.push(' ');
                i += len;
            }
            None => {
                out.push(chars[i].1);
                i += 1;
            }
        }
    }
    out
}

fn split_tag_pieces(tag: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = tag.char_indices().collect();
    let mut starts = vec![0];
    for k in 1..chars.len() {
        let prev = chars[k - 1].1;
        let cur = chars[k].1;
        let next = chars.get(k + 1).map(|c| c.1);
        let boundary = (prev.is_lowercase() && cur.is_uppercase())
            || (prev.is_alphabetic() && cur.is_numeric())
            || (prev.is_numeric() && cur.is_alphabetic())
            // "USAToday": split before the last capital of an uppercase run.
            || (prev.is_uppercase() && cur.is_uppercase() && next.is_some_and(char::is_lowercase));
        if boundary {
            starts.push(chars[k].0);
        }
    }
    starts.push(tag.len());
    starts.windows(2).map(|w| &tag[w[0]..w[1]]).collect()
}

fn segment_piece(piece: &str, lexicon: &SegmenterLexicon, out: &mut Vec<String>) {
    let lower = piece.to_lowercase();
    // Case mapping that changes byte lengths would break offsets; keep such pieces whole.
    let acronym = piece.chars().skip(1).any(char::is_uppercase);
    if !acronym && lower.len() == piece.len() && piece.chars().all(char::is_alphabetic) {
        if let Some(starts) = lexicon.segment(&lower) {
            let mut bounds = starts;
            bounds.push(piece.len());
            out.extend(bounds.windows(2).map(|w| piece[w[0]..w[1]].to_string()));
            return;
        }
    }
    out.push(piece.to_string());
}

/// Segments the alphanumeric body of a hashtag (without `#`).
///
/// Camel-case and letter/digit boundaries take priority; remaining pieces
/// that are not capitalised words are segmented against the lexicon.
pub fn segment_hashtag(tag: &str, lexicon: &SegmenterLexicon) -> Vec<String> {
    let pieces = split_tag_pieces(tag);
    let mut words = Vec::new();
    if pieces.len() > 1 {
        for p in pieces {
            if p.chars().all(char::is_lowercase) {
                segment_piece(p, lexicon, &mut words);
            } else {
                words.push(p.to_string());
            }
        }
    } else {
        segment_piece(tag, lexicon, &mut words);
    }
    words
}

/// Rewrites every whitespace-delimited token that starts with `#`: the `#` is
/// dropped and the alphanumeric tag body is split into words. Whitespace
/// between tokens is preserved.
pub fn normalize_hashtags(text: &str, lexicon: &SegmenterLexicon) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    let mut rest = text;
    while !rest.is_empty() {
        let ws_end = rest
            .char_indices()
            .find(|(_, c)| !c.is_whitespace())
            .map_or(rest.len(), |(i, _)| i);
        out.push_str(&rest[..ws_end]);
        rest = &rest[ws_end..];
        let tok_end = rest
            .char_indices()
            .find(|(_, c)| c.is_whitespace())
            .map_or(rest.len(), |(i, _)| i);
        let token = &rest[..tok_end];
        rest = &rest[tok_end..];
        match token.strip_prefix('#') {
            Some(body) => {
                let tag_end = body
                    .char_indices()
                    .find(|(_, c)| !c.is_alphanumeric())
                    .map_or(body.len(), |(i, _)| i);
                if tag_end == 0 {
                    out.push_str(token);
                } else {
                    out.push_str(&segment_hashtag(&body[..tag_end], lexicon).join(" "));
                    out.push_str(&body[tag_end..]);
                }
            }
            None => out.push_str(token),
        }
    }
    out
}

/// Collapses whitespace runs to one space and trims both ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Emoji replacement, hashtag normalisation, whitespace collapse.
pub fn preprocess(text: &str, table: &EmojiTable, lexicon: &SegmenterLexicon) -> String {
    let text = replace_emojis(text, table);
    let text = normalize_hashtags(&text, lexicon);
    collapse_whitespace(&text)
}

/// The two resources [`preprocess`] needs, bundled together.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub emoji: EmojiTable,
    pub lexicon: SegmenterLexicon,
}

impl Preprocessor {
    pub fn new(emoji: EmojiTable, lexicon: SegmenterLexicon) -> Self {
        Preprocessor { emoji, lexicon }
    }

    pub fn apply(&self, text: &str) -> String {
        preprocess(text, &self.emoji, &self.lexicon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fire_table() -> EmojiTable {
        let mut t = EmojiTable::new();
        t.insert("🔥", ":fire:").unwrap();
        t
    }

    fn lexicon() -> SegmenterLexicon {
        SegmenterLexicon::from_ranked([
            "hello", "covid", "news", "make", "america", "great", "again",
        ])
    }

    #[test]
    fn emoji_examples() {
        let t = fire_table();
        assert_eq!(replace_emojis("good 🔥", &t), "good  :fire: ");
        assert_eq!(replace_emojis("plain text", &t), "plain text");
        assert_eq!(replace_emojis("🔥🔥", &t), " :fire:  :fire: ");
        assert_eq!(replace_emojis("x 😀 y", &t), "x 😀 y");
    }

    #[test]
    fn emoji_longest_match() {
        let mut t = EmojiTable::new();
        t.insert("👍", ":thumbs_up:").unwrap();
        t.insert("👍🏽", ":thumbs_up_medium_skin_tone:").unwrap();
        assert_eq!(
            replace_emojis("👍🏽👍", &t),
            " :thumbs_up_medium_skin_tone:  :thumbs_up: "
        );
    }

    #[test]
    fn emoji_tsv() {
        let t = EmojiTable::from_tsv(
            "# comment\n1F525\t:fire:\nU+1F44D U+1F3FD\t:thumbs_up_medium_skin_tone:\n",
        )
        .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("🔥"), Some(":fire:"));
        assert_eq!(t.get("👍🏽"), Some(":thumbs_up_medium_skin_tone:"));
        assert!(EmojiTable::from_tsv("1F525\tfire\n").is_err());
        assert!(EmojiTable::from_tsv("ZZZZ\t:x:\n").is_err());
    }

    #[test]
    fn hashtag_examples() {
        let lex = SegmenterLexicon::default();
        assert_eq!(
            normalize_hashtags("#MakeAmericaGreatAgain", &lex),
            "Make America Great Again"
        );
        assert_eq!(normalize_hashtags("#hello", &lexicon()), "hello");
        assert_eq!(
            normalize_hashtags("#covid19news", &lexicon()),
            "covid 19 news"
        );
    }

    #[test]
    fn hashtag_dictionary_segmentation_keeps_case() {
        assert_eq!(
            normalize_hashtags("#Makeamericagreat", &lexicon()),
            "Make america great"
        );
        assert_eq!(normalize_hashtags("#zzqq", &lexicon()), "zzqq");
    }

    #[test]
    fn hashtag_edges() {
        let lex = lexicon();
        assert_eq!(normalize_hashtags("#", &lex), "#");
        assert_eq!(normalize_hashtags("##x", &lex), "##x");
        assert_eq!(normalize_hashtags("#hello!", &lex), "hello!");
        assert_eq!(normalize_hashtags("a#hello", &lex), "a#hello");
        assert_eq!(
            normalize_hashtags("@USER  #USAToday http://t.co", &lex),
            "@USER  USA Today http://t.co"
        );
    }

    #[test]
    fn dp_prefers_fewer_words_then_rank() {
        let lex = SegmenterLexicon::from_ranked(["a", "b", "ab", "abc", "c", "bc"]);
        // "abc" as a single word beats any split.
        assert_eq!(lex.segment("abc"), Some(vec![0]));
        // ab|c (ranks 2+5) vs a|bc (1+6): equal cost, longer leading word wins.
        let lex = SegmenterLexicon::from_ranked(["a", "ab", "x", "y", "c", "bc"]);
        assert_eq!(lex.segment("abc"), Some(vec![0, 2]));
        // a|bc (1+6) beats ab|c (3+5).
        let lex = SegmenterLexicon::from_ranked(["a", "x", "ab", "y", "c", "bc"]);
        assert_eq!(lex.segment("abc"), Some(vec![0, 1]));
        assert_eq!(lex.segment("zz"), None);
    }

    #[test]
    fn preprocess_examples() {
        let t = fire_table();
        let lex = lexicon();
        assert_eq!(preprocess("#Fun 🔥", &t, &lex), "Fun :fire:");
        assert_eq!(preprocess("", &t, &lex), "");
        assert_eq!(
            preprocess("  some   plain\ttext ", &t, &lex),
            "some plain text"
        );
    }
}
