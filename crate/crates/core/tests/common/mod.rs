//! Independent reference implementations for the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;

use offdetect::rng::SplitMix64;

/// Default-threshold labeling rule on an integer grid: average `a/100`,
/// stdev `s/100`.
pub fn heuristic_on_grid(a: u32, s: u32) -> bool {
    let rule_confident = a > 60;
    let rule_consensus = a > 50 && a <= 60 && s < 10;
    rule_confident || rule_consensus
}

/// Every way to cut `word` into vocabulary pieces (first piece bare, later
/// pieces `##`-prefixed), then the one a greedy longest-first scan would
/// produce: each piece must be the longest vocabulary match at its offset.
pub fn wordpiece_oracle(word: &str, vocab: &HashSet<String>) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let piece = |i: usize, j: usize| {
        let body: String = chars[i..j].iter().collect();
        if i == 0 {
            body
        } else {
            format!("##{body}")
        }
    };
    fn all(
        i: usize,
        n: usize,
        piece: &dyn Fn(usize, usize) -> String,
        vocab: &HashSet<String>,
    ) -> Vec<Vec<(usize, usize)>> {
        if i == n {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for j in i + 1..=n {
            if vocab.contains(&piece(i, j)) {
                for mut rest in all(j, n, piece, vocab) {
                    rest.insert(0, (i, j));
                    out.push(rest);
                }
            }
        }
        out
    }
    let longest_at = |i: usize| {
        (i + 1..=chars.len())
            .rev()
            .find(|&j| vocab.contains(&piece(i, j)))
    };
    let greedy: Vec<_> = all(0, chars.len(), &piece, vocab)
        .into_iter()
        .filter(|seg| seg.iter().all(|&(i, j)| longest_at(i) == Some(j)))
        .collect();
    assert!(
        greedy.len() <= 1,
        "two greedy-consistent segmentations of {word}"
    );
    match greedy.first() {
        Some(seg) => seg.iter().map(|&(i, j)| piece(i, j)).collect(),
        None => vec!["[UNK]".to_string()],
    }
}

/// Minimal number of lexicon words covering `word`, by exhaustive search.
pub fn min_segmentation_words(word: &str, lexicon: &HashSet<String>) -> Option<usize> {
    fn go(rest: &str, lex: &HashSet<String>) -> Option<usize> {
        if rest.is_empty() {
            return Some(0);
        }
        rest.char_indices()
            .map(|(i, c)| i + c.len_utf8())
            .filter(|&j| lex.contains(&rest[..j]))
            .filter_map(|j| go(&rest[j..], lex).map(|k| k + 1))
            .min()
    }
    if word.is_empty() {
        None
    } else {
        go(word, lexicon)
    }
}

/// `(tp, fp, fn, tn)` by direct counting.
pub fn recount(pred: &[bool], gold: &[bool]) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for i in 0..pred.len() {
        if pred[i] && gold[i] {
            c.0 += 1;
        }
        if pred[i] && !gold[i] {
            c.1 += 1;
        }
        if !pred[i] && gold[i] {
            c.2 += 1;
        }
        if !pred[i] && !gold[i] {
            c.3 += 1;
        }
    }
    c
}

/// A random vocabulary of special tokens plus up to `n` pieces over a small
/// alphabet, and a random word over the same alphabet.
pub fn random_wordpiece_case(rng: &mut SplitMix64, n: usize) -> (Vec<String>, String) {
    let alphabet = ['a', 'b', 'c', 'd'];
    let rand_str = |rng: &mut SplitMix64, max: usize| -> String {
        let len = 1 + rng.below(max);
        (0..len).map(|_| alphabet[rng.below(4)]).collect()
    };
    let mut tokens: Vec<String> = ["[CLS]", "[SEP]", "[PAD]", "[UNK]"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut seen: HashSet<String> = tokens.iter().cloned().collect();
    for _ in 0..n {
        let s = rand_str(rng, 4);
        let t = if rng.bernoulli(0.5) {
            format!("##{s}")
        } else {
            s
        };
        if seen.insert(t.clone()) {
            tokens.push(t);
        }
    }
    let word = rand_str(rng, 10);
    (tokens, word)
}
