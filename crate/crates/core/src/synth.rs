//! Synthetic labeled tweets with planted offensive cues.
//!
//! Texts are bags of pseudo-words of geometric length. Each sample has four
//! independent cue channels: marker words, a cue emoji, a camel-case cue
//! hashtag led by a cue-tag word, and an exclamation burst. A channel is
//! present iff the sample is positive, except that each channel is flipped
//! independently with probability `noise_rate`. With `noise_rate = 0`
//! marker presence alone separates the classes.
//!
//! Benign hashtags, emoji and `@USER` mentions appear in both classes so
//! every preprocessing branch is exercised.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{write_labeled_tsv, Dataset, Label, Sample};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub positive_ratio: f64,
    pub language: String,
    pub offensive_marker_words: Vec<String>,
    pub benign_vocabulary: Vec<String>,
    /// Leading words of cue hashtags; disjoint from both vocabularies.
    pub cue_tag_words: Vec<String>,
    pub noise_rate: f64,
    pub seed: u64,
    pub mean_length: f64,
    pub cue_emoji: Vec<String>,
    pub benign_emoji: Vec<String>,
    pub benign_hashtags: Vec<String>,
}

const N_CUE_TAGS: usize = 4;
const CUE_EMOJI: [&str; 4] = ["🤬", "🖕", "😡", "💩"];
const BENIGN_EMOJI: [&str; 8] = ["😊", "🎉", "☕", "⚽", "😂", "👍", "🌈", "🔥"];
const BENIGN_HASHTAGS: [&str; 8] = [
    "MondayMotivation",
    "goodmorning",
    "news",
    "Football2020",
    "happybirthday",
    "ThrowbackThursday",
    "weekend",
    "covid19news",
];

/// Sizes and knobs for [`SynthSpec::for_language`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub n_samples: usize,
    pub positive_ratio: f64,
    pub noise_rate: f64,
    pub seed: u64,
    pub n_markers: usize,
    pub n_benign: usize,
    pub mean_length: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            n_samples: 3000,
            positive_ratio: 0.2,
            noise_rate: 0.1,
            seed: 0,
            n_markers: 4,
            n_benign: 400,
            mean_length: 12.0,
        }
    }
}

impl SynthSpec {
    /// A spec with pseudo-word vocabularies specific to `language`.
    pub fn for_language(language: &str, opts: &SynthOptions) -> Self {
        let mut words = pseudo_words(language, opts.n_markers + N_CUE_TAGS + opts.n_benign);
        let benign = words.split_off(opts.n_markers + N_CUE_TAGS);
        let tags = words.split_off(opts.n_markers);
        SynthSpec {
            n_samples: opts.n_samples,
            positive_ratio: opts.positive_ratio,
            language: language.to_string(),
            offensive_marker_words: words,
            benign_vocabulary: benign,
            cue_tag_words: tags,
            noise_rate: opts.noise_rate,
            seed: opts.seed,
            mean_length: opts.mean_length,
            cue_emoji: CUE_EMOJI.iter().map(|s| s.to_string()).collect(),
            benign_emoji: BENIGN_EMOJI.iter().map(|s| s.to_string()).collect(),
            benign_hashtags: BENIGN_HASHTAGS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synth: {m}")));
        if self.n_samples < 10 {
            return bad("n_samples must be >= 10".into());
        }
        if !(self.positive_ratio > 0.0 && self.positive_ratio < 1.0) {
            return bad("positive_ratio must be in (0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return bad("noise_rate must be in [0, 1)".into());
        }
        if !(self.mean_length >= 1.0) {
            return bad("mean_length must be >= 1".into());
        }
        if self.offensive_marker_words.is_empty()
            || self.benign_vocabulary.is_empty()
            || self.cue_tag_words.is_empty()
        {
            return bad("marker, cue-tag and benign vocabularies must be non-empty".into());
        }
        let benign: BTreeSet<&str> = self.benign_vocabulary.iter().map(String::as_str).collect();
        let markers: BTreeSet<&str> = self
            .offensive_marker_words
            .iter()
            .map(String::as_str)
            .collect();
        if let Some(w) = markers.iter().find(|w| benign.contains(*w)) {
            return bad(format!("word {w:?} is both a marker and benign"));
        }
        if let Some(w) = self
            .cue_tag_words
            .iter()
            .find(|w| benign.contains(w.as_str()) || markers.contains(w.as_str()))
        {
            return bad(format!("cue-tag word {w:?} overlaps another vocabulary"));
        }
        if self.language.trim().is_empty() {
            return bad("language must be set".into());
        }
        Ok(())
    }
}

/// `n` distinct lowercase pseudo-words whose letters and syllable shapes
/// depend only on `language`.
pub fn pseudo_words(language: &str, n: usize) -> Vec<String> {
    let tag = language.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3)
    });
    let mut rng = SplitMix64::derive(tag, &[0x5e7]);
    const CONSONANTS: &[char] = &[
        'b', 'd', 'f', 'g', 'h', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
    ];
    const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
    let mut cons: Vec<char> = CONSONANTS.to_vec();
    rng.shuffle(&mut cons);
    cons.truncate(10);
    let mut vowels: Vec<char> = VOWELS.to_vec();
    rng.shuffle(&mut vowels);
    vowels.truncate(4);
    let extra = match language {
        "da" => Some('ø'),
        "tr" => Some('ı'),
        "de" => Some('ü'),
        _ => None,
    };
    vowels.extend(extra);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = 2 + rng.below(2);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(*rng.choose(&cons));
            w.push(*rng.choose(&vowels));
            if rng.bernoulli(0.3) {
                w.push(*rng.choose(&cons));
            }
        }
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

/// Exactly `round(ratio * n)` positives in seeded random order.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_samples;
    let n_pos = ((spec.positive_ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut labels: Vec<bool> = (0..n).map(|i| i < n_pos).collect();
    let mut rng = SplitMix64::derive(spec.seed, &[0x5147]);
    rng.shuffle(&mut labels);

    let stop = 1.0 / spec.mean_length;
    let samples = labels
        .iter()
        .enumerate()
        .map(|(i, &positive)| {
            let mut rng = SplitMix64::derive(spec.seed, &[0x7e47, i as u64]);
            let mut channel = || positive != rng.bernoulli(spec.noise_rate);
            let (markers, emoji, hashtag, burst) = (channel(), channel(), channel(), channel());

            let mut len = 1;
            while !rng.bernoulli(stop) {
                len += 1;
            }
            let mut words: Vec<String> = (0..len)
                .map(|_| rng.choose(&spec.benign_vocabulary).clone())
                .collect();
            if markers {
                for _ in 0..1 + rng.below(2) {
                    let at = rng.below(words.len() + 1);
                    words.insert(at, rng.choose(&spec.offensive_marker_words).clone());
                }
            }
            if rng.bernoulli(0.3) {
                words.insert(0, "@USER".to_string());
            }
            if hashtag {
                let a = capitalize(rng.choose(&spec.cue_tag_words));
                let b = capitalize(rng.choose(&spec.benign_vocabulary));
                words.push(format!("#{a}{b}"));
            }
            if !spec.benign_hashtags.is_empty() && rng.bernoulli(0.25) {
                words.push(format!("#{}", rng.choose(&spec.benign_hashtags)));
            }
            if emoji && !spec.cue_emoji.is_empty() {
                words.push(rng.choose(&spec.cue_emoji).clone());
            }
            if !spec.benign_emoji.is_empty() && rng.bernoulli(0.3) {
                let at = rng.below(words.len() + 1);
                words.insert(at, rng.choose(&spec.benign_emoji).clone());
            }
            let mut text = words.join(" ");
            if burst {
                text.push_str("!!!");
            }
            let mut s = Sample::labeled(
                format!("{}{}", spec.language, i + 1),
                text,
                Label::from_bool(positive),
            );
            s.language = spec.language.clone();
            s.source = format!("synth_{}", spec.language);
            s
        })
        .collect();
    Ok(Dataset::new(
        format!("synth_{}", spec.language),
        spec.language.clone(),
        samples,
    ))
}

/// Generates and writes in the `id<TAB>tweet<TAB>subtask_a` format.
pub fn write_synth_tsv<W: Write>(spec: &SynthSpec, out: W) -> Result<Dataset> {
    let d = generate(spec)?;
    write_labeled_tsv(&d, out)?;
    Ok(d)
}
