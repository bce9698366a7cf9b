//! Text-in, probability-out classifiers.
//!
//! A [`Classifier`] bundles everything needed to score raw text: the
//! preprocessor, and either the fitted feature stack with a GBDT or a
//! WordPiece vocabulary with a transformer. Saved files are self-contained.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::features::{
    FeatureConfig, Featurizer, Lexicons, NormalizerKind, PosLexicon, PosTag, SentimentLexicon,
    TfIdfModel,
};
use crate::models::codec::{self, ModelKind, Reader, Writer};
use crate::models::{
    train_gbdt, train_transformer, GbdtModel, GbdtParams, SparseMatrix, TrainingConfig,
    TransformerClassifier, TransformerConfig,
};
use crate::preprocess::{EmojiTable, Preprocessor, SegmenterLexicon};
use crate::resources::Resources;
use crate::tokenize::{basic_tokenize, WordPieceVocab};

/// Vocabulary construction when no vocabulary file is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabOptions {
    pub min_count: usize,
    pub max_words: usize,
    pub lowercase: bool,
}

impl Default for VocabOptions {
    fn default() -> Self {
        VocabOptions {
            min_count: 2,
            max_words: 20_000,
            lowercase: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Gbdt {
        features: FeatureConfig,
        params: GbdtParams,
    },
    Transformer {
        config: TransformerConfig,
        training: TrainingConfig,
        vocab: VocabOptions,
    },
}

impl ModelSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::Gbdt { .. } => "gbdt",
            ModelSpec::Transformer { .. } => "transformer",
        }
    }
}

/// One line of training progress: a boosting round or an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub unit: &'static str,
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePipeline {
    pub preprocessor: Preprocessor,
    pub featurizer: Featurizer,
    pub model: GbdtModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerPipeline {
    pub preprocessor: Preprocessor,
    pub vocab: WordPieceVocab,
    pub model: TransformerClassifier,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Classifier {
    Baseline(BaselinePipeline),
    Transformer(TransformerPipeline),
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub classifier: Classifier,
    pub progress: Vec<ProgressRecord>,
}

fn labeled_pairs(train: &Dataset) -> Result<Vec<bool>> {
    if train.is_empty() {
        return Err(Error::invalid(format!(
            "training set {} is empty",
            train.name
        )));
    }
    Ok(train
        .labels()?
        .into_iter()
        .map(Label::is_positive)
        .collect())
}

/// Feature matrix of already preprocessed texts.
pub fn feature_matrix<S: AsRef<str> + Sync>(
    featurizer: &Featurizer,
    texts: &[S],
) -> Result<SparseMatrix> {
    let layout = featurizer.layout();
    let rows: Vec<Vec<(u32, f64)>> = texts
        .par_iter()
        .map(|t| featurizer.transform(t.as_ref()).map(|v| v.to_row(&layout)))
        .collect::<Result<_>>()?;
    let mut m = SparseMatrix::new(layout.n_features as usize);
    for r in &rows {
        m.push_row(r)?;
    }
    Ok(m)
}

impl Classifier {
    /// Trains on `train`. `seed` replaces the transformer's training seed;
    /// GBDT training has no random component.
    pub fn train(
        spec: &ModelSpec,
        train: &Dataset,
        resources: &Resources,
        seed: u64,
    ) -> Result<Trained> {
        let labels = labeled_pairs(train)?;
        let preprocessor = resources.preprocessor.clone();
        let texts: Vec<String> = train
            .samples
            .par_iter()
            .map(|s| preprocessor.apply(&s.text))
            .collect();
        match spec {
            ModelSpec::Gbdt { features, params } => {
                let featurizer =
                    Featurizer::fit(&texts, features.clone(), resources.lexicons.clone())?;
                let x = feature_matrix(&featurizer, &texts)?;
                let out = train_gbdt(&x, &labels, params)?;
                let progress = out
                    .history
                    .iter()
                    .map(|r| ProgressRecord {
                        unit: "round",
                        step: r.round,
                        loss: r.loss,
                    })
                    .collect();
                Ok(Trained {
                    classifier: Classifier::Baseline(BaselinePipeline {
                        preprocessor,
                        featurizer,
                        model: out.model,
                    }),
                    progress,
                })
            }
            ModelSpec::Transformer {
                config,
                training,
                vocab,
            } => {
                let vocab = match &resources.vocab {
                    Some(v) => v.clone(),
                    None => {
                        let words: Vec<Vec<String>> = texts
                            .iter()
                            .map(|t| basic_tokenize(t, vocab.lowercase))
                            .collect();
                        let mut v = WordPieceVocab::from_corpus(
                            words.iter().flatten().map(String::as_str),
                            vocab.min_count,
                            vocab.max_words,
                        );
                        v.lowercase = vocab.lowercase;
                        v
                    }
                };
                let config = TransformerConfig {
                    vocab_size: vocab.len(),
                    ..*config
                };
                let samples: Vec<(Vec<u32>, bool)> = texts
                    .iter()
                    .zip(&labels)
                    .map(|(t, &y)| (vocab.encode(t, config.max_len), y))
                    .collect();
                let training = TrainingConfig { seed, ..*training };
                let out = train_transformer(&samples, config, &training)?;
                let progress = out
                    .history
                    .iter()
                    .map(|r| ProgressRecord {
                        unit: "epoch",
                        step: r.epoch,
                        loss: r.loss,
                    })
                    .collect();
                Ok(Trained {
                    classifier: Classifier::Transformer(TransformerPipeline {
                        preprocessor,
                        vocab,
                        model: out.model,
                    }),
                    progress,
                })
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Classifier::Baseline(_) => "gbdt",
            Classifier::Transformer(_) => "transformer",
        }
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        match self {
            Classifier::Baseline(p) => &p.preprocessor,
            Classifier::Transformer(p) => &p.preprocessor,
        }
    }

    /// Positive-class probability of each raw text.
    pub fn predict_proba<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Vec<f64>> {
        let pre: Vec<String> = texts
            .par_iter()
            .map(|t| self.preprocessor().apply(t.as_ref()))
            .collect();
        match self {
            Classifier::Baseline(p) => {
                let x = feature_matrix(&p.featurizer, &pre)?;
                p.model.predict(&x)
            }
            Classifier::Transformer(p) => pre
                .par_iter()
                .map(|t| {
                    p.model
                        .predict_proba(&p.vocab.encode(t, p.model.config().max_len))
                })
                .collect(),
        }
    }

    /// Label with probability > 0.5 as positive.
    pub fn predict<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(texts)?
            .into_iter()
            .map(|p| Label::from_bool(p > 0.5))
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Classifier::Baseline(p) => {
                encode_preprocessor(&mut w, &p.preprocessor);
                encode_featurizer(&mut w, &p.featurizer);
                p.model.encode(&mut w);
                w.finish(ModelKind::BaselinePipeline)
            }
            Classifier::Transformer(p) => {
                encode_preprocessor(&mut w, &p.preprocessor);
                encode_vocab(&mut w, &p.vocab);
                p.model.encode(&mut w);
                w.finish(ModelKind::TransformerPipeline)
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = match codec::peek_kind(bytes)? {
            ModelKind::BaselinePipeline => {
                let mut r = codec::open(bytes, ModelKind::BaselinePipeline)?;
                let preprocessor = decode_preprocessor(&mut r)?;
                let featurizer = decode_featurizer(&mut r)?;
                let model = GbdtModel::decode(&mut r)?;
                r.finish()?;
                if model.n_features != featurizer.layout().n_features {
                    return Err(Error::Format("model and feature layout disagree".into()));
                }
                Classifier::Baseline(BaselinePipeline {
                    preprocessor,
                    featurizer,
                    model,
                })
            }
            ModelKind::TransformerPipeline => {
                let mut r = codec::open(bytes, ModelKind::TransformerPipeline)?;
                let preprocessor = decode_preprocessor(&mut r)?;
                let vocab = decode_vocab(&mut r)?;
                let model = TransformerClassifier::decode(&mut r)?;
                r.finish()?;
                if model.config().vocab_size != vocab.len() {
                    return Err(Error::Format("model and vocabulary sizes disagree".into()));
                }
                Classifier::Transformer(TransformerPipeline {
                    preprocessor,
                    vocab,
                    model,
                })
            }
            other => {
                return Err(Error::Format(format!(
                    "{} file is a bare model, not a text classifier",
                    other.name()
                )))
            }
        };
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_bytes(&bytes)
    }
}

fn encode_preprocessor(w: &mut Writer, p: &Preprocessor) {
    let mut emoji: Vec<(&str, &str)> = p.emoji.entries().collect();
    emoji.sort();
    w.u64(emoji.len() as u64);
    for (k, v) in emoji {
        w.str(k);
        w.str(v);
    }
    let words = p.lexicon.entries();
    w.u64(words.len() as u64);
    for (word, rank) in words {
        w.str(word);
        w.u32(rank);
    }
}

fn decode_preprocessor(r: &mut Reader<'_>) -> Result<Preprocessor> {
    let fmt = |e: Error| Error::Format(e.to_string());
    let mut emoji = EmojiTable::new();
    for _ in 0..r.count(2)? {
        let k = r.str()?;
        let v = r.str()?;
        emoji.insert(k, v).map_err(fmt)?;
    }
    let n = r.count(5)?;
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        let w = r.str()?;
        words.push((w, r.u32()?));
    }
    Ok(Preprocessor::new(
        emoji,
        SegmenterLexicon::from_ranks(words),
    ))
}

fn encode_vocab(w: &mut Writer, v: &WordPieceVocab) {
    w.strs(v.tokens());
    w.str(&v.continuation_prefix);
    w.str(&v.unk_token);
    w.bool(v.lowercase);
}

fn decode_vocab(r: &mut Reader<'_>) -> Result<WordPieceVocab> {
    let mut v = WordPieceVocab::new(r.strs()?).map_err(|e| Error::Format(e.to_string()))?;
    v.continuation_prefix = r.str()?;
    v.unk_token = r.str()?;
    v.lowercase = r.bool()?;
    if !v.contains(&v.unk_token) {
        return Err(Error::Format(
            "unknown-token entry missing from vocabulary".into(),
        ));
    }
    Ok(v)
}

fn encode_featurizer(w: &mut Writer, f: &Featurizer) {
    let c = &f.config;
    w.usizes(&c.word_n);
    w.usizes(&c.pos_n);
    w.usizes(&c.char_n);
    w.usizes(&[c.word_min_df, c.pos_min_df, c.char_min_df]);
    w.u8(match c.normalizer {
        NormalizerKind::Stem => 0,
        NormalizerKind::Lowercase => 1,
    });

    let (valence, negators, intensifiers) = f.lexicons.sentiment.parts();
    let mut val: Vec<(&String, &f64)> = valence.iter().collect();
    val.sort_by(|a, b| a.0.cmp(b.0));
    w.u64(val.len() as u64);
    for (k, v) in val {
        w.str(k);
        w.f64(*v);
    }
    let mut neg: Vec<&String> = negators.iter().collect();
    neg.sort();
    w.strs(&neg);
    let mut int: Vec<(&String, &f64)> = intensifiers.iter().collect();
    int.sort_by(|a, b| a.0.cmp(b.0));
    w.u64(int.len() as u64);
    for (k, v) in int {
        w.str(k);
        w.f64(*v);
    }

    let (words, suffixes) = f.lexicons.pos.parts();
    let mut words: Vec<(&String, &PosTag)> = words.iter().collect();
    words.sort_by(|a, b| a.0.cmp(b.0));
    w.u64(words.len() as u64);
    for (k, t) in words {
        w.str(k);
        w.str(t.as_str());
    }
    w.u64(suffixes.len() as u64);
    for (s, t) in suffixes {
        w.str(s);
        w.str(t.as_str());
    }

    for m in [&f.word, &f.pos, &f.chars] {
        m.encode(w);
    }
}

fn decode_featurizer(r: &mut Reader<'_>) -> Result<Featurizer> {
    let fmt = |e: Error| Error::Format(e.to_string());
    let word_n = r.usizes()?;
    let pos_n = r.usizes()?;
    let char_n = r.usizes()?;
    let dfs = r.usizes()?;
    let [word_min_df, pos_min_df, char_min_df] = dfs[..] else {
        return Err(Error::Format("bad feature config".into()));
    };
    let normalizer = match r.u8()? {
        0 => NormalizerKind::Stem,
        1 => NormalizerKind::Lowercase,
        t => return Err(Error::Format(format!("bad normalizer tag {t}"))),
    };
    let config = FeatureConfig {
        word_n,
        pos_n,
        char_n,
        word_min_df,
        pos_min_df,
        char_min_df,
        normalizer,
    };

    let mut sentiment = SentimentLexicon::new();
    for _ in 0..r.count(10)? {
        let k = r.str()?;
        sentiment.insert_valence(&k, r.f64()?).map_err(fmt)?;
    }
    for k in r.strs()? {
        sentiment.insert_negator(&k);
    }
    for _ in 0..r.count(10)? {
        let k = r.str()?;
        sentiment.insert_intensifier(&k, r.f64()?);
    }
    let mut pos = PosLexicon::new();
    for _ in 0..r.count(10)? {
        let k = r.str()?;
        pos.insert_word(&k, r.str()?.parse().map_err(fmt)?);
    }
    for _ in 0..r.count(10)? {
        let s = r.str()?;
        pos.push_suffix(&s, r.str()?.parse().map_err(fmt)?);
    }

    let mut models = Vec::with_capacity(3);
    for _ in 0..3 {
        models.push(TfIdfModel::decode(r)?);
    }
    let chars = models.pop().expect("three models");
    let pos_model = models.pop().expect("three models");
    let word = models.pop().expect("three models");
    Ok(Featurizer {
        config,
        lexicons: Lexicons { sentiment, pos },
        word,
        pos: pos_model,
        chars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sample;

    fn toy() -> Dataset {
        let rows = [
            ("you are a stupid idiot", true),
            ("have a lovely day", false),
            ("shut up loser 🔥", true),
            ("#MakeAmericaGreatAgain rally today", false),
            ("what an idiot", true),
            ("great game tonight", false),
            ("stupid loser", true),
            ("nice weather", false),
        ];
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, (t, y))| Sample::labeled(i.to_string(), *t, Label::from_bool(*y)))
            .collect();
        Dataset::new("toy", "en", samples)
    }

    fn small_features() -> FeatureConfig {
        FeatureConfig {
            word_min_df: 1,
            pos_min_df: 1,
            char_min_df: 1,
            ..Default::default()
        }
    }

    #[test]
    fn baseline_round_trip() {
        let spec = ModelSpec::Gbdt {
            features: small_features(),
            params: GbdtParams {
                n_rounds: 10,
                min_child_weight: 0.0,
                ..Default::default()
            },
        };
        let d = toy();
        let t = Classifier::train(&spec, &d, &Resources::bundled(), 0).unwrap();
        let texts = d.texts();
        let p = t.classifier.predict_proba(&texts).unwrap();
        let back = Classifier::from_bytes(&t.classifier.to_bytes()).unwrap();
        assert_eq!(back, t.classifier);
        assert_eq!(back.predict_proba(&texts).unwrap(), p);
        assert_eq!(t.progress.len(), 11);
    }

    #[test]
    fn transformer_round_trip() {
        let spec = ModelSpec::Transformer {
            config: TransformerConfig {
                d_model: 8,
                n_heads: 2,
                d_ff: 16,
                n_layers: 1,
                ..Default::default()
            },
            training: TrainingConfig {
                epochs: 1,
                learning_rate: 1e-3,
                ..Default::default()
            },
            vocab: VocabOptions {
                min_count: 1,
                ..Default::default()
            },
        };
        let d = toy();
        let t = Classifier::train(&spec, &d, &Resources::bundled(), 5).unwrap();
        let texts = d.texts();
        let bytes = t.classifier.to_bytes();
        let back = Classifier::from_bytes(&bytes).unwrap();
        assert_eq!(
            back.predict_proba(&texts).unwrap(),
            t.classifier.predict_proba(&texts).unwrap()
        );
        assert_eq!(t.progress[0].unit, "epoch");
        assert!(GbdtModel::from_bytes(&bytes).is_err());
    }

    #[test]
    fn rejects_bare_models() {
        let m = GbdtModel {
            base_score: 0.0,
            learning_rate: 0.1,
            n_features: 1,
            trees: vec![],
        };
        assert!(matches!(
            Classifier::from_bytes(&m.to_bytes()),
            Err(Error::Format(_))
        ));
    }
}
