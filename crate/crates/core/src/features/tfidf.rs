//! Smoothed TF-IDF over word, POS-tag or character n-grams.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::codec::{self, ModelKind, Reader, Writer};
use crate::tokenize::{extract_ngrams, NGramSpec, NGramUnit};

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: Vec<String>,
    index: HashMap<String, u32>,
    idf: Vec<f64>,
    pub ngram_spec: NGramSpec,
    pub min_df: usize,
    pub n_documents: usize,
}

/// Sparse row: `(column, weight)` sorted by column.
pub type SparseWeights = Vec<(u32, f64)>;

/// ln((1 + n_docs) / (1 + df)) + 1
pub fn smoothed_idf(n_documents: usize, df: usize) -> f64 {
    ((1.0 + n_documents as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfIdfModel {
    /// Keeps n-grams with document frequency >= `min_df`; the vocabulary is
    /// sorted lexicographically so column order is deterministic.
    pub fn fit<S: AsRef<str> + Sync>(
        corpus: &[Vec<S>],
        spec: &NGramSpec,
        min_df: usize,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot fit TF-IDF on an empty corpus"));
        }
        spec.validate()?;
        let df = corpus
            .par_iter()
            .map(|doc| -> Result<HashMap<String, usize>> {
                let unique: HashSet<String> = extract_ngrams(doc, spec)?.into_iter().collect();
                Ok(unique.into_iter().map(|g| (g, 1)).collect())
            })
            .try_reduce(HashMap::new, |a, b| {
                let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
                for (g, c) in small {
                    *big.entry(g).or_insert(0) += c;
                }
                Ok(big)
            })?;
        let kept: BTreeMap<String, usize> = df
            .into_iter()
            .filter(|&(_, c)| c >= min_df.max(1))
            .collect();
        let n = corpus.len();
        let (vocabulary, idf): (Vec<String>, Vec<f64>) = kept
            .into_iter()
            .map(|(g, c)| (g, smoothed_idf(n, c)))
            .unzip();
        Ok(Self::from_parts(vocabulary, idf, spec.clone(), min_df, n))
    }

    pub(crate) fn from_parts(
        vocabulary: Vec<String>,
        idf: Vec<f64>,
        ngram_spec: NGramSpec,
        min_df: usize,
        n_documents: usize,
    ) -> Self {
        let index = vocabulary
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i as u32))
            .collect();
        TfIdfModel {
            vocabulary,
            index,
            idf,
            ngram_spec,
            min_df,
            n_documents,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.finish(ModelKind::TfIdf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = codec::open(bytes, ModelKind::TfIdf)?;
        let m = Self::decode(&mut r)?;
        r.finish()?;
        Ok(m)
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u8(match self.ngram_spec.unit {
            NGramUnit::Word => 0,
            NGramUnit::PosTag => 1,
            NGramUnit::Char => 2,
        });
        w.usizes(&self.ngram_spec.n_values);
        w.u64(self.min_df as u64);
        w.u64(self.n_documents as u64);
        w.strs(&self.vocabulary);
        w.f64s(&self.idf);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let unit = match r.u8()? {
            0 => NGramUnit::Word,
            1 => NGramUnit::PosTag,
            2 => NGramUnit::Char,
            t => return Err(Error::Format(format!("bad n-gram unit tag {t}"))),
        };
        let spec = NGramSpec::new(unit, r.usizes()?).map_err(|e| Error::Format(e.to_string()))?;
        let min_df = r.u64()? as usize;
        let n_documents = r.u64()? as usize;
        let vocabulary = r.strs()?;
        let idf = r.f64s()?;
        if vocabulary.len() != idf.len() {
            return Err(Error::Format(
                "TF-IDF vocabulary and idf lengths differ".into(),
            ));
        }
        if vocabulary.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("TF-IDF vocabulary is not sorted".into()));
        }
        Ok(Self::from_parts(vocabulary, idf, spec, min_df, n_documents))
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn column(&self, ngram: &str) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    /// Raw counts times idf, L2-normalised. Out-of-vocabulary n-grams are dropped.
    pub fn transform<S: AsRef<str>>(&self, units: &[S]) -> Result<SparseWeights> {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for g in extract_ngrams(units, &self.ngram_spec)? {
            if let Some(col) = self.column(&g) {
                *counts.entry(col).or_insert(0.0) += 1.0;
            }
        }
        let mut row: SparseWeights = counts
            .into_iter()
            .map(|(c, tf)| (c, tf * self.idf[c as usize]))
            .collect();
        let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut row {
                *w /= norm;
            }
        }
        Ok(row)
    }
}
