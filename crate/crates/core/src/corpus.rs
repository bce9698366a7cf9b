//! Dataset ingestion, score-to-label conversion, statistics, concatenation and
//! stratified splitting.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Binary Subtask-A label. Positive means offensive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// Competition tag: `OFF` or `NOT`.
    pub fn tag(self) -> &'static str {
        match self {
            Label::Positive => "OFF",
            Label::Negative => "NOT",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "OFF" => Some(Label::Positive),
            "NOT" => Some(Label::Negative),
            _ => None,
        }
    }
}

/// Aggregate of the scores a pool of models assigned to one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub average: f64,
    pub stdev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
    pub score: Option<Score>,
    pub language: String,
    pub source: String,
}

impl Sample {
    pub fn labeled(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Sample {
            id: id.into(),
            text: text.into(),
            label: Some(label),
            score: None,
            language: String::new(),
            source: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub language: String,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, language: impl Into<String>, samples: Vec<Sample>) -> Self {
        Dataset {
            name: name.into(),
            language: language.into(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.text.as_str()).collect()
    }

    /// Labels of every sample, failing if any sample is still unlabeled.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.samples
            .iter()
            .map(|s| {
                s.label.ok_or_else(|| {
                    Error::invalid(format!("sample {} in {} is unlabeled", s.id, self.name))
                })
            })
            .collect()
    }
}

/// Three-rule converter from (average, stdev) model scores to binary labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelHeuristic {
    pub hi_threshold: f64,
    pub lo_threshold: f64,
    pub std_threshold: f64,
}

impl Default for LabelHeuristic {
    fn default() -> Self {
        LabelHeuristic {
            hi_threshold: 0.6,
            lo_threshold: 0.5,
            std_threshold: 0.1,
        }
    }
}

impl LabelHeuristic {
    pub fn new(hi_threshold: f64, lo_threshold: f64, std_threshold: f64) -> Result<Self> {
        let h = LabelHeuristic {
            hi_threshold,
            lo_threshold,
            std_threshold,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lo_threshold
            && self.lo_threshold < self.hi_threshold
            && self.hi_threshold <= 1.0)
        {
            return Err(Error::Config(format!(
                "label heuristic needs 0 <= lo < hi <= 1, got lo={} hi={}",
                self.lo_threshold, self.hi_threshold
            )));
        }
        if !(self.std_threshold > 0.0) {
            return Err(Error::Config(format!(
                "label heuristic std threshold must be > 0, got {}",
                self.std_threshold
            )));
        }
        Ok(())
    }
}

/// Positive iff `average > hi`, or `lo < average <= hi` with `stdev < std_threshold`.
pub fn score_to_label(average: f64, stdev: f64, h: &LabelHeuristic) -> Label {
    let confident = average > h.hi_threshold;
    let consensus =
        average > h.lo_threshold && average <= h.hi_threshold && stdev < h.std_threshold;
    Label::from_bool(confident || consensus)
}

/// Fills in `label` for every scored sample. Already-labeled samples are kept.
pub fn apply_heuristic(dataset: &mut Dataset, h: &LabelHeuristic) {
    for s in &mut dataset.samples {
        if s.label.is_none() {
            if let Some(score) = s.score {
                s.label = Some(score_to_label(score.average, score.stdev, h));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsvFormat {
    /// `id<TAB>text<TAB>label` with label in {OFF, NOT}.
    OlidLabeled,
    /// `id<TAB>text<TAB>average<TAB>std`.
    ScoredEnglish,
    /// `id<TAB>text`; used for prediction inputs.
    Unlabeled,
}

impl TsvFormat {
    fn columns(self) -> usize {
        match self {
            TsvFormat::OlidLabeled => 3,
            TsvFormat::ScoredEnglish => 4,
            TsvFormat::Unlabeled => 2,
        }
    }
}

impl std::str::FromStr for TsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "olid_labeled" => Ok(TsvFormat::OlidLabeled),
            "scored_english" => Ok(TsvFormat::ScoredEnglish),
            "unlabeled" => Ok(TsvFormat::Unlabeled),
            other => Err(Error::invalid(format!("unknown TSV format {other:?}"))),
        }
    }
}

/// Parses a competition-style TSV stream.
///
/// A first row whose first field is `id` (any case) is treated as a header.
/// Columns beyond those the format defines are ignored. Blank lines are skipped.
pub fn parse_labeled_tsv<R: BufRead>(
    source: R,
    format: TsvFormat,
    name: &str,
    language: &str,
) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::parse(lineno, "input is not valid UTF-8"),
            _ => Error::io(name, e),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if idx == 0 && fields[0].trim().eq_ignore_ascii_case("id") {
            continue;
        }
        if fields.len() < format.columns() {
            return Err(Error::parse(
                lineno,
                format!(
                    "expected {} tab-separated columns, found {}",
                    format.columns(),
                    fields.len()
                ),
            ));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(Error::parse(lineno, "empty id"));
        }
        let text = fields[1];
        if text.trim().is_empty() {
            return Err(Error::parse(lineno, "empty text"));
        }
        let (label, score) = match format {
            TsvFormat::OlidLabeled => {
                let label = Label::from_tag(fields[2].trim())
                    .ok_or_else(|| Error::parse(lineno, "unknown label"))?;
                (Some(label), None)
            }
            TsvFormat::ScoredEnglish => {
                let average = parse_real(fields[2], lineno, "average")?;
                let stdev = parse_real(fields[3], lineno, "std")?;
                if !(0.0..=1.0).contains(&average) {
                    return Err(Error::parse(lineno, "average score outside [0, 1]"));
                }
                if stdev < 0.0 {
                    return Err(Error::parse(lineno, "negative standard deviation"));
                }
                (None, Some(Score { average, stdev }))
            }
            TsvFormat::Unlabeled => (None, None),
        };
        if !seen.insert(id.to_string()) {
            return Err(Error::parse(lineno, format!("duplicate sample id {id:?}")));
        }
        samples.push(Sample {
            id: id.to_string(),
            text: text.to_string(),
            label,
            score,
            language: language.to_string(),
            source: name.to_string(),
        });
    }
    Ok(Dataset::new(name, language, samples))
}

fn parse_real(field: &str, lineno: usize, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(lineno, format!("{what} is not a decimal number")))?;
    if !v.is_finite() {
        return Err(Error::parse(lineno, format!("{what} is not finite")));
    }
    Ok(v)
}

/// Writes labeled samples as `id<TAB>text<TAB>label` with a header row.
/// Tabs and newlines inside texts are replaced by spaces.
pub fn write_labeled_tsv<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let io = |e| Error::io(&dataset.name, e);
    writeln!(out, "id\ttweet\tsubtask_a").map_err(io)?;
    for s in &dataset.samples {
        let label = s
            .label
            .ok_or_else(|| Error::invalid(format!("sample {} is unlabeled", s.id)))?;
        writeln!(
            out,
            "{}\t{}\t{}",
            s.id,
            sanitize_field(&s.text),
            label.tag()
        )
        .map_err(io)?;
    }
    Ok(())
}

pub(crate) fn sanitize_field(text: &str) -> String {
    text.chars()
        .map(|c| {
            if matches!(c, '\t' | '\n' | '\r') {
                ' '
            } else {
                c
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_ratio: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            validation_ratio: 0.10,
            seed: 0,
        }
    }
}

/// Per-class seeded shuffle, then the first `k_c` indices of each class go to
/// validation. Both outputs keep ingestion order.
pub fn stratified_split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let ratio = spec.validation_ratio;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!(
            "validation ratio must be in (0, 1), got {ratio}"
        )));
    }
    let labels = d.labels()?;
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        by_class[usize::from(!l.is_positive())].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class too small to stratify ({} has {} samples)",
                if class == 0 { "OFF" } else { "NOT" },
                members.len()
            )));
        }
    }

    let n = d.len();
    let target = (ratio * n as f64).round() as usize;
    let exact: Vec<f64> = by_class.iter().map(|m| ratio * m.len() as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.round() as usize).collect();
    // Rounding each class independently can miss the total by one.
    let total: usize = counts.iter().sum();
    if total != target {
        let grow = total < target;
        let residual = |c: usize| exact[c] - counts[c] as f64;
        let pick = if grow {
            (0..2)
                .filter(|&c| counts[c] < by_class[c].len())
                .max_by(|&a, &b| {
                    residual(a)
                        .partial_cmp(&residual(b))
                        .unwrap()
                        .then(b.cmp(&a))
                })
        } else {
            (0..2).filter(|&c| counts[c] > 0).min_by(|&a, &b| {
                residual(a)
                    .partial_cmp(&residual(b))
                    .unwrap()
                    .then(a.cmp(&b))
            })
        };
        if let Some(c) = pick {
            if grow {
                counts[c] += 1;
            } else {
                counts[c] -= 1;
            }
        }
    }

    let mut in_validation = vec![false; n];
    for (class, members) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        SplitMix64::derive(spec.seed, &[class as u64]).shuffle(&mut shuffled);
        for &i in &shuffled[..counts[class]] {
            in_validation[i] = true;
        }
    }
    let mut train = Vec::with_capacity(n - target);
    let mut validation = Vec::with_capacity(target);
    for (s, &v) in d.samples.iter().zip(&in_validation) {
        if v {
            validation.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((
        Dataset::new(format!("{}_train", d.name), d.language.clone(), train),
        Dataset::new(format!("{}_val", d.name), d.language.clone(), validation),
    ))
}

fn namespaced_id(sample: &Sample) -> String {
    if sample.source.is_empty() {
        return sample.id.clone();
    }
    let prefix = format!("{}/", sample.source);
    if sample.id.starts_with(&prefix) {
        sample.id.clone()
    } else {
        format!("{prefix}{}", sample.id)
    }
}

fn merged_language<'a>(mut languages: impl Iterator<Item = &'a str>) -> String {
    let first = languages.next().unwrap_or("multi");
    if languages.all(|l| l == first) {
        first.to_string()
    } else {
        "multi".to_string()
    }
}

/// Appends the parts in order. Ids become `<source>/<id>`.
pub fn concat_datasets(parts: &[&Dataset], name: &str) -> Result<Dataset> {
    if parts.is_empty() {
        return Err(Error::invalid(
            "cannot concatenate an empty list of datasets",
        ));
    }
    let mut seen = HashSet::new();
    let mut samples = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for part in parts {
        for s in &part.samples {
            let id = namespaced_id(s);
            if !seen.insert(id.clone()) {
                return Err(Error::invalid(format!(
                    "duplicate sample id {id:?} while concatenating into {name}"
                )));
            }
            samples.push(Sample { id, ..s.clone() });
        }
    }
    let language = merged_language(parts.iter().map(|p| p.language.as_str()));
    Ok(Dataset::new(name, language, samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    pub positives: usize,
    pub positive_ratio: f64,
}

pub fn dataset_stats(d: &Dataset) -> Result<DatasetStats> {
    if d.is_empty() {
        return Err(Error::invalid(format!("dataset {} is empty", d.name)));
    }
    let positives = d.labels()?.iter().filter(|l| l.is_positive()).count();
    Ok(DatasetStats {
        count: d.len(),
        positives,
        positive_ratio: positives as f64 / d.len() as f64,
    })
}

/// Count-only view of a dataset, for bookkeeping on corpora that are not
/// materialised (e.g. the multi-million-row English set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub language: String,
    pub count: u64,
    pub positives: u64,
}

impl DatasetMeta {
    pub fn of(d: &Dataset) -> Result<Self> {
        let stats = dataset_stats(d)?;
        Ok(DatasetMeta {
            name: d.name.clone(),
            language: d.language.clone(),
            count: stats.count as u64,
            positives: stats.positives as u64,
        })
    }

    pub fn positive_ratio(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.positives as f64 / self.count as f64
        }
    }
}

/// Metadata counterpart of [`concat_datasets`].
pub fn concat_meta(parts: &[DatasetMeta], name: &str) -> Result<DatasetMeta> {
    if parts.is_empty() {
        return Err(Error::invalid(
            "cannot concatenate an empty list of datasets",
        ));
    }
    Ok(DatasetMeta {
        name: name.to_string(),
        language: merged_language(parts.iter().map(|p| p.language.as_str())),
        count: parts.iter().map(|p| p.count).sum(),
        positives: parts.iter().map(|p| p.positives).sum(),
    })
}

/// Renders rows as a `Dataset | No. Samples | Positive Ratio (%)` table.
pub struct StatsTable<'a>(pub &'a [DatasetMeta]);

impl fmt::Display for StatsTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .0
            .iter()
            .map(|m| m.name.chars().count())
            .max()
            .unwrap_or(0)
            .max("Dataset".len());
        writeln!(
            f,
            "| {:<width$} | {:>11} | {:>18} |",
            "Dataset", "No. Samples", "Positive Ratio (%)"
        )?;
        writeln!(
            f,
            "|{}|{}|{}|",
            "-".repeat(width + 2),
            "-".repeat(13),
            "-".repeat(20)
        )?;
        for m in self.0 {
            writeln!(
                f,
                "| {:<width$} | {:>11} | {:>18.2} |",
                m.name,
                group_thousands(m.count),
                100.0 * m.positive_ratio()
            )?;
        }
        Ok(())
    }
}

fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, format: TsvFormat) -> Result<Dataset> {
        parse_labeled_tsv(text.as_bytes(), format, "t", "en")
    }

    fn labeled(n_pos: usize, n_neg: usize) -> Dataset {
        let samples = (0..n_pos + n_neg)
            .map(|i| {
                Sample::labeled(
                    i.to_string(),
                    format!("text {i}"),
                    Label::from_bool(i < n_pos),
                )
            })
            .collect();
        Dataset::new("d", "da", samples)
    }

    #[test]
    fn olid_row() {
        let d = parse("1\thello world\tNOT\n", TsvFormat::OlidLabeled).unwrap();
        assert_eq!(d.samples[0].label, Some(Label::Negative));
        assert_eq!(d.samples[0].text, "hello world");
        assert!(d.samples[0].score.is_none());
    }

    #[test]
    fn scored_row() {
        let d = parse("2\tsome text\t0.72\t0.08\n", TsvFormat::ScoredEnglish).unwrap();
        let s = &d.samples[0];
        assert_eq!(
            s.score,
            Some(Score {
                average: 0.72,
                stdev: 0.08
            })
        );
        assert!(s.label.is_none());
    }

    #[test]
    fn unknown_label_names_line() {
        let err = parse(
            "1\ta\tNOT\n2\tb\tOFF\n3\ttext\tMAYBE\n",
            TsvFormat::OlidLabeled,
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "unknown label, line 3");
    }

    #[test]
    fn header_crlf_and_extra_columns() {
        let d = parse(
            "id\ttweet\tsubtask_a\r\n7\tfoo\tOFF\textra\r\n",
            TsvFormat::OlidLabeled,
        )
        .unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.samples[0].id, "7");
        assert_eq!(d.samples[0].text, "foo");
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            parse("1\tonly two\n", TsvFormat::OlidLabeled),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse("1\t  \tOFF\n", TsvFormat::OlidLabeled).is_err());
        assert!(parse("1\tx\t1.2\t0.1\n", TsvFormat::ScoredEnglish).is_err());
        assert!(parse("1\tx\t0.5\t-0.1\n", TsvFormat::ScoredEnglish).is_err());
        assert!(parse("1\tx\t0,5\t0.1\n", TsvFormat::ScoredEnglish).is_err());
        assert!(parse("1\tx\tOFF\n1\ty\tNOT\n", TsvFormat::OlidLabeled).is_err());
    }

    #[test]
    fn heuristic_examples() {
        let h = LabelHeuristic::default();
        assert_eq!(score_to_label(0.70, 0.30, &h), Label::Positive);
        assert_eq!(score_to_label(0.55, 0.05, &h), Label::Positive);
        assert_eq!(score_to_label(0.55, 0.15, &h), Label::Negative);
        assert_eq!(score_to_label(0.60, 0.05, &h), Label::Positive);
        assert_eq!(score_to_label(0.50, 0.01, &h), Label::Negative);
        assert_eq!(score_to_label(0.60, 0.10, &h), Label::Negative);
    }

    #[test]
    fn heuristic_validation() {
        assert!(LabelHeuristic::new(0.5, 0.6, 0.1).is_err());
        assert!(LabelHeuristic::new(0.6, 0.5, 0.0).is_err());
        assert!(LabelHeuristic::new(1.1, 0.5, 0.1).is_err());
        assert!(LabelHeuristic::new(0.6, 0.5, 0.1).is_ok());
    }

    #[test]
    fn danish_shaped_split() {
        let d = labeled(384, 2616);
        let (train, val) = stratified_split(
            &d,
            &SplitSpec {
                validation_ratio: 0.1,
                seed: 11,
            },
        )
        .unwrap();
        assert_eq!(val.len(), 300);
        assert_eq!(train.len(), 2700);
        let pos = dataset_stats(&val).unwrap().positives;
        assert!(pos == 38 || pos == 39, "{pos}");
        assert_eq!(train.name, "d_train");
        assert_eq!(val.name, "d_val");
    }

    #[test]
    fn symmetric_split() {
        let d = labeled(5, 5);
        let (train, val) = stratified_split(
            &d,
            &SplitSpec {
                validation_ratio: 0.5,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(val.len(), 5);
        let pos = dataset_stats(&val).unwrap().positives;
        assert!(pos == 2 || pos == 3);
        let mut ids: Vec<_> = train
            .samples
            .iter()
            .chain(&val.samples)
            .map(|s| s.id.clone())
            .collect();
        ids.sort();
        let mut orig: Vec<_> = d.samples.iter().map(|s| s.id.clone()).collect();
        orig.sort();
        assert_eq!(ids, orig);
    }

    #[test]
    fn split_is_deterministic() {
        let d = labeled(40, 160);
        let spec = SplitSpec {
            validation_ratio: 0.1,
            seed: 5,
        };
        assert_eq!(
            stratified_split(&d, &spec).unwrap(),
            stratified_split(&d, &spec).unwrap()
        );
        let other = stratified_split(&d, &SplitSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(stratified_split(&d, &spec).unwrap().1, other.1);
    }

    #[test]
    fn split_rejects_tiny_class() {
        let err = stratified_split(&labeled(1, 20), &SplitSpec::default()).unwrap_err();
        assert!(err.to_string().contains("class too small to stratify"));
    }

    #[test]
    fn concat_rules() {
        let mut a = labeled(2, 2);
        a.name = "a".into();
        a.language = "ar".into();
        for s in &mut a.samples {
            s.source = "a".into();
        }
        let mut b = labeled(1, 2);
        b.name = "b".into();
        for s in &mut b.samples {
            s.source = "b".into();
        }
        let c = concat_datasets(&[&a, &b], "ab").unwrap();
        assert_eq!(c.len(), 7);
        assert_eq!(c.language, "multi");
        assert_eq!(c.samples[0].id, "a/0");
        assert_eq!(c.samples[4].id, "b/0");

        let single = concat_datasets(&[&a], "renamed").unwrap();
        assert_eq!(single.language, "ar");
        assert_eq!(single.name, "renamed");
        assert!(concat_datasets(&[], "x").is_err());
    }

    #[test]
    fn stats() {
        assert_eq!(dataset_stats(&labeled(1, 3)).unwrap().positive_ratio, 0.25);
        assert_eq!(dataset_stats(&labeled(0, 3)).unwrap().positive_ratio, 0.0);
        assert!(dataset_stats(&labeled(0, 0)).is_err());
        let ar = dataset_stats(&labeled(1371, 7000 - 1371)).unwrap();
        assert!((100.0 * ar.positive_ratio - 19.58).abs() <= 0.05);
    }

    #[test]
    fn stats_table_layout() {
        let rows = [DatasetMeta {
            name: "Off_da".into(),
            language: "da".into(),
            count: 3000,
            positives: 384,
        }];
        let text = StatsTable(&rows).to_string();
        assert!(
            text.contains("| Off_da  |       3,000 |              12.80 |"),
            "{text}"
        );
    }

    #[test]
    fn write_then_parse() {
        let d = labeled(2, 3);
        let mut buf = Vec::new();
        write_labeled_tsv(&d, &mut buf).unwrap();
        let back = parse_labeled_tsv(buf.as_slice(), TsvFormat::OlidLabeled, "d", "da").unwrap();
        assert_eq!(back.labels().unwrap(), d.labels().unwrap());
    }
}
