//! Declarative run configuration in TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//! max_parallel = 1
//!
//! [[datasets]]
//! id = "da"
//! format = "synth"
//! language = "da"
//! split = { validation_ratio = 0.1, seed = 1 }
//! synth = { n_samples = 3000, positive_ratio = 0.128 }
//!
//! [[experiments]]
//! name = "GBDT"
//! model = "gbdt"
//! fine_tuning = ["da_train"]
//! validation = "da_val"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    apply_heuristic, parse_labeled_tsv, stratified_split, Dataset, LabelHeuristic, SplitSpec,
    TsvFormat,
};
use crate::error::{Error, Result};
use crate::eval::{DatasetRegistry, ExperimentSpec, SelectBy};
use crate::features::FeatureConfig;
use crate::models::{GbdtParams, TrainingConfig, TransformerConfig};
use crate::pipeline::{ModelSpec, VocabOptions};
use crate::resources::Resources;
use crate::synth::{generate, SynthOptions, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    OlidLabeled,
    ScoredEnglish,
    /// Generated in memory; `path` is ignored.
    Synth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub id: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub format: SourceFormat,
    pub language: String,
    /// When set, `<id>_train` and `<id>_val` are registered as well.
    #[serde(default)]
    pub split: Option<SplitSpec>,
    #[serde(default)]
    pub synth: SynthOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbdt,
    Transformer,
}

/// One matrix cell. Section overrides replace the top-level section whole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub name: String,
    pub model: ModelKind,
    pub fine_tuning: Vec<String>,
    pub validation: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub features: Option<FeatureConfig>,
    #[serde(default)]
    pub gbdt: Option<GbdtParams>,
    #[serde(default)]
    pub transformer: Option<TransformerConfig>,
    #[serde(default)]
    pub training: Option<TrainingConfig>,
    #[serde(default)]
    pub vocab: Option<VocabOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub resources_dir: Option<PathBuf>,
    pub max_parallel: usize,
    pub select_by: SelectBy,
    pub heuristic: LabelHeuristic,
    pub datasets: Vec<DatasetSource>,
    pub features: FeatureConfig,
    pub gbdt: GbdtParams,
    pub transformer: TransformerConfig,
    pub training: TrainingConfig,
    pub vocab: VocabOptions,
    pub experiments: Vec<ExperimentEntry>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            resources_dir: None,
            max_parallel: 1,
            select_by: SelectBy::default(),
            heuristic: LabelHeuristic::default(),
            datasets: Vec::new(),
            features: FeatureConfig::default(),
            gbdt: GbdtParams::default(),
            transformer: TransformerConfig::default(),
            training: TrainingConfig::default(),
            vocab: VocabOptions::default(),
            experiments: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Parses without validating; relative paths are joined onto `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut c: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start].lines().count().max(1));
            Error::parse(line, e.message().to_string())
        })?;
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut c.output_dir);
        if let Some(p) = c.resources_dir.as_mut() {
            rebase(p);
        }
        for d in &mut c.datasets {
            if let Some(p) = d.path.as_mut() {
                rebase(p);
            }
        }
        Ok(c)
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let c = Self::from_toml(&text, base).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        c.validate()?;
        Ok(c)
    }

    /// Every id the datasets section registers, in declaration order.
    pub fn declared_ids(&self) -> Vec<String> {
        let mut ids = Vec::new();
        for d in &self.datasets {
            ids.push(d.id.clone());
            if d.split.is_some() {
                ids.push(format!("{}_train", d.id));
                ids.push(format!("{}_val", d.id));
            }
        }
        ids
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_parallel == 0 {
            return Err(Error::Config("max_parallel must be >= 1".into()));
        }
        self.heuristic.validate()?;
        self.features.specs()?;
        self.gbdt.validate()?;
        self.transformer_spec(&self.transformer).validate()?;
        self.training.validate()?;
        if let Some(dir) = &self.resources_dir {
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "resources_dir {} does not exist",
                    dir.display()
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for id in self.declared_ids() {
            if id.trim().is_empty() {
                return Err(Error::Config("dataset id must not be empty".into()));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Config(format!("dataset id {id:?} declared twice")));
            }
        }
        for d in &self.datasets {
            match (d.format, &d.path) {
                (SourceFormat::Synth, _) => self.synth_spec(d).validate()?,
                (_, None) => return Err(Error::Config(format!("dataset {:?} needs a path", d.id))),
                (_, Some(p)) if !p.is_file() => {
                    return Err(Error::Config(format!(
                        "dataset {:?}: {} does not exist",
                        d.id,
                        p.display()
                    )))
                }
                _ => {}
            }
            if let Some(s) = &d.split {
                if !(s.validation_ratio > 0.0 && s.validation_ratio < 1.0) {
                    return Err(Error::Config(format!(
                        "dataset {:?}: validation_ratio must be in (0, 1)",
                        d.id
                    )));
                }
            }
        }
        let mut names = BTreeSet::new();
        for e in &self.experiments {
            if e.fine_tuning.is_empty() {
                return Err(Error::Config(format!(
                    "experiment {:?} has no fine-tuning datasets",
                    e.name
                )));
            }
            for id in e.fine_tuning.iter().chain(std::iter::once(&e.validation)) {
                if !seen.contains(id) {
                    return Err(Error::Config(format!(
                        "experiment {:?}: unknown dataset id {id:?}",
                        e.name
                    )));
                }
            }
            if !names.insert((&e.name, &e.fine_tuning, &e.validation)) {
                return Err(Error::Config(format!(
                    "experiment {:?} is listed twice",
                    e.name
                )));
            }
            if let Some(g) = &e.gbdt {
                g.validate()?;
            }
            if let Some(f) = &e.features {
                f.specs()?;
            }
            if let Some(t) = &e.transformer {
                self.transformer_spec(t).validate()?;
            }
            if let Some(t) = &e.training {
                t.validate()?;
            }
        }
        Ok(())
    }

    // vocab_size is filled in from the vocabulary at training time.
    fn transformer_spec(&self, t: &TransformerConfig) -> TransformerConfig {
        TransformerConfig {
            vocab_size: t.vocab_size.max(1),
            ..*t
        }
    }

    fn synth_spec(&self, d: &DatasetSource) -> SynthSpec {
        SynthSpec::for_language(&d.language, &d.synth)
    }

    pub fn resources(&self) -> Result<Resources> {
        Resources::resolve(self.resources_dir.as_deref())
    }

    /// Loads one source with its id as the dataset name; scored sets are
    /// labeled with the heuristic.
    pub fn load_source(&self, d: &DatasetSource) -> Result<Dataset> {
        let mut ds = match d.format {
            SourceFormat::Synth => {
                let mut ds = generate(&self.synth_spec(d))?;
                ds.name = d.id.clone();
                for s in &mut ds.samples {
                    s.source = d.id.clone();
                }
                ds
            }
            SourceFormat::OlidLabeled | SourceFormat::ScoredEnglish => {
                let path = d
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("dataset {:?} needs a path", d.id)))?;
                let file =
                    File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
                let format = if d.format == SourceFormat::OlidLabeled {
                    TsvFormat::OlidLabeled
                } else {
                    TsvFormat::ScoredEnglish
                };
                parse_labeled_tsv(BufReader::new(file), format, &d.id, &d.language).map_err(
                    |e| match e {
                        Error::Parse { line, message } => Error::Parse {
                            line,
                            message: format!("{}: {message}", path.display()),
                        },
                        other => other,
                    },
                )?
            }
        };
        apply_heuristic(&mut ds, &self.heuristic);
        Ok(ds)
    }

    /// Every declared dataset, split outputs following their source.
    pub fn load_datasets(&self) -> Result<Vec<Dataset>> {
        let mut out = Vec::new();
        for d in &self.datasets {
            let ds = self.load_source(d)?;
            if let Some(split) = &d.split {
                let (train, val) = stratified_split(&ds, split)?;
                out.push(ds);
                out.push(train);
                out.push(val);
            } else {
                out.push(ds);
            }
        }
        Ok(out)
    }

    pub fn registry(&self) -> Result<DatasetRegistry> {
        let mut reg = DatasetRegistry::new();
        for d in self.load_datasets()? {
            reg.insert(d)?;
        }
        Ok(reg)
    }

    /// The top-level model sections as a spec of the given kind.
    pub fn model_spec(&self, kind: ModelKind) -> ModelSpec {
        match kind {
            ModelKind::Gbdt => ModelSpec::Gbdt {
                features: self.features.clone(),
                params: self.gbdt,
            },
            ModelKind::Transformer => ModelSpec::Transformer {
                config: self.transformer,
                training: self.training,
                vocab: self.vocab,
            },
        }
    }

    pub fn experiment_specs(&self) -> Vec<ExperimentSpec> {
        self.experiments
            .iter()
            .map(|e| {
                let model = match e.model {
                    ModelKind::Gbdt => ModelSpec::Gbdt {
                        features: e.features.clone().unwrap_or_else(|| self.features.clone()),
                        params: e.gbdt.unwrap_or(self.gbdt),
                    },
                    ModelKind::Transformer => ModelSpec::Transformer {
                        config: e.transformer.unwrap_or(self.transformer),
                        training: e.training.unwrap_or(self.training),
                        vocab: e.vocab.unwrap_or(self.vocab),
                    },
                };
                ExperimentSpec {
                    name: e.name.clone(),
                    model,
                    fine_tuning: e.fine_tuning.clone(),
                    validation: e.validation.clone(),
                    seed: e.seed.unwrap_or(self.seed),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH: &str = r#"
seed = 5

[[datasets]]
id = "da"
format = "synth"
language = "da"
split = { validation_ratio = 0.1, seed = 1 }
synth = { n_samples = 200, positive_ratio = 0.2 }

[gbdt]
n_rounds = 5

[[experiments]]
name = "GBDT"
model = "gbdt"
fine_tuning = ["da_train"]
validation = "da_val"

[[experiments]]
name = "GBDT deep"
model = "gbdt"
fine_tuning = ["da_train"]
validation = "da_val"
seed = 9
gbdt = { n_rounds = 3, max_depth = 6 }
"#;

    #[test]
    fn parses_and_builds_registry() {
        let c = RunConfig::from_toml(SYNTH, Path::new("/base")).unwrap();
        c.validate().unwrap();
        assert_eq!(c.output_dir, Path::new("/base/out"));
        assert_eq!(c.declared_ids(), ["da", "da_train", "da_val"]);
        let reg = c.registry().unwrap();
        assert_eq!(reg.get("da_val").unwrap().len(), 20);
        let specs = c.experiment_specs();
        assert_eq!(specs[0].seed, 5);
        assert_eq!(specs[1].seed, 9);
        match &specs[1].model {
            ModelSpec::Gbdt { params, .. } => {
                assert_eq!((params.n_rounds, params.max_depth), (3, 6))
            }
            _ => panic!("wrong kind"),
        }
        match &specs[0].model {
            ModelSpec::Gbdt { params, .. } => assert_eq!(params.n_rounds, 5),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn rejects_unknown_ids_and_missing_files() {
        let bad = SYNTH.replace(
            "fine_tuning = [\"da_train\"]\nvalidation = \"da_val\"\n\n[[",
            "fine_tuning = [\"nope\"]\nvalidation = \"da_val\"\n\n[[",
        );
        let err = RunConfig::from_toml(&bad, Path::new("."))
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");

        let missing = "[[datasets]]\nid = \"x\"\nformat = \"olid_labeled\"\nlanguage = \"en\"\npath = \"no/such.tsv\"\n";
        let err = RunConfig::from_toml(missing, Path::new("/tmp"))
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("no/such.tsv"), "{err}");

        let twice = format!(
            "{SYNTH}\n[[datasets]]\nid = \"da_val\"\nformat = \"synth\"\nlanguage = \"da\"\n"
        );
        assert!(RunConfig::from_toml(&twice, Path::new("."))
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err =
            RunConfig::from_toml("seed = 1\nmax_parallel = \"x\"\n", Path::new(".")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::from_toml("bogus_key = 1\n", Path::new(".")).is_err());
    }
}
