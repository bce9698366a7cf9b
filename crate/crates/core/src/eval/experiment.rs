use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{concat_datasets, Dataset};
use crate::error::{Error, Result};
use crate::eval::metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
use crate::pipeline::{Classifier, ModelSpec, ProgressRecord};
use crate::resources::Resources;

/// Named datasets available to an experiment matrix.
#[derive(Debug, Clone, Default)]
pub struct DatasetRegistry {
    datasets: BTreeMap<String, Dataset>,
}

impl DatasetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers under the dataset's own name; a repeated name is an error.
    pub fn insert(&mut self, dataset: Dataset) -> Result<()> {
        if self.datasets.contains_key(&dataset.name) {
            return Err(Error::Config(format!(
                "dataset {} registered twice",
                dataset.name
            )));
        }
        self.datasets.insert(dataset.name.clone(), dataset);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&Dataset> {
        self.datasets
            .get(id)
            .ok_or_else(|| Error::Config(format!("unknown dataset id {id:?}")))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.datasets.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }
}

/// One cell of the matrix: train on the concatenation of `fine_tuning`,
/// evaluate on `validation`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Shown in the Model column of reports.
    pub name: String,
    pub model: ModelSpec,
    pub fine_tuning: Vec<String>,
    pub validation: String,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Fine-tuning ids joined with " + ".
    pub fn fine_tuning_label(&self) -> String {
        self.fine_tuning.join(" + ")
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub progress: Vec<ProgressRecord>,
    pub train_size: usize,
}

/// Which score `select_best` maximises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectBy {
    #[default]
    F1Positive,
    F1Macro,
}

/// Resolves every dataset id before any training starts.
fn check_specs(specs: &[ExperimentSpec], registry: &DatasetRegistry) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("experiment matrix is empty".into()));
    }
    for s in specs {
        if s.fine_tuning.is_empty() {
            return Err(Error::Config(format!(
                "experiment {:?} has no fine-tuning datasets",
                s.name
            )));
        }
        for id in s.fine_tuning.iter().chain(std::iter::once(&s.validation)) {
            registry
                .get(id)
                .map_err(|e| Error::Config(format!("experiment {:?}: {e}", s.name)))?;
        }
    }
    Ok(())
}

/// Trains and evaluates one cell.
pub fn run_experiment(
    spec: &ExperimentSpec,
    registry: &DatasetRegistry,
    resources: &Resources,
) -> Result<ExperimentResult> {
    let parts: Vec<&Dataset> = spec
        .fine_tuning
        .iter()
        .map(|id| registry.get(id))
        .collect::<Result<_>>()?;
    let train = concat_datasets(&parts, &spec.fine_tuning_label())?;
    let validation = registry.get(&spec.validation)?;
    let trained = Classifier::train(&spec.model, &train, resources, spec.seed)?;
    let preds = trained.classifier.predict(&validation.texts())?;
    let cm = confusion(&preds, &validation.labels()?)?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        confusion: cm,
        metrics: metrics(&cm)?,
        progress: trained.progress,
        train_size: train.len(),
    })
}

/// Runs every spec, up to `max_parallel` at a time. Results come back in
/// spec order whatever the completion order. A failing cell aborts the run
/// with an error naming it.
pub fn run_experiment_matrix(
    specs: &[ExperimentSpec],
    registry: &DatasetRegistry,
    resources: &Resources,
    max_parallel: usize,
) -> Result<Vec<ExperimentResult>> {
    check_specs(specs, registry)?;
    let run = |s: &ExperimentSpec| {
        run_experiment(s, registry, resources).map_err(|e| match e {
            Error::Internal(m) => Error::Internal(format!("experiment {:?}: {m}", s.name)),
            other => Error::InvalidInput(format!("experiment {:?}: {other}", s.name)),
        })
    };
    if max_parallel <= 1 {
        return specs.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_parallel)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| specs.par_iter().map(run).collect())
}

fn key(r: &ExperimentResult, by: SelectBy) -> f64 {
    match by {
        SelectBy::F1Positive => r.metrics.f1_positive,
        SelectBy::F1Macro => r.metrics.f1_macro,
    }
}

/// Index of the highest-scoring result; ties go to higher accuracy, then
/// to the earlier row. `None` for an empty slice.
pub fn select_best(results: &[ExperimentResult], by: SelectBy) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (kb, ki) = (key(&results[b], by), key(r, by));
                let better =
                    ki > kb || (ki == kb && r.metrics.accuracy > results[b].metrics.accuracy);
                Some(if better { i } else { b })
            }
        };
    }
    best
}

/// Best result per validation set, in first-appearance order of the sets.
pub fn best_per_validation(results: &[ExperimentResult], by: SelectBy) -> Vec<(String, usize)> {
    let mut order: Vec<String> = Vec::new();
    for r in results {
        if !order.contains(&r.spec.validation) {
            order.push(r.spec.validation.clone());
        }
    }
    order
        .into_iter()
        .filter_map(|v| {
            let idx: Vec<usize> = (0..results.len())
                .filter(|&i| results[i].spec.validation == v)
                .collect();
            let subset: Vec<ExperimentResult> = idx.iter().map(|&i| results[i].clone()).collect();
            select_best(&subset, by).map(|k| (v, idx[k]))
        })
        .collect()
}
