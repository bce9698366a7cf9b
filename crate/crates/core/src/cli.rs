//! The `offdetect` command line.
//!
//! Results go to stdout or files. Stderr carries one JSON object per line:
//! progress records, `{"event":"error",...}` on failure.
//!
//! Exit codes: 0 success, 1 usage, 2 data or configuration error, 3 internal.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::config::{ModelKind, RunConfig};
use crate::corpus::{
    concat_datasets, parse_labeled_tsv, write_labeled_tsv, Dataset, DatasetMeta, Label, StatsTable,
    TsvFormat,
};
use crate::error::{Error, Result};
use crate::eval::{
    best_per_validation, confusion, metrics, render_report, run_experiment_matrix, ReportFormat,
    SelectBy,
};
use crate::features::{FeatureConfig, Featurizer};
use crate::pipeline::{Classifier, ProgressRecord};
use crate::resources::Resources;
use crate::synth::{write_synth_tsv, SynthOptions, SynthSpec};

#[derive(Debug, Parser)]
#[command(
    name = "offdetect",
    version,
    about = "Offensive-language detection for tweets"
)]
pub struct Cli {
    /// Resource directory; overrides the config and OFFDETECT_RESOURCES.
    #[arg(long, global = true, value_name = "DIR")]
    pub resources: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse every configured dataset, write canonical TSVs, print statistics.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Normalize emoji and hashtags; writes `id<TAB>tweet`.
    Preprocess(IoArgs),
    /// Fit the feature extractor on the input and write one JSON row per sample.
    Featurize {
        #[command(flatten)]
        io: IoArgs,
        /// Takes the `[features]` section from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one model on one or more configured datasets.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Repeat to train on the concatenation.
        #[arg(long = "dataset", required = true)]
        datasets: Vec<String>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a saved model on labeled data and print metrics as JSON.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Configured dataset id; needs --config.
        #[arg(long, requires = "config", conflicts_with = "input")]
        dataset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Labeled TSV in the `id<TAB>tweet<TAB>subtask_a` format.
        #[arg(long, required_unless_present = "dataset")]
        input: Option<PathBuf>,
    },
    /// Run the configured experiment matrix and write reports.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        max_parallel: Option<usize>,
        /// Replaces the top-level seed; per-experiment seeds still win.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        select_by: Option<SelectArg>,
    },
    /// Label an `id<TAB>tweet` file with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        io: IoArgs,
        /// Write `id<TAB>tweet<TAB>subtask_a` instead of `id<TAB>label`.
        #[arg(long)]
        with_text: bool,
    },
    /// Write a synthetic labeled corpus.
    Synth {
        #[arg(long)]
        language: String,
        #[arg(long, default_value_t = SynthOptions::default().n_samples)]
        n_samples: usize,
        #[arg(long, default_value_t = SynthOptions::default().positive_ratio)]
        positive_ratio: f64,
        #[arg(long, default_value_t = SynthOptions::default().noise_rate)]
        noise_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Input TSV, `-` for stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Unlabeled)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Gbdt,
    Transformer,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectArg {
    F1Positive,
    F1Macro,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    OlidLabeled,
    ScoredEnglish,
    Unlabeled,
}

impl From<FormatArg> for TsvFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::OlidLabeled => TsvFormat::OlidLabeled,
            FormatArg::ScoredEnglish => TsvFormat::ScoredEnglish,
            FormatArg::Unlabeled => TsvFormat::Unlabeled,
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Run(e) => e.exit_code(),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut log = Log(stderr);
    match execute(cli, stdout, &mut log) {
        Ok(()) => 0,
        Err(f) => {
            let code = f.exit_code();
            log.emit(json!({"event": "error", "code": code, "message": f.to_string()}));
            code
        }
    }
}

struct Log<'a>(&'a mut dyn Write);

impl Log<'_> {
    fn emit(&mut self, v: Value) {
        let _ = writeln!(self.0, "{v}");
    }

    fn progress(&mut self, extra: Value, records: &[ProgressRecord]) {
        for r in records {
            let mut v =
                json!({"event": "progress", "unit": r.unit, "step": r.step, "loss": r.loss});
            if let (Some(obj), Value::Object(e)) = (v.as_object_mut(), &extra) {
                obj.extend(e.clone());
            }
            self.emit(v);
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write, log: &mut Log) -> std::result::Result<(), Failure> {
    let resources_flag = cli.resources;
    let resources = |cfg: Option<&RunConfig>| -> Result<Resources> {
        let dir = resources_flag
            .as_deref()
            .or_else(|| cfg.and_then(|c| c.resources_dir.as_deref()));
        Resources::resolve(dir)
    };
    match cli.command {
        Command::Ingest { config, output_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let datasets = cfg.load_datasets()?;
            create_dir(&cfg.output_dir)?;
            let mut metas = Vec::new();
            for d in &datasets {
                let path = cfg.output_dir.join(format!("{}.tsv", d.name));
                write_labeled_tsv(d, create(&path)?)?;
                let meta = DatasetMeta::of(d)?;
                log.emit(
                    json!({"event": "ingested", "id": d.name, "samples": meta.count,
                    "positives": meta.positives, "path": path.display().to_string()}),
                );
                metas.push(meta);
            }
            write!(stdout, "{}", StatsTable(&metas)).map_err(stdout_err)?;
        }
        Command::Preprocess(io) => {
            let res = resources(None)?;
            let d = read_dataset(&io.input, io.format.into())?;
            let mut out = open_output(io.output.as_deref(), stdout)?;
            let e = |err| Error::io("output", err);
            writeln!(out, "id\ttweet").map_err(e)?;
            for s in &d.samples {
                writeln!(
                    out,
                    "{}\t{}",
                    s.id,
                    sanitize(&res.preprocessor.apply(&s.text))
                )
                .map_err(e)?;
            }
            out.flush().map_err(e)?;
        }
        Command::Featurize { io, config } => {
            let (features, cfg) = match &config {
                Some(p) => {
                    let c = RunConfig::load(p)?;
                    (c.features.clone(), Some(c))
                }
                None => (FeatureConfig::default(), None),
            };
            let res = resources(cfg.as_ref())?;
            let d = read_dataset(&io.input, io.format.into())?;
            if d.is_empty() {
                return Err(Error::invalid("no samples to featurize").into());
            }
            let texts: Vec<String> = d
                .samples
                .iter()
                .map(|s| res.preprocessor.apply(&s.text))
                .collect();
            let featurizer = Featurizer::fit(&texts, features, res.lexicons.clone())?;
            let layout = featurizer.layout();
            log.emit(json!({"event": "fitted", "samples": d.len(), "features": layout.n_features}));
            let mut out = open_output(io.output.as_deref(), stdout)?;
            for (s, t) in d.samples.iter().zip(&texts) {
                let row = featurizer.transform(t)?.to_row(&layout);
                let mut feats = serde_json::Map::new();
                for (c, v) in row {
                    let name = featurizer
                        .column_name(c)
                        .ok_or_else(|| Error::Internal(format!("column {c} has no name")))?;
                    feats.insert(name, json!(v));
                }
                writeln!(out, "{}", json!({"id": s.id, "features": feats}))
                    .map_err(|e| Error::io("output", e))?;
            }
            out.flush().map_err(|e| Error::io("output", e))?;
        }
        Command::Train {
            config,
            model,
            datasets,
            output,
            seed,
        } => {
            let cfg = RunConfig::load(&config)?;
            let res = resources(Some(&cfg))?;
            let reg = cfg.registry()?;
            let parts: Vec<&Dataset> = datasets
                .iter()
                .map(|id| reg.get(id))
                .collect::<Result<_>>()?;
            let train = concat_datasets(&parts, &datasets.join(" + "))?;
            let kind = match model {
                ModelArg::Gbdt => ModelKind::Gbdt,
                ModelArg::Transformer => ModelKind::Transformer,
            };
            let trained = Classifier::train(
                &cfg.model_spec(kind),
                &train,
                &res,
                seed.unwrap_or(cfg.seed),
            )?;
            log.progress(json!({}), &trained.progress);
            trained.classifier.save(&output)?;
            log.emit(
                json!({"event": "saved", "model": trained.classifier.kind_name(),
                "samples": train.len(), "path": output.display().to_string()}),
            );
        }
        Command::Evaluate {
            model,
            dataset,
            config,
            input,
        } => {
            let clf = Classifier::load(&model)?;
            let data = match (dataset, config, input) {
                (Some(id), Some(cfg), _) => {
                    let cfg = RunConfig::load(&cfg)?;
                    let reg = cfg.registry()?;
                    reg.get(&id)?.clone()
                }
                (_, _, Some(path)) => read_dataset(&path, TsvFormat::OlidLabeled)?,
                _ => {
                    return Err(Failure::Usage(
                        "evaluate needs --dataset with --config, or --input".into(),
                    ))
                }
            };
            let preds = clf.predict(&data.texts())?;
            let cm = confusion(&preds, &data.labels()?)?;
            let m = metrics(&cm)?;
            writeln!(
                stdout,
                "{}",
                json!({"model": clf.kind_name(), "dataset": data.name, "samples": data.len(),
                "confusion": cm, "metrics": m})
            )
            .map_err(stdout_err)?;
        }
        Command::Experiment {
            config,
            output_dir,
            max_parallel,
            seed,
            select_by,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(p) = max_parallel {
                cfg.max_parallel = p;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(b) = select_by {
                cfg.select_by = match b {
                    SelectArg::F1Positive => SelectBy::F1Positive,
                    SelectArg::F1Macro => SelectBy::F1Macro,
                };
            }
            cfg.validate()?;
            if cfg.experiments.is_empty() {
                return Err(Failure::Usage(format!(
                    "{}: no [[experiments]] declared",
                    config.display()
                )));
            }
            let res = resources(Some(&cfg))?;
            let reg = cfg.registry()?;
            let specs = cfg.experiment_specs();
            let results = run_experiment_matrix(&specs, &reg, &res, cfg.max_parallel)?;
            for (i, r) in results.iter().enumerate() {
                log.progress(json!({"experiment": i}), &r.progress);
                log.emit(json!({"event": "cell", "experiment": i, "name": r.spec.name,
                    "fine_tuning": r.spec.fine_tuning_label(), "validation": r.spec.validation,
                    "train_size": r.train_size, "f1": r.metrics.f1_positive, "f1_macro": r.metrics.f1_macro}));
            }
            create_dir(&cfg.output_dir)?;
            for (format, file) in [
                (ReportFormat::Markdown, "report.md"),
                (ReportFormat::Csv, "report.csv"),
            ] {
                let path = cfg.output_dir.join(file);
                let text = render_report(&results, format, cfg.select_by)?;
                std::fs::write(&path, text)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                log.emit(json!({"event": "report", "path": path.display().to_string()}));
            }
            for (validation, i) in best_per_validation(&results, cfg.select_by) {
                let r = &results[i];
                writeln!(
                    stdout,
                    "best\t{validation}\t{}\t{}\tF1={:.2}\tMacro-F1={:.2}",
                    r.spec.name,
                    r.spec.fine_tuning_label(),
                    100.0 * r.metrics.f1_positive,
                    100.0 * r.metrics.f1_macro
                )
                .map_err(stdout_err)?;
            }
        }
        Command::Predict {
            model,
            io,
            with_text,
        } => {
            let clf = Classifier::load(&model)?;
            let mut d = read_dataset(&io.input, io.format.into())?;
            let preds = if d.is_empty() {
                Vec::new()
            } else {
                clf.predict(&d.texts())?
            };
            let mut out = open_output(io.output.as_deref(), stdout)?;
            let e = |err| Error::io("output", err);
            if with_text {
                for (s, p) in d.samples.iter_mut().zip(&preds) {
                    s.label = Some(*p);
                }
                write_labeled_tsv(&d, &mut out)?;
            } else {
                writeln!(out, "id\tlabel").map_err(e)?;
                for (s, p) in d.samples.iter().zip(&preds) {
                    writeln!(out, "{}\t{}", s.id, p.tag()).map_err(e)?;
                }
            }
            out.flush().map_err(e)?;
            let positives = preds.iter().filter(|p| p.is_positive()).count();
            log.emit(json!({"event": "predicted", "samples": preds.len(), "offensive": positives}));
        }
        Command::Synth {
            language,
            n_samples,
            positive_ratio,
            noise_rate,
            seed,
            output,
        } => {
            let spec = SynthSpec::for_language(
                &language,
                &SynthOptions {
                    n_samples,
                    positive_ratio,
                    noise_rate,
                    seed,
                    ..Default::default()
                },
            );
            let mut out = open_output(output.as_deref(), stdout)?;
            let d = write_synth_tsv(&spec, &mut out)?;
            out.flush().map_err(|e| Error::io("output", e))?;
            let positives = d
                .samples
                .iter()
                .filter(|s| s.label == Some(Label::Positive))
                .count();
            log.emit(json!({"event": "synthesized", "language": language, "samples": d.len(), "positives": positives}));
        }
    }
    Ok(())
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("stdout", e)
}

fn sanitize(text: &str) -> String {
    text.replace(['\t', '\n', '\r'], " ")
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn create(path: &Path) -> Result<io::BufWriter<File>> {
    File::create(path)
        .map(io::BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn open_output<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    match path {
        Some(p) if p != Path::new("-") => Ok(Box::new(create(p)?)),
        _ => Ok(Box::new(stdout)),
    }
}

/// Reads a TSV file or stdin (`-`). Parse errors name the file.
fn read_dataset(path: &Path, format: TsvFormat) -> Result<Dataset> {
    let name = if path == Path::new("-") {
        "stdin".to_string()
    } else {
        path.file_stem()
            .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
    };
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Error::io("stdin", e))?;
        Box::new(io::Cursor::new(buf))
    } else {
        let f = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Box::new(BufReader::new(f))
    };
    parse_labeled_tsv(reader, format, &name, "").map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}
