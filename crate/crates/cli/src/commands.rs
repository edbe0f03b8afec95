//! The subcommands, callable without going through argument parsing.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dpmnl::data::{center_covariates, expand_quadratic, generate, load_dataset, load_hierarchy, save_dataset, SimSpec, SimTruth};
use dpmnl::engine::{data_checksum, layout_for, read_trace, run_chains, write_trace, PosteriorSample, TraceHeader};
use dpmnl::model::Dataset;
use dpmnl::predictor::{posterior_predictive, read_predictions, write_predictions};
use dpmnl::{Error, Result};

use crate::config::RunConfig;
use crate::experiment::{render_diagnostics, render_table, render_tsv, run_experiment, ExperimentResult};
use crate::metrics::{evaluate, MetricsReport};

pub const TRANSFORM_FILE: &str = "transform.json";

/// Covariate preprocessing fixed at training time and replayed on new
/// cases before prediction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub means: Option<Vec<f64>>,
    pub quadratic: bool,
}

impl Transform {
    pub fn apply(&self, data: &Dataset<f64>) -> Result<Dataset<f64>> {
        let mut out = data.clone();
        if let Some(means) = &self.means {
            if means.len() != data.p() {
                return Err(Error::Shape(format!(
                    "model was trained on {} covariates, input has {}",
                    means.len(),
                    data.p()
                )));
            }
            for i in 0..out.n() {
                for (v, m) in out.x_mut().row_mut(i).iter_mut().zip(means) {
                    *v -= m;
                }
            }
        }
        if self.quadratic {
            out = expand_quadratic(&out)?;
        }
        Ok(out)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::MissingInput(format!("cannot open {}: {e}", path.display())))
}

/// Draws a synthetic study and writes `train.csv`, `test.csv` and
/// `truth.json` into `out`.
pub fn simulate(spec: &SimSpec, out: &Path) -> Result<()> {
    let data = generate(spec)?;
    fs::create_dir_all(out)?;
    save_dataset(&out.join("train.csv"), &data.train)?;
    save_dataset(&out.join("test.csv"), &data.test)?;
    #[derive(Serialize)]
    struct Truth<'a> {
        spec: &'a SimSpec,
        truth: &'a SimTruth,
        train_component: &'a [usize],
        test_component: &'a [usize],
    }
    let truth = Truth {
        spec,
        truth: &data.truth,
        train_component: &data.train_component,
        test_component: &data.test_component,
    };
    write_file(&out.join("truth.json"), &serde_json::to_string_pretty(&truth)?)
}

fn load_input(cfg: &RunConfig, path: &Path) -> Result<Dataset<f64>> {
    load_dataset(path, &cfg.schema())
}

/// Fits the model to `train` and writes `chain-<k>.jsonl` per chain plus
/// the covariate transform into `out`. Returns the trace paths.
pub fn train(cfg: &RunConfig, train: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let raw = load_input(cfg, train)?;
    let means = if cfg.data.center {
        Some(center_covariates(&raw, &raw)?.2)
    } else {
        None
    };
    let transform = Transform {
        means,
        quadratic: cfg.data.quadratic,
    };
    let data = transform.apply(&raw)?;
    let prior = cfg.prior();
    let chain = cfg.chain();
    let outputs = run_chains(&data, &prior, &chain)?;
    let layout = layout_for(&data, chain.expert)?;
    fs::create_dir_all(out)?;
    write_file(&out.join(TRANSFORM_FILE), &serde_json::to_string_pretty(&transform)?)?;
    let mut paths = Vec::new();
    for o in &outputs {
        let header = TraceHeader::new(&data, &chain, &prior, &layout, o.chain, o.stats.clone());
        let path = out.join(format!("chain-{}.jsonl", o.chain + 1));
        write_trace(BufWriter::new(File::create(&path)?), &header, &o.samples)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Every `chain-*.jsonl` in `dir`, in name order.
pub fn trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::MissingInput(format!("cannot read trace directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("chain-") && n.ends_with(".jsonl"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MissingInput(format!("no chain-*.jsonl traces in {}", dir.display())));
    }
    Ok(paths)
}

/// Reads every trace in `dir` and checks they come from one fit.
pub fn load_traces(dir: &Path) -> Result<(TraceHeader, Vec<PosteriorSample<f64>>)> {
    let mut first: Option<TraceHeader> = None;
    let mut samples = Vec::new();
    for path in trace_files(dir)? {
        let (header, s) = read_trace::<f64, _>(open(&path)?).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        if let Some(f) = &first {
            if f.data_checksum != header.data_checksum || f.layout != header.layout || f.prior != header.prior {
                return Err(Error::InvalidParameter(format!(
                    "{} was not produced by the same fit as the other traces",
                    path.display()
                )));
            }
        } else {
            first = Some(header);
        }
        samples.extend(s);
    }
    Ok((first.expect("at least one trace"), samples))
}

/// Posterior predictive probabilities for the cases in `input`, written to
/// `out`. When `train` is given its checksum must match the traces.
pub fn predict(
    cfg: &RunConfig,
    traces: &Path,
    input: &Path,
    train: Option<&Path>,
    out: &Path,
) -> Result<MetricsReport> {
    let (header, samples) = load_traces(traces)?;
    let transform: Transform = match fs::read_to_string(traces.join(TRANSFORM_FILE)) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => Transform::default(),
    };
    if let Some(path) = train {
        let data = transform.apply(&load_input(cfg, path)?)?;
        let sum = data_checksum(&data);
        if sum != header.data_checksum {
            return Err(Error::InvalidParameter(format!(
                "{} does not match the training data recorded in the traces",
                path.display()
            )));
        }
    }
    let data = transform.apply(&load_input(cfg, input)?)?;
    if data.p() != header.layout.p {
        return Err(Error::Shape(format!(
            "traces expect {} covariates, input has {}",
            header.layout.p,
            data.p()
        )));
    }
    let report = posterior_predictive(data.x(), &samples, &header.prior, &header.layout, header.config.mixture, &cfg.predict)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_predictions(BufWriter::new(File::create(out)?), &report)?;
    evaluate(&report.predicted, data.labels(), header.layout.n_classes.max(data.n_classes()), None)
}

/// Scores a predictions file against the labels of `truth`.
pub fn evaluate_files(cfg: &RunConfig, predictions: &Path, truth: &Path) -> Result<MetricsReport> {
    let (predicted, probs) = read_predictions(open(predictions)?)?;
    let data = load_input(cfg, truth)?;
    let j = probs.cols().max(data.n_classes());
    let hierarchy = match &cfg.hierarchy.path {
        Some(p) => Some(load_hierarchy(p, j)?),
        None => None,
    };
    evaluate(&predicted, data.labels(), j, hierarchy.as_ref())
}

pub fn render_metrics(m: &MetricsReport) -> String {
    let mut s = format!("cases     {}\naccuracy  {:.2}%\nmacro F1  {:.2}%\n", m.n, m.accuracy, m.f1);
    if let Some(p) = m.parent_accuracy {
        s.push_str(&format!("parent    {p:.2}%\n"));
    }
    s
}

/// Runs the configured experiment; with `out`, writes `results.tsv`,
/// `diagnostics.tsv` and `results.json` there.
pub fn experiment(cfg: &RunConfig, out: Option<&Path>) -> Result<(ExperimentResult, String)> {
    let result = run_experiment(cfg)?;
    let table = render_table(&result)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("results.tsv"), &render_tsv(&result)?)?;
        write_file(&dir.join("diagnostics.tsv"), &render_diagnostics(&result))?;
        write_file(&dir.join("results.json"), &serde_json::to_string_pretty(&result)?)?;
    }
    Ok((result, table))
}
