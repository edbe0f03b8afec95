use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dpmnl::data::{assemble_sources, center_covariates, expand_quadratic, generate, load_dataset, DataSchema, SimKind};
use dpmnl::diagnostics::split_rhat;
use dpmnl::engine::{layout_for, run_chains, ChainConfig, ExpertKind, MixtureKind};
use dpmnl::model::{Dataset, PriorSpec};
use dpmnl::predictor::{posterior_predictive, PredictorConfig};
use dpmnl::{Error, Result};

use crate::config::RunConfig;
use crate::metrics::{baseline_majority, evaluate, mean_sd, paired_t_test, MetricsReport};
use crate::mle::{fit_mnl_ml, predict_mnl};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Sim1,
    Sim2,
    Protein,
    ProteinHier,
    ProteinMultisource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    Baseline,
    MnlMl,
    Mnl,
    Qmnl,
    Cormnl,
    Dpmnl,
    Dpcormnl,
}

impl ModelId {
    pub fn label(self) -> &'static str {
        match self {
            ModelId::Baseline => "Baseline",
            ModelId::MnlMl => "MNL (ML)",
            ModelId::Mnl => "MNL",
            ModelId::Qmnl => "qMNL",
            ModelId::Cormnl => "corMNL",
            ModelId::Dpmnl => "dpMNL",
            ModelId::Dpcormnl => "dpCorMNL",
        }
    }

    fn is_mixture(self) -> bool {
        matches!(self, ModelId::Dpmnl | ModelId::Dpcormnl)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub repetitions: usize,
    /// Empty selects the experiment's standard model list.
    pub models: Vec<ModelId>,
    /// Ridge on the slopes of the maximum-likelihood MNL.
    pub ml_ridge: f64,
    /// Repetition `r` draws its data with seed `seed + r` and runs its
    /// chains from a fixed tag of that seed; `[sim] seed` and
    /// `[chain] seed` are not used.
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            id: ExperimentId::Sim1,
            repetitions: 10,
            models: Vec::new(),
            ml_ridge: 1e-4,
            seed: 1,
        }
    }
}

impl ExperimentSpec {
    pub fn models(&self) -> Vec<ModelId> {
        if !self.models.is_empty() {
            return self.models.clone();
        }
        use ModelId::*;
        match self.id {
            ExperimentId::Sim1 | ExperimentId::Sim2 => vec![Baseline, MnlMl, Mnl, Qmnl, Dpmnl],
            ExperimentId::Protein => vec![Baseline, Mnl, Dpmnl],
            ExperimentId::ProteinHier => vec![Baseline, Mnl, Cormnl, Dpmnl, Dpcormnl],
            ExperimentId::ProteinMultisource => vec![Mnl, Dpmnl],
        }
    }

    fn is_protein(&self) -> bool {
        !matches!(self.id, ExperimentId::Sim1 | ExperimentId::Sim2)
    }

    /// The prior used when the config has no `[prior]` section.
    pub fn default_prior(&self) -> PriorSpec {
        if self.is_protein() {
            PriorSpec::default()
        } else {
            PriorSpec::simulation()
        }
    }

    /// Chain settings used when the config has no `[chain]` section.
    pub fn default_chain(&self) -> ChainConfig {
        if self.is_protein() {
            ChainConfig {
                n_iterations: 10_000,
                burn_in: 1000,
                n_chains: 4,
                ..ChainConfig::default()
            }
        } else {
            ChainConfig::default()
        }
    }
}

/// One Bayesian fit's chain summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub repetition: usize,
    pub model: String,
    pub chain_mean_log_lik: Vec<f64>,
    pub hmc_acceptance: Vec<f64>,
    pub mean_components: Vec<f64>,
    /// Split R-hat of the training log likelihood across chains.
    pub rhat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub label: String,
    pub mixture: bool,
    pub metrics: Vec<MetricsReport>,
}

impl ModelRow {
    pub fn accuracies(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.accuracy).collect()
    }

    pub fn f1s(&self) -> Vec<f64> {
        self.metrics.iter().map(|m| m.f1).collect()
    }

    pub fn mean_accuracy(&self) -> f64 {
        mean_sd(&self.accuracies()).0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub id: ExperimentId,
    pub repetitions: usize,
    pub rows: Vec<ModelRow>,
    pub diagnostics: Vec<FitDiagnostics>,
    /// Largest `|sum_j p_j - 1|` over every predicted case.
    pub max_normalisation_error: f64,
    pub ml_ridge: f64,
}

impl ExperimentResult {
    pub fn row(&self, label: &str) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

const CHAIN_SEED_TAG: u64 = 0x00C4_A1B5_0000_0000;

pub fn data_seed(spec: &ExperimentSpec, repetition: usize) -> u64 {
    spec.seed.wrapping_add(repetition as u64)
}

pub fn chain_seed(spec: &ExperimentSpec, repetition: usize) -> u64 {
    data_seed(spec, repetition) ^ CHAIN_SEED_TAG
}

struct RepOutput {
    rows: Vec<(String, bool, MetricsReport)>,
    diagnostics: Vec<FitDiagnostics>,
    max_err: f64,
}

struct Split {
    train: Dataset<f64>,
    test: Dataset<f64>,
}

fn load_protein(cfg: &RunConfig, n_sources: Option<usize>) -> Result<Split> {
    let need = |p: &Option<std::path::PathBuf>, what: &str| {
        p.clone().ok_or_else(|| {
            Error::MissingInput(format!(
                "protein experiments need [data] {what}: a delimited file with the 1-based fold label \
                 first and the 21 precomputed features after it (Ding-Dubchak fold data, user supplied)"
            ))
        })
    };
    let schema = cfg.schema();
    let mut train = load_dataset(&need(&cfg.data.train, "train")?, &schema)?;
    let mut test = load_dataset(&need(&cfg.data.test, "test")?, &schema)?;
    let extra = n_sources.map_or(cfg.sources.train.len(), |k| k.saturating_sub(1));
    if extra > 0 {
        if cfg.sources.train.len() < extra || cfg.sources.test.len() < extra {
            return Err(Error::MissingInput(format!(
                "[sources] lists {} train and {} test files, {extra} needed",
                cfg.sources.train.len(),
                cfg.sources.test.len()
            )));
        }
        let plain = DataSchema {
            n_classes: schema.n_classes.or(Some(train.n_classes())),
            ..DataSchema::default()
        };
        let mut tr = vec![train.clone()];
        let mut te = vec![test.clone()];
        for s in 0..extra {
            tr.push(load_dataset(&cfg.sources.train[s], &plain)?);
            te.push(load_dataset(&cfg.sources.test[s], &plain)?);
        }
        train = assemble_sources(&tr)?;
        test = assemble_sources(&te)?;
    }
    if train.n_classes() != test.n_classes() {
        return Err(Error::Shape(format!(
            "train has {} classes and test has {}; set [data] n_classes",
            train.n_classes(),
            test.n_classes()
        )));
    }
    Ok(Split { train, test })
}

fn fit_predict(
    model: ModelId,
    split: &Split,
    prior: &PriorSpec,
    chain: &ChainConfig,
    predict: &PredictorConfig,
    repetition: usize,
) -> Result<(Vec<usize>, f64, FitDiagnostics)> {
    let (train, test) = if model == ModelId::Qmnl {
        (expand_quadratic(&split.train)?, expand_quadratic(&split.test)?)
    } else {
        (split.train.clone(), split.test.clone())
    };
    let expert = match model {
        ModelId::Cormnl | ModelId::Dpcormnl => ExpertKind::CorMnl,
        _ => ExpertKind::Mnl,
    };
    let mixture = if model.is_mixture() {
        MixtureKind::Dirichlet
    } else {
        MixtureKind::Single
    };
    let config = ChainConfig {
        expert,
        mixture,
        ..chain.clone()
    };
    let outputs = run_chains(&train, prior, &config)?;
    let layout = layout_for(&train, expert)?;
    let samples: Vec<_> = outputs.iter().flat_map(|o| o.samples.iter().cloned()).collect();
    let report = posterior_predictive(test.x(), &samples, prior, &layout, mixture, predict)?;
    let max_err = (0..report.probs.rows())
        .map(|i| (report.probs.row(i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let traces: Vec<Vec<f64>> = outputs
        .iter()
        .map(|o| o.samples.iter().map(|s| s.log_lik).collect())
        .collect();
    let diag = FitDiagnostics {
        repetition,
        model: model.label().to_string(),
        chain_mean_log_lik: traces.iter().map(|t| mean_sd(t).0).collect(),
        hmc_acceptance: outputs.iter().map(|o| o.stats.hmc_acceptance()).collect(),
        mean_components: outputs
            .iter()
            .map(|o| mean_sd(&o.samples.iter().map(|s| s.state.n_components() as f64).collect::<Vec<_>>()).0)
            .collect(),
        rhat: (traces.len() > 1).then(|| split_rhat(&traces)),
    };
    Ok((report.predicted, max_err, diag))
}

fn run_models(
    models: &[ModelId],
    split: &Split,
    suffix: &str,
    cfg: &RunConfig,
    spec: &ExperimentSpec,
    repetition: usize,
    out: &mut RepOutput,
) -> Result<()> {
    let prior = cfg.prior();
    let chain_base = cfg.chain();
    let seed = chain_seed(spec, repetition);
    let chain = ChainConfig { seed, ..chain_base };
    let predict = PredictorConfig {
        seed,
        ..cfg.predict.clone()
    };
    let hierarchy = split.test.hierarchy();
    let j = split.train.n_classes();
    for &model in models {
        let label = format!("{}{suffix}", model.label());
        let metrics = match model {
            ModelId::Baseline => baseline_majority(split.train.labels(), split.test.labels(), j, hierarchy)?,
            ModelId::MnlMl => {
                let fit = fit_mnl_ml(&split.train, spec.ml_ridge)?;
                evaluate(&predict_mnl(&fit.coef, split.test.x()), split.test.labels(), j, hierarchy)?
            }
            _ => {
                let (pred, err, diag) = fit_predict(model, split, &prior, &chain, &predict, repetition)?;
                out.max_err = out.max_err.max(err);
                out.diagnostics.push(FitDiagnostics { model: label.clone(), ..diag });
                evaluate(&pred, split.test.labels(), j, hierarchy)?
            }
        };
        out.rows.push((label, model.is_mixture(), metrics));
    }
    Ok(())
}

fn run_repetition(cfg: &RunConfig, spec: &ExperimentSpec, repetition: usize) -> Result<RepOutput> {
    let models = spec.models();
    let mut out = RepOutput {
        rows: Vec::new(),
        diagnostics: Vec::new(),
        max_err: 0.0,
    };
    match spec.id {
        ExperimentId::Sim1 | ExperimentId::Sim2 => {
            let sim = dpmnl::data::SimSpec {
                which: if spec.id == ExperimentId::Sim1 { SimKind::Sim1 } else { SimKind::Sim2 },
                seed: data_seed(spec, repetition),
                ..cfg.sim.clone()
            };
            let data = generate(&sim)?;
            let split = if cfg.data.center {
                let (train, test, _) = center_covariates(&data.train, &data.test)?;
                Split { train, test }
            } else {
                Split {
                    train: data.train,
                    test: data.test,
                }
            };
            run_models(&models, &split, "", cfg, spec, repetition, &mut out)?;
        }
        ExperimentId::Protein | ExperimentId::ProteinHier => {
            let raw = load_protein(cfg, None)?;
            let (train, test, _) = center_covariates(&raw.train, &raw.test)?;
            run_models(&models, &Split { train, test }, "", cfg, spec, repetition, &mut out)?;
        }
        ExperimentId::ProteinMultisource => {
            for k in 1..=cfg.sources.train.len() + 1 {
                let raw = load_protein(cfg, Some(k))?;
                let (train, test, _) = center_covariates(&raw.train, &raw.test)?;
                let suffix = format!(" [{k} source{}]", if k == 1 { "" } else { "s" });
                run_models(&models, &Split { train, test }, &suffix, cfg, spec, repetition, &mut out)?;
            }
        }
    }
    Ok(out)
}

/// Runs every repetition (in parallel) and gathers per-model metrics in
/// repetition order.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    let spec = &cfg.experiment;
    if spec.repetitions == 0 {
        return Err(Error::Config("experiment repetitions must be at least 1".into()));
    }
    let reps: Vec<RepOutput> = (0..spec.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(cfg, spec, r))
        .collect::<Result<_>>()?;
    let mut rows: Vec<ModelRow> = Vec::new();
    let mut diagnostics = Vec::new();
    let mut max_err: f64 = 0.0;
    for rep in reps {
        for (label, mixture, m) in rep.rows {
            match rows.iter_mut().find(|r| r.label == label) {
                Some(row) => row.metrics.push(m),
                None => rows.push(ModelRow {
                    label,
                    mixture,
                    metrics: vec![m],
                }),
            }
        }
        diagnostics.extend(rep.diagnostics);
        max_err = max_err.max(rep.max_err);
    }
    Ok(ExperimentResult {
        id: spec.id,
        repetitions: spec.repetitions,
        rows,
        diagnostics,
        max_normalisation_error: max_err,
        ml_ridge: spec.ml_ridge,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.2}"))
}

fn fmt_p(v: Option<f64>) -> String {
    v.map_or(String::new(), |p| if p < 1e-4 { format!("{p:.2e}") } else { format!("{p:.4}") })
}

fn source_suffix(label: &str) -> &str {
    label.find(" [").map_or("", |k| &label[k..])
}

struct TableRow {
    label: String,
    acc: f64,
    acc_sd: Option<f64>,
    f1: f64,
    f1_sd: Option<f64>,
    parent: Option<f64>,
    p_value: Option<f64>,
}

fn table_rows(result: &ExperimentResult) -> Result<Vec<TableRow>> {
    let mut out = Vec::new();
    for row in &result.rows {
        // Compare against the first mixture model fitted on the same inputs.
        let suffix = source_suffix(&row.label);
        let reference = result.rows.iter().find(|r| r.mixture && source_suffix(&r.label) == suffix);
        let p_value = match reference {
            Some(r) if r.label != row.label => {
                paired_t_test(&r.accuracies(), &row.accuracies())?.map(|t| t.p_value)
            }
            _ => None,
        };
        let (acc, acc_sd) = mean_sd(&row.accuracies());
        let (f1, f1_sd) = mean_sd(&row.f1s());
        let parents: Vec<f64> = row.metrics.iter().filter_map(|m| m.parent_accuracy).collect();
        out.push(TableRow {
            label: row.label.clone(),
            acc,
            acc_sd,
            f1,
            f1_sd,
            parent: (!parents.is_empty()).then(|| mean_sd(&parents).0),
            p_value,
        });
    }
    Ok(out)
}

/// Aligned plain-text table.
pub fn render_table(result: &ExperimentResult) -> Result<String> {
    let rows = table_rows(result)?;
    let with_parent = rows.iter().any(|r| r.parent.is_some());
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut s = String::new();
    let id = serde_json::to_value(result.id)?;
    writeln!(
        s,
        "experiment {}  repetitions {}  ml-ridge {}",
        id.as_str().unwrap_or_default(),
        result.repetitions,
        result.ml_ridge
    )
    .unwrap();
    let mut header = format!("{:<width$}  {:>8}  {:>6}  {:>8}  {:>6}", "model", "acc(%)", "sd", "F1(%)", "sd");
    if with_parent {
        header.push_str(&format!("  {:>10}", "parent(%)"));
    }
    header.push_str(&format!("  {:>10}", "p(acc)"));
    writeln!(s, "{header}").unwrap();
    writeln!(s, "{}", "-".repeat(header.len())).unwrap();
    for r in &rows {
        let mut line = format!(
            "{:<width$}  {:>8.2}  {:>6}  {:>8.2}  {:>6}",
            r.label,
            r.acc,
            fmt_opt(r.acc_sd),
            r.f1,
            fmt_opt(r.f1_sd)
        );
        if with_parent {
            line.push_str(&format!("  {:>10}", fmt_opt(r.parent)));
        }
        line.push_str(&format!("  {:>10}", fmt_p(r.p_value)));
        writeln!(s, "{}", line.trim_end()).unwrap();
    }
    Ok(s)
}

/// Tab-separated copy of [`render_table`] with full precision.
pub fn render_tsv(result: &ExperimentResult) -> Result<String> {
    let mut s = String::from("model\taccuracy\taccuracy_sd\tf1\tf1_sd\tparent_accuracy\tp_value\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in table_rows(result)? {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.label,
            r.acc,
            opt(r.acc_sd),
            r.f1,
            opt(r.f1_sd),
            opt(r.parent),
            opt(r.p_value)
        )
        .unwrap();
    }
    Ok(s)
}

/// Per-repetition, per-model chain summaries.
pub fn render_diagnostics(result: &ExperimentResult) -> String {
    let mut s = String::from("repetition\tmodel\tchain\tmean_log_lik\thmc_acceptance\tmean_components\trhat\n");
    for d in &result.diagnostics {
        for c in 0..d.chain_mean_log_lik.len() {
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                d.repetition + 1,
                d.model,
                c + 1,
                d.chain_mean_log_lik[c],
                d.hmc_acceptance[c],
                d.mean_components[c],
                d.rhat.map_or(String::new(), |r| r.to_string())
            )
            .unwrap();
        }
    }
    s
}
