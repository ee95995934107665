use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig};
use super::train::{train_ensemble, TrainedModel};
use crate::data::{
    gen_sine, gen_skew_normal, load_delimited, split, Dataset, NormStats, SplitSpec,
};
use crate::ensemble::{aggregate_gaussian, aggregate_pi, EnsembleOutput};
use crate::error::{Error, Result};
use crate::loss::{gaussian_variance, PIOutput, Variant};
use crate::metrics::{aggregate_splits, AggregateMetrics, MetricsRecord};

/// Version tag written into every report and sweep file.
pub const FORMAT_VERSION: u32 = 1;

/// Offset separating the held-out draw of a synthetic split from its
/// training draw.
const HOLDOUT_SEED_OFFSET: u64 = 1 << 32;

/// Standardized train/valid/test rows of one split.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: Dataset,
    pub valid: Option<Dataset>,
    pub test: Dataset,
    pub stats: NormStats,
}

/// Per-sample test predictions of one split, in original target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPredictions {
    pub split: usize,
    pub y: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Training loss every `loss_curve_stride` epochs, starting at epoch 0.
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Metrics on the standardized target scale.
    pub normalized: MetricsRecord,
    /// Metrics in original target units.
    pub denormalized: MetricsRecord,
    pub members: Vec<MemberSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFailure {
    pub split: usize,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub splits: Vec<SplitResult>,
    pub failures: Vec<SplitFailure>,
    /// Mean and standard error across successful splits; absent when every
    /// split failed.
    pub aggregate_normalized: Option<AggregateMetrics>,
    pub aggregate_denormalized: Option<AggregateMetrics>,
    pub partial: bool,
    pub wall_clock_secs: f64,
    /// Written to a separate table; not part of the structured report.
    #[serde(skip)]
    pub predictions: Vec<SplitPredictions>,
}

impl RunReport {
    /// Metrics in the units used for headline tables: PICP and MPIW on the
    /// standardized scale, RMSE and MAE in original units.
    pub fn headline(&self) -> Option<AggregateMetrics> {
        let (n, d) = (self.aggregate_normalized?, self.aggregate_denormalized?);
        Some(AggregateMetrics {
            picp: n.picp,
            mpiw: n.mpiw,
            rmse: d.rmse,
            mae: d.mae,
            splits: n.splits,
        })
    }
}

/// Raw data for a run: a fixed table, or a generator sampled per split.
#[derive(Debug, Clone)]
pub enum Source {
    Table(Dataset),
    Synthetic,
}

pub fn load_source(config: &ExperimentConfig) -> Result<Source> {
    let d = &config.dataset;
    match d.source {
        DataSource::File => {
            let path = d
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("file dataset needs a path".into()))?;
            Ok(Source::Table(load_delimited(
                path,
                &d.target,
                d.delimiter,
                &d.ignore_columns,
            )?))
        }
        DataSource::Sine | DataSource::SkewNormal => Ok(Source::Synthetic),
    }
}

fn generate(config: &ExperimentConfig, n: usize, seed: u64) -> Result<Dataset> {
    let spec = crate::data::SineSpec {
        n,
        ..config.dataset.synthetic
    };
    match config.dataset.source {
        DataSource::SkewNormal => gen_skew_normal(&spec, seed),
        _ => gen_sine(&spec, seed),
    }
}

/// Builds split `k`: a seeded train/test split of a table, or for synthetic
/// sources a fresh training draw plus an independent held-out draw. The
/// standardization is fit on the training portion, then a seeded share of
/// it is held out for early stopping.
pub fn prepare_split(
    config: &ExperimentConfig,
    source: &Source,
    k: usize,
) -> Result<PreparedSplit> {
    let plan = &config.splits;
    let (train_raw, test_raw) = match source {
        Source::Table(ds) => split(
            ds,
            &SplitSpec::new(plan.test_fraction, plan.seed, k as u64)?,
        ),
        Source::Synthetic => {
            let seed = plan.seed.wrapping_add(k as u64);
            (
                generate(config, config.dataset.synthetic.n, seed)?,
                generate(
                    config,
                    config.dataset.holdout_n,
                    seed.wrapping_add(HOLDOUT_SEED_OFFSET),
                )?,
            )
        }
    };
    let stats = NormStats::fit(&train_raw)?;
    let train_all = stats.apply(&train_raw)?;
    let test = stats.apply(&test_raw)?;
    let vf = config.optimizer.validation_fraction;
    let (train, valid) = if vf > 0.0 && train_all.len() >= 2 {
        let spec = SplitSpec::new(vf, plan.seed.wrapping_add(1), k as u64)?;
        let (t, v) = split(&train_all, &spec);
        (t, Some(v))
    } else {
        (train_all, None)
    };
    Ok(PreparedSplit {
        train,
        valid,
        test,
        stats,
    })
}

/// Ensemble prediction on `data`, on the standardized scale.
///
/// Midpoint variants report the midpoint of the aggregated interval.
pub fn predict_ensemble(
    members: &[TrainedModel],
    data: &Dataset,
    variant: Variant,
    alpha: f64,
) -> Result<EnsembleOutput> {
    if variant == Variant::GaussNll {
        let mut means = Vec::with_capacity(members.len());
        let mut vars = Vec::with_capacity(members.len());
        for m in members {
            let raw = m.model.forward_raw(data.features.view())?;
            means.push(raw.column(0).to_vec());
            vars.push(
                raw.column(1)
                    .iter()
                    .map(|&r| gaussian_variance(r))
                    .collect(),
            );
        }
        aggregate_gaussian(&means, &vars, alpha)
    } else {
        let outputs = members
            .iter()
            .map(|m| m.model.forward_as(data.features.view(), variant))
            .collect::<Result<Vec<PIOutput>>>()?;
        let mut agg = aggregate_pi(&outputs, alpha)?;
        if matches!(variant, Variant::Qd | Variant::Moi) {
            for i in 0..agg.len() {
                agg.value[i] = 0.5 * (agg.upper[i] + agg.lower[i]);
            }
        }
        Ok(agg)
    }
}

fn stride(curve: &[f64], step: usize) -> Vec<f64> {
    curve.iter().step_by(step.max(1)).copied().collect()
}

/// Trains and evaluates one split.
pub fn run_split(
    config: &ExperimentConfig,
    source: &Source,
    k: usize,
) -> Result<(SplitResult, SplitPredictions)> {
    let prepared = prepare_split(config, source, k)?;
    let base_seed = config.model.seed.wrapping_add(1000 * k as u64);
    let members = train_ensemble(config, base_seed, &prepared.train, prepared.valid.as_ref())?;
    let out = predict_ensemble(
        &members,
        &prepared.test,
        config.loss.variant,
        config.loss.alpha,
    )?;
    let y = prepared.test.targets.to_vec();
    let normalized = MetricsRecord::compute(&y, &out.lower, &out.upper, &out.value)?;

    let stats = &prepared.stats;
    let preds = SplitPredictions {
        split: k,
        y: stats.denormalize_targets(&y),
        lower: stats.denormalize_targets(&out.lower),
        upper: stats.denormalize_targets(&out.upper),
        value: stats.denormalize_targets(&out.value),
    };
    let denormalized = MetricsRecord::compute(&preds.y, &preds.lower, &preds.upper, &preds.value)?;
    let members = members
        .iter()
        .map(|m| MemberSummary {
            seed: m.seed,
            epochs_run: m.history.epochs_run,
            best_epoch: m.history.best_epoch,
            loss_curve: stride(&m.history.train_loss, config.report.loss_curve_stride),
        })
        .collect();
    Ok((
        SplitResult {
            split: k,
            train_rows: prepared.train.len() + prepared.valid.as_ref().map_or(0, Dataset::len),
            test_rows: prepared.test.len(),
            normalized,
            denormalized,
            members,
        },
        preds,
    ))
}

/// Runs every split of the plan. Split failures are recorded rather than
/// aborting the run; the report is then marked partial.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let source = load_source(config)?;
    let outcomes: Vec<Result<(SplitResult, SplitPredictions)>> = (0..config.splits.count)
        .into_par_iter()
        .map(|k| run_split(config, &source, k))
        .collect();

    let mut splits = Vec::new();
    let mut predictions = Vec::new();
    let mut failures = Vec::new();
    for (k, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((s, p)) => {
                splits.push(s);
                predictions.push(p);
            }
            Err(e) => failures.push(SplitFailure {
                split: k,
                exit_code: e.exit_code(),
                message: e.to_string(),
            }),
        }
    }
    let (aggregate_normalized, aggregate_denormalized) = if splits.is_empty() {
        (None, None)
    } else {
        let n: Vec<MetricsRecord> = splits.iter().map(|s| s.normalized).collect();
        let d: Vec<MetricsRecord> = splits.iter().map(|s| s.denormalized).collect();
        (Some(aggregate_splits(&n)?), Some(aggregate_splits(&d)?))
    };
    Ok(RunReport {
        format_version: FORMAT_VERSION,
        config: config.clone(),
        partial: !failures.is_empty(),
        splits,
        failures,
        aggregate_normalized,
        aggregate_denormalized,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        predictions,
    })
}

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub picp: f64,
    pub mpiw: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Split-level failures behind this cell.
    pub failed_splits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub alpha: f64,
    /// `(mpiw_qd - mpiw_piven) / mpiw_qd`, in percent.
    pub mpiw_percent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Alpha,
    Hyperparam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub format_version: u32,
    pub kind: SweepKind,
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub improvements: Vec<Improvement>,
    pub wall_clock_secs: f64,
}

fn sweep_row(method: &str, cfg: &ExperimentConfig) -> Result<SweepRow> {
    let report = run_benchmark(cfg)?;
    let h = report.headline().ok_or_else(|| {
        let first = report.failures.first();
        Error::Data(format!(
            "all splits failed for {method} (alpha={}, beta={}, lambda={}): {}",
            cfg.loss.alpha,
            cfg.loss.beta,
            cfg.loss.lambda,
            first.map_or("", |f| f.message.as_str())
        ))
    })?;
    Ok(SweepRow {
        method: method.to_string(),
        alpha: cfg.loss.alpha,
        beta: cfg.loss.beta,
        lambda: cfg.loss.lambda,
        picp: h.picp.mean,
        mpiw: h.mpiw.mean,
        rmse: h.rmse.mean,
        mae: h.mae.mean,
        failed_splits: report.failures.len(),
    })
}

/// PIVEN against QD at each coverage level.
pub fn run_alpha_sweep(config: &ExperimentConfig, alphas: &[f64]) -> Result<SweepReport> {
    if alphas.is_empty() {
        return Err(Error::Config("alpha grid is empty".into()));
    }
    if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::Config(format!("alpha {a} outside (0, 1)")));
    }
    config.validate()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut improvements = Vec::new();
    for &alpha in alphas {
        let mut cfg = config.clone();
        cfg.loss.alpha = alpha;
        let piven = sweep_row("piven", &cfg.clone().with_variant(Variant::Piven))?;
        let qd = sweep_row("qd", &cfg.with_variant(Variant::Qd))?;
        improvements.push(Improvement {
            alpha,
            mpiw_percent: 100.0 * (qd.mpiw - piven.mpiw) / qd.mpiw,
        });
        rows.push(piven);
        rows.push(qd);
    }
    Ok(SweepReport {
        format_version: FORMAT_VERSION,
        kind: SweepKind::Alpha,
        config: config.clone(),
        rows,
        improvements,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Grid over `beta x lambda` for the configured variant.
pub fn run_hyperparam_sweep(
    config: &ExperimentConfig,
    betas: &[f64],
    lambdas: &[f64],
) -> Result<SweepReport> {
    if betas.is_empty() || lambdas.is_empty() {
        return Err(Error::Config(
            "beta and lambda grids must be non-empty".into(),
        ));
    }
    config.validate()?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for &beta in betas {
        for &lambda in lambdas {
            let mut cfg = config.clone();
            cfg.loss.beta = beta;
            cfg.loss.lambda = lambda;
            cfg.validate()?;
            rows.push(sweep_row(cfg.loss.variant.name(), &cfg)?);
        }
    }
    Ok(SweepReport {
        format_version: FORMAT_VERSION,
        kind: SweepKind::Hyperparam,
        config: config.clone(),
        rows,
        improvements: Vec::new(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
