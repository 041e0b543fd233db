//! Experiment sweeps: generate -> corrupt -> fit across a grid of
//! (eps, nu, kappa, N) values with Monte Carlo trials per point.
//!
//! Every trial gets a seed derived from (sweep seed, axis index, trial
//! index), trials fan out over rayon, and aggregation is an ordered
//! reduction, so a sweep's CSV output is byte-identical across runs and
//! thread counts. Medians (not means) summarize trials: the guarantees are
//! high-probability statements and a rare failed trial must not pollute
//! the point estimate.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fit_linear_it, fit_neuron_it, ols_full_solve, OlsSubset};
use crate::rng::derive_seed;
use crate::synth::{corrupt, generate_clean, AdversarySpec, GeneratorSpec, SigmaSpec};
use crate::types::{ActivationKind, ActivationSpec, FitConfig, FitReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Eps { values: Vec<f64> },
    Nu { values: Vec<f64> },
    Kappa { values: Vec<f64> },
    N { values: Vec<usize> },
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::Eps { values } | SweepAxis::Nu { values } | SweepAxis::Kappa { values } => {
                values.clone()
            }
            SweepAxis::N { values } => values.iter().map(|&v| v as f64).collect(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            SweepAxis::Eps { .. } => "eps",
            SweepAxis::Nu { .. } => "nu",
            SweepAxis::Kappa { .. } => "kappa",
            SweepAxis::N { .. } => "n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base_generator: GeneratorSpec,
    pub base_adversary: AdversarySpec,
    pub base_fit: FitConfig,
    pub activation: ActivationSpec,
    pub sweep_axis: SweepAxis,
    pub trials_per_point: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base_generator.validate()?;
        if self.trials_per_point == 0 {
            return Err(Error::InvalidConfig(
                "trials_per_point must be >= 1".to_string(),
            ));
        }
        let values = self.sweep_axis.values();
        if values.is_empty() {
            return Err(Error::InvalidConfig("sweep axis has no values".to_string()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "sweep values must be finite".to_string(),
            ));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig(
                "sweep values must be sorted ascending".to_string(),
            ));
        }
        Ok(())
    }
}

/// Scaling shapes the error law is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// error = C * eps * ln(1/eps)
    EpsLog,
    /// error = C * sqrt(eps * ln(1/eps))
    SqrtEpsLog,
}

impl ScalingModel {
    pub fn shape(&self, eps: f64) -> f64 {
        let base = eps * (1.0 / eps).ln();
        match self {
            ScalingModel::EpsLog => base,
            ScalingModel::SqrtEpsLog => base.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedScaling {
    pub model: ScalingModel,
    pub constant: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub median_error: f64,
    pub iqr_lo: f64,
    pub iqr_hi: f64,
    pub mean_iterations: f64,
    pub inlier_precision: f64,
    pub baseline_ols_error: f64,
    pub oracle_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub rows: Vec<SweepRow>,
    pub fitted_scaling: FittedScaling,
}

/// Everything one trial produced; retained only when traces are kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub axis_index: usize,
    pub trial_index: usize,
    pub axis_value: f64,
    pub error: f64,
    pub ols_error: f64,
    pub oracle_error: f64,
    pub inlier_precision: Option<f64>,
    pub report: FitReport,
}

fn apply_axis(
    axis: &SweepAxis,
    value_index: usize,
    gen: &mut GeneratorSpec,
    adv: &mut AdversarySpec,
    fit: &mut FitConfig,
) {
    match axis {
        SweepAxis::Eps { values } => {
            let eps = values[value_index];
            adv.eps_true = eps;
            fit.eps_alg = eps;
        }
        SweepAxis::Nu { values } => {
            gen.nu = values[value_index];
        }
        SweepAxis::Kappa { values } => {
            gen.sigma = SigmaSpec::DiagGeometric {
                kappa: values[value_index],
            };
        }
        SweepAxis::N { values } => {
            gen.n = values[value_index];
        }
    }
}

fn run_trial(spec: &SweepSpec, axis_index: usize, trial_index: usize) -> Result<TrialRecord> {
    let mut gen = spec.base_generator.clone();
    let mut adv = spec.base_adversary.clone();
    let mut fit = spec.base_fit.clone();
    apply_axis(&spec.sweep_axis, axis_index, &mut gen, &mut adv, &mut fit);
    let coord = derive_seed(spec.seed, axis_index as u64, trial_index as u64);
    gen.seed = derive_seed(coord, 0, 0);
    adv.seed = derive_seed(coord, 1, 0);
    fit.seed = derive_seed(coord, 2, 0);

    let clean = generate_clean(&gen, &spec.activation)?;
    let ds = corrupt(&clean, &adv)?;
    let w_true = ds
        .meta
        .w_true
        .clone()
        .expect("synthetic data carries the true weights");

    let report = match spec.activation.kind {
        ActivationKind::Linear => fit_linear_it(&ds, &fit),
        _ => fit_neuron_it(&ds, &spec.activation, &fit),
    }
    .map_err(|e| {
        Error::InvalidConfig(format!(
            "estimator failed at axis {axis_index} ({} = {}), trial {trial_index}: {e}",
            spec.sweep_axis.name(),
            spec.sweep_axis.values()[axis_index],
        ))
    })?;

    let error = report.estimate.distance(&w_true);
    let ols_error = ols_full_solve(&ds, OlsSubset::All)?.distance(&w_true);
    let oracle_error = ols_full_solve(&ds, OlsSubset::TrueInliers)?.distance(&w_true);
    let inlier_precision = report.trace.last().and_then(|rec| {
        match (rec.retained_true_positives, rec.retained_false_positives) {
            (Some(tp), Some(fp)) => Some(tp as f64 / (tp + fp) as f64),
            _ => None,
        }
    });
    Ok(TrialRecord {
        axis_index,
        trial_index,
        axis_value: spec.sweep_axis.values()[axis_index],
        error,
        ols_error,
        oracle_error,
        inlier_precision,
        report,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

fn median_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile(&v, 0.5)
}

fn summarize(spec: &SweepSpec, trials: &[TrialRecord]) -> SweepResult {
    let values = spec.sweep_axis.values();
    let mut rows = Vec::with_capacity(values.len());
    for (ai, &axis_value) in values.iter().enumerate() {
        let here: Vec<&TrialRecord> = trials.iter().filter(|t| t.axis_index == ai).collect();
        let mut errs: Vec<f64> = here.iter().map(|t| t.error).collect();
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(SweepRow {
            axis_value,
            median_error: quantile(&errs, 0.5),
            iqr_lo: quantile(&errs, 0.25),
            iqr_hi: quantile(&errs, 0.75),
            mean_iterations: here
                .iter()
                .map(|t| t.report.iterations() as f64)
                .sum::<f64>()
                / here.len().max(1) as f64,
            inlier_precision: median_of(here.iter().filter_map(|t| t.inlier_precision)),
            baseline_ols_error: median_of(here.iter().map(|t| t.ols_error)),
            oracle_error: median_of(here.iter().map(|t| t.oracle_error)),
        });
    }

    // Multiplicative fit error = C * f(axis) in log space. The shape is a
    // function of the corruption rate, so the fit is meaningful for the eps
    // axis; it is recorded regardless.
    let model = match spec.activation.kind {
        ActivationKind::Linear => ScalingModel::EpsLog,
        _ => ScalingModel::SqrtEpsLog,
    };
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.axis_value > 0.0 && r.median_error > 0.0)
        .map(|r| (model.shape(r.axis_value).ln(), r.median_error.ln()))
        .collect();
    let fitted_scaling = if points.is_empty() {
        FittedScaling {
            model,
            constant: f64::NAN,
            r_squared: 0.0,
        }
    } else {
        let n = points.len() as f64;
        let log_c = points.iter().map(|(fx, fy)| fy - fx).sum::<f64>() / n;
        let mean_y = points.iter().map(|(_, fy)| fy).sum::<f64>() / n;
        let ss_tot: f64 = points.iter().map(|(_, fy)| (fy - mean_y).powi(2)).sum();
        let ss_res: f64 = points
            .iter()
            .map(|(fx, fy)| (fy - (log_c + fx)).powi(2))
            .sum();
        let r_squared = if ss_tot > 0.0 {
            (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
        } else {
            1.0
        };
        FittedScaling {
            model,
            constant: log_c.exp(),
            r_squared,
        }
    };

    SweepResult {
        axis_name: spec.sweep_axis.name().to_string(),
        rows,
        fitted_scaling,
    }
}

/// Runs the sweep, returning one summary row per axis value.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    Ok(run_sweep_detailed(spec)?.0)
}

/// As `run_sweep`, but also returns every per-trial record (for
/// `--keep-traces`).
pub fn run_sweep_detailed(spec: &SweepSpec) -> Result<(SweepResult, Vec<TrialRecord>)> {
    spec.validate()?;
    let values = spec.sweep_axis.values();
    let coords: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|ai| (0..spec.trials_per_point).map(move |ti| (ai, ti)))
        .collect();
    let mut trials: Vec<TrialRecord> = coords
        .into_par_iter()
        .map(|(ai, ti)| run_trial(spec, ai, ti))
        .collect::<Result<Vec<_>>>()?;
    // deterministic reduction order regardless of scheduling
    trials.sort_by_key(|t| (t.axis_index, t.trial_index));
    Ok((summarize(spec, &trials), trials))
}

fn fmt(v: f64) -> String {
    // 17 significant digits round-trips any f64 exactly
    format!("{v:.16e}")
}

/// Writes the CSV (fixed column order) at `path` and a JSON summary named
/// `summary.json` next to it. Overwrites are idempotent: identical results
/// produce byte-identical files.
pub fn emit_report(res: &SweepResult, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut csv = String::from(
        "axis_value,median_error,iqr_lo,iqr_hi,mean_iters,inlier_precision,ols_error,oracle_error\n",
    );
    for row in &res.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(row.axis_value),
            fmt(row.median_error),
            fmt(row.iqr_lo),
            fmt(row.iqr_hi),
            fmt(row.mean_iterations),
            fmt(row.inlier_precision),
            fmt(row.baseline_ols_error),
            fmt(row.oracle_error),
        ));
    }
    fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    let summary_path = path.with_file_name("summary.json");
    let json = serde_json::to_string_pretty(res)
        .map_err(|e| Error::parse(&summary_path, e.to_string()))?;
    fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{AdversaryKind, CovariateLaw, WeightSpec};

    fn small_spec() -> SweepSpec {
        SweepSpec {
            base_generator: GeneratorSpec {
                d: 4,
                n: 400,
                k: 1,
                sigma: SigmaSpec::Identity,
                law: CovariateLaw::Gaussian,
                nu: 0.5,
                w_true: WeightSpec::RandomUnitScaled { radius: 2.0 },
                seed: 0,
            },
            base_adversary: AdversarySpec {
                kind: AdversaryKind::AdditiveLabelOutlier { magnitude: 100.0 },
                eps_true: 0.1,
                seed: 0,
            },
            base_fit: FitConfig::default(),
            activation: ActivationSpec::linear(),
            sweep_axis: SweepAxis::Eps {
                values: vec![0.05, 0.1, 0.2],
            },
            trials_per_point: 4,
            seed: 99,
        }
    }

    #[test]
    fn clean_eps_zero_sweep_recovers_exactly() {
        let mut spec = small_spec();
        spec.base_generator.nu = 0.0;
        spec.sweep_axis = SweepAxis::Eps { values: vec![0.0] };
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert!(
            res.rows[0].median_error <= 1e-6,
            "{}",
            res.rows[0].median_error
        );
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = small_spec();
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_rejects_unsorted_values() {
        let mut spec = small_spec();
        spec.sweep_axis = SweepAxis::Eps {
            values: vec![0.2, 0.1],
        };
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn oracle_dominates_estimator() {
        let res = run_sweep(&small_spec()).unwrap();
        for row in &res.rows {
            assert!(
                row.oracle_error <= row.median_error + 1e-12,
                "oracle {} vs median {} at {}",
                row.oracle_error,
                row.median_error,
                row.axis_value
            );
        }
    }

    #[test]
    fn emit_report_format_and_idempotence() {
        let res = SweepResult {
            axis_name: "eps".to_string(),
            rows: vec![
                SweepRow {
                    axis_value: 0.05,
                    median_error: 0.1,
                    iqr_lo: 0.05,
                    iqr_hi: 0.2,
                    mean_iterations: 12.5,
                    inlier_precision: 0.99,
                    baseline_ols_error: 0.5,
                    oracle_error: 0.01,
                },
                SweepRow {
                    axis_value: 0.1,
                    median_error: 0.2,
                    iqr_lo: 0.1,
                    iqr_hi: 0.4,
                    mean_iterations: 13.0,
                    inlier_precision: 0.98,
                    baseline_ols_error: 0.6,
                    oracle_error: 0.011,
                },
                SweepRow {
                    axis_value: 0.2,
                    median_error: 0.5,
                    iqr_lo: 0.3,
                    iqr_hi: 0.8,
                    mean_iterations: 14.0,
                    inlier_precision: 0.97,
                    baseline_ols_error: 0.7,
                    oracle_error: 0.012,
                },
            ],
            fitted_scaling: FittedScaling {
                model: ScalingModel::EpsLog,
                constant: 1.0,
                r_squared: 0.99,
            },
        };
        let dir = tempfile::TempDir::new().unwrap();
        let csv_path = dir.path().join("sweep.csv");
        emit_report(&res, &csv_path).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "axis_value,median_error,iqr_lo,iqr_hi,mean_iters,inlier_precision,ols_error,oracle_error"
        );
        assert_eq!(lines.count(), 3);
        assert!(dir.path().join("summary.json").exists());

        emit_report(&res, &csv_path).unwrap();
        let again = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn empty_rows_give_header_only_csv() {
        let res = SweepResult {
            axis_name: "eps".to_string(),
            rows: vec![],
            fitted_scaling: FittedScaling {
                model: ScalingModel::EpsLog,
                constant: f64::NAN,
                r_squared: 0.0,
            },
        };
        let dir = tempfile::TempDir::new().unwrap();
        let csv_path = dir.path().join("sweep.csv");
        emit_report(&res, &csv_path).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn scaling_shapes_evaluate_correctly() {
        let eps: f64 = 0.1;
        let base = eps * (1.0f64 / eps).ln();
        assert!((ScalingModel::EpsLog.shape(eps) - base).abs() < 1e-15);
        assert!((ScalingModel::SqrtEpsLog.shape(eps) - base.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_floats_round_trip() {
        let v = std::f64::consts::PI * 1e-3;
        let s = fmt(v);
        let back: f64 = s.parse().unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn kappa_axis_reshapes_sigma() {
        let spec = small_spec();
        let mut gen = spec.base_generator.clone();
        let mut adv = spec.base_adversary.clone();
        let mut fit = spec.base_fit.clone();
        apply_axis(
            &SweepAxis::Kappa {
                values: vec![4.0, 16.0],
            },
            1,
            &mut gen,
            &mut adv,
            &mut fit,
        );
        match gen.sigma {
            SigmaSpec::DiagGeometric { kappa } => assert_eq!(kappa, 16.0),
            other => panic!("expected diag_geo, got {other:?}"),
        }
    }

    #[test]
    fn trial_records_align_with_axis() {
        let spec = small_spec();
        let (_, trials) = run_sweep_detailed(&spec).unwrap();
        assert_eq!(trials.len(), 12);
        for t in &trials {
            assert_eq!(t.axis_value, spec.sweep_axis.values()[t.axis_index]);
            assert!(t.inlier_precision.is_some());
        }
    }
}
