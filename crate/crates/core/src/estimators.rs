//! Iterative-thresholding gradient descent estimators and baselines.
//!
//! `fit_linear_it` and `fit_neuron_it` share one loop: score every sample,
//! keep the ceil((1 - eps_alg) * N) best, take a gradient step on the
//! retained risk. `fit_torrent_fc` replaces the gradient step with a full
//! least-squares solve, and `ols_full_solve` is the plain baseline.

use nalgebra::DMatrix;

use crate::activations::{act_deriv, act_value};
use crate::error::{Error, Result};
use crate::thresholding::{hard_threshold, per_sample_losses, RetainedSet};
use crate::types::{
    ActivationKind, ActivationSpec, Dataset, FitConfig, FitReport, InitScheme, IterBudget,
    IterRecord, ModelParams, SpectrumInfo, SpectrumSource, StepPlan, StepSize,
};
use crate::rng::{domain, CounterRng};

/// Iteration budget multiplier in the auto step plan.
const C_T: f64 = 10.0;
/// Eigenvalue floor below which the sample second moment counts as singular.
const SPECTRUM_FLOOR: f64 = 1e-12;
/// Relative factor for the rank-revealing solve threshold.
const SOLVE_RTOL: f64 = 1e-12;
/// A finished run whose final step is below this fraction of the parameter
/// scale counts as converged even if it never hit `stop_param_change`
/// (the iterate has reached the noise floor and only flickers).
const PLATEAU_STEP_TOL: f64 = 1e-4;
/// Default number of random restarts for ReLU fits.
const RELU_RESTARTS: u32 = 5;

/// Retained-set size: ceil((1 - eps_alg) * N), so eps_alg = 0 keeps all.
pub fn retained_size(eps_alg: f64, n: usize) -> usize {
    ((1.0 - eps_alg) * n as f64).ceil() as usize
}

/// Gradient of the retained risk
/// R(W; S) = (1 / ((1 - eps_alg) N)) * sum_{i in S} ||sigma(W x_i) - y_i||^2:
/// each output row gets (2 / ((1-eps)N)) sum_i (sigma(z) - y) sigma'(z) x_i^T.
/// For the linear activation this is exactly (2/((1-eps)N)) (W X_S - Y_S) X_S^T.
pub fn gradient_on_subset(
    params: &ModelParams,
    act: &ActivationSpec,
    ds: &Dataset,
    s: &RetainedSet,
    eps_alg: f64,
) -> Result<DMatrix<f64>> {
    if s.is_empty() {
        return Err(Error::InvalidConfig(
            "gradient_on_subset needs a nonempty retained set".to_string(),
        ));
    }
    let (k, d) = (params.weights.nrows(), params.weights.ncols());
    if d != ds.dim() || k != ds.n_targets() {
        return Err(Error::DimensionMismatch(format!(
            "params are {k}x{d} but dataset has d = {}, K = {}",
            ds.dim(),
            ds.n_targets()
        )));
    }
    let m = s.len();
    let mut x_s = DMatrix::zeros(d, m);
    for (col, &i) in s.indices.iter().enumerate() {
        x_s.column_mut(col).copy_from(&ds.covariates.column(i));
    }
    let z = &params.weights * &x_s;
    let mut weighted_residual = DMatrix::zeros(k, m);
    for (col, &i) in s.indices.iter().enumerate() {
        for r in 0..k {
            let zv = z[(r, col)];
            weighted_residual[(r, col)] =
                (act_value(act, zv) - ds.targets[(r, i)]) * act_deriv(act, zv);
        }
    }
    let scale = 2.0 / ((1.0 - eps_alg) * ds.n_samples() as f64);
    let grad = weighted_residual * x_s.transpose() * scale;
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            iter: 0,
            detail: "non-finite gradient".to_string(),
        });
    }
    Ok(grad)
}

/// Which samples a least-squares solve runs on.
#[derive(Debug, Clone, Copy)]
pub enum OlsSubset<'a> {
    All,
    /// Requires a ground-truth mask: the oracle estimator.
    TrueInliers,
    Retained(&'a RetainedSet),
}

/// Exact least-squares minimizer on the subset via normal equations with a
/// rank-revealing (eigen) factorization; singularity threshold
/// 1e-12 * lambda_max.
pub fn ols_full_solve(ds: &Dataset, subset: OlsSubset<'_>) -> Result<ModelParams> {
    let indices: Vec<usize> = match subset {
        OlsSubset::All => (0..ds.n_samples()).collect(),
        OlsSubset::TrueInliers => {
            let mask = ds.inlier_mask.as_ref().ok_or_else(|| {
                Error::InvalidConfig(
                    "true_inliers solve needs a dataset with a ground-truth mask".to_string(),
                )
            })?;
            (0..ds.n_samples()).filter(|&i| mask[i]).collect()
        }
        OlsSubset::Retained(rs) => rs.indices.clone(),
    };
    if indices.is_empty() {
        return Err(Error::InvalidConfig("empty subset for least squares".to_string()));
    }
    let (d, k) = (ds.dim(), ds.n_targets());
    let mut x_s = DMatrix::zeros(d, indices.len());
    let mut y_s = DMatrix::zeros(k, indices.len());
    for (col, &i) in indices.iter().enumerate() {
        x_s.column_mut(col).copy_from(&ds.covariates.column(i));
        y_s.column_mut(col).copy_from(&ds.targets.column(i));
    }
    let gram = &x_s * x_s.transpose();
    let eig = gram.symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = SOLVE_RTOL * lambda_max.max(0.0);
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lambda_min > threshold) || lambda_max <= 0.0 {
        return Err(Error::SingularSystem {
            lambda_min,
            threshold,
        });
    }
    // W = Y X^T (X X^T)^{-1} through the eigenbasis.
    let cross = y_s * x_s.transpose();
    let projected = cross * &eig.eigenvectors;
    let mut scaled = projected;
    for j in 0..eig.eigenvalues.len() {
        let inv = 1.0 / eig.eigenvalues[j];
        scaled.column_mut(j).scale_mut(inv);
    }
    let weights = scaled * eig.eigenvectors.transpose();
    ModelParams::new(weights)
}

fn estimate_spectrum(ds: &Dataset) -> Result<SpectrumInfo> {
    let n = ds.n_samples() as f64;
    let second_moment = &ds.covariates * ds.covariates.transpose() / n;
    let eig = second_moment.symmetric_eigen();
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(lambda_min > SPECTRUM_FLOOR) {
        return Err(Error::SingularSystem {
            lambda_min,
            threshold: SPECTRUM_FLOOR,
        });
    }
    SpectrumInfo::new(lambda_min, lambda_max)
}

/// Reference scale R with ||w*|| <= R: the configured override if present,
/// else the plug-in least-squares norm over all samples.
pub fn resolve_radius_ref(ds: &Dataset, cfg: &FitConfig) -> Result<f64> {
    if let Some(r) = cfg.radius_ref {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "radius_ref must be positive, got {r}"
            )));
        }
        return Ok(r);
    }
    let plugin = ols_full_solve(ds, OlsSubset::All)?;
    Ok(plugin.frobenius_norm().max(cfg.target_tol))
}

/// Resolves the step size and iteration budget.
///
/// Step sizes: eta = 0.1 / lambda_max for the linear activation and
/// eta = 0.1 gamma^2 / (lip^4 kappa^2 lambda_max) for nonlinear kinds
/// (gamma taken as 1 for ReLU, whose analysis carries no derivative
/// floor). The iteration budget is C_T * kappa^2 * log(R / eps_opt),
/// scaled up by lip^4 / gamma^2 when the floor is small so the budget
/// matches the shrunken step.
pub fn plan_steps(ds: &Dataset, cfg: &FitConfig, act: &ActivationSpec) -> Result<StepPlan> {
    cfg.validate(ds.dim())?;
    let spectrum = match cfg.spectrum {
        SpectrumSource::Known(s) => s,
        SpectrumSource::Estimate => estimate_spectrum(ds)?,
    };
    let step_gamma = match act.kind {
        ActivationKind::Linear | ActivationKind::Relu => 1.0,
        _ => act.gamma,
    };
    let eta = match cfg.eta {
        StepSize::Fixed(v) => v,
        StepSize::Auto => match act.kind {
            ActivationKind::Linear => 0.1 / spectrum.lambda_max,
            _ => {
                0.1 * step_gamma * step_gamma
                    / (act.lip.powi(4) * spectrum.kappa * spectrum.kappa * spectrum.lambda_max)
            }
        },
    };
    let t_max = match cfg.max_iters {
        IterBudget::Fixed(t) => t,
        IterBudget::Auto => {
            let radius_ref = resolve_radius_ref(ds, cfg)?;
            let log_term = (radius_ref / cfg.target_tol).ln().max(0.0);
            let boost = match act.kind {
                ActivationKind::Linear => 1.0,
                _ => (act.lip.powi(4) / (step_gamma * step_gamma)).max(1.0),
            };
            let t = (C_T * spectrum.kappa * spectrum.kappa * boost * log_term).ceil();
            (t as usize).max(1)
        }
    };
    Ok(StepPlan {
        eta,
        t_max,
        stop_param_change: cfg.stop_param_change,
    })
}

/// The shared descent loop. Records one trace row per iteration; the
/// parameter error and retained-set composition describe the iterate
/// before that iteration's step.
fn run_descent(
    ds: &Dataset,
    act: &ActivationSpec,
    cfg: &FitConfig,
    plan: StepPlan,
    w0: ModelParams,
) -> Result<FitReport> {
    let n = ds.n_samples();
    let keep = retained_size(cfg.eps_alg, n);
    let truth = ds.meta.w_true.as_ref();
    let mask = ds.inlier_mask.as_deref();
    let loss_norm = (1.0 - cfg.eps_alg) * n as f64;

    let mut w = w0;
    let mut trace: Vec<IterRecord> = Vec::new();
    let mut early_stop = false;

    for t in 0..plan.t_max {
        let at_iter = |e: Error| match e {
            Error::Divergence { detail, .. } => Error::Divergence { iter: t, detail },
            other => other,
        };
        let zeta = per_sample_losses(&w, act, ds).map_err(at_iter)?;
        let retained = hard_threshold(&zeta, keep).map_err(at_iter)?;
        let (tp, fp) = match mask {
            Some(m) => {
                let (tp, fp) = retained.classify(m);
                (Some(tp), Some(fp))
            }
            None => (None, None),
        };
        let grad = gradient_on_subset(&w, act, ds, &retained, cfg.eps_alg).map_err(at_iter)?;
        let w_next = ModelParams {
            weights: &w.weights - &grad * plan.eta,
        };
        if w_next.weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iter: t,
                detail: "iterate left the finite domain (step size too large?)".to_string(),
            });
        }
        let param_change = w_next.distance(&w);
        trace.push(IterRecord {
            iter: t,
            loss_on_retained: retained.total_loss() / loss_norm,
            param_change,
            retained_true_positives: tp,
            retained_false_positives: fp,
            param_error_if_truth_known: truth.map(|wt| w.distance(wt)),
        });
        w = w_next;
        if param_change < plan.stop_param_change {
            early_stop = true;
            break;
        }
    }

    let plateau = trace
        .iter()
        .rev()
        .take(5)
        .map(|r| r.param_change)
        .fold(f64::INFINITY, f64::min)
        <= PLATEAU_STEP_TOL * w.frobenius_norm().max(1.0);
    let converged = early_stop || plateau;

    Ok(FitReport {
        estimate: w,
        trace,
        config_echo: cfg.clone(),
        step_plan: plan,
        converged,
    })
}

/// Multi-target linear regression by iterative thresholding (zero init).
pub fn fit_linear_it(ds: &Dataset, cfg: &FitConfig) -> Result<FitReport> {
    if cfg.init != InitScheme::Zero {
        return Err(Error::InvalidConfig(
            "the deterministic linear fit starts at zero; use init = zero".to_string(),
        ));
    }
    let act = ActivationSpec::linear();
    let plan = plan_steps(ds, cfg, &act)?;
    let w0 = ModelParams::zeros(ds.n_targets(), ds.dim());
    run_descent(ds, &act, cfg, plan, w0)
}

/// Single-neuron fit by iterative thresholding with random-ball restarts;
/// returns the restart with the smallest final retained loss.
pub fn fit_neuron_it(ds: &Dataset, act: &ActivationSpec, cfg: &FitConfig) -> Result<FitReport> {
    if ds.n_targets() != 1 {
        return Err(Error::InvalidConfig(format!(
            "the neuron fit needs K = 1, dataset has K = {}",
            ds.n_targets()
        )));
    }
    let plan = plan_steps(ds, cfg, act)?;
    let restarts = match cfg.restarts {
        0 => {
            if act.kind == ActivationKind::Relu {
                RELU_RESTARTS
            } else {
                1
            }
        }
        r => r,
    };
    let radius_ref = match cfg.init {
        InitScheme::Zero => 0.0,
        InitScheme::RandomBall { .. } => resolve_radius_ref(ds, cfg)?,
    };
    let root = CounterRng::from_seed(cfg.seed);
    let mut best: Option<FitReport> = None;
    for r in 0..restarts {
        let w0 = match cfg.init {
            InitScheme::Zero => ModelParams::zeros(1, ds.dim()),
            InitScheme::RandomBall { radius_scale } => {
                let mut rng = root.substream(domain::INIT, r as u64);
                let v = rng.uniform_in_ball(ds.dim(), radius_scale * radius_ref);
                ModelParams::from_vector(&v)
            }
        };
        let report = run_descent(ds, act, cfg, plan, w0)?;
        let score = report
            .trace
            .last()
            .map(|rec| rec.loss_on_retained)
            .unwrap_or(f64::INFINITY);
        let better = match &best {
            None => true,
            Some(b) => {
                score
                    < b.trace
                        .last()
                        .map(|rec| rec.loss_on_retained)
                        .unwrap_or(f64::INFINITY)
            }
        };
        if better {
            best = Some(report);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Torrent-FC baseline: alternate hard thresholding with a full
/// least-squares solve on the retained set; terminates when the retained
/// set repeats.
pub fn fit_torrent_fc(ds: &Dataset, cfg: &FitConfig) -> Result<FitReport> {
    let act = ActivationSpec::linear();
    let plan = plan_steps(ds, cfg, &act)?;
    let n = ds.n_samples();
    let keep = retained_size(cfg.eps_alg, n);
    let truth = ds.meta.w_true.as_ref();
    let mask = ds.inlier_mask.as_deref();
    let loss_norm = (1.0 - cfg.eps_alg) * n as f64;

    let mut w = ModelParams::zeros(ds.n_targets(), ds.dim());
    let mut trace: Vec<IterRecord> = Vec::new();
    let mut prev_indices: Option<Vec<usize>> = None;
    let mut converged = false;

    for t in 0..plan.t_max {
        let at_iter = |e: Error| match e {
            Error::Divergence { detail, .. } => Error::Divergence { iter: t, detail },
            other => other,
        };
        let zeta = per_sample_losses(&w, &act, ds).map_err(at_iter)?;
        let retained = hard_threshold(&zeta, keep).map_err(at_iter)?;
        let (tp, fp) = match mask {
            Some(m) => {
                let (tp, fp) = retained.classify(m);
                (Some(tp), Some(fp))
            }
            None => (None, None),
        };
        let stabilized = prev_indices.as_deref() == Some(&retained.indices[..]);
        let w_next = if stabilized {
            w.clone()
        } else {
            ols_full_solve(ds, OlsSubset::Retained(&retained))?
        };
        let param_change = w_next.distance(&w);
        trace.push(IterRecord {
            iter: t,
            loss_on_retained: retained.total_loss() / loss_norm,
            param_change,
            retained_true_positives: tp,
            retained_false_positives: fp,
            param_error_if_truth_known: truth.map(|wt| w.distance(wt)),
        });
        prev_indices = Some(retained.indices);
        w = w_next;
        if stabilized {
            converged = true;
            break;
        }
    }

    Ok(FitReport {
        estimate: w,
        trace,
        config_echo: cfg.clone(),
        step_plan: plan,
        converged,
    })
}
