//! Domain types shared by every module.
//!
//! Orientation convention, used everywhere: samples are *columns*. The
//! covariate matrix is d x N, the target matrix is K x N (K = 1 for
//! scalar-target problems, kept as a 1 x N matrix rather than a vector so
//! there is a single code path). Once constructed, all of these types are
//! immutable value objects and safe to share across threads.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A (possibly corrupted) training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// d x N, columns are samples.
    pub covariates: DMatrix<f64>,
    /// K x N, aligned with `covariates` columns.
    pub targets: DMatrix<f64>,
    /// `true` = inlier (index in P), `false` = corrupted (index in Q).
    /// Absent for real data with no ground truth.
    pub inlier_mask: Option<Vec<bool>>,
    pub meta: DatasetMeta,
}

/// Provenance for synthetic data. `w_true` is retained when the generator
/// knows it so fit traces can report parameter error; estimators never read
/// it to make decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub eps: f64,
    pub nu: f64,
    #[serde(rename = "B")]
    pub b_bound: f64,
    pub adversary: String,
    pub sigma_desc: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w_true: Option<ModelParams>,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        DatasetMeta {
            seed: 0,
            eps: 0.0,
            nu: 0.0,
            b_bound: 0.0,
            adversary: "none".to_string(),
            sigma_desc: "unknown".to_string(),
            w_true: None,
        }
    }
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.nrows()
    }
}

/// Checks every `Dataset` invariant and reports violations as strings;
/// an empty list means the dataset is well formed. Never mutates or throws.
pub fn validate_dataset(ds: &Dataset) -> Vec<String> {
    let mut violations = Vec::new();
    let n = ds.covariates.ncols();
    if ds.targets.ncols() != n {
        violations.push(format!(
            "dimension mismatch: covariates have {} columns but targets have {}",
            n,
            ds.targets.ncols()
        ));
    }
    if let Some(mask) = &ds.inlier_mask {
        if mask.len() != n {
            violations.push(format!(
                "dimension mismatch: mask length {} but {} samples",
                mask.len(),
                n
            ));
        } else {
            let corrupted = mask.iter().filter(|&&inlier| !inlier).count();
            let budget = (ds.meta.eps * n as f64).floor() as usize;
            if corrupted > budget {
                violations.push(format!(
                    "corruption budget exceeded: {corrupted} corrupted samples but \
                     floor(eps*N) = {budget}"
                ));
            }
        }
    }
    if ds.covariates.iter().any(|v| !v.is_finite()) {
        violations.push("covariates contain non-finite entries".to_string());
    }
    if ds.targets.iter().any(|v| !v.is_finite()) {
        violations.push("targets contain non-finite entries".to_string());
    }
    violations
}

/// The weight matrix being estimated; K x d (a 1 x d row for K = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: DMatrix<f64>,
}

impl ModelParams {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "model weights must be finite".to_string(),
            ));
        }
        Ok(ModelParams { weights })
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        ModelParams {
            weights: DMatrix::zeros(k, d),
        }
    }

    /// Single-output weights as a vector view (panics if K != 1).
    pub fn as_vector(&self) -> DVector<f64> {
        assert_eq!(self.weights.nrows(), 1, "as_vector requires K = 1");
        self.weights.row(0).transpose()
    }

    pub fn from_vector(w: &[f64]) -> Self {
        ModelParams {
            weights: DMatrix::from_row_slice(1, w.len(), w),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.weights.norm()
    }

    pub fn distance(&self, other: &ModelParams) -> f64 {
        (&self.weights - &other.weights).norm()
    }
}

/// Supported activation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Linear,
    Sigmoid,
    Tanh,
    LeakyRelu,
    SmoothLeakyRelu,
    Relu,
}

/// An activation together with the constants the analysis needs: `gamma`
/// is the derivative floor (the leaky slope for leaky kinds, a reference
/// floor at radius 2 for the saturating kinds, 0 for ReLU), `alpha` the
/// smooth-leaky mixing weight, `lip` the global Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub gamma: f64,
    pub alpha: f64,
    pub lip: f64,
}

/// Reference input radius at which the saturating activations' stored
/// derivative floor is evaluated.
pub const GAMMA_REFERENCE_RADIUS: f64 = 2.0;

impl ActivationSpec {
    pub fn linear() -> Self {
        ActivationSpec {
            kind: ActivationKind::Linear,
            gamma: 1.0,
            alpha: 0.0,
            lip: 1.0,
        }
    }

    pub fn sigmoid() -> Self {
        // gamma = sigmoid'(2), the floor on |z| <= 2.
        ActivationSpec {
            kind: ActivationKind::Sigmoid,
            gamma: 0.104_993_585_403_506_62,
            alpha: 0.0,
            lip: 0.25,
        }
    }

    pub fn tanh() -> Self {
        // gamma = tanh'(2).
        ActivationSpec {
            kind: ActivationKind::Tanh,
            gamma: 0.070_650_824_853_164_43,
            alpha: 0.0,
            lip: 1.0,
        }
    }

    pub fn leaky_relu(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "leaky_relu slope must be in (0, 1), got {gamma}"
            )));
        }
        Ok(ActivationSpec {
            kind: ActivationKind::LeakyRelu,
            gamma,
            alpha: 0.0,
            lip: 1.0,
        })
    }

    pub fn smooth_leaky_relu(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "smooth_leaky_relu alpha must be in (0, 1), got {alpha}"
            )));
        }
        // sigma'(x) = alpha + (1 - alpha) * sigmoid(x) > alpha everywhere.
        Ok(ActivationSpec {
            kind: ActivationKind::SmoothLeakyRelu,
            gamma: alpha,
            alpha,
            lip: 1.0,
        })
    }

    pub fn relu() -> Self {
        ActivationSpec {
            kind: ActivationKind::Relu,
            gamma: 0.0,
            alpha: 0.0,
            lip: 1.0,
        }
    }
}

/// Spectrum summary of a second-moment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumInfo {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
}

impl SpectrumInfo {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_max > 0.0 && lambda_max >= lambda_min) {
            return Err(Error::InvalidConfig(format!(
                "spectrum needs 0 < lambda_min <= lambda_max, got [{lambda_min}, {lambda_max}]"
            )));
        }
        Ok(SpectrumInfo {
            lambda_min,
            lambda_max,
            kappa: lambda_max / lambda_min,
        })
    }

    /// Eigenvalue extremes of a symmetric matrix.
    pub fn from_symmetric(m: &DMatrix<f64>) -> Result<Self> {
        let eig = m.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let lambda_max = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        SpectrumInfo::new(lambda_min, lambda_max)
    }
}

/// Step size selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

/// Iteration budget selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterBudget {
    Auto,
    Fixed(usize),
}

/// Initialization scheme. `RandomBall` draws uniformly from the ball of
/// radius `radius_scale * radius_ref`; `default_ball_scale(d)` gives the
/// largest scale the random-initialization guarantee covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Zero,
    RandomBall { radius_scale: f64 },
}

/// sqrt(1 / (2 pi d)), the default ball radius scale.
pub fn default_ball_scale(d: usize) -> f64 {
    (1.0 / (2.0 * std::f64::consts::PI * d as f64)).sqrt()
}

/// Where the estimator gets its spectrum from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Estimate,
    Known(SpectrumInfo),
}

/// Configuration for the iterative-thresholding fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Algorithmic corruption parameter; the retained-set size is
    /// ceil((1 - eps_alg) * N). Must be in [0, 0.5).
    pub eps_alg: f64,
    pub eta: StepSize,
    pub max_iters: IterBudget,
    /// Optimization target eps_opt; drives the auto iteration budget.
    pub target_tol: f64,
    pub init: InitScheme,
    pub seed: u64,
    pub spectrum: SpectrumSource,
    /// Reference scale R with ||w*|| <= R. `None` means the plug-in
    /// least-squares norm on all samples.
    pub radius_ref: Option<f64>,
    /// Random restarts for the neuron fit; 0 = auto (5 for ReLU, else 1).
    pub restarts: u32,
    /// Early-stop threshold on the Frobenius step size.
    pub stop_param_change: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            eps_alg: 0.0,
            eta: StepSize::Auto,
            max_iters: IterBudget::Auto,
            target_tol: 1e-8,
            init: InitScheme::Zero,
            seed: 0,
            spectrum: SpectrumSource::Estimate,
            radius_ref: None,
            restarts: 0,
            stop_param_change: 1e-10,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(0.0..0.5).contains(&self.eps_alg) {
            return Err(Error::InvalidConfig(format!(
                "eps_alg must be in [0, 0.5), got {}",
                self.eps_alg
            )));
        }
        if let StepSize::Fixed(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
            }
        }
        if let IterBudget::Fixed(t) = self.max_iters {
            if t == 0 {
                return Err(Error::InvalidConfig("max_iters must be positive".to_string()));
            }
        }
        if !(self.target_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target_tol must be positive, got {}",
                self.target_tol
            )));
        }
        if !(self.stop_param_change > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stop_param_change must be positive, got {}",
                self.stop_param_change
            )));
        }
        if let InitScheme::RandomBall { radius_scale } = self.init {
            if !(radius_scale > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "radius_scale must be positive, got {radius_scale}"
                )));
            }
            let cap = default_ball_scale(dim);
            if radius_scale > cap + 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "radius_scale {radius_scale} exceeds sqrt(1/(2*pi*d)) = {cap} for d = {dim}"
                )));
            }
        }
        Ok(())
    }
}

/// One row of a fit trace, recorded at the start of each iteration
/// (parameter error and retained-set composition are those of the iterate
/// *before* the gradient step; `param_change` is the size of that step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub loss_on_retained: f64,
    pub param_change: f64,
    pub retained_true_positives: Option<usize>,
    pub retained_false_positives: Option<usize>,
    pub param_error_if_truth_known: Option<f64>,
}

/// Per-fit step plan resolved by `plan_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub eta: f64,
    pub t_max: usize,
    pub stop_param_change: f64,
}

/// Result of a fit: the estimate, the per-iteration trace, and the
/// resolved configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub estimate: ModelParams,
    pub trace: Vec<IterRecord>,
    pub config_echo: FitConfig,
    pub step_plan: StepPlan,
    pub converged: bool,
}

impl FitReport {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_error(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.param_error_if_truth_known)
    }
}

/// Noise and tail parameters used by the concentration lab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Std. dev. of the Gaussian label noise.
    pub nu: f64,
    /// l2 bound on corrupted covariates.
    pub b_bound: f64,
    /// Failure probability.
    pub delta: f64,
    /// L4 -> L2 hypercontractivity constant.
    pub hyper_l: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::ParamRange(format!("nu must be >= 0, got {}", self.nu)));
        }
        if !(self.b_bound > 0.0 && self.b_bound.is_finite()) {
            return Err(Error::ParamRange(format!(
                "B must be positive, got {}",
                self.b_bound
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::ParamRange(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.hyper_l > 0.0) {
            return Err(Error::ParamRange(format!(
                "L must be positive, got {}",
                self.hyper_l
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> Dataset {
        Dataset {
            covariates: DMatrix::from_row_slice(2, 4, &[1., 2., 3., 4., 5., 6., 7., 8.]),
            targets: DMatrix::from_row_slice(1, 4, &[1., 0., 1., 0.]),
            inlier_mask: Some(vec![true, true, true, false]),
            meta: DatasetMeta {
                eps: 0.25,
                ..DatasetMeta::default()
            },
        }
    }

    #[test]
    fn well_formed_dataset_validates_clean() {
        assert!(validate_dataset(&tiny_dataset()).is_empty());
    }

    #[test]
    fn target_column_mismatch_is_reported() {
        let mut ds = tiny_dataset();
        ds.targets = DMatrix::from_row_slice(1, 3, &[1., 0., 1.]);
        ds.inlier_mask = None;
        let violations = validate_dataset(&ds);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("dimension mismatch"));
    }

    #[test]
    fn corruption_over_budget_is_reported() {
        let mut ds = tiny_dataset();
        // eps = 0.25, N = 4 allows exactly one corrupted sample.
        ds.inlier_mask = Some(vec![true, true, false, false]);
        let violations = validate_dataset(&ds);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("corruption budget exceeded"));
    }

    #[test]
    fn spectrum_of_identity_has_unit_kappa() {
        let s = SpectrumInfo::from_symmetric(&DMatrix::identity(4, 4)).unwrap();
        assert!((s.kappa - 1.0).abs() < 1e-12);
        assert!((s.lambda_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_diag_1_2_has_kappa_2() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let s = SpectrumInfo::from_symmetric(&m).unwrap();
        assert!((s.kappa - 2.0).abs() < 1e-12);
        assert!(s.kappa > 1.0);
    }

    #[test]
    fn random_ball_scale_above_cap_is_rejected() {
        let cfg = FitConfig {
            init: InitScheme::RandomBall {
                radius_scale: default_ball_scale(10) * 2.0,
            },
            ..FitConfig::default()
        };
        assert!(cfg.validate(10).is_err());
        let ok = FitConfig {
            init: InitScheme::RandomBall {
                radius_scale: default_ball_scale(10),
            },
            ..FitConfig::default()
        };
        assert!(ok.validate(10).is_ok());
    }

    #[test]
    fn activation_constructors_enforce_ranges() {
        assert!(ActivationSpec::leaky_relu(0.1).is_ok());
        assert!(ActivationSpec::leaky_relu(0.0).is_err());
        assert!(ActivationSpec::leaky_relu(1.0).is_err());
        assert!(ActivationSpec::smooth_leaky_relu(0.5).is_ok());
        assert!(ActivationSpec::smooth_leaky_relu(1.5).is_err());
        assert_eq!(ActivationSpec::sigmoid().lip, 0.25);
        assert_eq!(ActivationSpec::tanh().lip, 1.0);
    }
}
