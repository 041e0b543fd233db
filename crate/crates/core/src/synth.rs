//! Synthetic data generation and strong-contamination adversaries.
//!
//! Clean data follows y = sigma(W* x) + xi with sub-Gaussian covariates;
//! adversaries then rewrite exactly floor(eps * N) samples. The adversary
//! sees everything (true weights, noise, mask), which is what makes the
//! oracle-model and leverage attacks legitimately adaptive.
//!
//! Every sample draws from its own counter stream, so generation is
//! reproducible independent of evaluation order and parallelism degree.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::act_value;
use crate::error::{Error, Result};
use crate::rng::{domain, CounterRng};
use crate::types::{ActivationSpec, Dataset, DatasetMeta, ModelParams};

/// Second-moment matrix Sigma, either a shorthand or an explicit PSD matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSpec {
    Identity,
    /// Eigenvalues geometrically spaced in [1/kappa, 1], so
    /// kappa(Sigma) = kappa exactly with lambda_max = 1.
    DiagGeometric { kappa: f64 },
    Explicit(DMatrix<f64>),
}

impl SigmaSpec {
    pub fn describe(&self) -> String {
        match self {
            SigmaSpec::Identity => "identity".to_string(),
            SigmaSpec::DiagGeometric { kappa } => format!("diag_geo:{kappa}"),
            SigmaSpec::Explicit(_) => "explicit".to_string(),
        }
    }

    pub fn materialize(&self, d: usize) -> Result<DMatrix<f64>> {
        match self {
            SigmaSpec::Identity => Ok(DMatrix::identity(d, d)),
            SigmaSpec::DiagGeometric { kappa } => {
                if !(*kappa >= 1.0 && kappa.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "diag_geo kappa must be >= 1, got {kappa}"
                    )));
                }
                let diag = DVector::from_fn(d, |i, _| {
                    if d == 1 {
                        1.0
                    } else {
                        // lambda_i = kappa^{-i/(d-1)}, from 1 down to 1/kappa
                        kappa.powf(-(i as f64) / (d as f64 - 1.0))
                    }
                });
                Ok(DMatrix::from_diagonal(&diag))
            }
            SigmaSpec::Explicit(m) => {
                if m.nrows() != d || m.ncols() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "sigma matrix is {}x{}, expected {d}x{d}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Ok(m.clone())
            }
        }
    }
}

/// Sub-Gaussian covariate laws. All are centered with identity second
/// moment before the Sigma^(1/2) coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    Gaussian,
    Rademacher,
    UniformBall,
}

/// True weights: explicit, or a random direction scaled to norm R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    Explicit(ModelParams),
    RandomUnitScaled { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub sigma: SigmaSpec,
    pub law: CovariateLaw,
    pub nu: f64,
    pub w_true: WeightSpec,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::InvalidConfig(
                "d, N, K must all be positive".to_string(),
            ));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "nu must be >= 0, got {}",
                self.nu
            )));
        }
        if let WeightSpec::RandomUnitScaled { radius } = self.w_true {
            if !(radius > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "random w_true radius must be positive, got {radius}"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric PSD square root via eigendecomposition; rejects matrices with
/// a meaningfully negative eigenvalue.
fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let lambda_max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-10 * lambda_max.max(1.0);
    if let Some(bad) = eig.eigenvalues.iter().cloned().find(|&l| l < -tol) {
        return Err(Error::NotPsd { eigenvalue: bad });
    }
    let sqrt_diag = DVector::from_fn(eig.eigenvalues.len(), |i, _| {
        eig.eigenvalues[i].max(0.0).sqrt()
    });
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_diag) * eig.eigenvectors.transpose())
}

/// Draw one isotropic covariate (identity second moment) from the law.
fn draw_isotropic(law: CovariateLaw, d: usize, rng: &mut CounterRng) -> Vec<f64> {
    match law {
        CovariateLaw::Gaussian => (0..d).map(|_| rng.standard_normal()).collect(),
        CovariateLaw::Rademacher => (0..d).map(|_| rng.rademacher()).collect(),
        CovariateLaw::UniformBall => {
            // uniform in the ball of radius sqrt(d+2) has identity second moment
            rng.uniform_in_ball(d, ((d + 2) as f64).sqrt())
        }
    }
}

/// Generates a clean dataset: all-true mask, labels sigma(W* x_i) + xi_i.
pub fn generate_clean(g: &GeneratorSpec, act: &ActivationSpec) -> Result<Dataset> {
    g.validate()?;
    let sigma = g.sigma.materialize(g.d)?;
    let sqrt_sigma = psd_sqrt(&sigma)?;
    let root = CounterRng::from_seed(g.seed);

    let w_true = match &g.w_true {
        WeightSpec::Explicit(w) => {
            if w.weights.nrows() != g.k || w.weights.ncols() != g.d {
                return Err(Error::DimensionMismatch(format!(
                    "w_true is {}x{}, expected {}x{}",
                    w.weights.nrows(),
                    w.weights.ncols(),
                    g.k,
                    g.d
                )));
            }
            w.clone()
        }
        WeightSpec::RandomUnitScaled { radius } => {
            let mut wrng = root.substream(domain::TRUE_WEIGHTS, 0);
            let mut w = DMatrix::from_fn(g.k, g.d, |_, _| wrng.standard_normal());
            let norm = w.norm();
            if norm > 0.0 {
                w *= radius / norm;
            }
            ModelParams { weights: w }
        }
    };

    let columns: Vec<(Vec<f64>, Vec<f64>)> = (0..g.n)
        .into_par_iter()
        .map(|i| {
            let mut xrng = root.substream(domain::COVARIATES, i as u64);
            let iso = DVector::from_vec(draw_isotropic(g.law, g.d, &mut xrng));
            let x = &sqrt_sigma * iso;
            let mut nrng = root.substream(domain::LABEL_NOISE, i as u64);
            let z = &w_true.weights * &x;
            let y: Vec<f64> = (0..g.k)
                .map(|r| act_value(act, z[r]) + g.nu * nrng.standard_normal())
                .collect();
            (x.as_slice().to_vec(), y)
        })
        .collect();

    let mut covariates = DMatrix::zeros(g.d, g.n);
    let mut targets = DMatrix::zeros(g.k, g.n);
    for (i, (x, y)) in columns.iter().enumerate() {
        covariates.column_mut(i).copy_from_slice(x);
        targets.column_mut(i).copy_from_slice(y);
    }

    Ok(Dataset {
        covariates,
        targets,
        inlier_mask: Some(vec![true; g.n]),
        meta: DatasetMeta {
            seed: g.seed,
            eps: 0.0,
            nu: g.nu,
            b_bound: 0.0,
            adversary: "none".to_string(),
            sigma_desc: g.sigma.describe(),
            w_true: Some(w_true),
        },
    })
}

/// How a leverage attack rewrites the labels of its chosen samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeverageMode {
    SignFlip,
    Amplify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    /// y <- -factor * y on the chosen samples.
    LabelSignFlipScale { factor: f64 },
    /// y <- y + magnitude on the chosen samples.
    AdditiveLabelOutlier { magnitude: f64 },
    /// Relabel as sigma(W_adv x) + fresh N(0, nu^2) noise: corrupted points
    /// look like a consistent alternative model (the hardest label attack).
    OracleModel {
        w_adv: ModelParams,
        act: ActivationSpec,
    },
    /// Pick the floor(eps*N) samples with the largest covariate norm, then
    /// rewrite their labels.
    LeverageAttack { direction_mode: LeverageMode },
    /// Replace covariates with the max-leverage direction rescaled to norm
    /// B, and relabel against the true model.
    CovariateAndLabel { b_bound: f64 },
}

impl AdversaryKind {
    pub fn describe(&self) -> String {
        match self {
            AdversaryKind::LabelSignFlipScale { factor } => format!("sign_flip:{factor}"),
            AdversaryKind::AdditiveLabelOutlier { magnitude } => format!("additive:{magnitude}"),
            AdversaryKind::OracleModel { .. } => "oracle_model".to_string(),
            AdversaryKind::LeverageAttack { direction_mode } => match direction_mode {
                LeverageMode::SignFlip => "leverage:sign_flip".to_string(),
                LeverageMode::Amplify => "leverage:amplify".to_string(),
            },
            AdversaryKind::CovariateAndLabel { b_bound } => format!("cov_label:{b_bound}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub kind: AdversaryKind,
    pub eps_true: f64,
    pub seed: u64,
}

/// Applies the adversary: modifies exactly floor(eps_true * N) samples and
/// updates the mask. Inlier columns are left bit-identical.
pub fn corrupt(ds: &Dataset, adv: &AdversarySpec) -> Result<Dataset> {
    if !(0.0..0.5).contains(&adv.eps_true) {
        return Err(Error::ParamRange(format!(
            "eps_true must be in [0, 0.5), got {}",
            adv.eps_true
        )));
    }
    match &ds.inlier_mask {
        Some(mask) if mask.iter().all(|&m| m) => {}
        _ => {
            return Err(Error::InvalidConfig(
                "corrupt expects a clean dataset with an all-true inlier mask".to_string(),
            ))
        }
    }
    let n = ds.n_samples();
    let budget = (adv.eps_true * n as f64).floor() as usize;
    let mut out = ds.clone();
    out.meta.eps = adv.eps_true;
    out.meta.adversary = adv.kind.describe();
    if budget == 0 {
        return Ok(out);
    }

    let root = CounterRng::from_seed(adv.seed);
    let mut pick_rng = root.substream(domain::ADVERSARY_PICK, 0);

    // The adversary inspects all samples before choosing its targets.
    let chosen: Vec<usize> = match &adv.kind {
        AdversaryKind::LeverageAttack { .. } | AdversaryKind::CovariateAndLabel { .. } => {
            let mut by_norm: Vec<usize> = (0..n).collect();
            by_norm.sort_by(|&a, &b| {
                let na = ds.covariates.column(a).norm();
                let nb = ds.covariates.column(b).norm();
                nb.partial_cmp(&na).unwrap().then(a.cmp(&b))
            });
            let mut top = by_norm[..budget].to_vec();
            top.sort_unstable();
            top
        }
        _ => pick_rng.choose_indices(n, budget),
    };

    let mask = out.inlier_mask.as_mut().unwrap();
    for &i in &chosen {
        mask[i] = false;
    }

    match &adv.kind {
        AdversaryKind::LabelSignFlipScale { factor } => {
            for &i in &chosen {
                for r in 0..out.targets.nrows() {
                    out.targets[(r, i)] *= -factor;
                }
            }
        }
        AdversaryKind::AdditiveLabelOutlier { magnitude } => {
            for &i in &chosen {
                for r in 0..out.targets.nrows() {
                    out.targets[(r, i)] += magnitude;
                }
            }
        }
        AdversaryKind::OracleModel { w_adv, act } => {
            if w_adv.weights.ncols() != ds.dim() || w_adv.weights.nrows() != ds.n_targets() {
                return Err(Error::DimensionMismatch(format!(
                    "w_adv is {}x{}, dataset needs {}x{}",
                    w_adv.weights.nrows(),
                    w_adv.weights.ncols(),
                    ds.n_targets(),
                    ds.dim()
                )));
            }
            for &i in &chosen {
                let mut nrng = root.substream(domain::ADVERSARY_NOISE, i as u64);
                let z = &w_adv.weights * ds.covariates.column(i);
                for r in 0..out.targets.nrows() {
                    out.targets[(r, i)] =
                        act_value(act, z[r]) + ds.meta.nu * nrng.standard_normal();
                }
            }
        }
        AdversaryKind::LeverageAttack { direction_mode } => {
            for &i in &chosen {
                for r in 0..out.targets.nrows() {
                    match direction_mode {
                        LeverageMode::SignFlip => out.targets[(r, i)] = -out.targets[(r, i)],
                        LeverageMode::Amplify => out.targets[(r, i)] *= 10.0,
                    }
                }
            }
        }
        AdversaryKind::CovariateAndLabel { b_bound } => {
            if !(*b_bound > 0.0) {
                return Err(Error::ParamRange(format!(
                    "covariate bound B must be positive, got {b_bound}"
                )));
            }
            // Adversarial direction: along the true weights (max influence on
            // the fit) when known, else the first coordinate axis.
            let dir = match &ds.meta.w_true {
                Some(w) if w.weights.nrows() >= 1 => {
                    let v = w.weights.row(0).transpose();
                    let norm = v.norm();
                    if norm > 0.0 {
                        v / norm
                    } else {
                        DVector::from_fn(ds.dim(), |i, _| if i == 0 { 1.0 } else { 0.0 })
                    }
                }
                _ => DVector::from_fn(ds.dim(), |i, _| if i == 0 { 1.0 } else { 0.0 }),
            };
            out.meta.b_bound = *b_bound;
            for &i in &chosen {
                let x_new = &dir * *b_bound;
                out.covariates.column_mut(i).copy_from(&x_new);
                let mut nrng = root.substream(domain::ADVERSARY_NOISE, i as u64);
                // labels flipped against the true model at the new covariate
                if let Some(w_true) = &ds.meta.w_true {
                    let z = &w_true.weights * &x_new;
                    for r in 0..out.targets.nrows() {
                        out.targets[(r, i)] = -z[r] + ds.meta.nu * nrng.standard_normal();
                    }
                } else {
                    for r in 0..out.targets.nrows() {
                        out.targets[(r, i)] = ds.meta.nu * nrng.standard_normal();
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ols_full_solve, OlsSubset};

    fn base_gen(n: usize, d: usize, nu: f64, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            d,
            n,
            k: 1,
            sigma: SigmaSpec::Identity,
            law: CovariateLaw::Gaussian,
            nu,
            w_true: WeightSpec::RandomUnitScaled { radius: 1.0 },
            seed,
        }
    }

    #[test]
    fn noiseless_linear_labels_are_exact() {
        let g = base_gen(50, 4, 0.0, 3);
        let ds = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let w = ds.meta.w_true.as_ref().unwrap();
        let predicted = &w.weights * &ds.covariates;
        assert_eq!(predicted, ds.targets);
        assert!(crate::types::validate_dataset(&ds).is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let g = base_gen(200, 6, 0.7, 12);
        let a = generate_clean(&g, &ActivationSpec::sigmoid()).unwrap();
        let b = generate_clean(&g, &ActivationSpec::sigmoid()).unwrap();
        assert_eq!(a, b);
        let c = generate_clean(&base_gen(200, 6, 0.7, 13), &ActivationSpec::sigmoid()).unwrap();
        assert_ne!(a.covariates, c.covariates);
    }

    #[test]
    fn empirical_second_moment_concentrates() {
        // N = 1e5, d = 10, Sigma = I: ||XX^T/N - I||_2 <= 0.05.
        // Threshold from sqrt(d/N) Gaussian concentration, checked
        // empirically over several seeds before freezing.
        let g = base_gen(100_000, 10, 0.0, 7);
        let ds = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let m = &ds.covariates * ds.covariates.transpose() / (g.n as f64);
        let dev = &m - DMatrix::identity(10, 10);
        let spectral = dev.symmetric_eigen().eigenvalues.amax();
        assert!(spectral <= 0.05, "||XX'/N - I|| = {spectral}");
    }

    #[test]
    fn laws_have_identity_second_moment() {
        for law in [CovariateLaw::Rademacher, CovariateLaw::UniformBall] {
            let g = GeneratorSpec {
                law,
                ..base_gen(50_000, 5, 0.0, 21)
            };
            let ds = generate_clean(&g, &ActivationSpec::linear()).unwrap();
            let m = &ds.covariates * ds.covariates.transpose() / (g.n as f64);
            let dev = (&m - DMatrix::identity(5, 5)).norm();
            assert!(dev < 0.1, "{law:?}: ||XX'/N - I||_F = {dev}");
        }
    }

    #[test]
    fn diag_geometric_kappa_is_exact() {
        let sigma = SigmaSpec::DiagGeometric { kappa: 8.0 }.materialize(5).unwrap();
        let s = crate::types::SpectrumInfo::from_symmetric(&sigma).unwrap();
        assert!((s.kappa - 8.0).abs() < 1e-12);
        assert!((s.lambda_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_psd_sigma_is_rejected() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 0)] = -1.0;
        let g = GeneratorSpec {
            sigma: SigmaSpec::Explicit(m),
            ..base_gen(10, 3, 0.0, 1)
        };
        match generate_clean(&g, &ActivationSpec::linear()) {
            Err(Error::NotPsd { eigenvalue }) => assert!(eigenvalue < 0.0),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn zero_eps_leaves_dataset_unchanged() {
        let g = base_gen(40, 3, 0.5, 5);
        let clean = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let adv = AdversarySpec {
            kind: AdversaryKind::AdditiveLabelOutlier { magnitude: 100.0 },
            eps_true: 0.0,
            seed: 9,
        };
        let out = corrupt(&clean, &adv).unwrap();
        assert_eq!(out.covariates, clean.covariates);
        assert_eq!(out.targets, clean.targets);
        assert!(out.inlier_mask.as_ref().unwrap().iter().all(|&m| m));
    }

    #[test]
    fn budget_is_exact_and_inliers_untouched() {
        let g = base_gen(100, 5, 1.0, 17);
        let clean = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let kinds = vec![
            AdversaryKind::LabelSignFlipScale { factor: 2.0 },
            AdversaryKind::AdditiveLabelOutlier { magnitude: 1000.0 },
            AdversaryKind::OracleModel {
                w_adv: ModelParams {
                    weights: -clean.meta.w_true.as_ref().unwrap().weights.clone(),
                },
                act: ActivationSpec::linear(),
            },
            AdversaryKind::LeverageAttack {
                direction_mode: LeverageMode::SignFlip,
            },
            AdversaryKind::CovariateAndLabel { b_bound: 10.0 },
        ];
        for kind in kinds {
            let adv = AdversarySpec {
                kind: kind.clone(),
                eps_true: 0.1,
                seed: 77,
            };
            let out = corrupt(&clean, &adv).unwrap();
            let mask = out.inlier_mask.as_ref().unwrap();
            let corrupted: Vec<usize> = (0..100).filter(|&i| !mask[i]).collect();
            assert_eq!(corrupted.len(), 10, "{kind:?} budget");
            for i in 0..100 {
                if mask[i] {
                    assert_eq!(
                        out.covariates.column(i),
                        clean.covariates.column(i),
                        "{kind:?} touched inlier covariate {i}"
                    );
                    assert_eq!(
                        out.targets.column(i),
                        clean.targets.column(i),
                        "{kind:?} touched inlier label {i}"
                    );
                }
            }
            assert!(crate::types::validate_dataset(&out).is_empty());
        }
    }

    #[test]
    fn additive_outliers_change_exactly_budget_labels() {
        let g = base_gen(100, 5, 1.0, 19);
        let clean = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let adv = AdversarySpec {
            kind: AdversaryKind::AdditiveLabelOutlier { magnitude: 1000.0 },
            eps_true: 0.1,
            seed: 4,
        };
        let out = corrupt(&clean, &adv).unwrap();
        let differing = (0..100)
            .filter(|&i| out.targets.column(i) != clean.targets.column(i))
            .count();
        assert_eq!(differing, 10);
    }

    #[test]
    fn corrupt_is_deterministic() {
        let g = base_gen(60, 4, 0.2, 23);
        let clean = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let adv = AdversarySpec {
            kind: AdversaryKind::LabelSignFlipScale { factor: 1.0 },
            eps_true: 0.2,
            seed: 31,
        };
        assert_eq!(corrupt(&clean, &adv).unwrap(), corrupt(&clean, &adv).unwrap());
    }

    #[test]
    fn covariate_bound_is_respected() {
        let g = base_gen(80, 6, 0.3, 29);
        let clean = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let adv = AdversarySpec {
            kind: AdversaryKind::CovariateAndLabel { b_bound: 7.5 },
            eps_true: 0.25,
            seed: 3,
        };
        let out = corrupt(&clean, &adv).unwrap();
        let mask = out.inlier_mask.as_ref().unwrap();
        for i in 0..80 {
            if !mask[i] {
                assert!(out.covariates.column(i).norm() <= 7.5 + 1e-12);
            }
        }
    }

    #[test]
    fn leverage_attack_picks_largest_norms() {
        let g = base_gen(50, 3, 0.0, 37);
        let clean = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let adv = AdversarySpec {
            kind: AdversaryKind::LeverageAttack {
                direction_mode: LeverageMode::Amplify,
            },
            eps_true: 0.1,
            seed: 1,
        };
        let out = corrupt(&clean, &adv).unwrap();
        let mask = out.inlier_mask.as_ref().unwrap();
        let min_corrupted_norm = (0..50)
            .filter(|&i| !mask[i])
            .map(|i| clean.covariates.column(i).norm())
            .fold(f64::INFINITY, f64::min);
        let max_inlier_norm = (0..50)
            .filter(|&i| mask[i])
            .map(|i| clean.covariates.column(i).norm())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(min_corrupted_norm >= max_inlier_norm);
    }

    #[test]
    fn oracle_model_relabels_toward_adversary_weights() {
        // OLS restricted to the corrupted subset recovers ~ -w*.
        let g = base_gen(2000, 5, 0.0, 41);
        let clean = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let w_true = clean.meta.w_true.clone().unwrap();
        let adv = AdversarySpec {
            kind: AdversaryKind::OracleModel {
                w_adv: ModelParams {
                    weights: -w_true.weights.clone(),
                },
                act: ActivationSpec::linear(),
            },
            eps_true: 0.2,
            seed: 53,
        };
        let out = corrupt(&clean, &adv).unwrap();
        let mask = out.inlier_mask.clone().unwrap();
        let q_indices: Vec<usize> = (0..2000).filter(|&i| !mask[i]).collect();
        let retained = crate::thresholding::RetainedSet {
            losses_at_selection: vec![0.0; q_indices.len()],
            indices: q_indices,
        };
        let w_q = ols_full_solve(&out, OlsSubset::Retained(&retained)).unwrap();
        let err = (&w_q.weights + &w_true.weights).norm();
        assert!(err < 1e-9, "OLS on Q should recover -w*, off by {err}");
    }

    #[test]
    fn eps_out_of_range_is_rejected() {
        let g = base_gen(10, 2, 0.0, 1);
        let clean = generate_clean(&g, &ActivationSpec::linear()).unwrap();
        let adv = AdversarySpec {
            kind: AdversaryKind::AdditiveLabelOutlier { magnitude: 1.0 },
            eps_true: 0.5,
            seed: 0,
        };
        assert!(corrupt(&clean, &adv).is_err());
    }
}
