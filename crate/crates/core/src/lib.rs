//! Robust estimation by gradient-descent iterative hard thresholding.
//!
//! The library fits linear models and single neurons from data where an
//! adversary may have rewritten an eps fraction of the samples. Each
//! iteration scores every sample by its squared loss, keeps the
//! ceil((1 - eps) * N) best, and takes a gradient step on the retained
//! risk. Alongside the estimators there is a synthetic-data module with
//! adaptive adversaries, a Monte Carlo lab that checks the concentration
//! inequalities the analysis rests on, and a sweep harness that measures
//! how the estimation error scales with the corruption rate, the noise
//! level, and the conditioning of the covariates.

pub mod activations;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod lab;
pub mod rng;
pub mod synth;
pub mod thresholding;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ActivationKind, ActivationSpec, Dataset, DatasetMeta, FitConfig, FitReport, InitScheme,
    IterRecord, ModelParams, NoiseParams, SpectrumInfo, SpectrumSource, StepPlan,
};
