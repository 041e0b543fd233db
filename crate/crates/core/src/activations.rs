//! Activation functions, their derivatives, and derivative floors.
//!
//! Sign conventions at kinks: ReLU and leaky-ReLU report the right
//! derivative at 0 (so `act_deriv(relu, 0) = 1`). The choice only affects
//! a measure-zero set and keeps the derivative floor attainable.

use crate::error::{Error, Result};
use crate::types::{ActivationKind, ActivationSpec};

/// sigma(z). Stable for |z| up to ~700: the exponential branches are
/// guarded so neither sigmoid nor smooth-leaky-ReLU overflows.
pub fn act_value(spec: &ActivationSpec, z: f64) -> f64 {
    match spec.kind {
        ActivationKind::Linear => z,
        ActivationKind::Sigmoid => sigmoid(z),
        ActivationKind::Tanh => z.tanh(),
        ActivationKind::LeakyRelu => (spec.gamma * z).max(z),
        ActivationKind::SmoothLeakyRelu => {
            // alpha*z + (1-alpha)*softplus(z); softplus in overflow-safe form.
            spec.alpha * z + (1.0 - spec.alpha) * softplus(z)
        }
        ActivationKind::Relu => z.max(0.0),
    }
}

/// sigma'(z), with the right derivative at ReLU/leaky-ReLU kinks.
pub fn act_deriv(spec: &ActivationSpec, z: f64) -> f64 {
    match spec.kind {
        ActivationKind::Linear => 1.0,
        ActivationKind::Sigmoid => {
            let s = sigmoid(z);
            s * (1.0 - s)
        }
        ActivationKind::Tanh => {
            let t = z.tanh();
            1.0 - t * t
        }
        ActivationKind::LeakyRelu => {
            if z >= 0.0 {
                1.0
            } else {
                spec.gamma
            }
        }
        ActivationKind::SmoothLeakyRelu => spec.alpha + (1.0 - spec.alpha) * sigmoid(z),
        ActivationKind::Relu => {
            if z >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// A valid derivative floor gamma on the band |z| <= radius: the global
/// slope for the leaky kinds, the derivative at +/-radius for the
/// saturating kinds (their derivative is even and decays away from 0),
/// 0 for ReLU and 1 for linear.
pub fn act_gamma_floor(spec: &ActivationSpec, radius: f64) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::ParamRange(format!(
            "gamma floor radius must be >= 0, got {radius}"
        )));
    }
    Ok(match spec.kind {
        ActivationKind::Linear => 1.0,
        ActivationKind::Sigmoid | ActivationKind::Tanh => act_deriv(spec, radius),
        ActivationKind::LeakyRelu => spec.gamma,
        ActivationKind::SmoothLeakyRelu => spec.alpha,
        ActivationKind::Relu => 0.0,
    })
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    // log(1 + e^z) = max(z, 0) + log1p(e^{-|z|})
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Parses the CLI activation syntax:
/// `linear|sigmoid|tanh|leaky_relu:G|smooth_leaky_relu:A|relu`.
pub fn parse_activation(s: &str) -> Result<ActivationSpec> {
    let (name, param) = match s.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (s, None),
    };
    let needs = |p: Option<&str>, what: &str| -> Result<f64> {
        p.ok_or_else(|| Error::InvalidConfig(format!("{name} needs a parameter ({what})")))?
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad {what} in activation {s:?}")))
    };
    match name {
        "linear" => Ok(ActivationSpec::linear()),
        "sigmoid" => Ok(ActivationSpec::sigmoid()),
        "tanh" => Ok(ActivationSpec::tanh()),
        "relu" => Ok(ActivationSpec::relu()),
        "leaky_relu" => ActivationSpec::leaky_relu(needs(param, "slope")?),
        "smooth_leaky_relu" => ActivationSpec::smooth_leaky_relu(needs(param, "alpha")?),
        other => Err(Error::InvalidConfig(format!("unknown activation {other:?}"))),
    }
}

/// All kinds with representative parameters; used by tests and the
/// gradient-check acceptance criterion.
pub fn all_kinds() -> Vec<ActivationSpec> {
    vec![
        ActivationSpec::linear(),
        ActivationSpec::sigmoid(),
        ActivationSpec::tanh(),
        ActivationSpec::leaky_relu(0.1).unwrap(),
        ActivationSpec::smooth_leaky_relu(0.5).unwrap(),
        ActivationSpec::relu(),
    ]
}
