//! `robust-thresh`: generate contaminated datasets, fit robust estimators,
//! verify concentration bounds, and run scaling sweeps.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_thresh::activations::parse_activation;
use robust_thresh::error::{Error, Result};
use robust_thresh::estimators::{
    fit_linear_it, fit_neuron_it, fit_torrent_fc, ols_full_solve, OlsSubset,
};
use robust_thresh::harness::{emit_report, run_sweep_detailed, SweepSpec};
use robust_thresh::io::{load_dataset, save_dataset};
use robust_thresh::lab::{
    binom_sum_check, hadamard_check, halfspace_second_moment, key_step_inequality_check,
    scaled_gaussian_norm_check, subset_eigen_extremes, worst_subset_noise_energy, BoundDirection,
    LabReport,
};
use robust_thresh::rng::CounterRng;
use robust_thresh::synth::{
    corrupt, generate_clean, AdversaryKind, AdversarySpec, CovariateLaw, GeneratorSpec,
    LeverageMode, SigmaSpec, WeightSpec,
};
use robust_thresh::types::{
    FitConfig, FitReport, InitScheme, IterBudget, ModelParams, StepPlan, StepSize,
};

#[derive(Parser)]
#[command(
    name = "robust-thresh",
    about = "Robust regression and neuron learning under strong contamination",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory (optionally corrupted).
    Gen(GenArgs),
    /// Fit an estimator to a dataset directory.
    Fit(FitArgs),
    /// Verify a concentration lemma by Monte Carlo.
    Verify(VerifyArgs),
    /// Run a sweep described by a JSON config.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    /// none | sign_flip:F | additive:M | oracle | leverage:sign_flip |
    /// leverage:amplify | cov_label:B  (oracle relabels with -w*)
    #[arg(long, default_value = "none")]
    adversary: String,
    /// identity | diag_geo:KAPPA
    #[arg(long, default_value = "identity")]
    sigma: String,
    /// gaussian | rademacher | uniform_ball
    #[arg(long, default_value = "gaussian")]
    law: String,
    /// linear|sigmoid|tanh|leaky_relu:G|smooth_leaky_relu:A|relu
    #[arg(long, default_value = "linear")]
    activation: String,
    /// Norm of the randomly drawn true weights.
    #[arg(long, default_value_t = 1.0)]
    w_norm: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// linear_it | neuron_it | torrent_fc | ols
    #[arg(long)]
    algo: String,
    #[arg(long, default_value = "linear")]
    activation: String,
    #[arg(long, default_value_t = 0.0)]
    eps_alg: f64,
    /// auto or a positive number
    #[arg(long, default_value = "auto")]
    eta: String,
    /// auto or a positive integer
    #[arg(long, default_value = "auto")]
    max_iters: String,
    /// 0 = auto (5 for relu, 1 otherwise)
    #[arg(long, default_value_t = 0)]
    restarts: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// chi2_subset | subset_eigs | halfspace | scaled_gauss | key_step | helpers
    #[arg(long)]
    lemma: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// identity | diag_geo:KAPPA
    #[arg(long, default_value = "identity")]
    sigma: String,
    /// Angle for the halfspace lemma; all of {0, pi/6, pi/3, pi/2} if unset.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    /// Dataset directory for the key-step check.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = false)]
    keep_traces: bool,
}

fn parse_sigma(s: &str) -> Result<SigmaSpec> {
    match s.split_once(':') {
        None if s == "identity" => Ok(SigmaSpec::Identity),
        Some(("diag_geo", kappa)) => {
            let kappa: f64 = kappa
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad kappa in sigma {s:?}")))?;
            Ok(SigmaSpec::DiagGeometric { kappa })
        }
        _ => Err(Error::InvalidConfig(format!(
            "unknown sigma {s:?}; use identity or diag_geo:KAPPA"
        ))),
    }
}

fn parse_law(s: &str) -> Result<CovariateLaw> {
    match s {
        "gaussian" => Ok(CovariateLaw::Gaussian),
        "rademacher" => Ok(CovariateLaw::Rademacher),
        "uniform_ball" => Ok(CovariateLaw::UniformBall),
        _ => Err(Error::InvalidConfig(format!("unknown covariate law {s:?}"))),
    }
}

fn parse_adversary(
    s: &str,
    w_true: Option<&ModelParams>,
    act: &robust_thresh::types::ActivationSpec,
) -> Result<Option<AdversaryKind>> {
    let (name, param) = match s.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (s, None),
    };
    let numeric = |what: &str| -> Result<f64> {
        param
            .ok_or_else(|| Error::InvalidConfig(format!("{name} needs a parameter ({what})")))?
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad {what} in adversary {s:?}")))
    };
    match name {
        "none" => Ok(None),
        "sign_flip" => Ok(Some(AdversaryKind::LabelSignFlipScale {
            factor: numeric("factor")?,
        })),
        "additive" => Ok(Some(AdversaryKind::AdditiveLabelOutlier {
            magnitude: numeric("magnitude")?,
        })),
        "oracle" => {
            let w = w_true.ok_or_else(|| {
                Error::InvalidConfig(
                    "oracle adversary needs ground-truth weights (synthetic data only)"
                        .to_string(),
                )
            })?;
            Ok(Some(AdversaryKind::OracleModel {
                w_adv: ModelParams {
                    weights: -w.weights.clone(),
                },
                act: *act,
            }))
        }
        "leverage" => {
            let mode = match param {
                Some("sign_flip") | None => LeverageMode::SignFlip,
                Some("amplify") => LeverageMode::Amplify,
                Some(other) => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown leverage mode {other:?}"
                    )))
                }
            };
            Ok(Some(AdversaryKind::LeverageAttack {
                direction_mode: mode,
            }))
        }
        "cov_label" => Ok(Some(AdversaryKind::CovariateAndLabel {
            b_bound: numeric("B")?,
        })),
        other => Err(Error::InvalidConfig(format!("unknown adversary {other:?}"))),
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let act = parse_activation(&args.activation)?;
    let gen = GeneratorSpec {
        d: args.d,
        n: args.n,
        k: args.k,
        sigma: parse_sigma(&args.sigma)?,
        law: parse_law(&args.law)?,
        nu: args.nu,
        w_true: WeightSpec::RandomUnitScaled {
            radius: args.w_norm,
        },
        seed: args.seed,
    };
    let clean = generate_clean(&gen, &act)?;
    let ds = match parse_adversary(&args.adversary, clean.meta.w_true.as_ref(), &act)? {
        None => clean,
        Some(kind) => corrupt(
            &clean,
            &AdversarySpec {
                kind,
                eps_true: args.eps,
                seed: args.seed.wrapping_add(1),
            },
        )?,
    };
    save_dataset(&ds, &args.out)?;
    eprintln!(
        "wrote {} samples (d = {}, K = {}) to {}",
        ds.n_samples(),
        ds.dim(),
        ds.n_targets(),
        args.out.display()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let ds = load_dataset(&args.data)?;
    let act = parse_activation(&args.activation)?;
    let eta = match args.eta.as_str() {
        "auto" => StepSize::Auto,
        v => StepSize::Fixed(v.parse().map_err(|_| {
            Error::InvalidConfig(format!("eta must be auto or a number, got {v:?}"))
        })?),
    };
    let max_iters = match args.max_iters.as_str() {
        "auto" => IterBudget::Auto,
        v => IterBudget::Fixed(v.parse().map_err(|_| {
            Error::InvalidConfig(format!("max-iters must be auto or an integer, got {v:?}"))
        })?),
    };
    let init = match args.algo.as_str() {
        "neuron_it" => InitScheme::RandomBall {
            radius_scale: robust_thresh::types::default_ball_scale(ds.dim()),
        },
        _ => InitScheme::Zero,
    };
    let cfg = FitConfig {
        eps_alg: args.eps_alg,
        eta,
        max_iters,
        init,
        seed: args.seed,
        restarts: args.restarts,
        ..FitConfig::default()
    };
    let report: FitReport = match args.algo.as_str() {
        "linear_it" => fit_linear_it(&ds, &cfg)?,
        "neuron_it" => fit_neuron_it(&ds, &act, &cfg)?,
        "torrent_fc" => fit_torrent_fc(&ds, &cfg)?,
        "ols" => {
            let estimate = ols_full_solve(&ds, OlsSubset::All)?;
            FitReport {
                estimate,
                trace: vec![],
                config_echo: cfg.clone(),
                step_plan: StepPlan {
                    eta: 0.0,
                    t_max: 0,
                    stop_param_change: cfg.stop_param_change,
                },
                converged: true,
            }
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown algorithm {other:?}; use linear_it, neuron_it, torrent_fc, or ols"
            )))
        }
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse {
        path: args.out.clone(),
        detail: e.to_string(),
    })?;
    fs::write(&args.out, json + "\n").map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    if let Some(err) = ds
        .meta
        .w_true
        .as_ref()
        .map(|wt| report.estimate.distance(wt))
    {
        eprintln!(
            "fit finished: {} iterations, parameter error {err:.6e}",
            report.iterations()
        );
    } else {
        eprintln!("fit finished: {} iterations", report.iterations());
    }
    Ok(())
}

fn key_step_report(args: &VerifyArgs) -> Result<LabReport> {
    let data = args.data.as_ref().ok_or_else(|| {
        Error::InvalidConfig("key_step verification needs --data DIR".to_string())
    })?;
    let ds = load_dataset(data)?;
    let act = robust_thresh::types::ActivationSpec::linear();
    let eps = ds.meta.eps;
    let mut rng = CounterRng::from_seed(args.seed);
    let mut holds = 0usize;
    for _ in 0..args.trials {
        let w = ModelParams {
            weights: nalgebra::DMatrix::from_fn(ds.n_targets(), ds.dim(), |_, _| {
                rng.uniform_in(-2.0, 2.0)
            }),
        };
        if key_step_inequality_check(&ds, &w, &act, eps)? {
            holds += 1;
        }
    }
    let frac = holds as f64 / args.trials as f64;
    Ok(LabReport {
        lemma_id: "key_step".to_string(),
        trials: args.trials,
        empirical_stat: frac,
        paper_bound: 1.0,
        oracle_stat: None,
        direction: BoundDirection::Lower,
        pass: frac >= 1.0,
        params_echo: serde_json::json!({
            "data": data.display().to_string(),
            "eps": eps,
        }),
    })
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let reports: Vec<LabReport> = match args.lemma.as_str() {
        "chi2_subset" => vec![worst_subset_noise_energy(
            args.n, args.eps, args.nu, args.trials, args.seed,
        )?],
        "subset_eigs" => {
            let sigma = parse_sigma(&args.sigma)?;
            let rep =
                subset_eigen_extremes(args.n, args.d, args.eps, &sigma, args.trials, args.seed)?;
            vec![rep.lambda_max, rep.lambda_min]
        }
        "halfspace" => {
            let thetas = match args.theta {
                Some(t) => vec![t],
                None => vec![
                    0.0,
                    std::f64::consts::PI / 6.0,
                    std::f64::consts::PI / 3.0,
                    std::f64::consts::FRAC_PI_2,
                ],
            };
            let mut out = Vec::new();
            for theta in thetas {
                let rep = halfspace_second_moment(theta, args.mc_samples, args.seed)?;
                out.push(rep.block);
                out.push(rep.min_eig);
            }
            out
        }
        "scaled_gauss" => vec![scaled_gaussian_norm_check(
            args.d, args.d, args.d, args.d, args.nu, args.trials, args.seed,
        )?],
        "key_step" => vec![key_step_report(&args)?],
        "helpers" => vec![binom_sum_check(), hadamard_check(args.trials, args.seed)?],
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown lemma {other:?}; use chi2_subset, subset_eigs, halfspace, \
                 scaled_gauss, key_step, or helpers"
            )))
        }
    };
    for rep in &reports {
        eprintln!(
            "{}: {} (empirical {:.6e} vs bound {:.6e})",
            rep.lemma_id,
            if rep.pass { "PASS" } else { "FAIL" },
            rep.empirical_stat,
            rep.paper_bound
        );
    }
    let json = serde_json::to_string_pretty(&reports).map_err(|e| Error::Parse {
        path: args.out.clone(),
        detail: e.to_string(),
    })?;
    fs::write(&args.out, json + "\n").map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config).map_err(|e| Error::Io {
        path: args.config.clone(),
        source: e,
    })?;
    let spec: SweepSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: args.config.clone(),
        detail: e.to_string(),
    })?;
    let (result, trials) = run_sweep_detailed(&spec)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;
    emit_report(&result, &args.out_dir.join("sweep.csv"))?;
    if args.keep_traces {
        for t in &trials {
            let path = args
                .out_dir
                .join(format!("trace_{}_{}.json", t.axis_index, t.trial_index));
            let json = serde_json::to_string_pretty(t).map_err(|e| Error::Parse {
                path: path.clone(),
                detail: e.to_string(),
            })?;
            fs::write(&path, json + "\n").map_err(|e| Error::Io { path, source: e })?;
        }
    }
    for row in &result.rows {
        eprintln!(
            "{} = {:.4}: median error {:.6e} (ols {:.6e}, oracle {:.6e})",
            result.axis_name,
            row.axis_value,
            row.median_error,
            row.baseline_ols_error,
            row.oracle_error
        );
    }
    eprintln!(
        "scaling fit: {:?}, C = {:.4e}, R^2 = {:.4}",
        result.fitted_scaling.model,
        result.fitted_scaling.constant,
        result.fitted_scaling.r_squared
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
