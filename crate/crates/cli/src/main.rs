//! `mixlab`: train and evaluate classifiers on low-dimensional data with
//! mixup augmentation and generative relabeling, and reproduce the
//! analytical results numerically.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mixlab_core::data::{
    load_csv, make_synthetic, save_csv, split, Dataset, LabelColumn, SplitSpec, SyntheticName,
};
use mixlab_core::density::GenerativeModel;
use mixlab_core::error::Error;
use mixlab_core::eval::{
    boundary_grid, metric_bundle, save_boundary_csv, AttackConfig, AttackNorm, MetricBundle,
};
use mixlab_core::models::{Classifier, LossKind, ModelKind, OptKind, OptimizerState};
use mixlab_core::theory::{
    example1_optimal_theta, example1_quadrature_minimizer, example3_curve, example3_phi_star,
    verify_inequality_chain, ChainModel, Example1Scheme, Example3Config, Example3Scheme,
    TheoryParams,
};
use mixlab_core::train::{
    cross_validate, train, Artifact, CVReport, GenKind, Method, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "mixlab",
    about = "Mixup training with generative relabeling on low-dimensional data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Train a model and write a checkpoint plus run manifest.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset (clean metrics).
    Eval(EvalArgs),
    /// Evaluate robust accuracy under the single-step gradient attack.
    Attack(AttackArgs),
    /// Export a decision-boundary grid as CSV.
    Boundary(BoundaryArgs),
    /// Reproduce the analytical results numerically.
    Theory(TheoryArgs),
    /// Run the γ × generative-kind cross-validation grid.
    Cv(TrainArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Dataset name (circle, moon, two-circle, cube2d, cube3d, gauss9,
    /// three-dots, n-plus-2-dots).
    #[arg(long)]
    name: String,
    /// Samples per class (exact-point datasets ignore this).
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Noise level; defaults to the dataset's standard value.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// JSON run spec; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV path (label in the last column unless --label is given).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Name of the label column.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    method: Option<MethodArg>,
    #[arg(long)]
    model: Option<ModelArg>,
    #[arg(long)]
    gen_kind: Option<GenKindArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Select checkpoints on robust validation accuracy at this radius.
    #[arg(long)]
    robust_epsilon: Option<f64>,
    /// Output directory for model.json and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: Option<String>,
    /// Margin grid resolution for 2-D data (0 disables).
    #[arg(long, default_value_t = 200)]
    margin_resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = NormArg::Linf)]
    norm: NormArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset used to infer the plotting bounds.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 200)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, value_enum)]
    preset: PresetArg,
    /// Curve CSV output (example3 and fig6 presets).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Model family for the fig6 sweep.
    #[arg(long, value_enum, default_value_t = ChainModelArg::Logreg)]
    model: ChainModelArg,
    /// Use the finite-σ₁ Taylor coefficients instead of the asymptotic limit.
    #[arg(long)]
    finite_sigma: bool,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 201)]
    grid: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Example1,
    Example3,
    Fig6,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChainModelArg {
    Logreg,
    Relu,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Linf,
    L2,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Vanilla,
    Mixup,
    MixupNoMi,
    GenlabelInput,
    GenlabelLatent,
    GenClassifier,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Vanilla => Method::Vanilla,
            MethodArg::Mixup => Method::Mixup,
            MethodArg::MixupNoMi => Method::MixupNoMi,
            MethodArg::GenlabelInput => Method::GenlabelInput,
            MethodArg::GenlabelLatent => Method::GenlabelLatent,
            MethodArg::GenClassifier => Method::GenClassifier,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Logreg,
    Mlp2,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKindArg {
    Gm,
    Kde,
    Cv,
}

/// Serializable run specification (the `--config` file format).
#[derive(Serialize, Deserialize, Clone)]
struct RunSpec {
    dataset: PathBuf,
    #[serde(default)]
    label: Option<String>,
    #[serde(default = "default_train_fraction")]
    train_fraction: f64,
    config: TrainConfig,
}

fn default_train_fraction() -> f64 {
    0.8
}

/// Saved model checkpoint: a network or a generative classifier.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SavedModel {
    Network { model: Classifier },
    Generative { model: GenerativeModel },
}

/// Run record written last; its presence marks a completed run.
#[derive(Serialize, Deserialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    dataset_fingerprint: Option<String>,
    seed: u64,
    metrics: Option<MetricBundle>,
    cv: Option<CVReport>,
    best_epoch: Option<usize>,
    gen_train_accuracy: Option<f64>,
    artifacts: Vec<String>,
    duration_seconds: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::NotPositiveDefinite { .. } | Error::RedrawCapExceeded { .. } => 3,
        _ => 2,
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Boundary(a) => cmd_boundary(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Cv(a) => cmd_cv(a),
    }
}

fn cmd_gen_data(a: GenDataArgs) -> Result<(), Error> {
    let name: SyntheticName = a.name.parse()?;
    let noise = a.noise.unwrap_or_else(|| name.default_noise());
    let ds = make_synthetic(name, a.n, noise, a.seed)?;
    save_csv(&ds, &a.out)?;
    println!("wrote {} samples to {}", ds.n(), a.out.display());
    Ok(())
}

fn load_dataset(path: &Path, label: &Option<String>) -> Result<Dataset, Error> {
    let col = match label {
        Some(name) => LabelColumn::Named(name.clone()),
        None => LabelColumn::Last,
    };
    let (ds, warnings) = load_csv(path, &col)?;
    for w in warnings {
        log::warn!("{w:?}");
    }
    Ok(ds)
}

fn fingerprint(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path)?;
    Ok(format!("sha256:{:x}", Sha256::digest(&bytes)))
}

fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

fn default_optimizer(epochs: usize) -> OptimizerState {
    OptimizerState::new(OptKind::sgd(), 0.1, 1e-4)
        .expect("positive learning rate")
        .with_milestones_at(&[0.5, 0.75], epochs, 0.1)
}

fn resolve_spec(a: &TrainArgs) -> Result<RunSpec, Error> {
    let mut spec = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<RunSpec>(&text)?
        }
        None => {
            let dataset = a.dataset.clone().ok_or_else(|| {
                Error::Config("either --config or --dataset is required".into())
            })?;
            RunSpec {
                dataset,
                label: a.label.clone(),
                train_fraction: 0.8,
                config: TrainConfig::new(Method::Vanilla, ModelKind::Logreg, default_optimizer(100)),
            }
        }
    };
    // Flags override the file.
    if let Some(d) = &a.dataset {
        spec.dataset = d.clone();
    }
    if let Some(l) = &a.label {
        spec.label = Some(l.clone());
    }
    if let Some(f) = a.train_fraction {
        spec.train_fraction = f;
    }
    let cfg = &mut spec.config;
    if let Some(m) = a.method {
        cfg.method = m.into();
    }
    if let Some(m) = a.model {
        cfg.model_kind = match m {
            ModelArg::Logreg => ModelKind::Logreg,
            ModelArg::Mlp2 => ModelKind::Mlp2,
        };
    }
    if let Some(g) = a.gen_kind {
        cfg.gen_kind = match g {
            GenKindArg::Gm => GenKind::Gm,
            GenKindArg::Kde => GenKind::Kde,
            GenKindArg::Cv => GenKind::Cv,
        };
    }
    if let Some(g) = a.gamma {
        cfg.mix.gamma = g;
    }
    if let Some(al) = a.alpha {
        cfg.mix.alpha = al;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
        cfg.opt = OptimizerState::new(cfg.opt.kind, cfg.opt.learning_rate, cfg.opt.weight_decay)?
            .with_milestones_at(&[0.5, 0.75], e, 0.1);
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(lr) = a.lr {
        cfg.opt.learning_rate = lr;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(eps) = a.robust_epsilon {
        cfg.attack = Some(AttackConfig {
            epsilon: eps,
            norm: AttackNorm::Linf,
        });
    }
    cfg.loss = LossKind::CrossEntropy;
    Ok(spec)
}

fn cmd_train(a: TrainArgs) -> Result<(), Error> {
    let start = Instant::now();
    let spec = resolve_spec(&a)?;
    let ds = load_dataset(&spec.dataset, &spec.label)?;
    let (tr, va) = split(
        &ds,
        &SplitSpec {
            train_fraction: spec.train_fraction,
            fold_count: 6,
            seed: spec.config.seed,
        },
    )?;
    let outcome = train(&spec.config, &tr, Some(&va))?;

    std::fs::create_dir_all(&a.out_dir)?;
    let model_path = a.out_dir.join("model.json");
    let saved = match &outcome.artifact {
        Artifact::Network(m) => SavedModel::Network { model: m.clone() },
        Artifact::Generative(g) => SavedModel::Generative { model: g.clone() },
    };
    save_json(&saved, &model_path)?;

    let metrics = match &outcome.artifact {
        Artifact::Network(m) => Some(metric_bundle(
            m,
            &va,
            spec.config.attack.as_ref(),
            if va.d() == 2 { Some(200) } else { None },
        )?),
        Artifact::Generative(_) => None,
    };
    let manifest = RunManifest {
        command: "train".into(),
        config: serde_json::to_value(&spec)?,
        dataset_fingerprint: Some(fingerprint(&spec.dataset)?),
        seed: spec.config.seed,
        metrics,
        cv: outcome.cv.clone(),
        best_epoch: outcome.best_epoch,
        gen_train_accuracy: outcome.gen_train_accuracy,
        artifacts: vec![model_path.display().to_string()],
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    save_json(&manifest, &a.out_dir.join("manifest.json"))?;
    println!(
        "trained {:?} on {}; validation accuracy {:?}",
        spec.config.method,
        ds.name,
        manifest.metrics.as_ref().map(|m| m.clean_accuracy)
    );
    Ok(())
}

fn cmd_cv(a: TrainArgs) -> Result<(), Error> {
    let start = Instant::now();
    let spec = resolve_spec(&a)?;
    let ds = load_dataset(&spec.dataset, &spec.label)?;
    let report = cross_validate(&spec.config, &ds)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let report_path = a.out_dir.join("cv_report.json");
    save_json(&report, &report_path)?;
    let manifest = RunManifest {
        command: "cv".into(),
        config: serde_json::to_value(&spec)?,
        dataset_fingerprint: Some(fingerprint(&spec.dataset)?),
        seed: spec.config.seed,
        metrics: None,
        cv: Some(report.clone()),
        best_epoch: None,
        gen_train_accuracy: None,
        artifacts: vec![report_path.display().to_string()],
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    save_json(&manifest, &a.out_dir.join("manifest.json"))?;
    println!(
        "cross-validation selected gamma={} kind={:?} over {} runs",
        report.selected_gamma, report.selected_gen_kind, report.runs
    );
    Ok(())
}

fn load_network(path: &Path) -> Result<Classifier, Error> {
    let text = std::fs::read_to_string(path)?;
    match serde_json::from_str::<SavedModel>(&text)? {
        SavedModel::Network { model } => Ok(model),
        SavedModel::Generative { .. } => Err(Error::Config(
            "this command requires a network checkpoint, got a generative classifier".into(),
        )),
    }
}

fn cmd_eval(a: EvalArgs) -> Result<(), Error> {
    let model = load_network(&a.model)?;
    let ds = load_dataset(&a.data, &a.label)?;
    let res = if a.margin_resolution > 0 && ds.d() == 2 {
        Some(a.margin_resolution)
    } else {
        None
    };
    let metrics = metric_bundle(&model, &ds, None, res)?;
    let text = serde_json::to_string_pretty(&metrics)?;
    if let Some(out) = &a.out {
        std::fs::write(out, &text)?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_attack(a: AttackArgs) -> Result<(), Error> {
    let model = load_network(&a.model)?;
    let ds = load_dataset(&a.data, &a.label)?;
    let attack = AttackConfig {
        epsilon: a.epsilon,
        norm: match a.norm {
            NormArg::Linf => AttackNorm::Linf,
            NormArg::L2 => AttackNorm::L2,
        },
    };
    let metrics = metric_bundle(&model, &ds, Some(&attack), None)?;
    let text = serde_json::to_string_pretty(&metrics)?;
    if let Some(out) = &a.out {
        std::fs::write(out, &text)?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_boundary(a: BoundaryArgs) -> Result<(), Error> {
    let model = load_network(&a.model)?;
    let ds = load_dataset(&a.data, &a.label)?;
    if ds.d() != 2 {
        return Err(Error::Config(format!(
            "boundary export requires 2-D data, got d = {}",
            ds.d()
        )));
    }
    // bounds: data extent padded by 25% per side (at least 1.0)
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for row in ds.features.outer_iter() {
        for j in 0..2 {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let pad = |l: f64, h: f64| {
        let p = (0.25 * (h - l)).max(1.0);
        (l - p, h + p)
    };
    let (x_lo, x_hi) = pad(lo[0], hi[0]);
    let (y_lo, y_hi) = pad(lo[1], hi[1]);
    let cells = boundary_grid(&model, ((x_lo, y_lo), (x_hi, y_hi)), a.resolution)?;
    save_boundary_csv(&cells, &a.out)?;
    println!("wrote {} grid cells to {}", cells.len(), a.out.display());
    Ok(())
}

fn cmd_theory(a: TheoryArgs) -> Result<(), Error> {
    match a.preset {
        PresetArg::Example1 => {
            let mixup = example1_optimal_theta(Example1Scheme::Mixup);
            let no_mi = example1_optimal_theta(Example1Scheme::MixupWithoutMi);
            let q_mixup = example1_quadrature_minimizer(Example1Scheme::Mixup);
            let q_no_mi = example1_quadrature_minimizer(Example1Scheme::MixupWithoutMi);
            println!("mixup theta_star {mixup:.4} (quadrature {q_mixup:.6})");
            println!("mixup_without_mi theta_star {no_mi:.4} (quadrature {q_no_mi:.6})");
            Ok(())
        }
        PresetArg::Example3 => {
            let mut cfg = Example3Config::default();
            if let Some(r) = a.r {
                cfg.r = r;
            }
            if let Some(n) = a.n {
                cfg.n = n;
            }
            if let Some(s) = a.sigma {
                cfg.sigma = s;
            }
            if let Some(al) = a.alpha {
                cfg.alpha = al;
            }
            let pi = std::f64::consts::PI;
            for (name, scheme) in [
                ("vanilla", Example3Scheme::Vanilla),
                ("mixup", Example3Scheme::Mixup),
                ("genlabel", Example3Scheme::Generative),
            ] {
                let phi = example3_phi_star(scheme, &cfg)?;
                println!("{name} phi_star {:.4}pi", phi / pi);
            }
            if let Some(out) = &a.out {
                let curve = example3_curve(&cfg, a.grid);
                let mut w = csv::Writer::from_path(out)?;
                w.write_record(["phi", "vanilla", "mixup", "genlabel"])?;
                for p in &curve {
                    w.write_record([
                        p.phi.to_string(),
                        p.vanilla.to_string(),
                        p.mixup.to_string(),
                        p.generative.to_string(),
                    ])?;
                }
                w.flush()?;
                println!("wrote curve to {}", out.display());
            }
            Ok(())
        }
        PresetArg::Fig6 => {
            let mut params = TheoryParams::default();
            params.finite_sigma = a.finite_sigma;
            let ds = mixlab_core::data::gaussian_pair(20, 0.01, 0)?;
            let kind = match a.model {
                ChainModelArg::Logreg => ChainModel::Logreg,
                ChainModelArg::Relu => ChainModel::ReluNet,
            };
            let report = verify_inequality_chain(&params, &ds, kind, a.grid, 10.0)?;
            println!(
                "inequality chain holds at {}/{} admissible angles ({} total)",
                report.passed,
                report.admissible,
                report.points.len()
            );
            if let Some(out) = &a.out {
                let mut w = csv::Writer::from_path(out)?;
                w.write_record(["phi", "admissible", "mixup", "genlabel", "adversarial", "holds"])?;
                for p in &report.points {
                    let (m, g, adv) = match &p.losses {
                        Some(l) => (
                            l.mixup.to_string(),
                            l.generative.to_string(),
                            l.adversarial.to_string(),
                        ),
                        None => ("".into(), "".into(), "".into()),
                    };
                    w.write_record([
                        p.phi.to_string(),
                        p.admissible.to_string(),
                        m,
                        g,
                        adv,
                        p.holds.to_string(),
                    ])?;
                }
                w.flush()?;
                println!("wrote curve to {}", out.display());
            }
            Ok(())
        }
    }
}
