//! Mixup sample generation: pair mixing, the labeling variants (linear,
//! logistic, generative, γ-blend), and manifold-intrusion detection.

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::density::{generative_label, GenerativeModel, SoftLabel};
use crate::error::{Error, Result};

/// Labeling rule applied to each mixed sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    /// λ·y_i + (1−λ)·y_j.
    Linear,
    /// ρ·y_i + (1−ρ)·y_j with ρ = 1/(1+exp(−2(λ−1/2)/σ²)).
    Logistic,
    /// Softmax of per-class log-likelihoods at x_mix.
    Generative,
    /// γ·(generative label) + (1−γ)·(linear label).
    Blend,
}

/// What to do with excluded samples when `exclude_mi` is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiMode {
    /// Redraw until the batch is full (capped).
    #[default]
    Redraw,
    /// Drop flagged samples; the batch may come up short.
    Drop,
}

/// Policy for pairs drawn from the same class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SameClassPolicy {
    /// Mix them; all labelings coincide for equal labels.
    #[default]
    Mix,
    /// Redraw the pair until the classes differ.
    Skip,
}

/// Mixup configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MixConfig {
    /// Beta(α, α) parameter for λ.
    pub alpha: f64,
    /// Blend weight γ toward the generative label.
    pub gamma: f64,
    pub labeling: Labeling,
    pub logistic_sigma: f64,
    pub exclude_mi: bool,
    pub mi_mode: MiMode,
    pub same_class_policy: SameClassPolicy,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig {
            alpha: 1.0,
            gamma: 0.0,
            labeling: Labeling::Linear,
            logistic_sigma: 0.1,
            exclude_mi: false,
            mi_mode: MiMode::Redraw,
            same_class_policy: SameClassPolicy::Mix,
        }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0,1], got {}",
                self.gamma
            )));
        }
        if !(self.logistic_sigma > 0.0) {
            return Err(Error::Config(format!(
                "logistic_sigma must be > 0, got {}",
                self.logistic_sigma
            )));
        }
        Ok(())
    }
}

/// One augmented sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixSample {
    pub x_mix: Array1<f64>,
    pub lambda: f64,
    pub source_i: usize,
    pub source_j: usize,
    pub label: SoftLabel,
    pub mi_flag: bool,
}

/// Draw λ ~ Beta(α, α); α = 1 reduces to Unif[0, 1].
pub fn sample_lambda(alpha: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be > 0, got {alpha}")));
    }
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::Config(format!("invalid Beta parameter {alpha}: {e}")))?;
    Ok(beta.sample(rng))
}

/// Convex combination of a pair with the linear mixup label.
pub fn mix_pair(
    xi: ArrayView1<f64>,
    yi: ArrayView1<f64>,
    xj: ArrayView1<f64>,
    yj: ArrayView1<f64>,
    lambda: f64,
) -> Result<(Array1<f64>, SoftLabel)> {
    if xi.len() != xj.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            got: xj.len(),
        });
    }
    if yi.len() != yj.len() {
        return Err(Error::DimensionMismatch {
            expected: yi.len(),
            got: yj.len(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must lie in [0,1], got {lambda}")));
    }
    let x = &xi.to_owned() * lambda + &xj.to_owned() * (1.0 - lambda);
    let y = &yi.to_owned() * lambda + &yj.to_owned() * (1.0 - lambda);
    Ok((x, SoftLabel::new(y)?))
}

/// Logistic mixing weight ρ = 1/(1+exp(−2(λ−1/2)/σ²)).
pub fn logistic_rho(lambda: f64, sigma: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * (lambda - 0.5) / (sigma * sigma)).exp())
}

/// Logistic label ρ·y_i + (1−ρ)·y_j.
pub fn logistic_label(
    yi: ArrayView1<f64>,
    yj: ArrayView1<f64>,
    lambda: f64,
    sigma: f64,
) -> Result<SoftLabel> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be > 0, got {sigma}")));
    }
    let rho = logistic_rho(lambda, sigma);
    let y = &yi.to_owned() * rho + &yj.to_owned() * (1.0 - rho);
    SoftLabel::new(y)
}

/// True iff the Euclidean nearest training point to `x_mix` carries a label
/// different from both source labels. Nearest-neighbor ties go to the lowest
/// index.
pub fn detect_mi(
    x_mix: ArrayView1<f64>,
    yi: ArrayView1<f64>,
    yj: ArrayView1<f64>,
    train: &Dataset,
) -> bool {
    let nn = nearest_index(x_mix, train);
    let nn_label = train.labels.row(nn);
    nn_label != yi && nn_label != yj
}

fn nearest_index(x: ArrayView1<f64>, train: &Dataset) -> usize {
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    for (i, row) in train.features.outer_iter().enumerate() {
        let d2: f64 = row
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 < best_d2 {
            best_d2 = d2;
            best = i;
        }
    }
    best
}

/// Attempt cap multiplier for manifold-intrusion redraws.
const MI_REDRAW_CAP: usize = 50;

/// Generate a batch of mixed samples. Pairs are drawn uniformly with
/// replacement; the label follows `cfg.labeling`; with `exclude_mi` set,
/// flagged samples are redrawn (up to 50·batch_size attempts) or dropped
/// per `cfg.mi_mode`.
pub fn make_batch(
    train: &Dataset,
    model: Option<&GenerativeModel>,
    cfg: &MixConfig,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<MixSample>> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    if matches!(cfg.labeling, Labeling::Generative | Labeling::Blend) && model.is_none() {
        return Err(Error::Config(
            "generative/blend labeling requires a fitted generative model".into(),
        ));
    }
    let n = train.n();
    let cap = MI_REDRAW_CAP * batch_size;
    let mut out = Vec::with_capacity(batch_size);
    let mut attempts = 0usize;
    while out.len() < batch_size {
        if attempts >= cap {
            if cfg.exclude_mi && cfg.mi_mode == MiMode::Drop {
                break;
            }
            return Err(Error::RedrawCapExceeded {
                attempts,
                batch_size,
            });
        }
        attempts += 1;
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if cfg.same_class_policy == SameClassPolicy::Skip && train.class_of(i) == train.class_of(j)
        {
            continue;
        }
        let lambda = sample_lambda(cfg.alpha, rng)?;
        let (xi, yi) = (train.features.row(i), train.labels.row(i));
        let (xj, yj) = (train.features.row(j), train.labels.row(j));
        let (x_mix, y_linear) = mix_pair(xi, yi, xj, yj, lambda)?;
        let mi_flag = detect_mi(x_mix.view(), yi, yj, train);
        if cfg.exclude_mi && mi_flag {
            continue;
        }
        let label = match cfg.labeling {
            Labeling::Linear => y_linear,
            Labeling::Logistic => logistic_label(yi, yj, lambda, cfg.logistic_sigma)?,
            Labeling::Generative => {
                generative_label(model.expect("checked above"), x_mix.view())?
            }
            Labeling::Blend => {
                let gen = generative_label(model.expect("checked above"), x_mix.view())?;
                let blended = &gen.0 * cfg.gamma + &y_linear.0 * (1.0 - cfg.gamma);
                SoftLabel::new(blended)?
            }
        };
        out.push(MixSample {
            x_mix,
            lambda,
            source_i: i,
            source_j: j,
            label,
            mi_flag,
        });
    }
    Ok(out)
}

/// Fraction of raw mixes (no exclusion) flagged as manifold intrusion,
/// estimated from `trials` draws.
pub fn mi_rate(train: &Dataset, alpha: f64, trials: usize, rng: &mut impl Rng) -> Result<f64> {
    let mut flagged = 0usize;
    let n = train.n();
    for _ in 0..trials {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let lambda = sample_lambda(alpha, rng)?;
        let (x_mix, _) = mix_pair(
            train.features.row(i),
            train.labels.row(i),
            train.features.row(j),
            train.labels.row(j),
            lambda,
        )?;
        if detect_mi(x_mix.view(), train.labels.row(i), train.labels.row(j), train) {
            flagged += 1;
        }
    }
    Ok(flagged as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, Dataset, SyntheticName};
    use crate::density::fit_gm;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    /// The 1-D three-point line dataset: x=−1 (class 0), x=0 (class 1),
    /// x=+1 (class 0).
    fn intruding_line() -> Dataset {
        let x = array![[-1.0], [0.0], [1.0]];
        Dataset::from_classes(x, &[0, 1, 0], 2, "line", vec!["0".into(), "1".into()]).unwrap()
    }

    #[test]
    fn lambda_alpha1_is_uniform_mean() {
        let mut rng = crate::rng::stream(0, "test");
        let n = 100_000;
        let mean: f64 =
            (0..n).map(|_| sample_lambda(1.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn lambda_alpha2_variance() {
        let mut rng = crate::rng::stream(1, "test");
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_lambda(2.0, &mut rng).unwrap()).collect();
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        let var: f64 = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((var - 0.05).abs() < 0.005, "variance {var}");
    }

    #[test]
    fn lambda_large_alpha_concentrates() {
        let mut rng = crate::rng::stream(2, "test");
        for _ in 0..1000 {
            let l = sample_lambda(1e4, &mut rng).unwrap();
            assert!((l - 0.5).abs() < 0.05, "draw {l}");
        }
    }

    #[test]
    fn lambda_rejects_nonpositive_alpha() {
        let mut rng = crate::rng::stream(0, "test");
        assert!(sample_lambda(0.0, &mut rng).is_err());
        assert!(sample_lambda(-1.0, &mut rng).is_err());
    }

    #[test]
    fn mix_pair_endpoints_and_convexity() {
        let xi = array![1.0, 2.0];
        let xj = array![3.0, -4.0];
        let yi = array![1.0, 0.0];
        let yj = array![0.0, 1.0];
        let (x, y) = mix_pair(xi.view(), yi.view(), xj.view(), yj.view(), 1.0).unwrap();
        assert_eq!(x, xi);
        assert_eq!(y.0, yi);
        let (_, y) = mix_pair(xi.view(), yi.view(), xj.view(), yj.view(), 0.25).unwrap();
        assert_abs_diff_eq!(y.0[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(y.0[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn same_class_midpoint_keeps_label() {
        // opposite points of one class mix to the origin with the pure label
        let xi = array![-1.0, 0.0];
        let xj = array![1.0, 0.0];
        let y = array![1.0, 0.0];
        let (x, label) = mix_pair(xi.view(), y.view(), xj.view(), y.view(), 0.5).unwrap();
        assert_eq!(x, array![0.0, 0.0]);
        assert_eq!(label.0, y);
    }

    #[test]
    fn mix_pair_rejects_bad_lambda() {
        let x = array![0.0];
        let y = array![1.0, 0.0];
        assert!(mix_pair(x.view(), y.view(), x.view(), y.view(), 1.5).is_err());
        assert!(mix_pair(x.view(), y.view(), x.view(), y.view(), -0.1).is_err());
    }

    #[test]
    fn logistic_label_symmetry_and_sharpness() {
        let yi = array![1.0, 0.0];
        let yj = array![0.0, 1.0];
        let mid = logistic_label(yi.view(), yj.view(), 0.5, 0.3).unwrap();
        assert_abs_diff_eq!(mid.0[0], 0.5, epsilon = 1e-15);
        // σ = 1/(2√d) with d=5 → at λ=1, ρ = 1/(1+e^{−4d}) = 1/(1+e^{−20})
        let d = 5.0f64;
        let sigma = 1.0 / (2.0 * d.sqrt());
        let rho = logistic_rho(1.0, sigma);
        assert_abs_diff_eq!(rho, 1.0 / (1.0 + (-4.0 * d).exp()), epsilon = 1e-15);
    }

    #[test]
    fn logistic_rho_is_increasing() {
        for sigma in [0.05, 0.3, 1.0, 5.0] {
            assert!(logistic_rho(0.6, sigma) > logistic_rho(0.4, sigma));
        }
    }

    #[test]
    fn detect_mi_on_intruding_line() {
        let ds = intruding_line();
        let (x_mix, _) = mix_pair(
            ds.features.row(0),
            ds.labels.row(0),
            ds.features.row(2),
            ds.labels.row(2),
            0.5,
        )
        .unwrap();
        // midpoint of the two outer class-0 points lands on the class-1 point
        assert!(detect_mi(x_mix.view(), ds.labels.row(0), ds.labels.row(2), &ds));
        // a point near a source has that source as NN → no intrusion
        assert!(!detect_mi(array![0.9].view(), ds.labels.row(0), ds.labels.row(2), &ds));
    }

    #[test]
    fn detect_mi_is_symmetric_in_sources() {
        let ds = intruding_line();
        let x = array![0.1];
        let a = detect_mi(x.view(), ds.labels.row(0), ds.labels.row(1), &ds);
        let b = detect_mi(x.view(), ds.labels.row(1), ds.labels.row(0), &ds);
        assert_eq!(a, b);
    }

    #[test]
    fn gauss9_cross_center_mix_intrudes() {
        // classes at (-10,-10) and (10,10) mixed at λ=0.5 land on the
        // center cluster, whose label differs from both
        let ds = make_synthetic(SyntheticName::Gauss9, 30, 0.1, 0).unwrap();
        let classes = ds.class_indices();
        let i = classes.iter().position(|&c| c == 0).unwrap();
        let j = classes.iter().position(|&c| c == 8).unwrap();
        let (x_mix, _) = mix_pair(
            ds.features.row(i),
            ds.labels.row(i),
            ds.features.row(j),
            ds.labels.row(j),
            0.5,
        )
        .unwrap();
        assert!(detect_mi(x_mix.view(), ds.labels.row(i), ds.labels.row(j), &ds));
    }

    #[test]
    fn batch_gamma_zero_blend_equals_linear() {
        let ds = make_synthetic(SyntheticName::Gauss9, 20, 0.1, 3).unwrap();
        let gm = GenerativeModel::Gm(fit_gm(&ds, 1e-6).unwrap());
        let cfg_blend = MixConfig {
            labeling: Labeling::Blend,
            gamma: 0.0,
            ..MixConfig::default()
        };
        let cfg_linear = MixConfig::default();
        let mut rng1 = crate::rng::stream(9, "batch");
        let mut rng2 = crate::rng::stream(9, "batch");
        let a = make_batch(&ds, Some(&gm), &cfg_blend, 64, &mut rng1).unwrap();
        let b = make_batch(&ds, None, &cfg_linear, 64, &mut rng2).unwrap();
        for (s, t) in a.iter().zip(b.iter()) {
            assert_eq!(s.source_i, t.source_i);
            for (p, q) in s.label.0.iter().zip(t.label.0.iter()) {
                assert_abs_diff_eq!(p, q, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn batch_gamma_one_blend_equals_generative() {
        let ds = make_synthetic(SyntheticName::ThreeDots, 1, 0.0, 0).unwrap();
        let gm = GenerativeModel::Gm(fit_gm(&ds, 1e-3).unwrap());
        let cfg_blend = MixConfig {
            labeling: Labeling::Blend,
            gamma: 1.0,
            ..MixConfig::default()
        };
        let mut rng = crate::rng::stream(4, "batch");
        let batch = make_batch(&ds, Some(&gm), &cfg_blend, 32, &mut rng).unwrap();
        for s in &batch {
            let pure = generative_label(&gm, s.x_mix.view()).unwrap();
            for (p, q) in s.label.0.iter().zip(pure.0.iter()) {
                assert_abs_diff_eq!(p, q, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exclude_mi_emits_no_conflicting_samples() {
        let ds = intruding_line();
        let cfg = MixConfig {
            exclude_mi: true,
            ..MixConfig::default()
        };
        let mut rng = crate::rng::stream(0, "batch");
        let batch = make_batch(&ds, None, &cfg, 100, &mut rng).unwrap();
        assert_eq!(batch.len(), 100);
        for s in &batch {
            assert!(!detect_mi(
                s.x_mix.view(),
                ds.labels.row(s.source_i),
                ds.labels.row(s.source_j),
                &ds
            ));
        }
    }

    #[test]
    fn convex_combination_is_exact() {
        let ds = make_synthetic(SyntheticName::Moon, 30, 0.1, 1).unwrap();
        let mut rng = crate::rng::stream(5, "batch");
        let batch = make_batch(&ds, None, &MixConfig::default(), 64, &mut rng).unwrap();
        for s in &batch {
            let xi = ds.features.row(s.source_i);
            let xj = ds.features.row(s.source_j);
            let recon = &xi.to_owned() * s.lambda + &xj.to_owned() * (1.0 - s.lambda);
            assert_eq!(s.x_mix, recon);
        }
    }

    #[test]
    fn generative_labeling_without_model_is_config_error() {
        let ds = intruding_line();
        let cfg = MixConfig {
            labeling: Labeling::Generative,
            ..MixConfig::default()
        };
        let mut rng = crate::rng::stream(0, "batch");
        assert!(matches!(
            make_batch(&ds, None, &cfg, 8, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mi_rate_is_positive_on_gauss9() {
        let ds = make_synthetic(SyntheticName::Gauss9, 20, 0.1, 0).unwrap();
        let mut rng = crate::rng::stream(0, "mi");
        let rate = mi_rate(&ds, 1.0, 2000, &mut rng).unwrap();
        assert!(rate > 0.0, "expected some intrusions, rate {rate}");
    }
}
