//! Class-conditional density models and generative soft labels.
//!
//! Two model families are supported: a single Gaussian per class ([`GmModel`])
//! and a Gaussian kernel density estimate per class ([`KdeModel`]). Both
//! expose per-class log-likelihoods; the generative soft label of a point is
//! the softmax of those log-likelihoods across classes.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

const LOG_2PI: f64 = 1.8378770664093453;

/// A probability vector over the k classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel(pub Array1<f64>);

impl SoftLabel {
    /// Construct from raw probabilities, validating the simplex constraints.
    pub fn new(probs: Array1<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Numerical("soft label has negative or non-finite entry".into()));
        }
        let sum: f64 = probs.sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "soft label sums to {sum}, expected 1"
            )));
        }
        Ok(SoftLabel(probs))
    }

    /// The one-hot label for class `c` out of `k`.
    pub fn one_hot(c: usize, k: usize) -> Self {
        let mut v = Array1::<f64>::zeros(k);
        v[c] = 1.0;
        SoftLabel(v)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest entry; ties broken by lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for c in 1..self.0.len() {
            if self.0[c] > self.0[best] {
                best = c;
            }
        }
        best
    }
}

/// Numerically stable softmax of a score vector.
pub fn softmax(scores: &[f64]) -> Array1<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Array1::from_vec(exps.into_iter().map(|e| e / sum).collect())
}

/// log(Σ exp(v_i)) with max-subtraction.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + values.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Per-class Gaussian fit: mean, regularized covariance, prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmModel {
    pub means: Vec<Array1<f64>>,
    /// Regularized covariances Σ_c + ε_reg·I actually used for evaluation.
    pub covariances: Vec<Array2<f64>>,
    pub priors: Vec<f64>,
    pub eps_reg: f64,
    #[serde(skip)]
    chols: Vec<Array2<f64>>,
    #[serde(skip)]
    log_dets: Vec<f64>,
}

impl GmModel {
    /// Assemble a model from explicit parameters (e.g. a ground-truth
    /// mixture) and build its factor cache.
    pub fn from_parts(
        means: Vec<Array1<f64>>,
        covariances: Vec<Array2<f64>>,
        priors: Vec<f64>,
        eps_reg: f64,
    ) -> Result<Self> {
        let mut model = GmModel {
            means,
            covariances,
            priors,
            eps_reg,
            chols: Vec::new(),
            log_dets: Vec::new(),
        };
        model.refresh_cache()?;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn d(&self) -> usize {
        self.means[0].len()
    }

    /// Rebuild the cached Cholesky factors (needed after deserialization).
    pub fn refresh_cache(&mut self) -> Result<()> {
        self.chols.clear();
        self.log_dets.clear();
        for (c, cov) in self.covariances.iter().enumerate() {
            let l = linalg::cholesky(cov.view()).ok_or(Error::NotPositiveDefinite {
                class: c,
                eps_reg: self.eps_reg,
            })?;
            self.log_dets.push(linalg::log_det_from_chol(l.view()));
            self.chols.push(l);
        }
        Ok(())
    }

    /// Log density of the class-`c` Gaussian at `x`.
    pub fn log_likelihood(&self, x: ArrayView1<f64>, c: usize) -> Result<f64> {
        if c >= self.k() {
            return Err(Error::ClassOutOfRange(c, self.k()));
        }
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        let diff = &x.to_owned() - &self.means[c];
        let maha = linalg::mahalanobis_sq(self.chols[c].view(), diff.view());
        Ok(-0.5 * (self.d() as f64 * LOG_2PI + self.log_dets[c] + maha))
    }
}

/// Default covariance regularizer: 1e-6 · trace(Σ)/d, floored at 1e-12 so a
/// zero sample covariance (single-sample class) still factorizes.
pub fn default_eps_reg(trace: f64, d: usize) -> f64 {
    (1e-6 * trace / d as f64).max(1e-12)
}

/// Fit one Gaussian per class: μ_c the class mean, Σ_c the class sample
/// covariance (divided by n_c) plus ε_reg·I, π_c = n_c/n.
pub fn fit_gm(train: &Dataset, eps_reg: f64) -> Result<GmModel> {
    if eps_reg < 0.0 {
        return Err(Error::Config("eps_reg must be >= 0".into()));
    }
    let k = train.k();
    let d = train.d();
    let classes = train.class_indices();
    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    let mut priors = Vec::with_capacity(k);
    for c in 0..k {
        let idx: Vec<usize> = (0..train.n()).filter(|&i| classes[i] == c).collect();
        if idx.is_empty() {
            return Err(Error::Data(format!("class {c} has no samples")));
        }
        let xs = train.features.select(Axis(0), &idx);
        let n_c = idx.len() as f64;
        let mean = xs.mean_axis(Axis(0)).expect("non-empty class");
        let mut cov = Array2::<f64>::zeros((d, d));
        for row in xs.outer_iter() {
            let diff = &row.to_owned() - &mean;
            for a in 0..d {
                for b in 0..d {
                    cov[[a, b]] += diff[a] * diff[b];
                }
            }
        }
        cov /= n_c;
        for a in 0..d {
            cov[[a, a]] += eps_reg;
        }
        means.push(mean);
        covariances.push(cov);
        priors.push(n_c / train.n() as f64);
    }
    let mut model = GmModel {
        means,
        covariances,
        priors,
        eps_reg,
        chols: Vec::new(),
        log_dets: Vec::new(),
    };
    model.refresh_cache()?;
    Ok(model)
}

/// Per-class Gaussian KDE: the mixture (1/n_c) Σ_i N(x_i, h_c²·Σ_c).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KdeModel {
    pub banks: Vec<Array2<f64>>,
    pub bandwidths: Vec<f64>,
    /// Kernel covariances Σ_c before bandwidth scaling.
    pub covariances: Vec<Array2<f64>>,
    pub priors: Vec<f64>,
    /// True when a singular class covariance fell back to the identity.
    pub identity_fallback: Vec<bool>,
    #[serde(skip)]
    chols: Vec<Array2<f64>>,
    #[serde(skip)]
    log_dets: Vec<f64>,
}

/// Bandwidth choice for [`fit_kde`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Scott's rule per class: h = n_c^(−1/(d+4)).
    Auto,
    Fixed(f64),
}

/// Scott's factor n^(−1/(d+4)).
pub fn scott_bandwidth(n_c: usize, d: usize) -> f64 {
    (n_c as f64).powf(-1.0 / (d as f64 + 4.0))
}

/// Covariance structure used for the KDE kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KernelShape {
    #[default]
    Full,
    Diagonal,
}

/// Fit a Gaussian KDE per class. Kernel covariance is the class sample
/// covariance (full or diagonal per `shape`), scaled by h². A class whose
/// covariance cannot be factorized falls back to the identity kernel.
pub fn fit_kde(train: &Dataset, bandwidth: Bandwidth, shape: KernelShape) -> Result<KdeModel> {
    if let Bandwidth::Fixed(h) = bandwidth {
        if h <= 0.0 {
            return Err(Error::Config(format!("bandwidth must be > 0, got {h}")));
        }
    }
    let k = train.k();
    let d = train.d();
    let classes = train.class_indices();
    let mut banks = Vec::with_capacity(k);
    let mut bandwidths = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    let mut priors = Vec::with_capacity(k);
    let mut identity_fallback = Vec::with_capacity(k);
    for c in 0..k {
        let idx: Vec<usize> = (0..train.n()).filter(|&i| classes[i] == c).collect();
        if idx.is_empty() {
            return Err(Error::Data(format!("class {c} has no samples")));
        }
        let xs = train.features.select(Axis(0), &idx);
        let n_c = idx.len();
        let h = match bandwidth {
            Bandwidth::Auto => scott_bandwidth(n_c, d),
            Bandwidth::Fixed(h) => h,
        };
        let mean = xs.mean_axis(Axis(0)).expect("non-empty class");
        let mut cov = Array2::<f64>::zeros((d, d));
        for row in xs.outer_iter() {
            let diff = &row.to_owned() - &mean;
            for a in 0..d {
                for b in 0..d {
                    cov[[a, b]] += diff[a] * diff[b];
                }
            }
        }
        cov /= n_c as f64;
        if shape == KernelShape::Diagonal {
            for a in 0..d {
                for b in 0..d {
                    if a != b {
                        cov[[a, b]] = 0.0;
                    }
                }
            }
        }
        let tr: f64 = (0..d).map(|a| cov[[a, a]]).sum();
        for a in 0..d {
            cov[[a, a]] += default_eps_reg(tr, d);
        }
        let fallback = linalg::cholesky(cov.view()).is_none();
        if fallback {
            log::warn!("kde: class {c} covariance is singular, using identity kernel");
            cov = Array2::eye(d);
        }
        banks.push(xs);
        bandwidths.push(h);
        covariances.push(cov);
        priors.push(n_c as f64 / train.n() as f64);
        identity_fallback.push(fallback);
    }
    let mut model = KdeModel {
        banks,
        bandwidths,
        covariances,
        priors,
        identity_fallback,
        chols: Vec::new(),
        log_dets: Vec::new(),
    };
    model.refresh_cache()?;
    Ok(model)
}

impl KdeModel {
    pub fn k(&self) -> usize {
        self.banks.len()
    }

    pub fn d(&self) -> usize {
        self.banks[0].ncols()
    }

    /// Rebuild the cached Cholesky factors of h²Σ_c.
    pub fn refresh_cache(&mut self) -> Result<()> {
        self.chols.clear();
        self.log_dets.clear();
        for (c, cov) in self.covariances.iter().enumerate() {
            let scaled = cov * self.bandwidths[c].powi(2);
            let l = linalg::cholesky(scaled.view()).ok_or(Error::NotPositiveDefinite {
                class: c,
                eps_reg: 0.0,
            })?;
            self.log_dets.push(linalg::log_det_from_chol(l.view()));
            self.chols.push(l);
        }
        Ok(())
    }

    /// Log of the KDE mixture density of class `c` at `x` (log-sum-exp over
    /// the class bank).
    pub fn log_likelihood(&self, x: ArrayView1<f64>, c: usize) -> Result<f64> {
        if c >= self.k() {
            return Err(Error::ClassOutOfRange(c, self.k()));
        }
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        let bank = &self.banks[c];
        let d = self.d() as f64;
        let norm = -0.5 * (d * LOG_2PI + self.log_dets[c]);
        let mut terms = Vec::with_capacity(bank.nrows());
        for row in bank.outer_iter() {
            let diff = &x.to_owned() - &row;
            let maha = linalg::mahalanobis_sq(self.chols[c].view(), diff.view());
            terms.push(norm - 0.5 * maha);
        }
        Ok(log_sum_exp(&terms) - (bank.nrows() as f64).ln())
    }
}

/// Either density family behind one evaluation interface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GenerativeModel {
    Gm(GmModel),
    Kde(KdeModel),
}

impl GenerativeModel {
    pub fn k(&self) -> usize {
        match self {
            GenerativeModel::Gm(m) => m.k(),
            GenerativeModel::Kde(m) => m.k(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            GenerativeModel::Gm(m) => m.d(),
            GenerativeModel::Kde(m) => m.d(),
        }
    }

    pub fn refresh_cache(&mut self) -> Result<()> {
        match self {
            GenerativeModel::Gm(m) => m.refresh_cache(),
            GenerativeModel::Kde(m) => m.refresh_cache(),
        }
    }

    pub fn log_likelihood(&self, x: ArrayView1<f64>, c: usize) -> Result<f64> {
        match self {
            GenerativeModel::Gm(m) => m.log_likelihood(x, c),
            GenerativeModel::Kde(m) => m.log_likelihood(x, c),
        }
    }

    fn priors(&self) -> &[f64] {
        match self {
            GenerativeModel::Gm(m) => &m.priors,
            GenerativeModel::Kde(m) => &m.priors,
        }
    }
}

/// Soft label of `x`: softmax over per-class log-likelihoods. When
/// `use_priors` is set the scores are log posteriors instead (log π_c added).
pub fn generative_label_with_priors(
    model: &GenerativeModel,
    x: ArrayView1<f64>,
    use_priors: bool,
) -> Result<SoftLabel> {
    let k = model.k();
    let mut scores = Vec::with_capacity(k);
    for c in 0..k {
        let mut s = model.log_likelihood(x, c)?;
        if use_priors {
            s += model.priors()[c].ln();
        }
        scores.push(s);
    }
    SoftLabel::new(softmax(&scores))
}

/// Soft label of `x` from raw likelihoods (the default labeling rule).
pub fn generative_label(model: &GenerativeModel, x: ArrayView1<f64>) -> Result<SoftLabel> {
    generative_label_with_priors(model, x, false)
}

/// Fraction of samples whose argmax generative label equals the true class;
/// argmax ties broken by lowest class index.
pub fn generative_classifier_accuracy(model: &GenerativeModel, ds: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..ds.n() {
        let label = generative_label(model, ds.features.row(i))?;
        if label.argmax() == ds.class_of(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticName};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn tiny_two_class() -> Dataset {
        // class 0: {(0,0),(2,0)}, class 1: {(10,10),(12,10)}
        let x = array![[0.0, 0.0], [2.0, 0.0], [10.0, 10.0], [12.0, 10.0]];
        Dataset::from_classes(x, &[0, 0, 1, 1], 2, "tiny", vec!["0".into(), "1".into()]).unwrap()
    }

    #[test]
    fn gm_fit_matches_hand_covariance() {
        let eps = 1e-3;
        let m = fit_gm(&tiny_two_class(), eps).unwrap();
        assert_eq!(m.means[0], array![1.0, 0.0]);
        // sample covariance of {(0,0),(2,0)} with 1/n_c: diag(1, 0)
        assert_abs_diff_eq!(m.covariances[0][[0, 0]], 1.0 + eps, epsilon = 1e-15);
        assert_abs_diff_eq!(m.covariances[0][[1, 1]], eps, epsilon = 1e-15);
        assert_abs_diff_eq!(m.covariances[0][[0, 1]], 0.0, epsilon = 1e-15);
        assert_eq!(m.priors, vec![0.5, 0.5]);
    }

    #[test]
    fn gm_single_sample_class_uses_pure_regularizer() {
        let x = array![[1.0, 2.0], [0.0, 0.0], [0.0, 2.0]];
        let ds =
            Dataset::from_classes(x, &[0, 1, 1], 2, "t", vec!["0".into(), "1".into()]).unwrap();
        let m = fit_gm(&ds, 1e-3).unwrap();
        assert_abs_diff_eq!(m.covariances[0][[0, 0]], 1e-3, epsilon = 1e-18);
        assert_abs_diff_eq!(m.covariances[0][[1, 1]], 1e-3, epsilon = 1e-18);
    }

    #[test]
    fn gm_log_likelihood_standard_normal_2d() {
        // μ=0, Σ=I, x=0 → log(1/(2π))
        let x = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [5.0, 5.0]];
        let ds =
            Dataset::from_classes(x, &[0, 0, 0, 0, 1], 2, "t", vec!["0".into(), "1".into()])
                .unwrap();
        // class 0 has mean 0, cov diag(1/2, 1/2); build the target model by
        // hand (a small ε keeps the single-sample class 1 factorizable)
        let mut m = fit_gm(&ds, 1e-6).unwrap();
        m.covariances[0] = Array2::eye(2);
        m.refresh_cache().unwrap();
        let ll = m.log_likelihood(array![0.0, 0.0].view(), 0).unwrap();
        assert_abs_diff_eq!(ll, -(2.0 * std::f64::consts::PI).ln(), epsilon = 1e-12);
    }

    #[test]
    fn gm_log_likelihood_matches_explicit_quadratic_form() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, "test");
        for d in 2..=10usize {
            // random PD matrix A = M Mᵀ + d·I
            let mut mmat = Array2::<f64>::zeros((d, d));
            for v in mmat.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let a = mmat.dot(&mmat.t()) + Array2::<f64>::eye(d) * d as f64;
            let mu = Array1::from_vec((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let x = Array1::from_vec((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let m = GmModel {
                means: vec![mu.clone()],
                covariances: vec![a.clone()],
                priors: vec![1.0],
                eps_reg: 0.0,
                chols: Vec::new(),
                log_dets: Vec::new(),
            };
            let mut m = m;
            m.refresh_cache().unwrap();
            let got = m.log_likelihood(x.view(), 0).unwrap();
            // brute force: explicit inverse by Gauss-Jordan
            let inv = invert(&a);
            let diff = &x - &mu;
            let maha = diff.dot(&inv.dot(&diff));
            let det = determinant(&a);
            let expect = -0.5 * (d as f64 * LOG_2PI + det.ln() + maha);
            assert_abs_diff_eq!(got, expect, epsilon = 1e-10);
        }
    }

    fn invert(a: &Array2<f64>) -> Array2<f64> {
        let n = a.nrows();
        let mut aug = Array2::<f64>::zeros((n, 2 * n));
        aug.slice_mut(ndarray::s![.., ..n]).assign(a);
        for i in 0..n {
            aug[[i, n + i]] = 1.0;
        }
        for col in 0..n {
            let mut pivot = col;
            for r in col + 1..n {
                if aug[[r, col]].abs() > aug[[pivot, col]].abs() {
                    pivot = r;
                }
            }
            if pivot != col {
                for j in 0..2 * n {
                    let tmp = aug[[col, j]];
                    aug[[col, j]] = aug[[pivot, j]];
                    aug[[pivot, j]] = tmp;
                }
            }
            let p = aug[[col, col]];
            for j in 0..2 * n {
                aug[[col, j]] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[[r, col]];
                    for j in 0..2 * n {
                        aug[[r, j]] -= f * aug[[col, j]];
                    }
                }
            }
        }
        aug.slice(ndarray::s![.., n..]).to_owned()
    }

    fn determinant(a: &Array2<f64>) -> f64 {
        let l = linalg::cholesky(a.view()).unwrap();
        linalg::log_det_from_chol(l.view()).exp()
    }

    #[test]
    fn kde_single_point_bank_is_standard_normal() {
        // bank {0}, h=1, d=1, kernel cov 1 → density at 0 is 1/√(2π)
        let m = KdeModel {
            banks: vec![Array2::from_shape_vec((1, 1), vec![0.0]).unwrap()],
            bandwidths: vec![1.0],
            covariances: vec![Array2::eye(1)],
            priors: vec![1.0],
            identity_fallback: vec![false],
            chols: Vec::new(),
            log_dets: Vec::new(),
        };
        let mut m = m;
        m.refresh_cache().unwrap();
        let ll = m.log_likelihood(array![0.0].view(), 0).unwrap();
        assert_abs_diff_eq!(ll.exp(), 0.3989422804014327, epsilon = 1e-12);
    }

    #[test]
    fn kde_duplicate_points_match_single_point() {
        let single = KdeModel {
            banks: vec![Array2::from_shape_vec((1, 1), vec![0.5]).unwrap()],
            bandwidths: vec![0.7],
            covariances: vec![Array2::eye(1)],
            priors: vec![1.0],
            identity_fallback: vec![false],
            chols: Vec::new(),
            log_dets: Vec::new(),
        };
        let double = KdeModel {
            banks: vec![Array2::from_shape_vec((2, 1), vec![0.5, 0.5]).unwrap()],
            ..single.clone()
        };
        let mut single = single;
        let mut double = double;
        single.refresh_cache().unwrap();
        double.refresh_cache().unwrap();
        for x in [-1.0, 0.0, 0.5, 2.0] {
            let a = single.log_likelihood(array![x].view(), 0).unwrap();
            let b = double.log_likelihood(array![x].view(), 0).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn kde_auto_bandwidth_is_scott() {
        assert_abs_diff_eq!(scott_bandwidth(100, 2), 100f64.powf(-1.0 / 6.0), epsilon = 1e-15);
        assert_abs_diff_eq!(scott_bandwidth(100, 2), 0.46415888336127786, epsilon = 1e-12);
    }

    #[test]
    fn kde_single_component_reduces_to_gm() {
        let x = array![[0.3, -0.7], [4.0, 4.0], [5.0, 3.0], [4.5, 3.5]];
        let ds =
            Dataset::from_classes(x, &[0, 1, 1, 1], 2, "t", vec!["0".into(), "1".into()]).unwrap();
        let kde = fit_kde(&ds, Bandwidth::Fixed(1.0), KernelShape::Full).unwrap();
        // class 0 has one bank point and (by singular fallback) identity
        // kernel; compare against a GM with the same mean and covariance
        let mut gm = GmModel {
            means: vec![array![0.3, -0.7]],
            covariances: vec![kde.covariances[0].clone()],
            priors: vec![1.0],
            eps_reg: 0.0,
            chols: Vec::new(),
            log_dets: Vec::new(),
        };
        gm.refresh_cache().unwrap();
        let p = array![1.1, 0.2];
        let a = kde.log_likelihood(p.view(), 0).unwrap();
        let b = gm.log_likelihood(p.view(), 0).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn kde_rejects_nonpositive_bandwidth() {
        let ds = tiny_two_class();
        assert!(fit_kde(&ds, Bandwidth::Fixed(0.0), KernelShape::Full).is_err());
        assert!(fit_kde(&ds, Bandwidth::Fixed(-1.0), KernelShape::Full).is_err());
    }

    #[test]
    fn generative_label_symmetry_and_dominance() {
        let mut gm = GmModel {
            means: vec![array![-1.0, 0.0], array![1.0, 0.0]],
            covariances: vec![Array2::eye(2), Array2::eye(2)],
            priors: vec![0.5, 0.5],
            eps_reg: 0.0,
            chols: Vec::new(),
            log_dets: Vec::new(),
        };
        gm.refresh_cache().unwrap();
        let model = GenerativeModel::Gm(gm);
        // midpoint: equal likelihoods → uniform
        let label = generative_label(&model, array![0.0, 3.0].view()).unwrap();
        assert_abs_diff_eq!(label.0[0], 0.5, epsilon = 1e-12);
        // far into class 1 territory: log-likelihood gap 2x = 24 → the
        // losing weight is e^{-24} ≈ 4e-11
        let label = generative_label(&model, array![12.0, 0.0].view()).unwrap();
        assert!(label.0[1] >= 1.0 - 1e-8);
    }

    #[test]
    fn proposition1_logistic_identity() {
        // ground-truth 1-D GM with means 0 and 1, shared variance σ²:
        // class-1 probability of x=λ is 1/(1+exp(−(λ−1/2)/σ²))
        for sigma in [0.05f64, 0.1, 0.2] {
            let var = sigma * sigma;
            let mut gm = GmModel {
                means: vec![array![0.0], array![1.0]],
                covariances: vec![
                    Array2::from_shape_vec((1, 1), vec![var]).unwrap(),
                    Array2::from_shape_vec((1, 1), vec![var]).unwrap(),
                ],
                priors: vec![0.5, 0.5],
                eps_reg: 0.0,
                chols: Vec::new(),
                log_dets: Vec::new(),
            };
            gm.refresh_cache().unwrap();
            let model = GenerativeModel::Gm(gm);
            let mut max_err: f64 = 0.0;
            for step in 0..=1000 {
                let lambda = step as f64 / 1000.0;
                let label = generative_label(&model, array![lambda].view()).unwrap();
                let expect = 1.0 / (1.0 + (-(lambda - 0.5) / var).exp());
                max_err = max_err.max((label.0[1] - expect).abs());
            }
            assert!(max_err < 1e-10, "σ={sigma}: max err {max_err}");
        }
    }

    #[test]
    fn gauss9_gm_recovers_means_and_classifies() {
        let ds = make_synthetic(SyntheticName::Gauss9, 200, 0.1, 7).unwrap();
        let gm = fit_gm(&ds, 0.0).unwrap();
        for mean in &gm.means {
            let snap0 = [-10.0f64, 0.0, 10.0]
                .iter()
                .cloned()
                .min_by(|a, b| (a - mean[0]).abs().partial_cmp(&(b - mean[0]).abs()).unwrap())
                .unwrap();
            let snap1 = [-10.0f64, 0.0, 10.0]
                .iter()
                .cloned()
                .min_by(|a, b| (a - mean[1]).abs().partial_cmp(&(b - mean[1]).abs()).unwrap())
                .unwrap();
            assert!((mean[0] - snap0).abs() < 0.05, "mean drifted: {mean}");
            assert!((mean[1] - snap1).abs() < 0.05, "mean drifted: {mean}");
        }
        let acc =
            generative_classifier_accuracy(&GenerativeModel::Gm(gm), &ds).unwrap();
        assert!(acc >= 0.99, "gauss9 GM accuracy {acc}");
    }

    #[test]
    fn degenerate_identical_features_hit_tie_break() {
        // all samples identical → equal likelihoods → argmax tie → class 0
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let ds =
            Dataset::from_classes(x, &[0, 0, 1], 2, "t", vec!["0".into(), "1".into()]).unwrap();
        let gm = fit_gm(&ds, 1e-3).unwrap();
        let acc = generative_classifier_accuracy(&GenerativeModel::Gm(gm), &ds).unwrap();
        // class 0 (frequency 2/3) wins every tie
        assert_abs_diff_eq!(acc, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let scores = [1.0, -2.0, 0.5];
        let shifted: Vec<f64> = scores.iter().map(|s| s + 123.4).collect();
        let a = softmax(&scores);
        let b = softmax(&shifted);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn gm_serializes_and_reloads() {
        let m = fit_gm(&tiny_two_class(), 1e-6).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let mut back: GmModel = serde_json::from_str(&json).unwrap();
        back.refresh_cache().unwrap();
        let x = array![1.0, 0.5];
        assert_abs_diff_eq!(
            m.log_likelihood(x.view(), 0).unwrap(),
            back.log_likelihood(x.view(), 0).unwrap(),
            epsilon = 1e-15
        );
    }
}
