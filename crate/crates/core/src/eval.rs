//! Evaluation: clean accuracy, margins, gradient-sign attacks, and decision
//! boundary grids.

use std::path::Path;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{Classifier, LossKind};

/// Norm ball for the single-step gradient attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackNorm {
    #[default]
    Linf,
    L2,
}

/// Single-step adversarial attack configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub norm: AttackNorm,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.2,
            norm: AttackNorm::Linf,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Metric summary for one evaluated model/dataset pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricBundle {
    pub clean_accuracy: f64,
    pub robust_accuracy: Option<f64>,
    pub margin: Option<f64>,
    pub per_class_accuracy: Vec<f64>,
    pub n_eval: usize,
}

/// Fraction of samples whose argmax logit matches the true class; logit ties
/// go to the lowest class index.
pub fn accuracy(model: &Classifier, ds: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..ds.n() {
        if model.predict(ds.features.row(i))? == ds.class_of(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.n() as f64)
}

/// Per-class accuracy vector.
pub fn per_class_accuracy(model: &Classifier, ds: &Dataset) -> Result<Vec<f64>> {
    let mut correct = vec![0usize; ds.k()];
    let mut total = vec![0usize; ds.k()];
    for i in 0..ds.n() {
        let c = ds.class_of(i);
        total[c] += 1;
        if model.predict(ds.features.row(i))? == c {
            correct[c] += 1;
        }
    }
    Ok(correct
        .iter()
        .zip(total.iter())
        .map(|(&c, &t)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
        .collect())
}

/// Minimum signed distance min_i y_i·θᵀx_i/‖θ‖ for a bias-free binary linear
/// model; `ds` classes map to y = +1 (class 0) and y = −1 (class 1).
pub fn binary_linear_margin(theta: ArrayView1<f64>, ds: &Dataset) -> Result<f64> {
    if ds.k() != 2 {
        return Err(Error::Config(format!(
            "binary margin needs 2 classes, got {}",
            ds.k()
        )));
    }
    let norm = theta.dot(&theta).sqrt();
    if norm == 0.0 {
        return Err(Error::Config("zero parameter vector has no margin".into()));
    }
    let mut min_margin = f64::INFINITY;
    for i in 0..ds.n() {
        let y = if ds.class_of(i) == 0 { 1.0 } else { -1.0 };
        let m = y * ds.features.row(i).dot(&theta) / norm;
        min_margin = min_margin.min(m);
    }
    Ok(min_margin)
}

/// Multiclass margin estimate for 2-D inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginReport {
    /// Minimum distance from any sample to a grid cell of a different
    /// predicted class; 0 when a sample is misclassified.
    pub margin: f64,
    /// Side length of one grid cell (the resolution limit of the estimate).
    pub cell_size: f64,
    pub misclassified: bool,
}

/// Grid-based margin: minimum over samples of the distance to the nearest
/// grid point whose argmax class differs from the sample's true class.
/// A misclassified sample yields margin 0 with the flag set.
pub fn multiclass_margin(
    model: &Classifier,
    ds: &Dataset,
    grid_resolution: usize,
) -> Result<MarginReport> {
    if ds.d() != 2 {
        return Err(Error::Config(format!(
            "grid margin requires 2-D inputs, got d = {}",
            ds.d()
        )));
    }
    if grid_resolution < 2 {
        return Err(Error::Config("grid_resolution must be >= 2".into()));
    }
    let (lo, hi) = padded_bounds(ds, 0.25);
    let step = ((hi.0 - lo.0) / (grid_resolution - 1) as f64)
        .max((hi.1 - lo.1) / (grid_resolution - 1) as f64);

    // Classify the grid once.
    let mut grid_class = vec![0usize; grid_resolution * grid_resolution];
    let mut point = Array1::<f64>::zeros(2);
    for gy in 0..grid_resolution {
        for gx in 0..grid_resolution {
            point[0] = lo.0 + gx as f64 * (hi.0 - lo.0) / (grid_resolution - 1) as f64;
            point[1] = lo.1 + gy as f64 * (hi.1 - lo.1) / (grid_resolution - 1) as f64;
            grid_class[gy * grid_resolution + gx] = model.predict(point.view())?;
        }
    }

    let mut min_margin = f64::INFINITY;
    let mut misclassified = false;
    for i in 0..ds.n() {
        let truth = ds.class_of(i);
        if model.predict(ds.features.row(i))? != truth {
            misclassified = true;
            min_margin = 0.0;
            continue;
        }
        let x = ds.features.row(i);
        let mut nearest = f64::INFINITY;
        for gy in 0..grid_resolution {
            let py = lo.1 + gy as f64 * (hi.1 - lo.1) / (grid_resolution - 1) as f64;
            let dy = py - x[1];
            // Cheap row skip once a closer cell has been found.
            if dy * dy >= nearest {
                continue;
            }
            for gx in 0..grid_resolution {
                if grid_class[gy * grid_resolution + gx] == truth {
                    continue;
                }
                let px = lo.0 + gx as f64 * (hi.0 - lo.0) / (grid_resolution - 1) as f64;
                let d2 = (px - x[0]).powi(2) + dy * dy;
                if d2 < nearest {
                    nearest = d2;
                }
            }
        }
        if nearest.is_finite() {
            min_margin = min_margin.min(nearest.sqrt());
        }
    }
    if !min_margin.is_finite() {
        return Err(Error::Numerical(
            "no decision boundary inside the margin grid".into(),
        ));
    }
    Ok(MarginReport {
        margin: min_margin,
        cell_size: step,
        misclassified,
    })
}

fn padded_bounds(ds: &Dataset, pad_fraction: f64) -> ((f64, f64), (f64, f64)) {
    let mut min_x = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for row in ds.features.outer_iter() {
        min_x = min_x.min(row[0]);
        max_x = max_x.max(row[0]);
        min_y = min_y.min(row[1]);
        max_y = max_y.max(row[1]);
    }
    let pad_x = ((max_x - min_x) * pad_fraction).max(1.0);
    let pad_y = ((max_y - min_y) * pad_fraction).max(1.0);
    ((min_x - pad_x, min_y - pad_y), (max_x + pad_x, max_y + pad_y))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Single-step gradient attack on one sample: L∞ takes x + ε·sign(∇ₓCE),
/// L2 takes x + ε·∇ₓCE/‖∇ₓCE‖ (zero gradient leaves x unchanged).
pub fn fgsm(
    model: &Classifier,
    x: ArrayView1<f64>,
    y_onehot: ArrayView1<f64>,
    cfg: &AttackConfig,
) -> Result<Array1<f64>> {
    cfg.validate()?;
    let grad = model.input_gradient(x, y_onehot, LossKind::CrossEntropy)?;
    let x = x.to_owned();
    match cfg.norm {
        AttackNorm::Linf => Ok(&x + &(grad.mapv(sign) * cfg.epsilon)),
        AttackNorm::L2 => {
            let n = grad.dot(&grad).sqrt();
            if n == 0.0 {
                Ok(x)
            } else {
                Ok(&x + &(grad * (cfg.epsilon / n)))
            }
        }
    }
}

/// Accuracy after attacking every sample with its true label.
pub fn robust_accuracy(model: &Classifier, ds: &Dataset, cfg: &AttackConfig) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..ds.n() {
        let x_adv = fgsm(model, ds.features.row(i), ds.labels.row(i), cfg)?;
        if model.predict(x_adv.view())? == ds.class_of(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.n() as f64)
}

/// One row of a decision-boundary grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryCell {
    pub x0: f64,
    pub x1: f64,
    pub class: usize,
    pub probs: Vec<f64>,
}

/// Evaluate the model on a row-major `resolution × resolution` grid over the
/// given rectangle.
pub fn boundary_grid(
    model: &Classifier,
    bounds: ((f64, f64), (f64, f64)),
    resolution: usize,
) -> Result<Vec<BoundaryCell>> {
    if model.input_dim() != 2 {
        return Err(Error::Config(format!(
            "boundary grid requires a 2-D model, got d = {}",
            model.input_dim()
        )));
    }
    if resolution < 1 {
        return Err(Error::Config("resolution must be >= 1".into()));
    }
    let ((x_lo, y_lo), (x_hi, y_hi)) = bounds;
    let mut cells = Vec::with_capacity(resolution * resolution);
    let denom = (resolution.max(2) - 1) as f64;
    for gy in 0..resolution {
        for gx in 0..resolution {
            let x0 = x_lo + gx as f64 * (x_hi - x_lo) / denom;
            let x1 = y_lo + gy as f64 * (y_hi - y_lo) / denom;
            let logits = model.forward(ndarray::arr1(&[x0, x1]).view())?;
            let probs = crate::density::softmax(logits.as_slice().expect("contiguous"));
            let mut class = 0usize;
            for c in 1..probs.len() {
                if probs[c] > probs[class] {
                    class = c;
                }
            }
            cells.push(BoundaryCell {
                x0,
                x1,
                class,
                probs: probs.to_vec(),
            });
        }
    }
    Ok(cells)
}

/// Write a boundary grid as CSV with columns x0, x1, class, p0..p{k−1}.
pub fn save_boundary_csv(cells: &[BoundaryCell], path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let k = cells.first().map(|c| c.probs.len()).unwrap_or(0);
    let mut header = vec!["x0".to_string(), "x1".to_string(), "class".to_string()];
    header.extend((0..k).map(|c| format!("p{c}")));
    writer.write_record(&header)?;
    for cell in cells {
        let mut row = vec![cell.x0.to_string(), cell.x1.to_string(), cell.class.to_string()];
        row.extend(cell.probs.iter().map(|p| p.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Assemble the standard metric bundle for one model/dataset pair.
pub fn metric_bundle(
    model: &Classifier,
    ds: &Dataset,
    attack: Option<&AttackConfig>,
    margin_resolution: Option<usize>,
) -> Result<MetricBundle> {
    let clean = accuracy(model, ds)?;
    let robust = match attack {
        Some(cfg) => Some(robust_accuracy(model, ds, cfg)?),
        None => None,
    };
    let margin = match margin_resolution {
        Some(res) if ds.d() == 2 => Some(multiclass_margin(model, ds, res)?.margin),
        _ => None,
    };
    Ok(MetricBundle {
        clean_accuracy: clean,
        robust_accuracy: robust,
        margin,
        per_class_accuracy: per_class_accuracy(model, ds)?,
        n_eval: ds.n(),
    })
}
