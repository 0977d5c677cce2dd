//! Linear readout trained by ridge regression, and NMSE scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::StateMatrix;

/// Relative bound on the normal-equation residual accepted from a fit.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RidgeOptions {
    pub lambda: f64,
    /// Append a constant-1 feature.
    pub bias: bool,
    /// Apply `lambda` to the bias weight as well.
    pub regularize_bias: bool,
    /// Center and scale features by their training statistics.
    pub standardize: bool,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        Self {
            lambda: 1e-9,
            bias: true,
            regularize_bias: true,
            standardize: false,
        }
    }
}

impl RidgeOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    /// One weight per feature, followed by the bias weight when present.
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub bias: bool,
    /// Per-feature `(mean, scale)` applied before the weights.
    pub standardization: Option<Vec<(f64, f64)>>,
    /// `‖(XᵀX + λI)w − Xᵀy‖` of the final solution.
    pub residual_norm: f64,
}

impl ReadoutModel {
    pub fn features(&self) -> usize {
        self.weights.len() - usize::from(self.bias)
    }
}

/// Dense symmetric system `A w = b` assembled from design rows.
struct NormalSystem {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl NormalSystem {
    fn residual(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = &self.a[i * self.n..(i + 1) * self.n];
                self.b[i] - row.iter().zip(w).map(|(a, x)| a * x).sum::<f64>()
            })
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
/// or `None` if a pivot is not safely positive.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    let floor = max_diag * n as f64 * f64::EPSILON;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[k * n + i] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    z
}

fn feature_stats(x: &StateMatrix) -> Vec<(f64, f64)> {
    let rows = x.rows.max(1) as f64;
    (0..x.cols)
        .map(|c| {
            let mean = (0..x.rows).map(|r| x.get(r, c)).sum::<f64>() / rows;
            let var = (0..x.rows)
                .map(|r| (x.get(r, c) - mean).powi(2))
                .sum::<f64>()
                / rows;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            (mean, scale)
        })
        .collect()
}

/// Design row for `row`: optionally standardized features plus the bias.
fn design_row(features: &[f64], stats: Option<&[(f64, f64)]>, bias: bool, out: &mut Vec<f64>) {
    out.clear();
    match stats {
        Some(s) => out.extend(features.iter().zip(s).map(|(v, (m, sc))| (v - m) / sc)),
        None => out.extend_from_slice(features),
    }
    if bias {
        out.push(1.0);
    }
}

/// Ridge regression `argmin ‖Xw − y‖² + λ‖w‖²` with the default options
/// (constant-1 column appended and regularized).
pub fn train_ridge(x: &StateMatrix, y: &[f64], lambda: f64) -> Result<ReadoutModel> {
    train_ridge_with(x, y, &RidgeOptions::with_lambda(lambda))
}

/// Ridge fit through a Cholesky factorization of the normal system, with
/// iterative refinement.
pub fn train_ridge_with(
    x: &StateMatrix,
    y: &[f64],
    options: &RidgeOptions,
) -> Result<ReadoutModel> {
    if y.len() != x.rows {
        return Err(Error::DimensionMismatch {
            expected: x.rows,
            got: y.len(),
        });
    }
    if !(options.lambda >= 0.0 && options.lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be non-negative, got {}",
            options.lambda
        )));
    }
    if x.data.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "non-finite feature or target".into(),
        ));
    }
    let n = x.cols + usize::from(options.bias);
    if x.rows < n {
        log::warn!("ridge fit with {} rows for {n} unknowns", x.rows);
    }
    let stats = options.standardize.then(|| feature_stats(x));

    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let mut row = Vec::with_capacity(n);
    for (r, &yr) in y.iter().enumerate() {
        design_row(x.row(r), stats.as_deref(), options.bias, &mut row);
        for i in 0..n {
            let ri = row[i];
            b[i] += ri * yr;
            for j in 0..=i {
                a[i * n + j] += ri * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[j * n + i] = a[i * n + j];
        }
        let is_bias = options.bias && i == n - 1;
        if !is_bias || options.regularize_bias {
            a[i * n + i] += options.lambda;
        }
    }
    let system = NormalSystem { n, a, b };

    let l = cholesky(&system.a, n).ok_or(if options.lambda == 0.0 {
        Error::RankDeficient
    } else {
        Error::InvalidParameter(
            "regularized normal matrix is not numerically positive definite".into(),
        )
    })?;
    let mut w = cholesky_solve(&l, n, &system.b);
    let b_norm = norm(&system.b);
    let bound = RESIDUAL_TOL * b_norm;
    let mut residual = norm(&system.residual(&w));
    for _ in 0..4 {
        if residual <= 0.1 * bound {
            break;
        }
        let r = system.residual(&w);
        let dw = cholesky_solve(&l, n, &r);
        let candidate: Vec<f64> = w.iter().zip(&dw).map(|(a, d)| a + d).collect();
        let cand_res = norm(&system.residual(&candidate));
        if cand_res >= residual {
            break;
        }
        w = candidate;
        residual = cand_res;
    }
    if !(residual <= bound) && b_norm > 0.0 {
        return Err(Error::ResidualBound { residual, bound });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    Ok(ReadoutModel {
        weights: w,
        lambda: options.lambda,
        bias: options.bias,
        standardization: stats,
        residual_norm: residual,
    })
}

/// `ŷ = Xw` (bias and standardization applied as trained).
pub fn predict(model: &ReadoutModel, x: &StateMatrix) -> Result<Vec<f64>> {
    if x.cols != model.features() {
        return Err(Error::DimensionMismatch {
            expected: model.features(),
            got: x.cols,
        });
    }
    let mut row = Vec::with_capacity(model.weights.len());
    Ok((0..x.rows)
        .map(|r| {
            design_row(
                x.row(r),
                model.standardization.as_deref(),
                model.bias,
                &mut row,
            );
            row.iter().zip(&model.weights).map(|(a, w)| a * w).sum()
        })
        .collect())
}

/// `Σ(ŷ−y)² / Σ(y−ȳ)²`.
pub fn nmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    if target.is_empty() {
        return Err(Error::InvalidParameter("NMSE of an empty sequence".into()));
    }
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    let spread: f64 = target.iter().map(|y| (y - mean).powi(2)).sum();
    if !(spread > 0.0) {
        return Err(Error::ConstantTarget);
    }
    let err: f64 = pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum();
    Ok(err / spread)
}

/// `Σ(ŷ−y)² / Σy²`, the power-normalized variant some authors report.
pub fn nmse_power(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    let power: f64 = target.iter().map(|y| y * y).sum();
    if !(power > 0.0) {
        return Err(Error::ConstantTarget);
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub nmse_train: f64,
    pub nmse_test: f64,
    pub residual_norm: f64,
    /// Test error normalized by `Σy²` instead of the target variance.
    pub nmse_test_power: f64,
}

/// Writes the model as CSV: a `# lambda=…,columns=…,bias=…` header line,
/// then one weight per line.
pub fn save_model(model: &ReadoutModel, path: &std::path::Path) -> Result<()> {
    let mut text = format!(
        "# lambda={},columns={},bias={}\n",
        model.lambda,
        model.weights.len(),
        model.bias
    );
    for w in &model.weights {
        text.push_str(&format!("{w:?}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &std::path::Path) -> Result<ReadoutModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|h| h.strip_prefix("# "))
        .ok_or_else(|| Error::Config(format!("{}: missing model header", path.display())))?;
    let mut lambda = None;
    let mut columns = None;
    let mut bias = None;
    for field in header.split(',') {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("bad header field `{field}`")))?;
        let bad = |_| Error::Config(format!("bad value for `{k}`: {v}"));
        match k {
            "lambda" => lambda = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "columns" => columns = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "bias" => bias = Some(v.parse::<bool>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(Error::Config(format!("unknown header key `{k}`"))),
        }
    }
    let weights = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad weight `{l}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let columns = columns.ok_or_else(|| Error::Config("header lacks columns".into()))?;
    if weights.len() != columns {
        return Err(Error::DimensionMismatch {
            expected: columns,
            got: weights.len(),
        });
    }
    Ok(ReadoutModel {
        weights,
        lambda: lambda.ok_or_else(|| Error::Config("header lacks lambda".into()))?,
        bias: bias.unwrap_or(true),
        standardization: None,
        residual_norm: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn column(values: &[f64]) -> StateMatrix {
        StateMatrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
            washout: 0,
            train_boundary: None,
        }
    }

    fn no_bias(lambda: f64) -> RidgeOptions {
        RidgeOptions {
            lambda,
            bias: false,
            ..Default::default()
        }
    }

    #[test]
    fn exact_interpolation() {
        let m = train_ridge_with(&column(&[1.0, 2.0]), &[1.0, 2.0], &no_bias(0.0)).unwrap();
        assert_relative_eq!(m.weights[0], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn shrinkage_by_hand() {
        // XᵀX = 5, Xᵀy = 5, λ = 1 → w = 5/6
        let m = train_ridge_with(&column(&[1.0, 2.0]), &[1.0, 2.0], &no_bias(1.0)).unwrap();
        assert_relative_eq!(m.weights[0], 5.0 / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn heavy_regularization_collapses_weights() {
        let x = column(&[0.1, 0.4, 0.2, 0.9]);
        let m = train_ridge(&x, &[1.0, 2.0, 1.5, 3.0], 1e12).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-10));
    }

    #[test]
    fn rank_deficient_without_lambda() {
        // Two identical columns.
        let x = StateMatrix {
            rows: 3,
            cols: 2,
            data: vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0],
            washout: 0,
            train_boundary: None,
        };
        let err = train_ridge_with(&x, &[1.0, 2.0, 3.0], &no_bias(0.0)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient));
        assert!(train_ridge_with(&x, &[1.0, 2.0, 3.0], &no_bias(1e-6)).is_ok());
    }

    #[test]
    fn predict_basics() {
        let x = StateMatrix {
            rows: 2,
            cols: 2,
            data: vec![0.3, 0.7, -1.0, 2.0],
            washout: 0,
            train_boundary: None,
        };
        let zero = ReadoutModel {
            weights: vec![0.0; 3],
            lambda: 0.0,
            bias: true,
            standardization: None,
            residual_norm: 0.0,
        };
        assert_eq!(predict(&zero, &x).unwrap(), vec![0.0, 0.0]);
        let bias_only = ReadoutModel {
            weights: vec![0.0, 0.0, 1.0],
            ..zero.clone()
        };
        assert_eq!(predict(&bias_only, &x).unwrap(), vec![1.0, 1.0]);
        assert!(predict(&bias_only, &column(&[1.0])).is_err());
    }

    #[test]
    fn nmse_identities() {
        let y = [0.2, 0.5, 0.1, 0.9];
        assert_eq!(nmse(&y, &y).unwrap(), 0.0);
        let mean = y.iter().sum::<f64>() / 4.0;
        assert!((nmse(&[mean; 4], &y).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmse(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert!(matches!(
            nmse(&[1.0, 2.0], &[3.0, 3.0]),
            Err(Error::ConstantTarget)
        ));
        assert!(nmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn standardized_fit_predicts_consistently() {
        let x = StateMatrix {
            rows: 5,
            cols: 2,
            data: vec![1e-6, 3.0, 2e-6, 1.0, 3e-6, 4.0, 4e-6, 1.5, 5e-6, 9.0],
            washout: 0,
            train_boundary: None,
        };
        let y: Vec<f64> = (0..5)
            .map(|r| 2e5 * x.get(r, 0) + 0.5 * x.get(r, 1) - 1.0)
            .collect();
        let opts = RidgeOptions {
            lambda: 0.0,
            standardize: true,
            ..Default::default()
        };
        let m = train_ridge_with(&x, &y, &opts).unwrap();
        let p = predict(&m, &x).unwrap();
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let m = ReadoutModel {
            weights: vec![0.1, -3.25e-7, 1.0 / 3.0],
            lambda: 1e-9,
            bias: true,
            standardization: None,
            residual_norm: 0.0,
        };
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.lambda, m.lambda);
        assert!(back.bias);
    }
}
