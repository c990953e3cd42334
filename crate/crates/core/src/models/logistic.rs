use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRADIENT_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 40;

/// Ridge-penalized logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub ridge_lambda: f64,
    /// Column names of the design the model was fitted on.
    #[serde(default)]
    pub columns: Vec<String>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn check_inputs(x: &DMatrix<f64>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if !y.iter().any(|&v| v) || y.iter().all(|&v| v) {
        return Err(Error::SingleClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("design matrix contains non-finite values".into()));
    }
    Ok(())
}

fn linear_predictor(x: &DMatrix<f64>, theta: &DVector<f64>) -> DVector<f64> {
    let w = theta.rows(1, theta.len() - 1);
    let mut z = x * w;
    z.add_scalar_mut(theta[0]);
    z
}

/// Mean negative log-likelihood plus `(λ/2)·‖w‖²`; `theta = (b, w)`.
pub fn objective(x: &DMatrix<f64>, y: &[bool], lambda: f64, theta: &DVector<f64>) -> f64 {
    let z = linear_predictor(x, theta);
    let nll: f64 = z
        .iter()
        .zip(y)
        .map(|(&zi, &yi)| softplus(zi) - if yi { zi } else { 0.0 })
        .sum();
    let w = theta.rows(1, theta.len() - 1);
    nll / y.len() as f64 + 0.5 * lambda * w.norm_squared()
}

/// Gradient of [`objective`] with respect to `theta`.
pub fn gradient(x: &DMatrix<f64>, y: &[bool], lambda: f64, theta: &DVector<f64>) -> DVector<f64> {
    let n = y.len() as f64;
    let z = linear_predictor(x, theta);
    let r = DVector::from_iterator(
        y.len(),
        z.iter()
            .zip(y)
            .map(|(&zi, &yi)| sigmoid(zi) - if yi { 1.0 } else { 0.0 }),
    );
    let mut g = DVector::zeros(theta.len());
    g[0] = r.sum() / n;
    let gw = x.tr_mul(&r) / n;
    for j in 0..gw.len() {
        g[j + 1] = gw[j] + lambda * theta[j + 1];
    }
    g
}

fn hessian(x: &DMatrix<f64>, lambda: f64, theta: &DVector<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let z = linear_predictor(x, theta);
    let mut aug = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        let s = sigmoid(z[i]);
        let w = (s * (1.0 - s)).sqrt();
        aug[(i, 0)] = w;
        for j in 0..p {
            aug[(i, j + 1)] = w * x[(i, j)];
        }
    }
    let mut h = aug.tr_mul(&aug) / n as f64;
    for j in 1..=p {
        h[(j, j)] += lambda;
    }
    h
}

fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let dim = h.nrows();
    let mut jitter = 0.0;
    loop {
        let mut hj = h.clone();
        for j in 0..dim {
            hj[(j, j)] += jitter;
        }
        if let Some(chol) = hj.cholesky() {
            return chol.solve(g);
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        if jitter > 1e6 {
            // Fall back to steepest descent.
            return g.clone();
        }
    }
}

/// Fits the intercept and coefficients by Newton/IRLS with step halving.
///
/// Minimizes the mean negative log-likelihood plus `(λ/2)·‖w‖²`; the
/// intercept is not penalized. Stops once the gradient norm falls below 1e-8.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[bool], ridge_lambda: f64) -> Result<LogisticModel> {
    check_inputs(x, y)?;
    if !(ridge_lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge lambda {ridge_lambda} must be >= 0"
        )));
    }
    let p = x.ncols();
    let mut theta = DVector::zeros(p + 1);
    let prevalence = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
    theta[0] = (prevalence / (1.0 - prevalence)).ln();
    let mut f = objective(x, y, ridge_lambda, &theta);

    for iter in 0..=MAX_ITERATIONS {
        let g = gradient(x, y, ridge_lambda, &theta);
        let gnorm = g.norm();
        if gnorm < GRADIENT_TOL {
            return Ok(LogisticModel {
                coefficients: theta.rows(1, p).iter().copied().collect(),
                intercept: theta[0],
                ridge_lambda,
                columns: Vec::new(),
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
        if iter == MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
        let step = newton_direction(hessian(x, ridge_lambda, &theta), &g);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &theta - t * &step;
            let fc = objective(x, y, ridge_lambda, &candidate);
            if fc <= f {
                theta = candidate;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No representable decrease remains along the Newton direction.
            return Err(Error::NonConvergence {
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
    }
    unreachable!("loop returns on the final iteration")
}

/// `sigmoid(intercept + X·coefficients)` per row.
pub fn predict_proba(model: &LogisticModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.coefficients.len() {
        return Err(Error::DimensionMismatch {
            expected: model.coefficients.len(),
            found: x.ncols(),
        });
    }
    Ok(x.row_iter()
        .map(|row| {
            let z = model.intercept + row.iter().zip(&model.coefficients).map(|(a, b)| a * b).sum::<f64>();
            sigmoid(z)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let x = DMatrix::from_row_slice(8, 1, &[-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0]);
        let y = [false, true, false, true, false, true, false, true];
        let m = fit_logistic(&x, &y, 0.1).unwrap();
        assert!(m.intercept.abs() < 1e-8);
        assert!(m.coefficients[0] > 0.0);
    }

    #[test]
    fn recovers_generating_coefficients() {
        let mut rng = seed::rng(17);
        let n = 50_000;
        let x = DMatrix::from_fn(n, 2, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<bool> = (0..n)
            .map(|i| rng.random::<f64>() < sigmoid(0.5 + 2.0 * x[(i, 0)] - x[(i, 1)]))
            .collect();
        let m = fit_logistic(&x, &y, 1e-6).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 0.05, "{:?}", m.coefficients);
        assert!((m.coefficients[1] + 1.0).abs() < 0.05, "{:?}", m.coefficients);
        assert!((m.intercept - 0.5).abs() < 0.05);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seed::rng(3);
        let x = DMatrix::from_fn(40, 3, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<bool> = (0..40).map(|_| rng.random()).collect();
        let theta = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let g = gradient(&x, &y, 0.3, &theta);
        let h = 1e-5;
        for k in 0..4 {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (objective(&x, &y, 0.3, &up) - objective(&x, &y, 0.3, &down)) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-6 * fd.abs().max(g[k].abs()).max(1e-3),
                "{k}: {fd} vs {}",
                g[k]
            );
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = DMatrix::from_element(3, 1, 1.0);
        assert!(matches!(
            fit_logistic(&x, &[true, true, true], 0.1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn separable_data_converges_under_ridge() {
        let x = DMatrix::from_row_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [false, false, false, true, true, true];
        let m = fit_logistic(&x, &y, 1e-2).unwrap();
        assert!(m.gradient_norm < 1e-8);
        assert!(m.coefficients[0] > 1.0);
    }

    #[test]
    fn prediction_properties() {
        let zero = LogisticModel {
            coefficients: vec![0.0, 0.0],
            intercept: 0.0,
            ridge_lambda: 0.0,
            columns: Vec::new(),
            iterations: 0,
            gradient_norm: 0.0,
        };
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 4.0]);
        assert_eq!(predict_proba(&zero, &x).unwrap(), vec![0.5, 0.5]);
        let saturated = LogisticModel {
            intercept: 50.0,
            ..zero.clone()
        };
        assert!(predict_proba(&saturated, &x).unwrap().iter().all(|&p| p > 1.0 - 1e-9));
        let mono = LogisticModel {
            coefficients: vec![0.7, 0.0],
            ..zero.clone()
        };
        let grid = DMatrix::from_fn(5, 2, |i, j| if j == 0 { i as f64 } else { 0.0 });
        let p = predict_proba(&mono, &grid).unwrap();
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        assert!(predict_proba(&zero, &DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn objective_never_increases_along_iterations() {
        // Re-run Newton manually and record the objective each accepted step.
        let mut rng = seed::rng(8);
        let x = DMatrix::from_fn(200, 3, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<bool> = (0..200)
            .map(|i| rng.random::<f64>() < sigmoid(x[(i, 0)] * 3.0))
            .collect();
        let mut theta = DVector::zeros(4);
        let mut last = objective(&x, &y, 1e-4, &theta);
        for _ in 0..20 {
            let g = gradient(&x, &y, 1e-4, &theta);
            let step = newton_direction(hessian(&x, 1e-4, &theta), &g);
            let mut t = 1.0;
            while objective(&x, &y, 1e-4, &(&theta - t * &step)) > last && t > 1e-12 {
                t *= 0.5;
            }
            theta -= t * &step;
            let f = objective(&x, &y, 1e-4, &theta);
            assert!(f <= last);
            last = f;
        }
    }
}
