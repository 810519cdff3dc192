//! Exact Gaussian-process regression with an isotropic stationary kernel.
//!
//! Targets are standardised inside [`GpModel::fit`]; kernel hyperparameters are
//! picked by maximising the log marginal likelihood over a fixed grid.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];
const NEGATIVE_VARIANCE_TOLERANCE: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelFamily {
    #[default]
    Matern52,
    SquaredExponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelConfig {
    pub fn new(family: KernelFamily, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        assert!(lengthscale > 0.0 && signal_variance > 0.0 && noise_variance >= 0.0);
        Self {
            family,
            lengthscale,
            signal_variance,
            noise_variance,
        }
    }

    /// Covariance at Euclidean distance `r`.
    pub fn covariance(&self, r: f64) -> f64 {
        let s = r / self.lengthscale;
        match self.family {
            KernelFamily::Matern52 => {
                let a = 5f64.sqrt() * s;
                self.signal_variance * (1.0 + a + a * a / 3.0) * (-a).exp()
            }
            KernelFamily::SquaredExponential => self.signal_variance * (-0.5 * s * s).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub lengthscales: Vec<f64>,
    pub signal_variances: Vec<f64>,
    pub noise_variances: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            lengthscales: vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
            signal_variances: vec![0.25, 1.0, 4.0],
            noise_variances: vec![1e-6, 1e-4, 1e-2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitOptions {
    pub family: KernelFamily,
    pub grid: HyperGrid,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    pub kernel: KernelConfig,
    pub x_train: Vec<Vec<f64>>,
    /// Standardised targets.
    pub y_train: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
    /// Jitter that had to be added on top of `noise_variance`.
    pub jitter: f64,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = if var.sqrt() > 1e-12 * mean.abs().max(1.0) {
        var.sqrt()
    } else {
        1.0
    };
    (y.iter().map(|v| (v - mean) / std).collect(), mean, std)
}

fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: x.len(),
        });
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: row.len(),
        });
    }
    if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite training data".into()));
    }
    Ok(())
}

impl GpModel {
    /// Fits with the hyperparameters of maximum log marginal likelihood on `opts.grid`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], opts: &FitOptions) -> Result<Self> {
        check_inputs(x, y)?;
        let (ys, mean, std) = standardize(y);
        let mut best: Option<(f64, GpModel)> = None;
        let mut last_err = None;
        for &ell in &opts.grid.lengthscales {
            for &sig in &opts.grid.signal_variances {
                for &noise in &opts.grid.noise_variances {
                    let kernel = KernelConfig::new(opts.family, ell, sig, noise);
                    match Self::build(x, &ys, mean, std, kernel) {
                        Ok(model) => {
                            let lml = model.log_marginal_likelihood();
                            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                                best = Some((lml, model));
                            }
                        }
                        Err(e) => last_err = Some(e),
                    }
                }
            }
        }
        best.map(|(_, m)| m).ok_or_else(|| {
            last_err.unwrap_or_else(|| Error::Config("empty hyperparameter grid".into()))
        })
    }

    pub fn fit_with_kernel(x: &[Vec<f64>], y: &[f64], kernel: KernelConfig) -> Result<Self> {
        check_inputs(x, y)?;
        let (ys, mean, std) = standardize(y);
        Self::build(x, &ys, mean, std, kernel)
    }

    fn build(x: &[Vec<f64>], ys: &[f64], y_mean: f64, y_std: f64, kernel: KernelConfig) -> Result<Self> {
        let n = x.len();
        let mut k = DMatrix::from_fn(n, n, |i, j| kernel.covariance(distance(&x[i], &x[j])));
        for i in 0..n {
            k[(i, i)] += kernel.noise_variance;
        }
        for jitter in JITTER_LADDER {
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += jitter;
            }
            if let Some(chol) = kj.cholesky() {
                let alpha = chol.solve(&DVector::from_column_slice(ys));
                return Ok(Self {
                    kernel,
                    x_train: x.to_vec(),
                    y_train: ys.to_vec(),
                    y_mean,
                    y_std,
                    jitter,
                    chol: chol.unpack(),
                    alpha,
                });
            }
        }
        Err(Error::Numerical(format!(
            "Cholesky failed at maximum jitter for {kernel:?}"
        )))
    }

    pub fn n_train(&self) -> usize {
        self.x_train.len()
    }

    /// Forward substitution `L v = b`.
    fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut v = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for (j, vj) in v.iter().enumerate().take(i) {
                s -= self.chol[(i, j)] * vj;
            }
            v[i] = s / self.chol[(i, i)];
        }
        v
    }

    /// Predictive mean and standard deviation of the latent function, in raw units.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let kstar: Vec<f64> = self
            .x_train
            .iter()
            .map(|xi| self.kernel.covariance(distance(xi, x)))
            .collect();
        let mu_std: f64 = kstar.iter().zip(self.alpha.iter()).map(|(k, a)| k * a).sum();
        let v = self.solve_lower(&kstar);
        let var_std = self.kernel.signal_variance - v.iter().map(|e| e * e).sum::<f64>();
        let var_std = if var_std >= 0.0 {
            var_std
        } else if var_std >= NEGATIVE_VARIANCE_TOLERANCE {
            0.0
        } else {
            return Err(Error::Numerical(format!("negative predictive variance {var_std}")));
        };
        if !mu_std.is_finite() {
            return Err(Error::Numerical("non-finite predictive mean".into()));
        }
        Ok((self.y_mean + self.y_std * mu_std, self.y_std * var_std.sqrt()))
    }

    /// `-1/2 y^T alpha - sum(log diag L) - n/2 log(2 pi)` on the standardised targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.n_train() as f64;
        let fit: f64 = self.y_train.iter().zip(self.alpha.iter()).map(|(y, a)| y * a).sum();
        let logdet: f64 = (0..self.n_train()).map(|i| self.chol[(i, i)].ln()).sum();
        -0.5 * fit - logdet - 0.5 * n * (2.0 * PI).ln()
    }
}
