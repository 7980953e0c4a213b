//! Kernel ridge regression with a Gaussian kernel, fitted by a hand-rolled
//! Cholesky solve. Prediction-only: this teacher never exposes gradients.

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor2};

#[derive(Debug, Clone)]
pub struct KernelRidge {
    support: Tensor2,
    alpha: Tensor2,
    sigma: f64,
    lambda: f64,
}

/// Solve `(K + lambda I) a = y` where `K_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))`.
pub fn krr_fit(x: &Tensor2, y: &Tensor2, sigma: f64, lambda: f64) -> Result<KernelRidge> {
    if x.rows() == 0 {
        return Err(Error::invalid("kernel ridge needs at least one sample"));
    }
    if y.shape() != (x.rows(), 1) {
        return Err(Error::invalid(format!(
            "targets must be {}x1, got {}x{}",
            x.rows(),
            y.rows(),
            y.cols()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("kernel bandwidth must be positive"));
    }
    if lambda < 0.0 {
        return Err(Error::invalid("ridge strength must be nonnegative"));
    }

    let n = x.rows();
    let d2 = tensor::pairwise_sqdist(x, x)?;
    let inv = -1.0 / (2.0 * sigma * sigma);
    let mut k: Vec<f64> = d2.data().iter().map(|&v| (v * inv).exp()).collect();
    for i in 0..n {
        k[i * n + i] += lambda;
    }

    // In-place lower Cholesky; a non-positive pivot means the regularized
    // kernel matrix is not positive definite.
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i * n + j];
            for t in 0..j {
                s -= k[i * n + t] * k[j * n + t];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::numeric(
                        "kernel matrix is singular; increase the ridge strength",
                    ));
                }
                k[i * n + i] = s.sqrt();
            } else {
                k[i * n + j] = s / k[j * n + j];
            }
        }
    }

    // Forward then backward substitution.
    let mut a = y.data().to_vec();
    for i in 0..n {
        let mut s = a[i];
        for t in 0..i {
            s -= k[i * n + t] * a[t];
        }
        a[i] = s / k[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = a[i];
        for t in i + 1..n {
            s -= k[t * n + i] * a[t];
        }
        a[i] = s / k[i * n + i];
    }

    Ok(KernelRidge {
        support: x.clone(),
        alpha: Tensor2::from_vec(n, 1, a)?,
        sigma,
        lambda,
    })
}

impl KernelRidge {
    pub fn input_dim(&self) -> usize {
        self.support.cols()
    }

    pub fn support_count(&self) -> usize {
        self.support.rows()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.support.cols() {
            return Err(Error::invalid(format!(
                "kernel ridge expects {} features, got {}",
                self.support.cols(),
                x.cols()
            )));
        }
        let d2 = tensor::pairwise_sqdist(x, &self.support)?;
        let inv = -1.0 / (2.0 * self.sigma * self.sigma);
        let k = tensor::map(&d2, |v| (v * inv).exp())?;
        tensor::matmul(&k, &self.alpha)
    }

    pub(crate) fn from_raw(
        support: Tensor2,
        alpha: Tensor2,
        sigma: f64,
        lambda: f64,
    ) -> Result<Self> {
        if alpha.shape() != (support.rows(), 1) {
            return Err(Error::invalid("coefficient count must match support rows"));
        }
        if !(sigma > 0.0) || lambda < 0.0 {
            return Err(Error::invalid("bad kernel ridge hyperparameters"));
        }
        Ok(KernelRidge {
            support,
            alpha,
            sigma,
            lambda,
        })
    }

    pub(crate) fn raw_parts(&self) -> (&Tensor2, &Tensor2, f64, f64) {
        (&self.support, &self.alpha, self.sigma, self.lambda)
    }
}
