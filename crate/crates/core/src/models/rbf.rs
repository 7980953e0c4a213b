//! Radial-basis-function student: a layer of Gaussian bumps with trainable
//! centers and per-unit log-widths, followed by a linear head.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{Differentiable, TapedForward};
use crate::rng::rng_from_seed;
use crate::tape::{GradTape, NodeId};
use crate::tensor::{self, Tensor2};

#[derive(Debug, Clone, PartialEq)]
pub struct RbfStudentSpec {
    pub input_dim: usize,
    pub centers: usize,
    /// Initial log-width shared by all units. Zero means unit width; on
    /// small-scale data (simplex features, say) pass the log of a typical
    /// pairwise distance instead so the units start distinguishable.
    pub log_width_init: f64,
}

#[derive(Debug, Clone)]
pub struct RbfNet {
    input_dim: usize,
    centers: usize,
    /// Layout: centers (k*d), log-widths (k), head weights (k), bias (1).
    theta: Vec<f64>,
}

/// Build an RBF student whose centers are taken from `centers` (typically
/// drawn from a domain sampler), with seeded uniform head init.
pub fn build_rbf(spec: &RbfStudentSpec, centers: &Tensor2, seed: u64) -> Result<RbfNet> {
    if spec.input_dim == 0 || spec.centers == 0 {
        return Err(Error::invalid("rbf net needs at least one input and one unit"));
    }
    if centers.shape() != (spec.centers, spec.input_dim) {
        return Err(Error::invalid(format!(
            "center matrix must be {}x{}, got {}x{}",
            spec.centers,
            spec.input_dim,
            centers.rows(),
            centers.cols()
        )));
    }
    let k = spec.centers;
    let mut theta = Vec::with_capacity(k * spec.input_dim + 2 * k + 1);
    theta.extend_from_slice(centers.data());
    theta.extend(std::iter::repeat_n(spec.log_width_init, k));
    let mut rng = rng_from_seed(seed);
    let lim = (6.0 / (k + 1) as f64).sqrt();
    for _ in 0..k {
        theta.push(rng.random_range(-lim..lim));
    }
    theta.push(0.0);
    Ok(RbfNet {
        input_dim: spec.input_dim,
        centers: k,
        theta,
    })
}

impl RbfNet {
    pub fn centers(&self) -> usize {
        self.centers
    }

    pub(crate) fn from_raw(input_dim: usize, centers: usize, theta: Vec<f64>) -> Result<Self> {
        let want = centers * input_dim + 2 * centers + 1;
        if theta.len() != want {
            return Err(Error::invalid(format!(
                "rbf net expects {} parameters, got {}",
                want,
                theta.len()
            )));
        }
        Ok(RbfNet {
            input_dim,
            centers,
            theta,
        })
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (k, d) = (self.centers, self.input_dim);
        (
            &self.theta[..k * d],
            &self.theta[k * d..k * d + k],
            &self.theta[k * d + k..k * d + 2 * k],
            self.theta[k * d + 2 * k],
        )
    }

    /// Hidden activations for a batch, each in (0, 1].
    pub fn activations(&self, x: &Tensor2) -> Result<Tensor2> {
        let (c_raw, l_raw, _, _) = self.split();
        let c = Tensor2::from_vec(self.centers, self.input_dim, c_raw.to_vec())?;
        let l = Tensor2::from_vec(1, self.centers, l_raw.to_vec())?;
        let d2 = tensor::pairwise_sqdist(x, &c)?;
        tensor::rbf_kernel(&d2, &l)
    }
}

impl Differentiable for RbfNet {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn param_count(&self) -> usize {
        self.theta.len()
    }

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn forward_tape(
        &self,
        tape: &mut GradTape,
        x: NodeId,
        trainable: bool,
    ) -> Result<TapedForward> {
        let (c_raw, l_raw, w_raw, b_raw) = self.split();
        let c_t = Tensor2::from_vec(self.centers, self.input_dim, c_raw.to_vec())?;
        let l_t = Tensor2::from_vec(1, self.centers, l_raw.to_vec())?;
        let w_t = Tensor2::from_vec(self.centers, 1, w_raw.to_vec())?;
        let b_t = Tensor2::from_vec(1, 1, vec![b_raw])?;
        let mut reg = |t: Tensor2| if trainable { tape.leaf(t) } else { tape.constant(t) };
        let (c, l, w, b) = (reg(c_t), reg(l_t), reg(w_t), reg(b_t));
        let d2 = tape.pairwise_sqdist(x, c)?;
        let phi = tape.rbf_kernel(d2, l)?;
        let head = tape.matmul(phi, w)?;
        let output = tape.add_row(head, b)?;
        Ok(TapedForward {
            output,
            params: vec![c, l, w, b],
        })
    }

    fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        let (_, _, w_raw, b_raw) = self.split();
        let phi = self.activations(x)?;
        let w = Tensor2::from_vec(self.centers, 1, w_raw.to_vec())?;
        let b = Tensor2::from_vec(1, 1, vec![b_raw])?;
        tensor::add_row(&tensor::matmul(&phi, &w)?, &b)
    }
}
