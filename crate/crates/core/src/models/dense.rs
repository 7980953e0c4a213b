//! Fully connected networks with a shared scalar-output teacher/student
//! builder and a vector-output generator builder.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{Differentiable, TapedForward};
use crate::rng::rng_from_seed;
use crate::tape::{GradTape, NodeId};
use crate::tensor::{self, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Softplus,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "softplus" => Ok(Activation::Softplus),
            other => Err(Error::invalid(format!("unknown activation {other:?}"))),
        }
    }

    fn apply_tape(self, tape: &mut GradTape, x: NodeId) -> Result<NodeId> {
        match self {
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
            Activation::Softplus => tape.softplus(x),
        }
    }

    fn apply_plain(self, x: &Tensor2) -> Result<Tensor2> {
        match self {
            Activation::Tanh => tensor::map(x, f64::tanh),
            Activation::Relu => tensor::map(x, |v| if v > 0.0 { v } else { 0.0 }),
            Activation::Softplus => tensor::map(x, crate::tape::softplus),
        }
    }
}

/// Scalar-output network shape: `input_dim -> hidden... -> 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

/// Generator shape: `latent_dim -> hidden... -> data_dim`, relu inside,
/// linear output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub data_dim: usize,
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    input_dim: usize,
    hidden: Vec<usize>,
    output_dim: usize,
    activation: Activation,
    theta: Vec<f64>,
}

/// Build a scalar-output dense net with seeded uniform init scaled by
/// `sqrt(6 / (fan_in + fan_out))` per layer and zero biases.
pub fn build_mlp(spec: &MlpSpec, seed: u64) -> Result<DenseNet> {
    DenseNet::new(
        spec.input_dim,
        spec.hidden.clone(),
        1,
        spec.activation,
        seed,
    )
}

/// Build a generator net mapping latent noise to synthetic feature rows.
pub fn build_generator(spec: &GeneratorSpec, seed: u64) -> Result<DenseNet> {
    DenseNet::new(
        spec.latent_dim,
        spec.hidden.clone(),
        spec.data_dim,
        Activation::Relu,
        seed,
    )
}

impl DenseNet {
    fn new(
        input_dim: usize,
        hidden: Vec<usize>,
        output_dim: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must all be positive"));
        }
        let mut net = DenseNet {
            input_dim,
            hidden,
            output_dim,
            activation,
            theta: Vec::new(),
        };
        let mut rng = rng_from_seed(seed);
        let mut theta = Vec::with_capacity(net.count_params());
        for (fan_in, fan_out) in net.layer_dims() {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                theta.push(rng.random_range(-lim..lim));
            }
            theta.extend(std::iter::repeat_n(0.0, fan_out));
        }
        net.theta = theta;
        Ok(net)
    }

    /// `(fan_in, fan_out)` for each layer in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend_from_slice(&self.hidden);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn count_params(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(fi, fo)| (fi + 1) * fo)
            .sum()
    }

    pub(crate) fn from_raw(
        input_dim: usize,
        hidden: Vec<usize>,
        output_dim: usize,
        activation: Activation,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let net = DenseNet {
            input_dim,
            hidden,
            output_dim,
            activation,
            theta,
        };
        if net.theta.len() != net.count_params() {
            return Err(Error::invalid(format!(
                "dense net expects {} parameters, got {}",
                net.count_params(),
                net.theta.len()
            )));
        }
        Ok(net)
    }

    /// Weight matrix and bias row for layer `l`, as views into the flat
    /// parameter vector.
    fn layer_slices(&self, l: usize) -> (&[f64], &[f64]) {
        let dims = self.layer_dims();
        let mut offset = 0;
        for (i, &(fi, fo)) in dims.iter().enumerate() {
            if i == l {
                return (
                    &self.theta[offset..offset + fi * fo],
                    &self.theta[offset + fi * fo..offset + (fi + 1) * fo],
                );
            }
            offset += (fi + 1) * fo;
        }
        unreachable!("layer index checked by caller");
    }
}

impl Differentiable for DenseNet {
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
        let dims = self.layer_dims();
        let mut params = Vec::with_capacity(2 * dims.len());
        let mut h = x;
        for (l, &(fi, fo)) in dims.iter().enumerate() {
            let (w_raw, b_raw) = self.layer_slices(l);
            let w_t = Tensor2::from_vec(fi, fo, w_raw.to_vec())?;
            let b_t = Tensor2::from_vec(1, fo, b_raw.to_vec())?;
            let (w, b) = if trainable {
                (tape.leaf(w_t), tape.leaf(b_t))
            } else {
                (tape.constant(w_t), tape.constant(b_t))
            };
            params.push(w);
            params.push(b);
            let z = tape.matmul(h, w)?;
            h = tape.add_row(z, b)?;
            if l + 1 < dims.len() {
                h = self.activation.apply_tape(tape, h)?;
            }
        }
        Ok(TapedForward { output: h, params })
    }

    fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.input_dim {
            return Err(Error::invalid(format!(
                "dense net expects {} features, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let dims = self.layer_dims();
        let mut h = x.clone();
        for (l, &(fi, fo)) in dims.iter().enumerate() {
            let (w_raw, b_raw) = self.layer_slices(l);
            let w = Tensor2::from_vec(fi, fo, w_raw.to_vec())?;
            let b = Tensor2::from_vec(1, fo, b_raw.to_vec())?;
            h = tensor::add_row(&tensor::matmul(&h, &w)?, &b)?;
            if l + 1 < dims.len() {
                h = self.activation.apply_plain(&h)?;
            }
        }
        Ok(h)
    }
}
