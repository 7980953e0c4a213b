//! Ordinary supervised fitting on a real dataset.
//!
//! Distillation needs a trained teacher to start from; this helper trains
//! any differentiable model against labeled data with minibatch gradient
//! steps. It is also handy for building reference students trained on the
//! true data.

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{loss_eval, loss_on_tape, LossKind};
use crate::models::Differentiable;
use crate::optim::{OptimizerSettings, OptimizerState};
use crate::rng::rng_from_seed;
use crate::tape::GradTape;

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub opt: OptimizerSettings,
    pub loss: LossKind,
    pub seed: u64,
}

/// Train `model` on `data` and return the full-dataset loss after the last
/// epoch. Rows are reshuffled every epoch with a run-specific stream;
/// a trailing partial batch is dropped.
pub fn fit_supervised<S: Differentiable>(
    model: &mut S,
    data: &Dataset,
    config: &FitConfig,
) -> Result<f64> {
    config.opt.validate()?;
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if config.batch_size > data.len() {
        return Err(Error::invalid(format!(
            "batch size {} exceeds the {} available rows",
            config.batch_size,
            data.len()
        )));
    }
    if data.dim() != model.input_dim() {
        return Err(Error::invalid(format!(
            "model expects {} inputs but the dataset has {} features",
            model.input_dim(),
            data.dim()
        )));
    }

    let mut rng = rng_from_seed(config.seed);
    let mut opt = OptimizerState::new(config.opt)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks_exact(config.batch_size) {
            let x = data.features.take_rows(batch)?;
            let y = data.targets.take_rows(batch)?;
            let mut tape = GradTape::new();
            let input = tape.constant(x);
            let target = tape.constant(y);
            let fwd = model.forward_tape(&mut tape, input, true)?;
            let loss = loss_on_tape(&mut tape, config.loss, fwd.output, target)?;
            let grads = tape.backward(loss)?;
            let mut flat = Vec::with_capacity(model.param_count());
            for id in &fwd.params {
                flat.extend_from_slice(grads.wrt(*id)?.data());
            }
            opt.step(model.params_mut(), &flat)?;
        }
    }
    loss_eval(config.loss, &model.predict(&data.features)?, &data.targets)
}
