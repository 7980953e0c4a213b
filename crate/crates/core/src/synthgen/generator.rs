//! Adversarial generator training: one optimizer round pushes the generator
//! toward emitting inputs the current student mishandles.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::{DenseNet, Differentiable, TeacherOracle};
use crate::optim::OptimizerState;
use crate::rng::gaussian_tensor;
use crate::synthgen::genloss::{gen_loss_node, GenLossSpec};
use crate::tape::GradTape;
use crate::tensor::Tensor2;

/// Draw a latent batch, push it through the generator, take one optimizer
/// step on the generator weights against the batch-mean generation loss, and
/// return the emitted batch. By default the batch comes from the updated
/// generator; `emit_pre_update` returns the one the loss was computed on.
#[allow(clippy::too_many_arguments)]
pub fn generator_round(
    generator: &mut DenseNet,
    teacher: &TeacherOracle,
    student: &impl Differentiable,
    loss: &GenLossSpec,
    opt: &mut OptimizerState,
    batch: usize,
    rng: &mut ChaCha8Rng,
    emit_pre_update: bool,
) -> Result<Tensor2> {
    loss.validate()?;
    if batch == 0 {
        return Err(Error::invalid("generator batch size must be at least 1"));
    }
    let z = gaussian_tensor(rng, batch, Differentiable::input_dim(generator))?;
    let y_rand = loss.draw_y_rand(rng);

    let mut tape = GradTape::new();
    let zn = tape.constant(z.clone());
    let fwd = generator.forward_tape(&mut tape, zn, true)?;
    let x_g_pre = tape.value(fwd.output).clone();
    let loss_node = gen_loss_node(&mut tape, loss, fwd.output, teacher, student, y_rand)?;
    let grads = tape.backward(loss_node)?;

    let mut flat = Vec::with_capacity(generator.param_count());
    for id in &fwd.params {
        flat.extend_from_slice(grads.wrt(*id)?.data());
    }
    opt.step(generator.params_mut(), &flat)?;

    if emit_pre_update {
        Ok(x_g_pre)
    } else {
        Differentiable::predict(generator, &z)
    }
}
