//! The distillation training loop.
//!
//! A student model is trained to mimic a teacher on synthetic inputs only.
//! Every batch mixes two kinds of inputs: `x_g`, produced by the configured
//! synthesis strategy (an adversarial generator network or direct
//! optimization of the inputs themselves), and `x_p`, drawn from a plain
//! sampler. The student takes one optimizer step per batch on the mixed
//! loss `alpha * L(x_g) + (1 - alpha) * L(x_p)` where `L` measures the
//! squared (or log-cosh) gap between teacher and student predictions.

mod supervised;

pub use supervised::{fit_supervised, FitConfig};

use std::time::Instant;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{loss_on_tape, LossKind};
use crate::models::{build_generator, DenseNet, Differentiable, GeneratorSpec, Predictor, TeacherOracle};
use crate::optim::{OptimizerSettings, OptimizerState};
use crate::rng::{rng_from_seed, Seeds};
use crate::synthgen::{
    direct_optimize, generator_round, sample_stream, GenLossSpec, OptimMethod, OptimizeSpec,
    SamplerKind, SamplerSpec,
};
use crate::tape::GradTape;
use crate::tensor::Tensor2;

/// How the mixing weight alpha evolves over epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    Constant(f64),
    LinearDecreasing { start: f64, end: f64 },
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaSchedule::Constant(a) => {
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::invalid("constant alpha must lie in [0, 1]"));
                }
            }
            AlphaSchedule::LinearDecreasing { start, end } => {
                if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) {
                    return Err(Error::invalid("alpha endpoints must lie in [0, 1]"));
                }
                if start < end {
                    return Err(Error::invalid(
                        "a decreasing alpha schedule needs start >= end",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Mixing weight at a given epoch. `epoch` counts from 0 up to `t_max`
/// inclusive; the linear schedule interpolates between its endpoints and a
/// zero-length run pins it at the start value.
pub fn alpha_at(schedule: &AlphaSchedule, epoch: usize, t_max: usize) -> f64 {
    let a = match *schedule {
        AlphaSchedule::Constant(a) => a,
        AlphaSchedule::LinearDecreasing { start, end } => {
            if t_max == 0 {
                start
            } else {
                start + (end - start) * epoch as f64 / t_max as f64
            }
        }
    };
    a.clamp(0.0, 1.0)
}

/// `alpha * l_g + (1 - alpha) * l_p`, returning the surviving term exactly
/// (no arithmetic) when alpha is 0 or 1.
pub fn combined_loss(alpha: f64, l_g: f64, l_p: f64) -> f64 {
    if alpha == 1.0 {
        l_g
    } else if alpha == 0.0 {
        l_p
    } else {
        alpha * l_g + (1.0 - alpha) * l_p
    }
}

/// The synthesis strategy producing `x_g` each batch.
#[derive(Debug, Clone)]
pub enum SynthSpec {
    /// No synthesis. Only valid when alpha is constant 0 (pure random
    /// sampling).
    None,
    /// An adversarial generator network mapping latent noise to inputs.
    /// Each batch the generator takes one optimizer step against the
    /// current student, then emits the batch (or, with `emit_pre_update`,
    /// the batch it produced before its own step).
    Generator {
        latent_dim: usize,
        hidden: Vec<usize>,
        opt: OptimizerSettings,
        loss: GenLossSpec,
        emit_pre_update: bool,
    },
    /// Direct optimization of the batch inputs, starting from a sampler
    /// draw.
    Direct { opt: OptimizeSpec, loss: GenLossSpec },
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        match self {
            SynthSpec::None => Ok(()),
            SynthSpec::Generator {
                latent_dim,
                opt,
                loss,
                ..
            } => {
                if *latent_dim == 0 {
                    return Err(Error::invalid("generator latent dimension must be at least 1"));
                }
                opt.validate()?;
                loss.validate()
            }
            SynthSpec::Direct { opt, loss } => {
                opt.validate()?;
                loss.validate()
            }
        }
    }

    /// Whether producing `x_g` would need teacher gradients.
    pub fn needs_teacher_gradients(&self) -> bool {
        match self {
            SynthSpec::None => false,
            SynthSpec::Generator { .. } => true,
            SynthSpec::Direct { opt, .. } => opt.method != OptimMethod::DifferentialEvolution,
        }
    }
}

/// Full configuration of a distillation run.
#[derive(Debug, Clone)]
pub struct DistillConfig {
    /// Number of epochs.
    pub t_max: usize,
    /// Batches per epoch.
    pub n_s: usize,
    /// Batch size for each of the two input kinds.
    pub m: usize,
    pub alpha: AlphaSchedule,
    /// When alpha is constant 0 or 1, feed the single active branch 2m
    /// samples per batch so the student sees as many points as a mixed run.
    pub double_at_edge: bool,
    pub student_opt: OptimizerSettings,
    pub student_loss: LossKind,
    pub synth: SynthSpec,
    pub sampler: SamplerSpec,
    /// Evaluate on the validation set every this many epochs.
    pub validation_cadence: usize,
    pub seeds: Seeds,
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 {
            return Err(Error::invalid("batches per epoch must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.validation_cadence == 0 {
            return Err(Error::invalid("validation cadence must be at least 1"));
        }
        self.alpha.validate()?;
        self.student_opt.validate()?;
        self.sampler.validate()?;
        self.synth.validate()?;
        if matches!(self.synth, SynthSpec::None) && self.uses_xg() {
            return Err(Error::invalid(
                "a synthesis strategy is required unless alpha is constant 0",
            ));
        }
        Ok(())
    }

    /// Whether the synthetic branch ever contributes. Only a constant-0
    /// schedule switches it off entirely; any other schedule keeps the
    /// branch (and its random draws) alive at every epoch.
    pub fn uses_xg(&self) -> bool {
        !matches!(self.alpha, AlphaSchedule::Constant(a) if a == 0.0)
    }

    /// Whether the plain sampler branch ever contributes.
    pub fn uses_xp(&self) -> bool {
        !matches!(self.alpha, AlphaSchedule::Constant(a) if a == 1.0)
    }
}

/// Per-epoch training record. Loss columns for a branch that is switched
/// off for the whole run hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// 1-based epoch number.
    pub epoch: usize,
    pub loss_combined: f64,
    pub loss_xg: f64,
    pub loss_xp: f64,
    pub alpha: f64,
    pub val_rmse: Option<f64>,
    pub wall_s: f64,
}

/// Result of a distillation run. `best_student` is the checkpoint with the
/// lowest recorded validation RMSE, or the final student when no validation
/// evaluation happened.
#[derive(Debug, Clone)]
pub struct DistillOutcome<S> {
    pub best_student: S,
    pub final_student: S,
    pub metrics: Vec<MetricsRow>,
    pub best_val_rmse: Option<f64>,
}

/// Render metrics rows as CSV. The wall-time column is the only
/// nondeterministic one; leaving it out gives a byte-stable artifact for
/// comparing runs.
pub fn metrics_to_csv(rows: &[MetricsRow], include_wall: bool) -> String {
    let mut out = String::from("epoch,loss_combined,loss_xg,loss_xp,alpha,val_rmse");
    if include_wall {
        out.push_str(",wall_s");
    }
    out.push('\n');
    for r in rows {
        let val = r.val_rmse.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            r.epoch, r.loss_combined, r.loss_xg, r.loss_xp, r.alpha, val
        ));
        if include_wall {
            out.push_str(&format!(",{}", r.wall_s));
        }
        out.push('\n');
    }
    out
}

/// Evaluation metric for trained models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMetric {
    Rmse,
    Mae,
}

impl EvalMetric {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMetric::Rmse => "rmse",
            EvalMetric::Mae => "mae",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(EvalMetric::Rmse),
            "mae" => Ok(EvalMetric::Mae),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// Mean prediction error of `model` over `data`.
pub fn evaluate<P: Predictor + ?Sized>(
    model: &P,
    data: &Dataset,
    metric: EvalMetric,
) -> Result<f64> {
    if model.input_dim() != data.dim() {
        return Err(Error::invalid(format!(
            "model expects {} inputs but the dataset has {} features",
            model.input_dim(),
            data.dim()
        )));
    }
    let preds = model.predict(&data.features)?;
    if preds.shape() != data.targets.shape() {
        return Err(Error::invalid(format!(
            "predictions are {}x{} but targets are {}x{}",
            preds.rows(),
            preds.cols(),
            data.targets.rows(),
            data.targets.cols()
        )));
    }
    let n = data.len() as f64;
    let acc: f64 = preds
        .data()
        .iter()
        .zip(data.targets.data())
        .map(|(p, t)| {
            let e = p - t;
            match metric {
                EvalMetric::Rmse => e * e,
                EvalMetric::Mae => e.abs(),
            }
        })
        .sum();
    Ok(match metric {
        EvalMetric::Rmse => (acc / n).sqrt(),
        EvalMetric::Mae => acc / n,
    })
}

/// Draw `n` rows from the sampler with a fresh seed. For the Halton
/// sampler the points continue the sequence after `*offset` rows, and the
/// offset advances, so repeated calls never replay the same points.
fn draw_batch(
    spec: &SamplerSpec,
    n: usize,
    rng: &mut ChaCha8Rng,
    offset: &mut u64,
) -> Result<Tensor2> {
    let seed = rng.next_u64();
    let pts = sample_stream(spec, n, seed, *offset)?;
    if spec.kind == SamplerKind::Halton {
        *offset += n as u64;
    }
    Ok(pts)
}

/// One optimizer step of the student on the mixed batch. Returns the batch
/// losses (combined, on x_g, on x_p) with NaN standing in for an absent
/// branch.
fn student_step<S: Differentiable>(
    student: &mut S,
    teacher: &TeacherOracle,
    loss_kind: LossKind,
    alpha: f64,
    x_g: Option<&Tensor2>,
    x_p: Option<&Tensor2>,
    opt: &mut OptimizerState,
) -> Result<(f64, f64, f64)> {
    let mut tape = GradTape::new();
    let branch = |tape: &mut GradTape, student: &S, x: &Tensor2| -> Result<_> {
        let labels = teacher.predict(x)?;
        let target = tape.constant(labels);
        let input = tape.constant(x.clone());
        let fwd = student.forward_tape(tape, input, true)?;
        let loss = loss_on_tape(tape, loss_kind, fwd.output, target)?;
        Ok((fwd, loss))
    };

    let g = match x_g {
        Some(x) => Some(branch(&mut tape, student, x)?),
        None => None,
    };
    let p = match x_p {
        Some(x) => Some(branch(&mut tape, student, x)?),
        None => None,
    };

    // Mirror combined_loss on the tape: at the edges the surviving branch's
    // node is used as-is so the step is exactly a single-branch step.
    let combined = match (&g, &p) {
        (Some((_, lg)), Some((_, lp))) => {
            if alpha == 1.0 {
                *lg
            } else if alpha == 0.0 {
                *lp
            } else {
                let a = tape.scale(*lg, alpha)?;
                let b = tape.scale(*lp, 1.0 - alpha)?;
                tape.add(a, b)?
            }
        }
        (Some((_, lg)), None) => *lg,
        (None, Some((_, lp))) => *lp,
        (None, None) => return Err(Error::invalid("no active branch in student step")),
    };

    let l_g = g.as_ref().map_or(f64::NAN, |(_, n)| tape.value(*n).data()[0]);
    let l_p = p.as_ref().map_or(f64::NAN, |(_, n)| tape.value(*n).data()[0]);
    let l_c = tape.value(combined).data()[0];

    let grads = tape.backward(combined)?;
    // The student parameters appear as one leaf set per branch; their
    // gradients add.
    let mut flat = vec![0.0; student.param_count()];
    for (fwd, _) in [g.as_ref(), p.as_ref()].into_iter().flatten() {
        let mut off = 0;
        for id in &fwd.params {
            let grad = grads.wrt(*id)?;
            for (slot, v) in flat[off..off + grad.data().len()]
                .iter_mut()
                .zip(grad.data())
            {
                *slot += v;
            }
            off += grad.data().len();
        }
    }
    opt.step(student.params_mut(), &flat)?;
    Ok((l_c, l_g, l_p))
}

/// Run the full distillation loop.
///
/// Randomness is governed entirely by `config.seeds.synth`: identical
/// config and seeds give bitwise-identical students and metrics. A branch
/// switched off by a constant edge alpha consumes no randomness at all, so
/// a constant-0 run with doubling is bitwise-identical to a pure
/// random-sampling run with batch size 2m.
pub fn distill_run<S>(
    config: &DistillConfig,
    teacher: &TeacherOracle,
    student: S,
    validation: Option<&Dataset>,
) -> Result<DistillOutcome<S>>
where
    S: Differentiable + Clone,
{
    config.validate()?;
    let dim = student.input_dim();
    if teacher.input_dim() != dim {
        return Err(Error::invalid(format!(
            "teacher expects {} inputs but the student takes {}",
            teacher.input_dim(),
            dim
        )));
    }
    if config.sampler.dimension != dim {
        return Err(Error::invalid(format!(
            "sampler emits {}-dimensional points but the student takes {}",
            config.sampler.dimension, dim
        )));
    }
    if let Some(ds) = validation {
        if ds.dim() != dim {
            return Err(Error::invalid(format!(
                "validation set has {} features but the student takes {}",
                ds.dim(),
                dim
            )));
        }
    }
    let use_xg = config.uses_xg();
    let use_xp = config.uses_xp();
    if use_xg && config.synth.needs_teacher_gradients() && !teacher.gradient_capable() {
        return Err(Error::capability(
            "the chosen synthesis strategy needs teacher gradients; use differential \
             evolution or a gradient-capable teacher",
        ));
    }

    let m_g = if use_xg && !use_xp && config.double_at_edge {
        2 * config.m
    } else {
        config.m
    };
    let m_p = if use_xp && !use_xg && config.double_at_edge {
        2 * config.m
    } else {
        config.m
    };

    let mut rng = rng_from_seed(config.seeds.synth);
    let mut student = student;
    let mut student_opt = OptimizerState::new(config.student_opt)?;

    let mut generator: Option<(DenseNet, OptimizerState)> = None;
    if use_xg {
        if let SynthSpec::Generator {
            latent_dim,
            hidden,
            opt,
            ..
        } = &config.synth
        {
            let spec = GeneratorSpec {
                latent_dim: *latent_dim,
                hidden: hidden.clone(),
                data_dim: dim,
            };
            let net = build_generator(&spec, rng.next_u64())?;
            generator = Some((net, OptimizerState::new(*opt)?));
        }
    }

    let mut halton_offset = 0u64;
    let mut metrics = Vec::with_capacity(config.t_max);
    let mut best: Option<(f64, S)> = None;

    for t in 1..=config.t_max {
        let epoch_start = Instant::now();
        let alpha = alpha_at(&config.alpha, t - 1, config.t_max);
        let mut sum_c = 0.0;
        let mut sum_g = 0.0;
        let mut sum_p = 0.0;
        for _ in 0..config.n_s {
            let x_g = if use_xg {
                Some(match &config.synth {
                    SynthSpec::None => unreachable!("rejected by validate"),
                    SynthSpec::Generator {
                        loss,
                        emit_pre_update,
                        ..
                    } => {
                        let (net, opt) = generator.as_mut().expect("built above");
                        generator_round(
                            net,
                            teacher,
                            &student,
                            loss,
                            opt,
                            m_g,
                            &mut rng,
                            *emit_pre_update,
                        )?
                    }
                    SynthSpec::Direct { opt, loss } => {
                        let x0 = draw_batch(&config.sampler, m_g, &mut rng, &mut halton_offset)?;
                        direct_optimize(&x0, teacher, &student, loss, opt, &mut rng)?.x_g
                    }
                })
            } else {
                None
            };
            let x_p = if use_xp {
                Some(draw_batch(&config.sampler, m_p, &mut rng, &mut halton_offset)?)
            } else {
                None
            };
            let (l_c, l_g, l_p) = student_step(
                &mut student,
                teacher,
                config.student_loss,
                alpha,
                x_g.as_ref(),
                x_p.as_ref(),
                &mut student_opt,
            )?;
            sum_c += l_c;
            sum_g += l_g;
            sum_p += l_p;
        }
        let n_s = config.n_s as f64;
        let val_rmse = match validation {
            Some(ds) if t % config.validation_cadence == 0 => {
                let r = evaluate(&student, ds, EvalMetric::Rmse)?;
                if best.as_ref().is_none_or(|(b, _)| r < *b) {
                    best = Some((r, student.clone()));
                }
                Some(r)
            }
            _ => None,
        };
        metrics.push(MetricsRow {
            epoch: t,
            loss_combined: sum_c / n_s,
            loss_xg: sum_g / n_s,
            loss_xp: sum_p / n_s,
            alpha,
            val_rmse,
            wall_s: epoch_start.elapsed().as_secs_f64(),
        });
    }

    let final_student = student;
    let (best_val_rmse, best_student) = match best {
        Some((r, s)) => (Some(r), s),
        None => (None, final_student.clone()),
    };
    Ok(DistillOutcome {
        best_student,
        final_student,
        metrics,
        best_val_rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_mlp, Activation, MlpSpec, Model};
    use proptest::prelude::*;

    fn dense_teacher(seed: u64) -> TeacherOracle {
        let net = build_mlp(
            &MlpSpec {
                input_dim: 2,
                hidden: vec![6],
                activation: Activation::Tanh,
            },
            seed,
        )
        .unwrap();
        TeacherOracle::from_model(Model::Dense(net))
    }

    fn small_student(seed: u64) -> crate::models::DenseNet {
        build_mlp(
            &MlpSpec {
                input_dim: 2,
                hidden: vec![4],
                activation: Activation::Tanh,
            },
            seed,
        )
        .unwrap()
    }

    fn base_config() -> DistillConfig {
        DistillConfig {
            t_max: 3,
            n_s: 2,
            m: 3,
            alpha: AlphaSchedule::Constant(0.0),
            double_at_edge: false,
            student_opt: OptimizerSettings::vanilla_gd(0.05),
            student_loss: LossKind::Mse,
            synth: SynthSpec::None,
            sampler: SamplerSpec::gaussian(2),
            validation_cadence: 1,
            seeds: Seeds::derive(77),
        }
    }

    #[test]
    fn linear_alpha_hits_the_stated_points() {
        let s = AlphaSchedule::LinearDecreasing { start: 1.0, end: 0.0 };
        assert_eq!(alpha_at(&s, 0, 2000), 1.0);
        assert_eq!(alpha_at(&s, 1000, 2000), 0.5);
        assert_eq!(alpha_at(&AlphaSchedule::Constant(1.0), 123, 2000), 1.0);
    }

    #[test]
    fn combined_loss_midpoint_and_edges() {
        assert!((combined_loss(0.5, 0.2, 0.4) - 0.3).abs() < 1e-15);
        let odd = 0.1 + 0.2;
        assert_eq!(combined_loss(1.0, odd, f64::NAN), odd);
        assert_eq!(combined_loss(0.0, f64::NAN, odd), odd);
    }

    #[test]
    fn zero_epochs_returns_the_initial_student() {
        let teacher = dense_teacher(1);
        let student = small_student(2);
        let before = student.params().to_vec();
        let mut cfg = base_config();
        cfg.t_max = 0;
        let out = distill_run(&cfg, &teacher, student, None).unwrap();
        assert_eq!(out.final_student.params(), &before[..]);
        assert!(out.metrics.is_empty());
        assert!(out.best_val_rmse.is_none());
    }

    #[test]
    fn identical_teacher_and_student_sit_at_zero_loss() {
        let student = small_student(5);
        let teacher = TeacherOracle::from_model(Model::Dense(student.clone()));
        let before = student.params().to_vec();
        let out = distill_run(&base_config(), &teacher, student, None).unwrap();
        assert_eq!(out.metrics.len(), 3);
        for row in &out.metrics {
            assert_eq!(row.loss_combined, 0.0);
            assert!(row.loss_xg.is_nan());
            assert_eq!(row.loss_xp, 0.0);
        }
        assert_eq!(out.final_student.params(), &before[..]);
    }

    #[test]
    fn weight_decay_alone_moves_a_perfect_student() {
        let student = small_student(5);
        let teacher = TeacherOracle::from_model(Model::Dense(student.clone()));
        let before = student.params().to_vec();
        let mut cfg = base_config();
        cfg.student_opt = OptimizerSettings::vanilla_gd(0.05).with_weight_decay(0.01);
        let out = distill_run(&cfg, &teacher, student, None).unwrap();
        assert_ne!(out.final_student.params(), &before[..]);
        for row in &out.metrics {
            assert!(row.loss_combined > 0.0 || row.epoch == 1);
        }
    }

    #[test]
    fn constant_zero_with_doubling_equals_a_double_batch_plain_run() {
        let teacher = dense_teacher(1);
        let mut doubled = base_config();
        doubled.double_at_edge = true;
        // The generator spec must be ignored entirely: the branch is off.
        doubled.synth = SynthSpec::Generator {
            latent_dim: 4,
            hidden: vec![8],
            opt: OptimizerSettings::rmsprop(0.01, 0.0),
            loss: GenLossSpec::squared_student_penalty(1.0, 0.01, 0.1),
            emit_pre_update: false,
        };
        let mut plain = base_config();
        plain.m = 6;

        let a = distill_run(&doubled, &teacher, small_student(2), None).unwrap();
        let b = distill_run(&plain, &teacher, small_student(2), None).unwrap();
        assert_eq!(a.final_student.params(), b.final_student.params());
        for (ra, rb) in a.metrics.iter().zip(&b.metrics) {
            assert_eq!(ra.loss_combined, rb.loss_combined);
            assert_eq!(ra.loss_xp, rb.loss_xp);
        }
    }

    #[test]
    fn constant_one_never_touches_the_plain_branch() {
        let teacher = dense_teacher(1);
        let mut cfg = base_config();
        cfg.alpha = AlphaSchedule::Constant(1.0);
        cfg.synth = SynthSpec::Direct {
            opt: OptimizeSpec::gd(0.1, 2),
            loss: GenLossSpec::squared_student_penalty(1.0, 0.01, 0.0),
        };
        let out = distill_run(&cfg, &teacher, small_student(2), None).unwrap();
        for row in &out.metrics {
            assert!(row.loss_xp.is_nan());
            assert!(row.loss_xg.is_finite());
            assert_eq!(row.loss_combined, row.loss_xg);
        }
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let teacher = dense_teacher(9);
        let mut cfg = base_config();
        cfg.alpha = AlphaSchedule::LinearDecreasing { start: 1.0, end: 0.0 };
        cfg.synth = SynthSpec::Direct {
            opt: OptimizeSpec::rmsprop(0.05, 3),
            loss: GenLossSpec::squared_student_penalty(1.0, 0.01, 0.0),
        };
        let a = distill_run(&cfg, &teacher, small_student(3), None).unwrap();
        let b = distill_run(&cfg, &teacher, small_student(3), None).unwrap();
        assert_eq!(a.final_student.params(), b.final_student.params());
        let strip = |m: &[MetricsRow]| {
            m.iter()
                .map(|r| (r.epoch, r.loss_combined, r.loss_xg, r.loss_xp, r.alpha, r.val_rmse))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a.metrics), strip(&b.metrics));
    }

    #[test]
    fn generator_strategy_runs_and_reports_both_branches() {
        let teacher = dense_teacher(4);
        let mut cfg = base_config();
        cfg.alpha = AlphaSchedule::Constant(0.5);
        cfg.synth = SynthSpec::Generator {
            latent_dim: 3,
            hidden: vec![8],
            opt: OptimizerSettings::rmsprop(0.01, 0.0),
            loss: GenLossSpec::squared_student_penalty(1.0, 0.01, 0.1),
            emit_pre_update: false,
        };
        let out = distill_run(&cfg, &teacher, small_student(2), None).unwrap();
        assert_eq!(out.metrics.len(), 3);
        for row in &out.metrics {
            assert!(row.loss_xg.is_finite());
            assert!(row.loss_xp.is_finite());
            let mix = combined_loss(0.5, row.loss_xg, row.loss_xp);
            assert!((row.loss_combined - mix).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_free_teacher_rejects_gradient_strategies() {
        let kr = crate::models::krr_fit(
            &Tensor2::from_vec(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
            &Tensor2::column(&[0.0, 1.0]).unwrap(),
            1.0,
            1e-3,
        )
        .unwrap();
        let teacher = TeacherOracle::from_model(Model::Krr(kr));
        let mut cfg = base_config();
        cfg.alpha = AlphaSchedule::Constant(0.5);
        cfg.synth = SynthSpec::Direct {
            opt: OptimizeSpec::gd(0.1, 2),
            loss: GenLossSpec::squared_student_penalty(1.0, 0.01, 0.0),
        };
        let err = distill_run(&cfg, &teacher, small_student(2), None).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn checkpoint_is_the_minimum_recorded_validation() {
        let teacher = dense_teacher(1);
        let feats = crate::synthgen::sample(&SamplerSpec::gaussian(2), 40, 5).unwrap();
        let targets = teacher.predict(&feats).unwrap();
        let val = Dataset::new(feats, targets, vec!["a".into(), "b".into()]).unwrap();
        let mut cfg = base_config();
        cfg.t_max = 6;
        let out = distill_run(&cfg, &teacher, small_student(2), Some(&val)).unwrap();
        let recorded: Vec<f64> = out.metrics.iter().filter_map(|r| r.val_rmse).collect();
        assert_eq!(recorded.len(), 6);
        let min = recorded.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_val_rmse, Some(min));
        let re = evaluate(&out.best_student, &val, EvalMetric::Rmse).unwrap();
        assert_eq!(re, min);
    }

    #[test]
    fn cadence_gates_validation_rows() {
        let teacher = dense_teacher(1);
        let feats = crate::synthgen::sample(&SamplerSpec::gaussian(2), 10, 5).unwrap();
        let targets = teacher.predict(&feats).unwrap();
        let val = Dataset::new(feats, targets, vec!["a".into(), "b".into()]).unwrap();
        let mut cfg = base_config();
        cfg.t_max = 5;
        cfg.validation_cadence = 2;
        let out = distill_run(&cfg, &teacher, small_student(2), Some(&val)).unwrap();
        let evaluated: Vec<usize> = out
            .metrics
            .iter()
            .filter(|r| r.val_rmse.is_some())
            .map(|r| r.epoch)
            .collect();
        assert_eq!(evaluated, vec![2, 4]);
    }

    #[test]
    fn none_strategy_with_active_alpha_is_rejected() {
        let mut cfg = base_config();
        cfg.alpha = AlphaSchedule::Constant(0.5);
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    struct Fixed(f64);

    impl Predictor for Fixed {
        fn input_dim(&self) -> usize {
            1
        }

        fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
            Tensor2::from_vec(x.rows(), 1, vec![self.0; x.rows()])
        }
    }

    fn unit_dataset(xs: &[f64], ys: &[f64]) -> Dataset {
        Dataset::new(
            Tensor2::column(xs).unwrap(),
            Tensor2::column(ys).unwrap(),
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn evaluate_matches_hand_values() {
        let ds = unit_dataset(&[1.0, 2.0], &[3.0, 4.0]);
        let zero = Fixed(0.0);
        let rmse = evaluate(&zero, &ds, EvalMetric::Rmse).unwrap();
        assert!((rmse - 3.535534).abs() < 1e-6);

        let digits = unit_dataset(&[0.0; 10], &(0..10).map(|k| k as f64).collect::<Vec<_>>());
        let mid = Fixed(4.5);
        assert_eq!(evaluate(&mid, &digits, EvalMetric::Mae).unwrap(), 2.5);

        let teacher = dense_teacher(1);
        let feats = crate::synthgen::sample(&SamplerSpec::gaussian(2), 8, 3).unwrap();
        let targets = teacher.predict(&feats).unwrap();
        let exact = Dataset::new(feats, targets, vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(evaluate(&teacher, &exact, EvalMetric::Rmse).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let ds = unit_dataset(&[1.0], &[1.0]);
        let teacher = dense_teacher(1);
        let err = evaluate(&teacher, &ds, EvalMetric::Rmse).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn metrics_row_count_tracks_epochs() {
        let teacher = dense_teacher(1);
        for t_max in [1, 2, 5] {
            let mut cfg = base_config();
            cfg.t_max = t_max;
            let out = distill_run(&cfg, &teacher, small_student(2), None).unwrap();
            assert_eq!(out.metrics.len(), t_max);
            let epochs: Vec<usize> = out.metrics.iter().map(|r| r.epoch).collect();
            assert_eq!(epochs, (1..=t_max).collect::<Vec<_>>());
        }
    }

    #[test]
    fn metrics_csv_has_the_fixed_schema() {
        let rows = vec![MetricsRow {
            epoch: 1,
            loss_combined: 0.5,
            loss_xg: f64::NAN,
            loss_xp: 0.5,
            alpha: 0.0,
            val_rmse: None,
            wall_s: 0.25,
        }];
        let with = metrics_to_csv(&rows, true);
        assert_eq!(
            with,
            "epoch,loss_combined,loss_xg,loss_xp,alpha,val_rmse,wall_s\n1,0.5,NaN,0.5,0,,0.25\n"
        );
        let without = metrics_to_csv(&rows, false);
        assert_eq!(
            without,
            "epoch,loss_combined,loss_xg,loss_xp,alpha,val_rmse\n1,0.5,NaN,0.5,0,\n"
        );
    }

    #[test]
    fn logcosh_student_loss_is_supported() {
        let teacher = dense_teacher(1);
        let mut cfg = base_config();
        cfg.student_loss = LossKind::LogCosh;
        let out = distill_run(&cfg, &teacher, small_student(2), None).unwrap();
        assert!(out.metrics.iter().all(|r| r.loss_combined.is_finite()));
    }

    proptest! {
        #[test]
        fn alpha_stays_in_unit_interval(
            start in 0.0f64..=1.0,
            frac in 0.0f64..=1.0,
            epoch in 0usize..500,
            t_max in 1usize..500,
        ) {
            let end = start * frac;
            let s = AlphaSchedule::LinearDecreasing { start, end };
            let epoch = epoch.min(t_max);
            let a = alpha_at(&s, epoch, t_max);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn combined_loss_is_between_the_branches(
            alpha in 0.0f64..=1.0,
            l_g in -10.0f64..10.0,
            l_p in -10.0f64..10.0,
        ) {
            let c = combined_loss(alpha, l_g, l_p);
            let lo = l_g.min(l_p) - 1e-12;
            let hi = l_g.max(l_p) + 1e-12;
            prop_assert!(c >= lo && c <= hi);
        }
    }
}
