//! `gen-dump`: write a CSV of synthetic inputs, labeled with teacher and
//! student predictions and the per-point student loss, for external
//! plotting. Points come straight from the sampler or through direct
//! optimization; generator batches are internal to `distill` runs.

use std::fmt::Write as _;

use regraft_core::loss::LossKind;
use regraft_core::models::{Differentiable, Model, Predictor, TeacherOracle};
use regraft_core::rng::{rng_from_seed, RngCore, Seeds};
use regraft_core::synthgen::{
    direct_optimize, sample_stream, GenLossSpec, OptimMethod, OptimizeSpec, SamplerSpec,
};
use regraft_core::tape::logcosh;

use crate::config::{Config, Resolved};
use crate::specs::{direct_opt_from, gen_loss_from, resolve_seed, sampler_from};
use crate::{cfg_err, run_err, CliError};

fn point_loss(kind: LossKind, diff: f64) -> f64 {
    match kind {
        LossKind::Mse => diff * diff,
        LossKind::LogCosh => logcosh(diff),
    }
}

struct DumpPlan {
    batches: usize,
    batch: usize,
    tag: String,
    loss_kind: LossKind,
    sampler: SamplerSpec,
    direct: Option<(OptimizeSpec, GenLossSpec)>,
    seed: u64,
}

fn rows_for<S: Differentiable>(
    plan: &DumpPlan,
    teacher: &TeacherOracle,
    student: &S,
) -> Result<String, CliError> {
    let dim = teacher.input_dim();
    let mut out = String::new();
    for j in 0..dim {
        write!(out, "x{j},").unwrap();
    }
    out.push_str("teacher_pred,student_pred,student_loss,epoch_tag\n");

    let mut rng = rng_from_seed(Seeds::derive(plan.seed).synth);
    let mut offset = 0u64;
    for _ in 0..plan.batches {
        let x0 = sample_stream(&plan.sampler, plan.batch, rng.next_u64(), offset)
            .map_err(run_err)?;
        offset += plan.batch as u64;
        let x = match &plan.direct {
            Some((opt, loss)) => {
                direct_optimize(&x0, teacher, student, loss, opt, &mut rng)
                    .map_err(run_err)?
                    .x_g
            }
            None => x0,
        };
        let t = teacher.predict(&x).map_err(run_err)?;
        let s = Predictor::predict(student, &x).map_err(run_err)?;
        for r in 0..x.rows() {
            for v in x.row(r) {
                write!(out, "{v},").unwrap();
            }
            let (tv, sv) = (t.get(r, 0), s.get(r, 0));
            writeln!(
                out,
                "{tv},{sv},{},{}",
                point_loss(plan.loss_kind, tv - sv),
                plan.tag
            )
            .unwrap();
        }
    }
    Ok(out)
}

pub fn gen_dump(cfg: &Config) -> Result<(), CliError> {
    let seed = resolve_seed(cfg)?;
    let dir = super::out_dir(cfg)?;
    let teacher_path = cfg.require_str("teacher")?.to_string();
    let student_path = cfg.require_str("student")?.to_string();
    let teacher_model = crate::specs::load_model_file("teacher", cfg)?;
    let student_model = crate::specs::load_model_file("student", cfg)?;
    let dim = teacher_model.input_dim();

    let mut resolved = Resolved::default();
    resolved.put("out_dir", dir.display());
    resolved.put("seed", seed);
    resolved.put("teacher", &teacher_path);
    resolved.put("student", &student_path);

    let synth_kind = cfg.get_str("synth.kind").unwrap_or("none").to_string();
    resolved.put("synth.kind", &synth_kind);
    let direct = match synth_kind.as_str() {
        "none" => None,
        "direct" => Some((
            direct_opt_from(cfg, &mut resolved)?,
            gen_loss_from(cfg, &mut resolved)?,
        )),
        "generator" => {
            return Err(CliError::Config(
                "gen-dump draws from the sampler or direct optimization; generators are \
                 trained inside distill runs"
                    .to_string(),
            ))
        }
        other => {
            return Err(CliError::Config(format!(
                "synth.kind must be none or direct, got {other:?}"
            )))
        }
    };
    if let Some((opt, _)) = &direct {
        if opt.method != OptimMethod::DifferentialEvolution
            && !matches!(teacher_model, Model::Dense(_) | Model::Rbf(_))
        {
            return Err(CliError::Config(format!(
                "a {} teacher cannot provide gradients; use direct.method = de",
                teacher_model.kind()
            )));
        }
    }

    let plan = DumpPlan {
        batches: cfg.get_usize("batches", 1)?,
        batch: cfg.get_usize("batch", 50)?,
        tag: cfg.get_str("tag").unwrap_or("0").to_string(),
        loss_kind: LossKind::parse(cfg.get_str("loss").unwrap_or("mse")).map_err(cfg_err)?,
        sampler: sampler_from(cfg, dim, &mut resolved)?,
        direct,
        seed,
    };
    resolved.put("batches", plan.batches);
    resolved.put("batch", plan.batch);
    resolved.put("tag", &plan.tag);
    resolved.put("loss", plan.loss_kind.name());
    cfg.finish()?;

    let teacher = TeacherOracle::from_model(teacher_model);
    let csv = match &student_model {
        Model::Dense(s) => rows_for(&plan, &teacher, s)?,
        Model::Rbf(s) => rows_for(&plan, &teacher, s)?,
        Model::Krr(_) => {
            return Err(CliError::Config(
                "the student must be a dense or rbf model".to_string(),
            ))
        }
    };

    let out_path = dir.join("synthetic.csv");
    super::write_file(&out_path, &csv)?;
    resolved.write(&dir.join("resolved.cfg"))?;
    println!(
        "wrote {} points to {}",
        plan.batches * plan.batch,
        out_path.display()
    );
    Ok(())
}
