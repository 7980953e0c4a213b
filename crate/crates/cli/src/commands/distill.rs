//! `distill`: run the full data-free distillation loop against a saved
//! teacher, writing metrics, best/final student models, and the resolved
//! config.

use std::path::Path;

use regraft_core::data::Dataset;
use regraft_core::distill::{
    distill_run, evaluate as eval_metric, metrics_to_csv, DistillConfig, EvalMetric, SynthSpec,
};
use regraft_core::loss::LossKind;
use regraft_core::models::{
    build_mlp, build_rbf, save_model, Activation, Differentiable, MlpSpec, Model, Predictor,
    RbfStudentSpec, TeacherOracle,
};
use regraft_core::optim::OptimizerSettings;
use regraft_core::rng::Seeds;
use regraft_core::synthgen::sample;

use crate::config::{Config, Resolved};
use crate::specs::{
    alpha_from, direct_opt_from, gen_loss_from, load_dataset, load_model_file, resolve_seed,
    sampler_from, target_ref, Strategy,
};
use crate::{cfg_err, run_err, CliError};

fn optional_dataset(
    cfg: &Config,
    data_key: &str,
    target_key: &str,
    dim: usize,
    resolved: &mut Resolved,
) -> Result<Option<Dataset>, CliError> {
    let Some(path) = cfg.get_str(data_key).map(str::to_string) else {
        // Consume the sibling target key so an orphaned one is flagged.
        if cfg.contains(target_key) {
            return Err(CliError::Config(format!(
                "`{target_key}` without `{data_key}` has no effect"
            )));
        }
        return Ok(None);
    };
    let target = target_ref(cfg, target_key)?;
    let ds = load_dataset(&path, &target)?;
    if ds.dim() != dim {
        return Err(CliError::Config(format!(
            "{path} has {} feature columns, the teacher expects {dim}",
            ds.dim()
        )));
    }
    resolved.put(data_key, &path);
    if let Some(t) = &target {
        match t {
            regraft_core::data::ColumnRef::Index(i) => resolved.put(target_key, i),
            regraft_core::data::ColumnRef::Name(n) => resolved.put(target_key, n),
        }
    }
    Ok(Some(ds))
}

#[allow(clippy::too_many_arguments)]
fn run_and_save<S>(
    config: &DistillConfig,
    teacher: &TeacherOracle,
    student: S,
    validation: Option<&Dataset>,
    test: Option<(&Dataset, EvalMetric)>,
    dir: &Path,
    wrap: impl Fn(S) -> Model,
) -> Result<(), CliError>
where
    S: Differentiable + Predictor + Clone,
{
    let outcome = distill_run(config, teacher, student, validation).map_err(run_err)?;
    super::write_file(
        &dir.join("metrics.csv"),
        &metrics_to_csv(&outcome.metrics, true),
    )?;
    if let Some(best) = outcome.best_val_rmse {
        println!("best validation rmse: {best}");
    }
    if let Some((ds, metric)) = test {
        let value = eval_metric(&outcome.best_student, ds, metric).map_err(run_err)?;
        println!("test {}: {value}", metric.name());
    }
    save_model(&wrap(outcome.best_student), &dir.join("best.model")).map_err(run_err)?;
    save_model(&wrap(outcome.final_student), &dir.join("final.model")).map_err(run_err)?;
    Ok(())
}

pub fn distill(cfg: &Config) -> Result<(), CliError> {
    let seed = resolve_seed(cfg)?;
    let dir = super::out_dir(cfg)?;
    let teacher_path = cfg.require_str("teacher")?.to_string();
    let teacher_model = load_model_file("teacher", cfg)?;
    let dim = teacher_model.input_dim();

    let mut resolved = Resolved::default();
    resolved.put("out_dir", dir.display());
    resolved.put("seed", seed);
    resolved.put("teacher", &teacher_path);

    let strategy = cfg
        .get_str("strategy")
        .map(Strategy::parse)
        .transpose()?;
    let alpha = alpha_from(cfg, strategy, &mut resolved)?;

    let synth_kind_default = strategy.map_or("none", Strategy::default_synth_kind);
    let synth_kind = cfg
        .get_str("synth.kind")
        .unwrap_or(synth_kind_default)
        .to_string();
    resolved.put("synth.kind", &synth_kind);
    let synth = match synth_kind.as_str() {
        "none" => SynthSpec::None,
        "direct" => SynthSpec::Direct {
            opt: direct_opt_from(cfg, &mut resolved)?,
            loss: gen_loss_from(cfg, &mut resolved)?,
        },
        "generator" => {
            let latent_dim = cfg.get_usize("generator.latent", dim)?;
            let hidden = cfg.get_usize_list("generator.hidden", &[128])?;
            let lr = cfg.get_f64("generator.lr", 1e-3)?;
            let weight_decay = cfg.get_f64("generator.weight_decay", 0.0)?;
            let emit_pre_update = cfg.get_bool("generator.pre_update", false)?;
            resolved.put("generator.latent", latent_dim);
            resolved.put_list("generator.hidden", &hidden);
            resolved.put("generator.lr", lr);
            resolved.put("generator.weight_decay", weight_decay);
            resolved.put("generator.pre_update", emit_pre_update);
            SynthSpec::Generator {
                latent_dim,
                hidden,
                opt: OptimizerSettings::rmsprop(lr, weight_decay),
                loss: gen_loss_from(cfg, &mut resolved)?,
                emit_pre_update,
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "synth.kind must be none, direct, or generator, got {other:?}"
            )))
        }
    };

    let t_max = cfg.get_usize("epochs", 2000)?;
    let n_s = cfg.get_usize("student_steps", 10)?;
    let m = cfg.get_usize("batch", 50)?;
    let double_at_edge = cfg.get_bool("double_at_edge", true)?;
    let validation_cadence = cfg.get_usize("validation.cadence", 1)?;
    resolved.put("epochs", t_max);
    resolved.put("student_steps", n_s);
    resolved.put("batch", m);
    resolved.put("double_at_edge", double_at_edge);
    resolved.put("validation.cadence", validation_cadence);

    let student_kind = cfg.get_str("student.kind").unwrap_or("dense").to_string();
    let student_lr = cfg.get_f64("student.lr", 1e-3)?;
    let student_wd = cfg.get_f64("student.weight_decay", 1e-5)?;
    let student_loss =
        LossKind::parse(cfg.get_str("student.loss").unwrap_or("mse")).map_err(cfg_err)?;
    resolved.put("student.kind", &student_kind);
    resolved.put("student.lr", student_lr);
    resolved.put("student.weight_decay", student_wd);
    resolved.put("student.loss", student_loss.name());

    let sampler = sampler_from(cfg, dim, &mut resolved)?;

    let validation = optional_dataset(cfg, "validation.data", "validation.target", dim, &mut resolved)?;
    let test = optional_dataset(cfg, "test.data", "test.target", dim, &mut resolved)?;
    let test_metric = EvalMetric::parse(cfg.get_str("test.metric").unwrap_or("rmse"))
        .map_err(cfg_err)?;
    if test.is_some() {
        resolved.put("test.metric", test_metric.name());
    }

    let config = DistillConfig {
        t_max,
        n_s,
        m,
        alpha,
        double_at_edge,
        student_opt: OptimizerSettings::rmsprop(student_lr, student_wd),
        student_loss,
        synth,
        sampler,
        validation_cadence,
        seeds: Seeds::derive(seed),
    };

    if config.uses_xg()
        && config.synth.needs_teacher_gradients()
        && !matches!(teacher_model, Model::Dense(_) | Model::Rbf(_))
    {
        return Err(CliError::Config(format!(
            "a {} teacher cannot provide gradients; use direct.method = de or a \
             differentiable teacher",
            teacher_model.kind()
        )));
    }

    let teacher = TeacherOracle::from_model(teacher_model);
    let test_pair = test.as_ref().map(|ds| (ds, test_metric));

    match student_kind.as_str() {
        "dense" => {
            let hidden = cfg.get_usize_list("student.hidden", &[50])?;
            let activation =
                Activation::parse(cfg.get_str("student.activation").unwrap_or("tanh"))
                    .map_err(cfg_err)?;
            resolved.put_list("student.hidden", &hidden);
            resolved.put("student.activation", activation.name());
            cfg.finish()?;
            config.validate().map_err(cfg_err)?;
            let student = build_mlp(
                &MlpSpec {
                    input_dim: dim,
                    hidden,
                    activation,
                },
                config.seeds.init,
            )
            .map_err(cfg_err)?;
            run_and_save(&config, &teacher, student, validation.as_ref(), test_pair, &dir, Model::Dense)?;
        }
        "rbf" => {
            let centers_n = cfg.get_usize("student.centers", 100)?;
            let log_width_init = cfg.get_f64("student.log_width_init", 0.0)?;
            resolved.put("student.centers", centers_n);
            resolved.put("student.log_width_init", log_width_init);
            cfg.finish()?;
            config.validate().map_err(cfg_err)?;
            let centers =
                sample(&config.sampler, centers_n, config.seeds.init).map_err(run_err)?;
            let student = build_rbf(
                &RbfStudentSpec {
                    input_dim: dim,
                    centers: centers_n,
                    log_width_init,
                },
                &centers,
                config.seeds.data,
            )
            .map_err(cfg_err)?;
            run_and_save(&config, &teacher, student, validation.as_ref(), test_pair, &dir, Model::Rbf)?;
        }
        other => {
            return Err(CliError::Config(format!(
                "student.kind must be dense or rbf, got {other:?}"
            )))
        }
    }

    resolved.write(&dir.join("resolved.cfg"))?;
    println!(
        "wrote {}: metrics.csv, best.model, final.model, resolved.cfg",
        dir.display()
    );
    Ok(())
}
