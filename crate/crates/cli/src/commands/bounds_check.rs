//! `bounds-check`: run plain-gradient-descent synthesis traces and verify
//! the displacement guarantees on each, writing one report row per check.

use std::fmt::Write as _;

use regraft_core::bounds::{
    check_displacement_bound, check_generator_norm_bound, BoundReport, GenObjective,
    LipschitzEstimate,
};
use regraft_core::models::{Differentiable, Model, Predictor, TeacherOracle};
use regraft_core::rng::{rng_from_seed, RngCore, Seeds};
use regraft_core::synthgen::{
    direct_optimize, sample_stream, GenLossSpec, OptimizeSpec, SamplerSpec,
};

use crate::config::{Config, Resolved};
use crate::specs::{gen_loss_from, resolve_seed, sampler_from};
use crate::{run_err, CliError};

const HEADER: &str =
    "batch,check,steps,dimension,eta,k_hat,k_convention,observed,bound,satisfied,\
     exact_bound,exact_satisfied,note\n";

fn push_row(out: &mut String, batch: usize, check: &str, r: &BoundReport) {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let optb = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
    // Notes are free text; keep the row parseable by swapping commas out.
    let note = r.note.as_deref().unwrap_or("").replace(',', ";");
    writeln!(
        out,
        "{batch},{check},{},{},{},{},{},{},{},{},{},{},{note}",
        r.steps,
        r.dimension,
        r.eta,
        r.k_hat,
        r.k_convention,
        r.observed,
        r.bound,
        r.satisfied,
        opt(r.exact_bound),
        optb(r.exact_satisfied),
    )
    .unwrap();
}

struct CheckPlan {
    opt: OptimizeSpec,
    loss: GenLossSpec,
    sampler: SamplerSpec,
    batches: usize,
    batch: usize,
    seed: u64,
    k_estimate: LipschitzEstimate,
    norm_beta: Option<f64>,
}

struct CheckTally {
    csv: String,
    displacement_ok: usize,
    norm_ok: usize,
}

fn run_batches<S: Differentiable>(
    plan: &CheckPlan,
    teacher: &TeacherOracle,
    student: &S,
) -> Result<CheckTally, CliError> {
    let mut tally = CheckTally {
        csv: String::from(HEADER),
        displacement_ok: 0,
        norm_ok: 0,
    };
    let mut rng = rng_from_seed(Seeds::derive(plan.seed).synth);
    let mut offset = 0u64;
    for b in 0..plan.batches {
        let x0 = sample_stream(&plan.sampler, plan.batch, rng.next_u64(), offset)
            .map_err(run_err)?;
        offset += plan.batch as u64;
        let result = direct_optimize(&x0, teacher, student, &plan.loss, &plan.opt, &mut rng)
            .map_err(run_err)?;
        let objective = GenObjective::for_result(&plan.loss, teacher, student, &result);
        let report = check_displacement_bound(&result, &objective, plan.opt.eta, plan.k_estimate)
            .map_err(run_err)?;
        if report.satisfied {
            tally.displacement_ok += 1;
        }
        push_row(&mut tally.csv, b, "displacement", &report);
        if let Some(beta) = plan.norm_beta {
            let norm_report =
                check_generator_norm_bound(&result.x_g, beta, report.k_hat).map_err(run_err)?;
            if norm_report.satisfied {
                tally.norm_ok += 1;
            }
            push_row(&mut tally.csv, b, "generator-norm", &norm_report);
        }
    }
    Ok(tally)
}

pub fn bounds_check(cfg: &Config) -> Result<(), CliError> {
    let seed = resolve_seed(cfg)?;
    let dir = super::out_dir(cfg)?;
    let teacher_path = cfg.require_str("teacher")?.to_string();
    let student_path = cfg.require_str("student")?.to_string();
    let teacher_model = crate::specs::load_model_file("teacher", cfg)?;
    let student_model = crate::specs::load_model_file("student", cfg)?;
    let dim = teacher_model.input_dim();

    if !matches!(teacher_model, Model::Dense(_) | Model::Rbf(_)) {
        return Err(CliError::Config(format!(
            "displacement checks differentiate through the teacher; a {} model cannot",
            teacher_model.kind()
        )));
    }

    let mut resolved = Resolved::default();
    resolved.put("out_dir", dir.display());
    resolved.put("seed", seed);
    resolved.put("teacher", &teacher_path);
    resolved.put("student", &student_path);

    // The guarantees cover plain gradient descent only, so the method is
    // not configurable here.
    let eta = cfg.get_f64("direct.eta", 0.1)?;
    let steps = cfg.get_usize("direct.steps", 10)?;
    resolved.put("direct.eta", eta);
    resolved.put("direct.steps", steps);

    let loss = gen_loss_from(cfg, &mut resolved)?;
    let sampler = sampler_from(cfg, dim, &mut resolved)?;
    let batches = cfg.get_usize("batches", 1)?;
    let batch = cfg.get_usize("batch", 50)?;
    resolved.put("batches", batches);
    resolved.put("batch", batch);

    let k_raw = cfg.get_str("k_hat").unwrap_or("trace").to_string();
    let k_estimate = match k_raw.as_str() {
        "trace" => LipschitzEstimate::FromTrace,
        "initial-point" => LipschitzEstimate::FromInitialPoint,
        other => LipschitzEstimate::External(other.parse::<f64>().map_err(|_| {
            CliError::Config(format!(
                "k_hat must be trace, initial-point, or a number, got {other:?}"
            ))
        })?),
    };
    resolved.put("k_hat", &k_raw);

    let norm_beta = cfg.get_f64_opt("norm.beta")?;
    if let Some(beta) = norm_beta {
        resolved.put("norm.beta", beta);
    }
    cfg.finish()?;

    let plan = CheckPlan {
        opt: OptimizeSpec::gd(eta, steps),
        loss,
        sampler,
        batches,
        batch,
        seed,
        k_estimate,
        norm_beta,
    };
    let teacher = TeacherOracle::from_model(teacher_model);
    let tally = match &student_model {
        Model::Dense(s) => run_batches(&plan, &teacher, s)?,
        Model::Rbf(s) => run_batches(&plan, &teacher, s)?,
        Model::Krr(_) => {
            return Err(CliError::Config(
                "the student must be a dense or rbf model".to_string(),
            ))
        }
    };

    let out_path = dir.join("bounds.csv");
    super::write_file(&out_path, &tally.csv)?;
    resolved.write(&dir.join("resolved.cfg"))?;
    println!(
        "displacement bound satisfied in {}/{batches} batches",
        tally.displacement_ok
    );
    if norm_beta.is_some() {
        println!(
            "generator norm bound satisfied in {}/{batches} batches (advisory)",
            tally.norm_ok
        );
    }
    println!("wrote {}", out_path.display());
    Ok(())
}
