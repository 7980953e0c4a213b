//! Shared config-to-spec resolution: datasets, samplers, generation losses,
//! direct-optimization settings, and alpha schedules. Each resolver records
//! the effective values so the run can write a complete resolved config.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use regraft_core::data::{domain_stats, load_csv, ColumnRef, Dataset};
use regraft_core::distill::AlphaSchedule;
use regraft_core::models::{load_model, Model};
use regraft_core::synthgen::{
    DeParams, GenLossSpec, OptimMethod, OptimizeSpec, SamplerKind, SamplerSpec,
};

use crate::config::{Config, Resolved};
use crate::{cfg_err, CliError};

/// Seed resolution: the `seed` key, overridden by REGRAFT_SEED when set.
pub fn resolve_seed(cfg: &Config) -> Result<u64, CliError> {
    let from_cfg = cfg.get_u64("seed", 0)?;
    match std::env::var("REGRAFT_SEED") {
        Err(std::env::VarError::NotPresent) => Ok(from_cfg),
        Err(e) => Err(CliError::Config(format!("REGRAFT_SEED: {e}"))),
        Ok(v) => v.parse::<u64>().map_err(|_| {
            CliError::Config(format!(
                "REGRAFT_SEED: expected a nonnegative integer, got {v:?}"
            ))
        }),
    }
}

/// Target column reference: an integer value is a column index, anything
/// else a column name. Absent means the last column.
pub fn target_ref(cfg: &Config, key: &str) -> Result<Option<ColumnRef>, CliError> {
    Ok(cfg.get_str(key).map(|raw| match raw.parse::<usize>() {
        Ok(i) => ColumnRef::Index(i),
        Err(_) => ColumnRef::Name(raw.to_string()),
    }))
}

fn last_column(path: &Path) -> Result<ColumnRef, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cols = header.trim_end().split(',').count();
    if cols < 2 {
        return Err(CliError::Config(format!(
            "{}: need at least one feature column and a target column",
            path.display()
        )));
    }
    Ok(ColumnRef::Index(cols - 1))
}

pub fn load_dataset(path: &str, target: &Option<ColumnRef>) -> Result<Dataset, CliError> {
    let path = Path::new(path);
    let column = match target {
        Some(c) => c.clone(),
        None => last_column(path)?,
    };
    load_csv(path, &column).map_err(cfg_err)
}

pub fn load_model_file(key: &str, cfg: &Config) -> Result<Model, CliError> {
    let path = cfg.require_str(key)?;
    load_model(Path::new(path)).map_err(cfg_err)
}

/// Sampler resolution under a `sampler.` prefix. The box defaults to the
/// unit cube for the quasi-Monte-Carlo kinds, which need explicit bounds.
pub fn sampler_from(cfg: &Config, dimension: usize, resolved: &mut Resolved) -> Result<SamplerSpec, CliError> {
    let kind_name = cfg.get_str("sampler.kind").unwrap_or("gaussian");
    let kind = SamplerKind::parse(kind_name).map_err(cfg_err)?;
    resolved.put("sampler.kind", kind.name());
    let spec = match kind {
        SamplerKind::Gaussian => SamplerSpec::gaussian(dimension),
        SamplerKind::Halton | SamplerKind::LatinHypercube => {
            let lo = cfg.get_f64("sampler.lo", 0.0)?;
            let hi = cfg.get_f64("sampler.hi", 1.0)?;
            resolved.put("sampler.lo", lo);
            resolved.put("sampler.hi", hi);
            match kind {
                SamplerKind::Halton => SamplerSpec::halton(dimension, lo, hi),
                _ => SamplerSpec::latin_hypercube(dimension, lo, hi),
            }
        }
        SamplerKind::Domain => {
            let stats_path = cfg.require_str("sampler.stats_from")?.to_string();
            let target = target_ref(cfg, "sampler.target")?;
            let stats_data = load_dataset(&stats_path, &target)?;
            if stats_data.dim() != dimension {
                return Err(CliError::Config(format!(
                    "sampler.stats_from has {} feature columns, the models expect {}",
                    stats_data.dim(),
                    dimension
                )));
            }
            let (mean, std) = domain_stats(&stats_data);
            let lo = cfg.get_f64_opt("sampler.lo")?;
            let hi = cfg.get_f64_opt("sampler.hi")?;
            let bounds = match (lo, hi) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                _ => {
                    return Err(CliError::Config(
                        "sampler.lo and sampler.hi must be set together".to_string(),
                    ))
                }
            };
            let simplex = cfg.get_bool("sampler.simplex", false)?;
            resolved.put("sampler.stats_from", &stats_path);
            if let Some(c) = &target {
                match c {
                    ColumnRef::Index(i) => resolved.put("sampler.target", i),
                    ColumnRef::Name(n) => resolved.put("sampler.target", n),
                }
            }
            if let Some((lo, hi)) = bounds {
                resolved.put("sampler.lo", lo);
                resolved.put("sampler.hi", hi);
            }
            resolved.put("sampler.simplex", simplex);
            SamplerSpec::domain(mean, std, bounds, simplex)
        }
    };
    spec.validate().map_err(cfg_err)?;
    Ok(spec)
}

/// Generation-loss resolution under a `synth.` prefix. Defaults per form:
/// `squared-penalty` uses the adversarial-generator weights, the image form
/// `logcosh-integer` keeps the discrepancy tiny against a dominant target
/// pull, and `squared-real` is the epsilon-mixed bounded-output form.
pub fn gen_loss_from(cfg: &Config, resolved: &mut Resolved) -> Result<GenLossSpec, CliError> {
    let form = cfg.get_str("synth.loss").unwrap_or("squared-penalty");
    let spec = match form {
        "squared-penalty" => {
            let epsilon = cfg.get_f64("synth.epsilon", 1.0)?;
            let beta = cfg.get_f64("synth.beta", 1e-5)?;
            let gamma = cfg.get_f64("synth.gamma", 1e-5)?;
            resolved.put("synth.beta", beta);
            resolved.put("synth.gamma", gamma);
            GenLossSpec::squared_student_penalty(epsilon, beta, gamma)
        }
        "logcosh-integer" => {
            let epsilon = cfg.get_f64("synth.epsilon", 1e-6)?;
            let beta = cfg.get_f64("synth.beta", 1e-6)?;
            let gamma = cfg.get_f64("synth.gamma", 1.0)?;
            resolved.put("synth.beta", beta);
            resolved.put("synth.gamma", gamma);
            GenLossSpec::logcosh_random_integer(epsilon, beta, gamma)
        }
        "squared-real" => {
            let epsilon = cfg.get_f64("synth.epsilon", 0.05)?;
            GenLossSpec::squared_random_real(epsilon).map_err(cfg_err)?
        }
        other => {
            return Err(CliError::Config(format!(
                "synth.loss must be squared-penalty, logcosh-integer, or squared-real, got {other:?}"
            )))
        }
    };
    resolved.put("synth.loss", form);
    resolved.put("synth.epsilon", spec.epsilon);
    spec.validate().map_err(cfg_err)?;
    Ok(spec)
}

/// Direct-optimization settings under a `direct.` prefix.
pub fn direct_opt_from(cfg: &Config, resolved: &mut Resolved) -> Result<OptimizeSpec, CliError> {
    let method_name = cfg.get_str("direct.method").unwrap_or("rmsprop");
    let method = OptimMethod::parse(method_name).map_err(cfg_err)?;
    resolved.put("direct.method", method.name());
    let lo = cfg.get_f64_opt("direct.lo")?;
    let hi = cfg.get_f64_opt("direct.hi")?;
    let bounds = match (lo, hi) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "direct.lo and direct.hi must be set together".to_string(),
            ))
        }
    };
    let spec = match method {
        OptimMethod::Gd | OptimMethod::RmsProp => {
            let eta = cfg.get_f64("direct.eta", 0.1)?;
            let steps = cfg.get_usize("direct.steps", 2)?;
            resolved.put("direct.eta", eta);
            resolved.put("direct.steps", steps);
            let mut spec = if method == OptimMethod::Gd {
                OptimizeSpec::gd(eta, steps)
            } else {
                OptimizeSpec::rmsprop(eta, steps)
            };
            spec.bounds = bounds;
            spec
        }
        OptimMethod::DifferentialEvolution => {
            let de = DeParams {
                population: cfg.get_usize("direct.population", 15)?,
                weight: cfg.get_f64("direct.weight", 0.8)?,
                crossover: cfg.get_f64("direct.crossover", 0.9)?,
                iterations: cfg.get_usize("direct.iterations", 25)?,
            };
            let (lo, hi) = bounds.unwrap_or((0.0, 1.0));
            resolved.put("direct.population", de.population);
            resolved.put("direct.weight", de.weight);
            resolved.put("direct.crossover", de.crossover);
            resolved.put("direct.iterations", de.iterations);
            OptimizeSpec::differential_evolution(de, lo, hi)
        }
    };
    if let Some((lo, hi)) = spec.bounds {
        resolved.put("direct.lo", lo);
        resolved.put("direct.hi", hi);
    }
    spec.validate().map_err(cfg_err)?;
    Ok(spec)
}

/// The five published strategy presets. Each is shorthand for an alpha
/// schedule plus a synthesis kind; explicit keys win over the preset.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Random,
    GeneratorDecreasing,
    GeneratorAlpha1,
    DirectDecreasing,
    DirectAlpha1,
}

impl Strategy {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "random" => Ok(Strategy::Random),
            "generator-decreasing" => Ok(Strategy::GeneratorDecreasing),
            "generator-alpha1" => Ok(Strategy::GeneratorAlpha1),
            "direct-decreasing" => Ok(Strategy::DirectDecreasing),
            "direct-alpha1" => Ok(Strategy::DirectAlpha1),
            other => Err(CliError::Config(format!(
                "strategy must be one of random, generator-decreasing, generator-alpha1, \
                 direct-decreasing, direct-alpha1; got {other:?}"
            ))),
        }
    }

    pub fn default_schedule(self) -> &'static str {
        match self {
            Strategy::Random | Strategy::GeneratorAlpha1 | Strategy::DirectAlpha1 => "constant",
            _ => "linear",
        }
    }

    pub fn default_alpha_value(self) -> f64 {
        match self {
            Strategy::Random => 0.0,
            _ => 1.0,
        }
    }

    pub fn default_synth_kind(self) -> &'static str {
        match self {
            Strategy::Random => "none",
            Strategy::GeneratorDecreasing | Strategy::GeneratorAlpha1 => "generator",
            Strategy::DirectDecreasing | Strategy::DirectAlpha1 => "direct",
        }
    }
}

/// Alpha schedule under an `alpha.` prefix, with preset-supplied defaults.
pub fn alpha_from(
    cfg: &Config,
    strategy: Option<Strategy>,
    resolved: &mut Resolved,
) -> Result<AlphaSchedule, CliError> {
    let default_schedule = strategy.map_or("constant", Strategy::default_schedule);
    let schedule = cfg.get_str("alpha.schedule").unwrap_or(default_schedule);
    let alpha = match schedule {
        "constant" => {
            let default_value = strategy.map_or(0.0, Strategy::default_alpha_value);
            let value = cfg.get_f64("alpha.value", default_value)?;
            resolved.put("alpha.schedule", "constant");
            resolved.put("alpha.value", value);
            AlphaSchedule::Constant(value)
        }
        "linear" => {
            let start = cfg.get_f64("alpha.start", 1.0)?;
            let end = cfg.get_f64("alpha.end", 0.0)?;
            resolved.put("alpha.schedule", "linear");
            resolved.put("alpha.start", start);
            resolved.put("alpha.end", end);
            AlphaSchedule::LinearDecreasing { start, end }
        }
        other => {
            return Err(CliError::Config(format!(
                "alpha.schedule must be constant or linear, got {other:?}"
            )))
        }
    };
    alpha.validate().map_err(cfg_err)?;
    Ok(alpha)
}
