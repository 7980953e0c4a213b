//! `train-teacher`: fit a dense or kernel-ridge teacher on a CSV dataset,
//! save the model, and write the (optionally standardized and split) data
//! the teacher actually saw, so later evaluation is exact.

use regraft_core::data::{save_csv, split, standardize, Dataset, SplitSpec};
use regraft_core::distill::{evaluate as eval_metric, fit_supervised, EvalMetric, FitConfig};
use regraft_core::loss::LossKind;
use regraft_core::models::{build_mlp, krr_fit, save_model, Activation, MlpSpec, Model};
use regraft_core::optim::OptimizerSettings;
use regraft_core::tensor::pairwise_sqdist;

use crate::config::{Config, Resolved};
use crate::specs::{load_dataset, resolve_seed, target_ref};
use crate::{cfg_err, run_err, CliError};

/// Median pairwise distance over a subsample, the usual kernel-width
/// heuristic when none is given.
pub(crate) fn median_pairwise_distance(data: &Dataset) -> Result<f64, CliError> {
    let probe_rows = data.len().min(300);
    let probe = data
        .features
        .slice_rows(0, probe_rows)
        .map_err(run_err)?;
    let d2 = pairwise_sqdist(&probe, &probe).map_err(run_err)?;
    let mut dists: Vec<f64> = d2
        .data()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v.sqrt())
        .collect();
    if dists.is_empty() {
        return Err(CliError::Runtime(
            "all pairwise distances are zero; cannot pick a kernel width".to_string(),
        ));
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(dists[dists.len() / 2])
}

pub fn train_teacher(cfg: &Config) -> Result<(), CliError> {
    let seed = resolve_seed(cfg)?;
    let dir = super::out_dir(cfg)?;
    let data_path = cfg.require_str("data")?.to_string();
    let target = target_ref(cfg, "target")?;
    let standardize_data = cfg.get_bool("standardize", true)?;
    let kind = cfg.get_str("model").unwrap_or("dense").to_string();

    let mut resolved = Resolved::default();
    resolved.put("out_dir", dir.display());
    resolved.put("seed", seed);
    resolved.put("data", &data_path);
    if let Some(t) = &target {
        match t {
            regraft_core::data::ColumnRef::Index(i) => resolved.put("target", i),
            regraft_core::data::ColumnRef::Name(n) => resolved.put("target", n),
        }
    }
    resolved.put("standardize", standardize_data);
    resolved.put("model", &kind);

    let raw = load_dataset(&data_path, &target)?;
    let data = if standardize_data {
        standardize(&raw).map_err(cfg_err)?
    } else {
        raw
    };

    let (train, validation, test) = match cfg.get_usize_opt("split.train")? {
        Some(count) => {
            let fraction = cfg.get_f64("split.validation_fraction", 0.10)?;
            let split_seed = cfg.get_u64("split.seed", seed)?;
            resolved.put("split.train", count);
            resolved.put("split.validation_fraction", fraction);
            resolved.put("split.seed", split_seed);
            let s = split(
                &data,
                &SplitSpec {
                    train: count,
                    validation_fraction: fraction,
                    seed: split_seed,
                },
            )
            .map_err(cfg_err)?;
            (s.train, Some(s.validation), Some(s.test))
        }
        None => (data, None, None),
    };

    // Resolve all model settings (and reject leftover keys) before the fit.
    enum Plan {
        Dense {
            hidden: Vec<usize>,
            activation: Activation,
            fit: FitConfig,
        },
        Krr {
            sigma: Option<f64>,
            lambda: f64,
        },
    }
    let plan = match kind.as_str() {
        "dense" => {
            let hidden = cfg.get_usize_list("hidden", &[500])?;
            let activation =
                Activation::parse(cfg.get_str("activation").unwrap_or("tanh")).map_err(cfg_err)?;
            let loss =
                LossKind::parse(cfg.get_str("loss").unwrap_or("mse")).map_err(cfg_err)?;
            let fit = FitConfig {
                epochs: cfg.get_usize("epochs", 100)?,
                batch_size: cfg.get_usize("batch", 50)?,
                opt: OptimizerSettings::rmsprop(
                    cfg.get_f64("lr", 1e-3)?,
                    cfg.get_f64("weight_decay", 1e-5)?,
                ),
                loss,
                seed,
            };
            resolved.put_list("hidden", &hidden);
            resolved.put("activation", activation.name());
            resolved.put("loss", loss.name());
            resolved.put("epochs", fit.epochs);
            resolved.put("batch", fit.batch_size);
            resolved.put("lr", fit.opt.learning_rate);
            resolved.put("weight_decay", fit.opt.weight_decay);
            Plan::Dense {
                hidden,
                activation,
                fit,
            }
        }
        "krr" => {
            let sigma = match cfg.get_str("krr.sigma").unwrap_or("median") {
                "median" => None,
                raw => Some(raw.parse::<f64>().map_err(|_| {
                    CliError::Config(format!(
                        "krr.sigma must be a positive number or `median`, got {raw:?}"
                    ))
                })?),
            };
            Plan::Krr {
                sigma,
                lambda: cfg.get_f64("krr.lambda", 1e-3)?,
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "model must be dense or krr, got {other:?}"
            )))
        }
    };
    cfg.finish()?;

    let model = match plan {
        Plan::Dense {
            hidden,
            activation,
            fit,
        } => {
            let mut net = build_mlp(
                &MlpSpec {
                    input_dim: train.dim(),
                    hidden,
                    activation,
                },
                seed,
            )
            .map_err(cfg_err)?;
            let final_loss = fit_supervised(&mut net, &train, &fit).map_err(run_err)?;
            println!("train {}: {}", fit.loss.name(), final_loss);
            Model::Dense(net)
        }
        Plan::Krr { sigma, lambda } => {
            let sigma = match sigma {
                Some(v) => v,
                None => median_pairwise_distance(&train)?,
            };
            resolved.put("krr.sigma", sigma);
            resolved.put("krr.lambda", lambda);
            let fitted =
                krr_fit(&train.features, &train.targets, sigma, lambda).map_err(run_err)?;
            Model::Krr(fitted)
        }
    };

    let train_rmse = eval_metric(&model, &train, EvalMetric::Rmse).map_err(run_err)?;
    println!("train rmse: {train_rmse}");
    save_csv(&dir.join("train.csv"), &train, "target").map_err(run_err)?;
    for (name, part) in [("validation", &validation), ("test", &test)] {
        if let Some(ds) = part {
            if !ds.is_empty() {
                let rmse = eval_metric(&model, ds, EvalMetric::Rmse).map_err(run_err)?;
                println!("{name} rmse: {rmse}");
                save_csv(&dir.join(format!("{name}.csv")), ds, "target").map_err(run_err)?;
            }
        }
    }

    let model_path = dir.join("teacher.model");
    save_model(&model, &model_path).map_err(run_err)?;
    resolved.write(&dir.join("resolved.cfg"))?;
    println!("saved {}", model_path.display());
    Ok(())
}
