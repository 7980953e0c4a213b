//! `evaluate`: score a saved model on a CSV dataset, print the metric, and
//! append a row to an evaluation log.

use std::fs::OpenOptions;
use std::io::Write;

use regraft_core::distill::{evaluate as eval_metric, EvalMetric};

use crate::config::{Config, Resolved};
use crate::specs::{load_dataset, load_model_file, target_ref};
use crate::{cfg_err, run_err, CliError};

pub fn evaluate(cfg: &Config) -> Result<(), CliError> {
    let dir = super::out_dir(cfg)?;
    let model_path = cfg.require_str("model")?.to_string();
    let data_path = cfg.require_str("data")?.to_string();
    let target = target_ref(cfg, "target")?;
    let metric = EvalMetric::parse(cfg.get_str("metric").unwrap_or("rmse")).map_err(cfg_err)?;
    cfg.finish()?;

    let model = load_model_file("model", cfg)?;
    let data = load_dataset(&data_path, &target)?;
    let value = eval_metric(&model, &data, metric).map_err(run_err)?;
    println!("{}: {value}", metric.name());

    let log_path = dir.join("eval.csv");
    let fresh = !log_path.exists();
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", log_path.display())))?;
    let write = |log: &mut std::fs::File| -> std::io::Result<()> {
        if fresh {
            writeln!(log, "model,data,metric,value")?;
        }
        writeln!(log, "{model_path},{data_path},{},{value}", metric.name())
    };
    write(&mut log)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", log_path.display())))?;

    let mut resolved = Resolved::default();
    resolved.put("out_dir", dir.display());
    resolved.put("model", &model_path);
    resolved.put("data", &data_path);
    if let Some(t) = &target {
        match t {
            regraft_core::data::ColumnRef::Index(i) => resolved.put("target", i),
            regraft_core::data::ColumnRef::Name(n) => resolved.put("target", n),
        }
    }
    resolved.put("metric", metric.name());
    // Named per command: evaluate often points at an existing artifact
    // directory and must not clobber the resolved.cfg of the run that made it.
    resolved.write(&dir.join("evaluate.resolved.cfg"))?;
    Ok(())
}
