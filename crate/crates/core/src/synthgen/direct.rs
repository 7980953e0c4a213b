//! Direct optimization of synthetic batches: start from sampled inputs and
//! push them toward high student loss, either by gradient steps on the batch
//! or by per-row differential evolution when the teacher only predicts.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::models::{Differentiable, TeacherOracle};
use crate::optim::{OptimizerSettings, OptimizerState};
use crate::rng::stream_rng;
use crate::synthgen::genloss::{gen_loss_grad, gen_loss_rows, gen_loss_value, GenLossSpec};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimMethod {
    Gd,
    RmsProp,
    DifferentialEvolution,
}

impl OptimMethod {
    pub fn name(self) -> &'static str {
        match self {
            OptimMethod::Gd => "gd",
            OptimMethod::RmsProp => "rmsprop",
            OptimMethod::DifferentialEvolution => "differential-evolution",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(OptimMethod::Gd),
            "rmsprop" => Ok(OptimMethod::RmsProp),
            "differential-evolution" | "de" => Ok(OptimMethod::DifferentialEvolution),
            other => Err(Error::invalid(format!("unknown optimize method {other:?}"))),
        }
    }
}

/// best/2/bin differential evolution settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeParams {
    pub population: usize,
    /// Differential weight F.
    pub weight: f64,
    /// Crossover rate CR.
    pub crossover: f64,
    pub iterations: usize,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams {
            population: 15,
            weight: 0.8,
            crossover: 0.9,
            iterations: 25,
        }
    }
}

impl DeParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 5 {
            return Err(Error::invalid(
                "best/2/bin needs a population of at least 5 (four distinct donors plus the member)",
            ));
        }
        if !(0.0..=2.0).contains(&self.weight) {
            return Err(Error::invalid("differential weight F must lie in [0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::invalid("crossover rate CR must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeSpec {
    pub method: OptimMethod,
    /// Step size for the gradient methods.
    pub eta: f64,
    /// Gradient step count; differential evolution uses `de.iterations`.
    pub tau_max: usize,
    pub de: DeParams,
    /// Box every candidate is clipped into. Required for differential
    /// evolution, optional for the gradient methods.
    pub bounds: Option<(f64, f64)>,
}

impl OptimizeSpec {
    pub fn gd(eta: f64, tau_max: usize) -> Self {
        OptimizeSpec {
            method: OptimMethod::Gd,
            eta,
            tau_max,
            de: DeParams::default(),
            bounds: None,
        }
    }

    pub fn rmsprop(eta: f64, tau_max: usize) -> Self {
        OptimizeSpec {
            method: OptimMethod::RmsProp,
            ..Self::gd(eta, tau_max)
        }
    }

    /// The default gradient recipe: two rmsprop steps at 0.1.
    pub fn rmsprop_default() -> Self {
        Self::rmsprop(0.1, 2)
    }

    pub fn differential_evolution(de: DeParams, lo: f64, hi: f64) -> Self {
        OptimizeSpec {
            method: OptimMethod::DifferentialEvolution,
            eta: 0.1,
            tau_max: de.iterations,
            de,
            bounds: Some((lo, hi)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "bounds must be a finite box with lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        match self.method {
            OptimMethod::Gd | OptimMethod::RmsProp => {
                if !(self.eta > 0.0) {
                    return Err(Error::invalid("step size must be positive"));
                }
                Ok(())
            }
            OptimMethod::DifferentialEvolution => {
                self.de.validate()?;
                if self.bounds.is_none() {
                    return Err(Error::invalid("differential evolution requires bounds"));
                }
                Ok(())
            }
        }
    }
}

/// Points visited and the batch-mean loss at each, including the start.
#[derive(Debug, Clone)]
pub struct OptimTrace {
    pub points: Vec<Tensor2>,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DirectResult {
    pub x_g: Tensor2,
    pub trace: OptimTrace,
    pub method: OptimMethod,
    pub y_rand: Option<f64>,
}

/// Optimize a batch against the generation loss. The per-batch random
/// target, when the loss uses one, is drawn once here and held fixed across
/// every step.
pub fn direct_optimize(
    x0: &Tensor2,
    teacher: &TeacherOracle,
    student: &impl Differentiable,
    loss: &GenLossSpec,
    opt: &OptimizeSpec,
    rng: &mut ChaCha8Rng,
) -> Result<DirectResult> {
    loss.validate()?;
    opt.validate()?;
    if x0.rows() == 0 {
        return Err(Error::invalid("direct optimization needs at least one row"));
    }
    let y_rand = loss.draw_y_rand(rng);

    match opt.method {
        OptimMethod::Gd | OptimMethod::RmsProp => {
            let settings = match opt.method {
                OptimMethod::Gd => OptimizerSettings::vanilla_gd(opt.eta),
                _ => OptimizerSettings::rmsprop(opt.eta, 0.0),
            };
            let mut state = OptimizerState::new(settings)?;
            let mut x = x0.clone();
            let mut points = vec![x.clone()];
            let mut losses = vec![gen_loss_value(loss, &x, teacher, student, y_rand)?];
            for _ in 0..opt.tau_max {
                let (_, grad) = gen_loss_grad(loss, &x, teacher, student, y_rand)?;
                state.step(x.data_mut(), grad.data())?;
                if let Some((lo, hi)) = opt.bounds {
                    for v in x.data_mut() {
                        *v = v.clamp(lo, hi);
                    }
                }
                x.ensure_finite()?;
                points.push(x.clone());
                losses.push(gen_loss_value(loss, &x, teacher, student, y_rand)?);
            }
            Ok(DirectResult {
                x_g: x,
                trace: OptimTrace { points, losses },
                method: opt.method,
                y_rand,
            })
        }
        OptimMethod::DifferentialEvolution => {
            let seed = rng.next_u64();
            let mut objective =
                |cand: &Tensor2| gen_loss_rows(loss, cand, teacher, student, y_rand);
            let de = de_optimize(
                x0,
                &mut objective,
                &opt.de,
                opt.bounds.expect("validated above"),
                seed,
            )?;
            let losses = de
                .per_iter_losses
                .iter()
                .map(|row| row.iter().sum::<f64>() / row.len() as f64)
                .collect();
            Ok(DirectResult {
                x_g: de.best.clone(),
                trace: OptimTrace {
                    points: de.per_iter_best,
                    losses,
                },
                method: opt.method,
                y_rand,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeResult {
    /// Per-row best member after the final iteration, assembled as a batch.
    pub best: Tensor2,
    /// Best batch after each iteration (entry 0 is after initialization).
    pub per_iter_best: Vec<Tensor2>,
    /// Per-row best objective after each iteration, same indexing.
    pub per_iter_losses: Vec<Vec<f64>>,
}

/// Sample `k` distinct indices from `0..n`, none equal to `exclude`.
fn pick_distinct(rng: &mut ChaCha8Rng, n: usize, exclude: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<usize> = (0..n).filter(|&j| j != exclude).collect();
    for t in 0..k {
        let j = rng.random_range(t..cand.len());
        cand.swap(t, j);
    }
    cand.truncate(k);
    cand
}

/// best/2/bin differential evolution, one independent sub-population per row
/// of `x0`. The objective maps a stacked candidate batch to per-row values;
/// rows must not interact. Selection is greedy (ties keep the trial), so the
/// per-row best value never increases.
pub fn de_optimize(
    x0: &Tensor2,
    objective: &mut dyn FnMut(&Tensor2) -> Result<Vec<f64>>,
    params: &DeParams,
    bounds: (f64, f64),
    seed: u64,
) -> Result<DeResult> {
    params.validate()?;
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid("differential evolution needs a finite box"));
    }
    let (m, d) = x0.shape();
    if m == 0 {
        return Err(Error::invalid("differential evolution needs at least one row"));
    }
    let p = params.population;
    let mut rngs: Vec<ChaCha8Rng> = (0..m).map(|r| stream_rng(seed, r as u64)).collect();

    // population[r * p + i] is member i of row r's sub-population.
    let init_scale = 0.1 * (hi - lo);
    let mut pop = vec![0.0f64; m * p * d];
    for r in 0..m {
        let row = x0.row(r);
        pop[(r * p) * d..(r * p) * d + d].copy_from_slice(row);
        for i in 1..p {
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rngs[r]);
                pop[(r * p + i) * d + j] = (row[j] + init_scale * z).clamp(lo, hi);
            }
        }
    }

    let eval = |flat: &[f64], obj: &mut dyn FnMut(&Tensor2) -> Result<Vec<f64>>| -> Result<Vec<f64>> {
        let batch = Tensor2::from_vec(m * p, d, flat.to_vec())?;
        let vals = obj(&batch)?;
        if vals.len() != m * p {
            return Err(Error::invalid(format!(
                "objective returned {} values for {} candidates",
                vals.len(),
                m * p
            )));
        }
        Ok(vals)
    };

    let mut fitness = eval(&pop, objective)?;
    let argmin = |fitness: &[f64], r: usize| -> usize {
        (0..p)
            .min_by(|&a, &b| {
                fitness[r * p + a]
                    .partial_cmp(&fitness[r * p + b])
                    .expect("finite fitness")
            })
            .expect("population is nonempty")
    };
    let mut best_idx: Vec<usize> = (0..m).map(|r| argmin(&fitness, r)).collect();

    let snapshot = |pop: &[f64], fitness: &[f64], best_idx: &[usize]| -> Result<(Tensor2, Vec<f64>)> {
        let mut best = vec![0.0; m * d];
        let mut vals = Vec::with_capacity(m);
        for r in 0..m {
            let b = r * p + best_idx[r];
            best[r * d..(r + 1) * d].copy_from_slice(&pop[b * d..(b + 1) * d]);
            vals.push(fitness[b]);
        }
        Ok((Tensor2::from_vec(m, d, best)?, vals))
    };

    let (first_best, first_vals) = snapshot(&pop, &fitness, &best_idx)?;
    let mut per_iter_best = vec![first_best];
    let mut per_iter_losses = vec![first_vals];

    for _ in 0..params.iterations {
        // Build every trial against the bests frozen at iteration start.
        let mut trials = vec![0.0f64; m * p * d];
        for r in 0..m {
            let best_row: Vec<f64> = {
                let b = (r * p + best_idx[r]) * d;
                pop[b..b + d].to_vec()
            };
            for i in 0..p {
                let donors = pick_distinct(&mut rngs[r], p, i, 4);
                let base = (r * p + i) * d;
                let mut mutant = vec![0.0; d];
                for j in 0..d {
                    let d1 = pop[(r * p + donors[0]) * d + j] - pop[(r * p + donors[1]) * d + j];
                    let d2 = pop[(r * p + donors[2]) * d + j] - pop[(r * p + donors[3]) * d + j];
                    mutant[j] = best_row[j] + params.weight * (d1 + d2);
                }
                let mask: Vec<bool> = (0..d)
                    .map(|_| rngs[r].random::<f64>() < params.crossover)
                    .collect();
                let j_rand = rngs[r].random_range(0..d);
                for j in 0..d {
                    trials[base + j] = if mask[j] || j == j_rand {
                        mutant[j].clamp(lo, hi)
                    } else {
                        pop[base + j]
                    };
                }
            }
        }

        let trial_fitness = eval(&trials, objective)?;
        for c in 0..m * p {
            if trial_fitness[c] <= fitness[c] {
                pop[c * d..(c + 1) * d].copy_from_slice(&trials[c * d..(c + 1) * d]);
                fitness[c] = trial_fitness[c];
            }
        }
        for r in 0..m {
            best_idx[r] = argmin(&fitness, r);
        }
        let (best, vals) = snapshot(&pop, &fitness, &best_idx)?;
        per_iter_best.push(best);
        per_iter_losses.push(vals);
    }

    Ok(DeResult {
        best: per_iter_best.last().expect("at least the initial snapshot").clone(),
        per_iter_best,
        per_iter_losses,
    })
}
