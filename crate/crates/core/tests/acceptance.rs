//! End-to-end acceptance gate. Each test checks one numbered criterion and
//! prints a `criterion N: PASS/FAIL (...)` line with the measured values
//! (visible with `cargo test -- --nocapture`).
//!
//! The desk-scale studies (criteria 6 through 10) train real teachers on
//! seeded synthetic datasets and compare full distillation runs, so this
//! suite is minutes, not seconds.

use std::sync::OnceLock;

use rand::{Rng, RngCore};

use regraft_core::benchdata::{make_compositions, make_digits, make_tabular};
use regraft_core::bounds::{check_displacement_bound, GenObjective, LipschitzEstimate};
use regraft_core::data::{domain_stats, split, ColumnRef, Dataset, SplitSpec};
use regraft_core::distill::{
    distill_run, evaluate, fit_supervised, metrics_to_csv, AlphaSchedule, DistillConfig,
    DistillOutcome, EvalMetric, FitConfig, SynthSpec,
};
use regraft_core::loss::{loss_eval, LossKind};
use regraft_core::models::{
    build_mlp, build_rbf, finite_diff_check, krr_fit, Activation, DenseNet, Differentiable,
    MlpSpec, Model, Predictor, RbfStudentSpec, TeacherOracle,
};
use regraft_core::optim::OptimizerSettings;
use regraft_core::rng::{rng_from_seed, Seeds};
use regraft_core::synthgen::{
    de_optimize, direct_optimize, sample, DeParams, GenLossSpec, OptimizeSpec, SamplerSpec,
};
use regraft_core::tensor::{pairwise_sqdist, Tensor2};

fn report(criterion: usize, pass: bool, detail: &str) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {verdict} ({detail})");
    pass
}

fn mlp(input: usize, hidden: usize, activation: Activation, seed: u64) -> DenseNet {
    build_mlp(
        &MlpSpec {
            input_dim: input,
            hidden: vec![hidden],
            activation,
        },
        seed,
    )
    .unwrap()
}

/// Mean squared gap between teacher and student predictions on a batch.
fn student_gap(teacher: &TeacherOracle, student: &impl Predictor, x: &Tensor2) -> f64 {
    let t = teacher.predict(x).unwrap();
    let s = student.predict(x).unwrap();
    loss_eval(LossKind::Mse, &s, &t).unwrap()
}

// ---------------------------------------------------------------------
// criterion 1: autodiff vs central finite differences

#[test]
fn c01_autodiff_matches_finite_differences() {
    let mut rng = rng_from_seed(42);
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let d = rng.random_range(1..=10usize);
        let depth = rng.random_range(1..=2usize);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=50usize)).collect();
        // Smooth activations only: the central-difference oracle is invalid
        // where a relu pre-activation sits within the probe step of its kink.
        let activation = if rng.random_range(0..2u8) == 0 {
            Activation::Tanh
        } else {
            Activation::Softplus
        };
        let mut model = build_mlp(
            &MlpSpec {
                input_dim: d,
                hidden,
                activation,
            },
            1000 + trial,
        )
        .unwrap();
        let point = sample(&SamplerSpec::gaussian(d), 2, 5000 + trial).unwrap();
        let err = finite_diff_check(&mut model, &point, 1e-6).unwrap();
        worst = worst.max(err);
    }
    let pass = worst <= 1e-5;
    assert!(report(
        1,
        pass,
        &format!("max relative gradient error {worst:.3e} over 100 random nets, tolerance 1e-5")
    ));
}

// ---------------------------------------------------------------------
// criterion 2: plain gd with small steps never increases the loss

#[test]
fn c02_small_step_gd_traces_are_non_increasing() {
    let loss = GenLossSpec::squared_student_penalty(1.0, 0.01, 0.01);
    let opt = OptimizeSpec::gd(1e-3, 5);
    let mut good = 0usize;
    let trials = 1000usize;
    for s in 0..trials as u64 {
        let teacher = TeacherOracle::from_model(Model::Dense(mlp(2, 5, Activation::Tanh, 3 * s + 1)));
        let student = mlp(2, 4, Activation::Tanh, 3 * s + 2);
        let x0 = sample(&SamplerSpec::gaussian(2), 2, s).unwrap();
        let mut rng = rng_from_seed(s);
        let result = direct_optimize(&x0, &teacher, &student, &loss, &opt, &mut rng).unwrap();
        let monotone = result
            .trace
            .losses
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12);
        if monotone {
            good += 1;
        }
    }
    let pass = good * 100 >= trials * 99;
    assert!(report(
        2,
        pass,
        &format!("non-increasing loss traces in {good}/{trials} trials at step 1e-3, need 990")
    ));
}

// ---------------------------------------------------------------------
// criterion 3: displacement bounds hold on every plain-gd trace

#[test]
fn c03_displacement_bounds_hold_on_gd_traces() {
    let loss = GenLossSpec::squared_student_penalty(1.0, 0.01, 0.0);
    let opt = OptimizeSpec::gd(0.1, 10);
    let trials = 1000usize;
    let mut exact_ok = 0usize;
    let mut sqrt_ok = 0usize;
    for s in 0..trials as u64 {
        let teacher = TeacherOracle::from_model(Model::Dense(mlp(2, 4, Activation::Tanh, 7 * s + 1)));
        let student = mlp(2, 3, Activation::Tanh, 7 * s + 2);
        let x0 = sample(&SamplerSpec::gaussian(2), 2, s).unwrap();
        let mut rng = rng_from_seed(s);
        let result = direct_optimize(&x0, &teacher, &student, &loss, &opt, &mut rng).unwrap();
        let objective = GenObjective::for_result(&loss, &teacher, &student, &result);
        let rep = check_displacement_bound(&result, &objective, 0.1, LipschitzEstimate::FromTrace)
            .unwrap();
        if rep.exact_satisfied.unwrap() {
            exact_ok += 1;
        }
        if rep.satisfied {
            sqrt_ok += 1;
        }
    }
    let pass = exact_ok == trials && sqrt_ok == trials;
    assert!(report(
        3,
        pass,
        &format!(
            "exact bound {exact_ok}/{trials}, sqrt-d bound {sqrt_ok}/{trials} on gd traces \
             (step 0.1, 10 steps), need 1000/1000 each"
        )
    ));
}

// ---------------------------------------------------------------------
// criterion 4: analytic 1-d optimizer trace

#[test]
fn c04_linear_pair_gives_the_analytic_trace() {
    let teacher = TeacherOracle::from_model(Model::Dense(mlp_linear(2.0)));
    let student = mlp_linear(1.0);
    let loss = GenLossSpec::squared_student_penalty(1.0, 0.0, 0.0);
    let opt = OptimizeSpec::gd(0.1, 2);
    let x0 = Tensor2::from_vec(1, 1, vec![1.0]).unwrap();
    let mut rng = rng_from_seed(0);
    let result = direct_optimize(&x0, &teacher, &student, &loss, &opt, &mut rng).unwrap();
    let xs: Vec<f64> = result.trace.points.iter().map(|p| p.data()[0]).collect();
    let expect = [1.0, 1.2, 1.44];
    let worst = xs
        .iter()
        .zip(expect.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let pass = xs.len() == 3 && worst <= 1e-12;
    assert!(report(
        4,
        pass,
        &format!("trace {xs:?} vs (1, 1.2, 1.44), max deviation {worst:.2e}, tolerance 1e-12")
    ));
}

/// A 1-input linear net y = w * x with the weight pinned.
fn mlp_linear(w: f64) -> DenseNet {
    let mut net = build_mlp(
        &MlpSpec {
            input_dim: 1,
            hidden: vec![],
            activation: Activation::Tanh,
        },
        0,
    )
    .unwrap();
    let p = net.params_mut();
    p[0] = w;
    p[1] = 0.0;
    net
}

// ---------------------------------------------------------------------
// criterion 5: differential evolution never loses its best member

#[test]
fn c05_de_best_objective_is_monotone() {
    let params = DeParams::default();
    let mut runs = 0usize;
    let mut good = 0usize;

    // Rugged multimodal objective.
    for s in 0..200u64 {
        let x0 = sample(&SamplerSpec::latin_hypercube(3, -5.12, 5.12), 4, s).unwrap();
        let mut rastrigin = |x: &Tensor2| -> regraft_core::Result<Vec<f64>> {
            Ok(x.data()
                .chunks(3)
                .map(|row| {
                    row.iter()
                        .map(|&v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
                        .sum()
                })
                .collect())
        };
        let result = de_optimize(&x0, &mut rastrigin, &params, (-5.12, 5.12), s).unwrap();
        runs += 1;
        if monotone_per_row(&result.per_iter_losses) {
            good += 1;
        }
    }

    // The synthesis loss itself.
    let spec = GenLossSpec::squared_random_real(0.05).unwrap();
    for s in 0..200u64 {
        let teacher = TeacherOracle::from_model(Model::Dense(mlp(2, 5, Activation::Tanh, s + 1)));
        let student = mlp(2, 3, Activation::Tanh, s + 7);
        let y_rand = rng_from_seed(s).random::<f64>();
        let x0 = sample(&SamplerSpec::latin_hypercube(2, 0.0, 1.0), 3, s).unwrap();
        let mut objective = |x: &Tensor2| -> regraft_core::Result<Vec<f64>> {
            regraft_core::synthgen::gen_loss_rows(&spec, x, &teacher, &student, Some(y_rand))
        };
        let result = de_optimize(&x0, &mut objective, &params, (0.0, 1.0), s).unwrap();
        runs += 1;
        if monotone_per_row(&result.per_iter_losses) {
            good += 1;
        }
    }

    let pass = good == runs;
    assert!(report(
        5,
        pass,
        &format!("best objective non-increasing in {good}/{runs} runs, need all")
    ));
}

fn monotone_per_row(losses: &[Vec<f64>]) -> bool {
    losses
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b <= a))
}

// ---------------------------------------------------------------------
// shared desk-scale setups

struct TabularSetup {
    teacher: TeacherOracle,
    validation: Dataset,
    test: Dataset,
}

static TABULAR: OnceLock<TabularSetup> = OnceLock::new();

fn tabular() -> &'static TabularSetup {
    TABULAR.get_or_init(|| {
        let ds = make_tabular(8192, 7).unwrap();
        let splits = split(
            &ds,
            &SplitSpec {
                train: 5000,
                validation_fraction: 0.10,
                seed: 100,
            },
        )
        .unwrap();
        let mut net = mlp(10, 500, Activation::Tanh, 1);
        fit_supervised(
            &mut net,
            &splits.train,
            &FitConfig {
                epochs: 60,
                batch_size: 50,
                opt: OptimizerSettings::rmsprop(1e-3, 1e-5),
                loss: LossKind::Mse,
                seed: 1,
            },
        )
        .unwrap();
        TabularSetup {
            teacher: TeacherOracle::from_model(Model::Dense(net)),
            validation: splits.validation,
            test: splits.test,
        }
    })
}

#[derive(Clone, Copy)]
enum Strategy {
    Random,
    DirectDecreasing,
    DirectAlphaOne,
    GeneratorDecreasing,
    GeneratorAlphaOne,
}

fn tabular_config(strategy: Strategy, base_seed: u64, t_max: usize) -> DistillConfig {
    let gen_loss = GenLossSpec::squared_student_penalty(1.0, 1e-5, 1e-5);
    let direct = SynthSpec::Direct {
        opt: OptimizeSpec::rmsprop(0.1, 2),
        loss: gen_loss.clone(),
    };
    let generator = SynthSpec::Generator {
        latent_dim: 10,
        hidden: vec![128],
        opt: OptimizerSettings::rmsprop(1e-3, 0.0),
        loss: gen_loss,
        emit_pre_update: false,
    };
    let decreasing = AlphaSchedule::LinearDecreasing {
        start: 1.0,
        end: 0.0,
    };
    let (alpha, double_at_edge, synth) = match strategy {
        Strategy::Random => (AlphaSchedule::Constant(0.0), true, SynthSpec::None),
        Strategy::DirectDecreasing => (decreasing, false, direct),
        Strategy::DirectAlphaOne => (AlphaSchedule::Constant(1.0), true, direct),
        Strategy::GeneratorDecreasing => (decreasing, false, generator),
        Strategy::GeneratorAlphaOne => (AlphaSchedule::Constant(1.0), true, generator),
    };
    DistillConfig {
        t_max,
        n_s: 10,
        m: 50,
        alpha,
        double_at_edge,
        student_opt: OptimizerSettings::rmsprop(1e-3, 1e-5),
        student_loss: LossKind::Mse,
        synth,
        sampler: SamplerSpec::gaussian(10),
        validation_cadence: 1,
        seeds: Seeds::derive(base_seed),
    }
}

fn run_tabular(strategy: Strategy, base_seed: u64, t_max: usize) -> DistillOutcome<DenseNet> {
    let setup = tabular();
    let cfg = tabular_config(strategy, base_seed, t_max);
    let student = mlp(10, 50, Activation::Tanh, cfg.seeds.init);
    distill_run(&cfg, &setup.teacher, student, Some(&setup.validation)).unwrap()
}

// ---------------------------------------------------------------------
// criterion 6: optimized inputs expose larger student errors than noise

#[test]
fn c06_direct_optimization_finds_high_loss_inputs() {
    let setup = tabular();
    let trained = {
        let cfg = tabular_config(Strategy::Random, 11, 100);
        let student = mlp(10, 50, Activation::Tanh, cfg.seeds.init);
        distill_run(&cfg, &setup.teacher, student, None)
            .unwrap()
            .final_student
    };
    let fresh = mlp(10, 50, Activation::Tanh, 12);
    let loss = GenLossSpec::squared_student_penalty(1.0, 1e-5, 1e-5);
    let opt = OptimizeSpec::rmsprop(0.1, 2);

    let mut detail = String::new();
    let mut pass = true;
    for (tag, student) in [("epoch 0", &fresh), ("epoch 100", &trained)] {
        let mut rng = rng_from_seed(999);
        let mut wins = 0usize;
        for _ in 0..50 {
            let x0 = sample(&SamplerSpec::gaussian(10), 50, rng.next_u64()).unwrap();
            let result =
                direct_optimize(&x0, &setup.teacher, student, &loss, &opt, &mut rng).unwrap();
            let x_p = sample(&SamplerSpec::gaussian(10), 50, rng.next_u64()).unwrap();
            if student_gap(&setup.teacher, student, &result.x_g)
                > student_gap(&setup.teacher, student, &x_p)
            {
                wins += 1;
            }
        }
        if !detail.is_empty() {
            detail.push_str(", ");
        }
        detail.push_str(&format!("{tag}: {wins}/50 batches"));
        pass &= wins >= 45;
    }
    assert!(report(6, pass, &format!("{detail}, need 45/50 at each")));
}

// ---------------------------------------------------------------------
// criterion 7: end-to-end strategy ordering on the tabular benchmark

#[test]
fn c07_strategy_ordering_on_tabular_benchmark() {
    let setup = tabular();
    let seeds: Vec<u64> = (0..5).map(|s| s * 1000).collect();
    let mut direct_beats_random = 0usize;
    let mut alpha_one_worse = 0usize;
    let mut lines = Vec::new();
    for &base in &seeds {
        let rmse = |strategy: Strategy| {
            let out = run_tabular(strategy, base, 300);
            evaluate(&out.best_student, &setup.test, EvalMetric::Rmse).unwrap()
        };
        let random = rmse(Strategy::Random);
        let direct_dec = rmse(Strategy::DirectDecreasing);
        let gen_dec = rmse(Strategy::GeneratorDecreasing);
        let gen_one = rmse(Strategy::GeneratorAlphaOne);
        if direct_dec <= random {
            direct_beats_random += 1;
        }
        if gen_one >= gen_dec {
            alpha_one_worse += 1;
        }
        lines.push(format!(
            "seed {base}: random {random:.4} direct-dec {direct_dec:.4} gen-dec {gen_dec:.4} gen-a1 {gen_one:.4}"
        ));
    }
    let pass = direct_beats_random >= 4 && alpha_one_worse >= 4;
    assert!(report(
        7,
        pass,
        &format!(
            "direct-dec <= random in {direct_beats_random}/5 seeds, gen-a1 >= gen-dec in \
             {alpha_one_worse}/5 seeds, need 4/5 each; {}",
            lines.join("; ")
        )
    ));
}

// ---------------------------------------------------------------------
// criterion 8: optional extended reproduction on a user-supplied dataset

#[test]
fn c08_optional_puma32h_reproduction() {
    let Some(path) = std::env::var_os("REGRAFT_PUMA32H_CSV") else {
        println!(
            "criterion 8: SKIP (set REGRAFT_PUMA32H_CSV to a puma32h CSV to run the extended \
             reproduction; reported, not gating)"
        );
        return;
    };
    let raw = regraft_core::data::load_csv(std::path::Path::new(&path), &ColumnRef::Index(32))
        .and_then(|ds| regraft_core::data::standardize(&ds))
        .unwrap();
    let splits = split(
        &raw,
        &SplitSpec {
            train: 5000,
            validation_fraction: 0.10,
            seed: 100,
        },
    )
    .unwrap();
    let mut net = mlp(32, 500, Activation::Tanh, 1);
    fit_supervised(
        &mut net,
        &splits.train,
        &FitConfig {
            epochs: 60,
            batch_size: 50,
            opt: OptimizerSettings::rmsprop(1e-3, 1e-5),
            loss: LossKind::Mse,
            seed: 1,
        },
    )
    .unwrap();
    let teacher = TeacherOracle::from_model(Model::Dense(net));
    let gen_loss = GenLossSpec::squared_student_penalty(1.0, 1e-5, 1e-5);
    let run = |strategy: Strategy, base: u64| {
        let (alpha, double_at_edge, synth) = match strategy {
            Strategy::Random => (AlphaSchedule::Constant(0.0), true, SynthSpec::None),
            _ => (
                AlphaSchedule::Constant(1.0),
                true,
                SynthSpec::Direct {
                    opt: OptimizeSpec::rmsprop(0.1, 2),
                    loss: gen_loss.clone(),
                },
            ),
        };
        let cfg = DistillConfig {
            t_max: 2000,
            n_s: 10,
            m: 50,
            alpha,
            double_at_edge,
            student_opt: OptimizerSettings::rmsprop(1e-3, 1e-5),
            student_loss: LossKind::Mse,
            synth,
            sampler: SamplerSpec::gaussian(32),
            validation_cadence: 10,
            seeds: Seeds::derive(base),
        };
        let student = mlp(32, 50, Activation::Tanh, cfg.seeds.init);
        let out = distill_run(&cfg, &teacher, student, Some(&splits.validation)).unwrap();
        evaluate(&out.best_student, &splits.test, EvalMetric::Rmse).unwrap()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let direct: Vec<f64> = (0..3).map(|s| run(Strategy::DirectAlphaOne, s * 1000)).collect();
    let random: Vec<f64> = (0..3).map(|s| run(Strategy::Random, s * 1000)).collect();
    let dm = mean(&direct);
    let rm = mean(&random);
    let pass = (dm - 0.2495).abs() <= 0.02 && (rm - 0.2521).abs() <= 0.02;
    // Reported, not gating: no assert.
    report(
        8,
        pass,
        &format!(
            "direct alpha-1 mean test RMSE {dm:.4} (target 0.2495 +- 0.02), random baseline \
             {rm:.4} (target 0.2521 +- 0.02) over 3 seeds"
        ),
    );
}

// ---------------------------------------------------------------------
// criterion 9: digit-image study with the integer-target loss

struct DigitsSetup {
    teacher: TeacherOracle,
    sampler: SamplerSpec,
    validation: Dataset,
    test: Dataset,
}

static DIGITS: OnceLock<DigitsSetup> = OnceLock::new();

fn digits() -> &'static DigitsSetup {
    DIGITS.get_or_init(|| {
        let train = make_digits(3000, 50).unwrap();
        let validation = make_digits(500, 51).unwrap();
        let test = make_digits(1000, 52).unwrap();
        let (mu, sd) = domain_stats(&train);
        let sampler = SamplerSpec::domain(mu, sd, Some((0.0, 1.0)), false);
        let mut net = mlp(64, 128, Activation::Relu, 1);
        fit_supervised(
            &mut net,
            &train,
            &FitConfig {
                epochs: 120,
                batch_size: 50,
                opt: OptimizerSettings::rmsprop(1e-3, 1e-5),
                loss: LossKind::LogCosh,
                seed: 1,
            },
        )
        .unwrap();
        DigitsSetup {
            teacher: TeacherOracle::from_model(Model::Dense(net)),
            sampler,
            validation,
            test,
        }
    })
}

fn digits_config(direct: bool, base_seed: u64, t_max: usize) -> DistillConfig {
    let (alpha, synth) = if direct {
        (
            AlphaSchedule::Constant(1.0),
            SynthSpec::Direct {
                opt: OptimizeSpec::rmsprop(1e-2, 20),
                loss: GenLossSpec::logcosh_random_integer(1e-6, 1e-6, 1.0),
            },
        )
    } else {
        (AlphaSchedule::Constant(0.0), SynthSpec::None)
    };
    DistillConfig {
        t_max,
        n_s: 10,
        m: 50,
        alpha,
        double_at_edge: true,
        student_opt: OptimizerSettings::rmsprop(1e-3, 1e-5),
        student_loss: LossKind::LogCosh,
        synth,
        sampler: digits().sampler.clone(),
        validation_cadence: 1,
        seeds: Seeds::derive(base_seed),
    }
}

fn run_digits(direct: bool, base_seed: u64, t_max: usize) -> DistillOutcome<DenseNet> {
    let setup = digits();
    let cfg = digits_config(direct, base_seed, t_max);
    let student = mlp(64, 32, Activation::Relu, cfg.seeds.init);
    distill_run(&cfg, &setup.teacher, student, Some(&setup.validation)).unwrap()
}

#[test]
fn c09_digit_study_direct_beats_random() {
    let setup = digits();
    let mut ok = 0usize;
    let mut lines = Vec::new();
    for s in 0..5u64 {
        let base = s * 1000;
        let random = evaluate(
            &run_digits(false, base, 150).best_student,
            &setup.test,
            EvalMetric::Mae,
        )
        .unwrap();
        let direct = evaluate(
            &run_digits(true, base, 150).best_student,
            &setup.test,
            EvalMetric::Mae,
        )
        .unwrap();
        let good = direct < random && random >= 2.0;
        if good {
            ok += 1;
        }
        lines.push(format!("seed {base}: random MAE {random:.3}, direct MAE {direct:.3}"));
    }
    let pass = ok >= 4;
    assert!(report(
        9,
        pass,
        &format!(
            "direct < random with random >= 2.0 in {ok}/5 seeds, need 4/5; {}",
            lines.join("; ")
        )
    ));
}

// ---------------------------------------------------------------------
// criterion 10: gradient-free teacher with differential evolution

struct ProteinSetup {
    teacher: TeacherOracle,
    sampler: SamplerSpec,
    sigma: f64,
    validation: Dataset,
    test: Dataset,
}

static PROTEIN: OnceLock<ProteinSetup> = OnceLock::new();

fn protein() -> &'static ProteinSetup {
    PROTEIN.get_or_init(|| {
        let ds = make_compositions(3148, 70).unwrap();
        let idx = |range: std::ops::Range<usize>| range.collect::<Vec<usize>>();
        let train = ds.take_rows(&idx(0..2500)).unwrap();
        let validation = ds.take_rows(&idx(2250..2500)).unwrap();
        let test = ds.take_rows(&idx(2500..3148)).unwrap();

        // Kernel width: median pairwise distance over a training subsample.
        let probe = train.features.slice_rows(0, 300).unwrap();
        let d2 = pairwise_sqdist(&probe, &probe).unwrap();
        let mut dists: Vec<f64> = d2
            .data()
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v.sqrt())
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sigma = dists[dists.len() / 2];

        let teacher = krr_fit(&train.features, &train.targets, sigma, 1e-3).unwrap();
        let (mu, sd) = domain_stats(&train);
        ProteinSetup {
            teacher: TeacherOracle::from_model(Model::Krr(teacher)),
            sampler: SamplerSpec::domain(mu, sd, Some((0.0, 1.0)), true),
            sigma,
            validation,
            test,
        }
    })
}

fn protein_config(direct: bool, base_seed: u64, t_max: usize) -> DistillConfig {
    let (alpha, double_at_edge, synth) = if direct {
        (
            AlphaSchedule::LinearDecreasing {
                start: 1.0,
                end: 0.0,
            },
            false,
            SynthSpec::Direct {
                opt: OptimizeSpec::differential_evolution(DeParams::default(), 0.0, 1.0),
                loss: GenLossSpec::squared_random_real(0.05).unwrap(),
            },
        )
    } else {
        (AlphaSchedule::Constant(0.0), true, SynthSpec::None)
    };
    DistillConfig {
        t_max,
        n_s: 3,
        m: 50,
        alpha,
        double_at_edge,
        student_opt: OptimizerSettings::rmsprop(1e-3, 1e-6),
        student_loss: LossKind::Mse,
        synth,
        sampler: protein().sampler.clone(),
        validation_cadence: 1,
        seeds: Seeds::derive(base_seed),
    }
}

fn run_protein(direct: bool, base_seed: u64, t_max: usize) -> DistillOutcome<regraft_core::models::RbfNet> {
    let setup = protein();
    let cfg = protein_config(direct, base_seed, t_max);
    let centers = sample(&setup.sampler, 100, cfg.seeds.init).unwrap();
    let student = build_rbf(
        &RbfStudentSpec {
            input_dim: 20,
            centers: 100,
            log_width_init: setup.sigma.ln(),
        },
        &centers,
        cfg.seeds.data,
    )
    .unwrap();
    distill_run(&cfg, &setup.teacher, student, Some(&setup.validation)).unwrap()
}

#[test]
fn c10_gradient_free_de_study() {
    let setup = protein();
    let mut ok = 0usize;
    let mut lines = Vec::new();
    for s in 0..5u64 {
        let base = s * 1000;
        let random = evaluate(
            &run_protein(false, base, 40).best_student,
            &setup.test,
            EvalMetric::Rmse,
        )
        .unwrap();
        let direct = evaluate(
            &run_protein(true, base, 40).best_student,
            &setup.test,
            EvalMetric::Rmse,
        )
        .unwrap();
        if direct < random {
            ok += 1;
        }
        lines.push(format!("seed {base}: random {random:.4}, direct {direct:.4}"));
    }
    let pass = ok >= 4;
    assert!(report(
        10,
        pass,
        &format!("direct < random in {ok}/5 seeds, need 4/5; {}", lines.join("; "))
    ));
}

// ---------------------------------------------------------------------
// criterion 11: byte-identical metrics under fixed seeds

#[test]
fn c11_metrics_are_byte_identical_across_reruns() {
    fn check<S: Predictor>(
        name: &str,
        a: &DistillOutcome<S>,
        b: &DistillOutcome<S>,
        all_ok: &mut bool,
        parts: &mut Vec<String>,
    ) {
        let csv_a = metrics_to_csv(&a.metrics, false);
        let csv_b = metrics_to_csv(&b.metrics, false);
        let same = csv_a == csv_b;
        *all_ok &= same;
        parts.push(format!("{name}: {}", if same { "identical" } else { "DIFFER" }));
    }

    let mut all_ok = true;
    let mut parts = Vec::new();

    let ta = run_tabular(Strategy::DirectDecreasing, 5, 10);
    let tb = run_tabular(Strategy::DirectDecreasing, 5, 10);
    check("tabular direct", &ta, &tb, &mut all_ok, &mut parts);

    let ga = run_tabular(Strategy::GeneratorDecreasing, 5, 5);
    let gb = run_tabular(Strategy::GeneratorDecreasing, 5, 5);
    check("tabular generator", &ga, &gb, &mut all_ok, &mut parts);

    let da = run_digits(true, 5, 3);
    let db = run_digits(true, 5, 3);
    check("digits direct", &da, &db, &mut all_ok, &mut parts);

    let pa = run_protein(true, 5, 2);
    let pb = run_protein(true, 5, 2);
    check("protein de", &pa, &pb, &mut all_ok, &mut parts);

    assert!(report(
        11,
        all_ok,
        &format!(
            "reduced-length reruns of the study configs, wall column excluded; {}",
            parts.join(", ")
        )
    ));
}
