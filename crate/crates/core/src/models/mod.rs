//! Model zoo: dense teachers/students, the RBF-head student, the generator
//! network, a kernel ridge predictor, and the prediction-only teacher
//! abstraction that wraps any of them.

mod dense;
mod io;
mod krr;
mod rbf;

pub use dense::{build_generator, build_mlp, Activation, DenseNet, GeneratorSpec, MlpSpec};
pub use io::{load_model, save_model};
pub use krr::{krr_fit, KernelRidge};
pub use rbf::{build_rbf, RbfNet, RbfStudentSpec};

use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};
use crate::tape::{GradTape, NodeId};
use crate::tensor::Tensor2;

/// Output node plus the parameter leaves registered for one forward pass.
/// The leaf order matches the model's flat parameter layout.
pub struct TapedForward {
    pub output: NodeId,
    pub params: Vec<NodeId>,
}

/// A model whose output can be differentiated with respect to both its
/// parameters and its inputs.
pub trait Differentiable {
    fn input_dim(&self) -> usize;
    fn param_count(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Record a forward pass on the tape. With `trainable` the parameters
    /// are registered as gradient leaves (in flat layout order); otherwise
    /// they are constants and only the input carries gradients.
    fn forward_tape(&self, tape: &mut GradTape, x: NodeId, trainable: bool)
        -> Result<TapedForward>;

    /// Plain forward pass. Produces bitwise the same values as the taped
    /// forward since both run on the same kernels.
    fn predict(&self, x: &Tensor2) -> Result<Tensor2>;
}

/// Anything that can map feature batches to prediction columns.
pub trait Predictor {
    fn input_dim(&self) -> usize;
    fn predict(&self, x: &Tensor2) -> Result<Tensor2>;
}

impl<T: Differentiable> Predictor for T {
    fn input_dim(&self) -> usize {
        Differentiable::input_dim(self)
    }

    fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        Differentiable::predict(self, x)
    }
}

/// An owned model of any supported kind, mainly for serialization and for
/// backing a [`TeacherOracle`].
#[derive(Debug, Clone)]
pub enum Model {
    Dense(DenseNet),
    Rbf(RbfNet),
    Krr(KernelRidge),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Dense(_) => "dense",
            Model::Rbf(_) => "rbf",
            Model::Krr(_) => "krr",
        }
    }
}

impl Predictor for Model {
    fn input_dim(&self) -> usize {
        match self {
            Model::Dense(m) => Differentiable::input_dim(m),
            Model::Rbf(m) => Differentiable::input_dim(m),
            Model::Krr(m) => m.input_dim(),
        }
    }

    fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        match self {
            Model::Dense(m) => Differentiable::predict(m, x),
            Model::Rbf(m) => Differentiable::predict(m, x),
            Model::Krr(m) => m.predict(x),
        }
    }
}

/// Prediction-only view of a teacher. Gradient access is optional and only
/// the differentiable backings provide it; every strategy that needs teacher
/// gradients checks `gradient_capable` first and fails with a capability
/// error otherwise.
pub enum TeacherOracle {
    Model(Model),
    Command(CommandTeacher),
}

impl TeacherOracle {
    pub fn from_model(model: Model) -> Self {
        TeacherOracle::Model(model)
    }

    pub fn gradient_capable(&self) -> bool {
        matches!(self, TeacherOracle::Model(Model::Dense(_) | Model::Rbf(_)))
    }

    pub fn input_dim(&self) -> usize {
        match self {
            TeacherOracle::Model(m) => m.input_dim(),
            TeacherOracle::Command(c) => c.input_dim,
        }
    }

    pub fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        match self {
            TeacherOracle::Model(m) => m.predict(x),
            TeacherOracle::Command(c) => c.predict(x),
        }
    }

    /// Record the teacher on a tape with its parameters held constant, so
    /// gradients flow to the input batch only.
    pub fn forward_tape(&self, tape: &mut GradTape, x: NodeId) -> Result<NodeId> {
        match self {
            TeacherOracle::Model(Model::Dense(m)) => {
                Ok(m.forward_tape(tape, x, false)?.output)
            }
            TeacherOracle::Model(Model::Rbf(m)) => Ok(m.forward_tape(tape, x, false)?.output),
            _ => Err(Error::capability(
                "teacher exposes predictions only; gradient-based strategies need a \
                 differentiable teacher",
            )),
        }
    }
}

impl Predictor for TeacherOracle {
    fn input_dim(&self) -> usize {
        TeacherOracle::input_dim(self)
    }

    fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        TeacherOracle::predict(self, x)
    }
}

/// Teacher backed by a local executable: the feature batch is written to its
/// stdin as headerless CSV rows and one prediction per line is read back.
/// The command must be deterministic for fixed inputs.
pub struct CommandTeacher {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub input_dim: usize,
}

impl CommandTeacher {
    pub fn predict(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.input_dim {
            return Err(Error::invalid(format!(
                "command teacher expects {} features, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::io(self.program.display().to_string(), e))?;

        let mut payload = String::new();
        for r in 0..x.rows() {
            let row: Vec<String> = x.row(r).iter().map(|v| format!("{:.16e}", v)).collect();
            payload.push_str(&row.join(","));
            payload.push('\n');
        }
        child
            .stdin
            .take()
            .expect("stdin was piped")
            .write_all(payload.as_bytes())
            .map_err(|e| Error::io(self.program.display().to_string(), e))?;
        let out = child
            .wait_with_output()
            .map_err(|e| Error::io(self.program.display().to_string(), e))?;
        if !out.status.success() {
            return Err(Error::numeric(format!(
                "teacher command {} exited with {}",
                self.program.display(),
                out.status
            )));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let values: Vec<f64> = text
            .lines()
            .enumerate()
            .map(|(i, line)| {
                line.trim().parse::<f64>().map_err(|_| {
                    Error::parse(
                        self.program.display().to_string(),
                        i + 1,
                        format!("expected a prediction, got {:?}", line),
                    )
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != x.rows() {
            return Err(Error::numeric(format!(
                "teacher command returned {} predictions for {} rows",
                values.len(),
                x.rows()
            )));
        }
        Tensor2::column(&values)
    }
}

/// Compare tape gradients of the mean model output against central finite
/// differences at `point`, over every parameter and every input entry.
/// Returns the maximum relative error, with |analytic| clamped below at 1.
pub fn finite_diff_check(
    model: &mut (impl Differentiable + ?Sized),
    point: &Tensor2,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }

    let mut tape = GradTape::new();
    let x = tape.leaf(point.clone());
    let fwd = model.forward_tape(&mut tape, x, true)?;
    let scalar = tape.mean_all(fwd.output)?;
    let grads = tape.backward(scalar)?;

    fn mean_output<M: Differentiable + ?Sized>(m: &M, pt: &Tensor2) -> Result<f64> {
        let out = m.predict(pt)?;
        Ok(out.data().iter().sum::<f64>() / out.len() as f64)
    }

    let mut max_err = 0.0f64;
    let mut record = |analytic: f64, numeric: f64| {
        let err = (analytic - numeric).abs() / f64::max(1.0, analytic.abs());
        if err > max_err {
            max_err = err;
        }
    };

    // Parameters: perturb the flat vector in place and restore.
    let mut analytic_params = Vec::with_capacity(model.param_count());
    for id in &fwd.params {
        analytic_params.extend_from_slice(grads.wrt(*id)?.data());
    }
    for i in 0..model.param_count() {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + step;
        let plus = mean_output(model, point)?;
        model.params_mut()[i] = orig - step;
        let minus = mean_output(model, point)?;
        model.params_mut()[i] = orig;
        record(analytic_params[i], (plus - minus) / (2.0 * step));
    }

    // Inputs.
    let analytic_x = grads.wrt(x)?;
    for i in 0..point.len() {
        let mut plus = point.data().to_vec();
        let mut minus = point.data().to_vec();
        plus[i] += step;
        minus[i] -= step;
        let p = mean_output(model, &Tensor2::from_vec(point.rows(), point.cols(), plus)?)?;
        let m = mean_output(model, &Tensor2::from_vec(point.rows(), point.cols(), minus)?)?;
        record(analytic_x.data()[i], (p - m) / (2.0 * step));
    }

    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_diff_check_is_tiny_for_linear_model() {
        // y = 3x as a single-layer dense net.
        let mut m = build_mlp(
            &MlpSpec {
                input_dim: 1,
                hidden: vec![],
                activation: Activation::Tanh,
            },
            0,
        )
        .unwrap();
        m.params_mut()[0] = 3.0;
        m.params_mut()[1] = 0.0;
        let point = Tensor2::from_vec(2, 1, vec![0.7, -1.3]).unwrap();
        let err = finite_diff_check(&mut m, &point, 1e-6).unwrap();
        assert!(err <= 1e-9, "linear model should be near-exact, got {err}");
    }

    #[test]
    fn finite_diff_check_constant_model_is_zero() {
        let mut m = build_mlp(
            &MlpSpec {
                input_dim: 2,
                hidden: vec![],
                activation: Activation::Tanh,
            },
            0,
        )
        .unwrap();
        for p in m.params_mut() {
            *p = 0.0;
        }
        let point = Tensor2::from_vec(1, 2, vec![0.3, 0.4]).unwrap();
        assert_eq!(finite_diff_check(&mut m, &point, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn teacher_oracle_rejects_gradient_requests_on_krr() {
        let x = Tensor2::zeros(1, 1);
        let y = Tensor2::column(&[1.0]).unwrap();
        let krr = krr_fit(&x, &y, 1.0, 1.0).unwrap();
        let oracle = TeacherOracle::from_model(Model::Krr(krr));
        assert!(!oracle.gradient_capable());
        let mut tape = GradTape::new();
        let xn = tape.constant(Tensor2::zeros(1, 1));
        assert!(matches!(
            oracle.forward_tape(&mut tape, xn),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn oracle_predictions_are_pure() {
        let spec = MlpSpec {
            input_dim: 3,
            hidden: vec![8],
            activation: Activation::Tanh,
        };
        let oracle = TeacherOracle::from_model(Model::Dense(build_mlp(&spec, 5).unwrap()));
        let batch = Tensor2::from_vec(4, 3, (0..12).map(|i| i as f64 / 7.0).collect()).unwrap();
        let a = oracle.predict(&batch).unwrap();
        let b = oracle.predict(&batch).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn taped_and_plain_forward_agree_bitwise() {
        let spec = MlpSpec {
            input_dim: 4,
            hidden: vec![6, 5],
            activation: Activation::Softplus,
        };
        let m = build_mlp(&spec, 11).unwrap();
        let x = Tensor2::from_vec(3, 4, (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let plain = Differentiable::predict(&m, &x).unwrap();
        let mut tape = GradTape::new();
        let xn = tape.constant(x);
        let fwd = m.forward_tape(&mut tape, xn, true).unwrap();
        assert_eq!(tape.value(fwd.output), &plain);
    }
}
