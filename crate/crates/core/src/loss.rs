//! Pointwise regression losses, both as plain evaluations and as tape
//! subgraphs for gradient-based training.

use crate::error::{Error, Result};
use crate::tape::{logcosh, GradTape, NodeId};
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    LogCosh,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::LogCosh => "logcosh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "logcosh" => Ok(LossKind::LogCosh),
            other => Err(Error::invalid(format!("unknown loss {other:?}"))),
        }
    }
}

/// Mean loss between prediction and target columns.
pub fn loss_eval(kind: LossKind, pred: &Tensor2, target: &Tensor2) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::invalid(format!(
            "loss shapes differ: {}x{} vs {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("loss of an empty batch"));
    }
    pred.ensure_finite()?;
    target.ensure_finite()?;
    let n = pred.len() as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            match kind {
                LossKind::Mse => d * d,
                LossKind::LogCosh => logcosh(d),
            }
        })
        .sum();
    Ok(sum / n)
}

/// Append the mean loss between two nodes to the tape; returns the 1 x 1
/// loss node.
pub fn loss_on_tape(
    tape: &mut GradTape,
    kind: LossKind,
    pred: NodeId,
    target: NodeId,
) -> Result<NodeId> {
    let diff = tape.sub(pred, target)?;
    let pointwise = match kind {
        LossKind::Mse => tape.square(diff)?,
        LossKind::LogCosh => tape.logcosh(diff)?,
    };
    tape.mean_all(pointwise)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor2 {
        Tensor2::column(v).unwrap()
    }

    #[test]
    fn mse_identity_is_zero() {
        assert_eq!(
            loss_eval(LossKind::Mse, &col(&[1.0, 2.0]), &col(&[1.0, 2.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn mse_hand_case() {
        // (9 + 16) / 2
        assert_eq!(
            loss_eval(LossKind::Mse, &col(&[0.0, 0.0]), &col(&[3.0, 4.0])).unwrap(),
            12.5
        );
    }

    #[test]
    fn logcosh_of_unit_difference() {
        // log(cosh(1)) to 28 digits: 0.4337808304830271870264946849
        let v = loss_eval(LossKind::LogCosh, &col(&[1.0]), &col(&[0.0])).unwrap();
        assert!((v - 0.433_780_830_483_027_187_026_494_684_9).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_invalid_argument() {
        let r = loss_eval(LossKind::Mse, &col(&[1.0]), &col(&[1.0, 2.0]));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn tape_loss_agrees_with_eval() {
        let pred = col(&[0.3, -0.7, 2.0]);
        let target = col(&[0.1, 0.2, -1.0]);
        for kind in [LossKind::Mse, LossKind::LogCosh] {
            let plain = loss_eval(kind, &pred, &target).unwrap();
            let mut tape = GradTape::new();
            let p = tape.leaf(pred.clone());
            let t = tape.constant(target.clone());
            let l = loss_on_tape(&mut tape, kind, p, t).unwrap();
            assert_eq!(tape.value(l).get(0, 0), plain);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn mse_nonnegative_and_zero_iff_equal(
                pred in proptest::collection::vec(-1e3f64..1e3, 1..20),
                delta in proptest::collection::vec(-1e3f64..1e3, 1..20),
            ) {
                let n = pred.len().min(delta.len());
                let p = col(&pred[..n]);
                let t_vals: Vec<f64> =
                    pred[..n].iter().zip(&delta[..n]).map(|(a, b)| a + b).collect();
                let t = col(&t_vals);
                let v = loss_eval(LossKind::Mse, &p, &t).unwrap();
                prop_assert!(v >= 0.0);
                if delta[..n].iter().all(|d| *d == 0.0) {
                    prop_assert_eq!(v, 0.0);
                } else if delta[..n].iter().any(|d| d.abs() > 1e-6) {
                    prop_assert!(v > 0.0);
                }
            }

            #[test]
            fn logcosh_between_known_bounds(d in -700f64..700.0) {
                // |d| - log 2 <= log(cosh(d)) <= d^2 / 2
                let v = logcosh(d);
                prop_assert!(v <= d * d / 2.0 + 1e-12);
                prop_assert!(v >= d.abs() - std::f64::consts::LN_2 - 1e-12);
            }
        }
    }
}
