//! First-order optimizers over flat parameter vectors: plain gradient
//! descent and RMSProp, both with optional decoupled weight decay.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimKind {
    VanillaGd,
    RmsProp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub kind: OptimKind,
    pub learning_rate: f64,
    /// RMSProp second-moment smoothing.
    pub rho: f64,
    /// Added inside the square root of the RMSProp denominator.
    pub eps: f64,
    /// Decoupled weight decay; added to the gradient as lambda * p but kept
    /// out of the second-moment accumulator.
    pub weight_decay: f64,
}

impl OptimizerSettings {
    pub fn vanilla_gd(learning_rate: f64) -> Self {
        OptimizerSettings {
            kind: OptimKind::VanillaGd,
            learning_rate,
            rho: 0.0,
            eps: 0.0,
            weight_decay: 0.0,
        }
    }

    pub fn rmsprop(learning_rate: f64, weight_decay: f64) -> Self {
        OptimizerSettings {
            kind: OptimKind::RmsProp,
            learning_rate,
            rho: 0.99,
            eps: 1e-8,
            weight_decay,
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning rate must be nonnegative"));
        }
        if self.kind == OptimKind::RmsProp && !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid("rmsprop decay must lie in (0, 1)"));
        }
        if self.kind == OptimKind::RmsProp && !(self.eps > 0.0) {
            return Err(Error::invalid("rmsprop epsilon must be positive"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid("weight decay must be nonnegative"));
        }
        Ok(())
    }
}

/// Mutable optimizer state. The second-moment accumulator is sized on first
/// use and pinned to that parameter count afterwards.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    settings: OptimizerSettings,
    accum: Vec<f64>,
    initialized: bool,
}

impl OptimizerState {
    pub fn new(settings: OptimizerSettings) -> Result<Self> {
        settings.validate()?;
        Ok(OptimizerState {
            settings,
            accum: Vec::new(),
            initialized: false,
        })
    }

    pub fn settings(&self) -> &OptimizerSettings {
        &self.settings
    }

    /// One update step in place.
    ///
    /// vanilla-gd: p <- p - eta (g + lambda p), which is exactly p - eta g
    /// when lambda is zero.
    /// rmsprop:    v <- rho v + (1 - rho) g^2 (decay excluded from v),
    ///             p <- p - eta (g + lambda p) / sqrt(v + eps).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid(format!(
                "parameter/gradient length mismatch: {} vs {}",
                params.len(),
                grads.len()
            )));
        }
        if !self.initialized {
            if self.settings.kind == OptimKind::RmsProp {
                self.accum = vec![0.0; params.len()];
            }
            self.initialized = true;
        } else if self.settings.kind == OptimKind::RmsProp && self.accum.len() != params.len()
        {
            return Err(Error::invalid(format!(
                "optimizer state holds {} accumulators but got {} parameters",
                self.accum.len(),
                params.len()
            )));
        }
        let eta = self.settings.learning_rate;
        let wd = self.settings.weight_decay;
        match self.settings.kind {
            OptimKind::VanillaGd => {
                if wd == 0.0 {
                    for (p, g) in params.iter_mut().zip(grads) {
                        *p -= eta * g;
                    }
                } else {
                    for (p, g) in params.iter_mut().zip(grads) {
                        *p -= eta * (g + wd * *p);
                    }
                }
            }
            OptimKind::RmsProp => {
                let rho = self.settings.rho;
                let eps = self.settings.eps;
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.accum) {
                    *v = rho * *v + (1.0 - rho) * g * g;
                    *p -= eta * (g + wd * *p) / (*v + eps).sqrt();
                }
            }
        }
        Ok(())
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.accum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanilla_gd_hand_case() {
        let mut st = OptimizerState::new(OptimizerSettings::vanilla_gd(0.1)).unwrap();
        let mut p = [1.0];
        st.step(&mut p, &[2.0]).unwrap();
        assert_eq!(p[0], 0.8);
    }

    #[test]
    fn rmsprop_first_step_hand_case() {
        // rho := 0.9 here to match the hand-derived value 0.1 / sqrt(0.1 + 1e-8).
        let settings = OptimizerSettings {
            kind: OptimKind::RmsProp,
            learning_rate: 0.1,
            rho: 0.9,
            eps: 1e-8,
            weight_decay: 0.0,
        };
        let mut st = OptimizerState::new(settings).unwrap();
        let mut p = [0.0];
        st.step(&mut p, &[1.0]).unwrap();
        assert!((st.accumulators()[0] - 0.1).abs() < 1e-15);
        // 0.1 / sqrt(0.1 + 1e-8) to high precision: 0.31622775020545081821
        assert!((p[0] + 0.316_227_750_205_450_818_21).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_no_decay_leaves_params_unchanged() {
        for settings in [
            OptimizerSettings::vanilla_gd(0.5),
            OptimizerSettings::rmsprop(0.5, 0.0),
        ] {
            let mut st = OptimizerState::new(settings).unwrap();
            let mut p = [1.25, -0.5];
            st.step(&mut p, &[0.0, 0.0]).unwrap();
            assert_eq!(p, [1.25, -0.5]);
        }
    }

    #[test]
    fn length_mismatch_is_invalid() {
        let mut st = OptimizerState::new(OptimizerSettings::vanilla_gd(0.1)).unwrap();
        let mut p = [1.0, 2.0];
        assert!(matches!(
            st.step(&mut p, &[1.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn state_pins_parameter_count_after_first_step() {
        let mut st = OptimizerState::new(OptimizerSettings::rmsprop(0.1, 0.0)).unwrap();
        let mut p2 = [1.0, 2.0];
        st.step(&mut p2, &[0.1, 0.2]).unwrap();
        let mut p3 = [1.0, 2.0, 3.0];
        assert!(st.step(&mut p3, &[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn weight_decay_shrinks_even_with_zero_gradient() {
        let mut st =
            OptimizerState::new(OptimizerSettings::vanilla_gd(0.1).with_weight_decay(0.5))
                .unwrap();
        let mut p = [2.0];
        st.step(&mut p, &[0.0]).unwrap();
        assert!((p[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn vanilla_gd_without_decay_is_bitwise_p_minus_eta_g(
                p0 in -1e6f64..1e6,
                g in -1e6f64..1e6,
                eta in 1e-9f64..10.0,
            ) {
                let mut st =
                    OptimizerState::new(OptimizerSettings::vanilla_gd(eta)).unwrap();
                let mut p = [p0];
                st.step(&mut p, &[g]).unwrap();
                prop_assert_eq!(p[0].to_bits(), (p0 - eta * g).to_bits());
            }

            #[test]
            fn rmsprop_accumulators_stay_nonnegative(
                grads in proptest::collection::vec(-100f64..100.0, 8),
            ) {
                let mut st =
                    OptimizerState::new(OptimizerSettings::rmsprop(1e-3, 0.0)).unwrap();
                let mut p = vec![0.0; 4];
                for chunk in grads.chunks(4) {
                    st.step(&mut p, chunk).unwrap();
                    prop_assert!(st.accumulators().iter().all(|v| *v >= 0.0));
                }
            }
        }
    }
}
