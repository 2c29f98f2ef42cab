//! First-order optimizers for the dictionary update.

use serde::{Deserialize, Serialize};

use crate::dict::LocalDictionary;
use crate::error::{CscError, Result};
use crate::learn::gradient::DictGradient;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    Momentum { gamma: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    /// Momentum with `γ = 0.8`.
    pub fn momentum() -> Self {
        Self::Momentum { gamma: 0.8 }
    }

    /// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn adam() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Momentum { .. } => "momentum",
            Self::Adam { .. } => "adam",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Sgd => Ok(()),
            Self::Momentum { gamma } if (0.0..1.0).contains(&gamma) => Ok(()),
            Self::Adam { beta1, beta2, eps }
                if beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && eps > 0.0 =>
            {
                Ok(())
            }
            other => Err(CscError::Config(format!(
                "invalid optimizer parameters {other:?}"
            ))),
        }
    }
}

/// Optimizer with its accumulators, shaped like the dictionary atoms.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub eta: f64,
    velocity: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, eta: f64, len: usize) -> Result<Self> {
        kind.validate()?;
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(CscError::Config(format!(
                "step size must be finite and >= 0, got {eta}"
            )));
        }
        Ok(Self {
            kind,
            eta,
            velocity: vec![0.0; len],
            second: vec![0.0; len],
            steps: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one step of size `eta` along `grad` to the raw atoms (no
    /// projection). Returns `false` without touching anything when the step
    /// is zero.
    pub fn step(
        &mut self,
        dict: &mut LocalDictionary,
        grad: &DictGradient,
        eta: f64,
    ) -> Result<bool> {
        let g = grad
            .as_slice_memory_order()
            .ok_or_else(|| CscError::Dimension("gradient must be contiguous".into()))?;
        if g.len() != self.velocity.len() || grad.dim() != (dict.patch_len(), dict.num_filters()) {
            return Err(CscError::Dimension(
                "gradient shape differs from dictionary".into(),
            ));
        }
        if eta == 0.0 {
            return Ok(false);
        }
        self.steps += 1;
        let m = dict.num_filters();
        let n = dict.patch_len();
        let mut atoms = Vec::with_capacity(n * m);
        atoms.extend_from_slice(dict.column_major());
        match self.kind {
            OptimizerKind::Sgd => {
                for (d, gi) in atoms.iter_mut().zip(g) {
                    *d -= eta * gi;
                }
            }
            OptimizerKind::Momentum { gamma } => {
                for ((d, gi), v) in atoms.iter_mut().zip(g).zip(self.velocity.iter_mut()) {
                    *v = gamma * *v + eta * gi;
                    *d -= *v;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((d, gi), m1), m2) in atoms
                    .iter_mut()
                    .zip(g)
                    .zip(self.velocity.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m1 = beta1 * *m1 + (1.0 - beta1) * gi;
                    *m2 = beta2 * *m2 + (1.0 - beta2) * gi * gi;
                    *d -= eta * (*m1 / c1) / ((*m2 / c2).sqrt() + eps);
                }
            }
        }
        *dict = LocalDictionary::from_column_major(dict.side(), m, atoms)?;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::gradient::zero_gradient;

    fn dict() -> LocalDictionary {
        LocalDictionary::from_columns(1, &[vec![1.0], vec![-1.0]]).unwrap()
    }

    fn grad(a: f64, b: f64) -> DictGradient {
        let mut g = zero_gradient(1, 2);
        g[[0, 0]] = a;
        g[[0, 1]] = b;
        g
    }

    #[test]
    fn sgd_step() {
        let mut d = dict();
        let mut o = OptimizerState::new(OptimizerKind::Sgd, 0.5, 2).unwrap();
        assert!(o.step(&mut d, &grad(2.0, -4.0), 0.5).unwrap());
        assert_eq!(d.column_major(), &[0.0, 1.0]);
    }

    #[test]
    fn zero_step_is_a_no_op() {
        let mut d = dict();
        let mut o = OptimizerState::new(OptimizerKind::adam(), 0.0, 2).unwrap();
        assert!(!o.step(&mut d, &grad(2.0, -4.0), 0.0).unwrap());
        assert_eq!(d, dict());
        assert_eq!(o.steps(), 0);
    }

    #[test]
    fn momentum_accumulates() {
        let mut d = dict();
        let mut o = OptimizerState::new(OptimizerKind::momentum(), 0.1, 2).unwrap();
        o.step(&mut d, &grad(1.0, 0.0), 0.1).unwrap();
        o.step(&mut d, &grad(1.0, 0.0), 0.1).unwrap();
        // v1 = 0.1, v2 = 0.08 + 0.1
        assert!((d.column_major()[0] - (1.0 - 0.1 - 0.18)).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_has_size_eta() {
        let mut d = dict();
        let mut o = OptimizerState::new(OptimizerKind::adam(), 0.02, 2).unwrap();
        o.step(&mut d, &grad(300.0, -0.5), 0.02).unwrap();
        assert!((d.column_major()[0] - 0.98).abs() < 1e-9);
        assert!((d.column_major()[1] - (-0.98)).abs() < 1e-9);
    }

    #[test]
    fn invalid_parameters() {
        assert!(OptimizerState::new(OptimizerKind::Momentum { gamma: 1.0 }, 0.1, 1).is_err());
        assert!(OptimizerState::new(OptimizerKind::Sgd, -0.1, 1).is_err());
        let bad = OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 1.0,
            eps: 1e-8,
        };
        assert!(bad.validate().is_err());
    }
}
