use serde::{Deserialize, Serialize};

use super::LayerStack;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn sgd(lr: f64) -> Self {
        OptimizerKind::Sgd { lr }
    }

    /// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerKind::Sgd { lr } => lr > 0.0 && lr.is_finite(),
            OptimizerKind::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
            } => {
                lr > 0.0
                    && lr.is_finite()
                    && (0.0..1.0).contains(&beta1)
                    && (0.0..1.0).contains(&beta2)
                    && epsilon > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid optimizer settings: {self:?}"
            )))
        }
    }
}

/// Optimizer bound to one network. Adam moments are allocated on the first
/// step and keep the shapes of the parameters they track.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            steps: 0,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    pub fn step(&mut self, mut params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(
                "Optimizer::step",
                format!("{} gradient arrays", params.len()),
                grads.len(),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::shape(
                    "Optimizer::step",
                    format!("{} values in gradient {i}", p.len()),
                    g.len(),
                ));
            }
        }
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (w, dw) in p.iter_mut().zip(g) {
                        *w -= lr * dw;
                    }
                }
            }
            OptimizerKind::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
            } => {
                if self.first_moment.is_empty() {
                    self.first_moment = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                } else if self.first_moment.len() != grads.len()
                    || self
                        .first_moment
                        .iter()
                        .zip(grads)
                        .any(|(m, g)| m.len() != g.len())
                {
                    return Err(Error::State(
                        "Adam state was built for a different parameter set".into(),
                    ));
                }
                let t = (self.steps + 1) as i32;
                let bias1 = 1.0 - beta1.powi(t);
                let bias2 = 1.0 - beta2.powi(t);
                for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(
                    self.first_moment
                        .iter_mut()
                        .zip(self.second_moment.iter_mut()),
                ) {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / bias1;
                        let v_hat = v[i] / bias2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        self.steps += 1;
        Ok(())
    }

    pub fn apply(&mut self, stack: &mut LayerStack, grads: &[Vec<f64>]) -> Result<()> {
        self.step(stack.params_mut(), grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_single_step() {
        let mut opt = Optimizer::new(OptimizerKind::sgd(0.01)).unwrap();
        let mut p = vec![1.0];
        opt.step(vec![&mut p], &[vec![1.0]]).unwrap();
        assert!((p[0] - 0.99).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn sgd_zero_gradient_is_a_no_op() {
        let mut opt = Optimizer::new(OptimizerKind::sgd(0.01)).unwrap();
        let mut p = vec![0.3, -2.0];
        opt.step(vec![&mut p], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![0.3, -2.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut opt = Optimizer::new(OptimizerKind::adam(0.001)).unwrap();
        let mut p = vec![0.5];
        opt.step(vec![&mut p], &[vec![1.0]]).unwrap();
        // m̂ = v̂ = 1, so Δ = -lr / (1 + ε)
        let expected = 0.5 - 0.001 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.499).abs() < 1e-10);
        assert_eq!(opt.first_moment()[0].len(), 1);
    }

    #[test]
    fn step_counter_increments_by_one() {
        let mut opt = Optimizer::new(OptimizerKind::adam(0.001)).unwrap();
        let mut p = vec![0.0; 3];
        for i in 1..=5 {
            opt.step(vec![&mut p], &[vec![0.1, -0.2, 0.3]]).unwrap();
            assert_eq!(opt.steps(), i);
        }
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut opt = Optimizer::new(OptimizerKind::sgd(0.1)).unwrap();
        let mut p = vec![0.0; 3];
        assert!(opt.step(vec![&mut p], &[vec![0.0; 2]]).is_err());
        assert!(opt.step(vec![&mut p], &[]).is_err());
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        assert!(Optimizer::new(OptimizerKind::sgd(0.0)).is_err());
        assert!(Optimizer::new(OptimizerKind::Adam {
            lr: 0.001,
            beta1: 1.0,
            beta2: 0.999,
            epsilon: 1e-8
        })
        .is_err());
    }
}
