use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const ADADELTA_RHO: f64 = 0.9;
pub const ADADELTA_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Adadelta,
}

/// First-order optimizer over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer<S> {
    kind: OptimizerKind,
    lr: S,
    /// Adam: first moment. Adadelta: running mean of squared gradients.
    first: Vec<S>,
    /// Adam: second moment. Adadelta: running mean of squared updates.
    second: Vec<S>,
    steps: i32,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(kind: OptimizerKind, lr: f64, params: usize) -> Self {
        Optimizer { kind, lr: S::of(lr), first: vec![S::zero(); params], second: vec![S::zero(); params], steps: 0 }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [S], grad: &[S]) -> Result<()> {
        if params.len() != self.first.len() || grad.len() != self.first.len() {
            return Err(Error::Dimension { expected: self.first.len(), got: params.len().min(grad.len()) });
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (S::of(ADAM_BETA1), S::of(ADAM_BETA2), S::of(ADAM_EPSILON));
                let c1 = S::one() - b1.powi(self.steps);
                let c2 = S::one() - b2.powi(self.steps);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.first[i] = b1 * self.first[i] + (S::one() - b1) * g;
                    self.second[i] = b2 * self.second[i] + (S::one() - b2) * g * g;
                    let m = self.first[i] / c1;
                    let v = self.second[i] / c2;
                    params[i] -= self.lr * m / (v.sqrt() + eps);
                }
            }
            OptimizerKind::Adadelta => {
                let (rho, eps) = (S::of(ADADELTA_RHO), S::of(ADADELTA_EPSILON));
                for i in 0..params.len() {
                    let g = grad[i];
                    self.first[i] = rho * self.first[i] + (S::one() - rho) * g * g;
                    let dx = -((self.second[i] + eps).sqrt() / (self.first[i] + eps).sqrt()) * g;
                    self.second[i] = rho * self.second[i] + (S::one() - rho) * dx * dx;
                    params[i] += self.lr * dx;
                }
            }
        }
        Ok(())
    }
}
