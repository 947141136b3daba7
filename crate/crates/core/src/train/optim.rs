use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{ensure, Error, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_kind")]
    pub kind: OptimizerKind,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_kind() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    /// Adam with `lr = 1e-3`, `β = (0.9, 0.999)`, `ε = 1e-8`.
    fn default() -> Self {
        Self {
            kind: default_kind(),
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.lr.is_finite() && self.lr >= 0.0, Config, "optimizer.lr must be finite and non-negative");
        ensure!((0.0..1.0).contains(&self.beta1), Config, "optimizer.beta1 must lie in [0, 1)");
        ensure!((0.0..1.0).contains(&self.beta2), Config, "optimizer.beta2 must lie in [0, 1)");
        ensure!(self.epsilon > 0.0, Config, "optimizer.epsilon must be positive");
        Ok(())
    }
}

/// Step count and moment buffers (Adam only) for every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub config: OptimizerConfig,
    pub step: u64,
    pub first_moment: Vec<Array2<T>>,
    pub second_moment: Vec<Array2<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(config: OptimizerConfig, params: &ParamStore<T>) -> Self {
        let zeros = |_| params.iter().map(|p| Array2::zeros(p.value.dim())).collect::<Vec<_>>();
        let (first_moment, second_moment) = match config.kind {
            OptimizerKind::Adam => (zeros(()), zeros(())),
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
        };
        Self {
            config,
            step: 0,
            first_moment,
            second_moment,
        }
    }

    /// Applies one update from the gradients held in `params`.
    ///
    /// Adam uses the bias-corrected moments
    /// `θ ← θ − lr · m̂ / (√v̂ + ε)`; sgd uses `θ ← θ − lr · g`.
    /// Fails without touching any parameter when a gradient is not finite.
    pub fn step(&mut self, params: &mut ParamStore<T>) -> Result<()> {
        for p in params.iter() {
            if let Some(pos) = p.grad.iter().position(|g| !g.is_finite()) {
                let (r, c) = (pos / p.grad.ncols().max(1), pos % p.grad.ncols().max(1));
                return Err(Error::Numeric(format!(
                    "non-finite gradient {} in parameter {} at ({r}, {c})",
                    p.grad.iter().nth(pos).unwrap(),
                    p.name
                )));
            }
        }
        self.step += 1;
        let lr = T::of(self.config.lr);
        match self.config.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    Zip::from(&mut p.value).and(&p.grad).for_each(|w, &g| *w -= lr * g);
                }
            }
            OptimizerKind::Adam => {
                ensure!(
                    self.first_moment.len() == params.len(),
                    Contract,
                    "optimizer tracks {} parameters, model has {}",
                    self.first_moment.len(),
                    params.len()
                );
                let (b1, b2, eps) = (T::of(self.config.beta1), T::of(self.config.beta2), T::of(self.config.epsilon));
                let c1 = T::one() - b1.powi(self.step as i32);
                let c2 = T::one() - b2.powi(self.step as i32);
                for ((p, m), v) in params.iter_mut().zip(&mut self.first_moment).zip(&mut self.second_moment) {
                    Zip::from(&mut p.value).and(&p.grad).and(m).and(v).for_each(|w, &g, m, v| {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    });
                }
            }
        }
        Ok(())
    }
}
