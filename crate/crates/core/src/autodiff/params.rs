use ndarray::Array2;
use rand::Rng;

use crate::error::{ensure, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable value and its accumulated gradient (same shape, starts at zero).
#[derive(Clone, Debug, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    pub value: Array2<T>,
    pub grad: Array2<T>,
}

/// Registry of every trainable parameter of a model, in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    vars: Vec<Variable<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { vars: Vec::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: Array2<T>) -> ParamId {
        let grad = Array2::zeros(value.dim());
        self.vars.push(Variable {
            name: name.into(),
            value,
            grad,
        });
        ParamId(self.vars.len() - 1)
    }

    /// Glorot-uniform `(fan_in, fan_out)` weight matrix.
    pub fn glorot(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
        let value = Array2::from_shape_fn((fan_in, fan_out), |_| T::of(rng.gen_range(-limit..=limit)));
        self.register(name, value)
    }

    pub fn zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.register(name, Array2::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Variable<T> {
        &self.vars[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Variable<T>> {
        self.vars.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Variable<T>> {
        self.vars.iter_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.vars.iter().map(|v| v.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for v in &mut self.vars {
            v.grad.fill(T::zero());
        }
    }

    pub fn accumulate(&mut self, grads: &[Array2<T>]) -> Result<()> {
        ensure!(
            grads.len() == self.vars.len(),
            Dimension,
            "{} gradients for {} parameters",
            grads.len(),
            self.vars.len()
        );
        for (v, g) in self.vars.iter_mut().zip(grads) {
            ensure!(
                v.grad.dim() == g.dim(),
                Dimension,
                "gradient for {} has shape {:?}, parameter has {:?}",
                v.name,
                g.dim(),
                v.grad.dim()
            );
            v.grad += g;
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<Array2<T>> {
        self.vars.iter().map(|v| v.value.clone()).collect()
    }

    /// Replaces all parameter values; shapes must match.
    pub fn set_values(&mut self, values: Vec<Array2<T>>) -> Result<()> {
        ensure!(
            values.len() == self.vars.len(),
            Dimension,
            "{} values for {} parameters",
            values.len(),
            self.vars.len()
        );
        for (v, new) in self.vars.iter_mut().zip(values) {
            ensure!(
                v.value.dim() == new.dim(),
                Dimension,
                "parameter {} has shape {:?}, got {:?}",
                v.name,
                v.value.dim(),
                new.dim()
            );
            v.value = new;
        }
        Ok(())
    }
}
