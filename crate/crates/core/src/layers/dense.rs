use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{ensure, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Linear,
    Relu,
    Sigmoid,
    Tanh,
    Softplus,
    /// `ln(0.5 e^x + 0.5)`, zero at the origin.
    ShiftedSoftplus,
}

impl Activation {
    pub fn apply<T: Scalar>(self, tape: &mut Tape<T>, x: Var) -> Var {
        match self {
            Activation::Linear => x,
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Softplus => tape.softplus(x),
            Activation::ShiftedSoftplus => {
                let s = tape.softplus(x);
                tape.add_scalar(s, -T::of(std::f64::consts::LN_2))
            }
        }
    }
}

/// `activation(x W + b)`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    pub in_width: usize,
    pub out_width: usize,
}

impl Dense {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        in_width: usize,
        out_width: usize,
        activation: Activation,
    ) -> Self {
        Self {
            weight: store.glorot(format!("{name}.weight"), in_width, out_width, rng),
            bias: store.zeros(format!("{name}.bias"), 1, out_width),
            activation,
            in_width,
            out_width,
        }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let z = self.linear(tape, x)?;
        self.finish(tape, z)
    }

    /// `x W` without bias or activation.
    pub fn linear<T: Scalar>(&self, tape: &mut Tape<T>, x: Var) -> Result<Var> {
        let w = tape.shape(x).1;
        ensure!(
            w == self.in_width,
            Dimension,
            "dense layer expects width {} but got {w}",
            self.in_width
        );
        let weight = tape.param(self.weight);
        tape.matmul(x, weight)
    }

    /// Adds the bias and applies the activation to a pre-activation `z`.
    pub fn finish<T: Scalar>(&self, tape: &mut Tape<T>, z: Var) -> Result<Var> {
        let bias = tape.param(self.bias);
        let z = tape.add_row(z, bias)?;
        Ok(self.activation.apply(tape, z))
    }
}

/// Stack of dense layers; every layer but the last uses `hidden`.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        widths: &[usize],
        hidden: Activation,
        output: Activation,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let act = if k + 1 == n { output } else { hidden };
                Dense::new(store, rng, &format!("{name}.{k}"), widths[k], widths[k + 1], act)
            })
            .collect();
        Self { layers }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, mut x: Var) -> Result<Var> {
        for layer in &self.layers {
            x = layer.apply(tape, x)?;
        }
        Ok(x)
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width
    }

    pub fn out_width(&self) -> usize {
        self.layers.last().unwrap().out_width
    }
}

/// Gated recurrent cell:
/// `z = σ(x Wz + h Uz + bz)`, `r = σ(x Wr + h Ur + br)`,
/// `n = tanh(x Wn + (r ⊙ h) Un + bn)`, `h' = (1 − z) ⊙ n + z ⊙ h`.
#[derive(Clone, Debug)]
pub struct Gru {
    input: [Dense; 3],
    hidden: [ParamId; 3],
    pub hidden_width: usize,
}

impl Gru {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        in_width: usize,
        hidden_width: usize,
    ) -> Self {
        let gate = |store: &mut ParamStore<T>, rng: &mut _, g: &str, act| {
            Dense::new(store, rng, &format!("{name}.{g}"), in_width, hidden_width, act)
        };
        let input = [
            gate(store, rng, "z", Activation::Sigmoid),
            gate(store, rng, "r", Activation::Sigmoid),
            gate(store, rng, "n", Activation::Tanh),
        ];
        let hidden = ["z", "r", "n"]
            .map(|g| store.glorot(format!("{name}.{g}.recurrent"), hidden_width, hidden_width, rng));
        Self {
            input,
            hidden,
            hidden_width,
        }
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, x: Var, h: Var) -> Result<Var> {
        let [wz, wr, wn] = &self.input;
        let gate = |tape: &mut Tape<T>, dense: &Dense, recurrent: ParamId, hv: Var| -> Result<Var> {
            let xz = dense.linear(tape, x)?;
            let u = tape.param(recurrent);
            let hz = tape.matmul(hv, u)?;
            let s = tape.add(xz, hz)?;
            dense.finish(tape, s)
        };
        let z = gate(tape, wz, self.hidden[0], h)?;
        let r = gate(tape, wr, self.hidden[1], h)?;
        let rh = tape.mul(r, h)?;
        let n = gate(tape, wn, self.hidden[2], rh)?;
        // h' = n + z ⊙ (h − n)
        let diff = tape.sub(h, n)?;
        let zd = tape.mul(z, diff)?;
        tape.add(n, zd)
    }
}
