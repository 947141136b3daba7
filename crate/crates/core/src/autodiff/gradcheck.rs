use ndarray::Array2;

use super::{Tape, Var};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, flat element index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub coordinates: usize,
}

/// Compares reverse-mode gradients of a scalar function with central
/// differences `(f(θ+εe) − f(θ−εe)) / 2ε`, one coordinate at a time.
///
/// `f` records its computation on the supplied tape, reading the
/// parameters from the given leaf handles, and returns a `(1, 1)` value.
/// Relative error per coordinate is `|a − n| / max(|a|, |n|, 1e-8)`.
/// Functions with kinks (relu, abs, max) must be evaluated at points at
/// least `eps` away from them.
pub fn grad_check<T, F>(f: F, params: &[Array2<T>], eps: T) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Array2<T>]| -> Result<(Tape<T>, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.leaf(v.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let y = tape.scalar(out);
        if !y.is_finite() {
            return Err(Error::Numeric(format!("function value {y} is not finite")));
        }
        Ok((tape, vars, out))
    };

    let (tape, vars, out) = eval(params)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Array2<T>> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| grads.get(v).cloned().unwrap_or_else(|| Array2::zeros(p.dim())))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    let mut work: Vec<Array2<T>> = params.to_vec();
    for p in 0..params.len() {
        for k in 0..params[p].len() {
            let orig = params[p].iter().nth(k).copied().unwrap();
            set_flat(&mut work[p], k, orig + eps);
            let (t_plus, _, o_plus) = eval(&work)?;
            set_flat(&mut work[p], k, orig - eps);
            let (t_minus, _, o_minus) = eval(&work)?;
            set_flat(&mut work[p], k, orig);

            let numeric = ((t_plus.scalar(o_plus) - t_minus.scalar(o_minus)) / (eps + eps)).as_f64();
            let a = analytic[p].iter().nth(k).copied().unwrap().as_f64();
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coordinates += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((p, k));
            }
        }
    }
    Ok(report)
}

fn set_flat<T: Scalar>(m: &mut Array2<T>, k: usize, v: T) {
    *m.iter_mut().nth(k).unwrap() = v;
}
