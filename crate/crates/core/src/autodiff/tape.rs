use std::sync::Arc;

use ndarray::{concatenate, s, Array2, Axis, Zip};

use super::params::{ParamId, ParamStore};
use crate::error::{ensure, Error, Result};
use crate::ragged::kernels::{self, check_ids};
use crate::Scalar;

/// Shared row-index vector used by gather and segment ops.
pub type Index = Arc<[usize]>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Constant,
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    MulScalarVar(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Matmul(Var, Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Gather(Var, Index),
    SegmentSum(Var, Index),
    SegmentMean(Var, Index, Vec<usize>),
    SegmentMax(Var, Array2<Option<usize>>),
    SegmentSoftmax(Var, Index, usize),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Abs(Var),
    Square(Var),
    Rsqrt(Var),
    LogSoftmaxRows(Var),
    RowSum(Var),
    SumAll(Var),
    MeanAll(Var),
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf | Constant => vec![],
            Add(a, b) | AddRow(a, b) | Sub(a, b) | Mul(a, b) | MulCol(a, b) | MulScalarVar(a, b)
            | Matmul(a, b) => vec![*a, *b],
            ConcatCols(vs) => vs.clone(),
            Scale(a, _) | AddScalar(a) | SliceCols(a, _) | Gather(a, _) | SegmentSum(a, _)
            | SegmentMean(a, _, _) | SegmentMax(a, _) | SegmentSoftmax(a, _, _) | Relu(a)
            | Sigmoid(a) | Tanh(a) | Softplus(a) | Abs(a) | Square(a) | Rsqrt(a)
            | LogSoftmaxRows(a) | RowSum(a) | SumAll(a) | MeanAll(a) => vec![*a],
        }
    }
}

#[derive(Clone, Debug)]
struct Record<T> {
    op: Op<T>,
    value: Array2<T>,
    requires_grad: bool,
}

/// Append-only record of a forward computation, differentiated in reverse.
///
/// Records are stored in creation order, so every input precedes the
/// records that consume it. Shapes must match exactly except for
/// [`Tape::add_row`] (row-vector bias) and the scalar ops.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    records: Vec<Record<T>>,
    param_vars: Vec<Var>,
}

/// Gradients of a scalar output with respect to every recorded value.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            records: Vec::new(),
            param_vars: Vec::new(),
        }
    }

    /// A fresh tape with every parameter of `store` recorded as a leaf.
    pub fn with_params(store: &ParamStore<T>) -> Self {
        let mut tape = Self::new();
        tape.param_vars = store.iter().map(|p| tape.leaf(p.value.clone())).collect();
        tape
    }

    /// Uses existing nodes as the parameters, in store order. This is how a
    /// model is evaluated under [`grad_check`](super::grad_check).
    pub fn bind_params(&mut self, vars: &[Var]) {
        self.param_vars = vars.to_vec();
    }

    pub fn param(&self, id: ParamId) -> Var {
        self.param_vars[id.index()]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.records[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.records[v.0].value.dim()
    }

    /// Single element of a `(1, 1)` value.
    pub fn scalar(&self, v: Var) -> T {
        self.records[v.0].value[[0, 0]]
    }

    fn push(&mut self, op: Op<T>, value: Array2<T>) -> Var {
        let requires_grad = match op {
            Op::Leaf => true,
            Op::Constant => false,
            _ => op.inputs().iter().any(|v| self.records[v.0].requires_grad),
        };
        self.records.push(Record {
            op,
            value,
            requires_grad,
        });
        Var(self.records.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<T>) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(Op::Constant, value)
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<()> {
        ensure!(
            self.shape(a) == self.shape(b),
            Dimension,
            "{op}: shapes {:?} and {:?} differ",
            self.shape(a),
            self.shape(b)
        );
        Ok(())
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.value(a).mapv(f);
        self.push(op, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a) + self.value(b);
        Ok(self.push(Op::Add(a, b), value))
    }

    /// Adds the `(1, F)` row vector `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, f) = self.shape(a);
        ensure!(
            self.shape(row) == (1, f),
            Dimension,
            "add_row: bias shape {:?} does not broadcast over width {f}",
            self.shape(row)
        );
        let value = self.value(a) + self.value(row);
        Ok(self.push(Op::AddRow(a, row), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a) - self.value(b);
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a) * self.value(b);
        Ok(self.push(Op::Mul(a, b), value))
    }

    /// Scales each row of `a` (R, F) by the matching entry of `col` (R, 1).
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (r, _) = self.shape(a);
        ensure!(
            self.shape(col) == (r, 1),
            Dimension,
            "mul_col: column shape {:?} does not match {r} rows",
            self.shape(col)
        );
        let value = self.value(a) * self.value(col);
        Ok(self.push(Op::MulCol(a, col), value))
    }

    /// Multiplies every entry of `a` by the `(1, 1)` value `s`.
    pub fn mul_scalar_var(&mut self, a: Var, s: Var) -> Result<Var> {
        ensure!(self.shape(s) == (1, 1), Dimension, "mul_scalar_var: scale has shape {:?}", self.shape(s));
        let c = self.scalar(s);
        let value = self.value(a).mapv(|x| x * c);
        Ok(self.push(Op::MulScalarVar(a, s), value))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((_, k1), (k2, _)) = (self.shape(a), self.shape(b));
        ensure!(
            k1 == k2,
            Dimension,
            "matmul: inner dimensions {:?} x {:?} do not match",
            self.shape(a),
            self.shape(b)
        );
        let value = self.value(a).dot(self.value(b));
        Ok(self.push(Op::Matmul(a, b), value))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        ensure!(!parts.is_empty(), Dimension, "concat_cols: no inputs");
        let rows = self.shape(parts[0]).0;
        for &p in parts {
            ensure!(
                self.shape(p).0 == rows,
                Dimension,
                "concat_cols: row counts {} and {} differ",
                rows,
                self.shape(p).0
            );
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts checked");
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let f = self.shape(a).1;
        ensure!(start <= end && end <= f, Dimension, "slice_cols: {start}..{end} outside width {f}");
        let value = self.value(a).slice(s![.., start..end]).to_owned();
        Ok(self.push(Op::SliceCols(a, start), value))
    }

    pub fn gather_rows(&mut self, a: Var, indices: &Index) -> Result<Var> {
        let value = kernels::gather_rows(self.value(a).view(), indices)?;
        Ok(self.push(Op::Gather(a, indices.clone()), value))
    }

    pub fn segment_sum(&mut self, a: Var, ids: &Index, num_segments: usize) -> Result<Var> {
        let value = kernels::segment_sum(self.value(a).view(), ids, num_segments)?;
        Ok(self.push(Op::SegmentSum(a, ids.clone()), value))
    }

    pub fn segment_mean(&mut self, a: Var, ids: &Index, num_segments: usize) -> Result<Var> {
        let (value, counts) = kernels::segment_mean(self.value(a).view(), ids, num_segments)?;
        Ok(self.push(Op::SegmentMean(a, ids.clone(), counts), value))
    }

    /// Gradient flows to the arg-max row of each segment and column only.
    pub fn segment_max(&mut self, a: Var, ids: &Index, num_segments: usize) -> Result<Var> {
        let (value, arg) = kernels::segment_max(self.value(a).view(), ids, num_segments)?;
        Ok(self.push(Op::SegmentMax(a, arg), value))
    }

    pub fn segment_reduce(
        &mut self,
        a: Var,
        ids: &Index,
        num_segments: usize,
        reducer: kernels::Reducer,
    ) -> Result<Var> {
        match reducer {
            kernels::Reducer::Sum => self.segment_sum(a, ids, num_segments),
            kernels::Reducer::Mean => self.segment_mean(a, ids, num_segments),
            kernels::Reducer::Max => self.segment_max(a, ids, num_segments),
        }
    }

    /// Column-wise softmax within each segment, shifted by the segment max.
    pub fn segment_softmax(&mut self, a: Var, ids: &Index, num_segments: usize) -> Result<Var> {
        let x = self.value(a);
        ensure!(
            x.nrows() == ids.len(),
            Dimension,
            "segment_softmax: {} rows but {} segment ids",
            x.nrows(),
            ids.len()
        );
        check_ids(ids, num_segments)?;
        let (max, _) = kernels::segment_max(x.view(), ids, num_segments)?;
        let mut value = x.clone();
        for (mut row, &s) in value.rows_mut().into_iter().zip(ids.iter()) {
            row.zip_mut_with(&max.row(s), |v, &m| *v = (*v - m).exp());
        }
        let denom = kernels::segment_sum(value.view(), ids, num_segments)?;
        for (mut row, &s) in value.rows_mut().into_iter().zip(ids.iter()) {
            row.zip_mut_with(&denom.row(s), |v, &d| *v /= d);
        }
        Ok(self.push(Op::SegmentSoftmax(a, ids.clone(), num_segments), value))
    }

    /// `relu'(0)` is taken as 0.
    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, relu, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, T::tanh, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    /// `|x|`, with derivative 0 at 0.
    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, T::abs, Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    /// Elementwise `x^(-1/2)`.
    pub fn rsqrt(&mut self, a: Var) -> Result<Var> {
        if let Some(x) = self.value(a).iter().find(|&&x| x <= T::zero()) {
            return Err(Error::Numeric(format!("rsqrt of non-positive value {x}")));
        }
        Ok(self.unary(a, |x| x.sqrt().recip(), Op::Rsqrt(a)))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<T>().ln();
            row.mapv_inplace(|x| x - lse);
        }
        self.push(Op::LogSoftmaxRows(a), value)
    }

    /// `(R, F) -> (R, 1)` sum over columns.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(Op::RowSum(a), value)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(Op::SumAll(a), value)
    }

    /// Mean over all entries; an empty input yields 0.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mean = if x.is_empty() {
            T::zero()
        } else {
            x.sum() / T::of(x.len() as f64)
        };
        self.push(Op::MeanAll(a), Array2::from_elem((1, 1), mean))
    }

    /// Reverse sweep seeded at the `(1, 1)` value `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        ensure!(
            self.shape(output) == (1, 1),
            Contract,
            "backward needs a scalar output, got shape {:?}",
            self.shape(output)
        );
        let mut grads: Vec<Option<Array2<T>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Array2::ones((1, 1)));
        for i in (0..=output.0).rev() {
            let rec = &self.records[i];
            if !rec.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop(rec, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop(&self, rec: &Record<T>, g: &Array2<T>, grads: &mut [Option<Array2<T>>]) {
        let mut acc = |v: Var, delta: Array2<T>| {
            if !self.records[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        let val = |v: Var| &self.records[v.0].value;
        let y = &rec.value;
        match &rec.op {
            Op::Leaf | Op::Constant => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.mapv(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(*a, g * val(*b));
                acc(*b, g * val(*a));
            }
            Op::MulCol(a, col) => {
                acc(*a, g * val(*col));
                acc(*col, (g * val(*a)).sum_axis(Axis(1)).insert_axis(Axis(1)));
            }
            Op::MulScalarVar(a, s) => {
                let c = val(*s)[[0, 0]];
                acc(*a, g.mapv(|x| x * c));
                acc(*s, Array2::from_elem((1, 1), (g * val(*a)).sum()));
            }
            Op::Scale(a, c) => acc(*a, g.mapv(|x| x * *c)),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::Matmul(a, b) => {
                acc(*a, g.dot(&val(*b).t()));
                acc(*b, val(*a).t().dot(g));
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = val(p).ncols();
                    acc(p, g.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::SliceCols(a, start) => {
                let mut d = Array2::zeros(val(*a).dim());
                d.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                acc(*a, d);
            }
            Op::Gather(a, idx) => {
                let n = val(*a).nrows();
                acc(*a, kernels::segment_sum(g.view(), idx, n).expect("validated forward"));
            }
            Op::SegmentSum(a, ids) => {
                acc(*a, kernels::gather_rows(g.view(), ids).expect("validated forward"));
            }
            Op::SegmentMean(a, ids, counts) => {
                let mut d = kernels::gather_rows(g.view(), ids).expect("validated forward");
                for (mut row, &s) in d.rows_mut().into_iter().zip(ids.iter()) {
                    let inv = T::one() / T::of(counts[s] as f64);
                    row.mapv_inplace(|x| x * inv);
                }
                acc(*a, d);
            }
            Op::SegmentMax(a, arg) => {
                let mut d = Array2::zeros(val(*a).dim());
                for ((s, c), src) in arg.indexed_iter() {
                    if let Some(r) = src {
                        d[[*r, c]] += g[[s, c]];
                    }
                }
                acc(*a, d);
            }
            Op::SegmentSoftmax(a, ids, n) => {
                let gy = g * y;
                let dot = kernels::segment_sum(gy.view(), ids, *n).expect("validated forward");
                let mut d = g.clone();
                for ((mut row, yr), &s) in d.rows_mut().into_iter().zip(y.rows()).zip(ids.iter()) {
                    Zip::from(&mut row)
                        .and(&yr)
                        .and(&dot.row(s))
                        .for_each(|d, &y, &dt| *d = y * (*d - dt));
                }
                acc(*a, d);
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                d.zip_mut_with(val(*a), |d, &x| {
                    if x <= T::zero() {
                        *d = T::zero()
                    }
                });
                acc(*a, d);
            }
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                d.zip_mut_with(y, |d, &y| *d *= y * (T::one() - y));
                acc(*a, d);
            }
            Op::Tanh(a) => {
                let mut d = g.clone();
                d.zip_mut_with(y, |d, &y| *d *= T::one() - y * y);
                acc(*a, d);
            }
            Op::Softplus(a) => {
                let mut d = g.clone();
                d.zip_mut_with(val(*a), |d, &x| *d *= sigmoid(x));
                acc(*a, d);
            }
            Op::Abs(a) => {
                let mut d = g.clone();
                d.zip_mut_with(val(*a), |d, &x| {
                    *d *= if x > T::zero() {
                        T::one()
                    } else if x < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    }
                });
                acc(*a, d);
            }
            Op::Square(a) => {
                let two = T::of(2.0);
                let mut d = g.clone();
                d.zip_mut_with(val(*a), |d, &x| *d *= two * x);
                acc(*a, d);
            }
            Op::Rsqrt(a) => {
                let half = T::of(0.5);
                let mut d = g.clone();
                d.zip_mut_with(y, |d, &y| *d *= -half * y * y * y);
                acc(*a, d);
            }
            Op::LogSoftmaxRows(a) => {
                let gsum = g.sum_axis(Axis(1));
                let mut d = g.clone();
                for ((mut row, yr), &gs) in d.rows_mut().into_iter().zip(y.rows()).zip(gsum.iter()) {
                    row.zip_mut_with(&yr, |d, &y| *d -= y.exp() * gs);
                }
                acc(*a, d);
            }
            Op::RowSum(a) => {
                let w = val(*a).ncols();
                let d = Array2::from_shape_fn((g.nrows(), w), |(r, _)| g[[r, 0]]);
                acc(*a, d);
            }
            Op::SumAll(a) => acc(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]])),
            Op::MeanAll(a) => {
                let x = val(*a);
                let n = T::of(x.len().max(1) as f64);
                acc(*a, Array2::from_elem(x.dim(), g[[0, 0]] / n));
            }
        }
    }

    /// Gradient for every parameter bound by [`Tape::with_params`]; unused
    /// parameters get zeros.
    pub fn param_grads(&self, grads: &Gradients<T>) -> Vec<Array2<T>> {
        self.param_vars
            .iter()
            .map(|&v| {
                grads
                    .get(v)
                    .cloned()
                    .unwrap_or_else(|| Array2::zeros(self.value(v).dim()))
            })
            .collect()
    }
}
