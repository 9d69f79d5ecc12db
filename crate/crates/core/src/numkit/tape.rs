//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every primitive appends one node to the tape holding its output value and
//! the indices of its inputs. [`Tape::backward`] walks the tape from the loss
//! towards the leaves, so each node is visited once in reverse topological
//! order (node indices are a topological order by construction).
//!
//! ```
//! use actorgraph_core::numkit::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::scalar(3.0));
//! let sq = tape.hadamard(w, w).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(w).unwrap().item().unwrap(), 6.0);
//! ```

use std::sync::Arc;

use super::matrix::gemm;
use super::{Matrix, NumError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    AddScalar(usize),
    Scale(usize, f64),
    Neg(usize),
    LeakyRelu(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    Hadamard(usize, usize),
    RowSoftmax(usize),
    LogSoftmax(usize),
    LogSigmoid(usize),
    ConcatCols(usize, usize),
    GatherRows(usize, Arc<[usize]>),
    SegmentMean(usize, Arc<[Vec<usize>]>),
    RowDot(usize, usize),
    Log(usize),
    Sum(usize),
    SquaredNorm(usize),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
    grad: Option<Matrix>,
}

/// Recorded computation. Single owner; independent tapes share nothing.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn check_same(op: &str, a: &Matrix, b: &Matrix) -> Result<(), NumError> {
    if a.shape() != b.shape() {
        return Err(NumError::Shape(format!(
            "{op}: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without underflow for large negative `x`.
#[inline]
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a `requires_grad` leaf, if backward reached it.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.leaf(value, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn push(
        &mut self,
        name: &str,
        value: Matrix,
        op: Op,
        requires_grad: bool,
    ) -> Result<Var, NumError> {
        if !value.is_finite() {
            return Err(NumError::NonFinite(name.to_string()));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn unary(
        &mut self,
        name: &str,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<Var, NumError> {
        let value = self.value(a).map(f);
        let rg = self.needs(a.0);
        self.push(name, value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(a.0) || self.needs(b.0);
        self.push("matmul", value, Op::MatMul(a.0, b.0), rg)
    }

    /// Adds a `1 x d` bias to every row of an `n x d` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, NumError> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(NumError::Shape(format!(
                "add_bias: {}x{} bias for {}x{} input",
                bv.rows(),
                bv.cols(),
                xv.rows(),
                xv.cols()
            )));
        }
        let mut value = xv.clone();
        let b = bv.as_slice();
        for r in 0..value.rows() {
            for (v, bb) in value.row_mut(r).iter_mut().zip(b) {
                *v += bb;
            }
        }
        let rg = self.needs(x.0) || self.needs(bias.0);
        self.push("add_bias", value, Op::AddBias(x.0, bias.0), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        check_same("add", self.value(a), self.value(b))?;
        let mut value = self.value(a).clone();
        value.axpy(1.0, self.value(b));
        let rg = self.needs(a.0) || self.needs(b.0);
        self.push("add", value, Op::Add(a.0, b.0), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var, NumError> {
        self.unary("add_scalar", a, |v| v + c, Op::AddScalar(a.0))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, NumError> {
        self.unary("scale", a, |v| v * s, Op::Scale(a.0, s))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var, NumError> {
        self.unary("negate", a, |v| -v, Op::Neg(a.0))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, NumError> {
        self.unary(
            "leaky_relu",
            a,
            |v| if v > 0.0 { v } else { slope * v },
            Op::LeakyRelu(a.0, slope),
        )
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumError> {
        self.leaky_relu(a, 0.0)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NumError> {
        self.unary("tanh", a, f64::tanh, Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumError> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid(a.0))
    }

    /// Fused `log(sigmoid(x))`, finite for any finite input.
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var, NumError> {
        self.unary("log_sigmoid", a, log_sigmoid, Op::LogSigmoid(a.0))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        check_same("hadamard", self.value(a), self.value(b))?;
        let (av, bv) = (self.value(a), self.value(b));
        let data = av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .map(|(x, y)| x * y)
            .collect();
        let value = Matrix::from_vec(av.rows(), av.cols(), data)?;
        let rg = self.needs(a.0) || self.needs(b.0);
        self.push("hadamard", value, Op::Hadamard(a.0, b.0), rg)
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var, NumError> {
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            row.iter_mut().for_each(|v| *v /= z);
        }
        let rg = self.needs(a.0);
        self.push("row_softmax", value, Op::RowSoftmax(a.0), rg)
    }

    /// Fused `log(row_softmax(x))`.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, NumError> {
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            let row = value.row_mut(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        let rg = self.needs(a.0);
        self.push("log_softmax", value, Op::LogSoftmax(a.0), rg)
    }

    /// `[a, b]` along columns.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(NumError::Shape(format!(
                "concat_cols: {} rows vs {} rows",
                av.rows(),
                bv.rows()
            )));
        }
        let cols = av.cols() + bv.cols();
        let mut data = Vec::with_capacity(av.rows() * cols);
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let value = Matrix::from_vec(av.rows(), cols, data)?;
        let rg = self.needs(a.0) || self.needs(b.0);
        self.push("concat_cols", value, Op::ConcatCols(a.0, b.0), rg)
    }

    pub fn gather_rows(&mut self, a: Var, idx: impl Into<Arc<[usize]>>) -> Result<Var, NumError> {
        let idx: Arc<[usize]> = idx.into();
        let av = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= av.rows()) {
            return Err(NumError::Shape(format!(
                "gather_rows: index {bad} out of {} rows",
                av.rows()
            )));
        }
        let value = av.select_rows(&idx);
        let rg = self.needs(a.0);
        self.push("gather_rows", value, Op::GatherRows(a.0, idx), rg)
    }

    /// Mean of the rows of `a` listed in `set`, as a `1 x d` row.
    pub fn mean_rows(&mut self, a: Var, set: &[usize]) -> Result<Var, NumError> {
        if set.is_empty() {
            return Err(NumError::EmptyIndexSet);
        }
        let sets: Arc<[Vec<usize>]> = Arc::from(vec![set.to_vec()]);
        self.segment_mean(a, sets)
    }

    /// One output row per index set: the mean of the listed rows of `a`. An
    /// empty set yields a zero row, so the term it feeds drops out.
    pub fn segment_mean(&mut self, a: Var, sets: Arc<[Vec<usize>]>) -> Result<Var, NumError> {
        let av = self.value(a);
        let d = av.cols();
        let mut value = Matrix::zeros(sets.len(), d);
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                continue;
            }
            let inv = 1.0 / set.len() as f64;
            let out = value.row_mut(i);
            for &j in set {
                if j >= av.rows() {
                    return Err(NumError::Shape(format!(
                        "segment_mean: index {j} out of {} rows",
                        av.rows()
                    )));
                }
                for (o, x) in out.iter_mut().zip(av.row(j)) {
                    *o += x;
                }
            }
            out.iter_mut().for_each(|o| *o *= inv);
        }
        let rg = self.needs(a.0);
        self.push("segment_mean", value, Op::SegmentMean(a.0, sets), rg)
    }

    /// Dot product of matching rows: `out[k] = a[k] . b[k]`, an `m x 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        check_same("row_dot", self.value(a), self.value(b))?;
        let (av, bv) = (self.value(a), self.value(b));
        let data = (0..av.rows())
            .map(|r| av.row(r).iter().zip(bv.row(r)).map(|(x, y)| x * y).sum())
            .collect();
        let value = Matrix::from_vec(av.rows(), 1, data)?;
        let rg = self.needs(a.0) || self.needs(b.0);
        self.push("row_dot", value, Op::RowDot(a.0, b.0), rg)
    }

    pub fn log(&mut self, a: Var) -> Result<Var, NumError> {
        self.unary("log", a, f64::ln, Op::Log(a.0))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumError> {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.needs(a.0);
        self.push("sum", value, Op::Sum(a.0), rg)
    }

    pub fn squared_norm(&mut self, a: Var) -> Result<Var, NumError> {
        let value = Matrix::scalar(self.value(a).squared_norm());
        let rg = self.needs(a.0);
        self.push("squared_norm", value, Op::SquaredNorm(a.0), rg)
    }

    /// Propagates d(loss)/d(node) to every `requires_grad` leaf. Leaf
    /// gradients accumulate across calls until [`Tape::zero_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<(), NumError> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(NumError::NotScalar(lv.rows(), lv.cols()));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if let Op::Leaf = self.nodes[i].op {
                match &mut self.nodes[i].grad {
                    Some(acc) => acc.axpy(1.0, &g),
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            self.propagate(i, &g, &mut grads)?;
        }
        Ok(())
    }

    fn propagate(
        &self,
        i: usize,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
    ) -> Result<(), NumError> {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |j: usize| &self.nodes[j].value;
        // Lazily materialized accumulator for input j.
        fn slot(grads: &mut [Option<Matrix>], j: usize, shape: (usize, usize)) -> &mut Matrix {
            grads[j].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1))
        }
        let elementwise =
            |grads: &mut [Option<Matrix>], j: usize, f: &dyn Fn(usize, f64) -> f64| {
                let s = slot(grads, j, g.shape());
                for (k, (acc, &gk)) in s.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                    *acc += f(k, gk);
                }
            };

        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if self.needs(a) {
                    let s = slot(grads, a, av.shape());
                    // dA += dC * B^T
                    gemm(
                        m,
                        n,
                        k,
                        1.0,
                        (g.as_slice(), n as isize, 1),
                        (bv.as_slice(), 1, n as isize),
                        1.0,
                        s.as_mut_slice(),
                        k,
                    );
                }
                if self.needs(b) {
                    let s = slot(grads, b, bv.shape());
                    // dB += A^T * dC
                    gemm(
                        k,
                        m,
                        n,
                        1.0,
                        (av.as_slice(), 1, k as isize),
                        (g.as_slice(), n as isize, 1),
                        1.0,
                        s.as_mut_slice(),
                        n,
                    );
                }
            }
            Op::AddBias(x, b) => {
                if self.needs(x) {
                    elementwise(grads, x, &|_, gk| gk);
                }
                if self.needs(b) {
                    let s = slot(grads, b, val(b).shape());
                    for r in 0..g.rows() {
                        for (acc, gk) in s.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *acc += gk;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                if self.needs(a) {
                    elementwise(grads, a, &|_, gk| gk);
                }
                if self.needs(b) {
                    elementwise(grads, b, &|_, gk| gk);
                }
            }
            Op::AddScalar(a) => elementwise(grads, a, &|_, gk| gk),
            Op::Scale(a, s) => elementwise(grads, a, &|_, gk| s * gk),
            Op::Neg(a) => elementwise(grads, a, &|_, gk| -gk),
            Op::LeakyRelu(a, slope) => {
                let x = val(a).as_slice();
                elementwise(grads, a, &|k, gk| if x[k] > 0.0 { gk } else { slope * gk });
            }
            Op::Tanh(a) => {
                let yv = y.as_slice();
                elementwise(grads, a, &|k, gk| gk * (1.0 - yv[k] * yv[k]));
            }
            Op::Sigmoid(a) => {
                let yv = y.as_slice();
                elementwise(grads, a, &|k, gk| gk * yv[k] * (1.0 - yv[k]));
            }
            Op::LogSigmoid(a) => {
                // d/dx log sigma(x) = sigma(-x)
                let x = val(a).as_slice();
                elementwise(grads, a, &|k, gk| gk * sigmoid(-x[k]));
            }
            Op::Hadamard(a, b) => {
                if self.needs(a) {
                    let bv = val(b).as_slice();
                    elementwise(grads, a, &|k, gk| gk * bv[k]);
                }
                if self.needs(b) {
                    let av = val(a).as_slice();
                    elementwise(grads, b, &|k, gk| gk * av[k]);
                }
            }
            Op::RowSoftmax(a) => {
                let s = slot(grads, a, y.shape());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for (acc, (p, q)) in s.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                        *acc += p * (q - dot);
                    }
                }
            }
            Op::LogSoftmax(a) => {
                let s = slot(grads, a, y.shape());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let gsum: f64 = gr.iter().sum();
                    for (acc, (ly, q)) in s.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                        *acc += q - ly.exp() * gsum;
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let ca = val(a).cols();
                if self.needs(a) {
                    let s = slot(grads, a, val(a).shape());
                    for r in 0..g.rows() {
                        for (acc, gk) in s.row_mut(r).iter_mut().zip(&g.row(r)[..ca]) {
                            *acc += gk;
                        }
                    }
                }
                if self.needs(b) {
                    let s = slot(grads, b, val(b).shape());
                    for r in 0..g.rows() {
                        for (acc, gk) in s.row_mut(r).iter_mut().zip(&g.row(r)[ca..]) {
                            *acc += gk;
                        }
                    }
                }
            }
            Op::GatherRows(a, ref idx) => {
                let s = slot(grads, a, val(a).shape());
                for (k, &r) in idx.iter().enumerate() {
                    for (acc, gk) in s.row_mut(r).iter_mut().zip(g.row(k)) {
                        *acc += gk;
                    }
                }
            }
            Op::SegmentMean(a, ref sets) => {
                let s = slot(grads, a, val(a).shape());
                for (k, set) in sets.iter().enumerate() {
                    if set.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / set.len() as f64;
                    for &j in set {
                        for (acc, gk) in s.row_mut(j).iter_mut().zip(g.row(k)) {
                            *acc += inv * gk;
                        }
                    }
                }
            }
            Op::RowDot(a, b) => {
                let (av, bv) = (val(a), val(b));
                if self.needs(a) {
                    let s = slot(grads, a, av.shape());
                    for r in 0..av.rows() {
                        let gk = g.get(r, 0);
                        for (acc, x) in s.row_mut(r).iter_mut().zip(bv.row(r)) {
                            *acc += gk * x;
                        }
                    }
                }
                if self.needs(b) {
                    let s = slot(grads, b, bv.shape());
                    for r in 0..bv.rows() {
                        let gk = g.get(r, 0);
                        for (acc, x) in s.row_mut(r).iter_mut().zip(av.row(r)) {
                            *acc += gk * x;
                        }
                    }
                }
            }
            Op::Log(a) => {
                let x = val(a).as_slice();
                elementwise(grads, a, &|k, gk| gk / x[k]);
            }
            Op::Sum(a) => {
                let gs = g.item()?;
                let s = slot(grads, a, val(a).shape());
                s.as_mut_slice().iter_mut().for_each(|acc| *acc += gs);
            }
            Op::SquaredNorm(a) => {
                let gs = g.item()?;
                let x = val(a).as_slice();
                let s = slot(grads, a, val(a).shape());
                for (acc, xk) in s.as_mut_slice().iter_mut().zip(x) {
                    *acc += 2.0 * gs * xk;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_of(t: &Tape, v: Var) -> f64 {
        t.value(v).item().unwrap()
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(0.0));
        let s = t.sigmoid(x).unwrap();
        assert_eq!(scalar_of(&t, s), 0.5);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().item().unwrap(), 0.25);
    }

    #[test]
    fn uniform_softmax() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::zeros(1, 5));
        let s = t.row_softmax(x).unwrap();
        for &p in t.value(s).as_slice() {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_mean_is_an_error() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::zeros(3, 2));
        assert!(matches!(t.mean_rows(x, &[]), Err(NumError::EmptyIndexSet)));
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let w = t.param(Matrix::scalar(3.0));
        let sq = t.hadamard(w, w).unwrap();
        let loss = t.sum(sq).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w).unwrap().item().unwrap(), 6.0);
        // accumulates on a second pass
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w).unwrap().item().unwrap(), 12.0);
        t.zero_grads();
        assert!(t.grad(w).is_none());
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let w = t.param(Matrix::zeros(2, 2));
        assert!(matches!(t.backward(w), Err(NumError::NotScalar(2, 2))));
    }

    #[test]
    fn non_finite_trips() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(0.0));
        assert!(matches!(t.log(x), Err(NumError::NonFinite(_))));
    }

    #[test]
    fn log_sigmoid_stays_finite() {
        let mut t = Tape::new();
        let x = t.param(Matrix::row_vector(&[-1000.0, 0.0, 1000.0]));
        let y = t.log_sigmoid(x).unwrap();
        let v = t.value(y).as_slice().to_vec();
        assert_eq!(v[0], -1000.0);
        assert!((v[1] + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn constants_get_no_grad() {
        let mut t = Tape::new();
        let c = t.constant(Matrix::scalar(2.0));
        let w = t.param(Matrix::scalar(5.0));
        let p = t.hadamard(c, w).unwrap();
        let l = t.sum(p).unwrap();
        t.backward(l).unwrap();
        assert!(t.grad(c).is_none());
        assert_eq!(t.grad(w).unwrap().item().unwrap(), 2.0);
    }

    #[test]
    fn segment_mean_empty_set_gives_zero_row() {
        let mut t = Tape::new();
        let x = t.param(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        let sets: Arc<[Vec<usize>]> = Arc::from(vec![vec![0, 1], vec![]]);
        let m = t.segment_mean(x, sets).unwrap();
        assert_eq!(t.value(m).as_slice(), &[2.0, 3.0, 0.0, 0.0]);
    }
}
