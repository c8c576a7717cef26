use std::collections::HashMap;

use rand::Rng;

use super::{DiffError, Matrix, ParamId, ParameterStore, SparseMatrix};
use crate::Scalar;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, T),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Ln(Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    RowDot(Var, Var),
    RowNorm(Var),
    Cosine(Var, Var),
    SoftmaxRows(Var),
    LogSumExpRows(Var),
    Sum(Var),
    Mean(Var),
    SumSquares(Var),
    SpMM(SparseMatrix<T>, Var),
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    tracked: bool,
}

/// Record of a single forward computation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, left: (usize, usize), right: (usize, usize)) -> DiffError {
    DiffError::ShapeMismatch { op, left, right }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.item()
    }

    /// Input that receives a gradient.
    pub fn leaf(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Binds a parameter. Repeated calls on the same tape return the same node.
    pub fn param(&mut self, store: &ParameterStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param, true);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let value = self.value(a).matmul(self.value(b))?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    fn zip_same(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
    ) -> Result<Matrix<T>, DiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(op, x.shape(), y.shape()));
        }
        let data = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&p, &q)| f(p, q))
            .collect();
        Matrix::from_vec(x.rows(), x.cols(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let value = self.zip_same("add", a, b, |p, q| p + q)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let value = self.zip_same("sub", a, b, |p, q| p - q)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Sub(a, b), tracked))
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let value = self.zip_same("mul", a, b, |p, q| p * q)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Mul(a, b), tracked))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let value = self.zip_same("div", a, b, |p, q| p / q)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Div(a, b), tracked))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).map(|x| x * s);
        let tracked = self.tracked(a);
        self.push(value, Op::Scale(a, s), tracked)
    }

    /// Adds a `1×c` row to every row of an `n×c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, DiffError> {
        let (x, b) = (self.value(a), self.value(row));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(shape_err("add_row", x.shape(), b.shape()));
        }
        let mut value = x.clone();
        for r in 0..value.rows() {
            for (o, &v) in value.row_mut(r).iter_mut().zip(b.data()) {
                *o += v;
            }
        }
        let tracked = self.tracked(a) || self.tracked(row);
        Ok(self.push(value, Op::AddRow(a, row), tracked))
    }

    /// Scales row `r` of an `n×c` matrix by entry `r` of an `n×1` column.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, DiffError> {
        let (x, w) = (self.value(a), self.value(col));
        if w.cols() != 1 || w.rows() != x.rows() {
            return Err(shape_err("mul_col", x.shape(), w.shape()));
        }
        let mut value = x.clone();
        for r in 0..value.rows() {
            let s = w.data()[r];
            value.row_mut(r).iter_mut().for_each(|o| *o *= s);
        }
        let tracked = self.tracked(a) || self.tracked(col);
        Ok(self.push(value, Op::MulCol(a, col), tracked))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self
            .value(a)
            .map(|x| if x > T::zero() { x } else { T::zero() });
        let tracked = self.tracked(a);
        self.push(value, Op::Relu(a), tracked)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let tracked = self.tracked(a);
        self.push(value, Op::Sigmoid(a), tracked)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(T::exp);
        let tracked = self.tracked(a);
        self.push(value, Op::Exp(a), tracked)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).map(T::ln);
        let tracked = self.tracked(a);
        self.push(value, Op::Ln(a), tracked)
    }

    /// Inverted dropout: zeroes entries with probability `rate` and rescales
    /// the survivors by `1/(1-rate)`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        rng: &mut R,
    ) -> Result<Var, DiffError> {
        if rate <= 0.0 {
            return Ok(a);
        }
        let (rows, cols) = self.value(a).shape();
        let keep = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..rows * cols)
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let mask = self.constant(Matrix::from_vec(rows, cols, mask)?);
        self.mul(a, mask)
    }

    /// Concatenates along the feature (column) axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows());
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(shape_err("concat_cols", (rows, cols), v.shape()));
            }
            cols += v.cols();
        }
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                value.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(value, Op::Concat(parts.to_vec()), tracked))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, DiffError> {
        let x = self.value(a);
        if start >= end || end > x.cols() {
            return Err(shape_err("slice_cols", x.shape(), (start, end)));
        }
        let mut value = Matrix::zeros(x.rows(), end - start);
        for r in 0..x.rows() {
            value.row_mut(r).copy_from_slice(&x.row(r)[start..end]);
        }
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::SliceCols(a, start), tracked))
    }

    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var, DiffError> {
        let value = self.value(a).gather_rows(index)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::GatherRows(a, index.to_vec()), tracked))
    }

    /// Per-row inner product, `n×1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("row_dot", x.shape(), y.shape()));
        }
        let data = (0..x.rows())
            .map(|r| dot(x.row(r), y.row(r)))
            .collect::<Vec<_>>();
        let value = Matrix::column(&data);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::RowDot(a, b), tracked))
    }

    /// Per-row Euclidean norm, `n×1`.
    pub fn row_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = (0..x.rows())
            .map(|r| dot(x.row(r), x.row(r)).sqrt())
            .collect::<Vec<_>>();
        let value = Matrix::column(&data);
        let tracked = self.tracked(a);
        self.push(value, Op::RowNorm(a), tracked)
    }

    /// Per-row cosine similarity, `n×1`. Fails on a zero-norm row.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("cosine_rows", x.shape(), y.shape()));
        }
        let mut data = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let (p, q) = (x.row(r), y.row(r));
            let (np, nq) = (dot(p, p).sqrt(), dot(q, q).sqrt());
            if np == T::zero() || nq == T::zero() {
                return Err(DiffError::ZeroVector(r));
            }
            data.push(dot(p, q) / (np * nq));
        }
        let value = Matrix::column(&data);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Cosine(a, b), tracked))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = x.clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        let tracked = self.tracked(a);
        self.push(value, Op::SoftmaxRows(a), tracked)
    }

    /// Row-wise `ln Σ exp`, `n×1`, with max subtraction.
    pub fn logsumexp_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = (0..x.rows())
            .map(|r| logsumexp(x.row(r)))
            .collect::<Vec<_>>();
        let value = Matrix::column(&data);
        let tracked = self.tracked(a);
        self.push(value, Op::LogSumExpRows(a), tracked)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        let tracked = self.tracked(a);
        self.push(Matrix::scalar(s), Op::Sum(a), tracked)
    }

    /// Mean of all entries; `0` for an empty matrix.
    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s: T = x.data().iter().copied().sum();
        let m = if x.is_empty() {
            T::zero()
        } else {
            s / T::of(x.len() as f64)
        };
        let tracked = self.tracked(a);
        self.push(Matrix::scalar(m), Op::Mean(a), tracked)
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).sum_squares();
        let tracked = self.tracked(a);
        self.push(Matrix::scalar(s), Op::SumSquares(a), tracked)
    }

    /// Sparse-dense product `m · a`.
    pub fn spmm(&mut self, m: &SparseMatrix<T>, a: Var) -> Result<Var, DiffError> {
        let value = m.mul_dense(self.value(a))?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::SpMM(m.clone(), a), tracked))
    }

    /// Reverse pass from a `1×1` root.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>, DiffError> {
        let shape = self.value(root).shape();
        if shape != (1, 1) {
            return Err(DiffError::NotScalar(shape));
        }
        let mut grads: Vec<Option<Matrix<T>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Matrix::scalar(T::one()));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let params = self.params.iter().map(|(&id, &v)| (id, v)).collect();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node<T>, g: &Matrix<T>, grads: &mut [Option<Matrix<T>>]) {
        let mut send = |v: Var, contrib: Matrix<T>| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contrib),
                slot @ None => *slot = Some(contrib),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let zip = |a: &Matrix<T>, b: &Matrix<T>, f: &dyn Fn(T, T) -> T| {
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(&p, &q)| f(p, q))
                .collect();
            Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
        };
        let out = &node.value;

        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                if self.tracked(*a) {
                    send(*a, g.matmul(&val(*b).transpose()).expect("matmul shapes"));
                }
                if self.tracked(*b) {
                    send(*b, val(*a).transpose().matmul(g).expect("matmul shapes"));
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.tracked(*a) {
                    send(*a, zip(g, val(*b), &|p, q| p * q));
                }
                if self.tracked(*b) {
                    send(*b, zip(g, val(*a), &|p, q| p * q));
                }
            }
            Op::Div(a, b) => {
                let (x, y) = (val(*a), val(*b));
                if self.tracked(*a) {
                    send(*a, zip(g, y, &|p, q| p / q));
                }
                if self.tracked(*b) {
                    let gx = zip(g, x, &|p, q| p * q);
                    send(*b, zip(&gx, y, &|p, q| -p / (q * q)));
                }
            }
            Op::Scale(a, s) => send(*a, g.map(|x| x * *s)),
            Op::AddRow(a, row) => {
                send(*a, g.clone());
                if self.tracked(*row) {
                    let mut acc = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in acc.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    send(*row, acc);
                }
            }
            Op::MulCol(a, col) => {
                let (x, w) = (val(*a), val(*col));
                if self.tracked(*a) {
                    let mut ga = g.clone();
                    for r in 0..ga.rows() {
                        let s = w.data()[r];
                        ga.row_mut(r).iter_mut().for_each(|o| *o *= s);
                    }
                    send(*a, ga);
                }
                if self.tracked(*col) {
                    let data: Vec<T> = (0..x.rows()).map(|r| dot(g.row(r), x.row(r))).collect();
                    send(*col, Matrix::column(&data));
                }
            }
            Op::Relu(a) => send(
                *a,
                zip(g, val(*a), &|p, q| {
                    if q > T::zero() {
                        p
                    } else {
                        T::zero()
                    }
                }),
            ),
            Op::Sigmoid(a) => send(*a, zip(g, out, &|p, y| p * y * (T::one() - y))),
            Op::Exp(a) => send(*a, zip(g, out, &|p, y| p * y)),
            Op::Ln(a) => send(*a, zip(g, val(*a), &|p, x| p / x)),
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let width = val(p).cols();
                    if self.tracked(p) {
                        let mut gp = Matrix::zeros(g.rows(), width);
                        for r in 0..g.rows() {
                            gp.row_mut(r)
                                .copy_from_slice(&g.row(r)[offset..offset + width]);
                        }
                        send(p, gp);
                    }
                    offset += width;
                }
            }
            Op::SliceCols(a, start) => {
                let x = val(*a);
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for r in 0..g.rows() {
                    ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                send(*a, ga);
            }
            Op::GatherRows(a, index) => {
                let x = val(*a);
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for (k, &i) in index.iter().enumerate() {
                    for (o, &v) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                send(*a, ga);
            }
            Op::RowDot(a, b) => {
                let (x, y) = (val(*a), val(*b));
                if self.tracked(*a) {
                    let mut ga = y.clone();
                    for r in 0..ga.rows() {
                        let s = g.data()[r];
                        ga.row_mut(r).iter_mut().for_each(|o| *o *= s);
                    }
                    send(*a, ga);
                }
                if self.tracked(*b) {
                    let mut gb = x.clone();
                    for r in 0..gb.rows() {
                        let s = g.data()[r];
                        gb.row_mut(r).iter_mut().for_each(|o| *o *= s);
                    }
                    send(*b, gb);
                }
            }
            Op::RowNorm(a) => {
                let mut ga = val(*a).clone();
                for r in 0..ga.rows() {
                    let n = out.data()[r];
                    let s = if n > T::zero() {
                        g.data()[r] / n
                    } else {
                        T::zero()
                    };
                    ga.row_mut(r).iter_mut().for_each(|o| *o *= s);
                }
                send(*a, ga);
            }
            Op::Cosine(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                let mut gb = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let (p, q) = (x.row(r), y.row(r));
                    let (np, nq) = (dot(p, p).sqrt(), dot(q, q).sqrt());
                    let c = out.data()[r];
                    let gr = g.data()[r];
                    for k in 0..p.len() {
                        ga.row_mut(r)[k] = gr * (q[k] / (np * nq) - c * p[k] / (np * np));
                        gb.row_mut(r)[k] = gr * (p[k] / (np * nq) - c * q[k] / (nq * nq));
                    }
                }
                send(*a, ga);
                send(*b, gb);
            }
            Op::SoftmaxRows(a) => {
                let mut ga = Matrix::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let (y, gr) = (out.row(r), g.row(r));
                    let inner = dot(y, gr);
                    for (k, o) in ga.row_mut(r).iter_mut().enumerate() {
                        *o = y[k] * (gr[k] - inner);
                    }
                }
                send(*a, ga);
            }
            Op::LogSumExpRows(a) => {
                let mut ga = val(*a).clone();
                for r in 0..ga.rows() {
                    let lse = out.data()[r];
                    let s = g.data()[r];
                    ga.row_mut(r)
                        .iter_mut()
                        .for_each(|o| *o = s * (*o - lse).exp());
                }
                send(*a, ga);
            }
            Op::Sum(a) => {
                let x = val(*a);
                send(*a, Matrix::filled(x.rows(), x.cols(), g.item()));
            }
            Op::Mean(a) => {
                let x = val(*a);
                if !x.is_empty() {
                    send(
                        *a,
                        Matrix::filled(x.rows(), x.cols(), g.item() / T::of(x.len() as f64)),
                    );
                }
            }
            Op::SumSquares(a) => {
                let s = g.item() * T::of(2.0);
                send(*a, val(*a).map(|x| x * s));
            }
            Op::SpMM(m, a) => send(*a, m.transpose_mul_dense(g)),
        }
    }
}

/// Result of a reverse pass.
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
    params: Vec<(ParamId, Var)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the root with respect to `v`; `None` when `v` does not
    /// influence the root or carries no gradient.
    pub fn wrt(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Adds every bound parameter's gradient into the store's accumulators.
    pub fn accumulate_into(&self, store: &mut ParameterStore<T>) {
        for &(id, v) in &self.params {
            if let Some(g) = self.wrt(v) {
                store.grad_mut(id).add_assign(g);
            }
        }
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    row.iter_mut().for_each(|x| *x /= total);
}

pub(crate) fn logsumexp<T: Scalar>(row: &[T]) -> T {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    // The max contributes exactly 1; `ln_1p` keeps tails far below epsilon.
    let at = row.iter().position(|&x| x == m).unwrap_or(0);
    let rest: T = row
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != at)
        .map(|(_, &x)| (x - m).exp())
        .sum();
    m + rest.ln_1p()
}
