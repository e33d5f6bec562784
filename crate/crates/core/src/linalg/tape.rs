//! Reverse-mode differentiation over [`Tensor2`] values.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and the backward pass is a single reverse sweep.

use std::borrow::Cow;

use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Relu(Var),
    Softmax(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Sum(Var),
    Mean(Var),
}

struct Node<'a> {
    value: Cow<'a, Tensor2>,
    op: Op,
}

/// Records operations so that gradients of a scalar output can be replayed backward.
///
/// Parameters may be borrowed with [`Tape::param`] to avoid copying weights on
/// every forward pass.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    adjoints: Vec<Option<Tensor2>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient with respect to `v`; zero when `v` does not influence the output.
    pub fn wrt(&self, v: Var) -> Tensor2 {
        match &self.adjoints[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor2::zeros(r, c)
            }
        }
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor2>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn push_owned(&mut self, value: Tensor2, op: Op) -> Var {
        self.push(Cow::Owned(value), op)
    }

    pub fn leaf(&mut self, value: Tensor2) -> Var {
        self.push_owned(value, Op::Leaf)
    }

    pub fn param(&mut self, value: &'a Tensor2) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push_owned(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.push_owned(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        Ok(self.push_owned(out, Op::Sub(a, b)))
    }

    /// `a + row` with `row` (1 x cols) broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = self.value(a).add_row(self.value(row))?;
        Ok(self.push_owned(out, Op::AddRow(a, row)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).hadamard(self.value(b))?;
        Ok(self.push_owned(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        self.push_owned(out, Op::Scale(a, s))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).sigmoid();
        self.push_owned(out, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).relu();
        self.push_owned(out, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = self.value(a).softmax_rows();
        self.push_owned(out, Op::Softmax(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push_owned(out, Op::Transpose(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let vals: Vec<&Tensor2> = parts.iter().map(|p| self.value(*p)).collect();
        let out = Tensor2::concat_cols(&vals)?;
        Ok(self.push_owned(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let vals: Vec<&Tensor2> = parts.iter().map(|p| self.value(*p)).collect();
        let out = Tensor2::concat_rows(&vals)?;
        Ok(self.push_owned(out, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let out = self.value(a).slice_cols(start, end)?;
        Ok(self.push_owned(out, Op::SliceCols(a, start)))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let out = self.value(a).slice_rows(start, end)?;
        Ok(self.push_owned(out, Op::SliceRows(a, start)))
    }

    /// Sum of all entries as a 1x1 value.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push_owned(Tensor2::filled(1, 1, s), Op::Sum(a))
    }

    /// Mean of all entries as a 1x1 value.
    pub fn mean(&mut self, a: Var) -> Var {
        let s = self.value(a).mean();
        self.push_owned(Tensor2::filled(1, 1, s), Op::Mean(a))
    }

    /// Back-propagates from a 1x1 output. Every node is visited once, in reverse order.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).shape() != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("output must be 1x1, got {:?}", self.value(output).shape()),
            ));
        }
        let n = output.0 + 1;
        let mut adj: Vec<Option<Tensor2>> = vec![None; n];
        adj[output.0] = Some(Tensor2::filled(1, 1, 1.0));

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose())?;
                    let gb = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut adj, *a, ga)?;
                    accumulate(&mut adj, *b, gb)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.clone())?;
                    accumulate(&mut adj, *b, g.clone())?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *a, g.clone())?;
                    accumulate(&mut adj, *b, g.scale(-1.0))?;
                }
                Op::AddRow(a, row) => {
                    let mut gr = Tensor2::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (acc, v) in gr.data_mut().iter_mut().zip(g.row(r)) {
                            *acc += v;
                        }
                    }
                    accumulate(&mut adj, *a, g.clone())?;
                    accumulate(&mut adj, *row, gr)?;
                }
                Op::Mul(a, b) => {
                    let ga = g.hadamard(self.value(*b))?;
                    let gb = g.hadamard(self.value(*a))?;
                    accumulate(&mut adj, *a, ga)?;
                    accumulate(&mut adj, *b, gb)?;
                }
                Op::Scale(a, s) => accumulate(&mut adj, *a, g.scale(*s))?,
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = g.hadamard(&y.map(|v| v * (1.0 - v)))?;
                    accumulate(&mut adj, *a, ga)?;
                }
                Op::Relu(a) => {
                    let mask = self.value(*a).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    accumulate(&mut adj, *a, g.hadamard(&mask)?)?;
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut ga = Tensor2::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for (c, out) in ga.row_mut(r).iter_mut().enumerate() {
                            *out = yr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut adj, *a, ga)?;
                }
                Op::Transpose(a) => accumulate(&mut adj, *a, g.transpose())?,
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        accumulate(&mut adj, *p, g.slice_cols(start, start + w)?)?;
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let h = self.value(*p).rows();
                        accumulate(&mut adj, *p, g.slice_rows(start, start + h)?)?;
                        start += h;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut ga = Tensor2::zeros(src.rows(), src.cols());
                    for r in 0..g.rows() {
                        ga.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut adj, *a, ga)?;
                }
                Op::SliceRows(a, start) => {
                    let src = self.value(*a);
                    let mut ga = Tensor2::zeros(src.rows(), src.cols());
                    for r in 0..g.rows() {
                        ga.row_mut(start + r).copy_from_slice(g.row(r));
                    }
                    accumulate(&mut adj, *a, ga)?;
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut adj, *a, Tensor2::filled(r, c, g.get(0, 0)))?;
                }
                Op::Mean(a) => {
                    let (r, c) = self.value(*a).shape();
                    let k = (r * c).max(1) as f64;
                    accumulate(&mut adj, *a, Tensor2::filled(r, c, g.get(0, 0) / k))?;
                }
            }
            adj[i] = Some(g);
        }

        let shapes = self.nodes[..n].iter().map(|nd| nd.value.shape()).collect();
        Ok(Gradients {
            adjoints: adj,
            shapes,
        })
    }
}

fn accumulate(adj: &mut [Option<Tensor2>], v: Var, g: Tensor2) -> Result<()> {
    match &mut adj[v.0] {
        Some(existing) => *existing = existing.add(&g)?,
        slot @ None => *slot = Some(g),
    }
    Ok(())
}

/// Compares tape gradients of the scalar `f` against central differences.
///
/// Returns the maximum over every input component of
/// `|analytic - numeric| / (|analytic| + 1e-12)`.
pub fn grad_check<F>(f: F, inputs: &[Tensor2], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<'_>, &[Var]) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = f(&mut tape, &vars)?;
        check_scalar(tape.value(out))?;
        let grads = tape.backward(out)?;
        vars.iter().map(|v| grads.wrt(*v)).collect::<Vec<_>>()
    };

    let eval = |xs: &[Tensor2]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = f(&mut tape, &vars)?;
        check_scalar(tape.value(out))
    };

    let mut worst: f64 = 0.0;
    let mut xs = inputs.to_vec();
    for (k, grad) in analytic.iter().enumerate() {
        for idx in 0..xs[k].data().len() {
            let orig = xs[k].data()[idx];
            xs[k].data_mut()[idx] = orig + eps;
            let fp = eval(&xs)?;
            xs[k].data_mut()[idx] = orig - eps;
            let fm = eval(&xs)?;
            xs[k].data_mut()[idx] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let a = grad.data()[idx];
            let err = (a - numeric).abs() / (a.abs() + 1e-12);
            if !err.is_finite() {
                return Err(Error::Numeric("non-finite gradient error".into()));
            }
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn check_scalar(t: &Tensor2) -> Result<f64> {
    if t.shape() != (1, 1) {
        return Err(Error::shape("grad_check", format!("scalar output expected, got {:?}", t.shape())));
    }
    let v = t.get(0, 0);
    if !v.is_finite() {
        return Err(Error::Numeric("non-finite function value".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_of_squares_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, 3, 4, 1.0);
        let err = grad_check(
            |t, v| {
                let sq = t.mul(v[0], v[0])?;
                Ok(t.sum(sq))
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn sigmoid_matmul_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_tensor(&mut rng, 3, 5, 1.0);
        let b = random_tensor(&mut rng, 5, 2, 1.0);
        let err = grad_check(
            |t, v| {
                let m = t.matmul(v[0], v[1])?;
                let s = t.sigmoid(m);
                Ok(t.sum(s))
            },
            &[a, b],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn every_op_differentiates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(&mut rng, 3, 4, 1.0);
        let b = random_tensor(&mut rng, 3, 4, 1.0);
        let r = random_tensor(&mut rng, 1, 4, 1.0);
        let w = random_tensor(&mut rng, 4, 4, 1.0);
        let err = grad_check(
            |t, v| {
                let x = t.add_row(v[0], v[2])?;
                let x = t.sub(x, v[1])?;
                let y = t.matmul(x, v[3])?;
                let y = t.scale(y, 0.2);
                let s = t.softmax_rows(y);
                let z = t.mul(s, v[1])?;
                let zt = t.transpose(z);
                let zt = t.transpose(zt);
                let left = t.slice_cols(zt, 0, 2)?;
                let right = t.slice_cols(v[0], 2, 4)?;
                let right = t.sigmoid(right);
                let c = t.concat_cols(&[left, right])?;
                let top = t.slice_rows(c, 0, 1)?;
                let c2 = t.concat_rows(&[c, top])?;
                let c2 = t.add(c2, c2)?;
                let q = t.mul(c2, c2)?;
                Ok(t.mean(q))
            },
            &[a, b, r, w],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "err {err}");
    }

    #[test]
    fn unused_input_has_zero_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor2::filled(2, 2, 1.0));
        let b = tape.leaf(Tensor2::filled(2, 2, 3.0));
        let s = tape.sum(a);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(b), Tensor2::zeros(2, 2));
        assert_eq!(g.wrt(a), Tensor2::filled(2, 2, 1.0));
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor2::zeros(2, 2));
        assert!(tape.backward(a).is_err());
    }
}
