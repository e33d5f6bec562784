//! Multi-head scaled-dot-product attention and two-layer MLP blocks.
//!
//! Every block is evaluated on a [`Tape`], so the same code path serves
//! inference and gradient checks. The plain [`mha`] and [`mlp2`] wrappers
//! record onto a throwaway tape and return the value.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{random_tensor, Tape, Tensor2, Var};

/// Projection weights of one multi-head attention block.
///
/// All projections are `d x d`; head `h` owns columns `h*d/heads..(h+1)*d/heads`
/// of the projected queries, keys and values.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub wq: Tensor2,
    pub wk: Tensor2,
    pub wv: Tensor2,
    pub wo: Tensor2,
    pub heads: usize,
    /// Optional per-head sink logit (1 x heads). A sink is an extra key with a
    /// fixed logit and a zero value, letting a query attend to "nothing".
    pub sinks: Option<Tensor2>,
}

impl AttentionParams {
    pub fn new(wq: Tensor2, wk: Tensor2, wv: Tensor2, wo: Tensor2, heads: usize) -> Result<Self> {
        let p = Self {
            wq,
            wk,
            wv,
            wo,
            heads,
            sinks: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn identity(d: usize, heads: usize) -> Self {
        Self {
            wq: Tensor2::identity(d),
            wk: Tensor2::identity(d),
            wv: Tensor2::identity(d),
            wo: Tensor2::identity(d),
            heads,
            sinks: None,
        }
    }

    pub fn zeros(d: usize, heads: usize) -> Self {
        Self {
            wq: Tensor2::zeros(d, d),
            wk: Tensor2::zeros(d, d),
            wv: Tensor2::zeros(d, d),
            wo: Tensor2::zeros(d, d),
            heads,
            sinks: None,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, d: usize, heads: usize) -> Self {
        let std = 1.0 / (d as f64).sqrt();
        Self {
            wq: random_tensor(rng, d, d, std),
            wk: random_tensor(rng, d, d, std),
            wv: random_tensor(rng, d, d, std),
            wo: random_tensor(rng, d, d, std),
            heads,
            sinks: None,
        }
    }

    pub fn with_sinks(mut self, sinks: Tensor2) -> Result<Self> {
        self.sinks = Some(sinks);
        self.validate()?;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.wq.rows()
    }

    pub fn head_width(&self) -> usize {
        self.width() / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.wq.rows();
        if self.heads == 0 || !d.is_multiple_of(self.heads) {
            return Err(Error::shape(
                "AttentionParams",
                format!("width {d} not divisible by {} heads", self.heads),
            ));
        }
        for (name, w) in [("wq", &self.wq), ("wk", &self.wk), ("wv", &self.wv), ("wo", &self.wo)] {
            if w.shape() != (d, d) {
                return Err(Error::shape(
                    "AttentionParams",
                    format!("{name} is {:?}, expected {d}x{d}", w.shape()),
                ));
            }
        }
        if let Some(s) = &self.sinks {
            if s.shape() != (1, self.heads) {
                return Err(Error::shape(
                    "AttentionParams",
                    format!("sinks {:?}, expected 1x{}", s.shape(), self.heads),
                ));
            }
        }
        Ok(())
    }

    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> AttentionVars {
        AttentionVars {
            wq: tape.param(&self.wq),
            wk: tape.param(&self.wk),
            wv: tape.param(&self.wv),
            wo: tape.param(&self.wo),
            sinks: self.sinks.as_ref().map(|s| tape.param(s)),
            heads: self.heads,
        }
    }

    pub fn tensors(&self, prefix: &str) -> Vec<(String, &Tensor2)> {
        let mut out = vec![
            (format!("{prefix}.wq"), &self.wq),
            (format!("{prefix}.wk"), &self.wk),
            (format!("{prefix}.wv"), &self.wv),
            (format!("{prefix}.wo"), &self.wo),
        ];
        if let Some(s) = &self.sinks {
            out.push((format!("{prefix}.sinks"), s));
        }
        out
    }

    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor2)> {
        let mut out = vec![
            (format!("{prefix}.wq"), &mut self.wq),
            (format!("{prefix}.wk"), &mut self.wk),
            (format!("{prefix}.wv"), &mut self.wv),
            (format!("{prefix}.wo"), &mut self.wo),
        ];
        if let Some(s) = &mut self.sinks {
            out.push((format!("{prefix}.sinks"), s));
        }
        out
    }
}

/// Attention weights recorded on a tape.
#[derive(Clone, Debug)]
pub struct AttentionVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
    pub sinks: Option<Var>,
    pub heads: usize,
}

/// Multi-head attention on the tape. Rows of the result align with rows of `q`.
///
/// An empty key/value set yields a zero matrix shaped like the output.
pub fn mha_on(tape: &mut Tape<'_>, q: Var, k: Var, v: Var, p: &AttentionVars) -> Result<Var> {
    let d = tape.value(p.wq).rows();
    let (nq, qd) = tape.value(q).shape();
    let (nk, kd) = tape.value(k).shape();
    let (nv, vd) = tape.value(v).shape();
    if qd != d || kd != d || vd != d {
        return Err(Error::shape(
            "mha",
            format!("widths q={qd} k={kd} v={vd}, model width {d}"),
        ));
    }
    if nk != nv {
        return Err(Error::shape("mha", format!("{nk} keys but {nv} values")));
    }
    if nk == 0 || nq == 0 {
        return Ok(tape.leaf(Tensor2::zeros(nq, d)));
    }
    let dh = d / p.heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let qp = tape.matmul(q, p.wq)?;
    let kp = tape.matmul(k, p.wk)?;
    let vp = tape.matmul(v, p.wv)?;
    let ones = p.sinks.map(|_| tape.leaf(Tensor2::filled(nq, 1, 1.0)));

    let mut heads = Vec::with_capacity(p.heads);
    for h in 0..p.heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let qh = tape.slice_cols(qp, lo, hi)?;
        let kh = tape.slice_cols(kp, lo, hi)?;
        let vh = tape.slice_cols(vp, lo, hi)?;
        let kt = tape.transpose(kh);
        let logits = tape.matmul(qh, kt)?;
        let logits = tape.scale(logits, scale);
        let weights = match (p.sinks, ones) {
            (Some(sinks), Some(ones)) => {
                let sink = tape.slice_cols(sinks, h, h + 1)?;
                let column = tape.matmul(ones, sink)?;
                let ext = tape.concat_cols(&[logits, column])?;
                let sm = tape.softmax_rows(ext);
                tape.slice_cols(sm, 0, nk)?
            }
            _ => tape.softmax_rows(logits),
        };
        heads.push(tape.matmul(weights, vh)?);
    }
    let joined = tape.concat_cols(&heads)?;
    tape.matmul(joined, p.wo)
}

/// Multi-head attention: `softmax(QK^T / sqrt(d/h)) V` per head, then the output projection.
pub fn mha(q: &Tensor2, k: &Tensor2, v: &Tensor2, p: &AttentionParams) -> Result<Tensor2> {
    p.validate()?;
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape);
    let (q, k, v) = (tape.param(q), tape.param(k), tape.param(v));
    let out = mha_on(&mut tape, q, k, v, &vars)?;
    Ok(tape.value(out).clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// Weights of `layer2(act(layer1(x)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub w1: Tensor2,
    pub b1: Tensor2,
    pub w2: Tensor2,
    pub b2: Tensor2,
}

impl MlpParams {
    pub fn new(w1: Tensor2, b1: Tensor2, w2: Tensor2, b2: Tensor2) -> Result<Self> {
        let p = Self { w1, b1, w2, b2 };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(d_in: usize, d_hidden: usize, d_out: usize) -> Self {
        Self {
            w1: Tensor2::zeros(d_in, d_hidden),
            b1: Tensor2::zeros(1, d_hidden),
            w2: Tensor2::zeros(d_hidden, d_out),
            b2: Tensor2::zeros(1, d_out),
        }
    }

    /// Both layers identity, hidden width `d`.
    pub fn identity(d: usize) -> Self {
        Self {
            w1: Tensor2::identity(d),
            b1: Tensor2::zeros(1, d),
            w2: Tensor2::identity(d),
            b2: Tensor2::zeros(1, d),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_hidden: usize, d_out: usize) -> Self {
        Self {
            w1: random_tensor(rng, d_in, d_hidden, 1.0 / (d_in as f64).sqrt()),
            b1: random_tensor(rng, 1, d_hidden, 0.1),
            w2: random_tensor(rng, d_hidden, d_out, 1.0 / (d_hidden as f64).sqrt()),
            b2: random_tensor(rng, 1, d_out, 0.1),
        }
    }

    pub fn input_width(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_width(&self) -> usize {
        self.w2.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.w1.cols();
        let ok = h > 0
            && self.b1.shape() == (1, h)
            && self.w2.rows() == h
            && self.b2.shape() == (1, self.w2.cols());
        if ok {
            Ok(())
        } else {
            Err(Error::shape(
                "MlpParams",
                format!(
                    "w1 {:?} b1 {:?} w2 {:?} b2 {:?}",
                    self.w1.shape(),
                    self.b1.shape(),
                    self.w2.shape(),
                    self.b2.shape()
                ),
            ))
        }
    }

    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> MlpVars {
        MlpVars {
            w1: tape.param(&self.w1),
            b1: tape.param(&self.b1),
            w2: tape.param(&self.w2),
            b2: tape.param(&self.b2),
        }
    }

    pub fn tensors(&self, prefix: &str) -> Vec<(String, &Tensor2)> {
        vec![
            (format!("{prefix}.w1"), &self.w1),
            (format!("{prefix}.b1"), &self.b1),
            (format!("{prefix}.w2"), &self.w2),
            (format!("{prefix}.b2"), &self.b2),
        ]
    }

    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor2)> {
        vec![
            (format!("{prefix}.w1"), &mut self.w1),
            (format!("{prefix}.b1"), &mut self.b1),
            (format!("{prefix}.w2"), &mut self.w2),
            (format!("{prefix}.b2"), &mut self.b2),
        ]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MlpVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

pub fn mlp2_on(tape: &mut Tape<'_>, x: Var, p: &MlpVars, activation: Activation) -> Result<Var> {
    let h = tape.matmul(x, p.w1)?;
    let h = tape.add_row(h, p.b1)?;
    let h = match activation {
        Activation::Relu => tape.relu(h),
        Activation::None => h,
    };
    let y = tape.matmul(h, p.w2)?;
    tape.add_row(y, p.b2)
}

pub fn mlp2(x: &Tensor2, p: &MlpParams, activation: Activation) -> Result<Tensor2> {
    p.validate()?;
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape);
    let x = tape.param(x);
    let out = mlp2_on(&mut tape, x, &vars, activation)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identical_keys_average_values() {
        let mut r = rng(5);
        let d = 8;
        let p = AttentionParams::random(&mut r, d, 2);
        let key = random_tensor(&mut r, 1, d, 1.0);
        let k = Tensor2::concat_rows(&[&key, &key, &key]).unwrap();
        let v = random_tensor(&mut r, 3, d, 1.0);
        let q = random_tensor(&mut r, 2, d, 1.0);
        let out = mha(&q, &k, &v, &p).unwrap();
        // uniform weights: output = mean(v) Wv Wo
        let mean = Tensor2::filled(1, 3, 1.0 / 3.0).matmul(&v).unwrap();
        let expect = mean.matmul(&p.wv).unwrap().matmul(&p.wo).unwrap();
        for row in 0..2 {
            for c in 0..d {
                assert!((out.get(row, c) - expect.get(0, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_key_passes_value_through() {
        let mut r = rng(6);
        let p = AttentionParams::identity(8, 4);
        let q = random_tensor(&mut r, 3, 8, 1.0);
        let k = random_tensor(&mut r, 1, 8, 1.0);
        let v = random_tensor(&mut r, 1, 8, 1.0);
        let out = mha(&q, &k, &v, &p).unwrap();
        for row in 0..3 {
            assert_eq!(out.row(row), v.row(0));
        }
    }

    #[test]
    fn empty_keys_give_zeros() {
        let p = AttentionParams::identity(8, 2);
        let q = Tensor2::filled(3, 8, 1.0);
        let kv = Tensor2::zeros(0, 8);
        assert_eq!(mha(&q, &kv, &kv, &p).unwrap(), Tensor2::zeros(3, 8));
    }

    #[test]
    fn shape_errors() {
        let p = AttentionParams::identity(8, 2);
        let q = Tensor2::zeros(2, 8);
        let k = Tensor2::zeros(3, 8);
        let v = Tensor2::zeros(2, 8);
        assert!(matches!(mha(&q, &k, &v, &p), Err(Error::Shape { .. })));
        let bad = Tensor2::zeros(2, 6);
        assert!(mha(&bad, &k, &k, &p).is_err());
        assert!(AttentionParams::new(
            Tensor2::identity(6),
            Tensor2::identity(6),
            Tensor2::identity(6),
            Tensor2::identity(6),
            4
        )
        .is_err());
    }

    #[test]
    fn sink_absorbs_mass() {
        let p = AttentionParams::identity(4, 1)
            .with_sinks(Tensor2::filled(1, 1, 0.0))
            .unwrap();
        let q = Tensor2::zeros(1, 4);
        let k = Tensor2::zeros(1, 4);
        let v = Tensor2::filled(1, 4, 2.0);
        // one real key at logit 0 and the sink at logit 0: half the mass each
        let out = mha(&q, &k, &v, &p).unwrap();
        for c in 0..4 {
            assert!((out.get(0, c) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mlp_zero_and_identity() {
        let mut r = rng(7);
        let x = random_tensor(&mut r, 4, 6, 1.0);
        let z = mlp2(&x, &MlpParams::zeros(6, 5, 3), Activation::Relu).unwrap();
        assert_eq!(z, Tensor2::zeros(4, 3));
        let y = mlp2(&x, &MlpParams::identity(6), Activation::None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn mlp_rejects_bad_shapes() {
        let p = MlpParams::zeros(6, 5, 3);
        let x = Tensor2::zeros(2, 4);
        assert!(mlp2(&x, &p, Activation::None).is_err());
    }

    #[test]
    fn gradients_of_both_blocks() {
        let mut r = rng(8);
        let d = 8;
        let a = AttentionParams::random(&mut r, d, 2)
            .with_sinks(random_tensor(&mut r, 1, 2, 1.0))
            .unwrap();
        let m = MlpParams::random(&mut r, d, 12, d);
        let q = random_tensor(&mut r, 3, d, 1.0);
        let kv = random_tensor(&mut r, 5, d, 1.0);
        let mut inputs = vec![q, kv];
        inputs.extend(a.tensors("a").into_iter().map(|(_, t)| t.clone()));
        inputs.extend(m.tensors("m").into_iter().map(|(_, t)| t.clone()));
        let err = grad_check(
            |t, v| {
                let av = AttentionVars {
                    wq: v[2],
                    wk: v[3],
                    wv: v[4],
                    wo: v[5],
                    sinks: Some(v[6]),
                    heads: 2,
                };
                let mv = MlpVars {
                    w1: v[7],
                    b1: v[8],
                    w2: v[9],
                    b2: v[10],
                };
                let att = mha_on(t, v[0], v[1], v[1], &av)?;
                let y = mlp2_on(t, att, &mv, Activation::Relu)?;
                Ok(t.sum(y))
            },
            &inputs,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }
}
