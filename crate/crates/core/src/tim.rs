//! Temporal interaction: adaptive aggregation of adjacent-frame outputs,
//! memory-attention across tracks, and the FFN that predicts the next track
//! embedding.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::attention::{mha_on, mlp2_on, Activation, AttentionParams, AttentionVars, MlpParams, MlpVars};
use crate::error::{Error, Result};
use crate::linalg::{Tape, Tensor2, Var};
use crate::memory::{ema_scalar, MemoryConfig};

/// Which pieces of the module feed the next track embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimVariant {
    /// `ffn(M + mha(Q = agg, K = M, V = O))`.
    Full,
    /// Long-term memory replaced by the two-frame aggregation:
    /// `ffn(agg + mha(Q = agg, K = agg, V = O))`.
    MemoryOff,
    /// No memory-attention: `ffn(M + agg)`.
    AttnOff,
    /// A single FFN on the current output.
    Naive,
}

impl TimVariant {
    pub const ALL: [TimVariant; 4] = [
        TimVariant::Full,
        TimVariant::MemoryOff,
        TimVariant::AttnOff,
        TimVariant::Naive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimVariant::Full => "full",
            TimVariant::MemoryOff => "memory-off",
            TimVariant::AttnOff => "attn-off",
            TimVariant::Naive => "naive",
        }
    }
}

impl fmt::Display for TimVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TimVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown variant '{s}' (full, memory-off, attn-off, naive)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimParams {
    /// Produces the channel-wise weight logits from the current output (d -> d).
    pub weight_mlp: MlpParams,
    /// Fuses `[W * O_t, O_prev]` (2d -> d).
    pub fuse_mlp: MlpParams,
    /// Memory-attention layer.
    pub attn: AttentionParams,
    /// Final FFN (d -> d).
    pub ffn: MlpParams,
    pub ffn_activation: Activation,
    /// Adds the FFN input back onto its output.
    pub ffn_residual: bool,
}

impl TimParams {
    pub fn width(&self) -> usize {
        self.ffn.output_width()
    }

    /// Seeded random parameters with hidden widths `2d` (fusion) and `4d` (FFN).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, d: usize, heads: usize) -> Self {
        Self {
            weight_mlp: MlpParams::random(rng, d, d, d),
            fuse_mlp: MlpParams::random(rng, 2 * d, 2 * d, d),
            attn: AttentionParams::random(rng, d, heads),
            ffn: MlpParams::random(rng, d, 4 * d, d),
            ffn_activation: Activation::Relu,
            ffn_residual: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.attn.width();
        self.attn.validate()?;
        for (name, m, din, dout) in [
            ("weight_mlp", &self.weight_mlp, d, d),
            ("fuse_mlp", &self.fuse_mlp, 2 * d, d),
            ("ffn", &self.ffn, d, d),
        ] {
            m.validate()?;
            if m.input_width() != din || m.output_width() != dout {
                return Err(Error::shape(
                    "TimParams",
                    format!(
                        "{name} maps {}->{}, expected {din}->{dout}",
                        m.input_width(),
                        m.output_width()
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> TimVars {
        TimVars {
            weight_mlp: self.weight_mlp.bind(tape),
            fuse_mlp: self.fuse_mlp.bind(tape),
            attn: self.attn.bind(tape),
            ffn: self.ffn.bind(tape),
            ffn_activation: self.ffn_activation,
            ffn_residual: self.ffn_residual,
        }
    }

    pub fn tensors(&self, prefix: &str) -> Vec<(String, &Tensor2)> {
        let mut out = self.weight_mlp.tensors(&format!("{prefix}.weight_mlp"));
        out.extend(self.fuse_mlp.tensors(&format!("{prefix}.fuse_mlp")));
        out.extend(self.attn.tensors(&format!("{prefix}.attn")));
        out.extend(self.ffn.tensors(&format!("{prefix}.ffn")));
        out
    }

    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor2)> {
        let mut out = self.weight_mlp.tensors_mut(&format!("{prefix}.weight_mlp"));
        out.extend(self.fuse_mlp.tensors_mut(&format!("{prefix}.fuse_mlp")));
        out.extend(self.attn.tensors_mut(&format!("{prefix}.attn")));
        out.extend(self.ffn.tensors_mut(&format!("{prefix}.ffn")));
        out
    }
}

#[derive(Clone, Debug)]
pub struct TimVars {
    pub weight_mlp: MlpVars,
    pub fuse_mlp: MlpVars,
    pub attn: AttentionVars,
    pub ffn: MlpVars,
    pub ffn_activation: Activation,
    pub ffn_residual: bool,
}

/// Row-aligned inputs for one frame: row `i` of every matrix belongs to `ids[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackBatch {
    pub ids: Vec<u64>,
    pub o_t: Tensor2,
    pub o_prev: Tensor2,
    pub memory: Tensor2,
}

impl TrackBatch {
    pub fn new(ids: Vec<u64>, o_t: Tensor2, o_prev: Tensor2, memory: Tensor2) -> Result<Self> {
        let b = Self {
            ids,
            o_t,
            o_prev,
            memory,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn empty(d: usize) -> Self {
        Self {
            ids: Vec::new(),
            o_t: Tensor2::zeros(0, d),
            o_prev: Tensor2::zeros(0, d),
            memory: Tensor2::zeros(0, d),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ids.len();
        let d = self.o_t.cols();
        for (name, t) in [("o_t", &self.o_t), ("o_prev", &self.o_prev), ("memory", &self.memory)] {
            if t.shape() != (n, d) {
                return Err(Error::shape(
                    "TrackBatch",
                    format!("{name} is {:?}, expected {n}x{d}", t.shape()),
                ));
            }
        }
        Ok(())
    }
}

/// `W = sigmoid(MLP(O_t))` on the tape.
pub fn adaptive_weight_on(tape: &mut Tape<'_>, o_t: Var, p: &TimVars) -> Result<Var> {
    let logits = mlp2_on(tape, o_t, &p.weight_mlp, Activation::Relu)?;
    Ok(tape.sigmoid(logits))
}

/// `fuse_mlp([W * O_t, O_prev])` on the tape; `O_prev` enters unweighted.
pub fn aggregate_on(tape: &mut Tape<'_>, o_t: Var, o_prev: Var, p: &TimVars) -> Result<Var> {
    let w = adaptive_weight_on(tape, o_t, p)?;
    let weighted = tape.mul(w, o_t)?;
    let joined = tape.concat_cols(&[weighted, o_prev])?;
    mlp2_on(tape, joined, &p.fuse_mlp, Activation::Relu)
}

/// Candidate next track embeddings on the tape.
pub fn next_embedding_on(
    tape: &mut Tape<'_>,
    o_t: Var,
    o_prev: Var,
    memory: Var,
    p: &TimVars,
    variant: TimVariant,
) -> Result<Var> {
    let ffn_input = match variant {
        TimVariant::Full => {
            let agg = aggregate_on(tape, o_t, o_prev, p)?;
            let attended = mha_on(tape, agg, memory, o_t, &p.attn)?;
            tape.add(memory, attended)?
        }
        TimVariant::MemoryOff => {
            let agg = aggregate_on(tape, o_t, o_prev, p)?;
            let attended = mha_on(tape, agg, agg, o_t, &p.attn)?;
            tape.add(agg, attended)?
        }
        TimVariant::AttnOff => {
            let agg = aggregate_on(tape, o_t, o_prev, p)?;
            tape.add(memory, agg)?
        }
        TimVariant::Naive => o_t,
    };
    let out = mlp2_on(tape, ffn_input, &p.ffn, p.ffn_activation)?;
    if p.ffn_residual {
        tape.add(ffn_input, out)
    } else {
        Ok(out)
    }
}

pub fn adaptive_weight(o_t: &Tensor2, p: &TimParams) -> Result<Tensor2> {
    p.validate()?;
    check_width(o_t, p.width(), "adaptive_weight")?;
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape);
    let o = tape.param(o_t);
    let w = adaptive_weight_on(&mut tape, o, &vars)?;
    Ok(tape.value(w).clone())
}

pub fn aggregate(o_t: &Tensor2, o_prev: &Tensor2, p: &TimParams) -> Result<Tensor2> {
    p.validate()?;
    check_width(o_t, p.width(), "aggregate")?;
    if o_t.shape() != o_prev.shape() {
        return Err(Error::shape(
            "aggregate",
            format!("o_t {:?} vs o_prev {:?}", o_t.shape(), o_prev.shape()),
        ));
    }
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape);
    let (a, b) = (tape.param(o_t), tape.param(o_prev));
    let out = aggregate_on(&mut tape, a, b, &vars)?;
    Ok(tape.value(out).clone())
}

/// Next embeddings and memories for every track in the batch. Nothing is
/// committed here; the caller applies the confidence gate.
pub fn tim_forward(batch: &TrackBatch, p: &TimParams, mem: &MemoryConfig) -> Result<(Tensor2, Tensor2)> {
    tim_forward_variant(batch, p, mem, TimVariant::Full)
}

pub fn tim_forward_variant(
    batch: &TrackBatch,
    p: &TimParams,
    mem: &MemoryConfig,
    variant: TimVariant,
) -> Result<(Tensor2, Tensor2)> {
    batch.validate()?;
    let d = p.width();
    if batch.is_empty() {
        return Ok((Tensor2::zeros(0, d), Tensor2::zeros(0, d)));
    }
    check_width(&batch.o_t, d, "tim_forward")?;
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape);
    let o_t = tape.param(&batch.o_t);
    let o_prev = tape.param(&batch.o_prev);
    let memory = tape.param(&batch.memory);
    let e = next_embedding_on(&mut tape, o_t, o_prev, memory, &vars, variant)?;
    let next_e = tape.value(e).clone();
    next_e.ensure_finite("tim_forward")?;
    let next_m = ema_rows(&batch.memory, &batch.o_t, mem.lambda)?;
    Ok((next_e, next_m))
}

/// Row-wise memory update.
pub fn ema_rows(memory: &Tensor2, output: &Tensor2, lambda: f64) -> Result<Tensor2> {
    if memory.shape() != output.shape() {
        return Err(Error::shape(
            "ema_rows",
            format!("{:?} vs {:?}", memory.shape(), output.shape()),
        ));
    }
    let data = memory
        .data()
        .iter()
        .zip(output.data())
        .map(|(m, o)| ema_scalar(*m, *o, lambda))
        .collect();
    Tensor2::new(memory.rows(), memory.cols(), data)
}

fn check_width(t: &Tensor2, d: usize, op: &'static str) -> Result<()> {
    if t.cols() != d && !(t.rows() == 0 && t.cols() == 0) {
        return Err(Error::shape(op, format!("width {} vs model width {d}", t.cols())));
    }
    Ok(())
}
