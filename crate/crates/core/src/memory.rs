//! Per-track long-term memory: an exponential moving average of output
//! embeddings, committed only on confident frames.

use crate::error::{Error, Result};

/// Default memory update rate.
pub const DEFAULT_LAMBDA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemoryConfig {
    pub lambda: f64,
}

impl MemoryConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self { lambda })
    }
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LongTermMemory {
    value: Vec<f64>,
    initialized: bool,
}

impl LongTermMemory {
    /// A memory slot that has not seen any output yet.
    pub fn uninitialized(width: usize) -> Self {
        Self {
            value: vec![0.0; width],
            initialized: false,
        }
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }
}

/// Starts a memory from the first output embedding of a newborn track.
pub fn init_memory(output: &[f64]) -> Result<LongTermMemory> {
    if output.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite output embedding".into()));
    }
    Ok(LongTermMemory {
        value: output.to_vec(),
        initialized: true,
    })
}

/// `(1 - lambda) * m + lambda * o`, returned as a new memory.
pub fn ema_update(m: &LongTermMemory, output: &[f64], cfg: &MemoryConfig) -> Result<LongTermMemory> {
    if !m.initialized {
        return Err(Error::State("ema_update on uninitialized memory".into()));
    }
    if output.len() != m.value.len() {
        return Err(Error::shape(
            "ema_update",
            format!("memory width {} vs output {}", m.value.len(), output.len()),
        ));
    }
    let lambda = cfg.lambda;
    let value = m
        .value
        .iter()
        .zip(output)
        .map(|(mv, ov)| ema_scalar(*mv, *ov, lambda))
        .collect();
    Ok(LongTermMemory {
        value,
        initialized: true,
    })
}

/// Scalar EMA step. `lambda = 1` returns `o` exactly and `lambda = 0` returns `m`.
#[inline]
pub fn ema_scalar(m: f64, o: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * m + lambda * o
}

/// Keeps the old `(embedding, memory)` pair unless `confidence > tau_next`.
pub fn commit_gate<E>(
    old_e: E,
    old_m: LongTermMemory,
    new_e: E,
    new_m: LongTermMemory,
    confidence: f64,
    tau_next: f64,
) -> (E, LongTermMemory) {
    if confidence > tau_next {
        (new_e, new_m)
    } else {
        (old_e, old_m)
    }
}
