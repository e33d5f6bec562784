//! Channel layout of token and query embeddings, and the sinusoidal 2D
//! positional encoding shared by the generator and the decoder.
//!
//! For model width `d` the channels are laid out as
//!
//! | range            | content                                   |
//! |------------------|-------------------------------------------|
//! | `0..d/2`         | identity signature                        |
//! | `pos`            | positional code, `4 * freqs` channels      |
//! | `bbox` (4)       | box logits `(cx, cy, w, h)`               |
//! | `obj` (1)        | objectness (1 for targets, 0 for clutter) |
//! | `bias` (1)       | constant 1 on queries, 0 on tokens        |
//! | `aux` (rest)     | scratch channels for projections          |

use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{Error, Result};

/// Smallest width with room for every block.
pub const MIN_WIDTH: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub d: usize,
    pub sig: Range<usize>,
    pub pos: Range<usize>,
    pub bbox: Range<usize>,
    pub obj: usize,
    pub bias: usize,
    pub aux: Range<usize>,
    /// Per-axis frequency amplitudes of the positional code.
    amplitudes: Vec<f64>,
}

/// Spread of the Gaussian frequency envelope; sets the positional kernel width.
const ENVELOPE: f64 = 0.45;

impl Layout {
    pub fn new(d: usize) -> Result<Self> {
        if d < MIN_WIDTH || !d.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "model width {d} must be even and at least {MIN_WIDTH}"
            )));
        }
        let sig = 0..d / 2;
        let rest = d - d / 2;
        let freqs = (rest - 8) / 4;
        let pos = sig.end..sig.end + 4 * freqs;
        let bbox = pos.end..pos.end + 4;
        let obj = bbox.end;
        let bias = obj + 1;
        let aux = bias + 1..d;
        let raw: Vec<f64> = (1..=freqs)
            .map(|k| (-(k as f64 * ENVELOPE).powi(2) / 2.0).exp())
            .collect();
        // both axes together give kernel(0) = 1
        let norm: f64 = 2.0 * raw.iter().sum::<f64>();
        let amplitudes = raw.iter().map(|w| (w / norm).sqrt()).collect();
        Ok(Self {
            d,
            sig,
            pos,
            bbox,
            obj,
            bias,
            aux,
            amplitudes,
        })
    }

    pub fn sig_width(&self) -> usize {
        self.sig.len()
    }

    pub fn freqs(&self) -> usize {
        self.amplitudes.len()
    }

    /// Writes the positional code of `(x, y)` into `out[self.pos]`.
    pub fn encode_position(&self, x: f64, y: f64, out: &mut [f64]) {
        let base = self.pos.start;
        for (axis, u) in [x, y].into_iter().enumerate() {
            for (k, a) in self.amplitudes.iter().enumerate() {
                let w = PI * (k + 1) as f64 * u;
                let at = base + axis * 2 * self.freqs() + 2 * k;
                out[at] = a * w.sin();
                out[at + 1] = a * w.cos();
            }
        }
    }

    /// Full-width vector holding only the positional code.
    pub fn position_vector(&self, x: f64, y: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.d];
        self.encode_position(x, y, &mut v);
        v
    }

    /// Inner product of two positional codes; 1 at zero offset.
    pub fn kernel(&self, dx: f64, dy: f64) -> f64 {
        [dx, dy]
            .into_iter()
            .map(|delta| {
                self.amplitudes
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * a * (PI * (k + 1) as f64 * delta).cos())
                    .sum::<f64>()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_fit_default_width() {
        let l = Layout::new(64).unwrap();
        assert_eq!(l.sig, 0..32);
        assert_eq!(l.pos, 32..56);
        assert_eq!(l.bbox, 56..60);
        assert_eq!((l.obj, l.bias), (60, 61));
        assert_eq!(l.aux, 62..64);
        assert!(Layout::new(20).is_err());
        assert!(Layout::new(33).is_err());
    }

    #[test]
    fn code_inner_product_is_the_kernel() {
        let l = Layout::new(64).unwrap();
        let a = l.position_vector(0.3, 0.7);
        let b = l.position_vector(0.45, 0.6);
        let dot: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
        assert!((dot - l.kernel(0.3 - 0.45, 0.7 - 0.6)).abs() < 1e-12);
        assert!((l.kernel(0.0, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_decreases_with_distance() {
        let l = Layout::new(64).unwrap();
        let mut last = l.kernel(0.0, 0.0);
        for i in 1..=40 {
            let k = l.kernel(i as f64 * 0.01, 0.0);
            assert!(k < last);
            last = k;
        }
    }
}
