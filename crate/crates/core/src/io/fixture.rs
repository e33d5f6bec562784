//! Binary frame fixtures.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "MEMOFIX1" | d: u32 | frames: u32 | frames x (t: u32, count: u32)
//! | per frame: count*d f32 tokens, then count*2 f32 positions
//! ```

use std::path::Path;

use crate::decoder::FrameFeatures;
use crate::error::{Error, Result};
use crate::linalg::Tensor2;

pub const MAGIC: &[u8; 8] = b"MEMOFIX1";

#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub d: usize,
    pub frames: Vec<FrameFeatures>,
}

impl Fixture {
    pub fn new(d: usize, frames: Vec<FrameFeatures>) -> Result<Self> {
        for f in &frames {
            if !f.is_empty() && f.tokens.cols() != d {
                return Err(Error::shape("Fixture", format!("frame {} has width {}", f.t, f.tokens.cols())));
            }
        }
        Ok(Self { d, frames })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for f in &self.frames {
            out.extend_from_slice(&f.t.to_le_bytes());
            out.extend_from_slice(&(f.len() as u32).to_le_bytes());
        }
        for f in &self.frames {
            for v in f.tokens.data().iter().chain(f.positions.data()) {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(Error::Format("missing MEMOFIX1 magic".into()));
        }
        let mut r = Reader { bytes, at: 8 };
        let d = r.u32()? as usize;
        let n = r.u32()? as usize;
        let mut heads = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            heads.push((r.u32()?, r.u32()? as usize));
        }
        let floats: usize = heads.iter().map(|(_, c)| c * (d + 2)).sum();
        let expected = r.at + 4 * floats;
        if bytes.len() < expected {
            return Err(Error::Length {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - expected)));
        }
        let mut frames = Vec::with_capacity(n);
        for (t, count) in heads {
            let tokens = Tensor2::new(count, d, r.f32s(count * d)?)?;
            let positions = Tensor2::new(count, 2, r.f32s(count * 2)?)?;
            frames.push(FrameFeatures::new(t, tokens, positions).map_err(|e| Error::Format(e.to_string()))?);
        }
        Ok(Self { d, frames })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.at + n;
        if end > self.bytes.len() {
            return Err(Error::Length {
                expected: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, ScenarioConfig, ScenarioKind};

    fn sample() -> Fixture {
        let s = generate(&ScenarioConfig::new(ScenarioKind::Dance, 4, 12, 7)).unwrap();
        Fixture::new(64, s.frames).unwrap()
    }

    #[test]
    fn bitwise_round_trip() {
        let f = sample();
        let bytes = f.to_bytes();
        let back = Fixture::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        for (a, b) in f.frames.iter().zip(&back.frames) {
            assert_eq!(a.t, b.t);
            let same = a.tokens.data().iter().zip(b.tokens.data()).all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same);
            assert_eq!(a.positions, b.positions);
        }
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = sample().to_bytes();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(Fixture::from_bytes(&wrong), Err(Error::Format(_))));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(Fixture::from_bytes(&bytes), Err(Error::Length { .. })));
        assert!(matches!(Fixture::from_bytes(&bytes[..14]), Err(Error::Length { .. })));
    }

    #[test]
    fn empty_fixture() {
        let f = Fixture::new(64, Vec::new()).unwrap();
        assert_eq!(Fixture::from_bytes(&f.to_bytes()).unwrap(), f);
    }
}
