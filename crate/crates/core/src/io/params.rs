//! Parameter snapshots: named f64 tensors.
//!
//! ```text
//! "MEMOPAR1" | count: u32 | count x (name_len: u32, name, rows: u32, cols: u32, rows*cols f64)
//! ```
//!
//! Names are the model tensor names plus `queries.embedding` and `queries.anchor`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::decoder::DetectQuery;
use crate::error::{Error, Result};
use crate::lifecycle::Model;
use crate::linalg::Tensor2;

pub const MAGIC: &[u8; 8] = b"MEMOPAR1";

const QUERY_EMBEDDING: &str = "queries.embedding";
const QUERY_ANCHOR: &str = "queries.anchor";

fn query_tensors(model: &Model) -> (Tensor2, Tensor2) {
    let d = model.width();
    let mut emb = Vec::with_capacity(model.queries.len() * d);
    let mut anchors = Vec::with_capacity(model.queries.len() * 2);
    for q in &model.queries {
        emb.extend_from_slice(&q.embedding);
        anchors.extend([q.anchor.0, q.anchor.1]);
    }
    let n = model.queries.len();
    (
        Tensor2::new(n, d, emb).expect("query widths match the model"),
        Tensor2::new(n, 2, anchors).expect("two anchor coordinates"),
    )
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let (emb, anchors) = query_tensors(model);
    let mut tensors = model.tensors();
    tensors.push((QUERY_EMBEDDING.to_string(), &emb));
    tensors.push((QUERY_ANCHOR.to_string(), &anchors));
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = *at + n;
    if end > bytes.len() {
        return Err(Error::Length {
            expected: end,
            found: bytes.len(),
        });
    }
    let s = &bytes[*at..end];
    *at = end;
    Ok(s)
}

fn u32_at(bytes: &[u8], at: &mut usize) -> Result<usize> {
    Ok(u32::from_le_bytes(take(bytes, at, 4)?.try_into().expect("4 bytes")) as usize)
}

pub fn parse(bytes: &[u8]) -> Result<BTreeMap<String, Tensor2>> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(Error::Format("missing MEMOPAR1 magic".into()));
    }
    let mut at = 8;
    let count = u32_at(bytes, &mut at)?;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let len = u32_at(bytes, &mut at)?;
        let name = std::str::from_utf8(take(bytes, &mut at, len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rows = u32_at(bytes, &mut at)?;
        let cols = u32_at(bytes, &mut at)?;
        let data: Vec<f64> = take(bytes, &mut at, 8 * rows * cols)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if out.insert(name.clone(), Tensor2::new(rows, cols, data)?).is_some() {
            return Err(Error::Format(format!("tensor '{name}' stored twice")));
        }
    }
    if at != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - at)));
    }
    Ok(out)
}

/// Overwrites every tensor of `model` from a snapshot with exactly matching
/// names and shapes. The detect queries are replaced wholesale, so their count
/// may differ from the skeleton's.
pub fn load_into(model: &mut Model, bytes: &[u8]) -> Result<()> {
    let mut stored = parse(bytes)?;
    let d = model.width();
    let emb = stored
        .remove(QUERY_EMBEDDING)
        .ok_or_else(|| Error::Format(format!("snapshot lacks tensor '{QUERY_EMBEDDING}'")))?;
    let anchors = stored
        .remove(QUERY_ANCHOR)
        .ok_or_else(|| Error::Format(format!("snapshot lacks tensor '{QUERY_ANCHOR}'")))?;
    if emb.cols() != d || anchors.cols() != 2 || anchors.rows() != emb.rows() {
        return Err(Error::Format(format!(
            "query tensors are {:?} and {:?}, model width {d}",
            emb.shape(),
            anchors.shape()
        )));
    }
    emb.ensure_finite(QUERY_EMBEDDING)?;
    anchors.ensure_finite(QUERY_ANCHOR)?;
    let queries = (0..emb.rows())
        .map(|i| DetectQuery {
            embedding: emb.row(i).to_vec(),
            anchor: (anchors.get(i, 0), anchors.get(i, 1)),
        })
        .collect();
    for (name, slot) in model.tensors_mut() {
        let t = stored
            .remove(&name)
            .ok_or_else(|| Error::Format(format!("snapshot lacks tensor '{name}'")))?;
        if t.shape() != slot.shape() {
            return Err(Error::Format(format!(
                "tensor '{name}' is {:?}, model expects {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        t.ensure_finite(&name)?;
        *slot = t;
    }
    if let Some(name) = stored.keys().next() {
        return Err(Error::Format(format!("snapshot holds unknown tensor '{name}'")));
    }
    model.queries = queries;
    Ok(())
}

pub fn write(path: &Path, model: &Model) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn read_into(path: &Path, model: &mut Model) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_into(model, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Layout;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Model::random(&mut rng, Layout::new(32).unwrap(), 4, 4)
    }

    #[test]
    fn round_trip() {
        let a = random_model(1);
        let mut b = random_model(2);
        assert_ne!(a, b);
        load_into(&mut b, &to_bytes(&a)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_mismatches() {
        let a = random_model(1);
        let bytes = to_bytes(&a);
        let mut b = random_model(2);
        assert!(matches!(load_into(&mut b, &bytes[..bytes.len() - 1]), Err(Error::Length { .. })));
        assert!(matches!(load_into(&mut b, b"MEMOPAR2"), Err(Error::Format(_))));
        let mut small = Model::random(&mut ChaCha8Rng::seed_from_u64(3), Layout::new(24).unwrap(), 4, 4);
        assert!(matches!(load_into(&mut small, &bytes), Err(Error::Format(_))));
    }
}
