//! MOT-challenge text rows: `frame,id,left,top,width,height,conf,-1,-1,-1`.

use std::fmt::Write as _;
use std::path::Path;

use crate::decoder::BoundingBox;
use crate::error::{Error, Result};

/// Frame size in pixels, used to convert between pixel and unit coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameSize {
    pub width: f64,
    pub height: f64,
}

impl Default for FrameSize {
    fn default() -> Self {
        Self {
            width: 1920.0,
            height: 1080.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotRow {
    pub frame: u32,
    pub id: u64,
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub conf: f64,
}

impl MotRow {
    pub fn from_normalized(frame: u32, id: u64, b: &BoundingBox, conf: f64, size: FrameSize) -> Self {
        Self {
            frame,
            id,
            left: b.left() * size.width,
            top: b.top() * size.height,
            width: b.w * size.width,
            height: b.h * size.height,
            conf,
        }
    }

    pub fn to_normalized(&self, size: FrameSize) -> BoundingBox {
        BoundingBox::from_ltwh(
            self.left / size.width,
            self.top / size.height,
            self.width / size.width,
            self.height / size.height,
        )
    }

    /// Pixel-space box.
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_ltwh(self.left, self.top, self.width, self.height)
    }

    pub fn write_to(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},-1,-1,-1",
            self.frame, self.id, self.left, self.top, self.width, self.height, self.conf
        );
    }
}

pub fn format_rows(rows: &[MotRow]) -> String {
    let mut s = String::with_capacity(rows.len() * 64);
    for r in rows {
        r.write_to(&mut s);
    }
    s
}

fn field<T: std::str::FromStr>(parts: &[&str], i: usize, name: &str, line: usize) -> Result<T> {
    parts[i].trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name} '{}'", parts[i].trim()),
    })
}

/// Parses rows; blank lines are skipped. Lines need 7 to 10 fields.
pub fn parse_rows(text: &str) -> Result<Vec<MotRow>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = raw.split(',').collect();
        if !(7..=10).contains(&parts.len()) {
            return Err(Error::Parse {
                line,
                msg: format!("expected 7 to 10 fields, found {}", parts.len()),
            });
        }
        let frame: i64 = field(&parts, 0, "frame", line)?;
        let id: i64 = field(&parts, 1, "id", line)?;
        let vals: Vec<f64> = (2..7)
            .map(|k| field::<f64>(&parts, k, ["left", "top", "width", "height", "conf"][k - 2], line))
            .collect::<Result<_>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                msg: "non-finite value".into(),
            });
        }
        if frame < 1 {
            return Err(Error::Validation(format!("line {line}: frame {frame} must be at least 1")));
        }
        if id < 0 {
            return Err(Error::Validation(format!("line {line}: negative id {id}")));
        }
        if vals[2] < 0.0 || vals[3] < 0.0 {
            return Err(Error::Validation(format!("line {line}: negative box size")));
        }
        rows.push(MotRow {
            frame: u32::try_from(frame).map_err(|_| Error::Validation(format!("line {line}: frame too large")))?,
            id: id as u64,
            left: vals[0],
            top: vals[1],
            width: vals[2],
            height: vals[3],
            conf: vals[4],
        });
    }
    Ok(rows)
}

pub fn read_rows(path: &Path) -> Result<Vec<MotRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rows(&text)
}

pub fn write_rows(path: &Path, rows: &[MotRow]) -> Result<()> {
    std::fs::write(path, format_rows(rows)).map_err(|e| Error::io(path, e))
}
