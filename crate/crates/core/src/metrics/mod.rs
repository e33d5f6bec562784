//! Multi-object tracking metrics: CLEAR-MOT, identity scores and HOTA.

mod clear;
mod hota;
pub mod hungarian;
mod identity;
mod report;

use std::collections::{BTreeMap, BTreeSet};

pub use clear::{clear_mot, ClearMot};
pub use hota::{hota, HotaAlpha, HotaResult, ALPHAS};
pub use hungarian::{hungarian, max_weight_matching};
pub use identity::{identity, Identity};
pub use report::{evaluate, Report, REPORT_VERSION};

use crate::decoder::BoundingBox;
use crate::error::{Error, Result};
use crate::io::mot::MotRow;
use crate::lifecycle::FrameResult;
use crate::scenario::Scenario;

/// IoU at which CLEAR-MOT and identity metrics accept a match.
pub const MATCH_IOU: f64 = 0.5;

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}

/// `gt x pred` IoU matrix.
pub fn iou_matrix(gt: &[(u64, BoundingBox)], pred: &[(u64, BoundingBox)]) -> Vec<Vec<f64>> {
    gt.iter()
        .map(|(_, g)| pred.iter().map(|(_, p)| g.iou(p)).collect())
        .collect()
}

/// Boxes per frame, keyed by frame number.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sequence {
    pub frames: BTreeMap<u32, Vec<(u64, BoundingBox)>>,
}

impl Sequence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a box; an id may appear once per frame.
    pub fn push(&mut self, frame: u32, id: u64, bbox: BoundingBox) -> Result<()> {
        let list = self.frames.entry(frame).or_default();
        if list.iter().any(|(i, _)| *i == id) {
            return Err(Error::Validation(format!("id {id} appears twice in frame {frame}")));
        }
        list.push((id, bbox));
        Ok(())
    }

    pub fn from_rows(rows: &[MotRow]) -> Result<Self> {
        let mut s = Self::new();
        for r in rows {
            s.push(r.frame, r.id, r.bbox())?;
        }
        Ok(s)
    }

    pub fn from_results(results: &[FrameResult]) -> Self {
        let mut s = Self::new();
        for r in results {
            let list = s.frames.entry(r.t).or_default();
            list.extend(r.tracks.iter().map(|t| (t.id, t.bbox)));
        }
        s
    }

    /// Visible ground truth of a scenario.
    pub fn from_truth(scenario: &Scenario) -> Self {
        let mut s = Self::new();
        for (t, objs) in scenario.truth.iter().enumerate() {
            let list = s.frames.entry(t as u32 + 1).or_default();
            list.extend(objs.iter().filter(|o| o.visible).map(|o| (o.id, o.bbox)));
        }
        s
    }

    pub fn get(&self, frame: u32) -> &[(u64, BoundingBox)] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    /// First and last frame holding at least one box.
    pub fn frame_range(&self) -> Option<(u32, u32)> {
        let mut it = self.frames.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| *k);
        let first = it.next()?;
        Some((first, it.next_back().unwrap_or(first)))
    }

    pub fn restrict(&self, lo: u32, hi: u32) -> Self {
        Self {
            frames: self.frames.range(lo..=hi).map(|(k, v)| (*k, v.clone())).collect(),
        }
    }

    pub fn detections(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.frames.values().flatten().map(|(i, _)| *i).collect()
    }

    pub fn to_rows(&self, conf: f64) -> Vec<MotRow> {
        let mut rows = Vec::with_capacity(self.detections());
        for (t, list) in &self.frames {
            for (id, b) in list {
                rows.push(MotRow {
                    frame: *t,
                    id: *id,
                    left: b.left(),
                    top: b.top(),
                    width: b.w,
                    height: b.h,
                    conf,
                });
            }
        }
        rows
    }
}

/// Frames present in either sequence, ascending.
pub(crate) fn frame_union(gt: &Sequence, pred: &Sequence) -> Vec<u32> {
    let set: BTreeSet<u32> = gt.frames.keys().chain(pred.frames.keys()).copied().collect();
    set.into_iter().collect()
}

/// `num / den`, or `empty` when the denominator vanishes.
pub(crate) fn ratio(num: f64, den: f64, empty: f64) -> f64 {
    if den == 0.0 {
        empty
    } else {
        num / den
    }
}
