use std::collections::BTreeMap;

use super::{frame_union, iou_matrix, max_weight_matching, ratio, Sequence};
use crate::error::Result;

/// Localization thresholds 0.05, 0.10, ..., 0.95.
pub const ALPHAS: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HotaAlpha {
    pub alpha: f64,
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HotaResult {
    /// Means over the thresholds.
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub per_alpha: Vec<HotaAlpha>,
}

/// Dense ids for both sides so counts live in plain matrices.
struct Index {
    gt: BTreeMap<u64, usize>,
    pred: BTreeMap<u64, usize>,
}

impl Index {
    fn new(gt: &Sequence, pred: &Sequence) -> Self {
        let dense = |s: &Sequence| s.ids().into_iter().enumerate().map(|(i, id)| (id, i)).collect();
        Self {
            gt: dense(gt),
            pred: dense(pred),
        }
    }
}

/// Global alignment score between every ground-truth and predicted id.
///
/// Each frame spreads a soft co-occurrence `s / (row_sum + col_sum - s)` over
/// the IoU matrix `s`; the score is `soft / (gt_count + pred_count - soft)`.
fn alignment(gt: &Sequence, pred: &Sequence, idx: &Index) -> Vec<Vec<f64>> {
    let (ng, np) = (idx.gt.len(), idx.pred.len());
    let mut soft = vec![vec![0.0; np]; ng];
    let mut gt_count = vec![0.0; ng];
    let mut pred_count = vec![0.0; np];
    for t in frame_union(gt, pred) {
        let g = gt.get(t);
        let p = pred.get(t);
        let sim = iou_matrix(g, p);
        let row_sum: Vec<f64> = sim.iter().map(|r| r.iter().sum()).collect();
        let col_sum: Vec<f64> = (0..p.len()).map(|j| sim.iter().map(|r| r[j]).sum()).collect();
        for (i, (gid, _)) in g.iter().enumerate() {
            gt_count[idx.gt[gid]] += 1.0;
            for (j, (pid, _)) in p.iter().enumerate() {
                let den = row_sum[i] + col_sum[j] - sim[i][j];
                if den > 0.0 {
                    soft[idx.gt[gid]][idx.pred[pid]] += sim[i][j] / den;
                }
            }
        }
        for (pid, _) in p {
            pred_count[idx.pred[pid]] += 1.0;
        }
    }
    (0..ng)
        .map(|a| {
            (0..np)
                .map(|b| ratio(soft[a][b], gt_count[a] + pred_count[b] - soft[a][b], 0.0))
                .collect()
        })
        .collect()
}

/// HOTA, DetA and AssA averaged over [`ALPHAS`].
///
/// For each threshold the per-frame matching admits pairs with IoU >= alpha,
/// maximizes the number of matches first and then the sum of
/// `alignment * IoU`. Empty inputs score 1.
pub fn hota(gt: &Sequence, pred: &Sequence) -> Result<HotaResult> {
    let idx = Index::new(gt, pred);
    let align = alignment(gt, pred, &idx);
    let (ng, np) = (idx.gt.len(), idx.pred.len());
    let mut gt_count = vec![0usize; ng];
    let mut pred_count = vec![0usize; np];
    for list in gt.frames.values() {
        for (id, _) in list {
            gt_count[idx.gt[id]] += 1;
        }
    }
    for list in pred.frames.values() {
        for (id, _) in list {
            pred_count[idx.pred[id]] += 1;
        }
    }
    let frames = frame_union(gt, pred);
    let sims: Vec<Vec<Vec<f64>>> = frames.iter().map(|&t| iou_matrix(gt.get(t), pred.get(t))).collect();
    let (num_gt, num_pred) = (gt.detections(), pred.detections());

    let mut per_alpha = Vec::with_capacity(ALPHAS.len());
    for &alpha in &ALPHAS {
        let mut matches = vec![vec![0usize; np]; ng];
        let mut tp = 0usize;
        for (fi, &t) in frames.iter().enumerate() {
            let g = gt.get(t);
            let p = pred.get(t);
            let sim = &sims[fi];
            let big = (g.len().min(p.len()) + 1) as f64;
            let weights: Vec<Vec<Option<f64>>> = g
                .iter()
                .enumerate()
                .map(|(i, (gid, _))| {
                    p.iter()
                        .enumerate()
                        .map(|(j, (pid, _))| {
                            (sim[i][j] >= alpha).then(|| big + align[idx.gt[gid]][idx.pred[pid]] * sim[i][j])
                        })
                        .collect()
                })
                .collect();
            for (i, j) in max_weight_matching(&weights)? {
                matches[idx.gt[&g[i].0]][idx.pred[&p[j].0]] += 1;
                tp += 1;
            }
        }
        let fn_ = num_gt - tp;
        let fp = num_pred - tp;
        let det_a = ratio(tp as f64, (tp + fn_ + fp) as f64, 1.0);
        let mut ass_sum = 0.0;
        for a in 0..ng {
            for b in 0..np {
                let m = matches[a][b];
                if m > 0 {
                    let m = m as f64;
                    ass_sum += m * m / (gt_count[a] as f64 + pred_count[b] as f64 - m);
                }
            }
        }
        let ass_a = ratio(ass_sum, tp as f64, if fn_ + fp == 0 { 1.0 } else { 0.0 });
        per_alpha.push(HotaAlpha {
            alpha,
            hota: (det_a * ass_a).sqrt(),
            det_a,
            ass_a,
            tp,
            fp,
            fn_,
        });
    }
    let mean = |f: fn(&HotaAlpha) -> f64| per_alpha.iter().map(f).sum::<f64>() / per_alpha.len() as f64;
    Ok(HotaResult {
        hota: mean(|a| a.hota),
        det_a: mean(|a| a.det_a),
        ass_a: mean(|a| a.ass_a),
        per_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::BoundingBox;

    #[test]
    fn perfect_is_one() {
        let mut s = Sequence::new();
        for t in 1..=6 {
            s.push(t, 1, BoundingBox::new(0.1 * t as f64, 0.5, 0.1, 0.2)).unwrap();
            s.push(t, 4, BoundingBox::new(0.5, 0.1 * t as f64, 0.2, 0.1)).unwrap();
        }
        let r = hota(&s, &s).unwrap();
        assert_eq!((r.hota, r.det_a, r.ass_a), (1.0, 1.0, 1.0));
    }

    #[test]
    fn swap_halves_association() {
        let mut gt = Sequence::new();
        let mut pred = Sequence::new();
        let (a, c) = (BoundingBox::new(0.2, 0.5, 0.1, 0.1), BoundingBox::new(0.7, 0.5, 0.1, 0.1));
        for t in 1..=10 {
            gt.push(t, 1, a).unwrap();
            gt.push(t, 2, c).unwrap();
            let (x, y) = if t <= 5 { (1, 2) } else { (2, 1) };
            pred.push(t, x, a).unwrap();
            pred.push(t, y, c).unwrap();
        }
        let r = hota(&gt, &pred).unwrap();
        // every gt id shares 5 of its 10 frames with each prediction: 5 / (10 + 10 - 5)
        assert!((r.ass_a - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.det_a, 1.0);
    }

    #[test]
    fn empty_is_one() {
        let e = Sequence::new();
        assert_eq!(hota(&e, &e).unwrap().hota, 1.0);
    }
}
