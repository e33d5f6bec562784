use std::collections::HashMap;

use super::{frame_union, iou_matrix, max_weight_matching, ratio, Sequence, MATCH_IOU};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClearMot {
    pub mota: f64,
    pub motp: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub num_gt: usize,
    pub num_pred: usize,
}

/// CLEAR-MOT with carry-over matching.
///
/// Per frame, pairs with IoU >= 0.5 are eligible. The matching keeps as many
/// pairs continued from the previous frame as possible, then maximizes the
/// number of matches, then the summed IoU. An identity switch is counted when
/// a ground-truth id is matched to a different prediction than at its last
/// match. MOTA is `1 - (FN + FP + IDSW) / GT` and may be negative; with no
/// ground truth it is 1 without false positives and 0 otherwise.
pub fn clear_mot(gt: &Sequence, pred: &Sequence) -> Result<ClearMot> {
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut prev_step: HashMap<u64, u64> = HashMap::new();
    let (mut tp, mut idsw, mut iou_sum) = (0usize, 0usize, 0.0);
    for t in frame_union(gt, pred) {
        let g = gt.get(t);
        let p = pred.get(t);
        let sim = iou_matrix(g, p);
        let big = (g.len().min(p.len()) + 2) as f64;
        let weights: Vec<Vec<Option<f64>>> = g
            .iter()
            .enumerate()
            .map(|(i, (gid, _))| {
                p.iter()
                    .enumerate()
                    .map(|(j, (pid, _))| {
                        (sim[i][j] >= MATCH_IOU).then(|| {
                            let cont = if prev_step.get(gid) == Some(pid) { 1.0 } else { 0.0 };
                            cont * big * big + big + sim[i][j]
                        })
                    })
                    .collect()
            })
            .collect();
        let pairs = max_weight_matching(&weights)?;
        prev_step.clear();
        for (i, j) in pairs {
            let (gid, pid) = (g[i].0, p[j].0);
            if last.get(&gid).is_some_and(|&l| l != pid) {
                idsw += 1;
            }
            last.insert(gid, pid);
            prev_step.insert(gid, pid);
            tp += 1;
            iou_sum += sim[i][j];
        }
    }
    let num_gt = gt.detections();
    let num_pred = pred.detections();
    let fn_ = num_gt - tp;
    let fp = num_pred - tp;
    let mota = if num_gt == 0 {
        if fp == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - (fn_ + fp + idsw) as f64 / num_gt as f64
    };
    let motp = ratio(iou_sum, tp as f64, if num_gt + num_pred == 0 { 1.0 } else { 0.0 });
    Ok(ClearMot {
        mota,
        motp,
        tp,
        fp,
        fn_,
        idsw,
        num_gt,
        num_pred,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::BoundingBox;

    fn b(x: f64) -> BoundingBox {
        BoundingBox::new(x, 0.5, 0.1, 0.1)
    }

    #[test]
    fn full_swap_is_two_switches() {
        let mut gt = Sequence::new();
        let mut pred = Sequence::new();
        for t in 1..=10 {
            gt.push(t, 1, b(0.2)).unwrap();
            gt.push(t, 2, b(0.7)).unwrap();
            let (a, c) = if t <= 5 { (1, 2) } else { (2, 1) };
            pred.push(t, a, b(0.2)).unwrap();
            pred.push(t, c, b(0.7)).unwrap();
        }
        let r = clear_mot(&gt, &pred).unwrap();
        assert_eq!(r.idsw, 2);
        assert_eq!((r.tp, r.fp, r.fn_), (20, 0, 0));
        assert!((r.mota - 0.9).abs() < 1e-15);
    }

    #[test]
    fn one_extra_false_positive() {
        let mut gt = Sequence::new();
        let mut pred = Sequence::new();
        for t in 1..=10 {
            gt.push(t, 1, b(0.3)).unwrap();
            pred.push(t, 1, b(0.3)).unwrap();
        }
        pred.push(4, 9, b(0.8)).unwrap();
        let r = clear_mot(&gt, &pred).unwrap();
        assert_eq!(r.fp, 1);
        assert!((r.mota - 0.9).abs() < 1e-15);
        assert_eq!(r.motp, 1.0);
    }

    #[test]
    fn continuation_beats_better_overlap() {
        let mut gt = Sequence::new();
        let mut pred = Sequence::new();
        gt.push(1, 1, b(0.5)).unwrap();
        pred.push(1, 7, b(0.5)).unwrap();
        gt.push(2, 1, b(0.5)).unwrap();
        pred.push(2, 7, b(0.51)).unwrap();
        pred.push(2, 8, b(0.5)).unwrap();
        let r = clear_mot(&gt, &pred).unwrap();
        assert_eq!(r.idsw, 0);
        assert_eq!(r.fp, 1);
    }

    #[test]
    fn empty_conventions() {
        let e = Sequence::new();
        let r = clear_mot(&e, &e).unwrap();
        assert_eq!((r.mota, r.motp), (1.0, 1.0));
        let mut p = Sequence::new();
        p.push(1, 1, b(0.5)).unwrap();
        assert_eq!(clear_mot(&e, &p).unwrap().mota, 0.0);
    }
}
