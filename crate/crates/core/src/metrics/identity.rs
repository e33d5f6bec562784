use std::collections::BTreeMap;

use super::{frame_union, iou_matrix, max_weight_matching, ratio, Sequence, MATCH_IOU};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Identity {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// Identity scores from a single global matching of ground-truth to predicted
/// trajectories that maximizes the number of frames where a matched pair
/// overlaps with IoU >= 0.5. Empty inputs score 1.
pub fn identity(gt: &Sequence, pred: &Sequence) -> Result<Identity> {
    let gt_ids: Vec<u64> = gt.ids().into_iter().collect();
    let pred_ids: Vec<u64> = pred.ids().into_iter().collect();
    let gi: BTreeMap<u64, usize> = gt_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let pi: BTreeMap<u64, usize> = pred_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut overlap = vec![vec![0usize; pred_ids.len()]; gt_ids.len()];
    for t in frame_union(gt, pred) {
        let g = gt.get(t);
        let p = pred.get(t);
        let sim = iou_matrix(g, p);
        for (i, (gid, _)) in g.iter().enumerate() {
            for (j, (pid, _)) in p.iter().enumerate() {
                if sim[i][j] >= MATCH_IOU {
                    overlap[gi[gid]][pi[pid]] += 1;
                }
            }
        }
    }
    let weights: Vec<Vec<Option<f64>>> = overlap
        .iter()
        .map(|r| r.iter().map(|&c| (c > 0).then_some(c as f64)).collect())
        .collect();
    let idtp: usize = max_weight_matching(&weights)?.into_iter().map(|(i, j)| overlap[i][j]).sum();
    let (ng, np) = (gt.detections(), pred.detections());
    Ok(Identity {
        idf1: ratio(2.0 * idtp as f64, (ng + np) as f64, 1.0),
        idp: ratio(idtp as f64, np as f64, if ng == 0 { 1.0 } else { 0.0 }),
        idr: ratio(idtp as f64, ng as f64, if np == 0 { 1.0 } else { 0.0 }),
        idtp,
        idfp: np - idtp,
        idfn: ng - idtp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::BoundingBox;

    #[test]
    fn midpoint_swap_is_half() {
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
        let r = identity(&gt, &pred).unwrap();
        assert_eq!(r.idtp, 10);
        assert!((r.idf1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_is_one() {
        let e = Sequence::new();
        assert_eq!(identity(&e, &e).unwrap().idf1, 1.0);
    }
}
