//! Slow reference implementations used to cross-check the fast paths.
//!
//! Everything here is written directly from the definitions with explicit
//! loops and exhaustive search, sharing no code with the implementations it
//! checks beyond the data types.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::attention::{Activation, AttentionParams, MlpParams};
use crate::decoder::BoundingBox;
use crate::linalg::Tensor2;
use crate::metrics::{ClearMot, Identity, Sequence, ALPHAS};
use crate::tim::{TimParams, TimVariant};

pub fn matmul(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

fn add(a: &Tensor2, b: &Tensor2) -> Tensor2 {
    let mut out = a.clone();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            out.set(i, j, a.get(i, j) + b.get(i, j));
        }
    }
    out
}

/// Attention computed one query row and one head at a time.
pub fn attention(q: &Tensor2, k: &Tensor2, v: &Tensor2, p: &AttentionParams) -> Tensor2 {
    let d = p.wq.rows();
    if k.rows() == 0 {
        return Tensor2::zeros(q.rows(), d);
    }
    let (qp, kp, vp) = (matmul(q, &p.wq), matmul(k, &p.wk), matmul(v, &p.wv));
    let dh = d / p.heads;
    let mut joined = Tensor2::zeros(q.rows(), d);
    for h in 0..p.heads {
        for i in 0..q.rows() {
            let mut logits: Vec<f64> = (0..k.rows())
                .map(|j| (0..dh).map(|c| qp.get(i, h * dh + c) * kp.get(j, h * dh + c)).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            if let Some(s) = &p.sinks {
                logits.push(s.get(0, h));
            }
            let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
            let z: f64 = exps.iter().sum();
            for c in 0..dh {
                let mut s = 0.0;
                for j in 0..k.rows() {
                    s += exps[j] / z * vp.get(j, h * dh + c);
                }
                joined.set(i, h * dh + c, s);
            }
        }
    }
    matmul(&joined, &p.wo)
}

pub fn mlp(x: &Tensor2, p: &MlpParams, act: Activation) -> Tensor2 {
    let mut h = matmul(x, &p.w1);
    for i in 0..h.rows() {
        for j in 0..h.cols() {
            let v = h.get(i, j) + p.b1.get(0, j);
            h.set(i, j, if act == Activation::Relu { v.max(0.0) } else { v });
        }
    }
    let mut y = matmul(&h, &p.w2);
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            y.set(i, j, y.get(i, j) + p.b2.get(0, j));
        }
    }
    y
}

/// Next embeddings of the temporal module composed from the pieces above.
pub fn next_embedding(o_t: &Tensor2, o_prev: &Tensor2, memory: &Tensor2, p: &TimParams, variant: TimVariant) -> Tensor2 {
    let aggregate = || {
        let logits = mlp(o_t, &p.weight_mlp, Activation::Relu);
        let mut joined = Tensor2::zeros(o_t.rows(), 2 * o_t.cols());
        let d = o_t.cols();
        for i in 0..o_t.rows() {
            for c in 0..d {
                let w = 1.0 / (1.0 + (-logits.get(i, c)).exp());
                joined.set(i, c, w * o_t.get(i, c));
                joined.set(i, d + c, o_prev.get(i, c));
            }
        }
        mlp(&joined, &p.fuse_mlp, Activation::Relu)
    };
    let input = match variant {
        TimVariant::Full => {
            let agg = aggregate();
            add(memory, &attention(&agg, memory, o_t, &p.attn))
        }
        TimVariant::MemoryOff => {
            let agg = aggregate();
            add(&agg, &attention(&agg, &agg, o_t, &p.attn))
        }
        TimVariant::AttnOff => add(memory, &aggregate()),
        TimVariant::Naive => o_t.clone(),
    };
    let out = mlp(&input, &p.ffn, p.ffn_activation);
    if p.ffn_residual {
        add(&input, &out)
    } else {
        out
    }
}

/// `m` after `steps` EMA updates toward a constant `o`: `o + (1 - lambda)^steps (m - o)`.
pub fn ema_closed_form(m: f64, o: f64, lambda: f64, steps: i32) -> f64 {
    o + (1.0 - lambda).powi(steps) * (m - o)
}

/// Minimum assignment cost by trying every injection of the smaller side.
pub fn min_assignment_cost(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let at = |i: usize, j: usize| if rows <= cols { cost[i][j] } else { cost[j][i] };
    let (n, m) = (rows.min(cols), rows.max(cols));
    fn go(i: usize, n: usize, m: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64, at: &dyn Fn(usize, usize) -> f64) {
        if i == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                go(i + 1, n, m, used, acc + at(i, j), best, at);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, n, m, &mut vec![false; m], 0.0, &mut best, &at);
    best
}

/// Every partial matching between rows and columns over eligible pairs.
pub fn all_matchings(eligible: &[Vec<bool>], cols: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(i: usize, eligible: &[Vec<bool>], used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if i == eligible.len() {
            out.push(cur.clone());
            return;
        }
        go(i + 1, eligible, used, cur, out);
        for j in 0..used.len() {
            if eligible[i][j] && !used[j] {
                used[j] = true;
                cur.push((i, j));
                go(i + 1, eligible, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, eligible, &mut vec![false; cols], &mut Vec::new(), &mut out);
    out
}

/// The matching whose key is lexicographically largest.
fn best_by<K: PartialOrd>(eligible: &[Vec<bool>], cols: usize, key: impl Fn(&[(usize, usize)]) -> K) -> Vec<(usize, usize)> {
    let mut best: Option<(K, Vec<(usize, usize)>)> = None;
    for m in all_matchings(eligible, cols) {
        let k = key(&m);
        if best.as_ref().is_none_or(|(bk, _)| k > *bk) {
            best = Some((k, m));
        }
    }
    best.map(|(_, m)| m).unwrap_or_default()
}

fn frames(gt: &Sequence, pred: &Sequence) -> Vec<u32> {
    let s: BTreeSet<u32> = gt.frames.keys().chain(pred.frames.keys()).copied().collect();
    s.into_iter().collect()
}

fn ious(g: &[(u64, BoundingBox)], p: &[(u64, BoundingBox)]) -> Vec<Vec<f64>> {
    g.iter()
        .map(|(_, a)| {
            p.iter()
                .map(|(_, b)| {
                    let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
                    let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
                    let inter = iw * ih;
                    let union = a.w * a.h + b.w * b.h - inter;
                    if union > 0.0 {
                        inter / union
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn clear_mot(gt: &Sequence, pred: &Sequence) -> ClearMot {
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut prev: HashMap<u64, u64> = HashMap::new();
    let (mut tp, mut idsw, mut iou_sum) = (0, 0, 0.0);
    for t in frames(gt, pred) {
        let (g, p) = (gt.get(t), pred.get(t));
        let s = ious(g, p);
        let eligible: Vec<Vec<bool>> = s.iter().map(|r| r.iter().map(|v| *v >= 0.5).collect()).collect();
        let m = best_by(&eligible, p.len(), |m| {
            let cont = m.iter().filter(|(i, j)| prev.get(&g[*i].0) == Some(&p[*j].0)).count();
            let sum: f64 = m.iter().map(|(i, j)| s[*i][*j]).sum();
            (cont, m.len(), sum)
        });
        prev.clear();
        for (i, j) in m {
            if let Some(l) = last.get(&g[i].0) {
                if *l != p[j].0 {
                    idsw += 1;
                }
            }
            last.insert(g[i].0, p[j].0);
            prev.insert(g[i].0, p[j].0);
            tp += 1;
            iou_sum += s[i][j];
        }
    }
    let (ng, np) = (gt.detections(), pred.detections());
    let (fn_, fp) = (ng - tp, np - tp);
    ClearMot {
        mota: if ng == 0 {
            if fp == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            1.0 - (fn_ + fp + idsw) as f64 / ng as f64
        },
        motp: if tp > 0 {
            iou_sum / tp as f64
        } else if ng + np == 0 {
            1.0
        } else {
            0.0
        },
        tp,
        fp,
        fn_,
        idsw,
        num_gt: ng,
        num_pred: np,
    }
}

pub fn identity(gt: &Sequence, pred: &Sequence) -> Identity {
    let gids: Vec<u64> = gt.ids().into_iter().collect();
    let pids: Vec<u64> = pred.ids().into_iter().collect();
    let mut overlap: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for t in frames(gt, pred) {
        let (g, p) = (gt.get(t), pred.get(t));
        let s = ious(g, p);
        for i in 0..g.len() {
            for j in 0..p.len() {
                if s[i][j] >= 0.5 {
                    *overlap.entry((g[i].0, p[j].0)).or_default() += 1;
                }
            }
        }
    }
    let count = |i: usize, j: usize| overlap.get(&(gids[i], pids[j])).copied().unwrap_or(0);
    let eligible: Vec<Vec<bool>> = (0..gids.len()).map(|i| (0..pids.len()).map(|j| count(i, j) > 0).collect()).collect();
    let m = best_by(&eligible, pids.len(), |m| m.iter().map(|(i, j)| count(*i, *j)).sum::<usize>());
    let idtp: usize = m.iter().map(|(i, j)| count(*i, *j)).sum();
    let (ng, np) = (gt.detections(), pred.detections());
    let div = |a: usize, b: usize, e: f64| if b == 0 { e } else { a as f64 / b as f64 };
    Identity {
        idf1: div(2 * idtp, ng + np, 1.0),
        idp: div(idtp, np, if ng == 0 { 1.0 } else { 0.0 }),
        idr: div(idtp, ng, if np == 0 { 1.0 } else { 0.0 }),
        idtp,
        idfp: np - idtp,
        idfn: ng - idtp,
    }
}

/// `(HOTA, DetA, AssA)` averaged over the thresholds.
pub fn hota(gt: &Sequence, pred: &Sequence) -> (f64, f64, f64) {
    let fs = frames(gt, pred);
    let mut gt_count: HashMap<u64, f64> = HashMap::new();
    let mut pred_count: HashMap<u64, f64> = HashMap::new();
    let mut soft: HashMap<(u64, u64), f64> = HashMap::new();
    for &t in &fs {
        let (g, p) = (gt.get(t), pred.get(t));
        let s = ious(g, p);
        for (i, (gid, _)) in g.iter().enumerate() {
            *gt_count.entry(*gid).or_default() += 1.0;
            for (j, (pid, _)) in p.iter().enumerate() {
                let row: f64 = s[i].iter().sum();
                let col: f64 = s.iter().map(|r| r[j]).sum();
                let den = row + col - s[i][j];
                if den > 0.0 {
                    *soft.entry((*gid, *pid)).or_default() += s[i][j] / den;
                }
            }
        }
        for (pid, _) in p {
            *pred_count.entry(*pid).or_default() += 1.0;
        }
    }
    let align = |g: u64, p: u64| {
        let sft = soft.get(&(g, p)).copied().unwrap_or(0.0);
        let den = gt_count[&g] + pred_count[&p] - sft;
        if den > 0.0 {
            sft / den
        } else {
            0.0
        }
    };
    let (ng, np) = (gt.detections(), pred.detections());
    let (mut h, mut da, mut aa) = (0.0, 0.0, 0.0);
    for &alpha in &ALPHAS {
        let mut matched: HashMap<(u64, u64), f64> = HashMap::new();
        let mut tp = 0usize;
        for &t in &fs {
            let (g, p) = (gt.get(t), pred.get(t));
            let s = ious(g, p);
            let eligible: Vec<Vec<bool>> = s.iter().map(|r| r.iter().map(|v| *v >= alpha).collect()).collect();
            let m = best_by(&eligible, p.len(), |m| {
                let sum: f64 = m.iter().map(|(i, j)| align(g[*i].0, p[*j].0) * s[*i][*j]).sum();
                (m.len(), sum)
            });
            for (i, j) in m {
                *matched.entry((g[i].0, p[j].0)).or_default() += 1.0;
                tp += 1;
            }
        }
        let (fn_, fp) = (ng - tp, np - tp);
        let det = if tp + fn_ + fp == 0 { 1.0 } else { tp as f64 / (tp + fn_ + fp) as f64 };
        let ass = if tp == 0 {
            if fn_ + fp == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            matched
                .iter()
                .map(|((g, p), c)| c * c / (gt_count[g] + pred_count[p] - c))
                .sum::<f64>()
                / tp as f64
        };
        h += (det * ass).sqrt();
        da += det;
        aa += ass;
    }
    let k = ALPHAS.len() as f64;
    (h / k, da / k, aa / k)
}

/// Random ground truth and a perturbed prediction: jittered boxes, dropped
/// detections, false positives and identity swaps.
pub fn random_instance<R: rand::Rng + ?Sized>(rng: &mut R, max_targets: usize, max_frames: u32) -> (Sequence, Sequence) {
    let n = rng.random_range(1..=max_targets);
    let frames = rng.random_range(1..=max_frames);
    let mut pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.2..0.8), rng.random_range(0.2..0.8))).collect();
    let mut label: Vec<u64> = (1..=n as u64).collect();
    let (mut gt, mut pred) = (Sequence::new(), Sequence::new());
    for t in 1..=frames {
        for p in pos.iter_mut() {
            p.0 += rng.random_range(-0.03..0.03);
            p.1 += rng.random_range(-0.03..0.03);
        }
        if n > 1 && rng.random_bool(0.1) {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            label.swap(a, b);
        }
        for i in 0..n {
            if rng.random_bool(0.1) {
                continue;
            }
            let b = BoundingBox::new(pos[i].0, pos[i].1, 0.1, 0.12);
            gt.push(t, i as u64 + 1, b).expect("unique ids");
            if rng.random_bool(0.85) {
                let j = |rng: &mut R| rng.random_range(-0.04..0.04);
                let pb = BoundingBox::new(b.cx + j(rng), b.cy + j(rng), 0.1 + j(rng) / 2.0, 0.12 + j(rng) / 2.0);
                pred.push(t, label[i], pb).expect("unique labels");
            }
        }
        if rng.random_bool(0.2) {
            let b = BoundingBox::new(rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), 0.1, 0.1);
            let _ = pred.push(t, rng.random_range(n as u64 + 1..=n as u64 + 2), b);
        }
    }
    (gt, pred)
}
