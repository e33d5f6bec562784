//! Synthetic multi-target scenarios rendered straight into frame tokens.
//!
//! Each target owns a unit signature; every pair of signatures has cosine
//! exactly `sigma_sim`. A visible target emits one token laid out as in
//! [`Layout`]: noisy signature, positional code, box logits, objectness 1.
//! Clutter tokens carry random signatures and objectness 0.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decoder::{BoundingBox, FrameFeatures};
use crate::error::{Error, Result};
use crate::io::mot::{FrameSize, MotRow};
use crate::layout::Layout;
use crate::linalg::Tensor2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Constant velocity with reflection at the borders.
    Linear,
    /// Mean-reverting jitter around crowded home positions.
    Dance,
    /// Pairs of targets on opposing lanes that pass each other.
    Crossing,
    /// Slow, well separated targets with scheduled occlusions.
    OcclusionStress,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Linear,
        ScenarioKind::Dance,
        ScenarioKind::Crossing,
        ScenarioKind::OcclusionStress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Linear => "linear",
            ScenarioKind::Dance => "dance",
            ScenarioKind::Crossing => "crossing",
            ScenarioKind::OcclusionStress => "occlusion_stress",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown scenario kind '{s}'")))
    }
}

/// What happens to the token of an occluded target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OcclusionMode {
    /// The token disappears.
    Drop,
    /// The token disappears and its appearance bleeds into the nearest
    /// visible target's token.
    Blend,
}

/// Target `target` (0-based) is hidden on frames `start..start + len` (1-based frames).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Occlusion {
    pub target: usize,
    pub start: u32,
    pub len: u32,
}

/// Random occlusion schedule: `events` intervals per target, lengths in `min_len..=max_len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomOcclusions {
    pub events: usize,
    pub min_len: u32,
    pub max_len: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub targets: usize,
    pub frames: u32,
    pub d: usize,
    /// Pairwise cosine between target signatures, in `[0, 1)`.
    pub sigma_sim: f64,
    /// Standard deviation of the per-token signature perturbation (norm scale).
    pub noise: f64,
    /// Per-frame step of the slow appearance drift.
    pub drift: f64,
    pub distractors: usize,
    pub occlusions: Vec<Occlusion>,
    pub random_occlusions: Option<RandomOcclusions>,
    pub occlusion_mode: OcclusionMode,
    /// Share of a hidden target's appearance mixed into its occluder.
    pub blend: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, targets: usize, frames: u32, seed: u64) -> Self {
        let (sigma_sim, random_occlusions, mode) = match kind {
            ScenarioKind::Dance => (
                0.9,
                Some(RandomOcclusions {
                    events: 2,
                    min_len: 5,
                    max_len: 20,
                }),
                OcclusionMode::Blend,
            ),
            ScenarioKind::OcclusionStress => (0.3, None, OcclusionMode::Drop),
            _ => (0.3, None, OcclusionMode::Drop),
        };
        Self {
            kind,
            targets,
            frames,
            d: 64,
            sigma_sim,
            noise: 0.1,
            drift: 0.0,
            distractors: 4,
            occlusions: Vec::new(),
            random_occlusions,
            occlusion_mode: mode,
            blend: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let layout = Layout::new(self.d)?;
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        if self.targets + 1 > layout.sig_width() {
            return Err(Error::Config(format!(
                "at most {} targets fit a {}-wide signature",
                layout.sig_width() - 1,
                layout.sig_width()
            )));
        }
        if !(0.0..1.0).contains(&self.sigma_sim) {
            return Err(Error::Config(format!("sigma_sim {} outside [0, 1)", self.sigma_sim)));
        }
        for (name, v) in [("noise", self.noise), ("drift", self.drift), ("blend", self.blend)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        for o in &self.occlusions {
            if o.target >= self.targets {
                return Err(Error::Config(format!("occlusion names target {} of {}", o.target, self.targets)));
            }
        }
        if let Some(r) = self.random_occlusions {
            if r.min_len == 0 || r.min_len > r.max_len {
                return Err(Error::Config("random occlusion lengths must satisfy 1 <= min <= max".into()));
            }
        }
        Ok(())
    }
}

/// Ground truth for one target on one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GtObject {
    /// 1-based target id.
    pub id: u64,
    pub bbox: BoundingBox,
    pub visible: bool,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub layout: Layout,
    /// Base signatures, one row per target (`targets x d/2`).
    pub signatures: Tensor2,
    /// Frames numbered from 1.
    pub frames: Vec<FrameFeatures>,
    pub truth: Vec<Vec<GtObject>>,
    /// Target id behind each token, `None` for clutter.
    pub token_owner: Vec<Vec<Option<u64>>>,
}

impl Scenario {
    /// MOT rows of every visible target.
    pub fn export_gt(&self, size: FrameSize) -> Vec<MotRow> {
        let mut rows = Vec::new();
        for (t, objs) in self.truth.iter().enumerate() {
            for o in objs.iter().filter(|o| o.visible) {
                rows.push(MotRow::from_normalized(t as u32 + 1, o.id, &o.bbox, 1.0, size));
            }
        }
        rows
    }

    pub fn visible_count(&self) -> usize {
        self.truth.iter().flatten().filter(|o| o.visible).count()
    }
}

/// Largest cosine between two distinct rows.
pub fn max_pairwise_cosine(rows: &Tensor2) -> f64 {
    let norms: Vec<f64> = (0..rows.rows()).map(|i| norm(rows.row(i))).collect();
    let mut best = f64::NEG_INFINITY;
    for i in 0..rows.rows() {
        for j in i + 1..rows.rows() {
            best = best.max(dot(rows.row(i), rows.row(j)) / (norms[i] * norms[j]));
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Unit vectors with pairwise cosine exactly `sigma`: a shared direction plus
/// mutually orthogonal private directions.
fn signatures(rng: &mut ChaCha8Rng, n: usize, k: usize, sigma: f64) -> Tensor2 {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    while basis.len() < n + 1 {
        let mut v = gaussian(rng, k);
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        if norm(&v) > 1e-6 {
            normalize(&mut v);
            basis.push(v);
        }
    }
    let (a, b) = (sigma.sqrt(), (1.0 - sigma).sqrt());
    let mut out = Tensor2::zeros(n, k);
    for i in 0..n {
        for c in 0..k {
            out.set(i, c, a * basis[0][c] + b * basis[i + 1][c]);
        }
    }
    out
}

/// Reflects `p` into `[lo, hi]`, flipping `v` on a bounce.
fn reflect(p: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    if *p < lo {
        *p = 2.0 * lo - *p;
        *v = -*v;
    }
    if *p > hi {
        *p = 2.0 * hi - *p;
        *v = -*v;
    }
    *p = p.clamp(lo, hi);
}

struct Mover {
    pos: [f64; 2],
    vel: [f64; 2],
    home: [f64; 2],
    size: [f64; 2],
}

fn initial_movers(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Mover> {
    let n = cfg.targets;
    let mut out = Vec::with_capacity(n);
    let side = (n as f64).sqrt().ceil() as usize;
    for i in 0..n {
        let size = [rng.random_range(0.05..0.09), rng.random_range(0.06..0.1)];
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let m = match cfg.kind {
            ScenarioKind::Linear => {
                let speed = rng.random_range(0.002..0.008);
                let pos = [rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)];
                Mover { pos, vel: [speed * angle.cos(), speed * angle.sin()], home: pos, size }
            }
            ScenarioKind::Dance => {
                let home = [rng.random_range(0.3..0.7), rng.random_range(0.3..0.7)];
                Mover { pos: home, vel: [0.0, 0.0], home, size }
            }
            ScenarioKind::Crossing => {
                let lanes = n.div_ceil(2).max(1);
                let lane = i / 2;
                let y = 0.2 + 0.6 * (lane as f64 + 0.5) / lanes as f64;
                let speed = 0.6 / cfg.frames.max(1) as f64 + 0.002;
                let (x, vx) = if i % 2 == 0 { (0.1, speed) } else { (0.9, -speed) };
                let pos = [x, y + if i % 2 == 0 { -0.01 } else { 0.01 }];
                Mover { pos, vel: [vx, 0.0], home: pos, size }
            }
            ScenarioKind::OcclusionStress => {
                let (r, c) = (i / side, i % side);
                let pos = [(c as f64 + 0.5) / side as f64, (r as f64 + 0.5) / side as f64];
                let speed = rng.random_range(0.0005..0.0015);
                Mover { pos, vel: [speed * angle.cos(), speed * angle.sin()], home: pos, size }
            }
        };
        out.push(m);
    }
    out
}

fn step_mover(kind: ScenarioKind, m: &mut Mover, rng: &mut ChaCha8Rng) {
    match kind {
        ScenarioKind::Dance => {
            for a in 0..2 {
                let z: f64 = StandardNormal.sample(rng);
                m.vel[a] = 0.9 * m.vel[a] + 0.02 * (m.home[a] - m.pos[a]) + 0.003 * z;
            }
        }
        ScenarioKind::OcclusionStress => {
            // stay near the home cell
            for a in 0..2 {
                if (m.pos[a] - m.home[a]).abs() > 0.05 && (m.pos[a] - m.home[a]) * m.vel[a] > 0.0 {
                    m.vel[a] = -m.vel[a];
                }
            }
        }
        _ => {}
    }
    for a in 0..2 {
        m.pos[a] += m.vel[a];
        let half = m.size[a] / 2.0;
        reflect(&mut m.pos[a], &mut m.vel[a], half, 1.0 - half);
    }
}

fn occlusion_table(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    let mut hidden = vec![vec![false; cfg.targets]; cfg.frames as usize];
    let mut mark = |o: &Occlusion| {
        for f in o.start..o.start.saturating_add(o.len) {
            if f >= 1 && f <= cfg.frames {
                hidden[f as usize - 1][o.target] = true;
            }
        }
    };
    for o in &cfg.occlusions {
        mark(o);
    }
    if let Some(r) = cfg.random_occlusions {
        // too short a sequence to hold any interval after the first frame
        let max_len = r.max_len.min(cfg.frames.saturating_sub(1));
        if max_len < r.min_len {
            return hidden;
        }
        for target in 0..cfg.targets {
            for _ in 0..r.events {
                let len = rng.random_range(r.min_len..=max_len);
                let start = rng.random_range(2..=cfg.frames - len + 1);
                mark(&Occlusion { target, start, len });
            }
        }
    }
    hidden
}

/// Renders a scenario. Identical configs give identical scenarios.
pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let layout = Layout::new(cfg.d)?;
    let d = cfg.d;
    let k = layout.sig_width();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sigs = signatures(&mut rng, cfg.targets, k, cfg.sigma_sim);
    let mut movers = initial_movers(cfg, &mut rng);
    let hidden = occlusion_table(cfg, &mut rng);
    let mut drift = vec![vec![0.0; k]; cfg.targets];
    let noise_scale = cfg.noise / (k as f64).sqrt();

    let mut frames = Vec::with_capacity(cfg.frames as usize);
    let mut truth = Vec::with_capacity(cfg.frames as usize);
    let mut owners = Vec::with_capacity(cfg.frames as usize);
    for t in 1..=cfg.frames {
        if t > 1 {
            for m in movers.iter_mut() {
                step_mover(cfg.kind, m, &mut rng);
            }
        }
        let hid = &hidden[t as usize - 1];
        let boxes: Vec<BoundingBox> = movers
            .iter()
            .map(|m| BoundingBox::new(m.pos[0], m.pos[1], m.size[0], m.size[1]))
            .collect();

        // appearance of every target this frame
        let mut looks: Vec<Vec<f64>> = Vec::with_capacity(cfg.targets);
        for i in 0..cfg.targets {
            if cfg.drift > 0.0 {
                let g = gaussian(&mut rng, k);
                for c in 0..k {
                    drift[i][c] = 0.95 * drift[i][c] + cfg.drift * g[c] / (k as f64).sqrt();
                }
            }
            let g = gaussian(&mut rng, k);
            let mut v: Vec<f64> = (0..k)
                .map(|c| sigs.get(i, c) + drift[i][c] + noise_scale * g[c])
                .collect();
            normalize(&mut v);
            looks.push(v);
        }
        if cfg.occlusion_mode == OcclusionMode::Blend && cfg.blend > 0.0 {
            let base = looks.clone();
            for h in (0..cfg.targets).filter(|&i| hid[i]) {
                let nearest = (0..cfg.targets).filter(|&j| !hid[j]).min_by(|&a, &b| {
                    let da = (boxes[a].cx - boxes[h].cx).hypot(boxes[a].cy - boxes[h].cy);
                    let db = (boxes[b].cx - boxes[h].cx).hypot(boxes[b].cy - boxes[h].cy);
                    da.total_cmp(&db)
                });
                if let Some(j) = nearest {
                    let look = &mut looks[j];
                    for c in 0..k {
                        look[c] = (1.0 - cfg.blend) * look[c] + cfg.blend * base[h][c];
                    }
                    normalize(look);
                }
            }
        }

        let mut rows: Vec<(Vec<f64>, [f64; 2], Option<u64>)> = Vec::new();
        for i in (0..cfg.targets).filter(|&i| !hid[i]) {
            let b = &boxes[i];
            let mut tok = vec![0.0; d];
            tok[..k].copy_from_slice(&looks[i]);
            layout.encode_position(b.cx, b.cy, &mut tok);
            tok[layout.bbox.clone()].copy_from_slice(&b.to_logits());
            tok[layout.obj] = 1.0;
            rows.push((tok, [b.cx, b.cy], Some(i as u64 + 1)));
        }
        for _ in 0..cfg.distractors {
            let mut sig = gaussian(&mut rng, k);
            normalize(&mut sig);
            let (x, y) = (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
            let (w, h) = (rng.random_range(0.03..0.1), rng.random_range(0.03..0.1));
            let mut tok = vec![0.0; d];
            tok[..k].copy_from_slice(&sig);
            layout.encode_position(x, y, &mut tok);
            tok[layout.bbox.clone()].copy_from_slice(&BoundingBox::new(x, y, w, h).to_logits());
            rows.push((tok, [x, y], None));
        }
        rows.shuffle(&mut rng);

        let n = rows.len();
        let mut tokens = Vec::with_capacity(n * d);
        let mut positions = Vec::with_capacity(n * 2);
        let mut owner = Vec::with_capacity(n);
        for (tok, p, o) in rows {
            tokens.extend(tok);
            positions.extend(p);
            owner.push(o);
        }
        let tokens = Tensor2::new(n, d, tokens)?.quantize_f32();
        let positions = Tensor2::new(n, 2, positions)?.quantize_f32();
        frames.push(FrameFeatures::new(t, tokens, positions)?);
        owners.push(owner);
        truth.push(
            (0..cfg.targets)
                .map(|i| GtObject {
                    id: i as u64 + 1,
                    bbox: boxes[i],
                    visible: !hid[i],
                })
                .collect(),
        );
    }
    Ok(Scenario {
        config: cfg.clone(),
        layout,
        signatures: sigs,
        frames,
        truth,
        token_owner: owners,
    })
}
