//! Track lifecycle: per-frame decoding, state transitions, newborn creation
//! and gated embedding/memory updates.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::decoder::{
    anchor_grid, detection_decode, heads, joint_decode, select_newborns, BoundingBox, DecoderParams, DetectQuery,
    Detection, FrameFeatures, QuerySet, Source, DEFAULT_DET_LAYERS, DEFAULT_JOINT_LAYERS,
};
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::linalg::{random_tensor, Tensor2};
use crate::memory::{commit_gate, init_memory, LongTermMemory, MemoryConfig};
use crate::structured::{self, StructuredConfig};
use crate::tim::{tim_forward_variant, TimParams, TimVariant, TrackBatch};

/// Thresholds and settings of the inference loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackerConfig {
    pub tau_det: f64,
    pub tau_track: f64,
    pub tau_next: f64,
    pub t_miss: u32,
    pub iou_suppress: f64,
    pub memory: MemoryConfig,
    pub variant: TimVariant,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            tau_det: 0.5,
            tau_track: 0.5,
            tau_next: 0.5,
            t_miss: 30,
            iou_suppress: 0.7,
            memory: MemoryConfig::default(),
            variant: TimVariant::Full,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_det", self.tau_det),
            ("tau_track", self.tau_track),
            ("tau_next", self.tau_next),
            ("iou_suppress", self.iou_suppress),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        MemoryConfig::new(self.memory.lambda)?;
        Ok(())
    }
}

/// Everything learned (or hand-set): decoder, temporal module, detect queries.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub decoder: DecoderParams,
    pub tim: TimParams,
    pub queries: Vec<DetectQuery>,
}

impl Model {
    pub fn structured(layout: &Layout, cfg: &StructuredConfig, variant: TimVariant) -> Result<Self> {
        Self::structured_with_layers(layout, cfg, variant, DEFAULT_DET_LAYERS, DEFAULT_JOINT_LAYERS)
    }

    pub fn structured_with_layers(
        layout: &Layout,
        cfg: &StructuredConfig,
        variant: TimVariant,
        det_layers: usize,
        joint_layers: usize,
    ) -> Result<Self> {
        Ok(Self {
            decoder: structured::decoder(layout, cfg, det_layers, joint_layers)?,
            tim: structured::tim(layout, cfg, variant)?,
            queries: structured::detect_queries(layout, cfg),
        })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, layout: Layout, heads: usize, anchors_per_side: usize) -> Self {
        Self::random_with_layers(rng, layout, heads, anchors_per_side, DEFAULT_DET_LAYERS, DEFAULT_JOINT_LAYERS)
    }

    pub fn random_with_layers<R: Rng + ?Sized>(
        rng: &mut R,
        layout: Layout,
        heads: usize,
        anchors_per_side: usize,
        det_layers: usize,
        joint_layers: usize,
    ) -> Self {
        let d = layout.d;
        let q = random_tensor(rng, 1, d, 1.0);
        Self {
            tim: TimParams::random(rng, d, heads),
            decoder: DecoderParams::random(rng, layout, det_layers, joint_layers, heads),
            queries: anchor_grid(anchors_per_side, q.row(0)),
        }
    }

    pub fn width(&self) -> usize {
        self.decoder.width()
    }

    pub fn validate(&self) -> Result<()> {
        self.decoder.validate()?;
        self.tim.validate()?;
        if self.tim.width() != self.width() {
            return Err(Error::Config(format!(
                "temporal module width {} vs decoder width {}",
                self.tim.width(),
                self.width()
            )));
        }
        Ok(())
    }

    /// Every tensor with a stable name, for snapshots.
    pub fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = self.decoder.tensors("decoder");
        out.extend(self.tim.tensors("tim"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut out = self.decoder.tensors_mut("decoder");
        out.extend(self.tim.tensors_mut("tim"));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrackState {
    Active,
    Inactive,
    Removed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    /// Consecutive frames at or below the tracking threshold.
    pub missed: u32,
    /// Query embedding for the next frame.
    pub embedding: Vec<f64>,
    pub memory: LongTermMemory,
    /// Output of the last committed frame.
    pub o_prev: Vec<f64>,
    /// Box of the last confident frame; its center anchors the query.
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub born: u32,
}

impl Track {
    pub fn anchor(&self) -> (f64, f64) {
        (self.bbox.cx, self.bbox.cy)
    }

    /// Hash of the exact bits of the embedding and the memory.
    pub fn state_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for v in self.embedding.iter().chain(self.memory.value()) {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameResult {
    pub t: u32,
    /// Active tracks in id order.
    pub tracks: Vec<TrackOutput>,
    /// Ids created on this frame.
    pub born: Vec<u64>,
    /// Ids removed on this frame.
    pub removed: Vec<u64>,
    /// `(id, confidence, committed)` for every track alive before the frame.
    pub updates: Vec<(u64, f64, bool)>,
}

#[derive(Clone, Debug)]
pub struct Tracker {
    model: Model,
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    graveyard: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
}

impl Tracker {
    pub fn new(model: Model, cfg: TrackerConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        Ok(Self {
            model,
            cfg,
            tracks: Vec::new(),
            graveyard: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Active and inactive tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn removed(&self) -> &[Track] {
        &self.graveyard
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().chain(&self.graveyard).find(|t| t.id == id)
    }

    pub fn step(&mut self, feats: &FrameFeatures) -> Result<FrameResult> {
        if let Some(last) = self.last_frame {
            if feats.t <= last {
                return Err(Error::State(format!("frame {} arrived after frame {last}", feats.t)));
            }
        }
        let d = self.model.width();
        if !feats.is_empty() && feats.tokens.cols() != d {
            return Err(Error::Config(format!(
                "token width {} does not match model width {d}",
                feats.tokens.cols()
            )));
        }
        feats.validate()?;
        self.last_frame = Some(feats.t);

        // (a) decode
        let e_det = detection_decode(&self.model.queries, feats, &self.model.decoder)?;
        let det = QuerySet::new(e_det, self.model.queries.iter().map(|q| q.anchor).collect())?;
        let mut tck_rows = Vec::with_capacity(self.tracks.len() * d);
        for t in &self.tracks {
            tck_rows.extend_from_slice(&t.embedding);
        }
        let tck = QuerySet::new(
            Tensor2::new(self.tracks.len(), d, tck_rows)?,
            self.tracks.iter().map(Track::anchor).collect(),
        )?;
        let (o_det, o_tck) = joint_decode(&det, &tck, feats, &self.model.decoder)?;
        let det_heads = heads(&o_det, &self.model.decoder)?;
        let tck_heads = heads(&o_tck, &self.model.decoder)?;

        // (b) and (c) state transitions
        let mut removed = Vec::new();
        let mut updates = Vec::with_capacity(self.tracks.len());
        for (i, track) in self.tracks.iter_mut().enumerate() {
            let (bbox, conf) = tck_heads[i];
            track.confidence = conf;
            if conf > self.cfg.tau_track {
                track.state = TrackState::Active;
                track.missed = 0;
                track.bbox = bbox;
            } else {
                track.state = TrackState::Inactive;
                track.missed += 1;
                if track.missed > self.cfg.t_miss {
                    track.state = TrackState::Removed;
                    removed.push(track.id);
                }
            }
        }

        // (e) and (f) temporal update of surviving tracks, gated by confidence
        let survivors: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].state != TrackState::Removed)
            .collect();
        if !survivors.is_empty() {
            let o_t = o_tck.select_rows(&survivors);
            let mut prev = Vec::with_capacity(survivors.len() * d);
            let mut mem = Vec::with_capacity(survivors.len() * d);
            for &i in &survivors {
                prev.extend_from_slice(&self.tracks[i].o_prev);
                mem.extend_from_slice(self.tracks[i].memory.value());
            }
            let batch = TrackBatch::new(
                survivors.iter().map(|&i| self.tracks[i].id).collect(),
                o_t.clone(),
                Tensor2::new(survivors.len(), d, prev)?,
                Tensor2::new(survivors.len(), d, mem)?,
            )?;
            let (next_e, next_m) = tim_forward_variant(&batch, &self.model.tim, &self.cfg.memory, self.cfg.variant)?;
            for (row, &i) in survivors.iter().enumerate() {
                let track = &mut self.tracks[i];
                let conf = track.confidence;
                let committed = conf > self.cfg.tau_next;
                let new_m = init_memory(next_m.row(row))?;
                let old_e = std::mem::take(&mut track.embedding);
                let old_m = std::mem::replace(&mut track.memory, LongTermMemory::uninitialized(0));
                let (e, m) = commit_gate(old_e, old_m, next_e.row(row).to_vec(), new_m, conf, self.cfg.tau_next);
                track.embedding = e;
                track.memory = m;
                if committed {
                    track.o_prev = o_t.row(row).to_vec();
                }
                updates.push((track.id, conf, committed));
            }
        }
        for track in self.tracks.iter().filter(|t| t.state == TrackState::Removed) {
            updates.push((track.id, track.confidence, false));
        }
        updates.sort_by_key(|u| u.0);

        // (d) newborns against the confident tracked outputs
        let tracked: Vec<Detection> = self
            .tracks
            .iter()
            .filter(|t| t.state == TrackState::Active)
            .map(|t| Detection {
                bbox: t.bbox,
                confidence: t.confidence,
                source: Source::Tracked,
                embedding: Vec::new(),
            })
            .collect();
        let candidates: Vec<Detection> = det_heads
            .iter()
            .enumerate()
            .map(|(i, (bbox, conf))| Detection {
                bbox: *bbox,
                confidence: *conf,
                source: Source::Newborn,
                embedding: o_det.row(i).to_vec(),
            })
            .collect();
        let mut born = Vec::new();
        for i in select_newborns(&candidates, &tracked, self.cfg.tau_det, self.cfg.iou_suppress) {
            let c = &candidates[i];
            let id = self.next_id;
            self.next_id += 1;
            born.push(id);
            self.tracks.push(Track {
                id,
                state: TrackState::Active,
                missed: 0,
                embedding: c.embedding.clone(),
                memory: init_memory(&c.embedding)?,
                o_prev: c.embedding.clone(),
                bbox: c.bbox,
                confidence: c.confidence,
                born: feats.t,
            });
        }

        let (alive, dead): (Vec<Track>, Vec<Track>) =
            std::mem::take(&mut self.tracks).into_iter().partition(|t| t.state != TrackState::Removed);
        self.tracks = alive;
        self.graveyard.extend(dead);

        // (g) report active tracks
        let mut tracks: Vec<TrackOutput> = self
            .tracks
            .iter()
            .filter(|t| t.state == TrackState::Active)
            .map(|t| TrackOutput {
                id: t.id,
                bbox: t.bbox,
                confidence: t.confidence,
            })
            .collect();
        tracks.sort_by_key(|t| t.id);
        Ok(FrameResult {
            t: feats.t,
            tracks,
            born,
            removed,
            updates,
        })
    }
}

/// Runs a tracker over frames in order. Frame indices must strictly increase.
pub fn run_sequence(model: &Model, cfg: &TrackerConfig, frames: &[FrameFeatures]) -> Result<Vec<FrameResult>> {
    let mut tracker = Tracker::new(model.clone(), *cfg)?;
    frames.iter().map(|f| tracker.step(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, Occlusion, ScenarioConfig, ScenarioKind};

    fn model() -> Model {
        let layout = Layout::new(64).unwrap();
        Model::structured(&layout, &StructuredConfig::default(), TimVariant::Full).unwrap()
    }

    #[test]
    fn rejects_out_of_order_frames() {
        let mut t = Tracker::new(model(), TrackerConfig::default()).unwrap();
        t.step(&FrameFeatures::empty(2, 64)).unwrap();
        assert!(matches!(t.step(&FrameFeatures::empty(2, 64)), Err(Error::State(_))));
        assert!(matches!(t.step(&FrameFeatures::empty(1, 64)), Err(Error::State(_))));
        t.step(&FrameFeatures::empty(5, 64)).unwrap();
    }

    #[test]
    fn width_mismatch_is_config_error() {
        let mut t = Tracker::new(model(), TrackerConfig::default()).unwrap();
        let f = FrameFeatures::new(1, Tensor2::zeros(1, 32), Tensor2::zeros(1, 2)).unwrap();
        assert!(matches!(t.step(&f), Err(Error::Config(_))));
    }

    #[test]
    fn ids_start_at_one_and_follow_detection_order() {
        let s = generate(&ScenarioConfig::new(ScenarioKind::OcclusionStress, 4, 3, 2)).unwrap();
        let out = run_sequence(&model(), &TrackerConfig::default(), &s.frames).unwrap();
        assert_eq!(out[0].born, vec![1, 2, 3, 4]);
        assert!(out[1].born.is_empty());
        assert_eq!(out[2].tracks.iter().map(|t| t.id).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn deterministic() {
        let s = generate(&ScenarioConfig::new(ScenarioKind::Dance, 5, 40, 3)).unwrap();
        let a = run_sequence(&model(), &TrackerConfig::default(), &s.frames).unwrap();
        let b = run_sequence(&model(), &TrackerConfig::default(), &s.frames).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inactive_tracks_are_frozen() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::OcclusionStress, 3, 30, 5);
        cfg.occlusions.push(Occlusion { target: 0, start: 10, len: 8 });
        let s = generate(&cfg).unwrap();
        let mut tracker = Tracker::new(model(), TrackerConfig::default()).unwrap();
        let mut hashes = std::collections::HashMap::new();
        for f in &s.frames {
            let r = tracker.step(f).unwrap();
            for &(id, conf, committed) in &r.updates {
                let h = tracker.track(id).unwrap().state_hash();
                if let Some(prev) = hashes.insert(id, h) {
                    assert_eq!(committed, conf > 0.5);
                    assert_eq!(prev == h, !committed, "frame {} id {id}", f.t);
                }
            }
        }
    }
}
