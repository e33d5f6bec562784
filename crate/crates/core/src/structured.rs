//! Hand-set parameters that make the decoder and the temporal module behave
//! like a working tracker on tokens laid out by [`Layout`], without training.
//!
//! Attention logits decompose into a signature match, a positional kernel and
//! an objectness prior. Every layer has a sink so a query can attend to
//! nothing; its attended objectness is what the confidence head reads.

use crate::attention::{Activation, AttentionParams, MlpParams};
use crate::decoder::{anchor_grid, DecoderLayer, DecoderParams, DetectQuery};
use crate::error::Result;
use crate::layout::Layout;
use crate::linalg::Tensor2;
use crate::tim::{TimParams, TimVariant};

/// Logit scales of the hand-set model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructuredConfig {
    /// Positional kernel scale in the detection layers.
    pub det_pos: f64,
    /// Objectness prior in the detection layers.
    pub det_obj: f64,
    pub det_sink: f64,
    /// Signature match scale in the joint layers.
    pub sig: f64,
    pub joint_pos: f64,
    pub joint_obj: f64,
    pub joint_sink: f64,
    /// Confidence logit per unit of attended objectness above 1/2.
    pub conf_gain: f64,
    /// Gain of the objectness gate on the current output.
    pub weight_gain: f64,
    /// Signature match scale of memory-attention.
    pub mem_focus: f64,
    /// Weight of the attended output relative to the memory.
    pub beta: f64,
    pub anchors_per_side: usize,
}

impl Default for StructuredConfig {
    fn default() -> Self {
        Self {
            det_pos: 300.0,
            det_obj: 145.0,
            det_sink: 320.0,
            sig: 150.0,
            joint_pos: 20.0,
            joint_obj: 20.0,
            joint_sink: 130.0,
            conf_gain: 20.0,
            weight_gain: 10.0,
            mem_focus: 100.0,
            beta: 0.5,
            anchors_per_side: 4,
        }
    }
}

/// Single-head cross-attention with logit
/// `sig * <q_sig, k_sig> + pos * kernel + obj * q_bias * k_obj` and a sink.
///
/// Keys enter as `token + code`, so their positional block is doubled; the
/// positional weight is halved to compensate.
fn cross_attention(layout: &Layout, sig: f64, pos: f64, obj: f64, sink: f64) -> Result<AttentionParams> {
    let d = layout.d;
    let scale = (d as f64).sqrt();
    let mut wq = Tensor2::zeros(d, d);
    let mut wk = Tensor2::zeros(d, d);
    let a = (sig * scale).sqrt();
    for c in layout.sig.clone() {
        wq.set(c, c, a);
        wk.set(c, c, a);
    }
    let b = (pos * scale / 2.0).sqrt();
    for c in layout.pos.clone() {
        wq.set(c, c, b);
        wk.set(c, c, b);
    }
    let g = (obj * scale).sqrt();
    let aux = layout.aux.start;
    wq.set(layout.bias, aux, g);
    wk.set(layout.obj, aux, g);
    AttentionParams::new(wq, wk, Tensor2::identity(d), Tensor2::identity(d), 1)?.with_sinks(Tensor2::filled(1, 1, sink))
}

fn attend_layer(attn: AttentionParams) -> DecoderLayer {
    DecoderLayer {
        self_attn: None,
        cross_attn: attn,
        ffn: None,
        keep: 0.0,
    }
}

/// Box head reading the box-logit block; confidence head reading objectness.
fn heads(layout: &Layout, conf_gain: f64) -> Result<(MlpParams, MlpParams)> {
    let d = layout.d;
    let mut w1 = Tensor2::zeros(d, 8);
    let mut w2 = Tensor2::zeros(8, 4);
    for (i, c) in layout.bbox.clone().enumerate() {
        w1.set(c, i, 1.0);
        w1.set(c, 4 + i, -1.0);
        w2.set(i, i, 1.0);
        w2.set(4 + i, i, -1.0);
    }
    let boxes = MlpParams::new(w1, Tensor2::zeros(1, 8), w2, Tensor2::zeros(1, 4))?;
    let mut c1 = Tensor2::zeros(d, 1);
    c1.set(layout.obj, 0, 1.0);
    let conf = MlpParams::new(
        c1,
        Tensor2::zeros(1, 1),
        Tensor2::filled(1, 1, conf_gain),
        Tensor2::filled(1, 1, -conf_gain / 2.0),
    )?;
    Ok((boxes, conf))
}

pub fn decoder(layout: &Layout, cfg: &StructuredConfig, det_layers: usize, joint_layers: usize) -> Result<DecoderParams> {
    let det = cross_attention(layout, 0.0, cfg.det_pos, cfg.det_obj, cfg.det_sink)?;
    let joint = cross_attention(layout, cfg.sig, cfg.joint_pos, cfg.joint_obj, cfg.joint_sink)?;
    let (box_head, conf_head) = heads(layout, cfg.conf_gain)?;
    Ok(DecoderParams {
        layout: layout.clone(),
        det_layers: vec![attend_layer(det); det_layers],
        joint_layers: vec![attend_layer(joint); joint_layers],
        box_head,
        conf_head,
    })
}

/// Detect queries: bias channel set, positioned on a square anchor grid.
pub fn detect_queries(layout: &Layout, cfg: &StructuredConfig) -> Vec<DetectQuery> {
    let mut e = vec![0.0; layout.d];
    e[layout.bias] = 1.0;
    anchor_grid(cfg.anchors_per_side, &e)
}

/// Temporal module for one variant. The FFN rescales its input so the next
/// embedding has a signature of roughly unit norm in every variant.
pub fn tim(layout: &Layout, cfg: &StructuredConfig, variant: TimVariant) -> Result<TimParams> {
    let d = layout.d;
    let k = layout.sig_width();

    // W = sigmoid(gain * (obj - 1/2)) on every channel
    let mut w1 = Tensor2::zeros(d, d);
    w1.set(layout.obj, 0, 1.0);
    let mut w2 = Tensor2::zeros(d, d);
    for c in 0..d {
        w2.set(0, c, cfg.weight_gain);
    }
    let weight_mlp = MlpParams::new(w1, Tensor2::zeros(1, d), w2, Tensor2::filled(1, d, -cfg.weight_gain / 2.0))?;

    // mean of W * O_t and O_prev, through positive and negative parts
    let mut f1 = Tensor2::zeros(2 * d, 2 * d);
    let mut f2 = Tensor2::zeros(2 * d, d);
    for c in 0..d {
        for src in [c, d + c] {
            f1.set(src, c, 0.5);
            f1.set(src, d + c, -0.5);
        }
        f2.set(c, c, 1.0);
        f2.set(d + c, c, -1.0);
    }
    let fuse_mlp = MlpParams::new(f1, Tensor2::zeros(1, 2 * d), f2, Tensor2::zeros(1, d))?;

    // head 0 matches aggregated outputs to memories by signature
    let heads = 2;
    let dh = d / heads;
    let mut wq = Tensor2::zeros(d, d);
    let mut wk = Tensor2::zeros(d, d);
    let mut wv = Tensor2::zeros(d, d);
    let mut wo = Tensor2::zeros(d, d);
    let a = (cfg.mem_focus * (dh as f64).sqrt()).sqrt();
    for (i, c) in layout.sig.clone().enumerate() {
        wq.set(c, i, a);
        wk.set(c, i, a);
        wv.set(c, i, 1.0);
        wo.set(i, c, cfg.beta);
    }
    let attn = AttentionParams::new(wq, wk, wv, wo, heads)?;

    let kappa = match variant {
        TimVariant::Full | TimVariant::MemoryOff => 1.0 / (1.0 + cfg.beta),
        TimVariant::AttnOff => 0.5,
        TimVariant::Naive => 1.0,
    };
    let mut g1 = Tensor2::zeros(d, 4 * d);
    let mut g2 = Tensor2::zeros(4 * d, d);
    let mut gb = Tensor2::zeros(1, 4 * d);
    for (i, c) in layout.sig.clone().enumerate() {
        g1.set(c, i, 1.0);
        g1.set(c, k + i, -1.0);
        g2.set(i, c, kappa);
        g2.set(k + i, c, -kappa);
    }
    gb.set(0, 2 * k, 1.0);
    g2.set(2 * k, layout.bias, 1.0);
    let ffn = MlpParams::new(g1, gb, g2, Tensor2::zeros(1, d))?;

    Ok(TimParams {
        weight_mlp,
        fuse_mlp,
        attn,
        ffn,
        ffn_activation: Activation::Relu,
        ffn_residual: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{detection_decode, heads as run_heads, FrameFeatures};
    use crate::scenario::{generate, ScenarioConfig, ScenarioKind};

    #[test]
    fn single_token_is_copied() {
        let layout = Layout::new(64).unwrap();
        let cfg = StructuredConfig::default();
        let p = decoder(&layout, &cfg, 1, 0).unwrap();
        let mut tok = vec![0.0; 64];
        tok[layout.sig.start] = 1.0;
        layout.encode_position(0.4, 0.6, &mut tok);
        tok[layout.obj] = 1.0;
        let feats = FrameFeatures::new(1, Tensor2::row_vector(&tok), Tensor2::row_vector(&[0.4, 0.6])).unwrap();
        let q = vec![DetectQuery {
            embedding: {
                let mut e = vec![0.0; 64];
                e[layout.bias] = 1.0;
                e
            },
            anchor: (0.4, 0.6),
        }];
        let out = detection_decode(&q, &feats, &p).unwrap();
        for c in 0..64 {
            assert!((out.get(0, c) - tok[c]).abs() < 1e-9, "channel {c}");
        }
    }

    #[test]
    fn planted_targets_fire_nearest_queries() {
        let layout = Layout::new(64).unwrap();
        let cfg = StructuredConfig::default();
        let p = decoder(&layout, &cfg, 1, 0).unwrap();
        let queries = detect_queries(&layout, &cfg);
        let mut sc = ScenarioConfig::new(ScenarioKind::Linear, 3, 1, 11);
        sc.distractors = 0;
        let s = generate(&sc).unwrap();
        let feats = &s.frames[0];
        // move the three targets onto three anchors
        let spots = [(0.125, 0.125), (0.625, 0.375), (0.375, 0.875)];
        let mut tokens = feats.tokens.clone();
        let mut positions = feats.positions.clone();
        for (row, &(x, y)) in spots.iter().enumerate() {
            layout.encode_position(x, y, tokens.row_mut(row));
            positions.set(row, 0, x);
            positions.set(row, 1, y);
        }
        let feats = FrameFeatures::new(1, tokens, positions).unwrap();
        let out = detection_decode(&queries, &feats, &p).unwrap();
        let hits: Vec<usize> = run_heads(&out, &p)
            .unwrap()
            .iter()
            .enumerate()
            .filter(|(_, (_, c))| *c > 0.5)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(hits, vec![0, 6, 13]);
    }

    #[test]
    fn tim_keeps_bias_and_unit_signature() {
        let layout = Layout::new(64).unwrap();
        let cfg = StructuredConfig::default();
        for v in TimVariant::ALL {
            tim(&layout, &cfg, v).unwrap().validate().unwrap();
        }
    }
}
