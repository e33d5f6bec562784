//! Split decoder: detection layers over the detect queries alone, then joint
//! layers over detect and track queries together, followed by box and
//! confidence heads.

use rand::Rng;

use crate::attention::{mha_on, mlp2_on, Activation, AttentionParams, AttentionVars, MlpParams, MlpVars};
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::linalg::{sigmoid_scalar, Tape, Tensor2, Var};

/// Axis-aligned box in normalized image coordinates, center form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_ltwh(left: f64, top: f64, w: f64, h: f64) -> Self {
        Self::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    /// Decodes box-head logits: sigmoid centre, and width and height as a
    /// sigmoid share of the widest extent that fits around that centre. The
    /// result always lies inside the unit square.
    pub fn from_logits(z: [f64; 4]) -> Self {
        let cx = sigmoid_scalar(z[0]);
        let cy = sigmoid_scalar(z[1]);
        let w = sigmoid_scalar(z[2]) * 2.0 * cx.min(1.0 - cx);
        let h = sigmoid_scalar(z[3]) * 2.0 * cy.min(1.0 - cy);
        Self::new(cx, cy, w, h)
    }

    /// Inverse of [`BoundingBox::from_logits`] for boxes strictly inside the unit square.
    pub fn to_logits(&self) -> [f64; 4] {
        let logit = |p: f64| {
            let p = p.clamp(1e-12, 1.0 - 1e-12);
            (p / (1.0 - p)).ln()
        };
        let room_x = 2.0 * self.cx.min(1.0 - self.cx);
        let room_y = 2.0 * self.cy.min(1.0 - self.cy);
        [
            logit(self.cx),
            logit(self.cy),
            logit(self.w / room_x),
            logit(self.h / room_y),
        ]
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Intersection over union; 0 when the union is empty.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.left().max(other.left())).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.top().max(other.top())).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectQuery {
    pub embedding: Vec<f64>,
    pub anchor: (f64, f64),
}

/// Detect queries on an `n x n` grid of cell centers, each holding the given embedding.
pub fn anchor_grid(n: usize, embedding: &[f64]) -> Vec<DetectQuery> {
    let mut out = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            out.push(DetectQuery {
                embedding: embedding.to_vec(),
                anchor: ((col as f64 + 0.5) / n as f64, (row as f64 + 0.5) / n as f64),
            });
        }
    }
    out
}

/// Encoded tokens of one frame. Row `i` of `positions` is `(x, y)` of token `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures {
    pub t: u32,
    pub tokens: Tensor2,
    pub positions: Tensor2,
}

impl FrameFeatures {
    pub fn new(t: u32, tokens: Tensor2, positions: Tensor2) -> Result<Self> {
        let f = Self { t, tokens, positions };
        f.validate()?;
        Ok(f)
    }

    pub fn empty(t: u32, d: usize) -> Self {
        Self {
            t,
            tokens: Tensor2::zeros(0, d),
            positions: Tensor2::zeros(0, 2),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.rows() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.shape() != (self.tokens.rows(), 2) {
            return Err(Error::shape(
                "FrameFeatures",
                format!("{} tokens but positions {:?}", self.tokens.rows(), self.positions.shape()),
            ));
        }
        self.tokens.ensure_finite("FrameFeatures.tokens")?;
        self.positions.ensure_finite("FrameFeatures.positions")
    }
}

/// Query embeddings with the anchors their positional codes come from.
#[derive(Clone, Debug, PartialEq)]
pub struct QuerySet {
    pub embeddings: Tensor2,
    pub anchors: Vec<(f64, f64)>,
}

impl QuerySet {
    pub fn new(embeddings: Tensor2, anchors: Vec<(f64, f64)>) -> Result<Self> {
        if embeddings.rows() != anchors.len() {
            return Err(Error::shape(
                "QuerySet",
                format!("{} embeddings, {} anchors", embeddings.rows(), anchors.len()),
            ));
        }
        Ok(Self { embeddings, anchors })
    }

    pub fn empty(d: usize) -> Self {
        Self {
            embeddings: Tensor2::zeros(0, d),
            anchors: Vec::new(),
        }
    }

    pub fn from_queries(queries: &[DetectQuery], d: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(queries.len() * d);
        for q in queries {
            if q.embedding.len() != d {
                return Err(Error::shape(
                    "DetectQuery",
                    format!("embedding width {} vs model width {d}", q.embedding.len()),
                ));
            }
            data.extend_from_slice(&q.embedding);
        }
        Self::new(
            Tensor2::new(queries.len(), d, data)?,
            queries.iter().map(|q| q.anchor).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// One decoder layer. Sub-layers set to `None` are skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderLayer {
    pub self_attn: Option<AttentionParams>,
    pub cross_attn: AttentionParams,
    pub ffn: Option<MlpParams>,
    /// Scale on the skip path around cross-attention (1 is a plain residual).
    pub keep: f64,
}

impl DecoderLayer {
    /// Passes queries through unchanged.
    pub fn identity(d: usize, heads: usize) -> Self {
        Self {
            self_attn: None,
            cross_attn: AttentionParams::zeros(d, heads),
            ffn: None,
            keep: 1.0,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, d: usize, heads: usize) -> Self {
        Self {
            self_attn: Some(AttentionParams::random(rng, d, heads)),
            cross_attn: AttentionParams::random(rng, d, heads),
            ffn: Some(MlpParams::random(rng, d, 4 * d, d)),
            keep: 1.0,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let mut attns = vec![&self.cross_attn];
        attns.extend(self.self_attn.as_ref());
        for a in attns {
            a.validate()?;
            if a.width() != d {
                return Err(Error::shape("DecoderLayer", format!("attention width {} vs {d}", a.width())));
            }
        }
        if let Some(f) = &self.ffn {
            f.validate()?;
            if f.input_width() != d || f.output_width() != d {
                return Err(Error::shape("DecoderLayer", "ffn must map d -> d"));
            }
        }
        Ok(())
    }

    fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> LayerVars {
        LayerVars {
            self_attn: self.self_attn.as_ref().map(|a| a.bind(tape)),
            cross_attn: self.cross_attn.bind(tape),
            ffn: self.ffn.as_ref().map(|f| f.bind(tape)),
            keep: self.keep,
        }
    }

    fn tensors(&self, prefix: &str) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        if let Some(a) = &self.self_attn {
            out.extend(a.tensors(&format!("{prefix}.self_attn")));
        }
        out.extend(self.cross_attn.tensors(&format!("{prefix}.cross_attn")));
        if let Some(f) = &self.ffn {
            out.extend(f.tensors(&format!("{prefix}.ffn")));
        }
        out
    }

    fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor2)> {
        let mut out = Vec::new();
        if let Some(a) = &mut self.self_attn {
            out.extend(a.tensors_mut(&format!("{prefix}.self_attn")));
        }
        out.extend(self.cross_attn.tensors_mut(&format!("{prefix}.cross_attn")));
        if let Some(f) = &mut self.ffn {
            out.extend(f.tensors_mut(&format!("{prefix}.ffn")));
        }
        out
    }
}

struct LayerVars {
    self_attn: Option<AttentionVars>,
    cross_attn: AttentionVars,
    ffn: Option<MlpVars>,
    keep: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams {
    pub layout: Layout,
    pub det_layers: Vec<DecoderLayer>,
    pub joint_layers: Vec<DecoderLayer>,
    /// d -> 4 box logits.
    pub box_head: MlpParams,
    /// d -> 1 confidence logit.
    pub conf_head: MlpParams,
}

pub const DEFAULT_DET_LAYERS: usize = 1;
pub const DEFAULT_JOINT_LAYERS: usize = 5;

impl DecoderParams {
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        layout: Layout,
        det_layers: usize,
        joint_layers: usize,
        heads: usize,
    ) -> Self {
        let d = layout.d;
        Self {
            det_layers: (0..det_layers).map(|_| DecoderLayer::random(rng, d, heads)).collect(),
            joint_layers: (0..joint_layers).map(|_| DecoderLayer::random(rng, d, heads)).collect(),
            box_head: MlpParams::random(rng, d, d, 4),
            conf_head: MlpParams::random(rng, d, d, 1),
            layout,
        }
    }

    pub fn width(&self) -> usize {
        self.layout.d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.width();
        for layer in self.det_layers.iter().chain(&self.joint_layers) {
            layer.validate(d)?;
        }
        for (name, head, out) in [("box_head", &self.box_head, 4), ("conf_head", &self.conf_head, 1)] {
            head.validate()?;
            if head.input_width() != d || head.output_width() != out {
                return Err(Error::shape("DecoderParams", format!("{name} must map {d} -> {out}")));
            }
        }
        Ok(())
    }

    pub fn tensors(&self, prefix: &str) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        for (i, l) in self.det_layers.iter().enumerate() {
            out.extend(l.tensors(&format!("{prefix}.det{i}")));
        }
        for (i, l) in self.joint_layers.iter().enumerate() {
            out.extend(l.tensors(&format!("{prefix}.joint{i}")));
        }
        out.extend(self.box_head.tensors(&format!("{prefix}.box_head")));
        out.extend(self.conf_head.tensors(&format!("{prefix}.conf_head")));
        out
    }

    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor2)> {
        let mut out = Vec::new();
        for (i, l) in self.det_layers.iter_mut().enumerate() {
            out.extend(l.tensors_mut(&format!("{prefix}.det{i}")));
        }
        for (i, l) in self.joint_layers.iter_mut().enumerate() {
            out.extend(l.tensors_mut(&format!("{prefix}.joint{i}")));
        }
        out.extend(self.box_head.tensors_mut(&format!("{prefix}.box_head")));
        out.extend(self.conf_head.tensors_mut(&format!("{prefix}.conf_head")));
        out
    }
}

fn position_codes(layout: &Layout, points: impl Iterator<Item = (f64, f64)>) -> Tensor2 {
    let rows: Vec<Vec<f64>> = points.map(|(x, y)| layout.position_vector(x, y)).collect();
    let n = rows.len();
    Tensor2::new(n, layout.d, rows.concat()).expect("rows have model width")
}

/// Keys (`tokens + code(position)`) and values (`tokens`) for cross-attention.
fn memory_inputs(feats: &FrameFeatures, p: &DecoderParams) -> Result<(Tensor2, Tensor2)> {
    feats.validate()?;
    let d = p.width();
    if feats.tokens.cols() != d && !feats.is_empty() {
        return Err(Error::shape(
            "decoder",
            format!("token width {} vs model width {d}", feats.tokens.cols()),
        ));
    }
    let values = if feats.is_empty() {
        Tensor2::zeros(0, d)
    } else {
        feats.tokens.clone()
    };
    let codes = position_codes(
        &p.layout,
        (0..feats.len()).map(|i| (feats.positions.get(i, 0), feats.positions.get(i, 1))),
    );
    let keys = if feats.is_empty() { values.clone() } else { values.add(&codes)? };
    Ok((keys, values))
}

fn run_layers<'a>(
    tape: &mut Tape<'a>,
    layers: &'a [DecoderLayer],
    mut x: Var,
    query_codes: Var,
    keys: Var,
    values: Var,
) -> Result<Var> {
    for layer in layers {
        let v = layer.bind(tape);
        if let Some(sa) = &v.self_attn {
            let qk = tape.add(x, query_codes)?;
            let s = mha_on(tape, qk, qk, x, sa)?;
            x = tape.add(x, s)?;
        }
        let q = tape.add(x, query_codes)?;
        let c = mha_on(tape, q, keys, values, &v.cross_attn)?;
        x = if v.keep == 1.0 {
            tape.add(x, c)?
        } else {
            let kept = tape.scale(x, v.keep);
            tape.add(kept, c)?
        };
        if let Some(f) = &v.ffn {
            let y = mlp2_on(tape, x, f, Activation::Relu)?;
            x = tape.add(x, y)?;
        }
    }
    Ok(x)
}

fn decode(queries: &QuerySet, layers: &[DecoderLayer], feats: &FrameFeatures, p: &DecoderParams) -> Result<Tensor2> {
    p.validate()?;
    let d = p.width();
    if queries.embeddings.cols() != d && !queries.is_empty() {
        return Err(Error::shape(
            "decoder",
            format!("query width {} vs model width {d}", queries.embeddings.cols()),
        ));
    }
    if queries.is_empty() {
        return Ok(Tensor2::zeros(0, d));
    }
    let (keys, values) = memory_inputs(feats, p)?;
    let codes = position_codes(&p.layout, queries.anchors.iter().copied());
    let mut tape = Tape::new();
    let x = tape.param(&queries.embeddings);
    let qc = tape.leaf(codes);
    let k = tape.leaf(keys);
    let v = tape.leaf(values);
    let out = run_layers(&mut tape, layers, x, qc, k, v)?;
    let out = tape.value(out).clone();
    out.ensure_finite("decoder")?;
    Ok(out)
}

/// Detection layers over the detect queries alone; returns `E_det`.
pub fn detection_decode(queries: &[DetectQuery], feats: &FrameFeatures, p: &DecoderParams) -> Result<Tensor2> {
    let set = QuerySet::from_queries(queries, p.width())?;
    decode(&set, &p.det_layers, feats, p)
}

/// Joint layers over `[E_det; E_tck]`; returns `(O_det, O_tck)`.
pub fn joint_decode(
    det: &QuerySet,
    tck: &QuerySet,
    feats: &FrameFeatures,
    p: &DecoderParams,
) -> Result<(Tensor2, Tensor2)> {
    let d = p.width();
    let parts: Vec<&Tensor2> = [&det.embeddings, &tck.embeddings]
        .into_iter()
        .filter(|t| t.rows() > 0)
        .collect();
    let joined = if parts.is_empty() {
        Tensor2::zeros(0, d)
    } else {
        Tensor2::concat_rows(&parts)?
    };
    let mut anchors = det.anchors.clone();
    anchors.extend_from_slice(&tck.anchors);
    let out = decode(&QuerySet::new(joined, anchors)?, &p.joint_layers, feats, p)?;
    let n = det.len();
    Ok((out.slice_rows(0, n)?, out.slice_rows(n, out.rows())?))
}

/// Box and confidence for every output row.
pub fn heads(outputs: &Tensor2, p: &DecoderParams) -> Result<Vec<(BoundingBox, f64)>> {
    if outputs.rows() == 0 {
        return Ok(Vec::new());
    }
    let b = crate::attention::mlp2(outputs, &p.box_head, Activation::Relu)?;
    let c = crate::attention::mlp2(outputs, &p.conf_head, Activation::Relu)?;
    Ok((0..outputs.rows())
        .map(|i| {
            let bx = BoundingBox::from_logits([b.get(i, 0), b.get(i, 1), b.get(i, 2), b.get(i, 3)]);
            (bx, sigmoid_scalar(c.get(i, 0)))
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Newborn,
    Tracked,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub confidence: f64,
    pub source: Source,
    pub embedding: Vec<f64>,
}

/// Indices of the detect outputs that become newborn tracks.
///
/// A candidate needs `confidence > tau_det` and IoU at most `iou_suppress`
/// with every tracked output. Candidates are then suppressed greedily by
/// confidence against each other with the same IoU bound. The result keeps
/// the original candidate order.
pub fn select_newborns(candidates: &[Detection], tracked: &[Detection], tau_det: f64, iou_suppress: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len())
        .filter(|&i| {
            let c = &candidates[i];
            c.confidence > tau_det && tracked.iter().all(|t| c.bbox.iou(&t.bbox) <= iou_suppress)
        })
        .collect();
    order.sort_by(|&a, &b| candidates[b].confidence.total_cmp(&candidates[a].confidence).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| candidates[i].bbox.iou(&candidates[k].bbox) <= iou_suppress) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Tracked outputs followed by the accepted newborns.
pub fn merge_newborns(candidates: &[Detection], tracked: &[Detection], tau_det: f64, iou_suppress: f64) -> Vec<Detection> {
    let mut out = tracked.to_vec();
    out.extend(
        select_newborns(candidates, tracked, tau_det, iou_suppress)
            .into_iter()
            .map(|i| Detection {
                source: Source::Newborn,
                ..candidates[i].clone()
            }),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_decoder(d: usize) -> DecoderParams {
        DecoderParams {
            layout: Layout::new(d).unwrap(),
            det_layers: vec![DecoderLayer::identity(d, 4)],
            joint_layers: vec![DecoderLayer::identity(d, 4); 2],
            box_head: MlpParams::zeros(d, d, 4),
            conf_head: MlpParams::zeros(d, d, 1),
        }
    }

    fn det(cx: f64, conf: f64) -> Detection {
        Detection {
            bbox: BoundingBox::new(cx, 0.5, 0.1, 0.1),
            confidence: conf,
            source: Source::Tracked,
            embedding: Vec::new(),
        }
    }

    #[test]
    fn identity_layers_keep_queries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = identity_decoder(32);
        let emb = random_tensor(&mut rng, 1, 32, 1.0);
        let queries = anchor_grid(4, emb.row(0));
        let out = detection_decode(&queries, &FrameFeatures::empty(1, 32), &p).unwrap();
        for i in 0..16 {
            assert_eq!(out.row(i), emb.row(0));
        }
        let feats = FrameFeatures::new(1, random_tensor(&mut rng, 5, 32, 1.0), Tensor2::filled(5, 2, 0.3)).unwrap();
        let out2 = detection_decode(&queries, &feats, &p).unwrap();
        assert_eq!(out, out2);
    }

    #[test]
    fn logits_round_trip_and_stay_inside() {
        let b = BoundingBox::new(0.2, 0.7, 0.1, 0.3);
        let back = BoundingBox::from_logits(b.to_logits());
        for (x, y) in [(b.cx, back.cx), (b.cy, back.cy), (b.w, back.w), (b.h, back.h)] {
            assert!((x - y).abs() < 1e-12);
        }
        for z in [[40.0, -40.0, 40.0, 40.0], [0.0, 3.0, 5.0, -2.0]] {
            let b = BoundingBox::from_logits(z);
            assert!(b.left() >= 0.0 && b.right() <= 1.0 && b.top() >= 0.0 && b.bottom() <= 1.0);
        }
    }

    #[test]
    fn zero_heads_are_half() {
        let p = identity_decoder(32);
        let out = heads(&Tensor2::filled(2, 32, 3.0), &p).unwrap();
        for (b, c) in out {
            assert_eq!(b, BoundingBox::new(0.5, 0.5, 0.5, 0.5));
            assert_eq!(c, 0.5);
        }
    }

    #[test]
    fn joint_split_preserves_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = identity_decoder(32);
        let a = QuerySet::new(random_tensor(&mut rng, 3, 32, 1.0), vec![(0.1, 0.1); 3]).unwrap();
        let b = QuerySet::new(random_tensor(&mut rng, 2, 32, 1.0), vec![(0.9, 0.9); 2]).unwrap();
        let (od, ot) = joint_decode(&a, &b, &FrameFeatures::empty(0, 32), &p).unwrap();
        assert_eq!(od, a.embeddings);
        assert_eq!(ot, b.embeddings);
        let (od, ot) = joint_decode(&a, &QuerySet::empty(32), &FrameFeatures::empty(0, 32), &p).unwrap();
        assert_eq!((od.rows(), ot.rows()), (3, 0));
    }

    #[test]
    fn detection_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 32;
        let p = DecoderParams::random(&mut rng, Layout::new(d).unwrap(), 2, 1, 4);
        let queries: Vec<DetectQuery> = (0..5)
            .map(|i| DetectQuery {
                embedding: random_tensor(&mut rng, 1, d, 1.0).into_data(),
                anchor: (0.1 * i as f64, 0.2),
            })
            .collect();
        let feats = FrameFeatures::new(3, random_tensor(&mut rng, 6, d, 1.0), random_tensor(&mut rng, 6, 2, 0.3)).unwrap();
        let out = detection_decode(&queries, &feats, &p).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let shuffled: Vec<DetectQuery> = perm.iter().map(|&i| queries[i].clone()).collect();
        let out2 = detection_decode(&shuffled, &feats, &p).unwrap();
        for (row, &src) in perm.iter().enumerate() {
            for c in 0..d {
                assert!((out2.get(row, c) - out.get(src, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let p = identity_decoder(32);
        let feats = FrameFeatures::new(0, Tensor2::zeros(2, 16), Tensor2::zeros(2, 2)).unwrap();
        let q = anchor_grid(2, &[0.0; 32]);
        assert!(matches!(detection_decode(&q, &feats, &p), Err(Error::Shape { .. })));
    }

    #[test]
    fn iou_half_offset_is_a_third() {
        let a = BoundingBox::from_ltwh(0.0, 0.0, 1.0, 1.0);
        let b = BoundingBox::from_ltwh(0.5, 0.0, 1.0, 1.0);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.iou(&BoundingBox::from_ltwh(2.0, 2.0, 1.0, 1.0)), 0.0);
        let z = BoundingBox::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(z.iou(&z), 0.0);
    }

    #[test]
    fn newborn_rules() {
        let tracked = vec![det(0.5, 0.9)];
        let cands = vec![det(0.5, 0.95), det(0.2, 0.5), det(0.2, 0.51), det(0.8, 0.7), det(0.805, 0.9)];
        // 0 overlaps a track, 1 sits at the threshold, 3 loses to 4
        assert_eq!(select_newborns(&cands, &tracked, 0.5, 0.7), vec![2, 4]);
        let merged = merge_newborns(&cands, &tracked, 0.5, 0.7);
        assert_eq!(merged.len(), 3);
        assert_eq!(merged[0].source, Source::Tracked);
        assert!(merged[1..].iter().all(|d| d.source == Source::Newborn));
    }
}
