//! Flat `key=value` run configuration.
//!
//! Blank lines and `#` comments are ignored. `version=1` is required; unknown
//! or repeated keys are errors. Missing keys keep their defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decoder::{DEFAULT_DET_LAYERS, DEFAULT_JOINT_LAYERS};
use crate::error::{Error, Result};
use crate::io::mot::FrameSize;
use crate::io::params;
use crate::layout::Layout;
use crate::lifecycle::{Model, TrackerConfig};
use crate::memory::MemoryConfig;
use crate::structured::StructuredConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Hand-set weights from [`StructuredConfig`].
    Structured,
    /// Seeded random weights, usually overwritten by a snapshot.
    Random,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" => Ok(Init::Structured),
            "random" => Ok(Init::Random),
            _ => Err(Error::Config(format!("unknown init '{s}' (structured, random)"))),
        }
    }
}

impl Init {
    pub fn name(self) -> &'static str {
        match self {
            Init::Structured => "structured",
            Init::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub d: usize,
    pub heads: usize,
    pub det_layers: usize,
    pub joint_layers: usize,
    pub init: Init,
    pub seed: u64,
    pub ffn_residual: bool,
    pub params: Option<PathBuf>,
    pub tracker: TrackerConfig,
    pub structured: StructuredConfig,
    pub frame: FrameSize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 64,
            heads: 4,
            det_layers: DEFAULT_DET_LAYERS,
            joint_layers: DEFAULT_JOINT_LAYERS,
            init: Init::Structured,
            seed: 0,
            ffn_residual: false,
            params: None,
            tracker: TrackerConfig::default(),
            structured: StructuredConfig::default(),
            frame: FrameSize::default(),
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad value '{v}' for {key}"),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, v) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected key=value, got '{body}'"),
            })?;
            let (key, v) = (key.trim(), v.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("key '{key}' repeated on line {line}")));
            }
            let s = &mut c.structured;
            let t = &mut c.tracker;
            match key {
                "version" => {
                    let ver: u32 = value(key, v, line)?;
                    if ver != CONFIG_VERSION {
                        return Err(Error::Config(format!("unsupported config version {ver}")));
                    }
                }
                "d" => c.d = value(key, v, line)?,
                "heads" => c.heads = value(key, v, line)?,
                "det_layers" => c.det_layers = value(key, v, line)?,
                "joint_layers" => c.joint_layers = value(key, v, line)?,
                "init" => c.init = v.parse()?,
                "seed" => c.seed = value(key, v, line)?,
                "ffn_residual" => c.ffn_residual = value(key, v, line)?,
                "params" => c.params = (!v.is_empty()).then(|| PathBuf::from(v)),
                "frame_width" => c.frame.width = value(key, v, line)?,
                "frame_height" => c.frame.height = value(key, v, line)?,
                "tau_det" => t.tau_det = value(key, v, line)?,
                "tau_track" => t.tau_track = value(key, v, line)?,
                "tau_next" => t.tau_next = value(key, v, line)?,
                "t_miss" => t.t_miss = value(key, v, line)?,
                "iou_suppress" => t.iou_suppress = value(key, v, line)?,
                "lambda" => t.memory = MemoryConfig::new(value(key, v, line)?)?,
                "variant" => t.variant = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "anchors_per_side" => s.anchors_per_side = value(key, v, line)?,
                "det_pos" => s.det_pos = value(key, v, line)?,
                "det_obj" => s.det_obj = value(key, v, line)?,
                "det_sink" => s.det_sink = value(key, v, line)?,
                "sig_scale" => s.sig = value(key, v, line)?,
                "joint_pos" => s.joint_pos = value(key, v, line)?,
                "joint_obj" => s.joint_obj = value(key, v, line)?,
                "joint_sink" => s.joint_sink = value(key, v, line)?,
                "conf_gain" => s.conf_gain = value(key, v, line)?,
                "weight_gain" => s.weight_gain = value(key, v, line)?,
                "mem_focus" => s.mem_focus = value(key, v, line)?,
                "beta" => s.beta = value(key, v, line)?,
                _ => return Err(Error::Config(format!("unknown key '{key}' on line {line}"))),
            }
        }
        if !seen.contains("version") {
            return Err(Error::Config("missing version=1".into()));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text)?;
        // snapshot paths are relative to the config file
        if let (Some(p), Some(dir)) = (&c.params, path.parent()) {
            if p.is_relative() {
                c.params = Some(dir.join(p));
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        Layout::new(self.d).map_err(|e| Error::Config(e.to_string()))?;
        if self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return Err(Error::Config(format!("d={} is not divisible by heads={}", self.d, self.heads)));
        }
        if self.structured.anchors_per_side == 0 {
            return Err(Error::Config("anchors_per_side must be positive".into()));
        }
        if self.frame.width <= 0.0 || self.frame.height <= 0.0 {
            return Err(Error::Config("frame size must be positive".into()));
        }
        self.tracker.validate()
    }

    /// Builds the model, then loads the snapshot if one is configured.
    pub fn build_model(&self) -> Result<Model> {
        let layout = Layout::new(self.d)?;
        let mut model = match self.init {
            Init::Structured => Model::structured_with_layers(
                &layout,
                &self.structured,
                self.tracker.variant,
                self.det_layers,
                self.joint_layers,
            )?,
            Init::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Model::random_with_layers(
                    &mut rng,
                    layout,
                    self.heads,
                    self.structured.anchors_per_side,
                    self.det_layers,
                    self.joint_layers,
                )
            }
        };
        model.tim.ffn_residual = self.ffn_residual;
        if let Some(p) = &self.params {
            params::read_into(p, &mut model)?;
        }
        model.validate()?;
        Ok(model)
    }

    /// The fully resolved configuration, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let t = &self.tracker;
        let s = &self.structured;
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k}={v}");
        };
        kv("version", CONFIG_VERSION.to_string());
        kv("d", self.d.to_string());
        kv("heads", self.heads.to_string());
        kv("det_layers", self.det_layers.to_string());
        kv("joint_layers", self.joint_layers.to_string());
        kv("init", self.init.name().to_string());
        kv("seed", self.seed.to_string());
        kv("ffn_residual", self.ffn_residual.to_string());
        kv(
            "params",
            self.params.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        kv("frame_width", self.frame.width.to_string());
        kv("frame_height", self.frame.height.to_string());
        kv("tau_det", t.tau_det.to_string());
        kv("tau_track", t.tau_track.to_string());
        kv("tau_next", t.tau_next.to_string());
        kv("t_miss", t.t_miss.to_string());
        kv("iou_suppress", t.iou_suppress.to_string());
        kv("lambda", t.memory.lambda.to_string());
        kv("variant", t.variant.name().to_string());
        kv("anchors_per_side", s.anchors_per_side.to_string());
        kv("det_pos", s.det_pos.to_string());
        kv("det_obj", s.det_obj.to_string());
        kv("det_sink", s.det_sink.to_string());
        kv("sig_scale", s.sig.to_string());
        kv("joint_pos", s.joint_pos.to_string());
        kv("joint_obj", s.joint_obj.to_string());
        kv("joint_sink", s.joint_sink.to_string());
        kv("conf_gain", s.conf_gain.to_string());
        kv("weight_gain", s.weight_gain.to_string());
        kv("mem_focus", s.mem_focus.to_string());
        kv("beta", s.beta.to_string());
        o
    }
}
