//! Component ablations and memory-rate sweeps over scenario suites.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::lifecycle::{run_sequence, Model, TrackerConfig};
use crate::memory::MemoryConfig;
use crate::metrics::{evaluate, Sequence};
use crate::scenario::{generate, Scenario, ScenarioConfig, ScenarioKind};
use crate::structured::StructuredConfig;
use crate::tim::TimVariant;

/// Memory rates of the sweep table.
pub const SWEEP_LAMBDAS: [f64; 5] = [0.005, 0.01, 0.02, 0.04, 1.0];

/// Dance scenarios with crowded, look-alike targets and occlusions of up to 20 frames.
pub fn dance_suite(count: usize, targets: usize, frames: u32, sigma_sim: f64, seed: u64) -> Vec<ScenarioConfig> {
    (0..count as u64)
        .map(|i| {
            let mut c = ScenarioConfig::new(ScenarioKind::Dance, targets, frames, seed + i);
            c.sigma_sim = sigma_sim;
            c
        })
        .collect()
}

/// Named suites: `dance` (20 scenarios) and `quick` (4 scenarios).
pub fn suite(name: &str, seed: u64) -> Result<Vec<ScenarioConfig>> {
    match name {
        "dance" => Ok(dance_suite(20, 8, 200, 0.9, seed)),
        "quick" => Ok(dance_suite(4, 8, 120, 0.9, seed)),
        _ => Err(Error::Input(format!("unknown suite '{name}' (dance, quick)"))),
    }
}

/// Mean metrics of one model setting over a suite; `idsw` is the total.
#[derive(Clone, Debug, PartialEq)]
pub struct Score {
    pub variant: TimVariant,
    pub lambda: f64,
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub mota: f64,
    pub idf1: f64,
    pub idsw: usize,
}

pub fn score(
    scenarios: &[Scenario],
    structured: &StructuredConfig,
    base: &TrackerConfig,
    variant: TimVariant,
    lambda: f64,
) -> Result<Score> {
    let layout = scenarios
        .first()
        .map(|s| s.layout.clone())
        .map_or_else(|| Layout::new(64), Ok)?;
    let model = Model::structured(&layout, structured, variant)?;
    let cfg = TrackerConfig {
        variant,
        memory: MemoryConfig::new(lambda)?,
        ..*base
    };
    let mut s = Score {
        variant,
        lambda,
        hota: 0.0,
        det_a: 0.0,
        ass_a: 0.0,
        mota: 0.0,
        idf1: 0.0,
        idsw: 0,
    };
    for sc in scenarios {
        let out = run_sequence(&model, &cfg, &sc.frames)?;
        let r = evaluate(&Sequence::from_truth(sc), &Sequence::from_results(&out))?;
        s.hota += r.hota.hota;
        s.det_a += r.hota.det_a;
        s.ass_a += r.hota.ass_a;
        s.mota += r.clear.mota;
        s.idf1 += r.identity.idf1;
        s.idsw += r.clear.idsw;
    }
    let n = scenarios.len().max(1) as f64;
    for v in [&mut s.hota, &mut s.det_a, &mut s.ass_a, &mut s.mota, &mut s.idf1] {
        *v /= n;
    }
    Ok(s)
}

pub fn generate_all(configs: &[ScenarioConfig]) -> Result<Vec<Scenario>> {
    configs.iter().map(generate).collect()
}

pub fn run_variants(
    scenarios: &[Scenario],
    structured: &StructuredConfig,
    base: &TrackerConfig,
    variants: &[TimVariant],
) -> Result<Vec<Score>> {
    variants
        .iter()
        .map(|&v| score(scenarios, structured, base, v, base.memory.lambda))
        .collect()
}

pub fn lambda_sweep(
    scenarios: &[Scenario],
    structured: &StructuredConfig,
    base: &TrackerConfig,
    lambdas: &[f64],
) -> Result<Vec<Score>> {
    lambdas
        .iter()
        .map(|&l| score(scenarios, structured, base, TimVariant::Full, l))
        .collect()
}

pub fn format_table(title: &str, scores: &[Score]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {title}");
    let _ = writeln!(
        s,
        "{:<11} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}",
        "variant", "lambda", "HOTA", "DetA", "AssA", "MOTA", "IDF1", "IDSW"
    );
    for r in scores {
        let _ = writeln!(
            s,
            "{:<11} {:>7} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>6}",
            r.variant.name(),
            r.lambda,
            100.0 * r.hota,
            100.0 * r.det_a,
            100.0 * r.ass_a,
            100.0 * r.mota,
            100.0 * r.idf1,
            r.idsw
        );
    }
    s
}
