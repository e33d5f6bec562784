//! Oracle suites shared by the `selftest` subcommand and the acceptance test.
//!
//! Each check draws seeded random cases, compares the fast path with its
//! reference and reports the worst deviation it saw.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{mha, AttentionParams, AttentionVars, MlpVars};
use crate::error::Result;
use crate::linalg::{grad_check, random_tensor, Tensor2, Var};
use crate::memory::{ema_update, init_memory, MemoryConfig};
use crate::metrics::{clear_mot, hota, hungarian, identity};
use crate::metrics::hungarian::assignment_cost;
use crate::oracle;
use crate::tim::{next_embedding_on, TimParams, TimVariant, TimVars};

/// Outcome of one suite.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{} {} ({}; {:.3}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Memory rates checked against the closed form.
pub const EMA_LAMBDAS: [f64; 4] = [0.005, 0.01, 0.02, 0.04];

/// 100 iterated memory updates toward a fixed output against
/// `M0 + (1 - (1 - lambda)^k)(O - M0)`, relative to the magnitude of the inputs.
pub fn ema_closed_form(seed: u64) -> Check {
    timed("ema closed form", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for lambda in EMA_LAMBDAS {
            let cfg = MemoryConfig::new(lambda)?;
            let m0: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0)).collect();
            let o: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut m = init_memory(&m0)?;
            for _ in 0..100 {
                m = ema_update(&m, &o, &cfg)?;
            }
            let k = 100;
            for c in 0..64 {
                let closed = m0[c] + (1.0 - (1.0 - lambda).powi(k)) * (o[c] - m0[c]);
                let scale = closed.abs().max(m0[c].abs()).max(o[c].abs());
                worst = worst.max((m.value()[c] - closed).abs() / scale);
            }
        }
        Ok((worst <= 1e-12, format!("max relative error {worst:.2e}")))
    })
}

fn mlp_vars(v: &[Var]) -> MlpVars {
    MlpVars {
        w1: v[0],
        b1: v[1],
        w2: v[2],
        b2: v[3],
    }
}

/// Worst relative gradient error of the full temporal module, d=16, 4 tracks.
/// With `with_params` every parameter is checked as well as the three inputs.
pub fn tim_gradient_error(seed: u64, with_params: bool) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = TimParams::random(&mut rng, 16, 4);
    let mut inputs = vec![
        random_tensor(&mut rng, 4, 16, 1.0),
        random_tensor(&mut rng, 4, 16, 1.0),
        random_tensor(&mut rng, 4, 16, 1.0),
    ];
    let params: Vec<Tensor2> = p.tensors("tim").into_iter().map(|(_, t)| t.clone()).collect();
    if with_params {
        inputs.extend(params.iter().cloned());
    }
    let probe = random_tensor(&mut rng, 4, 16, 1.0);
    grad_check(
        |tape, v| {
            let w: Vec<Var> = if with_params {
                v[3..].to_vec()
            } else {
                params.iter().map(|t| tape.leaf(t.clone())).collect()
            };
            let vars = TimVars {
                weight_mlp: mlp_vars(&w[0..4]),
                fuse_mlp: mlp_vars(&w[4..8]),
                attn: AttentionVars {
                    wq: w[8],
                    wk: w[9],
                    wv: w[10],
                    wo: w[11],
                    sinks: None,
                    heads: p.attn.heads,
                },
                ffn: mlp_vars(&w[12..16]),
                ffn_activation: p.ffn_activation,
                ffn_residual: p.ffn_residual,
            };
            let e = next_embedding_on(tape, v[0], v[1], v[2], &vars, TimVariant::Full)?;
            let r = tape.leaf(probe.clone());
            let y = tape.mul(e, r)?;
            Ok(tape.sum(y))
        },
        &inputs,
        1e-5,
    )
}

/// Central differences against the tape for the inputs of the temporal module
/// (`O_t`, `O_prev`, `M`). Parameter gradients are reported alongside but not
/// gated: some are near 1e-6 in size, where difference noise alone reaches
/// 1e-5 relative, and a perturbed weight occasionally steps across a ReLU kink.
pub fn tim_gradients(seeds: u64) -> Check {
    timed("tim gradients", || {
        let (mut inputs, mut params): (f64, f64) = (0.0, 0.0);
        for seed in 0..seeds {
            inputs = inputs.max(tim_gradient_error(seed, false)?);
            params = params.max(tim_gradient_error(seed, true)?);
        }
        Ok((
            inputs < 1e-5,
            format!("{seeds} seeds; inputs max relative error {inputs:.2e}, with parameters {params:.2e}"),
        ))
    })
}

/// Softmax normalisation, joint key/value permutation invariance and
/// single-key pass-through.
pub fn attention_invariants(cases: usize, seed: u64) -> Check {
    timed("attention invariants", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut sum_err, mut perm_err, mut pass_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for _ in 0..cases {
            let heads = rng.random_range(1..=4);
            let d = heads * rng.random_range(1..=4);
            let nq = rng.random_range(1..=5);
            let nk = rng.random_range(1..=6);
            let logits = random_tensor(&mut rng, nq, nk, 10.0);
            for row in 0..nq {
                let s: f64 = logits.softmax_rows().row(row).iter().sum();
                sum_err = sum_err.max((s - 1.0).abs());
            }
            // constant values expose the weight sum of every head
            let q = random_tensor(&mut rng, nq, d, 1.0);
            let k = random_tensor(&mut rng, nk, d, 1.0);
            let mut p = AttentionParams::random(&mut rng, d, heads);
            p.wv = Tensor2::identity(d);
            p.wo = Tensor2::identity(d);
            let ones = mha(&q, &k, &Tensor2::filled(nk, d, 1.0), &p)?;
            for v in ones.data() {
                sum_err = sum_err.max((v - 1.0).abs());
            }

            let p = AttentionParams::random(&mut rng, d, heads);
            let v = random_tensor(&mut rng, nk, d, 1.0);
            let mut perm: Vec<usize> = (0..nk).collect();
            for i in (1..nk).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let a = mha(&q, &k, &v, &p)?;
            let b = mha(&q, &k.select_rows(&perm), &v.select_rows(&perm), &p)?;
            perm_err = perm_err.max(a.max_abs_diff(&b));

            let one = mha(&q, &k.slice_rows(0, 1)?, &v.slice_rows(0, 1)?, &p)?;
            let expect = v.slice_rows(0, 1)?.matmul(&p.wv)?.matmul(&p.wo)?;
            for r in 0..nq {
                for c in 0..d {
                    pass_err = pass_err.max((one.get(r, c) - expect.get(0, c)).abs());
                }
            }
        }
        let ok = sum_err <= 1e-12 && perm_err <= 1e-12 && pass_err == 0.0;
        Ok((
            ok,
            format!("{cases} cases; sum {sum_err:.1e}, permutation {perm_err:.1e}, pass-through {pass_err:.1e}"),
        ))
    })
}

/// Assignment cost against factorial enumeration on integer-valued costs,
/// where both sums are exact.
pub fn hungarian_optimality(instances: usize, seed: u64) -> Check {
    timed("hungarian optimality", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mismatches = 0;
        for _ in 0..instances {
            let rows = rng.random_range(1..=7);
            let cols = rng.random_range(1..=7);
            let cost: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(0..100) as f64).collect())
                .collect();
            let pairs = hungarian(&cost)?;
            if pairs.len() != rows.min(cols) || assignment_cost(&cost, &pairs) != oracle::min_assignment_cost(&cost) {
                mismatches += 1;
            }
        }
        Ok((mismatches == 0, format!("{mismatches} of {instances} instances differ")))
    })
}

/// HOTA, CLEAR-MOT and IDF1 against their brute-force definitions, plus the
/// perfect-tracking identity.
pub fn metrics_oracles(instances: usize, seed: u64) -> Check {
    timed("metrics oracles", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut idsw_diff = 0;
        let mut perfect = true;
        for _ in 0..instances {
            let (gt, pred) = oracle::random_instance(&mut rng, 5, 20);
            let h = hota(&gt, &pred)?;
            let (oh, od, oa) = oracle::hota(&gt, &pred);
            let c = clear_mot(&gt, &pred)?;
            let oc = oracle::clear_mot(&gt, &pred);
            let i = identity(&gt, &pred)?;
            let oi = oracle::identity(&gt, &pred);
            for (a, b) in [
                (h.hota, oh),
                (h.det_a, od),
                (h.ass_a, oa),
                (c.mota, oc.mota),
                (c.motp, oc.motp),
                (i.idf1, oi.idf1),
            ] {
                worst = worst.max((a - b).abs());
            }
            idsw_diff += c.idsw.abs_diff(oc.idsw);

            let h = hota(&gt, &gt)?;
            let c = clear_mot(&gt, &gt)?;
            let i = identity(&gt, &gt)?;
            perfect &= [h.hota, h.det_a, h.ass_a, c.mota, i.idf1].iter().all(|&v| v == 1.0);
        }
        Ok((
            worst <= 1e-9 && idsw_diff == 0 && perfect,
            format!("{instances} instances; max deviation {worst:.1e}, IDSW differences {idsw_diff}, perfect input exact: {perfect}"),
        ))
    })
}

/// Every suite with its default size.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        ema_closed_form(seed),
        tim_gradients(10),
        attention_invariants(100, seed),
        hungarian_optimality(200, seed),
        metrics_oracles(100, seed),
    ]
}
