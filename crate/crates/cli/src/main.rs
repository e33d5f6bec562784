//! `memtrack`: simulate scenarios, track fixtures, evaluate MOT files and run
//! ablations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use memtrack_core::ablation::{self, SWEEP_LAMBDAS};
use memtrack_core::io::fixture::Fixture;
use memtrack_core::io::mot::{read_rows, write_rows, FrameSize, MotRow};
use memtrack_core::{
    evaluate, generate, run_sequence, selftest, Error, RunConfig, ScenarioConfig, ScenarioKind, Sequence,
    TimVariant,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "memtrack", version, about = "Memory-augmented multi-object tracking runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scenario: a frame fixture and its ground truth.
    Simulate(SimulateArgs),
    /// Run the tracker over a fixture and write MOT rows.
    Track(TrackArgs),
    /// Score predicted MOT rows against ground truth.
    Eval(EvalArgs),
    /// Compare module variants and memory rates on a seeded suite.
    Ablate(AblateArgs),
    /// Run the oracle suites and print one PASS/FAIL line each.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// linear, dance, crossing or occlusion_stress
    #[arg(long)]
    kind: ScenarioKind,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    targets: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    frames: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Token width
    #[arg(long, default_value_t = 64)]
    d: usize,
    /// Pairwise signature cosine; defaults to 0.9 for dance, 0.3 otherwise
    #[arg(long)]
    sigma_sim: Option<f64>,
    /// Receives fixture.bin and gt.txt
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1920.0)]
    frame_width: f64,
    #[arg(long, default_value_t = 1080.0)]
    frame_height: f64,
}

#[derive(Args, Debug)]
#[command(after_help = "Config keys and defaults (key=value, `version=1` required):\n  \
    d=64 heads=4 det_layers=1 joint_layers=5 init=structured seed=0\n  \
    tau_det=0.5 tau_track=0.5 tau_next=0.5 t_miss=30 lambda=0.01 iou_suppress=0.7\n  \
    variant=full ffn_residual=false frame_width=1920 frame_height=1080 params=<snapshot>\n  \
    anchors_per_side=4 det_pos=300 det_obj=145 det_sink=320 sig_scale=150\n  \
    joint_pos=20 joint_obj=20 joint_sink=130 conf_gain=20 weight_gain=10 mem_focus=100 beta=0.5")]
struct TrackArgs {
    #[arg(long)]
    fixture: PathBuf,
    /// Run config; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// MOT output file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Report file; printed to stdout when omitted
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// dance (20 scenarios, 8 targets, 200 frames) or quick (4 scenarios, 120 frames)
    #[arg(long, default_value = "dance")]
    suite: String,
    /// Comma-separated: full, memory-off, attn-off, naive
    #[arg(long, value_delimiter = ',', default_value = "full,memory-off,attn-off,naive")]
    variants: Vec<TimVariant>,
    /// Comma-separated memory rates for a sweep with the full module
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    lambdas: Vec<f64>,
    /// Run the standard sweep (0.005, 0.01, 0.02, 0.04, 1.0)
    #[arg(long, conflicts_with = "lambdas")]
    sweep: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Tracker thresholds and model scales
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the tables here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn load_config(path: Option<&Path>) -> std::result::Result<RunConfig, Failure> {
    Ok(match path {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    })
}

fn print_config(c: &RunConfig) {
    println!("# resolved config");
    print!("{}", c.to_text());
}

fn simulate(a: SimulateArgs) -> Outcome {
    let mut cfg = ScenarioConfig::new(a.kind, a.targets as usize, a.frames, a.seed);
    cfg.d = a.d;
    if let Some(s) = a.sigma_sim {
        cfg.sigma_sim = s;
    }
    let size = FrameSize {
        width: a.frame_width,
        height: a.frame_height,
    };
    println!(
        "simulate kind={} targets={} frames={} d={} sigma_sim={} seed={}",
        cfg.kind.name(),
        cfg.targets,
        cfg.frames,
        cfg.d,
        cfg.sigma_sim,
        cfg.seed
    );
    let scenario = generate(&cfg)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let fixture = a.out_dir.join("fixture.bin");
    let gt = a.out_dir.join("gt.txt");
    Fixture::new(cfg.d, scenario.frames.clone())?.write(&fixture)?;
    write_rows(&gt, &scenario.export_gt(size))?;
    println!("wrote {} and {}", fixture.display(), gt.display());
    Ok(())
}

fn track(a: TrackArgs) -> Outcome {
    let cfg = load_config(a.config.as_deref())?;
    print_config(&cfg);
    let fixture = Fixture::read(&a.fixture)?;
    if fixture.d != cfg.d {
        return Err(Error::Config(format!("fixture width {} but config d={}", fixture.d, cfg.d)).into());
    }
    let model = cfg.build_model()?;
    let results = run_sequence(&model, &cfg.tracker, &fixture.frames)?;
    let rows: Vec<MotRow> = results
        .iter()
        .flat_map(|r| {
            r.tracks
                .iter()
                .map(|t| MotRow::from_normalized(r.t, t.id, &t.bbox, t.confidence, cfg.frame))
        })
        .collect();
    write_rows(&a.out, &rows)?;
    println!("tracked {} frames, {} rows -> {}", results.len(), rows.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let mut gt = Sequence::from_rows(&read_rows(&a.gt)?)?;
    let mut pred = Sequence::from_rows(&read_rows(&a.pred)?)?;
    if let (Some(g), Some(p)) = (gt.frame_range(), pred.frame_range()) {
        if g != p {
            let (lo, hi) = (g.0.max(p.0), g.1.min(p.1));
            eprintln!(
                "warning: frame ranges differ (gt {}..={}, pred {}..={}); evaluating {lo}..={hi}",
                g.0, g.1, p.0, p.1
            );
            gt = gt.restrict(lo, hi);
            pred = pred.restrict(lo, hi);
        }
    }
    let text = evaluate(&gt, &pred)?.to_text();
    match &a.report {
        Some(path) => {
            write_file(path, &text)?;
            print!("{}", text.lines().take(6).map(|l| format!("{l}\n")).collect::<String>());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Outcome {
    let cfg = load_config(a.config.as_deref())?;
    let configs = ablation::suite(&a.suite, a.seed)?;
    print_config(&cfg);
    println!("# suite={} scenarios={} seed={}", a.suite, configs.len(), a.seed);
    let scenarios = ablation::generate_all(&configs)?;
    let mut out = String::new();
    if !a.variants.is_empty() {
        let rows = ablation::run_variants(&scenarios, &cfg.structured, &cfg.tracker, &a.variants)?;
        out.push_str(&ablation::format_table("variants", &rows));
    }
    let lambdas: Vec<f64> = if a.sweep { SWEEP_LAMBDAS.to_vec() } else { a.lambdas };
    if !lambdas.is_empty() {
        let rows = ablation::lambda_sweep(&scenarios, &cfg.structured, &cfg.tracker, &lambdas)?;
        out.push_str(&ablation::format_table("lambda sweep (full)", &rows));
    }
    print!("{out}");
    if let Some(p) = &a.out {
        write_file(p, &out)?;
    }
    Ok(())
}

fn run_selftest(a: SelftestArgs) -> Outcome {
    println!("# selftest seed={}", a.seed);
    let checks = selftest::run_all(a.seed);
    for c in &checks {
        println!("{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: format!("{failed} of {} suites failed", checks.len()),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Selftest(a) => run_selftest(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
