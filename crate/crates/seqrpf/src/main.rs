use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use seqrpf::config::parse_config;
use seqrpf::io::read_function;
use seqrpf::report::{emit_manifest, verify_manifest, write_report};
use seqrpf::{execute, prepare, Pipeline, RunError};
use seqrpf_core::cones::{logholder_family, LogHolderConeParams};
use seqrpf_core::metrics::FunctionalFamily;

#[derive(Parser)]
#[command(name = "seqrpf", version, about = "Sequential transfer operators, cones and twisted RPF triplets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `statistics.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory.
    #[arg(long, env = "SEQRPF_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo and sampling.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline named in the config.
    Run {
        path: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    Spectrum(Common),
    Rpf(Common),
    Cones(Common),
    Clt(Common),
    LyCheck(Common),
    /// Hilbert distance and complex gauge between two function files.
    Metrics(MetricsArgs),
    /// Compare artifacts in a report directory against its manifest.
    Verify { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConeChoice {
    Orthant,
    LogHolder,
}

#[derive(Args)]
struct MetricsArgs {
    f: PathBuf,
    g: PathBuf,
    #[arg(long, value_enum, default_value = "orthant")]
    cone: ConeChoice,
    #[arg(long, default_value_t = 4.0)]
    s: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = f64::INFINITY)]
    xi: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
}

fn load(path: &Path) -> Result<seqrpf::ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn pipeline_run(path: &Path, pipeline: Option<Pipeline>, common: &Common) -> Result<(), RunError> {
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| RunError::validation(format!("thread pool: {e}")))?;
    }
    let cfg = load(path)?;
    let out = common.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("reports"));
    let prepared = prepare(cfg, pipeline, common.seed)?;
    let report = execute(&prepared)?;
    fs::create_dir_all(&out)?;
    let written = write_report(&out, &report)?;
    let manifest = emit_manifest(&out, &report.config_hash, &[report.seed], &written)?;
    for s in &report.steps {
        println!("[{}] {}: {}", if s.ok { "ok" } else { "FAILED" }, s.name, s.detail);
    }
    for w in &written {
        println!("wrote {}", w.display());
    }
    for m in &manifest.mismatches {
        eprintln!("checksum mismatch: {}", m.path);
    }
    if report.steps.iter().any(|s| !s.ok) {
        return Err(RunError::runtime("one or more steps failed"));
    }
    if !manifest.mismatches.is_empty() {
        return Err(RunError::runtime(format!("{} artifacts changed since the last manifest", manifest.mismatches.len())));
    }
    Ok(())
}

fn metrics(a: &MetricsArgs) -> Result<(), RunError> {
    let f = read_function(&a.f)?;
    let g = read_function(&a.g)?;
    if f.grid != g.grid {
        return Err(RunError::validation("functions live on different grids"));
    }
    let grid = f.grid.clone();
    let family = match a.cone {
        ConeChoice::Orthant => FunctionalFamily::positive_orthant(Arc::clone(&grid)),
        ConeChoice::LogHolder => {
            let p = LogHolderConeParams::new(a.s, a.q, a.alpha, a.xi, a.gamma).map_err(RunError::setup)?;
            logholder_family(&p, &grid)
        }
    };
    let d = family.hilbert_distance(&f.real_part(), &g.real_part()).ok();
    let delta = family.delta_distance(&f, &g)?;
    let out = json!({
        "functionals": family.len(),
        "f_in_real_cone": family.real_cone_contains(&f)?,
        "g_in_real_cone": family.real_cone_contains(&g)?,
        "f_in_complex_cone": family.complex_cone_contains(&f)?,
        "g_in_complex_cone": family.complex_cone_contains(&g)?,
        "hilbert_distance_real_parts": d,
        "delta": delta,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    let with_config = |c: &Common, p: Pipeline| -> Result<(), RunError> {
        let path = c.config.as_ref().ok_or_else(|| RunError::validation("--config is required"))?;
        pipeline_run(path, Some(p), c)
    };
    match cli.command {
        Command::Run { path, common } => pipeline_run(&path, None, &common),
        Command::Spectrum(c) => with_config(&c, Pipeline::Spectrum),
        Command::Rpf(c) => with_config(&c, Pipeline::Rpf),
        Command::Cones(c) => with_config(&c, Pipeline::Cones),
        Command::Clt(c) => with_config(&c, Pipeline::Clt),
        Command::LyCheck(c) => with_config(&c, Pipeline::LyCheck),
        Command::Metrics(a) => metrics(&a),
        Command::Verify { dir } => {
            let bad = verify_manifest(&dir)?;
            for m in &bad {
                println!("mismatch {} recorded {} actual {}", m.path, m.recorded, m.actual.as_deref().unwrap_or("missing"));
            }
            if bad.is_empty() {
                println!("all artifacts match");
                Ok(())
            } else {
                Err(RunError::runtime(format!("{} checksum mismatches", bad.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
