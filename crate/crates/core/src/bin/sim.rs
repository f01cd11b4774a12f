//! `sim <scenario|config-file>`: run a built-in figure scenario or a
//! scenario file and write CSV/JSON/SVG outputs plus a manifest.
//!
//! Exit status: 0 success, 2 completed with a pull-in outcome, 1 error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use casimir_gradiometer::scenario::{self, RunOptions, ScenarioSpec, BUILTINS};

/// Default output directory when `--out` is not given.
const OUT_ENV: &str = "CASIMIR_SIM_OUT";

#[derive(Debug, Parser)]
#[command(name = "sim", version, about = "Casimir-coupled resonator scenarios")]
struct Args {
    /// Built-in scenario (fig3, fig5a, fig5b, fig5c, fig6, fig7) or a scenario file.
    scenario: String,
    /// Output directory [env: CASIMIR_SIM_OUT; default out/<name>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Threads for sweep points.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Integration step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated time per run (s).
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    no_plots: bool,
}

fn load(arg: &str) -> Result<ScenarioSpec, String> {
    if let Some(spec) = scenario::builtin(arg) {
        return Ok(spec);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| {
        format!(
            "`{arg}` is neither a built-in scenario ({}) nor a readable file: {e}",
            BUILTINS.join(", ")
        )
    })?;
    scenario::parse_config(&text).map_err(|e| format!("{arg}: {e}"))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut spec = match load(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = scenario::apply_overrides(&mut spec, args.dt, args.duration) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let out_dir = args
        .out
        .or_else(|| std::env::var_os(OUT_ENV).map(|d| PathBuf::from(d).join(&spec.name)));
    let opts = RunOptions {
        out_dir,
        plots: !args.no_plots,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.max(1))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start workers: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| scenario::run_scenario(&spec, &opts)) {
        Ok(m) => {
            for f in &m.outputs {
                println!("{}  {}", f.sha256, f.path);
            }
            println!("{}: {:.1} s", m.scenario, m.wall_seconds);
            if m.pulled_in {
                println!("pull-in occurred in at least one run");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
