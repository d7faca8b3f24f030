//! `p2psim`: load, validate and run overlay scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use p2p_patterns::scenario::{self, presets, RunArtifacts, RunError, Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "p2psim", version, about = "Deterministic peer-to-peer overlay simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file or a preset by name.
    Run {
        scenario: String,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for metrics.csv, summary.txt and scenario.toml.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the overlay snapshot nearest to this time (seconds).
        #[arg(long, value_name = "T")]
        export_topology: Option<f64>,
        /// Number of consecutive seeds to run, one subdirectory each.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Run the seeds concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Check a scenario file or preset without running it.
    Validate { scenario: String },
    /// Print every key with its default value.
    PrintDefaults,
    /// List the built-in presets.
    ListPresets,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

fn load(arg: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::load(path);
    }
    presets::load(arg).unwrap_or_else(|| {
        Err(ScenarioError::Io {
            path: arg.to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or preset"),
        })
    })
}

fn exit_for(e: &RunError) -> ExitCode {
    match e {
        RunError::Invariant(_) => ExitCode::from(EXIT_INVARIANT),
        RunError::Scenario(_) | RunError::Setup(_) => ExitCode::from(EXIT_CONFIG),
        RunError::NoSnapshot | RunError::Io { .. } => ExitCode::FAILURE,
    }
}

fn finish(art: &RunArtifacts, dir: &Path, export: Option<f64>) -> Result<(), RunError> {
    art.write(dir)?;
    if let Some(t) = export {
        let path = dir.join("topology.edges");
        let at = scenario::export_topology(art, t, &path)?;
        eprintln!("wrote snapshot at t={at} to {}", path.display());
    }
    print!("{}", art.summary);
    Ok(())
}

fn run_cmd(s: Scenario, out: &Path, export: Option<f64>, runs: u64, parallel: bool) -> ExitCode {
    if runs <= 1 {
        let result = scenario::run(&s).and_then(|art| finish(&art, out, export));
        return match result {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                exit_for(&e)
            }
        };
    }
    let seeds: Vec<u64> = (0..runs).map(|i| s.seed.wrapping_add(i)).collect();
    let results = if parallel {
        scenario::run_batch(&s, &seeds)
    } else {
        seeds.iter().map(|&seed| scenario::run(&Scenario { seed, ..s.clone() })).collect()
    };
    let mut code = ExitCode::SUCCESS;
    for (seed, r) in seeds.iter().zip(results) {
        let dir = out.join(format!("seed-{seed}"));
        println!("# seed {seed}");
        if let Err(e) = r.and_then(|art| finish(&art, &dir, export)) {
            eprintln!("error (seed {seed}): {e}");
            code = exit_for(&e);
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { scenario, seed, out, export_topology, runs, parallel } => match load(&scenario) {
            Ok(mut s) => {
                if let Some(seed) = seed {
                    s.seed = seed;
                }
                run_cmd(s, &out, export_topology, runs, parallel)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Cmd::Validate { scenario } => match load(&scenario) {
            Ok(s) => {
                println!("ok: {} overlay, {} nodes, {} s", format!("{:?}", s.overlay).to_lowercase(), s.nodes, s.duration_s);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Cmd::PrintDefaults => {
            print!("{}", scenario::defaults_text());
            ExitCode::SUCCESS
        }
        Cmd::ListPresets => {
            for p in presets::PRESETS {
                println!("{:<22} {}", p.name, p.about);
            }
            ExitCode::SUCCESS
        }
    }
}
