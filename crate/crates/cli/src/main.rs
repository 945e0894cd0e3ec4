use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use liouvillian::causet::{Geometry, SprinkleRegion};
use liouvillian::error::{Error, Result};
use liouvillian::grid::GridSpec;
use liouvillian::output::emit_outputs;
use liouvillian::potentials::Potential;
use liouvillian::scenario::{load_scenario_with, Scenario};
use liouvillian::studies::{
    run_decoherence_study, run_equivalence_study, run_evolve, run_order_study, run_segment_check,
    run_spectrum_study, run_void_study, StudyOutput,
};
use toml::Value;

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "liouvillian", version, about = "Phase-space and density-matrix evolution studies")]
struct Cli {
    /// Seed for every random stream; overrides `noise.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Classical,
    Qq,
    Vonneumann,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Quenched,
    Resampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Ball,
    Box,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one scenario with one engine.
    Evolve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        engine: Option<Engine>,
    },
    /// Run all three engines and compare them pairwise.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// Measure the time-step convergence order against the exact harmonic flow instead.
        #[arg(long)]
        order: bool,
    },
    /// Noise ensemble against the Lindblad equation on a cat state.
    Decohere {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Monte Carlo emptiness of sprinkled regions.
    Void {
        /// Region radius; several comma-separated values give one row each.
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        dr: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, value_enum, default_value = "ball")]
        geometry: Shape,
    },
    /// Identities of the potential-difference operator.
    Segcheck {
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
    },
    /// Eigenvalues of the dense phase-space generator.
    Spectrum {
        /// Take potential and grid from a scenario instead of the built-in set.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn scenario_with(path: &Path, seed: Option<u64>, mut overrides: Vec<(String, Value)>) -> Result<Scenario> {
    if let Some(s) = seed {
        let s = i64::try_from(s).map_err(|_| Error::validation("--seed", "must fit in a signed 64-bit integer"))?;
        overrides.push(("noise.seed".into(), Value::Integer(s)));
    }
    // an unreadable scenario is the user's input problem, not a failed run
    load_scenario_with(path, &overrides).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        e => e,
    })
}

fn merge_void(outputs: Vec<StudyOutput>, drs: &[f64]) -> StudyOutput {
    let mut iter = outputs.into_iter();
    let mut merged = iter.next().expect("at least one radius");
    if drs.len() == 1 {
        return merged;
    }
    let tag = |dr: f64, name: &str| format!("dr{dr}_{name}");
    for m in &mut merged.report.metrics {
        m.name = tag(drs[0], &m.name);
    }
    for (out, &dr) in iter.zip(&drs[1..]) {
        merged.report.wall_time += out.report.wall_time;
        merged.report.metrics.extend(out.report.metrics.into_iter().map(|mut m| {
            m.name = tag(dr, &m.name);
            m
        }));
        merged.tables[0].rows.extend(out.tables.into_iter().flat_map(|t| t.rows));
    }
    merged
}

fn default_spectrum_set() -> Vec<Potential> {
    vec![
        Potential::Constant { value: 0.0 },
        Potential::Harmonic { omega: 1.0 },
        Potential::Quartic { lambda: 1.0 },
    ]
}

fn run(cli: Cli) -> Result<(StudyOutput, PathBuf)> {
    let seed = cli.seed;
    let (out, scenario_dir) = match cli.command {
        Command::Evolve { scenario, engine } => {
            let mut ov = Vec::new();
            if let Some(e) = engine {
                let name = match e {
                    Engine::Classical => "classical",
                    Engine::Qq => "qq",
                    Engine::Vonneumann => "vonneumann",
                };
                ov.push(("evolve.engine".into(), Value::String(name.into())));
            }
            let s = scenario_with(&scenario, seed, ov)?;
            (run_evolve(&s)?, s.output_dir)
        }
        Command::Compare { scenario, order } => {
            let s = scenario_with(&scenario, seed, Vec::new())?;
            let out = if order {
                run_order_study(&s)?
            } else {
                run_equivalence_study(&s)?
            };
            (out, s.output_dir)
        }
        Command::Decohere {
            scenario,
            realizations,
            mode,
        } => {
            let mut ov = Vec::new();
            if let Some(m) = realizations {
                ov.push(("noise.realizations".into(), Value::Integer(m as i64)));
            }
            if let Some(m) = mode {
                let name = match m {
                    Mode::Quenched => "quenched",
                    Mode::Resampled => "resampled",
                };
                ov.push(("noise.mode".into(), Value::String(name.into())));
            }
            let s = scenario_with(&scenario, seed, ov)?;
            (run_decoherence_study(&s)?, s.output_dir)
        }
        Command::Void {
            dr,
            rho,
            duration,
            trials,
            geometry,
        } => {
            let geometry = match geometry {
                Shape::Ball => Geometry::BallTimesInterval,
                Shape::Box => Geometry::Box,
            };
            let regions: Vec<SprinkleRegion> = dr
                .iter()
                .map(|&dr| SprinkleRegion {
                    dr,
                    duration,
                    geometry,
                    density: rho,
                })
                .collect();
            for r in &regions {
                r.validate()?;
            }
            let outputs = regions
                .iter()
                .map(|r| run_void_study(r, trials, seed.unwrap_or(0)).map(|(o, _)| o))
                .collect::<Result<Vec<_>>>()?;
            (merge_void(outputs, &dr), None)
        }
        Command::Segcheck { pairs } => (run_segment_check(seed.unwrap_or(0), pairs)?, None),
        Command::Spectrum { scenario } => match scenario {
            Some(path) => {
                let s = scenario_with(&path, seed, Vec::new())?;
                (run_spectrum_study(std::slice::from_ref(&s.potential), &s.grid)?, s.output_dir)
            }
            None => (run_spectrum_study(&default_spectrum_set(), &GridSpec::new(16, 4.0)?)?, None),
        },
    };
    let dir = cli
        .out
        .or(scenario_dir)
        .unwrap_or_else(|| PathBuf::from("out").join(&out.report.study));
    Ok((out, dir))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let result = run(cli).and_then(|(out, dir)| {
        let files = emit_outputs(&dir, &out)?;
        log::info!("wrote {} files to {}", files.len(), dir.display());
        Ok((out, dir))
    });
    match result {
        Ok((out, dir)) => {
            if !out.report.warnings.is_empty() {
                eprintln!("{} warnings, listed in summary.txt", out.report.warnings.len());
            }
            for m in &out.report.metrics {
                println!("{m}");
            }
            let verdict = if out.report.passed() { "PASS" } else { "FAIL" };
            println!("{verdict} {} -> {}", out.report.study, dir.display());
            if out.report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_configuration() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
