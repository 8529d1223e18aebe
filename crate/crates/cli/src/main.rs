use clap::{Parser, Subcommand};
use forge_core::dedup::dedup;
use forge_core::harness::{
    load_report, load_violations, mann_whitney_u, replay, run_experiment, vargha_delaney_a12, ExperimentFile,
    Representation, RunError, RunReport, TOTAL_ROW,
};
use forge_core::lane_map::LaneMap;
use forge_core::oracles::ViolationKind;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "forge", version, about = "Evolve driving scenarios that make the ego planner misbehave")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this seed only, instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of generations after the initial population.
        #[arg(long)]
        budget: Option<usize>,
        /// Stop after this many minutes (checked between generations).
        #[arg(long = "wall-clock")]
        wall_clock: Option<f64>,
        /// Run this representation only.
        #[arg(long)]
        rep: Option<Representation>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-simulate a scenario file and re-grade it.
    Replay {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        map: PathBuf,
    },
    /// Deduplicate the violations logged in a run or experiment directory.
    Dedup {
        #[arg(long)]
        violations: PathBuf,
    },
    /// Compare unique-violation counts of two sets of runs.
    Stats {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values always serialize"));
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    budget: Option<usize>,
    wall_clock: Option<f64>,
    rep: Option<Representation>,
    map: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let mut file = ExperimentFile::load(config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = seed {
        file.seeds = vec![s];
    }
    if let Some(b) = budget {
        file.generations = b;
    }
    if wall_clock.is_some() {
        file.wall_clock_minutes = wall_clock;
    }
    if let Some(r) = rep {
        file.representations = vec![r];
    }
    if let Some(m) = map {
        file.map = m;
    }
    if let Some(o) = out {
        file.out = o;
    }
    let outcomes = run_experiment(&file)?;
    for o in &outcomes {
        let r = &o.report;
        println!(
            "{} seed {}: {} scenarios, {} violations, {} unique ({:.2}% eliminated)",
            r.representation,
            r.seed,
            r.evaluations,
            r.total.all_count,
            r.total.unique_count,
            r.total.eliminated_percent
        );
    }
    println!("report written to {}", file.out.display());
    Ok(())
}

fn cmd_replay(scenario: &Path, map: &Path) -> Result<(), Failure> {
    let map = LaneMap::load(map).map_err(|e| Failure::Config(e.to_string()))?;
    let r = replay(scenario, &map)?;
    let consistent = r.consistent();
    print_json(&json!({
        "scenario_id": r.file.scenario_id,
        "consistent": consistent,
        "logged": r.file.violations,
        "replayed": r.violations,
    }));
    if consistent {
        Ok(())
    } else {
        Err(Failure::Runtime("replayed violations differ from the logged ones".into()))
    }
}

/// Run directories under `dir`: `dir` itself if it holds `file`, otherwise
/// its immediate subdirectories that do, in name order.
fn run_dirs(dir: &Path, file: &str) -> Result<Vec<PathBuf>, Failure> {
    if dir.join(file).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let mut dirs: Vec<PathBuf> =
        entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join(file).is_file()).collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Failure::Runtime(format!("no {file} found in {}", dir.display())));
    }
    Ok(dirs)
}

fn cmd_dedup(dir: &Path) -> Result<(), Failure> {
    let mut all = Vec::new();
    for d in run_dirs(dir, "violations.json")? {
        all.extend(load_violations(&d)?);
    }
    let report = dedup(&all);
    print_json(&json!({
        "violations": all.len(),
        "unique": report.unique_count(),
        "kinds": report.kinds,
        "partitions": report.partitions,
    }));
    Ok(())
}

fn unique_counts(reports: &[RunReport], label: &str) -> Vec<f64> {
    reports
        .iter()
        .map(|r| {
            if label == TOTAL_ROW {
                r.total.unique_count as f64
            } else {
                r.kinds.iter().find(|(k, _)| k.as_str() == label).map_or(0.0, |(_, s)| s.unique_count as f64)
            }
        })
        .collect()
}

fn cmd_stats(a: &Path, b: &Path) -> Result<(), Failure> {
    let load = |dir: &Path| -> Result<Vec<RunReport>, Failure> {
        run_dirs(dir, "report.json")?.iter().map(|d| load_report(d).map_err(Failure::from)).collect()
    };
    let (ra, rb) = (load(a)?, load(b)?);
    let labels = ViolationKind::ALL.iter().map(|k| k.as_str()).chain([TOTAL_ROW]);
    let mut rows = Vec::new();
    for label in labels {
        let (xs, ys) = (unique_counts(&ra, label), unique_counts(&rb, label));
        let p = mann_whitney_u(&xs, &ys).map_err(|e| Failure::Runtime(e.to_string()))?;
        let a12 = vargha_delaney_a12(&xs, &ys).map_err(|e| Failure::Runtime(e.to_string()))?;
        rows.push(json!({ "kind": label, "a": xs, "b": ys, "p_value": p.p_value, "exact": p.exact, "a12": a12 }));
    }
    print_json(&json!({ "runs_a": ra.len(), "runs_b": rb.len(), "comparisons": rows }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, budget, wall_clock, rep, map, out } => {
            cmd_run(&config, seed, budget, wall_clock, rep, map, out)
        }
        Command::Replay { scenario, map } => cmd_replay(&scenario, &map),
        Command::Dedup { violations } => cmd_dedup(&violations),
        Command::Stats { a, b } => cmd_stats(&a, &b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
