//! The evolutionary loop shared by the three representations, plus run
//! output and scenario replay.

use super::config::{ExperimentConfig, RecordPolicy, Representation};
use super::report::{summary_rows, write_csv, ViolationRow};
use super::RunError;
use crate::dedup::{dedup, DedupReport, KindSummary};
use crate::genome::{
    mating_pairs, mutate_genes, mutate_one_gene, mutate_scenario, nsga2_select, sample_scenario, swap_whole_obstacles,
    two_point_crossover, EvaluatedScenario, ObjectiveVector, ScenarioGenome, ScenarioLimits,
};
use crate::lane_map::LaneMap;
use crate::oracles::{evaluate, Thresholds, Violation, ViolationKind};
use crate::simulator::{simulate, write_record, PlannerConfig, Trace};
use crate::validity::ConstraintTable;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCENARIO_FORMAT: &str = "forge-scenario";
pub const SCENARIO_VERSION: u32 = 1;

/// A replayable scenario as written to `scenarios/<id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub format: String,
    pub version: u32,
    pub scenario_id: String,
    pub map_id: String,
    pub planner: PlannerConfig,
    pub thresholds: Thresholds,
    pub scenario: ScenarioGenome,
    /// Violations logged when the scenario was first evaluated.
    pub violations: Vec<Violation>,
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| RunError::json(path, e))?;
        if file.format != SCENARIO_FORMAT {
            return Err(RunError::Format(format!("{} is not a scenario file", path.display())));
        }
        if file.version != SCENARIO_VERSION {
            return Err(RunError::Format(format!(
                "scenario schema version {} is not supported (expected {SCENARIO_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub evaluated: usize,
    /// Violations found in this generation's evaluations.
    pub violations: BTreeMap<ViolationKind, usize>,
    /// Violations logged so far, this generation included.
    pub cumulative: BTreeMap<ViolationKind, usize>,
    /// Best value of each objective among this generation's evaluations.
    pub best: ObjectiveVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueViolation {
    pub kind: ViolationKind,
    pub scenario_id: String,
    pub t_first: f64,
    /// Relative to the run directory.
    pub scenario_file: String,
    pub record_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub representation: Representation,
    pub seed: u64,
    pub map_id: String,
    pub population_size: usize,
    pub evaluations: usize,
    pub generations: Vec<GenerationSummary>,
    pub kinds: BTreeMap<ViolationKind, KindSummary>,
    pub total: KindSummary,
    pub unique: Vec<UniqueViolation>,
}

/// Wall-clock seconds per stage. Kept apart from the report so reports
/// stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTimings {
    pub total: f64,
    pub breeding: f64,
    /// Summed over scenarios, so it can exceed `total` with several workers.
    pub simulation: f64,
    pub oracles: f64,
    pub dedup: f64,
    pub per_scenario: f64,
}

/// Everything a run produced, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub timings: RunTimings,
    pub violations: Vec<Violation>,
    pub dedup: DedupReport,
    /// Genomes of every scenario that produced a violation, by scenario id.
    pub scenarios: BTreeMap<String, ScenarioGenome>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    map: &'a LaneMap,
    limits: ScenarioLimits,
}

impl Context<'_> {
    fn table(&self) -> &ConstraintTable {
        &self.cfg.constraints
    }
}

pub fn scenario_id(generation: usize, index: usize) -> String {
    format!("g{generation:04}_s{index:04}")
}

/// Simulates and grades one scenario, tagging its violations with `id`.
pub fn evaluate_scenario(
    genome: &ScenarioGenome,
    id: &str,
    map: &LaneMap,
    planner: &PlannerConfig,
    thresholds: &Thresholds,
) -> Result<(EvaluatedScenario, Trace), RunError> {
    let mut trace = simulate(genome, map, planner)?;
    trace.scenario_id = id.to_string();
    let mut ev = evaluate(&trace, map, thresholds)?;
    for v in &mut ev.violations {
        v.scenario_id = id.to_string();
    }
    let scenario = EvaluatedScenario {
        genome: genome.clone(),
        objectives: ev.objectives,
        per_obstacle_min_distance: ev.per_obstacle_min_distance,
        violations: ev.violations,
    };
    Ok((scenario, trace))
}

fn evaluate_batch(
    ctx: &Context,
    generation: usize,
    genomes: Vec<ScenarioGenome>,
    timings: &mut RunTimings,
) -> Result<Vec<EvaluatedScenario>, RunError> {
    let results: Vec<Result<(EvaluatedScenario, f64, f64), RunError>> = genomes
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let id = scenario_id(generation, i);
            let t0 = Instant::now();
            let mut trace = simulate(g, ctx.map, &ctx.cfg.planner)?;
            trace.scenario_id = id.clone();
            let sim = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let mut ev = evaluate(&trace, ctx.map, &ctx.cfg.thresholds)?;
            for v in &mut ev.violations {
                v.scenario_id = id.clone();
            }
            let oracle = t1.elapsed().as_secs_f64();
            let scenario = EvaluatedScenario {
                genome: g.clone(),
                objectives: ev.objectives,
                per_obstacle_min_distance: ev.per_obstacle_min_distance,
                violations: ev.violations,
            };
            Ok((scenario, sim, oracle))
        })
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        let (s, sim, oracle) = r?;
        timings.simulation += sim;
        timings.oracles += oracle;
        out.push(s);
    }
    Ok(out)
}

fn random_batch(ctx: &Context, rng: &mut ChaCha8Rng) -> Result<Vec<ScenarioGenome>, RunError> {
    (0..ctx.cfg.population_size).map(|_| Ok(sample_scenario(ctx.table(), ctx.map, &ctx.limits, rng)?)).collect()
}

fn finish_child(ctx: &Context, mut g: ScenarioGenome, rng: &mut ChaCha8Rng) -> Result<ScenarioGenome, RunError> {
    g.dedupe_ids();
    g.enforce_ego_clearance(ctx.table(), ctx.map, &ctx.limits, rng)?;
    Ok(g)
}

fn scenario_mutation(ctx: &Context, pop: &[EvaluatedScenario], rng: &mut ChaCha8Rng) -> Vec<ScenarioGenome> {
    let s = &ctx.cfg.search;
    (0..pop.len())
        .map(|i| {
            let donor = &pop[rng.gen_range(0..pop.len())];
            mutate_scenario(&pop[i], donor, rng, s.p_add, s.p_remove, &ctx.limits)
        })
        .collect()
}

/// Gene-level breeding: obstacles inside each scenario are paired for
/// two-point crossover, then single obstacles get per-gene mutation.
/// Operator results that cannot be repaired leave the obstacle unchanged.
fn breed_full(ctx: &Context, pop: &[EvaluatedScenario], rng: &mut ChaCha8Rng) -> Result<Vec<ScenarioGenome>, RunError> {
    let s = &ctx.cfg.search;
    let mut out = Vec::with_capacity(pop.len());
    for mut g in scenario_mutation(ctx, pop, rng) {
        for (a, b) in mating_pairs(g.obstacles.len(), rng) {
            if rng.gen_bool(s.p_crossover) {
                if let Ok((ca, cb)) = two_point_crossover(&g.obstacles[a], &g.obstacles[b], ctx.table(), ctx.map, rng) {
                    g.obstacles[a] = ca;
                    g.obstacles[b] = cb;
                }
            }
        }
        for o in &mut g.obstacles {
            if rng.gen_bool(s.p_gene_mutation) {
                if let Ok(m) = mutate_genes(o, ctx.table(), ctx.map, rng, s.p_gene_resample) {
                    *o = m;
                }
            }
        }
        out.push(finish_child(ctx, g, rng)?);
    }
    Ok(out)
}

/// Obstacle-level breeding: scenarios are paired and swap whole
/// obstacles, then single obstacles get one resampled gene.
fn breed_partial(
    ctx: &Context,
    pop: &[EvaluatedScenario],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ScenarioGenome>, RunError> {
    let s = &ctx.cfg.search;
    let mut children = scenario_mutation(ctx, pop, rng);
    for (a, b) in mating_pairs(children.len(), rng) {
        if rng.gen_bool(s.p_crossover) {
            let (lo, hi) = (a.min(b), a.max(b));
            let (left, right) = children.split_at_mut(hi);
            swap_whole_obstacles(&mut left[lo], &mut right[0], rng);
        }
    }
    let mut out = Vec::with_capacity(children.len());
    for mut g in children {
        for o in &mut g.obstacles {
            if rng.gen_bool(s.p_gene_mutation) {
                if let Ok(m) = mutate_one_gene(o, ctx.table(), ctx.map, rng) {
                    *o = m;
                }
            }
        }
        out.push(finish_child(ctx, g, rng)?);
    }
    Ok(out)
}

fn best_objectives(batch: &[EvaluatedScenario]) -> ObjectiveVector {
    let mut best = [f64::INFINITY; 5];
    for s in batch {
        for (b, v) in best.iter_mut().zip(s.objectives.minimization()) {
            *b = b.min(v);
        }
    }
    // undo the sign flip of the maximized objectives
    ObjectiveVector::new(best[0], best[1], -best[2], -best[3], best[4])
}

fn count_kinds<'a>(vs: impl Iterator<Item = &'a Violation>) -> BTreeMap<ViolationKind, usize> {
    let mut m: BTreeMap<ViolationKind, usize> = ViolationKind::ALL.iter().map(|&k| (k, 0)).collect();
    for v in vs {
        *m.entry(v.kind).or_default() += 1;
    }
    m
}

/// Runs one experiment in memory. Deterministic for a given config unless
/// the wall-clock cap cuts it short.
pub fn execute(cfg: &ExperimentConfig, map: &LaneMap) -> Result<RunOutcome, RunError> {
    cfg.check()?;
    let ctx = Context { cfg, map, limits: cfg.limits() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut timings = RunTimings::default();
    let started = Instant::now();

    let mut log: Vec<Violation> = Vec::new();
    let mut scenarios = BTreeMap::new();
    let mut generations = Vec::new();
    let mut evaluations = 0;

    let mut record = |generation: usize, batch: &[EvaluatedScenario], log: &mut Vec<Violation>| {
        let found = count_kinds(batch.iter().flat_map(|s| &s.violations));
        for s in batch {
            if let Some(first) = s.violations.first() {
                scenarios.insert(first.scenario_id.clone(), s.genome.clone());
            }
            log.extend(s.violations.iter().cloned());
        }
        evaluations += batch.len();
        generations.push(GenerationSummary {
            generation,
            evaluated: batch.len(),
            violations: found,
            cumulative: count_kinds(log.iter()),
            best: best_objectives(batch),
        });
    };

    let t = Instant::now();
    let initial = random_batch(&ctx, &mut rng)?;
    timings.breeding += t.elapsed().as_secs_f64();
    let mut population = evaluate_batch(&ctx, 0, initial, &mut timings)?;
    record(0, &population, &mut log);

    for generation in 1..=cfg.generations {
        if let Some(minutes) = cfg.wall_clock_minutes {
            if started.elapsed().as_secs_f64() >= minutes * 60.0 {
                break;
            }
        }
        let t = Instant::now();
        let children = match cfg.representation {
            Representation::Full => breed_full(&ctx, &population, &mut rng)?,
            Representation::Partial => breed_partial(&ctx, &population, &mut rng)?,
            Representation::Random => random_batch(&ctx, &mut rng)?,
        };
        timings.breeding += t.elapsed().as_secs_f64();
        let offspring = evaluate_batch(&ctx, generation, children, &mut timings)?;
        record(generation, &offspring, &mut log);
        population = match cfg.representation {
            Representation::Random => offspring,
            _ => {
                let mut pool = population;
                pool.extend(offspring);
                let objectives: Vec<ObjectiveVector> = pool.iter().map(|s| s.objectives).collect();
                let keep = nsga2_select(&objectives, cfg.population_size)?;
                keep.into_iter().map(|i| pool[i].clone()).collect()
            }
        };
    }

    let t = Instant::now();
    let report = dedup(&log);
    timings.dedup = t.elapsed().as_secs_f64();
    timings.total = started.elapsed().as_secs_f64();
    timings.per_scenario = if evaluations > 0 { timings.total / evaluations as f64 } else { 0.0 };

    let mut kinds: BTreeMap<ViolationKind, KindSummary> =
        ViolationKind::ALL.iter().map(|&k| (k, KindSummary::new(0, 0))).collect();
    kinds.extend(report.kinds.iter().map(|(k, s)| (*k, s.clone())));
    let total = KindSummary::new(log.len(), report.unique_count());
    let unique = report
        .representatives
        .iter()
        .map(|&i| {
            let v = &log[i];
            UniqueViolation {
                kind: v.kind,
                scenario_id: v.scenario_id.clone(),
                t_first: v.t_first,
                scenario_file: scenario_path(&v.scenario_id),
                record_file: record_path(&v.scenario_id),
            }
        })
        .collect();

    Ok(RunOutcome {
        report: RunReport {
            representation: cfg.representation,
            seed: cfg.seed,
            map_id: map.name().to_string(),
            population_size: cfg.population_size,
            evaluations,
            generations,
            kinds,
            total,
            unique,
        },
        timings,
        violations: log,
        dedup: report,
        scenarios,
    })
}

pub fn scenario_path(id: &str) -> String {
    format!("scenarios/{id}.json")
}

pub fn record_path(id: &str) -> String {
    format!("records/{id}.jsonl")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::json(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| RunError::io(path, e))
}

/// Writes a run directory: `report.json`, `timings.json`,
/// `violations.json`, `dedup.json`, `config.json`, `summary.csv` and
/// `violations.csv`, plus scenario and record files chosen by the record
/// policy.
pub fn write_run(outcome: &RunOutcome, cfg: &ExperimentConfig, map: &LaneMap) -> Result<(), RunError> {
    let dir = &cfg.out;
    for sub in ["scenarios", "records"] {
        let p = dir.join(sub);
        if p.exists() {
            std::fs::remove_dir_all(&p).map_err(|e| RunError::io(&p, e))?;
        }
        std::fs::create_dir_all(&p).map_err(|e| RunError::io(&p, e))?;
    }
    write_json(&dir.join("report.json"), &outcome.report)?;
    write_json(&dir.join("timings.json"), &outcome.timings)?;
    write_json(&dir.join("violations.json"), &outcome.violations)?;
    write_json(&dir.join("dedup.json"), &outcome.dedup)?;
    write_json(&dir.join("config.json"), cfg)?;
    write_csv(&dir.join("summary.csv"), summary_rows(&[&outcome.report]))?;
    write_csv(&dir.join("violations.csv"), outcome.violations.iter().map(ViolationRow::from))?;

    let keep: BTreeSet<&str> = match cfg.records {
        RecordPolicy::Unique => outcome.report.unique.iter().map(|u| u.scenario_id.as_str()).collect(),
        RecordPolicy::All => outcome.scenarios.keys().map(String::as_str).collect(),
    };
    let ids: Vec<&str> = keep.into_iter().collect();
    // re-simulating is deterministic, so records need not be held in memory
    let written: Vec<Result<(), RunError>> = ids
        .par_iter()
        .map(|&id| {
            let genome = &outcome.scenarios[id];
            let violations: Vec<Violation> =
                outcome.violations.iter().filter(|v| v.scenario_id == id).cloned().collect();
            let file = ScenarioFile {
                format: SCENARIO_FORMAT.into(),
                version: SCENARIO_VERSION,
                scenario_id: id.to_string(),
                map_id: map.name().to_string(),
                planner: cfg.planner.clone(),
                thresholds: cfg.thresholds,
                scenario: genome.clone(),
                violations,
            };
            write_json(&dir.join(scenario_path(id)), &file)?;
            let mut trace = simulate(genome, map, &cfg.planner)?;
            trace.scenario_id = id.to_string();
            write_record(&trace, dir.join(record_path(id)))?;
            Ok(())
        })
        .collect();
    written.into_iter().collect()
}

/// Result of re-simulating a scenario file.
#[derive(Debug, Clone)]
pub struct Replay {
    pub file: ScenarioFile,
    pub trace: Trace,
    pub violations: Vec<Violation>,
}

impl Replay {
    /// Whether re-grading reproduced the logged violations exactly.
    pub fn consistent(&self) -> bool {
        self.violations == self.file.violations
    }

    pub fn kinds(&self) -> BTreeSet<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }
}

pub fn replay(path: impl AsRef<Path>, map: &LaneMap) -> Result<Replay, RunError> {
    let file = ScenarioFile::load(path)?;
    if file.map_id != map.name() {
        return Err(RunError::Format(format!("scenario was generated on map {:?}, not {:?}", file.map_id, map.name())));
    }
    let (ev, trace) = evaluate_scenario(&file.scenario, &file.scenario_id, map, &file.planner, &file.thresholds)?;
    Ok(Replay { file, trace, violations: ev.violations })
}

/// Loads the map, runs the experiment and writes its directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    cfg.check()?;
    let map = LaneMap::load(&cfg.map)?;
    let outcome = execute(cfg, &map)?;
    write_run(&outcome, cfg, &map)?;
    Ok(outcome)
}

/// Reads `report.json` from a run directory.
pub fn load_report(dir: impl AsRef<Path>) -> Result<RunReport, RunError> {
    let path: PathBuf = dir.as_ref().join("report.json");
    let text = std::fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| RunError::json(&path, e))
}

/// Reads `violations.json` from a run directory.
pub fn load_violations(dir: impl AsRef<Path>) -> Result<Vec<Violation>, RunError> {
    let path: PathBuf = dir.as_ref().join("violations.json");
    let text = std::fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| RunError::json(&path, e))
}
