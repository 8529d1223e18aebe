mod common;

use common::{map, map_path};
use forge_core::genome::ScenarioLimits;
use forge_core::harness::{
    emit_report, execute, load_report, replay, run, run_experiment, ExperimentConfig, ExperimentFile, RecordPolicy,
    Representation, RunEntry, ScenarioFile, INSUFFICIENT,
};
use forge_core::oracles::ViolationKind;
use forge_core::validity::validate;
use std::collections::BTreeSet;
use std::path::Path;

fn small(rep: Representation, seed: u64, out: impl AsRef<Path>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(rep, map_path("grid_3x3"), seed, out.as_ref());
    cfg.population_size = 6;
    cfg.max_obstacles = 10;
    cfg.duration = 15.0;
    cfg.generations = 3;
    cfg
}

#[test]
fn same_seed_same_report() {
    let m = map("grid_3x3");
    let dir = tempfile::tempdir().unwrap();
    for rep in Representation::ALL {
        let cfg = small(rep, 5, dir.path());
        let a = execute(&cfg, &m).unwrap();
        let b = execute(&cfg, &m).unwrap();
        assert_eq!(a.report, b.report, "{rep}");
        assert_eq!(a.violations, b.violations);
        let other = execute(&small(rep, 6, dir.path()), &m).unwrap();
        assert_ne!(a.report.generations, other.report.generations, "{rep}: seeds 5 and 6 agree");
    }
}

#[test]
fn zero_generations_runs_only_the_initial_population() {
    let m = map("grid_3x3");
    let dir = tempfile::tempdir().unwrap();
    for rep in Representation::ALL {
        let mut cfg = small(rep, 1, dir.path());
        cfg.generations = 0;
        let out = execute(&cfg, &m).unwrap();
        assert_eq!(out.report.evaluations, cfg.population_size);
        assert_eq!(out.report.generations.len(), 1);
        assert_eq!(out.report.generations[0].generation, 0);
    }
}

#[test]
fn cumulative_counts_never_shrink_and_match_the_log() {
    let m = map("grid_3x3");
    let dir = tempfile::tempdir().unwrap();
    for rep in Representation::ALL {
        let out = execute(&small(rep, 2, dir.path()), &m).unwrap();
        let gens = &out.report.generations;
        for w in gens.windows(2) {
            for k in ViolationKind::ALL {
                let before = w[0].cumulative.get(&k).copied().unwrap_or(0);
                let now = w[1].cumulative.get(&k).copied().unwrap_or(0);
                let found = w[1].violations.get(&k).copied().unwrap_or(0);
                assert_eq!(now, before + found, "{rep} {k:?}");
            }
        }
        let last: usize = gens.last().unwrap().cumulative.values().sum();
        assert_eq!(last, out.violations.len());
        assert_eq!(out.report.total.all_count, out.violations.len());
        assert!(out.report.total.unique_count <= out.report.total.all_count);
    }
}

#[test]
fn representations_get_the_same_evaluation_budget() {
    let m = map("grid_3x3");
    let dir = tempfile::tempdir().unwrap();
    let counts: Vec<usize> = Representation::ALL
        .iter()
        .map(|&rep| {
            let cfg = small(rep, 3, dir.path());
            let out = execute(&cfg, &m).unwrap();
            assert!(out.report.generations.iter().all(|g| g.evaluated == cfg.population_size));
            out.report.evaluations
        })
        .collect();
    let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
    assert!(hi - lo <= 6, "{counts:?}");
}

#[test]
fn written_scenarios_are_valid_and_replay_identically() {
    let dir = tempfile::tempdir().unwrap();
    let m = map("grid_3x3");
    let table = forge_core::validity::ConstraintTable::default();
    for rep in Representation::ALL {
        let mut cfg = small(rep, 4, dir.path().join(rep.as_str()));
        cfg.records = RecordPolicy::All;
        let out = run(&cfg).unwrap();
        let limits = ScenarioLimits { max_obstacles: cfg.max_obstacles, duration: cfg.duration, ..cfg.limits() };
        assert_eq!(load_report(&cfg.out).unwrap(), out.report);
        for (id, genome) in &out.scenarios {
            genome.check(&m, &limits).unwrap();
            for o in &genome.obstacles {
                assert!(validate(o, &table, &m).is_empty(), "{id}: {o:?}");
            }
            let path = cfg.out.join(format!("scenarios/{id}.json"));
            let r = replay(&path, &m).unwrap();
            assert!(r.consistent(), "{id} replays differently");
            assert!(cfg.out.join(format!("records/{id}.jsonl")).exists());
        }
        for u in &out.report.unique {
            assert!(cfg.out.join(&u.scenario_file).exists());
            let f = ScenarioFile::load(cfg.out.join(&u.scenario_file)).unwrap();
            assert!(f.violations.iter().any(|v| v.kind == u.kind && v.t_first == u.t_first));
        }
    }
}

#[test]
fn report_covers_every_representation_and_kind() {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = Vec::new();
    for rep in Representation::ALL {
        for seed in [1, 2] {
            let cfg = small(rep, seed, dir.path().join(format!("{rep}_{seed}")));
            let out = run(&cfg).unwrap();
            entries.push(RunEntry { dir: cfg.out.clone(), report: out.report });
        }
    }
    let report_dir = dir.path().join("report");
    emit_report(&entries, &report_dir).unwrap();

    let mut rdr = csv::Reader::from_path(report_dir.join("summary.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "representation",
            "kind",
            "runs",
            "all_violations",
            "unique_violations",
            "eliminated_percent",
            "mean_unique_per_run"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * (ViolationKind::ALL.len() + 1));
    let reps: BTreeSet<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(reps, BTreeSet::from(["full", "partial", "random"]));

    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["status"], "ok");
    let comparisons = stats["comparisons"].as_array().unwrap();
    assert_eq!(comparisons.len(), 3 * (ViolationKind::ALL.len() + 1));
    for c in comparisons {
        let p = c["p_value"].as_f64().unwrap();
        let a = c["a12"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&a));
    }
    let links: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("unique_violations.json")).unwrap()).unwrap();
    for l in &links {
        // links are relative to the report directory when runs sit inside it
        assert!(report_dir.join(l["scenario_file"].as_str().unwrap()).exists());
        assert!(report_dir.join(l["record_file"].as_str().unwrap()).exists());
    }
    let total: usize = entries.iter().map(|e| e.report.unique.len()).sum();
    assert_eq!(links.len(), total);

    emit_report(&entries[..1], &dir.path().join("single")).unwrap();
    let single: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("single/stats.json")).unwrap()).unwrap();
    assert_eq!(single["status"], INSUFFICIENT);
}

#[test]
fn experiment_file_runs_every_pair_in_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "map = {:?}\nout = {:?}\nrepresentations = [\"random\", \"full\"]\nseeds = [7, 8]\n\
         population_size = 4\nmax_obstacles = 5\nduration = 10.0\ngenerations = 1\n",
        map_path("straight_corridor"),
        dir.path().join("exp"),
    );
    let file = ExperimentFile::from_toml(&text).unwrap();
    let outcomes = run_experiment(&file).unwrap();
    assert_eq!(outcomes.len(), 4);
    for name in ["random_seed7", "random_seed8", "full_seed7", "full_seed8"] {
        let report = load_report(dir.path().join("exp").join(name)).unwrap();
        assert_eq!(report.evaluations, 8);
    }
    assert!(dir.path().join("exp/summary.csv").exists());
    assert!(ExperimentFile::from_toml("map = \"m\"\nout = \"o\"\npopulation = 3\n").is_err());
}
