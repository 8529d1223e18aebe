//! Cross-run tables and statistics.

use super::config::Representation;
use super::runner::RunReport;
use super::stats::{mann_whitney_u, vargha_delaney_a12};
use super::RunError;
use crate::oracles::{Violation, ViolationKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const INSUFFICIENT: &str = "insufficient samples";

/// Row label used for the all-kinds total.
pub const TOTAL_ROW: &str = "total";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub representation: Representation,
    pub kind: String,
    pub runs: usize,
    pub all_violations: usize,
    pub unique_violations: usize,
    pub eliminated_percent: String,
    pub mean_unique_per_run: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Representation,
    pub b: Representation,
    pub kind: String,
    pub p_value: f64,
    /// Probability that a run of `a` finds more unique violations than a run of `b`.
    pub a12: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub status: String,
    pub runs: BTreeMap<Representation, usize>,
    pub comparisons: Vec<Comparison>,
}

/// A run report together with the directory it was written to.
#[derive(Debug, Clone)]
pub struct RunEntry {
    pub dir: PathBuf,
    pub report: RunReport,
}

fn kind_labels() -> Vec<String> {
    ViolationKind::ALL.iter().map(|k| k.as_str().to_string()).chain([TOTAL_ROW.to_string()]).collect()
}

/// Unique-violation count of one run for a row label.
fn unique_for(r: &RunReport, label: &str) -> usize {
    if label == TOTAL_ROW {
        return r.total.unique_count;
    }
    r.kinds.iter().find(|(k, _)| k.as_str() == label).map_or(0, |(_, s)| s.unique_count)
}

fn all_for(r: &RunReport, label: &str) -> usize {
    if label == TOTAL_ROW {
        return r.total.all_count;
    }
    r.kinds.iter().find(|(k, _)| k.as_str() == label).map_or(0, |(_, s)| s.all_count)
}

fn group<'a>(runs: &[&'a RunReport]) -> BTreeMap<Representation, Vec<&'a RunReport>> {
    let mut m: BTreeMap<Representation, Vec<&RunReport>> = BTreeMap::new();
    for r in runs {
        m.entry(r.representation).or_default().push(r);
    }
    m
}

/// One row per representation and violation kind, plus a total row per
/// representation. Counts are summed over runs.
pub fn summary_rows(runs: &[&RunReport]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (rep, rs) in group(runs) {
        for label in kind_labels() {
            let all: usize = rs.iter().map(|r| all_for(r, &label)).sum();
            let unique: usize = rs.iter().map(|r| unique_for(r, &label)).sum();
            let elim = if all == 0 { 0.0 } else { 100.0 * (1.0 - unique as f64 / all as f64) };
            rows.push(SummaryRow {
                representation: rep,
                kind: label,
                runs: rs.len(),
                all_violations: all,
                unique_violations: unique,
                eliminated_percent: format!("{elim:.2}"),
                mean_unique_per_run: format!("{:.2}", unique as f64 / rs.len() as f64),
            });
        }
    }
    rows
}

/// Pairwise Mann-Whitney p and A12 over per-run unique counts, for every
/// kind. Needs at least two runs of every representation.
pub fn compare(runs: &[&RunReport]) -> StatsReport {
    let groups = group(runs);
    let counts: BTreeMap<Representation, usize> = groups.iter().map(|(k, v)| (*k, v.len())).collect();
    if groups.len() < 2 || counts.values().any(|&n| n < 2) {
        return StatsReport { status: INSUFFICIENT.into(), runs: counts, comparisons: Vec::new() };
    }
    let reps: Vec<Representation> = groups.keys().copied().collect();
    let mut comparisons = Vec::new();
    for label in kind_labels() {
        for (i, &a) in reps.iter().enumerate() {
            for &b in &reps[i + 1..] {
                let xs: Vec<f64> = groups[&a].iter().map(|r| unique_for(r, &label) as f64).collect();
                let ys: Vec<f64> = groups[&b].iter().map(|r| unique_for(r, &label) as f64).collect();
                // both samples are non-empty and finite by construction
                let p_value = mann_whitney_u(&xs, &ys).map(|m| m.p_value).unwrap_or(f64::NAN);
                let a12 = vargha_delaney_a12(&xs, &ys).unwrap_or(f64::NAN);
                comparisons.push(Comparison { a, b, kind: label.clone(), p_value, a12 });
            }
        }
    }
    StatsReport { status: "ok".into(), runs: counts, comparisons }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueLink {
    pub representation: Representation,
    pub seed: u64,
    pub kind: ViolationKind,
    pub scenario_id: String,
    pub scenario_file: String,
    pub record_file: String,
}

/// Flat CSV rendering of a violation; collision columns are empty for
/// other kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRow {
    pub scenario_id: String,
    pub kind: ViolationKind,
    pub t_first: f64,
    pub duration: f64,
    pub value: f64,
    pub ego_x: f64,
    pub ego_y: f64,
    pub ego_speed: f64,
    pub ego_heading: f64,
    pub side: Option<String>,
    pub obstacle_id: Option<u32>,
    pub obstacle_kind: Option<String>,
    pub obstacle_length: Option<f64>,
    pub obstacle_width: Option<f64>,
    pub obstacle_height: Option<f64>,
    pub obstacle_speed: Option<f64>,
    pub obstacle_heading: Option<f64>,
}

impl From<&Violation> for ViolationRow {
    fn from(v: &Violation) -> Self {
        let c = v.collision.as_ref();
        ViolationRow {
            scenario_id: v.scenario_id.clone(),
            kind: v.kind,
            t_first: v.t_first,
            duration: v.duration,
            value: v.value,
            ego_x: v.ego.position.x,
            ego_y: v.ego.position.y,
            ego_speed: v.ego.speed,
            ego_heading: v.ego.heading,
            side: c.map(|c| c.side.as_str().to_string()),
            obstacle_id: c.map(|c| c.obstacle_id),
            obstacle_kind: c.map(|c| c.obstacle_kind.as_str().to_string()),
            obstacle_length: c.map(|c| c.obstacle_size[0]),
            obstacle_width: c.map(|c| c.obstacle_size[1]),
            obstacle_height: c.map(|c| c.obstacle_size[2]),
            obstacle_speed: c.map(|c| c.obstacle_speed),
            obstacle_heading: c.map(|c| c.obstacle_heading),
        }
    }
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), RunError> {
    let csv_err = |e| RunError::Csv { path: path.to_path_buf(), source: e };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

fn relative(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

/// Writes `summary.csv`, `stats.json` and `unique_violations.json` into
/// `outdir`.
pub fn emit_report(runs: &[RunEntry], outdir: &Path) -> Result<(), RunError> {
    if runs.is_empty() {
        return Err(RunError::Format("no runs to report".into()));
    }
    std::fs::create_dir_all(outdir).map_err(|e| RunError::io(outdir, e))?;
    let reports: Vec<&RunReport> = runs.iter().map(|r| &r.report).collect();

    write_csv(&outdir.join("summary.csv"), summary_rows(&reports))?;

    let stats_path = outdir.join("stats.json");
    let stats = serde_json::to_string_pretty(&compare(&reports)).map_err(|e| RunError::json(&stats_path, e))?;
    std::fs::write(&stats_path, stats + "\n").map_err(|e| RunError::io(&stats_path, e))?;

    let links: Vec<UniqueLink> = runs
        .iter()
        .flat_map(|entry| {
            entry.report.unique.iter().map(move |u| UniqueLink {
                representation: entry.report.representation,
                seed: entry.report.seed,
                kind: u.kind,
                scenario_id: u.scenario_id.clone(),
                scenario_file: relative(&entry.dir.join(&u.scenario_file), outdir),
                record_file: relative(&entry.dir.join(&u.record_file), outdir),
            })
        })
        .collect();
    let links_path = outdir.join("unique_violations.json");
    let text = serde_json::to_string_pretty(&links).map_err(|e| RunError::json(&links_path, e))?;
    std::fs::write(&links_path, text + "\n").map_err(|e| RunError::io(&links_path, e))?;
    Ok(())
}
