//! Intersection-count instrumentation: per-level counters, totals, and the
//! relative percentage against the brute-force N x M baseline, emitted as
//! JSON or CSV.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// tests/hits tally for one phase; misses are derived.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counter {
    pub tests: u64,
    pub hits: u64,
}

impl Counter {
    pub fn misses(&self) -> u64 {
        self.tests - self.hits
    }

    pub fn add(&mut self, other: Counter) {
        self.tests += other.tests;
        self.hits += other.hits;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct LevelRow {
    /// 1-based from the bottom: level 1 holds the leaf-group nodes.
    pub level: u32,
    pub intersections: u64,
    pub misses: u64,
    pub hits: u64,
}

impl LevelRow {
    pub fn from_counter(level: u32, c: Counter) -> Self {
        LevelRow { level, intersections: c.tests, misses: c.misses(), hits: c.hits }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct PhaseRow {
    pub intersections: u64,
    pub misses: u64,
    pub hits: u64,
}

impl PhaseRow {
    pub fn from_counter(c: Counter) -> Self {
        PhaseRow { intersections: c.tests, misses: c.misses(), hits: c.hits }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct RayCounts {
    pub shadow: u64,
    pub reflection: u64,
    pub refraction: u64,
}

impl RayCounts {
    pub fn total(&self) -> u64 {
        self.shadow + self.reflection + self.refraction
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct StatsReport {
    pub engine: String,
    pub width: u32,
    pub height: u32,
    pub bounces: u32,
    pub levels: u32,
    pub branching: u32,
    pub ray_counts: RayCounts,
    /// Whole-mesh sphere culling at the hierarchy top (zero for baselines).
    pub mesh_cull: PhaseRow,
    /// Top level first, matching top-down traversal order.
    pub per_level: Vec<LevelRow>,
    pub final_ray_tri_tests: u64,
    pub final_hits: u64,
    pub total_tests: u64,
    pub brute_force_equivalent: u64,
    /// 100 * totalTests / bruteForceEquivalent; 0 when no rays were traced.
    pub relative_percent: f64,
    /// Wall-clock per stage; only present when timing collection is on,
    /// since timings are inherently run-dependent.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_stage_millis: Option<BTreeMap<String, f64>>,
}

impl StatsReport {
    pub fn compute_totals(&mut self) {
        let level_total: u64 = self.per_level.iter().map(|l| l.intersections).sum();
        self.total_tests = self.mesh_cull.intersections + level_total + self.final_ray_tri_tests;
        self.relative_percent = if self.brute_force_equivalent == 0 {
            0.0
        } else {
            100.0 * self.total_tests as f64 / self.brute_force_equivalent as f64
        };
    }

    /// intersections = misses + hits must hold on every row.
    pub fn check_invariants(&self) -> bool {
        let rows_ok = self
            .per_level
            .iter()
            .all(|r| r.intersections == r.misses + r.hits);
        let mesh_ok = self.mesh_cull.intersections == self.mesh_cull.misses + self.mesh_cull.hits;
        rows_ok && mesh_ok && self.final_hits <= self.final_ray_tri_tests
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsFormat {
    Json,
    Csv,
}

pub fn emit_stats(report: &StatsReport, format: StatsFormat, path: &Path) -> Result<()> {
    let text = match format {
        StatsFormat::Json => to_json(report),
        StatsFormat::Csv => to_csv(report),
    };
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn to_json(report: &StatsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn to_csv(report: &StatsReport) -> String {
    let mut out = String::from("engine,level,intersections,misses,hits,totalTests,bruteEquivalent,relativePercent\n");
    let tail = format!(
        "{},{},{:.4}",
        report.total_tests, report.brute_force_equivalent, report.relative_percent
    );
    out.push_str(&format!(
        "{},mesh,{},{},{},{}\n",
        report.engine,
        report.mesh_cull.intersections,
        report.mesh_cull.misses,
        report.mesh_cull.hits,
        tail
    ));
    for row in &report.per_level {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            report.engine, row.level, row.intersections, row.misses, row.hits, tail
        ));
    }
    out.push_str(&format!(
        "{},final,{},{},{},{}\n",
        report.engine,
        report.final_ray_tri_tests,
        report.final_ray_tri_tests - report.final_hits,
        report.final_hits,
        tail
    ));
    out
}
