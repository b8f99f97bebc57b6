//! Runs seeded episodes per (scenario, ablation) cell and persists traces,
//! the results table and a summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use airgrasp_core::mission::{run_episode, Episode, EpisodeMeta, EpisodeResult, Outcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::metrics::{compute_metrics, MetricsReport};
use crate::scenario::{build_scenario, ScenarioName};
use crate::{HarnessError, Result};

/// Version of the results table layout.
pub const RESULTS_SCHEMA: u32 = 1;

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema: u32,
    pub cell: String,
    pub scenario: String,
    pub ablation: String,
    pub scenario_seed: u64,
    pub episode_seed: u64,
    pub config_hash: String,
    pub outcome: String,
    pub decision_tick: Option<usize>,
    pub ticks: usize,
    pub evaluations: usize,
    pub score: Option<String>,
    pub penalty: Option<u64>,
    pub width_m: Option<String>,
    pub grasp_error_cm: Option<String>,
    pub sgl_s: Option<String>,
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

impl ResultRow {
    fn new(job: &Job, hash: &str, r: &EpisodeResult, tick_hz: f64) -> Self {
        let g = r.executed.as_ref();
        Self {
            schema: RESULTS_SCHEMA,
            cell: job.cell(),
            scenario: job.scenario.as_str().into(),
            ablation: job.ablation.clone(),
            scenario_seed: job.seed,
            episode_seed: job.seed,
            config_hash: hash.into(),
            outcome: r.outcome.as_str().into(),
            decision_tick: r.decision_tick,
            ticks: r.ticks,
            evaluations: r.evaluations,
            score: g.map(|g| fixed(g.score)),
            penalty: g.map(|g| g.penalty),
            width_m: g.map(|g| fixed(g.candidate.width)),
            grasp_error_cm: r.grasp_error().map(|e| fixed(100.0 * e)),
            sgl_s: r.decision_tick.map(|t| fixed(t as f64 / tick_hz)),
        }
    }
}

#[derive(Clone, Debug)]
struct Job {
    scenario: ScenarioName,
    ablation: String,
    seed: u64,
}

impl Job {
    fn cell(&self) -> String {
        format!("{}/{}", self.scenario, self.ablation)
    }
}

/// Command-line restrictions on a configured suite.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub base_seed: Option<u64>,
    pub scenario: Option<ScenarioName>,
    pub ablation: Option<String>,
    pub write_traces: bool,
}

#[derive(Clone, Debug)]
pub struct CellReport {
    pub cell: String,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub out_dir: PathBuf,
    pub rows: Vec<ResultRow>,
    pub cells: Vec<CellReport>,
    /// Episodes that returned an error, with the message.
    pub errors: Vec<(String, u64, String)>,
}

/// Runs one generated episode.
pub fn run_one(cfg: &Config, scenario: ScenarioName, ablation: &str, seed: u64) -> Result<Episode> {
    let s = build_scenario(&scenario.spec(seed), cfg.suite.camera_resolution)?;
    let pipe = cfg.pipeline(cfg.ablation(ablation)?, seed);
    let mut ep = run_episode(&s.scene, &s.instruction, &pipe)?;
    ep.meta = Some(EpisodeMeta {
        scenario: scenario.as_str().into(),
        ablation: ablation.into(),
        scenario_seed: seed,
        episode_seed: seed,
        config_hash: cfg.hash(),
        instruction: s.instruction,
    });
    Ok(ep)
}

fn jobs(cfg: &Config, opts: &RunOptions) -> Result<Vec<Job>> {
    let base = opts.base_seed.unwrap_or(cfg.suite.base_seed);
    let scenarios: Vec<ScenarioName> = match opts.scenario {
        Some(s) => vec![s],
        None => cfg.suite.scenarios.clone(),
    };
    let ablations: Vec<String> = match &opts.ablation {
        Some(a) => {
            cfg.ablation(a)?;
            vec![a.clone()]
        }
        None => cfg.suite.ablations.clone(),
    };
    let mut out = Vec::new();
    for s in &scenarios {
        for a in &ablations {
            for i in 0..cfg.suite.episodes {
                out.push(Job {
                    scenario: *s,
                    ablation: a.clone(),
                    seed: base + i as u64,
                });
            }
        }
    }
    Ok(out)
}

/// Runs the suite in memory without touching the filesystem.
pub fn run_cells(cfg: &Config, opts: &RunOptions) -> Result<SuiteOutput> {
    execute(cfg, opts, None)
}

/// Runs the suite and writes `results.csv`, `summary.txt`, `summary.json`,
/// the resolved config and, when requested, one trace per episode.
pub fn run_suite(cfg: &Config, opts: &RunOptions) -> Result<SuiteOutput> {
    let dir = cfg.out_dir(opts.out_dir.as_deref());
    fs::create_dir_all(&dir)?;
    execute(cfg, opts, Some(&dir))
}

fn execute(cfg: &Config, opts: &RunOptions, dir: Option<&Path>) -> Result<SuiteOutput> {
    cfg.validate()?;
    let jobs = jobs(cfg, opts)?;
    let hash = cfg.hash();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.suite.threads)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let trace_dir = dir.filter(|_| opts.write_traces).map(|d| d.join("traces"));
    let mut done: Vec<(Job, std::result::Result<EpisodeResult, String>)> = pool.install(|| {
        jobs.into_par_iter()
            .map(|job| {
                let res = run_one(cfg, job.scenario, &job.ablation, job.seed).and_then(|ep| {
                    if let Some(t) = &trace_dir {
                        write_trace(t, &job, &ep)?;
                    }
                    Ok(ep.result)
                });
                (job, res.map_err(|e| e.to_string()))
            })
            .collect()
    });
    done.sort_by(|(a, _), (b, _)| (a.cell(), a.seed).cmp(&(b.cell(), b.seed)));

    let tick_hz = cfg.mission.tick_hz;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut cells: Vec<(String, Vec<EpisodeResult>)> = Vec::new();
    for (job, res) in done {
        match res {
            Ok(r) => {
                rows.push(ResultRow::new(&job, &hash, &r, tick_hz));
                match cells.last_mut() {
                    Some((c, v)) if *c == job.cell() => v.push(r),
                    _ => cells.push((job.cell(), vec![r])),
                }
            }
            Err(e) => errors.push((job.cell(), job.seed, e)),
        }
    }
    let cells: Vec<CellReport> = cells
        .into_iter()
        .map(|(cell, rs)| CellReport {
            cell,
            metrics: compute_metrics(&rs, tick_hz),
        })
        .collect();
    let out_dir = dir.map(Path::to_path_buf).unwrap_or_default();
    if let Some(d) = dir {
        write_results(&d.join("results.csv"), &rows)?;
        fs::write(d.join("summary.txt"), summary_text(cfg, &cells, &errors))?;
        let json: Vec<_> = cells.iter().map(|c| (&c.cell, &c.metrics)).collect();
        fs::write(d.join("summary.json"), serde_json::to_string_pretty(&json)?)?;
        fs::write(d.join("config.toml"), cfg.to_toml())?;
    }
    Ok(SuiteOutput {
        out_dir,
        rows,
        cells,
        errors,
    })
}

fn write_trace(dir: &Path, job: &Job, ep: &Episode) -> Result<()> {
    let d = dir.join(job.scenario.as_str()).join(&job.ablation);
    fs::create_dir_all(&d)?;
    let mut w = BufWriter::new(File::create(d.join(format!("seed_{}.jsonl", job.seed)))?);
    ep.write_trace(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

fn summary_text(cfg: &Config, cells: &[CellReport], errors: &[(String, u64, String)]) -> String {
    let mut s = format!(
        "airgrasp suite\nconfig hash {}\nepisodes per cell {}\n\n",
        cfg.hash(),
        cfg.suite.episodes
    );
    for c in cells {
        s.push_str(&format!("[{}]\n{}\n\n", c.cell, c.metrics));
    }
    if !errors.is_empty() {
        s.push_str(&format!("{} episode errors\n", errors.len()));
        for (cell, seed, e) in errors {
            s.push_str(&format!("  {cell} seed {seed}: {e}\n"));
        }
    }
    s
}

/// Outcome fractions of a cell, in [`Outcome::ALL`] order.
pub fn outcome_fractions(rows: &[ResultRow], cell: &str) -> Vec<(Outcome, f64)> {
    let mine: Vec<_> = rows.iter().filter(|r| r.cell == cell).collect();
    Outcome::ALL
        .iter()
        .map(|o| {
            let k = mine.iter().filter(|r| r.outcome == o.as_str()).count();
            (*o, if mine.is_empty() { 0.0 } else { k as f64 / mine.len() as f64 })
        })
        .collect()
}
