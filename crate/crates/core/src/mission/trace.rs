use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::execution::ExecutionReport;
use crate::collision::ScoredGrasp;
use crate::guidance::GuidanceMode;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    CollisionFailure,
    /// Executed grasp that failed the closure test.
    Missed,
    SearchFailure,
    Timeout,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Success,
        Outcome::CollisionFailure,
        Outcome::Missed,
        Outcome::SearchFailure,
        Outcome::Timeout,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::CollisionFailure => "collision_failure",
            Outcome::Missed => "missed",
            Outcome::SearchFailure => "search_failure",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Execute,
    Reposition,
}

/// One perception/decision tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: usize,
    pub mode: GuidanceMode,
    /// Context and object mask non-empty.
    pub masks_found: [bool; 2],
    pub n_candidates: usize,
    pub s_best: Option<f64>,
    pub decision: Option<DecisionKind>,
    pub compute_ms: f64,
    pub position: [f64; 3],
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub executed: Option<ScoredGrasp>,
    pub execution: Option<ExecutionReport>,
    /// Center of the executed grasp.
    pub p_pred: Option<[f64; 3]>,
    /// Ground-truth best grasp center.
    pub p_gt: [f64; 3],
    /// Tick of the execute decision.
    pub decision_tick: Option<usize>,
    /// Ticks consumed, execution included.
    pub ticks: usize,
    pub evaluations: usize,
    /// Wall-clock time of each grasp-evaluation cycle.
    pub cycle_ms: Vec<f64>,
}

impl EpisodeResult {
    /// Grasp center error in meters, for episodes that executed.
    pub fn grasp_error(&self) -> Option<f64> {
        let p = self.p_pred?;
        let d: f64 = p.iter().zip(&self.p_gt).map(|(a, b)| (a - b) * (a - b)).sum();
        Some(d.sqrt())
    }
}

/// Where an episode came from, enough to regenerate it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub scenario: String,
    pub ablation: String,
    pub scenario_seed: u64,
    pub episode_seed: u64,
    pub config_hash: String,
    pub instruction: String,
}

/// A line of an episode trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Meta(EpisodeMeta),
    Tick(TraceRecord),
    Result(EpisodeResult),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub meta: Option<EpisodeMeta>,
    pub result: EpisodeResult,
    pub trace: Vec<TraceRecord>,
}

impl Episode {
    /// Line-delimited JSON: the optional header, one record per tick, then
    /// the result.
    pub fn write_trace(&self, mut w: impl Write) -> Result<()> {
        if let Some(m) = &self.meta {
            serde_json::to_writer(&mut w, &TraceLine::Meta(m.clone()))?;
            w.write_all(b"\n")?;
        }
        for r in &self.trace {
            serde_json::to_writer(&mut w, &TraceLine::Tick(r.clone()))?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut w, &TraceLine::Result(self.result.clone()))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_trace(r: impl BufRead) -> Result<Self> {
        let mut trace = Vec::new();
        let mut result = None;
        let mut meta = None;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)? {
                TraceLine::Meta(m) => meta = Some(m),
                TraceLine::Tick(t) => trace.push(t),
                TraceLine::Result(res) => result = Some(res),
            }
        }
        let result = result.ok_or_else(|| crate::Error::InsufficientInput("trace has no result record".into()))?;
        Ok(Self { meta, result, trace })
    }
}
