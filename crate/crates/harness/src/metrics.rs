//! Suite metrics over episode results.

use std::fmt;

use airgrasp_core::mission::{EpisodeResult, Outcome};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

/// Nearest-rank percentiles; zeros for an empty sample.
pub fn percentiles(samples: &[f64]) -> Percentiles {
    if samples.is_empty() {
        return Percentiles::default();
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = |p: f64| s[((p / 100.0 * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
    Percentiles {
        p50: rank(50.0),
        p90: rank(90.0),
        p99: rank(99.0),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    /// Grasp center error over episodes that executed, centimeters
    /// (population standard deviation).
    pub ga_mean_cm: f64,
    pub ga_std_cm: f64,
    pub ga_n: usize,
    /// Mean simulated time to the execute decision, seconds.
    pub sgl_s: f64,
    pub cfgr: f64,
    pub osf: f64,
    pub cif: f64,
    pub missed: f64,
    pub timeout: f64,
    /// Wall-clock grasp-evaluation cycle time, milliseconds.
    pub latency_ms: Percentiles,
    pub cycles: usize,
}

pub fn compute_metrics(results: &[EpisodeResult], tick_hz: f64) -> MetricsReport {
    let n = results.len();
    let frac = |o: Outcome| {
        if n == 0 {
            0.0
        } else {
            results.iter().filter(|r| r.outcome == o).count() as f64 / n as f64
        }
    };
    let errs: Vec<f64> = results.iter().filter_map(|r| r.grasp_error()).map(|e| e * 100.0).collect();
    let (ga_mean_cm, ga_std_cm) = mean_std(&errs);
    let sgl: Vec<f64> = results
        .iter()
        .filter_map(|r| r.decision_tick)
        .map(|t| t as f64 / tick_hz)
        .collect();
    let cycles: Vec<f64> = results.iter().flat_map(|r| r.cycle_ms.iter().copied()).collect();
    MetricsReport {
        n,
        ga_mean_cm,
        ga_std_cm,
        ga_n: errs.len(),
        sgl_s: mean_std(&sgl).0,
        cfgr: frac(Outcome::Success),
        osf: frac(Outcome::SearchFailure),
        cif: frac(Outcome::CollisionFailure),
        missed: frac(Outcome::Missed),
        timeout: frac(Outcome::Timeout),
        latency_ms: percentiles(&cycles),
        cycles: cycles.len(),
    }
}

/// Mean and population standard deviation; zeros when empty.
fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  episodes        {}", self.n)?;
        writeln!(f, "  GA (cm)         {:.2} ± {:.2}  (n = {})", self.ga_mean_cm, self.ga_std_cm, self.ga_n)?;
        writeln!(f, "  SGL (s)         {:.2}", self.sgl_s)?;
        writeln!(f, "  CFGR            {:.1}%", 100.0 * self.cfgr)?;
        writeln!(f, "  CIF             {:.1}%", 100.0 * self.cif)?;
        writeln!(f, "  OSF             {:.1}%", 100.0 * self.osf)?;
        writeln!(f, "  missed          {:.1}%", 100.0 * self.missed)?;
        writeln!(f, "  timeout         {:.1}%", 100.0 * self.timeout)?;
        write!(
            f,
            "  cycle ms        p50 {:.1}  p90 {:.1}  p99 {:.1}  ({} cycles)",
            self.latency_ms.p50, self.latency_ms.p90, self.latency_ms.p99, self.cycles
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn result(outcome: Outcome, err_cm: Option<f64>) -> EpisodeResult {
        EpisodeResult {
            outcome,
            executed: None,
            execution: None,
            p_pred: err_cm.map(|e| [e / 100.0, 0.0, 0.0]),
            p_gt: [0.0; 3],
            decision_tick: err_cm.map(|_| 40),
            ticks: 100,
            evaluations: 1,
            cycle_ms: vec![10.0, 20.0],
        }
    }

    #[test]
    fn perfect_suite() {
        let r: Vec<_> = (0..4).map(|_| result(Outcome::Success, Some(0.0))).collect();
        let m = compute_metrics(&r, 20.0);
        assert_eq!((m.ga_mean_cm, m.ga_std_cm, m.cfgr), (0.0, 0.0, 1.0));
        assert_eq!(m.sgl_s, 2.0);
    }

    #[test]
    fn outcome_counting() {
        let r = vec![
            result(Outcome::Success, Some(1.0)),
            result(Outcome::CollisionFailure, Some(1.0)),
            result(Outcome::SearchFailure, None),
            result(Outcome::Success, Some(1.0)),
        ];
        let m = compute_metrics(&r, 20.0);
        assert_eq!((m.cfgr, m.cif, m.osf), (0.5, 0.25, 0.25));
        assert!((m.cfgr + m.cif + m.osf + m.missed + m.timeout - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ga_population_std() {
        let r = vec![result(Outcome::Success, Some(3.0)), result(Outcome::Success, Some(4.0))];
        let m = compute_metrics(&r, 20.0);
        assert!((m.ga_mean_cm - 3.5).abs() < 1e-9);
        assert!((m.ga_std_cm - 0.5).abs() < 1e-9);
        assert_eq!(m.ga_n, 2);
    }

    #[test]
    fn percentiles_are_monotone() {
        let s: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        let p = percentiles(&s);
        assert_eq!((p.p50, p.p90, p.p99), (50.0, 90.0, 99.0));
        assert_eq!(percentiles(&[]), Percentiles::default());
    }
}
