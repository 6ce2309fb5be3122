//! Paired comparison of two reports with a two-sided sign test.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::metrics::{EpisodeRow, MetricsReport};
use crate::error::{Error, Result};

/// Row column a comparison is made on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Return,
    Total,
    Steps,
    Correct,
    Quality,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Return => "return",
            Metric::Total => "total",
            Metric::Steps => "steps",
            Metric::Correct => "correct",
            Metric::Quality => "quality",
        }
    }

    pub fn value(self, row: &EpisodeRow) -> Option<f64> {
        match self {
            Metric::Return => Some(row.task_return),
            Metric::Total => Some(row.total),
            Metric::Steps => Some(row.steps as f64),
            Metric::Correct => row.correct,
            Metric::Quality => row.quality,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "return" => Ok(Metric::Return),
            "total" => Ok(Metric::Total),
            "steps" => Ok(Metric::Steps),
            "correct" => Ok(Metric::Correct),
            "quality" => Ok(Metric::Quality),
            other => Err(format!(
                "unknown metric `{other}`, expected one of: return, total, steps, correct, quality"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub metric: Metric,
    pub pairs: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Mean of `a - b` over pairs.
    pub mean_difference: f64,
    pub differences: Vec<f64>,
    /// Pairs where `a > b`, `a < b`, `a == b`.
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

/// Two-sided sign test over the non-tied pairs:
/// `p = min(1, 2 P(X <= min(wins, losses)))` with `X ~ Binomial(n, 1/2)`,
/// and `p = 1` when every pair is tied.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let binomial = Binomial::new(0.5, n as u64).expect("valid binomial");
    (2.0 * binomial.cdf(wins.min(losses) as u64)).min(1.0)
}

/// Pair rows by position and compare `metric`. Both reports must cover the
/// same seeds in the same order.
pub fn compare(a: &MetricsReport, b: &MetricsReport, metric: Metric) -> Result<ComparisonSummary> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::Framework(format!(
            "reports differ in episode count: {} vs {}",
            a.rows.len(),
            b.rows.len()
        )));
    }
    if a.rows.is_empty() {
        return Err(Error::Empty("report"));
    }
    let mut differences = Vec::with_capacity(a.rows.len());
    let (mut sum_a, mut sum_b) = (0.0, 0.0);
    for (i, (ra, rb)) in a.rows.iter().zip(&b.rows).enumerate() {
        if ra.seed != rb.seed {
            return Err(Error::SeedMismatch {
                row: i,
                a: ra.seed,
                b: rb.seed,
            });
        }
        let (va, vb) = match (metric.value(ra), metric.value(rb)) {
            (Some(va), Some(vb)) => (va, vb),
            _ => {
                return Err(Error::Framework(format!(
                    "metric `{metric}` is not recorded in row {i}"
                )))
            }
        };
        sum_a += va;
        sum_b += vb;
        differences.push(va - vb);
    }
    let n = differences.len() as f64;
    let wins = differences.iter().filter(|d| **d > 0.0).count();
    let losses = differences.iter().filter(|d| **d < 0.0).count();
    Ok(ComparisonSummary {
        metric,
        pairs: differences.len(),
        mean_a: sum_a / n,
        mean_b: sum_b / n,
        mean_difference: differences.iter().sum::<f64>() / n,
        ties: differences.len() - wins - losses,
        wins,
        losses,
        p_value: sign_test(wins, losses),
        differences,
    })
}

impl ComparisonSummary {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let p = if self.p_value >= 1e-4 {
            format!("{:.4}", self.p_value)
        } else {
            format!("{:.3e}", self.p_value)
        };
        let rows: [(&str, String); 9] = [
            ("metric", self.metric.to_string()),
            ("pairs", self.pairs.to_string()),
            ("mean a", format!("{:.6}", self.mean_a)),
            ("mean b", format!("{:.6}", self.mean_b)),
            ("mean a - b", format!("{:.6}", self.mean_difference)),
            ("a better", self.wins.to_string()),
            ("b better", self.losses.to_string()),
            ("ties", self.ties.to_string()),
            ("sign test p", p),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<12} {v:>16}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::ReportHeader;

    fn report(values: &[f64], seeds: &[u64]) -> MetricsReport {
        let header = ReportHeader {
            version: 1,
            rows: values.len(),
            framework: "x".into(),
            env: "y".into(),
            sensing: "z".into(),
            seed: 0,
            timestamp: 0,
        };
        let rows = values
            .iter()
            .zip(seeds)
            .enumerate()
            .map(|(i, (v, s))| EpisodeRow {
                episode: i as u64,
                seed: *s,
                task_return: *v,
                total: *v,
                steps: 1,
                correct: None,
                quality: None,
                options: vec![],
            })
            .collect();
        MetricsReport::new(header, rows)
    }

    #[test]
    fn self_comparison() {
        let r = report(&[1.0, 0.0, 2.0], &[1, 2, 3]);
        let c = compare(&r, &r, Metric::Return).unwrap();
        assert_eq!(c.mean_difference, 0.0);
        assert_eq!(c.p_value, 1.0);
        assert_eq!(c.ties, 3);
    }

    #[test]
    fn unanimous_pairs() {
        for n in 10..20usize {
            let seeds: Vec<u64> = (0..n as u64).collect();
            let a = report(&vec![1.0; n], &seeds);
            let b = report(&vec![0.0; n], &seeds);
            let c = compare(&a, &b, Metric::Return).unwrap();
            let exact = 2.0 * 0.5f64.powi(n as i32);
            assert!((c.p_value - exact).abs() < 1e-12 * exact.max(1e-300) + 1e-15);
            assert!(c.p_value < 0.01);
        }
    }

    #[test]
    fn known_means() {
        let a = report(&[3.0, 5.0, 7.0, 9.0], &[1, 2, 3, 4]);
        let b = report(&[1.0, 1.0, 1.0, 1.0], &[1, 2, 3, 4]);
        let c = compare(&a, &b, Metric::Return).unwrap();
        assert_eq!(c.mean_difference, 5.0);
        assert_eq!(c.mean_a, 6.0);
        assert_eq!(c.differences, vec![2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn mismatched_seeds_rejected() {
        let a = report(&[1.0, 2.0], &[1, 2]);
        let b = report(&[1.0, 2.0], &[1, 3]);
        assert!(matches!(
            compare(&a, &b, Metric::Return),
            Err(Error::SeedMismatch { row: 1, a: 2, b: 3 })
        ));
        let c = report(&[1.0], &[1]);
        assert!(compare(&a, &c, Metric::Return).is_err());
        assert!(compare(&a, &a, Metric::Correct).is_err());
    }

    #[test]
    fn sign_test_values() {
        assert_eq!(sign_test(0, 0), 1.0);
        assert_eq!(sign_test(3, 3), 1.0);
        // n = 20, min 4: 2 * 6196 / 2^20.
        assert!((sign_test(16, 4) - 2.0 * 6196.0 / 1048576.0).abs() < 1e-12);
        assert!((sign_test(15, 5) - 2.0 * 21700.0 / 1048576.0).abs() < 1e-12);
    }
}
