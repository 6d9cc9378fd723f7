use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentRecord;
use crate::error::{Error, Result};
use crate::linalg::quantile_sorted;

/// Error statistics of one estimator over the trials of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub family: String,
    pub attack: String,
    pub magnitude: f64,
    pub eps: f64,
    pub n: usize,
    pub d: usize,
    pub estimator: String,
    pub trials: usize,
    pub median: f64,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

type Key = (String, String, String, u64, usize, usize, String);

fn key(r: &ExperimentRecord) -> Key {
    (r.task.clone(), r.family.clone(), r.attack.clone(), r.eps.to_bits(), r.n, r.d, r.estimator.clone())
}

/// Groups records by cell and estimator, keeping the order of first
/// appearance.
pub fn summarize(records: &[ExperimentRecord]) -> Result<Vec<SummaryRow>> {
    let mut order: Vec<(Key, Vec<&ExperimentRecord>)> = Vec::new();
    for r in records {
        let k = key(r);
        match order.iter_mut().find(|(q, _)| *q == k) {
            Some((_, v)) => v.push(r),
            None => order.push((k, vec![r])),
        }
    }
    order
        .into_iter()
        .map(|(_, rs)| {
            let mut errs: Vec<f64> = rs.iter().map(|r| r.error).collect();
            if errs.iter().any(|e| e.is_nan()) {
                return Err(Error::Numerical(format!("NaN error in cell {} / {}", rs[0].attack, rs[0].estimator)));
            }
            errs.sort_by(f64::total_cmp);
            let first = rs[0];
            Ok(SummaryRow {
                task: first.task.clone(),
                family: first.family.clone(),
                attack: first.attack.clone(),
                magnitude: first.magnitude,
                eps: first.eps,
                n: first.n,
                d: first.d,
                estimator: first.estimator.clone(),
                trials: errs.len(),
                median: quantile_sorted(&errs, 0.5),
                mean: errs.iter().sum::<f64>() / errs.len() as f64,
                p10: quantile_sorted(&errs, 0.1),
                p90: quantile_sorted(&errs, 0.9),
            })
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Fixed-width text table of `rows`.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let head = ["attack", "eps", "n", "d", "estimator", "trials", "median", "mean", "p10", "p90"];
    let body: Vec<[String; 10]> = rows
        .iter()
        .map(|r| {
            [
                r.attack.clone(),
                r.eps.to_string(),
                r.n.to_string(),
                r.d.to_string(),
                r.estimator.clone(),
                r.trials.to_string(),
                format!("{:.4}", r.median),
                format!("{:.4}", r.mean),
                format!("{:.4}", r.p10),
                format!("{:.4}", r.p90),
            ]
        })
        .collect();
    let mut width: Vec<usize> = head.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&head);
    for row in &body {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(trial: usize, estimator: &str, error: f64) -> ExperimentRecord {
        ExperimentRecord {
            task: "mean".into(),
            family: "gaussian(sigma=1)".into(),
            attack: "point_mass(R=5)".into(),
            magnitude: 5.0,
            eps: 0.1,
            n: 100,
            d: 2,
            trial,
            seed: 1,
            estimator: estimator.into(),
            error,
            distance: None,
            wall_ms: 0,
        }
    }

    #[test]
    fn statistics_per_estimator() {
        let mut recs: Vec<_> = (0..5).map(|t| rec(t, "EmpiricalMean", (t + 1) as f64)).collect();
        recs.push(rec(0, "CoordinateMedian", 0.5));
        let rows = summarize(&recs).unwrap();
        assert_eq!(rows.len(), 2);
        let a = &rows[0];
        assert_eq!((a.estimator.as_str(), a.trials), ("EmpiricalMean", 5));
        assert_eq!((a.median, a.mean), (3.0, 3.0));
        assert!((a.p10 - 1.4).abs() < 1e-12 && (a.p90 - 4.6).abs() < 1e-12);
        let b = &rows[1];
        assert_eq!((b.median, b.p10, b.p90), (0.5, 0.5, 0.5));
        assert!(format_table(&rows).lines().count() == 3);
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(summarize(&[rec(0, "x", f64::NAN)]), Err(Error::Numerical(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let rows = summarize(&[rec(0, "EmpiricalMean", 0.25)]).unwrap();
        write_summary(&p, &rows).unwrap();
        assert_eq!(read_summary(&p).unwrap(), rows);
    }
}
