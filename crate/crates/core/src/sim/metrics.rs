use std::path::Path;

use super::log::{EpisodeLog, LogRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    /// deg
    pub rmse_y: f64,
    /// deg/s
    pub rmse_ydot: f64,
    /// N m
    pub rms_u: f64,
    /// deg, at the last swing sample
    pub final_y_error: f64,
    pub success: bool,
}

/// Tracking metrics over the swing samples of `log`; pause samples are skipped.
pub fn compute_metrics(log: &EpisodeLog) -> Result<Metrics> {
    let mut m = metrics_of(log.rows.iter().filter(|r| !r.paused))?;
    m.success = log.success;
    Ok(m)
}

pub(crate) fn metrics_of<'a>(rows: impl Iterator<Item = &'a LogRow>) -> Result<Metrics> {
    let (mut n, mut ey, mut ed, mut uu) = (0usize, 0.0, 0.0, 0.0);
    let mut last = None;
    for r in rows {
        let (e, de) = ((r.y_d - r.y).to_degrees(), (r.yd_dot - r.ydot).to_degrees());
        ey += e * e;
        ed += de * de;
        uu += r.u * r.u;
        n += 1;
        last = Some(e);
    }
    let last = last.ok_or(Error::EmptyLog)?;
    let n = n as f64;
    Ok(Metrics {
        rmse_y: (ey / n).sqrt(),
        rmse_ydot: (ed / n).sqrt(),
        rms_u: (uu / n).sqrt(),
        final_y_error: last.abs(),
        success: false,
    })
}

pub const AGGREGATE_HEADER: [&str; 6] = ["controller", "rms_u", "rmse_y", "rmse_ydot", "successes", "runs"];

/// Batch summary in the column order `RMS_u, RMSE_y, RMSE_ydot`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub controller: String,
    pub rms_u: f64,
    pub rmse_y: f64,
    pub rmse_ydot: f64,
    pub successes: usize,
    pub runs: usize,
}

/// Pooled RMS over runs: the root of the mean per-run mean square, which
/// equals the RMS over all samples when runs have equal length.
pub fn aggregate(controller: &str, runs: &[Metrics]) -> Aggregate {
    let n = runs.len().max(1) as f64;
    let pooled = |f: fn(&Metrics) -> f64| (runs.iter().map(|m| f(m) * f(m)).sum::<f64>() / n).sqrt();
    Aggregate {
        controller: controller.to_owned(),
        rms_u: pooled(|m| m.rms_u),
        rmse_y: pooled(|m| m.rmse_y),
        rmse_ydot: pooled(|m| m.rmse_ydot),
        successes: runs.iter().filter(|m| m.success).count(),
        runs: runs.len(),
    }
}

impl Aggregate {
    pub fn write_csv(rows: &[Aggregate], path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path.as_ref())?;
        w.write_record(AGGREGATE_HEADER)?;
        for a in rows {
            w.write_record([
                a.controller.clone(),
                a.rms_u.to_string(),
                a.rmse_y.to_string(),
                a.rmse_ydot.to_string(),
                a.successes.to_string(),
                a.runs.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<Aggregate>> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        if r.headers()?.iter().ne(AGGREGATE_HEADER) {
            return Err(Error::Parse { path: path.to_path_buf(), line: 1, reason: "unexpected aggregate header".into() });
        }
        let mut out = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = || Error::Parse { path: path.to_path_buf(), line: i + 2, reason: "malformed aggregate row".into() };
            if rec.len() != AGGREGATE_HEADER.len() {
                return Err(bad());
            }
            let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad());
            let n = |k: usize| rec[k].parse::<usize>().map_err(|_| bad());
            out.push(Aggregate {
                controller: rec[0].to_owned(),
                rms_u: f(1)?,
                rmse_y: f(2)?,
                rmse_ydot: f(3)?,
                successes: n(4)?,
                runs: n(5)?,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, y: f64, y_d: f64, u: f64) -> LogRow {
        LogRow {
            t,
            q: [0.0; 3],
            qdot: [0.0; 3],
            y,
            ydot: 0.0,
            y_d,
            yd_dot: 0.0,
            u,
            u_raw: u,
            s: 0.0,
            s_delta: 0.0,
            k_d: 0.5,
            p_hat: [0.0; 3],
            f_c: 0.0,
            f_d: 0.0,
            v: None,
            paused: false,
        }
    }

    #[test]
    fn constant_error() {
        let rows = (0..=1100).map(|k| row(k as f64 * 1e-3, 0.0, 2f64.to_radians(), 0.0)).collect();
        let m = compute_metrics(&EpisodeLog { rows, ..Default::default() }).unwrap();
        assert!((m.rmse_y - 2.0).abs() < 1e-12);
        assert!((m.final_y_error - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_error_log() {
        let rows = (0..100).map(|k| row(k as f64 * 1e-3, 0.3, 0.3, 1.5)).collect();
        let m = compute_metrics(&EpisodeLog { rows, ..Default::default() }).unwrap();
        assert_eq!((m.rmse_y, m.rmse_ydot, m.final_y_error), (0.0, 0.0, 0.0));
        assert!((m.rms_u - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_rms() {
        // two full periods, endpoint excluded
        let rows = (0..2000).map(|k| {
            let t = k as f64 * 1e-3;
            row(t, 0.0, 0.0, 10.0 * (std::f64::consts::TAU * t).sin())
        });
        let m = compute_metrics(&EpisodeLog { rows: rows.collect(), ..Default::default() }).unwrap();
        assert!((m.rms_u - 10.0 / 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn pauses_are_excluded() {
        let mut rows: Vec<LogRow> = (0..10).map(|k| row(k as f64, 0.0, 0.0, 1.0)).collect();
        for r in &mut rows[5..] {
            r.paused = true;
            r.y = 1.0;
            r.u = 100.0;
        }
        let m = compute_metrics(&EpisodeLog { rows, ..Default::default() }).unwrap();
        assert_eq!(m.rmse_y, 0.0);
        assert_eq!(m.rms_u, 1.0);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(matches!(compute_metrics(&EpisodeLog::default()), Err(Error::EmptyLog)));
    }

    #[test]
    fn single_run_aggregate_equals_run() {
        let m = Metrics { rmse_y: 3.7, rmse_ydot: 11.1, rms_u: 2.3, final_y_error: 0.0, success: true };
        let a = aggregate("adaptive-robust", &[m]);
        assert_eq!((a.rmse_y, a.rmse_ydot, a.rms_u, a.successes), (3.7, 11.1, 2.3, 1));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        Aggregate::write_csv(std::slice::from_ref(&a), &path).unwrap();
        assert_eq!(Aggregate::read_csv(&path).unwrap(), vec![a]);
    }
}
