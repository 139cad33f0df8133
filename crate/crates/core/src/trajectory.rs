//! Desired output trajectories.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::control::OutputTarget;
use crate::error::{Error, Result};

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "y_d", "yd_dot", "yd_ddot"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Generated,
    Loaded,
}

#[derive(Debug, Clone, PartialEq)]
enum Profile {
    Quintic { y0: f64, yf: f64 },
    Sampled(Samples),
}

#[derive(Debug, Clone, PartialEq)]
struct Samples {
    t: Vec<f64>,
    y: Vec<f64>,
    yd: Vec<f64>,
    ydd: Vec<f64>,
}

/// Immutable desired output over `[0, horizon]`, held at its final value
/// afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputTrajectory {
    horizon: f64,
    profile: Profile,
}

/// Rest-to-rest quintic from `y0` to `yf` over `horizon` seconds.
pub fn quintic_profile(y0: f64, yf: f64, horizon: f64) -> Result<OutputTrajectory> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
    }
    if !(y0.is_finite() && yf.is_finite()) {
        return Err(Error::param("y0/yf", "endpoints must be finite"));
    }
    Ok(OutputTrajectory { horizon, profile: Profile::Quintic { y0, yf } })
}

/// Reads a `t,y_d,yd_dot,yd_ddot` CSV. Samples are joined by cubic Hermite
/// segments in position and velocity and linear segments in acceleration.
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<OutputTrajectory> {
    let path = path.as_ref();
    let parse_err = |line: usize, reason: String| Error::Parse { path: path.to_path_buf(), line, reason };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(File::open(path)?));
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_HEADER {
        return Err(parse_err(1, format!("expected header `{}`", TRAJECTORY_HEADER.join(","))));
    }
    let mut s = Samples { t: vec![], y: vec![], yd: vec![], ydd: vec![] };
    for (row, rec) in reader.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, found {}", rec.len())));
        }
        let mut vals = [0.0; 4];
        for (v, field) in vals.iter_mut().zip(rec.iter()) {
            *v = field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("`{field}` is not a finite number")))?;
        }
        if let Some(&prev) = s.t.last() {
            if vals[0] <= prev {
                return Err(Error::NonMonotonicTime { row: line, t: vals[0] });
            }
        }
        s.t.push(vals[0]);
        s.y.push(vals[1]);
        s.yd.push(vals[2]);
        s.ydd.push(vals[3]);
    }
    if s.t.len() < 2 {
        return Err(parse_err(1, "need at least two samples".into()));
    }
    if s.t[0] != 0.0 {
        return Err(parse_err(2, format!("first sample must be at t = 0, got {}", s.t[0])));
    }
    let horizon = *s.t.last().unwrap();
    Ok(OutputTrajectory { horizon, profile: Profile::Sampled(s) })
}

fn hermite(t: f64, t0: f64, t1: f64, p0: f64, m0: f64, p1: f64, m1: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * h * m1
}

impl OutputTrajectory {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn provenance(&self) -> Provenance {
        match self.profile {
            Profile::Quintic { .. } => Provenance::Generated,
            Profile::Sampled(_) => Provenance::Loaded,
        }
    }

    /// Desired output at `t`; times past the horizon hold the final pose at rest.
    pub fn sample(&self, t: f64) -> OutputTarget {
        let t = t.max(0.0);
        if t > self.horizon {
            let end = self.sample(self.horizon);
            return OutputTarget { y_d: end.y_d, yd_dot: 0.0, yd_ddot: 0.0 };
        }
        match &self.profile {
            Profile::Quintic { y0, yf } => {
                let tau = t / self.horizon;
                let (t2, t3) = (tau * tau, tau * tau * tau);
                let dy = yf - y0;
                let big_t = self.horizon;
                OutputTarget {
                    y_d: y0 + dy * t3 * (10.0 - 15.0 * tau + 6.0 * t2),
                    yd_dot: dy * 30.0 * t2 * (1.0 - tau).powi(2) / big_t,
                    yd_ddot: dy * 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * t2) / (big_t * big_t),
                }
            }
            Profile::Sampled(s) => {
                // index of the segment [t_i, t_{i+1}] holding t
                let i = match s.t.partition_point(|&ti| ti <= t) {
                    0 => 0,
                    n => (n - 1).min(s.t.len() - 2),
                };
                let (t0, t1) = (s.t[i], s.t[i + 1]);
                let w = (t - t0) / (t1 - t0);
                OutputTarget {
                    y_d: hermite(t, t0, t1, s.y[i], s.yd[i], s.y[i + 1], s.yd[i + 1]),
                    yd_dot: hermite(t, t0, t1, s.yd[i], s.ydd[i], s.yd[i + 1], s.ydd[i + 1]),
                    yd_ddot: s.ydd[i] + w * (s.ydd[i + 1] - s.ydd[i]),
                }
            }
        }
    }

    /// Writes the trajectory sampled at `rate` Hz over `[0, horizon]`.
    pub fn write_csv(&self, path: impl AsRef<Path>, rate: f64) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(File::create(path)?));
        w.write_record(TRAJECTORY_HEADER)?;
        let n = (self.horizon * rate).round() as usize;
        for k in 0..=n {
            let t = if k == n { self.horizon } else { k as f64 / rate };
            let tg = self.sample(t);
            w.write_record([t, tg.y_d, tg.yd_dot, tg.yd_ddot].map(|v| v.to_string()))?;
        }
        w.flush()?;
        w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(v: f64) -> f64 {
        v.to_radians()
    }

    fn nominal_profile() -> OutputTrajectory {
        quintic_profile(deg(-97.0), deg(94.0), 1.1).unwrap()
    }

    #[test]
    fn quintic_boundary_conditions() {
        let tr = nominal_profile();
        let a = tr.sample(0.0);
        let b = tr.sample(1.1);
        assert_eq!(a.y_d, deg(-97.0));
        assert!((b.y_d - deg(94.0)).abs() < 1e-15);
        for tg in [a, b] {
            assert!(tg.yd_dot.abs() < 1e-15 && tg.yd_ddot.abs() < 1e-12);
        }
        assert_eq!(tr.provenance(), Provenance::Generated);
    }

    #[test]
    fn quintic_midpoint() {
        let tr = nominal_profile();
        assert!((tr.sample(0.55).y_d.to_degrees() - -1.5).abs() < 1e-12);
    }

    #[test]
    fn hold_after_horizon() {
        let tr = nominal_profile();
        let tg = tr.sample(1.6);
        assert!((tg.y_d - deg(94.0)).abs() < 1e-15);
        assert_eq!((tg.yd_dot, tg.yd_ddot), (0.0, 0.0));
        assert_eq!(tr.sample(-0.1), tr.sample(0.0));
    }

    #[test]
    fn finite_difference_consistency() {
        let tr = nominal_profile();
        let h = 1e-3;
        let mut t = h;
        while t < 1.1 - h {
            let (m, p) = (tr.sample(t - h), tr.sample(t + h));
            let c = tr.sample(t);
            assert!(((p.y_d - m.y_d) / (2.0 * h) - c.yd_dot).abs() < 1e-4);
            assert!(((p.yd_dot - m.yd_dot) / (2.0 * h) - c.yd_ddot).abs() < 1e-3);
            t += h;
        }
    }

    #[test]
    fn quintic_is_monotone() {
        let tr = nominal_profile();
        let mut prev = tr.sample(0.0).y_d;
        for k in 1..=1100 {
            let y = tr.sample(k as f64 * 1e-3).y_d;
            assert!(y >= prev);
            prev = y;
        }
    }

    #[test]
    fn rejects_bad_horizon() {
        assert!(quintic_profile(0.0, 1.0, 0.0).is_err());
        assert!(quintic_profile(0.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let tr = nominal_profile();
        tr.write_csv(&path, 1000.0).unwrap();
        let loaded = load_trajectory(&path).unwrap();
        assert_eq!(loaded.provenance(), Provenance::Loaded);
        assert_eq!(loaded.horizon(), 1.1);
        for k in 0..=1100 {
            let t = if k == 1100 { 1.1 } else { k as f64 / 1000.0 };
            let (a, b) = (tr.sample(t), loaded.sample(t));
            assert!((a.y_d - b.y_d).abs() < 1e-8);
            assert!((a.yd_dot - b.yd_dot).abs() < 1e-8);
            assert!((a.yd_ddot - b.yd_ddot).abs() < 1e-8);
        }
        // between samples the Hermite segments stay close to the quintic
        let (a, b) = (tr.sample(0.3005), loaded.sample(0.3005));
        assert!((a.y_d - b.y_d).abs() < 1e-9);
    }

    #[test]
    fn two_row_file_is_a_single_hermite_cubic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.csv");
        std::fs::write(&path, "t,y_d,yd_dot,yd_ddot\n0,0,0,0\n2,1,0,0\n").unwrap();
        let tr = load_trajectory(&path).unwrap();
        // smoothstep 3s^2 - 2s^3
        let tg = tr.sample(0.5);
        assert!((tg.y_d - (3.0 * 0.0625 - 2.0 * 0.015625)).abs() < 1e-15);
        assert_eq!(tr.sample(1.0).y_d, 0.5);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,y_d,yd_dot,yd_ddot\n0,0,0,0\n0.5,1,0,0\n0.4,1,0,0\n").unwrap();
        assert!(matches!(load_trajectory(&path), Err(Error::NonMonotonicTime { row: 4, .. })));

        std::fs::write(&path, "t,y_d,yd_dot,yd_ddot\n0,0,0,0\n0.5,abc,0,0\n").unwrap();
        assert!(matches!(load_trajectory(&path), Err(Error::Parse { line: 3, .. })));

        std::fs::write(&path, "t,y,yd_dot,yd_ddot\n0,0,0,0\n0.5,1,0,0\n").unwrap();
        assert!(matches!(load_trajectory(&path), Err(Error::Parse { line: 1, .. })));

        assert!(matches!(load_trajectory(dir.path().join("missing.csv")), Err(Error::Io(_))));
    }
}
