use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector2;

use super::metrics::Metrics;
use crate::error::{Error, Result};

pub const EPISODE_HEADER: [&str; 22] = [
    "t", "theta1", "theta2", "z_g", "dtheta1", "dtheta2", "dz_g", "y", "ydot", "y_d", "yd_dot", "u", "u_raw", "s",
    "s_delta", "k_d", "p_hat_ks", "p_hat_bs", "p_hat_kszs", "F_c", "F_d", "V",
];

pub const EVENTS_HEADER: [&str; 2] = ["t", "event"];

/// One fixed-rate sample. Angles in rad, lengths in m, torques in N m,
/// forces in N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub q: [f64; 3],
    pub qdot: [f64; 3],
    pub y: f64,
    pub ydot: f64,
    pub y_d: f64,
    pub yd_dot: f64,
    pub u: f64,
    pub u_raw: f64,
    pub s: f64,
    pub s_delta: f64,
    pub k_d: f64,
    pub p_hat: [f64; 3],
    pub f_c: f64,
    pub f_d: f64,
    /// Lyapunov value, only when the plant truth is known.
    pub v: Option<f64>,
    /// Sample lies in an inter-swing pause.
    pub paused: bool,
}

impl LogRow {
    fn fields(&self) -> [f64; 21] {
        [
            self.t, self.q[0], self.q[1], self.q[2], self.qdot[0], self.qdot[1], self.qdot[2], self.y, self.ydot,
            self.y_d, self.yd_dot, self.u, self.u_raw, self.s, self.s_delta, self.k_d, self.p_hat[0], self.p_hat[1],
            self.p_hat[2], self.f_c, self.f_d,
        ]
    }

    fn from_fields(f: &[f64; 21], v: Option<f64>) -> Self {
        Self {
            t: f[0],
            q: [f[1], f[2], f[3]],
            qdot: [f[4], f[5], f[6]],
            y: f[7],
            ydot: f[8],
            y_d: f[9],
            yd_dot: f[10],
            u: f[11],
            u_raw: f[12],
            s: f[13],
            s_delta: f[14],
            k_d: f[15],
            p_hat: [f[16], f[17], f[18]],
            f_c: f[19],
            f_d: f[20],
            v,
            paused: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Release,
    Grab,
    GrabFailed,
    Swap,
    PauseStart,
    PauseEnd,
    Saturation,
    SingularityAbort,
}

impl EventKind {
    const ALL: [EventKind; 8] = [
        EventKind::Release,
        EventKind::Grab,
        EventKind::GrabFailed,
        EventKind::Swap,
        EventKind::PauseStart,
        EventKind::PauseEnd,
        EventKind::Saturation,
        EventKind::SingularityAbort,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Release => "release",
            EventKind::Grab => "grab",
            EventKind::GrabFailed => "grab-failed",
            EventKind::Swap => "swap",
            EventKind::PauseStart => "pause-start",
            EventKind::PauseEnd => "pause-end",
            EventKind::Saturation => "saturation",
            EventKind::SingularityAbort => "singularity-abort",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown event `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub rows: Vec<LogRow>,
    pub events: Vec<Event>,
    pub success: bool,
    pub aborted: bool,
    pub swings_completed: usize,
    /// Pivot station at the start of every swing, plus the final one after the last swap.
    pub pivot_stations: Vec<f64>,
    /// Metrics of each attempted swing.
    pub per_swing: Vec<Metrics>,
    /// Cable node snapshots `(t, positions)` when node logging is enabled.
    pub nodes: Vec<(f64, Vec<Vector2<f64>>)>,
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?)))
}

fn finish(w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<BufReader<File>>> {
    let mut r = csv::ReaderBuilder::new().from_reader(BufReader::new(File::open(path)?));
    let found = r.headers()?.iter().map(str::to_owned).collect::<Vec<_>>();
    if found != header {
        return Err(Error::Parse { path: path.to_path_buf(), line: 1, reason: format!("expected header `{}`", header.join(",")) });
    }
    Ok(r)
}

impl EpisodeLog {
    pub fn push_event(&mut self, t: f64, kind: EventKind) {
        self.events.push(Event { t, kind });
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = writer(path.as_ref())?;
        w.write_record(EPISODE_HEADER)?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.fields().iter().map(f64::to_string).collect();
            rec.push(row.v.map_or_else(String::new, |v| v.to_string()));
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn write_events(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = writer(path.as_ref())?;
        w.write_record(EVENTS_HEADER)?;
        for e in &self.events {
            w.write_record([e.t.to_string(), e.kind.as_str().to_owned()])?;
        }
        finish(w)
    }

    /// Writes the episode CSV and the `<stem>_events.csv` sidecar.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.write_csv(path)?;
        self.write_events(events_path(path))
    }

    /// Reads an episode CSV and, if present, its events sidecar. Pause flags
    /// are rebuilt from the pause events.
    pub fn read(path: impl AsRef<Path>) -> Result<EpisodeLog> {
        let path = path.as_ref();
        let rows = read_rows(path)?;
        let ev_path = events_path(path);
        let events = if ev_path.exists() { read_events(&ev_path)? } else { Vec::new() };
        let mut log = EpisodeLog { rows, events, ..Default::default() };
        log.mark_pauses();
        Ok(log)
    }

    fn mark_pauses(&mut self) {
        let mut start = None;
        let mut intervals = Vec::new();
        for e in &self.events {
            match e.kind {
                EventKind::PauseStart => start = Some(e.t),
                EventKind::PauseEnd => {
                    if let Some(s) = start.take() {
                        intervals.push((s, e.t));
                    }
                }
                _ => {}
            }
        }
        for row in &mut self.rows {
            row.paused = intervals.iter().any(|&(a, b)| row.t > a && row.t < b);
        }
    }
}

pub fn events_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_events.csv"))
}

fn read_rows(path: &Path) -> Result<Vec<LogRow>> {
    let mut r = reader(path, &EPISODE_HEADER)?;
    let mut rows: Vec<LogRow> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let bad = |reason: String| Error::Parse { path: path.to_path_buf(), line, reason };
        if rec.len() != EPISODE_HEADER.len() {
            return Err(bad(format!("expected {} fields, found {}", EPISODE_HEADER.len(), rec.len())));
        }
        let mut f = [0.0; 21];
        for (k, slot) in f.iter_mut().enumerate() {
            *slot = rec[k].parse().map_err(|_| bad(format!("column `{}`: `{}` is not a number", EPISODE_HEADER[k], &rec[k])))?;
        }
        let v = match &rec[21] {
            "" => None,
            s => Some(s.parse().map_err(|_| bad(format!("column `V`: `{s}` is not a number")))?),
        };
        if let Some(prev) = rows.last() {
            if f[0] <= prev.t {
                return Err(Error::NonMonotonicTime { row: line, t: f[0] });
            }
        }
        rows.push(LogRow::from_fields(&f, v));
    }
    Ok(rows)
}

fn read_events(path: &Path) -> Result<Vec<Event>> {
    let mut r = reader(path, &EVENTS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |reason: String| Error::Parse { path: path.to_path_buf(), line: i + 2, reason };
        if rec.len() != 2 {
            return Err(bad("expected 2 fields".into()));
        }
        let t = rec[0].parse().map_err(|_| bad(format!("`{}` is not a number", &rec[0])))?;
        let kind = rec[1].parse().map_err(bad)?;
        out.push(Event { t, kind });
    }
    Ok(out)
}

/// Writer for cable node trajectories (`t,node_index,x,z`).
pub struct NodeDump;

impl NodeDump {
    pub const HEADER: [&'static str; 4] = ["t", "node_index", "x", "z"];

    pub fn write(path: impl AsRef<Path>, frames: &[(f64, Vec<Vector2<f64>>)]) -> Result<()> {
        let mut w = writer(path.as_ref())?;
        w.write_record(Self::HEADER)?;
        for (t, nodes) in frames {
            for (i, p) in nodes.iter().enumerate() {
                w.write_record([t.to_string(), i.to_string(), p.x.to_string(), p.y.to_string()])?;
            }
        }
        finish(w)
    }
}
