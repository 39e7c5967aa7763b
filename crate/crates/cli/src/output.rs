//! Plot-ready trajectory tables and JSON summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use clsnet::evolve::Trajectory;
use serde_json::Value;

use crate::CliError;

/// `t, re_0, im_0, …` rows with `# event <type> t=<time>` comment lines
/// placed before the first sample at or after each event.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, |s| s.dim());
    let mut out = String::from("t");
    for i in 0..n {
        let _ = write!(out, ",re_{i},im_{i}");
    }
    out.push('\n');
    let mut events = traj.events.iter().peekable();
    for (t, psi) in traj.times.iter().zip(&traj.states) {
        while let Some(e) = events.next_if(|e| e.t <= *t) {
            let _ = writeln!(out, "# event {} t={} {}", e.kind, e.t, e.detail);
        }
        let _ = write!(out, "{t}");
        for c in psi.amplitudes().iter() {
            let _ = write!(out, ",{},{}", c.re, c.im);
        }
        out.push('\n');
    }
    for e in events {
        let _ = writeln!(out, "# event {} t={} {}", e.kind, e.t, e.detail);
    }
    out
}

/// Table with a header row and one row per sample.
pub fn table_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
