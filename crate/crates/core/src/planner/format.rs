//! Line-oriented trace files, one scenario per file:
//!
//! ```text
//! scenario <id> <total_layers> <horizon> <dt>
//! reference <x1> <y1> ... <xT> <yT>
//! layer 1 <x1> <y1> ... <xT> <yT>
//! ...
//! layer L <x1> <y1> ... <xT> <yT>
//! ```
//!
//! Numbers are written with 17 significant digits so a save/load cycle is
//! bit-exact. Blank lines are ignored; anything else out of place is an error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::ScenarioTrace;
use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, Waypoint};

pub const TRACE_EXTENSION: &str = "trace";

fn push_num(out: &mut String, v: f64) {
    write!(out, " {v:.16e}").unwrap();
}

fn push_points(out: &mut String, traj: &Trajectory) {
    for p in traj.points() {
        push_num(out, p.x);
        push_num(out, p.y);
    }
}

pub fn render_trace(trace: &ScenarioTrace) -> String {
    let mut out = String::new();
    write!(
        out,
        "scenario {} {} {}",
        trace.scenario_id(),
        trace.layers().len(),
        trace.horizon()
    )
    .unwrap();
    push_num(&mut out, trace.dt());
    out.push_str("\nreference");
    push_points(&mut out, trace.reference());
    out.push('\n');
    for (i, layer) in trace.layers().iter().enumerate() {
        write!(out, "layer {}", i + 1).unwrap();
        push_points(&mut out, layer);
        out.push('\n');
    }
    out
}

pub fn save_trace(trace: &ScenarioTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_trace(trace)).map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<ScenarioTrace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, path)
}

type NumberedLines<'a> =
    std::iter::Filter<std::iter::Enumerate<std::str::Lines<'a>>, fn(&(usize, &str)) -> bool>;

struct Parser<'a> {
    path: &'a Path,
    lines: NumberedLines<'a>,
    last_line: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn next_record(&mut self, expecting: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.lines.next() {
            Some((i, line)) => {
                self.last_line = i + 1;
                Ok((i + 1, line.split_whitespace().collect()))
            }
            None => Err(self.err(
                self.last_line + 1,
                format!("unexpected end of file, expected {expecting}"),
            )),
        }
    }

    fn number<T: std::str::FromStr>(&self, line: usize, field: &str, tok: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.err(line, format!("{field}: cannot parse {tok:?}")))
    }

    fn points(
        &self,
        line: usize,
        what: &str,
        toks: &[&str],
        horizon: usize,
        dt: f64,
    ) -> Result<Trajectory> {
        if toks.len() != 2 * horizon {
            return Err(self.err(
                line,
                format!(
                    "{what}: expected {horizon} points ({} coordinates), found {} coordinates",
                    2 * horizon,
                    toks.len()
                ),
            ));
        }
        let mut points = Vec::with_capacity(horizon);
        for pair in toks.chunks_exact(2) {
            let x: f64 = self.number(line, what, pair[0])?;
            let y: f64 = self.number(line, what, pair[1])?;
            points.push(Waypoint::new(x, y).map_err(|e| self.err(line, format!("{what}: {e}")))?);
        }
        Trajectory::new(points, dt).map_err(|e| self.err(line, format!("{what}: {e}")))
    }
}

fn not_blank(entry: &(usize, &str)) -> bool {
    !entry.1.trim().is_empty()
}

/// Parses trace text. `origin` is only used in error messages.
pub fn parse_trace(text: &str, origin: &Path) -> Result<ScenarioTrace> {
    let mut p = Parser {
        path: origin,
        lines: text
            .lines()
            .enumerate()
            .filter(not_blank as fn(&(usize, &str)) -> bool),
        last_line: 0,
    };

    let (line, header) = p.next_record("scenario header")?;
    if header.first() != Some(&"scenario") {
        return Err(p.err(
            line,
            "first record must be `scenario <id> <layers> <horizon> <dt>`",
        ));
    }
    if header.len() != 5 {
        return Err(p.err(
            line,
            format!(
                "scenario header: expected 4 fields, found {}",
                header.len() - 1
            ),
        ));
    }
    let scenario_id = header[1].to_string();
    let total_layers: usize = p.number(line, "total_layers", header[2])?;
    let horizon: usize = p.number(line, "horizon", header[3])?;
    let dt: f64 = p.number(line, "dt", header[4])?;
    if total_layers == 0 {
        return Err(p.err(line, "total_layers must be >= 1"));
    }
    if horizon == 0 {
        return Err(p.err(line, "horizon must be >= 1"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(p.err(line, format!("dt must be > 0, got {dt}")));
    }

    let (line, rec) = p.next_record("reference record")?;
    if rec.first() != Some(&"reference") {
        return Err(p.err(line, "second record must be `reference ...`"));
    }
    let reference = p.points(line, "reference", &rec[1..], horizon, dt)?;

    let mut per_layer = Vec::with_capacity(total_layers);
    while let Some((i, raw)) = p.lines.next() {
        let line = i + 1;
        p.last_line = line;
        let rec: Vec<&str> = raw.split_whitespace().collect();
        if rec.first() != Some(&"layer") {
            return Err(p.err(line, format!("expected a layer record, found {:?}", rec[0])));
        }
        let expected = per_layer.len() + 1;
        if expected > total_layers {
            return Err(p.err(
                line,
                format!("header declares {total_layers} layers, found more layer records"),
            ));
        }
        let index: usize = match rec.get(1) {
            Some(tok) => p.number(line, "layer index", tok)?,
            None => return Err(p.err(line, "layer record without an index")),
        };
        if index != expected {
            return Err(p.err(
                line,
                format!("expected layer {expected}, found layer {index}"),
            ));
        }
        let what = format!("layer {index}");
        per_layer.push(p.points(line, &what, &rec[2..], horizon, dt)?);
    }
    if per_layer.len() != total_layers {
        return Err(p.err(
            p.last_line,
            format!(
                "layer count mismatch: header declares {total_layers} layers, found {} layer records",
                per_layer.len()
            ),
        ));
    }

    ScenarioTrace::new(scenario_id, reference, per_layer).map_err(|e| p.err(1, e.to_string()))
}

/// Trace files directly inside `dir`, sorted by file name.
pub fn list_trace_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == TRACE_EXTENSION) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
