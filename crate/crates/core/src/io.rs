//! Plain-text tables for section points and trajectories.
//!
//! A table is a block of `#` metadata lines, a header row and comma-separated
//! rows of numbers written with 17 significant digits.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::convert;
use crate::integrate::{integrate_dense, IntegratorConfig};
use crate::models::Model;
use crate::search::TrackingRun;
use crate::state::{Frame, PhaseState};

/// Columns of a section-points table.
pub const SECTION_COLUMNS: [&str; 8] = ["nu", "x", "y", "z", "vx", "vy", "vz", "dv_mag"];

/// Columns of a trajectory table.
pub const TRAJECTORY_COLUMNS: [&str; 7] = ["s", "x", "y", "z", "vx", "vy", "vz"];

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMeta {
    pub version: String,
    pub config_sha256: String,
}

impl OutputMeta {
    pub fn new(config_sha256: impl Into<String>) -> Self {
        Self { version: crate::VERSION.to_string(), config_sha256: config_sha256.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// `key value` pairs from the metadata lines, in file order.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn output_meta(&self) -> Option<OutputMeta> {
        Some(OutputMeta {
            version: self.meta_value("version")?.to_string(),
            config_sha256: self.meta_value("config_sha256")?.to_string(),
        })
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!("row has {} values, table has {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.meta {
            if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') || v.trim() != v {
                return Err(Error::InvalidInput(format!("metadata `{k}` cannot be written on one line")));
            }
            writeln!(w, "# {k} {v}")?;
        }
        let header = self.columns.join(",");
        let bad_name = |c: &String| c.contains([',', '\n']) || c.trim() != c;
        if self.columns.iter().any(bad_name) || header.trim().is_empty() || header.starts_with('#') {
            return Err(Error::InvalidInput(format!("column names `{header}` cannot be read back")));
        }
        if let Some(row) = self.rows.iter().find(|r| r.len() != self.columns.len()) {
            return Err(Error::InvalidInput(format!("row has {} values, table has {} columns", row.len(), self.columns.len())));
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn render(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if let Some(rest) = line.strip_prefix('#') {
                if columns.is_some() {
                    continue;
                }
                let rest = rest.trim();
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                meta.push((k.to_string(), v.trim().to_string()));
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match &columns {
                None => columns = Some(line.split(',').map(|c| c.trim().to_string()).collect()),
                Some(cols) => {
                    let row = line
                        .split(',')
                        .map(|f| f.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<f64>, _>>()
                        .map_err(|e| Error::InvalidInput(format!("line {}: {e}", n + 1)))?;
                    if row.len() != cols.len() {
                        return Err(Error::InvalidInput(format!(
                            "line {}: {} values for {} columns",
                            n + 1,
                            row.len(),
                            cols.len()
                        )));
                    }
                    rows.push(row);
                }
            }
        }
        let columns = columns.ok_or_else(|| Error::InvalidInput("table has no header row".into()))?;
        Ok(Self { meta, columns, rows })
    }

    fn expect_columns(&self, expected: &[&str]) -> Result<()> {
        if self.columns.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::InvalidInput(format!("expected columns {}, found {}", expected.join(","), self.columns.join(","))));
        }
        Ok(())
    }
}

fn with_provenance(mut t: Table, meta: &OutputMeta) -> Table {
    t.meta.insert(0, ("config_sha256".into(), meta.config_sha256.clone()));
    t.meta.insert(0, ("version".into(), meta.version.clone()));
    t
}

/// One corrected section crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionRow {
    pub nu: f64,
    pub state: [f64; 6],
    pub dv_mag: f64,
}

pub fn section_rows(run: &TrackingRun) -> Vec<SectionRow> {
    run.crossings.iter().map(|c| SectionRow { nu: c.s, state: c.state_out(), dv_mag: c.dv_mag }).collect()
}

pub fn section_table(rows: &[SectionRow], meta: &OutputMeta) -> Table {
    let mut t = with_provenance(Table::new(&SECTION_COLUMNS), meta);
    for r in rows {
        let mut v = vec![r.nu];
        v.extend_from_slice(&r.state);
        v.push(r.dv_mag);
        t.rows.push(v);
    }
    t
}

pub fn parse_section_table(t: &Table) -> Result<Vec<SectionRow>> {
    t.expect_columns(&SECTION_COLUMNS)?;
    Ok(t.rows
        .iter()
        .map(|r| SectionRow { nu: r[0], state: [r[1], r[2], r[3], r[4], r[5], r[6]], dv_mag: r[7] })
        .collect())
}

pub fn trajectory_table(states: &[PhaseState], meta: &OutputMeta) -> Result<Table> {
    let frame = states.first().map_or(Frame::Pulsating, |s| s.frame);
    let mut t = with_provenance(Table::new(&TRAJECTORY_COLUMNS), meta).with_meta("frame", frame);
    for st in states {
        st.expect_frame(frame)?;
        let mut v = vec![st.s];
        v.extend_from_slice(&st.to_array());
        t.rows.push(v);
    }
    Ok(t)
}

pub fn parse_trajectory_table(t: &Table) -> Result<Vec<PhaseState>> {
    t.expect_columns(&TRAJECTORY_COLUMNS)?;
    let frame: Frame = t.meta_value("frame").ok_or_else(|| Error::InvalidInput("trajectory has no frame".into()))?.parse()?;
    Ok(t.rows.iter().map(|r| PhaseState::from_array(r[0], &[r[1], r[2], r[3], r[4], r[5], r[6]], frame)).collect())
}

/// Re-propagates the arcs of a tracking run and samples `per_arc` states on
/// each, ending at the crossings. The first arc starts at the initial state.
pub fn sample_run(model: &Model, cfg: IntegratorConfig, run: &TrackingRun, per_arc: usize) -> Result<Vec<PhaseState>> {
    let frame = model.frame();
    let mut out = Vec::new();
    let (mut s, mut y) = (run.nu0, run.initial);
    out.push(PhaseState::from_array(s, &y, frame));
    for c in &run.crossings {
        let dense = integrate_dense(model, s, y, c.s, cfg)?;
        for k in 1..=per_arc.max(1) {
            let sk = s + (c.s - s) * k as f64 / per_arc.max(1) as f64;
            let yk = if k == per_arc.max(1) { [c.pos[0], c.pos[1], c.pos[2], c.vel_in[0], c.vel_in[1], c.vel_in[2]] } else { dense.eval(sk) };
            out.push(PhaseState::from_array(sk, &yk, frame));
        }
        (s, y) = (c.s, c.state_out());
    }
    Ok(out)
}

/// Converts every state to `target`.
pub fn convert_all(states: &[PhaseState], target: Frame, model: &Model) -> Result<Vec<PhaseState>> {
    states.iter().map(|s| convert(s, target, &model.params)).collect()
}
