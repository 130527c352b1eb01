//! On-disk formats: `LFK1` binary snapshots and the CSV files written by the
//! command-line tool.
//!
//! An `LFK1` file is little-endian throughout:
//!
//! | bytes | content                     |
//! |-------|-----------------------------|
//! | 4     | magic `LFK1`                |
//! | 4     | dimension (`u32`)           |
//! | 4     | points per axis (`u32`)     |
//! | 8     | domain length (`f64`)       |
//! | 8     | time (`f64`)                |
//! | 8·n^N | values in row-major order   |

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::asymptotics::{MassTrace, TraceEntry};
use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

const MAGIC: &[u8; 4] = b"LFK1";

pub const TRACE_HEADER: &str = "t,mass,linf,l2,absorbed,clamped,dt";

/// Formats a float with 15 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.14e}")
    } else {
        v.to_string().to_ascii_lowercase()
    }
}

pub fn fmt_optional(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_float)
}

pub fn write_snapshot(path: &Path, time: f64, field: &Field) -> Result<()> {
    let grid = field.grid();
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    out.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    out.write_all(&grid.length().to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(f64, Field)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> Result<[u8; N]> {
    let chunk = bytes
        .get(*at..*at + N)
        .ok_or_else(|| Error::Format(format!("truncated at byte {}", *at)))?;
    *at += N;
    Ok(chunk.try_into().expect("slice length matches"))
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(f64, Field)> {
    let mut at = 0;
    if &take::<4>(bytes, &mut at)? != MAGIC {
        return Err(Error::Format("bad magic (expected LFK1)".into()));
    }
    let dim = u32::from_le_bytes(take(bytes, &mut at)?) as usize;
    let n = u32::from_le_bytes(take(bytes, &mut at)?) as usize;
    let length = f64::from_le_bytes(take(bytes, &mut at)?);
    let time = f64::from_le_bytes(take(bytes, &mut at)?);
    let grid = Grid::new(dim, n, length).map_err(|e| Error::Format(e.to_string()))?;
    let expected = at + 8 * grid.len();
    if bytes.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let values = bytes[at..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((time, Field::new(grid, values)?))
}

pub fn trace_to_csv(trace: &MassTrace) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for e in trace.entries() {
        let row = [e.t, e.mass, e.linf, e.l2, e.absorbed, e.clamped, e.dt].map(fmt_float).join(",");
        s.push_str(&row);
        s.push('\n');
    }
    s
}

pub fn write_trace(path: &Path, trace: &MassTrace) -> Result<()> {
    fs::write(path, trace_to_csv(trace))?;
    Ok(())
}

pub fn parse_trace(text: &str) -> Result<MassTrace> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        other => return Err(Error::Format(format!("unexpected trace header {other:?}"))),
    }
    let mut trace = MassTrace::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("trace line {}: {e}", i + 2)))?;
        let [t, mass, linf, l2, absorbed, clamped, dt] = v[..] else {
            return Err(Error::Format(format!("trace line {}: expected 7 columns", i + 2)));
        };
        trace.push(TraceEntry { t, mass, linf, l2, absorbed, clamped, dt })?;
    }
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<MassTrace> {
    parse_trace(&fs::read_to_string(path)?)
}
