//! Config loading, binary frame dumps and CSV output.
//!
//! A frame file is the magic `BSLQB1`, the field name as a little-endian
//! `u32` byte length followed by UTF-8, the extents `nx, ny` as `u64`, `dx`
//! and `time` as `f64`, then `nx ny` row-major little-endian `f64` values per
//! component with vector components interleaved.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{NodalField, VelocityField};
use crate::sim::{DiagnosticsRow, SceneConfig, SimState};

pub const FRAME_MAGIC: &[u8; 6] = b"BSLQB1";

/// Reads and validates a JSON scene config.
pub fn load_config(path: impl AsRef<Path>) -> Result<SceneConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Parses and validates a JSON scene config.
pub fn parse_config(text: &str) -> Result<SceneConfig> {
    let cfg: SceneConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// One dumped field.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFile {
    pub name: String,
    pub extents: [usize; 2],
    pub dx: f64,
    pub time: f64,
    /// 1 for scalar fields, 2 for vector fields.
    pub components: usize,
    pub data: Vec<f64>,
}

impl FrameFile {
    pub fn scalar(name: &str, field: &NodalField, time: f64) -> Self {
        Self {
            name: name.into(),
            extents: field.grid.node_dims(),
            dx: field.grid.dx,
            time,
            components: 1,
            data: field.values.clone(),
        }
    }

    pub fn vector(name: &str, field: &VelocityField, time: f64) -> Self {
        Self {
            name: name.into(),
            extents: field.grid.cells,
            dx: field.grid.dx,
            time,
            components: 2,
            data: field.coeffs.iter().flat_map(|v| [v.x, v.y]).collect(),
        }
    }

    /// The named field of `state`, or `None` when the state does not hold it.
    pub fn from_state(state: &SimState, name: &str) -> Option<Self> {
        match name {
            "velocity" => Some(Self::vector(name, &state.velocity, state.time)),
            "pressure" => state
                .pressure
                .as_ref()
                .map(|p| Self::scalar(name, p, state.time)),
            "levelset" => state
                .phi
                .as_ref()
                .map(|p| Self::scalar(name, p, state.time)),
            "dye" => state
                .dye
                .as_ref()
                .map(|p| Self::scalar(name, p, state.time)),
            _ => None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 4 + self.name.len() + 32 + 8 * self.data.len());
        out.extend_from_slice(FRAME_MAGIC);
        out.extend_from_slice(&(self.name.len() as u32).to_le_bytes());
        out.extend_from_slice(self.name.as_bytes());
        out.extend_from_slice(&(self.extents[0] as u64).to_le_bytes());
        out.extend_from_slice(&(self.extents[1] as u64).to_le_bytes());
        out.extend_from_slice(&self.dx.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(Error::Frame(format!("truncated {what}")));
            }
            let (head, rest) = cur.split_at(n);
            cur = rest;
            Ok(head)
        };
        if take(6, "magic")? != FRAME_MAGIC {
            return Err(Error::Frame("bad magic".into()));
        }
        let name_len =
            u32::from_le_bytes(take(4, "name length")?.try_into().expect("4 bytes")) as usize;
        let name = String::from_utf8(take(name_len, "name")?.to_vec())
            .map_err(|_| Error::Frame("field name is not UTF-8".into()))?;
        let mut u64_at =
            |what| take(8, what).map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")));
        let nx = u64_at("extents")? as usize;
        let ny = u64_at("extents")? as usize;
        let dx = f64::from_bits(u64_at("dx")?);
        let time = f64::from_bits(u64_at("time")?);
        let count = nx
            .checked_mul(ny)
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Frame(format!("invalid extents {nx} x {ny}")))?;
        let payload = cur;
        if !payload.len().is_multiple_of(8) {
            return Err(Error::Frame(
                "payload is not a whole number of f64 values".into(),
            ));
        }
        let values = payload.len() / 8;
        let components = match values / count {
            c @ (1 | 2) if values == c * count => c,
            _ => {
                return Err(Error::Frame(format!(
                    "payload holds {values} values, expected {count} or {}",
                    2 * count
                )))
            }
        };
        let data = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            name,
            extents: [nx, ny],
            dx,
            time,
            components,
            data,
        })
    }
}

pub fn write_frame(frame: &FrameFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, frame.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<FrameFile> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    FrameFile::from_bytes(&bytes)
}

/// Formats like C's `%.17g`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A value that can appear in a CSV row.
pub trait CsvField {
    fn csv(&self) -> String;
}

impl CsvField for f64 {
    fn csv(&self) -> String {
        fmt_g17(*self)
    }
}

impl CsvField for usize {
    fn csv(&self) -> String {
        self.to_string()
    }
}

/// A record with a fixed header.
pub trait CsvRecord {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

impl CsvRecord for DiagnosticsRow {
    const HEADER: &'static [&'static str] = &[
        "step",
        "time",
        "dt",
        "kinetic_energy",
        "max_speed",
        "divergence",
        "newton_mean_iters",
        "newton_fallback_fraction",
        "cg_iterations",
        "particle_count",
        "divergence_before",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.step.csv(),
            self.time.csv(),
            self.dt.csv(),
            self.kinetic_energy.csv(),
            self.max_speed.csv(),
            self.divergence.csv(),
            self.newton_mean_iters.csv(),
            self.newton_fallback_fraction.csv(),
            self.cg_iterations.csv(),
            self.particle_count.csv(),
            self.divergence_before.csv(),
        ]
    }
}

impl CsvRecord for crate::sim::convergence::ErrorRow {
    const HEADER: &'static [&'static str] = &["dx", "error_sl", "error_bslqb_l1", "error_bslqb_lc"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.dx.csv(),
            self.error_sl.csv(),
            self.error_bslqb_l1.csv(),
            self.error_bslqb_lc.csv(),
        ]
    }
}

/// Appends records to a CSV file that starts with the header row.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl CsvWriter<BufWriter<File>> {
    pub fn create<R: CsvRecord>(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Self::new::<R>(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

impl<W: Write> CsvWriter<W> {
    pub fn new<R: CsvRecord>(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "{}", R::HEADER.join(","))?;
        Ok(Self { out })
    }

    pub fn write<R: CsvRecord>(&mut self, row: &R) -> std::io::Result<()> {
        writeln!(self.out, "{}", row.fields().join(","))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Writes all `rows` to `path` under the header.
pub fn write_csv<R: CsvRecord>(path: impl AsRef<Path>, rows: &[R]) -> Result<()> {
    let path = path.as_ref();
    let mut w = CsvWriter::create::<R>(path)?;
    for r in rows {
        w.write(r).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON of any serializable summary.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
