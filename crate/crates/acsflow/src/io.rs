//! Field-file format "ACSFIELD v1" and text emission helpers.
//!
//! A field file is one ASCII header line
//! `ACSFIELD v1 m=<m> extents=<e1,...,em> h=<h> origin=<o1,...,om>
//! boundary=<periodic|dirichlet>` followed by the matrix entries as
//! little-endian 64-bit floats, point-major in lexicographic grid order,
//! row-major per matrix. All writes go through a temp file and rename, so a
//! failed run never leaves a truncated artifact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::AcsField;
use crate::grid::{Boundary, Grid, ScalarGridField};

/// 17-significant-digit float formatting; round-trips f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn header_line(grid: &Grid) -> String {
    let extents: Vec<String> = grid.extents().iter().map(|e| e.to_string()).collect();
    let origin: Vec<String> = grid.origin().iter().map(|o| fmt_f64(*o)).collect();
    format!(
        "ACSFIELD v1 m={} extents={} h={} origin={} boundary={}\n",
        grid.dim(),
        extents.join(","),
        fmt_f64(grid.h()),
        origin.join(","),
        grid.boundary().as_str()
    )
}

/// Write `content` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("bad output path {path:?}")))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(content)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_field(path: &Path, field: &AcsField) -> Result<()> {
    let mut buf = header_line(field.grid()).into_bytes();
    buf.reserve(field.values().len() * 8);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &buf)
}

pub fn read_field(path: &Path) -> Result<AcsField> {
    let mut raw = Vec::new();
    fs::File::open(path)?.read_to_end(&mut raw)?;
    let nl = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse("missing header line".into()))?;
    let header = std::str::from_utf8(&raw[..nl])
        .map_err(|_| Error::Parse("header is not valid UTF-8".into()))?;
    let grid = parse_header(header)?;
    let m = grid.dim();
    let expected = grid.n_points() * m * m;
    let body = &raw[nl + 1..];
    if body.len() != expected * 8 {
        return Err(Error::Parse(format!(
            "payload holds {} bytes, expected {} ({} doubles)",
            body.len(),
            expected * 8,
            expected
        )));
    }
    let mut values = Vec::with_capacity(expected);
    for chunk in body.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    AcsField::from_raw(grid, values)
}

fn parse_header(header: &str) -> Result<Grid> {
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("ACSFIELD") || tokens.next() != Some("v1") {
        return Err(Error::Parse(format!("unrecognized header '{header}'")));
    }
    let mut m: Option<usize> = None;
    let mut extents: Option<Vec<usize>> = None;
    let mut h: Option<f64> = None;
    let mut origin: Option<Vec<f64>> = None;
    let mut boundary: Option<Boundary> = None;
    for tok in tokens {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token '{tok}'")))?;
        match key {
            "m" => {
                m = Some(val.parse().map_err(|_| {
                    Error::Parse(format!("bad dimension '{val}'"))
                })?)
            }
            "extents" => {
                extents = Some(
                    val.split(',')
                        .map(|s| {
                            s.parse()
                                .map_err(|_| Error::Parse(format!("bad extent '{s}'")))
                        })
                        .collect::<Result<Vec<usize>>>()?,
                )
            }
            "h" => {
                h = Some(val.parse().map_err(|_| {
                    Error::Parse(format!("bad spacing '{val}'"))
                })?)
            }
            "origin" => {
                origin = Some(
                    val.split(',')
                        .map(|s| {
                            s.parse().map_err(|_| {
                                Error::Parse(format!("bad origin entry '{s}'"))
                            })
                        })
                        .collect::<Result<Vec<f64>>>()?,
                )
            }
            "boundary" => boundary = Some(Boundary::parse(val)?),
            other => return Err(Error::Parse(format!("unknown header key '{other}'"))),
        }
    }
    let (m, extents, h, origin, boundary) = match (m, extents, h, origin, boundary) {
        (Some(a), Some(b), Some(c), Some(d), Some(e)) => (a, b, c, d, e),
        _ => return Err(Error::Parse("incomplete header".into())),
    };
    if extents.len() != m || origin.len() != m {
        return Err(Error::Parse("header lengths disagree with m".into()));
    }
    Grid::new(extents, h, origin, boundary)
}

/// Store a scalar field in the field-file format as u·id matrices.
pub fn write_scalar_as_field(path: &Path, scalar: &ScalarGridField) -> Result<()> {
    let m = scalar.grid.dim();
    let mut field = AcsField::zeros(scalar.grid.clone());
    for (flat, &u) in scalar.values.iter().enumerate() {
        let mat = field.mat_mut(flat);
        for i in 0..m {
            mat[i * m + i] = u;
        }
    }
    write_field(path, &field)
}

/// Read a scalar field stored as u·id matrices: entry (0,0) per point.
pub fn read_scalar_from_field(path: &Path) -> Result<ScalarGridField> {
    let field = read_field(path)?;
    let m = field.m();
    let values: Vec<f64> = (0..field.n_points()).map(|f| field.mat(f)[0]).collect();
    // consistency: the stored matrices must actually be multiples of id
    for flat in 0..field.n_points() {
        let mat = field.mat(flat);
        let u = mat[0];
        for r in 0..m {
            for c in 0..m {
                let want = if r == c { u } else { 0.0 };
                if (mat[r * m + c] - want).abs() > 1e-12 * u.abs().max(1.0) {
                    return Err(Error::Parse(format!(
                        "point {flat} is not a scalar multiple of the identity"
                    )));
                }
            }
        }
    }
    ScalarGridField::new(field.grid().clone(), values)
}

/// Assemble CSV text from a header and rows of floats, 17 significant digits.
pub fn csv_table(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
