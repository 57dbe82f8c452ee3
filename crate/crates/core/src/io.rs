//! Point file formats.
//!
//! * CSV: one point per line, comma separated decimal scalars. Blank lines and
//!   lines starting with `#` are skipped.
//! * Binary (`TEPT`): a 16-byte little-endian header `{b"TEPT", u32 n, u32 d,
//!   u32 reserved = 0}` followed by `n * d` IEEE-754 doubles, row-major.
//!
//! Both formats round-trip bit-exactly: CSV scalars are written with the
//! shortest representation that parses back to the same double.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"TEPT";
pub const BINARY_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointFormat {
    Csv,
    Binary,
}

impl PointFormat {
    /// Picks the format from the file extension: `.csv` or `.bin`/`.tept`.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(PointFormat::Csv),
            Some("bin") | Some("tept") => Ok(PointFormat::Binary),
            _ => Err(Error::format(
                path.display().to_string(),
                "cannot infer point format from extension (expected .csv or .bin)",
            )),
        }
    }
}

/// A row-major table of vectors. Unlike [`crate::PointSet`] it may be empty
/// and may contain duplicates; `dim` is `None` only for an empty CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rows {
    pub rows: Vec<Vec<f64>>,
    pub dim: Option<usize>,
}

impl Rows {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len);
        if let Some(d) = dim {
            if let Some(bad) = rows.iter().find(|r| r.len() != d) {
                return Err(Error::dim(d, bad.len()));
            }
        }
        Ok(Self { rows, dim })
    }

    pub fn with_dim(rows: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::dim(dim, bad.len()));
        }
        Ok(Self { rows, dim: Some(dim) })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn read_csv<R: Read>(reader: R, source_name: &str) -> Result<Rows> {
    let mut rows = Vec::new();
    let mut dim = None;
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                field.trim().parse::<f64>().map_err(|e| {
                    Error::format(
                        source_name,
                        format!("line {}, column {}: invalid number {:?}: {e}", lineno + 1, col + 1, field.trim()),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::format(
                    source_name,
                    format!("line {}: expected {d} columns, found {}", lineno + 1, row.len()),
                ))
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    Ok(Rows { rows, dim })
}

pub fn write_csv<W: Write>(mut writer: W, rows: &Rows) -> Result<()> {
    let mut line = String::new();
    for row in &rows.rows {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            // Debug formatting is the shortest round-tripping representation.
            write!(line, "{v:?}").expect("writing to a String cannot fail");
        }
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut reader: R, source_name: &str) -> Result<Rows> {
    let mut header = [0u8; BINARY_HEADER_LEN];
    reader.read_exact(&mut header).map_err(|e| {
        Error::format(source_name, format!("truncated header ({e}); expected {BINARY_HEADER_LEN} bytes"))
    })?;
    if &header[0..4] != BINARY_MAGIC {
        return Err(Error::format(source_name, format!("offset 0: bad magic {:?}, expected \"TEPT\"", &header[0..4])));
    }
    let word = |off: usize| u32::from_le_bytes(header[off..off + 4].try_into().unwrap()) as usize;
    let (n, d, reserved) = (word(4), word(8), word(12));
    if reserved != 0 {
        return Err(Error::format(source_name, format!("offset 12: reserved field must be 0, found {reserved}")));
    }
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::format(source_name, "header size overflow"))?;
    if body.len() != expected {
        return Err(Error::format(
            source_name,
            format!(
                "offset {BINARY_HEADER_LEN}: payload has {} bytes, header declares n={n}, d={d} ({expected} bytes)",
                body.len()
            ),
        ));
    }
    let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let rows = if d == 0 { vec![Vec::new(); n] } else { values.chunks_exact(d).map(<[f64]>::to_vec).collect() };
    Ok(Rows { rows, dim: Some(d) })
}

pub fn write_binary<W: Write>(mut writer: W, rows: &Rows) -> Result<()> {
    let n = u32::try_from(rows.len()).map_err(|_| Error::InvalidParameter("too many rows for TEPT".into()))?;
    let d = u32::try_from(rows.dim.unwrap_or(0)).map_err(|_| Error::InvalidParameter("dimension too large for TEPT".into()))?;
    let mut buf = Vec::with_capacity(BINARY_HEADER_LEN + rows.len() * d as usize * 8);
    buf.extend_from_slice(BINARY_MAGIC);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&d.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for row in &rows.rows {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    writer.write_all(&buf)?;
    writer.flush()?;
    Ok(())
}

pub fn read_points(path: &Path, format: Option<PointFormat>) -> Result<Rows> {
    let format = match format {
        Some(f) => f,
        None => PointFormat::from_path(path)?,
    };
    let name = path.display().to_string();
    let file = fs::File::open(path)?;
    match format {
        PointFormat::Csv => read_csv(file, &name),
        PointFormat::Binary => read_binary(file, &name),
    }
}

pub fn write_points(path: &Path, format: Option<PointFormat>, rows: &Rows) -> Result<()> {
    let format = match format {
        Some(f) => f,
        None => PointFormat::from_path(path)?,
    };
    let file = std::io::BufWriter::new(fs::File::create(path)?);
    match format {
        PointFormat::Csv => write_csv(file, rows),
        PointFormat::Binary => write_binary(file, rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Rows {
        Rows::new(vec![vec![0.1, -2.5e-300, 3.0], vec![f64::MAX, 1.0 / 3.0, -0.0]]).unwrap()
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &sample()).unwrap();
        let back = read_csv(buf.as_slice(), "mem").unwrap();
        for (a, b) in back.rows.iter().flatten().zip(sample().rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn binary_layout() {
        let mut buf = Vec::new();
        write_binary(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..4], b"TEPT");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 16 + 6 * 8);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 0.1);
        assert_eq!(read_binary(buf.as_slice(), "mem").unwrap(), sample());
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = read_csv("1,2\n\n3,x\n".as_bytes(), "pts.csv").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("column 2"), "{err}");
        let err = read_csv("1,2\n3\n".as_bytes(), "pts.csv").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn binary_errors() {
        assert!(read_binary(&b"TEPT"[..], "x").is_err());
        let mut buf = Vec::new();
        write_binary(&mut buf, &sample()).unwrap();
        buf.pop();
        let err = read_binary(buf.as_slice(), "x").unwrap_err().to_string();
        assert!(err.contains("payload"), "{err}");
        buf[0] = b'X';
        assert!(read_binary(buf.as_slice(), "x").is_err());
    }

    #[test]
    fn empty_inputs() {
        let rows = read_csv("# nothing\n".as_bytes(), "e").unwrap();
        assert!(rows.is_empty() && rows.dim.is_none());
        let empty = Rows::with_dim(vec![], 5).unwrap();
        let mut buf = Vec::new();
        write_binary(&mut buf, &empty).unwrap();
        assert_eq!(read_binary(buf.as_slice(), "e").unwrap(), empty);
    }

    #[test]
    fn format_detection() {
        assert_eq!(PointFormat::from_path(Path::new("a/b.CSV")).unwrap(), PointFormat::Csv);
        assert_eq!(PointFormat::from_path(Path::new("b.bin")).unwrap(), PointFormat::Binary);
        assert!(PointFormat::from_path(Path::new("b.txt")).is_err());
    }
}
