//! Field snapshot files.
//!
//! Binary layout (little endian): magic `SQGOFLD\0`, format version `u32`,
//! `r_min`, `r_max` as `f64`, `n_r`, `n_theta` as `u64`, time tag `f64`, then
//! the radial-major values. The CSV variant carries the same header as a
//! comment line and one `i,k,value` row per node, all floats printed with 17
//! significant digits so that reading back is bit exact.

use super::{GridError, GridSpec, ScalarField};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufRead, Read, Write};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"SQGOFLD\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a field snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("invalid grid or values: {0}")]
    Grid(#[from] GridError),
    #[error("malformed CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

pub fn write_snapshot<W: Write>(mut w: W, field: &ScalarField) -> Result<(), SnapshotError> {
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_f64::<LittleEndian>(g.r_min())?;
    w.write_f64::<LittleEndian>(g.r_max())?;
    w.write_u64::<LittleEndian>(g.n_r() as u64)?;
    w.write_u64::<LittleEndian>(g.n_theta() as u64)?;
    w.write_f64::<LittleEndian>(field.time())?;
    for &v in field.values() {
        w.write_f64::<LittleEndian>(v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<ScalarField, SnapshotError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let r_min = r.read_f64::<LittleEndian>()?;
    let r_max = r.read_f64::<LittleEndian>()?;
    let n_r = r.read_u64::<LittleEndian>()? as usize;
    let n_theta = r.read_u64::<LittleEndian>()? as usize;
    let time = r.read_f64::<LittleEndian>()?;
    let grid = GridSpec::new(r_min, r_max, n_r, n_theta)?;
    let mut values = vec![0.0; grid.len()];
    r.read_f64_into::<LittleEndian>(&mut values)?;
    Ok(ScalarField::new(grid, values, time)?)
}

pub fn write_snapshot_csv<W: Write>(mut w: W, field: &ScalarField) -> Result<(), SnapshotError> {
    let g = field.grid();
    writeln!(
        w,
        "# sqgo-field v{VERSION} r_min={:.16e} r_max={:.16e} n_r={} n_theta={} time={:.16e}",
        g.r_min(),
        g.r_max(),
        g.n_r(),
        g.n_theta(),
        field.time()
    )?;
    writeln!(w, "i,k,value")?;
    for i in 0..g.n_r() {
        for k in 0..g.n_theta() {
            writeln!(w, "{i},{k},{:.16e}", field.at(i, k))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot_csv<R: BufRead>(r: R) -> Result<ScalarField, SnapshotError> {
    let mut lines = r.lines();
    let bad = |line: usize, reason: &str| SnapshotError::Csv { line, reason: reason.to_string() };
    let header = lines.next().ok_or_else(|| bad(1, "missing header"))??;
    let mut fields = std::collections::HashMap::new();
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("#") || tokens.next() != Some("sqgo-field") || tokens.next() != Some(&format!("v{VERSION}")[..]) {
        return Err(bad(1, "unrecognized header"));
    }
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad(1, "expected key=value"))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| fields.get(k).ok_or_else(|| bad(1, &format!("missing {k}")));
    let num = |k: &str| -> Result<f64, SnapshotError> {
        get(k)?.parse().map_err(|_| bad(1, &format!("bad number for {k}")))
    };
    let count = |k: &str| -> Result<usize, SnapshotError> {
        get(k)?.parse().map_err(|_| bad(1, &format!("bad count for {k}")))
    };
    let grid = GridSpec::new(num("r_min")?, num("r_max")?, count("n_r")?, count("n_theta")?)?;
    let time = num("time")?;
    let _columns = lines.next().ok_or_else(|| bad(2, "missing column line"))??;
    let mut values = vec![f64::NAN; grid.len()];
    for (n, line) in lines.enumerate() {
        let line_no = n + 3;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut next = || parts.next().ok_or_else(|| bad(line_no, "expected three columns"));
        let i: usize = next()?.parse().map_err(|_| bad(line_no, "bad ring index"))?;
        let k: usize = next()?.parse().map_err(|_| bad(line_no, "bad angle index"))?;
        let v: f64 = next()?.parse().map_err(|_| bad(line_no, "bad value"))?;
        if i >= grid.n_r() || k >= grid.n_theta() {
            return Err(bad(line_no, "index out of range"));
        }
        values[grid.index(i, k)] = v;
    }
    Ok(ScalarField::new(grid, values, time)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec2;

    fn sample() -> ScalarField {
        let g = GridSpec::new(1.0, 3.0, 16, 32).unwrap();
        ScalarField::from_fn(g, 0.125, |p: Vec2| (p.x * 1.7).sin() / 3.0 + p.y * 1e-17)
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f).unwrap();
        let back = read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_snapshot_csv(&mut buf, &f).unwrap();
        let back = read_snapshot_csv(&buf[..]).unwrap();
        assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.time(), f.time());
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_snapshot(&b"NOTAFILE0000"[..]), Err(SnapshotError::BadMagic)));
    }
}
