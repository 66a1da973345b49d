//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "NLSF"  u32 version = 1  u8 dim  (u64 n, f64 L) × dim  (f64 re, f64 im) × n^dim
//! ```
//!
//! Values are stored row-major with the last axis fastest, the same order as
//! [`ComplexField::values`].

use std::io::{Read, Write};
use std::path::Path;

use crate::spectral::{ComplexField, Grid};
use crate::{Complex64, Error, Result};

pub const MAGIC: &[u8; 4] = b"NLSF";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(field: &ComplexField) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(9 + 16 * grid.dim() + 16 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(grid.dim() as u8);
    for _ in 0..grid.dim() {
        out.extend_from_slice(&(grid.n() as u64).to_le_bytes());
        out.extend_from_slice(&grid.half_width().to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Format(format!("truncated while reading {what} at byte {}", self.pos)));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ComplexField> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, not an NLSF snapshot".into()));
    }
    let version = u32::from_le_bytes(c.array("version")?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = c.take(1, "dim")?[0] as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Format(format!("dimension {dim} not in 1..=3")));
    }
    let mut axes = Vec::with_capacity(dim);
    for _ in 0..dim {
        let n = u64::from_le_bytes(c.array("axis length")?);
        let l = f64::from_le_bytes(c.array("axis half width")?);
        axes.push((n, l));
    }
    let (n, l) = axes[0];
    if axes.iter().any(|&(m, w)| m != n || w.to_bits() != l.to_bits()) {
        return Err(Error::Format("anisotropic grids are not supported".into()));
    }
    let grid = Grid::new(dim, usize::try_from(n).map_err(|_| Error::Format("axis too long".into()))?, l)
        .map_err(|e| Error::Format(e.to_string()))?;
    let body = c.take(16 * grid.len(), "values")?;
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let values = body
        .chunks_exact(16)
        .map(|ch| {
            Complex64::new(
                f64::from_le_bytes(ch[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(ch[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    ComplexField::from_values(grid, values)
}

pub fn write_snapshot(path: &Path, field: &ComplexField) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(field)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<ComplexField> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let grid = Grid::new(2, 8, 3.5).unwrap();
        let f = ComplexField::from_fn(grid, |x| Complex64::new(x[0], -x[1]));
        let b = encode(&f);
        assert_eq!(&b[..4], b"NLSF");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(b[8], 2);
        assert_eq!(u64::from_le_bytes(b[9..17].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(b[17..25].try_into().unwrap()), 3.5);
        let body = 9 + 2 * 16;
        assert_eq!(b.len(), body + 16 * 64);
        // second node: x = (-3.5, -3.5 + h), last axis fastest
        let im = f64::from_le_bytes(b[body + 24..body + 32].try_into().unwrap());
        assert_eq!(im, 3.5 - 0.875);
        assert_eq!(decode(&b).unwrap(), f);
    }

    #[test]
    fn rejects_corruption() {
        let grid = Grid::new(1, 8, 1.0).unwrap();
        let b = encode(&ComplexField::zeros(grid));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        assert!(decode(&b[..b.len() - 1]).is_err());
        let mut long = b.clone();
        long.push(0);
        assert!(decode(&long).is_err());
        let mut ver = b;
        ver[4] = 2;
        assert!(decode(&ver).is_err());
    }
}
