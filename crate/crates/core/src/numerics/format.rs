//! Binary field files and plain-text plot data.
//!
//! Layout, all little-endian:
//!
//! | bytes        | content                                      |
//! |--------------|----------------------------------------------|
//! | 4            | magic `HJHG`                                 |
//! | 2            | format version (`u16`)                       |
//! | 2            | dimension (`u16`)                            |
//! | 4 per axis   | nodes along the axis (`u32`)                 |
//! | 8            | spacing `h` (`f64`)                          |
//! | 1            | boundary tag: 0 periodic, 1 dirichlet, 2 outflow |
//! | 8 per axis   | boundary slope (`f64`), dirichlet only       |
//! | 8 per node   | values (`f64`), row-major                    |

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Boundary, Grid, ScalarField, MAX_DIM};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HJHG";
pub const FORMAT_VERSION: u16 = 1;

pub fn encode_field(field: &ScalarField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(32 + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u16).to_le_bytes());
    for _ in 0..g.dim() {
        out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    }
    out.extend_from_slice(&g.h().to_le_bytes());
    out.push(g.boundary().tag());
    if let Boundary::Dirichlet { slope } = g.boundary() {
        for s in &slope[..g.dim()] {
            out.extend_from_slice(&s.to_le_bytes());
        }
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::Format(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_field(bytes: &[u8]) -> Result<ScalarField> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = r.u16("dimension")? as usize;
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let mut ns = [0u32; MAX_DIM];
    for n in ns.iter_mut().take(dim) {
        *n = r.u32("axis length")?;
    }
    if ns[..dim].iter().any(|&n| n != ns[0]) {
        return Err(Error::Format("non-square grids are not supported".into()));
    }
    let h = r.f64("spacing")?;
    let boundary = match r.take(1, "boundary tag")?[0] {
        0 => Boundary::Periodic,
        1 => {
            let mut slope = [0.0; MAX_DIM];
            for s in slope.iter_mut().take(dim) {
                *s = r.f64("boundary slope")?;
            }
            Boundary::Dirichlet { slope }
        }
        2 => Boundary::Outflow,
        t => return Err(Error::Format(format!("unknown boundary tag {t}"))),
    };
    let grid = Grid::new(dim, ns[0] as usize, h, boundary).map_err(|e| Error::Format(e.to_string()))?;
    let count = grid.len();
    let payload = r.take(8 * count, "values")?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(grid, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field(field)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

/// Writes `x value` (1-d) or `x y value` (2-d) lines, with a blank line
/// between rows so gnuplot's `splot` draws a surface. `origin` shifts the
/// printed coordinates.
pub fn write_dat(field: &ScalarField, origin: [f64; MAX_DIM], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let g = field.grid();
    let mut out = String::new();
    for (k, v) in field.values().iter().enumerate() {
        let x = g.position(k);
        if g.dim() == 1 {
            out.push_str(&format!("{} {}\n", x[0] + origin[0], v));
        } else {
            out.push_str(&format!("{} {} {}\n", x[0] + origin[0], x[1] + origin[1], v));
            if (k + 1) % g.n() == 0 {
                out.push('\n');
            }
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
