//! Binary field serialization.
//!
//! Layout, all little-endian: header `[dims: u32][sizes: u32 x dims]
//! [channels: u32][value_kind: u32]` followed by the payload as f64 values,
//! channel-major, with complex samples interleaved re, im. Physical lengths
//! and boundary treatment are not stored here; they travel in the dataset
//! manifest and must be supplied on read.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Field, FieldData, GridSpec, ValueKind};

const KIND_REAL: u32 = 0;
const KIND_COMPLEX: u32 = 1;

pub fn write_field<W: Write>(w: &mut W, f: &Field) -> Result<()> {
    let g = f.grid();
    w.write_all(&(g.dims() as u32).to_le_bytes())?;
    for &n in g.sizes() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    w.write_all(&(f.channels() as u32).to_le_bytes())?;
    let kind = match f.value_kind() {
        ValueKind::Real => KIND_REAL,
        ValueKind::Complex => KIND_COMPLEX,
    };
    w.write_all(&kind.to_le_bytes())?;
    match f.data() {
        FieldData::Real(v) => {
            for &x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        FieldData::Complex(v) => {
            for z in v {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn write_field_to_path(path: &Path, f: &Field) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    write_field(&mut buf, f)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_field<R: Read>(r: &mut R, lengths: &[f64], boundary: BoundaryKind) -> Result<Field> {
    let dims = read_u32(r)? as usize;
    if dims == 0 || dims > 2 {
        return Err(Error::Shape(format!("bad dims {dims} in field header")));
    }
    let mut sizes = Vec::with_capacity(dims);
    for _ in 0..dims {
        sizes.push(read_u32(r)? as usize);
    }
    let channels = read_u32(r)? as usize;
    let kind = read_u32(r)?;
    if lengths.len() != dims {
        return Err(Error::Shape(format!(
            "field header has {dims} dims but {} lengths supplied",
            lengths.len()
        )));
    }
    let grid = GridSpec::new(sizes, lengths.to_vec(), boundary)?;
    let n = grid.num_points() * channels;
    match kind {
        KIND_REAL => {
            let mut vals = Vec::with_capacity(n);
            for _ in 0..n {
                vals.push(read_f64(r)?);
            }
            Field::from_real(grid, channels, vals)
        }
        KIND_COMPLEX => {
            let mut vals = Vec::with_capacity(n);
            for _ in 0..n {
                let re = read_f64(r)?;
                let im = read_f64(r)?;
                vals.push(Complex64::new(re, im));
            }
            Field::from_complex(grid, channels, vals)
        }
        other => Err(Error::Shape(format!("bad value_kind {other} in field header"))),
    }
}

pub fn read_field_from_path(
    path: &Path,
    lengths: &[f64],
    boundary: BoundaryKind,
) -> Result<Field> {
    let file = std::fs::File::open(path)?;
    let mut buf = std::io::BufReader::new(file);
    read_field(&mut buf, lengths, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn real_roundtrip_is_bit_exact() {
        let g = GridSpec::periodic_2d(8, 16, 1.0, 2.0).unwrap();
        let f = Field::from_fn_2d(g, |x, y| (x * 7.3).sin() * (y * 2.1).cos() + 1e-17).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let back = read_field(
            &mut buf.as_slice(),
            &[1.0, 2.0],
            BoundaryKind::Periodic,
        )
        .unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn complex_roundtrip_is_bit_exact() {
        let g = GridSpec::periodic_1d(16, 1.0).unwrap();
        let f = Field::from_fn_complex_1d(g, |x| Complex64::new(x, -2.0 * x + 0.125)).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let back = read_field(&mut buf.as_slice(), &[1.0], BoundaryKind::Periodic).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn header_layout_is_fixed() {
        let g = GridSpec::periodic_1d(8, 1.0).unwrap();
        let f = Field::zeros(g, 2, ValueKind::Real);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        assert_eq!(&buf[0..4], &1u32.to_le_bytes());
        assert_eq!(&buf[4..8], &8u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..16], &0u32.to_le_bytes());
        assert_eq!(buf.len(), 16 + 16 * 8);
    }

    #[test]
    fn truncated_payload_errors() {
        let g = GridSpec::periodic_1d(8, 1.0).unwrap();
        let f = Field::zeros(g, 1, ValueKind::Real);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(read_field(&mut buf.as_slice(), &[1.0], BoundaryKind::Periodic).is_err());
    }
}
