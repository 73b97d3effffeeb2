//! Binary field dump: magic `HVQ1`, rank (u32), then per axis N (u64), lower
//! (f64), upper (f64), boundary byte (0 periodic, 1 dirichlet), followed by the
//! row-major samples as little-endian f64 (complex interleaved re, im).

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::field::Field;
use super::grid::{Axis, Boundary, Grid};
use super::sample::Sample;
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"HVQ1";

pub fn write_field<T: Real, V: Sample<T>>(f: &Field<T, V>, mut out: impl Write) -> Result<()> {
    let grid = f.grid();
    out.write_all(MAGIC)?;
    out.write_all(&(grid.rank() as u32).to_le_bytes())?;
    for axis in grid.axes() {
        out.write_all(&(axis.len() as u64).to_le_bytes())?;
        out.write_all(&axis.lower().as_f64().to_le_bytes())?;
        out.write_all(&axis.upper().as_f64().to_le_bytes())?;
        out.write_all(&[axis.boundary().code()])?;
    }
    let mut words = Vec::with_capacity(f.len() * V::WORDS);
    for v in f.data() {
        v.push_words(&mut words);
    }
    let mut bytes = Vec::with_capacity(words.len() * 8);
    for w in words {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

fn take<const N: usize>(buf: &[u8], pos: &mut usize) -> Result<[u8; N]> {
    let end = *pos + N;
    let slice = buf.get(*pos..end).ok_or_else(|| Error::Format("truncated field header".into()))?;
    *pos = end;
    Ok(slice.try_into().expect("slice length"))
}

/// Reads a dump whose sample type matches `V`; a real/complex mismatch is
/// detected from the payload length.
pub fn read_field<T: Real, V: Sample<T>>(mut input: impl Read) -> Result<Field<T, V>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut pos = 0;
    if &take::<4>(&buf, &mut pos)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let rank = u32::from_le_bytes(take(&buf, &mut pos)?) as usize;
    if rank == 0 || rank > 16 {
        return Err(Error::Format(format!("implausible rank {rank}")));
    }
    let mut axes = Vec::with_capacity(rank);
    for _ in 0..rank {
        let n = u64::from_le_bytes(take(&buf, &mut pos)?) as usize;
        let lower = f64::from_le_bytes(take(&buf, &mut pos)?);
        let upper = f64::from_le_bytes(take(&buf, &mut pos)?);
        let code = take::<1>(&buf, &mut pos)?[0];
        let boundary = Boundary::from_code(code).ok_or_else(|| Error::Format(format!("boundary byte {code}")))?;
        axes.push(Axis::new(n, T::lit(lower), T::lit(upper), boundary)?);
    }
    let grid = Arc::new(Grid::new(axes)?);
    let payload = &buf[pos..];
    let expected = grid.len() * V::WORDS * 8;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected} for this grid and sample kind",
            payload.len()
        )));
    }
    let words: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let data = words.chunks_exact(V::WORDS).map(V::from_words).collect();
    Field::new(grid, data)
}

pub fn save_field<T: Real, V: Sample<T>>(f: &Field<T, V>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_field(f, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_field<T: Real, V: Sample<T>>(path: &Path) -> Result<Field<T, V>> {
    read_field(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::field::{ComplexField, RealField};
    use crate::scalar::Cplx;

    #[test]
    fn complex_round_trip_and_kind_mismatch() {
        let g = Arc::new(
            Grid::new(vec![Axis::<f64>::periodic(8, 0.0, 1.0).unwrap(), Axis::<f64>::dirichlet(9, -2.0, 2.0).unwrap()]).unwrap(),
        );
        let f = ComplexField::from_fn(g, |q| Cplx::new(q[0], q[1].exp())).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"HVQ1");
        let back: ComplexField<f64> = read_field(&buf[..]).unwrap();
        assert_eq!(back, f);
        assert!(read_field::<f64, f64>(&buf[..]).is_err());
    }

    #[test]
    fn header_layout_is_fixed() {
        let g = Arc::new(Grid::<f64>::line(8, 0.0, 1.0, Boundary::Dirichlet).unwrap());
        let f = RealField::zeros(g);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + (8 + 8 + 8 + 1) + 8 * 8);
        assert_eq!(buf[4..8], 1u32.to_le_bytes());
        assert_eq!(buf[32], 1);
    }
}
