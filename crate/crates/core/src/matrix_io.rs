//! Flat binary matrices: two little-endian `u64` dimensions followed by the
//! entries as row-major little-endian `f64`.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

pub fn write_matrix<W: Write>(mut w: W, a: &Array2<f64>) -> Result<()> {
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for v in a.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word);
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word);
    let len = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Parse(format!("matrix header {rows}x{cols} is too large")))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut word)
            .map_err(|e| Error::Parse(format!("matrix body truncated: {e}")))?;
        data.push(f64::from_le_bytes(word));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Parse("trailing bytes after matrix body".into()));
    }
    Array2::from_shape_vec((rows as usize, cols as usize), data).map_err(|e| Error::Parse(e.to_string()))
}
