//! `DTF1` binary tensor files.
//!
//! ```text
//! magic   b"DTF1"
//! order   u32 little-endian
//! extents order × u64 little-endian
//! values  Π extents × f64 little-endian, first index fastest
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, Matrix, MAX_ORDER};

pub const MAGIC: &[u8; 4] = b"DTF1";

pub fn write<T: Scalar, W: Write>(t: &DenseTensor<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(t.order() as u32).to_le_bytes())?;
    for &e in t.shape() {
        w.write_all(&(e as u64).to_le_bytes())?;
    }
    for &x in t.data() {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format("DTF1", format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub fn read<T: Scalar, R: Read>(mut r: R) -> Result<DenseTensor<T>> {
    let mut magic = [0u8; 4];
    read_exact_or(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::format("DTF1", format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    read_exact_or(&mut r, &mut b4, "header")?;
    let order = u32::from_le_bytes(b4) as usize;
    if order == 0 || order > MAX_ORDER {
        return Err(Error::format("DTF1", format!("unsupported order {order}")));
    }
    let mut b8 = [0u8; 8];
    let mut shape = Vec::with_capacity(order);
    for _ in 0..order {
        read_exact_or(&mut r, &mut b8, "header")?;
        let e = usize::try_from(u64::from_le_bytes(b8))
            .map_err(|_| Error::format("DTF1", "extent does not fit in memory"))?;
        shape.push(e);
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::format("DTF1", format!("invalid extents {shape:?}")))?;
    let mut bytes = Vec::new();
    r.take(len as u64 * 8 + 1).read_to_end(&mut bytes)?;
    if bytes.len() < len * 8 {
        return Err(Error::format("DTF1", format!("truncated payload: {} of {} bytes", bytes.len(), len * 8)));
    }
    if bytes.len() > len * 8 {
        return Err(Error::format("DTF1", "trailing bytes after payload"));
    }
    let data = bytes.chunks_exact(8).map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8-byte chunk")))).collect();
    DenseTensor::new(shape, data)
}

pub fn save<T: Scalar>(t: &DenseTensor<T>, path: impl AsRef<Path>) -> Result<()> {
    write(t, BufWriter::new(File::create(path)?))
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseTensor<T>> {
    read(BufReader::new(File::open(path)?))
}

/// Store a matrix as an order-2 tensor.
pub fn save_matrix<T: Scalar>(m: &Matrix<T>, path: impl AsRef<Path>) -> Result<()> {
    save(&DenseTensor::from_matrix(m), path)
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    let t = load::<T>(&path)?;
    match *t.shape() {
        [r, c] => Matrix::from_col_major(r, c, t.into_data()),
        _ => Err(Error::format("DTF1", format!("expected an order-2 tensor, got shape {:?}", t.shape()))),
    }
}

pub fn save_vector<T: Scalar>(v: &[T], path: impl AsRef<Path>) -> Result<()> {
    save(&DenseTensor::new(vec![v.len()], v.to_vec())?, path)
}

pub fn load_vector<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let t = load::<T>(&path)?;
    match *t.shape() {
        [_] => Ok(t.into_data()),
        _ => Err(Error::format("DTF1", format!("expected an order-1 tensor, got shape {:?}", t.shape()))),
    }
}
