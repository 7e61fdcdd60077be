//! Native binary array files.
//!
//! Layout (little-endian): `"ZSPL"` magic, `u32` version = 1, `u8` dtype tag
//! (1 = real32, 2 = int32), seven reserved zero bytes, `u64` rows, `u64` cols,
//! then reserved zero bytes up to a 64-byte header, then the row-major payload.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, ZslError};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"ZSPL";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    Real32 = 1,
    Int32 = 2,
}

impl Dtype {
    fn from_tag(tag: u8) -> Option<Dtype> {
        match tag {
            1 => Some(Dtype::Real32),
            2 => Some(Dtype::Int32),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArrayHeader {
    pub dtype: Dtype,
    pub rows: u64,
    pub cols: u64,
}

/// Integer array, used for label vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntArray {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i32>,
}

fn encode_header(h: &ArrayHeader) -> [u8; HEADER_LEN] {
    let mut buf = [0u8; HEADER_LEN];
    buf[0..4].copy_from_slice(MAGIC);
    buf[4..8].copy_from_slice(&VERSION.to_le_bytes());
    buf[8] = h.dtype as u8;
    buf[16..24].copy_from_slice(&h.rows.to_le_bytes());
    buf[24..32].copy_from_slice(&h.cols.to_le_bytes());
    buf
}

fn decode_header(bytes: &[u8], path: &Path) -> Result<ArrayHeader> {
    if bytes.len() < 4 || &bytes[0..4] != MAGIC {
        return Err(ZslError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(ZslError::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(ZslError::BadVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let dtype = Dtype::from_tag(bytes[8]).ok_or(ZslError::BadDtype {
        path: path.to_path_buf(),
        tag: bytes[8],
    })?;
    let rows = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[24..32].try_into().unwrap());
    Ok(ArrayHeader { dtype, rows, cols })
}

/// Serializes a real matrix (rounded to `f32`).
pub fn encode_array(m: &Matrix) -> Vec<u8> {
    let header = ArrayHeader {
        dtype: Dtype::Real32,
        rows: m.rows() as u64,
        cols: m.cols() as u64,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    out.extend_from_slice(&encode_header(&header));
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn encode_int_array(a: &IntArray) -> Vec<u8> {
    let header = ArrayHeader {
        dtype: Dtype::Int32,
        rows: a.rows as u64,
        cols: a.cols as u64,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + a.data.len() * 4);
    out.extend_from_slice(&encode_header(&header));
    for &v in &a.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn checked_payload<'a>(bytes: &'a [u8], path: &Path) -> Result<(ArrayHeader, &'a [u8])> {
    let header = decode_header(bytes, path)?;
    let found = (bytes.len() - HEADER_LEN) as u64;
    let expected = header
        .rows
        .checked_mul(header.cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| ZslError::Shape(format!("{}: header shape overflows", path.display())))?;
    if found < expected {
        return Err(ZslError::Truncated {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(ZslError::Shape(format!(
            "{}: {} trailing bytes after payload",
            path.display(),
            found - expected
        )));
    }
    Ok((header, &bytes[HEADER_LEN..]))
}

/// Decodes a real matrix. Int32 payloads are widened exactly.
pub fn decode_array(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let (header, payload) = checked_payload(bytes, path)?;
    let mut data = Vec::with_capacity(payload.len() / 4);
    for (index, chunk) in payload.chunks_exact(4).enumerate() {
        let raw: [u8; 4] = chunk.try_into().unwrap();
        let v = match header.dtype {
            Dtype::Real32 => f32::from_le_bytes(raw) as f64,
            Dtype::Int32 => i32::from_le_bytes(raw) as f64,
        };
        if !v.is_finite() {
            return Err(ZslError::NonFinite {
                path: path.to_path_buf(),
                index,
            });
        }
        data.push(v);
    }
    Matrix::from_vec(header.rows as usize, header.cols as usize, data)
}

pub fn decode_int_array(bytes: &[u8], path: &Path) -> Result<IntArray> {
    let (header, payload) = checked_payload(bytes, path)?;
    if header.dtype != Dtype::Int32 {
        return Err(ZslError::BadDtype {
            path: path.to_path_buf(),
            tag: header.dtype as u8,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(IntArray {
        rows: header.rows as usize,
        cols: header.cols as usize,
        data,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| ZslError::io(path, e))
}

pub fn write_array(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_array(m)).map_err(|e| ZslError::io(path, e))
}

pub fn read_array(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    decode_array(&read_bytes(path)?, path)
}

pub fn write_int_array(a: &IntArray, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_int_array(a)).map_err(|e| ZslError::io(path, e))
}

pub fn read_int_array(path: impl AsRef<Path>) -> Result<IntArray> {
    let path = path.as_ref();
    decode_int_array(&read_bytes(path)?, path)
}

/// Reads only the 64-byte header.
pub fn read_header(path: impl AsRef<Path>) -> Result<ArrayHeader> {
    use std::io::Read;
    let path: PathBuf = path.as_ref().to_path_buf();
    let mut f = fs::File::open(&path).map_err(|e| ZslError::io(&path, e))?;
    let mut buf = Vec::with_capacity(HEADER_LEN);
    f.by_ref()
        .take(HEADER_LEN as u64)
        .read_to_end(&mut buf)
        .map_err(|e| ZslError::io(&path, e))?;
    decode_header(&buf, &path)
}

/// Writes a class-id vector as an `N x 1` int32 array.
pub fn write_labels(labels: &[u32], path: impl AsRef<Path>) -> Result<()> {
    let data = labels
        .iter()
        .map(|&l| {
            i32::try_from(l).map_err(|_| ZslError::InvalidArgument(format!("label {l} exceeds int32")))
        })
        .collect::<Result<Vec<_>>>()?;
    write_int_array(
        &IntArray {
            rows: labels.len(),
            cols: 1,
            data,
        },
        path,
    )
}

/// Reads an `N x 1` (or `1 x N`) int32 label vector.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    let path = path.as_ref();
    let arr = read_int_array(path)?;
    if arr.rows != 1 && arr.cols != 1 && !arr.data.is_empty() {
        return Err(ZslError::Shape(format!(
            "{}: labels must be a vector, found {}x{}",
            path.display(),
            arr.rows,
            arr.cols
        )));
    }
    arr.data
        .iter()
        .map(|&v| {
            u32::try_from(v)
                .map_err(|_| ZslError::Shape(format!("{}: negative label {v}", path.display())))
        })
        .collect()
}
