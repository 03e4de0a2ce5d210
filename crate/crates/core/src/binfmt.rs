//! Little-endian binary containers.
//!
//! `HINF` holds one dense matrix:
//!
//! ```text
//! "HINF" | rows: u32 | cols: u32 | rows*cols f32, row-major
//! ```
//!
//! `HINP` holds a list of named parameter tensors:
//!
//! ```text
//! "HINP" | count: u32 | count * (name_len: u32, name, ndim: u32, dims: ndim*u32) | all data as f32
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayD, IxDyn};

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"HINF";
pub const PARAM_MAGIC: &[u8; 4] = b"HINP";

pub fn encode_matrix(m: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = m.dim();
    let mut out = Vec::with_capacity(12 + rows * cols * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                msg: format!("truncated at offset {}", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                msg: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

/// Decodes a `HINF` buffer. Non-finite entries are rejected with their
/// element offset.
pub fn decode_matrix(buf: &[u8], path: &Path) -> Result<Array2<f64>> {
    let mut r = Reader { buf, pos: 0, path };
    if r.take(4)? != FEATURE_MAGIC {
        return Err(Error::Format { path: path.to_path_buf(), msg: "bad magic, expected HINF".into() });
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for offset in 0..rows * cols {
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(Error::NonFiniteFeature { file: path.to_path_buf(), offset });
        }
        data.push(f64::from(v));
    }
    r.finish()?;
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape checked"))
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&buf, path)
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so a
/// reader never observes a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_atomic(path, &encode_matrix(m))
}

pub fn encode_params(tensors: &[(String, ArrayD<f64>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PARAM_MAGIC);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
    }
    for (_, t) in tensors {
        for v in t.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_params(buf: &[u8], path: &Path) -> Result<Vec<(String, ArrayD<f64>)>> {
    let mut r = Reader { buf, pos: 0, path };
    if r.take(4)? != PARAM_MAGIC {
        return Err(Error::Format { path: path.to_path_buf(), msg: "bad magic, expected HINP".into() });
    }
    let count = r.u32()? as usize;
    let mut table = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Format {
            path: path.to_path_buf(),
            msg: "tensor name is not utf-8".into(),
        })?;
        let ndim = r.u32()? as usize;
        let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        table.push((name, dims));
    }
    let mut out = Vec::with_capacity(count);
    for (name, dims) in table {
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        let t = ArrayD::from_shape_vec(IxDyn(&dims), data).expect("shape from table");
        out.push((name, t));
    }
    r.finish()?;
    Ok(out)
}
