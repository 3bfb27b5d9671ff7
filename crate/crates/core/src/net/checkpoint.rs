//! Parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"SFCKPT01"
//! u32 header_len, header_len bytes of UTF-8 `key=value\n` lines (network config)
//! per parameter, in layout order:
//!     u16 name_len, name bytes
//!     u8 ndim, ndim x u32 dims
//!     prod(dims) x f32
//! ```

use std::fs;
use std::path::Path;

use super::config::NetworkConfig;
use super::params::NetworkParams;
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SFCKPT01";

pub fn to_bytes<T: Scalar>(params: &NetworkParams<T>, extra: &[(&str, String)]) -> Vec<u8> {
    let mut header = String::new();
    for (k, v) in params.config.to_pairs() {
        header.push_str(&format!("{k}={v}\n"));
    }
    for (k, v) in extra {
        header.push_str(&format!("{k}={v}\n"));
    }

    let mut out = Vec::with_capacity(16 + header.len() + 4 * params.len() + 64 * params.layout.specs.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for spec in &params.layout.specs {
        out.extend_from_slice(&(spec.name.len() as u16).to_le_bytes());
        out.extend_from_slice(spec.name.as_bytes());
        out.push(spec.shape.len() as u8);
        for &d in &spec.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in params.get(spec.seg) {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    out
}

pub fn save<T: Scalar>(params: &NetworkParams<T>, path: &Path, extra: &[(&str, String)]) -> Result<()> {
    fs::write(path, to_bytes(params, extra))?;
    Ok(())
}

/// Header key/value pairs of a checkpoint, including non-network extras.
pub fn read_header(bytes: &[u8], origin: &str) -> Result<Vec<(String, String)>> {
    let mut cur = Cursor { buf: bytes, pos: 0, origin };
    if cur.take(8)? != MAGIC {
        return Err(Error::format(origin, "not a star-fusion checkpoint"));
    }
    let n = cur.u32()? as usize;
    let text = std::str::from_utf8(cur.take(n)?).map_err(|_| Error::format(origin, "header is not UTF-8"))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

pub fn from_bytes<T: Scalar>(bytes: &[u8], origin: &str) -> Result<NetworkParams<T>> {
    let header = read_header(bytes, origin)?;
    let config = NetworkConfig::from_pairs(header.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(|e| Error::format(origin, e.to_string()))?;
    let mut params = NetworkParams::<T>::zeros(&config)?;

    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("checked by read_header")) as usize;
    let mut cur = Cursor { buf: bytes, pos: 12 + header_len, origin };
    let layout = std::sync::Arc::clone(&params.layout);
    for spec in &layout.specs {
        let name_len = cur.u16()? as usize;
        let name = cur.take(name_len)?;
        if name != spec.name.as_bytes() {
            return Err(Error::format(
                origin,
                format!("expected parameter {}, found {}", spec.name, String::from_utf8_lossy(name)),
            ));
        }
        let ndim = cur.take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cur.u32()? as usize);
        }
        if shape != spec.shape {
            return Err(Error::format(origin, format!("shape mismatch for {}: {:?} vs {:?}", spec.name, shape, spec.shape)));
        }
        let dst = &mut params.values[spec.seg.range()];
        for v in dst.iter_mut() {
            *v = T::from_f32(f32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes")));
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(origin, "trailing bytes after last parameter"));
    }
    Ok(params)
}

pub fn load<T: Scalar>(path: &Path) -> Result<NetworkParams<T>> {
    from_bytes(&fs::read(path)?, &path.display().to_string())
}

/// Loads and rejects the file unless its configuration equals `expected`.
pub fn load_expecting<T: Scalar>(path: &Path, expected: &NetworkConfig) -> Result<NetworkParams<T>> {
    let params = load::<T>(path)?;
    if &params.config != expected {
        return Err(Error::Mismatch(format!(
            "checkpoint {} was written for a different network configuration",
            path.display()
        )));
    }
    Ok(params)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(self.origin, "unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
