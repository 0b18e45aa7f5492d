//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 8    | magic `RILOSSCK`                       |
//! | 8      | 4    | format version (`u32`, currently 1)    |
//! | 12     | 8    | lookback `w` (`u64`)                   |
//! | 20     | 8    | horizon `H` (`u64`)                    |
//! | 28     | 8    | channels `d` (`u64`)                   |
//! | 36     | 8    | moving-average kernel size (`u64`)     |
//! | 44     | 8    | parameter count `P = 2H(w+1)` (`u64`)  |
//! | 52     | 8·P  | parameters (`f64`), flat model layout  |
//!
//! The flat layout is `W_trend` (row-major `H × w`), `b_trend`,
//! `W_seasonal`, `b_seasonal`.

use std::fs;
use std::path::Path;

use super::decomposition::DecompositionSpec;
use super::model::LinearForecaster;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RILOSSCK";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 52;

pub fn encode(model: &LinearForecaster) -> Vec<u8> {
    let params = model.params();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        model.lookback(),
        model.horizon(),
        model.channels(),
        model.decomposition().kernel_size,
        params.len(),
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<LinearForecaster> {
    let bad = |msg: String| Error::Checkpoint(msg);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let field = |i: usize| -> Result<usize> {
        let at = 12 + 8 * i;
        let v = u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| bad(format!("header field {i} overflows")))
    };
    let (w, h, d, k, count) = (field(0)?, field(1)?, field(2)?, field(3)?, field(4)?);
    if count != LinearForecaster::param_count(w, h) {
        return Err(bad(format!("parameter count {count} does not match w={w}, H={h}")));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * count {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            8 * count,
            body.len()
        )));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    LinearForecaster::from_params(w, h, d, DecompositionSpec::new(k)?, params)
}

pub fn save(model: &LinearForecaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<LinearForecaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LinearForecaster {
        LinearForecaster::new(12, 3, 2, DecompositionSpec::new(5).unwrap(), 11).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&m, &path).unwrap();
        assert_eq!(load(&path).unwrap(), m);
    }

    #[test]
    fn header_layout() {
        let m = model();
        let bytes = encode(&m);
        assert_eq!(&bytes[..8], b"RILOSSCK");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 12);
        assert_eq!(u64::from_le_bytes(bytes[36..44].try_into().unwrap()), 5);
        assert_eq!(bytes.len(), 52 + 8 * 2 * 3 * 13);
        let first = f64::from_le_bytes(bytes[52..60].try_into().unwrap());
        assert_eq!(first, m.params()[0]);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode(&model());
        assert!(decode(&bytes[..40]).is_err());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(decode(&wrong_magic).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(decode(&wrong_version).is_err());
        let mut even_kernel = bytes;
        even_kernel[36] = 4;
        assert!(decode(&even_kernel).is_err());
    }
}
