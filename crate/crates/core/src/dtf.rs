//! DTF tensor files: a JSON header plus a sibling file of little-endian f64 samples.
//!
//! For a header `name.json` the samples live in `name.bin`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DyadicTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtfHeader {
    pub dims: Vec<usize>,
    pub dtype: String,
    pub order: String,
}

pub fn header_path(base: &Path) -> PathBuf {
    base.with_extension("json")
}

pub fn raw_path(base: &Path) -> PathBuf {
    base.with_extension("bin")
}

/// Writes `base.json` and `base.bin`; any extension on `base` is replaced.
pub fn write_dtf(base: &Path, t: &DyadicTensor) -> Result<()> {
    let header = DtfHeader {
        dims: t.dims().to_vec(),
        dtype: "f64le".into(),
        order: "row-major".into(),
    };
    let hp = header_path(base);
    let text = serde_json::to_string(&header).expect("header serializes");
    fs::write(&hp, text).map_err(|e| Error::io(&hp, e))?;
    let mut bytes = Vec::with_capacity(8 * t.len());
    for v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let rp = raw_path(base);
    fs::write(&rp, bytes).map_err(|e| Error::io(&rp, e))
}

pub fn read_dtf(base: &Path) -> Result<DyadicTensor> {
    let hp = header_path(base);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: DtfHeader = serde_json::from_str(&text).map_err(|e| Error::format(&hp, e.to_string()))?;
    if header.dtype != "f64le" || header.order != "row-major" {
        return Err(Error::format(
            &hp,
            format!("unsupported dtype/order {}/{}", header.dtype, header.order),
        ));
    }
    let rp = raw_path(base);
    let bytes = fs::read(&rp).map_err(|e| Error::io(&rp, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::format(&rp, "length is not a multiple of 8"));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DyadicTensor::new(header.dims, data).map_err(|e| Error::format(&rp, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("t");
        let vals = [0.1, -0.0, f64::MIN_POSITIVE, 1e300, -7.25, f64::EPSILON, 3.0, 1.0 / 3.0];
        let t = DyadicTensor::new(vec![2, 4], vals.to_vec()).unwrap();
        write_dtf(&base, &t).unwrap();
        let back = read_dtf(&base).unwrap();
        assert_eq!(back.dims(), t.dims());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let header = fs::read_to_string(dir.path().join("t.json")).unwrap();
        assert_eq!(header, r#"{"dims":[2,4],"dtype":"f64le","order":"row-major"}"#);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("t");
        write_dtf(&base, &DyadicTensor::zeros(vec![4]).unwrap()).unwrap();
        fs::write(dir.path().join("t.bin"), [0u8; 12]).unwrap();
        assert!(matches!(read_dtf(&base), Err(Error::Format { .. })));
        assert!(matches!(read_dtf(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
