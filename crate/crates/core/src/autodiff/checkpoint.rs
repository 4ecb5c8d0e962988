//! Binary tensor container.
//!
//! Layout: the 8-byte magic `SAINCKPT`, a little-endian `u32` format version,
//! a little-endian `u64` manifest length, the JSON manifest, then the raw
//! little-endian IEEE-754 payload. Each manifest entry records name, shape,
//! dtype and the byte offset of its data relative to the payload start.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::params::ParamStore;
use crate::error::{Result, SainError};
use crate::tensor::{DType, Real, Tensor};

pub const MAGIC: &[u8; 8] = b"SAINCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tensors: Vec<TensorEntry>,
    /// Free-form metadata (run configuration, vocabularies, optimizer step).
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Manifest,
    payload: Vec<u8>,
}

impl Checkpoint {
    pub fn new(meta: serde_json::Value) -> Self {
        Checkpoint {
            manifest: Manifest {
                format_version: FORMAT_VERSION,
                tensors: Vec::new(),
                meta,
            },
            payload: Vec::new(),
        }
    }

    pub fn push<T: Real>(&mut self, name: impl Into<String>, tensor: &Tensor<T>) {
        let offset = self.payload.len() as u64;
        for &v in tensor.data() {
            v.write_le(&mut self.payload);
        }
        self.manifest.tensors.push(TensorEntry {
            name: name.into(),
            shape: tensor.shape().to_vec(),
            dtype: T::DTYPE,
            offset,
        });
    }

    /// Appends every parameter of `store` under `prefix` + its name.
    pub fn push_store<T: Real>(&mut self, prefix: &str, store: &ParamStore<T>) {
        for (_, name, t) in store.iter() {
            self.push(format!("{prefix}{name}"), t);
        }
    }

    pub fn entry(&self, name: &str) -> Option<&TensorEntry> {
        self.manifest.tensors.iter().find(|e| e.name == name)
    }

    /// Reads a tensor, converting its dtype to `T` when they differ.
    pub fn tensor<T: Real>(&self, name: &str) -> Result<Tensor<T>> {
        let e = self
            .entry(name)
            .ok_or_else(|| SainError::Checkpoint(format!("tensor {name} not present")))?;
        let n: usize = e.shape.iter().product();
        let width = e.dtype.byte_width();
        let start = e.offset as usize;
        let end = start + n * width;
        let bytes = self
            .payload
            .get(start..end)
            .ok_or_else(|| SainError::Checkpoint(format!("tensor {name} exceeds payload")))?;
        let data: Vec<T> = bytes
            .chunks(width)
            .map(|c| match e.dtype {
                DType::F32 => T::from_f64_lossy(f64::from(f32::read_le(c))),
                DType::F64 => T::from_f64_lossy(f64::read_le(c)),
            })
            .collect();
        Ok(Tensor::new(e.shape.clone(), data)?)
    }

    /// Copies stored values into `store`, requiring every parameter to be
    /// present under `prefix` with an identical shape.
    pub fn restore_store<T: Real>(&self, prefix: &str, store: &mut ParamStore<T>) -> Result<()> {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = format!("{prefix}{}", store.name(id));
            let expected = store.get(id).shape().to_vec();
            let e = self.entry(&name).ok_or_else(|| {
                SainError::Incompatible(format!("parameter {name} missing from checkpoint"))
            })?;
            if e.shape != expected {
                return Err(SainError::Incompatible(format!(
                    "parameter {name}: checkpoint shape {:?}, model shape {expected:?}",
                    e.shape
                )));
            }
            let t = self.tensor::<T>(&name)?;
            store.set_values(id, t.into_data())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let manifest = serde_json::to_vec(&self.manifest).map_err(|e| SainError::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + manifest.len() + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.manifest.format_version.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| SainError::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic header"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(SainError::Checkpoint(format!("unsupported format version {version}")));
        }
        let mlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let mbytes = bytes.get(20..20 + mlen).ok_or_else(|| bad("truncated manifest"))?;
        let manifest: Manifest =
            serde_json::from_slice(mbytes).map_err(|e| SainError::Checkpoint(e.to_string()))?;
        if manifest.format_version != version {
            return Err(bad("manifest version disagrees with header"));
        }
        let payload = bytes[20 + mlen..].to_vec();
        for e in &manifest.tensors {
            let n: usize = e.shape.iter().product();
            if e.offset as usize + n * e.dtype.byte_width() > payload.len() {
                return Err(SainError::Checkpoint(format!("tensor {} exceeds payload", e.name)));
            }
        }
        Ok(Checkpoint { manifest, payload })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| SainError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| SainError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn store_roundtrip(vals in proptest::collection::vec(-1e6f32..1e6, 1..40), cols in 1usize..5) {
            let rows = vals.len() / cols;
            prop_assume!(rows > 0);
            let data = vals[..rows * cols].to_vec();
            let mut store = ParamStore::<f32>::new();
            store.insert("w", Tensor::new(vec![rows, cols], data.clone()).unwrap());
            store.insert("b", Tensor::row(vec![0.25; cols]));
            let mut ck = Checkpoint::new(serde_json::json!({"k": 1}));
            ck.push_store("p.", &store);
            let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
            let mut fresh = ParamStore::<f32>::new();
            fresh.insert_zeros("w", vec![rows, cols]);
            fresh.insert_zeros("b", vec![1, cols]);
            back.restore_store("p.", &mut fresh).unwrap();
            prop_assert_eq!(fresh.by_name("w").unwrap().data(), data.as_slice());
            prop_assert_eq!(&back.manifest, &ck.manifest);
        }
    }

    #[test]
    fn shape_mismatch_is_incompatible() {
        let mut store = ParamStore::<f64>::new();
        store.insert_zeros("w", vec![2, 3]);
        let mut ck = Checkpoint::new(serde_json::Value::Null);
        ck.push_store("", &store);
        let mut other = ParamStore::<f64>::new();
        other.insert_zeros("w", vec![3, 2]);
        assert!(matches!(ck.restore_store("", &mut other), Err(SainError::Incompatible(_))));
    }

    #[test]
    fn f32_payload_reads_into_f64() {
        let mut ck = Checkpoint::new(serde_json::Value::Null);
        ck.push("x", &Tensor::<f32>::row(vec![1.5, -0.125]));
        let t: Tensor<f64> = ck.tensor("x").unwrap();
        assert_eq!(t.data(), &[1.5, -0.125]);
        assert_eq!(ck.entry("x").unwrap().dtype, DType::F32);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::from_bytes(b"not a checkpoint at all").is_err());
    }
}
