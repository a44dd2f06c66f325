//! Flat binary parameter container.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "LVW1" | version | num_views | head_mode | centering | plane_context
//!        | trained_planes | record_count
//! record*: name_len | name (UTF-8) | rank | dims[rank] | f32 payload (LE)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"LVW1";
pub const VERSION: u32 = 1;

/// Network metadata stored ahead of the parameter records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct CheckpointHeader {
    pub version: u32,
    pub num_views: u32,
    pub head_mode: u32,
    pub centering: u32,
    pub plane_context: u32,
    pub trained_planes: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl ParamRecord {
    pub fn from_tensor<T: Scalar>(name: impl Into<String>, t: &Tensor<T>) -> Self {
        Self {
            name: name.into(),
            shape: t.shape().to_vec(),
            data: t.data().iter().map(|v| v.to_f64c() as f32).collect(),
        }
    }

    pub fn to_tensor<T: Scalar>(&self) -> Result<Tensor<T>> {
        Tensor::from_vec(
            self.shape.clone(),
            self.data.iter().map(|&v| T::from_f64c(v as f64)).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub records: Vec<ParamRecord>,
}

fn put(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| TensorError::Format(format!("{what} {v} exceeds u32")))
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&ParamRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let h = &self.header;
        w.write_all(MAGIC)?;
        for v in [
            h.version,
            h.num_views,
            h.head_mode,
            h.centering,
            h.plane_context,
            h.trained_planes,
            to_u32(self.records.len(), "record count")?,
        ] {
            put(w, v)?;
        }
        for rec in &self.records {
            let expected: usize = rec.shape.iter().product();
            if expected != rec.data.len() {
                return Err(TensorError::Format(format!(
                    "record {} has shape {:?} but {} values",
                    rec.name,
                    rec.shape,
                    rec.data.len()
                )));
            }
            put(w, to_u32(rec.name.len(), "name length")?)?;
            w.write_all(rec.name.as_bytes())?;
            put(w, to_u32(rec.shape.len(), "rank")?)?;
            for &d in &rec.shape {
                put(w, to_u32(d, "dimension")?)?;
            }
            let mut payload = Vec::with_capacity(rec.data.len() * 4);
            for v in &rec.data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&payload)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TensorError::Format(format!("bad magic {magic:?}")));
        }
        let version = get(r)?;
        if version != VERSION {
            return Err(TensorError::Format(format!("unsupported version {version}")));
        }
        let header = CheckpointHeader {
            version,
            num_views: get(r)?,
            head_mode: get(r)?,
            centering: get(r)?,
            plane_context: get(r)?,
            trained_planes: get(r)?,
        };
        let count = get(r)? as usize;
        let mut records = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = get(r)? as usize;
            if name_len > 4096 {
                return Err(TensorError::Format(format!("name length {name_len} too large")));
            }
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| TensorError::Format("parameter name is not UTF-8".into()))?;
            let rank = get(r)? as usize;
            if rank > 8 {
                return Err(TensorError::Format(format!("rank {rank} too large")));
            }
            let shape = (0..rank).map(|_| get(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let mut bytes = vec![0u8; n * 4];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            records.push(ParamRecord { name, shape, data });
        }
        Ok(Self { header, records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(&mut bytes.as_slice())
    }
}
