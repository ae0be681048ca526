//! Checkpoint layout (little-endian):
//!
//! ```text
//! "ELVM" | version u32
//! config: num_users u32 | feature_dim u32 | embed_dim u32 | hidden_dim u32
//!         | hidden_layers u32 | dropout_rate f64 | embed_init_scale f64 | seed u64
//!         | user count u32 | user count × (len u16, UTF-8 bytes)
//! tensor count u32
//! per tensor: name len u16 | name | rank u32 | dims u32 × rank | f32 × product(dims), row-major
//! ```

use std::fs;
use std::path::Path;

use super::{ElvisModel, ModelConfig, Real};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"ELVM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u16(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u16::try_from(v).map_err(|_| Error::Checkpoint(format!("length {v} exceeds u16")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("value {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub(crate) fn encode<T: Real>(model: &ElvisModel<T>) -> Result<Vec<u8>> {
    let c = &model.config;
    let mut out = Vec::with_capacity(64 + model.params.num_parameters() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [
        c.num_users,
        c.feature_dim,
        c.embed_dim,
        c.hidden_dim,
        c.hidden_layers,
    ] {
        put_u32(&mut out, v)?;
    }
    out.extend_from_slice(&c.dropout_rate.to_le_bytes());
    out.extend_from_slice(&c.embed_init_scale.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    put_u32(&mut out, model.users().len())?;
    for u in model.users() {
        put_u16(&mut out, u.len())?;
        out.extend_from_slice(u.as_bytes());
    }

    let tensors = model.params.tensors();
    put_u32(&mut out, tensors.len())?;
    for (name, t) in tensors {
        put_u16(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.ndim())?;
        for &d in t.shape() {
            put_u32(&mut out, d)?;
        }
        for v in t.iter() {
            let v = v
                .to_f32()
                .ok_or_else(|| Error::Checkpoint(format!("{name}: value not representable")))?;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<usize> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u16()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("string is not UTF-8".into()))
    }
}

pub(crate) fn decode<T: Real>(bytes: &[u8]) -> Result<ElvisModel<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let config = ModelConfig {
        num_users: r.u32()?,
        feature_dim: r.u32()?,
        embed_dim: r.u32()?,
        hidden_dim: r.u32()?,
        hidden_layers: r.u32()?,
        dropout_rate: r.f64()?,
        embed_init_scale: r.f64()?,
        seed: r.u64()?,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let n_users = r.u32()?;
    if n_users != 0 && n_users != config.num_users {
        return Err(Error::Checkpoint(format!(
            "vocabulary has {n_users} users, config says {}",
            config.num_users
        )));
    }
    let users = (0..n_users)
        .map(|_| r.string())
        .collect::<Result<Vec<_>>>()?;

    let mut model = ElvisModel::<T>::zeros(config)?;
    if n_users > 0 {
        model = model
            .with_users(users)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
    }
    let count = r.u32()?;
    let mut tensors = model.params.tensors_mut();
    if count != tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {count}",
            tensors.len()
        )));
    }
    for (name, t) in tensors.iter_mut() {
        let found = r.string()?;
        if &found != name {
            return Err(Error::Checkpoint(format!(
                "expected tensor {name}, found {found}"
            )));
        }
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if dims != t.shape() {
            return Err(Error::Checkpoint(format!(
                "{name}: shape {dims:?} does not match config {:?}",
                t.shape()
            )));
        }
        let data = r.take(4 * t.len())?;
        for (v, c) in t.iter_mut().zip(data.chunks_exact(4)) {
            let x = f32::from_le_bytes(c.try_into().unwrap());
            if !x.is_finite() {
                return Err(Error::Checkpoint(format!("{name}: non-finite value")));
            }
            *v = T::from_f32(x).unwrap();
        }
    }
    drop(tensors);
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Real>(model: &ElvisModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ElvisModel<f32>> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
