//! Named-tensor archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"GMARLCK1"
//! u32 manifest length, manifest bytes (JSON)
//! u32 tensor count
//! per tensor: u32 name length, name bytes (UTF-8), u32 ndims, u64 dims...,
//!             f64 payload in row-major order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{NnError, ParameterSet, Role};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GMARLCK1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: serde_json::Value,
    pub tensors: Vec<(String, Array2<f64>)>,
}

impl Checkpoint {
    /// Stores each set under `<set name>/<tensor name>` and records its role
    /// in `manifest["roles"]`.
    pub fn from_sets(mut manifest: serde_json::Value, sets: &[(&str, &ParameterSet)]) -> Self {
        let mut tensors = Vec::new();
        let mut roles = serde_json::Map::new();
        for (set, ps) in sets {
            roles.insert(set.to_string(), serde_json::to_value(ps.role).expect("role serializes"));
            tensors.extend(ps.iter().map(|(name, t)| (format!("{set}/{name}"), t.clone())));
        }
        if let Some(obj) = manifest.as_object_mut() {
            obj.insert("roles".into(), serde_json::Value::Object(roles));
        }
        Checkpoint { manifest, tensors }
    }

    /// Rebuilds the set stored under `set`.
    pub fn parameter_set(&self, set: &str) -> Result<ParameterSet, NnError> {
        let role: Role = self
            .manifest
            .get("roles")
            .and_then(|r| r.get(set))
            .and_then(|r| serde_json::from_value(r.clone()).ok())
            .ok_or_else(|| NnError::Checkpoint(format!("no role recorded for set `{set}`")))?;
        let prefix = format!("{set}/");
        let mut ps = ParameterSet::new(role);
        for (name, t) in &self.tensors {
            if let Some(rest) = name.strip_prefix(&prefix) {
                ps.insert(rest, t.clone())?;
            }
        }
        Ok(ps)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), NnError> {
        let manifest = serde_json::to_vec(&self.manifest).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let io = |e| NnError::Io("checkpoint".into(), e);
        w.write_all(CHECKPOINT_MAGIC).map_err(io)?;
        w.write_all(&(manifest.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&manifest).map_err(io)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes()).map_err(io)?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(name.as_bytes()).map_err(io)?;
            w.write_all(&2u32.to_le_bytes()).map_err(io)?;
            for d in [t.nrows(), t.ncols()] {
                w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
            }
            for v in t.iter() {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, NnError> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let len = read_u32(&mut r)? as usize;
        let mut manifest = vec![0u8; len];
        read_exact(&mut r, &mut manifest)?;
        let manifest = serde_json::from_slice(&manifest).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let count = read_u32(&mut r)?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            read_exact(&mut r, &mut name)?;
            let name = String::from_utf8(name).map_err(|e| NnError::Checkpoint(e.to_string()))?;
            let ndims = read_u32(&mut r)?;
            if ndims != 2 {
                return Err(NnError::Checkpoint(format!("`{name}` has {ndims} dims, expected 2")));
            }
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                read_exact(&mut r, &mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            let t = Array2::from_shape_vec((rows, cols), data).map_err(|e| NnError::Checkpoint(e.to_string()))?;
            tensors.push((name, t));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| NnError::Io("checkpoint".into(), e))? != 0 {
            return Err(NnError::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint { manifest, tensors })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| NnError::Io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let bytes = std::fs::read(path).map_err(|e| NnError::Io(path.display().to_string(), e))?;
        Self::read_from(bytes.as_slice())
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), NnError> {
    r.read_exact(buf).map_err(|e| NnError::Checkpoint(format!("truncated archive: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NnError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> Checkpoint {
        let mut a = ParameterSet::new(Role::Shared);
        a.insert("w", array![[1.0, -2.5], [f64::MIN_POSITIVE, 3.0e300]]).unwrap();
        a.insert("b", array![[0.1, 0.2]]).unwrap();
        let mut t = ParameterSet::new(Role::TargetCritic);
        t.insert("w", array![[-0.0]]).unwrap();
        Checkpoint::from_sets(serde_json::json!({"agent": 2, "gamma": 0.998}), &[("online", &a), ("target", &t)])
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let online = back.parameter_set("online").unwrap();
        assert_eq!(online.role, Role::Shared);
        assert_eq!(online.get("w").unwrap()[[1, 1]], 3.0e300);
        assert!(back.parameter_set("target").unwrap().get("w").unwrap()[[0, 0]].is_sign_negative());
    }

    #[test]
    fn corrupt_archives_are_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(Checkpoint::read_from(bytes.as_slice()).is_err());
        let bytes = sample().to_bytes();
        assert!(Checkpoint::read_from(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(Checkpoint::read_from(long.as_slice()).is_err());
    }
}
