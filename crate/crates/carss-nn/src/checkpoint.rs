//! Checkpoint file format.
//!
//! Single binary file, little-endian throughout:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "CARSSNN1"
//! 8       4     format version (u32) = 1
//! 12      4     metadata length L (u32)
//! 16      L     metadata (UTF-8; caller-defined, e.g. model config JSON)
//! ..      4     parameter count P (u32)
//! then P records, sorted by name:
//!         4     name length (u32)
//!         ..    name (UTF-8)
//!         4+4   rows, cols (u32 each)
//!         ..    rows*cols f32 values
//! then    1     optimizer flag (u8: 0 absent, 1 present)
//! if 1:   8     adam step (u64)
//!         8*4   lr, beta1, beta2, eps (f64 each)
//!          then P times (same order): rows*cols f32 first moments
//!         then P times (same order): rows*cols f32 second moments
//! ```
//!
//! Values are stored in 32-bit precision regardless of the in-memory
//! element type.

use crate::error::{NnError, Result};
use crate::optim::AdamState;
use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"CARSSNN1";
const VERSION: u32 = 1;

pub fn save_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    meta: &str,
    params: &ParamSet<T>,
    adam: Option<&AdamState<T>>,
) -> Result<()> {
    let mut w = Vec::new();
    w.extend_from_slice(MAGIC);
    w.extend_from_slice(&VERSION.to_le_bytes());
    w.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    w.extend_from_slice(meta.as_bytes());
    w.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        w.extend_from_slice(&(name.len() as u32).to_le_bytes());
        w.extend_from_slice(name.as_bytes());
        w.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        w.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.to_f32_data() {
            w.extend_from_slice(&v.to_le_bytes());
        }
    }
    match adam {
        None => w.push(0),
        Some(a) => {
            w.push(1);
            w.extend_from_slice(&a.step.to_le_bytes());
            for v in [a.lr, a.beta1, a.beta2, a.eps] {
                w.extend_from_slice(&v.to_le_bytes());
            }
            let (m, v) = a.moments();
            for moments in [m, v] {
                for (name, t) in params.iter() {
                    let zero;
                    let mt = match moments.get(name) {
                        Some(mt) => mt,
                        None => {
                            zero = Tensor::<T>::zeros(t.rows(), t.cols());
                            &zero
                        }
                    };
                    for x in mt.to_f32_data() {
                        w.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&w)?;
    Ok(())
}

struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        if self.pos + len > self.buf.len() {
            return Err(NnError::Checkpoint(format!(
                "truncated file at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let raw = self.take(4 * count)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| NnError::Checkpoint("invalid UTF-8".into()))
    }
}

pub struct LoadedCheckpoint<T> {
    pub meta: String,
    pub params: ParamSet<T>,
    pub adam: Option<AdamState<T>>,
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<LoadedCheckpoint<T>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let meta = r.string()?;
    let count = r.u32()? as usize;
    let mut params = ParamSet::new();
    let mut order: Vec<(String, usize, usize)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let data = r.f32s(rows * cols)?;
        params.insert(name.clone(), Tensor::from_f32_data(rows, cols, &data)?);
        order.push((name, rows, cols));
    }
    let adam = match r.take(1)?[0] {
        0 => None,
        1 => {
            let step = r.u64()?;
            let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let mut m = BTreeMap::new();
            let mut v = BTreeMap::new();
            for map in [&mut m, &mut v] {
                for (name, rows, cols) in &order {
                    let data = r.f32s(rows * cols)?;
                    map.insert(
                        name.clone(),
                        Tensor::<T>::from_f32_data(*rows, *cols, &data)?,
                    );
                }
            }
            let mut a = AdamState::new(lr);
            a.beta1 = beta1;
            a.beta2 = beta2;
            a.eps = eps;
            a.step = step;
            a.set_moments(m, v);
            Some(a)
        }
        other => {
            return Err(NnError::Checkpoint(format!(
                "bad optimizer flag {other}"
            )))
        }
    };
    Ok(LoadedCheckpoint { meta, params, adam })
}
