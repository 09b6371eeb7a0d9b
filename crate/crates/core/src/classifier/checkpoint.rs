//! Versioned binary checkpoint.
//!
//! All integers are little-endian.
//!
//! ```text
//! magic        8 bytes   "ELACKPT\0"
//! version      u32       1
//! input_height u32
//! input_width  u32
//! n_conv       u32
//! conv_channels u32 × n_conv
//! hidden       u32
//! n_tensors    u32
//! per tensor:
//!   name_len   u16, name (UTF-8, name_len bytes)
//!   ndim       u8,  dims u32 × ndim
//!   data       f32 × product(dims)
//! ```

use std::path::Path;

use super::{Architecture, ModelParams, Scalar};
use crate::io::write_atomic;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ELACKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint<F: Scalar>(params: &ModelParams<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + params.num_params() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
    put(&mut out, CHECKPOINT_VERSION);
    let arch = &params.arch;
    put(&mut out, arch.input_height as u32);
    put(&mut out, arch.input_width as u32);
    put(&mut out, arch.conv_channels.len() as u32);
    for &c in &arch.conv_channels {
        put(&mut out, c as u32);
    }
    put(&mut out, arch.hidden as u32);
    put(&mut out, params.tensors.len() as u32);
    for t in &params.tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            put(&mut out, d as u32);
        }
        for v in &t.data {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            corrupt(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn corrupt(message: String) -> Error {
    Error::Format {
        kind: "checkpoint",
        message,
    }
}

pub fn decode_checkpoint<F: Scalar>(bytes: &[u8]) -> Result<ModelParams<F>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let input_height = r.u32()? as usize;
    let input_width = r.u32()? as usize;
    let n_conv = r.u32()? as usize;
    if n_conv > 64 {
        return Err(corrupt(format!("{n_conv} conv layers")));
    }
    let conv_channels = (0..n_conv).map(|_| r.u32().map(|c| c as usize)).collect::<Result<Vec<_>>>()?;
    let hidden = r.u32()? as usize;
    let arch = Architecture {
        input_height,
        input_width,
        conv_channels,
        hidden,
    };
    let mut params = ModelParams::<F>::zeros(arch)?;
    let n_tensors = r.u32()? as usize;
    if n_tensors != params.tensors.len() {
        return Err(corrupt(format!(
            "{n_tensors} tensors, architecture needs {}",
            params.tensors.len()
        )));
    }
    for t in &mut params.tensors {
        let name_len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|e| corrupt(e.to_string()))?;
        let ndim = r.take(1)?[0] as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if name != t.name || shape != t.shape {
            return Err(corrupt(format!(
                "tensor {name} {shape:?} where {} {:?} was expected",
                t.name, t.shape
            )));
        }
        let raw = r.take(4 * t.data.len())?;
        for (v, chunk) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
            *v = F::of(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
        }
    }
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(params)
}

pub fn write_checkpoint<F: Scalar>(params: &ModelParams<F>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(params))
}

pub fn read_checkpoint<F: Scalar>(path: &Path) -> Result<ModelParams<F>> {
    decode_checkpoint(&std::fs::read(path)?)
}
