//! Binary parameter files.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic    4 bytes  "LKEP"
//! version  u32      1
//! heads    u32      attention head count
//! count    u32      number of arrays
//! count x {
//!     name_len u32, name (UTF-8)
//!     ndim u32, dims u32 x ndim
//!     data f32 (little-endian) x product(dims), row-major
//! }
//! ```
//!
//! Array names and shapes:
//!
//! | name              | shape           |
//! |-------------------|-----------------|
//! | `conv1.weight`    | 16 x 1 x 5 x 5  |
//! | `conv1.bias`      | 16              |
//! | `conv2.weight`    | 57 x 16 x 5 x 5 |
//! | `conv2.bias`      | 57              |
//! | `proprio.weight`  | 64 x 48         |
//! | `proprio.bias`    | 64              |
//! | `mha.{q,k,v,out}.weight` | 64 x 64  |
//! | `mha.{q,k,v,out}.bias`   | 64       |
//!
//! Linear weights are `[out][in]`; convolution weights `[out][in][ky][kx]`.

use std::collections::HashMap;
use std::path::Path;

use super::{Conv2d, EncoderParams, Linear};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: [u8; 4] = *b"LKEP";
pub const PARAMS_VERSION: u32 = 1;

struct Named<'a> {
    name: &'static str,
    dims: Vec<usize>,
    data: &'a [f64],
}

fn conv<'a>(name_w: &'static str, name_b: &'static str, c: &'a Conv2d) -> [Named<'a>; 2] {
    [
        Named { name: name_w, dims: vec![c.out_ch, c.in_ch, c.kernel, c.kernel], data: &c.weight },
        Named { name: name_b, dims: vec![c.out_ch], data: &c.bias },
    ]
}

fn lin<'a>(name_w: &'static str, name_b: &'static str, l: &'a Linear) -> [Named<'a>; 2] {
    [
        Named { name: name_w, dims: vec![l.out_dim, l.in_dim], data: &l.weight },
        Named { name: name_b, dims: vec![l.out_dim], data: &l.bias },
    ]
}

fn layout(p: &EncoderParams) -> Vec<Named<'_>> {
    let mut v = Vec::new();
    v.extend(conv("conv1.weight", "conv1.bias", &p.conv1));
    v.extend(conv("conv2.weight", "conv2.bias", &p.conv2));
    v.extend(lin("proprio.weight", "proprio.bias", &p.proprio));
    v.extend(lin("mha.q.weight", "mha.q.bias", &p.query));
    v.extend(lin("mha.k.weight", "mha.k.bias", &p.key));
    v.extend(lin("mha.v.weight", "mha.v.bias", &p.value));
    v.extend(lin("mha.out.weight", "mha.out.bias", &p.output));
    v
}

impl EncoderParams {
    /// Serializes to the binary layout; values are narrowed to `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let arrays = layout(self);
        let mut out = Vec::new();
        out.extend_from_slice(&PARAMS_MAGIC);
        out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.heads as u32).to_le_bytes());
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for a in arrays {
            out.extend_from_slice(&(a.name.len() as u32).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.extend_from_slice(&(a.dims.len() as u32).to_le_bytes());
            for d in &a.dims {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in a.data {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != PARAMS_MAGIC {
            return Err(r.err("bad magic, not an encoder parameter file"));
        }
        let version = r.u32()?;
        if version != PARAMS_VERSION {
            return Err(r.err(&format!("unsupported version {version}")));
        }
        let heads = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut arrays: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| r.err("array name is not UTF-8"))?
                .to_owned();
            let ndim = r.u32()? as usize;
            let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = dims.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| r.err("array too large"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect();
            arrays.insert(name, (dims, data));
        }
        if r.pos != bytes.len() {
            return Err(r.err("trailing bytes after the last array"));
        }

        let mut params = EncoderParams::zeros(heads);
        for slot in layout(&EncoderParams::zeros(heads)) {
            let (dims, data) = arrays.remove(slot.name).ok_or_else(|| Error::Validation {
                field: slot.name.to_owned(),
                message: "missing from parameter file".into(),
            })?;
            if dims != slot.dims {
                return Err(Error::shape(slot.name, format!("{:?}", slot.dims), format!("{dims:?}")));
            }
            *params.slot_mut(slot.name) = data;
        }
        if let Some(extra) = arrays.keys().next() {
            return Err(Error::Validation {
                field: extra.clone(),
                message: "unknown array in parameter file".into(),
            });
        }
        params.validate()?;
        Ok(params)
    }

    fn slot_mut(&mut self, name: &str) -> &mut Vec<f64> {
        match name {
            "conv1.weight" => &mut self.conv1.weight,
            "conv1.bias" => &mut self.conv1.bias,
            "conv2.weight" => &mut self.conv2.weight,
            "conv2.bias" => &mut self.conv2.bias,
            "proprio.weight" => &mut self.proprio.weight,
            "proprio.bias" => &mut self.proprio.bias,
            "mha.q.weight" => &mut self.query.weight,
            "mha.q.bias" => &mut self.query.bias,
            "mha.k.weight" => &mut self.key.weight,
            "mha.k.bias" => &mut self.key.bias,
            "mha.v.weight" => &mut self.value.weight,
            "mha.v.bias" => &mut self.value.bias,
            "mha.out.weight" => &mut self.output.weight,
            "mha.out.bias" => &mut self.output.bias,
            _ => unreachable!("layout names are fixed"),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Validation {
            field: format!("byte {}", self.pos),
            message: message.to_owned(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(self.err("unexpected end of file"));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
