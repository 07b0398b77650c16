//! `WDN1` weight containers: magic, `u32` header length, JSON header, `u32`
//! tensor count, then per tensor a `u16` name length, the UTF-8 name and an
//! RFT1 record.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::rft1::{read_exact, read_u32, Dtype, RftTensor};
use crate::error::{Error, Result};
use crate::nn::{Architecture, NetworkParams};

pub const WDN1_MAGIC: &[u8; 4] = b"WDN1";

/// Header of a weight file. `extra` carries caller state such as the
/// training position of a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightHeader {
    pub architecture: Architecture,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

pub fn write_weights(w: &mut impl Write, params: &NetworkParams, extra: serde_json::Value) -> Result<()> {
    let header = serde_json::to_vec(&WeightHeader {
        architecture: params.arch.clone(),
        extra,
    })?;
    let mut out = Vec::new();
    out.extend_from_slice(WDN1_MAGIC);
    out.extend((header.len() as u32).to_le_bytes());
    out.extend(header);
    let tensors = params.tensors();
    out.extend((tensors.len() as u32).to_le_bytes());
    for t in tensors {
        let name = t.name.as_bytes();
        out.extend((name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        RftTensor::new(t.dims, Dtype::F64, t.values.to_vec())?
            .write_to(&mut out)
            .expect("writing to a Vec cannot fail");
    }
    w.write_all(&out)
        .map_err(|e| Error::Format(format!("writing weights: {e}")))
}

pub fn read_weights(r: &mut impl Read) -> Result<(NetworkParams, WeightHeader)> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != WDN1_MAGIC {
        return Err(Error::Format(format!("bad weights magic {magic:?}")));
    }
    let len = read_u32(r)? as usize;
    let mut header = vec![0u8; len];
    read_exact(r, &mut header)?;
    let header: WeightHeader = serde_json::from_slice(&header)?;
    header.architecture.validate()?;
    let count = read_u32(r)? as usize;
    let mut named = BTreeMap::new();
    let mut dims = BTreeMap::new();
    for _ in 0..count {
        let mut n = [0u8; 2];
        read_exact(r, &mut n)?;
        let mut name = vec![0u8; u16::from_le_bytes(n) as usize];
        read_exact(r, &mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let tensor = RftTensor::read_from(r)?;
        dims.insert(name.clone(), tensor.dims);
        if named.insert(name.clone(), tensor.data).is_some() {
            return Err(Error::Format(format!("duplicate tensor {name}")));
        }
    }
    let params = NetworkParams::from_named(&header.architecture, named)?;
    for t in params.tensors() {
        if dims[&t.name] != t.dims {
            return Err(Error::Format(format!("tensor {} has dims {:?}, expected {:?}", t.name, dims[&t.name], t.dims)));
        }
    }
    Ok((params, header))
}
