//! Binary checkpoint: `RLPGCKPT`, u32 version, u32 header length, JSON
//! header, then every tensor as little-endian f64 in row-major order.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nets::{Net, RlpgH, RlpgR, Variant};
use super::PpcModel;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RLPGCKPT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    variant: Variant,
    provider: String,
    dropout: f64,
    meta: BTreeMap<String, serde_json::Value>,
    tensors: Vec<TensorInfo>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(w: &mut W, model: &PpcModel) -> Result<()> {
    let tensors = model.net.tensors();
    let header = Header {
        variant: model.variant(),
        provider: model.provider.clone(),
        dropout: model.net.dropout(),
        meta: model.meta.clone(),
        tensors: tensors.iter().map(|(n, s, _)| TensorInfo { name: n.to_string(), shape: s.clone() }).collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let io = |e| Error::io("<checkpoint>", e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&header).map_err(io)?;
    let mut buf = Vec::new();
    for (_, _, data) in &tensors {
        buf.clear();
        buf.reserve(data.len() * 8);
        for x in *data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<PpcModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<checkpoint>", e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() < hlen {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| bad(format!("bad header: {e}")))?;
    let mut data = &body[hlen..];
    let mut net = match header.variant {
        Variant::H => Net::H(RlpgH::zeros()),
        Variant::R => Net::R(RlpgR::zeros(header.dropout)),
    };
    let expected: Vec<(String, Vec<usize>)> =
        net.tensors().into_iter().map(|(n, s, _)| (n.to_string(), s)).collect();
    if expected.len() != header.tensors.len() {
        return Err(bad("tensor count mismatch"));
    }
    for ((name, shape), info) in expected.iter().zip(&header.tensors) {
        if *name != info.name || *shape != info.shape {
            return Err(bad(format!("tensor {} has shape {:?}, expected {name} {shape:?}", info.name, info.shape)));
        }
    }
    for slot in net.tensors_mut() {
        let need = slot.len() * 8;
        if data.len() < need {
            return Err(bad("truncated tensor data"));
        }
        for (x, chunk) in slot.iter_mut().zip(data[..need].chunks_exact(8)) {
            *x = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        data = &data[need..];
    }
    if !data.is_empty() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok(PpcModel { net, provider: header.provider, meta: header.meta })
}

pub fn save_checkpoint(path: &Path, model: &PpcModel) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, model)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<PpcModel> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut f)
}
