//! Checkpoint container. Layout, all little-endian:
//!
//! ```text
//! magic  "SIRSTCK1"                      8 bytes
//! hlen   u32                             header byte count
//! header JSON                            spec, step, parameter table
//! blobs  per parameter, declaration order:
//!        value       numel * f64
//!        accumulator numel * f64
//! ```
//!
//! Values round-trip bit-exactly; load rejects files whose parameter table
//! disagrees with the architecture the header declares.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::build::{build_params, node_param_names};
use super::wiring::wiring;
use super::NetworkSpec;
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tensor::TensorBase;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SIRSTCK1";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    step: u64,
    spec: NetworkSpec,
    params: Vec<ParamEntry>,
}

pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub step: u64,
    pub params: ParamSet,
}

fn write_f64s(w: &mut impl Write, data: &[f64], path: &Path) -> Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, spec: &NetworkSpec, params: &ParamSet, step: u64) -> Result<()> {
    let header = Header {
        version: CHECKPOINT_VERSION,
        step,
        spec: spec.clone(),
        params: params
            .iter()
            .map(|p| ParamEntry { name: p.name.clone(), shape: p.value.shape().to_vec() })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Config(format!("checkpoint header encode: {e}")))?;
    let hlen = u32::try_from(header_bytes.len())
        .map_err(|_| Error::Config("checkpoint header too large".into()))?;

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(CHECKPOINT_MAGIC).map_err(|e| Error::io(path, e))?;
    w.write_all(&hlen.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    w.write_all(&header_bytes).map_err(|e| Error::io(path, e))?;
    for p in params.iter() {
        write_f64s(&mut w, p.value.data(), path)?;
        write_f64s(&mut w, p.accumulator.data(), path)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::io(path, e))
}

fn read_f64s(r: &mut impl Read, n: usize, path: &Path) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    read_exact(r, &mut bytes, path)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Parameter names the architecture in `spec` owns, in declaration order.
fn expected_names(spec: &NetworkSpec) -> Result<Vec<String>> {
    let wiring = wiring(spec)?;
    let mut names = Vec::new();
    for node in &wiring.nodes {
        names.extend(node_param_names(node, spec));
    }
    names.push("head.conv.weight".into());
    names.push("head.conv.bias".into());
    Ok(names)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, path)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::decode(path, "bad magic, not a checkpoint file"));
    }
    let mut hlen = [0u8; 4];
    read_exact(&mut r, &mut hlen, path)?;
    let hlen = u32::from_le_bytes(hlen) as usize;
    let mut header_bytes = vec![0u8; hlen];
    read_exact(&mut r, &mut header_bytes, path)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::decode(path, format!("header parse: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::decode(
            path,
            format!("unsupported checkpoint version {}", header.version),
        ));
    }
    header.spec.validate()?;

    let expected = expected_names(&header.spec)?;
    if header.params.len() != expected.len() {
        return Err(Error::decode(
            path,
            format!(
                "parameter table has {} entries, architecture needs {}",
                header.params.len(),
                expected.len()
            ),
        ));
    }
    for (entry, want) in header.params.iter().zip(&expected) {
        if &entry.name != want {
            return Err(Error::decode(
                path,
                format!("parameter {:?} out of place, expected {:?}", entry.name, want),
            ));
        }
    }

    // Shapes must match a fresh build of the declared architecture.
    let (_, reference) = build_params(&header.spec)?;
    let mut params = ParamSet::new();
    for entry in &header.params {
        let reference_shape = reference
            .get(&entry.name)
            .map(|p| p.value.shape().to_vec())
            .ok_or_else(|| Error::decode(path, format!("unknown parameter {:?}", entry.name)))?;
        if reference_shape != entry.shape {
            return Err(Error::decode(
                path,
                format!(
                    "parameter {:?} has shape {:?}, architecture needs {:?}",
                    entry.name, entry.shape, reference_shape
                ),
            ));
        }
        let numel: usize = entry.shape.iter().product();
        let value = read_f64s(&mut r, numel, path)?;
        let acc = read_f64s(&mut r, numel, path)?;
        let value = TensorBase::new(&entry.shape, value)?;
        let accumulator = TensorBase::new(&entry.shape, acc)?;
        params.insert_with_state(entry.name.clone(), value, accumulator)?;
    }

    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(Error::decode(path, "trailing bytes after parameter blobs")),
        Err(e) => return Err(Error::io(path, e)),
    }

    Ok(Checkpoint { spec: header.spec, step: header.step, params })
}
