//! Versioned JSON checkpoints. Weight tensors are base64 strings of
//! little-endian `f64` arrays, keyed by tensor name.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::ensemble::DeepEnsemble;
use crate::error::{Error, Result};
use crate::lstm::{Arch, Member, TENSOR_NAMES};
use crate::series::{NormParams, Unit};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MemberRecord {
    seed: u64,
    tensors: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    schema_version: u32,
    arch: Arch,
    norm: NormParams,
    calibration: Option<f64>,
    unit: Unit,
    members: Vec<MemberRecord>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Checkpoint(format!("base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(format!(
            "tensor byte length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn to_bytes(ensemble: &DeepEnsemble) -> Result<Vec<u8>> {
    let members = ensemble
        .members
        .iter()
        .zip(&ensemble.seeds)
        .map(|(m, &seed)| MemberRecord {
            seed,
            tensors: TENSOR_NAMES
                .iter()
                .zip(m.tensors())
                .map(|(name, t)| (name.to_string(), encode_f64s(t)))
                .collect(),
        })
        .collect();
    let file = CheckpointFile {
        schema_version: SCHEMA_VERSION,
        arch: ensemble.arch,
        norm: ensemble.norm,
        calibration: ensemble.calib,
        unit: ensemble.unit,
        members,
    };
    let mut out = serde_json::to_vec_pretty(&file)?;
    out.push(b'\n');
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<DeepEnsemble> {
    let probe: VersionProbe = serde_json::from_slice(bytes)?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            expected: SCHEMA_VERSION,
            found: probe.schema_version,
        });
    }
    let file: CheckpointFile = serde_json::from_slice(bytes)?;
    let mut members = Vec::with_capacity(file.members.len());
    let mut seeds = Vec::with_capacity(file.members.len());
    for (i, rec) in file.members.iter().enumerate() {
        let mut m = Member::zeros(&file.arch);
        if rec.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::Checkpoint(format!(
                "member {i}: expected {} tensors, found {}",
                TENSOR_NAMES.len(),
                rec.tensors.len()
            )));
        }
        for (name, slot) in TENSOR_NAMES.iter().zip(m.tensors_mut()) {
            let text = rec
                .tensors
                .get(*name)
                .ok_or_else(|| Error::Checkpoint(format!("member {i}: missing tensor {name}")))?;
            let data = decode_f64s(text)?;
            if data.len() != slot.len() {
                return Err(Error::Checkpoint(format!(
                    "member {i}: tensor {name} has {} values, expected {}",
                    data.len(),
                    slot.len()
                )));
            }
            *slot = data;
        }
        members.push(m);
        seeds.push(rec.seed);
    }
    let mut e = DeepEnsemble::new(file.arch, members, seeds, file.norm, file.unit)?;
    if let Some(s) = file.calibration {
        e.set_calibration(s)?;
    }
    Ok(e)
}
