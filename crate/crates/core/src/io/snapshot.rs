//! Binary particle snapshots.
//!
//! Layout (little endian): a 64-byte header
//!
//! | offset | type    | field                          |
//! |--------|---------|--------------------------------|
//! | 0      | [u8; 8] | magic `VPDSNAP\0`              |
//! | 8      | u32     | format version (1)             |
//! | 12     | u32     | flags (bit 0: gauge velocities)|
//! | 16     | u64     | particle count                 |
//! | 24     | f64     | time                           |
//! | 32     | f64     | epsilon                        |
//! | 40     | u64     | step index                     |
//! | 48     | 16 B    | reserved, zero                 |
//!
//! followed by 8 `f64` per particle: `x[3], v[3], w, sign`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::phase_space::{ParticleEnsemble, Species};
use crate::vec3::Vec3;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"VPDSNAP\0";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 64;
const FLAG_GAUGE: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: u64,
    pub epsilon: f64,
    /// Velocities are the gauge variable `v + sign * eps * D2`.
    pub gauge: bool,
    pub ensemble: ParticleEnsemble,
}

pub fn snapshot_file_name(step: u64) -> String {
    format!("snap_{step:09}.bin")
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let e = &snap.ensemble;
    let mut buf = Vec::with_capacity(HEADER_LEN + 64 * e.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(if snap.gauge { FLAG_GAUGE } else { 0 }).to_le_bytes());
    buf.extend_from_slice(&(e.len() as u64).to_le_bytes());
    buf.extend_from_slice(&snap.t.to_le_bytes());
    buf.extend_from_slice(&snap.epsilon.to_le_bytes());
    buf.extend_from_slice(&snap.step.to_le_bytes());
    buf.resize(HEADER_LEN, 0);
    for i in 0..e.len() {
        for v in [
            e.x[i].x,
            e.x[i].y,
            e.x[i].z,
            e.v[i].x,
            e.v[i].y,
            e.v[i].z,
            e.w[i],
            e.species[i].sign(),
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |reason: &str| Error::Format {
        path: PathBuf::from(path),
        reason: reason.to_string(),
    };
    if bytes.len() < HEADER_LEN || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(fmt("not a snapshot file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != SNAPSHOT_VERSION {
        return Err(fmt("unsupported snapshot version"));
    }
    let n = u64_at(16) as usize;
    if bytes.len() != HEADER_LEN + 64 * n {
        return Err(fmt("length does not match particle count"));
    }
    let mut ensemble = ParticleEnsemble::with_capacity(n);
    for i in 0..n {
        let o = HEADER_LEN + 64 * i;
        let f = |k: usize| f64_at(o + 8 * k);
        let species = Species::from_sign(f(7)).ok_or_else(|| fmt("invalid species sign"))?;
        ensemble.push(
            Vec3::new(f(0), f(1), f(2)),
            Vec3::new(f(3), f(4), f(5)),
            f(6),
            species,
        );
    }
    Ok(Snapshot {
        t: f64_at(24),
        step: u64_at(40),
        epsilon: f64_at(32),
        gauge: u32_at(12) & FLAG_GAUGE != 0,
        ensemble,
    })
}
