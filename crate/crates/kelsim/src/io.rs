//! On-disk formats: binary field dumps, trajectory export with a JSON
//! manifest, the diagnostic report schema and CSV time series.
//!
//! Field dump format: one ASCII header line
//! `kelsim-field v1 n=<n> N=<N> L=<L> t=<t>`
//! followed by little-endian 8-byte IEEE-754 values in row-major cell order.
//! Floats in headers, manifests and reports use shortest round-trip decimal
//! formatting.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::system::{TerminationStatus, Trajectory};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// FNV-1a 64-bit content hash used by run manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn write_field_dump(path: &Path, f: &ScalarField) -> Result<()> {
    let mut out = Vec::with_capacity(64 + 8 * f.values.len());
    write!(
        out,
        "kelsim-field v1 n={} N={} L={} t={}\n",
        f.grid.n, f.grid.cells, f.grid.l, f.time
    )
    .map_err(|e| Error::Io(e.to_string()))?;
    for v in &f.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_field_dump(path: &Path) -> Result<ScalarField> {
    let mut file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Io("missing dump header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::Io("header is not UTF-8".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("kelsim-field") || parts.next() != Some("v1") {
        return Err(Error::Io(format!("unrecognized dump header: {header}")));
    }
    let mut n = None;
    let mut cells = None;
    let mut l = None;
    let mut t = None;
    for p in parts {
        let (key, val) = p
            .split_once('=')
            .ok_or_else(|| Error::Io(format!("malformed header field {p}")))?;
        match key {
            "n" => n = val.parse::<usize>().ok(),
            "N" => cells = val.parse::<usize>().ok(),
            "L" => l = val.parse::<f64>().ok(),
            "t" => t = val.parse::<f64>().ok(),
            _ => return Err(Error::Io(format!("unknown header field {key}"))),
        }
    }
    let (n, cells, l, t) = match (n, cells, l, t) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(Error::Io("incomplete dump header".into())),
    };
    let grid = GridSpec::new(n, l, cells)?;
    let body = &bytes[newline + 1..];
    let expect = grid.cell_count() * 8;
    if body.len() != expect {
        return Err(Error::Io(format!(
            "dump body has {} bytes, expected {expect}",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ScalarField {
        grid,
        values,
        time: t,
    })
}

/// Diagnostic report envelope: every operation emits one of these.
#[derive(Debug, Clone, Serialize)]
pub struct OpReport {
    pub op: String,
    pub inputs: BTreeMap<String, serde_json::Value>,
    pub terms: BTreeMap<String, serde_json::Value>,
    pub empirical_constants: BTreeMap<String, serde_json::Value>,
    pub flags: Vec<String>,
}

impl OpReport {
    pub fn new(op: &str) -> Self {
        OpReport {
            op: op.to_string(),
            inputs: BTreeMap::new(),
            terms: BTreeMap::new(),
            empirical_constants: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.inputs
            .insert(key.into(), serde_json::to_value(value).unwrap());
        self
    }

    pub fn term(mut self, key: &str, value: impl Serialize) -> Self {
        self.terms
            .insert(key.into(), serde_json::to_value(value).unwrap());
        self
    }

    pub fn constant(mut self, key: &str, value: impl Serialize) -> Self {
        self.empirical_constants
            .insert(key.into(), serde_json::to_value(value).unwrap());
        self
    }

    pub fn flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.push(flag.into());
        self
    }

    pub fn flags_from(mut self, flags: &[String]) -> Self {
        self.flags.extend_from_slice(flags);
        self
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// CSV writer for (t, value) series.
pub fn write_csv_series(path: &Path, header: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut out = String::new();
    out.push_str("t,");
    out.push_str(header);
    out.push('\n');
    for (t, v) in rows {
        out.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub fnv1a64: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryManifest {
    pub version: u32,
    pub grid: GridSpec,
    pub params: crate::density::ModelParams,
    pub status: TerminationStatus,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub steps: u64,
    pub warnings: Vec<String>,
    pub files: Vec<ManifestEntry>,
}

/// Writes every snapshot pair as field dumps plus `manifest.json` listing
/// each emitted file with its content hash.
pub fn export_trajectory(dir: &Path, traj: &Trajectory) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let hash_entry = |path: &Path| -> Result<ManifestEntry> {
        let bytes = std::fs::read(path)?;
        Ok(ManifestEntry {
            path: path
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            fnv1a64: format!("{:016x}", fnv1a64(&bytes)),
        })
    };
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let upath = dir.join(format!("u_{i:04}.field"));
        write_field_dump(&upath, &snap.u)?;
        files.push(hash_entry(&upath)?);
        let vpath = dir.join(format!("v_{i:04}.field"));
        write_field_dump(&vpath, &snap.v)?;
        files.push(hash_entry(&vpath)?);
    }
    let mass_csv = dir.join("mass.csv");
    write_csv_series(&mass_csv, "mass", &traj.mass_series)?;
    files.push(hash_entry(&mass_csv)?);
    let manifest = TrajectoryManifest {
        version: 1,
        grid: traj.grid,
        params: traj.params,
        status: traj.status,
        times: traj.snapshots.iter().map(|s| s.t).collect(),
        mass: traj.mass_series.iter().map(|&(_, m)| m).collect(),
        steps: traj.steps,
        warnings: traj.warnings.clone(),
        files,
    };
    let manifest_path = dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serialization"),
    )?;
    Ok(manifest_path)
}
