//! On-disk artifacts: raw fields, the diagnostics CSV, snapshots and the
//! run manifest.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use chemolab::{DiagnosticsRecord, Grid, State};

use crate::error::CliError;

/// Layout tag written into snapshot sidecars.
pub const RAW_LAYOUT: &str = "f64-le, x fastest";

/// Reads a raw field: little-endian `f64` values, x index fastest.
pub fn read_raw_field(path: &Path) -> io::Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    decode_raw(&bytes)
}

pub fn decode_raw(bytes: &[u8]) -> io::Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("{} bytes is not a whole number of f64 values", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn encode_raw(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn write_raw_field(path: &Path, values: &[f64]) -> io::Result<()> {
    std::fs::write(path, encode_raw(values))
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Header plus one row per record. A missing functional is an empty cell.
pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = DiagnosticsRecord::COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let cells = [
            Some(r.t),
            Some(r.mass_u),
            Some(r.mass_v),
            Some(r.linf_u),
            Some(r.linf_v),
            Some(r.linf_w),
            Some(r.dev_u),
            Some(r.dev_v),
            r.lyapunov,
            Some(r.dirichlet_u),
            Some(r.dirichlet_v),
            Some(r.dirichlet_w),
            Some(r.cum_dirichlet_u),
            Some(r.cum_dirichlet_v),
            Some(r.cum_dirichlet_w),
        ];
        let row: Vec<String> = cells
            .iter()
            .map(|c| c.map(format_f64).unwrap_or_default())
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Metadata stored next to the three raw field files of a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SnapshotMeta {
    pub t: f64,
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
    pub layout: String,
    pub u: String,
    pub v: String,
    pub w: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestOutcome {
    Completed,
    Blowup,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub outcome: ManifestOutcome,
    /// Every other file in the output directory, relative to it.
    pub files: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Output directory that remembers what it has written.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    files: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    /// Writes `u.bin`, `v.bin`, `w.bin` and `snapshot.json` under `dir`.
    pub fn write_snapshot(
        &mut self,
        dir: &str,
        state: &State,
        grid: &Grid,
    ) -> Result<(), CliError> {
        let name = |f: &str| {
            if dir.is_empty() {
                f.to_string()
            } else {
                format!("{dir}/{f}")
            }
        };
        self.write_bytes(&name("u.bin"), &encode_raw(&state.u))?;
        self.write_bytes(&name("v.bin"), &encode_raw(&state.v))?;
        self.write_bytes(&name("w.bin"), &encode_raw(&state.w))?;
        let meta = SnapshotMeta {
            t: state.t,
            lengths: grid.lengths().to_vec(),
            cells: grid.cells().to_vec(),
            layout: RAW_LAYOUT.to_string(),
            u: "u.bin".into(),
            v: "v.bin".into(),
            w: "w.bin".into(),
        };
        self.write_json(&name("snapshot.json"), &meta)
    }

    /// Writes the manifest listing everything written so far.
    pub fn finish(
        &mut self,
        config_digest: String,
        started: String,
        outcome: ManifestOutcome,
    ) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            config_digest,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started,
            finished: now_rfc3339(),
            outcome,
            files: self.files.clone(),
        };
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let values = [0.0, -1.5, 1e-300, f64::MAX, 0.1 + 0.2];
        let bytes = encode_raw(&values);
        assert_eq!(bytes.len(), 40);
        assert_eq!(&bytes[8..16], &(-1.5f64).to_le_bytes());
        assert_eq!(decode_raw(&bytes).unwrap(), values);
        assert!(decode_raw(&bytes[..13]).is_err());
    }

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1 + 0.2, 1.0 / 3.0, 1e-20, 6.02e23, 5e-324, 1.0] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_shape() {
        let rec = DiagnosticsRecord {
            t: 0.5,
            mass_u: 1.0,
            mass_v: 2.0,
            linf_u: 1.0,
            linf_v: 2.0,
            linf_w: 0.25,
            dev_u: 0.0,
            dev_v: 0.0,
            lyapunov: None,
            dirichlet_u: 0.0,
            dirichlet_v: 0.0,
            dirichlet_w: 0.0,
            cum_dirichlet_u: 0.0,
            cum_dirichlet_v: 0.0,
            cum_dirichlet_w: 0.0,
        };
        let csv = diagnostics_csv(&[rec.clone(), rec]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("t,mass_u,mass_v"));
        assert_eq!(lines[1].split(',').count(), 15);
        assert_eq!(lines[1].split(',').nth(8), Some(""));
    }
}
