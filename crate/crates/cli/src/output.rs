//! Curve CSVs, report files and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use heatlab_core::heat_content::{CurveSample, HeatContentCurve, Method};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

pub const CURVE_HEADER: [&str; 6] = ["t", "omega", "method", "domain", "kernel", "grid_n"];

/// Shortest round-trip representation; identical inputs give identical bytes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_curve(path: &Path, curve: &HeatContentCurve) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::io(path, e))?;
    w.write_record(CURVE_HEADER).map_err(|e| Failure::io(path, e))?;
    let grid = curve.grid_n.map(|n| n.to_string()).unwrap_or_default();
    for s in &curve.samples {
        w.write_record([
            fmt_f64(s.t),
            fmt_f64(s.omega),
            curve.method.tag().to_string(),
            curve.domain_id.clone(),
            curve.kernel_id.clone(),
            grid.clone(),
        ])
        .map_err(|e| Failure::io(path, e))?;
    }
    w.flush().map_err(|e| Failure::io(path, e))
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    t: f64,
    omega: f64,
    method: String,
    domain: String,
    kernel: String,
    grid_n: Option<usize>,
}

/// Read a curve CSV. The file carries no `Ω(0)`, so the caller supplies the
/// reference mass used for the loss column.
pub fn read_curve(path: &Path, mass: f64) -> Result<HeatContentCurve, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Failure::io(path, e))?;
    let mut rows = Vec::new();
    for (i, row) in r.deserialize::<CurveRow>().enumerate() {
        rows.push(row.map_err(|e| Failure::Config(format!("{}: row {}: {e}", path.display(), i + 2)))?);
    }
    let first = rows.first().ok_or_else(|| Failure::Config(format!("{}: no samples", path.display())))?;
    let method = Method::parse(&first.method).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let (domain, kernel, grid_n) = (first.domain.clone(), first.kernel.clone(), first.grid_n);
    let samples = rows.iter().map(|r| CurveSample { t: r.t, omega: r.omega, loss: mass - r.omega }).collect();
    let mut curve = HeatContentCurve::new(domain, kernel, method, samples, mass).map_err(Failure::from)?;
    curve.grid_n = grid_n;
    Ok(curve)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub heatlab_version: String,
    pub config: String,
    pub timings_ms: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(config_hash: String, config: String) -> Self {
        Self {
            config_hash,
            heatlab_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            timings_ms: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn path(run_dir: &Path) -> PathBuf {
        run_dir.join("manifest.json")
    }

    pub fn load(run_dir: &Path) -> Option<Self> {
        let text = fs::read_to_string(Self::path(run_dir)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Hash every file under `curves/` and `reports/` and write the manifest.
    pub fn write(&mut self, run_dir: &Path) -> Result<(), Failure> {
        self.files.clear();
        for sub in ["curves", "reports"] {
            let dir = run_dir.join(sub);
            let Ok(entries) = fs::read_dir(&dir) else { continue };
            let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
            paths.sort();
            for p in paths {
                let data = fs::read(&p).map_err(|e| Failure::io(&p, e))?;
                let digest = Sha256::digest(&data);
                self.files.push(FileEntry {
                    path: format!("{sub}/{}", p.file_name().unwrap_or_default().to_string_lossy()),
                    sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
                    bytes: data.len() as u64,
                });
            }
        }
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_text(&Self::path(run_dir), &text)
    }
}
