//! Experiment configuration: a TOML file, optionally patched by `--set key=value`.

use std::fmt;
use std::path::{Path, PathBuf};

use heatlab_core::geometry::{AmbientSpace, DomainGeometry, Shape};
use heatlab_core::geometry::DEFAULT_BOUNDARY_N;
use heatlab_core::heat_content::{log_t_grid, Method};
use heatlab_core::kernel::KernelProfile;
use heatlab_core::weight::{Poly, Weight};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration problem, tied to the offending key where possible.
#[derive(Debug)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(key: &str, message: impl Into<String>) -> Self {
        Self { key: Some(key.to_string()), message: message.into() }
    }

    fn general(message: impl Into<String>) -> Self {
        Self { key: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "config key `{k}`: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeTable {
    pub center: Option<[f64; 2]>,
    pub radius: Option<f64>,
    /// Interval endpoints or ellipse semi-axes.
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Star profile `r(θ) = c0 + Σ a_k cos kθ + b_k sin kθ` as `[c0, a1, b1, a2, b2, …]`.
    pub coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightTable {
    #[serde(default = "default_weight_kind")]
    pub kind: String,
    pub value: Option<f64>,
    pub i: Option<u32>,
    pub j: Option<u32>,
    /// Polynomial terms `[coefficient, i, j]`.
    pub terms: Option<Vec<[f64; 3]>>,
    pub amplitude: Option<f64>,
    pub wave: Option<[f64; 2]>,
    pub phase: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub sigma: Option<f64>,
}

impl Default for WeightTable {
    fn default() -> Self {
        Self {
            kind: default_weight_kind(),
            value: None,
            i: None,
            j: None,
            terms: None,
            amplitude: None,
            wave: None,
            phase: None,
            center: None,
            sigma: None,
        }
    }
}

fn default_weight_kind() -> String {
    "one".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGridTable {
    pub t_min: f64,
    pub t_max: f64,
    #[serde(default = "default_per_decade")]
    pub per_decade: usize,
}

fn default_per_decade() -> usize {
    24
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceTable {
    /// Relative tolerance for every coefficient without its own entry.
    pub default: Option<f64>,
    /// Per-order relative tolerances, indexed by `j`.
    pub orders: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: String,
    #[serde(default)]
    pub shape: ShapeTable,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    pub m: Option<u32>,
    pub kernel_file: Option<PathBuf>,
    #[serde(default)]
    pub weight: WeightTable,
    pub engine: Option<String>,
    pub grid_n: Option<usize>,
    pub cell_average_correction: Option<bool>,
    pub torus_periods: Option<Vec<f64>>,
    pub boundary_n: Option<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_fit_order")]
    pub fit_order: usize,
    /// `joint` or `peel`; peel when unset and `fit_order >= 3`.
    pub fit_strategy: Option<String>,
    pub t_grid: Option<TGridTable>,
    #[serde(default)]
    pub tolerances: ToleranceTable,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_kernel() -> String {
    "gaussian".into()
}

fn default_methods() -> Vec<String> {
    vec!["direct".into()]
}

fn default_fit_order() -> usize {
    3
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Exact,
    Spectral,
}

/// Parse `key=value`; the value is read as a TOML literal and falls back to a
/// bare string.
fn parse_override(arg: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| ConfigError::general(format!("override `{arg}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::general(format!("override `{arg}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key.split('.').map(str::to_string).collect(), value))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), ConfigError> {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut cur = table;
    for (depth, p) in parents.iter().enumerate() {
        let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::at(&path[..=depth].join("."), "is not a table"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            // Direct deserialization keeps line and column in error messages.
            let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::general(e.to_string()))?;
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::general(e.to_string()))?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::general(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, overrides)?;
        if let Some(k) = &cfg.kernel_file {
            if k.is_relative() {
                cfg.kernel_file = Some(path.parent().unwrap_or(Path::new(".")).join(k));
            }
        }
        Ok(cfg)
    }

    /// Check every catalog reference and numeric range without building anything heavy.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.shape()?;
        self.engine()?;
        self.methods()?;
        self.weight()?;
        if !matches!(self.kernel.as_str(), "gaussian" | "poly_heat" | "tabulated") {
            return Err(ConfigError::at(
                "kernel",
                format!("unknown kernel `{}` (expected gaussian, poly_heat or tabulated)", self.kernel),
            ));
        }
        if self.kernel == "poly_heat" && !self.m.is_some_and(|m| m >= 1) {
            return Err(ConfigError::at("m", "poly_heat needs an integer m >= 1"));
        }
        if self.kernel == "tabulated" && self.kernel_file.is_none() {
            return Err(ConfigError::at("kernel_file", "tabulated kernel needs a CSV file with columns x,k"));
        }
        if let Some(n) = self.grid_n {
            if n < 8 {
                return Err(ConfigError::at("grid_n", "must be at least 8"));
            }
        }
        if let Some(s) = &self.fit_strategy {
            if !matches!(s.as_str(), "joint" | "peel") {
                return Err(ConfigError::at("fit_strategy", format!("unknown strategy `{s}` (expected joint or peel)")));
            }
        }
        if let Some(g) = &self.t_grid {
            if !(g.t_min > 0.0 && g.t_max > g.t_min) {
                return Err(ConfigError::at("t_grid", "needs 0 < t_min < t_max"));
            }
            if g.per_decade == 0 {
                return Err(ConfigError::at("t_grid.per_decade", "must be positive"));
            }
        }
        if let Some(p) = &self.torus_periods {
            if p.len() != self.dimension() || p.iter().any(|v| !(*v > 0.0)) {
                return Err(ConfigError::at("torus_periods", format!("needs {} positive periods", self.dimension())));
            }
        }
        let tol_ok = |v: &f64| *v > 0.0;
        if !self.tolerances.default.iter().all(tol_ok) || !self.tolerances.orders.iter().flatten().all(tol_ok) {
            return Err(ConfigError::at("tolerances", "tolerances must be positive"));
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<Shape, ConfigError> {
        let s = &self.shape;
        let center = s.center.unwrap_or([0.0; 2]);
        let shape = match self.domain.as_str() {
            "interval" => Shape::Interval { a: s.a.unwrap_or(0.0), b: s.b.unwrap_or(1.0) },
            "disk" => Shape::Disk { center, radius: s.radius.unwrap_or(1.0) },
            "ellipse" => Shape::Ellipse { center, a: s.a.unwrap_or(2.0), b: s.b.unwrap_or(1.0) },
            "star" => Shape::Star { center, coeffs: s.coeffs.clone().unwrap_or_else(|| vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.15, 0.0]) },
            other => {
                return Err(ConfigError::at(
                    "domain",
                    format!("unknown domain `{other}` (expected interval, disk, ellipse or star)"),
                ))
            }
        };
        Ok(shape)
    }

    pub fn dimension(&self) -> usize {
        if self.domain == "interval" {
            1
        } else {
            2
        }
    }

    pub fn engine(&self) -> Result<Engine, ConfigError> {
        match self.engine.as_deref() {
            None if self.dimension() == 1 => Ok(Engine::Exact),
            None => Ok(Engine::Spectral),
            Some("exact") if self.dimension() == 1 => Ok(Engine::Exact),
            Some("exact") => Err(ConfigError::at("engine", "the exact engine handles intervals only")),
            Some("spectral") => Ok(Engine::Spectral),
            Some(other) => Err(ConfigError::at("engine", format!("unknown engine `{other}` (expected exact or spectral)"))),
        }
    }

    pub fn methods(&self) -> Result<Vec<Method>, ConfigError> {
        if self.methods.is_empty() {
            return Err(ConfigError::at("methods", "at least one method is required"));
        }
        let engine = self.engine()?;
        let mut out = Vec::new();
        for m in &self.methods {
            let method = Method::parse(m).map_err(|_| {
                ConfigError::at("methods", format!("unknown method `{m}` (expected direct, transmuted, deficit or exact1d)"))
            })?;
            let method = match (engine, method) {
                (Engine::Exact, Method::Direct | Method::Exact1d) => Method::Exact1d,
                (Engine::Exact, Method::FromDeficit) => Method::FromDeficit,
                (Engine::Exact, Method::Transmuted) => {
                    return Err(ConfigError::at("methods", "the exact engine offers exact1d and deficit"))
                }
                (Engine::Spectral, Method::Exact1d) => {
                    return Err(ConfigError::at("methods", "exact1d needs engine = \"exact\""))
                }
                (Engine::Spectral, m) => m,
            };
            if out.contains(&method) {
                return Err(ConfigError::at("methods", format!("method `{m}` listed twice")));
            }
            out.push(method);
        }
        Ok(out)
    }

    pub fn geometry(&self) -> Result<DomainGeometry, ConfigError> {
        let shape = self.shape()?;
        let engine = self.engine()?;
        let periods = match (&self.torus_periods, engine) {
            (Some(p), _) => Some(p.clone()),
            (None, Engine::Spectral) => Some(vec![8.0 * shape.diameter(); self.dimension()]),
            (None, Engine::Exact) => None,
        };
        let ambient = match (periods, engine) {
            (_, Engine::Exact) => AmbientSpace::Line,
            (Some(p), Engine::Spectral) => AmbientSpace::torus(p).map_err(|e| ConfigError::at("torus_periods", e.to_string()))?,
            (None, Engine::Spectral) => unreachable!("spectral engine always has periods"),
        };
        let boundary_n = self.boundary_n.unwrap_or(if self.dimension() == 1 { 2 } else { DEFAULT_BOUNDARY_N });
        DomainGeometry::new(shape, ambient, boundary_n).map_err(|e| ConfigError::at("shape", e.to_string()))
    }

    pub fn kernel_profile(&self) -> Result<KernelProfile, ConfigError> {
        match self.kernel.as_str() {
            "gaussian" => Ok(KernelProfile::gaussian()),
            "poly_heat" => KernelProfile::poly_heat(self.m.unwrap_or(0)).map_err(|e| ConfigError::at("m", e.to_string())),
            "tabulated" => {
                let path = self.kernel_file.as_ref().ok_or_else(|| ConfigError::at("kernel_file", "missing"))?;
                let (x, k) = read_kernel_table(path).map_err(|e| ConfigError::at("kernel_file", e))?;
                KernelProfile::tabulated(x, k).map_err(|e| ConfigError::at("kernel_file", e.to_string()))
            }
            other => Err(ConfigError::at("kernel", format!("unknown kernel `{other}`"))),
        }
    }

    pub fn weight(&self) -> Result<Weight, ConfigError> {
        let w = &self.weight;
        let dim = self.dimension();
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| ConfigError::at(&format!("weight.{key}"), "required for this weight kind"));
        let weight = match w.kind.as_str() {
            "one" => Weight::one(dim),
            "constant" => Weight::constant(dim, need(w.value, "value")?),
            "monomial" => Weight::monomial(dim, w.i.unwrap_or(0), w.j.unwrap_or(0)),
            "poly" => {
                let terms = w.terms.as_ref().ok_or_else(|| ConfigError::at("weight.terms", "required for a poly weight"))?;
                let mut p = Poly::constant(0.0);
                for [c, i, j] in terms {
                    if *i < 0.0 || *j < 0.0 || i.fract() != 0.0 || j.fract() != 0.0 {
                        return Err(ConfigError::at("weight.terms", "exponents must be non-negative integers"));
                    }
                    p.add_term(*c, *i as u32, *j as u32);
                }
                Weight::polynomial(dim, p)
            }
            "trig" => Weight::trig(dim, w.amplitude.unwrap_or(1.0), w.wave.ok_or_else(|| ConfigError::at("weight.wave", "required for a trig weight"))?, w.phase.unwrap_or(0.0)),
            "bump" => Weight::gaussian_bump(dim, w.amplitude.unwrap_or(1.0), w.center.unwrap_or([0.0; 2]), need(w.sigma, "sigma")?)
                .map_err(|e| ConfigError::at("weight.sigma", e.to_string()))?,
            other => {
                return Err(ConfigError::at(
                    "weight.kind",
                    format!("unknown weight `{other}` (expected one, constant, monomial, poly, trig or bump)"),
                ))
            }
        };
        if dim == 1 && w.j.unwrap_or(0) != 0 {
            return Err(ConfigError::at("weight.j", "a 1-D weight has no second coordinate"));
        }
        Ok(weight.labelled(self.weight_label()))
    }

    fn weight_label(&self) -> String {
        let w = &self.weight;
        match w.kind.as_str() {
            "monomial" => format!("x{}y{}", w.i.unwrap_or(0), w.j.unwrap_or(0)),
            k => k.to_string(),
        }
    }

    pub fn t_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let (lo, hi, per) = match &self.t_grid {
            Some(g) => (g.t_min, g.t_max, g.per_decade),
            None => {
                // Windows scale with the squared diameter; the spectral ones keep
                // √t above a few grid cells.
                let l2 = self.shape()?.diameter().powi(2);
                let (lo, hi) = match (self.engine()?, self.dimension()) {
                    (Engine::Exact, _) => (1e-8, 1e-4),
                    (Engine::Spectral, 1) => (1e-4, 1e-2),
                    (Engine::Spectral, _) => (5e-4, 5e-2),
                };
                (lo * l2, hi * l2, 24)
            }
        };
        log_t_grid(lo, hi, per).map_err(|e| ConfigError::at("t_grid", e.to_string()))
    }

    pub fn strategy(&self, order: usize) -> &str {
        match &self.fit_strategy {
            Some(s) => s,
            None if order >= 3 => "peel",
            None => "joint",
        }
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n.unwrap_or(if self.dimension() == 1 { 1 << 14 } else { 1024 })
    }

    pub fn tolerance(&self, j: usize) -> f64 {
        if let Some(v) = self.tolerances.orders.as_ref().and_then(|o| o.get(j)) {
            return *v;
        }
        if let Some(v) = self.tolerances.default {
            return v;
        }
        match self.engine() {
            Ok(Engine::Exact) => 1e-3,
            _ if j <= 1 => 1e-2,
            _ => 5e-2,
        }
    }

    /// Canonical TOML of the resolved configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(self.hash())
    }
}

/// Two-column CSV `x,k` with a header row.
fn read_kernel_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), String> {
    #[derive(Deserialize)]
    struct Row {
        x: f64,
        k: f64,
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut x = Vec::new();
    let mut k = Vec::new();
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| format!("{}: row {}: {e}", path.display(), line + 2))?;
        x.push(row.x);
        k.push(row.k);
    }
    Ok((x, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "domain = \"disk\"\n[shape]\nradius = 1.0\n";

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml(BASE, &[]).unwrap();
        assert_eq!(c.engine().unwrap(), Engine::Spectral);
        assert_eq!(c.methods().unwrap(), vec![Method::Direct]);
        assert_eq!(c.grid_n(), 1024);
        let t = c.t_grid().unwrap();
        assert!((t[0] - 2e-3).abs() < 1e-15 && (t[t.len() - 1] - 0.2).abs() < 1e-12);
        assert_eq!(c.geometry().unwrap().ambient().periods().unwrap(), &[16.0, 16.0]);
    }

    #[test]
    fn overrides_patch_nested_keys() {
        let c = ExperimentConfig::from_toml(BASE, &["shape.radius=0.5".into(), "grid_n=256".into(), "kernel=poly_heat".into(), "m=2".into()]).unwrap();
        assert_eq!(c.shape.radius, Some(0.5));
        assert_eq!(c.grid_n(), 256);
        assert_eq!(c.kernel_profile().unwrap().id(), KernelProfile::poly_heat(2).unwrap().id());
        assert!(ExperimentConfig::from_toml(BASE, &["grid_n".into()]).is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let e = ExperimentConfig::from_toml("domain = \"blob\"", &[]).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("domain"));
        let e = ExperimentConfig::from_toml(BASE, &["engine=exact".into()]).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("engine"));
        let e = ExperimentConfig::from_toml(BASE, &["methods=[\"exact1d\"]".into()]).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("methods"));
        let e = ExperimentConfig::from_toml(BASE, &["kernel=poly_heat".into()]).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("m"));
        let e = ExperimentConfig::from_toml("domain = \"disk\"\nfrobnicate = 1\n", &[]).unwrap_err();
        assert!(e.to_string().contains("frobnicate"), "{e}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_toml(BASE, &[]).unwrap();
        let b = ExperimentConfig::from_toml(BASE, &[]).unwrap();
        let c = ExperimentConfig::from_toml(BASE, &["grid_n=512".into()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn interval_uses_exact_engine() {
        let c = ExperimentConfig::from_toml("domain = \"interval\"\n[weight]\nkind = \"monomial\"\ni = 2\n", &[]).unwrap();
        assert_eq!(c.engine().unwrap(), Engine::Exact);
        assert_eq!(c.methods().unwrap(), vec![Method::Exact1d]);
        assert!(matches!(c.geometry().unwrap().ambient(), AmbientSpace::Line));
        assert_eq!(c.weight().unwrap().value([0.5, 0.0]), 0.25);
    }
}
