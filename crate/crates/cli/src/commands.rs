use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use heatlab_core::asymptotics::{self, compare_report, fit_expansion, FitStrategy, MAX_ODD_ORDER};
use heatlab_core::geometry::DomainGeometry;
use heatlab_core::heat_content::{
    heat_content_from_deficit, CurveSample, ExactLine, HeatContentCurve, Method, SpectralHeatContent, SpectralOptions,
};
use heatlab_core::kernel::KernelProfile;
use heatlab_core::weight::Weight;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Engine, ExperimentConfig};
use crate::failure::Failure;
use crate::output::{self, fmt_f64, Manifest};

/// Highest order of the analytic table used by convergence studies.
const ANALYTIC_ORDER: usize = 4;
/// Orders above N covered by a peeled fit.
const PEEL_EXTRA: usize = 4;
/// Errors this close to rounding are left out of the order check.
const ERROR_FLOOR: f64 = 1e-12;

enum Engines {
    Exact(ExactLine),
    Spectral(SpectralHeatContent),
}

impl Engines {
    fn build(cfg: &ExperimentConfig, engine: Engine, domain: &DomainGeometry, f: &Weight, grid_n: usize) -> Result<Self, Failure> {
        Ok(match engine {
            Engine::Exact => Engines::Exact(ExactLine::new(domain, f)?),
            Engine::Spectral => {
                let options = SpectralOptions {
                    grid_n,
                    cell_average_correction: cfg.cell_average_correction.unwrap_or(true),
                };
                Engines::Spectral(SpectralHeatContent::new(domain, f, options)?)
            }
        })
    }

    fn curve(&self, kernel: &KernelProfile, ts: &[f64], method: Method) -> Result<HeatContentCurve, Failure> {
        Ok(match (self, method) {
            (Engines::Spectral(e), m) => e.curve(kernel, ts, m)?,
            (Engines::Exact(e), Method::FromDeficit) => {
                let t_max = ts.iter().copied().fold(0.0, f64::max);
                let deficit = e.deficit_curve(kernel.decay_scale() * t_max.sqrt() * 1.01, 4096)?;
                let samples = ts
                    .par_iter()
                    .map(|&t| {
                        let omega = heat_content_from_deficit(&deficit, e.mass(), kernel, t)?;
                        Ok(CurveSample { t, omega, loss: e.mass() - omega })
                    })
                    .collect::<heatlab_core::Result<Vec<_>>>()?;
                HeatContentCurve::new("interval", kernel.id(), Method::FromDeficit, samples, e.mass())?
            }
            (Engines::Exact(e), _) => e.curve(kernel, ts)?,
        })
    }
}

pub struct Setup {
    pub domain: DomainGeometry,
    pub kernel: KernelProfile,
    pub weight: Weight,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, Failure> {
        Ok(Self { domain: cfg.geometry()?, kernel: cfg.kernel_profile()?, weight: cfg.weight()? })
    }

    /// Closed-form `β_j`, or `None` where no formula exists.
    fn analytic(&self, order: usize) -> Result<Vec<Option<f64>>, Failure> {
        (0..=order)
            .map(|j| {
                if j % 2 == 1 && j > MAX_ODD_ORDER {
                    Ok(None)
                } else {
                    Ok(Some(asymptotics::beta(&self.domain, &self.weight, &self.kernel, j)?))
                }
            })
            .collect()
    }

    /// Like [`Self::analytic`], with orders the kernel cannot supply left open.
    fn analytic_available(&self, order: usize) -> Vec<Option<f64>> {
        (0..=order)
            .map(|j| {
                if j % 2 == 1 && j > MAX_ODD_ORDER {
                    None
                } else {
                    asymptotics::beta(&self.domain, &self.weight, &self.kernel, j).ok()
                }
            })
            .collect()
    }
}

/// Compute one curve per configured method and write the CSVs and manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let setup = Setup::new(cfg)?;
    let ts = cfg.t_grid()?;
    let methods = cfg.methods()?;
    let run_dir = cfg.run_dir();
    let curves_dir = run_dir.join("curves");
    fs::create_dir_all(&curves_dir).map_err(|e| Failure::io(&curves_dir, e))?;
    let mut manifest = Manifest::new(cfg.hash(), cfg.canonical());

    let start = Instant::now();
    let engine = Engines::build(cfg, cfg.engine()?, &setup.domain, &setup.weight, cfg.grid_n())?;
    manifest.timings_ms.insert("setup".into(), start.elapsed().as_secs_f64() * 1e3);
    for method in methods {
        let start = Instant::now();
        let mut curve = engine.curve(&setup.kernel, &ts, method)?;
        curve.domain_id = setup.domain.id().to_string();
        let path = curves_dir.join(format!("{}.csv", method.tag()));
        output::write_curve(&path, &curve)?;
        manifest.timings_ms.insert(method.tag().to_string(), start.elapsed().as_secs_f64() * 1e3);
        eprintln!("wrote {} ({} samples)", path.display(), curve.samples.len());
    }
    manifest.write(&run_dir)?;
    Ok(run_dir)
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub all_pass: bool,
    pub json: PathBuf,
    pub csv: PathBuf,
}

/// Fit a curve CSV, compare with the closed forms and write JSON and CSV reports.
pub fn fit(cfg: &ExperimentConfig, curve_path: &Path, order: usize, strategy: &str) -> Result<FitSummary, Failure> {
    let setup = Setup::new(cfg)?;
    let analytic = setup.analytic(order)?;
    let mass = analytic[0].expect("beta_0 has a closed form");
    let curve = output::read_curve(curve_path, mass)?;
    if curve.domain_id != setup.domain.id() {
        return Err(Failure::Config(format!(
            "config key `domain`: curve was computed for `{}`, config describes `{}`",
            curve.domain_id,
            setup.domain.id()
        )));
    }
    let strategy = match strategy {
        "joint" => FitStrategy::Joint,
        // Subtract every other closed form through order N + 4 and fit β_N
        // with the open odd orders above it.
        "peel" => FitStrategy::Peel {
            known: setup
                .analytic_available(order + PEEL_EXTRA)
                .into_iter()
                .enumerate()
                .filter(|(j, _)| *j != order)
                .filter_map(|(j, b)| b.map(|b| (j, b)))
                .collect(),
            extra_terms: PEEL_EXTRA,
        },
        other => return Err(Failure::Config(format!("config key `fit_strategy`: unknown strategy `{other}`"))),
    };
    let report = fit_expansion(&curve, order, &strategy)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let cmp = compare_report(&analytic, &report, setup.domain.id(), setup.kernel.id(), |j| cfg.tolerance(j));

    // Reports go next to the curves of the run the file came from.
    let run_dir = curve_path
        .parent()
        .and_then(|p| p.parent())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.run_dir());
    let stem = curve_path.file_stem().unwrap_or_default().to_string_lossy().to_string();
    let json = run_dir.join("reports").join(format!("{stem}-fit.json"));
    let csv = run_dir.join("reports").join(format!("{stem}-fit.csv"));
    output::write_text(&json, &serde_json::to_string_pretty(&cmp).expect("report serializes"))?;
    output::write_text(&csv, &cmp.to_csv())?;
    if let Some(mut manifest) = Manifest::load(&run_dir) {
        manifest.write(&run_dir)?;
    }
    for r in &cmp.coefficients {
        let verdict = match r.pass {
            Some(true) => "ok",
            Some(false) => "FAIL",
            None => "no analytic reference",
        };
        eprintln!("beta_{}: fitted {:.10e} +- {:.2e}, analytic {}, {verdict}", r.j, r.fitted, r.stderr, r.analytic.map(fmt_f64).unwrap_or_else(|| "-".into()));
    }
    Ok(FitSummary { all_pass: cmp.all_pass(), json, csv })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub grid_n: usize,
    pub h: f64,
    pub j: usize,
    pub analytic: f64,
    pub fitted: f64,
    pub abs_err: f64,
    /// Empirical order against the previous grid.
    pub order: Option<f64>,
}

pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid_n,h,j,analytic,fitted,abs_err,order\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.grid_n,
                fmt_f64(r.h),
                r.j,
                fmt_f64(r.analytic),
                fmt_f64(r.fitted),
                fmt_f64(r.abs_err),
                r.order.map(fmt_f64).unwrap_or_default()
            ));
        }
        out
    }
}

/// Repeat the spectral experiment across grids. Each of `β̂_0`, `β̂_1` is
/// isolated by subtracting every other closed-form coefficient up to order 4;
/// two higher orders are fitted alongside as nuisance terms.
pub fn convergence(cfg: &ExperimentConfig, grids: &[usize]) -> Result<ConvergenceTable, Failure> {
    if cfg.engine.as_deref() == Some("exact") {
        return Err(Failure::Config("config key `engine`: convergence studies need the spectral engine".into()));
    }
    if grids.is_empty() {
        return Err(Failure::Config("no grids given".into()));
    }
    let mut cfg = cfg.clone();
    cfg.engine = Some("spectral".into());
    let setup = Setup::new(&cfg)?;
    let ts = cfg.t_grid()?;
    let method = cfg.methods()?[0];
    let analytic = setup.analytic(ANALYTIC_ORDER)?;
    let mut grids = grids.to_vec();
    grids.sort_unstable();
    grids.dedup();

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    if grids.len() == 1 {
        warnings.push("single grid: no convergence order can be estimated".to_string());
    }
    for &n in &grids {
        let engine = Engines::build(&cfg, Engine::Spectral, &setup.domain, &setup.weight, n)?;
        let curve = engine.curve(&setup.kernel, &ts, method)?;
        let period = setup.domain.ambient().periods().map(|p| p[0]).unwrap_or(1.0);
        let h = period / n as f64;
        for j in 0..=1 {
            let known = analytic.iter().enumerate().filter(|(i, _)| *i != j).filter_map(|(i, b)| b.map(|b| (i, b))).collect();
            let fit = fit_expansion(&curve, ANALYTIC_ORDER, &FitStrategy::Peel { known, extra_terms: 2 })?;
            let fitted = fit.beta(j).expect("order present");
            let exact = analytic[j].expect("low orders have closed forms");
            let abs_err = (fitted - exact).abs();
            let order = rows.iter().rev().find(|r| r.j == j).map(|prev| (prev.abs_err / abs_err).ln() / (prev.h / h).ln());
            if let (Some(p), Some(prev)) = (order, rows.iter().rev().find(|r| r.j == j)) {
                let at_floor = prev.abs_err <= ERROR_FLOOR * exact.abs().max(1.0);
                if at_floor {
                    warnings.push(format!("beta_{j}: error at rounding level on grid {}, order not assessed", prev.grid_n));
                } else if !(p >= 2.0) {
                    failures.push(format!("beta_{j}: empirical order {p:.2} below 2 between grids {} and {n}", prev.grid_n));
                }
            }
            rows.push(ConvergenceRow { grid_n: n, h, j, analytic: exact, fitted, abs_err, order });
        }
    }
    Ok(ConvergenceTable { rows, warnings, failures })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReynoldsRow {
    pub s: f64,
    pub tube_volume: f64,
    pub quotient: f64,
    pub perimeter: f64,
    pub rel_err: f64,
}

/// `vol(S^{-s}) / s` against the boundary measure.
pub fn reynolds(domain: &DomainGeometry, s_values: &[f64]) -> Result<Vec<ReynoldsRow>, Failure> {
    let perimeter = domain.perimeter();
    s_values
        .iter()
        .map(|&s| {
            if !(s > 0.0) {
                return Err(Failure::Config(format!("tube width {s} must be positive")));
            }
            let v = domain.tube_volume(s)?;
            let q = v / s;
            Ok(ReynoldsRow { s, tube_volume: v, quotient: q, perimeter, rel_err: (q - perimeter).abs() / perimeter })
        })
        .collect()
}

pub fn reynolds_csv(rows: &[ReynoldsRow]) -> String {
    let mut out = String::from("s,tube_volume,quotient,perimeter,rel_err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.s),
            fmt_f64(r.tube_volume),
            fmt_f64(r.quotient),
            fmt_f64(r.perimeter),
            fmt_f64(r.rel_err)
        ));
    }
    out
}
