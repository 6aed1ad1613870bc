//! Short-time coefficients `β_j` of `Ω(t) = Σ β_j t^{j/2} + o(t^{N/2})`:
//! closed forms from boundary geometry and kernel functionals, and least-squares
//! extraction from sampled curves.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::heat_content::HeatContentCurve;
use crate::kernel::{factorial, KernelProfile};
use crate::special::gamma;
use crate::weight::{Point, Weight};

/// Highest odd order with a closed form.
pub const MAX_ODD_ORDER: usize = 3;

/// Singular-value ratio below which a design matrix counts as rank deficient.
const RANK_TOLERANCE: f64 = 1e-13;
const CONDITION_WARNING: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoefficients {
    pub beta: Vec<f64>,
    pub domain_id: String,
    pub kernel_id: String,
    pub max_odd_order: usize,
}

impl ExpansionCoefficients {
    /// `β_0 … β_N` from the closed forms; odd `N ≥ 5` is unsupported.
    pub fn analytic(domain: &DomainGeometry, f: &Weight, kernel: &KernelProfile, order: usize) -> Result<Self> {
        let beta = (0..=order).map(|j| beta(domain, f, kernel, j)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            beta,
            domain_id: domain.id().to_string(),
            kernel_id: kernel.id().to_string(),
            max_odd_order: MAX_ODD_ORDER,
        })
    }

    pub fn order(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        evaluate_expansion(&self.beta, t)
    }
}

/// `β_j` for any supported order.
pub fn beta(domain: &DomainGeometry, f: &Weight, kernel: &KernelProfile, j: usize) -> Result<f64> {
    match j {
        1 => beta_one(domain, f, kernel),
        3 => beta_three(domain, f, kernel),
        j if j % 2 == 0 => beta_even(domain, f, kernel, j),
        j => Err(Error::UnsupportedOrder { order: j, max: MAX_ODD_ORDER }),
    }
}

/// `β_0 = r_0 ∫_S f`, `β_j = (r_j / j!) ∫_S ½ Δ^{j/2} f` for even `j ≥ 2`.
pub fn beta_even(domain: &DomainGeometry, f: &Weight, kernel: &KernelProfile, j: usize) -> Result<f64> {
    if j % 2 == 1 {
        return Err(Error::domain(format!("beta_even called with odd order {j}")));
    }
    let r = kernel.r_coefficient(j)?;
    if j == 0 {
        return Ok(r * domain.volume_integral(|x| f.value(x)));
    }
    let lap = f.laplacian_power(j / 2)?;
    Ok(r / factorial(j) * 0.5 * domain.volume_integral(|x| lap.value(x)))
}

/// `β_1 = -½ r_1 ∫_{∂S} f dA`.
pub fn beta_one(domain: &DomainGeometry, f: &Weight, kernel: &KernelProfile) -> Result<f64> {
    let r1 = kernel.r_coefficient(1)?;
    Ok(-0.5 * r1 * domain.boundary_integral(|n| f.value(n.position)))
}

/// `√t` coefficient for `k(x) = exp(-x^{2m})`: `-Γ((2m-1)/2m) / π · ∫_{∂S} f dA`.
pub fn beta_one_generalized(m: u32, domain: &DomainGeometry, f: &Weight) -> Result<f64> {
    if m == 0 {
        return Err(Error::config("generalized kernel needs m >= 1"));
    }
    let m = m as f64;
    Ok(-gamma((2.0 * m - 1.0) / (2.0 * m)) / PI * domain.boundary_integral(|n| f.value(n.position)))
}

/// `β_3 = r_3/(2·3!) ∫_{∂S} [L_ν(L f) - ½Δf + ½ L(L f)] dA` with
/// `L w = ½Δφ·w - ν·∇w`. On the boundary `ν` is constant along normal lines and
/// `∂_σ(½Δφ) = 2(½Δφ)²`, so `L_ν(L f) = 2H²f + H ∂_ν f - ∂²_ν f` with `H = ½Δφ`.
pub fn beta_three(domain: &DomainGeometry, f: &Weight, kernel: &KernelProfile) -> Result<f64> {
    let r3 = kernel.r_coefficient(3)?;
    let lap = f.laplacian()?;
    let mut total = 0.0;
    for node in domain.boundary_nodes() {
        let p = node.position;
        let nu = node.normal;
        let h = domain.mean_curvature_at(node);
        let fv = f.value(p);
        let g = f.gradient(p)?;
        let hess = f.hessian(p)?;
        let df = nu[0] * g[0] + nu[1] * g[1];
        let d2f = nu[0] * (hess[0][0] * nu[0] + hess[0][1] * nu[1]) + nu[1] * (hess[1][0] * nu[0] + hess[1][1] * nu[1]);
        let lf = h * fv - df;
        let d_lf = 2.0 * h * h * fv + h * df - d2f;
        total += (0.5 * d_lf + 0.5 * h * lf - 0.5 * lap.value(p)) * node.weight;
    }
    Ok(r3 / 12.0 * total)
}

/// [`beta_three`] with `L f` built from the tube extensions of `½Δφ` and `ν`
/// and its normal derivative taken by finite differences.
pub fn beta_three_fd(domain: &DomainGeometry, f: &Weight, kernel: &KernelProfile) -> Result<f64> {
    let r3 = kernel.r_coefficient(3)?;
    let dim = domain.dimension();
    let grad: Vec<Weight> = (0..dim).map(|a| f.partial(a)).collect::<Result<_>>()?;
    let lap = f.laplacian()?;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let record = |e: Error| {
        failure.borrow_mut().get_or_insert(e);
        f64::NAN
    };
    let lf = |x: Point| -> f64 {
        let h = match domain.mean_curvature_field(x) {
            Ok(v) => v,
            Err(e) => return record(e),
        };
        let nu = match domain.normal_field(x) {
            Ok(v) => v,
            Err(e) => return record(e),
        };
        let dnu: f64 = (0..dim).map(|a| nu[a] * grad[a].value(x)).sum();
        h * f.value(x) - dnu
    };
    let mut total = 0.0;
    for node in domain.boundary_nodes() {
        let p = node.position;
        let lf_p = lf(p);
        let d_lf = domain.normal_derivative(lf, node, 1)?;
        let h = domain.mean_curvature_at(node);
        total += (d_lf - 0.5 * lap.value(p) + 0.5 * (h * lf_p - d_lf)) * node.weight;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r3 / 12.0 * total)
}

/// `Σ β_j t^{j/2}`.
pub fn evaluate_expansion(beta: &[f64], t: f64) -> f64 {
    let rt = t.sqrt();
    beta.iter().rev().fold(0.0, |acc, b| acc * rt + b)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitStrategy {
    /// Least squares for all of `β_0 … β_N` at once.
    Joint,
    /// Subtract the listed `(j, β_j)`, then fit the remaining orders up to `N`
    /// together with `extra_terms` higher nuisance orders.
    Peel { known: Vec<(usize, f64)>, extra_terms: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientSource {
    Fitted,
    Known,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedCoefficient {
    pub j: usize,
    pub value: f64,
    pub stderr: f64,
    pub source: CoefficientSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Entries for `j = 0 … N`.
    pub coefficients: Vec<FittedCoefficient>,
    /// Nuisance orders above `N` fitted alongside.
    pub nuisance: Vec<FittedCoefficient>,
    pub residual_norm: f64,
    pub condition: f64,
    pub t_window: (f64, f64),
    pub samples: usize,
    pub peel_log: Vec<String>,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn beta(&self, j: usize) -> Option<f64> {
        self.coefficients.get(j).map(|c| c.value)
    }
}

/// Least-squares solution with standard errors and the 2-norm condition number.
struct LeastSquares {
    coeffs: Vec<f64>,
    stderr: Vec<f64>,
    residual_norm: f64,
    condition: f64,
}

fn least_squares(design: DMatrix<f64>, y: DVector<f64>) -> Result<LeastSquares> {
    let (m, k) = design.shape();
    let svd = design.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(smin > RANK_TOLERANCE * smax) {
        return Err(Error::Conditioning {
            condition,
            message: format!("design matrix of {m} samples x {k} terms is rank deficient"),
        });
    }
    let c = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Conditioning { condition, message: e.to_string() })?;
    let r = &y - &design * &c;
    let residual_norm = r.norm();
    let dof = (m - k).max(1) as f64;
    let s2 = residual_norm * residual_norm / dof;
    let v = svd.v_t.as_ref().expect("requested V^T").transpose();
    let stderr = (0..k)
        .map(|i| {
            let var: f64 = (0..k).map(|l| (v[(i, l)] / sv[l]).powi(2)).sum();
            (s2 * var).sqrt()
        })
        .collect();
    Ok(LeastSquares { coeffs: c.iter().copied().collect(), stderr, residual_norm, condition })
}

/// Fit `Ω(t) ≈ Σ β_j t^{j/2}` on the curve samples. Columns use the rescaled
/// variable `τ = √(t / t_max)`.
pub fn fit_expansion(curve: &HeatContentCurve, order: usize, strategy: &FitStrategy) -> Result<FitReport> {
    fit_expansion_with(curve, order, strategy, 2.0)
}

/// As [`fit_expansion`] with an explicit minimum span of `t` in decades.
pub fn fit_expansion_with(
    curve: &HeatContentCurve,
    order: usize,
    strategy: &FitStrategy,
    min_decades: f64,
) -> Result<FitReport> {
    let n = curve.samples.len();
    if n < 3 * (order + 1) {
        return Err(Error::InsufficientSamples(format!(
            "{n} samples for order {order}, need at least {}",
            3 * (order + 1)
        )));
    }
    let t_min = curve.samples.first().map(|s| s.t).unwrap_or(0.0);
    let t_max = curve.samples.last().map(|s| s.t).unwrap_or(0.0);
    let decades = (t_max / t_min).log10();
    if decades + 1e-9 < min_decades {
        return Err(Error::InsufficientSamples(format!(
            "t-window spans {decades:.2} decades, need {min_decades}"
        )));
    }

    let (known, extra) = match strategy {
        FitStrategy::Joint => (Vec::new(), 0),
        FitStrategy::Peel { known, extra_terms } => (known.clone(), *extra_terms),
    };
    let known_value = |j: usize| known.iter().find(|(k, _)| *k == j).map(|(_, v)| *v);
    let unknown: Vec<usize> = (0..=order + extra).filter(|j| known_value(*j).is_none()).collect();
    if unknown.is_empty() {
        return Err(Error::config("every coefficient is known; nothing to fit"));
    }
    let mut log = Vec::new();
    for (j, v) in &known {
        log.push(format!("subtract beta_{j} = {v:.12e}"));
    }
    log.push(format!(
        "fit orders {:?} on t in [{t_min:.3e}, {t_max:.3e}] ({n} samples)",
        unknown
    ));

    // Residual after subtracting known terms; the known β_0 is removed through
    // the loss column so that small-t samples keep their relative precision.
    let y: Vec<f64> = curve
        .samples
        .iter()
        .map(|s| {
            let rt = s.t.sqrt();
            let mut v = match known_value(0) {
                Some(b0) => (curve.initial_mass - b0) - s.loss,
                None => s.omega,
            };
            for (j, b) in &known {
                if *j > 0 {
                    v -= b * rt.powi(*j as i32);
                }
            }
            v
        })
        .collect();
    let design = DMatrix::from_fn(n, unknown.len(), |i, c| (curve.samples[i].t / t_max).sqrt().powi(unknown[c] as i32));
    let ls = least_squares(design, DVector::from_vec(y))?;

    let scale = |j: usize| t_max.sqrt().powi(j as i32);
    let mut coefficients = Vec::with_capacity(order + 1);
    let mut nuisance = Vec::new();
    for j in 0..=order + extra {
        let entry = match known_value(j) {
            Some(v) => FittedCoefficient { j, value: v, stderr: 0.0, source: CoefficientSource::Known },
            None => {
                let c = unknown.iter().position(|u| *u == j).expect("unknown order present");
                FittedCoefficient {
                    j,
                    value: ls.coeffs[c] / scale(j),
                    stderr: ls.stderr[c] / scale(j),
                    source: CoefficientSource::Fitted,
                }
            }
        };
        if j <= order {
            coefficients.push(entry);
        } else {
            nuisance.push(entry);
        }
    }
    let mut warnings = Vec::new();
    if ls.condition > CONDITION_WARNING {
        warnings.push(format!("condition estimate {:.3e} exceeds {CONDITION_WARNING:e}", ls.condition));
    }
    for c in coefficients.iter().chain(&nuisance) {
        if c.j % 2 == 1 && c.j > MAX_ODD_ORDER && c.source == CoefficientSource::Fitted {
            warnings.push(format!("beta_{} has no analytic reference", c.j));
        }
    }
    Ok(FitReport {
        coefficients,
        nuisance,
        residual_norm: ls.residual_norm,
        condition: ls.condition,
        t_window: (t_min, t_max),
        samples: n,
        peel_log: log,
        warnings,
    })
}

/// Least-squares polynomial `Σ c_k x^k`, `k = 0 … degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFit {
    pub coeffs: Vec<f64>,
    pub stderr: Vec<f64>,
    pub residual_norm: f64,
    pub condition: f64,
}

impl PolynomialFit {
    /// `p^{(j)}(0) = j! c_j`.
    pub fn derivative_at_zero(&self, j: usize) -> f64 {
        self.coeffs.get(j).map(|c| factorial(j) * c).unwrap_or(0.0)
    }
}

/// Polynomial fit in `x / x_max` over the given monomial degrees, reported
/// in the original variable.
pub fn polynomial_fit(x: &[f64], y: &[f64], degrees: &[usize]) -> Result<PolynomialFit> {
    if x.len() != y.len() || x.len() < degrees.len() + 1 {
        return Err(Error::InsufficientSamples(format!("{} samples for {} terms", x.len(), degrees.len())));
    }
    let x_max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let design = DMatrix::from_fn(x.len(), degrees.len(), |i, c| (x[i] / x_max).powi(degrees[c] as i32));
    let ls = least_squares(design, DVector::from_column_slice(y))?;
    let top = degrees.iter().copied().max().unwrap_or(0);
    let mut coeffs = vec![0.0; top + 1];
    let mut stderr = vec![0.0; top + 1];
    for (c, &d) in degrees.iter().enumerate() {
        coeffs[d] = ls.coeffs[c] / x_max.powi(d as i32);
        stderr[d] = ls.stderr[c] / x_max.powi(d as i32);
    }
    Ok(PolynomialFit { coeffs, stderr, residual_norm: ls.residual_norm, condition: ls.condition })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub j: usize,
    pub analytic: Option<f64>,
    pub fitted: f64,
    pub stderr: f64,
    pub rel_err: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub domain: String,
    pub kernel: String,
    pub coefficients: Vec<ComparisonRow>,
    pub residual: f64,
    pub condition: f64,
}

/// Per-coefficient discrepancies. `tolerance(j)` is relative, or absolute when
/// the analytic value is zero. Orders without a closed form get no verdict.
pub fn compare_report<T: Fn(usize) -> f64>(analytic: &[Option<f64>], fit: &FitReport, domain: &str, kernel: &str, tolerance: T) -> Comparison {
    let coefficients = fit
        .coefficients
        .iter()
        .map(|c| {
            let a = analytic.get(c.j).copied().flatten();
            let (rel_err, pass) = match a {
                Some(a) => {
                    let abs = (c.value - a).abs();
                    let rel = if a != 0.0 { abs / a.abs() } else { abs };
                    (Some(rel), Some(rel <= tolerance(c.j)))
                }
                None => (None, None),
            };
            ComparisonRow { j: c.j, analytic: a, fitted: c.value, stderr: c.stderr, rel_err, pass }
        })
        .collect();
    Comparison {
        domain: domain.to_string(),
        kernel: kernel.to_string(),
        coefficients,
        residual: fit.residual_norm,
        condition: fit.condition,
    }
}

impl Comparison {
    pub fn all_pass(&self) -> bool {
        self.coefficients.iter().all(|r| r.pass != Some(false))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain,kernel,j,analytic,fitted,stderr,rel_err,pass\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.coefficients {
            out.push_str(&format!(
                "{},{},{},{},{:e},{:e},{},{}\n",
                self.domain,
                self.kernel,
                r.j,
                opt(r.analytic),
                r.fitted,
                r.stderr,
                opt(r.rel_err),
                r.pass.map(|p| p.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainGeometry;
    use crate::heat_content::{log_t_grid, CurveSample, ExactLine, Method};
    use approx::assert_relative_eq;

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    fn unit_interval() -> DomainGeometry {
        DomainGeometry::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn even_coefficients() {
        let g = KernelProfile::gaussian();
        let i = unit_interval();
        assert_relative_eq!(beta_even(&i, &Weight::one(1), &g, 0).unwrap(), 1.0, max_relative = 1e-14);
        assert_eq!(beta_even(&i, &Weight::one(1), &g, 2).unwrap(), 0.0);
        assert_relative_eq!(beta_even(&i, &Weight::monomial(1, 2, 0), &g, 2).unwrap(), 1.0, max_relative = 1e-14);
        // β_4 = (12/24)·½∫_0^1 24 dx for f = x⁴
        assert_relative_eq!(beta_even(&i, &Weight::monomial(1, 4, 0), &g, 4).unwrap(), 6.0, max_relative = 1e-14);
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        assert_eq!(beta_even(&d, &Weight::one(2), &g, 2).unwrap(), 0.0);
        assert!(matches!(
            beta_even(&i, &Weight::opaque(1, |x| x[0]), &g, 2),
            Err(Error::UnsupportedWeight(_))
        ));
    }

    #[test]
    fn first_order_coefficients() {
        let g = KernelProfile::gaussian();
        assert_relative_eq!(beta_one(&unit_interval(), &Weight::one(1), &g).unwrap(), -2.0 / SQRT_PI, max_relative = 1e-12);
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        assert_relative_eq!(beta_one(&d, &Weight::one(2), &g).unwrap(), -2.0 * SQRT_PI, max_relative = 1e-12);
        assert_eq!(beta_one(&d, &Weight::zero(2), &g).unwrap(), 0.0);
        assert_relative_eq!(
            beta_one_generalized(1, &unit_interval(), &Weight::one(1)).unwrap(),
            -2.0 / SQRT_PI,
            max_relative = 1e-14
        );
        let gamma34 = 1.225_416_702_465_177_6;
        assert_relative_eq!(
            beta_one_generalized(2, &unit_interval(), &Weight::one(1)).unwrap(),
            -2.0 * gamma34 / PI,
            max_relative = 1e-14
        );
        assert_relative_eq!(beta_one_generalized(2, &d, &Weight::one(2)).unwrap(), -2.0 * gamma34, max_relative = 1e-12);
    }

    #[test]
    fn generalized_first_order_matches_r1_route() {
        for m in 1..=4 {
            let k = KernelProfile::poly_heat(m).unwrap();
            for f in [Weight::one(1), Weight::monomial(1, 2, 0)] {
                let via_r1 = beta_one(&unit_interval(), &f, &k).unwrap();
                let closed = beta_one_generalized(m, &unit_interval(), &f).unwrap();
                assert_relative_eq!(via_r1, closed, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn third_order_coefficients() {
        let g = KernelProfile::gaussian();
        let i = unit_interval();
        assert_eq!(beta_three(&i, &Weight::zero(1), &g).unwrap(), 0.0);
        assert_relative_eq!(
            beta_three(&i, &Weight::monomial(1, 2, 0), &g).unwrap(),
            -8.0 / (3.0 * SQRT_PI),
            max_relative = 1e-10
        );
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        assert_relative_eq!(beta_three(&d, &Weight::one(2), &g).unwrap(), SQRT_PI / 2.0, max_relative = 1e-6);
        assert!(matches!(beta(&i, &Weight::one(1), &g, 5), Err(Error::UnsupportedOrder { order: 5, .. })));
    }

    #[test]
    fn third_order_routes_agree() {
        let g = KernelProfile::gaussian();
        let ell = DomainGeometry::with_default_ambient(crate::geometry::Shape::Ellipse { center: [0.0, 0.0], a: 2.0, b: 1.0 }).unwrap();
        let f = Weight::gaussian_bump(2, 1.0, [0.3, -0.2], 0.8).unwrap();
        for (d, w) in [(DomainGeometry::disk(1.0, 16.0).unwrap(), Weight::one(2)), (ell.clone(), Weight::one(2)), (ell, f)] {
            let closed = beta_three(&d, &w, &g).unwrap();
            let fd = beta_three_fd(&d, &w, &g).unwrap();
            assert!((closed - fd).abs() < 1e-3 * closed.abs().max(1e-3), "{closed} vs {fd}");
        }
    }

    #[test]
    fn expansion_evaluation() {
        assert_eq!(evaluate_expansion(&[1.0], 0.04), 1.0);
        assert!((evaluate_expansion(&[0.0, 1.0], 0.04) - 0.2).abs() < 1e-16);
        assert!((evaluate_expansion(&[1.0, -2.0 / SQRT_PI], 1e-4) - (1.0 - 0.02 / SQRT_PI)).abs() < 1e-16);
    }

    fn synthetic(beta: &[f64], ts: &[f64]) -> HeatContentCurve {
        let samples = ts
            .iter()
            .map(|&t| {
                let omega = evaluate_expansion(beta, t);
                CurveSample { t, omega, loss: beta[0] - omega }
            })
            .collect();
        HeatContentCurve::new("synthetic", "gaussian", Method::Direct, samples, beta[0]).unwrap()
    }

    #[test]
    fn fit_recovers_its_own_model() {
        let beta = [1.0, -2.0 / SQRT_PI, 0.5];
        let c = synthetic(&beta, &log_t_grid(1e-6, 1e-1, 24).unwrap());
        let r = fit_expansion(&c, 2, &FitStrategy::Joint).unwrap();
        for (j, b) in beta.iter().enumerate() {
            assert!((r.beta(j).unwrap() - b).abs() < 1e-8, "beta_{j}");
        }
        let p = fit_expansion(&c, 2, &FitStrategy::Peel { known: vec![(0, 1.0)], extra_terms: 1 }).unwrap();
        assert_eq!(p.coefficients[0].source, CoefficientSource::Known);
        assert!((p.beta(1).unwrap() - beta[1]).abs() < 1e-8);
        assert!(p.nuisance[0].value.abs() < 1e-6);
    }

    #[test]
    fn fit_preconditions() {
        let c = synthetic(&[1.0, 1.0], &log_t_grid(1e-4, 1e-3, 24).unwrap());
        assert!(matches!(fit_expansion(&c, 1, &FitStrategy::Joint), Err(Error::InsufficientSamples(_))));
        let few = synthetic(&[1.0, 1.0], &[1e-6, 1e-3, 1e-1]);
        assert!(matches!(fit_expansion(&few, 3, &FitStrategy::Joint), Err(Error::InsufficientSamples(_))));
        let flat = synthetic(&[1.0], &log_t_grid(1e-6, 1e-1, 24).unwrap());
        let too_many = fit_expansion(&flat, 60, &FitStrategy::Joint);
        assert!(matches!(too_many, Err(Error::InsufficientSamples(_)) | Err(Error::Conditioning { .. })));
    }

    #[test]
    fn fit_exact_interval_curve() {
        let e = ExactLine::new(&unit_interval(), &Weight::one(1)).unwrap();
        let c = e.curve(&KernelProfile::gaussian(), &log_t_grid(1e-8, 1e-4, 24).unwrap()).unwrap();
        let r = fit_expansion(&c, 3, &FitStrategy::Joint).unwrap();
        assert_relative_eq!(r.beta(1).unwrap(), -2.0 / SQRT_PI, max_relative = 1e-4);
    }

    #[test]
    fn coefficients_are_linear_in_weight_and_kernel() {
        let g = KernelProfile::gaussian();
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        let f = Weight::monomial(2, 2, 0);
        let h = Weight::gaussian_bump(2, 1.0, [0.2, 0.1], 0.5).unwrap();
        let mix = f.combine(1.5, &h, -0.7);
        for j in 0..=4 {
            let lhs = beta(&d, &mix, &g, j).unwrap();
            let rhs = 1.5 * beta(&d, &f, &g, j).unwrap() - 0.7 * beta(&d, &h, &g, j).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "j={j}: {lhs} vs {rhs}");
            let doubled = beta(&d, &f, &g.scaled(2.0), j).unwrap();
            assert!((doubled - 2.0 * beta(&d, &f, &g, j).unwrap()).abs() <= 1e-12 * (1.0 + doubled.abs()));
        }
    }

    #[test]
    fn comparison_rows() {
        let beta = [1.0, -2.0 / SQRT_PI, 0.0, 0.3];
        let c = synthetic(&beta, &log_t_grid(1e-6, 1e-1, 24).unwrap());
        let r = fit_expansion(&c, 3, &FitStrategy::Joint).unwrap();
        let analytic: Vec<Option<f64>> = beta.iter().map(|b| Some(*b)).collect();
        let cmp = compare_report(&analytic, &r, "synthetic", "gaussian", |_| 1e-6);
        assert_eq!(cmp.coefficients.len(), 4);
        assert!(cmp.all_pass());
        let csv = cmp.to_csv();
        assert_eq!(csv.lines().count(), 5);
        let bad = compare_report(&[Some(2.0)], &r, "synthetic", "gaussian", |_| 1e-6);
        assert_eq!(bad.coefficients[0].pass, Some(false));
        let none = compare_report(&[None], &r, "synthetic", "gaussian", |_| 1e-6);
        assert_eq!(none.coefficients[0].pass, None);
    }

    #[test]
    fn polynomial_fit_derivatives() {
        let x: Vec<f64> = (1..=50).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v - 3.0 * v * v + 0.5 * v.powi(4)).collect();
        let p = polynomial_fit(&x, &y, &[0, 1, 2, 3, 4]).unwrap();
        assert!((p.derivative_at_zero(1) - 2.0).abs() < 1e-9);
        assert!((p.derivative_at_zero(2) + 6.0).abs() < 1e-8);
        assert!((p.derivative_at_zero(4) - 12.0).abs() < 1e-6);
    }
}
