//! Even Schwartz kernels `k`, their cosine transforms `k̂` and the
//! functionals `r_j` that turn wave-deficit Taylor coefficients into
//! half-power heat-content coefficients.
//!
//! Conventions: `k(x) = ∫_0^∞ k̂(s) cos(xs) ds`, hence
//! `k̂(s) = (2/π) ∫_0^∞ k(x) cos(sx) dx`. For the Gaussian `k(x) = e^{-x²}`
//! this gives `k̂(s) = e^{-s²/4} / √π`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::spline::CubicSpline;

/// Cut-off below which `k̂` counts as negligible, relative to `k̂(0)`.
pub const DECAY_THRESHOLD: f64 = 1e-16;

/// Floor used when `k̂` comes from numerical quadrature, whose rounding
/// noise sits near `5e-16 · k̂(0)`.
pub const NUMERIC_DECAY_THRESHOLD: f64 = 1e-15;

/// Odd-order integrands are replaced by their limit on `[0, SMALL_S]`.
const SMALL_S: f64 = 1e-4;

const POLY_EXP_MAX_ORDER: usize = 12;
const TABULATED_MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelShape {
    /// `k(x) = exp(-x^{2m})`; `m = 1` is the heat semigroup.
    PolyExp { m: u32 },
    /// Samples on `[0, x_max]`, interpolated by a cubic spline with zero slope
    /// at the origin and extended evenly; zero beyond `x_max`.
    Tabulated(TabulatedKernel),
    /// Finite linear combination `Σ c_i k_i`.
    Combination(Vec<(f64, KernelProfile)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    spline: CubicSpline,
    fd_step: f64,
}

impl TabulatedKernel {
    fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if x > self.spline.x_max() {
            0.0
        } else {
            self.spline.eval(x)
        }
    }

    /// j-th derivative by central differences of the interpolant, one
    /// Richardson step (fourth order in the step).
    fn derivative(&self, j: usize, x: f64) -> f64 {
        let d = |h: f64| -> f64 {
            let mut acc = 0.0;
            for i in 0..=j {
                let c = binomial(j, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
                acc += c * self.eval(x + (j as f64 / 2.0 - i as f64) * h);
            }
            acc / h.powi(j as i32)
        };
        let h = self.fd_step;
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelProfile {
    id: String,
    shape: KernelShape,
    max_derivative_order: usize,
    decay_scale: f64,
    /// Radius beyond which `k` and its supported derivatives are negligible.
    extent: f64,
}

impl fmt::Display for KernelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

impl KernelProfile {
    pub fn gaussian() -> Self {
        Self::poly_heat(1).expect("m = 1 is valid")
    }

    /// `k(x) = exp(-x^{2m})`, the kernel of `exp(-t^m (-Δ)^m)`.
    pub fn poly_heat(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("poly-heat kernel needs m >= 1"));
        }
        let id = if m == 1 { "gaussian".to_string() } else { format!("poly-heat-m{m}") };
        let extent = 60f64.powf(1.0 / (2.0 * m as f64)) + 1.0;
        let mut k = Self {
            id,
            shape: KernelShape::PolyExp { m },
            max_derivative_order: POLY_EXP_MAX_ORDER,
            decay_scale: f64::INFINITY,
            extent,
        };
        k.decay_scale = if m == 1 {
            // |k̂(s)/k̂(0)| = e^{-s²/4}
            2.0 * (-DECAY_THRESHOLD.ln()).sqrt()
        } else {
            k.search_decay_scale(1e4)
        };
        Ok(k)
    }

    /// Kernel from samples `(x_i, k_i)` with `x_0 = 0`, strictly increasing.
    pub fn tabulated(x: Vec<f64>, k: Vec<f64>) -> Result<Self> {
        if x.first().copied() != Some(0.0) {
            return Err(Error::config("tabulated kernel must start at x = 0"));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("tabulated kernel values must be finite"));
        }
        let min_dx = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let spline = CubicSpline::new(x, k, Some(0.0))?;
        let x_max = spline.x_max();
        let table = TabulatedKernel { spline, fd_step: (8.0 * min_dx).max(1e-3) };
        let mut kernel = Self {
            id: "tabulated".into(),
            shape: KernelShape::Tabulated(table),
            max_derivative_order: TABULATED_MAX_ORDER,
            decay_scale: f64::INFINITY,
            extent: x_max,
        };
        // A C² interpolant only has algebraic spectral decay; the table carries no
        // information above its Nyquist frequency.
        kernel.decay_scale = kernel.search_decay_scale(PI / min_dx);
        Ok(kernel)
    }

    pub fn combination(terms: Vec<(f64, KernelProfile)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::config("kernel combination needs at least one term"));
        }
        let id = terms
            .iter()
            .map(|(c, k)| format!("{c}*{}", k.id))
            .collect::<Vec<_>>()
            .join("+");
        let max_derivative_order = terms.iter().map(|(_, k)| k.max_derivative_order).min().unwrap_or(0);
        let decay_scale = terms.iter().map(|(_, k)| k.decay_scale).fold(0.0, f64::max);
        let extent = terms.iter().map(|(_, k)| k.extent).fold(0.0, f64::max);
        Ok(Self { id, shape: KernelShape::Combination(terms), max_derivative_order, decay_scale, extent })
    }

    /// `alpha · k`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self::combination(vec![(alpha, self.clone())]).expect("one term")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    pub fn max_derivative_order(&self) -> usize {
        self.max_derivative_order
    }

    /// Truncation radius for integrals against `k̂`.
    pub fn decay_scale(&self) -> f64 {
        self.decay_scale
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.shape, KernelShape::PolyExp { m: 1 })
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match &self.shape {
            KernelShape::PolyExp { m } => (-x.abs().powi(2 * *m as i32)).exp(),
            KernelShape::Tabulated(t) => t.eval(x),
            KernelShape::Combination(terms) => terms.iter().map(|(c, k)| c * k.evaluate(x)).sum(),
        }
    }

    fn check_order(&self, j: usize) -> Result<()> {
        if j > self.max_derivative_order {
            Err(Error::UnsupportedOrder { order: j, max: self.max_derivative_order })
        } else {
            Ok(())
        }
    }

    /// `k^{(j)}(x)`.
    pub fn derivative(&self, j: usize, x: f64) -> Result<f64> {
        self.check_order(j)?;
        Ok(match &self.shape {
            KernelShape::PolyExp { m } => poly_exp_derivatives(*m, j, x)[j],
            KernelShape::Tabulated(t) => t.derivative(j, x),
            KernelShape::Combination(terms) => {
                let mut acc = 0.0;
                for (c, k) in terms {
                    acc += c * k.derivative(j, x)?;
                }
                acc
            }
        })
    }

    /// `k^{(j)}(0)`: series coefficients for the analytic families, Richardson
    /// central differences for tabulated kernels.
    pub fn derivative_at_zero(&self, j: usize) -> Result<f64> {
        self.check_order(j)?;
        Ok(match &self.shape {
            KernelShape::PolyExp { m } => {
                // exp(-x^{2m}) = Σ_n (-1)^n x^{2mn} / n!
                let period = 2 * *m as usize;
                if !j.is_multiple_of(period) {
                    0.0
                } else {
                    let n = j / period;
                    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                    sign * factorial(j) / factorial(n)
                }
            }
            KernelShape::Tabulated(t) => {
                if j % 2 == 1 {
                    0.0
                } else {
                    t.derivative(j, 0.0)
                }
            }
            KernelShape::Combination(terms) => {
                let mut acc = 0.0;
                for (c, k) in terms {
                    acc += c * k.derivative_at_zero(j)?;
                }
                acc
            }
        })
    }

    /// `k̂(s)` for `s ≥ 0` (evaluated at `|s|`).
    pub fn cosine_transform_value(&self, s: f64) -> f64 {
        let s = s.abs();
        match &self.shape {
            KernelShape::PolyExp { m: 1 } => (-s * s / 4.0).exp() / PI.sqrt(),
            KernelShape::PolyExp { .. } | KernelShape::Tabulated(_) => {
                let x_max = self.extent;
                let panels = 8 + (s * x_max / (2.0 * PI)).ceil() as usize;
                2.0 / PI * quadrature::composite_gl(|x| self.evaluate(x) * (s * x).cos(), 0.0, x_max, panels)
            }
            KernelShape::Combination(terms) => terms.iter().map(|(c, k)| c * k.cosine_transform_value(s)).sum(),
        }
    }

    /// Doubling search for the first `s` past which `|k̂|` stays below the
    /// decay threshold times `k̂(0)`, then bisection inside the last bracket.
    fn search_decay_scale(&self, cap: f64) -> f64 {
        let floor = if self.is_gaussian() { DECAY_THRESHOLD } else { NUMERIC_DECAY_THRESHOLD };
        let threshold = floor * self.cosine_transform_value(0.0).abs();
        let quiet = |lo: f64, hi: f64| -> bool {
            (0..=128).all(|i| {
                let s = lo + (hi - lo) * i as f64 / 128.0;
                self.cosine_transform_value(s).abs() < threshold
            })
        };
        let mut s = 1.0;
        while !quiet(s, 2.0 * s) {
            s *= 2.0;
            if s >= cap {
                return cap;
            }
        }
        let (mut lo, hi) = (s / 2.0, s);
        let mut best = s;
        for _ in 0..30 {
            let mid = 0.5 * (lo + best);
            if quiet(mid, hi) {
                best = mid;
            } else {
                lo = mid;
            }
            if best - lo < 1e-6 * best {
                break;
            }
        }
        best.min(cap)
    }

    /// `r_j`: `(-1)^{j/2} k^{(j)}(0)` for even `j`,
    /// `(-1)^{(j-1)/2} ∫_0^∞ 2k^{(j)}(s) / (-πs) ds` for odd `j`.
    pub fn r_coefficient(&self, j: usize) -> Result<f64> {
        self.check_order(j)?;
        if j.is_multiple_of(2) {
            let sign = if (j / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
            return Ok(sign * self.derivative_at_zero(j)?);
        }
        let sign = if ((j - 1) / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        // k^{(j)} is odd, so k^{(j)}(s)/s → k^{(j+1)}(0) as s → 0.
        let limit = if j < self.max_derivative_order {
            Some(self.derivative_at_zero(j + 1)?)
        } else {
            None
        };
        let integrand = |s: f64| -> f64 {
            match limit {
                Some(l) if s < SMALL_S => 2.0 * l / (-PI),
                _ => 2.0 * self.derivative(j, s).unwrap_or(f64::NAN) / (-PI * s),
            }
        };
        let tol = match self.shape {
            KernelShape::Tabulated(_) => Tolerance::new(1e-9, 1e-9),
            _ => Tolerance::new(1e-12, 1e-12),
        };
        let r = quadrature::integrate(integrand, 0.0, self.extent, tol, &[SMALL_S], 20_000)?;
        Ok(sign * r.value)
    }

    /// `∫_0^∞ γ(s√t) k̂(s) ds`, truncated at the decay scale.
    pub fn transmutation_integral<G: Fn(f64) -> f64>(&self, gamma: G, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("transmutation needs t > 0, got {t}")));
        }
        let rt = t.sqrt();
        quadrature::integrate(
            |s| gamma(s * rt) * self.cosine_transform_value(s),
            0.0,
            self.decay_scale,
            Tolerance::new(1e-13, 1e-13),
            &[],
            20_000,
        )
        .map(|r| r.value)
    }
}

/// Derivatives `0..=j` of `exp(g)` with `g(x) = -|x|^{2m}` via
/// `y^{(n)} = Σ_k C(n-1, k) g^{(k+1)} y^{(n-1-k)}`.
fn poly_exp_derivatives(m: u32, j: usize, x: f64) -> Vec<f64> {
    let p = 2 * m as usize;
    let g_deriv = |k: usize| -> f64 {
        if k > p {
            0.0
        } else {
            // d^k/dx^k (-x^p) = -p!/(p-k)! x^{p-k}
            -factorial(p) / factorial(p - k) * x.powi((p - k) as i32)
        }
    };
    let mut y = vec![0.0; j + 1];
    y[0] = (-x.powi(p as i32)).exp();
    for n in 1..=j {
        let mut acc = 0.0;
        for k in 0..n {
            acc += binomial(n - 1, k) * g_deriv(k + 1) * y[n - 1 - k];
        }
        y[n] = acc;
    }
    y
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
