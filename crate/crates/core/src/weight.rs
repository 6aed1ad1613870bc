//! Smooth weights `f` with closed-form derivatives.
//!
//! Every built-in weight is a sum of terms `P(x - c) · g(x - c)` where `P` is a
//! polynomial and `g` is either 1 or a Gaussian `exp(-|u|² / 2σ²)`, plus
//! trigonometric modes `A cos(k·x + θ)`. Both families are closed under
//! differentiation, so gradients, Hessians and iterated Laplacians are exact.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Polynomial in two variables, exponents `(i, j)` for `u^i v^j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        let mut p = Self::default();
        p.add_term(c, 0, 0);
        p
    }

    pub fn monomial(c: f64, i: u32, j: u32) -> Self {
        let mut p = Self::default();
        p.add_term(c, i, j);
        p
    }

    pub fn add_term(&mut self, c: f64, i: u32, j: u32) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry((i, j)).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&(i, j));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        self.terms.iter().map(|(&(i, j), &c)| c * u.powi(i as i32) * v.powi(j as i32)).sum()
    }

    fn scaled(&self, s: f64) -> Self {
        let mut p = Self::default();
        for (&(i, j), &c) in &self.terms {
            p.add_term(s * c, i, j);
        }
        p
    }

    fn plus(mut self, other: &Self) -> Self {
        for (&(i, j), &c) in &other.terms {
            self.add_term(c, i, j);
        }
        self
    }

    fn times_monomial(&self, c: f64, di: u32, dj: u32) -> Self {
        let mut p = Self::default();
        for (&(i, j), &a) in &self.terms {
            p.add_term(c * a, i + di, j + dj);
        }
        p
    }

    pub fn partial(&self, axis: usize) -> Self {
        let mut p = Self::default();
        for (&(i, j), &c) in &self.terms {
            match axis {
                0 if i > 0 => p.add_term(c * i as f64, i - 1, j),
                1 if j > 0 => p.add_term(c * j as f64, i, j - 1),
                _ => {}
            }
        }
        p
    }
}

/// `P(x - c)` times an optional isotropic Gaussian of width `sigma` about `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyGauss {
    pub poly: Poly,
    pub center: Point,
    pub sigma: Option<f64>,
}

impl PolyGauss {
    fn eval(&self, x: Point, dim: usize) -> f64 {
        let u = x[0] - self.center[0];
        let v = if dim == 2 { x[1] - self.center[1] } else { 0.0 };
        let g = match self.sigma {
            Some(s) => (-(u * u + v * v) / (2.0 * s * s)).exp(),
            None => 1.0,
        };
        self.poly.eval(u, v) * g
    }

    /// `∂_axis (P g) = (∂P - u_axis P / σ²) g`.
    fn partial(&self, axis: usize) -> Self {
        let mut poly = self.poly.partial(axis);
        if let Some(s) = self.sigma {
            let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
            poly = poly.plus(&self.poly.times_monomial(-1.0 / (s * s), di, dj));
        }
        Self { poly, center: self.center, sigma: self.sigma }
    }

    fn laplacian(&self, dim: usize) -> Self {
        let mut out = Self { poly: Poly::default(), center: self.center, sigma: self.sigma };
        for axis in 0..dim {
            out.poly = out.poly.plus(&self.partial(axis).partial(axis).poly);
        }
        out
    }
}

/// `A cos(k·x + θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigMode {
    pub amplitude: f64,
    pub wave: Point,
    pub phase: f64,
}

impl TrigMode {
    fn eval(&self, x: Point, dim: usize) -> f64 {
        let kx = self.wave[0] * x[0] + if dim == 2 { self.wave[1] * x[1] } else { 0.0 };
        self.amplitude * (kx + self.phase).cos()
    }

    fn partial(&self, axis: usize) -> Self {
        Self {
            amplitude: self.amplitude * self.wave[axis],
            wave: self.wave,
            phase: self.phase + std::f64::consts::FRAC_PI_2,
        }
    }

    fn laplacian(&self, dim: usize) -> Self {
        let k2: f64 = self.wave[..dim].iter().map(|k| k * k).sum();
        Self { amplitude: -k2 * self.amplitude, wave: self.wave, phase: self.phase }
    }
}

#[derive(Clone)]
pub enum WeightTerm {
    PolyGauss(PolyGauss),
    Trig(TrigMode),
    /// Value-only weight; derivatives and Laplacians are unavailable.
    Opaque(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for WeightTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightTerm::PolyGauss(p) => p.fmt(f),
            WeightTerm::Trig(t) => t.fmt(f),
            WeightTerm::Opaque(_) => f.write_str("Opaque"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Weight {
    dim: usize,
    terms: Vec<WeightTerm>,
    label: String,
}

impl Weight {
    fn from_terms(dim: usize, terms: Vec<WeightTerm>, label: impl Into<String>) -> Self {
        Self { dim, terms, label: label.into() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::polynomial(dim, Poly::constant(c)).labelled(if c == 1.0 { "1".into() } else { format!("{c}") })
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, 1.0)
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_terms(dim, Vec::new(), "0")
    }

    /// Polynomial in the ambient coordinates.
    pub fn polynomial(dim: usize, poly: Poly) -> Self {
        Self::from_terms(
            dim,
            vec![WeightTerm::PolyGauss(PolyGauss { poly, center: [0.0; 2], sigma: None })],
            "poly",
        )
    }

    /// `x^i y^j` (with `j = 0` in one dimension).
    pub fn monomial(dim: usize, i: u32, j: u32) -> Self {
        let label = if dim == 1 { format!("x^{i}") } else { format!("x^{i}y^{j}") };
        Self::polynomial(dim, Poly::monomial(1.0, i, j)).labelled(label)
    }

    pub fn trig(dim: usize, amplitude: f64, wave: Point, phase: f64) -> Self {
        Self::from_terms(dim, vec![WeightTerm::Trig(TrigMode { amplitude, wave, phase })], "trig")
    }

    pub fn gaussian_bump(dim: usize, amplitude: f64, center: Point, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::config("gaussian bump needs sigma > 0"));
        }
        Ok(Self::from_terms(
            dim,
            vec![WeightTerm::PolyGauss(PolyGauss { poly: Poly::constant(amplitude), center, sigma: Some(sigma) })],
            "bump",
        ))
    }

    pub fn opaque<F: Fn(Point) -> f64 + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        Self::from_terms(dim, vec![WeightTerm::Opaque(Arc::new(f))], "opaque")
    }

    pub fn labelled(mut self, label: String) -> Self {
        self.label = label;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[WeightTerm] {
        &self.terms
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &Weight, beta: f64) -> Self {
        let mut terms: Vec<WeightTerm> = self.terms.iter().map(|t| scale_term(t, alpha)).collect();
        terms.extend(other.terms.iter().map(|t| scale_term(t, beta)));
        Self::from_terms(self.dim, terms, format!("{alpha}*{}+{beta}*{}", self.label, other.label))
    }

    pub fn value(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                WeightTerm::PolyGauss(p) => p.eval(x, self.dim),
                WeightTerm::Trig(m) => m.eval(x, self.dim),
                WeightTerm::Opaque(f) => f(x),
            })
            .sum()
    }

    fn map_terms<F, G>(&self, what: &str, poly: F, trig: G) -> Result<Self>
    where
        F: Fn(&PolyGauss) -> PolyGauss,
        G: Fn(&TrigMode) -> TrigMode,
    {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            terms.push(match t {
                WeightTerm::PolyGauss(p) => WeightTerm::PolyGauss(poly(p)),
                WeightTerm::Trig(m) => WeightTerm::Trig(trig(m)),
                WeightTerm::Opaque(_) => {
                    return Err(Error::UnsupportedWeight(format!("{what} of an opaque weight")));
                }
            });
        }
        Ok(Self::from_terms(self.dim, terms, format!("{what}({})", self.label)))
    }

    pub fn partial(&self, axis: usize) -> Result<Self> {
        if axis >= self.dim {
            return Err(Error::domain(format!("axis {axis} in dimension {}", self.dim)));
        }
        self.map_terms("partial", |p| p.partial(axis), |m| m.partial(axis))
    }

    pub fn laplacian(&self) -> Result<Self> {
        let d = self.dim;
        self.map_terms("laplacian", |p| p.laplacian(d), |m| m.laplacian(d))
    }

    /// `Δ^k f` as a weight.
    pub fn laplacian_power(&self, k: usize) -> Result<Self> {
        let mut w = self.clone();
        for _ in 0..k {
            w = w.laplacian()?;
        }
        Ok(w)
    }

    pub fn gradient(&self, x: Point) -> Result<Point> {
        let mut g = [0.0; 2];
        for (axis, slot) in g.iter_mut().enumerate().take(self.dim) {
            *slot = self.partial(axis)?.value(x);
        }
        Ok(g)
    }

    #[allow(clippy::needless_range_loop)]
    pub fn hessian(&self, x: Point) -> Result<[[f64; 2]; 2]> {
        let mut h = [[0.0; 2]; 2];
        for a in 0..self.dim {
            let da = self.partial(a)?;
            for b in 0..self.dim {
                h[a][b] = da.partial(b)?.value(x);
            }
        }
        Ok(h)
    }
}

fn scale_term(t: &WeightTerm, s: f64) -> WeightTerm {
    match t {
        WeightTerm::PolyGauss(p) => WeightTerm::PolyGauss(PolyGauss { poly: p.poly.scaled(s), ..p.clone() }),
        WeightTerm::Trig(m) => WeightTerm::Trig(TrigMode { amplitude: s * m.amplitude, ..m.clone() }),
        WeightTerm::Opaque(f) => {
            let f = Arc::clone(f);
            WeightTerm::Opaque(Arc::new(move |x| s * f(x)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_laplacian(w: &Weight, x: Point, h: f64) -> f64 {
        let mut acc = 0.0;
        for axis in 0..w.dim() {
            let mut p = x;
            let mut m = x;
            p[axis] += h;
            m[axis] -= h;
            acc += (w.value(p) - 2.0 * w.value(x) + w.value(m)) / (h * h);
        }
        acc
    }

    #[test]
    fn polynomial_laplacians() {
        let x4 = Weight::monomial(1, 4, 0);
        assert_eq!(x4.laplacian().unwrap().value([0.5, 0.0]), 12.0 * 0.25);
        assert_eq!(x4.laplacian_power(2).unwrap().value([0.3, 0.0]), 24.0);
        assert_eq!(x4.laplacian_power(3).unwrap().value([0.3, 0.0]), 0.0);
        let r2 = Weight::polynomial(2, {
            let mut p = Poly::monomial(1.0, 2, 0);
            p.add_term(1.0, 0, 2);
            p
        });
        assert_eq!(r2.laplacian().unwrap().value([0.1, -3.0]), 4.0);
        assert_eq!(r2.gradient([1.0, 0.0]).unwrap(), [2.0, 0.0]);
    }

    #[test]
    fn bump_and_trig_match_finite_differences() {
        let w = Weight::gaussian_bump(2, 1.3, [0.2, -0.1], 0.4)
            .unwrap()
            .combine(1.0, &Weight::trig(2, 0.7, [1.5, -2.0], 0.3), 1.0);
        let x = [0.35, 0.05];
        let lap = w.laplacian().unwrap().value(x);
        assert!((lap - fd_laplacian(&w, x, 1e-4)).abs() < 1e-5 * (1.0 + lap.abs()));
        let lap2 = w.laplacian_power(2).unwrap();
        let via_fd = fd_laplacian(&w.laplacian().unwrap(), x, 1e-4);
        assert!((lap2.value(x) - via_fd).abs() < 1e-4 * (1.0 + via_fd.abs()));
        let hess = w.hessian(x).unwrap();
        assert!((hess[0][1] - hess[1][0]).abs() < 1e-12);
        assert!((hess[0][0] + hess[1][1] - lap).abs() < 1e-12);
    }

    #[test]
    fn opaque_weight_has_no_laplacian() {
        let w = Weight::opaque(1, |x| x[0].abs());
        assert_eq!(w.value([-2.0, 0.0]), 2.0);
        assert!(matches!(w.laplacian(), Err(Error::UnsupportedWeight(_))));
    }

    #[test]
    fn combine_is_linear() {
        let f = Weight::monomial(1, 2, 0);
        let g = Weight::trig(1, 1.0, [3.0, 0.0], 0.0);
        let h = f.combine(2.0, &g, -0.5);
        let x = [0.7, 0.0];
        assert!((h.value(x) - (2.0 * f.value(x) - 0.5 * g.value(x))).abs() < 1e-15);
        let lh = h.laplacian().unwrap().value(x);
        let expect = 2.0 * f.laplacian().unwrap().value(x) - 0.5 * g.laplacian().unwrap().value(x);
        assert!((lh - expect).abs() < 1e-12);
    }
}
