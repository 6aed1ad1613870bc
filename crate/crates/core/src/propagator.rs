//! Functions of the Laplacian on periodic lattices (Fourier multipliers) and
//! closed-form one-dimensional propagators on the line.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernel::KernelProfile;
use crate::quadrature::{self, Tolerance};
use crate::weight::{Point, Weight};

/// Real samples at the cell centres of a periodic lattice in one or two
/// dimensions. Values are stored with the x index running fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    dims: Vec<usize>,
    periods: Vec<f64>,
    origin: Vec<f64>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(dims: Vec<usize>, periods: Vec<f64>, origin: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 || periods.len() != dims.len() || origin.len() != dims.len() {
            return Err(Error::config("grid needs one or two axes with matching periods and origin"));
        }
        if dims.contains(&0) || periods.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::config("grid sizes and periods must be positive"));
        }
        if values.len() != dims.iter().product::<usize>() {
            return Err(Error::config(format!(
                "grid has {} values but dimensions {:?}",
                values.len(),
                dims
            )));
        }
        Ok(Self { dims, periods, origin, values })
    }

    pub fn from_fn<F: Fn(Point) -> f64 + Sync>(
        dims: Vec<usize>,
        periods: Vec<f64>,
        origin: Vec<f64>,
        f: F,
    ) -> Result<Self> {
        let mut g = Self::new(dims.clone(), periods, origin, vec![0.0; dims.iter().product()])?;
        let sites: Vec<Point> = (0..g.len()).map(|i| g.site(i)).collect();
        g.values.par_iter_mut().zip(sites.par_iter()).for_each(|(v, x)| *v = f(*x));
        Ok(g)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.dims[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dims.len()).map(|a| self.spacing(a)).product()
    }

    /// Lattice indices of a flat index.
    pub fn index(&self, flat: usize) -> [usize; 2] {
        [flat % self.dims[0], flat / self.dims[0]]
    }

    /// Cell centre of a flat index.
    pub fn site(&self, flat: usize) -> Point {
        let idx = self.index(flat);
        let mut x = [0.0; 2];
        for a in 0..self.dims.len() {
            x[a] = self.origin[a] + (idx[a] as f64 + 0.5) * self.spacing(a);
        }
        x
    }

    /// Lower and upper corner of the cell with a flat index.
    pub fn cell_bounds(&self, flat: usize) -> (Point, Point) {
        let idx = self.index(flat);
        let (mut lo, mut hi) = ([0.0; 2], [0.0; 2]);
        for a in 0..self.dims.len() {
            lo[a] = self.origin[a] + idx[a] as f64 * self.spacing(a);
            hi[a] = lo[a] + self.spacing(a);
        }
        (lo, hi)
    }

    pub fn same_lattice(&self, other: &GridField) -> bool {
        self.dims == other.dims && self.periods == other.periods && self.origin == other.origin
    }

    /// `∫ f g` by the midpoint rule.
    pub fn dot(&self, other: &GridField) -> f64 {
        debug_assert!(self.same_lattice(other));
        self.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn integral(&self) -> f64 {
        self.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self { values, ..self.clone() }
    }

    /// Angular frequency vector of a flat spectral index.
    pub fn frequency(&self, flat: usize) -> Point {
        let idx = self.index(flat);
        let mut xi = [0.0; 2];
        for a in 0..self.dims.len() {
            xi[a] = 2.0 * PI * signed_mode(idx[a], self.dims[a]) as f64 / self.periods[a];
        }
        xi
    }

    /// `|ξ|²` of a flat spectral index, computed from the integer mode numbers
    /// so that equal-norm modes on a square torus give bitwise-equal values.
    pub fn frequency_norm2(&self, flat: usize) -> f64 {
        let idx = self.index(flat);
        if self.dims.len() == 2 && self.periods[0] == self.periods[1] {
            let k0 = signed_mode(idx[0], self.dims[0]);
            let k1 = signed_mode(idx[1], self.dims[1]);
            let scale = 2.0 * PI / self.periods[0];
            scale * scale * (k0 * k0 + k1 * k1) as f64
        } else {
            let xi = self.frequency(flat);
            xi[0] * xi[0] + xi[1] * xi[1]
        }
    }
}

fn signed_mode(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    Arc::clone(map.entry((n, inverse)).or_insert_with(|| {
        let mut p = planner().lock().expect("fft planner poisoned");
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    }))
}

fn fft_rows(data: &mut [Complex64], row_len: usize, inverse: bool) {
    let fft = plan(row_len, inverse);
    data.par_chunks_mut(row_len).for_each(|row| fft.process(row));
}

fn transpose(data: &[Complex64], n0: usize, n1: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    out.par_chunks_mut(n1).enumerate().for_each(|(i0, row)| {
        for (i1, slot) in row.iter_mut().enumerate() {
            *slot = data[i1 * n0 + i0];
        }
    });
    out
}

fn fft_nd(data: &mut Vec<Complex64>, dims: &[usize], inverse: bool) {
    let n0 = dims[0];
    fft_rows(data, n0, inverse);
    if dims.len() == 2 {
        let n1 = dims[1];
        let mut t = transpose(data, n0, n1);
        fft_rows(&mut t, n1, inverse);
        *data = transpose(&t, n1, n0);
    }
}

/// Unnormalized forward DFT of a field.
pub fn forward(field: &GridField) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, &field.dims, false);
    data
}

/// Inverse of [`forward`], keeping the real part.
pub fn inverse(spectrum: Vec<Complex64>, like: &GridField) -> GridField {
    let mut data = spectrum;
    fft_nd(&mut data, &like.dims, true);
    let scale = 1.0 / data.len() as f64;
    like.with_values(data.iter().map(|c| c.re * scale).collect())
}

/// A real factor `m(|ξ|)` with a declared bound on `|m|`.
pub struct SpectralMultiplier {
    rule: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    bound: f64,
}

impl SpectralMultiplier {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(rule: F, bound: f64) -> Self {
        Self { rule: Box::new(rule), bound }
    }

    pub fn identity() -> Self {
        Self::new(|_| 1.0, 1.0)
    }

    pub fn heat(t: f64) -> Self {
        Self::new(move |xi| (-t * xi * xi).exp(), 1.0)
    }

    pub fn wave_cosine(s: f64) -> Self {
        Self::new(move |xi| (s * xi).cos(), 1.0)
    }

    pub fn eval(&self, xi: f64) -> f64 {
        (self.rule)(xi)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Multiply every Fourier mode by `m(ξ)` for the full frequency vector `ξ`.
pub fn apply_frequency_multiplier<M: Fn(Point) -> f64 + Sync>(field: &GridField, m: M) -> GridField {
    let mut spectrum = forward(field);
    spectrum.par_iter_mut().enumerate().for_each(|(i, c)| *c *= m(field.frequency(i)));
    inverse(spectrum, field)
}

pub fn apply_multiplier(field: &GridField, m: &SpectralMultiplier) -> GridField {
    let mut spectrum = forward(field);
    spectrum.par_iter_mut()
        .enumerate()
        .for_each(|(i, c)| *c *= m.eval(field.frequency_norm2(i).sqrt()));
    inverse(spectrum, field)
}

pub fn heat_semigroup(field: &GridField, t: f64) -> Result<GridField> {
    if t < 0.0 {
        return Err(Error::domain(format!("heat semigroup needs t >= 0, got {t}")));
    }
    Ok(apply_multiplier(field, &SpectralMultiplier::heat(t)))
}

pub fn wave_cosine(field: &GridField, s: f64) -> GridField {
    apply_multiplier(field, &SpectralMultiplier::wave_cosine(s))
}

/// `k(√(-tΔ))` applied to the field.
pub fn kernel_of_laplacian(field: &GridField, kernel: &KernelProfile, t: f64) -> Result<GridField> {
    if t < 0.0 {
        return Err(Error::domain(format!("kernel propagator needs t >= 0, got {t}")));
    }
    let k = kernel.clone();
    let rt = t.sqrt();
    Ok(apply_multiplier(field, &SpectralMultiplier::new(move |xi| k.evaluate(rt * xi), f64::INFINITY)))
}

/// Transfer factor undoing the box filter of cell-averaged data on both sides
/// of a pairing: `Π_i sinc(ξ_i h_i / 2)^{-2}`.
pub fn cell_average_correction(xi: Point, spacing: &[f64]) -> f64 {
    spacing
        .iter()
        .enumerate()
        .map(|(a, h)| {
            let z = 0.5 * xi[a] * h;
            if z == 0.0 {
                1.0
            } else {
                let s = z.sin() / z;
                1.0 / (s * s)
            }
        })
        .product()
}

/// `f·1_{[a,b]}` with the half-sum value at the endpoints.
fn truncated(a: f64, b: f64, f: &Weight, y: f64) -> f64 {
    if y > a && y < b {
        f.value([y, 0.0])
    } else if y == a || y == b {
        0.5 * f.value([y, 0.0])
    } else {
        0.0
    }
}

/// d'Alembert solution `u(s, x) = ½(g(x+s) + g(x-s))` of the wave equation on
/// the line with `g = f·1_{[a,b]}` and zero initial velocity.
pub fn dalembert_exact(a: f64, b: f64, f: &Weight, s: f64, x: f64) -> f64 {
    0.5 * (truncated(a, b, f, x + s) + truncated(a, b, f, x - s))
}

/// `∫_a^b (4πt)^{-1/2} e^{-(x-y)²/4t} f(y) dy` on the line.
pub fn heat_exact_1d(a: f64, b: f64, f: &Weight, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("heat_exact_1d needs t > 0, got {t}")));
    }
    let w = 40.0 * t.sqrt();
    let (lo, hi) = (a.max(x - w), b.min(x + w));
    if hi <= lo {
        return Ok(0.0);
    }
    let norm = 1.0 / (4.0 * PI * t).sqrt();
    let r = t.sqrt();
    let breaks: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0].iter().map(|k| x + k * r).collect();
    quadrature::integrate(
        |y| norm * (-(x - y) * (x - y) / (4.0 * t)).exp() * f.value([y, 0.0]),
        lo,
        hi,
        Tolerance::absolute(1e-12),
        &breaks,
        20_000,
    )
    .map(|q| q.value)
}
