//! Heat content `Ω_{S,f}(t) = ∫_S k(√(-tΔ))(f 1_S) dV` by direct spectral
//! propagation, by wave transmutation, and exactly on the line; plus the
//! wave-deficit function `h(s)`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{DomainGeometry, Shape};
use crate::kernel::KernelProfile;
use crate::propagator::{self, GridField};
use crate::quadrature::{self, Tolerance};
use crate::special::erfc;
use crate::spline::CubicSpline;
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Direct,
    Transmuted,
    Exact1d,
    FromDeficit,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Transmuted => "transmuted",
            Method::Exact1d => "exact1d",
            Method::FromDeficit => "deficit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "transmuted" => Ok(Method::Transmuted),
            "exact1d" => Ok(Method::Exact1d),
            "deficit" => Ok(Method::FromDeficit),
            other => Err(Error::config(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub omega: f64,
    /// `Ω(0) - Ω(t)`, computed without cancellation where the engine allows.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatContentCurve {
    pub domain_id: String,
    pub kernel_id: String,
    pub weight_label: String,
    pub method: Method,
    pub samples: Vec<CurveSample>,
    /// `Ω(0) = ∫_S f dV` as computed by the engine.
    pub initial_mass: f64,
    pub grid_n: Option<usize>,
}

impl HeatContentCurve {
    pub fn new(
        domain_id: impl Into<String>,
        kernel_id: impl Into<String>,
        method: Method,
        samples: Vec<CurveSample>,
        initial_mass: f64,
    ) -> Result<Self> {
        if samples.iter().any(|s| !(s.t > 0.0)) {
            return Err(Error::domain("curve times must be positive"));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::domain("curve times must be strictly increasing"));
        }
        Ok(Self {
            domain_id: domain_id.into(),
            kernel_id: kernel_id.into(),
            weight_label: String::new(),
            method,
            samples,
            initial_mass,
            grid_n: None,
        })
    }

    pub fn ts(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.omega).collect()
    }

    /// Samples with `t` inside `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        Self {
            samples: self.samples.iter().copied().filter(|s| s.t >= lo && s.t <= hi).collect(),
            ..self.clone()
        }
    }
}

/// `per_decade` logarithmically spaced times from `t_min` to `t_max` inclusive.
pub fn log_t_grid(t_min: f64, t_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || per_decade == 0 {
        return Err(Error::config("t-grid needs 0 < t_min < t_max and at least one point per decade"));
    }
    let decades = (t_max / t_min).log10();
    let n = (decades * per_decade as f64).round() as usize;
    let n = n.max(1);
    Ok((0..=n).map(|i| t_min * 10f64.powf(decades * i as f64 / n as f64)).collect())
}

/// Sampled `h(s)` with cubic-spline interpolation between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveDeficitCurve {
    pub method: Method,
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    spline: CubicSpline,
}

impl WaveDeficitCurve {
    pub fn new(method: Method, s: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let spline = CubicSpline::new(s.clone(), h.clone(), None)?;
        Ok(Self { method, s, h, spline })
    }

    pub fn s_max(&self) -> f64 {
        self.spline.x_max()
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if s < self.spline.x_min() || s > self.spline.x_max() {
            return Err(Error::Coverage { needed: s, available: self.spline.x_max() });
        }
        Ok(self.spline.eval(s))
    }
}

/// `Ω(t) = ∫_0^∞ k̂(s) (mass - h(s√t)) ds` from a sampled deficit curve.
pub fn heat_content_from_deficit(
    deficit: &WaveDeficitCurve,
    mass: f64,
    kernel: &KernelProfile,
    t: f64,
) -> Result<f64> {
    let needed = kernel.decay_scale() * t.sqrt();
    if needed > deficit.s_max() {
        return Err(Error::Coverage { needed, available: deficit.s_max() });
    }
    let knots: Vec<f64> = Vec::new();
    let rt = t.sqrt();
    let loss = quadrature::integrate(
        |s| kernel.cosine_transform_value(s) * deficit.spline.eval(s * rt),
        0.0,
        kernel.decay_scale(),
        Tolerance::new(1e-13, 1e-13),
        &knots,
        20_000,
    )?
    .value;
    Ok(mass - loss)
}

/// Exact heat content of `f·1_{[a,b]}` on the real line.
#[derive(Debug, Clone)]
pub struct ExactLine {
    domain_id: String,
    a: f64,
    b: f64,
    f: Weight,
    mass: f64,
}

impl ExactLine {
    pub fn new(domain: &DomainGeometry, f: &Weight) -> Result<Self> {
        let (a, b) = match domain.shape() {
            Shape::Interval { a, b } => (*a, *b),
            other => return Err(Error::config(format!("exact1d engine needs an interval, got {}", other.name()))),
        };
        if domain.ambient().periods().is_some() {
            return Err(Error::config("exact1d engine needs the unbounded line as ambient space"));
        }
        if f.dim() != 1 {
            return Err(Error::config("exact1d engine needs a one-dimensional weight"));
        }
        let mass = Self::segment_integral(f, a, b);
        Ok(Self { domain_id: domain.id().to_string(), a, b, f: f.clone(), mass })
    }

    fn segment_integral(f: &Weight, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        quadrature::composite_gl(|y| f.value([y, 0.0]), lo, hi, 4)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `h(s) = ∫_{ℝ∖S} u(s, x) dx = ½[∫_a^{a+s} f + ∫_{b-s}^b f]` (clipped to S).
    pub fn wave_deficit(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        0.5 * (Self::segment_integral(&self.f, self.a, (self.a + s).min(self.b))
            + Self::segment_integral(&self.f, (self.b - s).max(self.a), self.b))
    }

    pub fn deficit_curve(&self, s_max: f64, n: usize) -> Result<WaveDeficitCurve> {
        let s: Vec<f64> = (0..=n).map(|i| s_max * i as f64 / n as f64).collect();
        let h = s.iter().map(|&v| self.wave_deficit(v)).collect();
        WaveDeficitCurve::new(Method::Exact1d, s, h)
    }

    /// `Ω(0) - Ω(t)`. Gaussian: `∫_S f(y) ½[erfc((y-a)/2√t) + erfc((b-y)/2√t)] dy`;
    /// other kernels: `∫ k̂(s) h(s√t) ds` with the exact deficit.
    pub fn loss(&self, kernel: &KernelProfile, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("heat content needs t > 0, got {t}")));
        }
        if !kernel.is_gaussian() {
            return kernel.transmutation_integral(|s| self.wave_deficit(s), t);
        }
        let w = 2.0 * t.sqrt();
        let tol = Tolerance::new(1e-300, 5e-14);
        let steps = [0.25, 0.5, 1.0, 2.0, 4.0];
        let left_end = (self.a + 9.0 * w).min(self.b);
        let left_breaks: Vec<f64> = steps.iter().map(|k| self.a + k * w).collect();
        let left = quadrature::integrate(
            |y| self.f.value([y, 0.0]) * 0.5 * erfc((y - self.a) / w),
            self.a,
            left_end,
            tol,
            &left_breaks,
            20_000,
        )?;
        let right_start = (self.b - 9.0 * w).max(self.a);
        let right_breaks: Vec<f64> = steps.iter().map(|k| self.b - k * w).collect();
        let right = quadrature::integrate(
            |y| self.f.value([y, 0.0]) * 0.5 * erfc((self.b - y) / w),
            right_start,
            self.b,
            tol,
            &right_breaks,
            20_000,
        )?;
        Ok(left.value + right.value)
    }

    pub fn heat_content(&self, kernel: &KernelProfile, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(self.mass);
        }
        Ok(self.mass - self.loss(kernel, t)?)
    }

    pub fn curve(&self, kernel: &KernelProfile, ts: &[f64]) -> Result<HeatContentCurve> {
        let samples = ts
            .par_iter()
            .map(|&t| {
                let loss = self.loss(kernel, t)?;
                Ok(CurveSample { t, omega: self.mass - loss, loss })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut c = HeatContentCurve::new(&self.domain_id, kernel.id(), Method::Exact1d, samples, self.mass)?;
        c.weight_label = self.f.label().to_string();
        Ok(c)
    }
}

/// Options of the spectral engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Lattice points per axis.
    pub grid_n: usize,
    /// Undo the box filter of the cell-averaged data (multiplier `Π sinc^{-2}`).
    pub cell_average_correction: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { grid_n: 1024, cell_average_correction: true }
    }
}

/// Spectral heat content on a periodic lattice. The datum `a = f·χ` and the
/// test field `χ` (subcell indicator of S) are paired through Fourier space.
#[derive(Debug, Clone)]
pub struct SpectralHeatContent {
    domain_id: String,
    weight_label: String,
    options: SpectralOptions,
    datum: GridField,
    indicator: GridField,
    /// Radial cross spectrum: `(|ξ|, Σ_{|ξ'|=|ξ|} c(ξ') Re(â conj χ̂) h^d / N)`.
    cross: Vec<(f64, f64)>,
    pairing_at_zero: f64,
}

impl SpectralHeatContent {
    pub fn new(domain: &DomainGeometry, f: &Weight, options: SpectralOptions) -> Result<Self> {
        let periods = domain
            .ambient()
            .periods()
            .ok_or_else(|| Error::config("spectral engine needs a torus ambient space"))?
            .to_vec();
        if options.grid_n < 8 {
            return Err(Error::config("grid_n must be at least 8"));
        }
        if f.dim() != domain.dimension() {
            return Err(Error::config("weight and domain dimensions differ"));
        }
        let dim = domain.dimension();
        let center = domain.shape().center();
        let origin: Vec<f64> = (0..dim).map(|a| center[a] - 0.5 * periods[a]).collect();
        let dims = vec![options.grid_n; dim];
        let mut indicator = GridField::new(dims.clone(), periods.clone(), origin.clone(), vec![0.0; options.grid_n.pow(dim as u32)])?;
        let cell = indicator.cell_volume();
        let fractions: Vec<f64> = (0..indicator.len())
            .into_par_iter()
            .map(|i| {
                let (lo, hi) = indicator.cell_bounds(i);
                match domain.far_cell_state(lo, hi) {
                    Some(true) => 1.0,
                    Some(false) => 0.0,
                    None => (domain.cell_measure(lo, hi) / cell).clamp(0.0, 1.0),
                }
            })
            .collect();
        indicator.values_mut().copy_from_slice(&fractions);
        let datum_values: Vec<f64> = (0..indicator.len())
            .into_par_iter()
            .map(|i| if fractions[i] == 0.0 { 0.0 } else { f.value(indicator.site(i)) * fractions[i] })
            .collect();
        let datum = indicator.with_values(datum_values);

        let a_hat = propagator::forward(&datum);
        let b_hat = propagator::forward(&indicator);
        let spacing: Vec<f64> = (0..dim).map(|a| indicator.spacing(a)).collect();
        let norm = cell / indicator.len() as f64;
        let mut groups: BTreeMap<u64, f64> = BTreeMap::new();
        for i in 0..indicator.len() {
            let xi2 = indicator.frequency_norm2(i);
            let corr = if options.cell_average_correction {
                propagator::cell_average_correction(indicator.frequency(i), &spacing)
            } else {
                1.0
            };
            let c = (a_hat[i] * b_hat[i].conj()).re * corr * norm;
            *groups.entry(xi2.to_bits()).or_insert(0.0) += c;
        }
        let cross: Vec<(f64, f64)> = groups.into_iter().map(|(k, c)| (f64::from_bits(k).sqrt(), c)).collect();
        let pairing_at_zero = cross.iter().map(|(_, c)| c).sum();
        Ok(Self {
            domain_id: domain.id().to_string(),
            weight_label: f.label().to_string(),
            options,
            datum,
            indicator,
            cross,
            pairing_at_zero,
        })
    }

    pub fn datum(&self) -> &GridField {
        &self.datum
    }

    pub fn indicator(&self) -> &GridField {
        &self.indicator
    }

    pub fn options(&self) -> SpectralOptions {
        self.options
    }

    /// `∫_S f dV` from the subcell datum (exact for `f ≡ 1`).
    pub fn initial_mass(&self) -> f64 {
        self.datum.integral()
    }

    /// `⟨a, χ⟩` in the (corrected) grid pairing, the `s = 0` value of the
    /// wave pairing. Differs from the mass by unresolved jump energy.
    pub fn pairing_at_zero(&self) -> f64 {
        self.pairing_at_zero
    }

    fn correction(&self) -> impl Fn([f64; 2]) -> f64 + Sync + '_ {
        let spacing: Vec<f64> = (0..self.datum.dims().len()).map(|a| self.datum.spacing(a)).collect();
        let on = self.options.cell_average_correction;
        move |xi| if on { propagator::cell_average_correction(xi, &spacing) } else { 1.0 }
    }

    /// `⟨m(√(-Δ)) a, χ⟩` from the radial cross spectrum.
    pub fn pairing<M: Fn(f64) -> f64>(&self, m: M) -> f64 {
        self.cross.iter().map(|&(xi, c)| m(xi) * c).sum()
    }

    /// Propagate the datum with `k(√(-tΔ))` and integrate against `χ`.
    pub fn direct(&self, kernel: &KernelProfile, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::domain(format!("heat content needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            // k(0) = 1 and the datum already carries the indicator.
            return Ok(self.initial_mass());
        }
        let rt = t.sqrt();
        let corr = self.correction();
        let field = propagator::apply_frequency_multiplier(&self.datum, |xi| {
            kernel.evaluate(rt * xi[0].hypot(xi[1])) * corr(xi)
        });
        Ok(field.dot(&self.indicator))
    }

    /// `∫_0^∞ k̂(s) ⟨W_{s√t} a, χ⟩ ds` by adaptive quadrature over `s`.
    pub fn transmuted(&self, kernel: &KernelProfile, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("transmuted route needs t > 0, got {t}")));
        }
        let scale = self.pairing_at_zero.abs().max(1e-300);
        let rt = t.sqrt();
        quadrature::integrate(
            |s| kernel.cosine_transform_value(s) * self.pairing(|xi| (s * rt * xi).cos()),
            0.0,
            kernel.decay_scale(),
            Tolerance::new(1e-13 * scale, 1e-13),
            &[],
            100_000,
        )
        .map(|r| r.value)
    }

    /// `h(s) = ⟨a, χ⟩ - ⟨W_s a, χ⟩`: the mass the wave carries out of S, counted
    /// from its value at `s = 0` (on the torus `⟨W_s a, 1⟩` is conserved).
    pub fn wave_deficit(&self, s: f64) -> f64 {
        self.pairing(|xi| 1.0 - (s * xi).cos())
    }

    /// The same deficit by propagating the field and integrating it over the
    /// complement of S.
    pub fn wave_deficit_field(&self, s: f64) -> f64 {
        let corr = self.correction();
        let field = propagator::apply_frequency_multiplier(&self.datum, |xi| (s * xi[0].hypot(xi[1])).cos() * corr(xi));
        let at_zero = propagator::apply_frequency_multiplier(&self.datum, &corr);
        let outside = self.indicator.with_values(self.indicator.values().iter().map(|c| 1.0 - c).collect());
        field.dot(&outside) - at_zero.dot(&outside)
    }

    pub fn deficit_curve(&self, s_max: f64, n: usize) -> Result<WaveDeficitCurve> {
        let s: Vec<f64> = (0..=n).map(|i| s_max * i as f64 / n as f64).collect();
        let h = s.par_iter().map(|&v| self.wave_deficit(v)).collect();
        WaveDeficitCurve::new(Method::FromDeficit, s, h)
    }

    pub fn curve(&self, kernel: &KernelProfile, ts: &[f64], method: Method) -> Result<HeatContentCurve> {
        let p0 = self.initial_mass();
        let samples = match method {
            Method::Direct => ts
                .iter()
                .map(|&t| {
                    let omega = self.direct(kernel, t)?;
                    Ok(CurveSample { t, omega, loss: p0 - omega })
                })
                .collect::<Result<Vec<_>>>()?,
            Method::Transmuted => ts
                .par_iter()
                .map(|&t| {
                    let omega = self.transmuted(kernel, t)?;
                    Ok(CurveSample { t, omega, loss: p0 - omega })
                })
                .collect::<Result<Vec<_>>>()?,
            Method::FromDeficit => {
                let t_max = ts.iter().copied().fold(0.0, f64::max);
                let s_max = kernel.decay_scale() * t_max.sqrt() * 1.01;
                let xi_max = self.cross.last().map(|c| c.0).unwrap_or(1.0);
                let n = ((s_max * xi_max * 4.0).ceil() as usize).clamp(256, 200_000);
                let deficit = self.deficit_curve(s_max, n)?;
                ts.par_iter()
                    .map(|&t| {
                        let omega = heat_content_from_deficit(&deficit, self.pairing_at_zero, kernel, t)?;
                        Ok(CurveSample { t, omega, loss: p0 - omega })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            Method::Exact1d => return Err(Error::config("the spectral engine does not provide exact1d curves")),
        };
        let mut c = HeatContentCurve::new(&self.domain_id, kernel.id(), method, samples, p0)?;
        c.weight_label = self.weight_label.clone();
        c.grid_n = Some(self.options.grid_n);
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AmbientSpace;
    use crate::special::erf;
    use std::f64::consts::PI;

    fn interval_on_torus(n: usize) -> SpectralHeatContent {
        let d = DomainGeometry::new(Shape::Interval { a: 0.0, b: 1.0 }, AmbientSpace::torus(vec![8.0]).unwrap(), 2).unwrap();
        SpectralHeatContent::new(&d, &Weight::one(1), SpectralOptions { grid_n: n, cell_average_correction: true }).unwrap()
    }

    #[test]
    fn exact_line_matches_closed_form() {
        let d = DomainGeometry::interval(0.0, 1.0).unwrap();
        let e = ExactLine::new(&d, &Weight::one(1)).unwrap();
        let g = KernelProfile::gaussian();
        for &t in &[1e-8, 1e-4, 1e-2, 0.3] {
            let closed = erf(1.0 / (2.0 * f64::sqrt(t))) - 2.0 * (t / PI).sqrt() * (1.0 - (-1.0 / (4.0 * t)).exp());
            let got = e.heat_content(&g, t).unwrap();
            assert!((got - closed).abs() < 1e-14, "t={t}: {got} vs {closed}");
        }
        assert!((e.heat_content(&g, 1e-4).unwrap() - 0.988_716_208_329_044_9).abs() < 1e-15);
    }

    #[test]
    fn exact_line_x_squared_expansion() {
        // Ω = 1/3 - √(t/π) + t - (8/(3√π)) t^{3/2} up to e^{-1/4t}
        let d = DomainGeometry::interval(0.0, 1.0).unwrap();
        let e = ExactLine::new(&d, &Weight::monomial(1, 2, 0)).unwrap();
        let g = KernelProfile::gaussian();
        for &t in &[1e-8, 1e-6, 1e-4, 1e-3] {
            let series = 1.0 / 3.0 - (t / PI).sqrt() + t - 8.0 / (3.0 * PI.sqrt()) * t.powf(1.5);
            let got = e.heat_content(&g, t).unwrap();
            assert!((got - series).abs() < 5e-16 + 1e-14 * e.loss(&g, t).unwrap(), "t={t}: {got} vs {series}");
        }
    }

    #[test]
    fn exact_line_agrees_with_pointwise_heat_solution() {
        let d = DomainGeometry::interval(0.0, 1.0).unwrap();
        let f = Weight::monomial(1, 2, 0).combine(1.0, &Weight::trig(1, 0.5, [3.0, 0.0], 0.2), 1.0);
        let e = ExactLine::new(&d, &f).unwrap();
        let t = 2e-3;
        let direct = quadrature::integrate(
            |x| crate::propagator::heat_exact_1d(0.0, 1.0, &f, t, x).unwrap(),
            0.0,
            1.0,
            Tolerance::new(1e-13, 1e-13),
            &[0.01, 0.99],
            20_000,
        )
        .unwrap()
        .value;
        assert!((direct - e.heat_content(&KernelProfile::gaussian(), t).unwrap()).abs() < 1e-11);
    }

    #[test]
    fn exact_deficit_examples() {
        let d = DomainGeometry::interval(0.0, 1.0).unwrap();
        let e = ExactLine::new(&d, &Weight::one(1)).unwrap();
        assert_eq!(e.wave_deficit(0.0), 0.0);
        assert!((e.wave_deficit(0.01) - 0.01).abs() < 1e-15);
        // integrate the d'Alembert field over the complement directly
        let f = Weight::monomial(1, 2, 0);
        let e2 = ExactLine::new(&d, &f).unwrap();
        let s = 0.2;
        let outside = |lo: f64, hi: f64| {
            quadrature::integrate(
                |x| crate::propagator::dalembert_exact(0.0, 1.0, &f, s, x),
                lo,
                hi,
                Tolerance::new(1e-14, 1e-14),
                &[],
                1000,
            )
            .unwrap()
            .value
        };
        let h = outside(-1.0, 0.0) + outside(1.0, 2.0);
        assert!((h - e2.wave_deficit(s)).abs() < 1e-14);
    }

    #[test]
    fn deficit_route_matches_exact_route() {
        let d = DomainGeometry::interval(0.0, 1.0).unwrap();
        let e = ExactLine::new(&d, &Weight::one(1)).unwrap();
        let g = KernelProfile::gaussian();
        let curve = e.deficit_curve(2.0, 4000).unwrap();
        for &t in &[1e-4, 1e-3, 1e-2] {
            let a = heat_content_from_deficit(&curve, e.mass(), &g, t).unwrap();
            let b = e.heat_content(&g, t).unwrap();
            assert!((a - b).abs() <= 1e-6, "t={t}: {a} vs {b}");
        }
        assert!(matches!(heat_content_from_deficit(&curve, 1.0, &g, 0.1), Err(Error::Coverage { .. })));
    }

    #[test]
    fn spectral_routes_agree_on_interval() {
        let sp = interval_on_torus(4096);
        let g = KernelProfile::gaussian();
        let m0 = sp.initial_mass();
        assert!((m0 - 1.0).abs() < 1e-14, "{m0}");
        for &t in &[1e-4, 1e-3, 1e-2] {
            let d = sp.direct(&g, t).unwrap();
            let tr = sp.transmuted(&g, t).unwrap();
            assert!((d - tr).abs() <= 1e-8 * m0, "t={t}: {d} vs {tr}");
            assert!((d - sp.pairing(|xi| (-t * xi * xi).exp())).abs() < 1e-12);
        }
        assert!((sp.direct(&g, 0.0).unwrap() - m0).abs() < 1e-12);
    }

    #[test]
    fn spectral_interval_converges_to_exact_line() {
        // the torus images sit 7 units away, e^{-49/4t} below rounding
        let exact = ExactLine::new(&DomainGeometry::interval(0.0, 1.0).unwrap(), &Weight::one(1)).unwrap();
        let g = KernelProfile::gaussian();
        let t = 1e-3;
        let b = exact.heat_content(&g, t).unwrap();
        let err = |n| (interval_on_torus(n).direct(&g, t).unwrap() - b).abs();
        let (coarse, fine) = (err(2048), err(8192));
        assert!(coarse < 1e-4 && fine < coarse / 10.0, "{coarse} -> {fine}");
    }

    #[test]
    fn spectral_deficit_pairing_matches_field_integral() {
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        let sp = SpectralHeatContent::new(&d, &Weight::one(2), SpectralOptions { grid_n: 256, cell_average_correction: true }).unwrap();
        assert_eq!(sp.wave_deficit(0.0), 0.0);
        for &s in &[0.05, 0.2] {
            assert!((sp.wave_deficit(s) - sp.wave_deficit_field(s)).abs() < 1e-10);
        }
        assert!((sp.initial_mass() - PI).abs() < 1e-12);
    }

    #[test]
    fn cauchy_schwarz_ceiling_exact_line() {
        let d = DomainGeometry::interval(0.0, 1.0).unwrap();
        let f = Weight::monomial(1, 2, 0).combine(1.0, &Weight::one(1), 1.0);
        let e = ExactLine::new(&d, &f).unwrap();
        for i in 1..=40 {
            let s = 0.5 * i as f64 / 40.0;
            let inner = ExactLine::segment_integral(&Weight::opaque(1, {
                let f = f.clone();
                move |x| f.value(x).powi(2)
            }), 0.0, s) + ExactLine::segment_integral(&Weight::opaque(1, {
                let f = f.clone();
                move |x| f.value(x).powi(2)
            }), 1.0 - s, 1.0);
            let ceiling = inner.sqrt() * d.tube_volume(s).unwrap().sqrt();
            assert!(e.wave_deficit(s) <= ceiling + 1e-15);
        }
    }

    #[test]
    fn heat_content_is_monotone_for_positive_weights() {
        let d = DomainGeometry::interval(0.0, 1.0).unwrap();
        let e = ExactLine::new(&d, &Weight::monomial(1, 2, 0).combine(1.0, &Weight::one(1), 0.5)).unwrap();
        let ts = log_t_grid(1e-6, 1e-1, 24).unwrap();
        let c = e.curve(&KernelProfile::gaussian(), &ts).unwrap();
        assert_eq!(c.samples.len(), 121);
        for s in &c.samples {
            assert!(s.omega <= c.initial_mass + 1e-9);
        }
        assert!(c.samples.windows(2).all(|w| w[1].omega <= w[0].omega));
    }

    #[test]
    fn curve_validation() {
        let s = |t| CurveSample { t, omega: 1.0, loss: 0.0 };
        assert!(HeatContentCurve::new("d", "k", Method::Direct, vec![s(0.1), s(0.05)], 1.0).is_err());
        assert!(HeatContentCurve::new("d", "k", Method::Direct, vec![s(0.0)], 1.0).is_err());
        assert!(log_t_grid(1e-3, 1e-4, 24).is_err());
    }
}
