use std::f64::consts::PI;

use heatlab_core::asymptotics::{beta, fit_expansion, polynomial_fit, FitStrategy};
use heatlab_core::geometry::{AmbientSpace, DomainGeometry, Shape};
use heatlab_core::heat_content::{log_t_grid, ExactLine, Method, SpectralHeatContent, SpectralOptions};
use heatlab_core::kernel::KernelProfile;
use heatlab_core::propagator::heat_exact_1d;
use heatlab_core::quadrature::{integrate, Tolerance};
use heatlab_core::weight::Weight;
use proptest::prelude::*;

const SQRT_PI: f64 = 1.772_453_850_905_516;

fn interval(a: f64, b: f64) -> DomainGeometry {
    DomainGeometry::interval(a, b).unwrap()
}

#[test]
fn interval_scaling_law() {
    let g = KernelProfile::gaussian();
    let one = Weight::one(1);
    let base = ExactLine::new(&interval(0.0, 1.0), &one).unwrap();
    for lambda in [0.5, 2.0] {
        let scaled = ExactLine::new(&interval(0.0, lambda), &one).unwrap();
        for t in [1e-4, 1e-3, 1e-2, 0.1] {
            let lhs = scaled.heat_content(&g, t).unwrap();
            let rhs = lambda * base.heat_content(&g, t / (lambda * lambda)).unwrap();
            assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs(), "lambda={lambda} t={t}");
        }
        let d = interval(0.0, lambda);
        assert!((beta(&d, &one, &g, 0).unwrap() - lambda).abs() < 1e-14);
        assert!((beta(&d, &one, &g, 1).unwrap() + 2.0 / SQRT_PI).abs() < 1e-12);
    }
}

#[test]
fn disk_scaling_law() {
    let g = KernelProfile::gaussian();
    let one = Weight::one(2);
    let opts = SpectralOptions { grid_n: 256, ..Default::default() };
    let base = SpectralHeatContent::new(&DomainGeometry::disk(1.0, 8.0).unwrap(), &one, opts).unwrap();
    for lambda in [0.5, 2.0] {
        let d = DomainGeometry::disk(lambda, 8.0 * lambda).unwrap();
        let scaled = SpectralHeatContent::new(&d, &one, opts).unwrap();
        for t in [1e-3, 1e-2, 5e-2] {
            let lhs = scaled.direct(&g, t).unwrap();
            let rhs = lambda * lambda * base.direct(&g, t / (lambda * lambda)).unwrap();
            assert!((lhs - rhs).abs() <= 1e-6 * rhs.abs(), "lambda={lambda} t={t}: {lhs} vs {rhs}");
        }
        assert!((beta(&d, &one, &g, 0).unwrap() - PI * lambda * lambda).abs() < 1e-10);
        assert!((beta(&d, &one, &g, 1).unwrap() + 2.0 * SQRT_PI * lambda).abs() < 1e-10);
    }
}

#[test]
fn remainder_is_small_order() {
    let g = KernelProfile::gaussian();
    let d = interval(0.0, 1.0);
    let f = Weight::monomial(1, 4, 0);
    let e = ExactLine::new(&d, &f).unwrap();
    let c = e.curve(&g, &log_t_grid(1e-6, 1e-2, 12).unwrap()).unwrap();
    let b: Vec<f64> = (0..=3).map(|j| beta(&d, &f, &g, j).unwrap()).collect();
    for n in 1..=3 {
        let ratio = |i: usize| {
            let s = &c.samples[i];
            let rt = s.t.sqrt();
            let mut r = (e.mass() - b[0]) - s.loss;
            for (j, bj) in b.iter().enumerate().take(n + 1).skip(1) {
                r -= bj * rt.powi(j as i32);
            }
            (r / rt.powi(n as i32)).abs()
        };
        let (small, large) = (ratio(0), ratio(c.samples.len() - 1));
        assert!(small * 10.0 < large, "N={n}: {small:e} vs {large:e}");
    }
}

#[test]
fn deficit_derivatives_match_laplacian_integrals() {
    let d = interval(0.0, 1.0);
    let f = Weight::monomial(1, 4, 0);
    let e = ExactLine::new(&d, &f).unwrap();
    let s: Vec<f64> = (0..=60).map(|i| 0.005 * i as f64).collect();
    let h: Vec<f64> = s.iter().map(|&v| e.wave_deficit(v)).collect();
    let fit = polynomial_fit(&s, &h, &[0, 1, 2, 3, 4, 5]).unwrap();
    for j in [2usize, 4] {
        let lap = f.laplacian_power(j / 2).unwrap();
        let expected = -0.5 * d.volume_integral(|x| lap.value(x));
        let got = fit.derivative_at_zero(j);
        assert!((got - expected).abs() <= 1e-3 * expected.abs(), "j={j}: {got} vs {expected}");
    }
}

#[test]
fn exact_engine_agrees_with_pointwise_solution() {
    let g = KernelProfile::gaussian();
    let f = Weight::monomial(1, 2, 0);
    let e = ExactLine::new(&interval(0.0, 1.0), &f).unwrap();
    for t in [1e-3, 1e-2, 0.1] {
        let quad = integrate(
            |x| heat_exact_1d(0.0, 1.0, &f, t, x).unwrap(),
            0.0,
            1.0,
            Tolerance::new(1e-14, 1e-13),
            &[],
            10_000,
        )
        .unwrap()
        .value;
        assert!((quad - e.heat_content(&g, t).unwrap()).abs() < 1e-11, "t={t}");
    }
}

#[test]
fn spectral_disk_first_order_fit() {
    // Short times only: the t^{3/2} term is left out of an order-1 fit.
    let d = DomainGeometry::disk(1.0, 4.0).unwrap();
    let e = SpectralHeatContent::new(&d, &Weight::one(2), SpectralOptions { grid_n: 1024, ..Default::default() }).unwrap();
    let c = e.curve(&KernelProfile::gaussian(), &log_t_grid(1e-4, 1e-2, 12).unwrap(), Method::Direct).unwrap();
    let fit = fit_expansion(&c, 1, &FitStrategy::Joint).unwrap();
    let b1 = fit.beta(1).unwrap();
    assert!((b1 + 2.0 * SQRT_PI).abs() <= 1e-2 * 2.0 * SQRT_PI, "{b1}");
}

#[test]
fn one_dimensional_spectral_matches_exact() {
    let g = KernelProfile::gaussian();
    let f = Weight::monomial(1, 2, 0);
    let torus = DomainGeometry::new(Shape::Interval { a: 0.0, b: 1.0 }, AmbientSpace::torus(vec![8.0]).unwrap(), 2).unwrap();
    let spectral = SpectralHeatContent::new(&torus, &f, SpectralOptions { grid_n: 1 << 14, ..Default::default() }).unwrap();
    let exact = ExactLine::new(&interval(0.0, 1.0), &f).unwrap();
    for t in [1e-2, 5e-2, 0.2] {
        let a = spectral.direct(&g, t).unwrap();
        let b = exact.heat_content(&g, t).unwrap();
        assert!((a - b).abs() < 1e-6, "t={t}: {a} vs {b}");
    }
}

fn catalog(i: usize) -> Weight {
    match i % 4 {
        0 => Weight::one(2),
        1 => Weight::monomial(2, 2, 1),
        2 => Weight::trig(2, 0.7, [1.5, -0.5], 0.3),
        _ => Weight::gaussian_bump(2, 1.2, [0.1, -0.3], 0.6).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coefficients_linear_in_weight(a in -3.0f64..3.0, b in -3.0f64..3.0, i in 0usize..4, k in 0usize..4, j in 0usize..5) {
        let g = KernelProfile::gaussian();
        let d = DomainGeometry::with_default_ambient(Shape::Ellipse { center: [0.0; 2], a: 1.5, b: 1.0 }).unwrap();
        let (f, h) = (catalog(i), catalog(k + 1));
        let lhs = beta(&d, &f.combine(a, &h, b), &g, j).unwrap();
        let rhs = a * beta(&d, &f, &g, j).unwrap() + b * beta(&d, &h, &g, j).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn coefficients_linear_in_kernel(alpha in 0.1f64..5.0, j in 0usize..5, m in 1u32..4) {
        let k = KernelProfile::poly_heat(m).unwrap();
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        let f = catalog(3);
        let base = beta(&d, &f, &k, j).unwrap();
        let scaled = beta(&d, &f, &k.scaled(alpha), j).unwrap();
        prop_assert!((scaled - alpha * base).abs() <= 1e-12 * (1.0 + (alpha * base).abs()));
    }

    #[test]
    fn exact_heat_content_is_decreasing_for_positive_data(t in 1e-6f64..0.5) {
        let g = KernelProfile::gaussian();
        let e = ExactLine::new(&interval(0.0, 1.0), &Weight::one(1)).unwrap();
        let a = e.heat_content(&g, t).unwrap();
        let b = e.heat_content(&g, 1.1 * t).unwrap();
        prop_assert!(b < a && a < 1.0);
    }
}
