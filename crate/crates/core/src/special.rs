//! Special functions from `libm` (musl ports, accurate to a few ulp).

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // mpmath, 30 digits
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 2e-16);
        assert!((erfc(5.5) / 7.357_847_917_974_398e-15 - 1.0).abs() < 1e-14);
        assert!((gamma(0.75) - 1.225_416_702_465_177_6).abs() < 4e-16);
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 4e-16);
    }
}
