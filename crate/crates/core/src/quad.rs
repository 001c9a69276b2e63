//! Shared composite quadrature helpers.

/// Composite Simpson rule for `f` on [a, b] with the given number of panels.
pub(crate) fn composite_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 1, "need at least one panel");
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let left = a + p as f64 * h;
        acc += (f(left) + 4.0 * f(left + h / 2.0) + f(left + h)) * (h / 6.0);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_cubics_exactly() {
        let got = composite_simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 3);
        // Antiderivative x^4/4 - x^2 + x evaluated at the endpoints.
        let expect = (4.0 - 4.0 + 2.0) - (0.25 - 1.0 - 1.0);
        assert!((got - expect).abs() < 1e-13);
    }

    #[test]
    fn converges_on_transcendental_integrands() {
        let got = composite_simpson(f64::sin, 0.0, std::f64::consts::PI, 256);
        assert!((got - 2.0).abs() < 1e-10);
    }
}
