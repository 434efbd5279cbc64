//! The importance-sampling toy target: an equally weighted two-component
//! normal mixture with means -1 and 1.5 and common variance 0.25, estimated
//! from a standard normal proposal. Its second moment is
//! 0.5(1 + 0.25) + 0.5(2.25 + 0.25) = 1.875 in closed form, which is what the
//! toy experiment reproduces.

use crate::scalar::Scalar;

/// Correctly normalized log-density of the toy mixture
/// `0.5 N(x; -1, 0.25) + 0.5 N(x; 1.5, 0.25)`.
pub fn toy_log_target<T: Scalar>(x: T) -> T {
    let sigma = T::half();
    let inv2s2 = T::one() / (T::two() * sigma * sigma);
    let d1 = (x + T::one()) * (x + T::one()) * inv2s2;
    let mean2 = T::from_f64_lossy(1.5);
    let d2 = (x - mean2) * (x - mean2) * inv2s2;
    // log(w/(sigma sqrt(2 pi))) + log-sum-exp of the two exponents
    let log_component_norm =
        (T::half() / (sigma * (T::two() * T::PI()).sqrt())).ln();
    let m = d1.min(d2);
    log_component_norm - m + (((m - d1).exp()) + ((m - d2).exp())).ln()
}

/// Log-density of the standard normal proposal.
pub fn log_standard_normal<T: Scalar>(x: T) -> T {
    -(x * x) / T::two() - (T::two() * T::PI()).sqrt().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson quadrature, the independent oracle for
    /// normalization checks.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
        let n = intervals + intervals % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn density_integrates_to_one() {
        let z = simpson(|x| toy_log_target(x).exp(), -9.0, 9.5, 8000);
        assert!((z - 1.0).abs() < 1e-10, "integral {z}");
    }

    #[test]
    fn symmetry_point_between_the_components() {
        // x = 0.25 is equidistant from both means, so the two half-weighted
        // components coincide and the mixture density equals one full
        // component density.
        let single = log_normal_pdf(0.25, -1.0, 0.25);
        assert!((toy_log_target(0.25f64) - single).abs() < 1e-12);
    }

    #[test]
    fn value_at_left_mode() {
        // Frozen from direct arithmetic:
        // log(0.5/sqrt(2 pi 0.25) + 0.5 N(-1; 1.5, 0.25)).
        assert!((toy_log_target(-1.0f64) - (-0.918_934_806_558_445)).abs() < 1e-12);
    }

    #[test]
    fn proposal_log_density_matches_direct_formula() {
        for x in [-3.0f64, -0.5, 0.0, 1.7] {
            assert!((log_standard_normal(x) - log_normal_pdf(x, 0.0, 1.0)).abs() < 1e-14);
        }
    }

    fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
        -0.5 * ((x - mean) * (x - mean) / var + (2.0 * std::f64::consts::PI * var).ln())
    }
}
