//! Small numerical building blocks shared by the physics modules.

pub mod bessel;
pub mod quad;
pub mod spectral;
pub mod spline;

pub use bessel::bessel_j;
pub use quad::{gauss_legendre, Integrator};
pub use spline::CubicSpline;

/// Complete elliptic integral of the second kind E(k), modulus convention.
pub fn elliptic_e(k: f64) -> f64 {
    let k = k.abs();
    if k >= 1.0 {
        return 1.0;
    }
    let mut a = 1.0f64;
    let mut b = (1.0 - k * k).sqrt();
    let mut sum = 0.5 * k * k;
    let mut pow = 0.5;
    for _ in 0..40 {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
        if c.abs() < 1e-17 * a {
            break;
        }
    }
    std::f64::consts::FRAC_PI_2 / a * (1.0 - sum)
}

/// `(e^z - 1) / z`, accurate near zero.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// `(e^z - 1 - z) / z^2`, accurate near zero.
pub fn phi2(z: f64) -> f64 {
    if z.abs() < 0.1 {
        let mut term = 0.5;
        let mut sum = 0.5;
        for n in 3..20 {
            term *= z / n as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elliptic_e_reference_values() {
        assert!((elliptic_e(0.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        // E(1/sqrt 2) = 1.3506438810476755...
        assert!((elliptic_e(0.5f64.sqrt()) - 1.350_643_881_047_675_5).abs() < 1e-14);
        assert!((elliptic_e(0.999_999_999) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn phi_functions_are_continuous_at_switchover() {
        for &z in &[1e-5, -1e-5, 0.1, -0.1] {
            let lo = z * (1.0 - 1e-9);
            let hi = z * (1.0 + 1e-9);
            assert!((phi1(lo) - phi1(hi)).abs() < 1e-9);
            assert!((phi2(lo) - phi2(hi)).abs() < 1e-9);
        }
        assert!((phi2(-2.0) - ((-2.0f64).exp() - 1.0 + 2.0) / 4.0).abs() < 1e-15);
    }
}
