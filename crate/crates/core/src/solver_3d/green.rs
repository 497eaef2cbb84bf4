use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Outgoing free-space Green's function `exp(i k r) / (4 pi r)`.
pub fn green(k: f64, x: [f64; 3], y: [f64; 3]) -> Result<Complex64> {
    let r = distance(x, y);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(green_r(k, r))
}

pub(crate) fn green_r(k: f64, r: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * r), k * r)
}

pub(crate) fn distance(x: [f64; 3], y: [f64; 3]) -> f64 {
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt()
}

/// Radius of the ball with the volume of a cube of side `h`.
pub fn equivalent_radius(h: f64) -> f64 {
    (3.0 / (4.0 * PI)).cbrt() * h
}

/// Integral of `g(k, |x|)` over the ball of radius `a` centered at the
/// singularity: `((1 - i k a) exp(i k a) - 1) / k^2`.
pub fn ball_integral(k: f64, a: f64) -> Complex64 {
    let ka = k * a;
    if ka.abs() < 0.5 {
        // sum_n (i k)^n a^{n+2} / (n! (n+2))
        let mut term = Complex64::new(a * a, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        let ika = Complex64::new(0.0, ka);
        for n in 0..40 {
            sum += term / (n as f64 + 2.0);
            term = term * ika / (n as f64 + 1.0);
        }
        sum
    } else {
        let ika = Complex64::new(0.0, ka);
        ((Complex64::new(1.0, 0.0) - ika) * ika.exp() - 1.0) / (k * k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_examples() {
        let g = green(0.0, [0.0; 3], [1.0, 0.0, 0.0]).unwrap();
        assert!((g - Complex64::new(1.0 / (4.0 * PI), 0.0)).norm() < 1e-16);
        let g = green(PI, [0.0; 3], [0.0, 0.0, 1.0]).unwrap();
        assert!((g - Complex64::new(-1.0 / (4.0 * PI), 0.0)).norm() < 1e-15);
        assert!(matches!(green(1.0, [1.0; 3], [1.0; 3]), Err(Error::CoincidentPoints)));
    }

    #[test]
    fn ball_integral_branches_agree() {
        let a = 0.3;
        for &k in &[1.6, 1.7, -1.7, 3.0] {
            let series = {
                let mut term = Complex64::new(a * a, 0.0);
                let mut sum = Complex64::new(0.0, 0.0);
                for n in 0..60 {
                    sum += term / (n as f64 + 2.0);
                    term = term * Complex64::new(0.0, k * a) / (n as f64 + 1.0);
                }
                sum
            };
            assert!((ball_integral(k, a) - series).norm() < 1e-14);
        }
        assert!((ball_integral(0.0, a) - Complex64::new(a * a / 2.0, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn ball_integral_matches_radial_quadrature() {
        let (k, a) = (2.3, 0.4);
        let rule = crate::quadrature::gauss_legendre_on(30, 0.0, a);
        let q: Complex64 = rule.iter().map(|&(r, w)| Complex64::from_polar(r * w, k * r)).sum();
        assert!((ball_integral(k, a) - q).norm() < 1e-14);
    }
}
