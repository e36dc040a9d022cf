//! Modified Bessel functions of the second kind, orders 0 and 1.
//!
//! Small arguments use the Temme series specialised to order zero; larger
//! arguments use Steed's evaluation of the CF2 continued fraction, which
//! yields `K0` and `K1` together.

use std::f64::consts::PI;

use crate::error::{PfnnError, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_ITER: usize = 500;

/// Value of a Bessel function at a positive argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub argument: f64,
    pub value: f64,
}

fn check_argument(z: f64) -> Result<()> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(PfnnError::InvalidArgument(format!(
            "modified Bessel K needs a finite positive argument, got {z}"
        )));
    }
    Ok(())
}

/// `K0(z)` for `z > 0`.
pub fn bessel_k0(z: f64) -> Result<f64> {
    check_argument(z)?;
    Ok(k0_k1(z).0)
}

/// `K1(z)` for `z > 0`.
pub fn bessel_k1(z: f64) -> Result<f64> {
    check_argument(z)?;
    Ok(k0_k1(z).1)
}

/// `K0(z)` wrapped with its argument.
pub fn k0_eval(z: f64) -> Result<BesselEval> {
    Ok(BesselEval {
        argument: z,
        value: bessel_k0(z)?,
    })
}

/// `(K0(z), K1(z))` without argument checks; `z` must be positive.
#[inline]
pub fn k0_k1(z: f64) -> (f64, f64) {
    debug_assert!(z > 0.0);
    if z <= 2.0 {
        series_k0_k1(z)
    } else {
        cf2_k0_k1(z)
    }
}

// Temme's series at order 0: f_k, p_k, q_k recursions with ν = 0.
fn series_k0_k1(x: f64) -> (f64, f64) {
    let a = (0.5 * x).ln();
    let mut p = 0.5;
    let mut q = 0.5;
    let mut f = -EULER_GAMMA - a;
    let mut h = p;
    let mut coef = 1.0;
    let mut sum = f;
    let mut sum1 = h;
    let quarter_x2 = 0.25 * x * x;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        f = (kf * f + p + q) / (kf * kf);
        p /= kf;
        q /= kf;
        h = p - kf * f;
        coef *= quarter_x2 / kf;
        sum += coef * f;
        sum1 += coef * h;
        if (coef * f).abs() < sum.abs() * f64::EPSILON * 0.5
            && (coef * h).abs() < sum1.abs() * f64::EPSILON * 0.5
        {
            break;
        }
    }
    (sum, 2.0 * sum1 / x)
}

// Steed's algorithm for U(1.5, 1, 2x)/U(0.5, 1, 2x), order 0.
fn cf2_k0_k1(x: f64) -> (f64, f64) {
    let mut a = -0.25;
    let mut b = 2.0 * (x + 1.0);
    let mut d = 1.0 / b;
    let mut delta = d;
    let mut f = d;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut q = -a;
    let mut c = -a;
    let mut s = 1.0 + q * delta;
    for k in 2..MAX_ITER {
        let kf = k as f64;
        a -= 2.0 * (kf - 1.0);
        b += 2.0;
        d = 1.0 / (a * d + b);
        delta *= b * d - 1.0;
        f += delta;
        let t = (prev - (b - 2.0) * cur) / a;
        prev = cur;
        cur = t;
        c *= -a / kf;
        q += c * t;
        s += q * delta;
        if (q * delta).abs() < s.abs() * f64::EPSILON * 0.5 {
            break;
        }
    }
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (0.5 + x - 0.25 * f) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn reference_values() {
        assert!(rel(bessel_k0(1.0).unwrap(), 0.421_024_438_240_708_3) < 1e-12);
        assert!(rel(bessel_k1(1.0).unwrap(), 0.601_907_230_197_234_6) < 1e-12);
        assert!(rel(bessel_k0(10.0).unwrap(), 1.778_006_231_616_765e-5) < 1e-10);
        assert!(rel(bessel_k1(10.0).unwrap(), 1.864_877_345_382_558_5e-5) < 1e-10);
    }

    #[test]
    fn small_argument_laws() {
        let z = 1e-3;
        assert!((bessel_k0(z).unwrap() - (-(0.5 * z).ln() - EULER_GAMMA)).abs() < 1e-5);
        assert!((bessel_k1(z).unwrap() * z - 1.0).abs() < 1e-5);
        let z = 1e-6;
        assert!((bessel_k0(z).unwrap() + (0.5 * z).ln() + EULER_GAMMA).abs() < 1e-4);
    }

    #[test]
    fn branch_continuity() {
        let lo = k0_k1(2.0);
        let hi = k0_k1(2.0 + 1e-12);
        assert!(rel(hi.0, lo.0) < 1e-11);
        assert!(rel(hi.1, lo.1) < 1e-11);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(bessel_k0(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
        assert!(bessel_k0(f64::NAN).is_err());
    }
}
