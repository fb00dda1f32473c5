//! Scalar helpers that stay accurate for particle numbers up to ~10^6.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::{Error, Result};

const SMALL_FACTORIAL: usize = 16;

fn small_ln_factorial(n: usize) -> f64 {
    // 15! < 2^53, so the product is exact.
    let mut prod = 1.0_f64;
    for i in 2..=n {
        prod *= i as f64;
    }
    prod.ln()
}

/// Correction term of Stirling's series: `ln n! - (ln(2 pi n)/2 + n ln n - n)`.
fn stirling_correction(n: f64) -> f64 {
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0
        - inv2
            * (1.0 / 360.0
                - inv2
                    * (1.0 / 1260.0
                        - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0 - inv2 * 691.0 / 360360.0)))))
}

/// `ln n!`, accurate to a few ulp.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < SMALL_FACTORIAL {
        return small_ln_factorial(n as usize);
    }
    let x = n as f64;
    0.5 * (2.0 * PI * x).ln() + x * x.ln() - x + stirling_correction(x)
}

/// `ln C(n, k)` without forming factorials.
///
/// Small `min(k, n - k)` uses a direct sum of logarithms; otherwise the
/// logarithm is assembled from entropy-form terms plus Stirling corrections,
/// which avoids the cancellation of `ln n! - ln k! - ln (n-k)!`.
pub fn log_binomial(n: i64, k: i64) -> Result<f64> {
    if n < 0 || k < 0 || k > n {
        return Err(Error::Domain(format!("log_binomial requires 0 <= k <= n, got n = {n}, k = {k}")));
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    if k == 0 {
        return Ok(0.0);
    }
    if (k as usize) < SMALL_FACTORIAL {
        let base = (n - k) as f64;
        return Ok((1..=k).map(|i| ((base + i as f64) / i as f64).ln()).sum());
    }
    let (nf, kf) = (n as f64, k as f64);
    let rest = nf - kf;
    let gaussian = 0.5 * (nf / (2.0 * PI * kf * rest)).ln();
    let entropy = kf * (nf / kf).ln() - rest * (-kf / nf).ln_1p();
    let corr = stirling_correction(nf) - stirling_correction(kf) - stirling_correction(rest);
    Ok(gaussian + entropy + corr)
}

/// `base^exponent` evaluated in polar form as `exp(exponent * ln base)`.
///
/// `0^0 = 1` by convention; `0^n = 0` for `n > 0`.
pub fn complex_pow(base: Complex64, exponent: u64) -> Complex64 {
    if exponent == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if base == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    let n = exponent as f64;
    Complex64::from_polar((n * base.norm().ln()).exp(), n * base.arg())
}

/// `exp(w) - 1` without cancellation for small `|w|`.
pub fn cexpm1(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let half_sin = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * half_sin * half_sin, a.exp() * b.sin())
}

/// `ln(1 + w)` without cancellation for small `|w|`.
pub fn clog1p(w: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p();
    let im = w.im.atan2(1.0 + w.re);
    Complex64::new(re, im)
}

/// `(exp(w) - 1) / w`, equal to 1 at `w = 0`.
///
/// Below `|w| = 1e-8` the three-term Taylor series is used.
pub fn phi1(w: Complex64) -> Complex64 {
    if w.norm() < 1e-8 {
        return Complex64::new(1.0, 0.0) + w * (0.5 + w / 6.0);
    }
    cexpm1(w) / w
}

/// A product kept as a complex logarithm, tracking exact zeros separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProduct {
    log: Complex64,
    zero: bool,
}

impl Default for LogProduct {
    fn default() -> Self {
        Self::one()
    }
}

impl LogProduct {
    pub fn one() -> Self {
        Self {
            log: Complex64::new(0.0, 0.0),
            zero: false,
        }
    }

    pub fn from_log(log: Complex64) -> Self {
        Self { log, zero: false }
    }

    /// Multiply by a non-negative real given through its logarithm.
    pub fn mul_log_real(mut self, ln_value: f64) -> Self {
        self.log.re += ln_value;
        self
    }

    /// Multiply by `base^exponent`.
    pub fn mul_pow(mut self, base: Complex64, exponent: u64) -> Self {
        if exponent == 0 {
            return self;
        }
        if base == Complex64::new(0.0, 0.0) {
            self.zero = true;
            return self;
        }
        self.log += base.ln() * exponent as f64;
        self
    }

    /// Multiply by `exp(ln_base * exponent)` for a precomputed logarithm.
    pub fn mul_pow_log(mut self, ln_base: Complex64, exponent: u64) -> Self {
        if exponent > 0 {
            self.log += ln_base * exponent as f64;
        }
        self
    }

    pub fn mul_pow2(self, exponent: i64) -> Self {
        self.mul_log_real(exponent as f64 * LN_2)
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn ln(&self) -> Option<Complex64> {
        (!self.zero).then_some(self.log)
    }

    pub fn value(&self) -> Complex64 {
        if self.zero {
            Complex64::new(0.0, 0.0)
        } else {
            self.log.exp()
        }
    }

    /// `value - 1`, accurate when the product is close to 1.
    pub fn value_minus_one(&self) -> Complex64 {
        if self.zero {
            Complex64::new(-1.0, 0.0)
        } else {
            cexpm1(self.log)
        }
    }
}
