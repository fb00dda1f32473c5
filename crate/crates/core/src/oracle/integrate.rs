//! Explicit Runge-Kutta integrators on flat state vectors.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::{Error, Result};

/// Scalar type a state vector can be made of.
pub trait OdeScalar: Copy + Add<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    const ZERO: Self;
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    const ZERO: Self = 0.0;
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
    /// Largest step the controller may take.
    pub dt_max: f64,
    /// Steps below this size count as underflow.
    pub dt_min: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            atol: 1e-13,
            rtol: 1e-11,
            dt_max: f64::INFINITY,
            dt_min: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

// y <- y + sum_j c_j k_j
fn combine<T: OdeScalar>(out: &mut [T], y: &[T], h: f64, terms: &[(f64, &[T])]) {
    for i in 0..y.len() {
        let mut acc = T::ZERO;
        for (c, k) in terms {
            if *c != 0.0 {
                acc = acc + k[i] * *c;
            }
        }
        out[i] = y[i] + acc * h;
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights are A[6] (FSAL); these are 5th minus 4th order.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) from `t0` to `t1`, in place.
///
/// `rhs(t, y, dy)` must fill `dy`. The per-step local error estimate is
/// kept below `atol + rtol * |y|` component-wise.
pub fn dormand_prince<T: OdeScalar>(
    rhs: &mut dyn FnMut(f64, &[T], &mut [T]),
    y: &mut Vec<T>,
    t0: f64,
    t1: f64,
    tol: &Tolerance,
) -> Result<StepStats> {
    let n = y.len();
    let mut stats = StepStats::default();
    if t1 <= t0 {
        return Ok(stats);
    }
    let mut k: Vec<Vec<T>> = (0..7).map(|_| vec![T::ZERO; n]).collect();
    let mut stage = vec![T::ZERO; n];
    let mut y_new = vec![T::ZERO; n];
    let mut t = t0;
    rhs(t, y, &mut k[0]);

    // Initial step from the derivative scale.
    let scale = |v: &[T], w: &[T]| {
        v.iter()
            .zip(w)
            .map(|(a, b)| a.magnitude() / (tol.atol + tol.rtol * b.magnitude()))
            .fold(0.0, f64::max)
    };
    let (d0, d1) = (scale(y, y), scale(&k[0], y));
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * (t1 - t0) } else { 0.01 * d0 / d1 };
    h = h.min(tol.dt_max).min(t1 - t0);

    while t < t1 {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            let terms: Vec<(f64, &[T])> = (0..s).map(|j| (A[s][j], k[j].as_slice())).collect();
            combine(&mut stage, y, h, &terms);
            rhs(t + C[s] * h, &stage, &mut k[s]);
        }
        // Stage 6 input is the 5th-order solution itself (FSAL).
        y_new.copy_from_slice(&stage);
        let mut err = 0.0_f64;
        for i in 0..n {
            let mut e = T::ZERO;
            for (s, ks) in k.iter().enumerate() {
                if E[s] != 0.0 {
                    e = e + ks[i] * E[s];
                }
            }
            let sc = tol.atol + tol.rtol * y[i].magnitude().max(y_new[i].magnitude());
            err = err.max((e * h).magnitude() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Integration {
                t,
                step: h,
                detail: "non-finite error estimate".into(),
            });
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            std::mem::swap(y, &mut y_new);
            k.swap(0, 6);
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(tol.dt_max);
        if h < tol.dt_min * t1.abs().max(1.0) && t < t1 {
            return Err(Error::Integration {
                t,
                step: h,
                detail: format!("step size underflow after {} accepted steps", stats.accepted),
            });
        }
    }
    Ok(stats)
}

/// Classical fixed-step RK4 from `t0` to `t1` with `steps` equal steps.
pub fn rk4<T: OdeScalar>(
    rhs: &mut dyn FnMut(f64, &[T], &mut [T]),
    y: &mut [T],
    t0: f64,
    t1: f64,
    steps: usize,
) {
    let n = y.len();
    let h = (t1 - t0) / steps as f64;
    let mut k1 = vec![T::ZERO; n];
    let mut k2 = vec![T::ZERO; n];
    let mut k3 = vec![T::ZERO; n];
    let mut k4 = vec![T::ZERO; n];
    let mut tmp = vec![T::ZERO; n];
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        rhs(t, y, &mut k1);
        combine(&mut tmp, y, 0.5 * h, &[(1.0, &k1)]);
        rhs(t + 0.5 * h, &tmp, &mut k2);
        combine(&mut tmp, y, 0.5 * h, &[(1.0, &k2)]);
        rhs(t + 0.5 * h, &tmp, &mut k3);
        combine(&mut tmp, y, h, &[(1.0, &k3)]);
        rhs(t + h, &tmp, &mut k4);
        for i in 0..n {
            y[i] = y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
}
