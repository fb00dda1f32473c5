//! EPR steering parameter
//!
//! ```text
//! E^2 = 4 <(X^a - X^a_inf)^2> <(P^a - P^a_inf)^2> / |<[X^a, P^a]>|^2
//! ```
//!
//! with the best linear estimators `X^a_inf = q + r X^b`,
//! `P^a_inf = p + s P^b`. `E^2 < 1` witnesses EPR entanglement.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlators::{correlator_set, rotated_moments, CorrelatorSet, QuadraturePlane, RotatedMoments};
use crate::model::ModelParams;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::{Error, Result};

/// Relative size below which the commutator denominator counts as zero.
pub const UNDEFINED_THRESHOLD: f64 = 1e-12;

/// Linear inference `X_inf = q + r X^b`, `P_inf = p + s P^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceCoefficients {
    pub q: f64,
    pub r: f64,
    pub p: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EprValue {
    Defined { e2: f64, coeffs: InferenceCoefficients },
    /// `|<[X^a, P^a]>|^2` vanishes.
    Undefined,
}

impl EprValue {
    pub fn e2(&self) -> Option<f64> {
        match self {
            EprValue::Defined { e2, .. } => Some(*e2),
            EprValue::Undefined => None,
        }
    }
}

fn slope(cov: f64, var: f64) -> f64 {
    if var > 0.0 {
        cov / var
    } else {
        0.0
    }
}

/// E^2 from precomputed quadrature moments; `n_a` sets the scale of the
/// undefined-denominator test.
pub fn epr_from_moments(m: &RotatedMoments, n_a: u32) -> EprValue {
    let denom = m.commutator * m.commutator;
    let scale = (f64::from(n_a) / 2.0).powi(2);
    if !(denom >= UNDEFINED_THRESHOLD * scale) {
        return EprValue::Undefined;
    }
    let r = slope(m.cov_x, m.var_xb);
    let s = slope(m.cov_p, m.var_pb);
    let inf_x = (m.var_xa - r * m.cov_x).max(0.0);
    let inf_p = (m.var_pa - s * m.cov_p).max(0.0);
    EprValue::Defined {
        e2: 4.0 * inf_x * inf_p / denom,
        coeffs: InferenceCoefficients {
            q: m.mean_xa - r * m.mean_xb,
            r,
            p: m.mean_pa - s * m.mean_pb,
            s,
        },
    }
}

fn epr_from_set(set: &CorrelatorSet, n_a: u32, alpha: f64, beta: f64, plane: QuadraturePlane) -> EprValue {
    epr_from_moments(&rotated_moments(set, alpha, beta, plane), n_a)
}

/// E^2 at one point with the default (y-z) quadratures.
pub fn epr_value(params: &ModelParams, t: f64, alpha: f64, beta: f64) -> Result<EprValue> {
    epr_value_in(params, t, alpha, beta, QuadraturePlane::Yz)
}

pub fn epr_value_in(params: &ModelParams, t: f64, alpha: f64, beta: f64, plane: QuadraturePlane) -> Result<EprValue> {
    let set = correlator_set(params, t)?;
    Ok(epr_from_set(&set, params.n_a, alpha, beta, plane))
}

/// Closed time window for the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRange {
    pub t_min: f64,
    pub t_max: f64,
}

impl TimeRange {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        let r = Self { t_min, t_max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(Error::Domain(format!(
                "time range must satisfy 0 < t_min < t_max < inf, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    /// `n` log-spaced times including both ends.
    pub fn log_grid(&self, n: usize) -> Vec<f64> {
        let ratio = (self.t_max / self.t_min).ln();
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.t_max
                } else {
                    self.t_min * (ratio * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_t: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub plane: QuadraturePlane,
    /// Run the simplex stage after the grid scan.
    pub refine: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_t: 64,
            n_alpha: 16,
            n_beta: 16,
            plane: QuadraturePlane::Yz,
            refine: true,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_t < 8 || self.n_alpha < 8 || self.n_beta < 8 {
            return Err(Error::Domain(format!(
                "grid needs at least 8 points per axis, got {} x {} x {}",
                self.n_t, self.n_alpha, self.n_beta
            )));
        }
        Ok(())
    }

    /// Grid of alpha: `-pi/4 + (pi/2) k / n`. Shifting both angles by pi/2
    /// exchanges X and P (up to sign) and leaves E^2 unchanged, so this
    /// quarter-period strip together with the full beta period covers
    /// every distinct angle pair.
    pub fn alpha_angles(n: usize) -> Vec<f64> {
        (0..n).map(|k| -PI / 4.0 + 0.5 * PI * k as f64 / n as f64).collect()
    }

    /// Grid of beta: `-pi/2 + pi k / n`. E^2 has period pi in each angle.
    pub fn beta_angles(n: usize) -> Vec<f64> {
        (0..n).map(|k| -PI / 2.0 + PI * k as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EprResult {
    pub e2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t_opt: f64,
    pub coeffs: InferenceCoefficients,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EprOptimum {
    Found(EprResult),
    /// Every grid point had a vanishing denominator.
    NoValidOptimum,
}

impl EprOptimum {
    pub fn result(&self) -> Option<&EprResult> {
        match self {
            EprOptimum::Found(r) => Some(r),
            EprOptimum::NoValidOptimum => None,
        }
    }
}

// Fold an angle into [-period/2, period/2).
fn wrap(a: f64, period: f64) -> f64 {
    let w = (a + period / 2.0).rem_euclid(period) - period / 2.0;
    if w >= period / 2.0 {
        -period / 2.0
    } else {
        w
    }
}

/// Canonical representative with alpha in [-pi/4, pi/4) and beta in
/// [-pi/2, pi/2), using the joint quarter-period shift.
pub fn canonical_angles(alpha: f64, beta: f64) -> (f64, f64) {
    let shift = ((alpha + PI / 4.0) / (PI / 2.0)).floor() * (PI / 2.0);
    (wrap(alpha - shift, PI / 2.0), wrap(beta - shift, PI))
}

/// Grid scan over (t, alpha, beta) followed by simplex refinement in the
/// normalized coordinates (t/t_max, alpha/pi, beta/pi).
pub fn epr_minimize(params: &ModelParams, t_range: TimeRange, grid: &GridSpec) -> Result<EprOptimum> {
    params.validate_entangling()?;
    t_range.validate()?;
    grid.validate()?;
    let times = t_range.log_grid(grid.n_t);
    let alphas = GridSpec::alpha_angles(grid.n_alpha);
    let betas = GridSpec::beta_angles(grid.n_beta);

    // Best point per time slice, scanned in (alpha, beta) order.
    let per_time: Vec<Result<Option<(f64, usize, usize)>>> = times
        .par_iter()
        .map(|&t| {
            let set = correlator_set(params, t)?;
            let mut best: Option<(f64, usize, usize)> = None;
            for (ia, &a) in alphas.iter().enumerate() {
                for (ib, &b) in betas.iter().enumerate() {
                    if let Some(e2) = epr_from_set(&set, params.n_a, a, b, grid.plane).e2() {
                        if best.is_none_or(|(v, _, _)| e2 < v) {
                            best = Some((e2, ia, ib));
                        }
                    }
                }
            }
            Ok(best)
        })
        .collect();
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for (it, slice) in per_time.into_iter().enumerate() {
        if let Some((e2, ia, ib)) = slice? {
            if best.is_none_or(|(v, ..)| e2 < v) {
                best = Some((e2, it, ia, ib));
            }
        }
    }
    let Some((grid_e2, it, ia, ib)) = best else {
        return Ok(EprOptimum::NoValidOptimum);
    };

    let (mut t_opt, mut alpha, mut beta) = (times[it], alphas[ia], betas[ib]);
    if grid.refine {
        let t_max = t_range.t_max;
        let mut objective = |u: &[f64]| {
            let t = u[0] * t_max;
            if !(t >= t_range.t_min && t <= t_max) {
                return None;
            }
            epr_value_in(params, t, u[1] * PI, u[2] * PI, grid.plane).ok()?.e2()
        };
        let neighbour = if it + 1 < times.len() { times[it + 1] } else { times[it - 1] };
        let steps = [
            (neighbour - times[it]).abs() / t_max,
            0.5 / grid.n_alpha as f64,
            1.0 / grid.n_beta as f64,
        ];
        let start = [times[it] / t_max, alpha / PI, beta / PI];
        let refined = nelder_mead(&mut objective, &start, &steps, &NelderMeadOptions::default());
        if refined.value <= grid_e2 {
            t_opt = (refined.point[0] * t_max).clamp(t_range.t_min, t_max);
            (alpha, beta) = canonical_angles(refined.point[1] * PI, refined.point[2] * PI);
        }
    }
    let EprValue::Defined { e2, coeffs } = epr_value_in(params, t_opt, alpha, beta, grid.plane)? else {
        return Ok(EprOptimum::NoValidOptimum);
    };
    Ok(EprOptimum::Found(EprResult {
        e2,
        alpha,
        beta,
        t_opt,
        coeffs,
    }))
}
