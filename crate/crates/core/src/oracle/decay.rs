//! Pure-death process with `p_n(0) = delta_{n, n0}` and
//! `dp_n/dt = gamma (n+1) p_{n+1} - gamma n p_n`.

use super::integrate::{dormand_prince, Tolerance};
use crate::numerics::log_binomial;
use crate::{Error, Result};

pub const MAX_DECAY_N0: u32 = 1000;

/// Binomial thinning: `p_n = C(n0, n) e^{-n gamma t} (1 - e^{-gamma t})^{n0-n}`.
pub fn decay_closed_form(n0: u32, gamma: f64, t: f64) -> Vec<f64> {
    let ln_keep = -gamma * t;
    let ln_lose = (-(-gamma * t).exp_m1()).ln();
    (0..=n0)
        .map(|n| {
            let lost = n0 - n;
            if lost == 0 {
                return (f64::from(n) * ln_keep).exp();
            }
            if ln_lose == f64::NEG_INFINITY {
                return 0.0;
            }
            let lb = log_binomial(i64::from(n0), i64::from(n)).expect("0 <= n <= n0");
            let keep = if n == 0 { 0.0 } else { f64::from(n) * ln_keep };
            (lb + keep + f64::from(lost) * ln_lose).exp()
        })
        .collect()
}

/// Direct integration of the rate equations.
pub fn decay_ode(n0: u32, gamma: f64, t: f64) -> Result<Vec<f64>> {
    let mut p = vec![0.0; n0 as usize + 1];
    p[n0 as usize] = 1.0;
    let tol = Tolerance {
        atol: 1e-14,
        rtol: 1e-12,
        ..Tolerance::default()
    };
    let mut rhs = |_: f64, p: &[f64], dp: &mut [f64]| {
        for n in 0..p.len() {
            let gain = if n + 1 < p.len() { (n + 1) as f64 * p[n + 1] } else { 0.0 };
            dp[n] = gamma * (gain - n as f64 * p[n]);
        }
    };
    dormand_prince(&mut rhs, &mut p, 0.0, t, &tol)?;
    Ok(p)
}

/// `p_n(t)` computed both ways; disagreement beyond 1e-9 is an error.
pub fn decay_generating_oracle(n0: u32, gamma: f64, t: f64) -> Result<Vec<f64>> {
    if n0 > MAX_DECAY_N0 {
        return Err(Error::Size {
            what: "n0",
            value: u64::from(n0),
            max: u64::from(MAX_DECAY_N0),
        });
    }
    if !(gamma >= 0.0 && gamma.is_finite() && t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("need gamma >= 0 and t >= 0, got gamma = {gamma}, t = {t}")));
    }
    let closed = decay_closed_form(n0, gamma, t);
    let ode = decay_ode(n0, gamma, t)?;
    let dev = closed
        .iter()
        .zip(&ode)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(Error::Consistency(format!(
            "decay oracle: closed form and ODE differ by {dev:.3e} (n0 = {n0}, gamma t = {})",
            gamma * t
        )));
    }
    Ok(closed)
}
