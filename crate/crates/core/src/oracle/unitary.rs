//! Exact lossless evolution. H is diagonal in the Fock basis, so each
//! amplitude only picks up a phase.

use num_complex::Complex64;

use crate::fock::FockBasis;
use crate::model::ModelParams;
use crate::{Error, Result};

pub const MAX_UNITARY_N: u32 = 30;

/// `psi(t)_k = exp(-i E_k t) psi0_k` on `basis`.
///
/// Loss rates in `params` are ignored.
pub fn unitary_evolve(params: &ModelParams, basis: &FockBasis, psi0: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    for (what, value) in [("N", basis.capacity_a()), ("M", basis.capacity_b())] {
        if value > MAX_UNITARY_N {
            return Err(Error::Size {
                what,
                value: u64::from(value),
                max: u64::from(MAX_UNITARY_N),
            });
        }
    }
    if psi0.len() != basis.dim() {
        return Err(Error::Domain(format!(
            "state has {} amplitudes, basis has {} states",
            psi0.len(),
            basis.dim()
        )));
    }
    Ok(basis
        .states()
        .iter()
        .zip(psi0)
        .map(|(s, c)| c * Complex64::from_polar(1.0, -s.energy(params) * t))
        .collect())
}

/// `|<a|b>|`.
pub fn overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm()
}
