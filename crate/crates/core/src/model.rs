//! Parameter types and index conventions shared by every module.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fock::FockLabel;
use crate::{Error, Result};

/// Complex scalar used throughout the analytic core.
pub type ComplexValue = Complex64;

/// Full input of every analytic formula.
///
/// Hamiltonian `H = chi (S_z^a)^2 + chi (S_z^b)^2 - chi_ab S_z^a S_z^b`
/// with hbar = 1, and one-body losses at rate `gamma0` (internal state 0)
/// and `gamma1` (internal state 1), identical in both subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Initial number of particles in subsystem a.
    pub n_a: u32,
    /// Initial number of particles in subsystem b.
    pub n_b: u32,
    pub chi: f64,
    pub chi_ab: f64,
    pub gamma0: f64,
    pub gamma1: f64,
}

impl ModelParams {
    pub fn new(n_a: u32, n_b: u32, chi: f64, chi_ab: f64, gamma0: f64, gamma1: f64) -> Self {
        Self {
            n_a,
            n_b,
            chi,
            chi_ab,
            gamma0,
            gamma1,
        }
    }

    /// Symmetric setup: `N = M`, equal loss rates in both internal states.
    pub fn symmetric(n: u32, chi: f64, chi_ab: f64, gamma: f64) -> Self {
        Self::new(n, n, chi, chi_ab, gamma, gamma)
    }

    pub fn lossless(&self) -> Self {
        Self {
            gamma0: 0.0,
            gamma1: 0.0,
            ..*self
        }
    }

    pub fn is_lossless(&self) -> bool {
        self.gamma0 == 0.0 && self.gamma1 == 0.0
    }

    /// Relabel a <-> b. The dynamics is symmetric under this exchange.
    pub fn swapped(&self) -> Self {
        Self {
            n_a: self.n_b,
            n_b: self.n_a,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.chi, self.chi_ab, self.gamma0, self.gamma1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite rate or nonlinearity".into()));
        }
        if self.gamma0 < 0.0 || self.gamma1 < 0.0 {
            return Err(Error::InvalidParams(format!(
                "loss rates must be non-negative (gamma0 = {}, gamma1 = {})",
                self.gamma0, self.gamma1
            )));
        }
        Ok(())
    }

    /// Entanglement quantities need particles on both sides.
    pub fn validate_entangling(&self) -> Result<()> {
        self.validate()?;
        if self.n_a == 0 || self.n_b == 0 {
            return Err(Error::InvalidParams(format!(
                "both subsystems need particles (N = {}, M = {})",
                self.n_a, self.n_b
            )));
        }
        Ok(())
    }

    /// Detuning of the subsystem-a factor of block (z, r).
    ///
    /// Block (z, r) oscillates at `S_z`-dependent frequencies; the a-side
    /// affine coefficients use `A = gamma0 + i*alpha`, `B = gamma1 - i*alpha`
    /// with `alpha = r*chi_ab/2 - z*chi`. The b-side of the same block uses
    /// `detuning(r, z)`.
    pub fn detuning(&self, z: i32, r: i32) -> f64 {
        f64::from(r) * self.chi_ab / 2.0 - f64::from(z) * self.chi
    }

    /// Largest rate or frequency scale, used to pick dimensionless times.
    pub fn rate_scale(&self) -> f64 {
        [self.chi.abs(), self.chi_ab.abs(), self.gamma0, self.gamma1]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Off-diagonal offsets (z, r) labeling an independent block of the density
/// matrix. Elements with different labels never couple under evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockLabel {
    pub z: i32,
    pub r: i32,
}

impl BlockLabel {
    pub const fn new(z: i32, r: i32) -> Self {
        Self { z, r }
    }

    /// Label of the Hermitian-conjugate block.
    pub fn conjugate(&self) -> Self {
        Self::new(-self.z, -self.r)
    }

    /// Label of the same block after a <-> b relabeling.
    pub fn swapped(&self) -> Self {
        Self::new(self.r, self.z)
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        if self.z.unsigned_abs() > params.n_a || self.r.unsigned_abs() > params.n_b {
            return Err(Error::Domain(format!(
                "block (z = {}, r = {}) outside |z| <= {}, |r| <= {}",
                self.z, self.r, params.n_a, params.n_b
            )));
        }
        Ok(())
    }
}

/// Position (x, y, u, v) of a density-matrix element inside a (z, r) block.
///
/// For `z >= 0` the a-side ket is `(n0, n1) = (x, y + z)` and the bra is
/// `(x + z, y)`; a negative `z` exchanges where the offset sits, ket
/// `(x + |z|, y)` and bra `(x, y + |z|)`. The b side works the same way
/// with (u, v, r).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementIndex {
    pub x: u32,
    pub y: u32,
    pub u: u32,
    pub v: u32,
}

impl ElementIndex {
    pub const fn new(x: u32, y: u32, u: u32, v: u32) -> Self {
        Self { x, y, u, v }
    }

    pub fn check(&self, params: &ModelParams, block: BlockLabel) -> Result<()> {
        block.check(params)?;
        let a = u64::from(self.x) + u64::from(self.y) + u64::from(block.z.unsigned_abs());
        let b = u64::from(self.u) + u64::from(self.v) + u64::from(block.r.unsigned_abs());
        if a > u64::from(params.n_a) || b > u64::from(params.n_b) {
            return Err(Error::Domain(format!(
                "element ({}, {}, {}, {}) outside block ({}, {}) for N = {}, M = {}",
                self.x, self.y, self.u, self.v, block.z, block.r, params.n_a, params.n_b
            )));
        }
        Ok(())
    }

    /// Ket and bra Fock labels of this element.
    pub fn ket_bra(&self, block: BlockLabel) -> (FockLabel, FockLabel) {
        let (zp, zm) = split_offset(block.z);
        let (rp, rm) = split_offset(block.r);
        let ket = FockLabel::new(self.x + zm, self.y + zp, self.u + rm, self.v + rp);
        let bra = FockLabel::new(self.x + zp, self.y + zm, self.u + rp, self.v + rm);
        (ket, bra)
    }

    /// Inverse of [`ElementIndex::ket_bra`]. Returns `None` when the pair
    /// crosses total-number sectors.
    pub fn from_ket_bra(ket: FockLabel, bra: FockLabel) -> Option<(BlockLabel, ElementIndex)> {
        if ket.n_a() != bra.n_a() || ket.n_b() != bra.n_b() {
            return None;
        }
        let z = bra.n0 as i64 - ket.n0 as i64;
        let r = bra.m0 as i64 - ket.m0 as i64;
        let block = BlockLabel::new(z as i32, r as i32);
        let index = ElementIndex::new(
            ket.n0.min(bra.n0),
            ket.n1.min(bra.n1),
            ket.m0.min(bra.m0),
            ket.m1.min(bra.m1),
        );
        Some((block, index))
    }
}

fn split_offset(offset: i32) -> (u32, u32) {
    if offset >= 0 {
        (offset as u32, 0)
    } else {
        (0, offset.unsigned_abs())
    }
}
