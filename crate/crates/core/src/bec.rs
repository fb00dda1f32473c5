//! Thomas-Fermi estimates of the Hamiltonian parameters and loss rates for
//! two-component condensates in a pair of harmonic traps, and the sweep of
//! the optimal EPR parameter over the atom number.
//!
//! Everything here is SI; the returned rates (1/s) feed [`ModelParams`]
//! directly since the analytic core uses hbar = 1.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epr::{epr_minimize, EprOptimum, GridSpec, TimeRange};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr radius (m).
pub const BOHR_RADIUS: f64 = 5.291_772_109e-11;
/// Atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_067e-27;

/// Trap and atomic constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BecConfig {
    /// Trap angular frequency (rad/s).
    pub omega: f64,
    /// Intra-species scattering length (m).
    pub a: f64,
    /// Inter-species scattering length (m).
    pub a01: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    /// One-body loss rate (1/s).
    pub k1: f64,
    /// Two-body loss constant (m^3/s).
    pub k2: f64,
    /// Three-body loss constant (m^6/s).
    pub k3: f64,
}

/// On-disk form of [`BecConfig`] in laboratory units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BecConfigFile {
    pub omega_hz: f64,
    pub a_bohr: f64,
    pub a01_bohr: f64,
    pub mass_amu: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl From<BecConfigFile> for BecConfig {
    fn from(f: BecConfigFile) -> Self {
        Self {
            omega: 2.0 * PI * f.omega_hz,
            a: f.a_bohr * BOHR_RADIUS,
            a01: f.a01_bohr * BOHR_RADIUS,
            mass: f.mass_amu * ATOMIC_MASS_UNIT,
            k1: f.k1,
            k2: f.k2,
            k3: f.k3,
        }
    }
}

impl BecConfig {
    /// Rubidium-87-like constants: a = a01 = 100 Bohr radii, m = 87 u,
    /// K1 = 0.5/s, K2 = 8e-20 m^3/s, K3 = 6e-42 m^6/s.
    pub fn rubidium(omega_hz: f64) -> Self {
        BecConfigFile {
            omega_hz,
            a_bohr: 100.0,
            a01_bohr: 100.0,
            mass_amu: 87.0,
            k1: 0.5,
            k2: 8e-20,
            k3: 6e-42,
        }
        .into()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.omega, self.a, self.a01, self.mass].iter().all(|v| *v > 0.0 && v.is_finite());
        let non_negative = [self.k1, self.k2, self.k3].iter().all(|v| *v >= 0.0 && v.is_finite());
        if !positive || !non_negative {
            return Err(Error::InvalidParams(format!(
                "condensate config needs positive omega, a, a01, mass and non-negative K1..K3: {self:?}"
            )));
        }
        Ok(())
    }

    /// Oscillator length `sqrt(hbar / (m omega))`.
    pub fn l_osc(&self) -> f64 {
        (HBAR / (self.mass * self.omega)).sqrt()
    }
}

/// `(chi, chi_ab)` in rad/s for `n_atoms` atoms per condensate.
pub fn tf_nonlinearities(config: &BecConfig, n_atoms: f64) -> (f64, f64) {
    let l = config.l_osc();
    let ratio = (config.a / (config.a + config.a01)).powf(0.6);
    let scale = config.omega * n_atoms.powf(-0.6);
    let chi = 0.2 * (15.0 * config.a / (2.0 * l)).powf(0.4) * (1.0 + ratio) * scale;
    let chi_ab = 0.4 * (15.0 * config.a01 / (2.0 * l)).powf(0.4) * ratio * scale;
    (chi, chi_ab)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub chi: f64,
    pub chi_ab: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// `K1 + N (gamma2 + gamma2/2) + 3/4 gamma3 N^2`.
    pub gamma_eff: f64,
}

pub fn loss_rates(config: &BecConfig, n_atoms: f64) -> DerivedRates {
    let (chi, chi_ab) = tf_nonlinearities(config, n_atoms);
    let l = config.l_osc();
    let gamma2 = (7.5f64).powf(0.4) / (14.0 * PI) * config.k2 / l.powi(3) * n_atoms.powf(-0.6) * (l / config.a).powf(0.6);
    let gamma3 =
        (7.5f64).powf(0.8) / (126.0 * PI * PI) * config.k3 / l.powi(6) * n_atoms.powf(-1.2) * (l / config.a).powf(1.2);
    let gamma_eff = config.k1 + n_atoms * 1.5 * gamma2 + 0.75 * gamma3 * n_atoms * n_atoms;
    DerivedRates {
        chi,
        chi_ab,
        gamma2,
        gamma3,
        gamma_eff,
    }
}

/// Which loss processes enter the one-body rate of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModel {
    None,
    OneBody,
    Full,
}

impl LossModel {
    pub const ALL: [LossModel; 3] = [LossModel::None, LossModel::OneBody, LossModel::Full];

    pub fn name(&self) -> &'static str {
        match self {
            LossModel::None => "none",
            LossModel::OneBody => "one_body",
            LossModel::Full => "full",
        }
    }

    pub fn rate(&self, rates: &DerivedRates, config: &BecConfig) -> f64 {
        match self {
            LossModel::None => 0.0,
            LossModel::OneBody => config.k1,
            LossModel::Full => rates.gamma_eff,
        }
    }
}

/// Time window searched at each N: `[1e-2, 1e2] / (chi_ab N^{2/3})`,
/// capped at `pi / chi_ab`.
pub fn sweep_window(chi_ab: f64, n: u32) -> TimeRange {
    let t_ent = 1.0 / (chi_ab.abs() * f64::from(n).powf(2.0 / 3.0));
    let t_max = (1e2 * t_ent).min(PI / chi_ab.abs());
    TimeRange {
        t_min: (1e-2 * t_ent).min(0.5 * t_max),
        t_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: u32,
    pub rates: DerivedRates,
    /// One-body rate actually used, `Gamma0 = Gamma1`.
    pub gamma: f64,
    pub optimum: EprOptimum,
}

/// Optimal E^2 for every `N = M` in `n_grid` with parameters frozen at
/// their initial-N values.
pub fn plan_sweep(config: &BecConfig, n_grid: &[u32], model: LossModel, grid: &GridSpec) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("N grid must be strictly ascending".into()));
    }
    n_grid
        .par_iter()
        .map(|&n| {
            let rates = loss_rates(config, f64::from(n));
            let gamma = model.rate(&rates, config);
            let params = ModelParams::symmetric(n, rates.chi, rates.chi_ab, gamma);
            let optimum = epr_minimize(&params, sweep_window(rates.chi_ab, n), grid)?;
            Ok(SweepPoint {
                n,
                rates,
                gamma,
                optimum,
            })
        })
        .collect()
}

/// `count` log-spaced integers from `lo` to `hi`, deduplicated.
pub fn log_n_grid(lo: u32, hi: u32, count: usize) -> Vec<u32> {
    let (a, b) = (f64::from(lo).ln(), f64::from(hi).ln());
    let mut out: Vec<u32> = (0..count)
        .map(|i| {
            let f = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            (a + (b - a) * f).exp().round() as u32
        })
        .collect();
    out.dedup();
    out
}
