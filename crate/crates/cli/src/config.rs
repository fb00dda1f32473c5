//! Per-command configuration files. Every field has a default, so `{}` (or
//! no `--config` at all) reproduces the reference figure; unknown keys are
//! rejected to catch typos.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spinloss::bec::{BecConfigFile, LossModel};
use spinloss::correlators::QuadraturePlane;
use spinloss::epr::GridSpec;
use spinloss::fock::Mode;
use spinloss::trajectories::McMethod;
use spinloss::ModelParams;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, String> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    check(v > 0.0 && v.is_finite(), || format!("{name} must be positive and finite, got {v}"))
}

fn validated(p: ModelParams) -> Result<ModelParams, String> {
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub n_a: u32,
    pub n_b: u32,
    pub chi: f64,
    pub chi_ab: f64,
    /// One column per loss rate, `Gamma0 = Gamma1`.
    pub gammas: Vec<f64>,
    /// End of the linear time grid; `2 pi / chi_ab` if absent.
    pub t_max: Option<f64>,
    pub n_t: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            n_a: 10,
            n_b: 10,
            chi: 1.0,
            chi_ab: 1.0,
            gammas: vec![0.0, 0.01],
            t_max: None,
            n_t: 1001,
        }
    }
}

pub const MAX_ENTROPY_N: u32 = 200;

impl EntropyConfig {
    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(2.0 * PI / self.chi_ab.abs())
    }

    pub fn params(&self) -> Result<Vec<ModelParams>, String> {
        check(self.n_a.max(self.n_b) <= MAX_ENTROPY_N, || {
            format!("entropy needs N, M <= {MAX_ENTROPY_N}, got {} and {}", self.n_a, self.n_b)
        })?;
        check(self.n_t >= 2, || format!("n_t must be at least 2, got {}", self.n_t))?;
        check(!self.gammas.is_empty(), || "gammas must not be empty".into())?;
        positive("t_max", self.t_max())?;
        self.gammas
            .iter()
            .map(|&g| validated(ModelParams::new(self.n_a, self.n_b, self.chi, self.chi_ab, g, g)))
            .collect()
    }

    pub fn times(&self) -> Vec<f64> {
        let t_max = self.t_max();
        (0..self.n_t).map(|k| t_max * k as f64 / (self.n_t - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EprScanConfig {
    /// `N = M` for each column pair.
    pub ns: Vec<u32>,
    pub chi: f64,
    pub chi_ab: f64,
    /// `Gamma0 = Gamma1` of the lossy column.
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub plane: QuadraturePlane,
    /// Log-spaced grid in `chi_ab t`.
    pub chi_ab_t_min: f64,
    pub chi_ab_t_max: f64,
    pub n_t: usize,
}

impl Default for EprScanConfig {
    fn default() -> Self {
        Self {
            ns: vec![100, 1000, 10_000, 50_000],
            chi: 0.0,
            chi_ab: 1.0,
            gamma: 1.0,
            alpha: 0.0,
            beta: 0.0,
            plane: QuadraturePlane::Yz,
            chi_ab_t_min: 1e-6,
            chi_ab_t_max: 1.0,
            n_t: 600,
        }
    }
}

impl EprScanConfig {
    /// `(lossy, lossless)` per N.
    pub fn params(&self) -> Result<Vec<(ModelParams, ModelParams)>, String> {
        check(!self.ns.is_empty(), || "ns must not be empty".into())?;
        check(self.n_t >= 2, || format!("n_t must be at least 2, got {}", self.n_t))?;
        positive("chi_ab_t_min", self.chi_ab_t_min)?;
        check(self.chi_ab_t_max > self.chi_ab_t_min && self.chi_ab_t_max.is_finite(), || {
            format!("need chi_ab_t_min < chi_ab_t_max, got {} and {}", self.chi_ab_t_min, self.chi_ab_t_max)
        })?;
        check(self.alpha.is_finite() && self.beta.is_finite(), || "angles must be finite".into())?;
        self.ns
            .iter()
            .map(|&n| {
                let p = validated(ModelParams::symmetric(n, self.chi, self.chi_ab, self.gamma))?;
                p.validate_entangling().map_err(|e| e.to_string())?;
                Ok((p, p.lossless()))
            })
            .collect()
    }

    /// `(t, chi_ab t)` pairs.
    pub fn times(&self) -> Vec<(f64, f64)> {
        let ratio = (self.chi_ab_t_max / self.chi_ab_t_min).ln();
        (0..self.n_t)
            .map(|k| {
                let x = if k + 1 == self.n_t {
                    self.chi_ab_t_max
                } else {
                    self.chi_ab_t_min * (ratio * k as f64 / (self.n_t - 1) as f64).exp()
                };
                (x / self.chi_ab.abs(), x)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HusimiConfig {
    pub n_a: u32,
    pub n_b: u32,
    pub chi: f64,
    pub chi_ab: f64,
    /// `Gamma0 = Gamma1`.
    pub gamma: f64,
    /// Loss channel of panels (b)-(d).
    pub channel: Mode,
    /// Points per phase axis.
    pub grid: usize,
    /// Evaluation time in units of `1 / chi_ab`.
    pub chi_ab_t: f64,
    /// Loss times of panels (c) and (d), in units of `1 / chi_ab`.
    pub t1s: [f64; 2],
    pub quadrature_nodes: usize,
}

impl Default for HusimiConfig {
    fn default() -> Self {
        Self {
            n_a: 10,
            n_b: 10,
            chi: 1.0,
            chi_ab: 1.0,
            gamma: 0.01,
            channel: Mode::A0,
            grid: 64,
            chi_ab_t: PI,
            t1s: [PI / 4.0, 3.0 * PI / 4.0],
            quadrature_nodes: 16,
        }
    }
}

pub const MAX_HUSIMI_CLI_N: u32 = 40;

impl HusimiConfig {
    pub fn params(&self) -> Result<ModelParams, String> {
        check(self.n_a.max(self.n_b) <= MAX_HUSIMI_CLI_N, || {
            format!("husimi needs N, M <= {MAX_HUSIMI_CLI_N}, got {} and {}", self.n_a, self.n_b)
        })?;
        check(self.grid >= 16, || format!("grid needs at least 16 points, got {}", self.grid))?;
        check(self.quadrature_nodes >= 8, || {
            format!("quadrature_nodes must be at least 8, got {}", self.quadrature_nodes)
        })?;
        check(self.chi_ab_t >= 0.0 && self.chi_ab_t.is_finite(), || {
            format!("chi_ab_t must be finite and non-negative, got {}", self.chi_ab_t)
        })?;
        check(self.t1s.iter().all(|t1| *t1 >= 0.0 && *t1 <= self.chi_ab_t), || {
            format!("loss times must lie in [0, chi_ab_t], got {:?}", self.t1s)
        })?;
        let p = validated(ModelParams::new(self.n_a, self.n_b, self.chi, self.chi_ab, self.gamma, self.gamma))?;
        p.validate_entangling().map_err(|e| e.to_string())?;
        let own = match self.channel {
            Mode::A0 | Mode::A1 => self.n_a,
            Mode::B0 | Mode::B1 => self.n_b,
        };
        check(own > 0, || format!("channel {} has no particles to lose", self.channel.name()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoriesConfig {
    pub n_a: u32,
    pub n_b: u32,
    pub chi: f64,
    pub chi_ab: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub t: f64,
    pub n_trajectories: usize,
    pub method: McMethod,
}

impl Default for TrajectoriesConfig {
    fn default() -> Self {
        Self {
            n_a: 6,
            n_b: 6,
            chi: 1.0,
            chi_ab: 1.0,
            gamma0: 0.01,
            gamma1: 0.01,
            t: 1.0,
            n_trajectories: 10_000,
            method: McMethod::WaitingTime,
        }
    }
}

impl TrajectoriesConfig {
    pub fn params(&self) -> Result<ModelParams, String> {
        check(self.n_trajectories >= 2, || {
            format!("need at least 2 trajectories, got {}", self.n_trajectories)
        })?;
        check(self.t >= 0.0 && self.t.is_finite(), || format!("t must be finite and non-negative, got {}", self.t))?;
        if let McMethod::FixedStep { dt } = self.method {
            positive("dt", dt)?;
        }
        validated(ModelParams::new(self.n_a, self.n_b, self.chi, self.chi_ab, self.gamma0, self.gamma1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BecSweepConfig {
    pub traps: Vec<BecConfigFile>,
    pub n_min: u32,
    pub n_max: u32,
    pub n_points: usize,
    pub models: Vec<LossModel>,
    pub grid: GridSpec,
}

pub fn rubidium_file(omega_hz: f64) -> BecConfigFile {
    BecConfigFile {
        omega_hz,
        a_bohr: 100.0,
        a01_bohr: 100.0,
        mass_amu: 87.0,
        k1: 0.5,
        k2: 8e-20,
        k3: 6e-42,
    }
}

impl Default for BecSweepConfig {
    fn default() -> Self {
        Self {
            traps: vec![rubidium_file(200.0), rubidium_file(1000.0)],
            n_min: 100,
            n_max: 1_000_000,
            n_points: 30,
            models: LossModel::ALL.to_vec(),
            grid: GridSpec::default(),
        }
    }
}

impl BecSweepConfig {
    pub fn validate(&self) -> Result<(), String> {
        check(!self.traps.is_empty() && !self.models.is_empty(), || "traps and models must not be empty".into())?;
        check(self.n_min >= 1 && self.n_max > self.n_min, || {
            format!("need 1 <= n_min < n_max, got {} and {}", self.n_min, self.n_max)
        })?;
        check(self.n_points >= 2, || format!("n_points must be at least 2, got {}", self.n_points))?;
        self.grid.validate().map_err(|e| e.to_string())?;
        for trap in &self.traps {
            spinloss::bec::BecConfig::from(*trap).validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelatorsConfig {
    pub n_a: u32,
    pub n_b: u32,
    pub chi: f64,
    pub chi_ab: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    /// End of the linear time grid; `2 pi / chi_ab` if absent.
    pub t_max: Option<f64>,
    pub n_t: usize,
    /// Quadrature angles of the E^2 column.
    pub alpha: f64,
    pub beta: f64,
    pub plane: QuadraturePlane,
}

impl Default for CorrelatorsConfig {
    fn default() -> Self {
        Self {
            n_a: 10,
            n_b: 10,
            chi: 1.0,
            chi_ab: 1.0,
            gamma0: 0.01,
            gamma1: 0.01,
            t_max: None,
            n_t: 201,
            alpha: 0.0,
            beta: 0.0,
            plane: QuadraturePlane::Yz,
        }
    }
}

impl CorrelatorsConfig {
    pub fn params(&self) -> Result<ModelParams, String> {
        check(self.n_t >= 2, || format!("n_t must be at least 2, got {}", self.n_t))?;
        positive("t_max", self.t_max())?;
        validated(ModelParams::new(self.n_a, self.n_b, self.chi, self.chi_ab, self.gamma0, self.gamma1))
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(2.0 * PI / self.chi_ab.abs())
    }

    pub fn times(&self) -> Vec<f64> {
        let t_max = self.t_max();
        (0..self.n_t).map(|k| t_max * k as f64 / (self.n_t - 1) as f64).collect()
    }
}
