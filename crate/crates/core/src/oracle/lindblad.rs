//! Dense density-matrix integration of the full master equation
//!
//! ```text
//! d rho/dt = -i [H, rho] + sum_eps gamma_eps (a_eps rho a_eps^dag - {a_eps^dag a_eps, rho}/2)
//! ```
//!
//! over every Fock state with at most N (a) and M (b) particles.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::integrate::{dormand_prince, rk4, StepStats, Tolerance};
use crate::fock::{FockBasis, FockLabel, Mode, SparseOp};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Largest subsystem size the dense oracle accepts.
pub const MAX_DENSE_N: u32 = 6;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub rho: DMatrix<Complex64>,
    pub t: f64,
}

impl DenseState {
    pub fn pure(psi: &[Complex64], t: f64) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi);
        Self {
            rho: &v * v.adjoint(),
            t,
        }
    }

    /// Product initial state on the full basis.
    pub fn initial(basis: &FockBasis) -> Self {
        Self::pure(&basis.initial_state(), 0.0)
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn expectation(&self, op: &SparseOp) -> Complex64 {
        op.expectation(&self.rho)
    }

    /// `<ket|rho|bra>`, zero when either label is outside the basis.
    pub fn element(&self, basis: &FockBasis, ket: &FockLabel, bra: &FockLabel) -> Complex64 {
        match (basis.index_of(ket), basis.index_of(bra)) {
            (Some(i), Some(j)) => self.rho[(i, j)],
            _ => Complex64::new(0.0, 0.0),
        }
    }
}

/// Generator of the master equation on a fixed basis.
#[derive(Debug, Clone)]
pub struct LindbladSystem {
    basis: FockBasis,
    energies: Vec<f64>,
    loss: Vec<f64>,
    // Jump operators sqrt(gamma) a_eps as (row, col, amplitude) with at most
    // one entry per column.
    jumps: Vec<Vec<(usize, usize, f64)>>,
}

impl LindbladSystem {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        for (what, value) in [("N", params.n_a), ("M", params.n_b)] {
            if value > MAX_DENSE_N {
                return Err(Error::Size {
                    what,
                    value: u64::from(value),
                    max: u64::from(MAX_DENSE_N),
                });
            }
        }
        let basis = FockBasis::full(params.n_a, params.n_b);
        let energies = basis.states().iter().map(|s| s.energy(params)).collect();
        let loss = basis.states().iter().map(|s| s.loss_rate(params)).collect();
        let jumps = Mode::ALL
            .iter()
            .filter(|m| m.rate(params) > 0.0)
            .map(|&m| {
                let scale = m.rate(params).sqrt();
                basis
                    .annihilation(m)
                    .entries()
                    .iter()
                    .map(|&(r, c, a)| (r, c, scale * a.re))
                    .collect()
            })
            .collect();
        Ok(Self {
            basis,
            energies,
            loss,
            jumps,
        })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `d rho / dt` for a column-major flattened `rho`.
    pub fn rhs(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim();
        for j in 0..d {
            for i in 0..d {
                let k = i + j * d;
                let coherent = -I * (self.energies[i] - self.energies[j]);
                out[k] = (coherent - 0.5 * (self.loss[i] + self.loss[j])) * rho[k];
            }
        }
        for jump in &self.jumps {
            // (L rho L^dag)_{ij} = L_ik rho_kl L_jl
            for &(j, l, b) in jump {
                for &(i, k, a) in jump {
                    out[i + j * d] += a * b * rho[k + l * d];
                }
            }
        }
    }

    fn check_state(&self, state: &DenseState) -> Result<()> {
        if state.rho.nrows() != self.dim() || state.rho.ncols() != self.dim() {
            return Err(Error::Domain(format!(
                "density matrix is {}x{}, basis has {} states",
                state.rho.nrows(),
                state.rho.ncols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Adaptive Dormand-Prince evolution to each of `times` (ascending).
    pub fn evolve_to(&self, rho0: &DenseState, times: &[f64], tol: &Tolerance) -> Result<(Vec<DenseState>, StepStats)> {
        self.check_state(rho0)?;
        let d = self.dim();
        let mut y: Vec<Complex64> = rho0.rho.as_slice().to_vec();
        let mut t = rho0.t;
        let mut total = StepStats::default();
        let mut out = Vec::with_capacity(times.len());
        let mut f = |_: f64, y: &[Complex64], dy: &mut [Complex64]| self.rhs(y, dy);
        for &target in times {
            if !(target >= t) {
                return Err(Error::Domain(format!("times must be ascending and >= {t}, got {target}")));
            }
            let stats = dormand_prince(&mut f, &mut y, t, target, tol)?;
            total.accepted += stats.accepted;
            total.rejected += stats.rejected;
            t = target;
            out.push(DenseState {
                rho: DMatrix::from_column_slice(d, d, &y),
                t,
            });
        }
        Ok((out, total))
    }

    /// Fixed-step RK4 evolution, the independent second integrator.
    pub fn evolve_rk4(&self, rho0: &DenseState, t_final: f64, dt: f64) -> Result<DenseState> {
        self.check_state(rho0)?;
        if !(dt > 0.0) || t_final < rho0.t {
            return Err(Error::Domain("rk4 needs dt > 0 and t_final >= t0".into()));
        }
        let d = self.dim();
        let steps = ((t_final - rho0.t) / dt).ceil().max(1.0) as usize;
        let mut y: Vec<Complex64> = rho0.rho.as_slice().to_vec();
        rk4(&mut |_, y, dy| self.rhs(y, dy), &mut y, rho0.t, t_final, steps);
        Ok(DenseState {
            rho: DMatrix::from_column_slice(d, d, &y),
            t: t_final,
        })
    }
}

/// Evolve `rho0` to `t_final` with steps no longer than `dt_max`.
pub fn lindblad_evolve(params: &ModelParams, rho0: &DenseState, t_final: f64, dt_max: f64) -> Result<DenseState> {
    if !(dt_max > 0.0) {
        return Err(Error::Domain(format!("dt_max must be positive, got {dt_max}")));
    }
    let system = LindbladSystem::new(params)?;
    let tol = Tolerance {
        dt_max,
        ..Tolerance::default()
    };
    let (mut states, _) = system.evolve_to(rho0, &[t_final], &tol)?;
    Ok(states.pop().expect("one target time"))
}
