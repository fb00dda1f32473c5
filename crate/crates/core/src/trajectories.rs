//! Quantum-jump trajectories, the one-loss block of the density matrix and
//! Husimi functions over phase states.
//!
//! H and every `A_i^dag A_i` are diagonal in the Fock basis, so between
//! jumps each amplitude evolves by an exact exponential and the waiting
//! time until the next jump can be sampled by inverting the survival norm.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlators::CorrelatorSet;
use crate::fock::{FockBasis, FockLabel, Mode};
use crate::model::ModelParams;
use crate::numerics::log_binomial;
use crate::quadrature::integrate_matrix;
use crate::{Error, Result};

/// Loss channels are named by the mode that loses the particle.
pub type Channel = Mode;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Trajectories handed to one worker at a time. Fixed so that the merge
/// order (and hence every estimator bit) is independent of the pool size.
const CHUNK: usize = 64;

/// Largest sector the Husimi evaluation accepts.
pub const MAX_HUSIMI_N: u32 = 40;
pub const MIN_HUSIMI_GRID: usize = 16;
pub const MAX_QUADRATURE_NODES: usize = 1 << 14;
pub const QUADRATURE_TOL: f64 = 1e-9;

/// State vector on the fixed-number sector `(n_remaining_a, n_remaining_b)`,
/// ordered like [`FockBasis::sector`]: `n0` outer, `m0` inner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub amplitudes: Vec<Complex64>,
    pub n_remaining_a: u32,
    pub n_remaining_b: u32,
    /// Squared norm of `amplitudes`, i.e. the probability mass carried by
    /// this (possibly unnormalized) branch.
    pub weight: f64,
}

impl TrajectoryState {
    /// Product initial state: every particle in `(|0> + |1>)/sqrt 2`.
    pub fn initial(params: &ModelParams) -> Self {
        let amplitudes = FockBasis::sector(params.n_a, params.n_b).initial_state();
        Self::from_amplitudes(params.n_a, params.n_b, amplitudes)
    }

    pub fn from_amplitudes(n_a: u32, n_b: u32, amplitudes: Vec<Complex64>) -> Self {
        assert_eq!(amplitudes.len(), sector_dim(n_a, n_b), "amplitudes do not fit the sector");
        let weight = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        Self {
            amplitudes,
            n_remaining_a: n_a,
            n_remaining_b: n_b,
            weight,
        }
    }

    pub fn basis(&self) -> FockBasis {
        FockBasis::sector(self.n_remaining_a, self.n_remaining_b)
    }

    fn label(&self, i: usize) -> FockLabel {
        let nb1 = self.n_remaining_b as usize + 1;
        let (n0, m0) = ((i / nb1) as u32, (i % nb1) as u32);
        FockLabel::new(n0, self.n_remaining_a - n0, m0, self.n_remaining_b - m0)
    }

    fn labels(&self) -> impl Iterator<Item = FockLabel> + '_ {
        (0..self.amplitudes.len()).map(|i| self.label(i))
    }

    pub fn normalized(mut self) -> Self {
        if self.weight > 0.0 {
            let k = self.weight.sqrt().recip();
            self.amplitudes.iter_mut().for_each(|c| *c *= k);
            self.weight = 1.0;
        }
        self
    }

    /// Exact no-jump evolution `exp[(-iH - sum_i A_i^dag A_i / 2) tau]`,
    /// left unnormalized.
    pub fn evolve_no_jump(&mut self, params: &ModelParams, tau: f64) {
        let factors: Vec<Complex64> = self
            .labels()
            .map(|s| Complex64::new(-0.5 * s.loss_rate(params) * tau, -s.energy(params) * tau).exp())
            .collect();
        for (c, f) in self.amplitudes.iter_mut().zip(factors) {
            *c *= f;
        }
        self.weight = self.amplitudes.iter().map(|c| c.norm_sqr()).sum();
    }

    /// Squared norm after a further `tau` of no-jump evolution.
    pub fn survival(&self, params: &ModelParams, tau: f64) -> f64 {
        self.labels()
            .zip(&self.amplitudes)
            .map(|(s, c)| c.norm_sqr() * (-s.loss_rate(params) * tau).exp())
            .sum()
    }

    /// Jump rates `<A_i^dag A_i>` in the order of [`Mode::ALL`].
    pub fn channel_rates(&self, params: &ModelParams) -> [f64; 4] {
        let mut rates = [0.0; 4];
        for (s, c) in self.labels().zip(&self.amplitudes) {
            let p = c.norm_sqr();
            for (r, mode) in rates.iter_mut().zip(Mode::ALL) {
                *r += mode.rate(params) * f64::from(s.occupation(mode)) * p;
            }
        }
        rates
    }

    /// Apply the bare annihilation operator of `channel` (no sqrt(Gamma)).
    pub fn annihilate(&self, channel: Channel) -> Self {
        let (na, nb) = (self.n_remaining_a, self.n_remaining_b);
        let (ta, tb) = match channel {
            Mode::A0 | Mode::A1 if na == 0 => return self.vanished(),
            Mode::B0 | Mode::B1 if nb == 0 => return self.vanished(),
            Mode::A0 | Mode::A1 => (na - 1, nb),
            Mode::B0 | Mode::B1 => (na, nb - 1),
        };
        let mut out = vec![ZERO; sector_dim(ta, tb)];
        for (s, c) in self.labels().zip(&self.amplitudes) {
            let n = s.occupation(channel);
            if n == 0 {
                continue;
            }
            let (n0, m0) = match channel {
                Mode::A0 => (s.n0 - 1, s.m0),
                Mode::B0 => (s.n0, s.m0 - 1),
                Mode::A1 | Mode::B1 => (s.n0, s.m0),
            };
            out[n0 as usize * (tb as usize + 1) + m0 as usize] = c * f64::from(n).sqrt();
        }
        Self::from_amplitudes(ta, tb, out)
    }

    // Zero vector standing in for an impossible jump.
    fn vanished(&self) -> Self {
        Self {
            amplitudes: vec![ZERO; self.amplitudes.len()],
            weight: 0.0,
            ..self.clone()
        }
    }

    /// Moments of the normalized state. The vacuum (or a zero vector)
    /// contributes zero to every field.
    pub fn correlators(&self, t: f64) -> CorrelatorSet {
        let mut v = [0.0; 30];
        v[0] = t;
        if self.weight == 0.0 {
            return CorrelatorSet::from_values(v);
        }
        let psi: Vec<Complex64> = self.amplitudes.iter().map(|c| c / self.weight.sqrt()).collect();
        let a = self.spin_images(&psi, true);
        let b = self.spin_images(&psi, false);
        let dot = |x: &[Complex64], y: &[Complex64]| -> f64 { x.iter().zip(y).map(|(p, q)| (p.conj() * q).re).sum() };
        let side = |imgs: &[Vec<Complex64>; 3], n: u32| {
            [
                dot(&psi, &imgs[0]),
                dot(&psi, &imgs[1]),
                dot(&psi, &imgs[2]),
                f64::from(n),
                dot(&imgs[0], &imgs[0]),
                dot(&imgs[1], &imgs[1]),
                dot(&imgs[2], &imgs[2]),
                2.0 * dot(&imgs[0], &imgs[1]),
                2.0 * dot(&imgs[0], &imgs[2]),
                2.0 * dot(&imgs[1], &imgs[2]),
            ]
        };
        v[1..11].copy_from_slice(&side(&a, self.n_remaining_a));
        v[11..21].copy_from_slice(&side(&b, self.n_remaining_b));
        for i in 0..3 {
            for j in 0..3 {
                v[21 + 3 * i + j] = dot(&a[i], &b[j]);
            }
        }
        CorrelatorSet::from_values(v)
    }

    // [S_x psi, S_y psi, S_z psi] for one subsystem.
    fn spin_images(&self, psi: &[Complex64], side_a: bool) -> [Vec<Complex64>; 3] {
        let nb1 = self.n_remaining_b as usize + 1;
        let dim = psi.len();
        let mut plus = vec![ZERO; dim];
        let mut minus = vec![ZERO; dim];
        let mut z = vec![ZERO; dim];
        for (i, c) in psi.iter().enumerate() {
            let s = self.label(i);
            let (k0, k1, step, sz) = if side_a {
                (s.n0, s.n1, nb1, s.sz_a())
            } else {
                (s.m0, s.m1, 1, s.sz_b())
            };
            z[i] = c * sz;
            // S+ moves one particle from mode 1 to mode 0.
            if k1 > 0 {
                plus[i + step] += c * (f64::from(k1) * f64::from(k0 + 1)).sqrt();
            }
            if k0 > 0 {
                minus[i - step] += c * (f64::from(k0) * f64::from(k1 + 1)).sqrt();
            }
        }
        let x = plus.iter().zip(&minus).map(|(p, m)| (p + m) * 0.5).collect();
        let y = plus.iter().zip(&minus).map(|(p, m)| (p - m) * Complex64::new(0.0, -0.5)).collect();
        [x, y, z]
    }

    /// `|psi><psi|` of the normalized state embedded in `basis`.
    fn add_projector(&self, basis: &FockBasis, rho: &mut DMatrix<Complex64>, sq: &mut DMatrix<f64>) {
        if self.weight == 0.0 {
            return;
        }
        let k = self.weight.recip();
        let idx: Vec<usize> = self
            .labels()
            .map(|s| basis.index_of(&s).expect("sector lies inside the full basis"))
            .collect();
        for (i, ci) in idx.iter().zip(&self.amplitudes) {
            for (j, cj) in idx.iter().zip(&self.amplitudes) {
                let v = ci * cj.conj() * k;
                rho[(*i, *j)] += v;
                sq[(*i, *j)] += v.norm_sqr();
            }
        }
    }
}

fn sector_dim(n_a: u32, n_b: u32) -> usize {
    (n_a as usize + 1) * (n_b as usize + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub channel: Channel,
    pub t_jump: f64,
}

/// How jump times are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMethod {
    /// Exact inversion of the survival norm.
    WaitingTime,
    /// First-order scheme: in each step of length `dt` a jump happens with
    /// probability `dt <A_i^dag A_i>`. Kept as a cross-check.
    FixedStep { dt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Normalized final state (a zero vector only if it was never populated).
    pub state: TrajectoryState,
    pub jumps: Vec<JumpRecord>,
}

// Root of ln S(tau) = ln r. ln S is convex and decreasing, so Newton from
// tau = 0 approaches the root monotonically from the left.
fn waiting_time(state: &TrajectoryState, params: &ModelParams, ln_r: f64, t_max: f64) -> f64 {
    let terms: Vec<(f64, f64)> = state
        .labels()
        .zip(&state.amplitudes)
        .map(|(s, c)| (c.norm_sqr(), s.loss_rate(params)))
        .filter(|(p, _)| *p > 0.0)
        .collect();
    let mut tau = 0.0_f64;
    for _ in 0..200 {
        let (mut s, mut ds) = (0.0, 0.0);
        for (p, r) in &terms {
            let e = p * (-r * tau).exp();
            s += e;
            ds -= r * e;
        }
        let g = s.ln() - ln_r;
        let step = -g / (ds / s);
        if !step.is_finite() {
            break;
        }
        tau = (tau + step).min(t_max);
        if step.abs() <= 1e-15 * tau.max(1e-300) {
            break;
        }
    }
    tau
}

fn pick_channel(rates: &[f64; 4], u: f64) -> Channel {
    let total: f64 = rates.iter().sum();
    let mut acc = 0.0;
    let target = u * total;
    let mut last = Mode::A0;
    for (r, mode) in rates.iter().zip(Mode::ALL) {
        if *r > 0.0 {
            acc += r;
            last = mode;
            if target < acc {
                return mode;
            }
        }
    }
    last
}

/// One trajectory from the product initial state up to `t_final`.
pub fn run_trajectory(params: &ModelParams, t_final: f64, method: McMethod, rng: &mut impl Rng) -> Trajectory {
    let mut state = TrajectoryState::initial(params).normalized();
    let mut jumps = Vec::new();
    match method {
        McMethod::WaitingTime => {
            let mut t = 0.0;
            loop {
                let remaining = t_final - t;
                let r = 1.0 - rng.gen::<f64>();
                if remaining <= 0.0 || state.survival(params, remaining) > r {
                    state.evolve_no_jump(params, remaining.max(0.0));
                    state = state.normalized();
                    break;
                }
                let tau = waiting_time(&state, params, r.ln(), remaining);
                state.evolve_no_jump(params, tau);
                t += tau;
                let channel = pick_channel(&state.channel_rates(params), rng.gen());
                state = state.annihilate(channel).normalized();
                jumps.push(JumpRecord { channel, t_jump: t });
            }
        }
        McMethod::FixedStep { dt } => {
            let steps = (t_final / dt).ceil().max(1.0) as usize;
            let h = t_final / steps as f64;
            for k in 0..steps {
                let rates = state.channel_rates(params);
                let p: f64 = rates.iter().sum::<f64>() * h;
                let u: f64 = rng.gen();
                if u < p {
                    let channel = pick_channel(&rates, u / p);
                    state = state.annihilate(channel).normalized();
                    jumps.push(JumpRecord {
                        channel,
                        t_jump: (k as f64 + 0.5) * h,
                    });
                } else {
                    state.evolve_no_jump(params, h);
                    state = state.normalized();
                }
            }
        }
    }
    Trajectory { state, jumps }
}

/// Generator of trajectory `index`: its own ChaCha stream of `seed`, so a
/// trajectory's randomness does not depend on scheduling.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_mc(params: &ModelParams, t_final: f64, n_trajectories: usize, method: McMethod) -> Result<()> {
    params.validate()?;
    if n_trajectories == 0 {
        return Err(Error::Domain("need at least one trajectory".into()));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Domain(format!("final time must be finite and non-negative, got {t_final}")));
    }
    if let McMethod::FixedStep { dt } = method {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
    }
    Ok(())
}

// Run trajectories in fixed chunks, fold each chunk sequentially, and merge
// the chunk results in index order.
fn fold_trajectories<A: Send>(
    params: &ModelParams,
    t_final: f64,
    n_trajectories: usize,
    seed: u64,
    method: McMethod,
    init: impl Fn() -> A + Sync,
    fold: impl Fn(&mut A, Trajectory) + Sync,
    merge: impl Fn(&mut A, A),
) -> A {
    let chunks: Vec<A> = (0..n_trajectories.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_trajectories) {
                let mut rng = trajectory_rng(seed, i as u64);
                fold(&mut acc, run_trajectory(params, t_final, method, &mut rng));
            }
            acc
        })
        .collect();
    let mut total = init();
    for c in chunks {
        merge(&mut total, c);
    }
    total
}

#[derive(Debug, Clone)]
struct Moments {
    count: usize,
    sum: [f64; 30],
    sum_sq: [f64; 30],
    losses: Vec<u64>,
    jumps: u64,
}

impl Moments {
    fn new(max_losses: usize) -> Self {
        Self {
            count: 0,
            sum: [0.0; 30],
            sum_sq: [0.0; 30],
            losses: vec![0; max_losses + 1],
            jumps: 0,
        }
    }

    fn push(&mut self, t: f64, traj: Trajectory) {
        let fields = traj.state.correlators(t).fields();
        for (k, (_, v)) in fields.iter().enumerate() {
            self.sum[k] += v;
            self.sum_sq[k] += v * v;
        }
        self.count += 1;
        self.losses[traj.jumps.len()] += 1;
        self.jumps += traj.jumps.len() as u64;
    }

    fn merge(&mut self, other: Moments) {
        self.count += other.count;
        for k in 0..30 {
            self.sum[k] += other.sum[k];
            self.sum_sq[k] += other.sum_sq[k];
        }
        for (a, b) in self.losses.iter_mut().zip(other.losses) {
            *a += b;
        }
        self.jumps += other.jumps;
    }
}

/// Ensemble averages with standard errors of the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n_trajectories: usize,
    pub seed: u64,
    pub t: f64,
    pub mean: CorrelatorSet,
    pub std_err: CorrelatorSet,
    /// `loss_probability[k]`: fraction of trajectories that lost exactly
    /// `k` particles.
    pub loss_probability: Vec<f64>,
    pub mean_jumps: f64,
}

impl McEstimate {
    /// Standard error of [`loss_probability`](Self::loss_probability)`[k]`.
    pub fn loss_std_err(&self, k: usize) -> f64 {
        let p = self.loss_probability[k];
        (p * (1.0 - p) / self.n_trajectories as f64).sqrt()
    }
}

/// Monte Carlo estimates of every [`CorrelatorSet`] field at `t_final`.
pub fn mc_evolve(
    params: &ModelParams,
    t_final: f64,
    n_trajectories: usize,
    seed: u64,
    method: McMethod,
) -> Result<McEstimate> {
    check_mc(params, t_final, n_trajectories, method)?;
    let max_losses = (params.n_a + params.n_b) as usize;
    let m = fold_trajectories(
        params,
        t_final,
        n_trajectories,
        seed,
        method,
        || Moments::new(max_losses),
        |acc, traj| acc.push(t_final, traj),
        |acc, other| acc.merge(other),
    );
    let n = m.count as f64;
    let mut mean = [0.0; 30];
    let mut err = [0.0; 30];
    for k in 0..30 {
        mean[k] = m.sum[k] / n;
        err[k] = if m.count > 1 {
            ((m.sum_sq[k] / n - mean[k] * mean[k]).max(0.0) / (n - 1.0)).sqrt()
        } else {
            f64::NAN
        };
    }
    mean[0] = t_final;
    err[0] = 0.0;
    Ok(McEstimate {
        n_trajectories,
        seed,
        t: t_final,
        mean: CorrelatorSet::from_values(mean),
        std_err: CorrelatorSet::from_values(err),
        loss_probability: m.losses.iter().map(|c| *c as f64 / n).collect(),
        mean_jumps: m.jumps as f64 / n,
    })
}

/// Projector average over trajectories on [`FockBasis::full`].
#[derive(Debug, Clone)]
pub struct McDensity {
    pub rho: DMatrix<Complex64>,
    /// Standard error of each element.
    pub std_err: DMatrix<f64>,
    pub n_trajectories: usize,
}

pub fn mc_density(
    params: &ModelParams,
    t_final: f64,
    n_trajectories: usize,
    seed: u64,
    method: McMethod,
) -> Result<McDensity> {
    check_mc(params, t_final, n_trajectories, method)?;
    if params.n_a > crate::oracle::lindblad::MAX_DENSE_N || params.n_b > crate::oracle::lindblad::MAX_DENSE_N {
        return Err(Error::Size {
            what: "N or M for a dense trajectory average",
            value: u64::from(params.n_a.max(params.n_b)),
            max: u64::from(crate::oracle::lindblad::MAX_DENSE_N),
        });
    }
    let basis = FockBasis::full(params.n_a, params.n_b);
    let d = basis.dim();
    let (sum, sq) = fold_trajectories(
        params,
        t_final,
        n_trajectories,
        seed,
        method,
        || (DMatrix::from_element(d, d, ZERO), DMatrix::from_element(d, d, 0.0)),
        |acc, traj| traj.state.add_projector(&basis, &mut acc.0, &mut acc.1),
        |acc, other| {
            acc.0 += other.0;
            acc.1 += other.1;
        },
    );
    let n = n_trajectories as f64;
    let rho = sum / Complex64::new(n, 0.0);
    let std_err = DMatrix::from_fn(d, d, |i, j| {
        if n_trajectories < 2 {
            return f64::NAN;
        }
        ((sq[(i, j)] / n - rho[(i, j)].norm_sqr()).max(0.0) / (n - 1.0)).sqrt()
    });
    Ok(McDensity {
        rho,
        std_err,
        n_trajectories,
    })
}

/// `|psi(t | i, t1)>`: no-jump evolution to `t1`, the jump
/// `sqrt(Gamma_i) c_i`, no-jump evolution to `t`. Unnormalized; its squared
/// norm is the density of the jump time.
pub fn trajectory_after_loss(params: &ModelParams, channel: Channel, t: f64, t1: f64) -> TrajectoryState {
    let mut s = TrajectoryState::initial(params);
    s.evolve_no_jump(params, t1);
    let mut s = s.annihilate(channel);
    let k = channel.rate(params).sqrt();
    s.amplitudes.iter_mut().for_each(|c| *c *= k);
    s.evolve_no_jump(params, t - t1);
    s
}

/// The same vector written as a `t1`-dependent rotation of the jump
/// applied to the unperturbed state: `exp[(t - t1) X] sqrt(Gamma_i) c_i
/// psi(t)`, with
/// `X = Gamma_i/2 + i chi/4 - i s (chi_ab/2 S_z^other - chi S_z^own)`,
/// `s = +1` for a mode-0 loss and -1 for mode 1, and `S_z` taken after the
/// loss. The `t1`-dependent part is therefore the rotation
/// `exp[+- i t1 (chi_ab/2 S_z^other - chi S_z^own)]`.
pub fn phase_noise_form(params: &ModelParams, channel: Channel, t: f64, t1: f64) -> TrajectoryState {
    let mut psi_t = TrajectoryState::initial(params);
    psi_t.evolve_no_jump(params, t);
    let mut s = psi_t.annihilate(channel);
    let gamma = channel.rate(params);
    let sign = match channel {
        Mode::A0 | Mode::B0 => 1.0,
        Mode::A1 | Mode::B1 => -1.0,
    };
    let own_is_a = matches!(channel, Mode::A0 | Mode::A1);
    let labels: Vec<FockLabel> = s.labels().collect();
    for (c, lab) in s.amplitudes.iter_mut().zip(labels) {
        let (own, other) = if own_is_a {
            (lab.sz_a(), lab.sz_b())
        } else {
            (lab.sz_b(), lab.sz_a())
        };
        let rot = params.chi_ab / 2.0 * other - params.chi * own;
        let x = Complex64::new(gamma / 2.0, params.chi / 4.0 - sign * rot);
        *c *= gamma.sqrt() * (x * (t - t1)).exp();
    }
    s.weight = s.amplitudes.iter().map(|c| c.norm_sqr()).sum();
    s
}

/// `rho'_i(t) = int_0^t |psi(t|i,t1)><psi(t|i,t1)| dt1` on the sector left
/// after one loss through `channel`.
#[derive(Debug, Clone)]
pub struct LossBlock {
    pub channel: Channel,
    pub n_a: u32,
    pub n_b: u32,
    pub rho: DMatrix<Complex64>,
    pub nodes: usize,
    pub change: f64,
}

impl LossBlock {
    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn basis(&self) -> FockBasis {
        FockBasis::sector(self.n_a, self.n_b)
    }
}

pub fn single_loss_block(params: &ModelParams, channel: Channel, t: f64, quadrature_nodes: usize) -> Result<LossBlock> {
    params.validate()?;
    if quadrature_nodes < 8 {
        return Err(Error::Domain(format!("need at least 8 quadrature nodes, got {quadrature_nodes}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and non-negative, got {t}")));
    }
    let own = match channel {
        Mode::A0 | Mode::A1 => params.n_a,
        Mode::B0 | Mode::B1 => params.n_b,
    };
    if own == 0 {
        return Err(Error::Domain(format!("channel {} has no particles to lose", channel.name())));
    }
    let (n_a, n_b) = match channel {
        Mode::A0 | Mode::A1 => (params.n_a - 1, params.n_b),
        Mode::B0 | Mode::B1 => (params.n_a, params.n_b - 1),
    };
    let dim = sector_dim(n_a, n_b);
    let integrand = |t1: f64| {
        let v = trajectory_after_loss(params, channel, t, t1).amplitudes;
        DMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj())
    };
    let q = integrate_matrix(&integrand, 0.0, t, quadrature_nodes, MAX_QUADRATURE_NODES, QUADRATURE_TOL)?;
    Ok(LossBlock {
        channel,
        n_a,
        n_b,
        rho: q.value,
        nodes: q.nodes,
        change: q.change,
    })
}

/// Phase-state angles `-pi + 2 pi k / n`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect()
}

/// `Q(phi_a, phi_b)` on a periodic grid; `values[i * phi_b.len() + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub phi_a: Vec<f64>,
    pub phi_b: Vec<f64>,
    pub values: Vec<f64>,
}

impl HusimiGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.phi_b.len() + j]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Points strictly above their eight periodic neighbours and at least
    /// `min_fraction` of the global maximum. The threshold discards the
    /// interference ripples far from any peak.
    pub fn local_maxima(&self, min_fraction: f64) -> Vec<(usize, usize, f64)> {
        let (na, nb) = (self.phi_a.len(), self.phi_b.len());
        let floor = min_fraction * self.max();
        let mut out = Vec::new();
        for i in 0..na {
            for j in 0..nb {
                let v = self.get(i, j);
                if v < floor || v <= 0.0 {
                    continue;
                }
                let is_max = (-1i64..=1).all(|di| {
                    (-1i64..=1).all(|dj| {
                        if di == 0 && dj == 0 {
                            return true;
                        }
                        let ii = (i as i64 + di).rem_euclid(na as i64) as usize;
                        let jj = (j as i64 + dj).rem_euclid(nb as i64) as usize;
                        self.get(ii, jj) < v
                    })
                });
                if is_max {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Periodic trapezoid rule for `int Q dphi_a dphi_b` over the torus.
    pub fn integral(&self) -> f64 {
        let cell = (2.0 * PI / self.phi_a.len() as f64) * (2.0 * PI / self.phi_b.len() as f64);
        self.values.iter().sum::<f64>() * cell
    }
}

// Conjugated phase-state amplitudes <phi_a, phi_b|k> of one sector, split
// into the a and b factors.
struct PhaseFactors {
    a: Vec<Vec<Complex64>>,
    b: Vec<Vec<Complex64>>,
}

impl PhaseFactors {
    fn new(n_a: u32, n_b: u32, phi_a: &[f64], phi_b: &[f64]) -> Self {
        let side = |n: u32, phis: &[f64]| -> Vec<Vec<Complex64>> {
            let weights: Vec<f64> = (0..=n)
                .map(|k| {
                    (0.5 * (log_binomial(i64::from(n), i64::from(k)).unwrap() - f64::from(n) * std::f64::consts::LN_2))
                        .exp()
                })
                .collect();
            phis.iter()
                .map(|phi| {
                    (0..=n)
                        .map(|k| {
                            let sz = f64::from(k) - f64::from(n) / 2.0;
                            Complex64::from_polar(weights[k as usize], phi * sz)
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            a: side(n_a, phi_a),
            b: side(n_b, phi_b),
        }
    }

    // Conjugated phase state at grid point (i, j) in sector ordering.
    fn bra(&self, i: usize, j: usize) -> Vec<Complex64> {
        let (fa, fb) = (&self.a[i], &self.b[j]);
        fa.iter().flat_map(|x| fb.iter().map(move |y| x * y)).collect()
    }
}

fn check_grid(n_a: u32, n_b: u32, phi_a: &[f64], phi_b: &[f64]) -> Result<()> {
    if phi_a.len() < MIN_HUSIMI_GRID || phi_b.len() < MIN_HUSIMI_GRID {
        return Err(Error::Domain(format!(
            "Husimi grid needs at least {MIN_HUSIMI_GRID} points per axis, got {}x{}",
            phi_a.len(),
            phi_b.len()
        )));
    }
    if n_a.max(n_b) > MAX_HUSIMI_N {
        return Err(Error::Size {
            what: "particle number for a Husimi grid",
            value: u64::from(n_a.max(n_b)),
            max: u64::from(MAX_HUSIMI_N),
        });
    }
    Ok(())
}

/// `Q = |<phi_a, phi_b|psi>|^2 / <psi|psi>` for a pure state.
pub fn husimi_pure(state: &TrajectoryState, phi_a: &[f64], phi_b: &[f64]) -> Result<HusimiGrid> {
    let (na, nb) = (state.n_remaining_a, state.n_remaining_b);
    check_grid(na, nb, phi_a, phi_b)?;
    let f = PhaseFactors::new(na, nb, phi_a, phi_b);
    let norm = if state.weight > 0.0 { state.weight } else { 1.0 };
    let values = (0..phi_a.len() * phi_b.len())
        .into_par_iter()
        .map(|p| {
            let bra = f.bra(p / phi_b.len(), p % phi_b.len());
            let phi_norm: f64 = bra.iter().map(|c| c.norm_sqr()).sum();
            let amp: Complex64 = bra.iter().zip(&state.amplitudes).map(|(x, y)| x * y).sum();
            amp.norm_sqr() / (norm * phi_norm)
        })
        .collect();
    Ok(HusimiGrid {
        phi_a: phi_a.to_vec(),
        phi_b: phi_b.to_vec(),
        values,
    })
}

/// `Q = <phi_a, phi_b|rho|phi_a, phi_b>` for a block on sector `(n_a, n_b)`.
/// Not renormalized, so an empty block yields an all-zero grid.
pub fn husimi_block(rho: &DMatrix<Complex64>, n_a: u32, n_b: u32, phi_a: &[f64], phi_b: &[f64]) -> Result<HusimiGrid> {
    check_grid(n_a, n_b, phi_a, phi_b)?;
    let dim = sector_dim(n_a, n_b);
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::Domain(format!(
            "block is {}x{}, sector ({n_a}, {n_b}) has dimension {dim}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let f = PhaseFactors::new(n_a, n_b, phi_a, phi_b);
    let values = (0..phi_a.len() * phi_b.len())
        .into_par_iter()
        .map(|p| {
            let bra = f.bra(p / phi_b.len(), p % phi_b.len());
            let phi_norm: f64 = bra.iter().map(|c| c.norm_sqr()).sum();
            let mut q = ZERO;
            for (i, x) in bra.iter().enumerate() {
                let row: Complex64 = bra.iter().enumerate().map(|(j, y)| rho[(i, j)] * y.conj()).sum();
                q += x * row;
            }
            (q.re / phi_norm).max(0.0)
        })
        .collect();
    Ok(HusimiGrid {
        phi_a: phi_a.to_vec(),
        phi_b: phi_b.to_vec(),
        values,
    })
}
