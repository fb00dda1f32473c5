//! Fock-basis bookkeeping: labels, basis enumeration, sparse operators and
//! the standard states (product initial state, phase states).

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::numerics::log_binomial;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Occupations `|n0, n1, m0, m1>` of the four bosonic modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockLabel {
    pub n0: u32,
    pub n1: u32,
    pub m0: u32,
    pub m1: u32,
}

impl FockLabel {
    pub const fn new(n0: u32, n1: u32, m0: u32, m1: u32) -> Self {
        Self { n0, n1, m0, m1 }
    }

    pub fn n_a(&self) -> u32 {
        self.n0 + self.n1
    }

    pub fn n_b(&self) -> u32 {
        self.m0 + self.m1
    }

    /// Eigenvalue of `S_z^a = (n0 - n1)/2`.
    pub fn sz_a(&self) -> f64 {
        (f64::from(self.n0) - f64::from(self.n1)) / 2.0
    }

    pub fn sz_b(&self) -> f64 {
        (f64::from(self.m0) - f64::from(self.m1)) / 2.0
    }

    pub fn occupation(&self, mode: Mode) -> u32 {
        match mode {
            Mode::A0 => self.n0,
            Mode::A1 => self.n1,
            Mode::B0 => self.m0,
            Mode::B1 => self.m1,
        }
    }

    fn with_occupation(mut self, mode: Mode, value: u32) -> Self {
        match mode {
            Mode::A0 => self.n0 = value,
            Mode::A1 => self.n1 = value,
            Mode::B0 => self.m0 = value,
            Mode::B1 => self.m1 = value,
        }
        self
    }

    /// Energy under `H = chi Sz_a^2 + chi Sz_b^2 - chi_ab Sz_a Sz_b`.
    pub fn energy(&self, params: &ModelParams) -> f64 {
        let (sa, sb) = (self.sz_a(), self.sz_b());
        params.chi * (sa * sa + sb * sb) - params.chi_ab * sa * sb
    }

    /// Total loss rate `sum_i <n|A_i^dag A_i|n>` of this basis state.
    pub fn loss_rate(&self, params: &ModelParams) -> f64 {
        params.gamma0 * f64::from(self.n0 + self.m0) + params.gamma1 * f64::from(self.n1 + self.m1)
    }
}

/// One of the four bosonic modes; also names the one-body loss channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    A0,
    A1,
    B0,
    B1,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::A0, Mode::A1, Mode::B0, Mode::B1];

    pub fn rate(&self, params: &ModelParams) -> f64 {
        match self {
            Mode::A0 | Mode::B0 => params.gamma0,
            Mode::A1 | Mode::B1 => params.gamma1,
        }
    }

    pub fn subsystem(&self) -> Subsystem {
        match self {
            Mode::A0 | Mode::A1 => Subsystem::A,
            Mode::B0 | Mode::B1 => Subsystem::B,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::A0 => "a0",
            Mode::A1 => "a1",
            Mode::B0 => "b0",
            Mode::B1 => "b1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

impl Subsystem {
    fn modes(&self) -> (Mode, Mode) {
        match self {
            Subsystem::A => (Mode::A0, Mode::A1),
            Subsystem::B => (Mode::B0, Mode::B1),
        }
    }
}

/// Enumerated Fock basis.
///
/// `full(N, M)` holds every state with `n0 + n1 <= N` and `m0 + m1 <= M`;
/// `sector(N, M)` only the states with exactly N and M particles. States are
/// ordered lexicographically in `(n0 + n1, n0, m0 + m1, m0)`.
#[derive(Debug, Clone)]
pub struct FockBasis {
    capacity_a: u32,
    capacity_b: u32,
    states: Vec<FockLabel>,
    index: HashMap<FockLabel, usize>,
}

impl FockBasis {
    pub fn full(capacity_a: u32, capacity_b: u32) -> Self {
        let mut states = Vec::new();
        for na in 0..=capacity_a {
            for n0 in 0..=na {
                for nb in 0..=capacity_b {
                    for m0 in 0..=nb {
                        states.push(FockLabel::new(n0, na - n0, m0, nb - m0));
                    }
                }
            }
        }
        Self::from_states(capacity_a, capacity_b, states)
    }

    pub fn sector(n_a: u32, n_b: u32) -> Self {
        let mut states = Vec::with_capacity(((n_a + 1) * (n_b + 1)) as usize);
        for n0 in 0..=n_a {
            for m0 in 0..=n_b {
                states.push(FockLabel::new(n0, n_a - n0, m0, n_b - m0));
            }
        }
        Self::from_states(n_a, n_b, states)
    }

    fn from_states(capacity_a: u32, capacity_b: u32, states: Vec<FockLabel>) -> Self {
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Self {
            capacity_a,
            capacity_b,
            states,
            index,
        }
    }

    pub fn capacity_a(&self) -> u32 {
        self.capacity_a
    }

    pub fn capacity_b(&self) -> u32 {
        self.capacity_b
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[FockLabel] {
        &self.states
    }

    pub fn label(&self, i: usize) -> FockLabel {
        self.states[i]
    }

    pub fn index_of(&self, label: &FockLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Indices of the states with exactly `(n_a, n_b)` particles.
    pub fn sector_indices(&self, n_a: u32, n_b: u32) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.states[i].n_a() == n_a && self.states[i].n_b() == n_b)
            .collect()
    }

    /// Annihilation operator of `mode` mapping this basis into `target`.
    /// Images that fall outside `target` are dropped.
    pub fn annihilation_into(&self, mode: Mode, target: &FockBasis) -> SparseOp {
        let mut entries = Vec::new();
        for (col, s) in self.states.iter().enumerate() {
            let n = s.occupation(mode);
            if n == 0 {
                continue;
            }
            if let Some(row) = target.index_of(&s.with_occupation(mode, n - 1)) {
                entries.push((row, col, Complex64::new(f64::from(n).sqrt(), 0.0)));
            }
        }
        SparseOp::new(target.dim(), self.dim(), entries)
    }

    pub fn annihilation(&self, mode: Mode) -> SparseOp {
        self.annihilation_into(mode, self)
    }

    pub fn number(&self, mode: Mode) -> SparseOp {
        self.diagonal(|s| f64::from(s.occupation(mode)))
    }

    pub fn diagonal(&self, f: impl Fn(&FockLabel) -> f64) -> SparseOp {
        let entries = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (i, i, Complex64::new(f(s), 0.0)))
            .collect();
        SparseOp::new(self.dim(), self.dim(), entries)
    }

    /// `S_+ = c0^dag c1` of the given subsystem (raises `S_z` by one).
    pub fn s_plus(&self, sub: Subsystem) -> SparseOp {
        let (m0, m1) = sub.modes();
        let mut entries = Vec::new();
        for (col, s) in self.states.iter().enumerate() {
            let (k0, k1) = (s.occupation(m0), s.occupation(m1));
            if k1 == 0 {
                continue;
            }
            let image = s.with_occupation(m0, k0 + 1).with_occupation(m1, k1 - 1);
            if let Some(row) = self.index_of(&image) {
                let amp = (f64::from(k1) * f64::from(k0 + 1)).sqrt();
                entries.push((row, col, Complex64::new(amp, 0.0)));
            }
        }
        SparseOp::new(self.dim(), self.dim(), entries)
    }

    pub fn sx(&self, sub: Subsystem) -> SparseOp {
        let sp = self.s_plus(sub);
        sp.add(&sp.adjoint()).scale(Complex64::new(0.5, 0.0))
    }

    pub fn sy(&self, sub: Subsystem) -> SparseOp {
        let sp = self.s_plus(sub);
        sp.add(&sp.adjoint().scale(Complex64::new(-1.0, 0.0)))
            .scale(Complex64::new(0.0, -0.5))
    }

    pub fn sz(&self, sub: Subsystem) -> SparseOp {
        match sub {
            Subsystem::A => self.diagonal(|s| s.sz_a()),
            Subsystem::B => self.diagonal(|s| s.sz_b()),
        }
    }

    /// Product initial state, every particle in `(|0> + |1>)/sqrt 2`.
    /// Requires the basis to contain the `(capacity_a, capacity_b)` sector.
    pub fn initial_state(&self) -> Vec<Complex64> {
        self.phase_state(self.capacity_a, self.capacity_b, 0.0, 0.0)
    }

    /// Normalized phase state `|phi_a, phi_b>` with `(n_a, n_b)` particles:
    /// each particle in `(e^{-i phi/2}|0> + e^{i phi/2}|1>)/sqrt 2`.
    pub fn phase_state(&self, n_a: u32, n_b: u32, phi_a: f64, phi_b: f64) -> Vec<Complex64> {
        let mut psi = vec![ZERO; self.dim()];
        let ln2 = std::f64::consts::LN_2;
        for (i, s) in self.states.iter().enumerate() {
            if s.n_a() != n_a || s.n_b() != n_b {
                continue;
            }
            let ln_mag = 0.5
                * (log_binomial(i64::from(n_a), i64::from(s.n0)).unwrap()
                    + log_binomial(i64::from(n_b), i64::from(s.m0)).unwrap()
                    - f64::from(n_a + n_b) * ln2);
            let phase = -phi_a * s.sz_a() - phi_b * s.sz_b();
            psi[i] = Complex64::from_polar(ln_mag.exp(), phase);
        }
        psi
    }
}

/// Sparse operator stored as `(row, col, value)` triplets.
#[derive(Debug, Clone)]
pub struct SparseOp {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, Complex64)>) -> Self {
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let entries = self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect();
        Self::new(self.cols, self.rows, entries)
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let entries = self.entries.iter().map(|&(r, c, v)| (r, c, v * k)).collect();
        Self::new(self.rows, self.cols, entries)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut acc: HashMap<(usize, usize), Complex64> = HashMap::new();
        for &(r, c, v) in self.entries.iter().chain(other.entries.iter()) {
            *acc.entry((r, c)).or_insert(ZERO) += v;
        }
        Self::from_map(self.rows, self.cols, acc)
    }

    /// Operator product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut by_col: HashMap<usize, Vec<(usize, Complex64)>> = HashMap::new();
        for &(r, c, v) in &self.entries {
            by_col.entry(c).or_default().push((r, v));
        }
        let mut acc: HashMap<(usize, usize), Complex64> = HashMap::new();
        for &(k, c, w) in &other.entries {
            if let Some(left) = by_col.get(&k) {
                for &(r, v) in left {
                    *acc.entry((r, c)).or_insert(ZERO) += v * w;
                }
            }
        }
        Self::from_map(self.rows, other.cols, acc)
    }

    fn from_map(rows: usize, cols: usize, acc: HashMap<(usize, usize), Complex64>) -> Self {
        let mut entries: Vec<_> = acc
            .into_iter()
            .filter(|(_, v)| *v != ZERO)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        Self::new(rows, cols, entries)
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(psi.len(), self.cols);
        let mut out = vec![ZERO; self.rows];
        for &(r, c, v) in &self.entries {
            out[r] += v * psi[c];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// `<psi|O|psi>` for an arbitrary (not necessarily normalized) vector.
    pub fn expectation_pure(&self, psi: &[Complex64]) -> Complex64 {
        self.entries.iter().map(|&(r, c, v)| psi[r].conj() * v * psi[c]).sum()
    }

    /// `Tr(rho O)`.
    pub fn expectation(&self, rho: &DMatrix<Complex64>) -> Complex64 {
        self.entries.iter().map(|&(r, c, v)| v * rho[(c, r)]).sum()
    }
}
