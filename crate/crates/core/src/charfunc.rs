//! Closed-form characteristic functions of the density-matrix blocks.
//!
//! For block (z, r) the generating function
//!
//! ```text
//! h^{z,r}(X,Y,U,V,t) = sum_{x,y,u,v} X^x Y^y U^u V^v
//!     sqrt((x+|z|)!(y+|z|)!(u+|r|)!(v+|r|)! / (x! y! u! v!)) rho_{(z,r)}(x,y,u,v)
//! ```
//!
//! has the product form
//!
//! ```text
//! h^{z,r} = N! M! e^{-(g0+g1)(|z|+|r|)t/2} / (2^{|z|+|r|} (N-|z|)! (M-|r|)!)
//!           L_{z,r}(X,Y,t)^{N-|z|} L_{r,z}(U,V,t)^{M-|r|}
//! ```
//!
//! with `L_{z,r}(X,Y,t) = p + q X + s Y` affine in its arguments. Density
//! matrix elements follow from a trinomial expansion of the powers, so no
//! numerical differentiation is involved anywhere.

use num_complex::Complex64;

use crate::model::{BlockLabel, ElementIndex, ModelParams};
use crate::numerics::{clog1p, ln_factorial, phi1, LogProduct};
use crate::{Error, Result};

/// Largest N accepted by [`reduced_density_matrix`] and [`linear_entropy`].
pub const MAX_REDUCED_N: u32 = 200;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coefficients of `L_{z,r}(X, Y, t) = p + q X + s Y`.
///
/// `a_rate = gamma0 + i alpha` and `b_rate = gamma1 - i alpha`, with
/// `alpha = ModelParams::detuning(z, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCoefficients {
    pub alpha: f64,
    pub a_rate: Complex64,
    pub b_rate: Complex64,
    pub p: Complex64,
    pub q: Complex64,
    pub s: Complex64,
    /// `L(1, 1, t) - 1`, computed without cancellation.
    pub minus_one: Complex64,
}

impl BlockCoefficients {
    pub fn eval(&self, x: Complex64, y: Complex64) -> Complex64 {
        self.p + self.q * x + self.s * y
    }

    /// `L(X, Y, t) - 1` expanded around (1, 1).
    pub fn eval_minus_one(&self, x: Complex64, y: Complex64) -> Complex64 {
        self.minus_one + self.q * (x - 1.0) + self.s * (y - 1.0)
    }

    /// `L(1, 1, t)`.
    pub fn at_one(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) + self.minus_one
    }

    /// `ln L(1, 1, t)`, accurate when L is close to 1.
    pub fn ln_at_one(&self) -> Complex64 {
        clog1p(self.minus_one)
    }
}

/// Coefficients of the subsystem-a factor `L_{z,r}` of block (z, r).
///
/// The subsystem-b factor of the same block is
/// `block_coefficients(params, block.swapped(), t)`.
///
/// The removable singularities at `a_rate -> 0` or `b_rate -> 0` are
/// handled by [`phi1`], which switches to a Taylor series below
/// `|rate| t = 1e-8`.
pub fn block_coefficients(params: &ModelParams, block: BlockLabel, t: f64) -> BlockCoefficients {
    let alpha = params.detuning(block.z, block.r);
    let a_rate = Complex64::new(params.gamma0, alpha);
    let b_rate = Complex64::new(params.gamma1, -alpha);
    let ea = phi1(-a_rate * t);
    let eb = phi1(-b_rate * t);
    let p = 0.5 * t * (params.gamma0 * ea + params.gamma1 * eb);
    let q = 0.5 * (-a_rate * t).exp();
    let s = 0.5 * (-b_rate * t).exp();
    let minus_one = 0.5 * I * alpha * t * (eb - ea);
    BlockCoefficients {
        alpha,
        a_rate,
        b_rate,
        p,
        q,
        s,
        minus_one,
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// Log of the scalar prefactor of `h^{z,r}`.
fn ln_prefactor(params: &ModelParams, block: BlockLabel, t: f64) -> f64 {
    let (n, m) = (u64::from(params.n_a), u64::from(params.n_b));
    let (az, ar) = (u64::from(block.z.unsigned_abs()), u64::from(block.r.unsigned_abs()));
    ln_factorial(n) - ln_factorial(n - az) + ln_factorial(m) - ln_factorial(m - ar)
        - (az + ar) as f64 * std::f64::consts::LN_2
        - 0.5 * (params.gamma0 + params.gamma1) * (az + ar) as f64 * t
}

fn h_unchecked(
    params: &ModelParams,
    block: BlockLabel,
    args: [Complex64; 4],
    t: f64,
) -> Complex64 {
    let la = block_coefficients(params, block, t);
    let lb = block_coefficients(params, block.swapped(), t);
    let ea = u64::from(params.n_a - block.z.unsigned_abs());
    let eb = u64::from(params.n_b - block.r.unsigned_abs());
    let acc = LogProduct::one().mul_log_real(ln_prefactor(params, block, t));
    let acc = mul_power(acc, &la, args[0], args[1], ea);
    mul_power(acc, &lb, args[2], args[3], eb).value()
}

// Near the trace point the exponent (up to N) amplifies every ulp of L, so
// there L is carried as 1 + w with w from the expansion around (1, 1).
fn mul_power(acc: LogProduct, l: &BlockCoefficients, x: Complex64, y: Complex64, exponent: u64) -> LogProduct {
    let w = l.eval_minus_one(x, y);
    if w.norm() < 0.5 {
        acc.mul_pow_log(clog1p(w), exponent)
    } else {
        acc.mul_pow(l.eval(x, y), exponent)
    }
}

/// Closed-form `h^{z,r}(X, Y, U, V, t)`.
///
/// Negative offsets are evaluated directly: the same product form holds
/// with `|z|`, `|r|` in the prefactor and exponents and the signed offsets
/// in the detuning.
pub fn h(
    params: &ModelParams,
    block: BlockLabel,
    x: Complex64,
    y: Complex64,
    u: Complex64,
    v: Complex64,
    t: f64,
) -> Result<Complex64> {
    block.check(params)?;
    check_time(t)?;
    Ok(h_unchecked(params, block, [x, y, u, v], t))
}

/// `h^{z,r}(1, 1, 1, 1, t)` kept in logarithmic form.
pub fn log_h_at_one(params: &ModelParams, block: BlockLabel, t: f64) -> Result<LogProduct> {
    block.check(params)?;
    check_time(t)?;
    let la = block_coefficients(params, block, t);
    let lb = block_coefficients(params, block.swapped(), t);
    let ea = u64::from(params.n_a - block.z.unsigned_abs());
    let eb = u64::from(params.n_b - block.r.unsigned_abs());
    Ok(LogProduct::one()
        .mul_log_real(ln_prefactor(params, block, t))
        .mul_pow_log(la.ln_at_one(), ea)
        .mul_pow_log(lb.ln_at_one(), eb))
}

/// Both sides of the evolution equation obeyed by `h^{z,r}`:
///
/// ```text
/// dh/dt = (g0 - A_a X) dh/dX + (g1 - B_a Y) dh/dY
///       + (g0 - A_b U) dh/dU + (g1 - B_b V) dh/dV - (g0+g1)(|z|+|r|)/2 h
/// ```
///
/// where `A_a, B_a` are the rates of `L_{z,r}` and `A_b, B_b` those of
/// `L_{r,z}`. Derivatives are central differences of the closed form with
/// the given step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeTerms {
    pub lhs: Complex64,
    pub rhs: Complex64,
}

pub fn pde_terms(
    params: &ModelParams,
    block: BlockLabel,
    point: [Complex64; 4],
    t: f64,
    step: f64,
) -> Result<PdeTerms> {
    block.check(params)?;
    if !(step > 0.0 && step <= 1e-2) {
        return Err(Error::Domain(format!("finite-difference step must be in (0, 1e-2], got {step}")));
    }
    let eval = |args: [Complex64; 4], t: f64| h_unchecked(params, block, args, t);
    let lhs = (eval(point, t + step) - eval(point, t - step)) / (2.0 * step);
    let la = block_coefficients(params, block, t);
    let lb = block_coefficients(params, block.swapped(), t);
    let drift = [
        params.gamma0 - la.a_rate * point[0],
        params.gamma1 - la.b_rate * point[1],
        params.gamma0 - lb.a_rate * point[2],
        params.gamma1 - lb.b_rate * point[3],
    ];
    let mut rhs = Complex64::new(0.0, 0.0);
    for (k, d) in drift.iter().enumerate() {
        let mut plus = point;
        let mut minus = point;
        plus[k] += step;
        minus[k] -= step;
        rhs += d * (eval(plus, t) - eval(minus, t)) / (2.0 * step);
    }
    let decay = 0.5 * (params.gamma0 + params.gamma1) * f64::from(block.z.unsigned_abs() + block.r.unsigned_abs());
    rhs -= decay * eval(point, t);
    Ok(PdeTerms { lhs, rhs })
}

/// `|LHS - RHS|` of the characteristic-function evolution equation at
/// `point = (X, Y, U, V, t)`.
pub fn pde_residual(
    params: &ModelParams,
    block: BlockLabel,
    point: (Complex64, Complex64, Complex64, Complex64, f64),
    step: f64,
) -> Result<f64> {
    let (x, y, u, v, t) = point;
    let terms = pde_terms(params, block, [x, y, u, v], t, step)?;
    Ok((terms.lhs - terms.rhs).norm())
}

/// One side (a or b) of a density element: the trinomial coefficient of
/// `X^x Y^y` in `L^{n-|offset|}` divided by the generating-function weight.
fn side_log(
    acc: LogProduct,
    coeffs: &BlockCoefficients,
    n: u32,
    offset: u32,
    x: u32,
    y: u32,
    ln_fact: &dyn Fn(u32) -> f64,
) -> LogProduct {
    let rest = n - offset - x - y;
    acc.mul_log_real(
        ln_fact(n) - ln_fact(rest)
            - 0.5 * (ln_fact(x) + ln_fact(y) + ln_fact(x + offset) + ln_fact(y + offset)),
    )
    .mul_pow(coeffs.p, u64::from(rest))
    .mul_pow(coeffs.q, u64::from(x))
    .mul_pow(coeffs.s, u64::from(y))
}

fn ln_fact_u32(n: u32) -> f64 {
    ln_factorial(u64::from(n))
}

/// Density-matrix element `rho(x, y, u, v)` of block (z, r) at time t.
///
/// Ket and bra labels follow [`ElementIndex::ket_bra`].
pub fn density_element(
    params: &ModelParams,
    block: BlockLabel,
    index: ElementIndex,
    t: f64,
) -> Result<Complex64> {
    index.check(params, block)?;
    check_time(t)?;
    let (az, ar) = (block.z.unsigned_abs(), block.r.unsigned_abs());
    let la = block_coefficients(params, block, t);
    let lb = block_coefficients(params, block.swapped(), t);
    let acc = LogProduct::one()
        .mul_pow2(-i64::from(az + ar))
        .mul_log_real(-0.5 * (params.gamma0 + params.gamma1) * f64::from(az + ar) * t);
    let acc = side_log(acc, &la, params.n_a, az, index.x, index.y, &ln_fact_u32);
    let acc = side_log(acc, &lb, params.n_b, ar, index.u, index.v, &ln_fact_u32);
    Ok(acc.value())
}

/// Reduced state of subsystem a, `sigma = Tr_b rho`, over every a-side
/// particle number `0..=N`.
///
/// Stores the `z >= 0` elements `sigma(ket (x, y+z), bra (x+z, y))`; the
/// `z < 0` half follows by Hermiticity.
#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    n: u32,
    offsets: Vec<usize>,
    elements: Vec<Complex64>,
}

impl ReducedDensityMatrix {
    fn slot(&self, z: u32, x: u32, y: u32) -> usize {
        self.offsets[z as usize] + tri_index((self.n - z) as usize, x as usize, y as usize)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `sigma(ket (x, y + z), bra (x + z, y))` for `z >= 0`.
    pub fn get(&self, z: u32, x: u32, y: u32) -> Complex64 {
        assert!(z <= self.n && x + y + z <= self.n, "reduced element out of range");
        self.elements[self.slot(z, x, y)]
    }

    /// `<ket|sigma|bra>` for a-side Fock labels `(n0, n1)`.
    pub fn element(&self, ket: (u32, u32), bra: (u32, u32)) -> Complex64 {
        if ket.0 + ket.1 != bra.0 + bra.1 || ket.0 + ket.1 > self.n {
            return Complex64::new(0.0, 0.0);
        }
        if bra.0 >= ket.0 {
            self.get(bra.0 - ket.0, ket.0, bra.1)
        } else {
            self.get(ket.0 - bra.0, bra.0, ket.1).conj()
        }
    }

    /// Iterate `(z, x, y, value)` over the stored `z >= 0` elements.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u32, Complex64)> + '_ {
        let n = self.n;
        (0..=n).flat_map(move |z| {
            (0..=n - z).flat_map(move |x| (0..=n - z - x).map(move |y| (z, x, y, self.get(z, x, y))))
        })
    }

    pub fn trace(&self) -> f64 {
        self.iter().filter(|e| e.0 == 0).map(|e| e.3.re).sum()
    }

    /// `Tr sigma^2`, counting each `z > 0` element together with its
    /// Hermitian partner.
    pub fn purity(&self) -> f64 {
        self.iter()
            .map(|(z, _, _, v)| if z == 0 { v.norm_sqr() } else { 2.0 * v.norm_sqr() })
            .sum()
    }
}

// (x, y) with x + y <= k, row by row in x; row x holds k - x + 1 entries.
fn tri_index(k: usize, x: usize, y: usize) -> usize {
    debug_assert!(x + y <= k);
    x * (k + 1) - x * x.saturating_sub(1) / 2 + y
}

/// Every element of `sigma = Tr_b rho` at time t.
pub fn reduced_density_matrix(params: &ModelParams, t: f64) -> Result<ReducedDensityMatrix> {
    params.validate()?;
    check_time(t)?;
    let n = params.n_a;
    if n > MAX_REDUCED_N {
        return Err(Error::Size {
            what: "N",
            value: u64::from(n),
            max: u64::from(MAX_REDUCED_N),
        });
    }
    let ln_fact: Vec<f64> = (0..=n).map(ln_fact_u32).collect();
    let lf = |k: u32| ln_fact[k as usize];
    let mut offsets = Vec::with_capacity(n as usize + 1);
    let mut elements = Vec::new();
    for z in 0..=n {
        offsets.push(elements.len());
        let block = BlockLabel::new(z as i32, 0);
        let la = block_coefficients(params, block, t);
        let lb = block_coefficients(params, block.swapped(), t);
        let base = LogProduct::one()
            .mul_pow2(-i64::from(z))
            .mul_log_real(-0.5 * (params.gamma0 + params.gamma1) * f64::from(z) * t)
            .mul_pow_log(lb.ln_at_one(), u64::from(params.n_b));
        for x in 0..=n - z {
            for y in 0..=n - z - x {
                elements.push(side_log(base, &la, n, z, x, y, &lf).value());
            }
        }
    }
    Ok(ReducedDensityMatrix { n, offsets, elements })
}

/// `S_lin = 1 - Tr sigma^2` of the reduced state of subsystem a.
pub fn linear_entropy(params: &ModelParams, t: f64) -> Result<f64> {
    let sigma = reduced_density_matrix(params, t)?;
    // Rounding can push the purity of a pure state a few ulp above 1.
    Ok((1.0 - sigma.purity()).max(0.0))
}
