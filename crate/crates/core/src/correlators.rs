//! Closed-form first and second spin moments, read off the characteristic
//! functions at `X = Y = U = V = 1` (and their first derivatives).
//!
//! Every second moment is assembled from `f_{z,r}(t) = L_{z,r}(1, 1, t)`
//! raised to large powers; these are carried as logarithms and differences
//! close to zero use `expm1` so that short-time covariances keep full
//! relative accuracy even for N ~ 10^5.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charfunc::{block_coefficients, BlockCoefficients};
use crate::model::{BlockLabel, ModelParams};
use crate::numerics::cexpm1;
use crate::{Error, Result};

/// `alpha` is the detuning entering `L_{z,r}` (see
/// [`ModelParams::detuning`]); `value` is `f_{z,r}(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayKernel {
    pub alpha: f64,
    pub value: Complex64,
}

pub fn decay_kernel(params: &ModelParams, z: i32, r: i32, t: f64) -> DecayKernel {
    let c = block_coefficients(params, BlockLabel::new(z, r), t);
    DecayKernel {
        alpha: c.alpha,
        value: c.at_one(),
    }
}

fn coeffs(params: &ModelParams, z: i32, r: i32, t: f64) -> BlockCoefficients {
    block_coefficients(params, BlockLabel::new(z, r), t)
}

fn ln_f(params: &ModelParams, z: i32, r: i32, t: f64) -> Complex64 {
    coeffs(params, z, r, t).ln_at_one()
}

/// Spin moments at time `t`. Suffix `_a`/`_b` marks the subsystem, `_ab`
/// a cross moment `<S_i^a S_j^b>`; `anti_ij` is `<S_i S_j + S_j S_i>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSet {
    pub t: f64,
    pub sx_a: f64,
    pub sy_a: f64,
    pub sz_a: f64,
    pub n_of_t: f64,
    pub sx2_a: f64,
    pub sy2_a: f64,
    pub sz2_a: f64,
    pub anti_xy_a: f64,
    pub anti_xz_a: f64,
    pub anti_yz_a: f64,
    pub sx_b: f64,
    pub sy_b: f64,
    pub sz_b: f64,
    pub n_of_t_b: f64,
    pub sx2_b: f64,
    pub sy2_b: f64,
    pub sz2_b: f64,
    pub anti_xy_b: f64,
    pub anti_xz_b: f64,
    pub anti_yz_b: f64,
    pub sxsx_ab: f64,
    pub sxsy_ab: f64,
    pub sxsz_ab: f64,
    pub sysx_ab: f64,
    pub sysy_ab: f64,
    pub sysz_ab: f64,
    pub szsx_ab: f64,
    pub szsy_ab: f64,
    pub szsz_ab: f64,
}

impl CorrelatorSet {
    /// Relabel a <-> b.
    pub fn swapped(&self) -> Self {
        Self {
            t: self.t,
            sx_a: self.sx_b,
            sy_a: self.sy_b,
            sz_a: self.sz_b,
            n_of_t: self.n_of_t_b,
            sx2_a: self.sx2_b,
            sy2_a: self.sy2_b,
            sz2_a: self.sz2_b,
            anti_xy_a: self.anti_xy_b,
            anti_xz_a: self.anti_xz_b,
            anti_yz_a: self.anti_yz_b,
            sx_b: self.sx_a,
            sy_b: self.sy_a,
            sz_b: self.sz_a,
            n_of_t_b: self.n_of_t,
            sx2_b: self.sx2_a,
            sy2_b: self.sy2_a,
            sz2_b: self.sz2_a,
            anti_xy_b: self.anti_xy_a,
            anti_xz_b: self.anti_xz_a,
            anti_yz_b: self.anti_yz_a,
            sxsx_ab: self.sxsx_ab,
            sxsy_ab: self.sysx_ab,
            sxsz_ab: self.szsx_ab,
            sysx_ab: self.sxsy_ab,
            sysy_ab: self.sysy_ab,
            sysz_ab: self.szsy_ab,
            szsx_ab: self.sxsz_ab,
            szsy_ab: self.sysz_ab,
            szsz_ab: self.szsz_ab,
        }
    }

    /// Field names and values in declaration order.
    pub fn fields(&self) -> [(&'static str, f64); 30] {
        [
            ("t", self.t),
            ("sx_a", self.sx_a),
            ("sy_a", self.sy_a),
            ("sz_a", self.sz_a),
            ("n_of_t", self.n_of_t),
            ("sx2_a", self.sx2_a),
            ("sy2_a", self.sy2_a),
            ("sz2_a", self.sz2_a),
            ("anti_xy_a", self.anti_xy_a),
            ("anti_xz_a", self.anti_xz_a),
            ("anti_yz_a", self.anti_yz_a),
            ("sx_b", self.sx_b),
            ("sy_b", self.sy_b),
            ("sz_b", self.sz_b),
            ("n_of_t_b", self.n_of_t_b),
            ("sx2_b", self.sx2_b),
            ("sy2_b", self.sy2_b),
            ("sz2_b", self.sz2_b),
            ("anti_xy_b", self.anti_xy_b),
            ("anti_xz_b", self.anti_xz_b),
            ("anti_yz_b", self.anti_yz_b),
            ("sxsx_ab", self.sxsx_ab),
            ("sxsy_ab", self.sxsy_ab),
            ("sxsz_ab", self.sxsz_ab),
            ("sysx_ab", self.sysx_ab),
            ("sysy_ab", self.sysy_ab),
            ("sysz_ab", self.sysz_ab),
            ("szsx_ab", self.szsx_ab),
            ("szsy_ab", self.szsy_ab),
            ("szsz_ab", self.szsz_ab),
        ]
    }

    /// Inverse of [`fields`](Self::fields).
    pub fn from_values(v: [f64; 30]) -> Self {
        Self {
            t: v[0],
            sx_a: v[1],
            sy_a: v[2],
            sz_a: v[3],
            n_of_t: v[4],
            sx2_a: v[5],
            sy2_a: v[6],
            sz2_a: v[7],
            anti_xy_a: v[8],
            anti_xz_a: v[9],
            anti_yz_a: v[10],
            sx_b: v[11],
            sy_b: v[12],
            sz_b: v[13],
            n_of_t_b: v[14],
            sx2_b: v[15],
            sy2_b: v[16],
            sz2_b: v[17],
            anti_xy_b: v[18],
            anti_xz_b: v[19],
            anti_yz_b: v[20],
            sxsx_ab: v[21],
            sxsy_ab: v[22],
            sxsz_ab: v[23],
            sysx_ab: v[24],
            sysy_ab: v[25],
            sysz_ab: v[26],
            szsx_ab: v[27],
            szsy_ab: v[28],
            szsz_ab: v[29],
        }
    }

    /// Largest absolute field difference, ignoring `t`.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.fields()
            .iter()
            .zip(other.fields().iter())
            .skip(1)
            .map(|(a, b)| (a.1 - b.1).abs())
            .fold(0.0, f64::max)
    }

    fn mean(&self, side: Side) -> [f64; 3] {
        match side {
            Side::A => [self.sx_a, self.sy_a, self.sz_a],
            Side::B => [self.sx_b, self.sy_b, self.sz_b],
        }
    }

    // Symmetrized local second moments <(S_i S_j + S_j S_i)/2>.
    fn local(&self, side: Side) -> [[f64; 3]; 3] {
        let (xx, yy, zz, xy, xz, yz) = match side {
            Side::A => (self.sx2_a, self.sy2_a, self.sz2_a, self.anti_xy_a, self.anti_xz_a, self.anti_yz_a),
            Side::B => (self.sx2_b, self.sy2_b, self.sz2_b, self.anti_xy_b, self.anti_xz_b, self.anti_yz_b),
        };
        [
            [xx, xy / 2.0, xz / 2.0],
            [xy / 2.0, yy, yz / 2.0],
            [xz / 2.0, yz / 2.0, zz],
        ]
    }

    fn cross(&self) -> [[f64; 3]; 3] {
        [
            [self.sxsx_ab, self.sxsy_ab, self.sxsz_ab],
            [self.sysx_ab, self.sysy_ab, self.sysz_ab],
            [self.szsx_ab, self.szsy_ab, self.szsz_ab],
        ]
    }
}

#[derive(Debug, Clone, Copy)]
enum Side {
    A,
    B,
}

struct Local {
    sx: f64,
    sy: f64,
    sz: f64,
    n_of_t: f64,
    sx2: f64,
    sy2: f64,
    sz2: f64,
    anti_xy: f64,
    anti_xz: f64,
    anti_yz: f64,
}

fn local_moments(p: &ModelParams, t: f64) -> Local {
    let n = f64::from(p.n_a);
    let m = u64::from(p.n_b);
    let (e0, e1) = ((-p.gamma0 * t).exp(), (-p.gamma1 * t).exp());
    let half_decay = (-0.5 * (p.gamma0 + p.gamma1) * t).exp();

    let ln_h10 = ln_f(p, 1, 0, t) * f64::from(p.n_a - 1) + ln_f(p, 0, 1, t) * m as f64;
    let h10 = 0.5 * n * half_decay * ln_h10.exp();

    let n_of_t = 0.5 * n * (e0 + e1);
    let sz = 0.25 * n * (e0 - e1);
    let sz2 = 0.25 * n_of_t + n * (n - 1.0) * (e0 - e1).powi(2) / 16.0;

    // <S_+^2> = pair/2 * exp(ln2), pair = N(N-1) e0 e1 / 2.
    let pair = 0.5 * n * (n - 1.0) * e0 * e1;
    let (sx2, sy2, anti_xy, anti) = if p.n_a >= 2 {
        let ln2 = ln_f(p, 2, 0, t) * f64::from(p.n_a - 2) + ln_f(p, 0, 2, t) * m as f64;
        let c = coeffs(p, 1, 0, t);
        let ln_anti = ln_f(p, 1, 0, t) * f64::from(p.n_a - 2) + ln_f(p, 0, 1, t) * m as f64;
        let anti = 0.5 * n * (n - 1.0) * half_decay * ln_anti.exp() * (c.q - c.s);
        let rel = ln2.exp();
        (
            0.25 * (n_of_t + pair * (1.0 + rel.re)),
            0.25 * (n_of_t - pair * cexpm1(ln2).re),
            0.5 * pair * rel.im,
            anti,
        )
    } else {
        (0.25 * n_of_t, 0.25 * n_of_t, 0.0, Complex64::new(0.0, 0.0))
    };
    Local {
        sx: h10.re,
        sy: h10.im,
        sz,
        n_of_t,
        sx2,
        sy2,
        sz2,
        anti_xy,
        anti_xz: anti.re,
        anti_yz: anti.im,
    }
}

// <S_+^a S_z^b>.
fn plus_z(p: &ModelParams, t: f64) -> Complex64 {
    let (n, m) = (f64::from(p.n_a), f64::from(p.n_b));
    let half_decay = (-0.5 * (p.gamma0 + p.gamma1) * t).exp();
    let b = coeffs(p, 0, 1, t);
    let ln = ln_f(p, 1, 0, t) * f64::from(p.n_a - 1) + b.ln_at_one() * f64::from(p.n_b - 1);
    0.25 * n * m * half_decay * ln.exp() * (b.q - b.s)
}

// <S_i^a S_j^b> for i, j in {x, y}.
struct Transverse {
    xx: f64,
    xy: f64,
    yx: f64,
    yy: f64,
}

// The (-1, 1) exponent is the conjugate of the (1, -1) one; using that
// identity literally makes swapping a and b conjugate <S_+^a S_-^b> bit for
// bit, and every output below is written so that the swap relabels it
// exactly.
fn transverse_cross(params: &ModelParams, t: f64) -> Transverse {
    let (n, m) = (f64::from(params.n_a), f64::from(params.n_b));
    let c = 0.25 * n * m * (-(params.gamma0 + params.gamma1) * t).exp();
    let (k_a, k_b) = (f64::from(params.n_a - 1), f64::from(params.n_b - 1));
    let ln11 = ln_f(params, 1, 1, t) * (k_a + k_b);
    let u = ln_f(params, 1, -1, t);
    let w = u * k_a + u.conj() * k_b;
    // <S_+^a S_+^b> - e^w via expm1; at w and at conj(w) this gives
    // <S_+^a S_+^b> - <S_+^a S_-^b> and <S_+^a S_+^b> - <S_-^a S_+^b>.
    let pp = c * ln11.exp();
    let pm = c * w.exp();
    let diff = |w: Complex64| c * w.exp() * cexpm1(ln11 - w);
    let (d, d_conj) = (diff(w), diff(w.conj()));

    Transverse {
        xx: 0.5 * (pp.re + pm.re),
        xy: 0.5 * d.im,
        yx: 0.5 * d_conj.im,
        yy: -0.25 * (d.re + d_conj.re),
    }
}

/// All moments at time `t` for `N, M >= 1`.
pub fn correlator_set(params: &ModelParams, t: f64) -> Result<CorrelatorSet> {
    params.validate_entangling()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and non-negative, got {t}")));
    }
    let a = local_moments(params, t);
    let swapped = params.swapped();
    let b = local_moments(&swapped, t);

    let transverse = transverse_cross(params, t);

    let pz = plus_z(params, t);
    let zp = plus_z(&swapped, t);

    Ok(CorrelatorSet {
        t,
        sx_a: a.sx,
        sy_a: a.sy,
        sz_a: a.sz,
        n_of_t: a.n_of_t,
        sx2_a: a.sx2,
        sy2_a: a.sy2,
        sz2_a: a.sz2,
        anti_xy_a: a.anti_xy,
        anti_xz_a: a.anti_xz,
        anti_yz_a: a.anti_yz,
        sx_b: b.sx,
        sy_b: b.sy,
        sz_b: b.sz,
        n_of_t_b: b.n_of_t,
        sx2_b: b.sx2,
        sy2_b: b.sy2,
        sz2_b: b.sz2,
        anti_xy_b: b.anti_xy,
        anti_xz_b: b.anti_xz,
        anti_yz_b: b.anti_yz,
        sxsx_ab: transverse.xx,
        sxsy_ab: transverse.xy,
        sxsz_ab: pz.re,
        sysx_ab: transverse.yx,
        sysy_ab: transverse.yy,
        sysz_ab: pz.im,
        szsx_ab: zp.re,
        szsy_ab: zp.im,
        szsz_ab: a.sz * b.sz,
    })
}

/// Plane of the EPR quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadraturePlane {
    /// Perpendicular to the mean spin:
    /// `X^a = cos a S_y^a + sin a S_z^a`, `P^a = -sin a S_y^a + cos a S_z^a`,
    /// `X^b = cos b S_z^b - sin b S_y^b`, `P^b = cos b S_y^b + sin b S_z^b`.
    /// The b pair is turned by a quarter period so that, at `b = 0`, each
    /// a-quadrature is inferred from the b-component it is sheared by;
    /// `[X^a, P^a] = i S_x^a`.
    #[default]
    Yz,
    /// `X = cos a S_x + sin a S_y`, `P = -sin a S_x + cos a S_y` on both
    /// sides; `[X^a, P^a] = i S_z^a`.
    Xy,
}

/// Quadrature variances and covariances for given angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedMoments {
    pub var_xa: f64,
    pub var_pa: f64,
    pub var_xb: f64,
    pub var_pb: f64,
    pub cov_x: f64,
    pub cov_p: f64,
    /// `|<[X^a, P^a]>|`.
    pub commutator: f64,
    pub mean_xa: f64,
    pub mean_pa: f64,
    pub mean_xb: f64,
    pub mean_pb: f64,
}

/// Coefficient vectors over (S_x, S_y, S_z) of (X^a, P^a, X^b, P^b).
pub fn quadrature_vectors(plane: QuadraturePlane, alpha: f64, beta: f64) -> [[f64; 3]; 4] {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    match plane {
        QuadraturePlane::Yz => [[0.0, ca, sa], [0.0, -sa, ca], [0.0, -sb, cb], [0.0, cb, sb]],
        QuadraturePlane::Xy => [[ca, sa, 0.0], [-sa, ca, 0.0], [cb, sb, 0.0], [-sb, cb, 0.0]],
    }
}

fn dot(u: &[f64; 3], v: &[f64; 3]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn bilinear(u: &[f64; 3], m: &[[f64; 3]; 3], v: &[f64; 3]) -> f64 {
    (0..3).map(|i| (0..3).map(|j| u[i] * m[i][j] * v[j]).sum::<f64>()).sum()
}

pub fn rotated_moments(set: &CorrelatorSet, alpha: f64, beta: f64, plane: QuadraturePlane) -> RotatedMoments {
    let [xa, pa, xb, pb] = quadrature_vectors(plane, alpha, beta);
    let (ma, mb) = (set.mean(Side::A), set.mean(Side::B));
    let (la, lb, cr) = (set.local(Side::A), set.local(Side::B), set.cross());
    let var = |u: &[f64; 3], l: &[[f64; 3]; 3], mean: &[f64; 3]| bilinear(u, l, u) - dot(u, mean).powi(2);
    let cov = |u: &[f64; 3], v: &[f64; 3]| bilinear(u, &cr, v) - dot(u, &ma) * dot(v, &mb);
    let commutator = match plane {
        QuadraturePlane::Yz => set.sx_a.abs(),
        QuadraturePlane::Xy => set.sz_a.abs(),
    };
    RotatedMoments {
        var_xa: var(&xa, &la, &ma),
        var_pa: var(&pa, &la, &ma),
        var_xb: var(&xb, &lb, &mb),
        var_pb: var(&pb, &lb, &mb),
        cov_x: cov(&xa, &xb),
        cov_p: cov(&pa, &pb),
        commutator,
        mean_xa: dot(&xa, &ma),
        mean_pa: dot(&pa, &ma),
        mean_xb: dot(&xb, &mb),
        mean_pb: dot(&pb, &mb),
    }
}
