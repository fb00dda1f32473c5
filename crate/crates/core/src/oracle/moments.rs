//! Spin moments read directly off a dense state by operator products.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::correlators::CorrelatorSet;
use crate::fock::{FockBasis, SparseOp, Subsystem};

/// The spin operators of both subsystems on one basis.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    a: [SparseOp; 3],
    b: [SparseOp; 3],
    n_a: SparseOp,
    n_b: SparseOp,
}

impl SpinOperators {
    pub fn new(basis: &FockBasis) -> Self {
        let side = |s| [basis.sx(s), basis.sy(s), basis.sz(s)];
        Self {
            a: side(Subsystem::A),
            b: side(Subsystem::B),
            n_a: basis.diagonal(|s| f64::from(s.n_a())),
            n_b: basis.diagonal(|s| f64::from(s.n_b())),
        }
    }

    /// Every [`CorrelatorSet`] field from `<O> = Tr(O rho)`.
    pub fn correlators(&self, rho: &DMatrix<Complex64>, t: f64) -> CorrelatorSet {
        let ev = |op: &SparseOp| op.expectation(rho).re;
        let anti = |x: &SparseOp, y: &SparseOp| ev(&x.mul(y).add(&y.mul(x)));
        let prod = |x: &SparseOp, y: &SparseOp| ev(&x.mul(y));
        let [ax, ay, az] = &self.a;
        let [bx, by, bz] = &self.b;
        CorrelatorSet {
            t,
            sx_a: ev(ax),
            sy_a: ev(ay),
            sz_a: ev(az),
            n_of_t: ev(&self.n_a),
            sx2_a: prod(ax, ax),
            sy2_a: prod(ay, ay),
            sz2_a: prod(az, az),
            anti_xy_a: anti(ax, ay),
            anti_xz_a: anti(ax, az),
            anti_yz_a: anti(ay, az),
            sx_b: ev(bx),
            sy_b: ev(by),
            sz_b: ev(bz),
            n_of_t_b: ev(&self.n_b),
            sx2_b: prod(bx, bx),
            sy2_b: prod(by, by),
            sz2_b: prod(bz, bz),
            anti_xy_b: anti(bx, by),
            anti_xz_b: anti(bx, bz),
            anti_yz_b: anti(by, bz),
            sxsx_ab: prod(ax, bx),
            sxsy_ab: prod(ax, by),
            sxsz_ab: prod(ax, bz),
            sysx_ab: prod(ay, bx),
            sysy_ab: prod(ay, by),
            sysz_ab: prod(ay, bz),
            szsx_ab: prod(az, bx),
            szsy_ab: prod(az, by),
            szsz_ab: prod(az, bz),
        }
    }

    pub fn correlators_pure(&self, psi: &[Complex64], t: f64) -> CorrelatorSet {
        let v = nalgebra::DVector::from_column_slice(psi);
        self.correlators(&(&v * v.adjoint()), t)
    }
}
