use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinloss::charfunc::{
    block_coefficients, density_element, h, linear_entropy, pde_residual, pde_terms, reduced_density_matrix,
};
use spinloss::fock::{FockBasis, FockLabel};
use spinloss::numerics::{ln_factorial, log_binomial};
use spinloss::oracle::lindblad::DenseState;
use spinloss::oracle::unitary_evolve;
use spinloss::{BlockLabel, ElementIndex, ModelParams};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_params(rng: &mut impl Rng, max_n: u32) -> ModelParams {
    ModelParams::new(
        rng.gen_range(0..=max_n),
        rng.gen_range(0..=max_n),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(0.0..0.5),
        rng.gen_range(0.0..0.5),
    )
}

#[test]
fn trace_block_is_one_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let p = random_params(&mut rng, 100_000);
        let t = 10f64.powf(rng.gen_range(-3.0..2.0));
        let v = h(&p, BlockLabel::new(0, 0), ONE, ONE, ONE, ONE, t).unwrap();
        assert!((v - ONE).norm() < 1e-12, "{p:?} t={t}: {v}");
        let l = block_coefficients(&p, BlockLabel::new(0, 0), t);
        assert!(l.minus_one.norm() < 1e-12);
    }
}

// Printed initial condition:
// 2^-(N+M) N! M! / ((N-z)! (M-r)!) (X+Y)^(N-z) (U+V)^(M-r).
fn initial_condition(n: u32, m: u32, z: u32, r: u32, x: [Complex64; 4]) -> Complex64 {
    let ln_pref = -f64::from(n + m) * std::f64::consts::LN_2 + ln_factorial(n.into()) + ln_factorial(m.into())
        - ln_factorial((n - z).into())
        - ln_factorial((m - r).into());
    ln_pref.exp() * (x[0] + x[1]).powu(n - z) * (x[2] + x[3]).powu(m - r)
}

#[test]
fn initial_condition_for_every_block() {
    let (n, m) = (12u32, 12u32);
    let p = ModelParams::new(n, m, 0.7, 1.3, 0.1, 0.05);
    let pts = [
        [ONE, ONE, ONE, ONE],
        [c(0.3, 0.1), c(-0.2, 0.5), c(1.1, 0.0), c(0.0, -0.7)],
        [c(0.9, -0.4), c(0.1, 0.1), c(-0.6, 0.2), c(0.5, 0.5)],
    ];
    for z in -(n as i32)..=n as i32 {
        for r in -(m as i32)..=m as i32 {
            let b = BlockLabel::new(z, r);
            let l = block_coefficients(&p, b, 0.0);
            assert_eq!(l.p, c(0.0, 0.0));
            assert!((l.q - 0.5).norm() < 1e-15 && (l.s - 0.5).norm() < 1e-15);
            for x in pts {
                let got = h(&p, b, x[0], x[1], x[2], x[3], 0.0).unwrap();
                let want = initial_condition(n, m, z.unsigned_abs(), r.unsigned_abs(), x);
                assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0), "({z},{r}) {x:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn detuned_block_coefficients() {
    // z = 1, r = 0, chi = 0.3: alpha = -0.3, so A = -0.3i and
    // L(1, 1, 1) = (e^{0.3i} + e^{-0.3i}) / 2 = cos 0.3.
    let p = ModelParams::new(3, 3, 0.3, 0.0, 0.0, 0.0);
    let l = block_coefficients(&p, BlockLabel::new(1, 0), 1.0);
    assert!((l.a_rate - c(0.0, -0.3)).norm() < 1e-15);
    assert!((l.at_one() - c(0.3f64.cos(), 0.0)).norm() < 1e-14);
}

#[test]
fn coherence_block_matches_unitary_oracle() {
    let p = ModelParams::new(4, 4, 0.6, 1.0, 0.0, 0.0);
    let basis = FockBasis::sector(4, 4);
    for t in [0.3, 1.1, 2.9] {
        let psi = unitary_evolve(&p, &basis, &basis.initial_state(), t).unwrap();
        let rho = DenseState::pure(&psi, t).rho;
        // <a0^dag a1> = sum sqrt((x+1)(y+1)) <x, y+1| rho |x+1, y>.
        let mut want = c(0.0, 0.0);
        for (i, k) in basis.states().iter().enumerate() {
            if k.n1 == 0 {
                continue;
            }
            let bra = FockLabel::new(k.n0 + 1, k.n1 - 1, k.m0, k.m1);
            let j = basis.index_of(&bra).unwrap();
            want += f64::from((k.n0 + 1) * k.n1).sqrt() * rho[(i, j)];
        }
        let got = h(&p, BlockLabel::new(1, 0), ONE, ONE, ONE, ONE, t).unwrap();
        assert!((got - want).norm() < 1e-10, "t={t}: {got} vs {want}");
    }
}

#[test]
fn pde_is_satisfied_on_random_points() {
    let sets = [
        ModelParams::new(3, 2, 1.0, 0.7, 0.05, 0.02),
        ModelParams::symmetric(4, 0.0, 1.0, 0.01),
        ModelParams::new(5, 3, 0.3, 1.2, 0.0, 0.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for p in &sets {
        for _ in 0..100 {
            let z = rng.gen_range(-(p.n_a as i32)..=p.n_a as i32);
            let r = rng.gen_range(-(p.n_b as i32)..=p.n_b as i32);
            let pt: [Complex64; 4] = std::array::from_fn(|_| c(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)));
            let t = rng.gen_range(0.05..3.0);
            let b = BlockLabel::new(z, r);
            let terms = pde_terms(p, b, pt, t, 1e-5).unwrap();
            let scale = terms.lhs.norm().max(1.0);
            let res = pde_residual(p, b, (pt[0], pt[1], pt[2], pt[3], t), 1e-5).unwrap();
            worst = worst.max(res / scale);
            assert!(res < 1e-6 * scale, "{p:?} ({z},{r}) {pt:?} t={t}: {res}");
        }
    }
    assert!(worst < 1e-6);
}

#[test]
fn pde_examples() {
    let lossless = ModelParams::symmetric(3, 1.0, 1.0, 0.0);
    assert!(pde_residual(&lossless, BlockLabel::new(0, 0), (ONE, ONE, ONE, ONE, 0.5), 1e-5).unwrap() < 1e-6);
    let lossy = ModelParams::symmetric(3, 1.0, 1.0, 0.01);
    let b = BlockLabel::new(1, 1);
    let pt = [c(0.4, 0.2), c(0.7, -0.1), c(-0.3, 0.3), c(0.5, 0.0)];
    let terms = pde_terms(&lossy, b, pt, 0.8, 1e-5).unwrap();
    let res = pde_residual(&lossy, b, (pt[0], pt[1], pt[2], pt[3], 0.8), 1e-5).unwrap();
    assert!(res < 1e-6 * terms.lhs.norm().max(1.0));
    assert!(pde_residual(&lossy, b, (ONE, ONE, ONE, ONE, 0.5), 0.1).is_err());
}

#[test]
fn doubled_rates_do_not_satisfy_the_equation() {
    // The same equation with every rate doubled (drift A, B and the
    // (|z|+|r|) decay term) is not solved by the closed form.
    let p = ModelParams::new(3, 2, 1.0, 0.7, 0.05, 0.02);
    let b = BlockLabel::new(1, -1);
    let pt = [c(0.4, 0.2), c(0.7, -0.1), c(-0.3, 0.3), c(0.5, 0.0)];
    let (t, step) = (0.8, 1e-5);
    let eval = |x: [Complex64; 4], t: f64| h(&p, b, x[0], x[1], x[2], x[3], t).unwrap();
    let la = block_coefficients(&p, b, t);
    let lb = block_coefficients(&p, b.swapped(), t);
    let drift = [
        p.gamma0 - 2.0 * la.a_rate * pt[0],
        p.gamma1 - 2.0 * la.b_rate * pt[1],
        p.gamma0 - 2.0 * lb.a_rate * pt[2],
        p.gamma1 - 2.0 * lb.b_rate * pt[3],
    ];
    let mut rhs = -(p.gamma0 + p.gamma1) * 2.0 * eval(pt, t);
    for (k, d) in drift.iter().enumerate() {
        let (mut hi, mut lo) = (pt, pt);
        hi[k] += step;
        lo[k] -= step;
        rhs += d * (eval(hi, t) - eval(lo, t)) / (2.0 * step);
    }
    let lhs = (eval(pt, t + step) - eval(pt, t - step)) / (2.0 * step);
    assert!((lhs - rhs).norm() > 1e-2 * lhs.norm().max(1.0), "{lhs} vs {rhs}");
    assert!(pde_residual(&p, b, (pt[0], pt[1], pt[2], pt[3], t), step).unwrap() < 1e-6 * lhs.norm().max(1.0));
}

#[test]
fn initial_diagonal_elements_are_binomial() {
    let p = ModelParams::symmetric(2, 1.0, 1.0, 0.1);
    let v = density_element(&p, BlockLabel::new(0, 0), ElementIndex::new(1, 1, 1, 1), 0.0).unwrap();
    assert!((v - c(0.25, 0.0)).norm() < 1e-15);
    let p = ModelParams::new(7, 5, 1.0, 1.0, 0.1, 0.1);
    for n0 in 0..=7u32 {
        for m0 in 0..=5u32 {
            let v = density_element(&p, BlockLabel::new(0, 0), ElementIndex::new(n0, 7 - n0, m0, 5 - m0), 0.0).unwrap();
            let want = (log_binomial(7, n0.into()).unwrap() + log_binomial(5, m0.into()).unwrap()).exp() / 4096.0;
            assert!((v.re - want).abs() < 1e-15 && v.im.abs() < 1e-15);
        }
    }
}

#[test]
fn density_elements_are_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let p = ModelParams::new(
            rng.gen_range(1..=6),
            rng.gen_range(1..=6),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.0..0.2),
            rng.gen_range(0.0..0.2),
        );
        let t = rng.gen_range(0.0..4.0);
        let z = rng.gen_range(-(p.n_a as i32)..=p.n_a as i32);
        let r = rng.gen_range(-(p.n_b as i32)..=p.n_b as i32);
        let sa = rng.gen_range(0..=p.n_a - z.unsigned_abs());
        let sb = rng.gen_range(0..=p.n_b - r.unsigned_abs());
        let x = rng.gen_range(0..=sa);
        let u = rng.gen_range(0..=sb);
        let idx = ElementIndex::new(x, sa - x, u, sb - u);
        let b = BlockLabel::new(z, r);
        let (ket, bra) = idx.ket_bra(b);
        let (b2, idx2) = ElementIndex::from_ket_bra(bra, ket).unwrap();
        assert_eq!(b2, b.conjugate());
        let v = density_element(&p, b, idx, t).unwrap();
        let w = density_element(&p, b2, idx2, t).unwrap();
        assert!((v - w.conj()).norm() < 1e-14 * v.norm().max(1e-300) + 1e-300, "{v} vs {w}");
    }
}

#[test]
fn reduced_state_at_zero_is_the_coherent_projector() {
    let p = ModelParams::new(9, 4, 1.0, 1.0, 0.05, 0.05);
    let sigma = reduced_density_matrix(&p, 0.0).unwrap();
    assert!((sigma.trace() - 1.0).abs() < 1e-14);
    assert!((sigma.purity() - 1.0).abs() < 1e-13);
    for k in 0..=9u32 {
        for l in 0..=9u32 {
            let want = 0.5 * (log_binomial(9, k.into()).unwrap() + log_binomial(9, l.into()).unwrap()) - 9.0 * std::f64::consts::LN_2;
            let v = sigma.element((k, 9 - k), (l, 9 - l));
            assert!((v - c(want.exp(), 0.0)).norm() < 1e-14);
        }
    }
    assert!(linear_entropy(&p, 0.0).unwrap() < 1e-14);
}

#[test]
fn lossless_entropy_exact_values() {
    let p = ModelParams::symmetric(10, 1.0, 1.0, 0.0);
    assert!((linear_entropy(&p, PI).unwrap() - 0.5).abs() < 1e-12);
    assert!(linear_entropy(&p, 2.0 * PI).unwrap() < 1e-12);
    let lossy = ModelParams::symmetric(10, 1.0, 1.0, 0.01);
    // One loss on average (Gamma (N+M) t ~ 1) destroys the revival.
    assert!(linear_entropy(&lossy, 2.0 * PI).unwrap() > 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn linear_entropy_obeys_the_purity_bound(
        n in 1u32..=12,
        m in 1u32..=12,
        chi in -1.5f64..1.5,
        chi_ab in -1.5f64..1.5,
        g0 in 0.0f64..0.3,
        g1 in 0.0f64..0.3,
        t in 0.0f64..8.0,
    ) {
        let p = ModelParams::new(n, m, chi, chi_ab, g0, g1);
        let s = linear_entropy(&p, t).unwrap();
        // The support of sigma spans every particle number 0..=N, so the
        // purity bound is the one of the (N+1)(N+2)/2-dimensional space;
        // without losses only the N+1 states of the full sector appear.
        let d = if g0 == 0.0 && g1 == 0.0 { f64::from(n + 1) } else { f64::from((n + 1) * (n + 2) / 2) };
        prop_assert!(s >= 0.0 && s <= 1.0 - 1.0 / d + 1e-12, "S_lin = {s}");
        if g0 == 0.0 && g1 == 0.0 {
            prop_assert!(s <= 1.0 - 1.0 / f64::from(n + 1) + 1e-12);
        }
    }
}
