use std::f64::consts::PI;

use num_complex::Complex64;
use spinloss::correlators::correlator_set;
use spinloss::fock::{FockBasis, Mode};
use spinloss::oracle::unitary::overlap;
use spinloss::oracle::{unitary_evolve, DenseState, LindbladSystem};
use spinloss::oracle::integrate::Tolerance;
use spinloss::trajectories::{
    husimi_block, husimi_pure, mc_density, mc_evolve, phase_grid, phase_noise_form, single_loss_block,
    trajectory_after_loss, McMethod, TrajectoryState,
};
use spinloss::verify::{cat_state, one_loss_deviation};
use spinloss::ModelParams;

fn oracle_at(p: &ModelParams, t: f64) -> (LindbladSystem, DenseState) {
    let sys = LindbladSystem::new(p).unwrap();
    let (mut s, _) = sys.evolve_to(&DenseState::initial(sys.basis()), &[t], &Tolerance::default()).unwrap();
    let state = s.pop().unwrap();
    (sys, state)
}

#[test]
fn one_loss_block_matches_lindblad_sector() {
    let p = ModelParams::symmetric(3, 1.0, 1.0, 0.05);
    let (sys, state) = oracle_at(&p, 1.0);
    let dev = one_loss_deviation(&p, sys.basis(), &state, 8).unwrap();
    assert!(dev < 1e-6, "Frobenius deviation {dev:e}");
}

#[test]
fn weak_loss_block_is_linear_in_gamma() {
    let t = 1.3;
    let trace = |g: f64| single_loss_block(&ModelParams::symmetric(4, 1.0, 1.0, g), Mode::A0, t, 8).unwrap().trace();
    let g = 1e-6;
    // Half of the N particles sit in mode 0.
    let first_order = g * 4.0 * t / 2.0;
    // Corrections are of relative order Gamma (N + M) t.
    let second_order = g * 8.0 * t;
    assert!((trace(g) / first_order - 1.0).abs() < second_order);
    assert!((trace(2.0 * g) / trace(g) - 2.0).abs() < 4.0 * second_order);
}

#[test]
fn printed_phase_noise_coefficient_differs_from_propagators() {
    // Two loss times are related by the rotation
    // exp[i (t1 - t1') (chi_ab/2 S_z^b - c chi S_z^a)] up to a scalar. The
    // propagators give c = 1; c = 3 does not reproduce them.
    let p = ModelParams::symmetric(4, 1.0, 1.0, 0.02);
    let (t, t1, t2) = (2.0, 0.4, 1.5);
    let a = trajectory_after_loss(&p, Mode::A0, t, t1);
    let b = trajectory_after_loss(&p, Mode::A0, t, t2);
    let rotate = |c: f64| -> Vec<Complex64> {
        let basis = FockBasis::sector(3, 4);
        basis
            .states()
            .iter()
            .zip(&b.amplitudes)
            .map(|(s, amp)| amp * Complex64::from_polar(1.0, (t1 - t2) * (p.chi_ab / 2.0 * s.sz_b() - c * p.chi * s.sz_a())))
            .collect()
    };
    let fidelity = |v: &[Complex64]| overlap(&a.amplitudes, v) / (a.weight.sqrt() * b.weight.sqrt());
    assert!((fidelity(&rotate(1.0)) - 1.0).abs() < 1e-12);
    assert!(fidelity(&rotate(3.0)) < 0.99);
    for t1 in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let direct = trajectory_after_loss(&p, Mode::A1, t, t1);
        let form = phase_noise_form(&p, Mode::A1, t, t1);
        let dev = direct.amplitudes.iter().zip(&form.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-10);
    }
}

#[test]
fn monte_carlo_reproduces_closed_forms() {
    let p = ModelParams::symmetric(6, 1.0, 1.0, 0.01);
    let t = 1.0;
    let est = mc_evolve(&p, t, 10_000, 2024, McMethod::WaitingTime).unwrap();
    let exact = correlator_set(&p, t).unwrap();
    for ((name, m), ((_, e), (_, se))) in est
        .mean
        .fields()
        .iter()
        .zip(exact.fields().iter().zip(est.std_err.fields().iter()))
        .skip(1)
    {
        // Fields that are exactly zero have zero spread in every trajectory.
        assert!((m - e).abs() <= 4.0 * se + 1e-12, "{name}: mc {m} +- {se}, closed {e}");
    }
}

#[test]
fn fixed_seed_is_bit_identical_across_pool_sizes() {
    let p = ModelParams::symmetric(4, 1.0, 0.7, 0.05);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_evolve(&p, 2.0, 1000, 77, McMethod::WaitingTime).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    let other_seed = mc_evolve(&p, 2.0, 1000, 78, McMethod::WaitingTime).unwrap();
    assert_ne!(one.mean, other_seed.mean);
}

#[test]
fn trajectory_average_matches_lindblad() {
    let p = ModelParams::symmetric(3, 1.0, 1.0, 0.05);
    let t = 2.0;
    let n = 4000;
    let mc = mc_density(&p, t, n, 5, McMethod::WaitingTime).unwrap();
    let (sys, state) = oracle_at(&p, t);
    let mut chi2 = 0.0;
    let mut count = 0;
    let mut worst: f64 = 0.0;
    for i in 0..sys.dim() {
        for j in 0..sys.dim() {
            let d = (mc.rho[(i, j)] - state.rho[(i, j)]).norm();
            let se = mc.std_err[(i, j)];
            if se == 0.0 {
                // Never sampled: the true value must be below the resolution.
                assert!(d < 3.0 / n as f64, "unsampled element ({i}, {j}) differs by {d:e}");
                continue;
            }
            chi2 += (d / se).powi(2);
            worst = worst.max(d / se);
            count += 1;
        }
    }
    let mean_chi2 = chi2 / count as f64;
    assert!(worst < 6.0, "largest deviation {worst} standard errors");
    assert!(mean_chi2 < 2.0, "mean squared z-score {mean_chi2}");

    // Probability of exactly one loss against the oracle's sector trace.
    let est = mc_evolve(&p, t, n, 5, McMethod::WaitingTime).unwrap();
    let basis = sys.basis();
    let one_loss: f64 = (0..basis.dim())
        .filter(|&i| basis.label(i).n_a() + basis.label(i).n_b() == 5)
        .map(|i| state.rho[(i, i)].re)
        .sum();
    assert!((est.loss_probability[1] - one_loss).abs() < 3.0 * est.loss_std_err(1));
}

#[test]
fn fixed_step_scheme_agrees_with_waiting_times() {
    let p = ModelParams::symmetric(3, 1.0, 1.0, 0.1);
    let exact = mc_evolve(&p, 1.5, 3000, 1, McMethod::WaitingTime).unwrap();
    let stepped = mc_evolve(&p, 1.5, 3000, 2, McMethod::FixedStep { dt: 1e-3 }).unwrap();
    for (name, a, b, ea, eb) in [
        ("sx_a", exact.mean.sx_a, stepped.mean.sx_a, exact.std_err.sx_a, stepped.std_err.sx_a),
        ("sy2_a", exact.mean.sy2_a, stepped.mean.sy2_a, exact.std_err.sy2_a, stepped.std_err.sy2_a),
        ("n_of_t", exact.mean.n_of_t, stepped.mean.n_of_t, exact.std_err.n_of_t, stepped.std_err.n_of_t),
    ] {
        assert!((a - b).abs() < 4.0 * (ea * ea + eb * eb).sqrt(), "{name}: {a} vs {b}");
    }
}

fn cat_grid(n: u32, chi: f64, t: f64) -> spinloss::trajectories::HusimiGrid {
    let p = ModelParams::symmetric(n, chi, 1.0, 0.0);
    let basis = FockBasis::sector(n, n);
    let psi = unitary_evolve(&p, &basis, &basis.initial_state(), t).unwrap();
    let g = phase_grid(64);
    husimi_pure(&TrajectoryState::from_amplitudes(n, n, psi), &g, &g).unwrap()
}

#[test]
fn cat_state_has_four_equal_peaks() {
    let basis = FockBasis::sector(10, 10);
    let p = ModelParams::symmetric(10, 0.0, 1.0, 0.0);
    let psi = unitary_evolve(&p, &basis, &basis.initial_state(), PI).unwrap();
    assert!(overlap(&psi, &cat_state(10, 10)) >= 1.0 - 1e-10);

    let q = cat_grid(10, 0.0, PI);
    let peaks = q.local_maxima(1e-3);
    assert_eq!(peaks.len(), 4, "{peaks:?}");
    let mut at: Vec<(f64, f64)> = peaks.iter().map(|(i, j, _)| (q.phi_a[*i].abs(), q.phi_b[*j].abs())).collect();
    at.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(at, vec![(0.0, 0.0), (0.0, PI), (PI, 0.0), (PI, PI)]);
    let h0 = peaks[0].2;
    assert!(peaks.iter().all(|(_, _, h)| (h - h0).abs() < 1e-9));
    assert!(q.values.iter().all(|v| *v >= 0.0 && *v <= 1.0 + 1e-12));
}

// Half width at half maximum of the phi_b marginal around its highest
// point, in grid cells, with linear interpolation on both flanks.
fn width_along_b(q: &spinloss::trajectories::HusimiGrid) -> f64 {
    let nb = q.phi_b.len();
    let marginal: Vec<f64> = (0..nb).map(|j| (0..q.phi_a.len()).map(|i| q.get(i, j)).sum()).collect();
    let (j, vmax) = marginal.iter().enumerate().fold((0, 0.0), |best, (j, v)| if *v > best.1 { (j, *v) } else { best });
    let at = |k: i64| marginal[k.rem_euclid(nb as i64) as usize] / vmax;
    let flank = |dir: i64| {
        let mut k = 0;
        while at(j as i64 + dir * (k + 1)) >= 0.5 {
            k += 1;
        }
        let (hi, lo) = (at(j as i64 + dir * k), at(j as i64 + dir * (k + 1)));
        k as f64 + (hi - 0.5) / (hi - lo)
    };
    0.5 * (flank(1) + flank(-1))
}

#[test]
fn lost_particle_smears_peaks_along_phi_b() {
    let p = ModelParams::symmetric(10, 1.0, 1.0, 0.01);
    let t = PI;
    let g = phase_grid(64);
    let mut psi = TrajectoryState::initial(&p);
    psi.evolve_no_jump(&p, t);
    let a = husimi_pure(&psi, &g, &g).unwrap();
    let block = single_loss_block(&p, Mode::A0, t, 16).unwrap();
    let b = husimi_block(&block.rho, block.n_a, block.n_b, &g, &g).unwrap();
    assert!(width_along_b(&b) > 1.2 * width_along_b(&a), "{} vs {}", width_along_b(&b), width_along_b(&a));

    // Single trajectories: same shape, rotated with the loss time.
    let c = husimi_pure(&trajectory_after_loss(&p, Mode::A0, t, PI / 4.0), &g, &g).unwrap();
    let d = husimi_pure(&trajectory_after_loss(&p, Mode::A0, t, 3.0 * PI / 4.0), &g, &g).unwrap();
    let pc = c.local_maxima(0.5);
    let pd = d.local_maxima(0.5);
    assert_eq!(pc.len(), pd.len());
    assert!((c.max() - d.max()).abs() < 1e-9);
    assert_ne!(pc.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>(), pd.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>());

    let empty = single_loss_block(&p.lossless(), Mode::A0, t, 16).unwrap();
    assert_eq!(empty.trace(), 0.0);
}

#[test]
fn husimi_integral_is_set_by_the_sz_distribution() {
    // Equatorial phase states resolve only the S_z populations: the integral
    // is 4 pi^2 sum_k |c_k|^2 C(N,n0) C(M,m0) / 2^(N+M), hence constant
    // under the Ising evolution, which only changes phases.
    let n = 6;
    let g = phase_grid(256);
    let basis = FockBasis::sector(n, n);
    let psi0 = basis.initial_state();
    let weight: f64 = psi0.iter().map(|c| c.norm_sqr() * c.norm_sqr()).sum::<f64>() * 4.0 * PI * PI;
    for (chi, t) in [(0.0, 0.0), (0.0, 1.0), (1.0, PI), (0.3, 2.2)] {
        let q = cat_grid(n, chi, t);
        let fine = husimi_pure(
            &TrajectoryState::from_amplitudes(
                n,
                n,
                unitary_evolve(&ModelParams::symmetric(n, chi, 1.0, 0.0), &basis, &psi0, t).unwrap(),
            ),
            &g,
            &g,
        )
        .unwrap();
        assert!((fine.integral() / weight - 1.0).abs() < 5e-3);
        assert!((q.integral() / weight - 1.0).abs() < 5e-3);
    }
}
