// One PASS/FAIL line per acceptance criterion; run with
// `cargo test -p spinloss-core --test acceptance -- --nocapture --test-threads 1`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinloss::bec::{log_n_grid, plan_sweep, BecConfig, LossModel};
use spinloss::charfunc::{h, linear_entropy, pde_residual, pde_terms, reduced_density_matrix};
use spinloss::correlators::correlator_set;
use spinloss::epr::{epr_value, GridSpec};
use spinloss::fock::FockBasis;
use spinloss::numerics::ln_factorial;
use spinloss::oracle::moments::SpinOperators;
use spinloss::oracle::unitary::overlap;
use spinloss::oracle::unitary_evolve;
use spinloss::trajectories::{husimi_pure, mc_evolve, phase_grid, McMethod, TrajectoryState};
use spinloss::verify::{
    cat_state, density_deviation, epr_deviation, one_loss_deviation, oracle_run, partial_trace_b, OracleCheckConfig,
};
use spinloss::{BlockLabel, ModelParams};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn line(label: &str, pass: bool, detail: &str) -> bool {
    println!("{} {label}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

// Criterion verdict: every sub-check plus the runtime budget.
fn verdict(number: u32, name: &str, checks: &[bool], elapsed: Duration, budget: Duration) {
    let in_time = elapsed <= budget;
    let pass = checks.iter().all(|c| *c) && in_time;
    println!(
        "{} criterion {number} ({name}): {:.2} s of {:.0} s budget",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(pass, "criterion {number} failed");
}

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let cfg = OracleCheckConfig::default();
    let times = cfg.times();
    let (mut dens, mut corr, mut red, mut slin, mut e2_abs, mut e2_scaled): (f64, f64, f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut e2_worst = String::new();
    let mut largest = 0.0_f64;
    for n in [2u32, 3, 4] {
        for g in [0.0, 0.01, 0.05] {
            let p = ModelParams::symmetric(n, 1.0, 1.0, g);
            let run = oracle_run(&p, &times).unwrap();
            let basis = run.system.basis();
            let ops = SpinOperators::new(basis);
            for s in &run.states {
                dens = dens.max(density_deviation(&p, basis, s).unwrap());
                corr = corr.max(correlator_set(&p, s.t).unwrap().max_deviation(&ops.correlators(&s.rho, s.t)));
                let (labels, oracle) = partial_trace_b(basis, &s.rho);
                let sigma = reduced_density_matrix(&p, s.t).unwrap();
                for (i, ki) in labels.iter().enumerate() {
                    for (j, kj) in labels.iter().enumerate() {
                        red = red.max((oracle[(i, j)] - sigma.element(*ki, *kj)).norm());
                    }
                }
                let s_oracle = 1.0 - (&oracle * &oracle).trace().re;
                slin = slin.max((s_oracle - linear_entropy(&p, s.t).unwrap()).abs());
                let d = epr_deviation(&p, n, &ops, s).unwrap();
                if d.absolute > e2_abs {
                    e2_abs = d.absolute;
                    e2_worst = format!("N={n} gamma={g} t={:.4} (E^2 = {:.3e})", s.t, d.largest);
                }
                e2_scaled = e2_scaled.max(d.scaled);
                largest = largest.max(d.largest);
            }
        }
    }
    let tol = 1e-8;
    let checks = [
        line("1a density-matrix elements", dens < tol, &format!("max |dev| = {dens:.2e} < {tol:e}")),
        line("1b correlators", corr < tol, &format!("max |dev| = {corr:.2e} < {tol:e}")),
        line("1c reduced density matrix", red < tol, &format!("max |dev| = {red:.2e} < {tol:e}")),
        line("1d linear entropy", slin < tol, &format!("max |dev| = {slin:.2e} < {tol:e}")),
        line(
            "1e E^2_EPR, absolute",
            e2_abs < tol,
            &format!(
                "max |dev| = {e2_abs:.2e} at {e2_worst}; E^2 reaches {largest:.2e} where <S_x^a> nearly vanishes, \
                 so 1e-8 absolute asks for ~1e-16 relative agreement, below the oracle's integration error"
            ),
        ),
        line(
            "1e' E^2_EPR, relative to max(1, E^2)",
            e2_scaled < tol,
            &format!("max = {e2_scaled:.2e} < {tol:e}"),
        ),
    ];
    verdict(1, "oracle equivalence", &checks, start.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_2_pde_residual() {
    let start = Instant::now();
    let sets = [
        ModelParams::new(3, 2, 1.0, 0.7, 0.05, 0.02),
        ModelParams::symmetric(4, 0.0, 1.0, 0.01),
        ModelParams::new(5, 3, 0.3, 1.2, 0.0, 0.0),
        ModelParams::new(6, 6, -0.8, 0.4, 0.3, 0.1),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for k in 0..100 {
        let p = &sets[k % sets.len()];
        let z = rng.gen_range(-(p.n_a as i32)..=p.n_a as i32);
        let r = rng.gen_range(-(p.n_b as i32)..=p.n_b as i32);
        let pt: [Complex64; 4] =
            std::array::from_fn(|_| Complex64::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)));
        let t = rng.gen_range(0.05..3.0);
        let b = BlockLabel::new(z, r);
        let scale = pde_terms(p, b, pt, t, 1e-5).unwrap().lhs.norm().max(1.0);
        let res = pde_residual(p, b, (pt[0], pt[1], pt[2], pt[3], t), 1e-5).unwrap();
        worst = worst.max(res / scale);
    }
    let checks = [line("2 residual / max(1, |dh/dt|)", worst < 1e-6, &format!("max = {worst:.2e} < 1e-6 over 100 points"))];
    verdict(2, "PDE residual", &checks, start.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_3_trace_and_initial_conditions() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut trace_dev = 0.0_f64;
    for _ in 0..1000 {
        let p = ModelParams::new(
            rng.gen_range(0..=100_000),
            rng.gen_range(0..=100_000),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.0..0.5),
            rng.gen_range(0.0..0.5),
        );
        let t = 10f64.powf(rng.gen_range(-3.0..2.0));
        trace_dev = trace_dev.max((h(&p, BlockLabel::new(0, 0), ONE, ONE, ONE, ONE, t).unwrap() - ONE).norm());
    }

    let (n, m) = (12u32, 12u32);
    let p = ModelParams::new(n, m, 0.7, 1.3, 0.1, 0.05);
    let c = Complex64::new;
    let pts = [
        [ONE, ONE, ONE, ONE],
        [c(0.3, 0.1), c(-0.2, 0.5), c(1.1, 0.0), c(0.0, -0.7)],
        [c(0.9, -0.4), c(0.1, 0.1), c(-0.6, 0.2), c(0.5, 0.5)],
    ];
    let mut init_dev = 0.0_f64;
    for z in -(n as i32)..=n as i32 {
        for r in -(m as i32)..=m as i32 {
            let (za, ra) = (z.unsigned_abs(), r.unsigned_abs());
            let ln_pref = -f64::from(n + m) * std::f64::consts::LN_2 + ln_factorial(n.into()) + ln_factorial(m.into())
                - ln_factorial((n - za).into())
                - ln_factorial((m - ra).into());
            for x in pts {
                let want = ln_pref.exp() * (x[0] + x[1]).powu(n - za) * (x[2] + x[3]).powu(m - ra);
                let got = h(&p, BlockLabel::new(z, r), x[0], x[1], x[2], x[3], 0.0).unwrap();
                init_dev = init_dev.max((got - want).norm() / want.norm().max(1.0));
            }
        }
    }
    let checks = [
        line("3a trace block at (1,1,1,1)", trace_dev < 1e-12, &format!("max |h - 1| = {trace_dev:.2e} over 1000 draws")),
        line("3b initial condition, all blocks N=M=12", init_dev < 1e-12, &format!("max dev = {init_dev:.2e}")),
    ];
    verdict(3, "trace and initial conditions", &checks, start.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_4_cat_state() {
    let start = Instant::now();
    let n = 10;
    let p = ModelParams::symmetric(n, 0.0, 1.0, 0.0);
    let basis = FockBasis::sector(n, n);
    let psi = unitary_evolve(&p, &basis, &basis.initial_state(), PI).unwrap();
    let ov = overlap(&psi, &cat_state(n, n));
    let g = phase_grid(64);
    let q = husimi_pure(&TrajectoryState::from_amplitudes(n, n, psi), &g, &g).unwrap();
    let peaks = q.local_maxima(1e-3);
    let spread = peaks.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max)
        - peaks.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    let checks = [
        line("4a overlap with the four-phase cat", ov >= 1.0 - 1e-10, &format!("1 - overlap = {:.2e}", 1.0 - ov)),
        line("4b four Husimi maxima", peaks.len() == 4, &format!("{} local maxima", peaks.len())),
        line("4c equal heights", spread < 1e-9, &format!("height spread = {spread:.2e}")),
    ];
    verdict(4, "cat state", &checks, start.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_5_single_loss_block() {
    let start = Instant::now();
    let p = ModelParams::symmetric(3, 1.0, 1.0, 0.05);
    let run = oracle_run(&p, &[1.0]).unwrap();
    let dev = one_loss_deviation(&p, run.system.basis(), &run.states[0], 16).unwrap();
    let checks = [line("5 Frobenius distance to the N+M-1 sector", dev < 1e-6, &format!("{dev:.2e}"))];
    verdict(5, "single-loss block", &checks, start.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_6_monte_carlo() {
    let start = Instant::now();
    let p = ModelParams::symmetric(6, 1.0, 1.0, 0.01);
    let t = 1.0;
    let est = mc_evolve(&p, t, 10_000, 6, McMethod::WaitingTime).unwrap();
    let again = mc_evolve(&p, t, 10_000, 6, McMethod::WaitingTime).unwrap();
    let exact = correlator_set(&p, t).unwrap();
    let z = |m: f64, e: f64, se: f64| (m - e) / se;
    let zs = [
        ("<S_x^a>", z(est.mean.sx_a, exact.sx_a, est.std_err.sx_a)),
        ("<(S_y^a)^2>", z(est.mean.sy2_a, exact.sy2_a, est.std_err.sy2_a)),
        ("<S_y^a S_y^b>", z(est.mean.sysy_ab, exact.sysy_ab, est.std_err.sysy_ab)),
    ];
    let mut checks: Vec<bool> = zs
        .iter()
        .map(|(name, z)| line(&format!("6 {name} within 3 standard errors"), z.abs() < 3.0, &format!("z = {z:+.2}")))
        .collect();
    checks.push(line("6 fixed seed reruns", est == again, if est == again { "bit-identical" } else { "differ" }));
    verdict(6, "Monte Carlo consistency", &checks, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_7_fig2_scan() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..600).map(|k| 10f64.powf(-6.0 + 6.0 * k as f64 / 599.0)).collect();
    // (N, min lossy, t at min, min lossless, pointwise lossless <= lossy
    // where lossless E^2 < 1, violations above 1, smallest E^2 at one)
    let mut rows = Vec::new();
    for n in [100u32, 1000, 10_000, 50_000] {
        let lossy = ModelParams::symmetric(n, 0.0, 1.0, 1.0);
        let lossless = lossy.lossless();
        let (mut best, mut t_best, mut best_ll, mut below) = (f64::INFINITY, 0.0, f64::INFINITY, true);
        let (mut outside, mut outside_min) = (0, f64::INFINITY);
        for &t in &grid {
            let e = epr_value(&lossy, t, 0.0, 0.0).unwrap().e2();
            let e0 = epr_value(&lossless, t, 0.0, 0.0).unwrap().e2();
            if let Some(e) = e {
                if e < best {
                    best = e;
                    t_best = t;
                }
            }
            if let Some(e0) = e0 {
                best_ll = best_ll.min(e0);
            }
            if let (Some(e), Some(e0)) = (e, e0) {
                if e0 < 1.0 {
                    below &= e0 <= e + 1e-12;
                } else if e0 > e + 1e-12 {
                    outside += 1;
                    outside_min = outside_min.min(e0);
                }
            }
        }
        println!("     N={n}: min E^2 = {best:.4e} at chi_ab t = {t_best:.3e}; lossless min {best_ll:.4e}");
        rows.push((n, best, t_best, best_ll, below, outside, outside_min));
    }
    let checks = [
        line("7a every scan dips below 1", rows.iter().all(|r| r.1 < 1.0), ""),
        line("7b minimum deepens with N", rows.windows(2).all(|w| w[1].1 < w[0].1), ""),
        line("7c minimum moves to smaller chi_ab t", rows.windows(2).all(|w| w[1].2 < w[0].2), ""),
        line("7d lossless minimum lower at every N", rows.iter().all(|r| r.3 < r.1), ""),
        line(
            "7d' lossless curve lower wherever it is below 1",
            rows.iter().all(|r| r.4),
            &format!(
                "past the dip, where E^2 > {:.1}, loss lowers E^2 at {} grid points",
                rows.iter().map(|r| r.6).fold(f64::INFINITY, f64::min),
                rows.iter().map(|r| r.5).sum::<usize>()
            ),
        ),
    ];
    verdict(7, "E^2 scan", &checks, start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_8_fig5_sweep() {
    let start = Instant::now();
    let ns = log_n_grid(100, 1_000_000, 30);
    let grid = GridSpec::default();
    let e2 = |omega_hz: f64, model: LossModel| -> Vec<f64> {
        plan_sweep(&BecConfig::rubidium(omega_hz), &ns, model, &grid)
            .unwrap()
            .iter()
            .map(|p| p.optimum.result().map_or(f64::NAN, |r| r.e2))
            .collect()
    };
    let full = e2(1000.0, LossModel::Full);
    let (k, best) = full.iter().enumerate().fold((0, f64::INFINITY), |b, (i, v)| if *v < b.1 { (i, *v) } else { b });
    let interior = k > 0 && k + 1 < ns.len() && best < full[0] && best < full[ns.len() - 1];

    let one_body = e2(200.0, LossModel::OneBody);
    let lossless = e2(200.0, LossModel::None);
    // "Large N": the upper decade and a half of the grid.
    let tail: Vec<usize> = (0..ns.len()).filter(|&i| ns[i] >= 30_000).collect();
    let literal = tail.windows(2).all(|w| one_body[w[1]] >= one_body[w[0]]);
    let ratio = |i: usize| one_body[i] / lossless[i];
    let relative = tail.windows(2).all(|w| ratio(w[1]) > ratio(w[0]));
    let tail_desc: Vec<String> = tail.iter().map(|&i| format!("{}:{:.3e}", ns[i], one_body[i])).collect();
    let checks = [
        line(
            "8a 1000 Hz full losses: interior optimum",
            interior,
            &format!("min E^2 = {best:.4e} at N = {} (ends {:.3e}, {:.3e})", ns[k], full[0], full[ns.len() - 1]),
        ),
        line(
            "8b 200 Hz one-body: min E^2 non-decreasing for N >= 3e4",
            literal,
            &format!(
                "[{}]; frozen chi ~ N^-3/5 makes t_opt ~ N^-1/15 shrink, so the loss floor K1 t_opt keeps falling",
                tail_desc.join(", ")
            ),
        ),
        line(
            "8b' 200 Hz one-body: damage relative to lossless grows for N >= 3e4",
            relative,
            &format!("ratio {:.2} -> {:.2}", ratio(tail[0]), ratio(*tail.last().unwrap())),
        ),
    ];
    verdict(8, "condensate sweep", &checks, start.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_9_epr_at_time_zero() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let p = ModelParams::new(
            rng.gen_range(1..=100_000),
            rng.gen_range(1..=100_000),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
        );
        let (a, b) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        worst = worst.max((epr_value(&p, 0.0, a, b).unwrap().e2().unwrap() - 1.0).abs());
    }
    let checks = [line("9 |E^2(0) - 1|", worst < 1e-12, &format!("max = {worst:.2e} over 1000 draws"))];
    verdict(9, "E^2 at t = 0", &checks, start.elapsed(), Duration::from_secs(5));
}
