use std::path::Path;

use anyhow::anyhow;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use spinloss::bec::{log_n_grid, plan_sweep, BecConfig};
use spinloss::charfunc::linear_entropy;
use spinloss::correlators::{correlator_set, rotated_moments};
use spinloss::epr::{epr_from_moments, epr_value_in, EprOptimum};
use spinloss::trajectories::{
    husimi_block, husimi_pure, mc_evolve, phase_grid, single_loss_block, trajectory_after_loss, HusimiGrid,
    TrajectoryState,
};
use spinloss::verify::{run_oracle_check, OracleCheckConfig, SuiteStatus};

use crate::config::{self, BecSweepConfig, CorrelatorsConfig, EntropyConfig, EprScanConfig, HusimiConfig, TrajectoriesConfig};
use crate::output::{label, num, opt, Output};

pub enum Failure {
    /// Bad flags or config: exit 1.
    Usage(String),
    /// Exit 2.
    Compute(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<spinloss::Error> for Failure {
    fn from(e: spinloss::Error) -> Self {
        Failure::Compute(e.into())
    }
}

pub struct Report {
    /// Resolved configuration, recorded in the manifest.
    pub config: Value,
    /// False only when oracle-check found a failing suite.
    pub passed: bool,
}

fn report(config: &impl Serialize) -> Result<Report, Failure> {
    Ok(Report {
        config: serde_json::to_value(config).map_err(|e| Failure::Compute(e.into()))?,
        passed: true,
    })
}

fn load<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    config::load(path).map_err(Failure::Usage)
}

pub fn entropy(path: Option<&Path>, out: &mut Output) -> Result<Report, Failure> {
    let cfg: EntropyConfig = load(path)?;
    let params = cfg.params().map_err(Failure::Usage)?;
    let times = cfg.times();
    let columns = params
        .iter()
        .map(|p| times.par_iter().map(|&t| linear_entropy(p, t)).collect::<spinloss::Result<Vec<f64>>>())
        .collect::<spinloss::Result<Vec<_>>>()?;

    let mut header = vec!["t".to_string(), "chi_ab_t".to_string()];
    header.extend(cfg.gammas.iter().map(|g| format!("s_lin_gamma_{}", label(*g))));
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut row = vec![num(t), num(cfg.chi_ab * t)];
            row.extend(columns.iter().map(|c| num(c[k])));
            row
        })
        .collect();
    out.csv("entropy.csv", &header, &rows)?;
    report(&cfg)
}

#[derive(Serialize)]
struct ScanMinimum {
    n: u32,
    lossy: Option<(f64, f64)>,
    lossless: Option<(f64, f64)>,
}

// Smallest defined value and its chi_ab t.
fn minimum(values: &[Option<f64>], x: &[f64]) -> Option<(f64, f64)> {
    values
        .iter()
        .zip(x)
        .filter_map(|(v, x)| v.map(|v| (v, *x)))
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.0 <= cur.0 => Some(b),
            _ => Some(cur),
        })
}

pub fn epr_scan(path: Option<&Path>, out: &mut Output) -> Result<Report, Failure> {
    let cfg: EprScanConfig = load(path)?;
    let pairs = cfg.params().map_err(Failure::Usage)?;
    let times = cfg.times();
    let chi_ab_t: Vec<f64> = times.iter().map(|t| t.1).collect();
    let scan = |p: &spinloss::ModelParams| -> spinloss::Result<Vec<Option<f64>>> {
        times
            .par_iter()
            .map(|&(t, _)| Ok(epr_value_in(p, t, cfg.alpha, cfg.beta, cfg.plane)?.e2()))
            .collect()
    };
    let mut columns = Vec::new();
    let mut header = vec!["t".to_string(), "chi_ab_t".to_string()];
    let mut minima = Vec::new();
    for (lossy, lossless) in &pairs {
        let a = scan(lossy)?;
        let b = scan(lossless)?;
        header.push(format!("e2_n{}", lossy.n_a));
        header.push(format!("e2_lossless_n{}", lossy.n_a));
        minima.push(ScanMinimum {
            n: lossy.n_a,
            lossy: minimum(&a, &chi_ab_t),
            lossless: minimum(&b, &chi_ab_t),
        });
        columns.push(a);
        columns.push(b);
    }
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(k, &(t, x))| {
            let mut row = vec![num(t), num(x)];
            row.extend(columns.iter().map(|c| opt(c[k])));
            row
        })
        .collect();
    out.csv("epr_scan.csv", &header, &rows)?;

    let min_rows: Vec<Vec<String>> = minima
        .iter()
        .map(|m| {
            vec![
                m.n.to_string(),
                opt(m.lossy.map(|v| v.0)),
                opt(m.lossy.map(|v| v.1)),
                opt(m.lossless.map(|v| v.0)),
                opt(m.lossless.map(|v| v.1)),
            ]
        })
        .collect();
    out.csv(
        "epr_scan_minima.csv",
        &["n", "e2_min", "chi_ab_t_min", "e2_min_lossless", "chi_ab_t_min_lossless"],
        &min_rows,
    )?;
    report(&cfg)
}

#[derive(Serialize)]
struct PanelSummary {
    panel: &'static str,
    description: String,
    max: f64,
    integral: f64,
    /// `(phi_a, phi_b, Q)` of the local maxima above 1e-3 of the maximum.
    peaks: Vec<(f64, f64, f64)>,
}

fn panel(name: &'static str, description: String, q: &HusimiGrid) -> PanelSummary {
    PanelSummary {
        panel: name,
        description,
        max: q.max(),
        integral: q.integral(),
        peaks: q.local_maxima(1e-3).iter().map(|&(i, j, v)| (q.phi_a[i], q.phi_b[j], v)).collect(),
    }
}

fn husimi_rows(q: &HusimiGrid) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(q.values.len());
    for (i, a) in q.phi_a.iter().enumerate() {
        for (j, b) in q.phi_b.iter().enumerate() {
            rows.push(vec![num(*a), num(*b), num(q.get(i, j))]);
        }
    }
    rows
}

pub fn husimi(path: Option<&Path>, out: &mut Output) -> Result<Report, Failure> {
    let cfg: HusimiConfig = load(path)?;
    let p = cfg.params().map_err(Failure::Usage)?;
    let t = cfg.chi_ab_t / cfg.chi_ab.abs();
    let g = phase_grid(cfg.grid);

    let mut no_loss = TrajectoryState::initial(&p);
    no_loss.evolve_no_jump(&p, t);
    let a = husimi_pure(&no_loss, &g, &g)?;
    let block = single_loss_block(&p, cfg.channel, t, cfg.quadrature_nodes)?;
    let b = husimi_block(&block.rho, block.n_a, block.n_b, &g, &g)?;
    let singles = cfg
        .t1s
        .iter()
        .map(|x| husimi_pure(&trajectory_after_loss(&p, cfg.channel, t, x / cfg.chi_ab.abs()), &g, &g))
        .collect::<spinloss::Result<Vec<_>>>()?;

    let header = ["phi_a", "phi_b", "q"];
    out.csv("husimi_a.csv", &header, &husimi_rows(&a))?;
    out.csv("husimi_b.csv", &header, &husimi_rows(&b))?;
    out.csv("husimi_c.csv", &header, &husimi_rows(&singles[0]))?;
    out.csv("husimi_d.csv", &header, &husimi_rows(&singles[1]))?;
    let ch = cfg.channel.name();
    let summary = json!({
        "t": t,
        "chi_ab_t": cfg.chi_ab_t,
        "one_loss_block": {
            "channel": ch,
            "trace": block.trace(),
            "quadrature_nodes": block.nodes,
            "last_change": block.change,
        },
        "panels": [
            panel("a", "no particle lost".into(), &a),
            panel("b", format!("one particle lost from {ch}, averaged over the loss time (unnormalized)"), &b),
            panel("c", format!("one particle lost from {ch} at chi_ab t1 = {}", cfg.t1s[0]), &singles[0]),
            panel("d", format!("one particle lost from {ch} at chi_ab t1 = {}", cfg.t1s[1]), &singles[1]),
        ],
    });
    out.json("husimi_summary.json", &summary)?;
    report(&cfg)
}

pub fn trajectories(path: Option<&Path>, seed: u64, out: &mut Output) -> Result<Report, Failure> {
    let cfg: TrajectoriesConfig = load(path)?;
    let p = cfg.params().map_err(Failure::Usage)?;
    let est = mc_evolve(&p, cfg.t, cfg.n_trajectories, seed, cfg.method)?;
    let exact = correlator_set(&p, cfg.t)?;

    let mut rows = Vec::new();
    let mut z_scores = serde_json::Map::new();
    for (((name, m), (_, se)), (_, x)) in est.mean.fields().iter().zip(est.std_err.fields()).zip(exact.fields()).skip(1) {
        // Fields that vanish by symmetry carry only rounding noise.
        let z = if (m - x).abs() <= 1e-12 {
            0.0
        } else if se > 0.0 {
            (m - x) / se
        } else {
            f64::NAN
        };
        rows.push(vec![name.to_string(), num(*m), num(se), num(x), num(z)]);
        z_scores.insert(name.to_string(), if z.is_finite() { json!(z) } else { Value::Null });
    }
    out.csv("mc.csv", &["field", "mc_mean", "mc_std_err", "closed_form", "z"], &rows)?;
    out.json(
        "mc.json",
        &json!({
            "estimate": est,
            "closed_form": exact,
            "z_scores": z_scores,
        }),
    )?;
    report(&cfg)
}

pub fn bec_sweep(path: Option<&Path>, out: &mut Output) -> Result<Report, Failure> {
    let cfg: BecSweepConfig = load(path)?;
    cfg.validate().map_err(Failure::Usage)?;
    let n_grid = log_n_grid(cfg.n_min, cfg.n_max, cfg.n_points);
    let header = [
        "n",
        "e2_min",
        "t_opt",
        "chi_ab_t_opt",
        "alpha",
        "beta",
        "chi",
        "chi_ab",
        "gamma",
        "gamma_eff",
    ];
    for trap in &cfg.traps {
        let bec = BecConfig::from(*trap);
        for model in &cfg.models {
            let points = plan_sweep(&bec, &n_grid, *model, &cfg.grid)?;
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|pt| {
                    let r = pt.optimum.result();
                    vec![
                        pt.n.to_string(),
                        opt(r.map(|r| r.e2)),
                        opt(r.map(|r| r.t_opt)),
                        opt(r.map(|r| r.t_opt * pt.rates.chi_ab)),
                        opt(r.map(|r| r.alpha)),
                        opt(r.map(|r| r.beta)),
                        num(pt.rates.chi),
                        num(pt.rates.chi_ab),
                        num(pt.gamma),
                        num(pt.rates.gamma_eff),
                    ]
                })
                .collect();
            if points.iter().all(|pt| matches!(pt.optimum, EprOptimum::NoValidOptimum)) {
                eprintln!("warning: no valid optimum anywhere for {} Hz, {}", trap.omega_hz, model.name());
            }
            out.csv(&format!("bec_{}hz_{}.csv", label(trap.omega_hz), model.name()), &header, &rows)?;
        }
    }
    report(&cfg)
}

pub fn oracle_check(path: Option<&Path>, inject_sign_flip: bool, out: &mut Output) -> Result<Report, Failure> {
    let mut cfg: OracleCheckConfig = load(path)?;
    cfg.inject_sign_flip |= inject_sign_flip;
    if cfg.sizes.is_empty() && cfg.unitary_sizes.is_empty() {
        return Err(Failure::Usage("sizes and unitary_sizes are both empty".into()));
    }
    let suites = run_oracle_check(&cfg)?;
    println!("{:<22} {:>9} {:>12} {:>8} {:>9}  status", "suite", "tolerance", "max_dev", "checks", "time_s");
    for s in &suites {
        let status = match &s.status {
            SuiteStatus::Passed => "PASS".to_string(),
            SuiteStatus::Failed { detail } => format!("FAIL ({detail})"),
            SuiteStatus::Skipped { reason } => format!("SKIPPED: {reason}"),
        };
        println!(
            "{:<22} {:>9.1e} {:>12.3e} {:>8} {:>9.2}  {}",
            s.name, s.tolerance, s.max_deviation, s.checks, s.runtime_s, status
        );
        if matches!(s.status, SuiteStatus::Failed { .. }) {
            println!("    worst case: {}", s.worst_case);
        }
    }
    let passed = suites.iter().all(|s| s.passed());
    println!("{}", if passed { "all suites passed" } else { "oracle check FAILED" });
    out.json("oracle_check.json", &json!({ "passed": passed, "suites": suites }))?;
    let mut r = report(&cfg)?;
    r.passed = passed;
    Ok(r)
}

pub fn correlators(path: Option<&Path>, out: &mut Output) -> Result<Report, Failure> {
    let cfg: CorrelatorsConfig = load(path)?;
    let p = cfg.params().map_err(Failure::Usage)?;
    let times = cfg.times();
    let sets = times
        .par_iter()
        .map(|&t| correlator_set(&p, t))
        .collect::<spinloss::Result<Vec<_>>>()?;
    let first = sets.first().ok_or_else(|| anyhow!("empty time grid"))?;
    let mut header = vec!["t".to_string(), "chi_ab_t".to_string()];
    header.extend(first.fields().iter().skip(1).map(|(n, _)| n.to_string()));
    header.push("e2_epr".into());
    let rows: Vec<Vec<String>> = sets
        .iter()
        .map(|s| {
            let mut row = vec![num(s.t), num(cfg.chi_ab * s.t)];
            row.extend(s.fields().iter().skip(1).map(|(_, v)| num(*v)));
            let e2 = if p.n_a > 0 && p.n_b > 0 {
                epr_from_moments(&rotated_moments(s, cfg.alpha, cfg.beta, cfg.plane), p.n_a).e2()
            } else {
                None
            };
            row.push(opt(e2));
            row
        })
        .collect();
    out.csv("correlators.csv", &header, &rows)?;
    report(&cfg)
}
