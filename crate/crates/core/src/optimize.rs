//! Nelder-Mead simplex minimization.
//!
//! Objective values of `None` or NaN count as +inf, so infeasible or
//! undefined regions simply repel the simplex.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop once every vertex lies within this distance of the best one.
    pub diameter_tol: f64,
    pub max_evaluations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            diameter_tol: 1e-6,
            max_evaluations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Whether the diameter criterion was met before the evaluation cap.
    pub converged: bool,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Minimize `f` starting from the simplex `start + steps[i] e_i`.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> Option<f64>,
    start: &[f64],
    steps: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    let n = start.len();
    assert_eq!(steps.len(), n, "one initial step per coordinate");
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        match f(x) {
            Some(v) if !v.is_nan() => v,
            _ => f64::INFINITY,
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), eval(start, &mut evaluations)));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += steps[i];
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }

    let mut converged = false;
    loop {
        // Stable sort keeps the earlier vertex first among equal values.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| distance(x, &simplex[0].0))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        if evaluations >= opts.max_evaluations {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |k: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + k * (c - w)).collect()
        };
        let worst = simplex[n].0.clone();
        let (best_v, second_worst_v, worst_v) = (simplex[0].1, simplex[n - 1].1, simplex[n].1);

        let xr = along(1.0, &worst);
        let vr = eval(&xr, &mut evaluations);
        if vr < best_v {
            let xe = along(2.0, &worst);
            let ve = eval(&xe, &mut evaluations);
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < second_worst_v {
            simplex[n] = (xr, vr);
            continue;
        }
        // Contraction, outside or inside.
        let (xc, vc) = if vr < worst_v {
            let xc = along(0.5, &worst);
            let vc = eval(&xc, &mut evaluations);
            (xc, vc)
        } else {
            let xc = along(-0.5, &worst);
            let vc = eval(&xc, &mut evaluations);
            (xc, vc)
        };
        if vc < worst_v.min(vr) {
            simplex[n] = (xc, vc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let v = eval(&x, &mut evaluations);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    NelderMeadResult {
        point,
        value,
        evaluations,
        converged,
    }
}
