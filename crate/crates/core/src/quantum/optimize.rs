//! Derivative-free angle optimization: Nelder–Mead with box clamping.

use std::f64::consts::PI;

use super::qubo::IsingModel;
use super::statevector::{diagonal_energies, evolve, expectation, QaoaCircuitSpec};
use super::QuantumError;

/// Initial value of every angle.
pub const ANGLE_START: f64 = 0.1;
const SIMPLEX_STEP: f64 = 0.25;
const STALL_TOL: f64 = 1e-12;

/// Minimizes `f` over the box `[lower, upper]` from `x0` with at most
/// `max_evals` evaluations. Returns the best point and its value.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.iter().enumerate().map(|(i, v)| v.clamp(lower[i], upper[i])).collect() };
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let start = clamp(x0.to_vec());
    let fs = eval(&start, &mut evals);
    simplex.push((start.clone(), fs));
    for i in 0..n {
        if evals >= max_evals {
            break;
        }
        let mut x = start.clone();
        x[i] = if x[i] + SIMPLEX_STEP <= upper[i] { x[i] + SIMPLEX_STEP } else { x[i] - SIMPLEX_STEP };
        let x = clamp(x);
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    while evals < max_evals && simplex.len() == n + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[n].1 - simplex[0].1 <= STALL_TOL {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|d| simplex[..n].iter().map(|(x, _)| x[d]).sum::<f64>() / n as f64).collect();
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            clamp((0..n).map(|d| centroid[d] + t * (worst[d] - centroid[d])).collect())
        };
        let worst = simplex[n].0.clone();
        let xr = along(-1.0, &worst);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            if evals >= max_evals {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = along(-2.0, &worst);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if evals >= max_evals {
                break;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(-0.5, &worst);
                let fx = eval(&x, &mut evals);
                (x, fx)
            } else {
                let x = along(0.5, &worst);
                let fx = eval(&x, &mut evals);
                (x, fx)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for k in 1..=n {
                    if evals >= max_evals {
                        break;
                    }
                    let x = clamp((0..n).map(|d| best[d] + 0.5 * (simplex[k].0[d] - best[d])).collect());
                    let fx = eval(&x, &mut evals);
                    simplex[k] = (x, fx);
                }
            }
        }
    }
    simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("simplex holds the start point")
}

/// Angle bounds: `gamma` in `[0, pi]`, `beta` in `[0, pi]`.
pub fn angle_bounds(depth: usize) -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; 2 * depth], vec![PI; 2 * depth])
}

/// Minimizes the QAOA energy expectation over the `2p` angles.
pub fn optimize_angles(
    ising: &IsingModel,
    spec: &QaoaCircuitSpec,
    budget_evals: usize,
) -> Result<Vec<f64>, QuantumError> {
    spec.validate(ising.n())?;
    let energies = diagonal_energies(ising);
    let (lo, hi) = angle_bounds(spec.depth);
    let mut trial = spec.clone();
    let x0 = vec![ANGLE_START; 2 * spec.depth];
    let (best, _) = nelder_mead(
        |angles| {
            trial.angles.copy_from_slice(angles);
            expectation(&evolve(&energies, ising.n(), &trial), &energies)
        },
        &x0,
        &lo,
        &hi,
        budget_evals.max(1),
    );
    Ok(best)
}
