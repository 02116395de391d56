//! Bounded multi-start Nelder-Mead simplex minimizer.
//!
//! The identification objectives are nonsmooth in the switching threshold and
//! the slack width (discrete event times, clip kinks), so a derivative-free
//! method is used. The search runs in coordinates normalized to the box,
//! candidates are clamped into the box, and a small grid of starts guards
//! against local minima. Dimensions with `lo == hi` are held fixed.

use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Iteration cap per start.
    pub max_iters: usize,
    /// Convergence when the simplex diameter in normalized space drops below
    /// this.
    pub diameter_tol: f64,
    /// Start-grid fractions of each free dimension's range.
    pub start_fractions: Vec<f64>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iters: 2000,
            diameter_tol: 1e-6,
            start_fractions: vec![0.25, 0.5, 0.75],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    /// Minimizer in physical units.
    pub x: Vec<f64>,
    pub cost: f64,
    /// Iterations spent by the winning start.
    pub iterations: usize,
    pub converged: bool,
    /// The winner sits on the box boundary.
    pub bound_hit: bool,
    /// Best cost after each iteration of the winning start; nonincreasing.
    pub history: Vec<f64>,
}

struct Box_ {
    lo: Vec<f64>,
    hi: Vec<f64>,
    free: Vec<usize>,
}

impl Box_ {
    fn denorm(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.lo.clone();
        for (k, &dim) in self.free.iter().enumerate() {
            x[dim] = self.lo[dim] + z[k] * (self.hi[dim] - self.lo[dim]);
        }
        x
    }
}

fn clamp01(z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            let d = simplex[i]
                .0
                .iter()
                .zip(simplex[j].0.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

fn run_single<F: Fn(&[f64]) -> f64>(
    f: &F,
    bx: &Box_,
    start: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let m = bx.free.len();
    let eval = |z: &[f64]| -> f64 {
        let v = f(&bx.denorm(z));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // start plus one vertex stepped along each free dimension
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m + 1);
    let z0 = start.to_vec();
    let f0 = eval(&z0);
    simplex.push((z0, f0));
    for k in 0..m {
        let mut z = start.to_vec();
        z[k] += if z[k] + 0.15 <= 1.0 { 0.15 } else { -0.15 };
        clamp01(&mut z);
        let fz = eval(&z);
        simplex.push((z, fz));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        if diameter(&simplex) < opts.diameter_tol {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; m];
        for (z, _) in simplex.iter().take(m) {
            for k in 0..m {
                centroid[k] += z[k] / m as f64;
            }
        }
        let worst = simplex[m].clone();
        let best_f = simplex[0].1;
        let second_worst_f = simplex[m - 1].1;

        let mut reflected: Vec<f64> = centroid
            .iter()
            .zip(worst.0.iter())
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        clamp01(&mut reflected);
        let f_r = eval(&reflected);

        if f_r < best_f {
            let mut expanded: Vec<f64> = centroid
                .iter()
                .zip(worst.0.iter())
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            clamp01(&mut expanded);
            let f_e = eval(&expanded);
            simplex[m] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < second_worst_f {
            simplex[m] = (reflected, f_r);
        } else {
            // contraction, outside or inside of the worst point
            let (mut contracted, towards): (Vec<f64>, f64) = if f_r < worst.1 {
                (
                    centroid
                        .iter()
                        .zip(reflected.iter())
                        .map(|(c, r)| c + rho * (r - c))
                        .collect(),
                    f_r,
                )
            } else {
                (
                    centroid
                        .iter()
                        .zip(worst.0.iter())
                        .map(|(c, w)| c + rho * (w - c))
                        .collect(),
                    worst.1,
                )
            };
            clamp01(&mut contracted);
            let f_c = eval(&contracted);
            if f_c <= towards {
                simplex[m] = (contracted, f_c);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for k in 0..m {
                        entry.0[k] = best[k] + sigma * (entry.0[k] - best[k]);
                    }
                    clamp01(&mut entry.0);
                    entry.1 = eval(&entry.0);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    history.push(simplex[0].1);
    let zbest = &simplex[0].0;
    let bound_hit = zbest.iter().any(|&z| z < 1e-6 || z > 1.0 - 1e-6);
    SimplexResult {
        x: bx.denorm(zbest),
        cost: simplex[0].1,
        iterations,
        converged,
        bound_hit,
        history,
    }
}

/// Minimizes `f` over the box `[lo, hi]`, multi-starting from a grid over the
/// free dimensions and keeping the best result (ties broken by start order).
pub fn minimize_bounded<F>(
    f: F,
    lo: &[f64],
    hi: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    assert_eq!(lo.len(), hi.len());
    let free: Vec<usize> = (0..lo.len()).filter(|&i| hi[i] > lo[i]).collect();
    let bx = Box_ {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        free,
    };
    let m = bx.free.len();
    if m == 0 {
        let x = bx.lo.clone();
        let cost = f(&x);
        return SimplexResult {
            x,
            cost,
            iterations: 0,
            converged: true,
            bound_hit: false,
            history: vec![cost],
        };
    }

    // cartesian grid of starts in normalized coordinates
    let fr = &opts.start_fractions;
    let n_starts = fr.len().pow(m as u32);
    let starts: Vec<Vec<f64>> = (0..n_starts)
        .map(|mut idx| {
            let mut z = vec![0.0; m];
            for slot in z.iter_mut() {
                *slot = fr[idx % fr.len()];
                idx /= fr.len();
            }
            z
        })
        .collect();

    let results: Vec<SimplexResult> = starts
        .par_iter()
        .map(|start| run_single(&f, &bx, start, opts))
        .collect();

    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.cost < results[best].cost {
            best = i;
        }
    }
    results.into_iter().nth(best).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_interior_minimum() {
        let r = minimize_bounded(
            |x| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2),
            &[-10.0, -10.0],
            &[10.0, 10.0],
            &SimplexOptions::default(),
        );
        assert!(r.converged);
        assert!(!r.bound_hit);
        assert!((r.x[0] - 3.0).abs() < 1e-4, "x0 = {}", r.x[0]);
        assert!((r.x[1] + 1.0).abs() < 1e-4, "x1 = {}", r.x[1]);
        assert!(r.cost < 1e-8);
    }

    #[test]
    fn clamps_to_boundary_when_minimum_outside() {
        let r = minimize_bounded(
            |x| (x[0] - 5.0).powi(2),
            &[0.0],
            &[1.0],
            &SimplexOptions::default(),
        );
        assert!((r.x[0] - 1.0).abs() < 1e-6);
        assert!(r.bound_hit);
    }

    #[test]
    fn history_is_nonincreasing() {
        let r = minimize_bounded(
            |x| x[0].powi(4) + (x[1] - 0.3).powi(2) + (x[0] * x[1]).sin().abs(),
            &[-2.0, -2.0],
            &[2.0, 2.0],
            &SimplexOptions::default(),
        );
        for w in r.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "history rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn multistart_escapes_local_basin() {
        // shallow basin near 0.1, deep basin near 0.9
        let f = |x: &[f64]| {
            -(-(100.0 * (x[0] - 0.1).powi(2))).exp() - 2.0 * (-(100.0 * (x[0] - 0.9).powi(2))).exp()
        };
        let r = minimize_bounded(f, &[0.0], &[1.0], &SimplexOptions::default());
        assert!((r.x[0] - 0.9).abs() < 1e-3, "found {}", r.x[0]);
    }

    #[test]
    fn frozen_dimension_stays_fixed() {
        let r = minimize_bounded(
            |x| (x[0] - 0.4).powi(2) + (x[1] - 7.0).powi(2),
            &[0.0, 2.5],
            &[1.0, 2.5],
            &SimplexOptions::default(),
        );
        assert_eq!(r.x[1], 2.5);
        assert!((r.x[0] - 0.4).abs() < 1e-4);
    }

    #[test]
    fn all_frozen_returns_the_point() {
        let r = minimize_bounded(|x| x[0] + x[1], &[1.0, 2.0], &[1.0, 2.0], &SimplexOptions::default());
        assert_eq!(r.x, vec![1.0, 2.0]);
        assert_eq!(r.cost, 3.0);
        assert!(r.converged);
    }

    #[test]
    fn nan_objective_treated_as_infinite() {
        let r = minimize_bounded(
            |x| {
                if x[0] < 0.5 {
                    f64::NAN
                } else {
                    (x[0] - 0.7).powi(2)
                }
            },
            &[0.0],
            &[1.0],
            &SimplexOptions::default(),
        );
        assert!((r.x[0] - 0.7).abs() < 1e-4);
    }
}
