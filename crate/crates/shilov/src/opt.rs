//! Derivative-free simplex minimization for the low-dimensional refinement
//! steps (metric suprema/infima, dual-support searches). Objectives may
//! return `f64::INFINITY` outside their feasible region; the simplex treats
//! such values as ordinary (very bad) ones, which turns domain constraints
//! into barriers.

pub struct SimplexOptions {
    pub max_iters: usize,
    /// Stop once both the function spread and the simplex diameter fall
    /// below this.
    pub ftol: f64,
    /// Initial simplex edge length.
    pub step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            ftol: 1e-12,
            step: 0.25,
        }
    }
}

/// Nelder-Mead with the classical coefficients (reflect 1, expand 2,
/// contract 1/2, shrink 1/2). Returns the best vertex and its value.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &SimplexOptions,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    if dim == 0 {
        let v = f(x0);
        return (Vec::new(), v);
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = f(x0);
    simplex.push((x0.to_vec(), v0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += opts.step;
        let v = f(&x);
        simplex.push((x, v));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    };
    order(&mut simplex);

    for _ in 0..opts.max_iters {
        let spread = simplex[dim].1 - simplex[0].1;
        let diameter = (0..dim)
            .map(|i| {
                simplex
                    .iter()
                    .map(|(x, _)| x[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0f64, f64::max);
        if spread.abs() <= opts.ftol && diameter <= opts.ftol.max(1e-14) {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for (x, _) in simplex.iter().take(dim) {
            for i in 0..dim {
                centroid[i] += x[i] / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let at = |t: f64| -> Vec<f64> {
            (0..dim)
                .map(|i| centroid[i] + t * (centroid[i] - worst.0[i]))
                .collect()
        };

        let xr = at(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = at(2.0);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = at(0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = at(-0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for i in 0..dim {
                        entry.0[i] = best[i] + 0.5 * (entry.0[i] - best[i]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
        order(&mut simplex);
    }

    let (x, v) = simplex.swap_remove(0);
    (x, v)
}

/// Restarted minimization: runs [`minimize`] from each start and keeps the
/// best outcome.
pub fn minimize_restarts<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    starts: &[Vec<f64>],
    opts: &SimplexOptions,
) -> (Vec<f64>, f64) {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in starts {
        let (x, v) = minimize(&mut f, x0, opts);
        if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
            best = Some((x, v));
        }
    }
    best.expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let (x, v) = minimize(
            |x| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &SimplexOptions::default(),
        );
        assert!(v < 1e-10);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock_valley() {
        let opts = SimplexOptions {
            max_iters: 4000,
            ftol: 1e-14,
            step: 0.5,
        };
        let (x, v) = minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &opts,
        );
        assert!(v < 1e-8, "value {v:.3e} at {x:?}");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn barrier_constrained_minimum() {
        // Unconstrained minimum at (2, 0), barrier restricts to the unit box;
        // the constrained minimum sits at the corner x = 1.
        let f = |x: &[f64]| {
            if x.iter().any(|v| v.abs() > 1.0) {
                f64::INFINITY
            } else {
                (x[0] - 2.0).powi(2) + x[1] * x[1]
            }
        };
        let (x, v) = minimize_restarts(
            f,
            &[vec![0.0, 0.0], vec![0.5, 0.5], vec![-0.5, 0.3]],
            &SimplexOptions {
                max_iters: 2000,
                ftol: 1e-14,
                step: 0.2,
            },
        );
        assert!((x[0] - 1.0).abs() < 1e-4, "x {x:?} value {v}");
        assert!(x[1].abs() < 1e-4);
    }

    #[test]
    fn zero_dimensional_input() {
        let (x, v) = minimize(|_| 7.5, &[], &SimplexOptions::default());
        assert!(x.is_empty());
        assert_eq!(v, 7.5);
    }
}
