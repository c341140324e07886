//! Derivative-free minimization (Nelder-Mead).
//!
//! Non-finite objective values are treated as `+inf`, which lets callers
//! mark infeasible regions without a penalty term.

use std::cell::Cell;

/// Nelder-Mead settings. Standard coefficients: reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    /// Edge length of the initial axis-aligned simplex.
    pub step: f64,
    pub max_evals: usize,
    /// Stop once `f_worst - f_best <= ftol * |f_best|` across the simplex.
    pub ftol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_evals: 2000,
            ftol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let evals = Cell::new(0usize);
        let mut eval = |x: &[f64]| {
            evals.set(evals.get() + 1);
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(x0);
        simplex.push((x0.to_vec(), v0));
        if n == 0 {
            return Minimum {
                x: x0.to_vec(),
                value: v0,
                evaluations: evals.get(),
                converged: true,
            };
        }
        for k in 0..n {
            let mut x = x0.to_vec();
            x[k] += self.step;
            let v = eval(&x);
            simplex.push((x, v));
        }

        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            if worst - best <= self.ftol * best.abs() || (best == worst && best.is_finite()) {
                converged = true;
                break;
            }
            if evals.get() >= self.max_evals {
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            // contraction: outside if the reflection helped at all
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for (x, v) in simplex.iter_mut().skip(1) {
                for (xk, ak) in x.iter_mut().zip(&anchor) {
                    *xk = ak + 0.5 * (*xk - ak);
                }
                *v = eval(x);
            }
        }

        let (x, value) = simplex.swap_remove(0);
        Minimum {
            x,
            value,
            evaluations: evals.get(),
            converged,
        }
    }
}
