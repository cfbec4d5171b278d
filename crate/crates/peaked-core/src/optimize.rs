//! Derivative-free minimization for block re-synthesis.
//!
//! The default method is a linear-model trust region: a forward-difference
//! gradient is fit on an axis simplex of radius ρ and a normalized descent
//! step of length ρ is taken, with ρ adapted on success/failure. When the
//! trust region collapses before the budget is spent, a Nelder-Mead phase
//! (Gao-Han adaptive coefficients) continues from the best point. Both phases
//! are fully deterministic given the starting point and configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Budget and tolerance knobs for [`minimize`] and the re-synthesis routines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Hard cap on objective evaluations per minimize call.
    pub max_evaluations: usize,
    /// Initial trust-region radius / simplex edge, in radians.
    pub initial_step: f64,
    /// Trust-region radius below which the search is considered converged.
    pub convergence_tol: f64,
    /// Re-synthesis restarts before reporting failure.
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_evaluations: 5000,
            initial_step: 0.5,
            convergence_tol: 1e-10,
            restarts: 3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations == 0
            || self.restarts == 0
            || !(self.initial_step > 0.0)
            || !(self.convergence_tol > 0.0)
        {
            return Err(Error::invalid("optimizer config fields must all be positive"));
        }
        Ok(())
    }
}

/// Outcome of a minimize call.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// The search reached its convergence tolerance (rather than the budget).
    pub converged: bool,
    /// f(x) improved on f(x0). When false the caller gets x0 back.
    pub improved: bool,
}

struct Budget<'a, F> {
    f: &'a mut F,
    used: usize,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.max {
            return None;
        }
        self.used += 1;
        Some((self.f)(x))
    }
}

/// Minimizes a deterministic objective from `x0` under the given budget.
/// Never returns a point worse than `x0`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<MinimizeResult> {
    cfg.validate()?;
    if x0.is_empty() {
        return Err(Error::invalid("minimize needs at least one variable"));
    }
    let mut budget = Budget { f: &mut f, used: 0, max: cfg.max_evaluations };
    let f0 = budget.eval(x0).expect("budget allows at least one evaluation");

    let mut best_x = x0.to_vec();
    let mut best_f = f0;

    let converged = trust_region(&mut budget, &mut best_x, &mut best_f, cfg);
    if !converged && budget.used < budget.max {
        nelder_mead(&mut budget, &mut best_x, &mut best_f, cfg);
    }

    let improved = best_f < f0;
    if !improved {
        best_x = x0.to_vec();
        best_f = f0;
    }
    Ok(MinimizeResult {
        x: best_x,
        f: best_f,
        evaluations: budget.used,
        converged,
        improved,
    })
}

/// Linear-model trust-region descent. Returns true when the radius collapsed
/// below the convergence tolerance.
fn trust_region<F: FnMut(&[f64]) -> f64>(
    budget: &mut Budget<'_, F>,
    best_x: &mut Vec<f64>,
    best_f: &mut f64,
    cfg: &OptimizerConfig,
) -> bool {
    let n = best_x.len();
    let mut rho = cfg.initial_step;
    let mut grad = vec![0.0; n];
    while rho >= cfg.convergence_tol {
        // forward-difference linear model on an axis simplex of radius ρ
        let h = rho;
        let mut model_ok = true;
        for i in 0..n {
            let mut xp = best_x.clone();
            xp[i] += h;
            match budget.eval(&xp) {
                Some(fi) => grad[i] = (fi - *best_f) / h,
                None => return false,
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            model_ok = false;
        }
        if model_ok {
            let cand: Vec<f64> = best_x
                .iter()
                .zip(&grad)
                .map(|(x, g)| x - rho * g / gnorm)
                .collect();
            match budget.eval(&cand) {
                Some(fc) if fc < *best_f => {
                    *best_x = cand;
                    *best_f = fc;
                    rho *= 1.6;
                    continue;
                }
                Some(_) => {}
                None => return false,
            }
        }
        rho *= 0.5;
    }
    true
}

/// Nelder-Mead with the Gao-Han adaptive coefficients, started around the
/// incumbent best point.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    budget: &mut Budget<'_, F>,
    best_x: &mut Vec<f64>,
    best_f: &mut f64,
    cfg: &OptimizerConfig,
) {
    let n = best_x.len();
    let nf = n as f64;
    let alpha = 1.0;
    let beta = 1.0 + 2.0 / nf;
    let gamma = 0.75 - 1.0 / (2.0 * nf);
    let delta = 1.0 - 1.0 / nf;

    // simplex: incumbent plus axis steps
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((best_x.clone(), *best_f));
    for i in 0..n {
        let mut xi = best_x.clone();
        xi[i] += cfg.initial_step.max(16.0 * cfg.convergence_tol);
        let Some(fi) = budget.eval(&xi) else { return };
        simplex.push((xi, fi));
    }

    loop {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if simplex[0].1 < *best_f {
            *best_x = simplex[0].0.clone();
            *best_f = simplex[0].1;
        }
        // spread-based convergence
        let spread = simplex[n].1 - simplex[0].1;
        let xspread: f64 = (0..n)
            .map(|i| {
                let lo = simplex.iter().map(|(x, _)| x[i]).fold(f64::INFINITY, f64::min);
                let hi = simplex.iter().map(|(x, _)| x[i]).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max);
        if spread.abs() <= 1e-16 * (1.0 + simplex[0].1.abs()) || xspread <= cfg.convergence_tol {
            return;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / nf)
            .collect();
        let worst = simplex[n].clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let Some(fr) = budget.eval(&reflect) else { return };

        if fr < simplex[0].1 {
            // try expansion
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + beta * (c - w))
                .collect();
            let Some(fe) = budget.eval(&expand) else {
                simplex[n] = (reflect, fr);
                continue;
            };
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
            continue;
        }
        // contraction (outside/inside)
        let (cand, reflect_bound) = if fr < worst.1 {
            let c: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            (c, Some(fr))
        } else {
            let c: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c - gamma * (c - w))
                .collect();
            (c, None)
        };
        let Some(fc) = budget.eval(&cand) else { return };
        let accept = match reflect_bound {
            Some(fr) => fc <= fr,
            None => fc < worst.1,
        };
        if accept {
            simplex[n] = (cand, fc);
            continue;
        }
        // shrink toward the best vertex
        let x0 = simplex[0].0.clone();
        for v in simplex.iter_mut().skip(1) {
            let xs: Vec<f64> = x0
                .iter()
                .zip(&v.0)
                .map(|(b, x)| b + delta * (x - b))
                .collect();
            let Some(fs) = budget.eval(&xs) else { return };
            *v = (xs, fs);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_18d_converges_within_budget() {
        // f(x) = Σ (x_i − 1)², optimum 0 at the all-ones vector
        let cfg = OptimizerConfig { max_evaluations: 2000, ..Default::default() };
        let res = minimize(
            |x| x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>(),
            &[0.0; 18],
            &cfg,
        )
        .unwrap();
        assert!(res.f <= 1e-6, "sphere reached only {}", res.f);
        assert!(res.evaluations <= 2000);
        assert!(res.improved);
    }

    #[test]
    fn constant_objective_flags_no_improvement() {
        let cfg = OptimizerConfig { max_evaluations: 500, ..Default::default() };
        let res = minimize(|_| 42.0, &[1.0, 2.0, 3.0], &cfg).unwrap();
        assert!(!res.improved);
        assert_eq!(res.x, vec![1.0, 2.0, 3.0]);
        assert_eq!(res.f, 42.0);
    }

    #[test]
    fn rosenbrock_2d_converges() {
        let rosen = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let cfg = OptimizerConfig { max_evaluations: 5000, ..Default::default() };
        let res = minimize(rosen, &[-1.2, 1.0], &cfg).unwrap();
        assert!(res.f <= 1e-3, "rosenbrock reached only {}", res.f);
    }

    #[test]
    fn deterministic_given_start_and_config() {
        let f = |x: &[f64]| x.iter().map(|v| v.cos() + 0.1 * v * v).sum::<f64>();
        let cfg = OptimizerConfig::default();
        let a = minimize(f, &[0.3, -0.4, 2.0], &cfg).unwrap();
        let b = minimize(f, &[0.3, -0.4, 2.0], &cfg).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.f, b.f);
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn never_returns_worse_than_start() {
        let f = |x: &[f64]| if x[0] == 0.0 { 1.0 } else { 2.0 };
        let cfg = OptimizerConfig { max_evaluations: 50, ..Default::default() };
        let res = minimize(f, &[0.0], &cfg).unwrap();
        assert_eq!(res.f, 1.0);
        assert_eq!(res.x, vec![0.0]);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = OptimizerConfig { max_evaluations: 0, ..Default::default() };
        assert!(minimize(|_| 0.0, &[0.0], &cfg).is_err());
    }
}
