//! Penalized least squares for a single regression
//! `min_l ‖y − Z l‖² + P_λ(l)`, no intercept.
//!
//! Design columns are ordered by predecessor index: column `t` is `e_{t+1}`
//! and the last column is the nearest predecessor `e_{j−1}`. The nested
//! penalty depends on that ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;

/// Coordinate descent stops once no coefficient moves by more than this.
pub const LASSO_TOL: f64 = 1e-8;
pub const LASSO_MAX_CYCLES: usize = 10_000;
pub const NESTED_MAX_OUTER: usize = 500;
/// Smallest damping factor tried before an outer step is abandoned.
pub const NESTED_MIN_STEP: f64 = 1e-6;
/// Coefficients below this fraction of the largest magnitude count as zero.
pub const ZERO_REL_TOL: f64 = 1e-8;
/// Floor applied to reweighting denominators.
pub const DENOM_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Lasso,
    NestedLasso,
}

#[derive(Clone, Copy, Debug)]
pub struct PenalizedProblem<'a> {
    pub response: &'a [f64],
    /// Design columns, each of the response's length.
    pub design: &'a [Vec<f64>],
    pub lambda: f64,
    pub kind: PenaltyKind,
}

impl<'a> PenalizedProblem<'a> {
    pub fn new(response: &'a [f64], design: &'a [Vec<f64>], lambda: f64, kind: PenaltyKind) -> Self {
        PenalizedProblem {
            response,
            design,
            lambda,
            kind,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be a finite non-negative number, got {}",
                self.lambda
            )));
        }
        let n = self.response.len();
        if let Some(c) = self.design.iter().position(|c| c.len() != n) {
            return Err(Error::DimMismatch {
                expected: format!("design columns of length {n}"),
                actual: format!("column {} has length {}", c + 1, self.design[c].len()),
            });
        }
        if self
            .design
            .iter()
            .flatten()
            .chain(self.response)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite design or response".into()));
        }
        Ok(())
    }

    pub fn residual(&self, coef: &[f64]) -> Vec<f64> {
        let mut r = self.response.to_vec();
        for (z, &b) in self.design.iter().zip(coef) {
            if b != 0.0 {
                r.iter_mut().zip(z).for_each(|(ri, zi)| *ri -= b * zi);
            }
        }
        r
    }

    /// `‖y − Z l‖²`.
    pub fn rss(&self, coef: &[f64]) -> f64 {
        self.residual(coef).iter().map(|v| v * v).sum()
    }

    /// Univariate coefficient of the response on the last design column.
    pub fn nearest_univariate_coefficient(&self) -> f64 {
        match self.design.last() {
            Some(z) => {
                let zz = dot(z, z);
                if zz > 0.0 {
                    dot(z, self.response) / zz
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    }

    /// Objective for this problem's penalty kind.
    pub fn objective(&self, coef: &[f64]) -> f64 {
        match self.kind {
            PenaltyKind::Lasso => lasso_objective(self, coef),
            PenaltyKind::NestedLasso => nested_lasso_objective(self, coef),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverResult {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `‖y − Z l‖² + λ Σ |l_t|`.
pub fn lasso_objective(prob: &PenalizedProblem<'_>, coef: &[f64]) -> f64 {
    prob.rss(coef) + prob.lambda * coef.iter().map(|b| b.abs()).sum::<f64>()
}

/// `‖y − Z l‖² + λ (|l_m| / |c| + Σ_{t<m} |l_t| / |l_{t+1}|)` with `0/0 = 0`,
/// where `l_m` is the nearest-predecessor coefficient and `c` its
/// univariate regression coefficient.
pub fn nested_lasso_objective(prob: &PenalizedProblem<'_>, coef: &[f64]) -> f64 {
    let m = coef.len();
    if m == 0 {
        return prob.rss(coef);
    }
    let ratio = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num.abs() / den.abs()
        }
    };
    let mut pen = ratio(coef[m - 1], prob.nearest_univariate_coefficient());
    for t in 0..m - 1 {
        pen += ratio(coef[t], coef[t + 1]);
    }
    if prob.lambda == 0.0 {
        return prob.rss(coef);
    }
    prob.rss(coef) + prob.lambda * pen
}

/// Lasso by cyclic coordinate descent with soft-thresholding.
pub fn solve_lasso(prob: &PenalizedProblem<'_>) -> Result<SolverResult> {
    prob.validate()?;
    let m = prob.design.len();
    let penalties = vec![prob.lambda; m];
    let (coef, cycles) = weighted_cd(prob, &penalties, vec![0.0; m], None)?;
    Ok(SolverResult {
        objective: lasso_objective(prob, &coef),
        coefficients: coef,
        iterations: cycles,
        converged: true,
    })
}

/// Like [`solve_lasso`] but also returns the objective after every
/// coordinate update, starting with the objective at zero.
pub fn solve_lasso_traced(prob: &PenalizedProblem<'_>) -> Result<(SolverResult, Vec<f64>)> {
    prob.validate()?;
    let m = prob.design.len();
    let penalties = vec![prob.lambda; m];
    let mut trace = Vec::new();
    let (coef, cycles) = weighted_cd(prob, &penalties, vec![0.0; m], Some(&mut trace))?;
    Ok((
        SolverResult {
            objective: lasso_objective(prob, &coef),
            coefficients: coef,
            iterations: cycles,
            converged: true,
        },
        trace,
    ))
}

/// Nested lasso by iterative reweighting: denominators are frozen at the
/// current iterate, the resulting weighted lasso is solved, and the nested
/// zero pattern is re-imposed, until a fixed point. Steps are damped so the
/// objective never increases.
pub fn solve_nested_lasso(prob: &PenalizedProblem<'_>) -> Result<SolverResult> {
    prob.validate()?;
    let m = prob.design.len();
    if m == 0 || prob.lambda == 0.0 {
        let (coef, cycles) = weighted_cd(prob, &vec![0.0; m], vec![0.0; m], None)?;
        return Ok(SolverResult {
            objective: prob.rss(&coef),
            coefficients: coef,
            iterations: cycles,
            converged: true,
        });
    }

    let lasso = PenalizedProblem {
        kind: PenaltyKind::Lasso,
        ..*prob
    };
    let mut coef = solve_lasso(&lasso)?.coefficients;
    enforce_nesting(&mut coef);

    let c = prob.nearest_univariate_coefficient();
    let mut penalties = vec![0.0; m];
    for outer in 1..=NESTED_MAX_OUTER {
        penalties[m - 1] = prob.lambda / c.abs().max(DENOM_FLOOR);
        for t in 0..m - 1 {
            penalties[t] = if coef[t + 1] == 0.0 {
                f64::INFINITY
            } else {
                prob.lambda / coef[t + 1].abs().max(DENOM_FLOOR)
            };
        }
        let (mut next, _) = weighted_cd(prob, &penalties, coef.clone(), None)?;
        enforce_nesting(&mut next);
        // The reweighted map can cycle on this non-convex penalty, so only
        // steps that lower the true objective are taken.
        let current = nested_lasso_objective(prob, &coef);
        let mut step = 1.0;
        let accepted = loop {
            let mut trial: Vec<f64> = coef.iter().zip(&next).map(|(a, b)| a + step * (b - a)).collect();
            enforce_nesting(&mut trial);
            if nested_lasso_objective(prob, &trial) <= current {
                break Some(trial);
            }
            step *= 0.5;
            if step < NESTED_MIN_STEP {
                break None;
            }
        };
        let Some(next) = accepted else {
            return Ok(SolverResult {
                objective: current,
                coefficients: coef,
                iterations: outer,
                converged: true,
            });
        };
        let change = next
            .iter()
            .zip(&coef)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        coef = next;
        if change < LASSO_TOL {
            return Ok(SolverResult {
                objective: nested_lasso_objective(prob, &coef),
                coefficients: coef,
                iterations: outer,
                converged: true,
            });
        }
    }
    Err(Error::SolverNoConvergence {
        iterations: NESTED_MAX_OUTER,
    })
}

/// Dispatches on `prob.kind`.
pub fn solve(prob: &PenalizedProblem<'_>) -> Result<SolverResult> {
    match prob.kind {
        PenaltyKind::Lasso => solve_lasso(prob),
        PenaltyKind::NestedLasso => solve_nested_lasso(prob),
    }
}

/// Zeroes everything to the left of the rightmost (numerical) zero.
fn enforce_nesting(coef: &mut [f64]) {
    let scale = coef.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let thr = ZERO_REL_TOL * scale;
    if let Some(t) = coef.iter().rposition(|b| b.abs() <= thr) {
        coef[..=t].iter_mut().for_each(|b| *b = 0.0);
    }
}

// Minimizes ‖y − Z b‖² + Σ_t pen_t |b_t| by cyclic coordinate descent.
// An infinite penalty pins the coefficient at zero. Full sweeps alternate
// with sweeps over the current nonzero set until a full sweep moves nothing.
fn weighted_cd(
    prob: &PenalizedProblem<'_>,
    penalties: &[f64],
    mut coef: Vec<f64>,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<(Vec<f64>, usize)> {
    let m = prob.design.len();
    let norms: Vec<f64> = prob.design.iter().map(|z| dot(z, z)).collect();
    for t in 0..m {
        if norms[t] == 0.0 || penalties[t].is_infinite() {
            coef[t] = 0.0;
        }
    }
    let mut resid = prob.residual(&coef);
    let objective = |coef: &[f64], resid: &[f64]| {
        resid.iter().map(|v| v * v).sum::<f64>()
            + coef
                .iter()
                .zip(penalties)
                .filter(|(b, _)| **b != 0.0)
                .map(|(b, p)| p * b.abs())
                .sum::<f64>()
    };
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(objective(&coef, &resid));
    }

    let sweep = |coef: &mut [f64], resid: &mut [f64], active_only: bool, trace: &mut Option<&mut Vec<f64>>| {
        let mut max_change: f64 = 0.0;
        for t in 0..m {
            if norms[t] == 0.0 || penalties[t].is_infinite() || (active_only && coef[t] == 0.0) {
                continue;
            }
            let z = &prob.design[t];
            let old = coef[t];
            let rho = dot(z, resid) + norms[t] * old;
            let new = soft_threshold(rho, 0.5 * penalties[t]) / norms[t];
            if new != old {
                let delta = new - old;
                resid.iter_mut().zip(z).for_each(|(r, zi)| *r -= delta * zi);
                coef[t] = new;
                max_change = max_change.max(delta.abs());
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(objective(coef, resid));
            }
        }
        max_change
    };

    let mut cycles = 0;
    loop {
        cycles += 1;
        if cycles > LASSO_MAX_CYCLES {
            return Err(Error::SolverNoConvergence {
                iterations: LASSO_MAX_CYCLES,
            });
        }
        if sweep(&mut coef, &mut resid, false, &mut trace) < LASSO_TOL {
            return Ok((coef, cycles));
        }
        loop {
            cycles += 1;
            if cycles > LASSO_MAX_CYCLES {
                return Err(Error::SolverNoConvergence {
                    iterations: LASSO_MAX_CYCLES,
                });
            }
            if sweep(&mut coef, &mut resid, true, &mut trace) < LASSO_TOL {
                break;
            }
        }
    }
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `λ_max = 2 max_t |z_tᵀ y|`: the smallest lasso penalty with an all-zero
/// solution.
pub fn lasso_lambda_max(response: &[f64], design: &[Vec<f64>]) -> f64 {
    design
        .iter()
        .map(|z| 2.0 * dot(z, response).abs())
        .fold(0.0, f64::max)
}

/// `points` values spaced logarithmically from `lambda_max` down to
/// `lambda_max · ratio`, descending.
pub fn lambda_grid(lambda_max: f64, points: usize, ratio: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => (0..points)
            .map(|i| lambda_max * ratio.powf(i as f64 / (points - 1) as f64))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn orthogonal_design_zero_lambda_is_ols() {
        let z = vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0, 0.0]];
        let y = [1.0, 3.0, 4.0, -1.0];
        let res = solve_lasso(&PenalizedProblem::new(&y, &z, 0.0, PenaltyKind::Lasso)).unwrap();
        assert_eq!(res.coefficients, vec![2.0, 2.0]);
        assert!(res.converged);
    }

    #[test]
    fn kill_condition() {
        let z = vec![vec![1.0, -2.0, 0.5, 0.3], vec![0.2, 1.0, -1.0, 0.7]];
        let y = [1.0, 3.0, 4.0, -1.0];
        let lmax = lasso_lambda_max(&y, &z);
        for kind in [PenaltyKind::Lasso, PenaltyKind::NestedLasso] {
            let res = solve(&PenalizedProblem::new(&y, &z, lmax, kind)).unwrap();
            assert!(res.coefficients.iter().all(|&b| b == 0.0), "{kind:?}");
        }
        let res = solve_lasso(&PenalizedProblem::new(&y, &z, 0.9 * lmax, PenaltyKind::Lasso)).unwrap();
        assert!(res.coefficients.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn huge_lambda_nested_objective_is_rss() {
        let z = vec![vec![1.0, -2.0, 0.5], vec![0.2, 1.0, -1.0]];
        let y = [1.0, 3.0, 4.0];
        let prob = PenalizedProblem::new(&y, &z, 1e9, PenaltyKind::NestedLasso);
        let res = solve_nested_lasso(&prob).unwrap();
        assert_eq!(res.coefficients, vec![0.0, 0.0]);
        assert_abs_diff_eq!(res.objective, 26.0, epsilon = 1e-12);
    }

    #[test]
    fn nesting_zeroes_left_of_zero() {
        let mut b = vec![0.3, -0.2, 0.0, 0.5, 1e-12];
        enforce_nesting(&mut b);
        assert_eq!(b, vec![0.0; 5]);
        let mut b = vec![0.3, 0.0, 0.4, 0.5];
        enforce_nesting(&mut b);
        assert_eq!(b, vec![0.0, 0.0, 0.4, 0.5]);
    }

    #[test]
    fn nested_objective_conventions() {
        let z = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let y = [1.0, 2.0];
        let prob = PenalizedProblem::new(&y, &z, 1.0, PenaltyKind::NestedLasso);
        // c = 2: penalty |1|/2 + |0.5|/|1|.
        assert_abs_diff_eq!(nested_lasso_objective(&prob, &[0.5, 1.0]), 0.25 + 1.0 + 0.5 + 0.5);
        assert!(nested_lasso_objective(&prob, &[0.5, 0.0]).is_infinite());
        assert_abs_diff_eq!(nested_lasso_objective(&prob, &[0.0, 0.0]), 5.0);
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = lambda_grid(10.0, 25, 1e-4);
        assert_eq!(g.len(), 25);
        assert_abs_diff_eq!(g[0], 10.0);
        assert_abs_diff_eq!(g[24], 1e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(g[12], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let z = vec![vec![1.0, 0.0]];
        let y = [1.0, 2.0, 3.0];
        assert!(solve_lasso(&PenalizedProblem::new(&y, &z, 1.0, PenaltyKind::Lasso)).is_err());
        let z = vec![vec![1.0, 0.0, 1.0]];
        assert!(solve_lasso(&PenalizedProblem::new(&y, &z, -1.0, PenaltyKind::Lasso)).is_err());
    }
}
