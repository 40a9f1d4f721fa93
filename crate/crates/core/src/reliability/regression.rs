//! Univariate weather → interruption regressions: a cubic polynomial and a
//! two-term exponential.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReliabilityError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionKind {
    Cubic,
    TwoTermExponential,
}

/// Fitted regression in raw `x` units.
///
/// Cubic: `β0 + β1 x + β2 x² + β3 x³`.
/// Exponential: `β0 + β1 exp(β2 x) + β3 exp(β4 x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub kind: RegressionKind,
    pub coefficients: Vec<f64>,
    pub target: String,
    pub sse: f64,
    pub r_squared: f64,
}

impl RegressionModel {
    pub fn predict(&self, x: f64) -> f64 {
        let b = &self.coefficients;
        match self.kind {
            RegressionKind::Cubic => b[0] + x * (b[1] + x * (b[2] + x * b[3])),
            RegressionKind::TwoTermExponential => b[0] + b[1] * (b[2] * x).exp() + b[3] * (b[4] * x).exp(),
        }
    }

    fn with_diagnostics(kind: RegressionKind, coefficients: Vec<f64>, target: &str, x: &[f64], n: &[f64]) -> Self {
        let mut m = RegressionModel {
            kind,
            coefficients,
            target: target.to_string(),
            sse: 0.0,
            r_squared: 0.0,
        };
        m.sse = x.iter().zip(n).map(|(xi, ni)| (ni - m.predict(*xi)).powi(2)).sum();
        let mean = n.iter().sum::<f64>() / n.len() as f64;
        let sst: f64 = n.iter().map(|v| (v - mean).powi(2)).sum();
        m.r_squared = if sst > 0.0 {
            1.0 - m.sse / sst
        } else if m.sse == 0.0 {
            1.0
        } else {
            0.0
        };
        m
    }
}

fn check_inputs(x: &[f64], n: &[f64]) -> Result<(), ReliabilityError> {
    if x.len() != n.len() {
        return Err(ReliabilityError::Dimension {
            expected: x.len(),
            found: n.len(),
        });
    }
    if x.iter().chain(n).any(|v| !v.is_finite()) {
        return Err(ReliabilityError::NonFinite("regression input".into()));
    }
    Ok(())
}

/// Least-squares cubic via QR of a centred and scaled design; coefficients
/// are expanded back to powers of raw `x`.
pub fn fit_cubic(x: &[f64], n: &[f64], target: &str) -> Result<RegressionModel, ReliabilityError> {
    check_inputs(x, n)?;
    let mut distinct: Vec<f64> = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(ReliabilityError::SingularFit(format!(
            "cubic needs 4 distinct x values, got {}",
            distinct.len()
        )));
    }
    let c = x.iter().sum::<f64>() / x.len() as f64;
    let s = x.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
    let design = DMatrix::from_fn(x.len(), 4, |r, k| ((x[r] - c) / s).powi(k as i32));
    let qr = design.qr();
    let r = qr.r();
    let diag_max = (0..4).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..4).any(|k| r[(k, k)].abs() <= 1e-12 * diag_max) {
        return Err(ReliabilityError::SingularFit("rank-deficient cubic design".into()));
    }
    let qtb = qr.q().transpose() * DVector::from_column_slice(n);
    let gamma = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| ReliabilityError::SingularFit("triangular solve failed".into()))?;

    // Σ γk ((x − c)/s)^k expanded in powers of x
    let mut beta = [0.0; 4];
    for k in 0..4 {
        let g = gamma[k] / s.powi(k as i32);
        for (j, b) in beta.iter_mut().enumerate().take(k + 1) {
            *b += g * binomial(k, j) * (-c).powi((k - j) as i32);
        }
    }
    Ok(RegressionModel::with_diagnostics(
        RegressionKind::Cubic,
        beta.to_vec(),
        target,
        x,
        n,
    ))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Starting exponents (on `x / max|x|`) for the two exponential terms.
pub const EXP_START_GRID: [f64; 8] = [-2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0];

const EXP_LIMIT: f64 = 60.0;
const LM_MAX_ITER: usize = 500;

/// Two-term exponential by multi-start Levenberg–Marquardt.
///
/// `x` is scaled by `max|x|` while fitting. Every start pair `β2 < β4` from
/// [`EXP_START_GRID`] gets a linear solve for `β0, β1, β3` and is then
/// refined on all five parameters. The constant fit is always a candidate,
/// so the result never does worse than it.
pub fn fit_two_term_exp(x: &[f64], n: &[f64], target: &str) -> Result<RegressionModel, ReliabilityError> {
    check_inputs(x, n)?;
    if x.len() < 5 {
        return Err(ReliabilityError::SingularFit(format!(
            "two-term exponential needs 5 points, got {}",
            x.len()
        )));
    }
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let u: Vec<f64> = x.iter().map(|v| v / scale).collect();

    let mut starts = Vec::new();
    for (i, a) in EXP_START_GRID.iter().enumerate() {
        for b in &EXP_START_GRID[i + 1..] {
            starts.push((*a, *b));
        }
    }
    let mut candidates: Vec<([f64; 5], f64)> = starts
        .par_iter()
        .filter_map(|&(a, b)| {
            let lin = linear_terms(&u, n, a, b)?;
            Some(levenberg_marquardt(&u, n, [lin[0], lin[1], a, lin[2], b]))
        })
        .collect();
    let mean = n.iter().sum::<f64>() / n.len() as f64;
    let constant = [mean, 0.0, EXP_START_GRID[0], 0.0, EXP_START_GRID[1]];
    candidates.push((constant, sse(&u, n, &constant)));

    let (best, best_sse) = candidates
        .into_iter()
        .filter(|(_, s)| s.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(ReliabilityError::FitFailure { best: None })?;
    let beta = vec![best[0], best[1], best[2] / scale, best[3], best[4] / scale];
    let model = RegressionModel::with_diagnostics(RegressionKind::TwoTermExponential, beta, target, x, n);
    if !model.sse.is_finite() {
        return Err(ReliabilityError::FitFailure {
            best: Some(Box::new(model)),
        });
    }
    log::debug!("exp fit {target}: scaled sse {best_sse:.3e}");
    Ok(model)
}

fn eval(u: f64, p: &[f64; 5]) -> f64 {
    p[0] + p[1] * (p[2] * u).exp() + p[3] * (p[4] * u).exp()
}

fn sse(u: &[f64], n: &[f64], p: &[f64; 5]) -> f64 {
    if p[2].abs() > EXP_LIMIT || p[4].abs() > EXP_LIMIT {
        return f64::INFINITY;
    }
    u.iter().zip(n).map(|(ui, ni)| (ni - eval(*ui, p)).powi(2)).sum()
}

/// Least-squares `β0, β1, β3` for fixed exponents.
fn linear_terms(u: &[f64], n: &[f64], a: f64, b: f64) -> Option<[f64; 3]> {
    let design = DMatrix::from_fn(u.len(), 3, |r, k| match k {
        0 => 1.0,
        1 => (a * u[r]).exp(),
        _ => (b * u[r]).exp(),
    });
    let sol = design
        .svd(true, true)
        .solve(&DVector::from_column_slice(n), 1e-12)
        .ok()?;
    let out = [sol[0], sol[1], sol[2]];
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn levenberg_marquardt(u: &[f64], n: &[f64], start: [f64; 5]) -> ([f64; 5], f64) {
    let mut p = start;
    let mut cost = sse(u, n, &p);
    let mut lambda = 1e-3;
    for _ in 0..LM_MAX_ITER {
        let mut jtj = DMatrix::<f64>::zeros(5, 5);
        let mut jtr = DVector::<f64>::zeros(5);
        for (ui, ni) in u.iter().zip(n) {
            let e2 = (p[2] * ui).exp();
            let e4 = (p[4] * ui).exp();
            let row = [1.0, e2, p[1] * ui * e2, e4, p[3] * ui * e4];
            let r = ni - eval(*ui, &p);
            for a in 0..5 {
                jtr[a] += row[a] * r;
                for b in 0..5 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj.clone();
            for k in 0..5 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: [f64; 5] = std::array::from_fn(|k| p[k] + step[k]);
            let trial_cost = sse(u, n, &trial);
            if trial_cost < cost {
                let gain = cost - trial_cost;
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                improved = gain > 1e-15 * cost.max(1e-300) || step.norm() > 1e-14;
                break;
            }
            lambda *= 4.0;
        }
        if !improved || cost == 0.0 {
            break;
        }
    }
    (p, cost)
}
