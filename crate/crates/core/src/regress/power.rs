use crate::datagen::Dataset;
use crate::error::{Error, Result};

use super::{columns, Direction, FitKind, FitModel};

pub const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;
const LOG_FLOOR: f64 = 1e-9;
/// Slack allowed on the `[0, 1]` predictor requirement.
const PREDICTOR_SLACK: f64 = 1e-9;

/// Least squares fit of `y = a · x^b` with `a, b > 0` and `x` in `[0, 1]`.
///
/// Parameterised as `a = e^α`, `b = e^β` and solved by damped
/// Gauss–Newton from a log-log initialisation.
pub fn fit_power(data: &Dataset, direction: Direction) -> Result<FitModel> {
    if data.len() < 5 {
        return Err(Error::InvalidParam(format!(
            "power-law fit needs at least 5 rows, got {}",
            data.len()
        )));
    }
    let (x, y) = columns(data, direction);
    if let Some(&bad) = x
        .iter()
        .find(|&&v| !(-PREDICTOR_SLACK..=1.0 + PREDICTOR_SLACK).contains(&v))
    {
        return Err(Error::Domain {
            value: bad,
            lo: 0.0,
            hi: 1.0,
        });
    }

    let (mut alpha, mut beta) = initial_guess(x, y);
    let mut loss = sse(x, y, alpha, beta);
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let Some((da, db)) = gauss_newton_step(x, y, alpha, beta) else {
            converged = true;
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let (na, nb) = (alpha + t * da, beta + t * db);
            let candidate = sse(x, y, na, nb);
            if candidate.is_finite() && candidate <= loss {
                alpha = na;
                beta = nb;
                loss = candidate;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let step = t * da.abs().max(db.abs());
        if !accepted || step < STEP_TOLERANCE {
            converged = true;
            break;
        }
    }

    let mut model = FitModel::trained(
        FitKind::PowerLaw {
            a: alpha.exp(),
            b: beta.exp(),
        },
        direction,
        data,
    );
    model.converged = converged;
    Ok(model)
}

fn initial_guess(x: &[f64], y: &[f64]) -> (f64, f64) {
    let logs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&u, &v)| u > LOG_FLOOR && v > LOG_FLOOR)
        .map(|(u, v)| (u.ln(), v.ln()))
        .collect();
    let fallback = (0.0, 0.0);
    if logs.len() < 2 {
        return fallback;
    }
    let n = logs.len() as f64;
    let mu = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut suu, mut suv) = (0.0, 0.0);
    for &(u, v) in &logs {
        suu += (u - mu) * (u - mu);
        suv += (u - mu) * (v - mv);
    }
    let b = suv / suu;
    if !(b.is_finite() && b > 0.0) {
        return fallback;
    }
    let ln_a = mv - b * mu;
    if !ln_a.is_finite() {
        return fallback;
    }
    (ln_a, b.ln())
}

fn predict(x: f64, a: f64, b: f64) -> f64 {
    a * x.max(0.0).powf(b)
}

fn sse(x: &[f64], y: &[f64], alpha: f64, beta: f64) -> f64 {
    let (a, b) = (alpha.exp(), beta.exp());
    x.iter()
        .zip(y)
        .map(|(&u, &v)| (v - predict(u, a, b)).powi(2))
        .sum()
}

/// Solves the 2×2 normal equations; `None` when the Jacobian is rank deficient.
fn gauss_newton_step(x: &[f64], y: &[f64], alpha: f64, beta: f64) -> Option<(f64, f64)> {
    let (a, b) = (alpha.exp(), beta.exp());
    let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&u, &v) in x.iter().zip(y) {
        let m = predict(u, a, b);
        // ∂m/∂α = m, ∂m/∂β = m · b · ln x (zero at x = 0, where m = 0)
        let d_alpha = m;
        let d_beta = if u > 0.0 { m * b * u.ln() } else { 0.0 };
        let r = v - m;
        jaa += d_alpha * d_alpha;
        jab += d_alpha * d_beta;
        jbb += d_beta * d_beta;
        ga += d_alpha * r;
        gb += d_beta * r;
    }
    let det = jaa * jbb - jab * jab;
    if !(det.is_finite() && det > f64::EPSILON * jaa * jbb) {
        return None;
    }
    Some(((jbb * ga - jab * gb) / det, (jaa * gb - jab * ga) / det))
}
