//! Natural cubic smoothing spline with GCV-selected smoothing parameter.
//!
//! Value/second-derivative form: with knots `t`, fitted values `g` and
//! interior second derivatives `γ`, the penalised fit solves
//! `(R + λ Qᵀ W⁻¹ Q) γ = Qᵀ ȳ` and sets `g = ȳ - λ W⁻¹ Q γ`, where `ȳ`
//! averages tied observations and `W` counts them. Both systems are
//! pentadiagonal, so a fit costs O(m) for m distinct knots.

use serde::Serialize;

use crate::datagen::{min_max, Dataset};
use crate::error::{Error, Result};

use super::{columns, Direction, FitKind, FitModel};

pub const MIN_ROWS: usize = 10;
const GRID_POINTS: usize = 31;
const GRID_LOG10_MIN: f64 = -10.0;
const GRID_LOG10_MAX: f64 = 2.0;
const MONOTONE_CHECK_POINTS: usize = 1024;
const BISECTION_MAX_ITERATIONS: usize = 200;

/// Candidate smoothing parameters for `n` observations spanning `range`.
///
/// The penalty scales with the cube of the predictor range and the data
/// term with `n`, so the grid is expressed relative to `n · range³`.
pub fn lambda_grid(n: usize, range: f64) -> Vec<f64> {
    let scale = n as f64 * range.powi(3);
    let step = (GRID_LOG10_MAX - GRID_LOG10_MIN) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS)
        .map(|i| scale * 10f64.powf(GRID_LOG10_MIN + step * i as f64))
        .collect()
}

/// Predictor values closer than this fraction of the range share a knot;
/// nearly coincident knots make the penalised system numerically singular.
const TIE_TOLERANCE: f64 = 1e-6;

/// Observations collapsed onto distinct knots.
#[derive(Debug, Clone, PartialEq)]
struct Prepared {
    knots: Vec<f64>,
    mean: Vec<f64>,
    weight: Vec<f64>,
    /// Sum of squares of observations about their knot mean.
    within_ss: f64,
    n: usize,
}

impl Prepared {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut knots = Vec::new();
        let mut mean = Vec::new();
        let mut weight = Vec::new();
        let mut within_ss = 0.0;
        let tol = TIE_TOLERANCE * (pairs[pairs.len() - 1].0 - pairs[0].0);
        let mut i = 0;
        while i < pairs.len() {
            let mut j = i;
            while j < pairs.len() && pairs[j].0 - pairs[i].0 <= tol {
                j += 1;
            }
            let group = &pairs[i..j];
            let count = group.len() as f64;
            let m = group.iter().map(|p| p.1).sum::<f64>() / count;
            within_ss += group.iter().map(|p| (p.1 - m).powi(2)).sum::<f64>();
            knots.push(group.iter().map(|p| p.0).sum::<f64>() / count);
            mean.push(m);
            weight.push(count);
            i = j;
        }
        Prepared {
            knots,
            mean,
            weight,
            within_ss,
            n: pairs.len(),
        }
    }

    fn range(&self) -> f64 {
        self.knots[self.knots.len() - 1] - self.knots[0]
    }
}

/// Symmetric pentadiagonal matrix stored by diagonals.
struct Band {
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

/// `R` (tridiagonal) and `M = Qᵀ W⁻¹ Q` (pentadiagonal) for the knots.
struct Penalty {
    r: Band,
    m: Band,
}

impl Penalty {
    fn new(prep: &Prepared) -> Self {
        let t = &prep.knots;
        let w = &prep.weight;
        let k = t.len() - 2;
        let h: Vec<f64> = t.windows(2).map(|p| p[1] - p[0]).collect();
        // Column j of Q has entries at rows j, j+1, j+2.
        let qa = |j: usize| 1.0 / h[j];
        let qb = |j: usize| -1.0 / h[j] - 1.0 / h[j + 1];
        let qc = |j: usize| 1.0 / h[j + 1];

        let mut r = Band {
            d0: vec![0.0; k],
            d1: vec![0.0; k],
            d2: vec![0.0; k],
        };
        let mut m = Band {
            d0: vec![0.0; k],
            d1: vec![0.0; k],
            d2: vec![0.0; k],
        };
        for j in 0..k {
            r.d0[j] = (h[j] + h[j + 1]) / 3.0;
            m.d0[j] = qa(j).powi(2) / w[j] + qb(j).powi(2) / w[j + 1] + qc(j).powi(2) / w[j + 2];
            if j + 1 < k {
                r.d1[j] = h[j + 1] / 6.0;
                m.d1[j] = qb(j) * qa(j + 1) / w[j + 1] + qc(j) * qb(j + 1) / w[j + 2];
            }
            if j + 2 < k {
                m.d2[j] = qc(j) * qa(j + 2) / w[j + 2];
            }
        }
        Penalty { r, m }
    }
}

/// `L D Lᵀ` factor of a pentadiagonal SPD matrix.
struct Ldl {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl Ldl {
    fn factor(b: &Band) -> Result<Self> {
        let k = b.d0.len();
        let mut d = vec![0.0f64; k];
        let mut l1 = vec![0.0f64; k];
        let mut l2 = vec![0.0f64; k];
        for i in 0..k {
            let mut di = b.d0[i];
            if i >= 1 {
                di -= l1[i - 1].powi(2) * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2].powi(2) * d[i - 2];
            }
            if !(di.is_finite() && di > 0.0) {
                return Err(Error::IllConditioned(format!(
                    "spline system pivot {di} at row {i}"
                )));
            }
            d[i] = di;
            let mut off = b.d1[i];
            if i >= 1 {
                off -= l1[i - 1] * d[i - 1] * l2[i - 1];
            }
            l1[i] = off / di;
            l2[i] = b.d2[i] / di;
        }
        Ok(Ldl { d, l1, l2 })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let k = rhs.len();
        let mut z = rhs.to_vec();
        for i in 0..k {
            if i >= 1 {
                z[i] -= self.l1[i - 1] * z[i - 1];
            }
            if i >= 2 {
                z[i] -= self.l2[i - 2] * z[i - 2];
            }
        }
        for (zi, di) in z.iter_mut().zip(&self.d) {
            *zi /= di;
        }
        for i in (0..k).rev() {
            if i + 1 < k {
                z[i] -= self.l1[i] * z[i + 1];
            }
            if i + 2 < k {
                z[i] -= self.l2[i] * z[i + 2];
            }
        }
        z
    }

    /// Central band of the inverse (diagonals 0, 1 and 2).
    fn inverse_band(&self) -> Band {
        let k = self.d.len();
        let mut s = Band {
            d0: vec![0.0; k],
            d1: vec![0.0; k],
            d2: vec![0.0; k],
        };
        for i in (0..k).rev() {
            let s00 = |j: usize| if j < k { s.d0[j] } else { 0.0 };
            let s01 = |j: usize| if j + 1 < k { s.d1[j] } else { 0.0 };
            let s1 = -self.l1[i] * s00(i + 1) - self.l2[i] * s01(i + 1);
            let s2 = -self.l1[i] * s01(i + 1) - self.l2[i] * s00(i + 2);
            s.d1[i] = s1;
            s.d2[i] = s2;
            s.d0[i] = 1.0 / self.d[i] - self.l1[i] * s1 - self.l2[i] * s2;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at every knot; zero at both ends.
    second_derivatives: Vec<f64>,
    lambda: f64,
    gcv: f64,
    /// Effective degrees of freedom, the trace of the smoother matrix.
    edf: f64,
    #[serde(skip)]
    prep: Prepared,
}

fn fit_at(prep: &Prepared, penalty: &Penalty, lambda: f64) -> Result<SmoothingSpline> {
    let t = &prep.knots;
    let y = &prep.mean;
    let w = &prep.weight;
    let m = t.len();
    let k = m - 2;
    let h: Vec<f64> = t.windows(2).map(|p| p[1] - p[0]).collect();

    let system = Band {
        d0: (0..k)
            .map(|j| penalty.r.d0[j] + lambda * penalty.m.d0[j])
            .collect(),
        d1: (0..k)
            .map(|j| penalty.r.d1[j] + lambda * penalty.m.d1[j])
            .collect(),
        d2: (0..k).map(|j| lambda * penalty.m.d2[j]).collect(),
    };
    let ldl = Ldl::factor(&system)?;
    let qty: Vec<f64> = (0..k)
        .map(|j| y[j] / h[j] - y[j + 1] * (1.0 / h[j] + 1.0 / h[j + 1]) + y[j + 2] / h[j + 1])
        .collect();
    let gamma = ldl.solve(&qty);

    let mut values = Vec::with_capacity(m);
    for i in 0..m {
        let mut qg = 0.0;
        if i < k {
            qg += gamma[i] / h[i];
        }
        if i >= 1 && i - 1 < k {
            qg -= gamma[i - 1] * (1.0 / h[i - 1] + 1.0 / h[i]);
        }
        if i >= 2 && i - 2 < k {
            qg += gamma[i - 2] / h[i - 1];
        }
        values.push(y[i] - lambda * qg / w[i]);
    }

    let inv = ldl.inverse_band();
    let mut trace = 0.0;
    for j in 0..k {
        trace += inv.d0[j] * penalty.m.d0[j]
            + 2.0 * inv.d1[j] * penalty.m.d1[j]
            + 2.0 * inv.d2[j] * penalty.m.d2[j];
    }
    let edf = m as f64 - lambda * trace;

    let n = prep.n as f64;
    let rss = prep.within_ss
        + values
            .iter()
            .zip(y)
            .zip(w)
            .map(|((g, yb), wi)| wi * (yb - g).powi(2))
            .sum::<f64>();
    let denom = 1.0 - edf / n;
    let gcv = if denom > 0.0 {
        (rss / n) / (denom * denom)
    } else {
        f64::INFINITY
    };

    let mut second_derivatives = Vec::with_capacity(m);
    second_derivatives.push(0.0);
    second_derivatives.extend_from_slice(&gamma);
    second_derivatives.push(0.0);

    Ok(SmoothingSpline {
        knots: t.clone(),
        values,
        second_derivatives,
        lambda,
        gcv,
        edf,
        prep: prep.clone(),
    })
}

/// Selects λ by minimising GCV over [`lambda_grid`]; ties go to the
/// smoother fit.
fn select_by_gcv(prep: &Prepared, penalty: &Penalty) -> Result<SmoothingSpline> {
    let mut best: Option<SmoothingSpline> = None;
    let mut last_err = None;
    for lambda in lambda_grid(prep.n, prep.range()) {
        match fit_at(prep, penalty, lambda) {
            Ok(s) if s.gcv.is_finite() => {
                if best.as_ref().is_none_or(|b| s.gcv <= b.gcv) {
                    best = Some(s);
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::IllConditioned("no finite GCV score on the grid".into()))
    })
}

/// Fits a natural cubic smoothing spline in `direction`. With `lambda`
/// unset, the smoothing parameter is chosen by generalised cross-validation.
pub fn fit_smoothing_spline(
    data: &Dataset,
    direction: Direction,
    lambda: Option<f64>,
) -> Result<FitModel> {
    if data.len() < MIN_ROWS {
        return Err(Error::InvalidParam(format!(
            "smoothing spline needs at least {MIN_ROWS} rows, got {}",
            data.len()
        )));
    }
    if let Some(l) = lambda {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "lambda must be finite and >= 0, got {l}"
            )));
        }
    }
    let (x, y) = columns(data, direction);
    let (lo, hi) = min_max(x);
    if lo == hi {
        return Err(Error::DegenerateColumn {
            column: direction.input().name(),
        });
    }
    let prep = Prepared::new(x, y);
    if prep.knots.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "smoothing spline needs at least 3 distinct predictor values, got {}",
            prep.knots.len()
        )));
    }
    let penalty = Penalty::new(&prep);
    let spline = match lambda {
        Some(l) => fit_at(&prep, &penalty, l)?,
        None => select_by_gcv(&prep, &penalty)?,
    };
    Ok(FitModel::trained(
        FitKind::SmoothingSpline(spline),
        direction,
        data,
    ))
}

impl SmoothingSpline {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gcv(&self) -> f64 {
        self.gcv
    }

    pub fn edf(&self) -> f64 {
        self.edf
    }

    /// Evaluates the spline; constant beyond the outer knots.
    pub fn eval(&self, x: f64) -> f64 {
        let t = &self.knots;
        let last = t.len() - 1;
        if x <= t[0] {
            return self.values[0];
        }
        if x >= t[last] {
            return self.values[last];
        }
        let i = t.partition_point(|&k| k <= x) - 1;
        let (tl, tr) = (t[i], t[i + 1]);
        let h = tr - tl;
        let (dl, dr) = (x - tl, tr - x);
        let (gl, gr) = (self.values[i], self.values[i + 1]);
        let (cl, cr) = (self.second_derivatives[i], self.second_derivatives[i + 1]);
        (dl * gr + dr * gl) / h - dl * dr / 6.0 * ((1.0 + dl / h) * cr + (1.0 + dr / h) * cl)
    }

    /// Whether the spline is strictly monotone across its knot span.
    pub fn is_monotone(&self) -> bool {
        let (lo, hi) = (self.knots[0], self.knots[self.knots.len() - 1]);
        let step = (hi - lo) / (MONOTONE_CHECK_POINTS - 1) as f64;
        let samples: Vec<f64> = (0..MONOTONE_CHECK_POINTS)
            .map(|i| self.eval(lo + step * i as f64))
            .collect();
        samples.windows(2).all(|p| p[1] > p[0]) || samples.windows(2).all(|p| p[1] < p[0])
    }

    /// This spline if monotone, else the least-smoothed monotone refit
    /// among larger grid values of λ.
    pub fn monotone(&self) -> Result<SmoothingSpline> {
        if self.is_monotone() {
            return Ok(self.clone());
        }
        let penalty = Penalty::new(&self.prep);
        for lambda in lambda_grid(self.prep.n, self.prep.range()) {
            if lambda <= self.lambda {
                continue;
            }
            if let Ok(refit) = fit_at(&self.prep, &penalty, lambda) {
                if refit.is_monotone() {
                    return Ok(refit);
                }
            }
        }
        Err(Error::NotInvertible(format!(
            "spline is not monotone for any lambda >= {}",
            self.lambda
        )))
    }

    /// Solves `eval(x) = y` for `x` within the knot span by bisection,
    /// clamping `y` to the spline's range. Assumes monotonicity.
    pub fn solve(&self, y: f64) -> f64 {
        let last = self.knots.len() - 1;
        let (mut lo, mut hi) = (self.knots[0], self.knots[last]);
        let increasing = self.values[last] > self.values[0];
        let sign = if increasing { 1.0 } else { -1.0 };
        let target = sign * y;
        if target <= sign * self.eval(lo) {
            return lo;
        }
        if target >= sign * self.eval(hi) {
            return hi;
        }
        for _ in 0..BISECTION_MAX_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = sign * self.eval(mid);
            if v == target {
                return mid;
            }
            if v < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
