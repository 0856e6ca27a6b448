//! Analytic error predictions for oracle prediction in both directions.
//!
//! With `E = φ(C) + N` the oracle's expected squared error predicting `E`
//! is `Var[N]`, while `φ⁻¹` predicting `C` has, to first order in the
//! noise, `Var[N] ∫ (1/φ'(c))² p(c) dc`. Independence of `φ'` and `p(C)` puts
//! that integral above `1 / (φ(1) - φ(0))²`.

use std::cell::Cell;

use serde::Serialize;

use crate::datagen::NoiseSpec;
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::quad::Quadrature;

/// Slopes below this are treated as singular (a reciprocal slope of 1e12).
pub const SINGULAR_SLOPE: f64 = 1e-12;

/// Predicted errors closer than this count as equal.
pub const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    Uniform,
    /// `p(x) ∝ exp(rate · x)` on `[0, 1]`.
    Exponential {
        rate: f64,
    },
    /// `p(x) = 1 + slope · (x - 1/2)` on `[0, 1]`, `|slope| < 2`.
    Linear {
        slope: f64,
    },
    /// Density of `φ(X)` for `X` drawn from `source`.
    Pushforward {
        source: Box<Density1D>,
        oracle: Oracle,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density1D {
    support: (f64, f64),
    kind: DensityKind,
}

impl Density1D {
    pub fn uniform() -> Self {
        Density1D {
            support: (0.0, 1.0),
            kind: DensityKind::Uniform,
        }
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate == 0.0 {
            return Err(Error::InvalidParam(format!(
                "exponential density needs a finite non-zero rate, got {rate}"
            )));
        }
        Ok(Density1D {
            support: (0.0, 1.0),
            kind: DensityKind::Exponential { rate },
        })
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if slope.is_nan() || slope.abs() >= 2.0 {
            return Err(Error::InvalidParam(format!(
                "linear density must stay positive: |slope| < 2, got {slope}"
            )));
        }
        Ok(Density1D {
            support: (0.0, 1.0),
            kind: DensityKind::Linear { slope },
        })
    }

    /// Density of `φ(X)` given the density of `X` on `[0, 1]`.
    pub fn pushforward(source: Density1D, oracle: Oracle) -> Result<Self> {
        if source.support != (0.0, 1.0) {
            return Err(Error::InvalidParam(
                "push-forward source must live on [0, 1]".into(),
            ));
        }
        Ok(Density1D {
            support: oracle.range(),
            kind: DensityKind::Pushforward {
                source: Box::new(source),
                oracle,
            },
        })
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support;
        if !(lo..=hi).contains(&x) {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Uniform => 1.0 / (hi - lo),
            DensityKind::Exponential { rate } => rate * (rate * x).exp() / rate.exp_m1(),
            DensityKind::Linear { slope } => 1.0 + slope * (x - 0.5),
            DensityKind::Pushforward { source, oracle } => {
                let c = oracle.inverse(x).value.clamp(0.0, 1.0);
                source.pdf(c) * oracle.inverse_derivative(x)
            }
        }
    }

    fn require_unit_support(&self) -> Result<()> {
        if self.support != (0.0, 1.0) {
            return Err(Error::InvalidParam(format!(
                "density must be supported on [0, 1], got {:?}",
                self.support
            )));
        }
        Ok(())
    }
}

fn quadrature() -> Quadrature {
    Quadrature::default()
}

/// `Dep[φ', p] = ∫ φ'(c) p(c) dc - (φ(1) - φ(0))`.
pub fn dep_measure(phi: &Oracle, density: &Density1D) -> Result<f64> {
    density.require_unit_support()?;
    let est = quadrature().integrate_left_singular(
        |c| phi.derivative_unchecked(c) * density.pdf(c),
        0.0,
        1.0,
    )?;
    Ok(est.value - phi.range_width())
}

/// `∫ φ'(c)^(-power) p(c) dc`, refusing to integrate through a vanishing slope.
pub fn reciprocal_slope_moment(phi: &Oracle, density: &Density1D, power: i32) -> Result<f64> {
    density.require_unit_support()?;
    let singular = Cell::new(None);
    let est = quadrature().integrate_left_singular(
        |c| {
            let slope = phi.derivative_unchecked(c);
            if slope < SINGULAR_SLOPE {
                if singular.get().is_none() {
                    singular.set(Some((c, slope)));
                }
                return 0.0;
            }
            slope.powi(-power) * density.pdf(c)
        },
        0.0,
        1.0,
    );
    if let Some((at, slope)) = singular.get() {
        return Err(Error::SingularSlope { at, slope });
    }
    Ok(est?.value)
}

/// `Dep[(φ⁻¹)', p(E)]` where `p(E)` is the noiseless push-forward of the
/// cause density. Returns `+∞` when `(φ⁻¹)'` blows up non-integrably.
pub fn dep_inverse(phi: &Oracle, cause_density: &Density1D) -> Result<f64> {
    if !phi.is_normalized() {
        return Err(Error::InvalidParam(
            "dep_inverse needs a normalized oracle".into(),
        ));
    }
    let effect_density = Density1D::pushforward(cause_density.clone(), *phi)?;
    let singular = Cell::new(false);
    let est = quadrature().integrate_left_singular(
        |e| {
            let c = phi.inverse(e).value.clamp(0.0, 1.0);
            if phi.derivative_unchecked(c) < SINGULAR_SLOPE {
                singular.set(true);
                return 0.0;
            }
            phi.inverse_derivative(e) * effect_density.pdf(e)
        },
        0.0,
        1.0,
    );
    if singular.get() {
        return Ok(f64::INFINITY);
    }
    let span = phi.inverse(1.0).value - phi.inverse(0.0).value;
    Ok(est?.value - span)
}

pub fn expected_causal_error(noise: &NoiseSpec) -> f64 {
    noise.variance()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub dep_forward: f64,
    /// Absent for unnormalized oracles.
    pub dep_inverse: Option<f64>,
    pub expected_causal_error: f64,
    pub expected_anticausal_error: f64,
    pub anticausal_lower_bound: f64,
    pub anticausal_integral: f64,
    /// The noise is too large for the first-order expansion to be trusted
    /// (σ above a tenth of the oracle's range).
    pub taylor_regime_exceeded: bool,
}

pub fn expected_anticausal_error(
    phi: &Oracle,
    density: &Density1D,
    noise: &NoiseSpec,
) -> Result<TheoryReport> {
    let integral = reciprocal_slope_moment(phi, density, 2)?;
    let variance = noise.variance();
    let width = phi.range_width();
    let dep_inverse = if phi.is_normalized() {
        Some(dep_inverse(phi, density)?)
    } else {
        None
    };
    Ok(TheoryReport {
        dep_forward: dep_measure(phi, density)?,
        dep_inverse,
        expected_causal_error: expected_causal_error(noise),
        expected_anticausal_error: variance * integral,
        anticausal_lower_bound: variance / (width * width),
        anticausal_integral: integral,
        taylor_regime_exceeded: noise.std_dev() > 0.1 * width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremVerdict {
    Equal,
    CausalSmaller,
    AnticausalSmaller,
    /// `φ(1) - φ(0) > 1`: the error ordering is not implied.
    OutOfScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub causal_error: f64,
    /// `+∞` when the reciprocal-slope integral diverges.
    pub anticausal_error: f64,
    pub verdict: TheoremVerdict,
}

/// Compares the predicted causal and anticausal errors.
pub fn verify_theorem(phi: &Oracle, density: &Density1D, noise: &NoiseSpec) -> TheoremCheck {
    let causal = expected_causal_error(noise);
    if causal == 0.0 {
        return TheoremCheck {
            causal_error: 0.0,
            anticausal_error: 0.0,
            verdict: TheoremVerdict::Equal,
        };
    }
    let anticausal = match reciprocal_slope_moment(phi, density, 2) {
        Ok(integral) => causal * integral,
        Err(_) => f64::INFINITY,
    };
    let verdict = if phi.range_width() > 1.0 + TIE_TOLERANCE {
        TheoremVerdict::OutOfScope
    } else if (anticausal - causal).abs() <= TIE_TOLERANCE {
        TheoremVerdict::Equal
    } else if causal < anticausal {
        TheoremVerdict::CausalSmaller
    } else {
        TheoremVerdict::AnticausalSmaller
    };
    TheoremCheck {
        causal_error: causal,
        anticausal_error: anticausal,
        verdict,
    }
}

/// The three terms of
/// `∫(1/φ')² p ≥ (∫(1/φ') p)² ≥ 1/(φ(1) - φ(0))²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeChain {
    pub mean_square_reciprocal: f64,
    pub squared_mean_reciprocal: f64,
    pub range_bound: f64,
    pub dep_forward: f64,
}

impl SlopeChain {
    pub fn holds(&self, tol: f64) -> bool {
        self.mean_square_reciprocal >= self.squared_mean_reciprocal - tol
            && self.squared_mean_reciprocal >= self.range_bound - tol
    }
}

/// Evaluates both Cauchy–Schwarz steps. Divergent terms are `+∞` (the
/// integrands are non-negative).
pub fn cauchy_schwarz_chain(phi: &Oracle, density: &Density1D) -> Result<SlopeChain> {
    let extended = |r: Result<f64>| match r {
        Err(Error::SingularSlope { .. }) => Ok(f64::INFINITY),
        other => other,
    };
    let mean_square = extended(reciprocal_slope_moment(phi, density, 2))?;
    let mean = extended(reciprocal_slope_moment(phi, density, 1))?;
    let width = phi.range_width();
    Ok(SlopeChain {
        mean_square_reciprocal: mean_square,
        squared_mean_reciprocal: mean * mean,
        range_bound: 1.0 / (width * width),
        dep_forward: dep_measure(phi, density)?,
    })
}

/// A 2×2 conditional table `P(target | given)`, stored as
/// `table[target][given]`, so each column sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conditional {
    pub table: [[f64; 2]; 2],
}

impl Conditional {
    pub fn prob(&self, target: usize, given: usize) -> f64 {
        self.table[target][given]
    }

    pub fn column_sum(&self, given: usize) -> f64 {
        self.table[0][given] + self.table[1][given]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RainTables {
    /// `P(E | C)`: wet street given rain.
    pub causal: Conditional,
    /// `P(C | E)`: rain given wet street.
    pub anticausal: Conditional,
}

/// Conditionals of the binary rain example: rain always wets the street, and
/// a dry day still yields a wet street with probability `noise_prob`.
pub fn binary_conditionals(noise_prob: f64, prior_c1: f64) -> Result<RainTables> {
    if !(0.0..=1.0).contains(&noise_prob) {
        return Err(Error::InvalidParam(format!(
            "noise probability must lie in [0, 1], got {noise_prob}"
        )));
    }
    if !(prior_c1 > 0.0 && prior_c1 < 1.0) {
        return Err(Error::InvalidParam(format!(
            "P(C = 1) must lie in (0, 1), got {prior_c1}"
        )));
    }
    let prior_c0 = 1.0 - prior_c1;
    let wet = noise_prob * prior_c0 + prior_c1;
    let causal = Conditional {
        table: [[1.0 - noise_prob, 0.0], [noise_prob, 1.0]],
    };
    let anticausal = Conditional {
        table: [[1.0, noise_prob * prior_c0 / wet], [0.0, prior_c1 / wet]],
    };
    Ok(RainTables { causal, anticausal })
}
