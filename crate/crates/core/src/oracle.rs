//! Strictly increasing oracle functions on the unit interval.
//!
//! Every family carries closed forms for its value, slope, inverse and
//! inverse slope. A normalized oracle is rescaled to
//! `(f(c) - f(0)) / (f(1) - f(0))` so it maps `[0, 1]` onto `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking that a cause value lies in `[0, 1]`.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

const DEG: f64 = 2.0 * std::f64::consts::PI / 360.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Linear,
    /// `f(x) = exp(a x)`
    Exponential {
        a: f64,
    },
    /// `f(x) = sin((30 x + 25) 2π / 360)`, the 25°..55° arc of the sine.
    SineWindow,
    /// `f(x) = x^a`
    Power {
        a: f64,
    },
    /// `f(x) = a x^b`
    ScaledPower {
        a: f64,
        b: f64,
    },
}

impl Family {
    fn f(&self, x: f64) -> f64 {
        match *self {
            Family::Linear => x,
            Family::Exponential { a } => (a * x).exp(),
            Family::SineWindow => ((30.0 * x + 25.0) * DEG).sin(),
            Family::Power { a } => x.powf(a),
            Family::ScaledPower { a, b } => a * x.powf(b),
        }
    }

    fn df(&self, x: f64) -> f64 {
        match *self {
            Family::Linear => 1.0,
            Family::Exponential { a } => a * (a * x).exp(),
            Family::SineWindow => ((30.0 * x + 25.0) * DEG).cos() * 30.0 * DEG,
            Family::Power { a } => a * x.powf(a - 1.0),
            Family::ScaledPower { a, b } => a * b * x.powf(b - 1.0),
        }
    }

    fn finv(&self, y: f64) -> f64 {
        match *self {
            Family::Linear => y,
            Family::Exponential { a } => y.ln() / a,
            Family::SineWindow => (y.asin() / DEG - 25.0) / 30.0,
            Family::Power { a } => y.powf(1.0 / a),
            Family::ScaledPower { a, b } => (y / a).powf(1.0 / b),
        }
    }

    fn dfinv(&self, y: f64) -> f64 {
        match *self {
            Family::Linear => 1.0,
            Family::Exponential { a } => 1.0 / (a * y),
            Family::SineWindow => 1.0 / (30.0 * DEG * (1.0 - y * y).sqrt()),
            Family::Power { a } => y.powf(1.0 / a - 1.0) / a,
            Family::ScaledPower { a, b } => (y / a).powf(1.0 / b - 1.0) / (a * b),
        }
    }

    /// Values of `y` on which the closed-form `f⁻¹` is defined.
    fn finv_domain(&self) -> Interval {
        match *self {
            Family::Linear => Interval::closed(f64::NEG_INFINITY, f64::INFINITY),
            Family::Exponential { .. } => Interval {
                lo: 0.0,
                lo_open: true,
                hi: f64::INFINITY,
                hi_open: false,
            },
            Family::SineWindow => Interval::closed(-1.0, 1.0),
            Family::Power { .. } | Family::ScaledPower { .. } => {
                Interval::closed(0.0, f64::INFINITY)
            }
        }
    }

    fn validate(&self, normalized: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        match *self {
            Family::Exponential { a } => {
                if !a.is_finite() || a == 0.0 {
                    return bad(format!(
                        "exponential rate must be finite and non-zero, got {a}"
                    ));
                }
                if !normalized && a < 0.0 {
                    return bad(format!("unnormalized exp(a x) with a = {a} is decreasing"));
                }
            }
            Family::Power { a } => {
                if !(a.is_finite() && a > 0.0) {
                    return bad(format!("power exponent must be positive, got {a}"));
                }
            }
            Family::ScaledPower { a, b } => {
                if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
                    return bad(format!(
                        "scaled power needs a > 0 and b > 0, got a = {a}, b = {b}"
                    ));
                }
            }
            Family::Linear | Family::SineWindow => {}
        }
        Ok(())
    }
}

/// An interval with independently open or closed ends; ends may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub lo_open: bool,
    pub hi: f64,
    pub hi_open: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            lo_open: false,
            hi,
            hi_open: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open {
            x > self.lo
        } else {
            x >= self.lo
        };
        let below = if self.hi_open {
            x < self.hi
        } else {
            x <= self.hi
        };
        above && below
    }
}

/// Result of inverting an oracle on a possibly out-of-range effect value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: f64,
    /// Set when the input fell outside the inverse's domain and was moved
    /// to the nearest end of the oracle's range first.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OracleSpec", into = "OracleSpec")]
pub struct Oracle {
    family: Family,
    normalized: bool,
    f0: f64,
    f1: f64,
}

#[derive(Serialize, Deserialize)]
struct OracleSpec {
    family: Family,
    normalized: bool,
}

impl TryFrom<OracleSpec> for Oracle {
    type Error = Error;
    fn try_from(spec: OracleSpec) -> Result<Self> {
        Oracle::new(spec.family, spec.normalized)
    }
}

impl From<Oracle> for OracleSpec {
    fn from(o: Oracle) -> Self {
        OracleSpec {
            family: o.family,
            normalized: o.normalized,
        }
    }
}

impl Oracle {
    pub fn new(family: Family, normalized: bool) -> Result<Self> {
        family.validate(normalized)?;
        Ok(Oracle {
            family,
            normalized,
            f0: family.f(0.0),
            f1: family.f(1.0),
        })
    }

    pub fn linear() -> Self {
        Oracle::new(Family::Linear, true).expect("linear oracle is always valid")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Same family with normalization switched on.
    pub fn normalized(&self) -> Self {
        Oracle {
            normalized: true,
            ..*self
        }
    }

    /// Whether φ is affine, i.e. has a constant slope.
    pub fn is_linear(&self) -> bool {
        match self.family {
            Family::Linear => true,
            Family::Power { a } => a == 1.0,
            Family::ScaledPower { b, .. } => b == 1.0,
            Family::Exponential { .. } | Family::SineWindow => false,
        }
    }

    fn span(&self) -> f64 {
        self.f1 - self.f0
    }

    fn check_domain(&self, c: f64) -> Result<f64> {
        if !(-DOMAIN_TOLERANCE..=1.0 + DOMAIN_TOLERANCE).contains(&c) {
            return Err(Error::Domain {
                value: c,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(c.clamp(0.0, 1.0))
    }

    pub fn eval(&self, c: f64) -> Result<f64> {
        let c = self.check_domain(c)?;
        Ok(self.eval_unchecked(c))
    }

    /// `φ(c)` without the domain check; `c` must lie in `[0, 1]`.
    pub fn eval_unchecked(&self, c: f64) -> f64 {
        if !self.normalized {
            return self.family.f(c);
        }
        match self.family {
            Family::Linear => c,
            Family::Exponential { a } => (a * c).exp_m1() / a.exp_m1(),
            Family::Power { a } => c.powf(a),
            Family::ScaledPower { b, .. } => c.powf(b),
            Family::SineWindow => (self.family.f(c) - self.f0) / self.span(),
        }
    }

    pub fn derivative(&self, c: f64) -> Result<f64> {
        let c = self.check_domain(c)?;
        Ok(self.derivative_unchecked(c))
    }

    pub fn derivative_unchecked(&self, c: f64) -> f64 {
        if !self.normalized {
            return self.family.df(c);
        }
        match self.family {
            Family::Exponential { a } => a * (a * c).exp() / a.exp_m1(),
            Family::ScaledPower { b, .. } => b * c.powf(b - 1.0),
            _ => self.family.df(c) / self.span(),
        }
    }

    /// Effect values on which the closed-form inverse is defined.
    ///
    /// This always contains `[φ(0), φ(1)]` and is usually larger, e.g. the
    /// whole real line for a linear oracle or `e >= 0` for powers.
    pub fn inverse_domain(&self) -> Interval {
        let raw = self.family.finv_domain();
        if !self.normalized {
            return raw;
        }
        if let Family::Exponential { a } = self.family {
            // 1 + e (exp(a) - 1) > 0
            let bound = -1.0 / a.exp_m1();
            return if a > 0.0 {
                Interval {
                    lo: bound,
                    lo_open: true,
                    hi: f64::INFINITY,
                    hi_open: false,
                }
            } else {
                Interval {
                    lo: f64::NEG_INFINITY,
                    lo_open: false,
                    hi: bound,
                    hi_open: true,
                }
            };
        }
        // span > 0 for every remaining family, so the ends keep their order.
        let map = |y: f64| (y - self.f0) / self.span();
        Interval {
            lo: map(raw.lo),
            lo_open: raw.lo_open,
            hi: map(raw.hi),
            hi_open: raw.hi_open,
        }
    }

    /// `[φ(0), φ(1)]` as a `(lo, hi)` pair.
    pub fn range(&self) -> (f64, f64) {
        if self.normalized {
            (0.0, 1.0)
        } else {
            (self.f0, self.f1)
        }
    }

    /// `φ(1) - φ(0)`.
    pub fn range_width(&self) -> f64 {
        let (lo, hi) = self.range();
        hi - lo
    }

    fn clamp_effect(&self, e: f64) -> (f64, bool) {
        if self.inverse_domain().contains(e) {
            return (e, false);
        }
        let (lo, hi) = self.range();
        let mid = 0.5 * (lo + hi);
        (if e.is_nan() || e < mid { lo } else { hi }, true)
    }

    pub fn inverse(&self, e: f64) -> Inversion {
        let (e, clamped) = self.clamp_effect(e);
        let value = if !self.normalized {
            self.family.finv(e)
        } else {
            match self.family {
                Family::Linear => e,
                Family::Exponential { a } => (e * a.exp_m1()).ln_1p() / a,
                Family::Power { a } => e.powf(1.0 / a),
                Family::ScaledPower { b, .. } => e.powf(1.0 / b),
                Family::SineWindow => self.family.finv(self.f0 + e * self.span()),
            }
        };
        Inversion { value, clamped }
    }

    pub fn inverse_derivative(&self, e: f64) -> f64 {
        let (e, _) = self.clamp_effect(e);
        if !self.normalized {
            return self.family.dfinv(e);
        }
        match self.family {
            Family::Exponential { a } => {
                let k = a.exp_m1();
                k / (a * (1.0 + e * k))
            }
            Family::ScaledPower { b, .. } => e.powf(1.0 / b - 1.0) / b,
            _ => self.span() * self.family.dfinv(self.f0 + e * self.span()),
        }
    }
}

impl fmt::Display for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Linear => write!(f, "linear")?,
            Family::Exponential { a } => write!(f, "exp:a={a}")?,
            Family::SineWindow => write!(f, "sin-window")?,
            Family::Power { a } => write!(f, "pow:a={a}")?,
            Family::ScaledPower { a, b } => write!(f, "spow:a={a},b={b}")?,
        }
        if self.normalized {
            write!(f, ",norm")?;
        }
        Ok(())
    }
}

impl FromStr for Oracle {
    type Err = Error;

    /// Parses tokens such as `linear`, `exp:a=2,norm` or `spow:a=0.8,b=2`.
    fn from_str(token: &str) -> Result<Self> {
        let bad = || Error::InvalidParam(format!("unrecognized oracle token `{token}`"));
        let (head, rest) = match token.split_once(':') {
            Some((h, r)) => (h, r),
            None => match token.split_once(',') {
                Some((h, r)) => (h, r),
                None => (token, ""),
            },
        };
        let mut normalized = false;
        let mut a = None;
        let mut b = None;
        for piece in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if piece == "norm" {
                normalized = true;
                continue;
            }
            let (key, value) = piece.split_once('=').ok_or_else(bad)?;
            let value: f64 = value.trim().parse().map_err(|_| bad())?;
            match key.trim() {
                "a" if a.is_none() => a = Some(value),
                "b" if b.is_none() => b = Some(value),
                _ => return Err(bad()),
            }
        }
        let family = match (head.trim(), a, b) {
            ("linear", None, None) => Family::Linear,
            ("sin-window", None, None) => Family::SineWindow,
            ("exp", Some(a), None) => Family::Exponential { a },
            ("pow", Some(a), None) => Family::Power { a },
            ("spow", Some(a), Some(b)) => Family::ScaledPower { a, b },
            _ => return Err(bad()),
        };
        Oracle::new(family, normalized)
    }
}

/// Splits a comma-separated list of oracle tokens.
///
/// Commas also separate parameters inside a token, so a piece that is `norm`
/// or `key=value` continues the previous token: `spow:a=1,b=2,norm,linear`
/// yields two oracles.
pub fn parse_oracle_list(list: &str) -> Result<Vec<Oracle>> {
    let mut tokens: Vec<String> = Vec::new();
    for piece in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let continues = piece == "norm" || (piece.contains('=') && !piece.contains(':'));
        match tokens.last_mut() {
            Some(last) if continues => {
                last.push(',');
                last.push_str(piece);
            }
            _ => tokens.push(piece.to_string()),
        }
    }
    if tokens.is_empty() {
        return Err(Error::InvalidParam("empty oracle list".into()));
    }
    tokens.iter().map(|t| t.parse()).collect()
}
