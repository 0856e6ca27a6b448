//! Globally adaptive 21-point Gauss–Kronrod integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::QuadratureFailure;

// Kronrod abscissae on [0, 1); odd indices are the embedded 10-point Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const EVALS_PER_RULE: usize = 21;

/// Exponent of the `x = a + (b - a) u^p` map used to soften a singular
/// left endpoint. Turns `x^α` into `u^(pα + p - 1)`.
const ENDPOINT_POWER: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of integrand evaluations.
    pub max_evals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_evals: 100_000,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rule<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadratureFailure> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureFailure::NonFinite { at: x })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut values = [(0.0, 0.0); 10];
    for (j, &x) in XGK[..10].iter().enumerate() {
        let lo = eval(center - half * x)?;
        let hi = eval(center + half * x)?;
        values[j] = (lo, hi);
        kronrod += WGK[j] * (lo + hi);
        res_abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for (j, &(lo, hi)) in values.iter().enumerate() {
        res_asc += WGK[j] * ((lo - mean).abs() + (hi - mean).abs());
    }

    let scale = half.abs();
    let (kronrod, res_abs, res_asc) = (kronrod * half, res_abs * scale, res_asc * scale);
    let mut err = (kronrod - gauss * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((kronrod, err))
}

impl Quadrature {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Quadrature {
            abs_tol,
            ..Default::default()
        }
    }

    /// Integrates `f` over `[a, b]`, bisecting the worst segment until the
    /// summed error estimate meets `max(abs_tol, rel_tol |I|)`.
    pub fn integrate<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
    ) -> Result<Estimate, QuadratureFailure> {
        let (value, error) = rule(&mut f, a, b)?;
        let mut evals = EVALS_PER_RULE;
        let mut heap = BinaryHeap::new();
        heap.push(Segment { a, b, value, error });
        let mut total = value;
        let mut total_err = error;

        loop {
            if total_err <= self.abs_tol.max(self.rel_tol * total.abs()) {
                return Ok(Estimate {
                    value: total,
                    error: total_err,
                    evals,
                });
            }
            if evals + 2 * EVALS_PER_RULE > self.max_evals {
                return Err(QuadratureFailure::Budget {
                    budget: self.max_evals,
                    error: total_err,
                });
            }
            let worst = heap.pop().expect("heap never empties");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Segment can no longer be split in floating point.
                return Err(QuadratureFailure::Budget {
                    budget: self.max_evals,
                    error: total_err,
                });
            }
            let (lv, le) = rule(&mut f, worst.a, mid)?;
            let (rv, re) = rule(&mut f, mid, worst.b)?;
            evals += 2 * EVALS_PER_RULE;
            total += lv + rv - worst.value;
            total_err += le + re - worst.error;
            heap.push(Segment {
                a: worst.a,
                b: mid,
                value: lv,
                error: le,
            });
            heap.push(Segment {
                a: mid,
                b: worst.b,
                value: rv,
                error: re,
            });
            // Re-sum occasionally so cancellation in the running totals
            // cannot drift below the true error.
            if heap.len() % 64 == 0 {
                total = heap.iter().map(|s| s.value).sum();
                total_err = heap.iter().map(|s| s.error).sum();
            }
        }
    }

    /// Like [`integrate`](Self::integrate) but for integrands that may be
    /// singular (yet integrable) at `a`.
    pub fn integrate_left_singular<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
    ) -> Result<Estimate, QuadratureFailure> {
        let width = b - a;
        let p = ENDPOINT_POWER;
        self.integrate(
            |u| {
                let x = a + width * u.powi(p);
                f(x) * width * f64::from(p) * u.powi(p - 1)
            },
            0.0,
            1.0,
        )
    }
}
