//! Synthetic additive-noise datasets and the column transforms applied to them.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Oracle;

/// Per-sample cap on noise redraws under [`NoisePolicy::Resample`].
pub const MAX_RESAMPLE_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NoiseLaw {
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[-half_width, half_width]`.
    Uniform {
        half_width: f64,
    },
}

/// Zero-mean additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseLaw", into = "NoiseLaw")]
pub struct NoiseSpec {
    law: NoiseLaw,
}

impl TryFrom<NoiseLaw> for NoiseSpec {
    type Error = Error;
    fn try_from(law: NoiseLaw) -> Result<Self> {
        let scale = match law {
            NoiseLaw::Gaussian { sigma } => sigma,
            NoiseLaw::Uniform { half_width } => half_width,
        };
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "noise scale must be finite and >= 0, got {scale}"
            )));
        }
        Ok(NoiseSpec { law })
    }
}

impl From<NoiseSpec> for NoiseLaw {
    fn from(n: NoiseSpec) -> Self {
        n.law
    }
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        NoiseLaw::Gaussian { sigma }.try_into()
    }

    pub fn uniform(half_width: f64) -> Result<Self> {
        NoiseLaw::Uniform { half_width }.try_into()
    }

    pub fn law(&self) -> NoiseLaw {
        self.law
    }

    pub fn variance(&self) -> f64 {
        match self.law {
            NoiseLaw::Gaussian { sigma } => sigma * sigma,
            NoiseLaw::Uniform { half_width } => half_width * half_width / 3.0,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    fn sampler(&self) -> NoiseSampler {
        match self.law {
            NoiseLaw::Gaussian { sigma } if sigma > 0.0 => {
                NoiseSampler::Gaussian(Normal::new(0.0, sigma).expect("sigma validated"))
            }
            NoiseLaw::Uniform { half_width } if half_width > 0.0 => NoiseSampler::Uniform(
                Uniform::new_inclusive(-half_width, half_width).expect("width validated"),
            ),
            _ => NoiseSampler::Zero,
        }
    }
}

enum NoiseSampler {
    Zero,
    Gaussian(Normal<f64>),
    Uniform(Uniform<f64>),
}

impl NoiseSampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Zero => 0.0,
            NoiseSampler::Gaussian(d) => d.sample(rng),
            NoiseSampler::Uniform(d) => d.sample(rng),
        }
    }
}

/// What to do when `φ(c) + n` leaves the domain of the closed-form inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePolicy {
    /// Redraw the noise for that sample.
    #[default]
    Resample,
    /// Project the effect onto `[φ(0), φ(1)]`.
    Clamp,
    /// Keep the value as is.
    None,
}

impl std::str::FromStr for NoisePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resample" => Ok(NoisePolicy::Resample),
            "clamp" => Ok(NoisePolicy::Clamp),
            "none" => Ok(NoisePolicy::None),
            _ => Err(Error::InvalidParam(format!("unknown noise policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthDirection {
    CCausesE,
    ECausesC,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    C,
    E,
}

impl Column {
    pub fn other(self) -> Column {
        match self {
            Column::C => Column::E,
            Column::E => Column::C,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::C => "c",
            Column::E => "e",
        }
    }
}

/// `current = scale * original + shift`, accumulated over every transform
/// applied to a column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub scale: f64,
    pub shift: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        scale: 1.0,
        shift: 0.0,
    };

    fn then(self, scale: f64, shift: f64) -> Affine {
        Affine {
            scale: scale * self.scale,
            shift: scale * self.shift + shift,
        }
    }

    pub fn invert(&self, current: f64) -> f64 {
        (current - self.shift) / self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub affine: Affine,
    /// The column currently spans exactly `[0, 1]`.
    pub normalized: bool,
    pub sign_flipped: bool,
}

impl Default for ColumnTransform {
    fn default() -> Self {
        ColumnTransform {
            affine: Affine::IDENTITY,
            normalized: false,
            sign_flipped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Normalization {
    pub c: ColumnTransform,
    pub e: ColumnTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    c: Vec<f64>,
    e: Vec<f64>,
    pub truth: Option<TruthDirection>,
    pub normalization: Normalization,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(c: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if c.len() != e.len() {
            return Err(Error::InvalidParam(format!(
                "column lengths differ: {} vs {}",
                c.len(),
                e.len()
            )));
        }
        if c.len() < 2 {
            return Err(Error::InvalidParam(format!(
                "a dataset needs at least 2 rows, got {}",
                c.len()
            )));
        }
        if let Some(i) = c.iter().chain(&e).position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "non-finite value at flat index {i}"
            )));
        }
        Ok(Dataset {
            c,
            e,
            truth: None,
            normalization: Normalization::default(),
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn column(&self, col: Column) -> &[f64] {
        match col {
            Column::C => &self.c,
            Column::E => &self.e,
        }
    }

    fn column_mut(&mut self, col: Column) -> (&mut Vec<f64>, &mut ColumnTransform) {
        match col {
            Column::C => (&mut self.c, &mut self.normalization.c),
            Column::E => (&mut self.e, &mut self.normalization.e),
        }
    }

    /// Min-max maps each listed column onto `[0, 1]`.
    pub fn normalize_minmax(mut self, columns: &[Column]) -> Result<Self> {
        for &col in columns {
            let (values, transform) = self.column_mut(col);
            let (lo, hi) = min_max(values);
            if hi <= lo {
                return Err(Error::DegenerateColumn { column: col.name() });
            }
            if lo == 0.0 && hi == 1.0 {
                transform.normalized = true;
                continue;
            }
            let width = hi - lo;
            for v in values.iter_mut() {
                *v = (*v - lo) / width;
            }
            // (v - lo) / width can round the extremes by an ulp.
            let (imin, imax) = argmin_max(values);
            values[imin] = 0.0;
            values[imax] = 1.0;
            transform.affine = transform.affine.then(1.0 / width, -lo / width);
            transform.normalized = true;
        }
        Ok(self)
    }

    /// Negates the effect column.
    pub fn flip_effect_sign(mut self) -> Self {
        for v in self.e.iter_mut() {
            *v = -*v;
        }
        let t = &mut self.normalization.e;
        t.affine = t.affine.then(-1.0, 0.0);
        t.sign_flipped = !t.sign_flipped;
        t.normalized = false;
        self
    }

    /// Values of `col` mapped back through the recorded transforms.
    pub fn original_column(&self, col: Column) -> Vec<f64> {
        let t = match col {
            Column::C => self.normalization.c.affine,
            Column::E => self.normalization.e.affine,
        };
        self.column(col).iter().map(|&v| t.invert(v)).collect()
    }

    /// Writes the two-column `c,e` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "c,e")?;
        for (c, e) in self.c.iter().zip(&self.e) {
            writeln!(out, "{c},{e}")?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, message: String| Error::Parse {
            file: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "c,e" => {}
            _ => return Err(parse_err(1, "expected header `c,e`".into())),
        }
        let (mut c, mut e) = (Vec::new(), Vec::new());
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| parse_err(i + 1, "expected two fields".into()))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|err| parse_err(i + 1, format!("`{s}`: {err}")))
            };
            c.push(num(a)?);
            e.push(num(b)?);
        }
        Dataset::new(c, e)
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn argmin_max(values: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[imin] {
            imin = i;
        }
        if v > values[imax] {
            imax = i;
        }
    }
    (imin, imax)
}

/// Mixes a base seed with stream indices into an independent 64-bit seed
/// (SplitMix64 finalizer), so per-run generators never depend on scheduling.
pub fn derive_seed(base: u64, streams: &[u64]) -> u64 {
    let mut z = base;
    for &s in streams {
        z = splitmix(z ^ splitmix(s.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `n` samples of `E = φ(C) + N` with `C ~ U(0, 1)` anchored so the
/// sample minimum is exactly 0 and the maximum exactly 1.
pub fn generate(
    oracle: &Oracle,
    noise: &NoiseSpec,
    n: usize,
    seed: u64,
    policy: NoisePolicy,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("n must be >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let (lo, hi) = min_max(&raw);
    if hi <= lo {
        return Err(Error::DegenerateColumn { column: "c" });
    }
    let width = hi - lo;
    let c: Vec<f64> = raw
        .iter()
        .map(|&v| if v == hi { 1.0 } else { (v - lo) / width })
        .collect();

    let sampler = noise.sampler();
    let valid = oracle.inverse_domain();
    let (range_lo, range_hi) = oracle.range();
    let mut e = Vec::with_capacity(n);
    for (i, &ci) in c.iter().enumerate() {
        let clean = oracle.eval_unchecked(ci);
        let value = match policy {
            NoisePolicy::None => clean + sampler.draw(&mut rng),
            NoisePolicy::Clamp => (clean + sampler.draw(&mut rng)).clamp(range_lo, range_hi),
            NoisePolicy::Resample => {
                let mut attempt = 0;
                loop {
                    let v = clean + sampler.draw(&mut rng);
                    if valid.contains(v) {
                        break v;
                    }
                    attempt += 1;
                    if attempt >= MAX_RESAMPLE_ATTEMPTS {
                        return Err(Error::ResampleExhausted {
                            index: i,
                            attempts: attempt,
                        });
                    }
                }
            }
        };
        e.push(value);
    }

    let mut data = Dataset::new(c, e)?;
    data.truth = Some(TruthDirection::CCausesE);
    data.seed = Some(seed);
    data.normalization.c = ColumnTransform {
        affine: Affine::IDENTITY.then(1.0 / width, -lo / width),
        normalized: true,
        sign_flipped: false,
    };
    Ok(data)
}

/// Everything needed to regenerate a dataset, written next to its CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub oracle: Oracle,
    pub noise: NoiseSpec,
    pub n: usize,
    pub seed: Option<u64>,
    pub noise_policy: NoisePolicy,
    pub normalization: Normalization,
    pub truth_direction: Option<TruthDirection>,
}
