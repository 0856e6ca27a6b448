//! End-to-end experiment harnesses and result tables.

mod format;
mod pairs;

use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::{derive_seed, generate, Column, NoisePolicy, NoiseSpec};
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::regress::{fit_smoothing_spline, Direction};
use crate::theory::{
    expected_anticausal_error, verify_theorem, Density1D, TheoremCheck, TheoryReport,
};

pub use format::{format_sig, write_pairs_csv, write_reports_csv, CSV_HEADER};
pub use pairs::{
    ingest_pairs, run_pairs_benchmark, spearman, Corpus, PairOutcome, PairRecord, PairsSummary,
    ScoredPair, SkipReason, SkippedPair, EXTREME_GAP_RATIO, PAIR_TIE_TOLERANCE,
};

/// Absolute floor of the tie band between mean RMSEs.
pub const TIE_FLOOR: f64 = 1e-12;
/// Fraction of the combined standard error treated as a tie.
pub const TIE_SE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CausalSmaller,
    AnticausalSmaller,
    Tie,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::CausalSmaller => "causal_smaller",
            Verdict::AnticausalSmaller => "anticausal_smaller",
            Verdict::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Exact oracle forward, exact inverse backward.
    KnownOracle,
    /// Smoothing splines fitted in each direction on effect-normalized data.
    UnknownOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunOptions {
    pub n: usize,
    pub runs: usize,
    pub base_seed: u64,
    /// Defaults to `resample` for known-oracle runs and `none` otherwise.
    pub noise_policy: Option<NoisePolicy>,
    /// Fixed spline smoothing parameter; GCV when unset.
    pub lambda: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            n: 1000,
            runs: 100,
            base_seed: 0,
            noise_policy: None,
            lambda: None,
        }
    }
}

impl RunOptions {
    fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::InvalidParam("runs must be >= 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParam(format!(
                "n must be >= 2, got {}",
                self.n
            )));
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidParam(format!(
                    "lambda must be finite and >= 0, got {l}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub experiment: Experiment,
    pub index: usize,
    pub oracle: Oracle,
    pub oracle_token: String,
    pub sigma: f64,
    pub noise: NoiseSpec,
    pub noise_policy: NoisePolicy,
    pub n: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymmetryReport {
    pub config: ReportConfig,
    pub rmse_causal_mean: f64,
    pub rmse_causal_std: f64,
    pub rmse_anticausal_mean: f64,
    pub rmse_anticausal_std: f64,
    pub mse_causal_mean: f64,
    pub mse_anticausal_mean: f64,
    /// Runs in which the causal RMSE was strictly smaller.
    pub causal_wins: usize,
    /// Inverse evaluations clamped to the oracle's range.
    pub clamped_inversions: usize,
    pub theory: Option<TheoryReport>,
    pub theorem: TheoremCheck,
    pub verdict: Verdict,
}

impl AsymmetryReport {
    /// `rmse_anticausal_mean - rmse_causal_mean`.
    pub fn gap(&self) -> f64 {
        self.rmse_anticausal_mean - self.rmse_causal_mean
    }

    /// Standard error of the gap between the two means.
    pub fn combined_se(&self) -> f64 {
        let r = self.config.runs as f64;
        (self.rmse_causal_std.powi(2) / r + self.rmse_anticausal_std.powi(2) / r).sqrt()
    }
}

struct RunResult {
    mse_causal: f64,
    mse_anticausal: f64,
    clamped: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn verdict(causal: (f64, f64), anticausal: (f64, f64), runs: usize) -> Verdict {
    let r = runs as f64;
    let se = (causal.1.powi(2) / r + anticausal.1.powi(2) / r).sqrt();
    let delta = anticausal.0 - causal.0;
    if delta.abs() <= TIE_FLOOR.max(TIE_SE_FRACTION * se) {
        Verdict::Tie
    } else if delta > 0.0 {
        Verdict::CausalSmaller
    } else {
        Verdict::AnticausalSmaller
    }
}

fn configs(
    experiment: Experiment,
    oracles: &[Oracle],
    sigmas: &[f64],
    opts: &RunOptions,
) -> Result<Vec<ReportConfig>> {
    opts.validate()?;
    let default_policy = match experiment {
        Experiment::KnownOracle => NoisePolicy::Resample,
        Experiment::UnknownOracle => NoisePolicy::None,
    };
    let mut out = Vec::with_capacity(oracles.len() * sigmas.len());
    for oracle in oracles {
        let oracle = oracle.normalized();
        for &sigma in sigmas {
            let noise = NoiseSpec::gaussian(sigma)?;
            out.push(ReportConfig {
                experiment,
                index: out.len(),
                oracle_token: oracle.to_string(),
                oracle,
                sigma,
                noise,
                noise_policy: opts.noise_policy.unwrap_or(default_policy),
                n: opts.n,
                runs: opts.runs,
                base_seed: opts.base_seed,
                lambda: match experiment {
                    Experiment::KnownOracle => None,
                    Experiment::UnknownOracle => opts.lambda,
                },
            });
        }
    }
    Ok(out)
}

fn run_seed(config: &ReportConfig, run: usize) -> u64 {
    derive_seed(config.base_seed, &[config.index as u64, run as u64])
}

fn known_run(config: &ReportConfig, run: usize) -> Result<RunResult> {
    let phi = &config.oracle;
    let data = generate(
        phi,
        &config.noise,
        config.n,
        run_seed(config, run),
        config.noise_policy,
    )?;
    let (mut sc, mut sa, mut clamped) = (0.0, 0.0, 0);
    for (&c, &e) in data.c().iter().zip(data.e()) {
        sc += (e - phi.eval_unchecked(c)).powi(2);
        let inv = phi.inverse(e);
        clamped += usize::from(inv.clamped);
        sa += (c - inv.value).powi(2);
    }
    let n = data.len() as f64;
    Ok(RunResult {
        mse_causal: sc / n,
        mse_anticausal: sa / n,
        clamped,
    })
}

fn unknown_run(config: &ReportConfig, run: usize) -> Result<RunResult> {
    let data = generate(
        &config.oracle,
        &config.noise,
        config.n,
        run_seed(config, run),
        config.noise_policy,
    )?
    .normalize_minmax(&[Column::E])?;
    let forward = fit_smoothing_spline(&data, Direction::CToE, config.lambda)?;
    let backward = fit_smoothing_spline(&data, Direction::EToC, config.lambda)?;
    let sq = |r: Option<f64>| r.map_or(f64::NAN, |v| v * v);
    Ok(RunResult {
        mse_causal: sq(forward.training_rmse),
        mse_anticausal: sq(backward.training_rmse),
        clamped: 0,
    })
}

fn assemble(config: ReportConfig, results: &[RunResult]) -> AsymmetryReport {
    let causal: Vec<f64> = results.iter().map(|r| r.mse_causal.sqrt()).collect();
    let anticausal: Vec<f64> = results.iter().map(|r| r.mse_anticausal.sqrt()).collect();
    let c = mean_std(&causal);
    let a = mean_std(&anticausal);
    let density = Density1D::uniform();
    let theory = expected_anticausal_error(&config.oracle, &density, &config.noise).ok();
    let theorem = verify_theorem(&config.oracle, &density, &config.noise);
    let runs = results.len() as f64;
    AsymmetryReport {
        rmse_causal_mean: c.0,
        rmse_causal_std: c.1,
        rmse_anticausal_mean: a.0,
        rmse_anticausal_std: a.1,
        mse_causal_mean: results.iter().map(|r| r.mse_causal).sum::<f64>() / runs,
        mse_anticausal_mean: results.iter().map(|r| r.mse_anticausal).sum::<f64>() / runs,
        causal_wins: causal
            .iter()
            .zip(&anticausal)
            .filter(|(c, a)| c < a)
            .count(),
        clamped_inversions: results.iter().map(|r| r.clamped).sum(),
        theory,
        theorem,
        verdict: verdict(c, a, config.runs),
        config,
    }
}

fn run_all(
    configs: Vec<ReportConfig>,
    run: fn(&ReportConfig, usize) -> Result<RunResult>,
) -> Result<Vec<AsymmetryReport>> {
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(ci, cfg)| (0..cfg.runs).map(move |r| (ci, r)))
        .collect();
    let results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(ci, r)| run(&configs[ci], r))
        .collect::<Result<_>>()?;
    let mut offset = 0;
    let mut reports = Vec::with_capacity(configs.len());
    for cfg in configs {
        let runs = cfg.runs;
        reports.push(assemble(cfg, &results[offset..offset + runs]));
        offset += runs;
    }
    Ok(reports)
}

/// Exact oracle versus exact inverse for every `(oracle, σ)` pair.
/// Oracles are normalized to `[0, 1]` before sampling.
pub fn run_known_oracle(
    oracles: &[Oracle],
    sigmas: &[f64],
    opts: &RunOptions,
) -> Result<Vec<AsymmetryReport>> {
    run_all(
        configs(Experiment::KnownOracle, oracles, sigmas, opts)?,
        known_run,
    )
}

/// Smoothing splines fitted independently in both directions, with the
/// effect column min-max normalized per run.
pub fn run_unknown_oracle(
    oracles: &[Oracle],
    sigmas: &[f64],
    opts: &RunOptions,
) -> Result<Vec<AsymmetryReport>> {
    run_all(
        configs(Experiment::UnknownOracle, oracles, sigmas, opts)?,
        unknown_run,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Family;

    fn opts(n: usize, runs: usize, seed: u64) -> RunOptions {
        RunOptions {
            n,
            runs,
            base_seed: seed,
            ..Default::default()
        }
    }

    #[test]
    fn linear_known_oracle_matches_sigma() {
        let r = run_known_oracle(&[Oracle::linear()], &[0.0, 0.1], &opts(1000, 100, 1)).unwrap();
        assert_eq!(r[0].rmse_causal_mean, 0.0);
        assert_eq!(r[0].rmse_anticausal_mean, 0.0);
        assert_eq!(r[0].verdict, Verdict::Tie);
        assert!((r[1].rmse_causal_mean - 0.1).abs() < 0.001);
        assert!((r[1].rmse_anticausal_mean - 0.1).abs() < 0.001);
        assert_eq!(r[1].verdict, Verdict::Tie);
    }

    #[test]
    fn exp_known_oracle_follows_theory() {
        let exp1 = Oracle::new(Family::Exponential { a: 1.0 }, false).unwrap();
        let r = run_known_oracle(&[exp1], &[0.1], &opts(1000, 100, 2)).unwrap();
        let expected = 0.1 * 1.276_458_020_559_415_8_f64.sqrt();
        assert!((r[0].rmse_anticausal_mean / expected - 1.0).abs() < 0.05);
        assert_eq!(r[0].verdict, Verdict::CausalSmaller);
        assert!(r[0].config.oracle.is_normalized());
    }

    #[test]
    fn deterministic_across_calls() {
        let oracles = [Oracle::new(Family::SineWindow, true).unwrap()];
        let a = run_known_oracle(&oracles, &[0.05], &opts(200, 8, 9)).unwrap();
        let b = run_known_oracle(&oracles, &[0.05], &opts(200, 8, 9)).unwrap();
        assert_eq!(a, b);
        let c = run_known_oracle(&oracles, &[0.05], &opts(200, 8, 10)).unwrap();
        assert_ne!(a[0].rmse_causal_mean, c[0].rmse_causal_mean);
    }

    #[test]
    fn unknown_oracle_noiseless_interpolates() {
        let exp1 = Oracle::new(Family::Exponential { a: 1.0 }, true).unwrap();
        let r = run_unknown_oracle(&[exp1, Oracle::linear()], &[0.0], &opts(1000, 3, 4)).unwrap();
        for rep in &r {
            assert!(rep.rmse_causal_mean <= 1e-4, "{}", rep.rmse_causal_mean);
            assert!(
                rep.rmse_anticausal_mean <= 1e-4,
                "{}",
                rep.rmse_anticausal_mean
            );
        }
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(run_known_oracle(&[Oracle::linear()], &[0.1], &opts(100, 0, 0)).is_err());
        assert!(run_known_oracle(&[Oracle::linear()], &[-0.1], &opts(100, 1, 0)).is_err());
    }

    #[test]
    fn tie_band() {
        assert_eq!(verdict((1.0, 0.1), (1.0 + 1e-13, 0.1), 100), Verdict::Tie);
        // se = 0.1·√(2/100) ≈ 0.01414, band 0.000707
        assert_eq!(verdict((1.0, 0.1), (1.0005, 0.1), 100), Verdict::Tie);
        assert_eq!(
            verdict((1.0, 0.1), (1.001, 0.1), 100),
            Verdict::CausalSmaller
        );
        assert_eq!(
            verdict((1.001, 0.1), (1.0, 0.1), 100),
            Verdict::AnticausalSmaller
        );
    }
}
