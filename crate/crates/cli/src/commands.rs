use std::path::{Path, PathBuf};

use errasym_core::bench::{
    ingest_pairs, run_known_oracle, run_pairs_benchmark, run_unknown_oracle, write_pairs_csv,
    write_reports_csv, AsymmetryReport, Corpus, PairOutcome, PairsSummary, RunOptions, SkippedPair,
};
use errasym_core::datagen::DatasetSidecar;
use errasym_core::oracle::parse_oracle_list;
use errasym_core::regress::{fit_linear, fit_power, fit_smoothing_spline, invert_model};
use errasym_core::theory::{
    cauchy_schwarz_chain, expected_anticausal_error, verify_theorem, SlopeChain, TheoremCheck,
};
use errasym_core::{
    generate as sample, Dataset, Density1D, Direction, FitModel, NoisePolicy, NoiseSpec, Oracle,
    TheoryReport,
};
use serde::Serialize;

use crate::output::{json_bytes, write_all};
use crate::{
    CliError, DirectionArg, FitArgs, GenerateArgs, ModelKind, PairsArgs, SyntheticArgs, TheoryArgs,
};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_oracle(token: &str) -> Result<Oracle, CliError> {
    token
        .parse()
        .map_err(|e| usage(format!("--oracle {token:?}: {e}")))
}

fn check_sigma(sigma: f64) -> Result<NoiseSpec, CliError> {
    NoiseSpec::gaussian(sigma).map_err(|e| usage(format!("--sigma {sigma}: {e}")))
}

fn check_count(name: &str, value: i64, min: i64) -> Result<usize, CliError> {
    if value < min {
        return Err(usage(format!("--{name} must be >= {min}, got {value}")));
    }
    usize::try_from(value).map_err(|_| usage(format!("--{name} out of range: {value}")))
}

fn check_lambda(lambda: Option<f64>) -> Result<(), CliError> {
    match lambda {
        Some(l) if !(l.is_finite() && l >= 0.0) => {
            Err(usage(format!("--lambda must be finite and >= 0, got {l}")))
        }
        _ => Ok(()),
    }
}

fn parse_sigmas(list: &str) -> Result<Vec<f64>, CliError> {
    let sigmas = list
        .split(',')
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| usage(format!("--sigmas: not a number: {s:?}")))?;
            check_sigma(v)?;
            Ok(v)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if sigmas.is_empty() {
        return Err(usage("--sigmas must not be empty"));
    }
    Ok(sigmas)
}

fn csv_bytes(
    write: impl FnOnce(&mut Vec<u8>) -> errasym_core::Result<()>,
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct GenerateConfig<'a> {
    command: &'static str,
    oracle: &'a str,
    sigma: f64,
    n: usize,
    seed: u64,
    noise_policy: NoisePolicy,
    out: &'a Path,
}

#[derive(Serialize)]
struct GenerateSidecar<'a> {
    config: GenerateConfig<'a>,
    dataset: DatasetSidecar,
}

pub fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let oracle = parse_oracle(&a.oracle)?;
    let noise = check_sigma(a.sigma)?;
    let n = check_count("n", a.n, 2)?;
    let sidecar_path = a.out.with_extension("json");
    if sidecar_path == a.out {
        return Err(usage(
            "--out must not have a .json extension; the sidecar uses it",
        ));
    }

    let data = sample(&oracle, &noise, n, a.seed, a.noise_policy)?;
    let mut csv = Vec::new();
    data.write_csv(&mut csv)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", a.out.display())))?;
    let sidecar = GenerateSidecar {
        config: GenerateConfig {
            command: "generate",
            oracle: &a.oracle,
            sigma: a.sigma,
            n,
            seed: a.seed,
            noise_policy: a.noise_policy,
            out: &a.out,
        },
        dataset: DatasetSidecar {
            oracle,
            noise,
            n,
            seed: data.seed,
            noise_policy: a.noise_policy,
            normalization: data.normalization,
            truth_direction: data.truth,
        },
    };
    write_all(&[(a.out.clone(), csv), (sidecar_path, json_bytes(&sidecar)?)])
}

#[derive(Serialize)]
struct TheoryConfig<'a> {
    command: &'static str,
    oracle: &'a str,
    sigma: f64,
    cause_density: &'static str,
}

#[derive(Serialize)]
struct TheoryOutput<'a> {
    config: TheoryConfig<'a>,
    oracle: Oracle,
    /// Null when a required integral diverges.
    report: Option<TheoryReport>,
    divergence: Option<String>,
    theorem: TheoremCheck,
    chain: Option<SlopeChain>,
}

pub fn theory(a: TheoryArgs) -> Result<(), CliError> {
    let oracle = parse_oracle(&a.oracle)?;
    let noise = check_sigma(a.sigma)?;
    let density = Density1D::uniform();
    let (report, divergence) = match expected_anticausal_error(&oracle, &density, &noise) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let out = TheoryOutput {
        config: TheoryConfig {
            command: "theory",
            oracle: &a.oracle,
            sigma: a.sigma,
            cause_density: "uniform",
        },
        theorem: verify_theorem(&oracle, &density, &noise),
        chain: cauchy_schwarz_chain(&oracle, &density).ok(),
        oracle,
        report,
        divergence,
    };
    let bytes = json_bytes(&out)?;
    match a.out {
        Some(path) => write_all(&[(path, bytes)]),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct FitConfig<'a> {
    command: &'static str,
    data: &'a Path,
    model: &'static str,
    direction: Direction,
    lambda: Option<f64>,
    invert: bool,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    config: FitConfig<'a>,
    model: FitModel,
    inverse: Option<FitModel>,
}

pub fn fit(a: FitArgs) -> Result<(), CliError> {
    check_lambda(a.lambda)?;
    let direction = match a.direction {
        DirectionArg::CToE => Direction::CToE,
        DirectionArg::EToC => Direction::EToC,
    };
    let data = Dataset::read_csv(&a.data)?;
    let (name, model) = match a.model {
        ModelKind::Linear => ("linear", fit_linear(&data, direction)?),
        ModelKind::Power => ("power", fit_power(&data, direction)?),
        ModelKind::Spline => ("spline", fit_smoothing_spline(&data, direction, a.lambda)?),
    };
    let inverse = if a.invert {
        Some(invert_model(&model)?)
    } else {
        None
    };
    let out = FitOutput {
        config: FitConfig {
            command: "fit",
            data: &a.data,
            model: name,
            direction,
            lambda: a.lambda,
            invert: a.invert,
        },
        model,
        inverse,
    };
    let bytes = json_bytes(&out)?;
    match a.out {
        Some(path) => write_all(&[(path, bytes)]),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

#[derive(Clone, Copy)]
pub enum Mode {
    Known,
    Unknown,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Known => "known",
            Mode::Unknown => "unknown",
        }
    }
}

fn output_paths(out: Option<PathBuf>, mode: &str) -> (PathBuf, PathBuf) {
    let stem = out.unwrap_or_else(|| PathBuf::from(mode));
    (stem.with_extension("csv"), stem.with_extension("json"))
}

#[derive(Serialize)]
struct SyntheticConfig {
    command: &'static str,
    mode: &'static str,
    oracles: Vec<String>,
    sigmas: Vec<f64>,
    n: usize,
    runs: usize,
    seed: u64,
    lambda: Option<f64>,
    noise_policy: NoisePolicy,
    csv: PathBuf,
    json: PathBuf,
}

#[derive(Serialize)]
struct SyntheticOutput {
    config: SyntheticConfig,
    reports: Vec<AsymmetryReport>,
}

pub fn bench_synthetic(a: SyntheticArgs, mode: Mode) -> Result<(), CliError> {
    let oracles = parse_oracle_list(&a.oracles).map_err(|e| usage(format!("--oracles: {e}")))?;
    if oracles.is_empty() {
        return Err(usage("--oracles must not be empty"));
    }
    let sigmas = parse_sigmas(&a.sigmas)?;
    let n = check_count("n", a.n, 2)?;
    let runs = check_count("runs", a.runs, 1)?;
    check_lambda(a.lambda)?;
    if matches!(mode, Mode::Known) && a.lambda.is_some() {
        return Err(usage("--lambda only applies to `bench unknown`"));
    }
    let (csv_path, json_path) = output_paths(a.out, mode.name());

    let opts = RunOptions {
        n,
        runs,
        base_seed: a.seed,
        noise_policy: a.noise_policy,
        lambda: a.lambda,
    };
    let reports = match mode {
        Mode::Known => run_known_oracle(&oracles, &sigmas, &opts)?,
        Mode::Unknown => run_unknown_oracle(&oracles, &sigmas, &opts)?,
    };
    let noise_policy = reports
        .first()
        .map(|r| r.config.noise_policy)
        .unwrap_or_default();
    let csv = csv_bytes(|buf| write_reports_csv(&reports, buf))?;
    let out = SyntheticOutput {
        config: SyntheticConfig {
            command: "bench",
            mode: mode.name(),
            oracles: oracles.iter().map(|o| o.normalized().to_string()).collect(),
            sigmas,
            n,
            runs,
            seed: a.seed,
            lambda: a.lambda,
            noise_policy,
            csv: csv_path.clone(),
            json: json_path.clone(),
        },
        reports,
    };
    write_all(&[(csv_path, csv), (json_path, json_bytes(&out)?)])
}

#[derive(Serialize)]
struct PairsConfig {
    command: &'static str,
    mode: &'static str,
    dir: PathBuf,
    meta: PathBuf,
    csv: PathBuf,
    json: PathBuf,
}

#[derive(Serialize)]
struct PairsOutput {
    config: PairsConfig,
    files_seen: usize,
    pairs_loaded: usize,
    pairs_skipped: usize,
    skipped: Vec<SkippedPair>,
    summary: Option<PairsSummary>,
}

pub fn bench_pairs(a: PairsArgs) -> Result<(), CliError> {
    if !a.dir.is_dir() {
        return Err(usage(format!("--dir {}: not a directory", a.dir.display())));
    }
    if !a.meta.is_file() {
        return Err(usage(format!("--meta {}: not a file", a.meta.display())));
    }
    let (csv_path, json_path) = output_paths(a.out, "pairs");
    let Corpus {
        records,
        skipped,
        files_seen,
    } = ingest_pairs(&a.dir, &a.meta)?;
    let summary = if records.is_empty() {
        None
    } else {
        Some(run_pairs_benchmark(&records)?)
    };
    let csv = match &summary {
        Some(s) => csv_bytes(|buf| write_pairs_csv(s, buf))?,
        None => csv_bytes(|buf| write_reports_csv(&[], buf))?,
    };
    if let Some(s) = &summary {
        for o in &s.outcomes {
            if let PairOutcome::Failed { identifier, reason } = o {
                eprintln!("pair {identifier}: excluded: {reason}");
            }
        }
        eprintln!(
            "pairs: {} files, {} scored, {} failed, {} skipped; causal wins {}/{}",
            files_seen,
            s.pairs_scored,
            s.pairs_failed,
            skipped.len(),
            s.causal_wins,
            s.pairs_scored
        );
    }
    let out = PairsOutput {
        config: PairsConfig {
            command: "bench",
            mode: "pairs",
            dir: a.dir,
            meta: a.meta,
            csv: csv_path.clone(),
            json: json_path.clone(),
        },
        files_seen,
        pairs_loaded: records.len(),
        pairs_skipped: skipped.len(),
        skipped,
        summary,
    };
    write_all(&[(csv_path, csv), (json_path, json_bytes(&out)?)])
}
