//! Cause-effect pair corpora: ingestion and the power-law benchmark.
//!
//! A corpus is a directory of whitespace-separated numeric column files
//! (`pair0001.txt`, ...) and a metadata file whose rows read
//! `identifier cause_first cause_last effect_first effect_last [weight]`
//! with 1-based column indices.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::Verdict;
use crate::datagen::{Column, Dataset, TruthDirection};
use crate::error::{Error, Result};
use crate::regress::{fit_power, invert_model, rmse, Direction, FitKind};

/// Pairs whose RMSE ratio exceeds this are flagged.
pub const EXTREME_GAP_RATIO: f64 = 10.0;
/// Absolute RMSE difference below which a pair counts as a tie.
pub const PAIR_TIE_TOLERANCE: f64 = 1e-9;
const MIN_PAIR_ROWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub identifier: String,
    #[serde(skip)]
    pub data: Dataset,
    pub weight: f64,
    /// Whether the effect was negated to make the pair increasing.
    pub sign_flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum SkipReason {
    /// More than two columns in the file, or a multi-column side.
    Multivariate {
        columns: usize,
    },
    DegenerateColumn {
        column: &'static str,
    },
    TooFewRows {
        rows: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPair {
    pub identifier: String,
    pub file: PathBuf,
    #[serde(flatten)]
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corpus {
    pub records: Vec<PairRecord>,
    pub skipped: Vec<SkippedPair>,
    /// Number of pair files found; equals `records.len() + skipped.len()`.
    pub files_seen: usize,
}

struct MetaRow {
    cause: (usize, usize),
    effect: (usize, usize),
    weight: f64,
}

fn parse_err(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_metadata(path: &Path) -> Result<HashMap<String, MetaRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 5 or 6 fields, got {}", fields.len()),
            ));
        }
        let index = |k: usize| -> Result<usize> {
            match fields[k].parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(parse_err(
                    path,
                    lineno,
                    format!("bad column index {:?}", fields[k]),
                )),
            }
        };
        let cause = (index(1)?, index(2)?);
        let effect = (index(3)?, index(4)?);
        if cause.1 < cause.0 || effect.1 < effect.0 {
            return Err(parse_err(
                path,
                lineno,
                "column range ends before it starts",
            ));
        }
        let weight = match fields.get(5) {
            Some(w) => w
                .parse::<f64>()
                .ok()
                .filter(|w| w.is_finite() && *w >= 0.0)
                .ok_or_else(|| parse_err(path, lineno, format!("bad weight {w:?}")))?,
            None => 1.0,
        };
        rows.insert(
            fields[0].to_string(),
            MetaRow {
                cause,
                effect,
                weight,
            },
        );
    }
    Ok(rows)
}

fn lookup<'a>(meta: &'a HashMap<String, MetaRow>, id: &str) -> Option<&'a MetaRow> {
    if let Some(row) = meta.get(id) {
        return Some(row);
    }
    // "1" and "0001" name the same pair.
    let n: u64 = id.parse().ok()?;
    meta.iter()
        .filter(|(k, _)| k.parse::<u64>().ok() == Some(n))
        .min_by(|a, b| a.0.cmp(b.0))
        .map(|(_, v)| v)
}

fn read_columns(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if columns.is_empty() {
            columns = vec![Vec::new(); fields.len()];
        } else if fields.len() != columns.len() {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {} columns, got {}", columns.len(), fields.len()),
            ));
        }
        for (col, f) in columns.iter_mut().zip(&fields) {
            let v: f64 = f
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(path, i + 1, format!("not a finite number: {f:?}")))?;
            col.push(v);
        }
    }
    Ok(columns)
}

fn pair_files(dir: &Path, meta: &Path) -> Result<Vec<PathBuf>> {
    let meta_canon = fs::canonicalize(meta).map_err(|e| Error::io(meta, e))?;
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_txt = path.extension().is_some_and(|x| x == "txt");
        let is_description = path
            .file_stem()
            .and_then(|s| s.to_str())
            .is_some_and(|s| s.ends_with("_des"));
        if !path.is_file() || !is_txt || is_description {
            continue;
        }
        if fs::canonicalize(&path).map_err(|e| Error::io(&path, e))? == meta_canon {
            continue;
        }
        files.push(path);
    }
    files.sort();
    Ok(files)
}

fn identifier(path: &Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    stem.strip_prefix("pair")
        .filter(|s| !s.is_empty())
        .unwrap_or(stem)
        .to_string()
}

/// Spearman rank correlation (average ranks for ties); 0 when either
/// input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = ranks(x);
    let ry = ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Loads every pair file in `dir` using the metadata at `meta_path`.
///
/// Each file is either loaded or skipped with a reason. Loaded pairs are
/// oriented cause-first, negated on the effect side when decreasing, and
/// min-max normalized on both columns.
pub fn ingest_pairs(dir: &Path, meta_path: &Path) -> Result<Corpus> {
    let meta = read_metadata(meta_path)?;
    let files = pair_files(dir, meta_path)?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for file in &files {
        let id = identifier(file);
        let row = lookup(&meta, &id).ok_or_else(|| {
            Error::MissingMetadata(format!(
                "no metadata row for pair {id} ({})",
                file.display()
            ))
        })?;
        let columns = read_columns(file)?;
        let skip = |reason| SkippedPair {
            identifier: id.clone(),
            file: file.clone(),
            reason,
        };
        let width = columns.len();
        if width > 2 || row.cause.0 != row.cause.1 || row.effect.0 != row.effect.1 {
            skipped.push(skip(SkipReason::Multivariate { columns: width }));
            continue;
        }
        if row.cause.0 > width || row.effect.0 > width || row.cause.0 == row.effect.0 {
            return Err(Error::MissingMetadata(format!(
                "pair {id}: metadata columns cause={} effect={} do not fit a {width}-column file",
                row.cause.0, row.effect.0
            )));
        }
        let rows = columns[0].len();
        if rows < MIN_PAIR_ROWS {
            skipped.push(skip(SkipReason::TooFewRows { rows }));
            continue;
        }
        let c = columns[row.cause.0 - 1].clone();
        let e = columns[row.effect.0 - 1].clone();
        let mut data = Dataset::new(c, e)?;
        data.truth = Some(TruthDirection::CCausesE);
        let sign_flipped = spearman(data.c(), data.e()) < 0.0;
        if sign_flipped {
            data = data.flip_effect_sign();
        }
        match data.normalize_minmax(&[Column::C, Column::E]) {
            Ok(data) => records.push(PairRecord {
                identifier: id,
                data,
                weight: row.weight,
                sign_flipped,
            }),
            Err(Error::DegenerateColumn { column }) => {
                skipped.push(skip(SkipReason::DegenerateColumn { column }));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Corpus {
        records,
        skipped,
        files_seen: files.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPair {
    pub identifier: String,
    pub weight: f64,
    pub fitted_a: f64,
    /// Exponent of the causal power-law fit.
    pub fitted_b: f64,
    pub converged: bool,
    pub rmse_causal: f64,
    pub rmse_anticausal: f64,
    /// `rmse_anticausal - rmse_causal`.
    pub gap: f64,
    pub verdict: Verdict,
    /// RMSE ratio above [`EXTREME_GAP_RATIO`]; still counted.
    pub extreme_gap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PairOutcome {
    Scored(ScoredPair),
    Failed { identifier: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairsSummary {
    pub outcomes: Vec<PairOutcome>,
    pub pairs_total: usize,
    pub pairs_scored: usize,
    pub pairs_failed: usize,
    pub causal_wins: usize,
    pub anticausal_wins: usize,
    pub ties: usize,
    /// `causal_wins / pairs_scored`; failures are excluded.
    pub win_fraction: f64,
    /// Same fraction with corpus weights; reported, not headline.
    pub weighted_win_fraction: f64,
    pub extreme_gap_pairs: Vec<String>,
}

impl PairsSummary {
    pub fn scored(&self) -> impl Iterator<Item = &ScoredPair> {
        self.outcomes.iter().filter_map(|o| match o {
            PairOutcome::Scored(s) => Some(s),
            PairOutcome::Failed { .. } => None,
        })
    }
}

fn score(record: &PairRecord) -> Result<ScoredPair> {
    let data = &record.data;
    let causal = fit_power(data, Direction::CToE)?;
    let inverse = invert_model(&causal)?;
    let (fitted_a, fitted_b) = match causal.kind {
        FitKind::PowerLaw { a, b } => (a, b),
        _ => unreachable!("fit_power returns a power law"),
    };
    let rc = rmse(&causal, data, Column::E);
    let ra = rmse(&inverse, data, Column::C);
    if !(rc.is_finite() && ra.is_finite()) {
        return Err(Error::IllConditioned(format!(
            "non-finite RMSE ({rc}, {ra})"
        )));
    }
    let gap = ra - rc;
    let verdict = if gap.abs() <= PAIR_TIE_TOLERANCE {
        Verdict::Tie
    } else if gap > 0.0 {
        Verdict::CausalSmaller
    } else {
        Verdict::AnticausalSmaller
    };
    let (lo, hi) = (rc.min(ra), rc.max(ra));
    let extreme_gap = hi > EXTREME_GAP_RATIO * lo && hi - lo > PAIR_TIE_TOLERANCE;
    Ok(ScoredPair {
        identifier: record.identifier.clone(),
        weight: record.weight,
        fitted_a,
        fitted_b,
        converged: causal.converged,
        rmse_causal: rc,
        rmse_anticausal: ra,
        gap,
        verdict,
        extreme_gap,
    })
}

/// Fits a causal power law per pair, inverts it analytically and compares
/// RMSE in both directions.
pub fn run_pairs_benchmark(records: &[PairRecord]) -> Result<PairsSummary> {
    if records.is_empty() {
        return Err(Error::InvalidParam(
            "pairs benchmark needs at least one record".into(),
        ));
    }
    let outcomes: Vec<PairOutcome> = records
        .par_iter()
        .map(|r| match score(r) {
            Ok(s) => PairOutcome::Scored(s),
            Err(e) => PairOutcome::Failed {
                identifier: r.identifier.clone(),
                reason: e.to_string(),
            },
        })
        .collect();

    let (mut wins, mut losses, mut ties, mut scored) = (0, 0, 0, 0);
    let (mut w_total, mut w_wins) = (0.0, 0.0);
    let mut extreme = Vec::new();
    for o in &outcomes {
        if let PairOutcome::Scored(s) = o {
            scored += 1;
            w_total += s.weight;
            match s.verdict {
                Verdict::CausalSmaller => {
                    wins += 1;
                    w_wins += s.weight;
                }
                Verdict::AnticausalSmaller => losses += 1,
                Verdict::Tie => ties += 1,
            }
            if s.extreme_gap {
                extreme.push(s.identifier.clone());
            }
        }
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
    Ok(PairsSummary {
        pairs_total: records.len(),
        pairs_scored: scored,
        pairs_failed: records.len() - scored,
        causal_wins: wins,
        anticausal_wins: losses,
        ties,
        win_fraction: ratio(wins as f64, scored as f64),
        weighted_win_fraction: ratio(w_wins, w_total),
        extreme_gap_pairs: extreme,
        outcomes,
    })
}
