use std::io::Write;

use super::{AsymmetryReport, PairsSummary};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = [
    "id",
    "sigma",
    "b",
    "rmse_causal",
    "rmse_anticausal",
    "gap",
    "verdict",
];

const SIGNIFICANT_DIGITS: usize = 9;

/// Formats like C's `%.9g`: nine significant digits, trailing zeros
/// dropped, scientific notation outside `1e-5 <= |x| < 1e9`.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io {
            path: "<csv output>".into(),
            source: io,
        },
        other => Error::InvalidParam(format!("csv: {other:?}")),
    }
}

/// One row per configuration; `b` is empty for synthetic configurations.
pub fn write_reports_csv<W: Write>(reports: &[AsymmetryReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.config.oracle_token.clone(),
            format_sig(r.config.sigma),
            String::new(),
            format_sig(r.rmse_causal_mean),
            format_sig(r.rmse_anticausal_mean),
            format_sig(r.gap()),
            r.verdict.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv output>".into(),
        source: e,
    })
}

/// One row per scored pair; `sigma` is empty because it is unknown.
pub fn write_pairs_csv<W: Write>(summary: &PairsSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for p in summary.scored() {
        w.write_record([
            p.identifier.clone(),
            String::new(),
            format_sig(p.fitted_b),
            format_sig(p.rmse_causal),
            format_sig(p.rmse_anticausal),
            format_sig(p.gap),
            p.verdict.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv output>".into(),
        source: e,
    })
}
