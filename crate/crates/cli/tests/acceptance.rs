//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line followed by the details of any failed check.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use errasym_core::bench::{
    ingest_pairs, run_known_oracle, run_pairs_benchmark, run_unknown_oracle, write_pairs_csv,
    PairRecord, RunOptions, CSV_HEADER,
};
use errasym_core::datagen::derive_seed;
use errasym_core::regress::{fit_linear, invert_model};
use errasym_core::theory::{
    binary_conditionals, cauchy_schwarz_chain, dep_inverse, dep_measure, reciprocal_slope_moment,
};
use errasym_core::{
    generate, Column, Density1D, Direction, Family, FitKind, NoisePolicy, NoiseSpec, Oracle,
};

struct Criterion {
    id: u32,
    title: &'static str,
    failures: Vec<String>,
    checks: usize,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            failures: Vec::new(),
            checks: 0,
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(detail());
        }
    }

    fn finish(self) {
        let status = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        let mut report = format!(
            "criterion {:>2} {status}: {} ({} checks, {} failed)\n",
            self.id,
            self.title,
            self.checks,
            self.failures.len()
        );
        for f in &self.failures {
            let _ = writeln!(report, "    {f}");
        }
        // Straight to the handle: libtest captures print! for passing tests.
        let _ = std::io::stderr().lock().write_all(report.as_bytes());
        assert!(self.failures.is_empty(), "criterion {} failed", self.id);
    }
}

fn oracle(token: &str) -> Oracle {
    token.parse().unwrap()
}

/// The non-linear oracle suite, normalized.
fn suite() -> Vec<Oracle> {
    [
        "exp:a=1",
        "exp:a=2",
        "exp:a=5",
        "sin-window",
        "pow:a=0.2",
        "pow:a=2",
        "pow:a=3",
        "pow:a=5",
    ]
    .iter()
    .map(|t| oracle(t).normalized())
    .collect()
}

fn opts(n: usize, runs: usize, seed: u64) -> RunOptions {
    RunOptions {
        n,
        runs,
        base_seed: seed,
        ..Default::default()
    }
}

#[test]
fn criterion_01_linear_table() {
    let mut c = Criterion::new(1, "linear oracle RMSE table");
    let start = Instant::now();
    let reports =
        run_known_oracle(&[Oracle::linear()], &[0.0, 0.1, 0.5], &opts(1000, 100, 1)).unwrap();
    let elapsed = start.elapsed();
    // Triple the reported run-to-run spreads.
    let spread = [0.0, 3.0 * 0.0002, 3.0 * 0.0011];
    for (r, tol) in reports.iter().zip(spread) {
        let s = r.config.sigma;
        for (name, v) in [
            ("causal", r.rmse_causal_mean),
            ("anticausal", r.rmse_anticausal_mean),
        ] {
            c.check((v - s).abs() <= 0.005, || {
                format!("σ={s}: {name} mean {v} not within 0.005")
            });
        }
        let d = (r.rmse_causal_mean - r.rmse_anticausal_mean).abs();
        c.check(d <= tol, || {
            format!("σ={s}: |causal - anticausal| = {d} > {tol}")
        });
    }
    c.check(elapsed < Duration::from_secs(10), || {
        format!("runtime {elapsed:?} >= 10 s")
    });
    c.finish();
}

#[test]
fn criterion_02_theorem_suite() {
    let mut c = Criterion::new(2, "causal RMSE below anticausal by > 2 SE");
    let start = Instant::now();
    let reports = run_known_oracle(&suite(), &[0.01, 0.05, 0.1], &opts(1000, 100, 2)).unwrap();
    let elapsed = start.elapsed();
    for r in &reports {
        let margin = r.gap();
        let se = r.combined_se();
        c.check(margin > 2.0 * se, || {
            format!(
                "{} σ={}: gap {margin:e} <= 2·SE {:e}",
                r.config.oracle_token,
                r.config.sigma,
                2.0 * se
            )
        });
    }
    c.check(elapsed < Duration::from_secs(120), || {
        format!("runtime {elapsed:?} >= 120 s")
    });
    c.finish();
}

#[test]
fn criterion_03_theory_matches_empirics() {
    let mut c = Criterion::new(
        3,
        "anticausal MSE / σ² matches the reciprocal-slope integral",
    );
    let density = Density1D::uniform();
    let exp1 = reciprocal_slope_moment(&oracle("exp:a=1,norm"), &density, 2).unwrap();
    let e = std::f64::consts::E;
    let closed = (e - 1.0).powi(2) * (1.0 - e.powi(-2)) / 2.0;
    c.check((exp1 - closed).abs() <= 1e-6, || {
        format!("exp(a=1) integral {exp1} vs {closed}")
    });

    let reports = run_known_oracle(&suite(), &[0.01, 0.05], &opts(100_000, 10, 3)).unwrap();
    for r in &reports {
        let integral =
            reciprocal_slope_moment(&r.config.oracle, &density, 2).unwrap_or(f64::INFINITY);
        let ratio = r.mse_anticausal_mean / r.config.sigma.powi(2);
        let rel = ratio / integral - 1.0;
        c.check(rel.abs() <= 0.05, || {
            format!(
                "{} σ={}: MSE/σ² = {ratio:.6}, integral = {integral:.6}, relative error {rel:+.4}",
                r.config.oracle_token, r.config.sigma
            )
        });
    }
    c.finish();
}

#[test]
fn criterion_04_cauchy_schwarz_chain() {
    let mut c = Criterion::new(4, "reciprocal-slope Cauchy–Schwarz chain");
    let density = Density1D::uniform();
    let mut oracles = vec![Oracle::linear()];
    for o in suite() {
        oracles.push(Oracle::new(o.family(), false).unwrap());
        oracles.push(o);
    }
    oracles.push(oracle("spow:a=0.9,b=3"));
    for o in &oracles {
        let chain = cauchy_schwarz_chain(o, &density).unwrap();
        // The first step is exact in theory; allow only quadrature rounding.
        c.check(
            chain.mean_square_reciprocal >= chain.squared_mean_reciprocal - 1e-12,
            || format!("{o}: first inequality {chain:?}"),
        );
        c.check(
            chain.squared_mean_reciprocal >= chain.range_bound - 1e-8,
            || format!("{o}: second inequality {chain:?}"),
        );
        let equal = (chain.mean_square_reciprocal - chain.squared_mean_reciprocal).abs() <= 1e-10
            && (chain.squared_mean_reciprocal - chain.range_bound).abs() <= 1e-10
            && (chain.range_bound - 1.0).abs() <= 1e-10;
        let expect_equal = o.is_linear() && o.is_normalized();
        c.check(equal == expect_equal, || {
            format!("{o}: chain equality {equal}, expected {expect_equal} ({chain:?})")
        });
    }
    c.finish();
}

fn slope_intercept(kind: &FitKind) -> (f64, f64) {
    match *kind {
        FitKind::Linear { slope, intercept } => (slope, intercept),
        _ => unreachable!(),
    }
}

#[test]
fn criterion_05_reverse_regression_bias() {
    let mut c = Criterion::new(5, "reverse regression bias and its small-noise limit");
    let data = generate(
        &Oracle::linear(),
        &NoiseSpec::uniform(0.5).unwrap(),
        100_000,
        5,
        NoisePolicy::None,
    )
    .unwrap();
    let (s, i) = slope_intercept(&fit_linear(&data, Direction::EToC).unwrap().kind);
    c.check((s - 0.5).abs() <= 0.02, || format!("reverse slope {s}"));
    c.check((i - 0.25).abs() <= 0.01, || {
        format!("reverse intercept {i}")
    });
    let causal = fit_linear(&data, Direction::CToE).unwrap();
    let (s, i) = slope_intercept(&invert_model(&causal).unwrap().kind);
    c.check((s - 1.0).abs() <= 0.02, || {
        format!("inverted causal slope {s}")
    });
    c.check(i.abs() <= 0.01, || format!("inverted causal intercept {i}"));

    let sigmas = [0.1, 0.05, 0.01, 0.001];
    let mut means = Vec::new();
    for (k, &sigma) in sigmas.iter().enumerate() {
        let noise = NoiseSpec::gaussian(sigma).unwrap();
        let total: f64 = (0..20)
            .map(|seed| {
                let d = generate(
                    &Oracle::linear(),
                    &noise,
                    100_000,
                    derive_seed(50, &[k as u64, seed]),
                    NoisePolicy::None,
                )
                .unwrap();
                slope_intercept(&fit_linear(&d, Direction::EToC).unwrap().kind).0
            })
            .sum();
        means.push(total / 20.0);
    }
    c.check(means.windows(2).all(|w| w[1] > w[0]), || {
        format!("reverse slopes not increasing: {means:?}")
    });
    c.check(means.iter().all(|&m| m < 1.0), || {
        format!("reverse slopes exceed 1: {means:?}")
    });
    c.check(1.0 - means[3] < 1e-3, || {
        format!("smallest-noise slope {} not near 1", means[3])
    });
    c.finish();
}

#[test]
fn criterion_06_independence_measure() {
    let mut c = Criterion::new(6, "slope/density dependence measure");
    let u = Density1D::uniform();
    let mut all = vec![Oracle::linear(), oracle("spow:a=0.9,b=3")];
    for o in suite() {
        all.push(Oracle::new(o.family(), false).unwrap());
        all.push(o);
    }
    for o in &all {
        let d = dep_measure(o, &u).unwrap();
        c.check(d.abs() <= 1e-10, || format!("{o}: dep_measure {d:e}"));
    }
    for o in suite() {
        let d = dep_inverse(&o, &u).unwrap();
        c.check(d > 1e-3, || format!("{o}: dep_inverse {d}"));
    }
    let e = std::f64::consts::E;
    let want = (e + 1.0) / (2.0 * (e - 1.0)) - 1.0;
    let got = dep_measure(
        &oracle("exp:a=1,norm"),
        &Density1D::exponential(1.0).unwrap(),
    )
    .unwrap();
    c.check((got - want).abs() <= 1e-6, || {
        format!("exp(a=1) with matching density: {got} vs {want}")
    });
    c.finish();
}

#[test]
fn criterion_07_spline_experiment() {
    let mut c = Criterion::new(7, "smoothing-spline asymmetry");
    let oracles = [Oracle::linear(), oracle("pow:a=5"), oracle("exp:a=1")];
    let reports =
        run_unknown_oracle(&oracles, &[0.01, 0.05, 0.1, 0.3], &opts(1000, 100, 7)).unwrap();
    for r in &reports {
        c.check(r.causal_wins >= 90, || {
            format!(
                "{} σ={}: causal wins {}/100",
                r.config.oracle_token, r.config.sigma, r.causal_wins
            )
        });
    }
    let exp = reports
        .iter()
        .find(|r| r.config.oracle_token == "exp:a=1,norm" && r.config.sigma == 0.01)
        .unwrap();
    let (cm, am) = (exp.rmse_causal_mean, exp.rmse_anticausal_mean);
    c.check((0.003..=0.009).contains(&cm), || {
        format!("exp(a=1) σ=0.01: causal mean {cm:.5} outside [0.003, 0.009]")
    });
    c.check(am > cm, || {
        format!("exp(a=1) σ=0.01: anticausal mean {am:.5} <= causal {cm:.5}")
    });
    c.finish();
}

fn unit(seed: u64, k: u64) -> f64 {
    (derive_seed(seed, &[k]) >> 11) as f64 / (1u64 << 53) as f64
}

fn write_columns(path: &Path, rows: impl Iterator<Item = Vec<f64>>) {
    let mut s = String::new();
    for r in rows {
        let fields: Vec<String> = r.iter().map(|v| format!("{v:.10e}")).collect();
        writeln!(s, "{}", fields.join(" ")).unwrap();
    }
    fs::write(path, s).unwrap();
}

/// A corpus in the usual on-disk layout: bivariate pairs in both column
/// orders, decreasing pairs, multivariate files and description files.
fn write_corpus(dir: &Path, pairs: usize) {
    let mut meta = String::new();
    for i in 0..pairs as u64 {
        let id = format!("{:04}", i + 1);
        let file = dir.join(format!("pair{id}.txt"));
        let n = 200 + (i as usize % 5) * 60;
        if i % 13 == 7 {
            let rows = (0..n).map(|k| {
                let x = k as f64 / n as f64;
                vec![x, x * x, x.sin(), 1.0 - x]
            });
            write_columns(&file, rows);
            writeln!(meta, "{id} 1 2 3 4 1").unwrap();
            continue;
        }
        let b = (0.2f64.ln() + (5f64.ln() - 0.2f64.ln()) * unit(i, 1)).exp();
        let sigma = 0.01 + 0.09 * unit(i, 2);
        let phi = Oracle::new(
            Family::ScaledPower {
                a: 1.0 + unit(i, 0),
                b,
            },
            false,
        )
        .unwrap();
        let d = generate(
            &phi,
            &NoiseSpec::gaussian(sigma).unwrap(),
            n,
            derive_seed(8, &[i]),
            NoisePolicy::None,
        )
        .unwrap();
        // Raw units, optionally decreasing, optionally effect-first.
        let scale = 10.0 + 90.0 * unit(i, 3);
        let decreasing = i % 4 == 1;
        let swapped = i % 3 == 2;
        let rows = d.c().iter().zip(d.e()).map(|(&x, &y)| {
            let cause = 5.0 + scale * x;
            let effect = if decreasing { -3.0 * y } else { 2.0 * y + 1.0 };
            if swapped {
                vec![effect, cause]
            } else {
                vec![cause, effect]
            }
        });
        write_columns(&file, rows);
        fs::write(dir.join(format!("pair{id}_des.txt")), "synthetic pair\n").unwrap();
        let w = 0.5 + unit(i, 4);
        if swapped {
            writeln!(meta, "{id} 2 2 1 1 {w}").unwrap();
        } else {
            writeln!(meta, "{id} 1 1 2 2 {w}").unwrap();
        }
    }
    fs::write(dir.join("pairmeta.txt"), meta).unwrap();
}

#[test]
fn criterion_08_pairs_benchmark() {
    let mut c = Criterion::new(8, "pair corpus harness and surrogate win fraction");
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 60);
    let corpus = ingest_pairs(dir.path(), &dir.path().join("pairmeta.txt")).unwrap();
    c.check(corpus.files_seen >= 50, || {
        format!("only {} pair files", corpus.files_seen)
    });
    c.check(
        corpus.records.len() + corpus.skipped.len() == corpus.files_seen,
        || {
            format!(
                "{} loaded + {} skipped != {} files",
                corpus.records.len(),
                corpus.skipped.len(),
                corpus.files_seen
            )
        },
    );
    let summary = run_pairs_benchmark(&corpus.records).unwrap();
    c.check(summary.pairs_failed == 0, || {
        format!("{} unexplained failures", summary.pairs_failed)
    });
    c.check(summary.win_fraction.is_finite(), || {
        "win fraction not reported".into()
    });
    let mut table = Vec::new();
    write_pairs_csv(&summary, &mut table).unwrap();
    let table = String::from_utf8(table).unwrap();
    let mut lines = table.lines();
    c.check(lines.next() == Some(CSV_HEADER.join(",").as_str()), || {
        "table header mismatch".into()
    });
    let rows = lines.count();
    c.check(rows == summary.pairs_scored, || {
        format!("{rows} table rows for {} pairs", summary.pairs_scored)
    });
    println!(
        "    corpus: {} files, {} skipped (multivariate), causal wins {}/{} = {:.4}",
        corpus.files_seen,
        corpus.skipped.len(),
        summary.causal_wins,
        summary.pairs_scored,
        summary.win_fraction
    );

    // Surrogate: 92 normalized ScaledPower pairs.
    let records: Vec<PairRecord> = (0..92u64)
        .map(|i| {
            let a = 0.5 + 1.5 * unit(1000 + i, 0);
            let b = (0.2f64.ln() + (5f64.ln() - 0.2f64.ln()) * unit(1000 + i, 1)).exp();
            let sigma = 0.01 + 0.09 * unit(1000 + i, 2);
            let phi = Oracle::new(Family::ScaledPower { a, b }, false).unwrap();
            let data = generate(
                &phi,
                &NoiseSpec::gaussian(sigma).unwrap(),
                500,
                derive_seed(92, &[i]),
                NoisePolicy::None,
            )
            .unwrap()
            .normalize_minmax(&[Column::C, Column::E])
            .unwrap();
            PairRecord {
                identifier: format!("s{i:02}"),
                data,
                weight: 1.0,
                sign_flipped: false,
            }
        })
        .collect();
    let s = run_pairs_benchmark(&records).unwrap();
    c.check(s.win_fraction >= 0.9, || {
        format!("surrogate win fraction {}", s.win_fraction)
    });
    println!(
        "    surrogate: causal wins {}/{} = {:.4}",
        s.causal_wins, s.pairs_scored, s.win_fraction
    );
    c.finish();
}

#[test]
fn criterion_09_rain_tables() {
    let mut c = Criterion::new(9, "binary rain conditionals");
    for k in 0..100u64 {
        let noise = unit(9, 2 * k);
        let prior = 0.001 + 0.998 * unit(9, 2 * k + 1);
        let t = binary_conditionals(noise, prior).unwrap();
        c.check(t.causal.prob(1, 1) == 1.0, || {
            format!("P(E=1|C=1) != 1 at ({noise}, {prior})")
        });
        for table in [t.causal, t.anticausal] {
            for given in 0..2 {
                let s = table.column_sum(given);
                c.check((s - 1.0).abs() <= 1e-12, || {
                    format!("column sum {s} at ({noise}, {prior})")
                });
            }
        }
    }
    let t = binary_conditionals(0.5, 0.5).unwrap();
    let p = t.anticausal.prob(1, 1);
    c.check((p - 2.0 / 3.0).abs() <= 1e-12, || {
        format!("P(C=1|E=1) = {p}")
    });
    c.finish();
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_errasym"))
        .current_dir(dir)
        .args(args)
        .status()
        .unwrap()
        .success()
}

#[test]
fn criterion_10_determinism() {
    let mut c = Criterion::new(10, "byte-identical bench outputs");
    let corpus = tempfile::tempdir().unwrap();
    write_corpus(corpus.path(), 20);
    let corpus_dir = corpus.path().to_str().unwrap().to_string();
    let meta = corpus
        .path()
        .join("pairmeta.txt")
        .to_str()
        .unwrap()
        .to_string();
    let commands: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (
            vec![
                "bench",
                "known",
                "--oracles",
                "linear,exp:a=5,sin-window",
                "--sigmas",
                "0,0.1,0.5",
                "--runs",
                "20",
                "--seed",
                "1",
            ],
            vec!["known.csv", "known.json"],
        ),
        (
            vec![
                "bench",
                "unknown",
                "--oracles",
                "exp:a=1,pow:a=5",
                "--sigmas",
                "0.01,0.1",
                "--runs",
                "5",
                "--seed",
                "1",
                "--out",
                "u",
            ],
            vec!["u.csv", "u.json"],
        ),
        (
            vec!["bench", "pairs", "--dir", &corpus_dir, "--meta", &meta],
            vec!["pairs.csv", "pairs.json"],
        ),
        (
            vec![
                "generate",
                "--oracle",
                "exp:a=1,norm",
                "--sigma",
                "0.1",
                "--n",
                "1000",
                "--seed",
                "7",
                "--out",
                "d.csv",
            ],
            vec!["d.csv", "d.json"],
        ),
    ];
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for (args, outputs) in &commands {
        for d in [first.path(), second.path()] {
            c.check(run_cli(d, args), || format!("`{}` failed", args.join(" ")));
        }
        for o in outputs {
            let a = fs::read(first.path().join(o));
            let b = fs::read(second.path().join(o));
            let same = matches!((&a, &b), (Ok(x), Ok(y)) if x == y && !x.is_empty());
            c.check(same, || {
                format!("{o} differs between repeated `{}`", args.join(" "))
            });
        }
    }
    c.finish();
}
