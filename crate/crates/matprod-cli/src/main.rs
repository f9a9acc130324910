//! Experiment driver: each subcommand maps onto one library operation,
//! emits CSV or JSON artifacts, and exits 0 on success, 2 on input
//! problems, 3 on numerical failures, with a JSON error object on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use matprod::bernoulli::{
    beta_representation, build_representation, cylinder_measure, BernoulliSpec,
};
use matprod::counterexamples::{ce12_build_and_verify, ce12_sv_ratios, ce13_verify, ce22_limits};
use matprod::curves::{build_refinement_matrices, residual_checks, sample_curve};
use matprod::factorize::{growth_and_bounds, structure_checks, tokenize, TokenKind};
use matprod::family::{beta_scaled_family, parse_word};
use matprod::gibbs::{potential_and_ratio, scale_spectrum_and_legendre, SpectrumSource};
use matprod::mat::{mat_from_json, mat_to_json};
use matprod::trajectory::run_trajectory;
use matprod::triangular::{
    block_form_detect, classify3x3_and_predict, lower_tri_sv_check, series3x3, Finiteness,
};
use matprod::{Error as LibError, Mat, MatrixFamily, SymbolSequence};

// ---------------------------------------------------------------------------
// Failure plumbing

struct Failure {
    code: &'static str,
    message: String,
}

impl From<LibError> for Failure {
    fn from(e: LibError) -> Self {
        Failure { code: e.code(), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: "IO", message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { code: "INVALID", message: format!("bad JSON: {e}") }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: "INVALID", message: message.into() }
}

/// Input-shape problems exit 2; numerical failures exit 3.
fn exit_for(code: &str) -> u8 {
    match code {
        "INVALID" | "IO" | "NOT_SQUARE" | "DIMENSION_MISMATCH" | "DIMENSION_TOO_SMALL"
        | "NOT_STOCHASTIC" | "WORD_TOO_SHORT" | "BAD_CHECKPOINTS" | "NOT_TRIANGULAR"
        | "ZERO_DIAGONAL" => 2,
        _ => 3,
    }
}

// ---------------------------------------------------------------------------
// Command line surface

#[derive(Parser)]
#[command(
    name = "matprod",
    version,
    about = "Infinite matrix product experiments: trajectories, measures, spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a product trajectory and dump per-step diagnostics as CSV.
    Simulate(SimulateArgs),
    /// Build a base-k or beta measure representation; report cylinder masses.
    Bernoulli(BernoulliArgs),
    /// Weak-Gibbs ratio series along a word, or the scale spectrum tau(q).
    Gibbs(GibbsArgs),
    /// Reproduce one of the three counterexample constructions.
    Counterexample(CounterexampleArgs),
    /// Word factorization and the cone/growth scans behind it.
    Factorize(FactorizeArgs),
    /// Block-triangular detection and triangular product analysis.
    Triangular(TriangularArgs),
    /// Sample a refinable curve or check its self-similarity residuals.
    Curve(CurveArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Family source: a JSON file path, or the presets "thm23" / "beta".
    #[arg(long)]
    family: String,
    /// Word literal, e.g. "0121" or "(012)^40".
    #[arg(long)]
    word: Option<String>,
    /// Preperiod digits for an eventually periodic sequence.
    #[arg(long)]
    preperiod: Option<String>,
    /// Period digits; combine with --preperiod.
    #[arg(long)]
    period: Option<String>,
    /// Draw letters uniformly from a seeded generator.
    #[arg(long)]
    random: bool,
    /// Seed for --random (MATPROD_SEED overrides).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    depth: usize,
    /// Positive start vector, comma separated; defaults to the family's
    /// terminal vector when present.
    #[arg(long)]
    start: Option<String>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BernoulliArgs {
    /// Integer base k >= 2 (with --p), mutually exclusive with --beta-case.
    #[arg(long)]
    base: Option<usize>,
    /// Weights p_0..p_N, comma separated, fractions allowed ("1/4").
    #[arg(long)]
    p: Option<String>,
    /// Use the cubic-root beta representation instead of an integer base.
    #[arg(long)]
    beta_case: bool,
    /// Cylinder word whose mass to report.
    #[arg(long)]
    word: Option<String>,
    /// Translate h for integer-base cylinder masses.
    #[arg(long, default_value_t = 0)]
    translate: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GibbsArgs {
    #[arg(long)]
    base: Option<usize>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    beta_case: bool,
    /// With a word: emit the ratio-root series along it (CSV n,ratio_root,deviation).
    #[arg(long)]
    word: Option<String>,
    /// Tail depth for the potential when a word is given.
    #[arg(long, default_value_t = 64)]
    depth: usize,
    #[arg(long, default_value_t = 0)]
    translate: usize,
    /// q grid "lo:hi:step" for the spectrum (CSV q,tau).
    #[arg(long, default_value = "-5:5:0.25", allow_hyphen_values = true)]
    q_grid: String,
    /// Optional alpha grid "lo:hi:step" for the Legendre transform.
    #[arg(long, allow_hyphen_values = true)]
    alpha_grid: Option<String>,
    /// Cylinder partition level for the spectrum.
    #[arg(long, default_value_t = 12)]
    level: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CeKind {
    Ce12,
    Ce13,
    Ce22,
}

#[derive(Args)]
struct CounterexampleArgs {
    kind: CeKind,
    /// Stage count (ce12) or block count (ce13).
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Weights for ce22.
    #[arg(long, default_value = "0.4,0.1,0.2,0.3")]
    p: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorizeMode {
    Tokenize,
    Structure,
    Growth,
}

#[derive(Args)]
struct FactorizeArgs {
    mode: FactorizeMode,
    /// Word over {0,1,2} to tokenize.
    #[arg(long)]
    word: Option<String>,
    #[arg(long, default_value_t = 40)]
    alpha_cap: usize,
    #[arg(long, default_value_t = 6)]
    k_products: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TriangularMode {
    Detect,
    Series,
    Classify,
    Svcheck,
}

#[derive(Args)]
struct TriangularArgs {
    mode: TriangularMode,
    /// JSON file: {"mats": [matrix...]} or a bare array of matrices.
    #[arg(long)]
    factors: PathBuf,
    /// Positive test vectors "a,b,c;d,e,f" for classify.
    #[arg(long, default_value = "1,1,1;0.2,1,2")]
    vectors: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long, default_value_t = 2)]
    base: usize,
    /// Refinement coefficients c_0..c_N, comma separated.
    #[arg(long)]
    coeffs: String,
    /// Number of uniform grid points in [0,1).
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value_t = 40)]
    depth: usize,
    /// Emit the residual report (JSON) instead of curve samples (CSV).
    #[arg(long)]
    residuals: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Shared parsing and output helpers

fn effective_seed(flag: u64) -> Result<u64, Failure> {
    match std::env::var("MATPROD_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| invalid(format!("MATPROD_SEED is not a u64: {s:?}"))),
        Err(_) => Ok(flag),
    }
}

fn parse_number(tok: &str) -> Result<f64, Failure> {
    let tok = tok.trim();
    if let Some((num, den)) = tok.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| invalid(format!("bad number {tok:?}")))?;
        let d: f64 = den.trim().parse().map_err(|_| invalid(format!("bad number {tok:?}")))?;
        if d == 0.0 {
            return Err(invalid(format!("zero denominator in {tok:?}")));
        }
        Ok(n / d)
    } else {
        tok.parse().map_err(|_| invalid(format!("bad number {tok:?}")))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',').map(parse_number).collect()
}

/// "lo:hi:step" -> inclusive grid.
fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(invalid(format!("grid {s:?} is not lo:hi:step")));
    }
    let lo = parse_number(parts[0])?;
    let hi = parse_number(parts[1])?;
    let step = parse_number(parts[2])?;
    if step <= 0.0 || hi < lo {
        return Err(invalid(format!("grid {s:?} must have step > 0 and hi >= lo")));
    }
    let n = ((hi - lo) / step).round() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

fn write_text(out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => Ok(std::fs::write(path, content)?),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// JSON reports go to the file when --out is set, else to stdout.
fn emit_report(out: &Option<PathBuf>, report: &Value) -> Result<(), Failure> {
    let text = format!("{}\n", serde_json::to_string_pretty(report)?);
    write_text(out, &text)
}

/// CSV goes to the file with a JSON provenance line on stdout, or straight
/// to stdout when no file is given.
fn emit_csv(out: &Option<PathBuf>, csv: String, summary: Value) -> Result<(), Failure> {
    match out {
        Some(path) => {
            std::fs::write(path, csv)?;
            let mut summary = summary;
            summary["out"] = json!(path.display().to_string());
            println!("{summary}");
            Ok(())
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn csv_from_rows(header: &[String], rows: Vec<Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| invalid(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn load_json(path: &PathBuf) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn mats_from_value(v: &Value) -> Result<Vec<Mat<f64>>, Failure> {
    let list = match v {
        Value::Array(a) => a.as_slice(),
        Value::Object(o) => o
            .get("mats")
            .and_then(|m| m.as_array())
            .ok_or_else(|| invalid("expected a \"mats\" array"))?,
        _ => return Err(invalid("expected a matrix array or {\"mats\": [...]}")),
    };
    list.iter().map(|m| Ok(mat_from_json::<f64>(m)?)).collect()
}

fn load_family(source: &str) -> Result<MatrixFamily<f64>, Failure> {
    match source {
        "thm23" | "beta" => Ok(beta_scaled_family().to_f64()),
        path => {
            let v = load_json(&PathBuf::from(path))?;
            let mats = mats_from_value(&v)?;
            let rows = match v.get("rows") {
                Some(Value::Array(a)) => {
                    Some(a.iter().map(mat_from_json::<f64>).collect::<Result<Vec<_>, _>>()?)
                }
                None | Some(Value::Null) => None,
                Some(_) => return Err(invalid("\"rows\" must be an array of matrices")),
            };
            let c = match v.get("c") {
                Some(Value::Null) | None => None,
                Some(cv) => Some(mat_from_json::<f64>(cv)?),
            };
            Ok(MatrixFamily::new(mats, rows, c)?)
        }
    }
}

fn digits(word: &str) -> Result<Vec<usize>, Failure> {
    Ok(parse_word(word)?)
}

fn finiteness_str(f: Finiteness) -> &'static str {
    match f {
        Finiteness::Finite => "finite",
        Finiteness::Divergent => "divergent",
        Finiteness::Inconclusive => "inconclusive",
    }
}

// ---------------------------------------------------------------------------
// Subcommand bodies

fn run_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let family = load_family(&a.family)?;
    let seed = effective_seed(a.seed)?;
    let modes = a.word.is_some() as u8 + a.period.is_some() as u8 + a.random as u8;
    if modes != 1 {
        return Err(invalid("pick exactly one of --word, --period, --random"));
    }
    let seq = if let Some(w) = &a.word {
        SymbolSequence::Word(digits(w)?)
    } else if let Some(p) = &a.period {
        let pre = match &a.preperiod {
            Some(s) => digits(s)?,
            None => Vec::new(),
        };
        SymbolSequence::Periodic { preperiod: pre, period: digits(p)? }
    } else {
        SymbolSequence::Random { seed }
    };
    let start = match &a.start {
        Some(s) => Some(Mat::column(parse_list(s)?)),
        None => None,
    };

    let traj = run_trajectory(&family, &seq, a.depth, start)?;
    let d = traj.order();
    let mut header: Vec<String> = vec!["n".into(), "log_norm".into(), "det_normalized".into()];
    header.extend((1..=d).map(|k| format!("delta{k}")));
    header.extend((1..=d).map(|k| format!("c{k}")));
    let mut rows = Vec::with_capacity(traj.depth());
    for n in 1..=traj.depth() {
        let step = traj.step(n);
        let mut row = vec![
            format!("{n}"),
            fmt(traj.log_norm_at(n)),
            fmt(step.det_normalized),
        ];
        row.extend(step.singular_values.iter().map(|&s| fmt(s)));
        match &step.image {
            Some(im) => row.extend(im.iter().map(|x| fmt(*x))),
            None => row.extend(std::iter::repeat(String::new()).take(d)),
        }
        rows.push(row);
    }
    let csv = csv_from_rows(&header, rows)?;
    let summary = json!({
        "command": "simulate",
        "family": a.family,
        "depth": a.depth,
        "seed": seed,
        "defaults": {"seed": 0, "start": "family terminal vector when present"},
    });
    emit_csv(&a.out, csv, summary)
}

fn integer_spec(base: Option<usize>, p: &Option<String>) -> Result<BernoulliSpec<f64>, Failure> {
    let k = base.ok_or_else(|| invalid("--base is required without --beta-case"))?;
    let p = p.as_ref().ok_or_else(|| invalid("--p is required without --beta-case"))?;
    Ok(build_representation::<f64>(k, &parse_list(p)?)?)
}

fn run_bernoulli(a: BernoulliArgs) -> Result<(), Failure> {
    if a.beta_case {
        let spec = beta_representation();
        let mut report = json!({
            "command": "bernoulli",
            "beta_case": true,
            "beta": spec.beta,
            "letter_words": spec.words,
            "translates": spec.translates.to_vec(),
            "matrices": spec.family.mats().iter().map(mat_to_json).collect::<Vec<_>>(),
            "c": mat_to_json(spec.family.terminal_vector.as_ref().unwrap()),
            "defaults": {"translate": 0},
        });
        if let Some(w) = &a.word {
            let word = digits(w)?;
            let mass = spec.cylinder_measure(&word)?;
            report["word"] = json!(w);
            report["measure"] = json!(matprod::scalar::rational_to_f64(&mass));
            report["measure_exact"] = json!(mass.to_string());
            report["interval"] = json!(spec.interval(&word)?);
        }
        return emit_report(&a.out, &report);
    }

    let spec = integer_spec(a.base, &a.p)?;
    let c_nu: Vec<f64> = (0..spec.order()).map(|j| *spec.c_nu.at(j, 0)).collect();
    let mut report = json!({
        "command": "bernoulli",
        "base": spec.base,
        "p": spec.p,
        "q": spec.q,
        "r": spec.r,
        "condition_h": {
            "holds": spec.condition_h.holds,
            "divisible": spec.condition_h.divisible,
            "p_last": spec.condition_h.p_last,
            "rho_mr": spec.condition_h.rho_mr,
        },
        "c_nu": c_nu,
        "translate": a.translate,
        "defaults": {"translate": 0},
    });
    if let Some(w) = &a.word {
        let word = digits(w)?;
        report["word"] = json!(w);
        report["measure"] = json!(cylinder_measure(&spec, &word, a.translate)?);
    }
    emit_report(&a.out, &report)
}

fn run_gibbs(a: GibbsArgs) -> Result<(), Failure> {
    if let Some(w) = &a.word {
        // Ratio-root series along the word.
        let word = digits(w)?;
        let family = if a.beta_case {
            beta_scaled_family().to_f64()
        } else {
            integer_spec(a.base, &a.p)?.family_at_translate(a.translate)?
        };
        let report = potential_and_ratio(&family, &word, a.depth)?;
        let header: Vec<String> =
            ["n", "ratio_root", "deviation"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<String>> = report
            .depths
            .iter()
            .zip(&report.ratio_roots)
            .map(|(&n, &r)| vec![format!("{n}"), fmt(r), fmt((r - 1.0).abs())])
            .collect();
        let csv = csv_from_rows(&header, rows)?;
        let summary = json!({
            "command": "gibbs",
            "mode": "ratio",
            "word_len": word.len(),
            "tail_depth": a.depth,
            "sup_deviation": report.sup_deviation,
            "defaults": {"depth": 64, "translate": 0},
        });
        return emit_csv(&a.out, csv, summary);
    }

    // Scale spectrum over the q grid.
    let qs = parse_grid(&a.q_grid)?;
    let alphas = match &a.alpha_grid {
        Some(s) => parse_grid(s)?,
        None => Vec::new(),
    };
    let beta_spec;
    let int_spec;
    let source = if a.beta_case {
        beta_spec = beta_representation();
        SpectrumSource::Beta(&beta_spec)
    } else {
        int_spec = integer_spec(a.base, &a.p)?;
        SpectrumSource::IntegerBase(&int_spec)
    };
    let report = scale_spectrum_and_legendre(&source, &qs, &alphas, a.level)?;
    let header: Vec<String> = ["q", "tau"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = report
        .qs
        .iter()
        .zip(&report.tau)
        .map(|(&q, &t)| vec![fmt(q), fmt(t)])
        .collect();
    let csv = csv_from_rows(&header, rows)?;
    let summary = json!({
        "command": "gibbs",
        "mode": "spectrum",
        "level": report.level,
        "cylinders_counted": report.cylinders_counted,
        "mesh": report.mesh,
        "legendre": report.legendre.iter().map(|&(x, y)| json!([x, y])).collect::<Vec<_>>(),
        "defaults": {"q_grid": "-5:5:0.25", "level": 12},
    });
    emit_csv(&a.out, csv, summary)
}

fn run_counterexample(a: CounterexampleArgs) -> Result<(), Failure> {
    let report = match a.kind {
        CeKind::Ce12 => {
            let build = ce12_build_and_verify(a.k)?;
            let ratios = ce12_sv_ratios(&build)?;
            json!({
                "command": "counterexample",
                "kind": "ce12",
                "k": a.k,
                "exponents": build.exponents,
                "partial_sums": build.partial_sums,
                "offsets": build.offsets,
                "certified_n": build.certified_n,
                "certificates": build.certificates.iter()
                    .map(matprod::scalar::rational_to_f64).collect::<Vec<_>>(),
                "threshold": matprod::scalar::rational_to_f64(&build.threshold),
                "p_upper": matprod::scalar::rational_to_f64(&build.p_upper),
                "sv_ratios": ratios,
                "defaults": {"k": 4},
            })
        }
        CeKind::Ce13 => {
            let rep = ce13_verify(a.k)?;
            json!({
                "command": "counterexample",
                "kind": "ce13",
                "k": a.k,
                "closed_form_match": rep.closed_form_match,
                "appended_match": rep.appended_match,
                "product": mat_to_json(&rep.product),
                "sv_orders": {
                    "delta1_over_n": [rep.sv_orders.delta1_over_n.0, rep.sv_orders.delta1_over_n.1],
                    "delta2": [rep.sv_orders.delta2.0, rep.sv_orders.delta2.1],
                    "n_delta3": [rep.sv_orders.n_delta3.0, rep.sv_orders.n_delta3.1],
                    "sampled": rep.sv_orders.sampled,
                },
                "centroids": rep.centroids,
                "defaults": {"k": 4},
            })
        }
        CeKind::Ce22 => {
            let p = parse_list(&a.p)?;
            let rep = ce22_limits(&p)?;
            json!({
                "command": "counterexample",
                "kind": "ce22",
                "p": p,
                "limit_11": rep.limit_11,
                "limit_12": rep.limit_12,
                "uniform": rep.uniform,
                "defaults": {"p": "0.4,0.1,0.2,0.3"},
            })
        }
    };
    emit_report(&a.out, &report)
}

fn run_factorize(a: FactorizeArgs) -> Result<(), Failure> {
    let report = match a.mode {
        FactorizeMode::Tokenize => {
            let w = a.word.as_ref().ok_or_else(|| invalid("tokenize needs --word"))?;
            let word = digits(w)?;
            let fr = tokenize(&word)?;
            let token_json = |t: &matprod::factorize::FactorToken| {
                let (kind, idx) = match t.kind {
                    TokenKind::Body(i) => ("body", i),
                    TokenKind::Head(i) => ("head", i),
                };
                json!({
                    "kind": kind,
                    "template": idx,
                    "alpha": t.alpha,
                    "literal": t.literal.iter().map(|d| d.to_string()).collect::<String>(),
                })
            };
            json!({
                "command": "factorize",
                "mode": "tokenize",
                "word": w,
                "head": fr.head.as_ref().map(token_json),
                "body": fr.body.iter().map(token_json).collect::<Vec<_>>(),
                "boundaries": fr.boundaries,
                "round_trip": fr.literal_concat() == word,
            })
        }
        FactorizeMode::Structure => {
            let rep = structure_checks()?;
            json!({
                "command": "factorize",
                "mode": "structure",
                "triples_checked": rep.triples_checked,
                "cone_images": rep.cone_images.iter().map(|v| v.to_vec()).collect::<Vec<_>>(),
                "products_scanned": rep.products_scanned,
                "exceptional_found": rep.exceptional_found,
                "closure_stable": rep.closure_stable,
                "reach_words_checked": rep.reach_words_checked,
            })
        }
        FactorizeMode::Growth => {
            let rep = growth_and_bounds(a.alpha_cap, a.k_products)?;
            json!({
                "command": "factorize",
                "mode": "growth",
                "alpha_cap": a.alpha_cap,
                "k_products": a.k_products,
                "max_lambda_big": rep.max_lambda_big,
                "max_lambda_big_word": rep.max_lambda_big_word,
                "max_lambda_small": rep.max_lambda_small,
                "max_lambda_small_word": rep.max_lambda_small_word,
                "tail_family_max": rep.tail_family_max,
                "tail_family_argmax": rep.tail_family_argmax,
                "chain_sup_lambda_big": rep.chain_sup_lambda_big,
                "chain_bound": rep.chain_bound,
                "half_window": rep.half_window,
                "six_product_max_entry": rep.six_product_max_entry,
                "sandwich_ok": rep.sandwich_ok,
                "floor_violations": rep.floor_violations,
                "ceiling_violations": rep.ceiling_violations,
                "tokens_enumerated": rep.tokens_enumerated,
                "chains_sampled": rep.chains_sampled,
                "defaults": {"alpha_cap": 40, "k_products": 6},
            })
        }
    };
    emit_report(&a.out, &report)
}

fn run_triangular(a: TriangularArgs) -> Result<(), Failure> {
    let mats = mats_from_value(&load_json(&a.factors)?)?;
    let report = match a.mode {
        TriangularMode::Detect => {
            let rep = block_form_detect(&mats)?;
            let pattern_rows: Vec<Vec<u8>> = (0..rep.pattern.rows)
                .map(|i| (0..rep.pattern.cols).map(|j| rep.pattern.at(i, j) as u8).collect())
                .collect();
            json!({
                "command": "triangular",
                "mode": "detect",
                "delta": rep.delta,
                "partition": rep.partition,
                "checkpoints": rep.checkpoints,
                "pattern": pattern_rows,
                "t1_membership": rep.t1_membership,
            })
        }
        TriangularMode::Series => {
            let s = series3x3(&mats)?;
            let n = s.s.len();
            json!({
                "command": "triangular",
                "mode": "series",
                "depth": n,
                "s": s.s[n - 1],
                "t": s.t[n - 1],
                "u": s.u[n - 1],
                "tau": s.tau[n - 1],
                "verdicts": {
                    "s": finiteness_str(s.s_verdict),
                    "t": finiteness_str(s.t_verdict),
                    "u": finiteness_str(s.u_verdict),
                    "tau": finiteness_str(s.tau_verdict),
                },
            })
        }
        TriangularMode::Classify => {
            let vectors: Vec<[f64; 3]> = a
                .vectors
                .split(';')
                .map(|chunk| {
                    let v = parse_list(chunk)?;
                    <[f64; 3]>::try_from(v)
                        .map_err(|v| invalid(format!("test vector has {} entries, need 3", v.len())))
                })
                .collect::<Result<_, _>>()?;
            let s = series3x3(&mats)?;
            let cls = classify3x3_and_predict(&s, &vectors)?;
            json!({
                "command": "triangular",
                "mode": "classify",
                "case": cls.case,
                "limit_point_shape": cls.limit_point_shape,
                "predicted": cls.predicted,
                "validation_gap": cls.validation_gap,
                "tau_over_u_gap": cls.tau_over_u_gap,
                "verdicts": {
                    "s": finiteness_str(s.s_verdict),
                    "u": finiteness_str(s.u_verdict),
                    "tau": finiteness_str(s.tau_verdict),
                },
                "defaults": {"vectors": "1,1,1;0.2,1,2"},
            })
        }
        TriangularMode::Svcheck => {
            let rep = lower_tri_sv_check(&mats)?;
            json!({
                "command": "triangular",
                "mode": "svcheck",
                "ratio_bounded": rep.ratio_bounded,
                "sv_column_match": rep.sv_column_match,
                "agreement": rep.agreement,
            })
        }
    };
    emit_report(&a.out, &report)
}

fn run_curve(a: CurveArgs) -> Result<(), Failure> {
    let coeffs = parse_list(&a.coeffs)?;
    let sys = build_refinement_matrices(a.base, &coeffs)?;
    if a.grid == 0 {
        return Err(invalid("grid must have at least one point"));
    }
    let xs: Vec<f64> = (0..a.grid).map(|i| i as f64 / a.grid as f64).collect();

    if a.residuals {
        let rep = residual_checks(&sys, &xs, a.depth)?;
        let report = json!({
            "command": "curve",
            "mode": "residuals",
            "base": a.base,
            "coeffs": coeffs,
            "depth": a.depth,
            "self_similarity_residual": rep.self_similarity_residual,
            "truncation_gap": rep.truncation_gap,
            "endpoint_gaps": rep.endpoint_gaps,
            "endpoint_truncation": rep.endpoint_truncation,
            "coeff_sum": sys.coeff_sum,
            "parity_balanced": sys.parity_balanced,
            "seed": sys.seed,
            "seed_stationary": sys.seed_stationary,
            "defaults": {"grid": 256, "depth": 40},
        });
        return emit_report(&a.out, &report);
    }

    let samples = sample_curve(&sys, &xs, a.depth)?;
    let d = sys.order + 1;
    let mut header: Vec<String> = vec!["x".into()];
    header.extend((1..=d).map(|k| format!("psi{k}")));
    header.push("gap".into());
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            let mut row = vec![fmt(s.x)];
            row.extend(s.psi.iter().map(|&v| fmt(v)));
            row.push(fmt(s.gap));
            row
        })
        .collect();
    let csv = csv_from_rows(&header, rows)?;
    let summary = json!({
        "command": "curve",
        "base": a.base,
        "coeffs": coeffs,
        "grid": a.grid,
        "depth": a.depth,
        "seed_stationary": sys.seed_stationary,
        "defaults": {"grid": 256, "depth": 40},
    });
    emit_csv(&a.out, csv, summary)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Bernoulli(a) => run_bernoulli(a),
        Command::Gibbs(a) => run_gibbs(a),
        Command::Counterexample(a) => run_counterexample(a),
        Command::Factorize(a) => run_factorize(a),
        Command::Triangular(a) => run_triangular(a),
        Command::Curve(a) => run_curve(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"code": f.code, "message": f.message}));
            ExitCode::from(exit_for(f.code))
        }
    }
}
