//! `opsos`: scans, verification suites and certificates from the command line.
//!
//! Exit status: 0 on success, 1 when a checked claim fails, 2 on bad input.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use opsos::certifier::{
    best_certified_lower_bound, boolean_constraint_ideal, check_boolean_conditions, check_conditions, shifting_lemma,
    CertificateReport,
};
use opsos::exact::{default_precision, format_rational, ldl_status, parse_rational, set_default_precision, Rational};
use opsos::laguerre::{basis_json, derivative_identity_holds, h_poly, normalizer, weighted_inner_product};
use opsos::omega::{omega_first_failure, two_n_to_n_lemma};
use opsos::pe::{identities, IndexMonomial, PEContext};
use opsos::quadrature::{integration_error_bound, measured_integration_error, quad_coefficients, validate_error_bound};
use opsos::witness::{chebyshev_witness, witness_degree_bound, witness_row};

use report::{Format, Header, Table};

#[derive(Parser, Debug)]
#[command(name = "opsos", version, about = "Exact SOS checks for the ordering principle")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Worker threads for scans.
    #[arg(long, global = true, default_value_t = 1)]
    parallelism: usize,
    /// Record wall-clock time in the header (makes headers non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact pseudo-expectation of one monomial, e.g. "x(1,2)*x(2,3)".
    PeEval {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        monomial: String,
    },
    /// Exact PSD decision for the full moment matrix of even degree.
    PePsd {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        degree: u32,
    },
    /// Chebyshev witness and minimal failing degree for n..=n_max.
    Witness {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// First failing degree of the signed form of Ω_{n,d2}, with the certified degree and the upper curve.
    OmegaScan {
        #[arg(long)]
        n_min: u64,
        #[arg(long)]
        n_max: u64,
        #[arg(long, default_value_t = 2)]
        d2: u64,
        /// Degree cap; defaults to the upper curve at 2n.
        #[arg(long)]
        d_max: Option<usize>,
    },
    /// Orthonormality and the derivative identity of the basis up to k_max.
    LaguerreVerify {
        #[arg(long, default_value_t = 25)]
        k_max: usize,
        /// Also write the exact basis as JSON to this path.
        #[arg(long)]
        export_basis: Option<PathBuf>,
    },
    /// Error bound against the measured error for g = h_d.
    QuadTest {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_parser = parse_delta)]
        delta: Rational,
    },
    /// Condition report for one tuple, or the best certified degree when --d is omitted.
    Certify {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        d2: Option<u64>,
        #[arg(long, default_value_t = 3)]
        t: usize,
        /// Check the Boolean-encoding conditions with this many auxiliary variables per element.
        #[arg(long)]
        boolean_m: Option<u64>,
    },
    /// Every invariant suite at desk scale.
    VerifyAll,
}

fn parse_delta(s: &str) -> Result<Rational, String> {
    let v = parse_rational(s).map_err(|e| e.to_string())?;
    if v <= Rational::from_integer(0.into()) {
        return Err("delta must be positive".into());
    }
    Ok(v)
}

/// Outcome of a command: a table, and whether every checked claim held.
struct Outcome {
    table: Table,
    ok: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("invalid --{flag}: {reason}")]
    Invalid { flag: &'static str, reason: String },
    #[error(transparent)]
    Core(#[from] opsos::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(flag: &'static str, reason: impl Into<String>) -> CliError {
    CliError::Invalid {
        flag,
        reason: reason.into(),
    }
}

/// Maps core argument errors onto the flag that carried them.
fn core_arg(flag: &'static str) -> impl Fn(opsos::Error) -> CliError {
    move |e| match e {
        opsos::Error::InvalidArgument { reason, .. } | opsos::Error::Parse(reason) => invalid(flag, reason),
        other => CliError::Core(other),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            // Bad flags, unmet preconditions, exhausted budgets and I/O all land here.
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let precision = match std::env::var("OP_SOS_PRECISION") {
        Ok(v) => {
            let bits: u32 = v
                .trim()
                .parse()
                .map_err(|_| invalid("OP_SOS_PRECISION", format!("not an integer: `{v}`")))?;
            if !(32..=4096).contains(&bits) {
                return Err(invalid("OP_SOS_PRECISION", "must be within 32..=4096"));
            }
            bits
        }
        Err(_) => default_precision(),
    };
    set_default_precision(precision);
    if cli.common.parallelism == 0 {
        return Err(invalid("parallelism", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.parallelism)
        .build()
        .map_err(|e| invalid("parallelism", e.to_string()))?;

    let started = Instant::now();
    let (params, outcome) = pool.install(|| dispatch(&cli.command))?;
    let mut header = Header::new(command_name(&cli.command), params);
    header.push("format", json!(format_name(cli.common.format)));
    header.push("parallelism", json!(cli.common.parallelism));
    header.push("precision_bits", json!(precision));
    header.push("version", json!(env!("CARGO_PKG_VERSION")));
    if cli.common.timings {
        header.push("elapsed_ms", json!(started.elapsed().as_millis() as u64));
    }
    let format = match cli.common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let bytes = report::emit(&header, &outcome.table, format);
    match &cli.common.output {
        Some(path) => std::fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })?;
        }
    }
    Ok(outcome.ok)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::PeEval { .. } => "pe-eval",
        Command::PePsd { .. } => "pe-psd",
        Command::Witness { .. } => "witness",
        Command::OmegaScan { .. } => "omega-scan",
        Command::LaguerreVerify { .. } => "laguerre-verify",
        Command::QuadTest { .. } => "quad-test",
        Command::Certify { .. } => "certify",
        Command::VerifyAll => "verify-all",
    }
}

fn format_name(f: FormatArg) -> &'static str {
    match f {
        FormatArg::Csv => "csv",
        FormatArg::Json => "json",
    }
}

type Params = Vec<(String, Value)>;

fn p(k: &str, v: Value) -> (String, Value) {
    (k.to_string(), v)
}

fn dispatch(command: &Command) -> Result<(Params, Outcome), CliError> {
    match command {
        Command::PeEval { n, monomial } => pe_eval(*n, monomial),
        Command::PePsd { n, degree } => pe_psd(*n, *degree),
        Command::Witness { n, n_max } => witness(*n, n_max.unwrap_or(*n)),
        Command::OmegaScan {
            n_min,
            n_max,
            d2,
            d_max,
        } => omega_scan(*n_min, *n_max, *d2, *d_max),
        Command::LaguerreVerify { k_max, export_basis } => laguerre_verify(*k_max, export_basis.as_ref()),
        Command::QuadTest { t, d, delta } => quad_test(*t, *d, delta),
        Command::Certify { n, d, d2, t, boolean_m } => certify(*n, *d, *d2, *t, *boolean_m),
        Command::VerifyAll => verify_all(),
    }
}

fn pe_eval(n: usize, monomial: &str) -> Result<(Params, Outcome), CliError> {
    let ctx = PEContext::new(n).map_err(core_arg("n"))?;
    let m: IndexMonomial = monomial.parse().map_err(core_arg("monomial"))?;
    let value = ctx.pe_eval(&m).map_err(core_arg("monomial"))?;
    let mut table = Table::new(&["monomial", "value"]);
    table.row(vec![json!(m.to_string()), json!(format_rational(&value))]);
    Ok((
        vec![p("n", json!(n)), p("monomial", json!(monomial))],
        Outcome { table, ok: true },
    ))
}

fn pe_psd(n: usize, degree: u32) -> Result<(Params, Outcome), CliError> {
    let ctx = PEContext::new(n).map_err(core_arg("n"))?;
    let matrix = ctx.moment_matrix(degree).map_err(core_arg("degree"))?;
    let psd = ldl_status(&matrix).is_psd();
    let mut table = Table::new(&["n", "degree", "dim", "psd"]);
    table.row(vec![json!(n), json!(degree), json!(matrix.dim()), json!(psd)]);
    Ok((
        vec![p("n", json!(n)), p("degree", json!(degree))],
        Outcome { table, ok: true },
    ))
}

fn witness(n: u64, n_max: u64) -> Result<(Params, Outcome), CliError> {
    if n < 4 {
        return Err(invalid("n", format!("need n >= 4, got {n}")));
    }
    if n_max < n {
        return Err(invalid("n-max", "must be at least --n"));
    }
    let rows: Vec<_> = (n..=n_max).into_par_iter().map(witness_row).collect::<Result<_, _>>()?;
    let mut table = Table::new(&["n", "m", "value", "m_star"]);
    let mut ok = true;
    for r in rows {
        // The Chebyshev witness must be negative and the exact failure at or below m.
        ok &= r.chebyshev_value < Rational::from_integer(0.into()) && r.m_star.is_some_and(|m| m <= r.paper_bound);
        table.row(vec![
            json!(r.n),
            json!(r.paper_bound),
            json!(format_rational(&r.chebyshev_value)),
            opt(r.m_star),
        ]);
    }
    Ok((vec![p("n", json!(n)), p("n_max", json!(n_max))], Outcome { table, ok }))
}

fn opt(v: Option<usize>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

/// `2·(⌈½√(2n)(log₂(2n)+1)⌉ + 1)`: the Chebyshev witness `z_1·g(w_1)` on `2n`
/// elements, in the degree units of the signed form (twice the degree of `g`).
pub(crate) fn upper_curve(n: u64) -> Result<usize, opsos::Error> {
    Ok(2 * (witness_degree_bound(2 * n)? + 1))
}

fn omega_scan(n_min: u64, n_max: u64, d2: u64, d_max: Option<usize>) -> Result<(Params, Outcome), CliError> {
    if n_min < 2 {
        return Err(invalid("n-min", "need n >= 2"));
    }
    if n_max < n_min {
        return Err(invalid("n-max", "must be at least --n-min"));
    }
    if d2 == 0 || d2 > n_min {
        return Err(invalid("d2", format!("need 1 <= d2 <= n-min, got {d2}")));
    }
    let rows: Vec<_> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| -> Result<_, CliError> {
            let curve = upper_curve(n)?;
            let first = omega_first_failure(n, d2, d_max.unwrap_or(curve))?;
            let (certified, _) = best_certified_lower_bound(n);
            Ok((n, first, certified, curve))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&["n", "d2", "first_failure_d", "certified_d", "paper_upper_curve"]);
    let mut ok = true;
    for (n, first, certified, curve) in rows {
        ok &= first.is_none_or(|f| certified <= f && f <= curve);
        table.row(vec![json!(n), json!(d2), opt(first), json!(certified), json!(curve)]);
    }
    let params = vec![
        p("n_min", json!(n_min)),
        p("n_max", json!(n_max)),
        p("d2", json!(d2)),
        p("d_max", opt(d_max)),
    ];
    Ok((params, Outcome { table, ok }))
}

fn laguerre_verify(k_max: usize, export: Option<&PathBuf>) -> Result<(Params, Outcome), CliError> {
    if k_max > 60 {
        return Err(invalid("k-max", "at most 60"));
    }
    let rows: Vec<(usize, bool, bool)> = (0..=k_max)
        .into_par_iter()
        .map(|k| {
            let pk = h_poly(k).p;
            let norm_ok = weighted_inner_product(&pk, &pk) == Rational::from_integer(normalizer(k))
                && (0..k).all(|j| weighted_inner_product(&h_poly(j).p, &pk) == Rational::from_integer(0.into()));
            (k, norm_ok, derivative_identity_holds(k))
        })
        .collect();
    let mut table = Table::new(&["k", "orthogonal", "derivative_identity"]);
    let mut ok = true;
    for (k, a, b) in rows {
        ok &= a && b;
        table.row(vec![json!(k), json!(a), json!(b)]);
    }
    if let Some(path) = export {
        let text = serde_json::to_string_pretty(&basis_json(k_max)).expect("basis serializes");
        std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    let params = vec![
        p("k_max", json!(k_max)),
        p("export_basis", json!(export.map(|x| x.display().to_string()))),
    ];
    Ok((params, Outcome { table, ok }))
}

fn quad_test(t: usize, d: usize, delta: &Rational) -> Result<(Params, Outcome), CliError> {
    quad_coefficients(t).map_err(core_arg("t"))?;
    if d == 0 || d > 16 {
        return Err(invalid("d", "need 1 <= d <= 16"));
    }
    let bound = integration_error_bound(t, d, delta).map_err(core_arg("delta"))?;
    let g = h_poly(d).p;
    let norm = weighted_inner_product(&g, &g);
    let measured = measured_integration_error(&g, delta)?.abs();
    let scaled = &bound.value * &opsos::exact::IntervalBound::point(norm);
    let pass = measured.certainly_le(&scaled);
    let mut table = Table::new(&["t", "d", "delta", "measured_hi", "bound_lo", "pass"]);
    table.row(vec![
        json!(t),
        json!(d),
        json!(format_rational(delta)),
        json!(format_rational(measured.hi())),
        json!(format_rational(scaled.lo())),
        json!(pass),
    ]);
    let params = vec![
        p("t", json!(t)),
        p("d", json!(d)),
        p("delta", json!(format_rational(delta))),
    ];
    Ok((params, Outcome { table, ok: pass }))
}

fn certificate_row(table: &mut Table, r: &CertificateReport) {
    table.row(vec![
        json!(r.n),
        json!(r.d),
        json!(r.d2),
        json!(r.t),
        json!(format_rational(&r.delta)),
        r.m.map_or(Value::Null, |m| json!(m)),
        json!(r.elements),
        json!(r.sos_degree),
        json!(r.certified),
    ]);
}

const CERT_COLUMNS: [&str; 9] = ["n", "d", "d2", "t", "delta", "m", "elements", "sos_degree", "certified"];

fn certify(
    n: u64,
    d: Option<usize>,
    d2: Option<u64>,
    t: usize,
    boolean_m: Option<u64>,
) -> Result<(Params, Outcome), CliError> {
    if n < 16 {
        return Err(invalid("n", "need n >= 16"));
    }
    let params = vec![
        p("n", json!(n)),
        p("d", opt(d)),
        p("d2", d2.map_or(Value::Null, |x| json!(x))),
        p("t", json!(t)),
        p("boolean_m", boolean_m.map_or(Value::Null, |x| json!(x))),
    ];
    let mut table = Table::new(&CERT_COLUMNS);
    match d {
        Some(d) => {
            let d2 = d2
                .or_else(|| opsos::certifier::find_d2(d, n))
                .ok_or_else(|| invalid("d2", format!("no d2 satisfies the window for n={n}, d={d}")))?;
            let report = match boolean_m {
                Some(m) => check_boolean_conditions(n, d, d2, t, m),
                None => check_conditions(n, d, d2, t),
            };
            certificate_row(&mut table, &report);
            table.document = Some(serde_json::to_value(&report).expect("report serializes"));
        }
        None => {
            if d2.is_some() || boolean_m.is_some() {
                return Err(invalid("d", "--d2 and --boolean-m need --d"));
            }
            let (_, best) = best_certified_lower_bound(n);
            match &best {
                Some(r) => certificate_row(&mut table, r),
                None => table.row(vec![
                    json!(n),
                    json!(0),
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    json!(2 * n),
                    json!("0/1"),
                    json!(false),
                ]),
            }
            table.document = best.map(|r| serde_json::to_value(&r).expect("report serializes"));
        }
    }
    // A verdict, certified or not, is a successful run.
    Ok((params, Outcome { table, ok: true }))
}

fn verify_all() -> Result<(Params, Outcome), CliError> {
    let mut table = Table::new(&["suite", "cases", "failures"]);
    let mut ok = true;
    let mut record = |name: &str, cases: u64, failures: u64| {
        ok &= failures == 0 && cases > 0;
        table.row(vec![json!(name), json!(cases), json!(failures)]);
        eprintln!("{name}: {}/{cases} passed", cases - failures);
    };
    for o in identities::run_suite()? {
        record(&o.name, o.cases, o.failures);
    }
    let witness_fail = (4..=32u64)
        .into_par_iter()
        .filter(|&n| match chebyshev_witness(n) {
            Ok(w) => w.value >= Rational::from_integer(0.into()),
            Err(_) => true,
        })
        .count() as u64;
    record("chebyshev_witness_n4_32", 29, witness_fail);
    let o = two_n_to_n_lemma(30)?;
    record(&o.name, o.cases, o.failures);
    let lag_fail = (0..=25usize)
        .into_par_iter()
        .filter(|&k| {
            let pk = h_poly(k).p;
            !(weighted_inner_product(&pk, &pk) == Rational::from_integer(normalizer(k)) && derivative_identity_holds(k))
        })
        .count() as u64;
    record("laguerre_k0_25", 26, lag_fail);
    let quad_fail = (1..=3usize)
        .filter(|&t| !validate_error_bound(t).unwrap_or(false))
        .count() as u64;
    record("quadrature_bound_t1_3", 3, quad_fail);
    let o = shifting_lemma(8, 500);
    record(&o.name, o.cases, o.failures);
    let o = boolean_constraint_ideal(4, 3, 2)?;
    record(&o.name, o.cases, o.failures);
    Ok((Vec::new(), Outcome { table, ok }))
}
