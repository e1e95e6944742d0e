//! Command-line front end: `certify`, `probe` and `zoo`.

mod spec;

pub use spec::{BoxSpec, FunctionSpecDoc};

use std::io::Write;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::certifier::{certify_convexity, certify_strong, CertificateReport, CertifyConfig, Method};
use crate::error::{Error, Result};
use crate::estimators::{delta2, graphical_derivative_probe, second_subderivative, GridConfig};
use crate::ext::{ExtReal, Extended};
use crate::moreau::{EnvelopeHandle, InnerSolver};
use crate::parallel;
use crate::types::{sample_subgradient_pairs, Point, SubgradientPair};
use crate::zoo;

pub const SCHEMA: &str = "varkit.report/1";

#[derive(Debug, Parser)]
#[command(name = "varkit", version, about = "Second-order convexity certification for nonsmooth functions")]
pub struct Cli {
    /// Worker threads (defaults to VARKIT_WORKERS, then the number of CPUs).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify convexity (or strong convexity with --kappa) and write a JSON report.
    Certify(CertifyArgs),
    /// Emit CSV probe streams.
    Probe(ProbeArgs),
    /// Inspect the function zoo.
    #[command(subcommand)]
    Zoo(ZooCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    All,
    Graphical,
    Subderivative,
    Coderivative,
    Moreau,
    Segment,
    Exact1d,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::All => Method::ALL.to_vec(),
            MethodArg::Graphical => vec![Method::Graphical],
            MethodArg::Subderivative => vec![Method::Subderivative],
            MethodArg::Coderivative => vec![Method::Coderivative],
            MethodArg::Moreau => vec![Method::Moreau],
            MethodArg::Segment => vec![],
            MethodArg::Exact1d => vec![Method::Exact1d],
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CertifyArgs {
    /// Spec file path or zoo name.
    #[arg(long)]
    pub function: String,
    #[arg(long, value_enum, default_value = "all")]
    pub method: MethodArg,
    /// Strong-convexity modulus to certify; 0 certifies convexity.
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 48)]
    pub samples: usize,
    #[arg(long, default_value_t = 10_000)]
    pub triples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<String>,
    /// Include wall-clock timings (the report is then no longer reproducible byte for byte).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbeWhat {
    Delta2,
    D2,
    Graphical,
    Envelope,
}

#[derive(Clone, Debug, Args)]
pub struct ProbeArgs {
    /// Spec file path or zoo name.
    #[arg(required_unless_present = "function_flag")]
    pub function: Option<String>,
    #[arg(long = "function", conflicts_with = "function")]
    pub function_flag: Option<String>,
    #[arg(long, value_enum)]
    pub what: ProbeWhat,
    /// Base point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub at: String,
    /// Subgradient at the base point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<String>,
    /// Direction, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<String>,
    /// Single step for delta2; the whole grid when absent.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tau0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub radius: f64,
    #[arg(long, default_value_t = 8)]
    pub perturbations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Clone, Debug, Subcommand)]
pub enum ZooCommand {
    List,
    Show { name: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub wall_ms: f64,
}

/// JSON report written by `certify`.
#[derive(Clone, Debug, Serialize)]
pub struct ReportDoc {
    pub schema: &'static str,
    pub tool_version: &'static str,
    pub function: FunctionSpecDoc,
    pub config: CertifyArgs,
    pub seed: u64,
    pub report: CertificateReport<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl ReportDoc {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Exit code for an error: 3 for bad input, 4 for missing capabilities or solver failures, 5 for I/O.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 5,
        Error::CapabilityMissing(_) | Error::ProxDiverged(_) | Error::InnerSolverFailed(_) | Error::NoAnalyticForm(_) => 4,
        _ => 3,
    }
}

pub fn cmd_certify(args: &CertifyArgs) -> Result<(i32, ReportDoc)> {
    let start = Instant::now();
    let spec = FunctionSpecDoc::load(&args.function)?.normalize()?;
    let (oracle, region) = spec.build::<f64>()?;
    let cfg = CertifyConfig {
        methods: args.method.methods(),
        samples: args.samples,
        triples: args.triples,
        seed: args.seed,
        tol: args.tol,
        lambda: args.lambda,
        solver: InnerSolver { seed: args.seed, ..InnerSolver::default() },
        ..CertifyConfig::new(region)
    };
    let report = if args.kappa > 0.0 {
        certify_strong(oracle, args.kappa, &cfg)?
    } else if args.kappa == 0.0 {
        certify_convexity(oracle.as_ref(), &cfg)?
    } else {
        return Err(Error::InvalidParameter("kappa must be nonnegative".into()));
    };
    let code = report.overall.exit_code;
    let doc = ReportDoc {
        schema: SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION"),
        function: spec,
        config: args.clone(),
        seed: args.seed,
        report,
        timings: args.timings.then(|| Timings { wall_ms: start.elapsed().as_secs_f64() * 1e3 }),
    };
    Ok((code, doc))
}

fn parse_vec(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("{what}: bad number {t:?}"))))
        .collect()
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(";")
}

fn fmt_ext(e: ExtReal<f64>) -> String {
    fmt_num(e.to_float())
}

fn fmt_extended(e: Extended<f64>) -> String {
    fmt_num(e.to_float())
}

/// Writes the CSV stream for `probe`.
///
/// Headers: `delta2` → `x,v,w,tau,quotient`; `d2` → `kind,x,v,w,tau,u,value` (one `level` row per
/// τ-level, then one `estimate` row); `graphical` → `x,v,w,t,w_prime,z,pairing`;
/// `envelope` → `x,lambda,prox,envelope,gradient`. Vectors are `;`-joined.
pub fn cmd_probe(args: &ProbeArgs, out: &mut dyn Write) -> Result<()> {
    let name = args.function.as_deref().or(args.function_flag.as_deref()).expect("clap enforces a function");
    let spec = FunctionSpecDoc::load(name)?.normalize()?;
    let (oracle, region) = spec.build::<f64>()?;
    let x = parse_vec(&args.at, "--at")?;
    let n = oracle.dimension();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let g = GridConfig { tau0: args.tau0, ratio: args.ratio, depth: args.depth, radius: args.radius, samples: args.perturbations };
    g.validate()?;
    let need = |o: &Option<String>, what: &str| -> Result<Vec<f64>> {
        let v = parse_vec(o.as_deref().ok_or_else(|| Error::InvalidParameter(format!("{what} is required")))?, what)?;
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        Ok(v)
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    match args.what {
        ProbeWhat::Delta2 => {
            let (v, dir) = (need(&args.v, "--v")?, need(&args.w, "--w")?);
            w.write_record(["x", "v", "w", "tau", "quotient"]).map_err(csv_err)?;
            let taus: Vec<f64> = match args.tau {
                Some(t) => vec![t],
                None => (0..=g.depth).map(|k| g.step(k)).collect(),
            };
            for tau in taus {
                let q = delta2(oracle.as_ref(), &x, &v, tau, &dir)?;
                w.write_record([fmt_vec(&x), fmt_vec(&v), fmt_vec(&dir), fmt_num(tau), fmt_ext(q)]).map_err(csv_err)?;
            }
        }
        ProbeWhat::D2 => {
            let (v, dir) = (need(&args.v, "--v")?, need(&args.w, "--w")?);
            let est = second_subderivative(oracle.as_ref(), &x, &v, &dir, &g)?;
            w.write_record(["kind", "x", "v", "w", "tau", "u", "value"]).map_err(csv_err)?;
            for l in &est.levels {
                let kind = if l.reliable { "level" } else { "level_unreliable" };
                w.write_record([
                    kind.to_string(),
                    fmt_vec(&x),
                    fmt_vec(&v),
                    fmt_vec(&dir),
                    fmt_num(l.point.tau),
                    fmt_vec(&l.point.u),
                    fmt_ext(l.point.value),
                ])
                .map_err(csv_err)?;
            }
            w.write_record([
                "estimate".to_string(),
                fmt_vec(&x),
                fmt_vec(&v),
                fmt_vec(&dir),
                fmt_num(est.argmin.tau),
                fmt_vec(&est.argmin.u),
                fmt_extended(est.value),
            ])
            .map_err(csv_err)?;
        }
        ProbeWhat::Graphical => {
            let (v, dir) = (need(&args.v, "--v")?, need(&args.w, "--w")?);
            let base = SubgradientPair { x: Point::new(x.clone())?, v: Point::new(v)?, residual: 0.0, draw: None };
            let pairs = if oracle.has_subdifferential() {
                vec![]
            } else {
                sample_subgradient_pairs(oracle.as_ref(), &region, args.lambda, 4096, args.seed)?
            };
            let probes = graphical_derivative_probe(oracle.as_ref(), &pairs, &base, &dir, &g)?;
            w.write_record(["x", "v", "w", "t", "w_prime", "z", "pairing"]).map_err(csv_err)?;
            for p in probes {
                w.write_record([
                    fmt_vec(&p.x),
                    fmt_vec(&p.v),
                    fmt_vec(&p.direction),
                    fmt_num(p.step),
                    fmt_vec(&p.realized),
                    fmt_vec(&p.z),
                    fmt_num(p.pairing),
                ])
                .map_err(csv_err)?;
            }
        }
        ProbeWhat::Envelope => {
            let solver = InnerSolver { seed: args.seed, ..InnerSolver::default() };
            let env = EnvelopeHandle::new(oracle.as_ref(), args.lambda, solver)?;
            let p = env.prox(&x)?;
            let e = env.envelope(&x)?;
            let grad = env.envelope_gradient(&x)?;
            w.write_record(["x", "lambda", "prox", "envelope", "gradient"]).map_err(csv_err)?;
            w.write_record([fmt_vec(&x), fmt_num(args.lambda), fmt_vec(&p.point), fmt_num(e), fmt_vec(&grad)])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn truth_line(t: &zoo::ZooTruth<f64>) -> String {
    match (t.is_convex, t.strong_modulus, t.weak_modulus) {
        (true, Some(k), _) if k > 0.0 => format!("strongly convex, kappa={k}"),
        (true, _, _) => "convex, rho=0".to_string(),
        (false, _, Some(r)) => format!("weakly convex, rho={r}"),
        (false, _, None) => "not weakly convex".to_string(),
    }
}

pub fn cmd_zoo(cmd: &ZooCommand, out: &mut dyn Write) -> Result<()> {
    match cmd {
        ZooCommand::List => {
            for (name, desc) in zoo::NAMES {
                writeln!(out, "{name}\t{desc}")?;
            }
        }
        ZooCommand::Show { name } => {
            let e = zoo::get::<f64>(name)?;
            writeln!(out, "name: {}", e.name)?;
            writeln!(out, "description: {}", e.description)?;
            writeln!(out, "dimension: {}", e.oracle.dimension())?;
            writeln!(out, "truth: {}", truth_line(&e.truth))?;
            writeln!(out, "analytic_subdiff: {}", e.truth.analytic_subdiff)?;
            writeln!(out, "analytic_prox: {}", e.truth.analytic_prox)?;
            writeln!(out, "exact_form: {}", e.oracle.piecewise_form().is_some())?;
            writeln!(out, "default_box: [{}] x [{}]", fmt_vec(e.default_box.lo()), fmt_vec(e.default_box.hi()))?;
        }
    }
    Ok(())
}

fn write_to(path: Option<&str>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Certify(args) => {
            let (code, doc) = cmd_certify(args)?;
            write_to(args.out.as_deref(), &doc.to_json())?;
            eprintln!("{}", doc.report.overall.summary);
            Ok(code)
        }
        Command::Probe(args) => {
            match &args.out {
                Some(p) => {
                    let mut f = std::fs::File::create(p)?;
                    cmd_probe(args, &mut f)?;
                }
                None => cmd_probe(args, &mut std::io::stdout().lock())?,
            }
            Ok(0)
        }
        Command::Zoo(z) => {
            cmd_zoo(z, &mut std::io::stdout().lock())?;
            Ok(0)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    let workers = cli.workers.or_else(parallel::workers_from_env);
    parallel::run_with_workers(workers, || match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(args: &[&str]) -> String {
        let cli = Cli::try_parse_from(std::iter::once("varkit").chain(args.iter().copied())).unwrap();
        let Command::Probe(p) = cli.command else { panic!() };
        let mut buf = Vec::new();
        cmd_probe(&p, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn probe_examples() {
        let s = probe(&["probe", "quadratic", "--what", "delta2", "--at", "1", "--v", "1", "--w", "2", "--tau", "0.1"]);
        let q: f64 = s.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
        assert!((q - 4.0).abs() < 1e-12);
        let s = probe(&["probe", "abs", "--what", "d2", "--at", "0", "--v", "1", "--w", "1"]);
        let last = s.lines().last().unwrap();
        assert!(last.starts_with("estimate,") && last.ends_with(",0"), "{last}");
        let s = probe(&["probe", "abs", "--what", "envelope", "--lambda", "1", "--at", "0.5"]);
        assert_eq!(s.lines().nth(1).unwrap(), "0.5,1,0,0.125,0.5");
    }

    #[test]
    fn zoo_show() {
        let mut buf = Vec::new();
        cmd_zoo(&ZooCommand::Show { name: "neg_abs".into() }, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("truth: not weakly convex"));
    }
}
