use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bergman_core::envelope::{envelope_ratio, envelope_samples, write_envelope_csv};
use bergman_core::kernels::{mehler_kernel, weight_u, BoundSpec};
use bergman_core::quadrature::{gauss_hermite_rule, GridLayout, PlaneGrid};
use bergman_core::semigroup::{calibrate_weight, hermite_grid, semigroup_apply, semigroup_image, Mode, SemigroupOptions};
use bergman_core::special::{
    intertwine_check, special_gram, special_grid, SignConvention, TwistedFunction,
};
use bergman_core::specfun::{ComplexPoint, MultiIndex};
use bergman_core::spectral::TestFunction;
use bergman_core::stft::{bridge_residual, gauss_stft, pw_envelope};
use bergman_core::suite::{run_suite, OutputFormat, SuiteConfig};
use bergman_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bergman", version, about = "Hermite semigroup transforms and their verification suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Suite configuration file (JSON)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write output here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Time parameter (repeat or comma-separate for lists)
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
    /// Dimension
    #[arg(long)]
    n: Option<usize>,
    /// Hermite truncation order
    #[arg(long = "N")]
    order: Option<u32>,
    /// Gauss-Hermite order
    #[arg(long)]
    quad: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Spectral,
    Kernel,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    SchwartzImage,
    SobolevEmbed,
    Tempered,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the weight constant from the diagonal integrals of the Hermite basis
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Largest basis order used
        #[arg(long, default_value_t = 4)]
        max_order: u32,
    },
    /// Evaluate e^{-tH} f at complex points
    Transform {
        #[command(flatten)]
        common: Common,
        /// Test function, e.g. hermite:2, gaussian:1, dirac:0.5, bump:1, poly:1:1,0,-0.5
        #[arg(long, default_value = "hermite:0")]
        f: String,
        /// Point coordinate as re,im (repeat per coordinate)
        #[arg(long = "z", allow_hyphen_values = true)]
        z: Vec<String>,
        #[arg(long, value_enum, default_value = "spectral")]
        mode: ModeArg,
    },
    /// Evaluate the Mehler kernel and the weight at a pair of points
    Kernels {
        #[command(flatten)]
        common: Common,
        #[arg(long = "z", allow_hyphen_values = true)]
        z: Vec<String>,
        #[arg(long = "w", allow_hyphen_values = true)]
        w: Vec<String>,
    },
    /// Scan |e^{-tH} f|^2 against a growth bound
    Envelope {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "hermite:0")]
        f: String,
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long, value_enum, default_value = "schwartz-image")]
        bound: BoundArg,
        /// Box as x_min,x_max,y_min,y_max
        #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
        bbox: Vec<f64>,
        #[arg(long)]
        res: Option<usize>,
    },
    /// Special Hermite weight calibration and the intertwining sign
    Special {
        #[command(flatten)]
        common: Common,
        /// Grid nodes per real axis of C^2
        #[arg(long, default_value_t = 56)]
        res: usize,
    },
    /// Evaluate the Gaussian-window transform T_a f, or scan its growth
    Stft {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "hermite:0")]
        f: String,
        #[arg(long, default_value_t = 2.0)]
        a: f64,
        /// Window constant
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long = "z", allow_hyphen_values = true)]
        z: Vec<String>,
        /// Scan |T_a f| against (1+|z|^2)^m e^{y^2/(2a)} instead of evaluating
        #[arg(long)]
        envelope: bool,
        #[arg(long, default_value_t = 0)]
        m: u32,
    },
    /// Compare e^{-tH} f with its T_a form at seeded points
    Bridge {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "hermite:0")]
        f: String,
    },
    /// Run the verification suite
    Suite {
        #[command(flatten)]
        common: Common,
    },
}

/// Failure kinds mapped to exit codes.
enum Failure {
    Usage(String),
    Runtime(String),
    /// Stdout was closed early (e.g. piped into `head`).
    Closed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Parse(_) | Error::DimensionMismatch { .. } => {
                Failure::Usage(e.to_string())
            }
            Error::Io(io) => io.into(),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            Failure::Closed
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = Result<bool, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_list(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| usage(format!("not a number: {v:?}"))))
        .collect()
}

/// `hermite:K[,K..]`, `gaussian:A`, `dirac:X[,X..]`, `bump:R`, `poly:A:C0,C1,..`.
fn parse_function(spec: &str, n: usize) -> Result<TestFunction, Failure> {
    let mut parts = spec.splitn(2, ':');
    let kind = parts.next().unwrap_or_default();
    let rest = parts.next().ok_or_else(|| usage(format!("function spec {spec:?} needs parameters")))?;
    let f = match kind {
        "hermite" => {
            let ks = rest
                .split(',')
                .map(|v| v.trim().parse::<u32>().map_err(|_| usage(format!("bad index {v:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            TestFunction::hermite(MultiIndex::new(ks))
        }
        "gaussian" => TestFunction::gaussian(parse_list(rest)?[0], n)?,
        "dirac" => TestFunction::dirac(parse_list(rest)?)?,
        "bump" => TestFunction::bump(parse_list(rest)?[0], n)?,
        "poly" => {
            let (a, coeffs) = rest
                .split_once(':')
                .ok_or_else(|| usage("poly spec is poly:A:C0,C1,..."))?;
            let a = parse_list(a)?[0];
            let terms = parse_list(coeffs)?
                .into_iter()
                .enumerate()
                .map(|(k, c)| (MultiIndex::single(k as u32), c))
                .collect();
            TestFunction::poly_gaussian(terms, a)?
        }
        _ => return Err(usage(format!("unknown function kind {kind:?}"))),
    };
    f.validate()?;
    Ok(f)
}

fn parse_point(coords: &[String], n: usize) -> Result<ComplexPoint, Failure> {
    if coords.is_empty() {
        return Ok(ComplexPoint::origin(n));
    }
    let v = coords
        .iter()
        .map(|s| match parse_list(s)?[..] {
            [re] => Ok(Complex64::new(re, 0.0)),
            [re, im] => Ok(Complex64::new(re, im)),
            _ => Err(usage(format!("point coordinate {s:?} must be re or re,im"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComplexPoint::new(v))
}

fn load_config(common: &Common) -> Result<SuiteConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            SuiteConfig::from_json(&text)?
        }
        None => SuiteConfig::default(),
    };
    if !common.t.is_empty() {
        cfg.t = common.t.clone();
    }
    if let Some(n) = common.n {
        cfg.n = n;
    }
    if let Some(o) = common.order {
        cfg.order = o;
    }
    if let Some(q) = common.quad {
        cfg.quad = q;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(f) = common.format {
        cfg.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn first_t(common: &Common, default: f64) -> f64 {
    common.t.first().copied().unwrap_or(default)
}

fn dim(common: &Common) -> usize {
    common.n.unwrap_or(1)
}

fn options(common: &Common, n: usize) -> Result<SemigroupOptions, Failure> {
    let mut o = SemigroupOptions::for_dim(n)?;
    if let Some(order) = common.order {
        o.order = order;
    }
    if let Some(q) = common.quad {
        o.rule = gauss_hermite_rule(q)?;
    }
    Ok(o)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(common: &Common, v: &Value) -> Result<(), Failure> {
    let mut w = open_out(common.out.as_deref())?;
    writeln!(w, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn complex_json(c: Complex64) -> Value {
    json!({"re": c.re, "im": c.im})
}

fn cmd_calibrate(common: &Common, max_order: u32) -> CmdResult {
    let n = dim(common);
    let alphas = MultiIndex::graded(n, max_order);
    let ts = if common.t.is_empty() { vec![0.3, 0.5] } else { common.t.clone() };
    let mut out = Vec::new();
    for t in ts {
        let grid = hermite_grid(t, n, 2 * max_order, if n == 1 { 128 } else { 40 })?;
        let cal = calibrate_weight(t, n, &alphas, &grid)?;
        out.push(serde_json::to_value(&cal)?);
    }
    emit_json(common, &json!({"calibrations": out}))?;
    Ok(true)
}

fn cmd_transform(common: &Common, f: &str, z: &[String], mode: ModeArg) -> CmdResult {
    let n = dim(common);
    let f = parse_function(f, n)?;
    let z = parse_point(z, f.dim())?;
    let t = first_t(common, 0.3);
    let mode = match mode {
        ModeArg::Spectral => Mode::Spectral,
        ModeArg::Kernel => Mode::Kernel,
    };
    let v = semigroup_apply(&f, t, mode, &z, &options(common, f.dim())?)?;
    emit_json(common, &json!({"t": t, "value": complex_json(v)}))?;
    Ok(true)
}

fn cmd_kernels(common: &Common, z: &[String], w: &[String]) -> CmdResult {
    let n = dim(common);
    let z = parse_point(z, n)?;
    let w = parse_point(w, n)?;
    let t = first_t(common, 0.5);
    let k = mehler_kernel(t, &z, &w)?;
    let u = weight_u(t, &z)?;
    emit_json(common, &json!({"t": t, "mehler": complex_json(k), "weight_u": u}))?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_envelope(common: &Common, f: &str, m: u32, bound: BoundArg, bbox: &[f64], res: Option<usize>) -> CmdResult {
    let cfg = load_config(common)?;
    let f = parse_function(f, 1)?;
    let t = first_t(common, 0.3);
    let b = match bbox {
        [] => cfg.grid.bbox,
        [a, b, c, d] => [*a, *b, *c, *d],
        _ => return Err(usage("--box takes x_min,x_max,y_min,y_max")),
    };
    let grid = PlaneGrid::new(vec![b], res.unwrap_or(cfg.grid.res), GridLayout::Uniform)?;
    let bound = match bound {
        BoundArg::SchwartzImage => BoundSpec::SchwartzImage { t, m },
        BoundArg::SobolevEmbed => BoundSpec::SobolevEmbed { t, m },
        BoundArg::Tempered => BoundSpec::Tempered { t, m },
    };
    let handle = semigroup_image(&f, t, Mode::Spectral, &options(common, 1)?)?;
    let csv = matches!(common.format, Some(Format::Csv))
        || common
            .out
            .as_ref()
            .is_some_and(|p| p.extension().is_some_and(|e| e == "csv"));
    if csv {
        let samples = envelope_samples(&handle, &bound, &grid)?;
        write_envelope_csv(&samples, open_out(common.out.as_deref())?)?;
        return Ok(true);
    }
    let r = envelope_ratio(&handle, &bound, &grid)?;
    emit_json(common, &serde_json::to_value(&r)?)?;
    Ok(r.is_finite())
}

fn cmd_special(common: &Common, res: usize) -> CmdResult {
    let t = first_t(common, 0.4);
    let grid = special_grid(t, 8, res)?;
    let pairs = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let g = special_gram(t, &pairs, &[0], &grid)?;
    let kappa = (2.0 * t).exp() / g.get(0, 0, 0).re;
    let iso: Vec<Value> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let v = kappa * g.get(0, i, i).re * (-2.0 * (2.0 * b as f64 + 1.0) * t).exp();
            json!({"alpha": a, "beta": b, "norm_ratio": v})
        })
        .collect();
    let rule = gauss_hermite_rule(common.quad.unwrap_or(64))?;
    let points = vec![
        vec![Complex64::new(0.3, 0.2), Complex64::new(-0.4, 0.5)],
        vec![Complex64::new(-0.8, -0.3), Complex64::new(0.6, 0.1)],
    ];
    let r = intertwine_check(&TwistedFunction::Gaussian { a: 1.0, dim: 1 }, t, 0, &points, &rule)?;
    let passing: Vec<SignConvention> = r.passing(1e-6);
    emit_json(
        common,
        &json!({"t": t, "kappa_star": kappa, "isometry": iso, "intertwining": r, "passing_sign": passing}),
    )?;
    Ok(passing.len() == 1)
}

#[allow(clippy::too_many_arguments)]
fn cmd_stft(common: &Common, f: &str, a: f64, c: f64, z: &[String], envelope: bool, m: u32) -> CmdResult {
    let f = parse_function(f, dim(common))?;
    let rule = gauss_hermite_rule(common.quad.unwrap_or(128))?;
    if envelope {
        let grid = PlaneGrid::new(vec![[-4.0, 4.0, -4.0, 4.0]], 41, GridLayout::Uniform)?;
        let r = pw_envelope(&f, a, m, &grid, &rule)?;
        emit_json(common, &serde_json::to_value(&r)?)?;
        return Ok(r.is_finite());
    }
    let z = parse_point(z, f.dim())?;
    let v = gauss_stft(&f, a, &z, c, &rule)?;
    emit_json(common, &json!({"a": a, "c": c, "value": complex_json(v)}))?;
    Ok(true)
}

fn cmd_bridge(common: &Common, f: &str) -> CmdResult {
    let f = parse_function(f, 1)?;
    let t = first_t(common, 0.4);
    let points: Vec<ComplexPoint> = (0..10)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / 10.0;
            ComplexPoint::new(vec![Complex64::from_polar(0.2 * (k + 1) as f64, th)])
        })
        .collect();
    let r = bridge_residual(&f, t, &points, &options(common, 1)?)?;
    emit_json(common, &serde_json::to_value(&r)?)?;
    Ok(r.residual <= 1e-6)
}

fn cmd_suite(common: &Common) -> CmdResult {
    let cfg = load_config(common)?;
    let report = run_suite(&cfg)?;
    let mut w = open_out(cfg.out.as_deref())?;
    match cfg.format {
        OutputFormat::Json => writeln!(w, "{}", report.to_json()?)?,
        OutputFormat::Csv => report.write_csv(&mut w)?,
    }
    w.flush()?;
    drop(w);
    if cfg.out.is_some() {
        for c in &report.checks {
            let status = serde_json::to_value(c.status)?;
            println!("{:<28} {}", c.name, status.as_str().unwrap_or_default());
        }
    }
    eprintln!("{} passed, {} failed, {} skipped", report.summary.pass, report.summary.fail, report.summary.skipped);
    Ok(report.all_passed())
}

fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::Calibrate { common, max_order } => cmd_calibrate(common, *max_order),
        Command::Transform { common, f, z, mode } => cmd_transform(common, f, z, *mode),
        Command::Kernels { common, z, w } => cmd_kernels(common, z, w),
        Command::Envelope {
            common,
            f,
            m,
            bound,
            bbox,
            res,
        } => cmd_envelope(common, f, *m, *bound, bbox, *res),
        Command::Special { common, res } => cmd_special(common, *res),
        Command::Stft {
            common,
            f,
            a,
            c,
            z,
            envelope,
            m,
        } => cmd_stft(common, f, *a, *c, z, *envelope, *m),
        Command::Bridge { common, f } => cmd_bridge(common, f),
        Command::Suite { common } => cmd_suite(common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Closed) => ExitCode::SUCCESS,
    }
}
