#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use mtfr::certify::{
    certify, pair_to_partial, quadratic_reduce, sample_points, uniform_ball, verify_identity_parts,
    verify_pair_identity, IdentityReport, IdentitySides,
};
use mtfr::certify_grid::{counterexample_alt1, verify_identity_grid_parts};
use mtfr::check::{
    beurling_sweep, field_shell_samples, gelfand_shilov_sweep, half_antidiagonal, hardy_fit,
    nazarov_bound, shell_samples, PolyRegressor, Shape, Source, UpReport, VerdictRule, Weight,
};
use mtfr::gaussian::{apply_word, conjugate, tensor, GeneralizedGaussian};
use mtfr::grid::{
    apply_word_grid, grid_scalar_rotation_word, hermite_function, partial_stft_grid, Axis, GridConfig,
    SampledField,
};
use mtfr::io;
use mtfr::linalg::{from_parts, RMat};
use mtfr::symplectic::{factor_to_word, pre_iwasawa, symplectic_residual, SymplecticMatrix};
use mtfr::{MtfrError, Tolerances};

const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Identity errors above this fail `verify`.
const DEFAULT_VERIFY_THRESHOLD: f64 = 1e-6;
/// Counterexample mass outside the predicted region above this fails.
const COUNTEREXAMPLE_BUDGET: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "mtfr", version, about = "Metaplectic time-frequency representations: factorizations, certificates and uncertainty-principle checks")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct GlobalOpts {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid as `POINTSxPOINTS...@EXTENT`, e.g. `256@16` or `256x256@16`.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Directory receiving output files (written atomically).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long = "tol-sympl", global = true)]
    tol_sympl: Option<f64>,
    #[arg(long = "tol-unit", global = true)]
    tol_unit: Option<f64>,
    #[arg(long = "tol-inv", global = true)]
    tol_inv: Option<f64>,
    #[arg(long = "tol-recon", global = true)]
    tol_recon: Option<f64>,
    #[arg(long = "tol-sym", global = true)]
    tol_sym: Option<f64>,
    #[arg(long = "tol-blk", global = true)]
    tol_blk: Option<f64>,
    #[arg(long = "tol-blk-warn", global = true)]
    tol_blk_warn: Option<f64>,
    #[arg(long = "tol-rank", global = true)]
    tol_rank: Option<f64>,
    #[arg(long = "tol-cluster", global = true)]
    tol_cluster: Option<f64>,
    #[arg(long = "tol-cond-max", global = true)]
    tol_cond_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Bin,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    tolerances: Option<Tolerances>,
    seed: Option<u64>,
    grid: Option<String>,
    out: Option<PathBuf>,
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-Iwasawa decomposition and generator word of a symplectic matrix.
    Factor { matrix: PathBuf },
    /// Alternative I/II certificate of a matrix in Sp(4d).
    Classify { matrix: PathBuf },
    /// Re-verify a certificate on Gaussian inputs or sampled fields.
    Verify(VerifyArgs),
    /// Uncertainty-principle condition checks.
    #[command(subcommand)]
    Check(CheckKind),
    /// Compactly supported representation for an Alternative I certificate.
    Counterexample(CounterexampleArgs),
    /// Reduce a pair (f, R_V f), or a quadratic pair (V1, V2), to a partial Fourier transform.
    Pair { input: PathBuf },
}

#[derive(Args)]
struct VerifyArgs {
    certificate: PathBuf,
    /// Seed for random generalized Gaussians f, g.
    #[arg(long, conflicts_with = "fields")]
    gaussians: Option<u64>,
    /// Binary field files for f and g (d = 1).
    #[arg(long, num_args = 2, value_names = ["F", "G"])]
    fields: Option<Vec<PathBuf>>,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = DEFAULT_VERIFY_THRESHOLD)]
    threshold: f64,
    /// Radius of the ball of random evaluation points.
    #[arg(long, default_value_t = 4.0)]
    radius: f64,
}

#[derive(Args)]
struct SourceArgs {
    /// `vphiphi`, `gauss:A`, `hermite:N` or `tfr` (with --cert).
    #[arg(long, default_value = "vphiphi")]
    source: String,
    /// Certificate JSON for the `tfr` source; Gaussians come from --seed.
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Half-dimension for the `gauss:A` source.
    #[arg(long, default_value_t = 1)]
    d: usize,
}

#[derive(Subcommand)]
enum CheckKind {
    Beurling {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long = "n", default_value_t = 0.0)]
        n_pow: f64,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,6,8")]
        radii: Vec<f64>,
        /// Midpoint cell side for closed-form sources.
        #[arg(long)]
        cell: Option<f64>,
    },
    Hardy {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5,3,3.5,4")]
        shells: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        per_shell: usize,
        #[arg(long, value_enum, default_value_t = Regressor::LogNorm)]
        regressor: Regressor,
    },
    Gs {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        radii: Vec<f64>,
        #[arg(long)]
        cell: Option<f64>,
    },
    /// d = 1 pair (f, R_theta f) on the grid with S = [-s, s], T = [-t, t].
    Nazarov {
        /// `gauss:A` or `hermite:N`.
        #[arg(long, default_value = "gauss:1")]
        signal: String,
        /// Rotation angle of the second operator; sin(angle) is Im U.
        #[arg(long, default_value_t = PI / 2.0)]
        angle: f64,
        #[arg(long, default_value_t = 2.0)]
        s_half: f64,
        #[arg(long, default_value_t = 2.0)]
        t_half: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = mtfr::check::MEAN_WIDTH_SAMPLES)]
        width_samples: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Regressor {
    LogNorm,
    LogOnePlusNorm,
}

#[derive(Args)]
struct CounterexampleArgs {
    certificate: PathBuf,
    /// Half-width of the bump support.
    #[arg(long, default_value_t = 2.0)]
    half_width: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<MtfrError> for Failure {
    fn from(e: MtfrError) -> Self {
        let code = if e.is_internal() { EXIT_INTERNAL } else { EXIT_INPUT };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_INPUT, message: msg.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct GridSpec {
    points: Vec<usize>,
    extent: f64,
}

impl GridSpec {
    fn parse(s: &str) -> CliResult<Self> {
        let (pts, ext) = s
            .split_once('@')
            .ok_or_else(|| input_error(format!("grid \"{s}\" must look like 256x256@16")))?;
        let extent: f64 = ext.trim().parse().map_err(|_| input_error(format!("bad grid extent \"{ext}\"")))?;
        let points = pts
            .split(['x', 'X', '\u{00d7}', ','])
            .map(|p| p.trim().parse::<usize>().map_err(|_| input_error(format!("bad grid size \"{p}\""))))
            .collect::<CliResult<Vec<_>>>()?;
        for &p in &points {
            Axis::new(p, extent)?;
        }
        Ok(Self { points, extent })
    }

    fn axis(&self) -> CliResult<Axis> {
        Ok(Axis::new(self.points[0], self.extent)?)
    }
}

struct Settings {
    tol: Tolerances,
    seed: u64,
    grid: GridSpec,
    out: Option<PathBuf>,
    format: Format,
}

fn settings(g: &GlobalOpts) -> CliResult<Settings> {
    let cfg: RunConfig = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| input_error(format!("config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let mut tol = cfg.tolerances.unwrap_or_default();
    let overrides = [
        (g.tol_sympl, &mut tol.sympl),
        (g.tol_unit, &mut tol.unit),
        (g.tol_inv, &mut tol.inv),
        (g.tol_recon, &mut tol.recon),
        (g.tol_sym, &mut tol.sym),
        (g.tol_blk, &mut tol.blk),
        (g.tol_blk_warn, &mut tol.blk_warn),
        (g.tol_rank, &mut tol.rank),
        (g.tol_cluster, &mut tol.cluster),
        (g.tol_cond_max, &mut tol.cond_max),
    ];
    for (value, slot) in overrides {
        if let Some(v) = value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(input_error(format!("tolerances must be positive and finite, got {v}")));
            }
            *slot = v;
        }
    }
    let grid = g.grid.clone().or(cfg.grid).unwrap_or_else(|| "256@16".into());
    Ok(Settings {
        tol,
        seed: g.seed.or(cfg.seed).unwrap_or(0),
        grid: GridSpec::parse(&grid)?,
        out: g.out.clone().or(cfg.out),
        format: g.format.or(cfg.format).unwrap_or(Format::Json),
    })
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input_error(format!("{}: JSON parse error: {e}", path.display())))
}

fn read_field_file(path: &Path) -> CliResult<SampledField> {
    let bytes = fs::read(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    Ok(io::read_field(&mut bytes.as_slice())?)
}

fn write_out(s: &Settings, name: &str, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = &s.out {
        let path = dir.join(name);
        io::write_atomic(&path, bytes)
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Prints `value` as JSON (or `csv` when given and requested) and writes
/// `name.json` under `--out`.
fn emit(s: &Settings, name: &str, value: &Value, csv: Option<String>) -> CliResult<()> {
    let text = io::to_json_string(value)?;
    write_out(s, &format!("{name}.json"), text.as_bytes())?;
    if let Some(csv) = &csv {
        write_out(s, &format!("{name}.csv"), csv.as_bytes())?;
    }
    match (s.format, csv) {
        (Format::Csv, Some(csv)) => print!("{csv}"),
        _ => println!("{text}"),
    }
    Ok(())
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn read_symplectic(path: &Path, tol: &Tolerances) -> CliResult<SymplecticMatrix> {
    let m = io::matrix_from_value(&read_json(path)?)?;
    if m.nrows() % 2 != 0 {
        return Err(input_error(format!("matrix size {} is odd", m.nrows())));
    }
    SymplecticMatrix::new(m.clone(), tol).map_err(|e| {
        input_error(format!("{e}; symplectic residual ||M^t J M - J||_F = {:.3e}", symplectic_residual(&m)))
    })
}

fn cmd_factor(s: &Settings, path: &Path) -> CliResult<()> {
    let m = read_symplectic(path, &s.tol)?;
    let pre = pre_iwasawa(&m)?;
    let word = factor_to_word(&m, &s.tol)?;
    let norm = m.matrix().norm();
    let value = json!({
        "n": m.n(),
        "input_residual": m.residual(),
        "pre_iwasawa": {
            "Q": io::matrix_value(&pre.q),
            "L": io::matrix_value(&pre.l),
            "U": io::complex_matrix_value(&pre.u),
        },
        "reconstruction_error": (pre.reconstruct() - m.matrix()).norm() / norm,
        "word": io::word_value(&word),
        "word_error": (word.matrix() - m.matrix()).norm() / norm,
    });
    emit(s, "factor", &value, None)
}

fn cmd_classify(s: &Settings, path: &Path) -> CliResult<()> {
    let m = read_symplectic(path, &s.tol)?;
    if m.n() % 2 != 0 {
        return Err(input_error(format!("half-dimension {} is odd; expected a matrix in Sp(4d)", m.n())));
    }
    let cert = certify(&m, &s.tol)?;
    warn_all(&cert.warnings);
    emit(s, "certificate", &io::certificate_value(&cert), None)
}

fn report_value(kind: &str, path: &str, rep: &IdentityReport, threshold: f64) -> Value {
    json!({
        "kind": kind,
        "path": path,
        "max_rel_error": rep.max_rel_error,
        "worst_point": rep.worst_point,
        "worst_lhs": rep.worst_lhs,
        "worst_rhs": rep.worst_rhs,
        "points": rep.points,
        "threshold": threshold,
        "pass": rep.max_rel_error <= threshold,
    })
}

fn cmd_verify(s: &Settings, a: &VerifyArgs) -> CliResult<()> {
    if a.points == 0 {
        return Err(input_error("--points must be at least 1"));
    }
    if !(a.threshold > 0.0) || !(a.radius > 0.0) {
        return Err(input_error("--threshold and --radius must be positive"));
    }
    let v = read_json(&a.certificate)?;
    let pair = v.get("kind").and_then(Value::as_str) == Some("pair");
    let (kind, path, rep) = match (&a.fields, pair) {
        (Some(paths), false) => {
            let parts = io::reduction_parts_from_value(&v, &s.tol)?;
            let f = read_field_file(&paths[0])?;
            let g = read_field_file(&paths[1])?;
            let ax = f.axes[0];
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            // random grid points in the central quarter of the plane, away
            // from the tails where roundoff dominates the ratio
            let (lo, hi) = (3 * ax.points / 8, 5 * ax.points / 8);
            let points: Vec<Vec<f64>> = (0..a.points)
                .map(|_| vec![ax.coord(rng.gen_range(lo..hi)), ax.coord(rng.gen_range(lo..hi))])
                .collect();
            let rep = verify_identity_grid_parts(&parts, &f, &g, &points, &GridConfig::default(), &s.tol)?;
            ("identity", "grid", rep)
        }
        (Some(_), true) => return Err(input_error("pair certificates are verified on Gaussians only")),
        (None, false) => {
            let parts = io::reduction_parts_from_value(&v, &s.tol)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.gaussians.unwrap_or(s.seed));
            let f = GeneralizedGaussian::random(&mut rng, parts.d);
            let g = GeneralizedGaussian::random(&mut rng, parts.d);
            let sides = IdentitySides::from_parts(&parts, &f, &g, &s.tol)?;
            let points = sample_points(&mut rng, &sides.tfr, a.points, a.radius);
            ("identity", "gaussian", verify_identity_parts(&parts, &f, &g, &points, &s.tol)?)
        }
        (None, true) => {
            let cert = io::pair_certificate_from_value(&v)?;
            let d = cert.v.nrows();
            let mut rng = ChaCha8Rng::seed_from_u64(a.gaussians.unwrap_or(s.seed));
            let f = GeneralizedGaussian::random(&mut rng, d);
            let points: Vec<Vec<f64>> = (0..a.points).map(|_| uniform_ball(&mut rng, 2 * d, a.radius)).collect();
            ("pair", "gaussian", verify_pair_identity(&cert, &f, &points, &s.tol)?)
        }
    };
    let value = report_value(kind, path, &rep, a.threshold);
    emit(s, "verify", &value, None)?;
    if rep.max_rel_error <= a.threshold {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: format!(
                "identity error {:.3e} exceeds {:.1e} at {:?} (lhs {:.6e}, rhs {:.6e})",
                rep.max_rel_error, a.threshold, rep.worst_point, rep.worst_lhs, rep.worst_rhs
            ),
        })
    }
}

type LnModulus = Box<dyn Fn(&[f64]) -> f64 + Sync>;

enum Loaded {
    Closed { ln_w: LnModulus, dim: usize, omega: RMat, m: RMat },
    Field { field: SampledField, omega: RMat, m: RMat },
}

fn parse_param<T: std::str::FromStr>(spec: &str, prefix: &str) -> CliResult<Option<T>> {
    match spec.strip_prefix(prefix) {
        Some(rest) => rest
            .parse()
            .map(Some)
            .map_err(|_| input_error(format!("bad parameter in source \"{spec}\""))),
        None => Ok(None),
    }
}

fn signal_field(spec: &str, axis: Axis) -> CliResult<SampledField> {
    if let Some(a) = parse_param::<f64>(spec, "gauss:")? {
        if !(a > 0.0) {
            return Err(input_error("gauss:A needs A > 0"));
        }
        return Ok(SampledField::from_fn(vec![axis], move |x| Complex64::new((-PI * a * x[0] * x[0]).exp(), 0.0)));
    }
    if let Some(n) = parse_param::<usize>(spec, "hermite:")? {
        return Ok(SampledField::from_fn(vec![axis], move |x| Complex64::new(hermite_function(n, x[0]), 0.0)));
    }
    Err(input_error(format!("unknown signal \"{spec}\"; expected gauss:A or hermite:N")))
}

fn load_source(s: &Settings, src: &SourceArgs) -> CliResult<Loaded> {
    let spec = src.source.as_str();
    if spec == "vphiphi" {
        return Ok(Loaded::Closed {
            ln_w: Box::new(|x: &[f64]| -PI * (x[0] * x[0] + x[1] * x[1]) / 2.0),
            dim: 2,
            omega: RMat::identity(2, 2),
            m: half_antidiagonal(1),
        });
    }
    if let Some(a) = parse_param::<f64>(spec, "gauss:")? {
        if !(a > 0.0) || src.d == 0 {
            return Err(input_error("gauss:A needs A > 0 and d >= 1"));
        }
        let dim = 2 * src.d;
        return Ok(Loaded::Closed {
            ln_w: Box::new(move |x: &[f64]| -PI * a * x.iter().map(|t| t * t).sum::<f64>()),
            dim,
            omega: RMat::identity(dim, dim),
            m: half_antidiagonal(src.d),
        });
    }
    if spec.starts_with("hermite:") {
        let axis = s.grid.axis()?;
        let h = signal_field(spec, axis)?;
        let phi = signal_field("gauss:1", axis)?;
        let mut phi = phi;
        phi.scale(Complex64::new(2f64.powf(0.25), 0.0));
        let field = partial_stft_grid(&h, &phi, 1, &GridConfig::default())?;
        return Ok(Loaded::Field { field, omega: RMat::identity(2, 2), m: half_antidiagonal(1) });
    }
    if spec == "tfr" {
        let path = src.cert.as_ref().ok_or_else(|| input_error("source tfr needs --cert"))?;
        let v = read_json(path)?;
        let summary = io::certificate_summary(&v)?;
        let bold = SymplecticMatrix::new(
            summary.input.ok_or_else(|| input_error("certificate without input matrix"))?,
            &s.tol,
        )?;
        let d = summary.d;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let f = GeneralizedGaussian::random(&mut rng, d);
        let g = GeneralizedGaussian::random(&mut rng, d);
        let word = factor_to_word(&bold, &s.tol)?;
        let w = apply_word(&tensor(&f, &conjugate(&g)), &word, &s.tol)?;
        let omega = summary.omega.unwrap_or_else(|| RMat::identity(2 * d, 2 * d));
        let m = match Weight::beurling_default(&omega, 0.0)? {
            Weight::Beurling { m, .. } => m,
            _ => unreachable!("beurling_default builds a Beurling weight"),
        };
        return Ok(Loaded::Closed { ln_w: Box::new(move |x: &[f64]| w.ln_abs(x)), dim: 2 * d, omega, m });
    }
    Err(input_error(format!("unknown source \"{spec}\"; expected vphiphi, gauss:A, hermite:N or tfr")))
}

impl Loaded {
    fn source(&self, cell: Option<f64>) -> Source<'_> {
        match self {
            Loaded::Closed { ln_w, dim, .. } => Source::Evaluator { ln_w: ln_w.as_ref(), dim: *dim, h: cell },
            Loaded::Field { field, .. } => Source::Field(field),
        }
    }

    fn weight_matrix(&self) -> &RMat {
        match self {
            Loaded::Closed { m, .. } | Loaded::Field { m, .. } => m,
        }
    }

    fn omega(&self) -> &RMat {
        match self {
            Loaded::Closed { omega, .. } | Loaded::Field { omega, .. } => omega,
        }
    }
}

fn up_value(rep: &UpReport, source: &str) -> CliResult<Value> {
    let mut v = serde_json::to_value(rep).map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })?;
    v["source"] = json!(source);
    Ok(v)
}

fn cmd_check(s: &Settings, kind: &CheckKind) -> CliResult<()> {
    let rule = VerdictRule::default();
    match kind {
        CheckKind::Beurling { src, n_pow, radii, cell } => {
            let loaded = load_source(s, src)?;
            let rep = beurling_sweep(&loaded.source(*cell), loaded.weight_matrix(), *n_pow, radii, &rule)?;
            emit(s, "beurling", &up_value(&rep, &src.source)?, Some(io::sweep_csv(&rep.sweep)))
        }
        CheckKind::Gs { src, p, alpha, beta, radii, cell } => {
            let loaded = load_source(s, src)?;
            let (x, w) = gelfand_shilov_sweep(&loaded.source(*cell), *p, *alpha, *beta, radii, &rule)?;
            let value = json!({ "condition": "gelfand-shilov", "x": up_value(&x, &src.source)?, "w": up_value(&w, &src.source)? });
            let mut csv = String::from("# position weight\n");
            csv.push_str(&io::sweep_csv(&x.sweep));
            csv.push_str("# frequency weight\n");
            csv.push_str(&io::sweep_csv(&w.sweep));
            emit(s, "gelfand_shilov", &value, Some(csv))
        }
        CheckKind::Hardy { src, shells, per_shell, regressor } => {
            if shells.is_empty() || shells.iter().any(|r| !(*r > 0.0)) || *per_shell == 0 {
                return Err(input_error("shell radii must be positive and --per-shell at least 1"));
            }
            let loaded = load_source(s, src)?;
            let samples = match &loaded {
                Loaded::Closed { ln_w, dim, .. } => shell_samples(&|x: &[f64]| ln_w(x), *dim, shells, *per_shell, s.seed),
                Loaded::Field { field, .. } => {
                    let (lo, hi) = shells.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
                    field_shell_samples(field, lo, hi)
                }
            };
            let reg = match regressor {
                Regressor::LogNorm => PolyRegressor::LogNorm,
                Regressor::LogOnePlusNorm => PolyRegressor::LogOnePlusNorm,
            };
            let fit = hardy_fit(&samples, loaded.omega(), reg)?;
            let value = json!({
                "condition": "hardy",
                "source": src.source,
                "alpha": fit.alpha,
                "N": fit.n,
                "intercept": fit.intercept,
                "residual": fit.residual,
                "samples": fit.samples,
                "regressor": fit.regressor,
                "shells": shells,
                "Omega": io::matrix_value(loaded.omega()),
            });
            emit(s, "hardy", &value, None)
        }
        CheckKind::Nazarov { signal, angle, s_half, t_half, c, width_samples } => {
            if !(*s_half > 0.0 && *t_half > 0.0 && *c > 0.0) {
                return Err(input_error("--s-half, --t-half and --c must be positive"));
            }
            let axis = s.grid.axis()?;
            let mut f = signal_field(signal, axis)?;
            let norm = f.l2_norm();
            if norm > 0.0 {
                f.scale(Complex64::new(1.0 / norm, 0.0));
            }
            let im_u = RMat::from_element(1, 1, angle.sin());
            if angle.sin().abs() <= s.tol.rank {
                return Err(input_error(format!(
                    "hypothesis violated: Im U = sin({angle}) is not invertible"
                )));
            }
            let cfg = GridConfig::default();
            let a2f = apply_word_grid(&f, &grid_scalar_rotation_word(*angle), &cfg)?;
            warn_all(&a2f.warnings);
            let eye = RMat::identity(1, 1);
            let rep = nazarov_bound(
                &f,
                &a2f.field,
                &Shape::cube(1, *s_half),
                &Shape::cube(1, *t_half),
                &eye,
                &eye,
                &im_u,
                *c,
                *width_samples,
                s.seed,
            )?;
            let mut value = serde_json::to_value(&rep).map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })?;
            value["condition"] = json!("nazarov");
            value["signal"] = json!(signal);
            value["angle"] = json!(angle);
            value["holds"] = json!(rep.rhs >= rep.lhs);
            emit(s, "nazarov", &value, None)
        }
    }
}

fn cmd_counterexample(s: &Settings, a: &CounterexampleArgs) -> CliResult<()> {
    let v = read_json(&a.certificate)?;
    let summary = io::certificate_summary(&v)?;
    if summary.alternative != "I" {
        return Err(input_error(format!(
            "counterexample needs an Alternative I certificate, found {}",
            summary.alternative
        )));
    }
    let bold = SymplecticMatrix::new(
        summary.input.ok_or_else(|| input_error("certificate without input matrix"))?,
        &s.tol,
    )?;
    let cert = certify(&bold, &s.tol)?;
    let axis = s.grid.axis()?;
    let ce = counterexample_alt1(&cert, axis.points, axis.extent, a.half_width, &GridConfig::default())?;
    warn_all(&ce.warnings);
    let files = [("f", &ce.f), ("g", &ce.g), ("tfr", &ce.tfr)];
    for (name, field) in files {
        match s.format {
            Format::Csv => write_out(s, &format!("{name}.csv"), io::field_csv(field).as_bytes())?,
            _ => write_out(s, &format!("{name}.bin"), &io::field_bytes(field))?,
        }
    }
    let value = json!({
        "mass_outside": ce.mass_outside,
        "budget": COUNTEREXAMPLE_BUDGET,
        "region_map": io::matrix_value(&ce.region.map),
        "bump_box": ce.region.bounds.iter().map(|(lo, hi)| vec![*lo, *hi]).collect::<Vec<_>>(),
        "bounding_box": ce.region.bounding_box().iter().map(|(lo, hi)| vec![*lo, *hi]).collect::<Vec<_>>(),
        "norm_ratio_f": ce.norm_ratio_f,
        "norm_ratio_g": ce.norm_ratio_g,
        "grid": { "points": axis.points, "extent": axis.extent },
        "word": io::word_value(&ce.word),
        "warnings": ce.warnings,
    });
    let text = io::to_json_string(&value)?;
    write_out(s, "counterexample.json", text.as_bytes())?;
    println!("{text}");
    if ce.mass_outside > COUNTEREXAMPLE_BUDGET {
        return Err(Failure {
            code: EXIT_VERIFY,
            message: format!("mass outside the predicted region {:.3e} exceeds {:.0e}", ce.mass_outside, COUNTEREXAMPLE_BUDGET),
        });
    }
    Ok(())
}

fn cmd_pair(s: &Settings, path: &Path) -> CliResult<()> {
    let v = read_json(path)?;
    let (vm, reduction) = if let (Some(v1), Some(v2)) = (v.get("V1"), v.get("V2")) {
        let r = quadratic_reduce(&io::complex_matrix_from_value(v1)?, &io::complex_matrix_from_value(v2)?, &s.tol)?;
        (r.v.clone(), Some(r))
    } else {
        let m = io::complex_matrix_from_value(v.get("V").unwrap_or(&v))?;
        let z = RMat::zeros(m.nrows(), m.nrows());
        let r = quadratic_reduce(&m, &from_parts(&RMat::identity(m.nrows(), m.nrows()), &z), &s.tol)?;
        (m, Some(r))
    };
    if let Some(r) = &reduction {
        if r.real {
            return Err(input_error(format!(
                "V is real within tolerance (|Im V| = {:.3e}): the pair admits no uncertainty principle",
                r.imag_norm
            )));
        }
    }
    let cert = pair_to_partial(&vm, &s.tol)?;
    emit(s, "pair", &io::pair_certificate_value(&cert, reduction.as_ref()), None)
}

fn run(cli: Cli) -> CliResult<()> {
    let s = settings(&cli.global)?;
    if let Ok(t) = std::env::var("MTFR_THREADS") {
        let n: usize = t
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| input_error(format!("MTFR_THREADS must be a positive integer, got \"{t}\"")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: EXIT_INTERNAL, message: e.to_string() })?;
    }
    match &cli.command {
        Command::Factor { matrix } => cmd_factor(&s, matrix),
        Command::Classify { matrix } => cmd_classify(&s, matrix),
        Command::Verify(a) => cmd_verify(&s, a),
        Command::Check(kind) => cmd_check(&s, kind),
        Command::Counterexample(a) => cmd_counterexample(&s, a),
        Command::Pair { input } => cmd_pair(&s, input),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
