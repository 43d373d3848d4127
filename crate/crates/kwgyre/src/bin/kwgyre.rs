//! Command-line front end: existence analysis, gyre region
//! classification and sweeps, spectral solves, and replay checks of the
//! Kazdan–Warner residuals from exported files.
//!
//! Exit codes: 0 = existence (or sufficient condition / converged),
//! 1 = no solution, 2 = inconclusive or not converged, 64 = usage or
//! input error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use kwgyre::criteria::{self, CriteriaVerdict};
use kwgyre::grid::{build_grid, read_field_from_path, write_field_to_path, ScalarField, SphericalGrid};
use kwgyre::gyre::{self, GyreParams, RegionKind};
use kwgyre::harmonics::{synthesize, SpectralCoeffs};
use kwgyre::solver::{self, InitialGuess, SolverConfig};

const EXIT_EXISTS: u8 = 0;
const EXIT_NO_SOLUTION: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "kwgyre",
    about = "Existence analysis and spectral solving of \u{394}u = C \u{2212} h\u{b7}e^u on the sphere, \
             specialized to the ocean-gyre model",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridFlags {
    /// Number of Gauss–Legendre latitude rings
    #[arg(long, default_value_t = 64)]
    nlat: usize,
    /// Number of uniformly spaced longitudes
    #[arg(long, default_value_t = 128)]
    nlon: usize,
    /// Spectral truncation degree
    #[arg(long = "L", default_value_t = 63)]
    lmax: usize,
}

#[derive(Args, Clone)]
struct HSource {
    /// Read h from a `sphfield v1` file
    #[arg(long, conflicts_with = "h_expr")]
    h_file: Option<PathBuf>,
    /// Built-in h: `const:<v>`, `gyre:c=..,d=..,g=..,omega=..`,
    /// `harmonic:<l>,<m>`, or `file:<path>`
    #[arg(long)]
    h_expr: Option<String>,
}

#[derive(Args, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = 30)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
    /// Start Newton from u = 0 instead of the constraint-consistent
    /// constant
    #[arg(long, default_value_t = false)]
    zero_guess: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Classify existence for a candidate curvature h and constant C
    Analyze {
        #[command(flatten)]
        h: HSource,
        #[arg(long = "C", allow_negative_numbers = true)]
        c: f64,
        #[command(flatten)]
        grid: GridFlags,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify one point of the gyre parameter space
    GyreClassify {
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, allow_negative_numbers = true)]
        d: f64,
        #[arg(long, allow_negative_numbers = true)]
        g: f64,
        #[arg(long, allow_negative_numbers = true)]
        omega: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate gyre verdicts over a (C, \u{3d6}) rectangle as CSV
    GyreSweep {
        #[arg(long = "C-min", allow_negative_numbers = true)]
        c_min: f64,
        #[arg(long = "C-max", allow_negative_numbers = true)]
        c_max: f64,
        #[arg(long = "varpi-min", allow_negative_numbers = true)]
        varpi_min: f64,
        #[arg(long = "varpi-max", allow_negative_numbers = true)]
        varpi_max: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Sign carrier for c (only sign(cd) matters to the verdicts)
        #[arg(long = "c-sign", default_value_t = -1.0, allow_negative_numbers = true)]
        c_sign: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        d: f64,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Additionally render an SVG region map to this path
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Solve \u{394}u = C \u{2212} h\u{b7}e^u by spectral Newton iteration
    Solve {
        #[command(flatten)]
        h: HSource,
        #[arg(long = "C", allow_negative_numbers = true)]
        c: f64,
        #[command(flatten)]
        grid: GridFlags,
        #[command(flatten)]
        solver: SolverFlags,
        /// Export the solution field (`sphfield v1`) here
        #[arg(long)]
        out_field: Option<PathBuf>,
        /// Export the metadata JSON here (also printed to stdout)
        #[arg(long)]
        out_meta: Option<PathBuf>,
    },
    /// Solve the gyre model and report the stream function
    GyreSolve {
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, allow_negative_numbers = true)]
        d: f64,
        #[arg(long, allow_negative_numbers = true)]
        g: f64,
        #[arg(long, allow_negative_numbers = true)]
        omega: f64,
        #[arg(long = "L", default_value_t = 63)]
        lmax: usize,
        #[command(flatten)]
        solver: SolverFlags,
        /// Export \u{3c8} (`sphfield v1`) here
        #[arg(long)]
        out_field: Option<PathBuf>,
        /// Export the elliptic solution u here
        #[arg(long)]
        out_u: Option<PathBuf>,
        #[arg(long)]
        out_meta: Option<PathBuf>,
    },
    /// Recompute the Kazdan–Warner residuals of an exported solution
    CheckKw {
        /// Solution field u (`sphfield v1`)
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        h: HSource,
        #[arg(long = "C", allow_negative_numbers = true)]
        c: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version are not usage errors
            use clap::error::ErrorKind::*;
            if matches!(e.kind(), DisplayHelp | DisplayVersion) {
                let _ = e.print();
                return ExitCode::from(0);
            }
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: Cli) -> kwgyre::Result<u8> {
    match cli.command {
        Command::Analyze { h, c, grid, out } => analyze(h, c, grid, out),
        Command::GyreClassify { c, d, g, omega, out } => {
            let p = GyreParams::new(c, d, g, omega)?;
            let verdict = gyre::classify(&p)?;
            emit(out.as_deref(), &verdict.to_json())?;
            Ok(region_exit(verdict.verdict))
        }
        Command::GyreSweep {
            c_min,
            c_max,
            varpi_min,
            varpi_max,
            steps,
            c_sign,
            d,
            out,
            svg,
        } => {
            let cells = gyre::sweep(c_sign, d, (c_min, c_max), (varpi_min, varpi_max), steps)?;
            let mut csv = Vec::new();
            gyre::sweep_to_csv(&mut csv, &cells)?;
            emit_bytes(out.as_deref(), &csv)?;
            if let Some(svg_path) = svg {
                let mut buf = Vec::new();
                gyre::sweep_to_svg(&mut buf, &cells, steps)?;
                write_atomic(&svg_path, &buf)?;
            }
            Ok(EXIT_EXISTS)
        }
        Command::Solve {
            h,
            c,
            grid,
            solver,
            out_field,
            out_meta,
        } => {
            let (g, hf) = resolve_h(&h, &grid)?;
            let cfg = solver_config(&solver, grid.lmax, g.nlat())?;
            let sol = solver::solve(&hf, c, &cfg)?;
            if let Some(p) = out_field {
                write_field_to_path(&p, &sol.u)?;
            }
            let meta =
                serde_json::to_string_pretty(&sol.meta(c)).expect("meta serialization cannot fail");
            println!("{meta}");
            if let Some(p) = out_meta {
                write_atomic(&p, meta.as_bytes())?;
            }
            Ok(if sol.converged { EXIT_EXISTS } else { EXIT_INCONCLUSIVE })
        }
        Command::GyreSolve {
            c,
            d,
            g,
            omega,
            lmax,
            solver,
            out_field,
            out_u,
            out_meta,
        } => {
            let p = GyreParams::new(c, d, g, omega)?;
            let nlat = (lmax + 1).max(4);
            let cfg = solver_config(&solver, lmax, nlat)?;
            let sol = solver::gyre_solve(&p, &cfg)?;
            if let Some(path) = out_field {
                write_field_to_path(&path, &sol.psi)?;
            }
            if let Some(path) = out_u {
                write_field_to_path(&path, &sol.elliptic.u)?;
            }
            let mut meta = serde_json::to_value(sol.elliptic.meta(sol.c_value))
                .expect("meta serialization cannot fail");
            meta.as_object_mut()
                .expect("meta is an object")
                .insert("psi_residual_maxnorm".into(), sol.psi_residual_maxnorm.into());
            let meta = serde_json::to_string_pretty(&meta).expect("meta serialization cannot fail");
            println!("{meta}");
            if let Some(path) = out_meta {
                write_atomic(&path, meta.as_bytes())?;
            }
            Ok(if sol.elliptic.converged {
                EXIT_EXISTS
            } else {
                EXIT_INCONCLUSIVE
            })
        }
        Command::CheckKw { solution, h, c, out } => {
            let u = read_field_from_path(&solution)?;
            let grid_flags = GridFlags {
                nlat: u.grid().nlat(),
                nlon: u.grid().nlon(),
                lmax: u.grid().nlat() - 1,
            };
            let (_, hf) = resolve_h_on(&h, u.grid(), &grid_flags)?;
            let kw = criteria::kw_residuals(&u, &hf, c)?;
            let norm = kw.iter().map(|r| r * r).sum::<f64>().sqrt();
            let doc = format!(
                "{{\n  \"c_value\": {},\n  \"kw_residuals\": [{:.17e}, {:.17e}, {:.17e}],\n  \"kw_norm\": {:.17e}\n}}",
                c, kw[0], kw[1], kw[2], norm
            );
            emit(out.as_deref(), &doc)?;
            Ok(EXIT_EXISTS)
        }
    }
}

fn analyze(h: HSource, c: f64, grid: GridFlags, out: Option<PathBuf>) -> kwgyre::Result<u8> {
    if !c.is_finite() {
        return Err(kwgyre::Error::InvalidArgument("C must be finite".into()));
    }
    let (_, hf) = resolve_h(&h, &grid)?;
    let report = criteria::classify(&hf, c)?;
    emit(out.as_deref(), &report.to_json())?;
    Ok(match report.verdict {
        CriteriaVerdict::ExistsByLemma2
        | CriteriaVerdict::ExistsByLemma3
        | CriteriaVerdict::ExistsByLemma45
        | CriteriaVerdict::SufficientByThm1 => EXIT_EXISTS,
        CriteriaVerdict::NoSolution | CriteriaVerdict::NoSolutionKW => EXIT_NO_SOLUTION,
        CriteriaVerdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn region_exit(kind: RegionKind) -> u8 {
    match kind {
        RegionKind::Exists | RegionKind::ExistsSufficient => EXIT_EXISTS,
        RegionKind::NoSolution => EXIT_NO_SOLUTION,
        RegionKind::Unknown => EXIT_INCONCLUSIVE,
    }
}

fn solver_config(flags: &SolverFlags, lmax: usize, nlat: usize) -> kwgyre::Result<SolverConfig> {
    if lmax + 1 > nlat {
        return Err(kwgyre::Error::DegreeTooLarge { lmax, nlat });
    }
    Ok(SolverConfig {
        lmax,
        max_iters: flags.max_iters,
        tol: flags.tol,
        damping: flags.damping,
        initial_guess: if flags.zero_guess {
            InitialGuess::Zero
        } else {
            InitialGuess::Default
        },
    })
}

/// Materialize the h source on a fresh grid of the requested size.
fn resolve_h(src: &HSource, flags: &GridFlags) -> kwgyre::Result<(Arc<SphericalGrid>, ScalarField)> {
    if let Some(path) = &src.h_file {
        let f = read_field_from_path(path)?;
        let g = f.grid().clone();
        return Ok((g, f));
    }
    let grid = build_grid(flags.nlat, flags.nlon)?;
    resolve_h_on(src, &grid, flags)
}

/// Materialize the h source on an already constructed grid.
fn resolve_h_on(
    src: &HSource,
    grid: &Arc<SphericalGrid>,
    flags: &GridFlags,
) -> kwgyre::Result<(Arc<SphericalGrid>, ScalarField)> {
    match (&src.h_file, &src.h_expr) {
        (Some(path), None) => {
            let f = read_field_from_path(path)?;
            if !f.grid().same_grid(grid) {
                return Err(kwgyre::Error::GridMismatch);
            }
            Ok((grid.clone(), f))
        }
        (None, Some(expr)) => Ok((grid.clone(), parse_h_expr(expr, grid, flags.lmax)?)),
        (None, None) => Err(kwgyre::Error::InvalidArgument(
            "one of --h-file or --h-expr is required".into(),
        )),
        (Some(_), Some(_)) => Err(kwgyre::Error::InvalidArgument(
            "--h-file and --h-expr are mutually exclusive".into(),
        )),
    }
}

fn parse_h_expr(expr: &str, grid: &Arc<SphericalGrid>, lmax: usize) -> kwgyre::Result<ScalarField> {
    let bad = |msg: String| kwgyre::Error::Parse(msg);
    if let Some(v) = expr.strip_prefix("const:") {
        let v: f64 = v
            .parse()
            .map_err(|_| bad(format!("const: expects a number, got `{v}`")))?;
        return Ok(ScalarField::constant(grid, v));
    }
    if let Some(spec) = expr.strip_prefix("gyre:") {
        let mut c = None;
        let mut d = None;
        let mut g = None;
        let mut omega = None;
        for part in spec.split(',') {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("gyre: expects key=value pairs, got `{part}`")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| bad(format!("gyre: `{key}` expects a number, got `{val}`")))?;
            match key {
                "c" => c = Some(val),
                "d" => d = Some(val),
                "g" => g = Some(val),
                "omega" => omega = Some(val),
                other => return Err(bad(format!("gyre: unknown key `{other}`"))),
            }
        }
        let (c, d, g, omega) = match (c, d, g, omega) {
            (Some(c), Some(d), Some(g), Some(omega)) => (c, d, g, omega),
            _ => return Err(bad("gyre: requires c, d, g, and omega".into())),
        };
        let p = GyreParams::new(c, d, g, omega)?;
        let (_, h) = gyre::to_elliptic(&p, grid);
        return Ok(h);
    }
    if let Some(spec) = expr.strip_prefix("harmonic:") {
        let (l, m) = spec
            .split_once(',')
            .ok_or_else(|| bad("harmonic: expects `l,m`".into()))?;
        let l: usize = l
            .trim()
            .parse()
            .map_err(|_| bad(format!("harmonic: bad degree `{l}`")))?;
        let m: i64 = m
            .trim()
            .parse()
            .map_err(|_| bad(format!("harmonic: bad order `{m}`")))?;
        if m.unsigned_abs() as usize > l || l > lmax {
            return Err(bad(format!("harmonic: need |m| <= l <= L, got l={l}, m={m}")));
        }
        let mut coeffs = SpectralCoeffs::zeros(lmax);
        coeffs.set(l, m, 1.0);
        return synthesize(&coeffs, grid);
    }
    if let Some(path) = expr.strip_prefix("file:") {
        return read_field_from_path(Path::new(path));
    }
    Err(bad(format!(
        "unknown h expression `{expr}` (expected const:, gyre:, harmonic:, or file:)"
    )))
}

fn emit(path: Option<&Path>, doc: &str) -> kwgyre::Result<()> {
    match path {
        Some(p) => write_atomic(p, doc.as_bytes()),
        None => {
            println!("{doc}");
            Ok(())
        }
    }
}

fn emit_bytes(path: Option<&Path>, bytes: &[u8]) -> kwgyre::Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

/// Write via a temp file in the same directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> kwgyre::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
        )),
        None => PathBuf::from(format!(".{}.tmp", path.display())),
    };
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
