//! `hitchin-limits` command-line front end.
//!
//! Every subcommand writes a CSV table (stdout, or `--out` together with a
//! matplotlib script `<stem>.plot.py`). Diagnostics go to stderr as
//! tab-separated `error<TAB>code<TAB>message` lines. Exit status is 0 on
//! success, 1 when input fails validation and 2 when a numerical stage
//! fails.

use std::fmt::{self, Debug, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::building::{self, BuildingError};
use crate::frame::{self, FrameError, FlatModel, SweepSpec};
use crate::polygon::{self, FlipState, PolygonError};
use crate::surface::{self, CubicSurface, GeodesicPath, SurfaceError};
use crate::tropical::{self, TropicalError};
use crate::trigroup::{self, TrigroupError};
use crate::wang::{self, GridSpec, WangError};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "HITCHIN_LIMITS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hitchin-limits", version, about = "Tropical limits of SL(3,R) Hitchin holonomy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or check 1/3-translation surfaces.
    #[command(subcommand)]
    Surface(SurfaceCmd),
    /// Tropical exponents of a geodesic path.
    #[command(subcommand)]
    Tropical(TropicalCmd),
    /// Regular-polygon flip diagnostics.
    #[command(subcommand)]
    Polygon(PolygonCmd),
    /// Solve Wang's equation on a polynomial disk.
    #[command(subcommand)]
    Wang(WangCmd),
    /// Numeric holonomy against the tropical limit.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Local model of the asymptotic cone.
    #[command(subcommand)]
    Building(BuildingCmd),
    /// Triangle-group orbifold surfaces.
    #[command(subcommand)]
    Trigroup(TrigroupCmd),
}

#[derive(Debug, Subcommand)]
pub enum SurfaceCmd {
    /// Polynomial disk `z^k dz³` (with `--k`) or a triangle orbifold cover
    /// (with `--pqr`), written as JSON.
    Build {
        #[arg(long, conflicts_with = "pqr")]
        k: Option<i64>,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, value_parser = parse_pqr)]
        pqr: Option<[u32; 3]>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check gluing and cone-angle invariants.
    Validate {
        #[arg(long)]
        surface: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum TropicalCmd {
    /// Per-segment exponents and running sums.
    Spectrum {
        #[arg(long)]
        surface: Option<PathBuf>,
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum PolygonCmd {
    /// Unipotent transition between two chart angles.
    Unipotent {
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        theta_in: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta_out: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Basis and eigenvalue order after each flip.
    Scheme {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        flips: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 2000)]
    pub nr: usize,
    #[arg(long, default_value_t = 8)]
    pub ntheta: usize,
}

impl GridArgs {
    fn grid(&self) -> GridSpec {
        GridSpec {
            ntheta: self.ntheta,
            ..GridSpec::with_nr(self.nr)
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum WangCmd {
    /// Grid values `(r, θ, φ, F, residual)`.
    Solve {
        #[arg(long)]
        k: u32,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum VerifyCmd {
    /// Singular-value exponents of a straight segment over an s-list.
    Sweep {
        #[arg(long)]
        k: u32,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        s: Vec<f64>,
        #[arg(long, value_parser = parse_complex, default_value = "0.3,0", allow_hyphen_values = true)]
        from: Complex64,
        #[arg(long, value_parser = parse_complex, default_value = "0.8,0", allow_hyphen_values = true)]
        to: Complex64,
        #[command(flatten)]
        grid: GridArgs,
        /// Fail (exit 2) when the gap at the largest `s` exceeds this.
        #[arg(long, allow_hyphen_values = true)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numeric arc transition against the polygon prediction.
    Arc {
        #[arg(long)]
        k: u32,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        s: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        theta0: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta1: f64,
        #[arg(long, default_value_t = 0.9)]
        arc_radius: f64,
        #[command(flatten)]
        grid: GridArgs,
        /// Fail (exit 2) when the max entry error at the largest `s`
        /// exceeds this.
        #[arg(long, allow_hyphen_values = true)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BuildingCmd {
    /// Apartment coordinates of sample points, per sector.
    Localmodel {
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vector-distance additivity for a path file or random samples.
    Convexity {
        #[arg(long, conflicts_with = "random")]
        path: Option<PathBuf>,
        #[arg(long)]
        surface: Option<PathBuf>,
        /// Number of random geodesics and of random corners.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TrigroupCmd {
    /// Rotated spectra of all closed geodesics up to a length.
    Spectrum {
        #[arg(long, value_parser = parse_pqr)]
        pqr: [u32; 3],
        #[arg(long, default_value_t = 4.0)]
        maxlen: f64,
        #[arg(long, default_value_t = 6)]
        max_segments: usize,
        #[arg(long, default_value_t = 12)]
        thetas: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimum projective distance between rotated spectra of a two-class
    /// family.
    Boundary {
        #[arg(long, value_parser = parse_pqr)]
        pqr: [u32; 3],
        #[arg(long, default_value_t = 10.0)]
        maxlen: f64,
        #[arg(long, default_value_t = 6)]
        max_segments: usize,
        #[arg(long, default_value_t = 12)]
        thetas: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}")))
        .collect()
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    match parse_list(s)?.as_slice() {
        [re] => Ok(Complex64::new(*re, 0.0)),
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => Err(format!("expected re,im: {s}")),
    }
}

fn parse_pqr(s: &str) -> Result<[u32; 3], String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| format!("{t}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected p,q,r: {s}"))
}

// ---------------------------------------------------------------------------
// Errors

/// Failure of a CLI run, carrying a machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub numerical: bool,
}

impl CliError {
    pub fn validation(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.into(),
            message: message.into(),
            numerical: false,
        }
    }
    pub fn numerical(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.into(),
            message: message.into(),
            numerical: true,
        }
    }
    pub fn exit_code(&self) -> i32 {
        if self.numerical {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error\t{}\t{}", self.code, self.message.replace(['\n', '\t'], " "))
    }
}

/// Variant name of an error enum, taken from its `Debug` form.
fn variant<E: Debug>(e: &E) -> String {
    let d = format!("{e:?}");
    d.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("Unknown").to_string()
}

fn innermost_code<E: Debug>(e: &E) -> String {
    // transparent wrappers: `Polygon(NonPositiveEntry { .. })` -> inner name
    let d = format!("{e:?}");
    let names: Vec<&str> = d
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|t| t.chars().next().is_some_and(|c| c.is_ascii_uppercase()))
        .collect();
    let wrappers = ["Surface", "Tropical", "Polygon", "Wang", "Frame", "Building"];
    names
        .iter()
        .find(|n| !wrappers.contains(n))
        .map_or_else(|| variant(e), |n| n.to_string())
}

impl From<SurfaceError> for CliError {
    fn from(e: SurfaceError) -> Self {
        CliError::validation(&innermost_code(&e), e.to_string())
    }
}
impl From<TropicalError> for CliError {
    fn from(e: TropicalError) -> Self {
        CliError::validation(&innermost_code(&e), e.to_string())
    }
}
impl From<PolygonError> for CliError {
    fn from(e: PolygonError) -> Self {
        CliError::validation(&innermost_code(&e), e.to_string())
    }
}
impl From<BuildingError> for CliError {
    fn from(e: BuildingError) -> Self {
        CliError::validation(&innermost_code(&e), e.to_string())
    }
}
impl From<TrigroupError> for CliError {
    fn from(e: TrigroupError) -> Self {
        CliError::validation(&innermost_code(&e), e.to_string())
    }
}
impl From<WangError> for CliError {
    fn from(e: WangError) -> Self {
        match e {
            WangError::BadParameter(_) | WangError::OutsideDisk(_) => CliError::validation(&variant(&e), e.to_string()),
            _ => CliError::numerical(&variant(&e), e.to_string()),
        }
    }
}
impl From<FrameError> for CliError {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::Wang(w) => w.into(),
            FrameError::InvalidPath(_) | FrameError::NearZero { .. } | FrameError::Polygon(_) | FrameError::Tropical(_) => {
                CliError::validation(&innermost_code(&e), e.to_string())
            }
            FrameError::StepUnstable { .. } => CliError::numerical(&variant(&e), e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::validation("Io", format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// Output

/// Shortest round-trip decimal form; never locale dependent.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Columns a generated plotting script draws.
#[derive(Debug, Clone, Copy)]
struct Plot<'a> {
    x: &'a str,
    ys: &'a [&'a str],
    logx: bool,
    /// Keep only rows whose value in this column equals the first row's.
    slice: Option<&'a str>,
}

fn plot_script(csv_name: &str, png_name: &str, p: &Plot) -> String {
    let mut s = String::new();
    let ys: Vec<String> = p.ys.iter().map(|y| format!("{y:?}")).collect();
    let _ = writeln!(s, "import csv\nimport os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n");
    let _ = writeln!(s, "here = os.path.dirname(os.path.abspath(__file__))");
    let _ = writeln!(s, "with open(os.path.join(here, {csv_name:?})) as fh:\n    rows = list(csv.DictReader(fh))");
    if let Some(col) = p.slice {
        let _ = writeln!(s, "rows = [r for r in rows if rows and r[{col:?}] == rows[0][{col:?}]]");
    }
    let _ = writeln!(s, "x = [float(r[{:?}]) for r in rows]", p.x);
    let _ = writeln!(s, "for col in [{}]:\n    plt.plot(x, [float(r[col]) for r in rows], marker=\".\", label=col)", ys.join(", "));
    if p.logx {
        let _ = writeln!(s, "plt.xscale(\"log\")");
    }
    let _ = writeln!(s, "plt.xlabel({:?})\nplt.legend()\nplt.savefig(os.path.join(here, {png_name:?}), dpi=150)", p.x);
    s
}

/// Everything a run produces, written by [`emit`].
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub table: Option<Table>,
    /// Lines for stdout when the table goes to a file, or after it
    /// otherwise.
    pub summary: Vec<String>,
}

fn emit(out: Option<&Path>, table: Table, plot: Option<Plot>, summary: Vec<String>) -> Result<Output, CliError> {
    if let Some(path) = out {
        fs::write(path, table.to_csv()).map_err(|e| io_err(path, e))?;
        if let Some(p) = plot {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
            let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out.csv");
            let script = path.with_file_name(format!("{stem}.plot.py"));
            fs::write(&script, plot_script(name, &format!("{stem}.png"), &p)).map_err(|e| io_err(&script, e))?;
        }
        Ok(Output { table: None, summary })
    } else {
        Ok(Output {
            table: Some(table),
            summary,
        })
    }
}

// ---------------------------------------------------------------------------
// Validation helpers

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::validation("NonPositive", format!("--{name} must be positive and finite, got {x}")))
    }
}

fn increasing(s: &[f64]) -> Result<(), CliError> {
    if s.is_empty() {
        return Err(CliError::validation("EmptyList", "--s is empty"));
    }
    for &x in s {
        positive("s", x)?;
    }
    if s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::validation("NotIncreasing", "--s must be strictly increasing"));
    }
    Ok(())
}

fn load_surface(p: Option<&Path>) -> Result<Option<CubicSurface>, CliError> {
    p.map(|p| Ok(CubicSurface::from_json(&read(p)?)?)).transpose()
}

/// Worker-pool size from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::validation("BadThreads", format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
    }
}

// ---------------------------------------------------------------------------
// Subcommands

/// Run a parsed command.
pub fn execute(cmd: &Command) -> Result<Output, CliError> {
    match cmd {
        Command::Surface(c) => surface_cmd(c),
        Command::Tropical(TropicalCmd::Spectrum { surface, path, out }) => tropical_spectrum(surface.as_deref(), path, out.as_deref()),
        Command::Polygon(c) => polygon_cmd(c),
        Command::Wang(WangCmd::Solve { k, s, grid, out }) => wang_solve(*k, *s, grid, out.as_deref()),
        Command::Verify(c) => verify_cmd(c),
        Command::Building(c) => building_cmd(c),
        Command::Trigroup(c) => trigroup_cmd(c),
    }
}

fn surface_cmd(c: &SurfaceCmd) -> Result<Output, CliError> {
    match c {
        SurfaceCmd::Build { k, radius, pqr, out } => {
            let s = match (k, pqr) {
                (Some(k), None) => surface::build_polynomial_disk(*k, *radius)?,
                (None, Some([p, q, r])) => trigroup::build_orbifold(*p, *q, *r)?.surface,
                _ => return Err(CliError::validation("MissingArgument", "give one of --k or --pqr")),
            };
            let json = s.to_json();
            match out {
                Some(p) => {
                    fs::write(p, json).map_err(|e| io_err(p, e))?;
                    Ok(Output {
                        table: None,
                        summary: vec![format!("wrote {}", p.display())],
                    })
                }
                None => Ok(Output {
                    table: None,
                    summary: vec![json],
                }),
            }
        }
        SurfaceCmd::Validate { surface } => {
            let s = CubicSurface::from_json(&read(surface)?)?;
            let v = surface::validate(&s);
            if let Some(first) = v.first() {
                let detail: Vec<String> = v.iter().map(|x| format!("{}: {x:?}", x.code())).collect();
                return Err(CliError::validation(first.code(), detail.join("; ")));
            }
            Ok(Output {
                table: None,
                summary: vec![format!(
                    "valid\ttriangles={}\tvertex_classes={}\teuler={}",
                    s.triangles().len(),
                    s.classes().len(),
                    s.euler_characteristic()
                )],
            })
        }
    }
}

fn tropical_spectrum(surface: Option<&Path>, path: &Path, out: Option<&Path>) -> Result<Output, CliError> {
    let s = load_surface(surface)?;
    let p = GeodesicPath::from_json(&read(path)?, s.as_ref())?;
    let mut t = Table::new(&["segment", "nu1", "nu2", "nu3", "multiplicity_top", "sum1", "sum2", "sum3"]);
    for (i, (e, acc)) in tropical::spectrum_rows(&p)?.into_iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(e.sorted.as_array().map(fmt_f64));
        row.push(e.multiplicity_top.to_string());
        row.extend(acc.as_array().map(fmt_f64));
        t.push(row);
    }
    let plot = Plot {
        x: "segment",
        ys: &["sum1", "sum2", "sum3"],
        logx: false,
        slice: None,
    };
    emit(out, t, Some(plot), vec![])
}

fn polygon_cmd(c: &PolygonCmd) -> Result<Output, CliError> {
    match c {
        PolygonCmd::Unipotent { n, theta_in, theta_out, out } => {
            let lifts = polygon::regular_lifts(*n)?;
            let u = polygon::arc_unipotent(&lifts, *theta_in, *theta_out)?;
            let mut t = Table::new(&["row", "c0", "c1", "c2"]);
            for i in 0..3 {
                let mut row = vec![i.to_string()];
                row.extend((0..3).map(|j| fmt_f64(u[(i, j)])));
                t.push(row);
            }
            let mut summary = vec![format!("crossings\t{}", polygon::stokes_crossings(*theta_in, *theta_out))];
            if theta_out - theta_in >= std::f64::consts::PI - 1e-9 {
                let e = polygon::check_entry_nonzero(&lifts, *theta_in, *theta_out)?;
                summary.push(format!("paired_entry\t{}\t{}\t{}", e.row, e.col, fmt_f64(e.value)));
            }
            emit(out.as_deref(), t, None, summary)
        }
        PolygonCmd::Scheme { n, flips, out } => {
            let mut st = FlipState::new(*n)?;
            let mut t = Table::new(&["step", "sector", "angle", "basis0", "basis1", "basis2", "order0", "order1", "order2"]);
            for i in 0..=*flips {
                let mut row = vec![i.to_string(), st.sector().to_string(), fmt_f64(st.sector_angle())];
                row.extend(st.basis().iter().map(|l| l.to_string()));
                row.extend(st.eigen_order().iter().map(|e| e.to_string()));
                t.push(row);
                st = polygon::flip(st);
            }
            emit(out.as_deref(), t, None, vec![])
        }
    }
}

fn wang_solve(k: u32, s: f64, g: &GridArgs, out: Option<&Path>) -> Result<Output, CliError> {
    positive("s", s)?;
    positive("radius", g.radius)?;
    let sol = wang::solve_disk(k, s, g.radius, g.grid())?;
    let lb = wang::pointwise_lower_bound_check(&sol);
    if !lb.holds {
        return Err(CliError::numerical(
            "LowerBoundViolated",
            format!("{} nodes below the flat bound, margin {}", lb.flagged, fmt_f64(lb.min_margin)),
        ));
    }
    let ef = wang::error_field(&sol);
    let mut t = Table::new(&["r", "theta", "phi", "F", "residual"]);
    for row in sol.grid_rows() {
        t.push(row.iter().copied().map(fmt_f64).collect());
    }
    let summary = vec![
        format!("residual\t{}", fmt_f64(sol.residual_norm)),
        format!("min_margin\t{}", fmt_f64(lb.min_margin)),
        format!("decay_over_s13\t{}", fmt_f64(ef.decay / s.cbrt())),
    ];
    let plot = Plot {
        x: "r",
        ys: &["F"],
        logx: true,
        slice: Some("theta"),
    };
    emit(out, t, Some(plot), summary)
}

fn verify_cmd(c: &VerifyCmd) -> Result<Output, CliError> {
    match c {
        VerifyCmd::Sweep { k, s, from, to, grid, tol, out } => {
            increasing(s)?;
            positive("radius", grid.radius)?;
            if let Some(t) = tol {
                positive("tol", *t)?;
            }
            let spec = SweepSpec {
                k: *k,
                from: *from,
                to: *to,
                radius: grid.radius,
                grid: grid.grid(),
            };
            let rows = frame::convergence_sweep(&spec, s)?;
            let mut t = Table::new(&["s", "numeric1", "numeric2", "numeric3", "tropical1", "tropical2", "tropical3", "gap"]);
            for r in &rows {
                let mut row = vec![fmt_f64(r.s)];
                row.extend(r.numeric.map(fmt_f64));
                row.extend(r.target.map(fmt_f64));
                row.push(fmt_f64(r.gap));
                t.push(row);
            }
            let last = rows.last().map_or(0.0, |r| r.gap);
            if let Some(tol) = tol {
                if !(last <= *tol) {
                    return Err(CliError::numerical("GapExceeded", format!("gap {} > tol {}", fmt_f64(last), fmt_f64(*tol))));
                }
            }
            let plot = Plot {
                x: "s",
                ys: &["gap"],
                logx: true,
                slice: None,
            };
            emit(out.as_deref(), t, Some(plot), vec![format!("final_gap\t{}", fmt_f64(last))])
        }
        VerifyCmd::Arc {
            k,
            s,
            theta0,
            theta1,
            arc_radius,
            grid,
            tol,
            out,
        } => {
            increasing(s)?;
            positive("radius", grid.radius)?;
            positive("arc-radius", *arc_radius)?;
            if let Some(t) = tol {
                positive("tol", *t)?;
            }
            let target = frame::arc_unipotent_target(*k, *theta0, *theta1)?;
            let mats = {
                use rayon::prelude::*;
                s.par_iter()
                    .map(|&sv| -> Result<_, CliError> {
                        let z = if *k == 0 {
                            frame::arc_unipotent_numeric(&FlatModel { k: 0, s: sv }, *theta0, *theta1, *arc_radius)?
                        } else {
                            let sol = wang::solve_disk(*k, sv, grid.radius, grid.grid())?;
                            frame::arc_unipotent_numeric(&sol, *theta0, *theta1, *arc_radius)?
                        };
                        Ok(z.slots)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            let mut t = Table::new(&["s", "row", "col", "numeric", "target", "error"]);
            let mut last = 0.0;
            for (sv, m) in s.iter().zip(&mats) {
                last = (m - target).amax();
                for i in 0..3 {
                    for j in 0..3 {
                        t.push(vec![
                            fmt_f64(*sv),
                            i.to_string(),
                            j.to_string(),
                            fmt_f64(m[(i, j)]),
                            fmt_f64(target[(i, j)]),
                            fmt_f64((m[(i, j)] - target[(i, j)]).abs()),
                        ]);
                    }
                }
            }
            if let Some(tol) = tol {
                if !(last <= *tol) {
                    return Err(CliError::numerical("GapExceeded", format!("entry error {} > tol {}", fmt_f64(last), fmt_f64(*tol))));
                }
            }
            emit(out.as_deref(), t, None, vec![format!("final_max_error\t{}", fmt_f64(last))])
        }
    }
}

fn building_cmd(c: &BuildingCmd) -> Result<Output, CliError> {
    match c {
        BuildingCmd::Localmodel { k, samples, out } => {
            let mut t = Table::new(&["sector", "z_re", "z_im", "x1", "x2", "x3"]);
            for smp in building::local_model_samples(*k, *samples) {
                let mut row = vec![smp.sector.to_string(), fmt_f64(smp.z.re), fmt_f64(smp.z.im)];
                row.extend(smp.point.coords().map(fmt_f64));
                t.push(row);
            }
            let atlas = building::sector_atlas(*k);
            let summary = vec![
                format!("sectors\t{}", atlas.len()),
                format!("loop_is_identity\t{}", atlas.loop_composition() == Some([0, 1, 2])),
            ];
            let plot = Plot {
                x: "x2",
                ys: &["x3"],
                logx: false,
                slice: None,
            };
            emit(out.as_deref(), t, Some(plot), summary)
        }
        BuildingCmd::Convexity {
            path,
            surface,
            random,
            seed,
            out,
        } => {
            let mut items: Vec<(&str, GeodesicPath)> = Vec::new();
            if let Some(p) = path {
                let s = load_surface(surface.as_deref())?;
                items.push(("input", GeodesicPath::from_json(&read(p)?, s.as_ref())?));
            } else if let Some(n) = random {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for _ in 0..*n {
                    items.push(("geodesic", building::sample_geodesic_path(&mut rng)));
                }
                for _ in 0..*n {
                    items.push(("corner", building::sample_corner(&mut rng)));
                }
            } else {
                return Err(CliError::validation("MissingArgument", "give one of --path or --random"));
            }
            let mut t = Table::new(&[
                "kind", "index", "segments", "sum1", "sum2", "sum3", "distance1", "distance2", "distance3", "top_deficit", "additive",
            ]);
            for (i, (kind, p)) in items.iter().enumerate() {
                let sum = tropical::path_singular_exponents(p)?;
                let d = building::path_vector_distance(p)?;
                let defect = building::convexity_defect(p)?;
                let mut row = vec![kind.to_string(), i.to_string(), p.segments().len().to_string()];
                row.extend(sum.as_array().map(fmt_f64));
                row.extend(d.as_array().map(fmt_f64));
                row.push(fmt_f64(defect.x1()));
                row.push(building::weak_convexity_check(p).to_string());
                t.push(row);
            }
            emit(out.as_deref(), t, None, vec![])
        }
    }
}

fn orbifold(pqr: &[u32; 3]) -> Result<trigroup::TriangleOrbifoldSurface, CliError> {
    Ok(trigroup::build_orbifold(pqr[0], pqr[1], pqr[2])?)
}

fn trigroup_cmd(c: &TrigroupCmd) -> Result<Output, CliError> {
    match c {
        TrigroupCmd::Spectrum {
            pqr,
            maxlen,
            max_segments,
            thetas,
            out,
        } => {
            positive("maxlen", *maxlen)?;
            let o = orbifold(pqr)?;
            let classes = trigroup::closed_geodesics(&o.surface, *maxlen, *max_segments)?;
            let grid = trigroup::theta_grid(*thetas);
            let spectra = {
                use rayon::prelude::*;
                grid.par_iter()
                    .map(|&th| trigroup::spectrum_at(&classes, th))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let mut t = Table::new(&["theta", "class", "length", "segments", "x1", "x2", "x3"]);
            for (th, sp) in grid.iter().zip(&spectra) {
                for (i, (c, v)) in classes.iter().zip(&sp.values).enumerate() {
                    let mut row = vec![fmt_f64(*th), i.to_string(), fmt_f64(c.length()), c.segments().len().to_string()];
                    row.extend(v.as_array().map(fmt_f64));
                    t.push(row);
                }
            }
            let summary = vec![format!("classes\t{}", classes.len()), format!("genus\t{}", o.genus())];
            let plot = Plot {
                x: "theta",
                ys: &["x1", "x2", "x3"],
                logx: false,
                slice: Some("class"),
            };
            emit(out.as_deref(), t, Some(plot), summary)
        }
        TrigroupCmd::Boundary {
            pqr,
            maxlen,
            max_segments,
            thetas,
            out,
        } => {
            positive("maxlen", *maxlen)?;
            let o = orbifold(pqr)?;
            let classes = trigroup::closed_geodesics(&o.surface, *maxlen, *max_segments)?;
            let family = trigroup::default_family(&classes).ok_or_else(|| {
                CliError::validation("InsufficientFamily", "no two chiral classes with distinct directions; raise --maxlen")
            })?;
            let grid = trigroup::theta_grid(*thetas);
            let d = trigroup::boundary_injectivity_probe(&family, &grid)?;
            let mut t = Table::new(&["theta", "class", "x1", "x2", "x3"]);
            for &th in &grid {
                let sp = trigroup::spectrum_at(&family, th)?;
                for (i, v) in sp.values.iter().enumerate() {
                    let mut row = vec![fmt_f64(th), i.to_string()];
                    row.extend(v.as_array().map(fmt_f64));
                    t.push(row);
                }
            }
            // spectra are unit vectors; anything below this is rounding
            if !(d > 1e-12) {
                return Err(CliError::numerical("NotInjective", format!("minimum projective distance {}", fmt_f64(d))));
            }
            let plot = Plot {
                x: "theta",
                ys: &["x1", "x2", "x3"],
                logx: false,
                slice: Some("class"),
            };
            emit(out.as_deref(), t, Some(plot), vec![format!("min_distance\t{}", fmt_f64(d))])
        }
    }
}

// ---------------------------------------------------------------------------
// Entry points

/// Parse `args`, run, and print. Returns the exit status.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::validation("Usage", format!("{:?}: {first}", e.kind())));
            return 1;
        }
    };
    let result = threads_from_env().and_then(|threads| match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::validation("BadThreads", e.to_string()))?
            .install(|| execute(&cli.command)),
        None => execute(&cli.command),
    });
    match result {
        Ok(out) => {
            use std::io::Write;
            let mut so = std::io::stdout().lock();
            let mut text = out.table.map(|t| t.to_csv()).unwrap_or_default();
            for line in out.summary {
                text.push_str(&line);
                text.push('\n');
            }
            // a closed pipe downstream is not a failure of the run
            let _ = so.write_all(text.as_bytes()).and_then(|_| so.flush());
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("hitchin-limits").chain(args.iter().copied())).unwrap().command
    }

    #[test]
    fn list_and_complex_parsing() {
        assert_eq!(parse_list("1e2, 1e3").unwrap(), vec![100.0, 1000.0]);
        assert_eq!(parse_complex("0.5,-1").unwrap(), Complex64::new(0.5, -1.0));
        assert_eq!(parse_pqr("3,3,4").unwrap(), [3, 3, 4]);
        assert!(parse_pqr("3,3").is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 7.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert!(!fmt_f64(1234.5).contains(','));
    }

    #[test]
    fn s_list_must_increase() {
        assert!(increasing(&[1.0, 2.0]).is_ok());
        assert_eq!(increasing(&[2.0, 1.0]).unwrap_err().code, "NotIncreasing");
        assert_eq!(increasing(&[1.0, 1.0]).unwrap_err().exit_code(), 1);
        assert_eq!(increasing(&[-1.0]).unwrap_err().code, "NonPositive");
    }

    #[test]
    fn negative_tolerance_rejected() {
        let c = parse(&["verify", "sweep", "--k", "0", "--tol", "-1"]);
        assert_eq!(execute(&c).unwrap_err().code, "NonPositive");
    }

    #[test]
    fn error_codes_name_the_cause() {
        let e: CliError = FrameError::Polygon(PolygonError::NonPositiveEntry { row: 0, col: 1, value: 0.0 }).into();
        assert_eq!(e.code, "NonPositiveEntry");
        let e: CliError = WangError::NewtonDiverged { trace: vec![] }.into();
        assert_eq!((e.code.as_str(), e.exit_code()), ("NewtonDiverged", 2));
        assert!(e.to_string().starts_with("error\tNewtonDiverged\t"));
    }

    #[test]
    fn polygon_unipotent_table() {
        let c = parse(&["polygon", "unipotent", "--n", "3", "--theta-in", "0.1", "--theta-out", "1.2"]);
        let out = execute(&c).unwrap();
        let t = out.table.unwrap();
        assert_eq!(t.header, ["row", "c0", "c1", "c2"]);
        assert_eq!(t.rows.len(), 3);
        assert_eq!(out.summary[0], "crossings\t1");
    }

    #[test]
    fn sweep_k0_agrees() {
        let c = parse(&["verify", "sweep", "--k", "0", "--s", "10,100,1000"]);
        let t = execute(&c).unwrap().table.unwrap();
        for r in &t.rows {
            let gap: f64 = r[7].parse().unwrap();
            assert!(gap < 1e-8, "{gap}");
        }
    }

    #[test]
    fn plot_script_mentions_columns() {
        let p = Plot {
            x: "s",
            ys: &["gap"],
            logx: true,
            slice: None,
        };
        let s = plot_script("a.csv", "a.png", &p);
        assert!(s.contains("\"a.csv\"") && s.contains("\"gap\"") && s.contains("xscale"));
    }
}
