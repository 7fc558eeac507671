//! Command-line surface. Every subcommand maps onto one library call,
//! prints a single JSON record to stdout, and exits 0. Failures print
//! {"error": {code, message, context}} instead: 2 for anything wrong
//! with the input, 3 when an eigensolver stops short of its tolerance,
//! 4 when an inverse-spectral scan fits no class.

mod output;
mod problem;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::time::Instant;

use output::{csv_float, number, print_record, record, round_floats, write_csv};
use problem::{CoeffSpec, Geometry, GeometryKind, Method, Potential, ProblemFile, Solver};

use subrumin::chern::{recover_chern, ChernError, SpectralOracle};
use subrumin::circle::{circle_lambda1_exact, circle_lambda1_fd};
use subrumin::eigen::SolveOptions;
use subrumin::field::{Coefficient, FieldExpr, ScalarField};
use subrumin::geometry::{CircleChart, NilmanifoldChart, TorusChart, TorusGrid};
use subrumin::nil::{
    cache_path, calibrate_landau, load_calibration, nil_lambda1_3d, nil_lambda1_closed,
    nil_lambda1_sector, store_calibration,
};
use subrumin::rumin::{d_h, decompose, delta_j, exterior_d, flux_quantized, rumin_d, OneForm};
use subrumin::torus::{lattice_distance_sq, torus_lambda1_exact, torus_lambda1_fd, TorusPotential};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Parser)]
#[command(
    name = "subrumin",
    version,
    about = "First eigenvalues of magnetic horizontal Laplacians on scaled tori and Heisenberg nilmanifolds"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Flat torus spectra (also takes circle problem files)
    #[command(subcommand)]
    Torus(TorusCmd),
    /// Heisenberg nilmanifold spectra, calibration, and bounds
    #[command(subcommand)]
    Nil(NilCmd),
    /// Loop fluxes of a horizontal potential on the nilmanifold
    #[command(subcommand)]
    Flux(FluxCmd),
    /// Pointwise identities of the reduced differential
    #[command(subcommand)]
    Rumin(RuminCmd),
    /// Split a basic horizontal form into harmonic, exact, and co-exact parts
    Decompose(DecomposeArgs),
    /// Inverse-spectral recovery of the lattice scale
    #[command(subcommand)]
    Chern(ChernCmd),
    /// Grid-refinement studies
    #[command(subcommand)]
    Study(StudyCmd),
}

#[derive(Subcommand)]
enum TorusCmd {
    /// Smallest eigenvalue of the magnetic Laplacian on the scale-k torus
    Lambda1(TorusLambda1Args),
}

#[derive(Subcommand)]
enum NilCmd {
    /// Smallest eigenvalue of the horizontal Laplacian on the scale-k quotient
    Lambda1(NilLambda1Args),
    /// Measure the Landau constant by grid extrapolation
    CalibrateLandau(CalibrateArgs),
    /// Lattice-distance upper bound and its sharpness
    Bound(BoundArgs),
}

#[derive(Subcommand)]
enum FluxCmd {
    /// Closedness and 2-pi-integrality of generator-loop fluxes
    Check(FluxArgs),
}

#[derive(Subcommand)]
enum RuminCmd {
    /// Sample the differential and codifferential of a form at random points
    Check(RuminArgs),
}

#[derive(Subcommand)]
enum ChernCmd {
    /// Read the scale k off an eigenvalue sequence
    Recover(ChernArgs),
}

#[derive(Subcommand)]
enum StudyCmd {
    /// Solve over a grid sequence and report observed convergence orders
    Convergence(StudyArgs),
}

#[derive(Args)]
struct TorusLambda1Args {
    /// JSON problem file; replaces the flags below
    #[arg(long)]
    problem: Option<String>,
    /// Lattice scale k
    #[arg(long, default_value_t = 1, conflicts_with = "problem")]
    k: u32,
    /// dx-coefficient: a number or an expression in x, y
    #[arg(long, default_value = "0", conflicts_with = "problem")]
    a: String,
    /// dy-coefficient
    #[arg(long, default_value = "0", conflicts_with = "problem")]
    b: String,
    /// Gauge function applied as a -> a + dF before solving
    #[arg(long, conflicts_with = "problem")]
    f_gauge: Option<String>,
    #[arg(long, value_enum, default_value_t = Method::Fd, conflicts_with = "problem")]
    method: Method,
    /// nv,nw
    #[arg(long, value_delimiter = ',', default_value = "64,64", conflicts_with = "problem")]
    grid: Vec<u32>,
    #[arg(long, default_value_t = 1e-8, conflicts_with = "problem")]
    tol: f64,
    #[arg(long, default_value_t = 0, conflicts_with = "problem")]
    seed: u64,
    /// Iteration budget for the iterative eigensolver
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct NilLambda1Args {
    /// JSON problem file; replaces the flags below
    #[arg(long)]
    problem: Option<String>,
    #[arg(long, default_value_t = 1, conflicts_with = "problem")]
    k: u32,
    /// dx-coefficient: a number or an expression
    #[arg(long, default_value = "0", conflicts_with = "problem")]
    a: String,
    /// dy-coefficient
    #[arg(long, default_value = "0", conflicts_with = "problem")]
    b: String,
    /// alpha-coefficient; never enters the horizontal operator
    #[arg(long, default_value = "0", conflicts_with = "problem")]
    h: String,
    /// Gauge function applied as a -> a + d_H F before solving
    #[arg(long, conflicts_with = "problem")]
    f_gauge: Option<String>,
    #[arg(long, value_enum, default_value_t = Method::Sector, conflicts_with = "problem")]
    method: Method,
    /// nx,ny for sector, nx,ny,nz for grid3d
    #[arg(long, value_delimiter = ',', default_value = "64,64", conflicts_with = "problem")]
    grid: Vec<u32>,
    /// Sector scan half-width m_max
    #[arg(long, default_value_t = 2, conflicts_with = "problem")]
    sectors: u32,
    #[arg(long, default_value_t = 1e-8, conflicts_with = "problem")]
    tol: f64,
    #[arg(long, default_value_t = 0, conflicts_with = "problem")]
    seed: u64,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Override the calibrated Landau constant
    #[arg(long)]
    lambda_cap: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Scales to test; the first one anchors the extrapolation
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k_list: Vec<u32>,
    /// Sectors to test; must include |m| = 1
    #[arg(long, value_delimiter = ',', default_value = "0,1,2", allow_hyphen_values = true)]
    m_list: Vec<i32>,
    /// Doubling grid sequence
    #[arg(long, value_delimiter = ',', default_value = "16,32")]
    grids: Vec<u32>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result to the calibration cache
    #[arg(long)]
    store: bool,
    /// Cache path; defaults to SUBRUMIN_CALIBRATION or ./subrumin-calibration.json
    #[arg(long)]
    cache: Option<String>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, default_value = "0")]
    a: String,
    #[arg(long, default_value = "0")]
    b: String,
    #[arg(long, default_value = "0")]
    h: String,
    #[arg(long)]
    f_gauge: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    grid: Vec<u32>,
    #[arg(long, default_value_t = 2)]
    sectors: u32,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Sharpness tolerance for comparing the eigenvalue to the bound
    #[arg(long, default_value_t = 1e-2)]
    sharp_tol: f64,
    #[arg(long)]
    lambda_cap: Option<f64>,
}

#[derive(Args)]
struct FluxArgs {
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// dx-coefficient
    #[arg(long, default_value = "0")]
    p: String,
    /// dy-coefficient
    #[arg(long, default_value = "0")]
    q: String,
    /// alpha-coefficient; projected away before integrating
    #[arg(long, default_value = "0")]
    h: String,
    /// Closedness and lattice-membership tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct RuminArgs {
    #[arg(long, default_value = "0")]
    p: String,
    #[arg(long, default_value = "0")]
    q: String,
    #[arg(long, default_value = "0")]
    h: String,
    /// Scalar field whose differential is checked to be annihilated
    #[arg(long)]
    f: Option<String>,
    /// Number of sample points
    #[arg(long, default_value_t = 40)]
    points: u32,
    /// Samples drawn uniformly from [-range, range]^3
    #[arg(long, default_value_t = 2.0)]
    range: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// dx-coefficient, z-free and periodic
    #[arg(long, default_value = "0")]
    p: String,
    /// dy-coefficient
    #[arg(long, default_value = "0")]
    q: String,
    /// nv,nw
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    grid: Vec<u32>,
    /// Relative tolerance of the Poisson solve
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    /// Emit the full scalar potential instead of summary statistics
    #[arg(long)]
    full_field: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum OracleKind {
    /// Probe the closed eigenvalue formula directly
    Closed,
    /// Probe the sector solver
    Numeric,
    /// Read probes from a CSV table (columns l, lambda1)
    Table,
}

#[derive(Args)]
struct ChernArgs {
    #[arg(long, value_enum, default_value_t = OracleKind::Closed)]
    oracle: OracleKind,
    /// Scale used to synthesize probes (closed and numeric oracles)
    #[arg(long)]
    k_true: Option<u32>,
    /// CSV table path (table oracle)
    #[arg(long)]
    table: Option<String>,
    /// Scan length; must reach at least twice the recovered scale
    #[arg(long)]
    lmax: u32,
    #[arg(long, default_value_t = 1e-3)]
    zero_tol: f64,
    #[arg(long, default_value_t = 5e-2)]
    accept_tol: f64,
    /// nx,ny for the numeric oracle
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    grid: Vec<u32>,
    #[arg(long, default_value_t = 2)]
    sectors: u32,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lambda_cap: Option<f64>,
}

#[derive(Args)]
struct StudyArgs {
    /// JSON problem file to refine
    #[arg(long, conflicts_with = "calibration")]
    problem: Option<String>,
    /// Reproduce the Landau calibration table instead
    #[arg(long)]
    calibration: bool,
    /// Grid sizes, expanded per method (n; n,n; or n,n,n)
    #[arg(long, value_delimiter = ',')]
    grids: Vec<u32>,
    /// Also write the rows to a CSV file
    #[arg(long)]
    csv: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 1e-8, conflicts_with = "problem")]
    tol: f64,
    #[arg(long, default_value_t = 0, conflicts_with = "problem")]
    seed: u64,
}

struct Failure {
    code: i32,
    message: String,
    context: Value,
}

impl Failure {
    fn validation(msg: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: msg.into(),
            context: Value::Null,
        }
    }

    fn not_converged(lambda1: f64, residual: f64, iterations: usize, detail: Value) -> Failure {
        Failure {
            code: 3,
            message: "eigensolver stopped short of the requested tolerance".into(),
            context: json!({
                "lambda1": lambda1,
                "residual": residual,
                "iterations": iterations,
                "detail": detail,
            }),
        }
    }
}

impl From<String> for Failure {
    fn from(msg: String) -> Failure {
        Failure::validation(msg)
    }
}

macro_rules! failure_from_display {
    ($($t:ty),* $(,)?) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Failure {
                Failure::validation(e.to_string())
            }
        }
    )*};
}

failure_from_display!(
    subrumin::nil::NilError,
    subrumin::torus::TorusError,
    subrumin::geometry::GeometryError,
    subrumin::rumin::RuminError,
    subrumin::field::EvalError,
    subrumin::field::ParseError,
);

impl From<ChernError> for Failure {
    fn from(e: ChernError) -> Failure {
        match e {
            ChernError::Ambiguous { diagnostics } => Failure {
                code: 4,
                message: "no lattice scale is consistent with the scan".into(),
                context: json!({ "diagnostics": diagnostics }),
            },
            other => Failure::validation(other.to_string()),
        }
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    let t0 = Instant::now();
    match dispatch(cli.cmd, t0) {
        Ok(()) => 0,
        Err(f) => {
            let mut v = json!({
                "error": {"code": f.code, "message": f.message, "context": f.context}
            });
            round_floats(&mut v);
            println!("{}", serde_json::to_string_pretty(&v).expect("error record serializes"));
            f.code
        }
    }
}

fn dispatch(cmd: Cmd, t0: Instant) -> Result<(), Failure> {
    match cmd {
        Cmd::Torus(TorusCmd::Lambda1(a)) => torus_lambda1_cmd(a, t0),
        Cmd::Nil(NilCmd::Lambda1(a)) => nil_lambda1_cmd(a, t0),
        Cmd::Nil(NilCmd::CalibrateLandau(a)) => calibrate_cmd(a, t0),
        Cmd::Nil(NilCmd::Bound(a)) => bound_cmd(a, t0),
        Cmd::Flux(FluxCmd::Check(a)) => flux_cmd(a, t0),
        Cmd::Rumin(RuminCmd::Check(a)) => rumin_cmd(a, t0),
        Cmd::Decompose(a) => decompose_cmd(a, t0),
        Cmd::Chern(ChernCmd::Recover(a)) => chern_cmd(a, t0),
        Cmd::Study(StudyCmd::Convergence(a)) => study_cmd(a, t0),
    }
}

fn coeff_spec(s: &str) -> CoeffSpec {
    match s.trim().parse::<f64>() {
        Ok(v) => CoeffSpec::Number(v),
        Err(_) => CoeffSpec::Expr(s.to_string()),
    }
}

fn solve_options(s: &Solver, max_iter: Option<usize>) -> SolveOptions {
    SolveOptions {
        tol: s.tol,
        seed: s.seed,
        max_iter: max_iter.unwrap_or_else(|| SolveOptions::default().max_iter),
        ..SolveOptions::default()
    }
}

/// Calibrated Landau constant: an explicit flag wins, then the cache,
/// then the lowest Landau level of a unit field.
fn landau_constant(flag: Option<f64>) -> (f64, String) {
    if let Some(c) = flag {
        return (c, "flag".into());
    }
    let path = cache_path();
    match load_calibration(&path) {
        Some(c) => (c.extrapolated, format!("cache:{}", path.display())),
        None => (TWO_PI, "builtin:lowest-landau-level".into()),
    }
}

fn lambda_convention(cap: f64, source: &str) -> Value {
    json!({"paper": 1.0, "calibrated": cap, "source": source})
}

fn require_zero(c: &CoeffSpec, what: &str) -> Result<(), Failure> {
    match c {
        CoeffSpec::Number(v) if *v == 0.0 => Ok(()),
        _ => Err(Failure::validation(format!(
            "{what} must be 0 for this geometry"
        ))),
    }
}

fn coeff_to_scalar(c: &Coefficient) -> ScalarField {
    match c {
        Coefficient::Const(v) => ScalarField::from_expr(FieldExpr::Number(*v)),
        Coefficient::Field(f) => f.clone(),
    }
}

/// Potential one-form with the gauge term folded in.
fn one_form(pot: &Potential) -> Result<OneForm, Failure> {
    let p = pot.a.to_coefficient("a")?;
    let q = pot.b.to_coefficient("b")?;
    let h = pot.h.to_coefficient("h")?;
    let mut w = OneForm::new(p, q, h);
    if let Some(src) = &pot.f_gauge {
        let f = ScalarField::parse(src).map_err(|e| format!("potential.f_gauge: {e}"))?;
        w = w.add(&d_h(&f));
    }
    Ok(w)
}

fn torus_potential(pot: &Potential) -> Result<TorusPotential, Failure> {
    require_zero(&pot.h, "potential.h")?;
    if pot.f_gauge.is_none() {
        if let (CoeffSpec::Number(a), CoeffSpec::Number(b)) = (&pot.a, &pot.b) {
            return Ok(TorusPotential::constant(*a, *b));
        }
    }
    if let Some(src) = &pot.f_gauge {
        let f = ScalarField::parse(src).map_err(|e| format!("potential.f_gauge: {e}"))?;
        if !f.is_z_free() {
            return Err(Failure::validation(
                "potential.f_gauge must not mention z on the torus",
            ));
        }
    }
    let w = one_form(pot)?;
    Ok(TorusPotential::Field {
        a: coeff_to_scalar(&w.p),
        b: coeff_to_scalar(&w.q),
    })
}

fn lattice_point_json(n: (i64, i64), tied: &[(i64, i64)]) -> Value {
    json!({
        "n": [n.0, n.1],
        "tied": tied.iter().map(|t| json!([t.0, t.1])).collect::<Vec<_>>(),
    })
}

struct Solved {
    lambda1: f64,
    converged: bool,
    residual: f64,
    iterations: usize,
    body: Vec<(&'static str, Value)>,
}

impl Solved {
    fn closed(lambda1: f64, body: Vec<(&'static str, Value)>) -> Solved {
        Solved {
            lambda1,
            converged: true,
            residual: 0.0,
            iterations: 0,
            body,
        }
    }
}

/// One eigenvalue computation as described by a problem file. Shared by
/// the lambda1 subcommands and the convergence study.
fn solve_lambda1(
    pf: &ProblemFile,
    max_iter: Option<usize>,
    cap: f64,
) -> Result<Solved, Failure> {
    problem::validate(pf)?;
    let opts = solve_options(&pf.solver, max_iter);
    let k = pf.geometry.k;
    let g = &pf.solver.grid;
    match (pf.geometry.kind, pf.solver.method) {
        (GeometryKind::Torus, Method::Exact) => {
            require_zero(&pf.potential.h, "potential.h")?;
            if pf.potential.f_gauge.is_some() {
                return Err(Failure::validation(
                    "f_gauge needs a grid method; the closed form already fixes the gauge",
                ));
            }
            let a = pf.potential.a.require_const("a")?;
            let b = pf.potential.b.require_const("b")?;
            let r = torus_lambda1_exact(a, b, k)?;
            Ok(Solved::closed(
                r.value,
                vec![
                    ("lambda1", number(r.value)),
                    ("method", json!("exact")),
                    ("grid", json!([] as [u32; 0])),
                    ("residual", number(0.0)),
                    ("lattice_point", lattice_point_json(r.nearest.n, &r.nearest.tied)),
                    ("lattice_distance_sq", number(r.nearest.dist_sq)),
                ],
            ))
        }
        (GeometryKind::Torus, Method::Fd) => {
            let pot = torus_potential(&pf.potential)?;
            let chart = TorusChart::new(k)?;
            let r = torus_lambda1_fd(&chart, &pot, g[0], g[1], &opts)?;
            Ok(Solved {
                lambda1: r.value,
                converged: r.converged,
                residual: r.residual,
                iterations: r.iterations,
                body: vec![
                    ("lambda1", number(r.value)),
                    ("method", json!("fd")),
                    ("grid", json!([g[0], g[1]])),
                    ("residual", number(r.residual)),
                    ("iterations", json!(r.iterations)),
                ],
            })
        }
        (GeometryKind::Circle, method) => {
            require_zero(&pf.potential.b, "potential.b")?;
            require_zero(&pf.potential.h, "potential.h")?;
            if pf.potential.f_gauge.is_some() {
                return Err(Failure::validation(
                    "f_gauge is not supported on the circle",
                ));
            }
            let alpha = pf.potential.a.require_const("a")?;
            let chart = CircleChart::new(TWO_PI * k as f64)?;
            match method {
                Method::Exact => {
                    let v = circle_lambda1_exact(&chart, alpha);
                    Ok(Solved::closed(
                        v,
                        vec![
                            ("lambda1", number(v)),
                            ("method", json!("exact")),
                            ("grid", json!([] as [u32; 0])),
                            ("residual", number(0.0)),
                            ("circumference", number(chart.circumference)),
                        ],
                    ))
                }
                Method::Fd => {
                    let r = circle_lambda1_fd(&chart, alpha, g[0], &opts)?;
                    Ok(Solved {
                        lambda1: r.value,
                        converged: r.converged,
                        residual: r.residual,
                        iterations: r.iterations,
                        body: vec![
                            ("lambda1", number(r.value)),
                            ("method", json!("fd")),
                            ("grid", json!([g[0]])),
                            ("residual", number(r.residual)),
                            ("iterations", json!(r.iterations)),
                            ("circumference", number(chart.circumference)),
                        ],
                    })
                }
                _ => unreachable!("validate() restricts circle methods"),
            }
        }
        (GeometryKind::Nilmanifold, Method::Exact) => {
            if pf.potential.f_gauge.is_some() {
                return Err(Failure::validation(
                    "f_gauge needs a grid method; the closed form already fixes the gauge",
                ));
            }
            let a = pf.potential.a.require_const("a")?;
            let b = pf.potential.b.require_const("b")?;
            let v = nil_lambda1_closed(k, a, b, cap);
            let d2 = lattice_distance_sq(a, b, k);
            let nearest = subrumin::torus::HarmonicLattice { k }.nearest(a, b);
            let branch = if d2 <= cap { "distance" } else { "landau" };
            Ok(Solved::closed(
                v,
                vec![
                    ("lambda1", number(v)),
                    ("method", json!("exact")),
                    ("grid", json!([] as [u32; 0])),
                    ("residual", number(0.0)),
                    ("lattice_point", lattice_point_json(nearest.n, &nearest.tied)),
                    ("lattice_distance_sq", number(d2)),
                    ("branch", json!(branch)),
                ],
            ))
        }
        (GeometryKind::Nilmanifold, Method::Sector) => {
            let pot = one_form(&pf.potential)?;
            let r = nil_lambda1_sector(k, &pot, pf.solver.sectors, g[0], g[1], &opts)?;
            let winner = r
                .per_sector
                .iter()
                .find(|s| s.m == r.winner_m)
                .expect("winner sector is in the scan");
            let per: Vec<Value> = r
                .per_sector
                .iter()
                .map(|s| {
                    json!({
                        "m": s.m,
                        "value": s.value,
                        "residual": s.residual,
                        "iterations": s.iterations,
                        "converged": s.converged,
                    })
                })
                .collect();
            Ok(Solved {
                lambda1: r.lambda1,
                converged: r.converged,
                residual: winner.residual,
                iterations: winner.iterations,
                body: vec![
                    ("lambda1", number(r.lambda1)),
                    ("method", json!("sector")),
                    ("grid", json!([g[0], g[1]])),
                    ("residual", number(winner.residual)),
                    ("winner_m", json!(r.winner_m)),
                    ("harmonic", json!({"a": r.a, "b": r.b})),
                    ("dropped_exact_norm", number(r.dropped_exact_norm)),
                    ("coexact_residual_norm", number(r.coexact_residual_norm)),
                    ("per_sector", Value::Array(per)),
                ],
            })
        }
        (GeometryKind::Nilmanifold, Method::Grid3d) => {
            let pot = one_form(&pf.potential)?;
            let r = nil_lambda1_3d(k, &pot, g[0], g[1], g[2], &opts)?;
            Ok(Solved {
                lambda1: r.value,
                converged: r.converged,
                residual: r.residual,
                iterations: r.iterations,
                body: vec![
                    ("lambda1", number(r.value)),
                    ("method", json!("grid3d")),
                    ("grid", json!([g[0], g[1], g[2]])),
                    ("residual", number(r.residual)),
                    ("iterations", json!(r.iterations)),
                ],
            })
        }
        _ => unreachable!("validate() restricts method-geometry pairs"),
    }
}

fn emit_lambda1(pf: &ProblemFile, max_iter: Option<usize>, cap: (f64, String), t0: Instant) -> Result<(), Failure> {
    let solved = solve_lambda1(pf, max_iter, cap.0)?;
    if !solved.converged {
        return Err(Failure::not_converged(
            solved.lambda1,
            solved.residual,
            solved.iterations,
            Value::Null,
        ));
    }
    let mut body = solved.body;
    body.push(("lambda_convention", lambda_convention(cap.0, &cap.1)));
    let config = serde_json::to_value(pf).ok();
    let rec = record(body, t0.elapsed().as_millis(), pf.solver.seed, config);
    print_record(&rec);
    Ok(())
}

fn torus_lambda1_cmd(args: TorusLambda1Args, t0: Instant) -> Result<(), Failure> {
    let pf = match &args.problem {
        Some(path) => {
            let pf = problem::load_problem(path)?;
            if pf.geometry.kind == GeometryKind::Nilmanifold {
                return Err(Failure::validation(
                    "problem file declares a nilmanifold; use `nil lambda1`",
                ));
            }
            pf
        }
        None => ProblemFile {
            geometry: Geometry {
                kind: GeometryKind::Torus,
                k: args.k,
            },
            potential: Potential {
                a: coeff_spec(&args.a),
                b: coeff_spec(&args.b),
                h: CoeffSpec::Number(0.0),
                f_gauge: args.f_gauge.clone(),
            },
            solver: Solver {
                method: args.method,
                grid: args.grid.clone(),
                sectors: 2,
                tol: args.tol,
                seed: args.seed,
            },
        },
    };
    emit_lambda1(&pf, args.max_iter, landau_constant(None), t0)
}

fn nil_lambda1_cmd(args: NilLambda1Args, t0: Instant) -> Result<(), Failure> {
    let pf = match &args.problem {
        Some(path) => {
            let pf = problem::load_problem(path)?;
            if pf.geometry.kind != GeometryKind::Nilmanifold {
                return Err(Failure::validation(
                    "problem file does not declare a nilmanifold; use `torus lambda1`",
                ));
            }
            pf
        }
        None => ProblemFile {
            geometry: Geometry {
                kind: GeometryKind::Nilmanifold,
                k: args.k,
            },
            potential: Potential {
                a: coeff_spec(&args.a),
                b: coeff_spec(&args.b),
                h: coeff_spec(&args.h),
                f_gauge: args.f_gauge.clone(),
            },
            solver: Solver {
                method: args.method,
                grid: args.grid.clone(),
                sectors: args.sectors,
                tol: args.tol,
                seed: args.seed,
            },
        },
    };
    emit_lambda1(&pf, args.max_iter, landau_constant(args.lambda_cap), t0)
}

fn calibrate_cmd(args: CalibrateArgs, t0: Instant) -> Result<(), Failure> {
    let opts = SolveOptions {
        tol: args.tol,
        seed: args.seed,
        ..SolveOptions::default()
    };
    let cal = calibrate_landau(&args.k_list, &args.m_list, &args.grids, &opts)?;
    let path = args
        .cache
        .clone()
        .map(std::path::PathBuf::from)
        .unwrap_or_else(cache_path);
    let stored = if args.store {
        store_calibration(&path, &cal)
            .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        true
    } else {
        false
    };
    let body = vec![
        ("method", json!("calibrate")),
        ("extrapolated", number(cal.extrapolated)),
        ("uncertainty", number(cal.uncertainty)),
        ("convention_verdict", json!(cal.convention_verdict)),
        (
            "calibration",
            serde_json::to_value(&cal).expect("calibration serializes"),
        ),
        ("cache_path", json!(path.display().to_string())),
        ("stored", json!(stored)),
        (
            "lambda_convention",
            lambda_convention(cal.extrapolated, "this-run"),
        ),
    ];
    print_record(&record(body, t0.elapsed().as_millis(), args.seed, None));
    Ok(())
}

fn bound_cmd(args: BoundArgs, t0: Instant) -> Result<(), Failure> {
    if args.grid.len() != 2 {
        return Err(Failure::validation(format!(
            "--grid needs nv,nw; got {:?}",
            args.grid
        )));
    }
    let pot = one_form(&Potential {
        a: coeff_spec(&args.a),
        b: coeff_spec(&args.b),
        h: coeff_spec(&args.h),
        f_gauge: args.f_gauge.clone(),
    })?;
    let (cap, source) = landau_constant(args.lambda_cap);
    let opts = SolveOptions {
        tol: args.tol,
        seed: args.seed,
        max_iter: args.max_iter.unwrap_or_else(|| SolveOptions::default().max_iter),
        ..SolveOptions::default()
    };
    let rep = subrumin::nil::upper_bound_report(
        args.k,
        &pot,
        args.sectors,
        args.grid[0],
        args.grid[1],
        cap,
        args.sharp_tol,
        &opts,
    )?;
    if !rep.scan.converged {
        return Err(Failure::not_converged(
            rep.lambda1_numeric,
            f64::NAN,
            0,
            json!({"stage": "sector scan"}),
        ));
    }
    let winner = rep
        .scan
        .per_sector
        .iter()
        .find(|s| s.m == rep.scan.winner_m)
        .expect("winner sector is in the scan");
    let per: Vec<Value> = rep
        .scan
        .per_sector
        .iter()
        .map(|s| {
            json!({
                "m": s.m,
                "value": s.value,
                "residual": s.residual,
                "iterations": s.iterations,
                "converged": s.converged,
            })
        })
        .collect();
    let body = vec![
        ("lambda1", number(rep.lambda1_numeric)),
        ("method", json!("sector")),
        ("grid", json!([args.grid[0], args.grid[1]])),
        ("residual", number(winner.residual)),
        ("bound", number(rep.bound_value)),
        ("sharp", json!(rep.sharp)),
        ("residual_term", number(rep.residual_term)),
        ("lattice_point", lattice_point_json(rep.nearest.n, &rep.nearest.tied)),
        ("lattice_distance_sq", number(rep.nearest.dist_sq)),
        ("harmonic", json!({"a": rep.scan.a, "b": rep.scan.b})),
        ("winner_m", json!(rep.scan.winner_m)),
        ("per_sector", Value::Array(per)),
        ("sharp_tol", number(args.sharp_tol)),
        ("lambda_convention", lambda_convention(cap, &source)),
    ];
    print_record(&record(body, t0.elapsed().as_millis(), args.seed, None));
    Ok(())
}

fn flux_cmd(args: FluxArgs, t0: Instant) -> Result<(), Failure> {
    let w = one_form(&Potential {
        a: coeff_spec(&args.p),
        b: coeff_spec(&args.q),
        h: coeff_spec(&args.h),
        f_gauge: None,
    })?;
    let chart = NilmanifoldChart::new(args.k)?;
    let rep = flux_quantized(&w, &chart, args.tol)?;
    let body = vec![
        ("method", json!("flux")),
        ("k", json!(args.k)),
        ("quantized", json!(rep.quantized)),
        ("closed_residual", number(rep.closed_residual)),
        (
            "generator_fluxes",
            json!([rep.generator_fluxes[0], rep.generator_fluxes[1]]),
        ),
        (
            "fluxes_over_two_pi",
            json!([
                rep.generator_fluxes[0] / TWO_PI,
                rep.generator_fluxes[1] / TWO_PI
            ]),
        ),
        (
            "lattice_distances",
            json!([rep.lattice_distances[0], rep.lattice_distances[1]]),
        ),
        ("commutator_flux", number(rep.commutator_flux)),
        ("loops_tested", json!(rep.loops_tested)),
        ("tol", number(args.tol)),
    ];
    print_record(&record(body, t0.elapsed().as_millis(), 0, None));
    Ok(())
}

fn rumin_cmd(args: RuminArgs, t0: Instant) -> Result<(), Failure> {
    if args.points == 0 || !(args.range > 0.0) {
        return Err(Failure::validation("need at least one point and a positive range"));
    }
    let w = one_form(&Potential {
        a: coeff_spec(&args.p),
        b: coeff_spec(&args.q),
        h: coeff_spec(&args.h),
        f_gauge: None,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut pts = Vec::with_capacity(args.points as usize);
    for _ in 0..args.points {
        pts.push([
            rng.random_range(-args.range..args.range),
            rng.random_range(-args.range..args.range),
            rng.random_range(-args.range..args.range),
        ]);
    }
    let horizontal = w.is_horizontal();
    let projected = subrumin::rumin::horizontal_projection(&w);
    let mut rumin_residual = 0.0_f64;
    let mut ext = [0.0_f64; 3];
    let mut dj = 0.0_f64;
    for &at in &pts {
        let r = rumin_d(&projected, at)?;
        rumin_residual = rumin_residual.max(r.max_abs());
        let e = exterior_d(&w, at)?;
        ext[0] = ext[0].max(e.c_xy.abs());
        ext[1] = ext[1].max(e.c_xa.abs());
        ext[2] = ext[2].max(e.c_ya.abs());
        dj = dj.max(delta_j(&projected, at)?.abs());
    }
    let mut body = vec![
        ("method", json!("sample")),
        ("points", json!(args.points)),
        ("range", number(args.range)),
        ("horizontal", json!(horizontal)),
        ("rumin_closed_residual", number(rumin_residual)),
        (
            "exterior_max",
            json!({"c_xy": ext[0], "c_xa": ext[1], "c_ya": ext[2]}),
        ),
        ("delta_j_max", number(dj)),
    ];
    if let Some(src) = &args.f {
        let f = ScalarField::parse(src).map_err(|e| format!("--f: {e}"))?;
        let g = d_h(&f);
        let mut complex_residual = 0.0_f64;
        for &at in &pts {
            complex_residual = complex_residual.max(rumin_d(&g, at)?.max_abs());
        }
        body.push(("complex_residual", number(complex_residual)));
        body.push((
            "gauge_differential",
            json!({
                "p": coeff_to_scalar(&g.p).source(),
                "q": coeff_to_scalar(&g.q).source(),
            }),
        ));
    }
    print_record(&record(body, t0.elapsed().as_millis(), args.seed, None));
    Ok(())
}

fn decompose_cmd(args: DecomposeArgs, t0: Instant) -> Result<(), Failure> {
    if args.grid.len() != 2 {
        return Err(Failure::validation(format!(
            "--grid needs nv,nw; got {:?}",
            args.grid
        )));
    }
    let w = OneForm::horizontal(
        coeff_spec(&args.p).to_coefficient("p")?,
        coeff_spec(&args.q).to_coefficient("q")?,
    );
    let chart = TorusChart::new(args.k)?;
    let grid = TorusGrid::new(chart, args.grid[0], args.grid[1])?;
    let r = decompose(&w, &grid, args.rel_tol)?;
    let cell = grid.hv() * grid.hw();
    let f_l2 = (r.f_grid.iter().map(|v| v * v).sum::<f64>() * cell).sqrt();
    let f_min = r.f_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let f_max = r.f_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut body = vec![
        ("method", json!("cg")),
        ("grid", json!([args.grid[0], args.grid[1]])),
        ("a", number(r.a)),
        ("b", number(r.b)),
        ("exact_part_norm", number(r.exact_part_norm)),
        ("coexact_residual_norm", number(r.coexact_residual_norm)),
        ("cg_iterations", json!(r.cg_iterations)),
        (
            "f_stats",
            json!({"min": f_min, "max": f_max, "l2": f_l2}),
        ),
    ];
    if args.full_field {
        body.push((
            "f_grid",
            Value::Array(r.f_grid.iter().map(|&v| number(v)).collect()),
        ));
    }
    print_record(&record(body, t0.elapsed().as_millis(), 0, None));
    Ok(())
}

fn read_table(path: &str, l_max: u32) -> Result<Vec<f64>, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::validation(format!("{path}: {e}")))?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => return Err(Failure::validation(format!("{path}: empty table"))),
    };
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_lowercase()).collect();
    if cols != ["l", "lambda1"] {
        return Err(Failure::validation(format!(
            "{path}: header must be `l,lambda1`; got {header:?}"
        )));
    }
    let mut values: Vec<Option<f64>> = vec![None; l_max as usize];
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(Failure::validation(format!(
                "{path}:{lineno}: expected two columns"
            )));
        }
        let l: u32 = parts[0]
            .parse()
            .map_err(|_| Failure::validation(format!("{path}:{lineno}: bad l {:?}", parts[0])))?;
        let v: f64 = parts[1].parse().map_err(|_| {
            Failure::validation(format!("{path}:{lineno}: bad lambda1 {:?}", parts[1]))
        })?;
        if l == 0 {
            return Err(Failure::validation(format!("{path}:{lineno}: l starts at 1")));
        }
        if let Some(slot) = values.get_mut(l as usize - 1) {
            if slot.is_some() {
                return Err(Failure::validation(format!(
                    "{path}:{lineno}: duplicate row for l = {l}"
                )));
            }
            *slot = Some(v);
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| Failure::validation(format!("{path}: missing row for l = {}", i + 1)))
        })
        .collect()
}

fn chern_cmd(args: ChernArgs, t0: Instant) -> Result<(), Failure> {
    let (oracle, oracle_name, convention): (SpectralOracle, &str, Option<Value>) = match args.oracle
    {
        OracleKind::Closed => {
            let k_true = args
                .k_true
                .ok_or_else(|| Failure::validation("--k-true is required for the closed oracle"))?;
            let (cap, source) = landau_constant(args.lambda_cap);
            (
                SpectralOracle::ClosedForm {
                    k_true,
                    lambda_cap: cap,
                },
                "closed",
                Some(lambda_convention(cap, &source)),
            )
        }
        OracleKind::Numeric => {
            let k_true = args
                .k_true
                .ok_or_else(|| Failure::validation("--k-true is required for the numeric oracle"))?;
            if args.grid.len() != 2 {
                return Err(Failure::validation(format!(
                    "--grid needs nx,ny; got {:?}",
                    args.grid
                )));
            }
            let (cap, source) = landau_constant(args.lambda_cap);
            (
                SpectralOracle::Numeric {
                    k_true,
                    m_max: args.sectors,
                    nx: args.grid[0],
                    ny: args.grid[1],
                    lambda_cap: cap,
                    opts: SolveOptions {
                        tol: args.tol,
                        seed: args.seed,
                        ..SolveOptions::default()
                    },
                },
                "numeric",
                Some(lambda_convention(cap, &source)),
            )
        }
        OracleKind::Table => {
            let path = args
                .table
                .as_deref()
                .ok_or_else(|| Failure::validation("--table is required for the table oracle"))?;
            (
                SpectralOracle::Table {
                    values: read_table(path, args.lmax)?,
                },
                "table",
                None,
            )
        }
    };
    let r = recover_chern(&oracle, args.lmax, args.zero_tol, args.accept_tol)?;
    let mut body = vec![
        ("method", json!("divisor-scan")),
        ("oracle", json!(oracle_name)),
        ("k_hat", json!(r.k_hat)),
        ("zero_set", json!(r.zero_set)),
        ("consistency_score", number(r.consistency_score)),
        ("l_used", json!(r.l_used)),
        (
            "probes",
            Value::Array(r.probes.iter().map(|&v| number(v)).collect()),
        ),
        (
            "lambda_used",
            r.lambda_used.map(number).unwrap_or(Value::Null),
        ),
        ("zero_tol", number(args.zero_tol)),
        ("accept_tol", number(args.accept_tol)),
    ];
    if let Some(c) = convention {
        body.push(("lambda_convention", c));
    }
    print_record(&record(body, t0.elapsed().as_millis(), args.seed, None));
    Ok(())
}

/// Expand a scalar study size to the grid shape the method expects.
fn study_grid(kind: GeometryKind, method: Method, n: u32) -> Vec<u32> {
    match (kind, method) {
        (GeometryKind::Circle, _) => vec![n],
        (_, Method::Grid3d) => vec![n, n, n],
        _ => vec![n, n],
    }
}

fn order_between(e_prev: f64, e_cur: f64, n_prev: u32, n_cur: u32) -> Option<f64> {
    if e_prev > 0.0 && e_cur > 0.0 && n_cur > n_prev {
        Some((e_prev / e_cur).ln() / (n_cur as f64 / n_prev as f64).ln())
    } else {
        None
    }
}

struct StudyRow {
    n: Option<u32>,
    lambda1: f64,
    error: Option<f64>,
    order: Option<f64>,
}

fn emit_study(
    rows: &[StudyRow],
    reference: Option<(f64, &str)>,
    method: &str,
    csv: Option<&str>,
    seed: u64,
    config: Option<Value>,
    t0: Instant,
) -> Result<(), Failure> {
    let header = ["n", "lambda1", "error", "observed_order"];
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                csv_float(r.lambda1),
                r.error.map(csv_float).unwrap_or_default(),
                r.order.map(csv_float).unwrap_or_default(),
            ]
        })
        .collect();
    if let Some(path) = csv {
        write_csv(path, &header, &csv_rows)?;
    }
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "lambda1": r.lambda1,
                "error": r.error,
                "observed_order": r.order,
            })
        })
        .collect();
    let mut body = vec![
        ("method", json!(method)),
        ("rows", Value::Array(json_rows)),
    ];
    if let Some((v, kind)) = reference {
        body.push(("reference", number(v)));
        body.push(("reference_kind", json!(kind)));
    }
    if let Some(path) = csv {
        body.push(("csv", json!(path)));
    }
    print_record(&record(body, t0.elapsed().as_millis(), seed, config));
    Ok(())
}

fn study_cmd(args: StudyArgs, t0: Instant) -> Result<(), Failure> {
    if args.calibration {
        if args.grids.len() < 3 {
            return Err(Failure::validation(format!(
                "a study needs at least 3 grids; got {:?}",
                args.grids
            )));
        }
        let opts = SolveOptions {
            tol: args.tol,
            seed: args.seed,
            ..SolveOptions::default()
        };
        let cal = calibrate_landau(&[1], &[1], &args.grids, &opts)?;
        let mut rows = Vec::new();
        let mut prev: Option<(f64, u32)> = None;
        for &(n, v) in &cal.estimates {
            let e = (v - cal.extrapolated).abs();
            let order = prev.and_then(|(pe, pn)| order_between(pe, e, pn, n));
            rows.push(StudyRow {
                n: Some(n),
                lambda1: v,
                error: Some(e),
                order,
            });
            prev = Some((e, n));
        }
        return emit_study(
            &rows,
            Some((cal.extrapolated, "richardson")),
            "calibrate",
            args.csv.as_deref(),
            args.seed,
            None,
            t0,
        );
    }

    let path = args
        .problem
        .as_deref()
        .ok_or_else(|| Failure::validation("--problem or --calibration is required"))?;
    let pf = problem::load_problem(path)?;
    let (cap, _) = landau_constant(None);

    if pf.solver.method == Method::Exact {
        let solved = solve_lambda1(&pf, None, cap)?;
        let rows = [StudyRow {
            n: None,
            lambda1: solved.lambda1,
            error: None,
            order: None,
        }];
        return emit_study(
            &rows,
            None,
            "exact",
            args.csv.as_deref(),
            pf.solver.seed,
            serde_json::to_value(&pf).ok(),
            t0,
        );
    }

    if args.grids.len() < 3 {
        return Err(Failure::validation(format!(
            "a study needs at least 3 grids; got {:?}",
            args.grids
        )));
    }

    let reference: Option<(f64, &str)> = match pf.geometry.kind {
        GeometryKind::Torus => match (&pf.potential.a, &pf.potential.b, &pf.potential.f_gauge) {
            (CoeffSpec::Number(a), CoeffSpec::Number(b), None) => {
                Some((torus_lambda1_exact(*a, *b, pf.geometry.k)?.value, "exact"))
            }
            _ => None,
        },
        GeometryKind::Circle => {
            let alpha = pf.potential.a.require_const("a")?;
            let chart = CircleChart::new(TWO_PI * pf.geometry.k as f64)?;
            Some((circle_lambda1_exact(&chart, alpha), "exact"))
        }
        GeometryKind::Nilmanifold => {
            match (&pf.potential.a, &pf.potential.b, &pf.potential.f_gauge) {
                (CoeffSpec::Number(a), CoeffSpec::Number(b), None) => Some((
                    nil_lambda1_closed(pf.geometry.k, *a, *b, cap),
                    "closed-form",
                )),
                _ => None,
            }
        }
    };

    let mut rows = Vec::new();
    let mut lambdas: Vec<f64> = Vec::new();
    for (i, &n) in args.grids.iter().enumerate() {
        let mut pf_n = pf.clone();
        pf_n.solver.grid = study_grid(pf.geometry.kind, pf.solver.method, n);
        let solved = solve_lambda1(&pf_n, args.max_iter, cap)?;
        if !solved.converged {
            return Err(Failure::not_converged(
                solved.lambda1,
                solved.residual,
                solved.iterations,
                json!({"grid_n": n}),
            ));
        }
        lambdas.push(solved.lambda1);
        let error = reference.map(|(r, _)| (solved.lambda1 - r).abs());
        let order = match reference {
            Some((r, _)) if i >= 1 => {
                let e_prev = (lambdas[i - 1] - r).abs();
                let e_cur = (lambdas[i] - r).abs();
                order_between(e_prev, e_cur, args.grids[i - 1], args.grids[i])
            }
            None if i >= 2 => {
                let d_prev = (lambdas[i - 1] - lambdas[i - 2]).abs();
                let d_cur = (lambdas[i] - lambdas[i - 1]).abs();
                order_between(d_prev, d_cur, args.grids[i - 1], args.grids[i])
            }
            _ => None,
        };
        rows.push(StudyRow {
            n: Some(n),
            lambda1: solved.lambda1,
            error,
            order,
        });
    }
    emit_study(
        &rows,
        reference,
        pf.solver.method.name(),
        args.csv.as_deref(),
        pf.solver.seed,
        serde_json::to_value(&pf).ok(),
        t0,
    )
}
