//! Magnetic Laplacian on the scaled torus [0,k) x [0,1): the harmonic
//! lattice of quantized constant potentials, the exact lattice-distance
//! eigenvalue formula, a Peierls finite-difference solver for general
//! periodic potentials, and the normalized flux constant mu.

use crate::eigen::{smallest_eigenpair, EigResult, SolveOptions, SparseHermitian};
use crate::field::{EvalError, ScalarField};
use crate::geometry::TorusChart;
use num_complex::Complex64;
use std::fmt;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub enum TorusError {
    BadScale,
    GridTooCoarse { nv: u32, nw: u32 },
    ZDependent { which: &'static str },
    NotPeriodic { which: &'static str, defect: f64 },
    Eval(EvalError),
}

impl fmt::Display for TorusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorusError::BadScale => write!(f, "scale k must be a positive integer"),
            TorusError::GridTooCoarse { nv, nw } => {
                write!(f, "grid {nv}x{nw} too coarse; need at least 8 points per direction")
            }
            TorusError::ZDependent { which } => {
                write!(f, "potential coefficient {which} mentions z; torus fields live on (x, y)")
            }
            TorusError::NotPeriodic { which, defect } => write!(
                f,
                "potential coefficient {which} is not periodic on the torus (defect {defect:.3e})"
            ),
            TorusError::Eval(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TorusError {}

impl From<EvalError> for TorusError {
    fn from(e: EvalError) -> Self {
        TorusError::Eval(e)
    }
}

/// The lattice of quantized constant potentials a dx + b dy: a in
/// (2 pi / k) Z and b in 2 pi Z.
#[derive(Clone, Copy, Debug)]
pub struct HarmonicLattice {
    pub k: u32,
}

/// Nearest lattice point to a query, with the full set of minimizers when
/// the query sits at a midpoint. `n` is always the lexicographically
/// smallest minimizer, so output is deterministic; `dist_sq` is the same
/// for every member of `tied`.
#[derive(Clone, Debug)]
pub struct NearestLatticePoint {
    pub n: (i64, i64),
    pub point: (f64, f64),
    pub dist_sq: f64,
    pub tied: Vec<(i64, i64)>,
}

/// Nearest multiple of `step` to `t`, half-ties resolved downward, plus
/// the tied alternative if the query is a midpoint.
fn nearest_multiple(t: f64, step: f64) -> (i64, Option<i64>) {
    let u = t / step;
    let lo = (u - 0.5).ceil() as i64;
    let d_lo = (u - lo as f64).abs();
    let d_hi = ((lo + 1) as f64 - u).abs();
    if (d_lo - d_hi).abs() <= 1e-12 * u.abs().max(1.0) {
        (lo, Some(lo + 1))
    } else {
        (lo, None)
    }
}

impl HarmonicLattice {
    pub fn new(k: u32) -> Result<Self, TorusError> {
        if k == 0 {
            return Err(TorusError::BadScale);
        }
        Ok(HarmonicLattice { k })
    }

    pub fn step_v(&self) -> f64 {
        TWO_PI / self.k as f64
    }

    pub fn step_w(&self) -> f64 {
        TWO_PI
    }

    pub fn contains(&self, a: f64, b: f64, tol: f64) -> bool {
        self.nearest(a, b).dist_sq <= tol * tol
    }

    pub fn nearest(&self, a: f64, b: f64) -> NearestLatticePoint {
        let (sv, sw) = (self.step_v(), self.step_w());
        let (n1, t1) = nearest_multiple(a, sv);
        let (n2, t2) = nearest_multiple(b, sw);
        let da = a - n1 as f64 * sv;
        let db = b - n2 as f64 * sw;
        let mut tied = vec![(n1, n2)];
        for &alt1 in t1.iter() {
            tied.push((alt1, n2));
        }
        for &alt2 in t2.iter() {
            tied.push((n1, alt2));
        }
        if let (Some(alt1), Some(alt2)) = (t1, t2) {
            tied.push((alt1, alt2));
        }
        NearestLatticePoint {
            n: (n1, n2),
            point: (n1 as f64 * sv, n2 as f64 * sw),
            dist_sq: da * da + db * db,
            tied,
        }
    }
}

/// dist(a, (2 pi / k) Z)^2 + dist(b, 2 pi Z)^2.
pub fn lattice_distance_sq(a: f64, b: f64, k: u32) -> f64 {
    HarmonicLattice { k }.nearest(a, b).dist_sq
}

#[derive(Clone, Debug)]
pub struct ExactTorusLambda {
    pub value: f64,
    pub nearest: NearestLatticePoint,
}

/// Closed-form lambda_1 for a constant potential a dx + b dy: the squared
/// distance to the harmonic lattice, achieved by gauging away the nearest
/// lattice point.
pub fn torus_lambda1_exact(a: f64, b: f64, k: u32) -> Result<ExactTorusLambda, TorusError> {
    let lat = HarmonicLattice::new(k)?;
    let nearest = lat.nearest(a, b);
    Ok(ExactTorusLambda {
        value: nearest.dist_sq,
        nearest,
    })
}

/// Normalized flux of the unit symplectic area form: |integral of Omega|
/// divided by the volume. Both equal k, so the ratio is scale-free.
pub fn landau_mu(k: u32) -> f64 {
    landau_mu_scaled(k, 1.0)
}

/// Same ratio with Omega scaled by c.
pub fn landau_mu_scaled(k: u32, c: f64) -> f64 {
    let vol = k as f64;
    (c * vol).abs() / vol
}

#[derive(Clone, Debug)]
pub enum TorusPotential {
    Constant { a: f64, b: f64 },
    /// Coefficients as fields of (x, y); must be z-free and periodic with
    /// periods (k, 1).
    Field { a: ScalarField, b: ScalarField },
}

impl TorusPotential {
    pub fn constant(a: f64, b: f64) -> Self {
        TorusPotential::Constant { a, b }
    }
}

/// Shared 5-point magnetic stencil on an nv x nw periodic grid. The
/// closures give the integrated potential (the phase angle) along the
/// forward link leaving node (i, j) in each direction; hops carry
/// exp(-i phase). Diagonal 2/h^2 per direction, exact conjugate pairs.
pub(crate) fn assemble_magnetic_2d<Fv, Fw>(
    nv: u32,
    nw: u32,
    hv: f64,
    hw: f64,
    phase_v: Fv,
    phase_w: Fw,
) -> SparseHermitian
where
    Fv: Fn(u32, u32) -> f64,
    Fw: Fn(u32, u32) -> f64,
{
    let n = (nv as usize) * (nw as usize);
    let idx = |i: u32, j: u32| (i as usize) * (nw as usize) + j as usize;
    let inv_hv2 = 1.0 / (hv * hv);
    let inv_hw2 = 1.0 / (hw * hw);
    let diag = Complex64::new(2.0 * inv_hv2 + 2.0 * inv_hw2, 0.0);
    let mut trip = Vec::with_capacity(5 * n);
    for i in 0..nv {
        for j in 0..nw {
            let id = idx(i, j);
            trip.push((id, id, diag));
            let east = idx((i + 1) % nv, j);
            let uv = -Complex64::from_polar(inv_hv2, -phase_v(i, j));
            trip.push((id, east, uv));
            trip.push((east, id, uv.conj()));
            let north = idx(i, (j + 1) % nw);
            let uw = -Complex64::from_polar(inv_hw2, -phase_w(i, j));
            trip.push((id, north, uw));
            trip.push((north, id, uw.conj()));
        }
    }
    SparseHermitian::from_triplets(n, &trip).expect("stencil is Hermitian by construction")
}

fn check_field(c: &ScalarField, k: f64, which: &'static str) -> Result<(), TorusError> {
    if !c.is_z_free() {
        return Err(TorusError::ZDependent { which });
    }
    let mut worst = 0.0_f64;
    for i in 0..5 {
        for j in 0..5 {
            let v = (i as f64 + 0.618034) / 5.0 * k;
            let w = (j as f64 + 0.381966) / 5.0;
            let base = c.eval(v, w, 0.0)?;
            worst = worst.max((c.eval(v + k, w, 0.0)? - base).abs());
            worst = worst.max((c.eval(v, w + 1.0, 0.0)? - base).abs());
        }
    }
    if worst > 1e-9 {
        return Err(TorusError::NotPeriodic {
            which,
            defect: worst,
        });
    }
    Ok(())
}

/// Magnetic Laplacian for a potential on the scale-k torus. Constant
/// coefficients enter links exactly; fields are integrated along each
/// link by 2-point Gauss quadrature.
pub fn assemble_torus(
    chart: &TorusChart,
    pot: &TorusPotential,
    nv: u32,
    nw: u32,
) -> Result<SparseHermitian, TorusError> {
    if nv < 8 || nw < 8 {
        return Err(TorusError::GridTooCoarse { nv, nw });
    }
    let hv = chart.k as f64 / nv as f64;
    let hw = 1.0 / nw as f64;
    match pot {
        TorusPotential::Constant { a, b } => {
            let (pa, pb) = (a * hv, b * hw);
            Ok(assemble_magnetic_2d(nv, nw, hv, hw, |_, _| pa, |_, _| pb))
        }
        TorusPotential::Field { a, b } => {
            check_field(a, chart.k as f64, "a")?;
            check_field(b, chart.k as f64, "b")?;
            // Gauss points on the unit link.
            let g0 = 0.5 - 0.5 / 3.0_f64.sqrt();
            let g1 = 0.5 + 0.5 / 3.0_f64.sqrt();
            let n = (nv as usize) * (nw as usize);
            let mut pv = vec![0.0; n];
            let mut pw = vec![0.0; n];
            for i in 0..nv {
                for j in 0..nw {
                    let (v, w) = (i as f64 * hv, j as f64 * hw);
                    let id = (i as usize) * (nw as usize) + j as usize;
                    pv[id] = hv / 2.0
                        * (a.eval(v + g0 * hv, w, 0.0)? + a.eval(v + g1 * hv, w, 0.0)?);
                    pw[id] = hw / 2.0
                        * (b.eval(v, w + g0 * hw, 0.0)? + b.eval(v, w + g1 * hw, 0.0)?);
                }
            }
            let at = |store: &[f64], i: u32, j: u32| {
                store[(i as usize) * (nw as usize) + j as usize]
            };
            Ok(assemble_magnetic_2d(
                nv,
                nw,
                hv,
                hw,
                |i, j| at(&pv, i, j),
                |i, j| at(&pw, i, j),
            ))
        }
    }
}

#[derive(Clone, Debug)]
pub struct TorusLambda1 {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grid: (u32, u32),
}

pub fn torus_lambda1_fd(
    chart: &TorusChart,
    pot: &TorusPotential,
    nv: u32,
    nw: u32,
    opts: &SolveOptions,
) -> Result<TorusLambda1, TorusError> {
    let h = assemble_torus(chart, pot, nv, nw)?;
    let mut opts = *opts;
    opts.measure_weight = (chart.k as f64 / nv as f64) * (1.0 / nw as f64);
    let r: EigResult = smallest_eigenpair(&h, &opts);
    Ok(TorusLambda1 {
        value: r.value,
        residual: r.residual,
        iterations: r.iterations,
        converged: r.converged,
        grid: (nv, nw),
    })
}
