//! The n = 1 Rumin calculus on the Heisenberg frame: horizontal
//! projection, the horizontal differential d_H, the second-order
//! differential on 1-forms, flux integrals over horizontal loops, flux
//! quantization, and the harmonic + exact decomposition of basic forms.
//!
//! Operator conventions, fixed by the frame X = d/dx + y d/dz, Y = d/dy,
//! Z = d/dz and coframe {dx, dy, alpha} with alpha = dz - y dx:
//!
//!   df            = (Xf) dx + (Yf) dy + (Zf) alpha
//!   d(p,q,h)      = (Xq - Yp + h) dx^dy + (Xh - Zp) dx^alpha
//!                                       + (Yh - Zq) dy^alpha
//!   delta(J w)    = Xq - Yp            for horizontal w = p dx + q dy
//!   d_Rm w        = d(w - delta(J w) alpha)
//!
//! The alpha-coefficient Yp - Xq is the unique multiple of alpha whose
//! addition kills the dx^dy component, so d_Rm lands in the span of
//! {dx^alpha, dy^alpha} identically.

use crate::field::{diff, smart, Coefficient, EvalError, FieldExpr, ScalarField, Var};
use crate::geometry::{commutator_loop, standard_generators, HorizontalLoop, Leg, NilmanifoldChart, TorusGrid};
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum RuminError {
    NotHorizontal,
    NonBasic { which: &'static str },
    NotPeriodic { which: &'static str, defect: f64 },
    OpenLoop { defect: f64 },
    NotRuminClosed { residual: f64 },
    PoissonDiverged { rel_residual: f64 },
    BadQuadratureOrder { order: usize },
    Eval(EvalError),
}

impl fmt::Display for RuminError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuminError::NotHorizontal => {
                write!(f, "form has a nonzero alpha-coefficient; project first")
            }
            RuminError::NonBasic { which } => {
                write!(f, "coefficient {which} depends on z; only basic forms are supported here")
            }
            RuminError::NotPeriodic { which, defect } => write!(
                f,
                "coefficient {which} does not descend to the quotient (wrap defect {defect:.3e})"
            ),
            RuminError::OpenLoop { defect } => {
                write!(f, "loop does not close in the quotient (defect {defect:.3e})")
            }
            RuminError::NotRuminClosed { residual } => write!(
                f,
                "form is not closed for the second-order differential (residual {residual:.3e})"
            ),
            RuminError::PoissonDiverged { rel_residual } => write!(
                f,
                "Poisson solve stalled at relative residual {rel_residual:.3e}"
            ),
            RuminError::BadQuadratureOrder { order } => {
                write!(f, "quadrature order {order} outside 1..=64")
            }
            RuminError::Eval(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RuminError {}

impl From<EvalError> for RuminError {
    fn from(e: EvalError) -> Self {
        RuminError::Eval(e)
    }
}

/// Real 1-form in the coframe {dx, dy, alpha}.
#[derive(Clone, Debug)]
pub struct OneForm {
    pub p: Coefficient,
    pub q: Coefficient,
    pub h: Coefficient,
}

impl OneForm {
    pub fn new(p: Coefficient, q: Coefficient, h: Coefficient) -> Self {
        OneForm { p, q, h }
    }

    pub fn horizontal(p: Coefficient, q: Coefficient) -> Self {
        OneForm {
            p,
            q,
            h: Coefficient::Const(0.0),
        }
    }

    /// a dx + b dy.
    pub fn constant(a: f64, b: f64) -> Self {
        Self::horizontal(Coefficient::Const(a), Coefficient::Const(b))
    }

    /// Coefficient triple (p, q, h) at a point, in the coframe basis.
    pub fn eval(&self, at: [f64; 3]) -> Result<[f64; 3], EvalError> {
        Ok([
            self.p.eval(at[0], at[1], at[2])?,
            self.q.eval(at[0], at[1], at[2])?,
            self.h.eval(at[0], at[1], at[2])?,
        ])
    }

    /// Coefficient-wise sum. Constant slots stay constants; a mixed or
    /// symbolic slot becomes a symbolic sum.
    pub fn add(&self, other: &OneForm) -> OneForm {
        fn plus(a: &Coefficient, b: &Coefficient) -> Coefficient {
            let expr = |c: &Coefficient| match c {
                Coefficient::Const(v) => smart::num(*v),
                Coefficient::Field(f) => f.expr().clone(),
            };
            match (a, b) {
                (Coefficient::Const(x), Coefficient::Const(y)) => Coefficient::Const(x + y),
                _ => Coefficient::Field(ScalarField::from_expr(smart::add(expr(a), expr(b)))),
            }
        }
        OneForm {
            p: plus(&self.p, &other.p),
            q: plus(&self.q, &other.q),
            h: plus(&self.h, &other.h),
        }
    }

    /// Horizontality is structural: the alpha-slot holds the constant 0.
    pub fn is_horizontal(&self) -> bool {
        matches!(self.h, Coefficient::Const(v) if v == 0.0)
    }
}

/// Pointwise value of a 2-form in the basis {dx^dy, dx^alpha, dy^alpha}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoForm {
    pub c_xy: f64,
    pub c_xa: f64,
    pub c_ya: f64,
}

impl TwoForm {
    pub fn max_abs(&self) -> f64 {
        self.c_xy.abs().max(self.c_xa.abs()).max(self.c_ya.abs())
    }
}

/// Drop the alpha-component: (p, q, h) -> (p, q, 0). Idempotent.
pub fn horizontal_projection(w: &OneForm) -> OneForm {
    OneForm {
        p: w.p.clone(),
        q: w.q.clone(),
        h: Coefficient::Const(0.0),
    }
}

/// Horizontal differential of a scalar field, built symbolically:
/// d_H g = (Xg) dx + (Yg) dy.
pub fn d_h(g: &ScalarField) -> OneForm {
    let gx = diff(g.expr(), Var::X);
    let gz = diff(g.expr(), Var::Z);
    let p = smart::add(gx, smart::mul(FieldExpr::Var(Var::Y), gz));
    let q = diff(g.expr(), Var::Y);
    OneForm::horizontal(
        Coefficient::Field(ScalarField::from_expr(p)),
        Coefficient::Field(ScalarField::from_expr(q)),
    )
}

/// delta(J w) = Xq - Yp for horizontal w. This is the divergence of the
/// quarter-turned horizontal field, and equals the dx^dy-coefficient
/// obstruction that d_Rm removes.
pub fn delta_j(w: &OneForm, at: [f64; 3]) -> Result<f64, RuminError> {
    if !w.is_horizontal() {
        return Err(RuminError::NotHorizontal);
    }
    let p = w.p.jet(at[0], at[1], at[2])?;
    let q = w.q.jet(at[0], at[1], at[2])?;
    Ok(q.x_frame(at[1]) - p.y_frame())
}

/// Full de Rham differential of (p, q, h) in the frame coframe, using
/// d alpha = dx^dy.
pub fn exterior_d(w: &OneForm, at: [f64; 3]) -> Result<TwoForm, RuminError> {
    let y = at[1];
    let p = w.p.jet(at[0], at[1], at[2])?;
    let q = w.q.jet(at[0], at[1], at[2])?;
    let h = w.h.jet(at[0], at[1], at[2])?;
    Ok(TwoForm {
        c_xy: q.x_frame(y) - p.y_frame() + h.value,
        c_xa: h.x_frame(y) - p.z_frame(),
        c_ya: h.y_frame() - q.z_frame(),
    })
}

/// Second-order differential on horizontal 1-forms:
/// d_Rm w = d(w + (Yp - Xq) alpha). The dx^dy coefficient cancels exactly;
/// the two alpha-components carry second derivatives of p and q.
pub fn rumin_d(w: &OneForm, at: [f64; 3]) -> Result<TwoForm, RuminError> {
    if !w.is_horizontal() {
        return Err(RuminError::NotHorizontal);
    }
    let y = at[1];
    let p = w.p.jet(at[0], at[1], at[2])?;
    let q = w.q.jet(at[0], at[1], at[2])?;
    let f_w = p.y_frame() - q.x_frame(y);
    let c_xy = q.x_frame(y) - p.y_frame() + f_w;
    debug_assert!(c_xy.abs() <= 1e-9);
    // X(Yp - Xq) - Zp and Y(Yp - Xq) - Zq, frame-expanded.
    let c_xa = p.xy_frame(y) - q.xx_frame(y) - p.z_frame();
    let c_ya = p.yy_frame() - q.yx_frame(y) - q.z_frame();
    Ok(TwoForm { c_xy, c_xa, c_ya })
}

/// Gauss-Legendre nodes and weights on [0, 1], weights summing to 1.
/// Nodes found by Newton iteration on the Legendre recurrence.
fn gauss_legendre_unit(order: usize) -> Result<Vec<(f64, f64)>, RuminError> {
    if order == 0 || order > 64 {
        return Err(RuminError::BadQuadratureOrder { order });
    }
    let n = order;
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for m in 2..=n {
                let m = m as f64;
                let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            let pn = p1;
            let dpn = n as f64 * (x * pn - p0) / (x * x - 1.0);
            let step = pn / dpn;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for m in 2..=n {
            let m = m as f64;
            let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
            p0 = p1;
            p1 = p2;
        }
        let dpn = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dpn * dpn);
        out.push(((x + 1.0) / 2.0, w / 2.0));
    }
    Ok(out)
}

/// Line integral of a 1-form over a piecewise frame-flow loop. Only p and
/// q contribute: the velocity is horizontal, and alpha annihilates it.
/// Loops must close in the quotient (tolerance 1e-9).
pub fn flux_integral(
    a: &OneForm,
    lp: &HorizontalLoop,
    chart: &NilmanifoldChart,
    quad_order: usize,
) -> Result<f64, RuminError> {
    let defect = chart.lattice_defect(lp.base, lp.endpoint());
    if defect > 1e-9 {
        return Err(RuminError::OpenLoop { defect });
    }
    let nodes = gauss_legendre_unit(quad_order)?;
    let mut total = 0.0;
    let mut start = lp.base;
    for &leg in &lp.legs {
        let t = match leg {
            Leg::X(t) | Leg::Y(t) => t,
        };
        let mut seg = 0.0;
        for &(u, w) in &nodes {
            let here = HorizontalLoop::flow(
                start,
                match leg {
                    Leg::X(_) => Leg::X(t * u),
                    Leg::Y(_) => Leg::Y(t * u),
                },
            );
            let coeff = match leg {
                Leg::X(_) => a.p.eval(here[0], here[1], here[2])?,
                Leg::Y(_) => a.q.eval(here[0], here[1], here[2])?,
            };
            seg += w * coeff;
        }
        total += t * seg;
        start = HorizontalLoop::flow(start, leg);
    }
    Ok(total)
}

/// Quantization witness for a closed horizontal form.
#[derive(Clone, Debug)]
pub struct FluxReport {
    /// Largest sampled magnitude of the second-order differential.
    pub closed_residual: f64,
    /// Fluxes over the two generator loops (X for time k, Y for time 1).
    pub generator_fluxes: [f64; 2],
    /// Distance of each generator flux to 2 pi Z.
    pub lattice_distances: [f64; 2],
    /// Flux over the t = 1 commutator square. Zero exactly when the form
    /// is closed for the full exterior differential; a merely
    /// Rumin-closed form reads its curvature off it.
    pub commutator_flux: f64,
    pub quantized: bool,
    /// The reduction to finitely many loops, spelled out.
    pub loops_tested: Vec<String>,
}

/// Decide whether a Rumin-closed horizontal form has both generator
/// fluxes in 2 pi Z.
///
/// The generator fluxes fix the cohomology pairing that the quantization
/// question asks about; commuting loops add nothing new. The commutator
/// square is reported alongside because it is what a horizontal form can
/// still see beyond cohomology: its curvature. Sampling verifies
/// Rumin-closedness first.
pub fn flux_quantized(
    a: &OneForm,
    chart: &NilmanifoldChart,
    tol: f64,
) -> Result<FluxReport, RuminError> {
    let a_h = horizontal_projection(a);
    let k = chart.k as f64;
    let mut closed_residual = 0.0_f64;
    for i in 0..4 {
        for j in 0..4 {
            for l in 0..4 {
                let at = [
                    (i as f64 + 0.381966) / 4.0 * k,
                    (j as f64 + 0.618034) / 4.0,
                    (l as f64 + 0.236068) / 4.0,
                ];
                let d = rumin_d(&a_h, at)?;
                closed_residual = closed_residual.max(d.max_abs());
            }
        }
    }
    if closed_residual > tol {
        return Err(RuminError::NotRuminClosed {
            residual: closed_residual,
        });
    }

    let [g1, g2] = standard_generators(chart);
    let f1 = flux_integral(&a_h, &g1, chart, 8)?;
    let f2 = flux_integral(&a_h, &g2, chart, 8)?;
    let comm = flux_integral(&a_h, &commutator_loop([0.0; 3], 1.0), chart, 8)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let dist = |t: f64| (t - two_pi * (t / two_pi).round()).abs();
    let d1 = dist(f1);
    let d2 = dist(f2);
    Ok(FluxReport {
        closed_residual,
        generator_fluxes: [f1, f2],
        lattice_distances: [d1, d2],
        commutator_flux: comm,
        quantized: d1 <= tol && d2 <= tol,
        loops_tested: vec![
            format!("x-generator: X-flow for time {}", chart.k),
            "y-generator: Y-flow for time 1".to_string(),
            "commutator square at t = 1".to_string(),
        ],
    })
}

/// Outcome of splitting a basic horizontal form into harmonic, exact, and
/// co-exact parts.
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    /// Harmonic part xi = a dx + b dy.
    pub a: f64,
    pub b: f64,
    /// L2 norm (grid measure) of the recovered d_H f component.
    pub exact_part_norm: f64,
    /// L2 norm of what remains after removing xi and d_H f.
    pub coexact_residual_norm: f64,
    /// Zero-mean potential f on the grid, row-major (w fastest).
    pub f_grid: Vec<f64>,
    pub cg_iterations: usize,
}

fn check_basic(c: &Coefficient, which: &'static str) -> Result<(), RuminError> {
    if !c.is_z_free() {
        return Err(RuminError::NonBasic { which });
    }
    Ok(())
}

fn check_torus_periodic(
    c: &Coefficient,
    k: f64,
    which: &'static str,
) -> Result<(), RuminError> {
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
        return Err(RuminError::NotPeriodic {
            which,
            defect: worst,
        });
    }
    Ok(())
}

/// Split a basic horizontal form on the scale-k torus:
/// omega = a dx + b dy + d_H f + (co-exact remainder).
///
/// The harmonic coefficients are the mean values of p and q (the L2
/// projection onto the flat harmonic basis). f solves the discrete
/// least-squares problem min ||grad f - (omega - xi)|| on the grid via
/// conjugate gradients on the 5-point normal equations, pinned to mean
/// zero. Coefficients must be z-free and periodic; the sub-Riemannian
/// content of the general problem reduces to this flat one on basic
/// forms, which is the only class the decomposition theory needs.
pub fn decompose(
    w: &OneForm,
    grid: &TorusGrid,
    rel_tol: f64,
) -> Result<DecompositionResult, RuminError> {
    let w = horizontal_projection(w);
    check_basic(&w.p, "p")?;
    check_basic(&w.q, "q")?;
    let k = grid.chart.k as f64;
    check_torus_periodic(&w.p, k, "p")?;
    check_torus_periodic(&w.q, k, "q")?;

    let (nv, nw) = (grid.nv as usize, grid.nw as usize);
    let n = nv * nw;
    let (hv, hw) = (grid.hv(), grid.hw());
    let cell = hv * hw;

    let mut pp = vec![0.0; n];
    let mut qq = vec![0.0; n];
    for i in 0..nv {
        for j in 0..nw {
            let (v, wco) = grid.point(i as u32, j as u32);
            let id = grid.index(i as u32, j as u32);
            pp[id] = w.p.eval(v, wco, 0.0)?;
            qq[id] = w.q.eval(v, wco, 0.0)?;
        }
    }
    let a = pp.iter().sum::<f64>() / n as f64;
    let b = qq.iter().sum::<f64>() / n as f64;
    for v in &mut pp {
        *v -= a;
    }
    for v in &mut qq {
        *v -= b;
    }

    // Forward-difference gradient and its adjoint on the periodic grid.
    let grad = |f: &[f64], gv: &mut [f64], gw: &mut [f64]| {
        for i in 0..nv {
            for j in 0..nw {
                let id = i * nw + j;
                let ie = ((i + 1) % nv) * nw + j;
                let je = i * nw + (j + 1) % nw;
                gv[id] = (f[ie] - f[id]) / hv;
                gw[id] = (f[je] - f[id]) / hw;
            }
        }
    };
    let grad_adj = |gv: &[f64], gw: &[f64], out: &mut [f64]| {
        for i in 0..nv {
            for j in 0..nw {
                let id = i * nw + j;
                let iw = ((i + nv - 1) % nv) * nw + j;
                let jw = i * nw + (j + nw - 1) % nw;
                out[id] = (gv[iw] - gv[id]) / hv + (gw[jw] - gw[id]) / hw;
            }
        }
    };
    let laplace = |f: &[f64], out: &mut [f64], t1: &mut [f64], t2: &mut [f64]| {
        grad(f, t1, t2);
        grad_adj(t1, t2, out);
    };
    let project_zero_mean = |f: &mut [f64]| {
        let m = f.iter().sum::<f64>() / f.len() as f64;
        for v in f.iter_mut() {
            *v -= m;
        }
    };

    let mut rhs = vec![0.0; n];
    grad_adj(&pp, &qq, &mut rhs);
    project_zero_mean(&mut rhs);

    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut f = vec![0.0; n];
    let mut cg_iterations = 0;
    if rhs_norm > 0.0 {
        let mut t1 = vec![0.0; n];
        let mut t2 = vec![0.0; n];
        let mut r = rhs.clone();
        let mut d = r.clone();
        let mut rr: f64 = r.iter().map(|v| v * v).sum();
        let max_iter = 40 * (nv + nw).max(100);
        loop {
            if rr.sqrt() <= rel_tol * rhs_norm {
                break;
            }
            if cg_iterations >= max_iter {
                return Err(RuminError::PoissonDiverged {
                    rel_residual: rr.sqrt() / rhs_norm,
                });
            }
            cg_iterations += 1;
            let mut ld = vec![0.0; n];
            laplace(&d, &mut ld, &mut t1, &mut t2);
            let dld: f64 = d.iter().zip(&ld).map(|(x, y)| x * y).sum();
            let alpha = rr / dld;
            for (fi, di) in f.iter_mut().zip(&d) {
                *fi += alpha * di;
            }
            for (ri, ldi) in r.iter_mut().zip(&ld) {
                *ri -= alpha * ldi;
            }
            project_zero_mean(&mut r);
            let rr_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rr_new / rr;
            rr = rr_new;
            for (di, ri) in d.iter_mut().zip(&r) {
                *di = ri + beta * *di;
            }
        }
        project_zero_mean(&mut f);
    }

    let mut gv = vec![0.0; n];
    let mut gw = vec![0.0; n];
    grad(&f, &mut gv, &mut gw);
    let exact_part_norm = (cell
        * gv.iter()
            .chain(gw.iter())
            .map(|v| v * v)
            .sum::<f64>())
    .sqrt();
    let coexact_residual_norm = (cell
        * pp.iter()
            .zip(&gv)
            .map(|(p, g)| (p - g) * (p - g))
            .chain(qq.iter().zip(&gw).map(|(q, g)| (q - g) * (q - g)))
            .sum::<f64>())
    .sqrt();

    Ok(DecompositionResult {
        a,
        b,
        exact_part_norm,
        coexact_residual_norm,
        f_grid: f,
        cg_iterations,
    })
}
