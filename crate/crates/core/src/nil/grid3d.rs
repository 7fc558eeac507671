//! Direct 3D discretization on the fundamental domain, used as an
//! independent oracle for the sector solvers. The operator is assembled
//! as D_X* D_X + D_Y* D_Y from covariant frame differences:
//!
//!   D_X = forward x-difference with the a-potential Peierls phase,
//!         plus y_j times the central z-difference (the frame shear),
//!   D_Y = forward y-difference with the b-potential phase; crossing the
//!         y-seam re-indexes z by the quotient identification, which the
//!         grid's wrap handles exactly, no boundary phase needed.
//!
//! The Gram form keeps the matrix Hermitian nonnegative by construction,
//! and the forward-difference bias cancels in the quadratic form because
//! the frame coefficients are x- and y-independent along their own
//! directions, leaving second-order accuracy.

use super::NilError;
use crate::eigen::{smallest_eigenpair, SolveOptions, SparseHermitian};
use crate::field::Coefficient;
use crate::geometry::{FundamentalDomainGrid, NilmanifoldChart};
use crate::rumin::OneForm;
use num_complex::Complex64;

fn outer(trip: &mut Vec<(usize, usize, Complex64)>, cols: &[usize], vals: &[Complex64]) {
    for (alpha, &ca) in cols.iter().enumerate() {
        for (beta, &cb) in cols.iter().enumerate() {
            trip.push((ca, cb, vals[alpha].conj() * vals[beta]));
        }
    }
}

/// Coefficients must descend to the quotient: invariant under the three
/// lattice identifications, the sheared y-wrap included. Sampled check;
/// constants skip it.
fn check_descends(
    c: &Coefficient,
    k: f64,
    which: &'static str,
) -> Result<(), NilError> {
    if matches!(c, Coefficient::Const(_)) {
        return Ok(());
    }
    let mut worst = 0.0_f64;
    for i in 0..4 {
        for j in 0..4 {
            for l in 0..4 {
                let x = (i as f64 + 0.37) / 4.0 * k;
                let y = (j as f64 + 0.61) / 4.0;
                let z = (l as f64 + 0.24) / 4.0;
                let base = c.eval(x, y, z)?;
                worst = worst.max((c.eval(x + k, y, z)? - base).abs());
                worst = worst.max((c.eval(x, y + 1.0, z + x)? - base).abs());
                worst = worst.max((c.eval(x, y, z + 1.0)? - base).abs());
            }
        }
    }
    if worst > 1e-9 {
        return Err(NilError::NotDescending {
            which,
            defect: worst,
        });
    }
    Ok(())
}

/// Assemble the horizontal magnetic Laplacian for a potential
/// a dx + b dy on the given fundamental-domain grid. Unlike the sector
/// path, coefficients may depend on z as long as they descend to the
/// quotient; phases are sampled at the midpoint of each frame flow.
pub fn assemble_heisenberg_3d(
    grid: &FundamentalDomainGrid,
    a: &Coefficient,
    b: &Coefficient,
) -> Result<SparseHermitian, NilError> {
    let kf = grid.chart.k as f64;
    check_descends(a, kf, "a")?;
    check_descends(b, kf, "b")?;
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    if nx < 8 || ny < 8 || nz < 8 {
        return Err(NilError::Grid3dTooCoarse { nx, ny, nz });
    }
    let (hx, hy, hz) = (grid.hx(), grid.hy(), grid.hz());
    let n = grid.len();
    let mut trip = Vec::with_capacity(20 * n);
    for i in 0..nx {
        for j in 0..ny {
            for l in 0..nz {
                let p = grid.index(i, j, l);
                let [x, y, z] = grid.point(i, j, l);
                let (ii, jj, ll) = (i as i64, j as i64, l as i64);

                // Midpoint of the X-flow segment, which drifts in z at
                // rate y.
                let phase_a = a.eval(x + 0.5 * hx, y, z + 0.5 * y * hx)? * hx;
                let shear = y / (2.0 * hz);
                let x_cols = [
                    p,
                    grid.wrap3(ii + 1, jj, ll),
                    grid.wrap3(ii, jj, ll + 1),
                    grid.wrap3(ii, jj, ll - 1),
                ];
                let x_vals = [
                    Complex64::new(-1.0 / hx, 0.0),
                    Complex64::from_polar(1.0 / hx, -phase_a),
                    Complex64::new(shear, 0.0),
                    Complex64::new(-shear, 0.0),
                ];
                outer(&mut trip, &x_cols, &x_vals);

                let phase_b = b.eval(x, y + 0.5 * hy, z)? * hy;
                let y_cols = [p, grid.wrap3(ii, jj + 1, ll)];
                let y_vals = [
                    Complex64::new(-1.0 / hy, 0.0),
                    Complex64::from_polar(1.0 / hy, -phase_b),
                ];
                outer(&mut trip, &y_cols, &y_vals);
            }
        }
    }
    Ok(SparseHermitian::from_triplets(n, &trip).expect("Gram assembly is Hermitian"))
}

#[derive(Clone, Debug)]
pub struct Lambda3d {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grid: (u32, u32, u32),
}

/// Smallest eigenvalue through the 3D oracle. The vertical component of
/// the potential is dropped exactly, as in the sector path.
pub fn nil_lambda1_3d(
    k: u32,
    pot: &OneForm,
    nx: u32,
    ny: u32,
    nz: u32,
    opts: &SolveOptions,
) -> Result<Lambda3d, NilError> {
    let chart = NilmanifoldChart::new(k)?;
    let grid = FundamentalDomainGrid::new(chart, nx, ny, nz)?;
    let h = assemble_heisenberg_3d(&grid, &pot.p, &pot.q)?;
    let mut solve_opts = *opts;
    solve_opts.measure_weight = grid.hx() * grid.hy() * grid.hz();
    let r = smallest_eigenpair(&h, &solve_opts);
    Ok(Lambda3d {
        value: r.value,
        residual: r.residual,
        iterations: r.iterations,
        converged: r.converged,
        grid: (nx, ny, nz),
    })
}
