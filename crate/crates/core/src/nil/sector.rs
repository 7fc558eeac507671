//! Fourier-sector reduction. A function on the quotient expands along
//! the central circle as f = e^{2 pi i m z} psi(x, y); the horizontal
//! Laplacian restricted to the m-sector is a 2D magnetic Schrödinger
//! operator whose vector potential grows linearly in y, with the twisted
//! boundary condition psi(x, y+1) = e^{-2 pi i m x} psi(x, y) closing the
//! seam. Flux through one plaquette is 2 pi m h_x h_y everywhere, seam
//! included; the total is 2 pi m k.

use super::NilError;
use crate::eigen::{smallest_eigenpair, SolveOptions, SparseHermitian};
use crate::geometry::{TorusChart, TorusGrid};
use crate::rumin::{decompose, horizontal_projection, OneForm};
use crate::torus::{assemble_magnetic_2d, lattice_distance_sq};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug)]
pub struct SectorSpec {
    pub m: i32,
    pub k: u32,
    pub a: f64,
    pub b: f64,
    pub nx: u32,
    pub ny: u32,
}

/// 5-point sector operator on [0,k) x [0,1). x-links carry the phase
/// (2 pi m y_j + a) h_x, y-links carry b h_y, and the y-seam folds in the
/// twist as an extra -2 pi m x_i.
pub fn assemble_sector(spec: &SectorSpec) -> Result<SparseHermitian, NilError> {
    if spec.k == 0 {
        return Err(NilError::BadScale);
    }
    if spec.nx < 8 || spec.ny < 8 {
        return Err(NilError::GridTooCoarse {
            nx: spec.nx,
            ny: spec.ny,
        });
    }
    let hx = spec.k as f64 / spec.nx as f64;
    let hy = 1.0 / spec.ny as f64;
    let plaquette = TWO_PI * spec.m as f64 * hx * hy;
    if plaquette.abs() > std::f64::consts::PI {
        return Err(NilError::PlaquetteFluxTooLarge {
            argument: plaquette,
        });
    }
    let m = spec.m as f64;
    let (a, b) = (spec.a, spec.b);
    let seam = spec.ny - 1;
    Ok(assemble_magnetic_2d(
        spec.nx,
        spec.ny,
        hx,
        hy,
        move |_i, j| (TWO_PI * m * (j as f64 * hy) + a) * hx,
        move |i, j| {
            let mut phase = b * hy;
            if j == seam {
                phase -= TWO_PI * m * (i as f64 * hx);
            }
            phase
        },
    ))
}

/// min{dist((a,b), lattice)^2, cap}: the squared distance branch for
/// small potentials, capped by the lowest level of the flux sectors.
pub fn nil_lambda1_closed(k: u32, a: f64, b: f64, lambda_cap: f64) -> f64 {
    assert!(k > 0, "scale k must be positive");
    assert!(lambda_cap > 0.0, "the Landau cap must be positive");
    lattice_distance_sq(a, b, k).min(lambda_cap)
}

#[derive(Clone, Debug)]
pub struct SectorEigen {
    pub m: i32,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SectorScan {
    pub lambda1: f64,
    pub winner_m: i32,
    /// Harmonic coefficients after gauge reduction.
    pub a: f64,
    pub b: f64,
    /// Norm of the exact part removed by gauge invariance; zero for
    /// constant input.
    pub dropped_exact_norm: f64,
    /// Norm of the co-exact remainder the reduction could not represent.
    pub coexact_residual_norm: f64,
    pub per_sector: Vec<SectorEigen>,
    pub converged: bool,
    pub grid: (u32, u32),
}

/// Gauge-reduce a basic horizontal potential to its harmonic
/// coefficients. The vertical component is dropped outright (it never
/// enters the horizontal operator), the exact part by gauge invariance.
fn reduce_potential(
    k: u32,
    pot: &OneForm,
    nx: u32,
    ny: u32,
) -> Result<(f64, f64, f64, f64), NilError> {
    use crate::field::Coefficient;
    if let (Coefficient::Const(a), Coefficient::Const(b)) = (&pot.p, &pot.q) {
        return Ok((*a, *b, 0.0, 0.0));
    }
    for (c, which) in [(&pot.p, "p"), (&pot.q, "q")] {
        if !c.is_z_free() {
            return Err(NilError::ZDependent { which });
        }
    }
    let grid = TorusGrid::new(TorusChart::new(k)?, nx, ny)?;
    let r = decompose(&horizontal_projection(pot), &grid, 1e-8)?;
    Ok((r.a, r.b, r.exact_part_norm, r.coexact_residual_norm))
}

/// lambda_1 over the sectors m = -m_max .. m_max. The scan order is
/// fixed; the winner is the first sector attaining the minimum.
pub fn nil_lambda1_sector(
    k: u32,
    pot: &OneForm,
    m_max: u32,
    nx: u32,
    ny: u32,
    opts: &SolveOptions,
) -> Result<SectorScan, NilError> {
    let (a, b, dropped_exact_norm, coexact_residual_norm) = reduce_potential(k, pot, nx, ny)?;
    let hx = k as f64 / nx as f64;
    let hy = 1.0 / ny as f64;
    let mut solve_opts = *opts;
    solve_opts.measure_weight = hx * hy;
    let mut per_sector = Vec::new();
    for m in -(m_max as i32)..=(m_max as i32) {
        let h = assemble_sector(&SectorSpec { m, k, a, b, nx, ny })?;
        let r = smallest_eigenpair(&h, &solve_opts);
        per_sector.push(SectorEigen {
            m,
            value: r.value,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
        });
    }
    let best = per_sector
        .iter()
        .min_by(|x, y| x.value.total_cmp(&y.value))
        .expect("sector range is nonempty");
    Ok(SectorScan {
        lambda1: best.value,
        winner_m: best.m,
        a,
        b,
        dropped_exact_norm,
        coexact_residual_norm,
        converged: per_sector.iter().all(|s| s.converged),
        per_sector,
        grid: (nx, ny),
    })
}
