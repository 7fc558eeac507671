//! First eigenvalue of the magnetic Laplacian on a circle. The potential
//! is A = alpha d(theta) with theta of period 2 pi regardless of the
//! circumference; its flux is 2 pi alpha, so the spectrum only sees alpha
//! through its distance to the integers.

use crate::eigen::{smallest_eigenpair, EigResult, SolveOptions, SparseHermitian};
use crate::geometry::{CircleChart, GeometryError};
use num_complex::Complex64;

/// lambda_1 = (2 pi / L)^2 dist(alpha, Z)^2, from the plane-wave basis.
pub fn circle_lambda1_exact(chart: &CircleChart, alpha: f64) -> f64 {
    let per = 2.0 * std::f64::consts::PI / chart.circumference;
    let d = alpha - alpha.round();
    (per * d) * (per * d)
}

/// Peierls discretization on n equispaced nodes: each forward hop carries
/// the phase exp(-2 pi i alpha / n), the exact holonomy fraction.
pub fn assemble_circle(chart: &CircleChart, alpha: f64, n: u32) -> Result<SparseHermitian, GeometryError> {
    if n < 8 {
        return Err(GeometryError::ZeroResolution);
    }
    let n = n as usize;
    let h = chart.circumference / n as f64;
    let inv_h2 = 1.0 / (h * h);
    let hop = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * alpha / n as f64);
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        let next = (i + 1) % n;
        trip.push((i, i, Complex64::new(2.0 * inv_h2, 0.0)));
        let v = -hop * inv_h2;
        trip.push((i, next, v));
        trip.push((next, i, v.conj()));
    }
    Ok(SparseHermitian::from_triplets(n, &trip).expect("stencil is Hermitian by construction"))
}

pub fn circle_lambda1_fd(
    chart: &CircleChart,
    alpha: f64,
    n: u32,
    opts: &SolveOptions,
) -> Result<EigResult, GeometryError> {
    let h = assemble_circle(chart, alpha, n)?;
    let mut opts = *opts;
    opts.measure_weight = chart.circumference / n as f64;
    Ok(smallest_eigenpair(&h, &opts))
}
