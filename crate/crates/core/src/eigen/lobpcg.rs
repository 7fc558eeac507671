//! Locally optimal block preconditioned conjugate gradient iteration for
//! the smallest eigenpair of a sparse Hermitian operator.

use super::dense::hermitian_eig_smallest;
use super::sparse::SparseHermitian;
use super::{EigResult, SolveOptions};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(super) fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub(super) fn norm(u: &[Complex64]) -> f64 {
    dot(u, u).re.max(0.0).sqrt()
}

/// Orthonormalize candidates against the unit columns of `basis` and each
/// other (two Gram-Schmidt passes), appending survivors. Near-dependent
/// candidates are dropped; returns how many.
fn absorb(basis: &mut Vec<Vec<Complex64>>, cands: Vec<Vec<Complex64>>) -> usize {
    let mut dropped = 0;
    for mut c in cands {
        let norm0 = norm(&c);
        if norm0 == 0.0 {
            dropped += 1;
            continue;
        }
        for _ in 0..2 {
            for a in basis.iter() {
                let ov = dot(a, &c);
                for (ci, ai) in c.iter_mut().zip(a) {
                    *ci -= ov * ai;
                }
            }
        }
        let nrm = norm(&c);
        if nrm <= 1e-10 * norm0 {
            dropped += 1;
            continue;
        }
        for ci in &mut c {
            *ci /= nrm;
        }
        basis.push(c);
    }
    dropped
}

pub fn lobpcg_smallest(h: &SparseHermitian, opts: &SolveOptions) -> EigResult {
    let n = h.dim();
    let block = opts.block_size.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_column = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    };

    let mut x: Vec<Vec<Complex64>> = Vec::new();
    while x.len() < block {
        let col = random_column(&mut rng);
        absorb(&mut x, vec![col]);
    }

    let diag = h.diagonal();
    let dmax = diag.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let floor = if dmax > 0.0 { dmax * 1e-12 } else { 1.0 };
    let prec: Vec<f64> = diag
        .iter()
        .map(|&d| if d > floor { 1.0 / d } else { 1.0 })
        .collect();

    let mut p: Vec<Vec<Complex64>> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut restarts = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    let (mut value, mut vector, mut residual);

    loop {
        let hx: Vec<Vec<Complex64>> = x.iter().map(|c| {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            h.apply(c, &mut out);
            out
        }).collect();
        let theta: Vec<f64> = x.iter().zip(&hx).map(|(c, hc)| dot(c, hc).re).collect();
        let mut resid_cols: Vec<Vec<Complex64>> = Vec::with_capacity(x.len());
        for (i, hc) in hx.iter().enumerate() {
            let r: Vec<Complex64> = hc
                .iter()
                .zip(&x[i])
                .map(|(h_e, x_e)| h_e - theta[i] * x_e)
                .collect();
            resid_cols.push(r);
        }
        let resid0 = norm(&resid_cols[0]);

        history.push(theta[0]);
        value = theta[0];
        vector = x[0].clone();
        residual = resid0;

        if resid0 <= opts.tol * theta[0].abs().max(1.0) {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let w: Vec<Vec<Complex64>> = resid_cols
            .iter()
            .map(|r| r.iter().zip(&prec).map(|(ri, &ti)| ri * ti).collect())
            .collect();

        let mut basis = x.clone();
        let mut dropped = absorb(&mut basis, w);
        dropped += absorb(&mut basis, p.clone());
        if dropped > 0 {
            restarts += 1;
        }
        if basis.len() <= x.len() {
            // No admissible new direction; the iteration is stalled.
            break;
        }

        // Projected operator on the search space. The first x.len()
        // columns are x itself, whose images are already at hand.
        let m = basis.len();
        let mut hbasis: Vec<Vec<Complex64>> = hx;
        for c in basis.iter().skip(x.len()) {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            h.apply(c, &mut out);
            hbasis.push(out);
        }
        let mut s = vec![vec![Complex64::new(0.0, 0.0); m]; m];
        for a in 0..m {
            for b in a..m {
                let v = dot(&basis[a], &hbasis[b]);
                s[a][b] = v;
                if a != b {
                    s[b][a] = v.conj();
                }
            }
        }

        let pairs = hermitian_eig_smallest(&s, block);
        let combine = |coef: &[Complex64]| -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (a, &ca) in coef.iter().enumerate() {
                if ca != Complex64::new(0.0, 0.0) {
                    for (oi, bi) in out.iter_mut().zip(&basis[a]) {
                        *oi += ca * bi;
                    }
                }
            }
            out
        };

        let x_len = x.len();
        let mut new_x: Vec<Vec<Complex64>> = Vec::new();
        let mut new_p: Vec<Vec<Complex64>> = Vec::new();
        for (_, coef) in &pairs {
            absorb(&mut new_x, vec![combine(coef)]);
            let mut pc = coef.clone();
            for e in pc.iter_mut().take(x_len) {
                *e = Complex64::new(0.0, 0.0);
            }
            absorb(&mut new_p, vec![combine(&pc)]);
        }
        while new_x.len() < block {
            // Ritz collapse; refill from fresh random directions.
            restarts += 1;
            let col = random_column(&mut rng);
            absorb(&mut new_x, vec![col]);
        }
        x = new_x;
        p = new_p;
        p.truncate(block);
    }

    let weight_scale = opts.measure_weight.sqrt();
    for v in &mut vector {
        *v /= weight_scale;
    }

    EigResult {
        value,
        vector,
        residual,
        iterations,
        converged,
        restarts,
        history,
    }
}
