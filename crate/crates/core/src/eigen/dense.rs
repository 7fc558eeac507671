//! Dense Hermitian eigensolver through the real symmetric embedding
//! [[Re H, -Im H], [Im H, Re H]].

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Smallest `want` eigenpairs of a dense Hermitian matrix, ascending, with
/// orthonormal complex eigenvectors.
///
/// The embedding doubles every eigenvalue: the real eigenvectors of a
/// doubled pair span {w, iw} for a single complex eigenvector w. Walking
/// the embedding pairs in ascending order and Gram-Schmidt-filtering
/// against the accepted complex vectors discards the copies.
pub fn hermitian_eig_smallest(
    mat: &[Vec<Complex64>],
    want: usize,
) -> Vec<(f64, Vec<Complex64>)> {
    let n = mat.len();
    if n == 0 || want == 0 {
        return Vec::new();
    }
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = mat[i][j];
            m[(i, j)] = v.re;
            m[(i, j + n)] = -v.im;
            m[(i + n, j)] = v.im;
            m[(i + n, j + n)] = v.re;
        }
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut accepted: Vec<(f64, Vec<Complex64>)> = Vec::new();
    for &col in &order {
        if accepted.len() == want.min(n) {
            break;
        }
        let mut w: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(eig.eigenvectors[(i, col)], eig.eigenvectors[(i + n, col)]))
            .collect();
        for _ in 0..2 {
            for (_, a) in &accepted {
                let ov: Complex64 = a.iter().zip(&w).map(|(p, q)| p.conj() * q).sum();
                for (wi, ai) in w.iter_mut().zip(a) {
                    *wi -= ov * ai;
                }
            }
        }
        let nrm = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        // The iw copy of an accepted vector projects to nothing.
        if nrm <= 1e-6 {
            continue;
        }
        for wi in &mut w {
            *wi /= nrm;
        }
        accepted.push((eig.eigenvalues[col], w));
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn residual(mat: &[Vec<Complex64>], val: f64, vec: &[Complex64]) -> f64 {
        let n = mat.len();
        (0..n)
            .map(|i| {
                let hv: Complex64 = (0..n).map(|j| mat[i][j] * vec[j]).sum();
                (hv - val * vec[i]).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn two_by_two_with_imaginary_coupling() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let mat = vec![vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(2.0, 0.0)]];
        let pairs = hermitian_eig_smallest(&mat, 2);
        assert_eq!(pairs.len(), 2);
        assert!((pairs[0].0 - 1.0).abs() < 1e-12);
        assert!((pairs[1].0 - 3.0).abs() < 1e-12);
        for (val, vec) in &pairs {
            assert!(residual(&mat, *val, vec) < 1e-12);
        }
    }

    #[test]
    fn degenerate_pair_yields_orthonormal_vectors() {
        let mat = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(5.0, 0.0)],
        ];
        let pairs = hermitian_eig_smallest(&mat, 2);
        assert_eq!(pairs.len(), 2);
        assert!((pairs[0].0 - 1.0).abs() < 1e-12);
        assert!((pairs[1].0 - 1.0).abs() < 1e-12);
        let ov: Complex64 = pairs[0]
            .1
            .iter()
            .zip(&pairs[1].1)
            .map(|(p, q)| p.conj() * q)
            .sum();
        assert!(ov.norm() < 1e-8);
        for (_, v) in &pairs {
            let nrm: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            assert!((nrm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn want_capped_by_dimension() {
        let mat = vec![vec![c(4.0, 0.0)]];
        let pairs = hermitian_eig_smallest(&mat, 5);
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].0 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_hermitian_four_by_four() {
        let mat = vec![
            vec![c(1.0, 0.0), c(0.5, 0.5), c(0.0, 0.0), c(0.0, -1.0)],
            vec![c(0.5, -0.5), c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0), c(0.25, 0.25)],
            vec![c(0.0, 1.0), c(0.0, 0.0), c(0.25, -0.25), c(4.0, 0.0)],
        ];
        let pairs = hermitian_eig_smallest(&mat, 4);
        assert_eq!(pairs.len(), 4);
        for win in pairs.windows(2) {
            assert!(win[0].0 <= win[1].0 + 1e-12);
        }
        for (val, vec) in &pairs {
            assert!(residual(&mat, *val, vec) < 1e-10);
        }
        // Trace check: eigenvalues sum to the diagonal sum.
        let tr: f64 = pairs.iter().map(|p| p.0).sum();
        assert!((tr - 10.0).abs() < 1e-10);
    }
}
