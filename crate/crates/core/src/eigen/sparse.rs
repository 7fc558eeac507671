//! Compressed-sparse-row storage for Hermitian operators.

use super::EigenError;
use num_complex::Complex64;
use std::fmt::Write as _;

/// Hermitian matrix in CSR form. Both triangles are stored; construction
/// verifies exact conjugate symmetry, which assemblers achieve by pushing
/// each off-diagonal pair as (i, j, c) and (j, i, conj(c)).
#[derive(Clone, Debug)]
pub struct SparseHermitian {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseHermitian {
    /// Build from (row, col, value) triplets. Duplicates accumulate in
    /// push order; exact zeros after accumulation are not stored.
    pub fn from_triplets(
        n: usize,
        triplets: &[(usize, usize, Complex64)],
    ) -> Result<Self, EigenError> {
        if n == 0 {
            return Err(EigenError::EmptyMatrix);
        }
        for &(r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(EigenError::IndexOutOfRange { row: r, col: c, n });
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(EigenError::NonFiniteEntry { row: r, col: c });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| {
            let (r, c, _) = triplets[t];
            (r, c, t)
        });

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut at = 0usize;
        for row in 0..n {
            while at < order.len() && triplets[order[at]].0 == row {
                let (_, c, v) = triplets[order[at]];
                if let Some(last) = col_idx.last().copied() {
                    if vals.len() > row_ptr[row] && last == c {
                        let lv = vals.last_mut().unwrap();
                        *lv += v;
                        at += 1;
                        continue;
                    }
                }
                col_idx.push(c);
                vals.push(v);
                at += 1;
            }
            // Strip exact zeros produced by cancellation.
            let start = row_ptr[row];
            let mut keep = start;
            for t in start..vals.len() {
                if vals[t] != Complex64::new(0.0, 0.0) {
                    vals[keep] = vals[t];
                    col_idx[keep] = col_idx[t];
                    keep += 1;
                }
            }
            vals.truncate(keep);
            col_idx.truncate(keep);
            row_ptr[row + 1] = vals.len();
        }

        let m = SparseHermitian {
            n,
            row_ptr,
            col_idx,
            vals,
        };
        if let Some((r, c)) = m.hermitian_defect() {
            return Err(EigenError::NotHermitian { row: r, col: c });
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn entry(&self, r: usize, c: usize) -> Complex64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(p) => self.vals[lo + p],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// First position violating H = H*, if any. Bitwise comparison: the
    /// invariant is exact storage symmetry, not approximate.
    fn hermitian_defect(&self) -> Option<(usize, usize)> {
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[p];
                if self.entry(c, r) != self.vals[p].conj() {
                    return Some((r, c));
                }
            }
        }
        None
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect().is_none()
    }

    /// Real diagonal. Hermitian symmetry forces zero imaginary parts.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.entry(i, i).re).collect()
    }

    pub fn matvec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, EigenError> {
        if v.len() != self.n {
            return Err(EigenError::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        self.apply(v, &mut out);
        Ok(out)
    }

    /// Row-ordered product, deterministic summation order.
    pub(crate) fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for r in 0..self.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * v[self.col_idx[p]];
            }
            out[r] = acc;
        }
    }

    /// Conjugate by the diagonal unitary with the given phase angles:
    /// entries map to e^{i g_r} h_{rc} e^{-i g_c}. A similarity
    /// transform, so the spectrum is untouched; lattice gauge changes
    /// act exactly this way. Rebuilt from the upper triangle so
    /// conjugate pairs stay bitwise symmetric.
    pub fn unitary_diagonal_conjugate(
        &self,
        angles: &[f64],
    ) -> Result<SparseHermitian, EigenError> {
        if angles.len() != self.n {
            return Err(EigenError::DimensionMismatch {
                expected: self.n,
                got: angles.len(),
            });
        }
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[p];
                if c < r {
                    continue;
                }
                if c == r {
                    trip.push((r, r, self.vals[p]));
                } else {
                    let w = Complex64::from_polar(1.0, angles[r] - angles[c]) * self.vals[p];
                    trip.push((r, c, w));
                    trip.push((c, r, w.conj()));
                }
            }
        }
        SparseHermitian::from_triplets(self.n, &trip)
    }

    /// Coordinate-format dump: header "n nnz", then one "row col re im"
    /// line per stored entry in CSR order, zero-based indices.
    pub fn dump_coordinate(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n, self.nnz());
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[p];
                let _ = writeln!(s, "{} {} {:e} {:e}", r, self.col_idx[p], v.re, v.im);
            }
        }
        s
    }

    /// Dense copy, row-major, for the small-matrix fallback path.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.n]; self.n];
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[r][self.col_idx[p]] = self.vals[p];
            }
        }
        d
    }
}
