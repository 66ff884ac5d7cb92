//! Dense linear-algebra helpers shared by the solvers and diagnostics.
//!
//! All decompositions go through [`svd`], which returns singular values in
//! nonincreasing order with a fixed sign convention so that results are
//! reproducible for a given backend.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff used by [`numerical_rank`].
pub const RANK_RTOL: f64 = 1e-9;

/// Thin singular value decomposition `M = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl Svd {
    /// Numerical rank of the decomposed matrix.
    pub fn rank(&self) -> usize {
        numerical_rank(self.singular_values.as_slice(), self.u.nrows(), self.v_t.ncols())
    }

    /// Reassemble `U diag(f(s)) Vᵀ` for a spectral map `f`.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.singular_values[j]);
        }
        scaled * &self.v_t
    }
}

/// Thin SVD with descending singular values; the largest-magnitude entry of
/// every left singular vector is made positive.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (rows, cols) = m.shape();
    let p = rows.min(cols);
    if p == 0 {
        return Svd { u: DMatrix::zeros(rows, 0), singular_values: DVector::zeros(0), v_t: DMatrix::zeros(0, cols) };
    }
    let (u_raw, s_raw, vt_raw) = raw_svd(m);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]).then(a.cmp(&b)));

    let mut u = DMatrix::zeros(rows, p);
    let mut v_t = DMatrix::zeros(p, cols);
    let mut s = DVector::zeros(p);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u_raw.column(src).into_owned();
        let mut vrow = vt_raw.row(src).into_owned();
        let pivot = ucol
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        if ucol[pivot] < 0.0 {
            ucol.neg_mut();
            vrow.neg_mut();
        }
        u.set_column(dst, &ucol);
        v_t.set_row(dst, &vrow);
        s[dst] = s_raw[src].max(0.0);
    }
    Svd { u, singular_values: s, v_t }
}

fn raw_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    match fm.thin_svd() {
        Ok(dec) => {
            let (u, s, v) = (dec.U(), dec.S().column_vector(), dec.V());
            let p = s.nrows();
            (
                DMatrix::from_fn(rows, p, |i, j| u[(i, j)]),
                DVector::from_fn(p, |i, _| s[i]),
                DMatrix::from_fn(p, cols, |i, j| v[(j, i)]),
            )
        }
        Err(_) => {
            // nalgebra's default tolerance can mis-deflate rank-deficient inputs
            let dec = nalgebra::linalg::SVD::try_new(m.clone(), true, true, 1e-12, 0)
                .expect("SVD without an iteration cap terminates");
            (
                dec.u.expect("left singular vectors requested"),
                dec.singular_values,
                dec.v_t.expect("right singular vectors requested"),
            )
        }
    }
}

/// Count of singular values above `max(rows, cols) · σ₁ · 1e-9`.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize) -> usize {
    let top = singular_values.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    let cutoff = rows.max(cols) as f64 * top * RANK_RTOL;
    singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Numerical rank of an arbitrary matrix.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    svd(m).rank()
}

/// Extends the orthonormal columns of `basis` to `total` orthonormal columns
/// by Gram–Schmidt over the standard basis vectors in index order.
pub fn complete_orthonormal(basis: &DMatrix<f64>, total: usize) -> DMatrix<f64> {
    let n = basis.nrows();
    assert!(total <= n, "cannot place {total} orthonormal columns in R^{n}");
    let mut cols: Vec<DVector<f64>> = basis.column_iter().take(total).map(|c| c.into_owned()).collect();
    let mut candidate = 0;
    while cols.len() < total && candidate < n {
        let mut v = DVector::zeros(n);
        v[candidate] = 1.0;
        candidate += 1;
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v.axpy(-proj, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Orthonormal factor `P Qᵀ` of the thin SVD `M = P Σ Qᵀ` (rows ≥ cols).
///
/// When `M` is rank deficient, the singular vectors beyond the numerical rank
/// are replaced by index-order completions so the result is deterministic.
pub fn polar_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols);
    let dec = svd(m);
    let r = dec.rank();
    if r == cols {
        return &dec.u * &dec.v_t;
    }
    let p = complete_orthonormal(&dec.u.columns(0, r).into_owned(), cols);
    let q = complete_orthonormal(&dec.v_t.rows(0, r).transpose(), cols);
    p * q.transpose()
}

/// Entrywise ℓ1 norm.
pub fn l1_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

/// Largest absolute entry of `AᵀA − I`.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let mut worst: f64 = 0.0;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).singular_values.iter().cloned().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_and_sorts() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let d = svd(&m);
        assert!(d.singular_values[0] >= d.singular_values[1]);
        let back = d.recompose_with(|s| s);
        assert!((back - m).abs().max() < 1e-12);
    }

    #[test]
    fn sign_convention_pivot_positive() {
        let m = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, -1.0]);
        let d = svd(&m);
        for col in d.u.column_iter() {
            let pivot = col.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn rank_of_outer_product() {
        let a = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(rank(&(a * b.transpose())), 1);
        assert_eq!(rank(&DMatrix::<f64>::zeros(3, 3)), 0);
    }

    #[test]
    fn completion_is_orthonormal() {
        let v = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
        let full = complete_orthonormal(&v, 4);
        assert_eq!(full.ncols(), 4);
        assert!(orthonormality_defect(&full) < 1e-12);
        assert!((full.column(0) - v.column(0)).norm() < 1e-15);
    }

    #[test]
    fn polar_factor_of_rank_deficient_is_orthonormal() {
        let a = DVector::from_vec(vec![1.0, 0.0, 2.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![0.0, 3.0, 1.0]);
        let m = a * b.transpose();
        let p = polar_factor(&m);
        assert_eq!(p.shape(), (5, 3));
        assert!(orthonormality_defect(&p) < 1e-12);
        // the determined direction still maps correctly
        let d = svd(&m);
        let u1 = d.u.column(0);
        let v1 = d.v_t.row(0).transpose();
        assert!((&p * v1 - u1).norm() < 1e-10);
    }
}
