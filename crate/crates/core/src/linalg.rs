//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative tolerance for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-8;

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn from_cols(cols: &[Vec<f64>], nrows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nrows, cols.len(), |i, j| cols[j][i])
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn cols(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols()).map(|j| m.column(j).iter().copied().collect()).collect()
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Numerical rank with singular values below `rtol * s_max` counted as zero.
pub fn rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(&0.0) => 0,
        Some(&smax) => s.iter().filter(|&&x| x > rtol * smax).count(),
    }
}

/// Orthonormal basis (columns) of the null space of `m`.
///
/// The matrix is padded with zero rows to square shape so that the SVD
/// returns a complete right singular basis.
pub fn nullspace(m: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let (r, c) = (m.nrows(), m.ncols());
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    let size = r.max(c);
    let mut sq = DMatrix::zeros(size, c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut keep = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || s <= rtol * smax {
            keep.push(vt.row(k).transpose());
        }
    }
    if keep.is_empty() {
        return DMatrix::zeros(c, 0);
    }
    let mut out = DMatrix::from_columns(&keep);
    canonical_signs(&mut out);
    out
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn canonical_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut best = 0usize;
        for i in 0..m.nrows() {
            if m[(i, j)].abs() > m[(best, j)].abs() + 1e-14 {
                best = i;
            }
        }
        if m[(best, j)] < 0.0 {
            let mut col = m.column_mut(j);
            col.neg_mut();
        }
    }
}

/// Symmetric eigen-decomposition, eigenvalues ascending with matching
/// eigenvector columns.
pub fn sym_eigen(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Orthonormalizes columns by modified Gram-Schmidt under the inner product
/// `gram` (identity if `None`), dropping columns that become negligible.
pub fn gram_schmidt(cols_in: &[Vec<f64>], gram: Option<&DMatrix<f64>>) -> Vec<Vec<f64>> {
    let ip = |a: &[f64], b: &[f64]| -> f64 {
        match gram {
            None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Some(g) => {
                let va = DVector::from_column_slice(a);
                let vb = DVector::from_column_slice(b);
                (va.transpose() * g * vb)[(0, 0)]
            }
        }
    };
    let mut out: Vec<Vec<f64>> = Vec::new();
    let scale = cols_in.iter().map(|c| ip(c, c).sqrt()).fold(0.0, f64::max);
    for c in cols_in {
        let mut v = c.clone();
        for q in &out {
            let a = ip(&v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= a * qi;
            }
        }
        let nrm = ip(&v, &v).sqrt();
        if nrm > RANK_RTOL * scale && nrm > 0.0 {
            out.push(v.iter().map(|x| x / nrm).collect());
        }
    }
    out
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
/// Returns `PI/2` when the dimensions differ.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    // sine of the largest angle is the norm of the part of qb outside span(qa)
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let smax = singular_values(&resid).first().copied().unwrap_or(0.0);
    smax.min(1.0).asin()
}

pub fn orthonormal_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let g = gram_schmidt(&cols(a), None);
    from_cols(&g, a.nrows())
}

pub fn det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_matrix() {
        let m = from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let n = nullspace(&m, RANK_RTOL);
        assert_eq!(n.ncols(), 1);
        assert!((n[(2, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nullspace_of_zero_matrix_is_everything() {
        let m = DMatrix::zeros(2, 1);
        assert_eq!(nullspace(&m, RANK_RTOL).ncols(), 1);
        assert_eq!(rank(&m, RANK_RTOL), 0);
    }

    #[test]
    fn principal_angle_of_rotated_line() {
        let a = from_cols(&[vec![1.0, 0.0]], 2);
        let t: f64 = 1e-7;
        let b = from_cols(&[vec![t.cos(), t.sin()]], 2);
        assert!((max_principal_angle(&a, &b) - t).abs() < 1e-12);
    }

    #[test]
    fn eigen_sorted() {
        let h = from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let (vals, _) = sym_eigen(&h);
        assert!((vals[0] + 1.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);
    }
}
