//! Dense matrix helpers on top of `nalgebra`.

use nalgebra::DMatrix;

use crate::cube::Cube;
use crate::error::{Error, Result};

/// Frames as rows: a `T x (H·W)` matrix.
pub fn matricize(cube: &Cube) -> DMatrix<f64> {
    let (t, h, w) = cube.shape();
    DMatrix::from_row_slice(t, h * w, cube.data())
}

/// Inverse of [`matricize`].
pub fn unmatricize(m: &DMatrix<f64>, h: usize, w: usize) -> Cube {
    assert_eq!(m.ncols(), h * w);
    let mut data = Vec::with_capacity(m.nrows() * m.ncols());
    for row in m.row_iter() {
        data.extend(row.iter());
    }
    Cube::from_raw(m.nrows(), h, w, data)
}

/// Orthonormal basis (as columns) of the top-`k` singular subspace on the
/// shorter side of `m`, plus whether that side is the row side.
///
/// Computed from the eigenvectors of the smaller Gram matrix. nalgebra's
/// full SVD can return singular vectors inconsistent with the singular
/// values on rank-deficient inputs, which centered frame stacks always are.
fn top_basis(m: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, bool) {
    let left = m.nrows() <= m.ncols();
    let gram = if left { m * m.transpose() } else { m.transpose() * m };
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let basis = DMatrix::from_fn(eig.eigenvectors.nrows(), k, |i, j| eig.eigenvectors[(i, order[j])]);
    (basis, left)
}

/// Projection of `m` onto its top-`k` singular subspace.
fn project_top(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (b, left) = top_basis(m, k);
    if left {
        &b * (b.transpose() * m)
    } else {
        (m * &b) * b.transpose()
    }
}

/// Best rank-`r` approximation in Frobenius norm.
///
/// Among equal singular values the retained direction is whatever the
/// eigensolver produced, so the projection onto a repeated-singular-value
/// subspace is one optimal choice among many.
pub fn rank_project(m: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if r > rows.min(cols) {
        return Err(Error::invalid(format!(
            "rank {r} exceeds min({rows}, {cols})"
        )));
    }
    if r == 0 {
        return Ok(DMatrix::zeros(rows, cols));
    }
    Ok(project_top(m, r))
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Removes the span of the top `k` right singular vectors from every row:
/// `M - M V_k V_kᵀ`.
pub fn project_out_top_components(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let k = k.min(m.nrows().min(m.ncols()));
    if k == 0 {
        return m.clone();
    }
    m - project_top(m, k)
}
