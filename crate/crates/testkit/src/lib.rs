//! Brute-force reference computations.
//!
//! Everything here is deliberately naive and shares no code with `lrss-core`:
//! plain nested loops over row-major `f64` slices, a cyclic Jacobi
//! eigensolver instead of an SVD routine, explicit 2x2 rotation matrices
//! instead of the image rotation kernel. Tests compare the library against
//! these.

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
///
/// `a` is an `n x n` row-major symmetric matrix. Returns eigenvalues in
/// descending order and the matching eigenvectors as columns of a row-major
/// `n x n` matrix.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i * n + j] * m[i * n + j];
                }
            }
        }
        let scale: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].partial_cmp(&m[i * n + i]).unwrap());
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new_col] = v[k * n + old_col];
        }
    }
    (vals, vecs)
}

/// `M M^T` for a row-major `rows x cols` matrix.
pub fn gram_rows(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut g = vec![0.0; rows * rows];
    for i in 0..rows {
        for j in 0..rows {
            let mut acc = 0.0;
            for k in 0..cols {
                acc += m[i * cols + k] * m[j * cols + k];
            }
            g[i * rows + j] = acc;
        }
    }
    g
}

/// `M^T M` for a row-major `rows x cols` matrix.
pub fn gram_cols(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut g = vec![0.0; cols * cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = 0.0;
            for k in 0..rows {
                acc += m[k * cols + i] * m[k * cols + j];
            }
            g[i * cols + j] = acc;
        }
    }
    g
}

/// Singular values, descending, from the eigenvalues of the smaller Gram matrix.
pub fn singular_values(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let (g, n) = if rows <= cols {
        (gram_rows(m, rows, cols), rows)
    } else {
        (gram_cols(m, rows, cols), cols)
    };
    let (vals, _) = jacobi_eigen(&g, n);
    vals.into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// Frobenius error of the best rank-`r` approximation: `sqrt(sum_{i>r} sigma_i^2)`.
pub fn rank_tail_error(m: &[f64], rows: usize, cols: usize, r: usize) -> f64 {
    let (g, n) = if rows <= cols {
        (gram_rows(m, rows, cols), rows)
    } else {
        (gram_cols(m, rows, cols), cols)
    };
    let (vals, _) = jacobi_eigen(&g, n);
    vals.iter().skip(r).map(|l| l.max(0.0)).sum::<f64>().sqrt()
}

/// Removes the top `k` principal directions of an already-centered
/// `rows x cols` matrix: `(I - U_k U_k^T) M`, with `U` the eigenvectors of
/// `M M^T`. Only eigenvectors with non-negligible eigenvalue are used.
pub fn project_out_top(m: &[f64], rows: usize, cols: usize, k: usize) -> Vec<f64> {
    let g = gram_rows(m, rows, cols);
    let (vals, vecs) = jacobi_eigen(&g, rows);
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut out = m.to_vec();
    for c in 0..k.min(rows) {
        if vals[c] <= 1e-24 * top.max(1e-300) {
            continue;
        }
        for j in 0..cols {
            let mut dot = 0.0;
            for i in 0..rows {
                dot += vecs[i * rows + c] * m[i * cols + j];
            }
            for i in 0..rows {
                out[i * cols + j] -= vecs[i * rows + c] * dot;
            }
        }
    }
    out
}

/// Subtracts each column's mean (temporal mean when rows are frames).
pub fn center_columns(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = m.to_vec();
    for j in 0..cols {
        let mean = (0..rows).map(|i| m[i * cols + j]).sum::<f64>() / rows as f64;
        for i in 0..rows {
            out[i * cols + j] -= mean;
        }
    }
    out
}

/// Bilinear sample with zeros outside the grid.
pub fn sample_bilinear(img: &[f64], h: usize, w: usize, r: f64, c: f64) -> f64 {
    let r0 = r.floor();
    let c0 = c.floor();
    let fr = r - r0;
    let fc = c - c0;
    let mut acc = 0.0;
    for (dr, wr) in [(0.0, 1.0 - fr), (1.0, fr)] {
        for (dc, wc) in [(0.0, 1.0 - fc), (1.0, fc)] {
            let rr = r0 + dr;
            let cc = c0 + dc;
            if rr >= 0.0 && cc >= 0.0 && (rr as usize) < h && (cc as usize) < w {
                acc += wr * wc * img[rr as usize * w + cc as usize];
            }
        }
    }
    acc
}

/// Counter-clockwise rotation in display coordinates (row 0 at the top):
/// with `x = col`, `y = -row`, apply the usual 2x2 matrix.
pub fn rotate_offset(dr: f64, dc: f64, angle_deg: f64) -> (f64, f64) {
    let a = angle_deg.to_radians();
    let x = dc;
    let y = -dr;
    let xr = a.cos() * x - a.sin() * y;
    let yr = a.sin() * x + a.cos() * y;
    (-yr, xr)
}

/// Inverse-mapping rotation oracle: each output pixel samples the input at
/// the back-rotated coordinate.
pub fn rotate_bruteforce(img: &[f64], h: usize, w: usize, angle_deg: f64, center: (f64, f64)) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let (dr, dc) = rotate_offset(r as f64 - center.0, c as f64 - center.1, -angle_deg);
            out[r * w + c] = sample_bilinear(img, h, w, center.0 + dr, center.1 + dc);
        }
    }
    out
}

/// `out(p) = sum_q img(p + q - c) kernel(q)`, zero padded.
pub fn correlate_nested(img: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) -> Vec<f64> {
    let half = (k / 2) as isize;
    let mut out = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = 0.0;
            for i in 0..k as isize {
                for j in 0..k as isize {
                    let rr = r + i - half;
                    let cc = c + j - half;
                    if rr >= 0 && cc >= 0 && rr < h as isize && cc < w as isize {
                        acc += img[rr as usize * w + cc as usize] * kernel[i as usize * k + j as usize];
                    }
                }
            }
            out[r as usize * w + c as usize] = acc;
        }
    }
    out
}

/// Stamp placed with its center pixel on integer position `(r, c)`, clipped.
pub fn place_integer(h: usize, w: usize, stamp: &[f64], k: usize, r: isize, c: isize) -> Vec<f64> {
    let half = (k / 2) as isize;
    let mut out = vec![0.0; h * w];
    for i in 0..k as isize {
        for j in 0..k as isize {
            let rr = r + i - half;
            let cc = c + j - half;
            if rr >= 0 && cc >= 0 && rr < h as isize && cc < w as isize {
                out[rr as usize * w + cc as usize] += stamp[i as usize * k + j as usize];
            }
        }
    }
    out
}

/// Subpixel placement as the bilinear blend of the four integer placements.
pub fn place_subpixel(h: usize, w: usize, stamp: &[f64], k: usize, center: (f64, f64)) -> Vec<f64> {
    let r0 = center.0.floor();
    let c0 = center.1.floor();
    let fr = center.0 - r0;
    let fc = center.1 - c0;
    let mut out = vec![0.0; h * w];
    for (dr, wr) in [(0.0, 1.0 - fr), (1.0, fr)] {
        for (dc, wc) in [(0.0, 1.0 - fc), (1.0, fc)] {
            let p = place_integer(h, w, stamp, k, (r0 + dr) as isize, (c0 + dc) as isize);
            for (o, v) in out.iter_mut().zip(p) {
                *o += wr * wc * v;
            }
        }
    }
    out
}

/// Positions of a sky-fixed source on the detector, one per frame, computed
/// with an explicit rotation matrix relative to frame 0.
pub fn track_oracle(ref_pos: (f64, f64), center: (f64, f64), angles_deg: &[f64]) -> Vec<(f64, f64)> {
    angles_deg
        .iter()
        .map(|a| {
            let (dr, dc) = rotate_offset(ref_pos.0 - center.0, ref_pos.1 - center.1, a - angles_deg[0]);
            (center.0 + dr, center.1 + dc)
        })
        .collect()
}

/// Dense unit-norm trajectory atom (`t * h * w`, frame-major) and its
/// pre-normalization norm.
pub fn dense_atom(
    h: usize,
    w: usize,
    stamp: &[f64],
    k: usize,
    positions: &[(f64, f64)],
) -> (Vec<f64>, f64) {
    let mut cube = Vec::with_capacity(positions.len() * h * w);
    for &p in positions {
        cube.extend(place_subpixel(h, w, stamp, k, p));
    }
    let norm = cube.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut cube {
            *v /= norm;
        }
    }
    (cube, norm)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integer lattice points `(i*step, j*step)` inside the frame whose distance
/// to `center` lies in `[r_in, r_out]`, in row-major order.
pub fn lattice_scan(
    h: usize,
    w: usize,
    center: (f64, f64),
    r_in: f64,
    r_out: f64,
    step: usize,
) -> Vec<(usize, usize)> {
    let mut pts = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if r % step != 0 || c % step != 0 {
                continue;
            }
            let d = ((r as f64 - center.0).powi(2) + (c as f64 - center.1).powi(2)).sqrt();
            if d >= r_in && d <= r_out {
                pts.push((r, c));
            }
        }
    }
    pts
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().partial_cmp(&m[j * n + col].abs()).unwrap())?;
        if m[piv * n + col].abs() < 1e-14 {
            return None;
        }
        for j in 0..n {
            m.swap(col * n + j, piv * n + j);
        }
        x.swap(col, piv);
        for i in (col + 1)..n {
            let f = m[i * n + col] / m[col * n + col];
            for j in col..n {
                m[i * n + j] -= f * m[col * n + j];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= m[i * n + j] * x[j];
        }
        x[i] = acc / m[i * n + i];
    }
    Some(x)
}

/// Least-squares fit of `y` on the given columns via normal equations.
/// Returns coefficients and residual norm.
pub fn least_squares(columns: &[&[f64]], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = columns.len();
    let mut g = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        rhs[i] = dot(columns[i], y);
        for j in 0..n {
            g[i * n + j] = dot(columns[i], columns[j]);
        }
    }
    let coeffs = solve_dense(&g, &rhs, n)?;
    let mut resid = y.to_vec();
    for (col, c) in columns.iter().zip(&coeffs) {
        for (r, v) in resid.iter_mut().zip(col.iter()) {
            *r -= c * v;
        }
    }
    let norm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    Some((coeffs, norm))
}

/// Mann-Whitney pair statistic: `(#(p > n) + 0.5 #(p = n)) / (|P| |N|)`.
pub fn mann_whitney_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut acc = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                acc += 1.0;
            } else if p == n {
                acc += 0.5;
            }
        }
    }
    acc / (pos.len() as f64 * neg.len() as f64)
}

/// Unnormalized isotropic Gaussian evaluated on a `k x k` grid.
pub fn gaussian_grid(k: usize, fwhm: f64) -> Vec<f64> {
    let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let half = (k / 2) as f64;
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let d2 = (i as f64 - half).powi(2) + (j as f64 - half).powi(2);
            out.push((-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    out
}

/// A tiny deterministic generator (SplitMix64) so test inputs do not depend
/// on the library's RNG stack.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal by Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn vec_uniform(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform() * 2.0 - 1.0).collect()
    }

    pub fn vec_normal(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let (vals, vecs) = jacobi_eigen(&a, 3);
        for c in 0..3 {
            for i in 0..3 {
                let av: f64 = (0..3).map(|j| a[i * 3 + j] * vecs[j * 3 + c]).sum();
                assert!((av - vals[c] * vecs[i * 3 + c]).abs() < 1e-12);
            }
        }
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
    }

    #[test]
    fn mann_whitney_small() {
        assert_eq!(mann_whitney_auc(&[1.0, 3.0], &[2.0]), 0.5);
        assert_eq!(mann_whitney_auc(&[2.0, 3.0], &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn rotate_offset_quarter_turn() {
        let (dr, dc) = rotate_offset(0.0, 2.0, 90.0);
        assert!((dr + 2.0).abs() < 1e-12 && dc.abs() < 1e-12);
    }
}
