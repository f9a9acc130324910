//! Real nonsymmetric eigenproblem at small size: Householder reduction to
//! Hessenberg form, implicitly shifted double QR for the eigenvalues
//! (classic EISPACK/JAMA scheme), inverse iteration for eigenvectors, and
//! nonnegative Perron vectors by shifted power iteration. Complex
//! elimination helpers used here and by the divergence detector live at the
//! bottom.

use crate::error::{Error, Result};
use crate::mat::Mat;
use num_complex::Complex64;

const EPS: f64 = 2.220446049250313e-16;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    /// Right eigenvector, L1-normalized.
    pub right: Vec<Complex64>,
    /// Left eigenvector (row), L1-normalized.
    pub left: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenpairs: Vec<EigenPair>,
    pub spectral_radius: f64,
    pub perron_right: Option<Vec<f64>>,
    pub perron_left: Option<Vec<f64>>,
}

/// Householder similarity reduction to upper Hessenberg form, in place.
fn hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[i][m - 1].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[i][j];
            }
            f /= hh;
            for j in m..=high {
                h[i][j] -= f * ort[j];
            }
        }
        h[m][m - 1] = scale * g;
    }
    // eigenvalue-only path: clear the reflector remnants
    for i in 2..n {
        for j in 0..(i - 1) {
            h[i][j] = 0.0;
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the implicit double-shift
/// QR iteration. Destroys `h`. Variable names follow the classic routine.
#[allow(unused_assignments, clippy::needless_range_loop)]
fn hqr_eigenvalues(h: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let nn = h.len();
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let mut n: isize = nn as isize - 1;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut x, mut y, mut w): (f64, f64, f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }

    let mut iter = 0usize;
    while n >= 0 {
        let nu = n as usize;
        // find a negligible subdiagonal entry
        let mut l = nu;
        while l > 0 {
            s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l][l - 1].abs() < EPS * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // one real root
            h[nu][nu] += exshift;
            d[nu] = h[nu][nu];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == nu - 1 {
            // a 2x2 block has decoupled
            w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu][nu] += exshift;
            h[nu - 1][nu - 1] += exshift;
            x = h[nu][nu];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // form a shift and run one double QR step
            x = h[nu][nu];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[nu - 1][nu - 1];
                w = h[nu][nu - 1] * h[nu - 1][nu];
            }
            if iter == 10 {
                exshift += x;
                for i in l..=nu {
                    h[i][i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in l..=nu {
                        h[i][i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = 0.964;
                    w = 0.964;
                }
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NoConvergence { routine: "hqr_eigenvalues", iterations: iter });
            }

            // two consecutive small subdiagonals let the step start higher
            let mut m = nu - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m][m - 1].abs() * (q.abs() + r.abs())
                    < EPS * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                h[i][i - 2] = 0.0;
                if i > m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                if x == 0.0 {
                    break;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[k][k - 1] = -s * x;
                } else if l != m {
                    h[k][k - 1] = -h[k][k - 1];
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;

                // the reflector scales differently on the two sides
                for j in k..nn {
                    p = h[k][j] + q * h[k + 1][j];
                    if notlast {
                        p += r * h[k + 2][j];
                        h[k + 2][j] -= p * z;
                    }
                    h[k][j] -= p * x;
                    h[k + 1][j] -= p * y;
                }
                for i in 0..=nu.min(k + 3) {
                    p = x * h[i][k] + y * h[i][k + 1];
                    if notlast {
                        p += z * h[i][k + 2];
                        h[i][k + 2] -= p * r;
                    }
                    h[i][k] -= p;
                    h[i][k + 1] -= p * q;
                }
            }
        }
    }

    Ok((0..nn).map(|i| Complex64::new(d[i], e[i])).collect())
}

/// Eigenvalues of a square matrix.
pub fn eigenvalues(m: &Mat<f64>) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let mut h: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    hessenberg(&mut h);
    hqr_eigenvalues(&mut h)
}

pub fn spectral_radius(m: &Mat<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

fn l1_c(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Solve (A - shift·I) x = b by complex LU with partial pivoting; tiny
/// pivots are replaced so inverse iteration can divide by near-zero safely.
fn shifted_solve(a: &Mat<f64>, shift: Complex64, b: &[Complex64]) -> Vec<Complex64> {
    let n = a.rows();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut v = Complex64::new(*a.at(i, j), 0.0);
                    if i == j {
                        v -= shift;
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mut x: Vec<Complex64> = b.to_vec();
    let scale = a.entry_norm().max(1.0);
    let tiny = 1e-300_f64.max(EPS * EPS * scale);

    for k in 0..n {
        let (piv, mag) = (k..n)
            .map(|i| (i, m[i][k].norm()))
            .max_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
            .unwrap();
        if piv != k {
            m.swap(piv, k);
            x.swap(piv, k);
        }
        if mag < tiny {
            m[k][k] = Complex64::new(tiny, 0.0);
        }
        let pivot = m[k][k];
        for i in (k + 1)..n {
            let f = m[i][k] / pivot;
            if f.norm() == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                let sub = f * m[k][j];
                m[i][j] -= sub;
            }
            let sub = f * x[k];
            x[i] -= sub;
        }
    }
    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in (k + 1)..n {
            acc -= m[k][j] * x[j];
        }
        x[k] = acc / m[k][k];
    }
    x
}

/// Eigenvector of `a` for the (approximate) eigenvalue `lambda` by inverse
/// iteration from a fixed generic start.
fn inverse_iteration(a: &Mat<f64>, lambda: Complex64) -> Vec<Complex64> {
    let n = a.rows();
    let scale = a.entry_norm().max(1.0);
    let shift = lambda + Complex64::new(1e-11 * scale, 1e-12 * scale);
    let mut v: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(1.0 / (j + 2) as f64, 0.3 / (j as f64 + 1.7)))
        .collect();
    for _ in 0..4 {
        let w = shifted_solve(a, shift, &v);
        let norm = l1_c(&w);
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        v = w.iter().map(|z| z / norm).collect();
    }
    v
}

fn residual(a: &Mat<f64>, lambda: Complex64, v: &[Complex64]) -> f64 {
    let n = a.rows();
    let mut r = 0.0;
    for i in 0..n {
        let mut acc = -lambda * v[i];
        for j in 0..n {
            acc += *a.at(i, j) * v[j];
        }
        r += acc.norm();
    }
    r
}

/// Nonnegative fixed direction of a nonnegative matrix by power iteration
/// on M + I (the shift makes periodic supports converge too).
pub fn perron_vector(m: &Mat<f64>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    assert!(m.is_square() && m.is_nonnegative());
    let n = m.rows();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut acc = v[i]; // the +I shift
            for j in 0..n {
                acc += *m.at(i, j) * v[j];
            }
            w[i] = acc;
        }
        let norm: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= norm;
        }
        let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        if delta < tol {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence { routine: "perron_vector", iterations: max_iter })
}

/// Full decomposition: all eigenvalues with right and left eigenvectors,
/// spectral radius, and Perron vectors when the matrix is nonnegative.
pub fn eigen_decompose(m: &Mat<f64>) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let values = eigenvalues(m)?;
    let mt = m.transpose();
    let scale = m.entry_norm().max(1.0);
    let mut eigenpairs = Vec::with_capacity(values.len());
    for &lambda in &values {
        let right = inverse_iteration(m, lambda);
        let left = inverse_iteration(&mt, lambda);
        let res = residual(m, lambda, &right).max(residual(&mt, lambda, &left));
        if res > 1e-8 * scale {
            return Err(Error::NoConvergence { routine: "eigenvector_refinement", iterations: 4 });
        }
        eigenpairs.push(EigenPair { value: lambda, right, left });
    }
    let spectral_radius = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (perron_right, perron_left) = if m.is_nonnegative() {
        (
            perron_vector(m, 1e-14, 1_000_000).ok(),
            perron_vector(&mt, 1e-14, 1_000_000).ok(),
        )
    } else {
        (None, None)
    };
    Ok(EigenDecomposition { eigenpairs, spectral_radius, perron_right, perron_left })
}

// ---------------------------------------------------------------------------
// Complex elimination utilities (shared with the divergence detector).

/// Rank of a complex matrix given as rows, by Gaussian elimination with
/// partial pivoting. `tol` is relative to the largest entry.
pub fn complex_rank(rows: &[Vec<Complex64>], tol: f64) -> usize {
    rref(rows, tol).0.len()
}

/// Basis of the right kernel of a complex matrix given as rows.
pub fn complex_kernel(rows: &[Vec<Complex64>], tol: f64) -> Vec<Vec<Complex64>> {
    let cols = if rows.is_empty() { 0 } else { rows[0].len() };
    let (pivots, reduced) = rref(rows, tol);
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let free_cols: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    let mut basis = Vec::new();
    for &f in &free_cols {
        let mut v = vec![Complex64::new(0.0, 0.0); cols];
        v[f] = Complex64::new(1.0, 0.0);
        for &(r, c) in pivots.iter().rev() {
            // row r: x_c + Σ_{j>c} a_j x_j = 0
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (c + 1)..cols {
                acc += reduced[r][j] * v[j];
            }
            v[c] = -acc;
        }
        let norm = l1_c(&v);
        basis.push(v.iter().map(|z| z / norm).collect());
    }
    basis
}

/// Reduced row echelon form; returns (pivot (row, col) list, reduced rows).
fn rref(rows: &[Vec<Complex64>], tol: f64) -> (Vec<(usize, usize)>, Vec<Vec<Complex64>>) {
    let mut a: Vec<Vec<Complex64>> = rows.to_vec();
    let nrows = a.len();
    let ncols = if nrows == 0 { 0 } else { a[0].len() };
    let scale = a
        .iter()
        .flat_map(|r| r.iter().map(|z| z.norm()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut row = 0usize;
    for col in 0..ncols {
        if row >= nrows {
            break;
        }
        let (best, mag) = (row..nrows)
            .map(|i| (i, a[i][col].norm()))
            .max_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
            .unwrap();
        if mag <= tol * scale {
            continue;
        }
        a.swap(row, best);
        let piv = a[row][col];
        for j in col..ncols {
            a[row][j] /= piv;
        }
        for i in 0..nrows {
            if i == row {
                continue;
            }
            let f = a[i][col];
            if f.norm() == 0.0 {
                continue;
            }
            for j in col..ncols {
                let sub = f * a[row][j];
                a[i][j] -= sub;
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    (pivots, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn diagonal_spectrum_and_perron() {
        let m = Mat::from_rows(vec![vec![2.0, 0.0], vec![0.0, 5.0]]);
        let d = eigen_decompose(&m).unwrap();
        assert!(approx(d.spectral_radius, 5.0, 1e-12));
        let pr = d.perron_right.unwrap();
        assert!(pr[0] < 1e-10 && approx(pr[1], 1.0, 1e-10));
    }

    #[test]
    fn rotation_has_unit_imaginary_pair() {
        let m = Mat::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]);
        let vals = eigenvalues(&m).unwrap();
        let mut ims: Vec<f64> = vals.iter().map(|z| z.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(approx(ims[0], -1.0, 1e-12) && approx(ims[1], 1.0, 1e-12));
        assert!(vals.iter().all(|z| z.re.abs() < 1e-12));
    }

    #[test]
    fn one_by_one() {
        let m = Mat::from_rows(vec![vec![0.1]]);
        assert!(approx(spectral_radius(&m).unwrap(), 0.1, 1e-15));
    }

    #[test]
    fn eigenpair_residuals_on_generic_matrix() {
        let m = Mat::from_rows(vec![
            vec![0.5, 1.2, -0.3, 0.0, 0.7],
            vec![0.1, -0.4, 0.9, 0.2, 0.0],
            vec![0.0, 0.3, 1.1, -0.5, 0.4],
            vec![0.8, 0.0, 0.2, 0.6, -0.1],
            vec![-0.2, 0.5, 0.0, 0.3, 0.9],
        ]);
        let d = eigen_decompose(&m).unwrap();
        assert_eq!(d.eigenpairs.len(), 5);
        for pair in &d.eigenpairs {
            assert!(residual(&m, pair.value, &pair.right) < 1e-9 * m.entry_norm());
            assert!(residual(&m.transpose(), pair.value, &pair.left) < 1e-9 * m.entry_norm());
        }
    }

    #[test]
    fn defective_block_still_yields_the_unique_eigenvector() {
        let m = Mat::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
        let d = eigen_decompose(&m).unwrap();
        for pair in &d.eigenpairs {
            assert!(approx(pair.value.re, 1.0, 1e-7) && pair.value.im.abs() < 1e-7);
            // the only eigendirection is e_1
            assert!(pair.right[1].norm() < 1e-6);
        }
    }

    #[test]
    fn kernel_and_rank() {
        let c = |x: f64| Complex64::new(x, 0.0);
        // rank-2 3x3 with kernel spanned by (1, -2, 1)
        let rows = vec![
            vec![c(1.0), c(1.0), c(1.0)],
            vec![c(1.0), c(2.0), c(3.0)],
            vec![c(2.0), c(3.0), c(4.0)],
        ];
        assert_eq!(complex_rank(&rows, 1e-10), 2);
        let k = complex_kernel(&rows, 1e-10);
        assert_eq!(k.len(), 1);
        let v = &k[0];
        // check Av = 0
        for row in &rows {
            let s: Complex64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            assert!(s.norm() < 1e-10);
        }
    }
}

/// Test hook: the Hessenberg form alone.
pub fn debug_hessenberg(m: &Mat<f64>) -> Mat<f64> {
    let mut h: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    hessenberg(&mut h);
    Mat::from_rows(h)
}
