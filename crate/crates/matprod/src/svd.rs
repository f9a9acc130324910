//! Singular values via cyclic Jacobi on the normal equations, plus a small
//! LU determinant. Sized for d ≤ 32; robustness over speed.

use crate::error::{Error, Result};
use crate::mat::Mat;

const MAX_SWEEPS: usize = 100;

/// Singular values of `m`, sorted descending. Jacobi diagonalization of
/// MᵀM; stops when the off-diagonal L1 mass falls below
/// 1e-13·entry_norm(MᵀM).
pub fn singular_values(m: &Mat<f64>) -> Result<Vec<f64>> {
    let d = m.rows().min(m.cols());
    assert!(m.rows() <= 32 && m.cols() <= 32, "sized for d <= 32");
    let mt = m.transpose();
    let mut b = mt.mul(m);
    let n = b.rows();
    let stop = 1e-13 * b.entry_norm().max(f64::MIN_POSITIVE);

    let off = |b: &Mat<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += b.at(i, j).abs();
                }
            }
        }
        s
    };

    let mut sweeps = 0;
    while off(&b) > stop {
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(Error::NoConvergence { routine: "jacobi_singular_values", iterations: MAX_SWEEPS });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let bpq = *b.at(p, q);
                if bpq.abs() <= stop / (n * n) as f64 {
                    continue;
                }
                // symmetric Jacobi rotation annihilating b[p][q]
                let theta = (*b.at(q, q) - *b.at(p, p)) / (2.0 * bpq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let bkp = *b.at(k, p);
                    let bkq = *b.at(k, q);
                    b.set(k, p, c * bkp - s * bkq);
                    b.set(k, q, s * bkp + c * bkq);
                }
                for k in 0..n {
                    let bpk = *b.at(p, k);
                    let bqk = *b.at(q, k);
                    b.set(p, k, c * bpk - s * bqk);
                    b.set(q, k, s * bpk + c * bqk);
                }
            }
        }
    }

    let mut vals: Vec<f64> = (0..n).map(|i| b.at(i, i).max(0.0).sqrt()).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    vals.truncate(d);
    Ok(vals)
}

/// Determinant by LU with partial pivoting.
pub fn det_f64(m: &Mat<f64>) -> f64 {
    assert!(m.is_square());
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut det = 1.0;
    for k in 0..n {
        let (pivot_row, pivot) = (k..n)
            .map(|i| (i, a[i][k].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot == 0.0 {
            return 0.0;
        }
        if pivot_row != k {
            a.swap(pivot_row, k);
            det = -det;
        }
        det *= a[k][k];
        for i in (k + 1)..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    det
}
