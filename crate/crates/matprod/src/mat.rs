//! Dense matrices over an abstract scalar, the L1 entry norm, scaled
//! running products, support patterns, and the entry-ratio functionals
//! used by the factorization bounds.

use crate::error::{Error, Result};
use crate::scalar::{rational_ln, Rat, Scalar};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        assert!(r > 0, "matrix needs at least one row");
        let c = rows[0].len();
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat::from_fn(rows, cols, |_, _| S::zero())
    }

    pub fn identity(n: usize) -> Self {
        Mat::from_fn(n, n, |i, j| if i == j { S::one() } else { S::zero() })
    }

    /// Column vector as a d×1 matrix.
    pub fn column(entries: Vec<S>) -> Self {
        let d = entries.len();
        Mat { rows: d, cols: 1, data: entries }
    }

    /// Standard basis column e_j (0-indexed).
    pub fn basis_column(d: usize, j: usize) -> Self {
        Mat::from_fn(d, 1, |i, _| if i == j { S::one() } else { S::zero() })
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Mat::from_fn(rows, cols, |_, _| S::one())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn entries(&self) -> &[S] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|x| !x.is_negative() || x.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
    }

    pub fn mul(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out: Mat<S> = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let add = a.clone() * other.at(k, j).clone();
                    let cur = out.at(i, j).clone();
                    out.set(i, j, cur + add);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j).clone() + other.at(i, j).clone())
    }

    pub fn sub(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j).clone() - other.at(i, j).clone())
    }

    pub fn scale(&self, s: &S) -> Mat<S> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j).clone() * s.clone())
    }

    /// Sum of absolute entries. The only norm used anywhere in the crate.
    pub fn entry_norm(&self) -> S {
        let mut acc = S::zero();
        for x in &self.data {
            acc = acc + x.abs();
        }
        acc
    }

    pub fn to_f64(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.at(i, j).to_f64())
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, mut e: u64) -> Mat<S> {
        assert!(self.is_square());
        let mut base = self.clone();
        let mut acc = Mat::identity(self.rows);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

impl Mat<Rat> {
    pub fn from_i64_rows(rows: &[&[i64]]) -> Self {
        Mat::from_rows(
            rows.iter().map(|r| r.iter().map(|&v| Rat::from_i64(v)).collect()).collect(),
        )
    }

    /// Natural log of the entry norm, exact rationals of any magnitude.
    pub fn entry_norm_ln(&self) -> f64 {
        rational_ln(&self.entry_norm())
    }
}

impl<S: Scalar> fmt::Display for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON literals: {"rows": n, "cols": m, "data": [[...]]} with entries either
// numbers or "p/q" strings. Shared by the CLI and the config formats.

pub fn mat_from_json<S: Scalar>(v: &serde_json::Value) -> Result<Mat<S>> {
    let obj = v.as_object().ok_or_else(|| Error::Invalid("matrix literal must be an object".into()))?;
    let rows = obj.get("rows").and_then(|x| x.as_u64()).ok_or_else(|| Error::Invalid("missing rows".into()))? as usize;
    let cols = obj.get("cols").and_then(|x| x.as_u64()).ok_or_else(|| Error::Invalid("missing cols".into()))? as usize;
    let data = obj.get("data").and_then(|x| x.as_array()).ok_or_else(|| Error::Invalid("missing data".into()))?;
    if data.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: format!("{rows} rows"),
            got: format!("{}", data.len()),
            context: "matrix literal",
        });
    }
    let mut out = Vec::with_capacity(rows);
    for row in data {
        let row = row.as_array().ok_or_else(|| Error::Invalid("data rows must be arrays".into()))?;
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{cols} cols"),
                got: format!("{}", row.len()),
                context: "matrix literal",
            });
        }
        let mut r = Vec::with_capacity(cols);
        for cell in row {
            r.push(scalar_from_json(cell)?);
        }
        out.push(r);
    }
    Ok(Mat::from_rows(out))
}

pub fn scalar_from_json<S: Scalar>(v: &serde_json::Value) -> Result<S> {
    match v {
        serde_json::Value::String(s) => S::parse_exact(s).map_err(Error::Invalid),
        serde_json::Value::Number(n) => S::parse_exact(&n.to_string()).map_err(Error::Invalid),
        _ => Err(Error::Invalid(format!("bad matrix entry {v}"))),
    }
}

pub fn mat_to_json<S: Scalar>(m: &Mat<S>) -> serde_json::Value {
    let data: Vec<serde_json::Value> = (0..m.rows())
        .map(|i| {
            serde_json::Value::Array(m.row(i).iter().map(scalar_to_json).collect())
        })
        .collect();
    serde_json::json!({"rows": m.rows(), "cols": m.cols(), "data": data})
}

pub fn scalar_to_json<S: Scalar>(x: &S) -> serde_json::Value {
    if S::EXACT {
        serde_json::Value::String(x.to_string())
    } else {
        serde_json::json!(x.to_f64())
    }
}

// ---------------------------------------------------------------------------
// Support patterns

/// Boolean occupancy mask of a matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportPattern {
    pub rows: usize,
    pub cols: usize,
    pub mask: Vec<bool>,
}

impl SupportPattern {
    pub fn at(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols + j]
    }

    /// Number of distinct column masks; an all-zero column is one pattern.
    pub fn distinct_column_count(&self) -> usize {
        let mut seen: Vec<Vec<bool>> = Vec::new();
        for j in 0..self.cols {
            let col: Vec<bool> = (0..self.rows).map(|i| self.at(i, j)).collect();
            if !seen.contains(&col) {
                seen.push(col);
            }
        }
        seen.len()
    }

    /// Boolean matrix product: reachability composition of the two masks.
    pub fn bool_product(&self, other: &SupportPattern) -> SupportPattern {
        assert_eq!(self.cols, other.rows);
        let mut mask = vec![false; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                if !self.at(i, k) {
                    continue;
                }
                for j in 0..other.cols {
                    if other.at(k, j) {
                        mask[i * other.cols + j] = true;
                    }
                }
            }
        }
        SupportPattern { rows: self.rows, cols: other.cols, mask }
    }
}

/// Occupancy mask of `m`. Float mode treats |entry| ≤ zero_tol as zero, with
/// zero_tol defaulting to 1e-12·entry_norm(m); exact mode compares to literal
/// zero and ignores the tolerance.
pub fn support_pattern<S: Scalar>(m: &Mat<S>, zero_tol: Option<f64>) -> (SupportPattern, usize) {
    let mask: Vec<bool> = if S::EXACT {
        m.entries().iter().map(|x| !x.is_zero()).collect()
    } else {
        let tol = zero_tol.unwrap_or_else(|| 1e-12 * m.entry_norm().to_f64());
        m.entries().iter().map(|x| x.to_f64().abs() > tol).collect()
    };
    let pat = SupportPattern { rows: m.rows(), cols: m.cols(), mask };
    let count = pat.distinct_column_count();
    (pat, count)
}

// ---------------------------------------------------------------------------
// Scaled running products

/// Running product kept at entry-norm 1 (float) or raw (exact), with the
/// peeled-off scale tracked in log space.
#[derive(Debug, Clone)]
pub struct ScaledMat<S> {
    pub unit: Mat<S>,
    pub log_scale: f64,
}

impl<S: Scalar> ScaledMat<S> {
    pub fn start(m: Mat<S>) -> Result<Self> {
        if m.is_zero() {
            return Err(Error::ProductVanished { step: 0 });
        }
        let mut sm = ScaledMat { unit: m, log_scale: 0.0 };
        sm.renormalize();
        Ok(sm)
    }

    pub fn identity(d: usize) -> Self {
        ScaledMat { unit: Mat::identity(d), log_scale: 0.0 }
    }

    fn renormalize(&mut self) {
        if S::EXACT {
            return; // exact mode stores the raw product
        }
        let norm = self.unit.entry_norm().to_f64();
        self.unit = self.unit.scale(&S::from_f64_lossy(1.0 / norm));
        self.log_scale += norm.ln();
    }

    /// log of the entry norm of the full (unscaled) product.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.unit.entry_norm().ln_positive()
    }

    /// The normalized product P_n/‖P_n‖ in f64. Exact units are divided by
    /// their entry norm before conversion so arbitrarily large products
    /// stay representable.
    pub fn normalized_f64(&self) -> Mat<f64> {
        if S::EXACT {
            let n = self.unit.entry_norm();
            let inv = S::from_i64(1) / n;
            self.unit.scale(&inv).to_f64()
        } else {
            let f = self.unit.to_f64();
            let n = f.entry_norm();
            f.scale(&(1.0 / n))
        }
    }
}

/// Append one factor on the right: acc·A, renormalized in float mode.
pub fn scaled_multiply<S: Scalar>(acc: &ScaledMat<S>, a: &Mat<S>, step: usize) -> Result<ScaledMat<S>> {
    let prod = acc.unit.mul(a);
    if prod.is_zero() {
        return Err(Error::ProductVanished { step });
    }
    let mut out = ScaledMat { unit: prod, log_scale: acc.log_scale };
    out.renormalize();
    Ok(out)
}

/// One nonzero kernel vector of a square matrix, or None when it is
/// invertible. Pivots are compared by absolute value; entries that are not
/// exact zeros count as pivots, so this is intended for exact scalars.
pub fn kernel_vector<S: Scalar>(m: &Mat<S>) -> Option<Vec<S>> {
    let d = m.rows();
    assert!(m.is_square());
    let mut a: Vec<Vec<S>> = (0..d).map(|i| m.row(i).to_vec()).collect();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut rank = 0usize;
    for col in 0..d {
        let mut best: Option<usize> = None;
        for row in rank..d {
            if !a[row][col].is_zero() {
                best = match best {
                    None => Some(row),
                    Some(b) => {
                        if a[row][col].abs() > a[b][col].abs() {
                            Some(row)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
        }
        let Some(prow) = best else { continue };
        a.swap(rank, prow);
        for row in rank + 1..d {
            if a[row][col].is_zero() {
                continue;
            }
            let f = a[row][col].clone() / a[rank][col].clone();
            for j in col..d {
                let s = a[rank][j].clone() * f.clone();
                a[row][j] = a[row][j].clone() - s;
            }
        }
        pivots.push((rank, col));
        rank += 1;
    }
    if rank == d {
        return None;
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let free = (0..d).find(|c| !pivot_cols.contains(c)).unwrap();
    let mut x = vec![S::zero(); d];
    x[free] = S::from_i64(1);
    for &(row, col) in pivots.iter().rev() {
        let mut s = S::zero();
        for j in col + 1..d {
            s = s + a[row][j].clone() * x[j].clone();
        }
        x[col] = -s / a[row][col].clone();
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Entry-ratio functionals

#[derive(Debug, Clone)]
pub struct ShapeFunctionals<S> {
    /// Λ: largest ratio of two entries in a common column (denominator nonzero).
    pub lambda_big: S,
    /// λ: worst ratio of a row's off-support mass to a support row sum.
    pub lambda_small: S,
    /// J(M, i): column support of each row.
    pub row_supports: Vec<Vec<usize>>,
}

pub fn shape_functionals<S: Scalar>(m: &Mat<S>) -> Result<ShapeFunctionals<S>> {
    if m.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    assert!(m.is_nonnegative(), "shape functionals are defined for nonnegative matrices");

    let mut lambda_big = S::zero();
    for j in 0..m.cols() {
        let mut max_e: Option<S> = None;
        let mut min_nz: Option<S> = None;
        for i in 0..m.rows() {
            let e = m.at(i, j);
            if max_e.as_ref().map_or(true, |c| e > c) {
                max_e = Some(e.clone());
            }
            if !e.is_zero() && min_nz.as_ref().map_or(true, |c| e < c) {
                min_nz = Some(e.clone());
            }
        }
        if let (Some(hi), Some(lo)) = (max_e, min_nz) {
            let ratio = hi / lo;
            if ratio > lambda_big {
                lambda_big = ratio;
            }
        }
    }

    let row_supports: Vec<Vec<usize>> = (0..m.rows())
        .map(|i| (0..m.cols()).filter(|&j| !m.at(i, j).is_zero()).collect())
        .collect();

    let mut lambda_small = S::zero();
    for (i, support) in row_supports.iter().enumerate() {
        if support.is_empty() {
            continue;
        }
        let mut denom = S::zero();
        for &j in support {
            denom = denom + m.at(i, j).clone();
        }
        for ip in 0..m.rows() {
            let mut numer = S::zero();
            for j in 0..m.cols() {
                if !support.contains(&j) {
                    numer = numer + m.at(ip, j).clone();
                }
            }
            let ratio = numer / denom.clone();
            if ratio > lambda_small {
                lambda_small = ratio;
            }
        }
    }

    Ok(ShapeFunctionals { lambda_big, lambda_small, row_supports })
}
