//! Matrix families (the alphabet of factors plus the optional measure data
//! r_i, c), symbol sequences driving the products, and the named families
//! used throughout: the 7×7 substitution family and its scaled variant
//! carrying an exact self-consistent measure.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::splitmix64;
use crate::scalar::{q, Rat, Scalar};

#[derive(Debug, Clone)]
pub struct MatrixFamily<S> {
    mats: Vec<Mat<S>>,
    /// Selector rows r_i (1×d), present when the family carries a measure.
    pub row_vectors: Option<Vec<Mat<S>>>,
    /// Terminal column c (d×1).
    pub terminal_vector: Option<Mat<S>>,
}

impl<S: Scalar> MatrixFamily<S> {
    /// Family without measure data.
    pub fn bare(mats: Vec<Mat<S>>) -> Result<Self> {
        MatrixFamily::new(mats, None, None)
    }

    pub fn new(
        mats: Vec<Mat<S>>,
        row_vectors: Option<Vec<Mat<S>>>,
        terminal_vector: Option<Mat<S>>,
    ) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::Invalid("family needs at least one matrix".into()));
        }
        let d = mats[0].rows();
        for (i, m) in mats.iter().enumerate() {
            if !m.is_square() {
                return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
            }
            if m.rows() != d {
                return Err(Error::DimensionMismatch {
                    expected: format!("{d}x{d}"),
                    got: format!("{}x{}", m.rows(), m.cols()),
                    context: "family matrix order",
                });
            }
            if !m.is_nonnegative() {
                return Err(Error::Invalid(format!("matrix {i} has a negative entry")));
            }
        }
        if let Some(rows) = &row_vectors {
            if rows.len() != mats.len() {
                return Err(Error::Invalid(format!(
                    "{} selector rows for {} matrices",
                    rows.len(),
                    mats.len()
                )));
            }
            for r in rows {
                if r.rows() != 1 || r.cols() != d {
                    return Err(Error::DimensionMismatch {
                        expected: format!("1x{d}"),
                        got: format!("{}x{}", r.rows(), r.cols()),
                        context: "selector row",
                    });
                }
            }
        }
        if let Some(c) = &terminal_vector {
            if c.rows() != d || c.cols() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: format!("{d}x1"),
                    got: format!("{}x{}", c.rows(), c.cols()),
                    context: "terminal vector",
                });
            }
        }
        let fam = MatrixFamily { mats, row_vectors, terminal_vector };
        fam.check_measure_consistency()?;
        Ok(fam)
    }

    /// Σ r_i·c = 1 and Σ M_i·c = c, exactly in rational mode and within
    /// 1e-10 in float mode. Only enforced when both r and c are present.
    fn check_measure_consistency(&self) -> Result<()> {
        let (Some(rows), Some(c)) = (&self.row_vectors, &self.terminal_vector) else {
            return Ok(());
        };
        let mut mass = S::zero();
        for r in rows {
            mass = mass + r.mul(c).at(0, 0).clone();
        }
        let mass_err = (mass - S::from_i64(1)).abs();
        let bad_mass =
            if S::EXACT { !mass_err.is_zero() } else { mass_err.to_f64() > 1e-10 };
        if bad_mass {
            return Err(Error::Invalid(format!(
                "selector mass differs from 1 by {}",
                mass_err.to_f64()
            )));
        }
        let mut sum = Mat::zeros(c.rows(), 1);
        for m in &self.mats {
            sum = sum.add(&m.mul(c));
        }
        let gap = sum.sub(c).entry_norm();
        let bad_fix = if S::EXACT { !gap.is_zero() } else { gap.to_f64() > 1e-10 };
        if bad_fix {
            return Err(Error::Invalid(format!(
                "terminal vector is not fixed by the matrix sum, gap {}",
                gap.to_f64()
            )));
        }
        Ok(())
    }

    pub fn alphabet_size(&self) -> usize {
        self.mats.len()
    }

    pub fn order(&self) -> usize {
        self.mats[0].rows()
    }

    pub fn mat(&self, i: usize) -> &Mat<S> {
        &self.mats[i]
    }

    pub fn mats(&self) -> &[Mat<S>] {
        &self.mats
    }

    pub fn to_f64(&self) -> MatrixFamily<f64> {
        MatrixFamily {
            mats: self.mats.iter().map(|m| m.to_f64()).collect(),
            row_vectors: self
                .row_vectors
                .as_ref()
                .map(|rs| rs.iter().map(|r| r.to_f64()).collect()),
            terminal_vector: self.terminal_vector.as_ref().map(|c| c.to_f64()),
        }
    }
}

// ---------------------------------------------------------------------------
// Symbol sequences

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymbolSequence {
    Word(Vec<usize>),
    Periodic { preperiod: Vec<usize>, period: Vec<usize> },
    Random { seed: u64 },
}

impl SymbolSequence {
    /// Symbol at 0-based position `n`. Deterministic; random sequences are
    /// counter-indexed so the same (seed, n) always yields the same letter.
    pub fn symbol(&self, n: usize, alphabet: usize) -> Result<usize> {
        let s = match self {
            SymbolSequence::Word(w) => *w.get(n).ok_or(Error::Invalid(format!(
                "word of length {} has no symbol at position {n}",
                w.len()
            )))?,
            SymbolSequence::Periodic { preperiod, period } => {
                if n < preperiod.len() {
                    preperiod[n]
                } else {
                    if period.is_empty() {
                        return Err(Error::Invalid("empty period".into()));
                    }
                    period[(n - preperiod.len()) % period.len()]
                }
            }
            SymbolSequence::Random { seed } => (splitmix64(*seed, n as u64) % alphabet as u64) as usize,
        };
        if s >= alphabet {
            return Err(Error::Invalid(format!(
                "symbol {s} at position {n} outside alphabet of size {alphabet}"
            )));
        }
        Ok(s)
    }

    pub fn prefix(&self, len: usize, alphabet: usize) -> Result<Vec<usize>> {
        (0..len).map(|n| self.symbol(n, alphabet)).collect()
    }
}

/// Parse a word literal: digit groups with optional repetition, e.g.
/// "0121", "(012)^40", or "1^5(20)^3". A bare digit before `^` repeats that
/// single letter.
pub fn parse_word(text: &str) -> Result<Vec<usize>> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Invalid("empty word".into()));
    }
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let group: Vec<usize> = if bytes[i] == b'(' {
            let close = s[i..]
                .find(')')
                .ok_or_else(|| Error::Invalid(format!("unclosed '(' in {s:?}")))?
                + i;
            let inner = &s[i + 1..close];
            i = close + 1;
            digits(inner)?
        } else {
            let d = (bytes[i] as char)
                .to_digit(10)
                .ok_or_else(|| Error::Invalid(format!("bad character {:?} in word", bytes[i] as char)))?;
            i += 1;
            vec![d as usize]
        };
        let mut reps = 1usize;
        if i < bytes.len() && bytes[i] == b'^' {
            i += 1;
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            reps = s[start..i]
                .parse()
                .map_err(|_| Error::Invalid(format!("bad repeat count in {s:?}")))?;
        }
        for _ in 0..reps {
            out.extend_from_slice(&group);
        }
    }
    Ok(out)
}

fn digits(s: &str) -> Result<Vec<usize>> {
    s.chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as usize)
                .ok_or_else(|| Error::Invalid(format!("bad character {c:?} in word")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cylinder-mass evaluation

/// row·M_{w_1}⋯M_{w_n}·c. Float mode renormalizes the running row against
/// underflow; a vanishing row short-circuits to an exact zero.
pub fn weighted_word_measure<S: Scalar>(
    mats: &[Mat<S>],
    row: &Mat<S>,
    word: &[usize],
    c: &Mat<S>,
) -> Result<S> {
    let mut acc = row.clone();
    let mut log = 0.0f64;
    for &i in word {
        let m = mats.get(i).ok_or_else(|| {
            Error::Invalid(format!("symbol {i} outside alphabet of size {}", mats.len()))
        })?;
        acc = acc.mul(m);
        if acc.is_zero() {
            return Ok(S::zero());
        }
        if !S::EXACT {
            let nrm = acc.entry_norm();
            acc = acc.scale(&(S::from_i64(1) / nrm.clone()));
            log += nrm.to_f64().ln();
        }
    }
    let v = acc.mul(c).at(0, 0).clone();
    Ok(if S::EXACT { v } else { v * S::from_f64_lossy(log.exp()) })
}

/// Cylinder mass r_{w_1}·M_{w_2}⋯M_{w_n}·c of a measured family; the empty
/// word has mass 1 by normalization.
pub fn eq1_measure<S: Scalar>(fam: &MatrixFamily<S>, word: &[usize]) -> Result<S> {
    let rows = fam
        .row_vectors
        .as_ref()
        .ok_or_else(|| Error::Invalid("family carries no selector rows".into()))?;
    let c = fam
        .terminal_vector
        .as_ref()
        .ok_or_else(|| Error::Invalid("family carries no terminal vector".into()))?;
    let Some((&first, rest)) = word.split_first() else {
        return Ok(S::from_i64(1));
    };
    let row = rows
        .get(first)
        .ok_or_else(|| Error::Invalid(format!("symbol {first} has no selector row")))?;
    weighted_word_measure(fam.mats(), row, rest, c)
}

// ---------------------------------------------------------------------------
// Named families

fn rows_7x7(rows: [&[usize]; 7]) -> Mat<Rat> {
    Mat::from_fn(7, 7, |i, j| {
        if rows[i].contains(&(j + 1)) {
            Rat::from_i64(1)
        } else {
            Rat::from_i64(0)
        }
    })
}

/// The three 7×7 substitution matrices (integer entries). Row 6 of the
/// third matrix is zero; that is forced by the exact fixed-vector identity
/// checked in the tests below.
pub fn thm23_matrices() -> [Mat<Rat>; 3] {
    let m0 = rows_7x7([&[1], &[3], &[4, 5], &[], &[1, 7], &[5], &[2]]);
    let m1 = rows_7x7([&[3, 4], &[6], &[4, 5], &[1], &[3], &[], &[]]);
    let m2 = rows_7x7([&[1, 5, 7], &[], &[1, 7], &[4, 5], &[5], &[], &[]]);
    [m0, m1, m2]
}

/// Fixed column (12, 8, 13, 4, 12, 6, 4)/20 of the scaled family: applying
/// M_0/2 + M_1/4 + M_2/16 returns it exactly.
pub fn c_beta() -> Mat<Rat> {
    Mat::column([12, 8, 13, 4, 12, 6, 4].iter().map(|&n| q(n, 20)).collect())
}

/// Division weights for the scaled family: 2, 4, 16.
pub fn beta_scale_denominators() -> [i64; 3] {
    [2, 4, 16]
}

/// Scaled substitution family with its exact measure data: matrices
/// M_0/2, M_1/4, M_2/16, selector rows u_1ᵗ, u_3ᵗ/2, u_5ᵗ/8, and the fixed
/// column c. Both measure identities hold exactly.
pub fn beta_scaled_family() -> MatrixFamily<Rat> {
    let raw = thm23_matrices();
    let dens = beta_scale_denominators();
    let mats: Vec<Mat<Rat>> =
        raw.iter().zip(dens).map(|(m, d)| m.scale(&q(1, d))).collect();
    let mut r0 = Mat::zeros(1, 7);
    r0.set(0, 0, q(1, 1));
    let mut r1 = Mat::zeros(1, 7);
    r1.set(0, 2, q(1, 2));
    let mut r2 = Mat::zeros(1, 7);
    r2.set(0, 4, q(1, 8));
    MatrixFamily::new(mats, Some(vec![r0, r1, r2]), Some(c_beta()))
        .expect("exact identities hold by construction")
}
