//! Matrix representations of Bernoulli convolutions in integer base, the
//! column-structured Markov-measure family, and the cubic-root beta case
//! with its exact selector rows.

use crate::eigen::{perron_vector, spectral_radius};
use crate::error::{Error, Result};
use crate::family::{eq1_measure, weighted_word_measure, MatrixFamily};
use crate::mat::{kernel_vector, Mat};
use crate::rng::SplitMix;
use crate::scalar::{Rat, Scalar};

#[derive(Debug, Clone)]
pub struct ConditionH {
    pub holds: bool,
    /// N divisible by k−1 (the degenerate branch).
    pub divisible: bool,
    pub p_last: f64,
    /// Spectral radius of the upper-left block of M_r; None when q = 0.
    pub rho_mr: Option<f64>,
}

/// Integer-base representation: matrices M_0..M_{k−1} of order q+1 with
/// entry (h, j) = p_{i+kh−j} (out-of-range indices are hard zeros), the
/// stationary column c_ν, and the block data of the split
/// M_0 = [[p_0, 0], [v_0, M′_0]], M_r = [[M′_r, v_r], [0, p_N]],
/// M_i = [[M′_i, v_i], [0, 0]] for i > r.
#[derive(Debug, Clone)]
pub struct BernoulliSpec<S> {
    pub base: usize,
    pub p: Vec<S>,
    pub q: usize,
    pub r: usize,
    pub mats: Vec<Mat<S>>,
    pub c_nu: Mat<S>,
    pub condition_h: ConditionH,
}

/// Build the representation for base k and weights p_0..p_N. c_ν is the
/// right 1-eigenvector of Σ M_i (the sum is column-stochastic because every
/// column collects all of p exactly once), normalized to total mass 1.
pub fn build_representation<S: Scalar>(k: usize, p: &[S]) -> Result<BernoulliSpec<S>> {
    if k < 2 {
        return Err(Error::Invalid("base must be at least 2".into()));
    }
    if p.len() < k {
        return Err(Error::Invalid(format!(
            "need at least {k} weights for base {k} (N ≥ k−1), got {}",
            p.len()
        )));
    }
    if !p.iter().all(|x| *x > S::zero()) {
        return Err(Error::Invalid("weights must be strictly positive".into()));
    }
    let total = p.iter().fold(S::zero(), |a, b| a + b.clone());
    let dev = (total - S::from_i64(1)).abs();
    let bad = if S::EXACT { !dev.is_zero() } else { dev.to_f64() > 1e-12 };
    if bad {
        return Err(Error::Invalid("weights must sum to 1".into()));
    }

    let n = p.len() - 1;
    let q = n.div_ceil(k - 1) - 1;
    let r = n - (k - 1) * q;
    debug_assert!(r >= 1 && r <= k - 1);

    let entry = |i: usize, h: usize, j: usize| -> S {
        let idx = i as i64 + (k as i64) * (h as i64) - j as i64;
        if idx < 0 || idx > n as i64 {
            S::zero()
        } else {
            p[idx as usize].clone()
        }
    };
    let mats: Vec<Mat<S>> =
        (0..k).map(|i| Mat::from_fn(q + 1, q + 1, |h, j| entry(i, h, j))).collect();

    let mut msum = Mat::zeros(q + 1, q + 1);
    for m in &mats {
        msum = msum.add(m);
    }
    let c_nu = stationary_vector(&msum)?;

    let p_last = p[n].to_f64();
    let divisible = n % (k - 1) == 0;
    let rho_mr = if q >= 1 {
        let block = Mat::from_fn(q, q, |i, j| mats[r].at(i, j).to_f64());
        Some(spectral_radius(&block)?)
    } else {
        None
    };
    let holds = divisible || rho_mr.map(|rho| p_last <= rho + 1e-12).unwrap_or(false);
    let condition_h = ConditionH { holds, divisible, p_last, rho_mr };

    Ok(BernoulliSpec { base: k, p: p.to_vec(), q, r, mats, c_nu, condition_h })
}

/// Right 1-eigenvector of a column-stochastic nonnegative matrix, mass 1.
/// Exact mode solves (M − I)x = 0 by elimination; float mode power-iterates
/// to 1e-13 and then checks the eigenvalue-1 residual.
fn stationary_vector<S: Scalar>(msum: &Mat<S>) -> Result<Mat<S>> {
    let d = msum.rows();
    if S::EXACT {
        let shifted = msum.sub(&Mat::identity(d));
        let x = kernel_vector(&shifted).ok_or(Error::EigenvalueNotOne { residual: 1.0 })?;
        let total = x.iter().fold(S::zero(), |a, b| a + b.clone());
        if total.is_zero() {
            return Err(Error::EigenvalueNotOne { residual: 1.0 });
        }
        let scaled: Vec<S> = x.into_iter().map(|v| v / total.clone()).collect();
        if !scaled.iter().all(|v| *v >= S::zero()) {
            return Err(Error::EigenvalueNotOne { residual: 1.0 });
        }
        Ok(Mat::column(scaled))
    } else {
        let m64 = msum.to_f64();
        let x = perron_vector(&m64, 1e-13, 200_000)?;
        let mx = m64.mul(&Mat::column(x.clone()));
        let residual: f64 = (0..d).map(|i| (mx.at(i, 0) - x[i]).abs()).sum();
        if residual > 1e-9 {
            return Err(Error::EigenvalueNotOne { residual });
        }
        Ok(Mat::column(x.into_iter().map(S::from_f64_lossy).collect()))
    }
}

impl<S: Scalar> BernoulliSpec<S> {
    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }

    pub fn order(&self) -> usize {
        self.q + 1
    }

    /// Lower-right q×q block of M_0.
    pub fn m0_prime(&self) -> Option<Mat<S>> {
        (self.q >= 1).then(|| Mat::from_fn(self.q, self.q, |i, j| self.mats[0].at(i + 1, j + 1).clone()))
    }

    /// Upper-left q×q block of M_r.
    pub fn mr_prime(&self) -> Option<Mat<S>> {
        self.m_prime(self.r)
    }

    /// Square block of M_i: lower-right for i = 0, upper-left for i ≥ r.
    pub fn m_prime(&self, i: usize) -> Option<Mat<S>> {
        if self.q == 0 {
            return None;
        }
        if i == 0 {
            self.m0_prime()
        } else if i >= self.r && i < self.base {
            Some(Mat::from_fn(self.q, self.q, |a, b| self.mats[i].at(a, b).clone()))
        } else {
            None
        }
    }

    /// Column vector of the split: lower-left of M_0, upper-right of M_i
    /// for i ≥ r.
    pub fn v_vec(&self, i: usize) -> Option<Mat<S>> {
        if self.q == 0 {
            return None;
        }
        if i == 0 {
            Some(Mat::from_fn(self.q, 1, |a, _| self.mats[0].at(a + 1, 0).clone()))
        } else if i >= self.r && i < self.base {
            Some(Mat::from_fn(self.q, 1, |a, _| self.mats[i].at(a, self.q).clone()))
        } else {
            None
        }
    }

    /// Measured family seen from translate h: selector rows
    /// r_i = ᵗu_{h+1}·M_i / (c_ν)_h, terminal vector c_ν. The selector mass
    /// is exactly 1.
    pub fn family_at_translate(&self, h: usize) -> Result<MatrixFamily<S>> {
        if h > self.q {
            return Err(Error::Invalid(format!("translate {h} exceeds q = {}", self.q)));
        }
        let ch = self.c_nu.at(h, 0).clone();
        if ch.is_zero() {
            return Err(Error::Invalid(format!("c_ν vanishes at translate {h}")));
        }
        let d = self.order();
        let rows: Vec<Mat<S>> = self
            .mats
            .iter()
            .map(|m| Mat::from_fn(1, d, |_, j| m.at(h, j).clone() / ch.clone()))
            .collect();
        MatrixFamily::new(self.mats.clone(), Some(rows), Some(self.c_nu.clone()))
    }

    /// Measured family with compound selectors r_i = ᵗ1·M_i (mass 1 because
    /// Σ M_i is column-stochastic).
    pub fn family_compound(&self) -> Result<MatrixFamily<S>> {
        let d = self.order();
        let rows: Vec<Mat<S>> = self
            .mats
            .iter()
            .map(|m| Mat::from_fn(1, d, |_, j| (0..d).fold(S::zero(), |a, i| a + m.at(i, j).clone())))
            .collect();
        MatrixFamily::new(self.mats.clone(), Some(rows), Some(self.c_nu.clone()))
    }
}

/// ᵗu_{h+1}·M_{i_1}⋯M_{i_n}·c_ν: the measure of the base-k cylinder of the
/// digit word seen from translate h.
pub fn cylinder_measure<S: Scalar>(
    spec: &BernoulliSpec<S>,
    word: &[usize],
    h: usize,
) -> Result<S> {
    if h > spec.q {
        return Err(Error::Invalid(format!("translate {h} exceeds q = {}", spec.q)));
    }
    if let Some(&bad) = word.iter().find(|&&i| i >= spec.base) {
        return Err(Error::Invalid(format!("digit {bad} outside base {}", spec.base)));
    }
    let d = spec.order();
    let row = Mat::from_fn(1, d, |_, j| if j == h { S::from_i64(1) } else { S::zero() });
    weighted_word_measure(&spec.mats, &row, word, &spec.c_nu)
}

// ---------------------------------------------------------------------------
// Markov measures

/// Family whose r·M_{w_2}⋯M_{w_n}·c mass reproduces the Markov chain: M_j carries
/// column j holding the j-th column of P, the selector rows put π_j at
/// slot j, and c is all ones.
pub fn markov_representation<S: Scalar>(
    transition: &Mat<S>,
    initial: &[S],
) -> Result<MatrixFamily<S>> {
    if !transition.is_square() {
        return Err(Error::NotSquare { rows: transition.rows(), cols: transition.cols() });
    }
    let a = transition.rows();
    if initial.len() != a {
        return Err(Error::DimensionMismatch {
            expected: format!("{a}"),
            got: format!("{}", initial.len()),
            context: "initial distribution",
        });
    }
    let row_ok = |sum: S| -> bool {
        let dev = (sum - S::from_i64(1)).abs();
        if S::EXACT {
            dev.is_zero()
        } else {
            dev.to_f64() <= 1e-12
        }
    };
    for i in 0..a {
        let sum = (0..a).fold(S::zero(), |acc, j| acc + transition.at(i, j).clone());
        if !row_ok(sum) {
            return Err(Error::NotStochastic { reason: format!("transition row {i} does not sum to 1") });
        }
    }
    if !transition.is_nonnegative() {
        return Err(Error::NotStochastic { reason: "negative transition entry".into() });
    }
    if !initial.iter().all(|x| *x >= S::zero())
        || !row_ok(initial.iter().fold(S::zero(), |acc, x| acc + x.clone()))
    {
        return Err(Error::NotStochastic { reason: "initial distribution is not a probability vector".into() });
    }

    let mats: Vec<Mat<S>> = (0..a)
        .map(|j| {
            Mat::from_fn(a, a, |i, col| {
                if col == j {
                    transition.at(i, j).clone()
                } else {
                    S::zero()
                }
            })
        })
        .collect();
    let rows: Vec<Mat<S>> = (0..a)
        .map(|j| Mat::from_fn(1, a, |_, col| if col == j { initial[j].clone() } else { S::zero() }))
        .collect();
    let c = Mat::from_fn(a, 1, |_, _| S::from_i64(1));
    MatrixFamily::new(mats, Some(rows), Some(c))
}

// ---------------------------------------------------------------------------
// The β³ = 2β² − β + 1 case

#[derive(Debug, Clone)]
pub struct BetaSpec {
    pub beta: f64,
    /// Substitution words for the letters 0, 1, 2.
    pub words: [&'static str; 3],
    /// Scaled matrices with the exact selector rows and terminal vector.
    pub family: MatrixFamily<Rat>,
    /// Translates j_1..j_7 of the seven tracked states.
    pub translates: [f64; 7],
}

/// Root of x³ − 2x² + x − 1 by bisection on [1.7, 1.8], to 1e-15.
fn beta_root() -> f64 {
    let f = |x: f64| x * x * x - 2.0 * x * x + x - 1.0;
    let (mut lo, mut hi) = (1.7f64, 1.8f64);
    // the cubic is strictly increasing on the bracket
    let dfdx = |x: f64| 3.0 * x * x - 4.0 * x + 1.0;
    assert!(dfdx(lo) > 0.0 && dfdx(hi) > 0.0 && f(lo) < 0.0 && f(hi) > 0.0);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn beta_representation() -> BetaSpec {
    let beta = beta_root();
    let b2 = beta * beta;
    let translates = [
        0.0,
        beta - 1.0,
        1.0 / b2,
        (1.0 - beta) / beta,
        1.0 / beta,
        (beta + 1.0) / b2,
        1.0,
    ];
    BetaSpec {
        beta,
        words: ["0", "10", "1100"],
        family: crate::family::beta_scaled_family(),
        translates,
    }
}

impl BetaSpec {
    /// Concatenation of the substitution words of the letters.
    pub fn substitute_word(&self, word: &[usize]) -> Result<String> {
        let mut out = String::new();
        for &i in word {
            let w = self
                .words
                .get(i)
                .ok_or_else(|| Error::Invalid(format!("letter {i} outside alphabet of size 3")))?;
            out.push_str(w);
        }
        Ok(out)
    }

    /// Endpoints [Σ ε_i β^{−i}, Σ ε_i β^{−i} + β^{−m}) of the beta-expansion
    /// cylinder of the substituted word.
    pub fn interval(&self, word: &[usize]) -> Result<(f64, f64)> {
        let eps = self.substitute_word(word)?;
        let mut lo = 0.0f64;
        let mut scale = 1.0f64;
        for ch in eps.chars() {
            scale /= self.beta;
            if ch == '1' {
                lo += scale;
            }
        }
        Ok((lo, lo + scale))
    }

    /// Selector-then-product mass of a word over {0, 1, 2}, exact.
    pub fn cylinder_measure(&self, word: &[usize]) -> Result<Rat> {
        eq1_measure(&self.family, word)
    }
}

// ---------------------------------------------------------------------------
// Row positivity and the sandwich constant

#[derive(Debug, Clone)]
pub struct PositivityReport {
    pub first_row_positive: bool,
    pub last_row_positive: bool,
    pub interior_positive: bool,
    /// ω_1 ≠ 0 forces the first row positive.
    pub first_row_required: bool,
    /// ω_1 < r forces the last row positive.
    pub last_row_required: bool,
    /// No forced row failed and the interior is positive.
    pub lemma_consistent: bool,
    /// max{x, 1/x} over nonnull entries of all length-(q+1) products.
    pub k_constant: Option<f64>,
    /// Sandwich (1/K)·uᵗu ≤ M_w ≤ K·uᵗu tested (words of length q+1 only).
    pub sandwich_checked: bool,
    pub sandwich_holds: bool,
}

/// Row-positivity structure of M_w = M_{w_1}⋯M_{w_n}: interior rows are
/// positive for every word of length ≥ q; the first and last rows are
/// forced positive by ω_1 ≠ 0 and ω_1 < r respectively (the converses can
/// fail, so only the forced directions enter `lemma_consistent`).
pub fn word_positivity<S: Scalar>(
    spec: &BernoulliSpec<S>,
    word: &[usize],
) -> Result<PositivityReport> {
    if word.len() < spec.q {
        return Err(Error::WordTooShort { needed: spec.q, got: word.len() });
    }
    if let Some(&bad) = word.iter().find(|&&i| i >= spec.base) {
        return Err(Error::Invalid(format!("digit {bad} outside base {}", spec.base)));
    }
    let d = spec.order();
    let mut prod = Mat::<S>::identity(d);
    for &i in word {
        prod = prod.mul(&spec.mats[i]);
    }
    let row_positive =
        |i: usize| (0..d).all(|j| *prod.at(i, j) > S::zero());
    let first_row_positive = row_positive(0);
    let last_row_positive = row_positive(d - 1);
    let interior_positive = (1..d.saturating_sub(1)).all(row_positive);
    let w1 = *word.first().unwrap_or(&0);
    let first_row_required = w1 != 0;
    let last_row_required = w1 < spec.r;
    let lemma_consistent = interior_positive
        && (!first_row_required || first_row_positive)
        && (!last_row_required || last_row_positive);

    let k_constant = sandwich_constant(spec);
    let (sandwich_checked, sandwich_holds) = match (k_constant, word.len() == spec.q + 1) {
        (Some(k), true) => {
            let tol = 1e-12 * k;
            let mut ok = true;
            for i in 0..d {
                let forced = (i > 0 && i + 1 < d)
                    || (i == 0 && first_row_required)
                    || (i + 1 == d && last_row_required);
                for j in 0..d {
                    let x = prod.at(i, j).to_f64();
                    if x > k + tol {
                        ok = false;
                    }
                    if forced && x < 1.0 / k - tol {
                        ok = false;
                    }
                }
            }
            (true, ok)
        }
        _ => (false, false),
    };

    Ok(PositivityReport {
        first_row_positive,
        last_row_positive,
        interior_positive,
        first_row_required,
        last_row_required,
        lemma_consistent,
        k_constant,
        sandwich_checked,
        sandwich_holds,
    })
}

/// K = max{x, 1/x} over nonnull entries of every length-(q+1) product.
/// None when the word count k^(q+1) is unreasonably large.
fn sandwich_constant<S: Scalar>(spec: &BernoulliSpec<S>) -> Option<f64> {
    let words = (spec.base as u64).checked_pow(spec.q as u32 + 1)?;
    if words > 10_000 {
        return None;
    }
    let d = spec.order();
    let mut k_const = 1.0f64;
    for idx in 0..words {
        let mut prod = Mat::<S>::identity(d);
        let mut rest = idx;
        for _ in 0..=spec.q {
            prod = prod.mul(&spec.mats[(rest % spec.base as u64) as usize]);
            rest /= spec.base as u64;
        }
        for e in prod.entries() {
            if !e.is_zero() {
                let x = e.to_f64();
                k_const = k_const.max(x).max(1.0 / x);
            }
        }
    }
    Some(k_const)
}

// ---------------------------------------------------------------------------
// Direct enumeration of truncated expansions

/// Bracket [lower, upper] for the mass the random sum Σ ω_n k^{−n} puts in
/// [lo, hi): digit strings are expanded depth-first with subtree pruning,
/// and mass still straddling the boundary at depth T counts only toward the
/// upper bound. Exhaustive for T ≤ 24, seeded sampling beyond.
pub fn enumeration_oracle(
    k: usize,
    p: &[f64],
    t: usize,
    interval: (f64, f64),
) -> Result<(f64, f64)> {
    if k < 2 || p.is_empty() {
        return Err(Error::Invalid("need base ≥ 2 and nonempty weights".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 || p.iter().any(|x| *x < 0.0) {
        return Err(Error::Invalid("weights must be a probability vector".into()));
    }
    let n = p.len() - 1;
    let tail_unit = n as f64 / (k - 1) as f64;
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::Invalid("interval must satisfy lo < hi".into()));
    }

    if t <= 24 {
        let mut lower = 0.0f64;
        let mut upper = 0.0f64;
        // stack of (depth, value, mass)
        let mut stack = vec![(0usize, 0.0f64, 1.0f64)];
        let kf = k as f64;
        while let Some((depth, value, mass)) = stack.pop() {
            let reach = value + tail_unit * kf.powi(-(depth as i32));
            if value >= lo && reach < hi {
                lower += mass;
                upper += mass;
                continue;
            }
            if reach < lo || value >= hi {
                continue;
            }
            if depth == t {
                upper += mass;
                continue;
            }
            let step = kf.powi(-(depth as i32 + 1));
            for (digit, &w) in p.iter().enumerate() {
                stack.push((depth + 1, value + digit as f64 * step, mass * w));
            }
        }
        Ok((lower, upper))
    } else {
        const SAMPLES: usize = 200_000;
        let mut rng = SplitMix::new(0xBE7_0C1E);
        let kf = k as f64;
        let tail = tail_unit * kf.powi(-(t as i32));
        let mut certain = 0usize;
        let mut straddle = 0usize;
        for _ in 0..SAMPLES {
            let mut value = 0.0f64;
            let mut step = 1.0f64;
            for _ in 0..t {
                step /= kf;
                // inverse-CDF draw of one digit
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut digit = p.len() - 1;
                for (i, w) in p.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        digit = i;
                        break;
                    }
                }
                value += digit as f64 * step;
            }
            if value >= lo && value + tail < hi {
                certain += 1;
            } else if value + tail >= lo && value < hi {
                straddle += 1;
            }
        }
        Ok((certain as f64 / SAMPLES as f64, (certain + straddle) as f64 / SAMPLES as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;
    use num_traits::{Signed, Zero};

    fn quarter_spec() -> BernoulliSpec<Rat> {
        build_representation(2, &[q(1, 4), q(1, 2), q(1, 4)]).unwrap()
    }

    fn ce22_weights() -> Vec<f64> {
        vec![0.4, 0.1, 0.2, 0.3]
    }

    #[test]
    fn quarter_spec_matches_hand_derivation() {
        let spec = quarter_spec();
        assert_eq!((spec.q, spec.r), (1, 1));
        assert_eq!(spec.mats[0], Mat::from_rows(vec![vec![q(1, 4), q(0, 1)], vec![q(1, 4), q(1, 2)]]));
        assert_eq!(spec.mats[1], Mat::from_rows(vec![vec![q(1, 2), q(1, 4)], vec![q(0, 1), q(1, 4)]]));
        assert_eq!(spec.c_nu, Mat::column(vec![q(1, 2), q(1, 2)]));
        assert!(spec.condition_h.holds && spec.condition_h.divisible);
    }

    #[test]
    fn base3_spec_shape_and_failing_h() {
        let spec = build_representation(3, &ce22_weights()).unwrap();
        assert_eq!((spec.q, spec.r), (1, 1));
        let m1 = &spec.mats[1];
        assert!((m1.at(0, 0) - 0.1).abs() < 1e-15);
        assert!((m1.at(0, 1) - 0.4).abs() < 1e-15);
        assert!(m1.at(1, 0).abs() < 1e-15);
        assert!((m1.at(1, 1) - 0.3).abs() < 1e-15);
        // blocks of the split
        assert!((spec.mr_prime().unwrap().at(0, 0) - 0.1).abs() < 1e-15);
        assert!((spec.v_vec(2).unwrap().at(0, 0) - 0.1).abs() < 1e-15);
        assert!((spec.m_prime(0).unwrap().at(0, 0) - 0.2).abs() < 1e-15);
        // stationary vector (5/8, 3/8)
        assert!((spec.c_nu.at(0, 0) - 0.625).abs() < 1e-12);
        assert!((spec.c_nu.at(1, 0) - 0.375).abs() < 1e-12);
        let h = &spec.condition_h;
        assert!(!h.holds && !h.divisible);
        assert!((h.rho_mr.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lebesgue_case_is_scalar() {
        let spec = build_representation(2, &[q(1, 2), q(1, 2)]).unwrap();
        assert_eq!((spec.q, spec.r), (0, 1));
        assert_eq!(spec.order(), 1);
        assert_eq!(spec.c_nu.at(0, 0), &q(1, 1));
        assert!(spec.condition_h.holds);
        assert!(spec.m0_prime().is_none());
    }

    #[test]
    fn bad_weight_vectors_are_rejected() {
        assert!(build_representation(2, &[q(1, 2), q(1, 4)]).is_err()); // sum ≠ 1
        assert!(build_representation(3, &[q(1, 2), q(1, 2)]).is_err()); // N < k−1
        assert!(build_representation(2, &[q(1, 2), q(0, 1), q(1, 2)]).is_err()); // zero weight
        assert!(build_representation(1, &[q(1, 1)]).is_err());
    }

    #[test]
    fn cylinder_measures() {
        let uniform = build_representation(2, &[q(1, 2), q(1, 2)]).unwrap();
        assert_eq!(cylinder_measure(&uniform, &[0, 1, 0, 1], 0).unwrap(), q(1, 16));

        let spec = quarter_spec();
        assert_eq!(cylinder_measure(&spec, &[0], 0).unwrap(), q(1, 8));
        // empty word returns the c_ν entries
        assert_eq!(cylinder_measure(&spec, &[], 0).unwrap(), q(1, 2));
        assert_eq!(cylinder_measure(&spec, &[], 1).unwrap(), q(1, 2));
        assert!(cylinder_measure(&spec, &[2], 0).is_err());
        assert!(cylinder_measure(&spec, &[0], 5).is_err());
    }

    #[test]
    fn additivity_is_exact_in_rational_mode() {
        let spec = quarter_spec();
        let words: [&[usize]; 4] = [&[], &[1], &[0, 1], &[1, 0, 0, 1, 1, 0]];
        for w in words {
            for h in 0..=spec.q {
                let total = cylinder_measure(&spec, w, h).unwrap();
                let mut sum = Rat::zero();
                for i in 0..spec.base {
                    let mut ext = w.to_vec();
                    ext.push(i);
                    sum = sum + cylinder_measure(&spec, &ext, h).unwrap();
                }
                assert_eq!(sum, total);
            }
        }
    }

    #[test]
    fn additivity_float_base3() {
        let spec = build_representation(3, &ce22_weights()).unwrap();
        let words: [&[usize]; 3] = [&[2], &[1, 0], &[0, 2, 1, 1]];
        for w in words {
            let total: f64 = cylinder_measure(&spec, w, 1).unwrap();
            let sum: f64 =
                (0..3).map(|i| {
                    let mut ext = w.to_vec();
                    ext.push(i);
                    cylinder_measure(&spec, &ext, 1).unwrap()
                }).sum();
            assert!((sum - total).abs() < 1e-12);
        }
    }

    #[test]
    fn translate_families_have_unit_mass() {
        let spec = quarter_spec();
        for h in 0..=spec.q {
            let fam = spec.family_at_translate(h).unwrap();
            assert_eq!(fam.alphabet_size(), 2);
        }
        let fam = spec.family_compound().unwrap();
        assert_eq!(eq1_measure(&fam, &[]).unwrap(), q(1, 1));
    }

    #[test]
    fn markov_masses_match_the_product_formula() {
        let p = Mat::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let fam = markov_representation(&p, &[0.5, 0.5]).unwrap();
        let m = eq1_measure(&fam, &[0, 1]).unwrap();
        assert!((m - 0.05).abs() < 1e-15);

        let u = Mat::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let fam = markov_representation(&u, &[0.25, 0.75]).unwrap();
        let m = eq1_measure(&fam, &[1, 0, 0, 1]).unwrap();
        assert!((m - 0.75 * 0.125).abs() < 1e-15);

        let id = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let fam = markov_representation(&id, &[0.5, 0.5]).unwrap();
        assert_eq!(eq1_measure(&fam, &[0, 1]).unwrap(), 0.0);

        let bad = Mat::from_rows(vec![vec![0.9, 0.2], vec![0.2, 0.8]]);
        assert!(matches!(
            markov_representation(&bad, &[0.5, 0.5]).unwrap_err(),
            Error::NotStochastic { .. }
        ));
    }

    #[test]
    fn markov_product_formula_exact_on_random_chains() {
        let mut rng = SplitMix::new(2024);
        for _ in 0..5 {
            // random rational row-stochastic 3×3 and initial distribution
            let mut rows = Vec::new();
            for _ in 0..3 {
                let a = 1 + rng.below(5) as i64;
                let b = 1 + rng.below(5) as i64;
                let c = 1 + rng.below(5) as i64;
                let s = a + b + c;
                rows.push(vec![q(a, s), q(b, s), q(c, s)]);
            }
            let p = Mat::from_rows(rows);
            let pi = vec![q(1, 6), q(2, 6), q(3, 6)];
            let fam = markov_representation(&p, &pi).unwrap();
            for _ in 0..4 {
                let len = 1 + rng.below(8) as usize;
                let word: Vec<usize> =
                    (0..len).map(|_| rng.below(3) as usize).collect();
                let got = eq1_measure(&fam, &word).unwrap();
                let mut want = pi[word[0]].clone();
                for t in 1..len {
                    want = want * p.at(word[t - 1], word[t]).clone();
                }
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn beta_spec_basics() {
        let bs = beta_representation();
        let b = bs.beta;
        assert!((b * b * b - 2.0 * b * b + b - 1.0).abs() < 1e-14);
        assert_eq!(bs.substitute_word(&[0, 1, 2]).unwrap(), "0101100");
        assert_eq!(bs.cylinder_measure(&[2]).unwrap(), q(3, 40));
        assert_eq!(bs.cylinder_measure(&[0]).unwrap(), q(3, 5));
        assert!((bs.translates[4] - 1.0 / b).abs() < 1e-15);
        // first two entries of the terminal vector sum to 1
        let c = bs.family.terminal_vector.as_ref().unwrap();
        assert_eq!(c.at(0, 0).clone() + c.at(1, 0).clone(), q(1, 1));
        // interval of "0" is [0, 1/β)
        let (lo, hi) = bs.interval(&[0]).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 1.0 / b).abs() < 1e-15);
    }

    #[test]
    fn beta_additivity_is_exact() {
        let bs = beta_representation();
        let words: [&[usize]; 4] = [&[], &[2], &[1, 0], &[0, 1, 2, 0, 1]];
        for w in words {
            let total = bs.cylinder_measure(w).unwrap();
            let mut sum = Rat::zero();
            for i in 0..3 {
                let mut ext = w.to_vec();
                ext.push(i);
                sum = sum + bs.cylinder_measure(&ext).unwrap();
            }
            assert_eq!(sum, total);
        }
    }

    #[test]
    fn positivity_reports() {
        let spec = quarter_spec();
        let rep = word_positivity(&spec, &[1, 0]).unwrap();
        assert!(rep.first_row_positive && rep.last_row_positive && rep.interior_positive);
        assert!(rep.lemma_consistent);
        assert!(rep.sandwich_checked && rep.sandwich_holds);
        assert!(rep.k_constant.unwrap() > 1.0);

        let spec3 = build_representation(3, &ce22_weights()).unwrap();
        let rep = word_positivity(&spec3, &[0, 0]).unwrap();
        assert!(!rep.first_row_positive && !rep.first_row_required);
        assert!(rep.lemma_consistent);

        // words shorter than q are rejected
        let long = build_representation(2, &[q(1, 8), q(3, 8), q(3, 8), q(1, 8)]).unwrap();
        assert_eq!(long.q, 2);
        assert!(matches!(
            word_positivity(&long, &[0]).unwrap_err(),
            Error::WordTooShort { needed: 2, got: 1 }
        ));
        // forced rows hold on every length-q word over the bigger spec
        for w in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let rep = word_positivity(&long, &w).unwrap();
            assert!(rep.lemma_consistent, "word {w:?}");
        }
    }

    #[test]
    fn enumeration_brackets() {
        let (lo, hi) = enumeration_oracle(2, &[0.5, 0.5], 16, (0.0, 0.5)).unwrap();
        assert!(lo <= 0.5 && 0.5 <= hi);
        assert!(hi - lo < 1e-3);

        let (lo, hi) = enumeration_oracle(2, &[0.25, 0.5, 0.25], 16, (0.0, 0.5)).unwrap();
        assert!(lo <= 0.125 && 0.125 <= hi, "bracket [{lo}, {hi}]");
        assert!(hi - lo < 1e-3);
    }

    #[test]
    fn enumeration_cross_checks_cylinders_in_base3() {
        let w = ce22_weights();
        let spec = build_representation(3, &w).unwrap();
        // cylinder of digit word "1" at translate 0 is [1/3, 2/3)
        let want: f64 = cylinder_measure(&spec, &[1], 0).unwrap();
        let (lo, hi) = enumeration_oracle(3, &w, 14, (1.0 / 3.0, 2.0 / 3.0)).unwrap();
        assert!(lo - 1e-12 <= want && want <= hi + 1e-12, "{want} not in [{lo}, {hi}]");
    }
}
