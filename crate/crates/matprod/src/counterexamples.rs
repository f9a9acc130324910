//! Three small product constructions with exact certificates.
//!
//! The first alternates a halving map with a Fibonacci step, choosing the
//! halving exponents adaptively so that along a subsequence the normalized
//! product keeps its determinant bounded below while its column norms stay
//! within a factor of two of each other.  The second multiplies a commuting
//! nilpotent pair in doubling blocks; the normalized image direction then
//! oscillates between two cluster points forever.  The third is a base-3
//! weight family whose deep cylinder limits flip discontinuously when the
//! ordering of two weights changes.

use crate::bernoulli::build_representation;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::{Rat, Scalar};
use crate::svd::singular_values;
use num_bigint::BigInt;
use num_traits::{One, Signed};

/// 2^e as an exact rational, e of either sign.
fn pow2(e: i64) -> Rat {
    if e >= 0 {
        Rat::from_integer(BigInt::one() << e as usize)
    } else {
        Rat::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

fn rat_column(entries: &[Rat]) -> Mat<Rat> {
    Mat::column(entries.to_vec())
}

fn det2(m: &Mat<Rat>) -> Rat {
    m.at(0, 0) * m.at(1, 1) - m.at(0, 1) * m.at(1, 0)
}

/// Adaptive halving/Fibonacci build.  `columns[k]` is the leading column
/// v_k of the product after the k-th Fibonacci step; the trailing column is
/// then 2^{-n_k} v_{k-1}.  `offsets[k-1]` is the extra halving count h_k
/// that brings the two column norms within a factor of two, and
/// `certificates[k-1]` is the exact normalized determinant there.
#[derive(Debug, Clone)]
pub struct Ce12Build {
    pub exponents: Vec<u32>,
    pub partial_sums: Vec<u64>,
    pub columns: Vec<Mat<Rat>>,
    pub offsets: Vec<u32>,
    pub certified_n: Vec<u64>,
    pub certificates: Vec<Rat>,
    pub p_upper: Rat,
    pub threshold: Rat,
}

const CE12_SEARCH_CAP: u32 = 10_000;

fn halving_map() -> Mat<Rat> {
    Mat::from_rows(vec![
        vec![Rat::ratio(1, 2), Rat::from_i64(0)],
        vec![Rat::from_i64(0), Rat::from_i64(1)],
    ])
}

fn fibonacci_step() -> Mat<Rat> {
    Mat::from_i64_rows(&[&[1, 1], &[1, 0]])
}

/// Product of the first k stages, D^{n_1} F D^{n_2} F ... D^{n_k} F.
fn ce12_prefix_product(exponents: &[u32], k: usize) -> Mat<Rat> {
    let d = halving_map();
    let f = fibonacci_step();
    let mut p = Mat::identity(2);
    for &n in &exponents[..k] {
        p = p.mul(&d.pow(n as u64)).mul(&f);
    }
    p
}

/// Rational upper bound for prod_{j>=0} (1 + 2^{-j}): truncate at j = 40 and
/// absorb the tail, which is below exp(2^{-40}) <= 1 + 2^{-38}.
fn ce12_p_upper() -> Rat {
    let mut p = Rat::from_i64(1);
    for j in 0..=40 {
        p *= Rat::from_i64(1) + pow2(-j);
    }
    p * (Rat::from_i64(1) + pow2(-38))
}

/// Build the adaptive product for K Fibonacci stages and re-verify every
/// invariant from scratch on the explicit matrix products.
///
/// Stage exponents are the minimal admissible ones, so the construction is
/// deterministic: n_1 = 1, and n_{k+1} is the smallest count (at least h_k)
/// with ||v_{k+1}|| <= (2^{-(k+1)} + 1) 2^{-n_k} ||v_{k-1}||.  At each stage
/// the certificate det(P_n / ||P_n||) at n = s_k + h_k must clear
/// 1/(9 p_upper).
pub fn ce12_build_and_verify(big_k: usize) -> Result<Ce12Build> {
    if big_k == 0 || big_k > 8 {
        return Err(Error::Invalid(format!(
            "stage count must be between 1 and 8, got {big_k}"
        )));
    }

    let p_upper = ce12_p_upper();
    let threshold = Rat::from_i64(1) / (Rat::from_i64(9) * &p_upper);

    let mut exponents: Vec<u32> = vec![1];
    let mut partial_sums: Vec<u64> = vec![2];
    let mut columns: Vec<Mat<Rat>> = vec![
        rat_column(&[Rat::from_i64(1), Rat::from_i64(0)]),
        rat_column(&[Rat::ratio(1, 2), Rat::from_i64(1)]),
    ];
    let mut offsets: Vec<u32> = Vec::new();
    let mut certified_n: Vec<u64> = Vec::new();
    let mut certificates: Vec<Rat> = Vec::new();

    for k in 1..=big_k {
        let n_k = exponents[k - 1] as i64;
        let s_k = partial_sums[k - 1];
        let norm_k = columns[k].entry_norm();
        let norm_prev = columns[k - 1].entry_norm();

        // Column-norm ratio 2^{-h} ||v_k|| / (2^{-n_k} ||v_{k-1}||) starts
        // above 1 and halves with h, so the first h at or below 2 lands in
        // [1, 2].
        let trailing = pow2(-n_k) * &norm_prev;
        let mut h: u32 = 0;
        while pow2(-(h as i64)) * &norm_k > Rat::from_i64(2) * &trailing {
            h += 1;
        }
        let ratio = pow2(-(h as i64)) * &norm_k / &trailing;
        if ratio < Rat::from_i64(1) {
            return Err(Error::CheckFailed {
                case: format!("ce12 offset window, stage {k}"),
                detail: format!("ratio {ratio} fell below 1 at h = {h}"),
            });
        }
        offsets.push(h);

        let n = s_k + h as u64;
        let denom = pow2(-(h as i64)) * &norm_k + &trailing;
        let cert = pow2(k as i64 - n as i64) / (&denom * &denom);
        if cert < threshold {
            return Err(Error::CheckFailed {
                case: format!("ce12 determinant certificate, stage {k}"),
                detail: format!("{cert} < {threshold} at n = {n}"),
            });
        }
        certified_n.push(n);
        certificates.push(cert);

        if k == big_k {
            break;
        }

        // Minimal next exponent: linear scan, then bump to cover h_k.
        let bound = (pow2(-(k as i64 + 1)) + Rat::from_i64(1)) * &trailing;
        let mut found = None;
        for cand in 1..=CE12_SEARCH_CAP {
            let norm_next = pow2(-(cand as i64)) * &norm_k + &trailing;
            if norm_next <= bound {
                found = Some(cand);
                break;
            }
        }
        let Some(minimal) = found else {
            return Err(Error::SearchExhausted {
                index: k + 1,
                cap: CE12_SEARCH_CAP,
            });
        };
        let n_next = minimal.max(h);
        let v_next = columns[k]
            .scale(&pow2(-(n_next as i64)))
            .add(&columns[k - 1].scale(&pow2(-n_k)));
        exponents.push(n_next);
        partial_sums.push(s_k + n_next as u64 + 1);
        columns.push(v_next);
    }

    let build = Ce12Build {
        exponents,
        partial_sums,
        columns,
        offsets,
        certified_n,
        certificates,
        p_upper,
        threshold,
    };
    ce12_reverify(&build)?;
    Ok(build)
}

/// Independent re-check of a finished build against the explicit products.
fn ce12_reverify(build: &Ce12Build) -> Result<()> {
    let big_k = build.exponents.len();
    let fail = |case: &str, detail: String| Error::CheckFailed {
        case: format!("ce12 re-verify, {case}"),
        detail,
    };

    for k in 1..=big_k {
        let p = ce12_prefix_product(&build.exponents, k);
        let n_k = build.exponents[k - 1] as i64;
        let v_k = &build.columns[k];
        let v_prev = &build.columns[k - 1];

        // Product columns are (v_k | 2^{-n_k} v_{k-1}).
        let expected = Mat::from_fn(2, 2, |i, j| {
            if j == 0 {
                v_k.at(i, 0).clone()
            } else {
                v_prev.at(i, 0) * pow2(-n_k)
            }
        });
        if p != expected {
            return Err(fail("column shape", format!("stage {k}")));
        }

        if k >= 2 {
            let n_prev = build.exponents[k - 2] as i64;
            let recurrence = v_prev
                .scale(&pow2(-n_k))
                .add(&build.columns[k - 2].scale(&pow2(-n_prev)));
            if *v_k != recurrence {
                return Err(fail("recurrence", format!("stage {k}")));
            }
            let bound =
                (pow2(-(k as i64)) + Rat::from_i64(1)) * pow2(-n_prev) * build.columns[k - 2].entry_norm();
            if v_k.entry_norm() > bound {
                return Err(fail("norm inequality", format!("stage {k}")));
            }
        }

        let h = build.offsets[k - 1] as i64;
        let trailing = pow2(-n_k) * v_prev.entry_norm();
        let ratio = pow2(-h) * v_k.entry_norm() / &trailing;
        if ratio < Rat::from_i64(1) || ratio > Rat::from_i64(2) {
            return Err(fail("offset window", format!("stage {k}, ratio {ratio}")));
        }

        let p_n = p.mul(&halving_map().pow(h as u64));
        let norm = p_n.entry_norm();
        let cert = det2(&p_n).abs() / (&norm * &norm);
        if cert != build.certificates[k - 1] {
            return Err(fail("certificate value", format!("stage {k}")));
        }
        if cert < build.threshold {
            return Err(fail("certificate floor", format!("stage {k}: {cert}")));
        }
        if build.certified_n[k - 1] != build.partial_sums[k - 1] + build.offsets[k - 1] as u64 {
            return Err(fail("certified index", format!("stage {k}")));
        }
    }
    Ok(())
}

/// Float cross-check: singular-value ratio of the exact product at each
/// certified n, re-evaluated in f64.
pub fn ce12_sv_ratios(build: &Ce12Build) -> Result<Vec<f64>> {
    let mut ratios = Vec::new();
    for k in 1..=build.exponents.len() {
        let p = ce12_prefix_product(&build.exponents, k)
            .mul(&halving_map().pow(build.offsets[k - 1] as u64));
        let sv = singular_values(&p.to_f64())?;
        ratios.push(sv[1] / sv[0]);
    }
    Ok(ratios)
}

/// Bounds observed for the three singular values along the doubling-block
/// trajectory: delta_1 grows like n, delta_2 is pinned at 1, delta_3 decays
/// like 1/n.  Each pair is (min, max) over the sampled indices.
#[derive(Debug, Clone)]
pub struct SvBounds {
    pub delta1_over_n: (f64, f64),
    pub delta2: (f64, f64),
    pub n_delta3: (f64, f64),
    pub sampled: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Ce13Report {
    pub product: Mat<Rat>,
    pub closed_form_match: bool,
    pub appended_match: bool,
    pub sv_orders: SvBounds,
    /// Cluster means of the normalized image direction, low first
    /// coordinate first.
    pub centroids: [[f64; 3]; 2],
}

fn shear13() -> Mat<Rat> {
    Mat::from_i64_rows(&[&[1, 0, 1], &[0, 1, 0], &[0, 0, 1]])
}

fn shear23() -> Mat<Rat> {
    Mat::from_i64_rows(&[&[1, 0, 0], &[0, 1, 1], &[0, 0, 1]])
}

/// Any word in the two shears is I + a E13 + b E23 with a, b the letter
/// counts: the four products of E13 and E23 with each other all vanish.
/// Deep trajectory samples therefore come straight from the counts.
fn shear_image(a: f64, b: f64) -> [f64; 3] {
    let mass = a + b + 3.0;
    [(1.0 + a) / mass, (1.0 + b) / mass, 1.0 / mass]
}

/// Multiply the shear pair in doubling blocks and verify the closed form of
/// the product exactly, both at a block boundary and after appending the
/// next half-block.  Also samples the trajectory's singular values and the
/// two clusters its normalized image direction keeps returning to.
pub fn ce13_verify(k: usize) -> Result<Ce13Report> {
    if k == 0 || k > 12 {
        return Err(Error::Invalid(format!(
            "block count must be between 1 and 12, got {k}"
        )));
    }

    let a_mat = shear13();
    let b_mat = shear23();
    let mut product = Mat::identity(3);
    for i in 1..=k as u64 {
        product = product.mul(&a_mat.pow(1 << i)).mul(&b_mat.pow(1 << i));
    }
    let m = (1i64 << (k + 1)) - 2;
    let expected = Mat::from_i64_rows(&[&[1, 0, m], &[0, 1, m], &[0, 0, 1]]);
    let closed_form_match = product == expected;

    let appended = product.mul(&a_mat.pow(1 << (k + 1)));
    let m2 = (1i64 << (k + 2)) - 2;
    let expected_appended = Mat::from_i64_rows(&[&[1, 0, m2], &[0, 1, m], &[0, 0, 1]]);
    let appended_match = appended == expected_appended;

    let sv_orders = ce13_singular_bounds(400)?;

    // Image direction at deep block boundaries, from the letter counts.
    // After the full block j the counts are equal at 2^{j+1} - 2; after its
    // first half they are 2^{j+1} - 2 and 2^j - 2.
    let mut samples: Vec<[f64; 3]> = Vec::new();
    for j in 18..=22 {
        let full = ((1u64 << (j + 1)) - 2) as f64;
        let half = ((1u64 << j) - 2) as f64;
        samples.push(shear_image(full, full));
        samples.push(shear_image(full, half));
    }
    samples.sort_by(|x, y| x[0].partial_cmp(&y[0]).unwrap());
    let mut split = 1;
    let mut widest = 0.0;
    for i in 1..samples.len() {
        let gap = samples[i][0] - samples[i - 1][0];
        if gap > widest {
            widest = gap;
            split = i;
        }
    }
    let mean = |chunk: &[[f64; 3]]| -> [f64; 3] {
        let mut c = [0.0; 3];
        for s in chunk {
            for i in 0..3 {
                c[i] += s[i];
            }
        }
        c.map(|x| x / chunk.len() as f64)
    };
    let centroids = [mean(&samples[..split]), mean(&samples[split..])];

    Ok(Ce13Report {
        product,
        closed_form_match,
        appended_match,
        sv_orders,
        centroids,
    })
}

/// Walk the doubling-block letter sequence to `depth`, taking singular
/// values at every half-block boundary and at the final index.
fn ce13_singular_bounds(depth: u64) -> Result<SvBounds> {
    let a_mat = shear13().to_f64();
    let b_mat = shear23().to_f64();
    let mut p = Mat::<f64>::identity(3);
    let mut n: u64 = 0;
    let mut sampled = Vec::new();
    let mut d1: (f64, f64) = (f64::INFINITY, 0.0);
    let mut d2: (f64, f64) = (f64::INFINITY, 0.0);
    let mut d3: (f64, f64) = (f64::INFINITY, 0.0);

    let mut record = |p: &Mat<f64>, n: u64, sampled: &mut Vec<u64>| -> Result<()> {
        let sv = singular_values(p)?;
        let nf = n as f64;
        d1 = (d1.0.min(sv[0] / nf), d1.1.max(sv[0] / nf));
        d2 = (d2.0.min(sv[1]), d2.1.max(sv[1]));
        d3 = (d3.0.min(nf * sv[2]), d3.1.max(nf * sv[2]));
        sampled.push(n);
        Ok(())
    };

    'blocks: for i in 1.. {
        for half in [&a_mat, &b_mat] {
            for _ in 0..(1u64 << i) {
                p = p.mul(half);
                n += 1;
                if n == depth {
                    record(&p, n, &mut sampled)?;
                    break 'blocks;
                }
            }
            record(&p, n, &mut sampled)?;
        }
    }

    Ok(SvBounds {
        delta1_over_n: d1,
        delta2: d2,
        n_delta3: d3,
        sampled,
    })
}

#[derive(Debug, Clone)]
pub struct Ce22Limits {
    pub limit_11: Vec<f64>,
    pub limit_12: Vec<f64>,
    pub uniform: bool,
}

/// Iterate v <- M v / ||M v|| until the direction is Cauchy at 1e-14 in L1,
/// with a hard cap.  Per-step normalization keeps eigendirections exact.
/// The slowest admissible start is the defective tie p_3 = p_1, where the
/// off-axis component decays like 1/n; the Cauchy gap then scales like its
/// square, so the exit still lands within about 1e-7 of the limit.
fn power_limit(m: &Mat<f64>, start: &Mat<f64>) -> Vec<f64> {
    let mut v = start.scale(&(1.0 / start.entry_norm()));
    for _ in 0..20_000_000u64 {
        let w = m.mul(&v);
        let next = w.scale(&(1.0 / w.entry_norm()));
        let gap: f64 = next
            .entries()
            .iter()
            .zip(v.entries())
            .map(|(x, y)| (x - y).abs())
            .sum();
        v = next;
        if gap < 1e-14 {
            break;
        }
    }
    v.col_vec(0)
}

/// Deep cylinder limits of the base-3 four-weight family: the image
/// direction of M_1^n c and of M_1^m M_2^n c as both exponents grow.  The
/// two agree exactly when p_3 <= p_1; the gap opens discontinuously as p_3
/// crosses p_1.
pub fn ce22_limits(p: &[f64]) -> Result<Ce22Limits> {
    if p.len() != 4 {
        return Err(Error::Invalid(format!(
            "expected 4 weights, got {}",
            p.len()
        )));
    }
    if p.iter().any(|&x| x <= 0.0) {
        return Err(Error::Invalid("weights must be positive".into()));
    }
    if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid("weights must sum to 1".into()));
    }

    let spec = build_representation::<f64>(3, p)?;
    let limit_11 = power_limit(&spec.mats[1], &spec.c_nu);
    let inner = Mat::column(power_limit(&spec.mats[2], &spec.c_nu));
    let limit_12 = power_limit(&spec.mats[1], &inner);

    let gap: f64 = limit_11
        .iter()
        .zip(&limit_12)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(Ce22Limits {
        limit_11,
        limit_12,
        uniform: gap <= 1e-6,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix;

    #[test]
    fn ce12_hand_checked_prefix() {
        let build = ce12_build_and_verify(4).unwrap();
        assert_eq!(build.exponents, vec![1, 4, 6, 8]);
        assert_eq!(build.partial_sums, vec![2, 7, 14, 23]);
        assert_eq!(build.offsets, vec![1, 2, 3, 4]);
        assert_eq!(build.certified_n, vec![3, 9, 17, 27]);

        assert_eq!(
            build.columns[1],
            rat_column(&[Rat::ratio(1, 2), Rat::from_i64(1)])
        );
        assert_eq!(
            build.columns[2],
            rat_column(&[Rat::ratio(17, 32), Rat::ratio(1, 16)])
        );

        // p roughly 4.77, so the floor sits near 0.023; every certificate
        // clears it with a wide margin.
        let threshold = build.threshold.to_f64();
        assert!(threshold > 0.02 && threshold < 0.025, "{threshold}");
        for cert in &build.certificates {
            assert!(cert >= &build.threshold);
            let c = cert.to_f64();
            assert!(c > 0.1 && c < 0.2, "{c}");
        }
    }

    #[test]
    fn ce12_deep_build_certifies_every_stage() {
        let build = ce12_build_and_verify(8).unwrap();
        assert_eq!(build.certificates.len(), 8);
        for w in build.exponents.windows(2) {
            assert!(w[0] < w[1], "exponents must grow: {:?}", build.exponents);
        }
        for k in 0..7 {
            assert!(build.offsets[k] <= build.exponents[k + 1]);
        }
        for cert in &build.certificates {
            assert!(cert >= &build.threshold);
        }
    }

    #[test]
    fn ce12_float_ratio_stays_off_the_floor() {
        let build = ce12_build_and_verify(4).unwrap();
        let ratios = ce12_sv_ratios(&build).unwrap();
        assert_eq!(ratios.len(), 4);
        for r in ratios {
            assert!(r >= 0.01, "{r}");
            assert!(r < 1.0, "{r}");
        }
    }

    #[test]
    fn ce12_rejects_out_of_range_stage_counts() {
        assert!(matches!(ce12_build_and_verify(0), Err(Error::Invalid(_))));
        assert!(matches!(ce12_build_and_verify(9), Err(Error::Invalid(_))));
    }

    #[test]
    fn ce13_closed_form_every_k() {
        for k in 1..=12 {
            let report = ce13_verify(k).unwrap();
            assert!(report.closed_form_match, "k = {k}");
            assert!(report.appended_match, "k = {k}");
        }
        let report = ce13_verify(1).unwrap();
        assert_eq!(
            report.product,
            Mat::from_i64_rows(&[&[1, 0, 2], &[0, 1, 2], &[0, 0, 1]])
        );
    }

    #[test]
    fn ce13_letter_products_accumulate_counts() {
        let mut rng = SplitMix::new(0xCE13);
        let word = rng.letters(2, 300);
        let mats = [shear13().to_f64(), shear23().to_f64()];
        let mut p = Mat::<f64>::identity(3);
        for &w in &word {
            p = p.mul(&mats[w]);
        }
        let a = word.iter().filter(|&&w| w == 0).count() as i64;
        let b = word.len() as i64 - a;
        let expected = Mat::from_i64_rows(&[&[1, 0, a], &[0, 1, b], &[0, 0, 1]]).to_f64();
        assert_eq!(p, expected);
    }

    #[test]
    fn ce13_clusters_and_singular_orders() {
        let report = ce13_verify(5).unwrap();
        let [low, high] = report.centroids;
        let refs = [[0.5, 0.5, 0.0], [2.0 / 3.0, 1.0 / 3.0, 0.0]];
        for i in 0..3 {
            assert!((low[i] - refs[0][i]).abs() < 1e-6, "low {low:?}");
            assert!((high[i] - refs[1][i]).abs() < 1e-6, "high {high:?}");
        }
        assert!(high[0] - low[0] > 0.15);

        let sv = &report.sv_orders;
        assert_eq!(sv.sampled.len(), 14);
        assert_eq!(*sv.sampled.last().unwrap(), 400);
        assert!(sv.delta2.0 > 1.0 - 1e-9 && sv.delta2.1 < 1.0 + 1e-9, "{sv:?}");
        assert!(sv.n_delta3.0 >= 0.05 && sv.n_delta3.1 <= 20.0, "{sv:?}");
        assert!(sv.n_delta3.0 > 0.5 && sv.n_delta3.1 < 2.0, "{sv:?}");
        assert!(sv.delta1_over_n.1 < 1.5 && sv.delta1_over_n.0 > 0.2, "{sv:?}");
    }

    #[test]
    fn ce13_rejects_out_of_range_block_counts() {
        assert!(matches!(ce13_verify(0), Err(Error::Invalid(_))));
        assert!(matches!(ce13_verify(13), Err(Error::Invalid(_))));
    }

    #[test]
    fn ce22_ordering_flip_opens_a_gap() {
        let out = ce22_limits(&[0.4, 0.1, 0.2, 0.3]).unwrap();
        // Dominant image direction of M_1 = [[0.1, 0.4], [0, 0.3]]: the
        // 0.3-eigenvector (2, 1)/3.
        assert!((out.limit_11[0] - 2.0 / 3.0).abs() < 1e-9, "{out:?}");
        assert!((out.limit_11[1] - 1.0 / 3.0).abs() < 1e-9, "{out:?}");
        assert!((out.limit_12[0] - 1.0).abs() < 1e-12);
        assert!(out.limit_12[1].abs() < 1e-12);
        assert!(!out.uniform);
    }

    #[test]
    fn ce22_agreeing_orderings_are_uniform() {
        let equal = ce22_limits(&[0.25, 0.25, 0.25, 0.25]).unwrap();
        assert!(equal.uniform, "{equal:?}");

        let reversed = ce22_limits(&[0.1, 0.4, 0.2, 0.3]).unwrap();
        assert!(reversed.uniform, "{reversed:?}");
        assert!((reversed.limit_11[0] - 1.0).abs() < 1e-9);
        let gap: f64 = reversed
            .limit_11
            .iter()
            .zip(&reversed.limit_12)
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(gap <= 1e-6);
    }

    #[test]
    fn ce22_uniformity_tracks_the_weight_ordering() {
        let mut rng = SplitMix::new(0xCE22);
        let mut checked = 0;
        while checked < 20 {
            let raw = [
                0.05 + rng.uniform(),
                0.05 + rng.uniform(),
                0.05 + rng.uniform(),
                0.05 + rng.uniform(),
            ];
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            // Skip near-ties: the 1e-6 gap test is not meant to resolve
            // them.
            if (p[3] - p[1]).abs() < 1e-3 {
                continue;
            }
            let out = ce22_limits(&p).unwrap();
            assert_eq!(out.uniform, p[3] <= p[1], "p = {p:?}, {out:?}");
            checked += 1;
        }
    }
}
