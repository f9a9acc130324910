//! Triangular structure of long products: empirical detection of the
//! block-triangular form that products of nonnegative matrices settle into,
//! a closed-form account of upper-triangular 3x3 products with the
//! four-way classification of their normalized limits, and the equivalence
//! between singular-value orders and column growth for lower-triangular
//! products.

use crate::error::{Error, Result};
use crate::mat::{support_pattern, Mat, SupportPattern};
use crate::scalar::Scalar;
use crate::svd::singular_values;

// ---------------------------------------------------------------------------
// Block-triangular form detection

/// Outcome of scanning the pattern triangle of a factor sequence.
#[derive(Debug, Clone)]
pub struct BlockFormReport {
    /// Stabilized number of distinct nonzero-column patterns.
    pub delta: usize,
    /// Ordered partition of the index set; entries in earlier cells can
    /// reach entries in later cells but not conversely.
    pub partition: Vec<Vec<usize>>,
    /// Greedily chosen indices whose pairwise segment products all share
    /// one support pattern.
    pub checkpoints: Vec<usize>,
    /// The common support pattern of every checkpoint-pair product.
    pub pattern: SupportPattern,
    /// Every checkpoint-pair product is block-triangular for the partition
    /// with each block carrying a single column pattern.
    pub t1_membership: bool,
}

fn identity_pattern(d: usize) -> SupportPattern {
    let mut mask = vec![false; d * d];
    for i in 0..d {
        mask[i * d + i] = true;
    }
    SupportPattern { rows: d, cols: d, mask }
}

fn column_mask(p: &SupportPattern, j: usize) -> Vec<bool> {
    (0..p.rows).map(|i| p.at(i, j)).collect()
}

/// Group the pattern's columns by identical mask and order the groups so
/// each group's row support is covered by itself and earlier groups.
fn ordered_partition(pattern: &SupportPattern) -> Result<Vec<Vec<usize>>> {
    let d = pattern.cols;
    let mut groups: Vec<(Vec<bool>, Vec<usize>)> = Vec::new();
    for j in 0..d {
        let mask = column_mask(pattern, j);
        if let Some(g) = groups.iter_mut().find(|(m, _)| *m == mask) {
            g.1.push(j);
        } else {
            groups.push((mask, vec![j]));
        }
    }

    let mut placed: Vec<Vec<usize>> = Vec::new();
    let mut covered = vec![false; d];
    while !groups.is_empty() {
        let pick = groups.iter().position(|(mask, cols)| {
            (0..d).all(|i| !mask[i] || covered[i] || cols.contains(&i))
        });
        let Some(idx) = pick else {
            return Err(Error::CheckFailed {
                case: "block form partition".into(),
                detail: "support pattern is not block-triangulable".into(),
            });
        };
        let (_, cols) = groups.remove(idx);
        for &c in &cols {
            covered[c] = true;
        }
        placed.push(cols);
    }
    Ok(placed)
}

/// True when `pattern` is block-triangular for the ordered partition and
/// every block has a single column pattern.
fn single_pattern_blocks(pattern: &SupportPattern, partition: &[Vec<usize>]) -> bool {
    for (gi, rows) in partition.iter().enumerate() {
        for (gj, cols) in partition.iter().enumerate() {
            if gi > gj {
                if rows.iter().any(|&r| cols.iter().any(|&c| pattern.at(r, c))) {
                    return false;
                }
                continue;
            }
            let first: Vec<bool> = rows.iter().map(|&r| pattern.at(r, cols[0])).collect();
            for &c in &cols[1..] {
                let col: Vec<bool> = rows.iter().map(|&r| pattern.at(r, c)).collect();
                if col != first {
                    return false;
                }
            }
        }
    }
    true
}

/// Scan the support patterns of all long segment products of `factors` and
/// report the stabilized block-triangular structure.
///
/// Supports compose exactly under multiplication of nonnegative matrices
/// (no cancellation), so the whole scan runs on boolean masks.  The number
/// of distinct column patterns of a segment can only grow when the segment
/// start moves right; the stabilized value is read off a late plateau and
/// checkpoints are then accepted greedily whenever all pairwise segment
/// patterns agree.  The minimal checkpoint sequence is not attempted.
pub fn block_form_detect<S: Scalar>(factors: &[Mat<S>]) -> Result<BlockFormReport> {
    let horizon = factors.len();
    if horizon > 2000 {
        return Err(Error::Invalid(format!("horizon {horizon} exceeds 2000")));
    }
    if horizon < 16 {
        return Err(Error::HorizonTooShort { horizon });
    }
    let d = factors[0].rows();
    if d > 16 {
        return Err(Error::Invalid(format!("dimension {d} exceeds 16")));
    }
    for (i, m) in factors.iter().enumerate() {
        if !m.is_square() || m.rows() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", m.rows(), m.cols()),
                context: "block_form_detect",
            });
        }
        if !m.is_nonnegative() {
            return Err(Error::Invalid(format!("factor {i} has a negative entry")));
        }
    }

    let z: Vec<SupportPattern> = factors
        .iter()
        .map(|m| support_pattern(m, None).0)
        .collect();

    // Window maxima over the deep tail, for starts far enough back that
    // every probed segment is long.
    let w = horizon / 4;
    let last_start = horizon - 2 * w;
    let mut level = Vec::with_capacity(last_start + 1);
    for n in 0..=last_start {
        let mut run = z[n].clone();
        let mut best = 0;
        for np in (n + 1)..=horizon {
            if np > n + 1 {
                run = run.bool_product(&z[np - 1]);
            }
            if np > horizon - w {
                best = best.max(run.distinct_column_count());
            }
        }
        level.push(best);
    }

    let delta = level[last_start];
    let plateau_from = last_start - last_start / 8;
    if level[plateau_from..].iter().any(|&l| l != delta) {
        return Err(Error::HorizonTooShort { horizon });
    }
    let n1 = level.iter().position(|&l| l == delta).unwrap();

    // Greedy checkpoint selection: accept n' when the segments from every
    // accepted checkpoint all show the same pattern with delta column
    // patterns.
    let stride = (w / 2).max(1);
    let mut checkpoints = vec![n1];
    let mut running: Vec<SupportPattern> = vec![identity_pattern(d)];
    let mut common: Option<SupportPattern> = None;
    for np in (n1 + 1)..=horizon {
        for run in running.iter_mut() {
            *run = run.bool_product(&z[np - 1]);
        }
        if np < checkpoints.last().unwrap() + stride {
            continue;
        }
        let candidate = &running[0];
        if candidate.distinct_column_count() != delta {
            continue;
        }
        if running.iter().any(|r| r != candidate) {
            continue;
        }
        if let Some(ref c) = common {
            if candidate != c {
                continue;
            }
        } else {
            common = Some(candidate.clone());
        }
        checkpoints.push(np);
        running.push(identity_pattern(d));
        if checkpoints.len() == 8 {
            break;
        }
    }
    let Some(pattern) = common else {
        return Err(Error::HorizonTooShort { horizon });
    };
    if checkpoints.len() < 3 {
        return Err(Error::HorizonTooShort { horizon });
    }

    let partition = ordered_partition(&pattern)?;

    // Independent re-verification on fresh segment products.
    let mut all_pairs_common = true;
    'outer: for (i, &ci) in checkpoints.iter().enumerate() {
        let mut run = identity_pattern(d);
        let mut next = i + 1;
        for np in (ci + 1)..=horizon {
            run = run.bool_product(&z[np - 1]);
            if next < checkpoints.len() && np == checkpoints[next] {
                if run != pattern {
                    all_pairs_common = false;
                    break 'outer;
                }
                next += 1;
            }
        }
    }
    let t1_membership = all_pairs_common && single_pattern_blocks(&pattern, &partition);

    Ok(BlockFormReport {
        delta,
        partition,
        checkpoints,
        pattern,
        t1_membership,
    })
}

// ---------------------------------------------------------------------------
// Upper-triangular 3x3 closed form

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finiteness {
    Finite,
    Divergent,
    Inconclusive,
}

/// Partial-sum data of an upper-triangular 3x3 product.  With factor
/// entries a_k, b_k, c_k / d_k, e_k / f_k (rows top to bottom), the product
/// P_n is
///
///   [ a*_n   d*_n s_n   f*_n (t_n + tau_n) ]
///   [ 0      d*_n       f*_n u_n           ]
///   [ 0      0          f*_n               ]
///
/// where a*, d*, f* are the running diagonal products and s, t, u, tau the
/// four partial sums below.  Every vector stores step n at index n-1.
#[derive(Debug, Clone)]
pub struct TriangularSeries<S> {
    pub factors: Vec<Mat<S>>,
    pub a_prod: Vec<S>,
    pub d_prod: Vec<S>,
    pub f_prod: Vec<S>,
    /// s_n = sum a*_{k-1} b_k / d*_k
    pub s: Vec<S>,
    /// t_n = sum a*_{k-1} c_k / f*_k
    pub t: Vec<S>,
    /// u_n = sum d*_{k-1} e_k / f*_k
    pub u: Vec<S>,
    /// tau_n = sum_{k>=2} s_{k-1} d*_{k-1} e_k / f*_k
    pub tau: Vec<S>,
    pub s_verdict: Finiteness,
    pub t_verdict: Finiteness,
    pub u_verdict: Finiteness,
    pub tau_verdict: Finiteness,
}

/// Growth verdict for a nondecreasing partial-sum sequence: settled when
/// the last quarter adds at most 1e-9 of the total, divergent when the
/// total at least doubles over the last quarter.
fn finiteness(xs: &[f64]) -> Finiteness {
    let n = xs.len();
    if n < 8 {
        return Finiteness::Inconclusive;
    }
    let q = xs[3 * n / 4 - 1];
    let total = xs[n - 1];
    if total - q <= 1e-9 * total.abs() {
        return Finiteness::Finite;
    }
    if q > 0.0 && total >= 2.0 * q {
        return Finiteness::Divergent;
    }
    Finiteness::Inconclusive
}

fn upper_entries<S: Scalar>(m: &Mat<S>, index: usize) -> Result<[S; 6]> {
    if !m.is_square() || m.rows() != 3 {
        return Err(Error::DimensionMismatch {
            expected: "3x3".into(),
            got: format!("{}x{}", m.rows(), m.cols()),
            context: "series3x3",
        });
    }
    if !m.is_nonnegative() {
        return Err(Error::Invalid(format!("factor {index} has a negative entry")));
    }
    let zero = S::from_i64(0);
    for (i, j) in [(1, 0), (2, 0), (2, 1)] {
        if *m.at(i, j) != zero {
            return Err(Error::NotTriangular { index });
        }
    }
    for i in 0..3 {
        if *m.at(i, i) <= zero {
            return Err(Error::ZeroDiagonal { index });
        }
    }
    Ok([
        m.at(0, 0).clone(),
        m.at(0, 1).clone(),
        m.at(0, 2).clone(),
        m.at(1, 1).clone(),
        m.at(1, 2).clone(),
        m.at(2, 2).clone(),
    ])
}

/// Run the four partial sums of the closed form and cross-check the
/// reconstruction against the direct product at every step (exactly in
/// exact mode, to 1e-10 relative in float).  Also asserts the monotonicity
/// that makes the classification well-defined: s, t, u nondecreasing and
/// tau/u nondecreasing wherever u is positive.
pub fn series3x3<S: Scalar>(factors: &[Mat<S>]) -> Result<TriangularSeries<S>> {
    if factors.is_empty() {
        return Err(Error::Invalid("empty factor list".into()));
    }
    let one = S::from_i64(1);
    let zero = S::from_i64(0);

    let mut a_run = one.clone();
    let mut d_run = one.clone();
    let mut f_run = one.clone();
    let mut s_run = zero.clone();
    let mut t_run = zero.clone();
    let mut u_run = zero.clone();
    let mut tau_run = zero.clone();

    let mut a_prod = Vec::new();
    let mut d_prod = Vec::new();
    let mut f_prod = Vec::new();
    let mut s = Vec::new();
    let mut t = Vec::new();
    let mut u = Vec::new();
    let mut tau = Vec::new();

    let mut direct = Mat::<S>::identity(3);

    for (idx, m) in factors.iter().enumerate() {
        let [a, b, c, d, e, f] = upper_entries(m, idx)?;
        let a_prev = a_run.clone();
        let d_prev = d_run.clone();
        let s_prev = s_run.clone();
        let u_prev = u_run.clone();
        let tau_prev = tau_run.clone();
        a_run = a_run * a;
        d_run = d_run * d;
        f_run = f_run * f;

        s_run = s_run + a_prev.clone() * b / d_run.clone();
        t_run = t_run + a_prev * c / f_run.clone();
        let u_step = d_prev * e / f_run.clone();
        if idx >= 1 {
            tau_run = tau_run + s_prev.clone() * u_step.clone();
        }
        u_run = u_run + u_step;

        // Monotonicity. The sums add nonnegative terms, so these hold in
        // float too; the ratio check needs cross-multiplied slack there.
        debug_assert!(s_run >= s_prev);
        debug_assert!(u_run >= u_prev);
        if u_prev > zero {
            let lhs = tau_run.clone() * u_prev.clone();
            let rhs = tau_prev * u_run.clone();
            let slack = if S::EXACT {
                zero.clone()
            } else {
                S::from_f64_lossy(1e-12 * (lhs.to_f64().abs() + rhs.to_f64().abs()))
            };
            if lhs + slack < rhs {
                return Err(Error::CheckFailed {
                    case: "triangular series monotonicity".into(),
                    detail: format!("tau/u decreased at step {}", idx + 1),
                });
            }
        }

        direct = direct.mul(m);
        let closed = Mat::from_rows(vec![
            vec![
                a_run.clone(),
                d_run.clone() * s_run.clone(),
                f_run.clone() * (t_run.clone() + tau_run.clone()),
            ],
            vec![zero.clone(), d_run.clone(), f_run.clone() * u_run.clone()],
            vec![zero.clone(), zero.clone(), f_run.clone()],
        ]);
        let agree = if S::EXACT {
            closed == direct
        } else {
            let tol = 1e-10 * direct.entry_norm().to_f64();
            closed
                .entries()
                .iter()
                .zip(direct.entries())
                .all(|(x, y)| (x.to_f64() - y.to_f64()).abs() <= tol)
        };
        if !agree {
            return Err(Error::CheckFailed {
                case: "triangular closed form".into(),
                detail: format!("reconstruction differs from direct product at step {}", idx + 1),
            });
        }

        a_prod.push(a_run.clone());
        d_prod.push(d_run.clone());
        f_prod.push(f_run.clone());
        s.push(s_run.clone());
        t.push(t_run.clone());
        u.push(u_run.clone());
        tau.push(tau_run.clone());
    }

    let to_f64 = |v: &[S]| -> Vec<f64> { v.iter().map(|x| x.to_f64()).collect() };
    let s_verdict = finiteness(&to_f64(&s));
    let t_verdict = finiteness(&to_f64(&t));
    let u_verdict = finiteness(&to_f64(&u));
    let tau_verdict = finiteness(&to_f64(&tau));

    Ok(TriangularSeries {
        factors: factors.to_vec(),
        a_prod,
        d_prod,
        f_prod,
        s,
        t,
        u,
        tau,
        s_verdict,
        t_verdict,
        u_verdict,
        tau_verdict,
    })
}

/// Classification of the normalized-image limit.
#[derive(Debug, Clone)]
pub struct Classification {
    /// 1: s diverges with u or tau; 2: only s diverges; 3: only u
    /// diverges; 4: s and u both settle.
    pub case: u8,
    /// Support the normalized product's limit points can occupy.
    pub limit_point_shape: [[u8; 3]; 3],
    /// Common normalized-image limit when one is predicted; None means no
    /// v-independent limit is claimed.
    pub predicted: Option<[f64; 3]>,
    /// Max distance of the trajectory images from the prediction, or the
    /// max spread between images when nothing is predicted.
    pub validation_gap: f64,
    /// |tau_n/u_n - s_n| at the horizon when u diverges; the two agree in
    /// the limit, so this is a consistency indicator, not an input.
    pub tau_over_u_gap: Option<f64>,
}

fn l1_gap(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    (0..3).map(|i| (x[i] - y[i]).abs()).sum()
}

/// Decide the case from the finiteness verdicts and, where the structure
/// pins the limit down, predict it and validate against trajectories from
/// the supplied positive start vectors.
///
/// The prediction in the mixed case (s settles, u diverges) is the
/// direction (s, 1, 0): the second and third columns become proportional,
/// with tau_n/u_n climbing to s.  This is cross-checked against the deep
/// products rather than trusted.
pub fn classify3x3_and_predict<S: Scalar>(
    series: &TriangularSeries<S>,
    vectors: &[[f64; 3]],
) -> Result<Classification> {
    use Finiteness::*;
    let n = series.s.len();
    if n < 8 {
        return Err(Error::Invalid(format!("series depth {n} too shallow to classify")));
    }
    if vectors.is_empty() {
        return Err(Error::Invalid("need at least one test vector".into()));
    }
    if vectors.iter().any(|v| v.iter().any(|&x| x <= 0.0)) {
        return Err(Error::Invalid("test vectors must be positive".into()));
    }

    let (s_v, u_v, tau_v) = (series.s_verdict, series.u_verdict, series.tau_verdict);
    let case = match (s_v, u_v, tau_v) {
        (Inconclusive, _, _) => return Err(Error::InconclusiveFiniteness { series: "s".into() }),
        (Divergent, Divergent, _) | (Divergent, _, Divergent) => 1,
        (Divergent, Finite, Finite) => 2,
        (Divergent, Finite, Inconclusive) => {
            return Err(Error::InconclusiveFiniteness { series: "tau".into() })
        }
        (Divergent, Inconclusive, _) => {
            return Err(Error::InconclusiveFiniteness { series: "u".into() })
        }
        (Finite, Divergent, _) => 3,
        (Finite, Finite, _) => 4,
        (Finite, Inconclusive, _) => {
            return Err(Error::InconclusiveFiniteness { series: "u".into() })
        }
    };

    let limit_point_shape = match case {
        1 => [[1, 1, 1], [0, 0, 0], [0, 0, 0]],
        2 => [[1, 1, 1], [0, 0, 1], [0, 0, 1]],
        3 => [[1, 1, 1], [0, 1, 1], [0, 0, 0]],
        _ => [[1, 1, 1], [0, 1, 1], [0, 0, 1]],
    };

    let zero = S::from_i64(0);
    let off_diagonal_positive = series
        .factors
        .iter()
        .all(|m| *m.at(0, 1) > zero && *m.at(1, 2) > zero);

    let normalize = |v: [f64; 3]| -> [f64; 3] {
        let mass: f64 = v.iter().sum();
        v.map(|x| x / mass)
    };
    let s_end = series.s[n - 1].to_f64();
    let t_end = series.t[n - 1].to_f64();
    let u_end = series.u[n - 1].to_f64();
    let tau_end = series.tau[n - 1].to_f64();

    let predicted = match case {
        1 => Some([1.0, 0.0, 0.0]),
        2 | 4 if off_diagonal_positive => Some(normalize([t_end + tau_end, u_end, 1.0])),
        3 if off_diagonal_positive => Some(normalize([s_end, 1.0, 0.0])),
        _ => None,
    };

    // Normalized trajectory images of the test vectors.
    let floats: Vec<Mat<f64>> = series.factors.iter().map(|m| m.to_f64()).collect();
    let mut images = Vec::new();
    for v in vectors {
        let mut x = *v;
        let mass: f64 = x.iter().sum();
        x = x.map(|e| e / mass);
        for m in &floats {
            let mut y = [0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    y[i] += m.at(i, j) * x[j];
                }
            }
            let mass: f64 = y.iter().sum();
            if mass <= 0.0 {
                return Err(Error::ProductVanished { step: images.len() });
            }
            x = y.map(|e| e / mass);
        }
        images.push(x);
    }

    let validation_gap = match predicted {
        Some(p) => images.iter().map(|im| l1_gap(im, &p)).fold(0.0, f64::max),
        None => {
            let mut spread: f64 = 0.0;
            for i in 0..images.len() {
                for j in (i + 1)..images.len() {
                    spread = spread.max(l1_gap(&images[i], &images[j]));
                }
            }
            spread
        }
    };

    let tau_over_u_gap = if u_v == Divergent && u_end > 0.0 {
        Some((tau_end / u_end - s_end).abs())
    } else {
        None
    };

    Ok(Classification {
        case,
        limit_point_shape,
        predicted,
        validation_gap,
        tau_over_u_gap,
    })
}

// ---------------------------------------------------------------------------
// Lower-triangular singular-value orders

/// Two empirical verdicts that a structural equivalence says must agree:
/// whether all same-or-rightward cross-entry ratios of the normalized
/// products stay bounded, and whether each singular value tracks the
/// matching column norm (above and below).
#[derive(Debug, Clone)]
pub struct LowerTriSvReport {
    pub ratio_bounded: bool,
    pub sv_column_match: Vec<bool>,
    pub agreement: bool,
}

/// Bounded-looking on a finite run: the second half's peak stays within a
/// factor of two of the first half's.
fn looks_bounded(xs: &[f64]) -> bool {
    let n = xs.len();
    let head = xs[..n / 2].iter().cloned().fold(0.0, f64::max);
    let tail = xs[n / 2..].iter().cloned().fold(0.0, f64::max);
    tail <= 2.0 * head || tail == 0.0
}

/// Evaluate both sides of the singular-value / column-growth equivalence
/// on the trajectory of lower-triangular nonnegative factors.
pub fn lower_tri_sv_check(factors: &[Mat<f64>]) -> Result<LowerTriSvReport> {
    let depth = factors.len();
    if depth < 8 {
        return Err(Error::Invalid(format!("need at least 8 factors, got {depth}")));
    }
    let d = factors[0].rows();
    if d > 8 {
        return Err(Error::Invalid(format!("dimension {d} exceeds 8")));
    }
    for (i, m) in factors.iter().enumerate() {
        if !m.is_square() || m.rows() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", m.rows(), m.cols()),
                context: "lower_tri_sv_check",
            });
        }
        if !m.is_nonnegative() {
            return Err(Error::Invalid(format!("factor {i} has a negative entry")));
        }
        for r in 0..d {
            for c in (r + 1)..d {
                if *m.at(r, c) != 0.0 {
                    return Err(Error::NotTriangular { index: i });
                }
            }
            if *m.at(r, r) <= 0.0 {
                return Err(Error::ZeroDiagonal { index: i });
            }
        }
    }

    // Everything measured is scale-invariant, so keep the running product
    // at entry norm 1.
    let mut p = Mat::<f64>::identity(d);
    let mut cross_ratio = Vec::with_capacity(depth);
    let mut sv_ratio: Vec<Vec<f64>> = vec![Vec::with_capacity(depth); d];
    for m in factors {
        p = p.mul(m);
        p = p.scale(&(1.0 / p.entry_norm()));

        let mut rho: f64 = 0.0;
        for j in 0..d {
            for jp in 0..=j {
                for i in 0..d {
                    for ip in 0..d {
                        let denom = *p.at(ip, jp);
                        if denom > 0.0 {
                            rho = rho.max(*p.at(i, j) / denom);
                        }
                    }
                }
            }
        }
        cross_ratio.push(rho);

        let sv = singular_values(&p)?;
        for k in 0..d {
            let col: f64 = (0..d).map(|i| p.at(i, k).abs()).sum();
            sv_ratio[k].push(sv[k] / col);
        }
    }

    let ratio_bounded = looks_bounded(&cross_ratio);
    let sv_column_match: Vec<bool> = sv_ratio
        .iter()
        .map(|r| {
            let inv: Vec<f64> = r.iter().map(|x| 1.0 / x).collect();
            looks_bounded(r) && looks_bounded(&inv)
        })
        .collect();
    let agreement = ratio_bounded == sv_column_match.iter().all(|&b| b);

    Ok(LowerTriSvReport {
        ratio_bounded,
        sv_column_match,
        agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix;
    use crate::scalar::Rat;

    fn constant(m: Mat<f64>, n: usize) -> Vec<Mat<f64>> {
        vec![m; n]
    }

    #[test]
    fn constant_positive_matrix_is_one_block() {
        let factors = constant(Mat::from_i64_rows(&[&[1, 2], &[3, 1]]).to_f64(), 64);
        let report = block_form_detect(&factors).unwrap();
        assert_eq!(report.delta, 1);
        assert_eq!(report.partition, vec![vec![0, 1]]);
        assert!(report.checkpoints.len() >= 3);
        assert!(report.t1_membership);
    }

    #[test]
    fn alternating_shear_pair_refines_to_singletons() {
        let a = Mat::from_i64_rows(&[&[1, 1, 0], &[0, 1, 0], &[0, 0, 1]]).to_f64();
        let b = Mat::from_i64_rows(&[&[1, 0, 0], &[0, 1, 1], &[0, 0, 1]]).to_f64();
        let factors: Vec<Mat<f64>> = (0..64)
            .map(|i| if i % 2 == 0 { a.clone() } else { b.clone() })
            .collect();
        let report = block_form_detect(&factors).unwrap();
        assert_eq!(report.delta, 3);
        assert_eq!(report.partition, vec![vec![0], vec![1], vec![2]]);
        assert!(report.t1_membership);
        // Long mixed segments fill the whole upper triangle.
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(report.pattern.at(i, j), j >= i);
            }
        }
    }

    #[test]
    fn nilpotent_shear_pair_keeps_its_persistent_support() {
        let a = Mat::from_i64_rows(&[&[1, 0, 1], &[0, 1, 0], &[0, 0, 1]]).to_f64();
        let b = Mat::from_i64_rows(&[&[1, 0, 0], &[0, 1, 1], &[0, 0, 1]]).to_f64();
        let factors: Vec<Mat<f64>> = (0..80)
            .map(|i| if i % 2 == 0 { a.clone() } else { b.clone() })
            .collect();
        let report = block_form_detect(&factors).unwrap();
        assert_eq!(report.delta, 3);
        let expected = [[true, false, true], [false, true, true], [false, false, true]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(report.pattern.at(i, j), expected[i][j]);
            }
        }
        assert!(report.t1_membership);
    }

    #[test]
    fn tiny_horizon_is_rejected() {
        let factors = constant(Mat::from_i64_rows(&[&[1, 1], &[1, 1]]).to_f64(), 8);
        assert!(matches!(
            block_form_detect(&factors),
            Err(Error::HorizonTooShort { horizon: 8 })
        ));
    }

    #[test]
    fn identity_series_is_all_zero() {
        let factors = constant(Mat::<f64>::identity(3), 16);
        let series = series3x3(&factors).unwrap();
        assert!(series.s.iter().all(|&x| x == 0.0));
        assert!(series.u.iter().all(|&x| x == 0.0));
        assert_eq!(series.s_verdict, Finiteness::Finite);
        assert_eq!(series.u_verdict, Finiteness::Finite);

        let cls = classify3x3_and_predict(&series, &[[1.0, 1.0, 1.0], [3.0, 1.0, 0.5]]).unwrap();
        assert_eq!(cls.case, 4);
        assert!(cls.predicted.is_none());
        // Images stay v/||v||, so they genuinely disagree.
        assert!(cls.validation_gap > 0.1, "{}", cls.validation_gap);
    }

    #[test]
    fn geometric_constant_factor_lands_in_the_mixed_case() {
        let m = Mat::from_rows(vec![
            vec![0.5, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0 / 3.0],
        ]);
        let series = series3x3(&constant(m, 60)).unwrap();
        assert!((series.s[59] - 2.0).abs() < 1e-12);
        assert_eq!(series.s_verdict, Finiteness::Finite);
        assert_eq!(series.t_verdict, Finiteness::Finite);
        assert_eq!(series.u_verdict, Finiteness::Divergent);
        assert_eq!(series.tau_verdict, Finiteness::Divergent);

        let cls =
            classify3x3_and_predict(&series, &[[1.0, 1.0, 1.0], [0.2, 1.0, 2.0]]).unwrap();
        assert_eq!(cls.case, 3);
        let p = cls.predicted.unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12, "{p:?}");
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
        assert!(cls.validation_gap < 1e-8, "{}", cls.validation_gap);
        assert!(cls.tau_over_u_gap.unwrap() < 1e-6);
    }

    #[test]
    fn dominant_first_row_collapses_to_e1() {
        let m = Mat::from_rows(vec![
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.0, 0.5],
        ]);
        let series = series3x3(&constant(m, 60)).unwrap();
        assert_eq!(series.s_verdict, Finiteness::Divergent);
        assert_eq!(series.tau_verdict, Finiteness::Divergent);

        let cls = classify3x3_and_predict(&series, &[[1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(cls.case, 1);
        assert_eq!(cls.predicted, Some([1.0, 0.0, 0.0]));
        assert!(cls.validation_gap < 1e-8, "{}", cls.validation_gap);
        assert_eq!(cls.limit_point_shape[1], [0, 0, 0]);
    }

    #[test]
    fn growing_last_column_dominates() {
        // s diverges geometrically while u and tau settle; the image heads
        // for the normalized (tau, u, 1) column: exactly (2/29, 6/29, 21/29).
        let m = Mat::from_rows(vec![
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.0, 4.0],
        ]);
        let series = series3x3(&constant(m, 60)).unwrap();
        assert_eq!(series.s_verdict, Finiteness::Divergent);
        assert_eq!(series.u_verdict, Finiteness::Finite);
        assert_eq!(series.tau_verdict, Finiteness::Finite);

        let cls =
            classify3x3_and_predict(&series, &[[1.0, 1.0, 1.0], [2.0, 0.1, 0.7]]).unwrap();
        assert_eq!(cls.case, 2);
        let p = cls.predicted.unwrap();
        assert!((p[0] - 2.0 / 29.0).abs() < 1e-12, "{p:?}");
        assert!((p[1] - 6.0 / 29.0).abs() < 1e-12);
        assert!((p[2] - 21.0 / 29.0).abs() < 1e-12);
        assert!(cls.validation_gap < 1e-8, "{}", cls.validation_gap);
    }

    #[test]
    fn settled_series_predict_the_final_column() {
        let m = Mat::from_rows(vec![
            vec![0.25, 1.0, 0.0],
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let series = series3x3(&constant(m, 60)).unwrap();
        assert!((series.s[59] - 4.0).abs() < 1e-12);
        assert!((series.u[59] - 2.0).abs() < 1e-12);
        assert!((series.tau[59] - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(series.s_verdict, Finiteness::Finite);
        assert_eq!(series.u_verdict, Finiteness::Finite);

        let cls =
            classify3x3_and_predict(&series, &[[1.0, 1.0, 1.0], [0.3, 2.0, 1.0]]).unwrap();
        assert_eq!(cls.case, 4);
        let p = cls.predicted.unwrap();
        assert!((p[0] - 8.0 / 17.0).abs() < 1e-12, "{p:?}");
        assert!((p[1] - 6.0 / 17.0).abs() < 1e-12);
        assert!((p[2] - 3.0 / 17.0).abs() < 1e-12);
        assert!(cls.validation_gap < 1e-8, "{}", cls.validation_gap);
    }

    #[test]
    fn exact_mode_random_dyadic_factors_reconstruct() {
        let mut rng = SplitMix::new(0x7121);
        for _ in 0..20 {
            let factors: Vec<Mat<Rat>> = (0..30)
                .map(|_| {
                    let entry = |rng: &mut SplitMix| {
                        Rat::ratio(rng.below(8) as i64, 1 << rng.below(4))
                    };
                    let diag = |rng: &mut SplitMix| {
                        Rat::ratio(1 + rng.below(6) as i64, 1 << rng.below(3))
                    };
                    Mat::from_rows(vec![
                        vec![diag(&mut rng), entry(&mut rng), entry(&mut rng)],
                        vec![Rat::from_i64(0), diag(&mut rng), entry(&mut rng)],
                        vec![Rat::from_i64(0), Rat::from_i64(0), diag(&mut rng)],
                    ])
                })
                .collect();
            // The constructor itself asserts closed form == direct product
            // exactly at every step.
            series3x3(&factors).unwrap();
        }
    }

    #[test]
    fn bad_factors_are_rejected() {
        let lower = Mat::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        assert!(matches!(
            series3x3(&[lower]),
            Err(Error::NotTriangular { index: 0 })
        ));
        let degenerate = Mat::from_rows(vec![
            vec![1.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0],
        ]);
        assert!(matches!(
            series3x3(&[degenerate]),
            Err(Error::ZeroDiagonal { index: 0 })
        ));
    }

    #[test]
    fn diagonal_factors_satisfy_both_sides() {
        let m = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.5]]);
        let report = lower_tri_sv_check(&vec![m; 40]).unwrap();
        assert!(report.ratio_bounded);
        assert_eq!(report.sv_column_match, vec![true, true]);
        assert!(report.agreement);
    }

    #[test]
    fn summable_subdiagonal_keeps_the_equivalence() {
        let m = Mat::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.5]]);
        let report = lower_tri_sv_check(&vec![m; 40]).unwrap();
        assert!(report.ratio_bounded);
        assert_eq!(report.sv_column_match, vec![true, true]);
        assert!(report.agreement);
    }

    #[test]
    fn divergent_subdiagonal_breaks_both_sides_together() {
        let m = Mat::from_rows(vec![vec![1.0, 0.0], vec![1.0, 2.0]]);
        let report = lower_tri_sv_check(&vec![m; 40]).unwrap();
        assert!(!report.ratio_bounded);
        assert!(report.sv_column_match.iter().any(|&b| !b));
        assert!(report.agreement);
    }
}
