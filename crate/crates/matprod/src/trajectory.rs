//! Trajectories of right-appended products P_n = A_1⋯A_n: per-step scaled
//! products, normalized images, singular-value and determinant series, plus
//! the diagnostics built on them (rank collapse, limit images, uniform
//! convergence probes, checkpoint conditions, divergence detection, the
//! row-stochastic 2×2 series identity).

use crate::eigen::{complex_kernel, eigenvalues};
use crate::error::{Error, Result};
use crate::family::{MatrixFamily, SymbolSequence};
use crate::mat::{scaled_multiply, Mat, ScaledMat};
use crate::rng::SplitMix;
use crate::scalar::Scalar;
use crate::svd::{det_f64, singular_values};
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct TrajStep<S> {
    pub scaled: ScaledMat<S>,
    /// P_n·c / ‖P_n·c‖ when an image column is tracked.
    pub image: Option<Vec<S>>,
    /// δ_1(n) ≥ δ_2(n) ≥ … of the normalized product.
    pub singular_values: Vec<f64>,
    /// det(P_n/‖P_n‖), signed.
    pub det_normalized: f64,
    /// λ_n = ‖P_n‖ / (‖P_{n−1}‖·‖A_n‖), in (0, 1].
    pub lambda: S,
}

#[derive(Debug, Clone)]
pub struct ProductTrajectory<S> {
    /// The factor alphabet.
    pub mats: Vec<Mat<S>>,
    /// Letter used at each step, length = depth.
    pub symbols: Vec<usize>,
    pub steps: Vec<TrajStep<S>>,
    pub image_column: Option<Mat<S>>,
}

impl<S: Scalar> ProductTrajectory<S> {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn order(&self) -> usize {
        self.mats[0].rows()
    }

    /// Step record for 1-based step n.
    pub fn step(&self, n: usize) -> &TrajStep<S> {
        &self.steps[n - 1]
    }

    pub fn factor(&self, n: usize) -> &Mat<S> {
        &self.mats[self.symbols[n - 1]]
    }

    /// ln ‖P_n‖ for 1-based n.
    pub fn log_norm_at(&self, n: usize) -> f64 {
        self.steps[n - 1].scaled.log_norm()
    }

    pub fn images_f64(&self) -> Option<Vec<Vec<f64>>> {
        self.steps
            .iter()
            .map(|st| {
                st.image
                    .as_ref()
                    .map(|v| v.iter().map(|x| x.to_f64()).collect::<Vec<f64>>())
            })
            .collect()
    }
}

/// Multiply out the sequence, recording every per-step field. The image
/// column is `start_vector` when supplied (it must be strictly positive),
/// otherwise the family's terminal vector when present.
pub fn run_trajectory<S: Scalar>(
    family: &MatrixFamily<S>,
    seq: &SymbolSequence,
    depth: usize,
    start_vector: Option<Mat<S>>,
) -> Result<ProductTrajectory<S>> {
    if depth == 0 {
        return Err(Error::Invalid("depth must be at least 1".into()));
    }
    let d = family.order();
    let image_column = match start_vector {
        Some(v) => {
            if v.rows() != d || v.cols() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: format!("{d}x1"),
                    got: format!("{}x{}", v.rows(), v.cols()),
                    context: "start vector",
                });
            }
            if !v.entries().iter().all(|x| *x > S::zero()) {
                return Err(Error::Invalid("start vector must be strictly positive".into()));
            }
            Some(v)
        }
        None => family.terminal_vector.clone(),
    };

    let a = family.alphabet_size();
    let factor_norms: Vec<S> = family.mats().iter().map(|m| m.entry_norm()).collect();
    let mut acc: ScaledMat<S> = ScaledMat::identity(d);
    // ‖P_0‖ is taken as 1 so Π λ_k · Π ‖A_k‖ telescopes to ‖P_n‖.
    let mut prev_norm = S::from_i64(1);
    let mut symbols = Vec::with_capacity(depth);
    let mut steps: Vec<TrajStep<S>> = Vec::with_capacity(depth);

    for n in 1..=depth {
        let s = seq.symbol(n - 1, a)?;
        symbols.push(s);
        let raw = acc.unit.mul(family.mat(s));
        if raw.is_zero() {
            return Err(Error::ProductVanished { step: n });
        }
        let raw_norm = raw.entry_norm();
        let lambda = raw_norm.clone() / (prev_norm.clone() * factor_norms[s].clone());
        acc = if S::EXACT {
            ScaledMat { unit: raw, log_scale: 0.0 }
        } else {
            let inv = S::from_i64(1) / raw_norm.clone();
            ScaledMat { unit: raw.scale(&inv), log_scale: acc.log_scale + raw_norm.to_f64().ln() }
        };
        prev_norm = if S::EXACT { raw_norm } else { S::from_i64(1) };

        let image = match &image_column {
            Some(c) => {
                let img = acc.unit.mul(c);
                let nrm = img.entry_norm();
                if nrm.is_zero() {
                    return Err(Error::Invalid(format!("normalized image vanished at step {n}")));
                }
                let inv = S::from_i64(1) / nrm;
                Some(img.scale(&inv).entries().to_vec())
            }
            None => None,
        };

        let m64 = acc.normalized_f64();
        let sv = singular_values(&m64)?;
        let det_normalized = det_f64(&m64);
        steps.push(TrajStep { scaled: acc.clone(), image, singular_values: sv, det_normalized, lambda });
    }

    Ok(ProductTrajectory { mats: family.mats().to_vec(), symbols, steps, image_column })
}

/// First index (0-based) of the trailing 20% window, at least one step.
fn window_start(depth: usize) -> usize {
    depth - (depth / 5).max(1)
}

// ---------------------------------------------------------------------------
// Rank-one diagnostic

pub const TOL_COLLAPSE: f64 = 1e-6;
pub const FLOOR_PERSIST: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankVerdict {
    RankOneCollapse,
    PersistentRankGe2,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct RankOneReport {
    /// δ_2(n)/δ_1(n) per step (0 when the order is 1).
    pub ratio_series: Vec<f64>,
    pub det_series: Vec<f64>,
    pub verdict: RankVerdict,
}

/// Collapse when the ratio series sits below [`TOL_COLLAPSE`] across the
/// trailing window, persistent rank ≥ 2 when it stays above
/// [`FLOOR_PERSIST`], inconclusive in between.
pub fn rank_one_diagnostic<S: Scalar>(traj: &ProductTrajectory<S>) -> RankOneReport {
    let ratio_series: Vec<f64> = traj
        .steps
        .iter()
        .map(|st| {
            if st.singular_values.len() < 2 {
                0.0
            } else {
                st.singular_values[1] / st.singular_values[0]
            }
        })
        .collect();
    let det_series: Vec<f64> = traj.steps.iter().map(|st| st.det_normalized).collect();
    let tail = &ratio_series[window_start(traj.depth())..];
    let verdict = if tail.iter().all(|r| *r < TOL_COLLAPSE) {
        RankVerdict::RankOneCollapse
    } else if tail.iter().all(|r| *r > FLOOR_PERSIST) {
        RankVerdict::PersistentRankGe2
    } else {
        RankVerdict::Inconclusive
    };
    RankOneReport { ratio_series, det_series, verdict }
}

// ---------------------------------------------------------------------------
// Limit of the normalized images

#[derive(Debug, Clone)]
pub struct LimitImage {
    pub limit: Vec<f64>,
    /// Earliest 1-based step from which the image diameter stays below tol.
    pub achieved_at: usize,
    /// Coordinatewise bounding-box L1 diameter over the trailing window
    /// (an upper bound on the pairwise sup).
    pub cauchy_gap: f64,
}

/// Accept once the trailing 20% of images has diameter below `tol`.
pub fn limit_image<S: Scalar>(traj: &ProductTrajectory<S>, tol: f64) -> Result<LimitImage> {
    let images = traj
        .images_f64()
        .ok_or_else(|| Error::Invalid("trajectory carries no image column".into()))?;
    let depth = traj.depth();
    let w = window_start(depth);
    let gap = bbox_diameter(&images[w..]);
    if gap >= tol {
        return Err(Error::NotConverged { depth, gap, tol });
    }
    // walk backwards to the earliest step still inside tolerance
    let d = images[0].len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut achieved_at = 1;
    for n in (1..=depth).rev() {
        for (k, x) in images[n - 1].iter().enumerate() {
            lo[k] = lo[k].min(*x);
            hi[k] = hi[k].max(*x);
        }
        let diam: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).sum();
        if diam >= tol {
            achieved_at = n + 1;
            break;
        }
    }
    Ok(LimitImage { limit: images.last().unwrap().clone(), achieved_at, cauchy_gap: gap })
}

fn bbox_diameter(points: &[Vec<f64>]) -> f64 {
    let d = points[0].len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| h - l).sum()
}

// ---------------------------------------------------------------------------
// Uniform convergence probe

const PROBE_SEED: u64 = 0x70B3;

#[derive(Debug, Clone)]
pub struct ProbeProfile {
    pub prefix_lengths: Vec<usize>,
    /// Estimated sup over cylinder extensions of the per-extension image
    /// oscillation beyond the prefix length.
    pub sup_gaps: Vec<f64>,
    pub first_below_tol: Option<usize>,
}

/// Estimate sup{‖c_{ξ,p} − c_{ξ,q}‖ : ξ extends the length-n prefix, p,q ≥ n}
/// at n = quarter points of the prefix. Extensions enumerate all short
/// continuations first, then seeded random tails; per extension the
/// oscillation is the bounding-box L1 diameter of its images from step n on.
pub fn uniform_convergence_probe<S: Scalar>(
    family: &MatrixFamily<S>,
    prefix: &[usize],
    extension_samples: usize,
    depth: usize,
    tol: f64,
) -> Result<ProbeProfile> {
    let c = family
        .terminal_vector
        .as_ref()
        .ok_or_else(|| Error::Invalid("probe needs a terminal vector".into()))?;
    if !c.entries().iter().all(|x| *x > S::zero()) {
        return Err(Error::Invalid("probe needs a strictly positive terminal vector".into()));
    }
    if prefix.is_empty() || extension_samples == 0 {
        return Err(Error::Invalid("probe needs a prefix and at least one sample".into()));
    }
    let fam = family.to_f64();
    let c64 = c.to_f64();
    let a = fam.alphabet_size();
    if depth < prefix.len() {
        return Err(Error::Invalid("depth must reach past the prefix".into()));
    }

    let len = prefix.len();
    let mut lengths: Vec<usize> =
        (1..=4).map(|j| (len * j).div_ceil(4)).filter(|n| *n >= 1).collect();
    lengths.dedup();

    // exhaust all extensions of length e, a^e ≤ half the sample budget
    let mut exhaust_len = 0usize;
    let mut count = 1usize;
    while count * a <= extension_samples / 2 {
        count *= a;
        exhaust_len += 1;
    }

    let mut sup_gaps = Vec::with_capacity(lengths.len());
    for (li, &n) in lengths.iter().enumerate() {
        let mut sup = 0.0f64;
        for sample in 0..extension_samples {
            let mut letters: Vec<usize> = prefix[..n].to_vec();
            let mut idx = sample;
            if sample < count {
                for _ in 0..exhaust_len {
                    letters.push(idx % a);
                    idx /= a;
                }
            }
            let mut rng = SplitMix::new(PROBE_SEED).fork(li as u64).fork(sample as u64);
            while letters.len() < depth {
                letters.push(rng.below(a as u64) as usize);
            }

            let d = fam.order();
            let mut acc: ScaledMat<f64> = ScaledMat::identity(d);
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for (m, &s) in letters.iter().enumerate() {
                acc = scaled_multiply(&acc, fam.mat(s), m + 1)?;
                if m + 1 >= n {
                    let img = acc.unit.mul(&c64);
                    let nrm = img.entry_norm();
                    if nrm == 0.0 {
                        return Err(Error::Invalid(format!("image vanished at step {}", m + 1)));
                    }
                    for k in 0..d {
                        let x = img.at(k, 0) / nrm;
                        lo[k] = lo[k].min(x);
                        hi[k] = hi[k].max(x);
                    }
                }
            }
            let diam: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).sum();
            sup = sup.max(diam);
        }
        sup_gaps.push(sup);
    }

    let first_below_tol = lengths
        .iter()
        .zip(&sup_gaps)
        .find(|(_, g)| **g < tol)
        .map(|(n, _)| *n);
    Ok(ProbeProfile { prefix_lengths: lengths, sup_gaps, first_below_tol })
}

// ---------------------------------------------------------------------------
// Checkpoint conditions (H1)/(H2) and the vector-class statistic

pub const PATTERN_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct H2Violation {
    /// Index of the checkpoint window (n_k, n_{k+1}].
    pub window: usize,
    pub rows: (usize, usize),
    pub cols: (usize, usize),
    pub antidiagonal: bool,
}

#[derive(Debug, Clone)]
pub struct VMembership {
    pub vector: Vec<f64>,
    /// Running inf of ‖P_n v‖/‖P_n‖; a statistic, not a proof.
    pub inf_ratio: f64,
    pub argmin: usize,
}

#[derive(Debug, Clone)]
pub struct Theorem15Report {
    pub h1_min: f64,
    /// (checkpoint index k, step n) attaining h1_min.
    pub h1_argmin: (usize, usize),
    pub h2_violations: Vec<H2Violation>,
    pub v_membership: Vec<VMembership>,
}

/// h1_min = min over k and n ∈ [n_{k+1}, n_{k+2}) of
/// ‖P_n‖/(‖P_{n_k}‖·‖P_{n_k,n}‖); h2 scans every checkpoint-window
/// normalized product for 2×2 submatrices within `pattern_tol` of a
/// diagonal or antidiagonal pattern whose nonzero entries exceed
/// [`PATTERN_FLOOR`].
pub fn theorem15_check<S: Scalar>(
    traj: &ProductTrajectory<S>,
    checkpoints: &[usize],
    pattern_tol: f64,
    test_vectors: &[Vec<f64>],
) -> Result<Theorem15Report> {
    let depth = traj.depth();
    if checkpoints.len() < 3 {
        return Err(Error::BadCheckpoints { reason: "need at least three checkpoints".into() });
    }
    if checkpoints[0] < 1 || *checkpoints.last().unwrap() > depth {
        return Err(Error::BadCheckpoints {
            reason: format!("checkpoints must lie in [1, {depth}]"),
        });
    }
    if !checkpoints.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::BadCheckpoints { reason: "checkpoints must be strictly increasing".into() });
    }

    let mats64: Vec<Mat<f64>> = traj.mats.iter().map(|m| m.to_f64()).collect();
    let factor64 = |n: usize| &mats64[traj.symbols[n - 1]];
    let d = traj.order();

    let mut h1_min = f64::INFINITY;
    let mut h1_argmin = (0usize, 0usize);
    for k in 0..checkpoints.len() - 2 {
        let base = checkpoints[k];
        let mut win: ScaledMat<f64> = ScaledMat::identity(d);
        for m in base + 1..checkpoints[k + 2] {
            win = scaled_multiply(&win, factor64(m), m)?;
            if m >= checkpoints[k + 1] {
                let h1 = (traj.log_norm_at(m) - traj.log_norm_at(base) - win.log_norm()).exp();
                if h1 < h1_min {
                    h1_min = h1;
                    h1_argmin = (k, m);
                }
            }
        }
    }

    let mut h2_violations = Vec::new();
    for k in 0..checkpoints.len() - 1 {
        let mut win: ScaledMat<f64> = ScaledMat::identity(d);
        for m in checkpoints[k] + 1..=checkpoints[k + 1] {
            win = scaled_multiply(&win, factor64(m), m)?;
        }
        let w = win.normalized_f64();
        for i in 0..d {
            for i2 in i + 1..d {
                for j in 0..d {
                    for j2 in j + 1..d {
                        let (a, b, c, e) =
                            (*w.at(i, j), *w.at(i, j2), *w.at(i2, j), *w.at(i2, j2));
                        if a > PATTERN_FLOOR && e > PATTERN_FLOOR && b.abs() <= pattern_tol && c.abs() <= pattern_tol {
                            h2_violations.push(H2Violation {
                                window: k,
                                rows: (i, i2),
                                cols: (j, j2),
                                antidiagonal: false,
                            });
                        }
                        if b > PATTERN_FLOOR && c > PATTERN_FLOOR && a.abs() <= pattern_tol && e.abs() <= pattern_tol {
                            h2_violations.push(H2Violation {
                                window: k,
                                rows: (i, i2),
                                cols: (j, j2),
                                antidiagonal: true,
                            });
                        }
                    }
                }
            }
        }
    }

    let units64: Vec<Mat<f64>> = traj.steps.iter().map(|st| st.scaled.normalized_f64()).collect();
    let mut v_membership = Vec::new();
    for v in test_vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}"),
                got: format!("{}", v.len()),
                context: "test vector",
            });
        }
        let mut inf_ratio = f64::INFINITY;
        let mut argmin = 0usize;
        for (n, u) in units64.iter().enumerate() {
            let mut nrm = 0.0;
            for i in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += u.at(i, j) * v[j];
                }
                nrm += s.abs();
            }
            if nrm < inf_ratio {
                inf_ratio = nrm;
                argmin = n + 1;
            }
        }
        v_membership.push(VMembership { vector: v.clone(), inf_ratio, argmin });
    }

    Ok(Theorem15Report { h1_min, h1_argmin, h2_violations, v_membership })
}

// ---------------------------------------------------------------------------
// Divergence detection

pub const CLUSTER_RADIUS: f64 = 1e-3;
pub const EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorVerdict {
    Diverges,
    /// Single normalized limit point: this test proves nothing.
    SingleLimitPoint,
    /// A shared left eigenvector exists: no divergence verdict.
    SharedLeftEigenvector,
}

#[derive(Debug, Clone)]
pub struct CommonLeftEig {
    pub exists: bool,
    pub witness: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct DetectorReport {
    pub limit_points: Vec<Mat<f64>>,
    pub cluster_sizes: Vec<usize>,
    /// ‖r·(A_n/‖A_n‖) − λ_n r‖ per factor, when a witness r exists.
    pub residual_series: Vec<f64>,
    pub common_left_eigenvector: CommonLeftEig,
    pub verdict: DetectorVerdict,
}

/// Cluster the normalized factors (greedy, radius [`CLUSTER_RADIUS`]) and
/// test the cluster centroids for a shared left eigenvector by scanning
/// eigenvalue tuples and intersecting kernels of the stacked (Aᵀ − μI).
/// Diverges means at least two limit points and no shared eigenvector.
pub fn divergence_detector(factors: &[Mat<f64>]) -> Result<DetectorReport> {
    if factors.is_empty() {
        return Err(Error::Invalid("detector needs at least one factor".into()));
    }
    let d = factors[0].rows();
    if d > 32 {
        return Err(Error::Invalid("detector order capped at 32".into()));
    }
    for f in factors {
        if !f.is_square() || f.rows() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", f.rows(), f.cols()),
                context: "detector factor",
            });
        }
    }

    let mut normalized: Vec<Mat<f64>> = Vec::with_capacity(factors.len());
    for f in factors {
        let n = f.entry_norm();
        if n == 0.0 {
            return Err(Error::ZeroMatrix);
        }
        normalized.push(f.scale(&(1.0 / n)));
    }

    let mut limit_points: Vec<Mat<f64>> = Vec::new();
    let mut cluster_sizes: Vec<usize> = Vec::new();
    for nm in &normalized {
        match limit_points.iter().position(|c| mat_l1_dist(c, nm) <= CLUSTER_RADIUS) {
            Some(i) => cluster_sizes[i] += 1,
            None => {
                limit_points.push(nm.clone());
                cluster_sizes.push(1);
            }
        }
    }

    let common = common_left_eigenvector(&limit_points)?;
    let residual_series = match &common.witness {
        Some(r) => normalized.iter().map(|nm| left_residual(r, nm)).collect(),
        None => Vec::new(),
    };
    let verdict = if limit_points.len() == 1 {
        DetectorVerdict::SingleLimitPoint
    } else if common.exists {
        DetectorVerdict::SharedLeftEigenvector
    } else {
        DetectorVerdict::Diverges
    };

    Ok(DetectorReport {
        limit_points,
        cluster_sizes,
        residual_series,
        common_left_eigenvector: common,
        verdict,
    })
}

/// Expand `depth` factors of a driven family and run the detector.
pub fn detector_for_family<S: Scalar>(
    family: &MatrixFamily<S>,
    seq: &SymbolSequence,
    depth: usize,
) -> Result<DetectorReport> {
    let mats64: Vec<Mat<f64>> = family.mats().iter().map(|m| m.to_f64()).collect();
    let mut factors = Vec::with_capacity(depth);
    for n in 0..depth {
        factors.push(mats64[seq.symbol(n, family.alphabet_size())?].clone());
    }
    divergence_detector(&factors)
}

fn mat_l1_dist(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).abs()).sum()
}

fn common_left_eigenvector(centroids: &[Mat<f64>]) -> Result<CommonLeftEig> {
    let d = centroids[0].rows();
    let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(centroids.len());
    for c in centroids {
        let mut eigs = eigenvalues(&c.transpose())?;
        // dedup near-equal eigenvalues to keep the tuple scan small
        let mut kept: Vec<Complex64> = Vec::new();
        eigs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        for e in eigs {
            if !kept.iter().any(|k| (k - e).norm() < 1e-8) {
                kept.push(e);
            }
        }
        spectra.push(kept);
    }

    let total: usize = spectra.iter().map(|s| s.len()).product();
    if total > 20_000 {
        // pairwise fallback: existence for every pair, no global witness
        for i in 0..centroids.len() {
            for j in i + 1..centroids.len() {
                let pair = [centroids[i].clone(), centroids[j].clone()];
                let sub = common_left_eigenvector(&pair)?;
                if !sub.exists {
                    return Ok(CommonLeftEig { exists: false, witness: None });
                }
            }
        }
        return Ok(CommonLeftEig { exists: true, witness: None });
    }

    let mut idx = vec![0usize; spectra.len()];
    loop {
        let mut stacked: Vec<Vec<Complex64>> = Vec::with_capacity(centroids.len() * d);
        for (ci, c) in centroids.iter().enumerate() {
            let mu = spectra[ci][idx[ci]];
            let t = c.transpose();
            for i in 0..d {
                let mut row = Vec::with_capacity(d);
                for j in 0..d {
                    let mut z = Complex64::new(*t.at(i, j), 0.0);
                    if i == j {
                        z -= mu;
                    }
                    row.push(z);
                }
                stacked.push(row);
            }
        }
        let kern = complex_kernel(&stacked, EIG_TOL);
        if let Some(w) = kern.into_iter().next() {
            return Ok(CommonLeftEig { exists: true, witness: Some(w) });
        }
        // advance the multi-index
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(CommonLeftEig { exists: false, witness: None });
            }
            idx[pos] += 1;
            if idx[pos] < spectra[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn left_residual(r: &[Complex64], nm: &Mat<f64>) -> f64 {
    let d = nm.rows();
    let mut rn = vec![Complex64::new(0.0, 0.0); d];
    for j in 0..d {
        for i in 0..d {
            rn[j] += r[i] * nm.at(i, j);
        }
    }
    let dot: Complex64 = rn.iter().zip(r).map(|(x, y)| x * y.conj()).sum();
    let nrm2: f64 = r.iter().map(|y| y.norm_sqr()).sum();
    let lambda = dot / nrm2;
    rn.iter().zip(r).map(|(x, y)| (x - lambda * y).norm()).sum()
}

// ---------------------------------------------------------------------------
// Monte Carlo divergence frequency

pub const OSC_FLOOR: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub fraction: f64,
    pub diverging: usize,
    pub trials: usize,
    pub osc_floor: f64,
}

/// Draw i.i.d. factors with standard complex normal entries and count the
/// trials whose normalized product oscillates beyond [`OSC_FLOOR`] over the
/// trailing window. Deterministic for a fixed seed.
pub fn monte_carlo_divergence(
    d: usize,
    trials: usize,
    depth: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { dim: d, min: 2 });
    }
    if d > 8 {
        return Err(Error::Invalid("monte carlo order capped at 8".into()));
    }
    if trials == 0 || trials > 10_000 {
        return Err(Error::Invalid("trials must lie in [1, 10000]".into()));
    }
    if depth < 5 {
        return Err(Error::Invalid("depth must be at least 5".into()));
    }

    let w0 = window_start(depth);
    let mut diverging = 0usize;
    for t in 0..trials {
        let mut rng = SplitMix::new(seed).fork(t as u64);
        let mut unit = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            unit[i * d + i] = Complex64::new(1.0, 0.0);
        }
        let mut snaps: Vec<Vec<Complex64>> = Vec::with_capacity(depth - w0);
        let mut degenerate = false;
        for n in 1..=depth {
            let a: Vec<Complex64> = (0..d * d).map(|_| rng.complex_normal()).collect();
            let mut next = vec![Complex64::new(0.0, 0.0); d * d];
            for i in 0..d {
                for k in 0..d {
                    let u = unit[i * d + k];
                    for j in 0..d {
                        next[i * d + j] += u * a[k * d + j];
                    }
                }
            }
            let norm: f64 = next.iter().map(|z| z.norm()).sum();
            if !norm.is_finite() || norm == 0.0 {
                degenerate = true;
                break;
            }
            next.iter_mut().for_each(|z| *z /= norm);
            unit = next;
            if n > w0 {
                snaps.push(unit.clone());
            }
        }
        if degenerate {
            continue;
        }
        let mut osc = 0.0f64;
        for i in 0..snaps.len() {
            for j in i + 1..snaps.len() {
                let dist: f64 =
                    snaps[i].iter().zip(&snaps[j]).map(|(x, y)| (x - y).norm()).sum();
                osc = osc.max(dist);
            }
        }
        if osc > OSC_FLOOR {
            diverging += 1;
        }
    }

    Ok(MonteCarloReport {
        fraction: diverging as f64 / trials as f64,
        diverging,
        trials,
        osc_floor: OSC_FLOOR,
    })
}

// ---------------------------------------------------------------------------
// Row-stochastic 2×2 series

#[derive(Debug, Clone)]
pub struct SeriesReport<S> {
    pub series_value: S,
    pub direct_entry: S,
    pub gap: S,
}

/// Compare the (2,1) entry of the left product S_depth⋯S_1 with its series
/// expansion y_1 + Σ_{n≥2} y_n Π_{i<n} det S_i, y_n the (2,1) entry of S_n.
/// Factors cycle when fewer than `depth` are supplied.
pub fn stochastic2x2_series<S: Scalar>(factors: &[Mat<S>], depth: usize) -> Result<SeriesReport<S>> {
    if factors.is_empty() || depth == 0 {
        return Err(Error::Invalid("need at least one factor and depth ≥ 1".into()));
    }
    for (i, f) in factors.iter().enumerate() {
        if f.rows() != 2 || f.cols() != 2 {
            return Err(Error::NotStochastic { reason: format!("factor {i} is not 2x2") });
        }
        for r in 0..2 {
            let dev = (f.at(r, 0).clone() + f.at(r, 1).clone() - S::from_i64(1)).abs();
            let bad = if S::EXACT { !dev.is_zero() } else { dev.to_f64() > 1e-12 };
            if bad {
                return Err(Error::NotStochastic {
                    reason: format!("factor {i} row {r} does not sum to 1"),
                });
            }
        }
        if !f.entries().iter().all(|x| *x > S::zero() && *x < S::from_i64(1)) {
            return Err(Error::NotStochastic {
                reason: format!("factor {i} has an entry outside (0, 1)"),
            });
        }
    }
    let fac = |n: usize| &factors[(n - 1) % factors.len()];
    let det2 = |m: &Mat<S>| {
        m.at(0, 0).clone() * m.at(1, 1).clone() - m.at(0, 1).clone() * m.at(1, 0).clone()
    };

    let mut series = fac(1).at(1, 0).clone();
    let mut det_prod = S::from_i64(1);
    for n in 2..=depth {
        det_prod = det_prod * det2(fac(n - 1));
        series = series + fac(n).at(1, 0).clone() * det_prod.clone();
    }

    let mut acc = fac(1).clone();
    for n in 2..=depth {
        acc = fac(n).mul(&acc);
    }
    let direct = acc.at(1, 0).clone();
    let gap = (series.clone() - direct.clone()).abs();
    Ok(SeriesReport { series_value: series, direct_entry: direct, gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{beta_scaled_family, thm23_matrices};
    use crate::scalar::{q, Rat};
    use num_traits::Signed;

    fn thm23_float() -> MatrixFamily<f64> {
        let mats = thm23_matrices().iter().map(|m| m.to_f64()).collect();
        MatrixFamily::bare(mats).unwrap()
    }

    fn positive_pair() -> MatrixFamily<f64> {
        let a = Mat::from_rows(vec![vec![2.0 / 6.0, 1.0 / 6.0], vec![1.0 / 6.0, 2.0 / 6.0]]);
        let b = Mat::from_rows(vec![vec![1.0 / 8.0, 3.0 / 8.0], vec![3.0 / 8.0, 1.0 / 8.0]]);
        MatrixFamily::bare(vec![a, b]).unwrap()
    }

    #[test]
    fn identity_family_keeps_image_fixed() {
        let fam = MatrixFamily::bare(vec![Mat::<f64>::identity(2)]).unwrap();
        let start = Mat::column(vec![1.0, 2.0]);
        let traj =
            run_trajectory(&fam, &SymbolSequence::Word(vec![0; 5]), 5, Some(start)).unwrap();
        for st in &traj.steps {
            let img = st.image.as_ref().unwrap();
            assert!((img[0] - 1.0 / 3.0).abs() < 1e-15);
            assert!((img[1] - 2.0 / 3.0).abs() < 1e-15);
            assert!(st.lambda > 0.0 && st.lambda <= 1.0);
        }
    }

    #[test]
    fn substitution_word_images_become_cauchy() {
        let fam = thm23_float();
        let seq = SymbolSequence::Periodic { preperiod: vec![], period: vec![0, 1, 2] };
        let start = Mat::column(vec![1.0; 7]);
        let traj = run_trajectory(&fam, &seq, 200, Some(start)).unwrap();
        let images = traj.images_f64().unwrap();
        let mut sup = 0.0f64;
        for m in 40..60 {
            for n in m + 1..60 {
                let gap: f64 = images[m - 1]
                    .iter()
                    .zip(&images[n - 1])
                    .map(|(x, y)| (x - y).abs())
                    .sum();
                sup = sup.max(gap);
            }
        }
        assert!(sup < 1e-6, "sup gap over [40,60] was {sup}");
        // deep-run oracle agrees with the step-60 image
        let deep: f64 = images[59]
            .iter()
            .zip(&images[199])
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(deep < 1e-6);
    }

    #[test]
    fn positive_family_random_word_converges() {
        let fam = positive_pair();
        let start = Mat::column(vec![1.0, 1.0]);
        let traj =
            run_trajectory(&fam, &SymbolSequence::Random { seed: 7 }, 200, Some(start)).unwrap();
        let lim = limit_image(&traj, 1e-8).unwrap();
        assert!(lim.cauchy_gap < 1e-8);
        assert!((lim.limit.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_product_telescopes_exactly_in_rational_mode() {
        let fam = MatrixFamily::bare(thm23_matrices().to_vec()).unwrap();
        let seq = SymbolSequence::Periodic { preperiod: vec![1], period: vec![0, 2, 1] };
        let traj = run_trajectory(&fam, &seq, 30, None).unwrap();
        let mut prod = Rat::from_i64(1);
        for (st, &s) in traj.steps.iter().zip(&traj.symbols) {
            prod = prod * st.lambda.clone() * fam.mat(s).entry_norm();
        }
        assert_eq!(prod, traj.steps[29].scaled.unit.entry_norm());
    }

    #[test]
    fn lambda_product_matches_log_norm_in_float_mode() {
        let fam = thm23_float();
        let traj =
            run_trajectory(&fam, &SymbolSequence::Random { seed: 42 }, 200, None).unwrap();
        let mut acc = 0.0f64;
        for (st, &s) in traj.steps.iter().zip(&traj.symbols) {
            assert!(st.lambda > 0.0 && st.lambda <= 1.0 + 1e-12);
            acc += st.lambda.ln() + fam.mat(s).entry_norm().ln();
        }
        let ln = traj.log_norm_at(200);
        assert!((acc - ln).abs() <= 1e-8 * ln.abs());
    }

    #[test]
    fn image_is_convex_combination_of_normalized_columns() {
        let fam = thm23_float();
        let start = Mat::column(vec![1.0; 7]);
        let traj =
            run_trajectory(&fam, &SymbolSequence::Random { seed: 5 }, 17, Some(start)).unwrap();
        let unit = &traj.steps[16].scaled.unit;
        let img = traj.steps[16].image.as_ref().unwrap();
        let pc = unit.mul(&Mat::column(vec![1.0; 7]));
        let total = pc.entry_norm();
        let mut recon = vec![0.0f64; 7];
        let mut coeff_sum = 0.0f64;
        for j in 0..7 {
            let col_norm: f64 = (0..7).map(|i| unit.at(i, j).abs()).sum();
            if col_norm == 0.0 {
                continue;
            }
            let alpha = col_norm / total;
            coeff_sum += alpha;
            for i in 0..7 {
                recon[i] += alpha * unit.at(i, j) / col_norm;
            }
        }
        assert!((coeff_sum - 1.0).abs() < 1e-12);
        for i in 0..7 {
            assert!((recon[i] - img[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_constant_family_collapses() {
        // c·r is rank one, so every product is too
        let m = Mat::from_rows(vec![vec![0.2, 0.4], vec![0.4, 0.8]]);
        let fam = MatrixFamily::bare(vec![m]).unwrap();
        let traj = run_trajectory(&fam, &SymbolSequence::Word(vec![0; 40]), 40, None).unwrap();
        let rep = rank_one_diagnostic(&traj);
        assert_eq!(rep.verdict, RankVerdict::RankOneCollapse);
        assert!(rep.ratio_series.iter().all(|r| *r < 1e-12));
    }

    #[test]
    fn doubly_stochastic_fixed_point_from_step_one() {
        let m = Mat::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let fam = MatrixFamily::bare(vec![m]).unwrap();
        let start = Mat::column(vec![1.0, 1.0]);
        let traj = run_trajectory(&fam, &SymbolSequence::Word(vec![0; 30]), 30, Some(start)).unwrap();
        let lim = limit_image(&traj, 1e-14).unwrap();
        assert_eq!(lim.achieved_at, 1);
        assert!((lim.limit[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn vanishing_product_reports_position() {
        let z = Mat::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        let fam = MatrixFamily::bare(vec![z]).unwrap();
        let err = run_trajectory(&fam, &SymbolSequence::Word(vec![0; 4]), 4, None).unwrap_err();
        match err {
            Error::ProductVanished { step } => assert_eq!(step, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn probe_is_zero_for_scalars_and_shrinks_for_substitutions() {
        let half = Mat::from_rows(vec![vec![0.5]]);
        let fam = MatrixFamily::new(
            vec![half.clone(), half],
            None,
            Some(Mat::column(vec![1.0])),
        )
        .unwrap();
        let prof = uniform_convergence_probe(&fam, &[0, 1, 0, 1, 0, 1, 0, 1], 10, 40, 1e-9).unwrap();
        assert!(prof.sup_gaps.iter().all(|g| *g == 0.0));
        assert_eq!(prof.first_below_tol, Some(2));

        let mats = thm23_matrices().iter().map(|m| m.to_f64()).collect();
        let fam = MatrixFamily::new(mats, None, Some(Mat::column(vec![1.0; 7]))).unwrap();
        let prefix: Vec<usize> = SymbolSequence::Random { seed: 3 }.prefix(40, 3).unwrap();
        let prof = uniform_convergence_probe(&fam, &prefix, 30, 120, 1e-4).unwrap();
        let first = prof.sup_gaps[0];
        let last = *prof.sup_gaps.last().unwrap();
        assert!(last <= first, "profile should shrink, got {:?}", prof.sup_gaps);
        assert!(last < 0.1);
    }

    #[test]
    fn checkpoint_conditions_on_positive_and_permutation_families() {
        let fam = positive_pair();
        let traj =
            run_trajectory(&fam, &SymbolSequence::Random { seed: 9 }, 60, None).unwrap();
        let rep = theorem15_check(&traj, &[10, 20, 30, 40, 50], 1e-6, &[vec![1.0, 1.0]]).unwrap();
        assert!(rep.h1_min > 0.0);
        assert!(rep.h2_violations.is_empty());
        assert!(rep.v_membership[0].inf_ratio > 0.0);

        let id = Mat::<f64>::identity(2);
        let swap = Mat::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let fam = MatrixFamily::bare(vec![id, swap]).unwrap();
        let seq = SymbolSequence::Periodic { preperiod: vec![], period: vec![0, 1] };
        let traj = run_trajectory(&fam, &seq, 12, None).unwrap();
        let rep = theorem15_check(&traj, &[2, 4, 6, 8], 1e-9, &[]).unwrap();
        assert!(!rep.h2_violations.is_empty());

        let err = theorem15_check(&traj, &[2, 4], 1e-9, &[]).unwrap_err();
        assert!(matches!(err, Error::BadCheckpoints { .. }));
        let err = theorem15_check(&traj, &[4, 2, 6], 1e-9, &[]).unwrap_err();
        assert!(matches!(err, Error::BadCheckpoints { .. }));
        let err = theorem15_check(&traj, &[2, 4, 40], 1e-9, &[]).unwrap_err();
        assert!(matches!(err, Error::BadCheckpoints { .. }));
    }

    #[test]
    fn detector_verdicts() {
        // constant family: one limit point, no divergence claim
        let m = Mat::from_rows(vec![vec![0.7, 0.3], vec![0.2, 0.8]]);
        let rep = divergence_detector(&vec![m; 25]).unwrap();
        assert_eq!(rep.limit_points.len(), 1);
        assert_eq!(rep.verdict, DetectorVerdict::SingleLimitPoint);

        // substitution letters mixed: diverges
        let fam = MatrixFamily::bare(thm23_matrices().to_vec()).unwrap();
        let seq = SymbolSequence::Periodic { preperiod: vec![], period: vec![0, 1, 0, 2] };
        let rep = detector_for_family(&fam, &seq, 40).unwrap();
        assert!(rep.limit_points.len() >= 2);
        assert_eq!(rep.verdict, DetectorVerdict::Diverges);
        assert!(!rep.common_left_eigenvector.exists);

        // column-stochastic pair shares the all-ones left eigenvector
        let a = Mat::from_rows(vec![vec![0.5, 0.3], vec![0.5, 0.7]]);
        let b = Mat::from_rows(vec![vec![0.2, 0.6], vec![0.8, 0.4]]);
        let factors: Vec<Mat<f64>> = (0..20)
            .map(|i| if i % 2 == 0 { a.clone() } else { b.clone() })
            .collect();
        let rep = divergence_detector(&factors).unwrap();
        assert_eq!(rep.verdict, DetectorVerdict::SharedLeftEigenvector);
        assert!(rep.common_left_eigenvector.exists);
        let max_res = rep.residual_series.iter().cloned().fold(0.0, f64::max);
        assert!(max_res < 1e-8, "residual {max_res}");
    }

    #[test]
    fn monte_carlo_bounds_and_small_run() {
        assert!(matches!(
            monte_carlo_divergence(1, 10, 50, 1).unwrap_err(),
            Error::DimensionTooSmall { dim: 1, min: 2 }
        ));
        assert!(monte_carlo_divergence(9, 10, 50, 1).is_err());
        let rep = monte_carlo_divergence(2, 30, 150, 11).unwrap();
        assert!(rep.fraction >= 0.9, "fraction {}", rep.fraction);
    }

    #[test]
    fn stochastic_series_matches_direct_entry() {
        let idempotent = Mat::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let rep = stochastic2x2_series(&[idempotent], 20).unwrap();
        assert!((rep.series_value - 0.5).abs() < 1e-15);
        assert!((rep.direct_entry - 0.5).abs() < 1e-15);

        let s = Mat::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let rep = stochastic2x2_series(&[s], 50).unwrap();
        assert!(rep.gap < 1e-10, "gap {}", rep.gap);
        assert!((rep.series_value - 2.0 / 3.0).abs() < 1e-6);

        let s1 = Mat::from_rows(vec![vec![0.6, 0.4], vec![0.3, 0.7]]);
        let s2 = Mat::from_rows(vec![vec![0.8, 0.2], vec![0.5, 0.5]]);
        let rep = stochastic2x2_series(&[s1, s2], 60).unwrap();
        assert!(rep.gap < 1e-9, "gap {}", rep.gap);

        // the identity is exact in rational arithmetic
        let r1 = Mat::from_rows(vec![vec![q(3, 5), q(2, 5)], vec![q(1, 4), q(3, 4)]]);
        let r2 = Mat::from_rows(vec![vec![q(1, 2), q(1, 2)], vec![q(2, 7), q(5, 7)]]);
        let rep = stochastic2x2_series(&[r1, r2], 15).unwrap();
        assert!(rep.gap.is_zero());

        let bad = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.2, 0.8]]);
        assert!(matches!(
            stochastic2x2_series(&[bad], 5).unwrap_err(),
            Error::NotStochastic { .. }
        ));
    }

    #[test]
    fn beta_family_runs_exactly() {
        let fam = beta_scaled_family();
        let seq = SymbolSequence::Periodic { preperiod: vec![], period: vec![0, 1, 2] };
        let traj = run_trajectory(&fam, &seq, 12, None).unwrap();
        // exact image norms are exactly 1
        for st in &traj.steps {
            let img = st.image.as_ref().unwrap();
            let norm: Rat = img.iter().map(|x| x.abs()).fold(Rat::from_i64(0), |a, b| a + b);
            assert_eq!(norm, Rat::from_i64(1));
        }
    }
}
