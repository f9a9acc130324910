//! Weak-Gibbs diagnostics for sofic measures: the cylinder potential and its
//! n-th-root ratio test, the three-condition representation check, the fused
//! cylinder probe whose limit detects failure, and an Lq scale-spectrum
//! estimator with its Legendre conjugate.

use crate::bernoulli::{cylinder_measure, BernoulliSpec, BetaSpec};
use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::mat::Mat;
use crate::scalar::Scalar;
use crate::trajectory::uniform_convergence_probe;

/// Ratio test along one word: at each depth n the measure of the length-n
/// prefix is compared against exp of the summed potential, and the n-th
/// root of the quotient is recorded. A weak-Gibbs family drives every
/// ratio root to 1.
#[derive(Debug, Clone)]
pub struct GibbsReport {
    pub depths: Vec<usize>,
    pub ratio_roots: Vec<f64>,
    /// Potential samples along the shifted word, one per position.
    pub potentials: Vec<f64>,
    /// max over reported depths of |ratio_root − 1|.
    pub sup_deviation: f64,
}

impl GibbsReport {
    /// |ratio_root − 1| at depth n, if n was evaluated.
    pub fn deviation_at(&self, n: usize) -> Option<f64> {
        self.depths
            .iter()
            .position(|&d| d == n)
            .map(|i| (self.ratio_roots[i] - 1.0).abs())
    }
}

/// Image P c / ‖P c‖ with per-step renormalization of the running product.
fn normalized_image(mats: &[Mat<f64>], word: &[usize], c: &Mat<f64>) -> Result<Mat<f64>> {
    let d = c.rows();
    let mut p = Mat::<f64>::identity(d);
    for &s in word {
        p = p.mul(&mats[s]);
        let nrm = p.entry_norm();
        if nrm <= 0.0 {
            return Err(Error::ZeroImage { symbol: s, floor: 0.0 });
        }
        p = p.scale(&(1.0 / nrm));
    }
    let v = p.mul(c);
    let nrm = v.entry_norm();
    if nrm < 1e-300 {
        return Err(Error::ZeroImage { symbol: word.last().copied().unwrap_or(0), floor: 1e-300 });
    }
    Ok(v.scale(&(1.0 / nrm)))
}

/// Potential at the k-shifted word, with the forward tail approximated at
/// finite depth: Φ(σ^k ω) = log ‖M_{ω_{k+1}} c_{σ^{k+1}ω, tail_depth}‖.
/// Ratio roots (ν[ω_1…ω_n] / exp Σ_{k<n} Φ)^{1/n} are reported for every
/// n the word can support, i.e. n ≤ len − tail_depth.
pub fn potential_and_ratio(
    family: &MatrixFamily<f64>,
    word: &[usize],
    tail_depth: usize,
) -> Result<GibbsReport> {
    let rows = family
        .row_vectors
        .as_ref()
        .ok_or_else(|| Error::Invalid("family carries no selector rows".into()))?;
    let c = family
        .terminal_vector
        .as_ref()
        .ok_or_else(|| Error::Invalid("family carries no terminal vector".into()))?;
    let a = family.alphabet_size();
    if let Some(&bad) = word.iter().find(|&&s| s >= a) {
        return Err(Error::Invalid(format!("letter {bad} outside alphabet of size {a}")));
    }
    if word.len() <= tail_depth {
        return Err(Error::WordTooShort { needed: tail_depth + 1, got: word.len() });
    }
    let n_max = word.len() - tail_depth;
    let mats = family.mats();

    let mut potentials = Vec::with_capacity(n_max);
    for k in 0..n_max {
        let tail = &word[k + 1..(k + 1 + tail_depth).min(word.len())];
        let ct = normalized_image(mats, tail, c)?;
        let nrm = mats[word[k]].mul(&ct).entry_norm();
        if nrm < 1e-12 {
            return Err(Error::ZeroImage { symbol: word[k], floor: 1e-12 });
        }
        potentials.push(nrm.ln());
    }

    let mut depths = Vec::with_capacity(n_max);
    let mut ratio_roots = Vec::with_capacity(n_max);
    let mut sup_deviation = 0.0f64;
    let mut row = rows[word[0]].clone();
    let mut log_acc = 0.0f64;
    let mut phi_sum = 0.0f64;
    for n in 1..=n_max {
        if n > 1 {
            row = row.mul(&mats[word[n - 1]]);
            let nrm = row.entry_norm();
            if nrm <= 0.0 {
                return Err(Error::ZeroImage { symbol: word[n - 1], floor: 0.0 });
            }
            row = row.scale(&(1.0 / nrm));
            log_acc += nrm.ln();
        }
        phi_sum += potentials[n - 1];
        let val = row.mul(c).at(0, 0).to_owned();
        if val <= 0.0 {
            return Err(Error::ZeroImage { symbol: word[n - 1], floor: 0.0 });
        }
        let ln_nu = val.ln() + log_acc;
        let rr = ((ln_nu - phi_sum) / n as f64).exp();
        depths.push(n);
        ratio_roots.push(rr);
        sup_deviation = sup_deviation.max((rr - 1.0).abs());
    }

    Ok(GibbsReport { depths, ratio_roots, potentials, sup_deviation })
}

// ---------------------------------------------------------------------------
// Three-condition check

pub const B3_TOL: f64 = 1e-3;
pub const B3_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct B3Report {
    /// Worst image oscillation over cylinder extensions of the word prefixes.
    pub cond1_sup_gap: f64,
    /// max over words and selector rows of |(r_i · c_{ω,n})^{1/n} − 1|.
    pub cond2_root_gap: f64,
    /// min over words and letters of ‖M_i c_ω‖.
    pub cond3_min_image: f64,
    pub tol: f64,
    pub floor: f64,
    pub verdict: bool,
}

/// Probes the three sufficient conditions on the sampled words: uniform
/// convergence of normalized images (probed on prefixes up to 48 letters),
/// the n-th root of every selector applied to the limit image tending to 1
/// (needs depth in the thousands for the 1e-3 tolerance), and images of the
/// limit vector bounded away from zero.
pub fn theorem_b3_check<S: Scalar>(
    family: &MatrixFamily<S>,
    sample_words: &[Vec<usize>],
    depth: usize,
) -> Result<B3Report> {
    if sample_words.is_empty() {
        return Err(Error::Invalid("need at least one sample word".into()));
    }
    if depth < 2 {
        return Err(Error::Invalid("depth must be at least 2".into()));
    }
    let fam = family.to_f64();
    let rows = fam
        .row_vectors
        .as_ref()
        .ok_or_else(|| Error::Invalid("family carries no selector rows".into()))?;
    let c = fam
        .terminal_vector
        .as_ref()
        .ok_or_else(|| Error::Invalid("family carries no terminal vector".into()))?;
    let mats = fam.mats();

    let mut cond1 = 0.0f64;
    let mut cond2 = 0.0f64;
    let mut cond3 = f64::INFINITY;
    for word in sample_words {
        if word.len() < depth {
            return Err(Error::WordTooShort { needed: depth, got: word.len() });
        }
        let prefix_len = depth.min(48);
        let probe =
            uniform_convergence_probe(&fam, &word[..prefix_len], 20, prefix_len + 16, B3_TOL)?;
        if let Some(&g) = probe.sup_gaps.last() {
            cond1 = cond1.max(g);
        }

        let c_img = normalized_image(mats, &word[..depth], c)?;
        for r in rows {
            let val = r.mul(&c_img).at(0, 0).to_owned();
            let gap = if val > 0.0 { (val.powf(1.0 / depth as f64) - 1.0).abs() } else { 1.0 };
            cond2 = cond2.max(gap);
        }
        for m in mats {
            cond3 = cond3.min(m.mul(&c_img).entry_norm());
        }
    }

    let verdict = cond1 < B3_TOL && cond2 < B3_TOL && cond3 > B3_FLOOR;
    Ok(B3Report {
        cond1_sup_gap: cond1,
        cond2_root_gap: cond2,
        cond3_min_image: cond3,
        tol: B3_TOL,
        floor: B3_FLOOR,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Fused-cylinder probe

#[derive(Debug, Clone)]
pub struct FusedCylinderSeries {
    /// g_n for n = 1..=n_max.
    pub g: Vec<f64>,
    /// Trailing ratio of successive differences, a geometric-rate estimate;
    /// absent when fewer than three terms or the differences vanish.
    pub rate: Option<f64>,
}

/// The series g_n = (ν[r^n (r+1)^n] / (ν[r^n] ν[(r+1)^n]))^{1/n} built from
/// the spec's split letter r. Bounded away from 1 in the limit exactly when
/// the representation fails the weak-Gibbs criterion this way; a single term
/// is a plain measured ratio with no asymptotics attached.
pub fn condition24_probe(spec: &BernoulliSpec<f64>, n_max: usize) -> Result<FusedCylinderSeries> {
    if n_max == 0 {
        return Err(Error::Invalid("n_max must be at least 1".into()));
    }
    let r = spec.r;
    if r + 1 > spec.base - 1 {
        return Err(Error::Invalid(format!(
            "split letter {r} has no successor below base {}",
            spec.base
        )));
    }
    let mut g = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut joint = vec![r; n];
        joint.extend(std::iter::repeat(r + 1).take(n));
        let num = cylinder_measure(spec, &joint, 0)?;
        let da = cylinder_measure(spec, &joint[..n], 0)?;
        let db = cylinder_measure(spec, &joint[n..], 0)?;
        if da <= 0.0 || db <= 0.0 {
            return Err(Error::ZeroImage { symbol: if da <= 0.0 { r } else { r + 1 }, floor: 0.0 });
        }
        g.push((num / (da * db)).powf(1.0 / n as f64));
    }
    let rate = if n_max >= 3 {
        let d1 = g[n_max - 2] - g[n_max - 3];
        let d2 = g[n_max - 1] - g[n_max - 2];
        (d1.abs() > 1e-15).then(|| d2 / d1)
    } else {
        None
    };
    Ok(FusedCylinderSeries { g, rate })
}

// ---------------------------------------------------------------------------
// Scale spectrum

pub enum SpectrumSource<'a> {
    IntegerBase(&'a BernoulliSpec<f64>),
    Beta(&'a BetaSpec),
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub level: usize,
    pub qs: Vec<f64>,
    pub tau: Vec<f64>,
    /// (α, inf_q(αq − τ(q))) over the supplied α grid.
    pub legendre: Vec<(f64, f64)>,
    /// Cylinders with positive mass at this level.
    pub cylinders_counted: usize,
    /// Cover mesh: the largest cylinder diameter at this level.
    pub mesh: f64,
}

struct KahanSum {
    s: f64,
    c: f64,
}

impl KahanSum {
    fn new() -> Self {
        KahanSum { s: 0.0, c: 0.0 }
    }
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.s + y;
        self.c = (t - self.s) - y;
        self.s = t;
    }
}

/// τ_n(q) = log(Σ_C ν(C)^q) / log(mesh) over the natural cylinder partition
/// at the given level, summed in index order with compensation; zero-mass
/// cylinders are skipped. The Legendre conjugate is minimized directly over
/// the q grid. Partition covers are an upper-bound estimator for the true
/// cover infimum.
pub fn scale_spectrum_and_legendre(
    source: &SpectrumSource,
    q_grid: &[f64],
    alpha_grid: &[f64],
    level: usize,
) -> Result<SpectrumReport> {
    if level == 0 || level > 18 {
        return Err(Error::Invalid(format!("level {level} outside 1..=18")));
    }
    if q_grid.is_empty() {
        return Err(Error::Invalid("empty q grid".into()));
    }

    let mut sums: Vec<KahanSum> = q_grid.iter().map(|_| KahanSum::new()).collect();
    let mut count = 0usize;
    let mut accumulate = |mass: f64| {
        if mass <= 0.0 {
            return;
        }
        count += 1;
        for (qi, &q) in q_grid.iter().enumerate() {
            sums[qi].add(mass.powf(q));
        }
    };

    let mesh = match source {
        SpectrumSource::IntegerBase(spec) => {
            let k = spec.base;
            let d = spec.order();
            // depth-first over digit words, one root per translate
            for h in 0..d {
                let mut row = Mat::<f64>::zeros(1, d);
                row.set(0, h, 1.0);
                let mut stack: Vec<(Mat<f64>, usize)> = vec![(row, 0)];
                while let Some((r, dep)) = stack.pop() {
                    if dep == level {
                        accumulate(r.mul(&spec.c_nu).at(0, 0).to_owned());
                        continue;
                    }
                    // reversed push so digit 0 pops first: index order
                    for digit in (0..k).rev() {
                        stack.push((r.mul(&spec.mats[digit]), dep + 1));
                    }
                }
            }
            (k as f64).powi(-(level as i32))
        }
        SpectrumSource::Beta(bs) => {
            let fam = bs.family.to_f64();
            let rows = fam.row_vectors.as_ref().expect("beta family carries rows");
            let c = fam.terminal_vector.as_ref().expect("beta family carries c");
            for (i, r0) in rows.iter().enumerate() {
                let _ = i;
                let mut stack: Vec<(Mat<f64>, usize)> = vec![(r0.clone(), 1)];
                while let Some((r, dep)) = stack.pop() {
                    if dep == level {
                        accumulate(r.mul(c).at(0, 0).to_owned());
                        continue;
                    }
                    for letter in (0..3).rev() {
                        stack.push((r.mul(fam.mat(letter)), dep + 1));
                    }
                }
            }
            bs.beta.powi(-(level as i32))
        }
    };

    let log_mesh = mesh.ln();
    let tau: Vec<f64> = sums.iter().map(|ks| ks.s.ln() / log_mesh).collect();
    let legendre: Vec<(f64, f64)> = alpha_grid
        .iter()
        .map(|&alpha| {
            let f = q_grid
                .iter()
                .zip(&tau)
                .map(|(&q, &t)| alpha * q - t)
                .fold(f64::INFINITY, f64::min);
            (alpha, f)
        })
        .collect();

    Ok(SpectrumReport {
        level,
        qs: q_grid.to_vec(),
        tau,
        legendre,
        cylinders_counted: count,
        mesh,
    })
}
