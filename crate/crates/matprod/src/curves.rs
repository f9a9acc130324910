//! Refinable functions on a lattice: matrices built from the coefficients
//! of f(x) = sum c_n f(kx - n), curve samples from truncated digit
//! products, and residual checks for the self-similarity relation and the
//! matching of one-sided limits at the subdivision points.

use crate::eigen::perron_vector;
use crate::error::{Error, Result};
use crate::mat::Mat;

/// The matrix form of a lattice refinement equation with integer scale k.
///
/// A solution f supported on [0, q+1) is encoded by the vector function
/// psi(x) = (f(x), f(x+1), ..., f(x+q)) on [0, 1), which intertwines the
/// base-k digit shift: psi(x) = B_i psi(kx - i) on [i/k, (i+1)/k).
#[derive(Debug, Clone)]
pub struct RefinementSystem {
    pub base: usize,
    pub coeffs: Vec<f64>,
    /// Matrix order minus one; the solution lives on [0, q+1).
    pub order: usize,
    pub matrices: Vec<Mat<f64>>,
    /// Start vector for the digit products, entry sum 1 when stationary.
    pub seed: Vec<f64>,
    /// Whether the seed is a fixed vector of the averaged matrix.
    pub seed_stationary: bool,
    pub coeff_sum: f64,
    /// For k = 2: even-index and odd-index coefficient sums agree, which
    /// is the common-left-eigenvector condition.
    pub parity_balanced: Option<bool>,
}

/// One curve sample: the truncated digit product applied to the seed, with
/// the distance to the five-steps-shallower truncation as a convergence
/// gap estimate.
#[derive(Debug, Clone)]
pub struct CurveSample {
    pub x: f64,
    pub psi: Vec<f64>,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// max over samples of ||psi(x) - B_i psi(kx - i)||.
    pub self_similarity_residual: f64,
    /// max truncation gap seen among the evaluated samples.
    pub truncation_gap: f64,
    /// ||lim B_i B_{k-1}^n c - lim B_{i+1} B_0^n c|| for i = 0..k-2.
    pub endpoint_gaps: Vec<f64>,
    /// Convergence estimate for the deep powers behind the endpoint limits.
    pub endpoint_truncation: f64,
}

/// Build the k digit matrices of order q+1, q = ceil(N/(k-1)) - 1, with
/// entry (h, j) = c_{i+kh-j} and zeros where the index leaves 0..=N.
pub fn build_refinement_matrices(k: usize, coeffs: &[f64]) -> Result<RefinementSystem> {
    if k < 2 {
        return Err(Error::Invalid(format!("scale k = {k}, need k >= 2")));
    }
    if coeffs.len() < 2 {
        return Err(Error::Invalid(format!(
            "need at least two coefficients, got {}",
            coeffs.len()
        )));
    }
    let n_max = coeffs.len() - 1;
    let q = n_max.div_ceil(k - 1) - 1;
    let d = q + 1;

    let entry = |i: usize, h: usize, j: usize| -> f64 {
        let idx = i as isize + (k * h) as isize - j as isize;
        if idx < 0 || idx > n_max as isize {
            0.0
        } else {
            coeffs[idx as usize]
        }
    };
    let matrices: Vec<Mat<f64>> = (0..k)
        .map(|i| Mat::from_fn(d, d, |h, j| entry(i, h, j)))
        .collect();

    let coeff_sum: f64 = coeffs.iter().sum();
    let parity_balanced = (k == 2).then(|| {
        let even: f64 = coeffs.iter().step_by(2).sum();
        let odd: f64 = coeffs.iter().skip(1).step_by(2).sum();
        (even - odd).abs() <= 1e-12 * (coeff_sum.abs() + 1.0)
    });

    // Default seed: fixed vector of the averaged digit matrix when power
    // iteration finds one, else uniform mass.
    let mean = {
        let mut acc = Mat::<f64>::zeros(d, d);
        for b in &matrices {
            acc = acc.add(b);
        }
        acc.scale(&(1.0 / k as f64))
    };
    let uniform = vec![1.0 / d as f64; d];
    let (seed, seed_stationary) = if mean.is_nonnegative() {
        match perron_vector(&mean, 1e-14, 100_000) {
            Ok(v) => {
                let residual: f64 = (0..d)
                    .map(|i| {
                        let row: f64 = (0..d).map(|j| mean.at(i, j) * v[j]).sum();
                        (row - v[i]).abs()
                    })
                    .sum();
                if residual <= 1e-10 {
                    (v, true)
                } else {
                    (uniform, false)
                }
            }
            Err(_) => (uniform, false),
        }
    } else {
        (uniform, false)
    };

    Ok(RefinementSystem {
        base: k,
        coeffs: coeffs.to_vec(),
        order: q,
        matrices,
        seed,
        seed_stationary,
        coeff_sum,
        parity_balanced,
    })
}

impl RefinementSystem {
    pub fn set_seed(&mut self, seed: Vec<f64>) -> Result<()> {
        if seed.len() != self.order + 1 {
            return Err(Error::DimensionMismatch {
                expected: format!("{}", self.order + 1),
                got: format!("{}", seed.len()),
                context: "refinement seed",
            });
        }
        self.seed = seed;
        self.seed_stationary = false;
        Ok(())
    }
}

fn digits_of(x: f64, k: usize, n: usize) -> Vec<usize> {
    let mut frac = x;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let scaled = frac * k as f64;
        let d = (scaled.floor() as isize).clamp(0, k as isize - 1) as usize;
        out.push(d);
        frac = scaled - d as f64;
    }
    out
}

fn apply(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d)
        .map(|i| (0..d).map(|j| m.at(i, j) * v[j]).sum())
        .collect()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// psi truncated after `depth` digits, together with the truncation five
/// steps shallower. The digit product accumulates left to right so both
/// truncations share their prefix.
fn truncations(sys: &RefinementSystem, digits: &[usize], depth: usize) -> (Vec<f64>, Vec<f64>) {
    let d = sys.order + 1;
    let mut p = Mat::<f64>::identity(d);
    let mut shallow = sys.seed.clone();
    for (step, &digit) in digits.iter().take(depth).enumerate() {
        p = p.mul(&sys.matrices[digit]);
        if step + 1 == depth.saturating_sub(5) {
            shallow = apply(&p, &sys.seed);
        }
    }
    let psi = apply(&p, &sys.seed);
    if depth <= 5 {
        shallow = sys.seed.clone();
    }
    (psi, shallow)
}

fn check_depth(depth: usize) -> Result<()> {
    if depth > 60 {
        return Err(Error::Invalid(format!("depth {depth} exceeds 60")));
    }
    if depth < 6 {
        return Err(Error::Invalid(format!("depth {depth} too shallow for a gap estimate")));
    }
    Ok(())
}

/// Evaluate the curve on a grid by truncated digit products.
///
/// Digits are extracted in floating point, so grid values should be exact
/// in base k or the deepest digits go to rounding noise; the reported gap
/// reflects whatever the truncations actually did.
pub fn sample_curve(sys: &RefinementSystem, xs: &[f64], depth: usize) -> Result<Vec<CurveSample>> {
    check_depth(depth)?;
    xs.iter()
        .map(|&x| {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::Invalid(format!("grid point {x} outside [0, 1)")));
            }
            let digits = digits_of(x, sys.base, depth);
            let (psi, shallow) = truncations(sys, &digits, depth);
            let gap = l1(&diff(&psi, &shallow));
            Ok(CurveSample { x, psi, gap })
        })
        .collect()
}

/// Check the two structural identities a refinable solution must satisfy:
/// the digit-shift relation at the sampled points, and agreement of the
/// one-sided limits where neighbouring subdivision intervals meet.
///
/// Both sides of the shift relation are truncated at the same depth, so
/// the residual measures one extra digit of truncation, not the identity
/// rearranged into itself. Sample points are used with their canonical
/// digit expansion; points with a second expansion at this depth should
/// be submitted in both forms if both matter.
pub fn residual_checks(
    sys: &RefinementSystem,
    x_samples: &[f64],
    depth: usize,
) -> Result<ResidualReport> {
    check_depth(depth)?;
    let k = sys.base;

    let mut residual: f64 = 0.0;
    let mut truncation_gap: f64 = 0.0;
    for &x in x_samples {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::Invalid(format!("sample {x} outside [0, 1)")));
        }
        let digits = digits_of(x, k, depth + 1);
        let (psi_x, shallow) = truncations(sys, &digits[..depth], depth);
        truncation_gap = truncation_gap.max(l1(&diff(&psi_x, &shallow)));
        // kx - i has the same digit stream shifted by one.
        let (psi_y, _) = truncations(sys, &digits[1..], depth);
        let mapped = apply(&sys.matrices[digits[0]], &psi_y);
        residual = residual.max(l1(&diff(&psi_x, &mapped)));
    }

    // One-sided limits at x = (i+1)/k: from the left the digits end in
    // (k-1) repeated, from the right in 0 repeated.
    let deep_power = |m: &Mat<f64>| -> (Vec<f64>, f64) {
        let mut v = sys.seed.clone();
        let mut prev = v.clone();
        for step in 0..depth {
            if step == depth - 5 {
                prev = v.clone();
            }
            v = apply(m, &v);
        }
        let gap = l1(&diff(&v, &prev));
        (v, gap)
    };
    let (tail_high, gap_high) = deep_power(&sys.matrices[k - 1]);
    let (tail_low, gap_low) = deep_power(&sys.matrices[0]);
    let endpoint_truncation = gap_high.max(gap_low);
    let endpoint_gaps: Vec<f64> = (0..k - 1)
        .map(|i| {
            let left = apply(&sys.matrices[i], &tail_high);
            let right = apply(&sys.matrices[i + 1], &tail_low);
            l1(&diff(&left, &right))
        })
        .collect();

    Ok(ResidualReport {
        self_similarity_residual: residual,
        truncation_gap,
        endpoint_gaps,
        endpoint_truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernoulli::build_representation;
    use crate::rng::SplitMix;

    fn hat_system() -> RefinementSystem {
        build_refinement_matrices(2, &[0.5, 1.0, 0.5]).unwrap()
    }

    /// Tent over [0, 2]: the exact solution of the halving scheme.
    fn hat(x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            x
        } else if (1.0..=2.0).contains(&x) {
            2.0 - x
        } else {
            0.0
        }
    }

    #[test]
    fn index_rule_fills_the_matrices() {
        let sys = hat_system();
        assert_eq!(sys.order, 1);
        assert_eq!(
            sys.matrices[0],
            Mat::from_rows(vec![vec![0.5, 0.0], vec![0.5, 1.0]])
        );
        assert_eq!(
            sys.matrices[1],
            Mat::from_rows(vec![vec![1.0, 0.5], vec![0.0, 0.5]])
        );
        assert_eq!(sys.coeff_sum, 2.0);
        assert_eq!(sys.parity_balanced, Some(true));
        assert!(sys.seed_stationary);
        assert!((sys.seed[0] - 0.5).abs() < 1e-12);
        assert!((sys.seed[1] - 0.5).abs() < 1e-12);

        let flat = build_refinement_matrices(2, &[1.0, 1.0]).unwrap();
        assert_eq!(flat.order, 0);
        assert_eq!(*flat.matrices[0].at(0, 0), 1.0);
        assert_eq!(*flat.matrices[1].at(0, 0), 1.0);
    }

    #[test]
    fn scalar_system_is_the_indicator() {
        let sys = build_refinement_matrices(2, &[1.0, 1.0]).unwrap();
        let samples = sample_curve(&sys, &[0.0, 0.3, 0.75], 40).unwrap();
        for s in &samples {
            assert_eq!(s.psi, vec![1.0]);
            assert_eq!(s.gap, 0.0);
        }
        let report = residual_checks(&sys, &[0.1, 0.6], 40).unwrap();
        assert_eq!(report.self_similarity_residual, 0.0);
        assert_eq!(report.endpoint_gaps, vec![0.0]);
    }

    #[test]
    fn base_three_scalar_system_samples_flat() {
        let sys = build_refinement_matrices(3, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(sys.order, 0);
        let report = residual_checks(&sys, &[0.1, 0.5, 0.9], 30).unwrap();
        assert_eq!(report.self_similarity_residual, 0.0);
        assert_eq!(report.endpoint_gaps, vec![0.0, 0.0]);
    }

    #[test]
    fn hat_values_at_dyadic_points() {
        let sys = hat_system();
        let samples = sample_curve(&sys, &[0.0, 0.5, 0.25], 40).unwrap();
        // psi(x) = (hat(x), hat(x+1)).
        let expect = [[0.0, 1.0], [0.5, 0.5], [0.25, 0.75]];
        for (s, e) in samples.iter().zip(expect) {
            assert!((s.psi[0] - e[0]).abs() < 1e-9, "{:?}", s);
            assert!((s.psi[1] - e[1]).abs() < 1e-9);
            assert!(s.gap < 1e-9);
        }
    }

    #[test]
    fn hat_matches_the_analytic_solution() {
        let sys = hat_system();
        let mut rng = SplitMix::new(0x4A7);
        let xs: Vec<f64> = (0..50).map(|_| rng.uniform()).collect();
        let samples = sample_curve(&sys, &xs, 40).unwrap();
        for s in &samples {
            assert!((s.psi[0] - hat(s.x)).abs() < 1e-8, "x = {}", s.x);
            assert!((s.psi[1] - hat(s.x + 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn hat_residuals_sit_inside_the_truncation_gap() {
        let sys = hat_system();
        let mut rng = SplitMix::new(0x51D);
        let xs: Vec<f64> = (0..50).map(|_| rng.uniform()).collect();
        let report = residual_checks(&sys, &xs, 40).unwrap();
        assert!(report.self_similarity_residual < 1e-8, "{report:?}");
        assert!(
            report.self_similarity_residual <= 3.0 * report.truncation_gap + 1e-12,
            "{report:?}"
        );
        for g in &report.endpoint_gaps {
            assert!(*g < 1e-9);
        }
        assert!(report.endpoint_truncation < 1e-9);
    }

    #[test]
    fn broken_coefficients_report_an_endpoint_mismatch() {
        let sys = build_refinement_matrices(2, &[1.0, 0.5]).unwrap();
        let report = residual_checks(&sys, &[0.3, 0.7], 40).unwrap();
        assert!(report.endpoint_gaps[0] > 0.1, "{report:?}");
    }

    #[test]
    fn doubled_weights_recover_the_measure_matrices() {
        let sys = hat_system();
        let spec = build_representation::<f64>(2, &[0.25, 0.5, 0.25]).unwrap();
        for (b, m) in sys.matrices.iter().zip(&spec.mats) {
            assert_eq!(*b, m.scale(&2.0));
        }
        for j in 0..2 {
            assert!((sys.seed[j] - spec.c_nu.at(j, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn riemann_sums_return_the_stationary_mass() {
        let sys = hat_system();
        let d = sys.order + 1;

        // Depth equal to the grid level: the average over the grid applies
        // the averaged matrix to its own fixed vector, so it reproduces the
        // seed up to rounding.
        let level = 8usize;
        let cells = 1usize << level;
        let grid: Vec<f64> = (0..cells).map(|m| m as f64 / cells as f64).collect();
        let shallow = sample_curve(&sys, &grid, level.max(6)).unwrap();
        let mut avg = vec![0.0; d];
        for s in &shallow {
            for j in 0..d {
                avg[j] += s.psi[j] / cells as f64;
            }
        }
        for j in 0..d {
            assert!((avg[j] - sys.seed[j]).abs() < 1e-10, "{avg:?}");
        }

        // Deep truncation on a fine grid: Riemann sums of the curve against
        // the interval masses of the underlying measure.
        let level = 14usize;
        let cells = 1usize << level;
        let grid: Vec<f64> = (0..cells).map(|m| m as f64 / cells as f64).collect();
        let deep = sample_curve(&sys, &grid, 40).unwrap();
        let mut avg = vec![0.0; d];
        for s in &deep {
            for j in 0..d {
                avg[j] += s.psi[j] / cells as f64;
            }
        }
        let spec = build_representation::<f64>(2, &[0.25, 0.5, 0.25]).unwrap();
        for j in 0..d {
            assert!((avg[j] - spec.c_nu.at(j, 0)).abs() < 1e-4, "{avg:?}");
        }
    }

    #[test]
    fn out_of_range_inputs_are_rejected() {
        assert!(build_refinement_matrices(1, &[1.0, 1.0]).is_err());
        assert!(build_refinement_matrices(2, &[1.0]).is_err());
        let sys = hat_system();
        assert!(sample_curve(&sys, &[0.5], 61).is_err());
        assert!(sample_curve(&sys, &[0.5], 3).is_err());
        assert!(sample_curve(&sys, &[1.0], 40).is_err());
        assert!(sys.clone().set_seed(vec![1.0]).is_err());
    }
}
