//! Gaussian model estimation and sampling for FOS elements.
//!
//! Each element estimates a maximum-likelihood Gaussian over its variables
//! and parents from the selection, and samples its variables from the
//! conditional distribution given the parent values read from the solution
//! undergoing variation. Adaptive variance scaling and the anticipated mean
//! shift follow the AMaLGaM conventions.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)] // used by the no_std build for float intrinsics
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::conditional::Factorization;
use crate::linalg::{regularized_factor, Factor, SymMatrix};

/// Distribution multiplier clamp range.
pub const MULTIPLIER_MIN: f64 = 1e-10;
pub const MULTIPLIER_MAX: f64 = 1e3;
/// Multiplier decrease factor (increase is its reciprocal).
pub const DEFAULT_AVS_DECAY: f64 = 0.9;
/// Standard-deviation-ratio threshold for multiplier growth.
pub const DEFAULT_SDR_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SamplerError {
    /// Fewer than two selected solutions.
    SelectionTooSmall,
    /// A parent value passed to conditional sampling was not finite.
    NonFiniteParent,
}

impl fmt::Display for SamplerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerError::SelectionTooSmall => write!(f, "selection smaller than 2"),
            SamplerError::NonFiniteParent => write!(f, "non-finite parent value"),
        }
    }
}

/// Per-element Gaussian sampler estimated from the current selection.
///
/// The mean and covariance are laid out over `[variables..., parents...]`.
/// The conditional pieces (regression coefficients onto the parents and the
/// Cholesky factor of the Schur complement) are precomputed once per
/// estimate.
#[derive(Debug, Clone)]
pub struct ElementSampler {
    pub variables: Vec<usize>,
    pub parents: Vec<usize>,
    pub mean: Vec<f64>,
    pub covariance: SymMatrix,
    /// Regression coefficients B = Sigma_pp^-1 Sigma_pv (parents x vars).
    regression: Vec<f64>,
    /// Factor of the conditional covariance Sigma_vv - Sigma_vp B.
    conditional_factor: Factor,
    conditional_covariance: SymMatrix,
}

/// Maximum-likelihood estimate (biased 1/|S| covariance) over the union of
/// `variables` and `parents`, restricted to those coordinates.
pub fn estimate(
    selection: &[&[f64]],
    variables: &[usize],
    parents: &[usize],
) -> Result<ElementSampler, SamplerError> {
    if selection.len() < 2 {
        return Err(SamplerError::SelectionTooSmall);
    }
    let coords: Vec<usize> = variables.iter().chain(parents.iter()).copied().collect();
    let d = coords.len();
    let count = selection.len() as f64;
    let mut mean = vec![0.0; d];
    for genotype in selection {
        for (m, &c) in mean.iter_mut().zip(&coords) {
            *m += genotype[c];
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    let mut covariance = SymMatrix::zeros(d);
    for genotype in selection {
        for a in 0..d {
            let da = genotype[coords[a]] - mean[a];
            for b in a..d {
                let db = genotype[coords[b]] - mean[b];
                let v = covariance.get(a, b) + da * db;
                covariance.set(a, b, v);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            covariance.set(a, b, covariance.get(a, b) / count);
        }
    }
    Ok(ElementSampler::from_moments(
        variables.to_vec(),
        parents.to_vec(),
        mean,
        covariance,
    ))
}

impl ElementSampler {
    /// Builds a sampler from explicit moments (layout `[variables, parents]`).
    pub fn from_moments(
        variables: Vec<usize>,
        parents: Vec<usize>,
        mean: Vec<f64>,
        covariance: SymMatrix,
    ) -> Self {
        let kv = variables.len();
        let kp = parents.len();
        debug_assert_eq!(mean.len(), kv + kp);
        debug_assert_eq!(covariance.dim(), kv + kp);
        let var_idx: Vec<usize> = (0..kv).collect();
        let par_idx: Vec<usize> = (kv..kv + kp).collect();
        // regression coefficients onto parents: solve Sigma_pp B = Sigma_pv
        let mut regression = covariance.submatrix(&par_idx, &var_idx);
        if kp > 0 {
            let mut pp = SymMatrix::zeros(kp);
            for a in 0..kp {
                for b in 0..kp {
                    pp.set(a, b, covariance.get(kv + a, kv + b));
                }
            }
            let pp_factor = regularized_factor(&pp);
            let mut column = vec![0.0; kp];
            for v in 0..kv {
                for p in 0..kp {
                    column[p] = regression[p * kv + v];
                }
                pp_factor.solve_in_place(&mut column);
                for p in 0..kp {
                    regression[p * kv + v] = column[p];
                }
            }
        }
        // Schur complement: Sigma_vv - Sigma_vp B
        let mut conditional_covariance = SymMatrix::zeros(kv);
        for a in 0..kv {
            for b in a..kv {
                let mut value = covariance.get(a, b);
                for p in 0..kp {
                    value -= covariance.get(a, kv + p) * regression[p * kv + b];
                }
                conditional_covariance.set(a, b, value);
            }
        }
        let conditional_factor = regularized_factor(&conditional_covariance);
        ElementSampler {
            variables,
            parents,
            mean,
            covariance,
            regression,
            conditional_factor,
            conditional_covariance,
        }
    }

    pub fn conditional_covariance(&self) -> &SymMatrix {
        &self.conditional_covariance
    }

    /// Conditional mean of the variables given parent values.
    pub fn conditional_mean(&self, parent_values: &[f64]) -> Vec<f64> {
        let kv = self.variables.len();
        let mut mean = self.mean[..kv].to_vec();
        for (p, &xp) in parent_values.iter().enumerate() {
            let dp = xp - self.mean[kv + p];
            for (v, m) in mean.iter_mut().enumerate() {
                *m += self.regression[p * kv + v] * dp;
            }
        }
        mean
    }

    /// Draws the element's variables from the conditional Gaussian scaled by
    /// the distribution multiplier; also returns the underlying
    /// standard-normal draw (used by the SDR bookkeeping).
    pub fn sample_conditional_with_z<R: Rng>(
        &self,
        parent_values: &[f64],
        multiplier: f64,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Vec<f64>), SamplerError> {
        debug_assert_eq!(parent_values.len(), self.parents.len());
        if !parent_values.iter().all(|x| x.is_finite()) {
            return Err(SamplerError::NonFiniteParent);
        }
        let kv = self.variables.len();
        let mut values = self.conditional_mean(parent_values);
        let z: Vec<f64> = (0..kv).map(|_| rng.sample(StandardNormal)).collect();
        let mut scaled = vec![0.0; kv];
        self.conditional_factor.transform(&z, &mut scaled);
        let scale = multiplier.sqrt();
        for (value, s) in values.iter_mut().zip(&scaled) {
            *value += scale * s;
        }
        Ok((values, z))
    }

    /// Conditional draw without the SDR bookkeeping.
    pub fn sample_conditional<R: Rng>(
        &self,
        parent_values: &[f64],
        multiplier: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>, SamplerError> {
        self.sample_conditional_with_z(parent_values, multiplier, rng)
            .map(|(values, _)| values)
    }
}

/// Samples a complete genotype with one forward pass over the factorization,
/// each factor conditioned on the already-sampled values of its parents.
pub fn forward_sample<R: Rng>(
    factorization: &Factorization,
    samplers: &[ElementSampler],
    base_genotype: &[f64],
    multiplier: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SamplerError> {
    forward_sample_with_z(factorization, samplers, base_genotype, multiplier, rng)
        .map(|(genotype, _)| genotype)
}

/// Forward sampling that also returns the standard-normal draws of all
/// factors concatenated in factor order (for the SDR bookkeeping).
pub fn forward_sample_with_z<R: Rng>(
    factorization: &Factorization,
    samplers: &[ElementSampler],
    base_genotype: &[f64],
    multiplier: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), SamplerError> {
    debug_assert_eq!(factorization.factors.len(), samplers.len());
    let mut genotype = base_genotype.to_vec();
    let mut zs = Vec::with_capacity(genotype.len());
    for (factor, sampler) in factorization.factors.iter().zip(samplers) {
        let parent_values: Vec<f64> =
            factor.parents.iter().map(|&p| genotype[p]).collect();
        let (values, z) =
            sampler.sample_conditional_with_z(&parent_values, multiplier, rng)?;
        zs.extend_from_slice(&z);
        for (&v, &x) in factor.variables.iter().zip(&values) {
            genotype[v] = x;
        }
    }
    Ok((genotype, zs))
}

/// Per-element adaptive-variance-scaling state; persists across generations.
#[derive(Debug, Clone, PartialEq)]
pub struct AvsState {
    pub multiplier: f64,
    /// Element-level no-improvement stretch.
    pub nis_element: u32,
}

impl Default for AvsState {
    fn default() -> Self {
        AvsState { multiplier: 1.0, nis_element: 0 }
    }
}

/// Outcome of one element's GOM pass over the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ImprovementInfo {
    /// Some accepted step improved the elitist objective.
    pub improved_elitist: bool,
    /// Some elitist-improving draw lay beyond the SDR threshold.
    pub sdr_exceeded: bool,
}

/// Accumulates the whitened draws behind elitist improvements over one
/// element pass. The standard-deviation ratio is the largest component of
/// the mean displacement: improvements that consistently land beyond one
/// standard deviation of the sampling distribution signal that the
/// distribution lags the landscape and its scale should grow.
#[derive(Debug, Clone, Default)]
pub struct SdrAccumulator {
    sums: Vec<f64>,
    count: usize,
}

impl SdrAccumulator {
    pub fn record(&mut self, z: &[f64]) {
        if self.sums.len() < z.len() {
            self.sums.resize(z.len(), 0.0);
        }
        for (sum, &zi) in self.sums.iter_mut().zip(z) {
            *sum += zi;
        }
        self.count += 1;
    }

    pub fn improvement_info(&self, threshold: f64) -> ImprovementInfo {
        if self.count == 0 {
            return ImprovementInfo::default();
        }
        let sdr = self
            .sums
            .iter()
            .map(|s| (s / self.count as f64).abs())
            .fold(0.0f64, f64::max);
        ImprovementInfo { improved_elitist: true, sdr_exceeded: sdr > threshold }
    }
}

/// Adaptive variance scaling: grow the multiplier when elitist improvements
/// come from draws beyond one standard deviation, decay it toward one when
/// the element stops improving.
pub fn adapt_variance(state: &mut AvsState, info: ImprovementInfo, decay: f64) {
    if info.improved_elitist {
        state.nis_element = 0;
        if info.sdr_exceeded {
            state.multiplier /= decay;
        }
    } else {
        state.nis_element = state.nis_element.saturating_add(1);
        if state.multiplier > 1.0 {
            state.multiplier *= decay;
        }
    }
    state.multiplier = state.multiplier.clamp(MULTIPLIER_MIN, MULTIPLIER_MAX);
}

/// Anticipated-mean-shift state: the previous generation's selection-mean
/// displacement, applied to a fraction of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct AmsState {
    pub mean_shift: Vec<f64>,
    pub ams_fraction: f64,
    pub ams_multiplier: f64,
}

impl AmsState {
    pub fn new(dimension: usize, ams_fraction: f64, ams_multiplier: f64) -> Self {
        assert!(ams_fraction > 0.0 && ams_fraction < 1.0);
        AmsState { mean_shift: vec![0.0; dimension], ams_fraction, ams_multiplier }
    }

    /// Number of solutions receiving AMS out of a population of `n`.
    pub fn shift_count(&self, n: usize) -> usize {
        (self.ams_fraction * n as f64).ceil() as usize
    }

    pub fn is_zero(&self) -> bool {
        self.mean_shift.iter().all(|&s| s == 0.0)
    }

    /// Records the displacement between consecutive selection means.
    pub fn update(&mut self, previous_mean: &[f64], current_mean: &[f64]) {
        for ((shift, &prev), &cur) in
            self.mean_shift.iter_mut().zip(previous_mean).zip(current_mean)
        {
            *shift = cur - prev;
        }
    }
}

/// Adds `ams_multiplier * multiplier * mean_shift` to the genotype.
pub fn apply_ams(genotype: &mut [f64], ams: &AmsState, multiplier: f64) {
    for (x, &shift) in genotype.iter_mut().zip(&ams.mean_shift) {
        *x += ams.ams_multiplier * multiplier * shift;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fos::FosElement;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn two_point_estimate_matches_hand_values() {
        let a = [0.0, 0.0];
        let b = [2.0, 2.0];
        let sel: Vec<&[f64]> = vec![&a, &b];
        let s = estimate(&sel, &[0, 1], &[]).unwrap();
        assert_eq!(s.mean, vec![1.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(s.covariance.get(i, j), 1.0);
            }
        }
    }

    #[test]
    fn selection_of_one_is_rejected() {
        let a = [0.0];
        let sel: Vec<&[f64]> = vec![&a];
        assert!(matches!(
            estimate(&sel, &[0], &[]),
            Err(SamplerError::SelectionTooSmall)
        ));
    }

    #[test]
    fn constant_selection_regularizes_to_point_draws() {
        let a = [3.0, -1.0];
        let sel: Vec<&[f64]> = vec![&a, &a, &a];
        let s = estimate(&sel, &[0, 1], &[]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (values, _) = s.sample_conditional_with_z(&[], 1.0, &mut rng).unwrap();
        assert!((values[0] - 3.0).abs() < 1e-6);
        assert!((values[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn estimate_matches_two_pass_oracle() {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let sel: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = estimate(&sel, &[1, 3], &[0]).unwrap();
        // naive two-pass recomputation over coordinates [1, 3, 0]
        let coords = [1usize, 3, 0];
        let n = rows.len() as f64;
        for (k, &c) in coords.iter().enumerate() {
            let mean: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            assert!((s.mean[k] - mean).abs() < 1e-12);
            for (l, &d) in coords.iter().enumerate() {
                let mean_d: f64 = rows.iter().map(|r| r[d]).sum::<f64>() / n;
                let cov: f64 =
                    rows.iter().map(|r| (r[c] - mean) * (r[d] - mean_d)).sum::<f64>() / n;
                assert!((s.covariance.get(k, l) - cov).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_covariance_ignores_parents() {
        let mean = vec![1.0, -2.0, 5.0];
        let mut cov = SymMatrix::zeros(3);
        cov.set(0, 0, 2.0);
        cov.set(1, 1, 3.0);
        cov.set(2, 2, 4.0);
        let s = ElementSampler::from_moments(vec![0, 1], vec![2], mean, cov);
        let cm = s.conditional_mean(&[50.0]);
        assert_eq!(cm, vec![1.0, -2.0]);
        assert_eq!(s.conditional_covariance().get(0, 0), 2.0);
        assert_eq!(s.conditional_covariance().get(1, 1), 3.0);
    }

    #[test]
    fn perfectly_correlated_pair_collapses() {
        let mean = vec![0.0, 0.0];
        let mut cov = SymMatrix::zeros(2);
        cov.set(0, 0, 1.0);
        cov.set(1, 1, 1.0);
        cov.set(0, 1, 1.0);
        let s = ElementSampler::from_moments(vec![0], vec![1], mean, cov);
        let cm = s.conditional_mean(&[1.5]);
        assert!((cm[0] - 1.5).abs() < 1e-6);
        assert!(s.conditional_covariance().get(0, 0).abs() < 1e-6);
    }

    #[test]
    fn conditional_moments_match_schur_oracle_by_monte_carlo() {
        // known 3-variable Gaussian, conditioned on the last coordinate
        let mean = vec![1.0, -1.0, 2.0];
        let cov_rows: [[f64; 3]; 3] =
            [[2.0, 0.6, 0.8], [0.6, 1.5, -0.4], [0.8, -0.4, 1.2]];
        let mut cov = SymMatrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                cov.set(i, j, cov_rows[i][j]);
            }
        }
        let s = ElementSampler::from_moments(vec![0, 1], vec![2], mean.clone(), cov);
        let xp = 2.9;
        // analytic conditional by the textbook formulas (1x1 parent block)
        let spp = cov_rows[2][2];
        let exp_mean = [
            mean[0] + cov_rows[0][2] / spp * (xp - mean[2]),
            mean[1] + cov_rows[1][2] / spp * (xp - mean[2]),
        ];
        let exp_var = [
            cov_rows[0][0] - cov_rows[0][2] * cov_rows[0][2] / spp,
            cov_rows[1][1] - cov_rows[1][2] * cov_rows[1][2] / spp,
        ];
        let n = 100_000usize;
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut sums = [0.0f64; 2];
        let mut sq = [0.0f64; 2];
        for _ in 0..n {
            let (v, _) = s.sample_conditional_with_z(&[xp], 1.0, &mut rng).unwrap();
            for k in 0..2 {
                sums[k] += v[k];
                sq[k] += v[k] * v[k];
            }
        }
        for k in 0..2 {
            let m = sums[k] / n as f64;
            let var = sq[k] / n as f64 - m * m;
            let se_mean = (exp_var[k] / n as f64).sqrt();
            let se_var = exp_var[k] * (2.0 / (n as f64 - 1.0)).sqrt();
            assert!(
                (m - exp_mean[k]).abs() < 3.0 * se_mean,
                "mean[{k}]: {m} vs {}",
                exp_mean[k]
            );
            assert!(
                (var - exp_var[k]).abs() < 3.0 * se_var,
                "var[{k}]: {var} vs {}",
                exp_var[k]
            );
        }
    }

    #[test]
    fn non_finite_parent_is_an_error() {
        let mean = vec![0.0, 0.0];
        let mut cov = SymMatrix::zeros(2);
        cov.set(0, 0, 1.0);
        cov.set(1, 1, 1.0);
        let s = ElementSampler::from_moments(vec![0], vec![1], mean, cov);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        assert!(matches!(
            s.sample_conditional(&[f64::NAN], 1.0, &mut rng),
            Err(SamplerError::NonFiniteParent)
        ));
    }

    #[test]
    fn forward_sample_assigns_every_coordinate_once() {
        use crate::conditional::{factorize, FactorizationKind};
        use crate::problems::make_problem;
        let problem = make_problem("rebgrid", 9).unwrap();
        let f = factorize(problem.analytic_vig().unwrap(), FactorizationKind::MCond, 8);
        // distinct means per factor so assignment is visible
        let samplers: Vec<ElementSampler> = f
            .factors
            .iter()
            .map(|factor| {
                let d = factor.variables.len() + factor.parents.len();
                let mean: Vec<f64> =
                    factor.variables.iter().chain(&factor.parents).map(|&v| v as f64).collect();
                ElementSampler::from_moments(
                    factor.variables.clone(),
                    factor.parents.clone(),
                    mean,
                    SymMatrix::zeros(d),
                )
            })
            .collect();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let base = vec![f64::NAN; 9];
        let g = forward_sample(&f, &samplers, &base, 1.0, &mut rng).unwrap();
        for (v, &x) in g.iter().enumerate() {
            assert!((x - v as f64).abs() < 1e-9, "coordinate {v} got {x}");
        }
    }

    #[test]
    fn forward_sample_on_edgeless_vig_is_marginal_sampling() {
        use crate::conditional::{factorize, FactorizationKind};
        use crate::vig::Vig;
        let f = factorize(&Vig::new(3), FactorizationKind::UCond, 0);
        let samplers: Vec<ElementSampler> = f
            .factors
            .iter()
            .map(|factor| {
                let mut cov = SymMatrix::zeros(1);
                cov.set(0, 0, 1.0);
                ElementSampler::from_moments(
                    factor.variables.clone(),
                    Vec::new(),
                    vec![10.0 * factor.variables[0] as f64],
                    cov,
                )
            })
            .collect();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut sums = [0.0f64; 3];
        let n = 20_000;
        for _ in 0..n {
            let g = forward_sample(&f, &samplers, &[0.0; 3], 1.0, &mut rng).unwrap();
            for k in 0..3 {
                sums[k] += g[k];
            }
        }
        for k in 0..3 {
            let m = sums[k] / n as f64;
            assert!((m - 10.0 * k as f64).abs() < 3.0 / (n as f64).sqrt() * 3.0);
        }
    }

    #[test]
    fn conditional_covariance_stays_psd_on_random_spd_inputs() {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(123);
        for _ in 0..1000 {
            let d = rng.random_range(2..=8);
            let kv = rng.random_range(1..d);
            // SPD = A A^T + tiny ridge
            let mut m = SymMatrix::zeros(d);
            let a: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            for i in 0..d {
                for j in i..d {
                    let mut acc = 0.0;
                    for k in 0..d {
                        acc += a[i * d + k] * a[j * d + k];
                    }
                    m.set(i, j, acc + if i == j { 1e-9 } else { 0.0 });
                }
            }
            let s = ElementSampler::from_moments(
                (0..kv).collect(),
                (kv..d).collect(),
                vec![0.0; d],
                m,
            );
            let cc = s.conditional_covariance();
            let min_eig = jacobi_min_eigenvalue(cc);
            assert!(min_eig >= -1e-10, "min eigenvalue {min_eig}");
        }
    }

    /// Jacobi eigenvalue iteration (test oracle, small symmetric matrices).
    fn jacobi_min_eigenvalue(m: &SymMatrix) -> f64 {
        let n = m.dim();
        let mut a: Vec<f64> = (0..n * n)
            .map(|idx| m.get(idx / n, idx % n))
            .collect();
        for _ in 0..100 {
            // find largest off-diagonal
            let (mut p, mut q, mut max) = (0, 1, 0.0f64);
            for i in 0..n {
                for j in i + 1..n {
                    if a[i * n + j].abs() > max {
                        max = a[i * n + j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if max < 1e-14 {
                break;
            }
            let app = a[p * n + p];
            let aqq = a[q * n + q];
            let apq = a[p * n + q];
            let theta = 0.5 * (2.0 * apq).atan2(app - aqq);
            let (s, c) = theta.sin_cos();
            for k in 0..n {
                let akp = a[k * n + p];
                let akq = a[k * n + q];
                a[k * n + p] = c * akp - s * akq;
                a[k * n + q] = s * akp + c * akq;
            }
            for k in 0..n {
                let apk = a[p * n + k];
                let aqk = a[q * n + k];
                a[p * n + k] = c * apk - s * aqk;
                a[q * n + k] = s * apk + c * aqk;
            }
        }
        (0..n).map(|i| a[i * n + i]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn estimate_sample_round_trip_recovers_moments() {
        // sample 10^6 draws from a known 2-D Gaussian via the sampler, then
        // re-estimate and compare
        let mean = vec![0.3, -0.7];
        let mut cov = SymMatrix::zeros(2);
        cov.set(0, 0, 1.0);
        cov.set(1, 1, 0.5);
        cov.set(0, 1, 0.4);
        let s = ElementSampler::from_moments(vec![0, 1], vec![], mean.clone(), cov.clone());
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let draws: Vec<Vec<f64>> = (0..1_000_000)
            .map(|_| s.sample_conditional(&[], 1.0, &mut rng).unwrap())
            .collect();
        let sel: Vec<&[f64]> = draws.iter().map(|d| d.as_slice()).collect();
        let re = estimate(&sel, &[0, 1], &[]).unwrap();
        for k in 0..2 {
            assert!((re.mean[k] - mean[k]).abs() < 1e-2);
            for l in 0..2 {
                assert!((re.covariance.get(k, l) - cov.get(k, l)).abs() < 5e-2);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_under_a_fixed_stream() {
        let mean = vec![0.0, 1.0];
        let mut cov = SymMatrix::zeros(2);
        cov.set(0, 0, 1.0);
        cov.set(1, 1, 2.0);
        cov.set(0, 1, 0.5);
        let s = ElementSampler::from_moments(vec![0, 1], vec![], mean, cov);
        let mut r1 = ChaCha12Rng::seed_from_u64(42);
        let mut r2 = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..10 {
            let a = s.sample_conditional(&[], 1.3, &mut r1).unwrap();
            let b = s.sample_conditional(&[], 1.3, &mut r2).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn avs_decay_and_growth_rules() {
        let mut state = AvsState::default();
        // repeated no-improvement from 1.0: stays at 1.0
        for _ in 0..5 {
            adapt_variance(
                &mut state,
                ImprovementInfo { improved_elitist: false, sdr_exceeded: false },
                DEFAULT_AVS_DECAY,
            );
        }
        assert_eq!(state.multiplier, 1.0);
        assert_eq!(state.nis_element, 5);
        // repeated far improvements: grows by 1/0.9 per step until clamped
        for _ in 0..200 {
            adapt_variance(
                &mut state,
                ImprovementInfo { improved_elitist: true, sdr_exceeded: true },
                DEFAULT_AVS_DECAY,
            );
        }
        assert_eq!(state.multiplier, MULTIPLIER_MAX);
        assert_eq!(state.nis_element, 0);
        // and decays by 0.9 per step once above 1 without improvement
        let before = state.multiplier;
        adapt_variance(
            &mut state,
            ImprovementInfo { improved_elitist: false, sdr_exceeded: false },
            DEFAULT_AVS_DECAY,
        );
        assert_eq!(state.multiplier, before * DEFAULT_AVS_DECAY);
    }

    #[test]
    fn avs_matches_scalar_reference_simulation() {
        // 20-step mixed sequence, hand-simulated rule
        let seq = [
            (true, true),
            (false, false),
            (true, false),
            (false, false),
            (true, true),
            (true, true),
            (false, false),
            (false, false),
            (true, true),
            (false, false),
            (true, false),
            (true, true),
            (false, false),
            (false, false),
            (false, false),
            (true, true),
            (true, true),
            (true, true),
            (false, false),
            (true, false),
        ];
        let mut state = AvsState::default();
        let mut reference = 1.0f64;
        for &(improved, far) in &seq {
            adapt_variance(
                &mut state,
                ImprovementInfo { improved_elitist: improved, sdr_exceeded: far },
                DEFAULT_AVS_DECAY,
            );
            if improved {
                if far {
                    reference /= DEFAULT_AVS_DECAY;
                }
            } else if reference > 1.0 {
                reference *= DEFAULT_AVS_DECAY;
            }
            reference = reference.clamp(MULTIPLIER_MIN, MULTIPLIER_MAX);
            assert_eq!(state.multiplier, reference);
        }
    }

    #[test]
    fn ams_shift_application() {
        let mut ams = AmsState::new(3, 0.175, 2.0);
        let mut genotype = vec![1.0, 2.0, 3.0];
        apply_ams(&mut genotype, &ams, 1.0);
        assert_eq!(genotype, vec![1.0, 2.0, 3.0]);
        ams.update(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(ams.mean_shift, vec![1.0, 0.0, 0.0]);
        apply_ams(&mut genotype, &ams, 1.0);
        assert_eq!(genotype, vec![3.0, 2.0, 3.0]);
        assert_eq!(ams.shift_count(100), 18);
    }

    #[test]
    fn element_union_layout_is_variables_then_parents() {
        let e = FosElement::new(vec![5, 2], vec![7]);
        assert_eq!(e.variables, vec![2, 5]);
        let rows: Vec<Vec<f64>> = vec![
            vec![0.0; 8],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        ];
        let sel: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = estimate(&sel, &e.variables, &e.parents).unwrap();
        assert_eq!(s.mean, vec![1.5, 3.0, 4.0]);
    }
}
