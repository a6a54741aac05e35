//! Gaussian beta-ensembles: eigenvalue sampling, bulk/soft-edge scalings
//! and the labeled log-density
//!
//! ```text
//! p(x) ∝ prod_{i<j} |x_i - x_j|^beta * exp(-sum_i Phi(x_i))
//! ```
//!
//! with `Phi(x) = (beta/4) x^2` before scaling.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_space::Configuration;
use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigenvalues, tridiagonal_eigenvalues, SymMatrix};
use crate::rng::{replica_stream, ReplicaRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    /// Eigenvalues as sampled.
    Raw,
    /// `lambda -> lambda / sqrt(n)`; the spectrum fills `[-2, 2]`.
    Bulk,
    /// `lambda -> n^{1/6} (lambda - 2 sqrt(n))`, zoom on the upper edge.
    SoftEdge,
}

impl std::str::FromStr for ScalingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ScalingKind::Raw),
            "bulk" => Ok(ScalingKind::Bulk),
            "softedge" | "soft-edge" => Ok(ScalingKind::SoftEdge),
            other => Err(invalid(format!("unknown scaling `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    /// Full GOE/GUE/GSE matrix, Householder + QL.
    Dense,
    /// Random tridiagonal beta-Hermite model; any `beta > 0`.
    Tridiagonal,
}

impl std::str::FromStr for SamplerMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(SamplerMethod::Dense),
            "tridiagonal" | "tridiag" => Ok(SamplerMethod::Tridiagonal),
            other => Err(invalid(format!("unknown sampler method `{other}`"))),
        }
    }
}

/// Identifies one finite-N approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub beta: f64,
    pub n: usize,
    pub scaling: ScalingKind,
    pub method: SamplerMethod,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(beta: f64, n: usize, scaling: ScalingKind, method: SamplerMethod, seed: u64) -> Result<Self> {
        let spec = Self {
            beta,
            n,
            scaling,
            method,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("ensemble size n must be >= 1"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid(format!("beta = {} must be positive", self.beta)));
        }
        if self.method == SamplerMethod::Dense && ![1.0, 2.0, 4.0].contains(&self.beta) {
            return Err(invalid(format!(
                "dense sampler needs beta in {{1, 2, 4}}, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

fn normal(rng: &mut ReplicaRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Eigenvalues (unscaled, ascending) for replica 0 of `spec`.
pub fn sample_gaussian_beta(spec: &EnsembleSpec) -> Result<Configuration> {
    sample_replica(spec, 0)
}

/// Eigenvalues (unscaled, ascending) for the given replica stream.
pub fn sample_replica(spec: &EnsembleSpec, replica: u64) -> Result<Configuration> {
    spec.validate()?;
    let mut rng = replica_stream(spec.seed, replica);
    let eigs = match spec.method {
        SamplerMethod::Dense => dense_eigenvalues(spec, &mut rng),
        SamplerMethod::Tridiagonal => tridiagonal_model_eigenvalues(spec, &mut rng),
    }
    .map_err(|index| Error::NonConvergence {
        seed: spec.seed,
        replica,
        index,
        iterations: crate::linalg::QL_MAX_ITER,
    })??;
    Ok(Configuration::from_reals(eigs))
}

/// Scaled sample for one replica.
pub fn sample_scaled(spec: &EnsembleSpec, replica: u64) -> Result<Configuration> {
    let raw = sample_replica(spec, replica)?;
    Ok(apply_scaling(&raw, spec.n, spec.scaling))
}

/// `count` scaled replicas, sampled in parallel. Output order follows the
/// replica index and is independent of the thread count.
pub fn sample_replicas(spec: &EnsembleSpec, count: usize) -> Result<Vec<Configuration>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_scaled(spec, i))
        .collect()
}

type EigResult = std::result::Result<Result<Vec<f64>>, usize>;

fn dense_eigenvalues(spec: &EnsembleSpec, rng: &mut ReplicaRng) -> EigResult {
    let n = spec.n;
    match spec.beta as u32 {
        1 => {
            // diag ~ N(0,2), off ~ N(0,1): density exp(-tr H^2 / 4).
            let mut h = SymMatrix::zeros(n);
            for i in 0..n {
                h.set_sym(i, i, std::f64::consts::SQRT_2 * normal(rng));
                for j in 0..i {
                    h.set_sym(i, j, normal(rng));
                }
            }
            symmetric_eigenvalues(h).map(Ok).map_err(|e| e.index)
        }
        2 => {
            // diag ~ N(0,1), Re/Im off ~ N(0,1/2): density exp(-tr H^2 / 2).
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut re = SymMatrix::zeros(n);
            let mut im = vec![0.0; n * n];
            for i in 0..n {
                re.set_sym(i, i, normal(rng));
                for j in 0..i {
                    re.set_sym(i, j, s * normal(rng));
                    let b = s * normal(rng);
                    im[i * n + j] = b;
                    im[j * n + i] = -b;
                }
            }
            hermitian_eigenvalues(&re, &im, 1)
        }
        4 => {
            // Quaternion self-dual, entries q = a + b i + c j + d k written as
            // 2x2 complex blocks [[a+ib, c+id], [-c+id, a-ib]].
            // diag a ~ N(0,1/2); off components ~ N(0,1/4): density exp(-tr_q H^2).
            let m = 2 * n;
            let mut re = SymMatrix::zeros(m);
            let mut im = vec![0.0; m * m];
            let put = |i: usize, j: usize, z: Complex64, re: &mut SymMatrix, im: &mut Vec<f64>| {
                // Hermitian: (i,j) = z, (j,i) = conj(z).
                re.set_sym(i, j, z.re);
                im[i * m + j] = z.im;
                im[j * m + i] = -z.im;
            };
            for i in 0..n {
                let a = std::f64::consts::FRAC_1_SQRT_2 * normal(rng);
                re.set_sym(2 * i, 2 * i, a);
                re.set_sym(2 * i + 1, 2 * i + 1, a);
                for j in 0..i {
                    let (a, b, c, d) = (
                        0.5 * normal(rng),
                        0.5 * normal(rng),
                        0.5 * normal(rng),
                        0.5 * normal(rng),
                    );
                    // block for q_ij sits at rows 2i.., cols 2j..
                    put(2 * i, 2 * j, Complex64::new(a, b), &mut re, &mut im);
                    put(2 * i, 2 * j + 1, Complex64::new(c, d), &mut re, &mut im);
                    put(2 * i + 1, 2 * j, Complex64::new(-c, d), &mut re, &mut im);
                    put(2 * i + 1, 2 * j + 1, Complex64::new(a, -b), &mut re, &mut im);
                }
            }
            hermitian_eigenvalues(&re, &im, 2)
        }
        _ => unreachable!("validated"),
    }
}

/// Eigenvalues of the Hermitian matrix `re + i*im` via the real symmetric
/// embedding `[[A, -B], [B, A]]`, whose spectrum is that of the Hermitian
/// matrix with every eigenvalue doubled. `multiplicity` is the extra
/// degeneracy already present in the Hermitian spectrum (2 for the
/// quaternion representation). Each distinct eigenvalue is kept once.
fn hermitian_eigenvalues(re: &SymMatrix, im: &[f64], multiplicity: usize) -> EigResult {
    let m = re.dim();
    let mut big = SymMatrix::zeros(2 * m);
    for i in 0..m {
        for j in 0..=i {
            let a = re.get(i, j);
            big.set_sym(i, j, a);
            big.set_sym(m + i, m + j, a);
        }
        for j in 0..m {
            // lower-left block B; upper-right block -B = B^T.
            big.set_sym(m + i, j, im[i * m + j]);
        }
    }
    let ev = symmetric_eigenvalues(big).map_err(|e| e.index)?;
    Ok(collapse_groups(&ev, 2 * multiplicity))
}

/// Replace consecutive groups of `k` (near-)equal eigenvalues by their mean,
/// checking the spread against `1e-8 * spectral radius`.
fn collapse_groups(ev: &[f64], k: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(ev.len() % k, 0);
    let radius = ev.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-8 * radius;
    ev.chunks_exact(k)
        .map(|g| {
            let spread = g[k - 1] - g[0];
            if spread > tol {
                Err(Error::Pairing(format!(
                    "eigenvalue group {g:?} spread {spread:e} exceeds tolerance {tol:e}"
                )))
            } else {
                Ok(g.iter().sum::<f64>() / k as f64)
            }
        })
        .collect()
}

/// Beta-Hermite tridiagonal model rescaled to the density
/// `exp(-(beta/4) sum x^2)`: diagonal `N(0, 2/beta)`, off-diagonal
/// `chi_{beta k} / sqrt(beta)` for `k = n-1, ..., 1`.
fn tridiagonal_model_eigenvalues(spec: &EnsembleSpec, rng: &mut ReplicaRng) -> EigResult {
    let n = spec.n;
    let beta = spec.beta;
    let diag_sd = (2.0 / beta).sqrt();
    let d: Vec<f64> = (0..n).map(|_| diag_sd * normal(rng)).collect();
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in (1..n).rev() {
        let chi2 = ChiSquared::new(beta * k as f64).expect("positive degrees of freedom");
        off.push((chi2.sample(rng) / beta).sqrt());
    }
    tridiagonal_eigenvalues(d, &off).map(Ok).map_err(|e| e.index)
}

/// Map one raw eigenvalue to the scaled coordinate.
pub fn scale_point(lambda: f64, n: usize, kind: ScalingKind) -> f64 {
    let nf = n as f64;
    match kind {
        ScalingKind::Raw => lambda,
        ScalingKind::Bulk => lambda / nf.sqrt(),
        ScalingKind::SoftEdge => nf.powf(1.0 / 6.0) * (lambda - 2.0 * nf.sqrt()),
    }
}

/// Inverse of [`scale_point`].
pub fn unscale_point(x: f64, n: usize, kind: ScalingKind) -> f64 {
    let nf = n as f64;
    match kind {
        ScalingKind::Raw => x,
        ScalingKind::Bulk => x * nf.sqrt(),
        ScalingKind::SoftEdge => 2.0 * nf.sqrt() + x * nf.powf(-1.0 / 6.0),
    }
}

pub fn apply_scaling(eigs: &Configuration, n: usize, kind: ScalingKind) -> Configuration {
    Configuration::from_reals(eigs.iter().map(|z| scale_point(z.re, n, kind)))
}

/// Free potential of the scaled coordinate, normalisation constants
/// dropped. For the soft edge this is the expanded exponent
/// `(beta/4)(n^{-1/3} x^2 + 4 n^{1/3} x)`, i.e. `(beta/4)|2 sqrt(n) +
/// n^{-1/6} x|^2` with the constant `beta n` removed.
pub fn confinement(beta: f64, n: usize, kind: ScalingKind, x: f64) -> f64 {
    let nf = n as f64;
    match kind {
        ScalingKind::Raw => 0.25 * beta * x * x,
        ScalingKind::Bulk => 0.25 * beta * nf * x * x,
        ScalingKind::SoftEdge => 0.25 * beta * (nf.powf(-1.0 / 3.0) * x * x + 4.0 * nf.cbrt() * x),
    }
}

/// Derivative of [`confinement`] in `x`.
pub fn confinement_gradient(beta: f64, n: usize, kind: ScalingKind, x: f64) -> f64 {
    let nf = n as f64;
    match kind {
        ScalingKind::Raw => 0.5 * beta * x,
        ScalingKind::Bulk => 0.5 * beta * nf * x,
        ScalingKind::SoftEdge => 0.25 * beta * (2.0 * nf.powf(-1.0 / 3.0) * x + 4.0 * nf.cbrt()),
    }
}

/// Log of the labeled density up to an additive constant:
/// `beta sum_{i<j} log|x_i - x_j| - sum_i Phi(x_i)`.
/// Coincident points give `-inf`.
pub fn log_density(beta: f64, n: usize, kind: ScalingKind, config: &Configuration) -> Result<f64> {
    if config.len() != n {
        return Err(invalid(format!(
            "log_density: configuration has {} points, expected {n}",
            config.len()
        )));
    }
    if !config.is_real() {
        return Err(invalid("log_density: points must be real"));
    }
    let xs = config.reals();
    let mut pair = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (xs[i] - xs[j]).abs();
            if gap == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            pair += gap.ln();
        }
    }
    let free: f64 = xs.iter().map(|&x| confinement(beta, n, kind, x)).sum();
    Ok(beta * pair - free)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(beta: f64, n: usize, method: SamplerMethod, seed: u64) -> EnsembleSpec {
        EnsembleSpec::new(beta, n, ScalingKind::Raw, method, seed).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(EnsembleSpec::new(2.0, 0, ScalingKind::Raw, SamplerMethod::Dense, 1).is_err());
        assert!(EnsembleSpec::new(3.0, 5, ScalingKind::Raw, SamplerMethod::Dense, 1).is_err());
        assert!(EnsembleSpec::new(3.0, 5, ScalingKind::Raw, SamplerMethod::Tridiagonal, 1).is_ok());
        assert!(EnsembleSpec::new(-1.0, 5, ScalingKind::Raw, SamplerMethod::Tridiagonal, 1).is_err());
    }

    #[test]
    fn deterministic_and_sorted() {
        for method in [SamplerMethod::Dense, SamplerMethod::Tridiagonal] {
            for beta in [1.0, 2.0, 4.0] {
                let s = spec(beta, 17, method, 99);
                let a = sample_gaussian_beta(&s).unwrap();
                let b = sample_gaussian_beta(&s).unwrap();
                assert_eq!(
                    a.reals().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                    b.reals().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
                );
                assert_eq!(a.len(), 17);
                assert!(a.reals().windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn scaling_examples() {
        let n = 37;
        let edge = 2.0 * (n as f64).sqrt();
        assert!(scale_point(edge, n, ScalingKind::SoftEdge).abs() < 1e-12);
        assert!((scale_point(edge, n, ScalingKind::Bulk) - 2.0).abs() < 1e-15);
        assert_eq!(scale_point(1.7, n, ScalingKind::Raw), 1.7);
        for x in [-30.0, -1.3, 0.0, 2.5] {
            let back = scale_point(unscale_point(x, n, ScalingKind::SoftEdge), n, ScalingKind::SoftEdge);
            assert!((back - x).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn softedge_exponent_expansion() {
        let beta = 2.0;
        for n in [10usize, 200, 5000] {
            let nf = n as f64;
            for x in [-50.0, -3.2, 0.0, 1.1, 4.0] {
                let full = 0.25 * beta * (2.0 * nf.sqrt() + nf.powf(-1.0 / 6.0) * x).powi(2) - 0.25 * beta * 4.0 * nf;
                let expanded = confinement(beta, n, ScalingKind::SoftEdge, x);
                assert!(
                    (full - expanded).abs() <= 1e-9 * (1.0 + full.abs()),
                    "{full} {expanded}"
                );
            }
        }
    }

    #[test]
    fn log_density_examples() {
        let two = Configuration::from_reals([0.0, 0.0]);
        assert_eq!(log_density(2.0, 2, ScalingKind::Raw, &two).unwrap(), f64::NEG_INFINITY);
        let at0 = log_density(2.0, 1, ScalingKind::Raw, &Configuration::from_reals([0.0])).unwrap();
        let at1 = log_density(2.0, 1, ScalingKind::Raw, &Configuration::from_reals([1.0])).unwrap();
        assert!((at0 - at1 - 0.5).abs() < 1e-15);
        assert!(log_density(2.0, 3, ScalingKind::Raw, &two).is_err());
    }

    #[test]
    fn log_density_ratio_matches_direct_evaluation() {
        let beta = 2.0;
        let a = Configuration::from_reals([-1.2, 0.3, 0.9]);
        let b = Configuration::from_reals([-0.4, 0.1, 1.7]);
        let direct = |xs: &[f64]| {
            let mut p = 1.0;
            for i in 0..xs.len() {
                for j in (i + 1)..xs.len() {
                    p *= (xs[i] - xs[j]).abs().powf(beta);
                }
            }
            p * (-0.25 * beta * xs.iter().map(|x| x * x).sum::<f64>()).exp()
        };
        let ratio = direct(&a.reals()) / direct(&b.reals());
        let via_log = (log_density(beta, 3, ScalingKind::Raw, &a).unwrap()
            - log_density(beta, 3, ScalingKind::Raw, &b).unwrap())
        .exp();
        assert!((ratio - via_log).abs() <= 1e-10 * ratio);
    }

    #[test]
    fn gse_pairs_collapse_cleanly() {
        let s = spec(4.0, 9, SamplerMethod::Dense, 5);
        let c = sample_gaussian_beta(&s).unwrap();
        assert_eq!(c.len(), 9);
    }

    #[test]
    fn collapse_rejects_unpaired() {
        assert!(collapse_groups(&[0.0, 1.0], 2).is_err());
        assert_eq!(collapse_groups(&[1.0, 1.0, 2.0, 2.0], 2).unwrap(), vec![1.0, 2.0]);
    }
}
