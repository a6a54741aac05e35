//! `taylor-check` and `lipschitz-check`: randomized checks of the
//! logarithmic Taylor remainder and of the Lipschitz envelope.

use clap::Args;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rpf_core::config_space::Shell;
use rpf_core::interactions::{lipschitz_bound, lipschitz_grid_sup, log_potential, taylor_tail};
use rpf_core::rng::{replica_stream, ReplicaRng};
use rpf_core::{AnnulusSequence, CompensatorSequence, Configuration};

use super::Cmd;
use crate::output::{Format, Payload};
use crate::{usage, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Real,
    Complex,
    /// Even cases real, odd cases complex.
    Mixed,
}

impl std::str::FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "real" => Ok(Domain::Real),
            "complex" => Ok(Domain::Complex),
            "mixed" => Ok(Domain::Mixed),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}

impl Domain {
    fn complex_case(self, i: usize) -> bool {
        match self {
            Domain::Real => false,
            Domain::Complex => true,
            Domain::Mixed => i % 2 == 1,
        }
    }
}

fn point(rng: &mut ReplicaRng, modulus: f64, complex: bool) -> Complex64 {
    if complex {
        Complex64::from_polar(modulus, rng.random_range(0.0..std::f64::consts::TAU))
    } else if rng.random::<bool>() {
        Complex64::new(modulus, 0.0)
    } else {
        Complex64::new(-modulus, 0.0)
    }
}

fn c_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

#[derive(Debug, Args, Serialize)]
pub struct TaylorArgs {
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Truncation order L.
    #[arg(long)]
    order: Option<usize>,
    /// Largest |x/y_j|.
    #[arg(long)]
    max_ratio: Option<f64>,
    #[arg(long)]
    max_points: Option<usize>,
    /// real | complex | mixed
    #[arg(long)]
    domain: Option<Domain>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorParams {
    pub cases: usize,
    pub seed: u64,
    pub beta: f64,
    pub order: usize,
    pub max_ratio: f64,
    pub max_points: usize,
    pub domain: Domain,
}

impl Default for TaylorParams {
    fn default() -> Self {
        Self {
            cases: 1000,
            seed: 0,
            beta: 2.0,
            order: 60,
            max_ratio: 0.9,
            max_points: 8,
            domain: Domain::Mixed,
        }
    }
}

pub struct Taylor;

/// Floating-point slack added to the analytic remainder bound: a few ulps
/// of the magnitudes entering the direct log differences.
const ROUNDOFF_ULPS: f64 = 64.0 * f64::EPSILON;

impl Cmd for Taylor {
    const NAME: &'static str = "taylor-check";
    const FORMATS: &'static [Format] = &[Format::Json];
    type Args = TaylorArgs;
    type Params = TaylorParams;

    fn run(p: &mut TaylorParams, _: Format) -> Result<Payload, CliError> {
        if p.cases == 0 || p.max_points == 0 {
            return Err(usage("cases and max-points must be >= 1"));
        }
        if !(p.max_ratio > 0.0 && p.max_ratio < 1.0) {
            return Err(usage("max-ratio must lie in (0, 1)"));
        }
        let results: Vec<(f64, f64, f64, Value)> = (0..p.cases)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_stream(p.seed, i as u64);
                let complex = p.domain.complex_case(i);
                let k = rng.random_range(1..=p.max_points);
                let ys: Vec<Complex64> = (0..k)
                    .map(|_| {
                        let m = rng.random_range(1.0..5.0);
                        point(&mut rng, m, complex)
                    })
                    .collect();
                let ymin = ys.iter().map(|y| y.norm()).fold(f64::INFINITY, f64::min);
                let u = rng.random_range(0.0..=p.max_ratio);
                let x = point(&mut rng, u * ymin, complex);
                let (value, bound) = taylor_tail(x, &ys, p.beta, p.order)?;
                let zero = Complex64::new(0.0, 0.0);
                let mut direct = 0.0;
                let mut scale = value.abs();
                for &y in &ys {
                    let a = log_potential(x, y, p.beta);
                    let b = log_potential(zero, y, p.beta);
                    direct += a - b;
                    scale += a.abs() + b.abs();
                }
                let err = (value - direct).abs();
                let case = json!({
                    "case": i, "x": c_json(x), "y": ys.iter().map(|&y| c_json(y)).collect::<Vec<_>>(),
                    "value": value, "direct": direct, "error": err, "bound": bound,
                });
                Ok((err, bound, ROUNDOFF_ULPS * scale, case))
            })
            .collect::<Result<_, CliError>>()?;
        let violations = results.iter().filter(|r| r.0 > r.1 + r.2).count();
        let worst = results
            .iter()
            .max_by(|a, b| (a.0 - a.1).total_cmp(&(b.0 - b.1)))
            .expect("cases >= 1");
        let max_err_over_bound = results
            .iter()
            .filter(|r| r.1 > 1e-10)
            .map(|r| r.0 / r.1)
            .fold(0.0, f64::max);
        Ok(Payload::Json(json!({
            "cases": p.cases,
            "violations": violations,
            "max_error_over_bound": max_err_over_bound,
            "worst_case": worst.3,
            "pass": violations == 0,
        })))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LipschitzArgs {
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed beta; default uniform on [0.5, 4] per case.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    r: Option<usize>,
    /// Fixed l0; default uniform on {2, ..., 5} per case.
    #[arg(long)]
    ell0: Option<usize>,
    #[arg(long)]
    max_points: Option<usize>,
    /// Smallest relative distance (|y| - b_r)/b_r of outer points.
    #[arg(long)]
    min_gap: Option<f64>,
    #[arg(long)]
    domain: Option<Domain>,
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzParams {
    pub cases: usize,
    pub seed: u64,
    pub beta: Option<f64>,
    pub r: usize,
    pub ell0: Option<usize>,
    pub max_points: usize,
    pub min_gap: f64,
    pub domain: Domain,
    pub cutoffs: Option<Vec<f64>>,
}

impl Default for LipschitzParams {
    fn default() -> Self {
        Self {
            cases: 1000,
            seed: 0,
            beta: None,
            r: 1,
            ell0: None,
            max_points: 6,
            min_gap: 1e-2,
            domain: Domain::Mixed,
            cutoffs: None,
        }
    }
}

pub struct Lipschitz;

impl Cmd for Lipschitz {
    const NAME: &'static str = "lipschitz-check";
    const FORMATS: &'static [Format] = &[Format::Json];
    type Args = LipschitzArgs;
    type Params = LipschitzParams;

    fn run(p: &mut LipschitzParams, _: Format) -> Result<Payload, CliError> {
        if p.cases == 0 || p.max_points == 0 || p.r == 0 {
            return Err(usage("cases, max-points and r must be >= 1"));
        }
        if !(p.min_gap > 0.0 && p.min_gap < 3.0) {
            return Err(usage("min-gap must lie in (0, 3)"));
        }
        let seq = match &p.cutoffs {
            None => AnnulusSequence::Identity,
            Some(c) => AnnulusSequence::explicit(c.clone())?,
        };
        let br = seq.b(p.r)?;
        let s_top = seq.max_index().map_or(p.r + 4, |m| m.min(p.r + 4));
        let results: Vec<(f64, f64, bool, Value)> = (0..p.cases)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_stream(p.seed, i as u64);
                let complex = p.domain.complex_case(i);
                let beta = p.beta.unwrap_or_else(|| rng.random_range(0.5..4.0));
                let ell0 = p.ell0.unwrap_or_else(|| rng.random_range(2..=5));
                let k = rng.random_range(1..=p.max_points);
                let (lg_lo, lg_hi) = (p.min_gap.ln(), 3f64.ln());
                let ys: Vec<Complex64> = (0..k)
                    .map(|_| {
                        let gap = rng.random_range(lg_lo..lg_hi).exp();
                        point(&mut rng, br * (1.0 + gap), complex)
                    })
                    .collect();
                let draw_m = |rng: &mut ReplicaRng| {
                    let re = rng.random_range(-3.0..3.0);
                    let im = if complex { rng.random_range(-3.0..3.0) } else { 0.0 };
                    Complex64::new(re, im)
                };
                let m_inf = draw_m(&mut rng);
                let finite: Vec<Complex64> = (0..p.r + 5).map(|_| draw_m(&mut rng)).collect();
                let comp = CompensatorSequence::explicit(m_inf, finite);
                let s = if s_top > p.r && rng.random_range(0..5) < 4 {
                    Shell::Index(rng.random_range(p.r + 1..=s_top))
                } else {
                    Shell::Infinite
                };
                let cfg = Configuration::from_points(ys.clone());
                let grid = lipschitz_grid_sup(&cfg, p.r, s, &seq, &comp, beta)?;
                let bound = lipschitz_bound(&cfg, p.r, s, &seq, &comp, beta, ell0)?;
                let case = json!({
                    "case": i, "beta": beta, "ell0": ell0, "s": s.to_string(),
                    "y": ys.iter().map(|&y| c_json(y)).collect::<Vec<_>>(),
                    "grid_sup": grid.value, "grid": grid.grid, "bound": bound,
                });
                Ok((grid.value, bound, grid.converged, case))
            })
            .collect::<Result<_, CliError>>()?;
        let violations = results.iter().filter(|r| r.0 > r.1 * (1.0 + 1e-12)).count();
        let ratio = |r: &(f64, f64, bool, Value)| if r.1 > 0.0 { r.0 / r.1 } else { 0.0 };
        let worst = results
            .iter()
            .max_by(|a, b| ratio(a).total_cmp(&ratio(b)))
            .expect("cases >= 1");
        Ok(Payload::Json(json!({
            "cases": p.cases,
            "violations": violations,
            "max_grid_over_bound": ratio(worst),
            "unconverged_grids": results.iter().filter(|r| !r.2).count(),
            "worst_case": worst.3,
            "pass": violations == 0,
        })))
    }
}
