//! Finite-N log-gas Langevin dynamics
//! `dX^i = dB^i - (1/2) Phi'(X^i) dt + (beta/2) sum_{j != i} dt / (X^i - X^j)`
//! and stationarity diagnostics.
//!
//! Each replica draws its Brownian increments from its own counter-mode
//! stream, so trajectories do not depend on thread scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{confinement_gradient, sample_replicas, EnsembleSpec, SamplerMethod, ScalingKind};
use crate::error::{domain, invalid, Error, Result};
use crate::rng::{derive_seed, replica_stream, ReplicaRng};
use crate::stats::{quantile_sorted, Moments};

/// Most consecutive halvings of one step before giving up.
pub const MAX_HALVINGS: u32 = 20;

// Salt separating the noise streams from the initial-sample streams.
const NOISE_SALT: u64 = 0x5DE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeState {
    pub positions: Vec<f64>,
    pub time: f64,
    pub accepted: u64,
    pub halvings: u64,
}

impl SdeState {
    /// Sorts `positions`; rejects non-finite or coincident points.
    pub fn new(mut positions: Vec<f64>) -> Result<Self> {
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(invalid("positions must be finite"));
        }
        positions.sort_by(f64::total_cmp);
        if !strictly_ordered(&positions) {
            return Err(domain("coincident positions"));
        }
        Ok(Self {
            positions,
            time: 0.0,
            accepted: 0,
            halvings: 0,
        })
    }
}

fn strictly_ordered(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1]) && xs.iter().all(|x| x.is_finite())
}

/// Diagnostic switches for [`simulate_isde`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsFlags {
    pub noise: bool,
    /// Reverse the confinement force; a negative control.
    pub flip_confinement: bool,
}

impl Default for DynamicsFlags {
    fn default() -> Self {
        Self {
            noise: true,
            flip_confinement: false,
        }
    }
}

/// Drift of particle `i`: `-(1/2) Phi'(x_i) + (beta/2) sum_{j != i} 1/(x_i - x_j)`.
pub fn drift(positions: &[f64], beta: f64, n: usize, kind: ScalingKind) -> Result<Vec<f64>> {
    drift_with(positions, beta, n, kind, false)
}

fn drift_with(positions: &[f64], beta: f64, n: usize, kind: ScalingKind, flip: bool) -> Result<Vec<f64>> {
    let sign = if flip { -1.0 } else { 1.0 };
    let mut out: Vec<f64> = positions
        .iter()
        .map(|&x| -0.5 * sign * confinement_gradient(beta, n, kind, x))
        .collect();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = positions[i] - positions[j];
            if d == 0.0 {
                return Err(domain(format!("coincident positions at index {i} and {j}")));
            }
            let f = 0.5 * beta / d;
            out[i] += f;
            out[j] -= f;
        }
    }
    Ok(out)
}

/// `1e-3 (mean gap)^2`.
pub fn default_dt(positions: &[f64]) -> f64 {
    if positions.len() < 2 {
        return 1e-3;
    }
    let gap = (positions[positions.len() - 1] - positions[0]) / (positions.len() - 1) as f64;
    1e-3 * gap * gap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub beta: f64,
    pub n: usize,
    pub kind: ScalingKind,
    pub dt: f64,
    pub t_end: f64,
    /// Record every `record_every` steps.
    pub record_every: usize,
    pub flags: DynamicsFlags,
}

impl SimParams {
    fn validate(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(invalid(format!("T = {} must be >= dt = {}", self.t_end, self.dt)));
        }
        if self.record_every == 0 {
            return Err(invalid("record interval must be >= 1 step"));
        }
        if !(self.beta > 0.0) {
            return Err(invalid(format!("beta = {} must be positive", self.beta)));
        }
        // The last step is shortened so the run ends exactly at T.
        Ok((self.t_end / self.dt * (1.0 - 1e-12)).ceil() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accepted: u64,
    pub halvings: u64,
}

impl Trajectory {
    pub fn final_positions(&self) -> &[f64] {
        self.states.last().map_or(&[], |s| s.as_slice())
    }

    /// One row per recorded time: `time,x1,...,xN`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("time");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for x in s {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        out
    }
}

struct Stepper<'a> {
    p: &'a SimParams,
    rng: ReplicaRng,
    halvings: u64,
}

impl Stepper<'_> {
    fn normals(&mut self, n: usize, sd: f64) -> Vec<f64> {
        (0..n).map(|_| sd * self.rng.sample::<f64, _>(StandardNormal)).collect()
    }

    /// Advance `x` by `h` with Brownian increment `dw`. A step that breaks
    /// the ordering is split in two, the midpoint of the increment drawn
    /// from the Brownian bridge.
    fn advance(&mut self, x: &[f64], h: f64, dw: &[f64], depth: u32, t: f64) -> Result<Vec<f64>> {
        let b = drift_with(x, self.p.beta, self.p.n, self.p.kind, self.p.flags.flip_confinement)?;
        let y: Vec<f64> = x.iter().zip(&b).zip(dw).map(|((x, b), w)| x + b * h + w).collect();
        if strictly_ordered(&y) {
            return Ok(y);
        }
        if depth == MAX_HALVINGS {
            return Err(Error::StepFailure {
                time: t,
                halvings: depth,
                state: x.to_vec(),
            });
        }
        self.halvings += 1;
        let bridge = if self.p.flags.noise {
            self.normals(x.len(), (h / 4.0).sqrt())
        } else {
            vec![0.0; x.len()]
        };
        let first: Vec<f64> = dw.iter().zip(&bridge).map(|(w, z)| 0.5 * w + z).collect();
        let second: Vec<f64> = dw.iter().zip(&first).map(|(w, f)| w - f).collect();
        let mid = self.advance(x, h / 2.0, &first, depth + 1, t)?;
        self.advance(&mid, h / 2.0, &second, depth + 1, t + h / 2.0)
    }
}

/// Euler-Maruyama from `init` up to `t_end` with noise stream `replica`
/// under `seed`.
pub fn simulate_isde(init: &SdeState, params: &SimParams, seed: u64, replica: u64) -> Result<Trajectory> {
    let steps = params.validate()?;
    let mut st = Stepper {
        p: params,
        rng: replica_stream(derive_seed(seed, NOISE_SALT), replica),
        halvings: 0,
    };
    let mut x = init.positions.clone();
    let mut times = vec![init.time];
    let mut states = vec![x.clone()];
    for k in 1..=steps {
        let h = if k == steps {
            params.t_end - (k - 1) as f64 * params.dt
        } else {
            params.dt
        };
        let dw = if params.flags.noise {
            st.normals(x.len(), h.sqrt())
        } else {
            vec![0.0; x.len()]
        };
        x = st.advance(&x, h, &dw, 0, init.time + (k - 1) as f64 * params.dt)?;
        debug_assert!(strictly_ordered(&x));
        if k % params.record_every == 0 || k == steps {
            times.push(init.time + if k == steps { params.t_end } else { k as f64 * params.dt });
            states.push(x.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        accepted: init.accepted + steps as u64,
        halvings: init.halvings + st.halvings,
    })
}

/// Per-replica summary statistics compared by [`invariance_report`].
const STAT_NAMES: [&str; 7] = [
    "max_mean",
    "max_var",
    "sumsq_mean",
    "sumsq_var",
    "nn_gap_q10",
    "nn_gap_q50",
    "nn_gap_q90",
];

fn nn_gaps(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut g: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i > 0 { xs[i] - xs[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < n { xs[i + 1] - xs[i] } else { f64::INFINITY };
            left.min(right)
        })
        .collect();
    g.sort_by(f64::total_cmp);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceParams {
    pub beta: f64,
    pub n: usize,
    pub kind: ScalingKind,
    pub dt: f64,
    pub t_end: f64,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub flags: DynamicsFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceStat {
    pub name: String,
    pub initial: f64,
    pub r#final: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub params: InvarianceParams,
    pub stats: Vec<InvarianceStat>,
    pub max_abs_z: f64,
    pub pass: bool,
    pub halvings: u64,
}

/// Start every replica from an exact ensemble sample, evolve to `t_end`,
/// and compare initial and final statistics. Means are compared through
/// paired per-replica differences; variances through squared deviations
/// from the pooled mean.
pub fn invariance_report(params: &InvarianceParams) -> Result<InvarianceReport> {
    if params.replicas < 2 {
        return Err(invalid("need at least 2 replicas"));
    }
    if params.n < 2 {
        return Err(invalid("invariance report needs n >= 2"));
    }
    if !(params.t_end >= 0.0) {
        return Err(invalid("T must be >= 0"));
    }
    let spec = EnsembleSpec::new(
        params.beta,
        params.n,
        params.kind,
        SamplerMethod::Tridiagonal,
        params.seed,
    )?;
    let init = sample_replicas(&spec, params.replicas)?;
    let sim = SimParams {
        beta: params.beta,
        n: params.n,
        kind: params.kind,
        dt: params.dt,
        t_end: params.t_end,
        record_every: usize::MAX,
        flags: params.flags,
    };
    let runs: Vec<(Vec<f64>, Vec<f64>, u64)> = init
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let start = c.reals();
            if params.t_end == 0.0 {
                return Ok((start.clone(), start, 0));
            }
            let tr = simulate_isde(&SdeState::new(start.clone())?, &sim, params.seed, i as u64)?;
            Ok((start, tr.final_positions().to_vec(), tr.halvings))
        })
        .collect::<Result<_>>()?;

    let summary = |xs: &[f64]| -> [f64; 5] {
        let g = nn_gaps(xs);
        [
            xs[xs.len() - 1],
            xs.iter().map(|x| x * x).sum(),
            quantile_sorted(&g, 0.1),
            quantile_sorted(&g, 0.5),
            quantile_sorted(&g, 0.9),
        ]
    };
    let a: Vec<[f64; 5]> = runs.iter().map(|r| summary(&r.0)).collect();
    let b: Vec<[f64; 5]> = runs.iter().map(|r| summary(&r.1)).collect();

    let paired = |f: &dyn Fn(usize) -> (f64, f64)| -> (f64, f64, f64, f64) {
        let d: Moments = (0..a.len())
            .map(|i| {
                let (u, v) = f(i);
                v - u
            })
            .collect();
        let u: Moments = (0..a.len()).map(|i| f(i).0).collect();
        let v: Moments = (0..a.len()).map(|i| f(i).1).collect();
        let z = if d.mean() == 0.0 { 0.0 } else { d.mean() / d.stderr() };
        (u.mean(), v.mean(), d.stderr(), z)
    };
    let mut stats = Vec::new();
    let mut push = |name: &str, r: (f64, f64, f64, f64)| {
        stats.push(InvarianceStat {
            name: name.into(),
            initial: r.0,
            r#final: r.1,
            stderr: r.2,
            z: r.3,
        });
    };
    for (k, names) in [
        (0usize, (STAT_NAMES[0], STAT_NAMES[1])),
        (1, (STAT_NAMES[2], STAT_NAMES[3])),
    ] {
        push(names.0, paired(&|i| (a[i][k], b[i][k])));
        let pooled = (a.iter().map(|s| s[k]).sum::<f64>() + b.iter().map(|s| s[k]).sum::<f64>()) / (2 * a.len()) as f64;
        let (u, v, se, z) = paired(&|i| ((a[i][k] - pooled).powi(2), (b[i][k] - pooled).powi(2)));
        let m = a.len() as f64;
        // Report unbiased variances; z uses the squared deviations.
        push(names.1, (u * m / (m - 1.0), v * m / (m - 1.0), se, z));
    }
    for (k, name) in STAT_NAMES[4..].iter().enumerate() {
        push(name, paired(&|i| (a[i][k + 2], b[i][k + 2])));
    }
    let max_abs_z = stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max);
    Ok(InvarianceReport {
        params: params.clone(),
        stats,
        max_abs_z,
        pass: max_abs_z <= 3.0,
        halvings: runs.iter().map(|r| r.2).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config_space::Configuration;
    use crate::ensembles::log_density;
    use proptest::prelude::*;

    #[test]
    fn drift_examples() {
        let d = drift(&[2.0], 2.0, 1, ScalingKind::Raw).unwrap();
        assert_eq!(d, vec![-1.0]);
        let d = drift(&[-0.7, 0.7], 2.0, 2, ScalingKind::Raw).unwrap();
        assert_eq!(d[0], -d[1]);
        assert!(drift(&[1.0, 1.0], 2.0, 2, ScalingKind::Raw).is_err());
    }

    #[test]
    fn ornstein_uhlenbeck_variance() {
        // dX = dB - (beta/4) X dt: stationary variance 2/beta.
        let p = SimParams {
            beta: 2.0,
            n: 1,
            kind: ScalingKind::Raw,
            dt: 1e-2,
            t_end: 20_000.0,
            record_every: 100,
            flags: DynamicsFlags::default(),
        };
        let tr = simulate_isde(&SdeState::new(vec![0.0]).unwrap(), &p, 4, 0).unwrap();
        // Recorded every unit of time; autocorrelation exp(-t/2) between
        // records, so batch means of 100 records are nearly independent.
        let xs: Vec<f64> = tr.states.iter().skip(20).map(|s| s[0]).collect();
        let batches: Moments = xs
            .chunks(100)
            .map(|c| c.iter().map(|x| x * x).sum::<f64>() / c.len() as f64)
            .collect();
        // Euler-Maruyama variance for this OU is 1/(1 - dt/4).
        let exact = 1.0 / (1.0 - p.dt / 4.0);
        assert!(
            (batches.mean() - exact).abs() <= 3.0 * batches.stderr(),
            "{} +- {}",
            batches.mean(),
            batches.stderr()
        );
    }

    fn short(noise: bool) -> SimParams {
        SimParams {
            beta: 2.0,
            n: 5,
            kind: ScalingKind::Raw,
            dt: 1e-3,
            t_end: 0.1,
            record_every: 10,
            flags: DynamicsFlags {
                noise,
                flip_confinement: false,
            },
        }
    }

    #[test]
    fn deterministic_and_label_free() {
        let a = SdeState::new(vec![-1.0, 0.3, 2.0, -2.2, 1.1]).unwrap();
        let b = SdeState::new(vec![1.1, -2.2, 2.0, 0.3, -1.0]).unwrap();
        let ta = simulate_isde(&a, &short(true), 8, 3).unwrap();
        let tb = simulate_isde(&b, &short(true), 8, 3).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(ta.times.len(), 11);
        assert_eq!(ta.times[10], 10.0 * (10.0 * 1e-3));
        assert_ne!(ta, simulate_isde(&a, &short(true), 9, 3).unwrap());
    }

    #[test]
    fn deterministic_gap_grows_when_close() {
        let s = SdeState::new(vec![-0.01, 0.01]).unwrap();
        let mut p = short(false);
        p.n = 2;
        let tr = simulate_isde(&s, &p, 0, 0).unwrap();
        let gaps: Vec<f64> = tr.states.iter().map(|x| x[1] - x[0]).collect();
        assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
    }

    #[test]
    fn halving_rescues_near_collisions() {
        // The middle point's drift is about -1000: a full step throws it
        // past the left neighbour.
        let s = SdeState::new(vec![-1.0, 0.0, 1e-3]).unwrap();
        let p = SimParams {
            n: 3,
            dt: 1e-2,
            t_end: 1e-2,
            record_every: 1,
            ..short(false)
        };
        let tr = simulate_isde(&s, &p, 0, 0).unwrap();
        assert!(tr.halvings > 0);
        assert!(tr.states.iter().all(|x| strictly_ordered(x)));
    }

    #[test]
    fn validation() {
        let s = SdeState::new(vec![0.0]).unwrap();
        assert!(simulate_isde(&s, &SimParams { dt: 0.0, ..short(true) }, 0, 0).is_err());
        assert!(simulate_isde(
            &s,
            &SimParams {
                t_end: 1e-4,
                ..short(true)
            },
            0,
            0
        )
        .is_err());
        assert!(SdeState::new(vec![1.0, 1.0]).is_err());
    }

    fn inv(t_end: f64, flip: bool) -> InvarianceParams {
        InvarianceParams {
            beta: 2.0,
            n: 8,
            kind: ScalingKind::Raw,
            dt: 1e-3,
            t_end,
            replicas: 100,
            seed: 5,
            flags: DynamicsFlags {
                noise: true,
                flip_confinement: flip,
            },
        }
    }

    #[test]
    fn zero_time_gives_zero_z() {
        let r = invariance_report(&inv(0.0, false)).unwrap();
        assert!(r.stats.iter().all(|s| s.z == 0.0));
        assert_eq!(r.stats.len(), STAT_NAMES.len());
    }

    #[test]
    fn flipped_confinement_is_detected() {
        let r = invariance_report(&inv(1.0, true)).unwrap();
        assert!(r.max_abs_z > 10.0, "{}", r.max_abs_z);
        assert!(!r.pass);
    }

    fn ordered(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, n).prop_map(|gaps| {
            let mut x = -2.0;
            gaps.iter()
                .map(|g| {
                    x += g;
                    x
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn drift_is_half_log_density_gradient(xs in ordered(6), kind_ix in 0usize..3) {
            let kind = [ScalingKind::Raw, ScalingKind::Bulk, ScalingKind::SoftEdge][kind_ix];
            let beta = 2.0;
            let n = xs.len();
            let d = drift(&xs, beta, n, kind).unwrap();
            let h = 1e-5;
            for i in 0..n {
                let mut up = xs.clone();
                up[i] += h;
                let mut dn = xs.clone();
                dn[i] -= h;
                let f = |v: Vec<f64>| log_density(beta, n, kind, &Configuration::from_reals(v)).unwrap();
                let fd = 0.5 * (f(up) - f(dn)) / (2.0 * h);
                prop_assert!((fd - d[i]).abs() <= 1e-6 * d[i].abs().max(1.0), "i={i}: {fd} vs {}", d[i]);
            }
        }
    }
}
