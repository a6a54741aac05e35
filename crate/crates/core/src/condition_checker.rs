//! Empirical checks of the moment, tail-probability and quasi-Gibbs
//! conditions on finite-N ensembles.
//!
//! Every check samples one replica set per ensemble size, computes
//! per-replica scalars in parallel and aggregates them sequentially, so a
//! report depends only on its parameters and master seed.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::config_space::{AnnulusSequence, Configuration, Shell};
use crate::ensembles::{sample_replicas, EnsembleSpec, SamplerMethod, ScalingKind};
use crate::error::{domain, invalid, Result};
use crate::interactions::{
    first_order_term, hrk_functional, lipschitz_constants, log_potential, midpoint_grid, shell_sweep,
    CompensatorSequence,
};
use crate::rng::derive_seed;
use crate::stats::{ols_slope, quantile_sorted, Moments};

/// Extended real for reports: finite values serialise as numbers,
/// infinities as the strings `"inf"` / `"-inf"`, NaN as `"nan"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(pub f64);

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(ExtReal(x)),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(ExtReal(f64::INFINITY)),
                "-inf" => Ok(ExtReal(f64::NEG_INFINITY)),
                "nan" => Ok(ExtReal(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not an extended real: {other}"))),
            },
        }
    }
}

/// JSON value of an extended real.
pub fn ext(x: f64) -> Value {
    serde_json::to_value(ExtReal(x)).expect("extended reals always serialise")
}

/// Uniform report shape shared by all condition checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub params: Value,
    pub table: Vec<Value>,
    pub verdicts: Value,
    pub seed: u64,
    pub replicas: usize,
}

/// How compensators are chosen for an ensemble of size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompensatorModel {
    /// `m_s = m_inf = beta n^{1/3}` for every `s`.
    #[default]
    SoftEdge,
    Zero,
    Constant {
        re: f64,
        im: f64,
    },
    Explicit {
        m_inf: Complex64,
        finite: Vec<Complex64>,
    },
    /// `m_inf = beta n^{1/3}` with `m_s` centred on the sample mean of the
    /// complement sums, `s = 1..=s_max`.
    Centered {
        s_max: usize,
    },
}

impl CompensatorModel {
    pub fn sequence(
        &self,
        beta: f64,
        n: usize,
        samples: &[Configuration],
        seq: &AnnulusSequence,
    ) -> Result<CompensatorSequence> {
        Ok(match self {
            CompensatorModel::SoftEdge => CompensatorSequence::soft_edge(beta, n),
            CompensatorModel::Zero => CompensatorSequence::zero(),
            CompensatorModel::Constant { re, im } => CompensatorSequence::constant(Complex64::new(*re, *im)),
            CompensatorModel::Explicit { m_inf, finite } => CompensatorSequence::explicit(*m_inf, finite.clone()),
            CompensatorModel::Centered { s_max } => {
                let m_inf = CompensatorSequence::soft_edge(beta, n).m_inf;
                CompensatorSequence::data_centered(beta, m_inf, samples, seq, *s_max)?
            }
        })
    }

    /// Whether the sequence changes with the ensemble size.
    fn size_dependent(&self) -> bool {
        matches!(self, CompensatorModel::SoftEdge)
    }
}

/// Ensemble family swept over sizes `n_grid`. Each size uses its own seed
/// `derive_seed(seed, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub beta: f64,
    pub n_grid: Vec<usize>,
    pub scaling: ScalingKind,
    pub method: SamplerMethod,
    pub replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub seq: AnnulusSequence,
    #[serde(default)]
    pub comp: CompensatorModel,
}

impl SweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(invalid("n grid is empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n grid must be strictly increasing"));
        }
        if self.replicas < 2 {
            return Err(invalid(format!("need at least 2 replicas, got {}", self.replicas)));
        }
        for &n in &self.n_grid {
            EnsembleSpec::new(self.beta, n, self.scaling, self.method, self.seed)?;
        }
        Ok(())
    }

    pub fn spec(&self, n: usize) -> Result<EnsembleSpec> {
        EnsembleSpec::new(
            self.beta,
            n,
            self.scaling,
            self.method,
            derive_seed(self.seed, n as u64),
        )
    }

    pub fn samples(&self, n: usize) -> Result<Vec<Configuration>> {
        sample_replicas(&self.spec(n)?, self.replicas)
    }
}

fn check_ell0(ell0: usize) -> Result<()> {
    if ell0 < 2 {
        return Err(invalid(format!("ell0 = {ell0} must be >= 2")));
    }
    Ok(())
}

/// `v_{l,rs}`: `beta sum_{S_rs} 1/x^l`, plus `conj(m_r) - conj(m_s)` for `l = 1`.
pub fn v_ell(
    config: &Configuration,
    ell: usize,
    r: usize,
    s: Shell,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    beta: f64,
) -> Result<Complex64> {
    if ell == 0 {
        return Err(invalid("ell must be >= 1"));
    }
    let w = seq.shell(r, s)?;
    let mut total = Complex64::new(0.0, 0.0);
    for &x in config.restrict(&w).points() {
        if x == Complex64::new(0.0, 0.0) {
            return Err(domain("v_ell: point at the origin"));
        }
        total += x.powi(-(ell as i32));
    }
    total *= beta;
    if ell == 1 {
        total += comp.conj_diff(Shell::Index(r), s);
    }
    Ok(total)
}

/// Monte Carlo estimate of `E[sum_{|x| >= 1} |x|^{-l0}]` and its standard
/// error.
pub fn tail_integral(samples: &[Configuration], ell0: usize) -> Result<(f64, f64)> {
    check_ell0(ell0)?;
    if samples.len() < 2 {
        return Err(invalid("tail_integral needs at least 2 replicas"));
    }
    let values: Vec<f64> = samples
        .par_iter()
        .map(|c| {
            c.iter()
                .map(|z| z.norm())
                .filter(|&m| m >= 1.0)
                .map(|m| m.powi(-(ell0 as i32)))
                .sum()
        })
        .collect();
    let m: Moments = values.into_iter().collect();
    Ok((m.mean(), m.stderr()))
}

/// Parameters of the moment check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H4Params {
    pub sweep: SweepParams,
    pub ell0: usize,
    /// Bounded annuli `(r, s)`.
    pub pairs: Vec<(usize, usize)>,
    /// Indices `s` of the complement windows `S_{s inf}`.
    pub tail_s: Vec<usize>,
    pub p_max: usize,
    /// Largest allowed max/min ratio of tail integrals across sizes.
    pub tail_ratio_max: f64,
}

impl H4Params {
    pub fn new(sweep: SweepParams, ell0: usize) -> Self {
        Self {
            sweep,
            ell0,
            pairs: vec![(1, 2), (1, 3), (2, 4)],
            tail_s: (2..=6).collect(),
            p_max: 64,
            tail_ratio_max: 3.0,
        }
    }
}

/// One window of the moment check.
#[derive(Debug, Clone, Copy, PartialEq)]
struct H4Window {
    ell: usize,
    r: usize,
    s: Shell,
}

fn sup_over_p(
    config: &Configuration,
    win: H4Window,
    seq: &AnnulusSequence,
    family: &[(usize, CompensatorSequence)],
    beta: f64,
) -> Result<(f64, usize)> {
    let mut best = (f64::NEG_INFINITY, family[0].0);
    for (p, comp) in family {
        let v = v_ell(config, win.ell, win.r, win.s, seq, comp, beta)?.norm();
        if v > best.0 {
            best = (v, *p);
        }
        if win.ell >= 2 {
            // No compensator enters for l >= 2.
            break;
        }
    }
    Ok(best)
}

/// Moment check on given replica sets, one per ensemble size.
pub fn check_h4_on(samples_by_n: &[(usize, Vec<Configuration>)], params: &H4Params) -> Result<ConditionReport> {
    check_ell0(params.ell0)?;
    if params.p_max == 0 {
        return Err(invalid("p_max must be >= 1"));
    }
    for &(r, s) in &params.pairs {
        if r == 0 || r >= s {
            return Err(invalid(format!("annulus pair ({r},{s}) needs 1 <= r < s")));
        }
    }
    if params.tail_s.contains(&0) {
        return Err(invalid("complement windows need s >= 1"));
    }
    let sw = &params.sweep;
    let mut windows = Vec::new();
    for ell in 1..params.ell0 {
        for &(r, s) in &params.pairs {
            windows.push(H4Window {
                ell,
                r,
                s: Shell::Index(s),
            });
        }
        for &s in &params.tail_s {
            windows.push(H4Window {
                ell,
                r: s,
                s: Shell::Infinite,
            });
        }
    }

    let mut table = Vec::new();
    let mut tails = Vec::new();
    let mut decreasing = Vec::new();
    for (n, samples) in samples_by_n {
        if samples.len() < 2 {
            return Err(invalid("need at least 2 replicas"));
        }
        let n = *n;
        let comp = sw.comp.sequence(sw.beta, n, samples, &sw.seq)?;
        let family: Vec<(usize, CompensatorSequence)> = if sw.comp.size_dependent() {
            (1..=params.p_max)
                .map(|p| Ok((p, sw.comp.sequence(sw.beta, p, samples, &sw.seq)?)))
                .collect::<Result<_>>()?
        } else {
            vec![(n, comp)]
        };

        let (tail, tail_se) = tail_integral(samples, params.ell0)?;
        tails.push((n, tail));
        table.push(json!({
            "kind": "tail", "n": n, "ell0": params.ell0,
            "estimate": ext(tail), "stderr": ext(tail_se),
        }));

        let per_replica: Vec<Vec<(f64, usize)>> = samples
            .par_iter()
            .map(|c| {
                windows
                    .iter()
                    .map(|&w| sup_over_p(c, w, &sw.seq, &family, sw.beta))
                    .collect()
            })
            .collect::<Result<_>>()?;

        let mut norms = Vec::with_capacity(windows.len());
        for (wi, w) in windows.iter().enumerate() {
            let m: Moments = per_replica.iter().map(|v| v[wi].0).collect();
            let argmax = modal(per_replica.iter().map(|v| v[wi].1));
            norms.push((m.mean(), m.stderr()));
            table.push(json!({
                "kind": "norm", "n": n, "ell": w.ell, "r": w.r, "s": w.s.to_string(),
                "norm": ext(m.mean()), "stderr": ext(m.stderr()),
                "argmax_p": argmax, "p_candidates": if w.ell == 1 { family.len() } else { 1 },
            }));
        }

        // Complement-window norms must decrease in s, up to one standard
        // error of the paired per-replica difference.
        for ell in 2..params.ell0 {
            let idx: Vec<usize> = windows
                .iter()
                .enumerate()
                .filter(|(_, w)| w.ell == ell && w.s == Shell::Infinite)
                .map(|(i, _)| i)
                .collect();
            let mut pass = true;
            let mut steps = Vec::new();
            for pair in idx.windows(2) {
                let d: Moments = per_replica.iter().map(|v| v[pair[1]].0 - v[pair[0]].0).collect();
                let ok = d.mean() <= d.stderr();
                pass &= ok;
                steps.push(json!({"from_s": windows[pair[0]].r, "to_s": windows[pair[1]].r,
                                  "mean_diff": ext(d.mean()), "stderr": ext(d.stderr()), "ok": ok}));
            }
            let xs: Vec<f64> = idx.iter().map(|&i| windows[i].r as f64).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| norms[i].0).collect();
            let slope = if xs.len() >= 2 { ols_slope(&xs, &ys) } else { f64::NAN };
            decreasing.push(json!({"n": n, "ell": ell, "pass": pass, "slope": ext(slope), "steps": steps}));
        }
    }

    let tail_vals: Vec<f64> = tails.iter().map(|t| t.1).collect();
    let tmax = tail_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tmin = tail_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if tmin > 0.0 { tmax / tmin } else { f64::INFINITY };
    let log_n: Vec<f64> = tails.iter().map(|t| (t.0 as f64).ln()).collect();
    let log_t: Vec<f64> = tail_vals.iter().map(|t| t.ln()).collect();
    let slope = if tails.len() >= 2 {
        ols_slope(&log_n, &log_t)
    } else {
        f64::NAN
    };
    let dec_pass = decreasing.iter().all(|d| d["pass"] == json!(true));
    let verdicts = json!({
        "tail_bounded": {
            "pass": ratio <= params.tail_ratio_max,
            "max_over_min": ext(ratio),
            "threshold": params.tail_ratio_max,
            "loglog_slope": ext(slope),
        },
        "decreasing_in_s": {"pass": dec_pass, "cases": decreasing},
    });
    Ok(ConditionReport {
        condition: "H4".into(),
        params: serde_json::to_value(params).expect("params serialise"),
        table,
        verdicts,
        seed: sw.seed,
        replicas: sw.replicas,
    })
}

pub fn check_h4(params: &H4Params) -> Result<ConditionReport> {
    params.sweep.validate()?;
    check_ell0(params.ell0)?;
    let samples: Vec<(usize, Vec<Configuration>)> = params
        .sweep
        .n_grid
        .iter()
        .map(|&n| Ok((n, params.sweep.samples(n)?)))
        .collect::<Result<_>>()?;
    check_h4_on(&samples, params)
}

fn modal(it: impl Iterator<Item = usize>) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for p in it {
        *counts.entry(p).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(p, _)| p)
}

/// Per-replica quantities entering the tail-probability estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSummary {
    /// `H_{r,k}` functional (Lipschitz envelope, sup over `s`).
    pub functional: f64,
    /// `sup_s |beta sum_{S_rs} 1/y + conj(m_r) - conj(m_s)|`.
    pub first_order_sup: f64,
    /// `sup_s |sum_{S_rs} 1/y^l|` for `l = 2..l0-1`.
    pub power_sups: Vec<f64>,
    /// `sum_{S_{r inf}} 1/(|y|^{l0} - b_r^{l0})`.
    pub ubar: f64,
    /// Same sum restricted to `|y| >= b_{r+1}`.
    pub v2: f64,
    /// `sum_{|y| >= b_{r+1}} |y|^{-l0}`.
    pub v2_tail: f64,
    /// `|y|^{l0} - b_r^{l0}` for points with `b_r <= |y| < b_{r+1}`, ascending.
    pub shell_gaps: Vec<f64>,
}

pub fn summarize_replica(
    y: &Configuration,
    r: usize,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    beta: f64,
    ell0: usize,
) -> Result<ReplicaSummary> {
    check_ell0(ell0)?;
    let br = seq.b(r)?;
    let br1 = seq.b(r + 1)?;
    let brl = br.powi(ell0 as i32);
    let (functional, _) = hrk_functional(y, r, seq, comp, beta, ell0)?;
    let (first_order_sup, power_sups) = match shell_sweep(y, r, seq, comp, ell0)? {
        None => (f64::INFINITY, vec![f64::INFINITY; ell0 - 2]),
        Some(states) => {
            let f = states
                .iter()
                .map(|st| first_order_term(st, r, comp, beta).norm())
                .fold(0.0, f64::max);
            let p = (2..ell0)
                .map(|l| states.iter().map(|st| st.sums[l].norm()).fold(0.0, f64::max))
                .collect();
            (f, p)
        }
    };
    let mut ubar = 0.0;
    let mut v2 = 0.0;
    let mut v2_tail = 0.0;
    let mut shell_gaps = Vec::new();
    for z in y.iter() {
        let m = z.norm();
        if m < br {
            continue;
        }
        let gap = m.powi(ell0 as i32) - brl;
        let term = if gap > 0.0 { 1.0 / gap } else { f64::INFINITY };
        ubar += term;
        if m >= br1 {
            v2 += term;
            v2_tail += m.powi(-(ell0 as i32));
        } else {
            shell_gaps.push(gap);
        }
    }
    shell_gaps.sort_by(f64::total_cmp);
    Ok(ReplicaSummary {
        functional,
        first_order_sup,
        power_sups,
        ubar,
        v2,
        v2_tail,
        shell_gaps,
    })
}

/// Estimates of `mu(H_{r,k}^c)` for each `k`:
/// (i) the fraction of replicas whose Lipschitz envelope exceeds `k`, an
/// upper bound for the fraction outside `H_{r,k}`;
/// (ii) the fraction violating one of the thresholds `k/(l0 c6x)` on the
/// first- and higher-order sums or `k/(l0 c6z)` on the shell sum,
/// `c6z = c6y b_r^{l0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrkEstimate {
    pub k: f64,
    pub certified: f64,
    pub split: f64,
}

pub fn estimate_hrk_complement(
    samples: &[Configuration],
    r: usize,
    k_grid: &[f64],
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    ell0: usize,
    beta: f64,
) -> Result<Vec<HrkEstimate>> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    let summaries: Vec<ReplicaSummary> = samples
        .par_iter()
        .map(|y| summarize_replica(y, r, seq, comp, beta, ell0))
        .collect::<Result<_>>()?;
    hrk_from_summaries(&summaries, r, k_grid, seq, ell0, beta)
}

fn hrk_from_summaries(
    summaries: &[ReplicaSummary],
    r: usize,
    k_grid: &[f64],
    seq: &AnnulusSequence,
    ell0: usize,
    beta: f64,
) -> Result<Vec<HrkEstimate>> {
    if k_grid.iter().any(|k| !(*k >= 0.0)) {
        return Err(invalid("k values must be >= 0"));
    }
    let br = seq.b(r)?;
    let (c6x, c6y) = lipschitz_constants(br, beta, ell0);
    let c6z = c6y * br.powi(ell0 as i32);
    let total = summaries.len() as f64;
    Ok(k_grid
        .iter()
        .map(|&k| {
            let certified = summaries.iter().filter(|s| s.functional > k).count() as f64 / total;
            let tx = k / (ell0 as f64 * c6x);
            let tz = k / (ell0 as f64 * c6z);
            let split = summaries
                .iter()
                .filter(|s| s.first_order_sup > tx || s.power_sups.iter().any(|&p| p > tx) || s.ubar > tz)
                .count() as f64
                / total;
            HrkEstimate { k, certified, split }
        })
        .collect())
}

/// Parameters shared by the tail-probability checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub sweep: SweepParams,
    pub r: usize,
    pub ell0: usize,
    pub k_grid: Vec<f64>,
    /// Target level for the certified estimate.
    pub level: f64,
}

impl TailParams {
    pub fn new(sweep: SweepParams, r: usize, ell0: usize) -> Self {
        Self {
            sweep,
            r,
            ell0,
            k_grid: (0..=6).map(|i| 2f64.powi(i)).collect(),
            level: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        check_ell0(self.ell0)?;
        if self.r == 0 {
            return Err(invalid("r must be >= 1"));
        }
        if self.k_grid.is_empty() || self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("k grid must be non-empty and strictly increasing"));
        }
        Ok(())
    }
}

fn summaries_for(params: &TailParams, n: usize, samples: &[Configuration]) -> Result<Vec<ReplicaSummary>> {
    let sw = &params.sweep;
    let comp = sw.comp.sequence(sw.beta, n, samples, &sw.seq)?;
    samples
        .par_iter()
        .map(|y| summarize_replica(y, params.r, &sw.seq, &comp, sw.beta, params.ell0))
        .collect()
}

/// Tail probabilities of `H_{r,k}^c` across sizes, on given replica sets.
pub fn check_h3_on(samples_by_n: &[(usize, Vec<Configuration>)], params: &TailParams) -> Result<ConditionReport> {
    check_ell0(params.ell0)?;
    let sw = &params.sweep;
    let mut table = Vec::new();
    let mut per_n = Vec::new();
    for (n, samples) in samples_by_n {
        let summaries = summaries_for(params, *n, samples)?;
        let est = hrk_from_summaries(&summaries, params.r, &params.k_grid, &sw.seq, params.ell0, sw.beta)?;
        for e in &est {
            table.push(json!({"n": n, "r": params.r, "k": e.k,
                              "certified": ext(e.certified), "split": ext(e.split)}));
        }
        let nonincreasing = est.windows(2).all(|w| w[1].certified <= w[0].certified);
        let first_below = est
            .iter()
            .find(|e| e.certified < params.level && e.k <= 64.0)
            .map(|e| e.k);
        let fm: Moments = summaries
            .iter()
            .map(|s| s.functional)
            .filter(|f| f.is_finite())
            .collect();
        per_n.push(json!({
            "n": n,
            "nonincreasing": nonincreasing,
            "first_k_below_level": first_below,
            "below_level": first_below.is_some(),
            "functional_mean": ext(fm.mean()),
            "functional_infinite": summaries.iter().filter(|s| s.functional.is_infinite()).count(),
        }));
    }
    let all_nonincreasing = per_n.iter().all(|v| v["nonincreasing"] == json!(true));
    let all_below = per_n.iter().all(|v| v["below_level"] == json!(true));
    Ok(ConditionReport {
        condition: "H3".into(),
        params: serde_json::to_value(params).expect("params serialise"),
        table,
        verdicts: json!({
            "nonincreasing_in_k": all_nonincreasing,
            "below_level_by_k64": all_below,
            "level": params.level,
            "per_n": per_n,
        }),
        seed: sw.seed,
        replicas: sw.replicas,
    })
}

pub fn check_h3(params: &TailParams) -> Result<ConditionReport> {
    params.validate()?;
    let samples = sweep_all(&params.sweep)?;
    check_h3_on(&samples, params)
}

fn sweep_all(sw: &SweepParams) -> Result<Vec<(usize, Vec<Configuration>)>> {
    sw.n_grid.iter().map(|&n| Ok((n, sw.samples(n)?))).collect()
}

/// One row of the shell-set check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H5Row {
    pub k: f64,
    /// `mu(U_{r,l,k}^c)` for `l = 1..l0-1`.
    pub u_complement: Vec<f64>,
    pub ubar_complement: f64,
    pub v2_complement: f64,
    /// `(2/k) E[V2 sum]`.
    pub v2_markov: f64,
    /// `(2/k) b_{r+1}^{l0}/(b_{r+1}^{l0} - b_r^{l0}) E[sum_{|y| >= b_{r+1}} |y|^{-l0}]`.
    pub v2_bound: f64,
    pub v3_complement: f64,
    /// `E[#points with b_r^{l0} <= |y|^{l0} < b_r^{l0} + sqrt(2/k)]`.
    pub v3_bound: f64,
    pub v4_complement: f64,
    /// `sqrt(2/k) E[#points in b_r <= |y| < b_{r+1}]`.
    pub v4_bound: f64,
}

/// Shell-set probabilities for each `k > 0` on one replica set.
pub fn check_h5_rows(
    summaries: &[ReplicaSummary],
    r: usize,
    ell0: usize,
    seq: &AnnulusSequence,
    k_grid: &[f64],
) -> Result<Vec<H5Row>> {
    if summaries.is_empty() {
        return Err(invalid("no samples"));
    }
    if k_grid.iter().any(|k| !(*k > 0.0)) {
        return Err(invalid("k values must be > 0"));
    }
    let br = seq.b(r)?;
    let br1 = seq.b(r + 1)?;
    let l0 = ell0 as i32;
    let ratio = br1.powi(l0) / (br1.powi(l0) - br.powi(l0));
    let total = summaries.len() as f64;
    let frac = |f: &dyn Fn(&ReplicaSummary) -> bool| summaries.iter().filter(|s| f(s)).count() as f64 / total;
    let mean = |f: &dyn Fn(&ReplicaSummary) -> f64| summaries.iter().map(f).sum::<f64>() / total;
    let mean_v2 = mean(&|s| s.v2);
    let mean_tail = mean(&|s| s.v2_tail);
    let mean_count = mean(&|s| s.shell_gaps.len() as f64);
    Ok(k_grid
        .iter()
        .map(|&k| {
            let width = (2.0 / k).sqrt();
            let mut u_complement = vec![frac(&|s| s.first_order_sup > k)];
            for l in 0..ell0 - 2 {
                u_complement.push(frac(&|s| s.power_sups[l] > k));
            }
            H5Row {
                k,
                u_complement,
                ubar_complement: frac(&|s| s.ubar > k),
                v2_complement: frac(&|s| s.v2 > k / 2.0),
                v2_markov: 2.0 / k * mean_v2,
                v2_bound: 2.0 / k * ratio * mean_tail,
                v3_complement: frac(&|s| s.shell_gaps.first().is_some_and(|&g| g < width)),
                v3_bound: mean(&|s| s.shell_gaps.iter().filter(|&&g| g < width).count() as f64),
                v4_complement: frac(&|s| s.shell_gaps.len() as f64 > (k / 2.0).sqrt()),
                v4_bound: width * mean_count,
            }
        })
        .collect())
}

pub fn check_h5_on(samples_by_n: &[(usize, Vec<Configuration>)], params: &TailParams) -> Result<ConditionReport> {
    check_ell0(params.ell0)?;
    let sw = &params.sweep;
    let mut table = Vec::new();
    let mut dominated = true;
    let mut inclusion = true;
    let mut monotone = true;
    for (n, samples) in samples_by_n {
        let summaries = summaries_for(params, *n, samples)?;
        let rows = check_h5_rows(&summaries, params.r, params.ell0, &sw.seq, &params.k_grid)?;
        for w in rows.windows(2) {
            monotone &= w[1].ubar_complement <= w[0].ubar_complement;
        }
        for row in rows {
            dominated &= row.v2_complement <= row.v2_markov
                && row.v2_complement <= row.v2_bound
                && row.v3_complement <= row.v3_bound
                && row.v4_complement <= row.v4_bound;
            inclusion &= row.ubar_complement <= row.v2_complement + row.v3_complement + row.v4_complement;
            let mut v = serde_json::to_value(&row).expect("row serialises");
            let obj: &mut Map<String, Value> = v.as_object_mut().expect("row is an object");
            obj.insert("n".into(), json!(n));
            obj.insert("r".into(), json!(params.r));
            for key in [
                "ubar_complement",
                "v2_complement",
                "v2_markov",
                "v2_bound",
                "v3_complement",
                "v3_bound",
                "v4_complement",
                "v4_bound",
            ] {
                let x = obj[key].as_f64().unwrap_or(f64::NAN);
                obj.insert(key.into(), ext(x));
            }
            table.push(v);
        }
    }
    Ok(ConditionReport {
        condition: "H5".into(),
        params: serde_json::to_value(params).expect("params serialise"),
        table,
        verdicts: json!({
            "chebyshev_bounds_dominate": dominated,
            "ubar_within_v_decomposition": inclusion,
            "ubar_nonincreasing_in_k": monotone,
        }),
        seed: sw.seed,
        replicas: sw.replicas,
    })
}

pub fn check_h5(params: &TailParams) -> Result<ConditionReport> {
    params.validate()?;
    if params.k_grid.iter().any(|k| !(*k > 0.0)) {
        return Err(invalid("k values must be > 0"));
    }
    let samples = sweep_all(&params.sweep)?;
    check_h5_on(&samples, params)
}

/// Parameters of the quasi-Gibbs probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgParams {
    pub beta: f64,
    pub n_grid: Vec<usize>,
    pub m_inside: usize,
    pub r: usize,
    pub outer: usize,
    pub inner_grid: usize,
    pub seed: u64,
    pub method: SamplerMethod,
    #[serde(default)]
    pub seq: AnnulusSequence,
    /// `m_inf`; defaults to `beta n^{1/3}` per size.
    pub m_inf: Option<f64>,
    /// `false` runs the independent-particle control (`psi = 0`, `m_inf = 0`).
    pub interaction: bool,
    /// Allowed growth of the 90th percentile from the first to the last size.
    pub growth_max: f64,
}

impl QgParams {
    pub fn new(beta: f64, n_grid: Vec<usize>, m_inside: usize, r: usize, outer: usize, seed: u64) -> Self {
        Self {
            beta,
            n_grid,
            m_inside,
            r,
            outer,
            inner_grid: 64,
            seed,
            method: SamplerMethod::Tridiagonal,
            seq: AnnulusSequence::Identity,
            m_inf: None,
            interaction: true,
            growth_max: 1.25,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.m_inside) {
            return Err(invalid(format!("m_inside = {} must be 1, 2 or 3", self.m_inside)));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n grid must be non-empty and strictly increasing"));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 10 * self.m_inside) {
            return Err(invalid(format!("n = {n} must be >= 10 m_inside")));
        }
        if self.r == 0 {
            return Err(invalid("r must be >= 1"));
        }
        if self.outer == 0 {
            return Err(invalid("need at least one outer replica"));
        }
        if self.inner_grid < self.m_inside {
            return Err(invalid("inner grid smaller than m_inside"));
        }
        Ok(())
    }
}

/// Oscillation statistics for one ensemble size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgStats {
    pub n: usize,
    pub m_inf: f64,
    pub osc: Vec<f64>,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
    /// Largest relative change of osc between grid `G` and `2G`.
    pub refinement_change: f64,
    pub skipped_grid_points: usize,
}

/// `log sigma~` on the grid for one outer configuration: with `m` inner
/// points the x-dependent part of the joint log density minus `-H~_r` is
/// `-sum_i [Psi_r(x_i, s) + Re(x_i conj m_inf)]`, additive over inner
/// points; terms that depend on `s` only are dropped. Returns the
/// oscillation over distinct `m`-tuples and the number of skipped points.
fn oscillation(outer: &[f64], grid: &[f64], m: usize, beta: f64, m_inf: f64, interaction: bool) -> (f64, usize) {
    let mut f: Vec<f64> = Vec::with_capacity(grid.len());
    let mut skipped = 0;
    for &x in grid {
        let mut v = -m_inf * x;
        if interaction {
            for &s in outer {
                v -= log_potential(Complex64::new(x, 0.0), Complex64::new(s, 0.0), beta);
            }
        }
        if v.is_finite() {
            f.push(v);
        } else {
            skipped += 1;
        }
    }
    if f.len() < m {
        return (0.0, skipped);
    }
    f.sort_by(f64::total_cmp);
    let lo: f64 = f[..m].iter().sum();
    let hi: f64 = f[f.len() - m..].iter().sum();
    (hi - lo, skipped)
}

/// Quasi-Gibbs probe at one size `n`.
pub fn quasi_gibbs_probe(params: &QgParams, n: usize) -> Result<QgStats> {
    params.validate()?;
    let br = params.seq.b(params.r)?;
    let spec = EnsembleSpec::new(
        params.beta,
        n,
        ScalingKind::SoftEdge,
        params.method,
        derive_seed(params.seed, n as u64),
    )?;
    let samples = sample_replicas(&spec, params.outer)?;
    let window = params.seq.complement(params.r)?;
    let m_inf = if params.interaction {
        params.m_inf.unwrap_or(params.beta * (n as f64).cbrt())
    } else {
        0.0
    };
    let grid = midpoint_grid(br, params.inner_grid);
    let fine = midpoint_grid(br, 2 * params.inner_grid);
    let per: Vec<(f64, f64, usize)> = samples
        .par_iter()
        .map(|c| {
            let outer: Vec<f64> = c.restrict(&window).iter().map(|z| z.re).collect();
            let (o, sk) = oscillation(&outer, &grid, params.m_inside, params.beta, m_inf, params.interaction);
            let (of, _) = oscillation(&outer, &fine, params.m_inside, params.beta, m_inf, params.interaction);
            (o, of, sk)
        })
        .collect();
    let osc: Vec<f64> = per.iter().map(|p| p.0).collect();
    let refinement_change = per
        .iter()
        .map(|p| if p.1 == 0.0 { 0.0 } else { (p.1 - p.0).abs() / p.1 })
        .fold(0.0, f64::max);
    let mut sorted = osc.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(QgStats {
        n,
        m_inf,
        p50: quantile_sorted(&sorted, 0.5),
        p90: quantile_sorted(&sorted, 0.9),
        max: *sorted.last().expect("outer >= 1"),
        refinement_change,
        skipped_grid_points: per.iter().map(|p| p.2).sum(),
        osc,
    })
}

pub fn qg_report(params: &QgParams) -> Result<ConditionReport> {
    params.validate()?;
    let stats: Vec<QgStats> = params
        .n_grid
        .iter()
        .map(|&n| quasi_gibbs_probe(params, n))
        .collect::<Result<_>>()?;
    let table: Vec<Value> = stats
        .iter()
        .map(|s| {
            json!({
                "n": s.n, "m_inf": s.m_inf, "p50": ext(s.p50), "p90": ext(s.p90), "max": ext(s.max),
                "refinement_change": ext(s.refinement_change), "skipped_grid_points": s.skipped_grid_points,
                "osc": s.osc.iter().map(|&x| ext(x)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let first = &stats[0];
    let last = stats.last().expect("non-empty grid");
    let growth = if first.p90 > 0.0 {
        last.p90 / first.p90
    } else if last.p90 == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let log_n: Vec<f64> = stats.iter().map(|s| (s.n as f64).ln()).collect();
    let p90s: Vec<f64> = stats.iter().map(|s| s.p90).collect();
    let slope = if stats.len() >= 2 {
        ols_slope(&log_n, &p90s)
    } else {
        f64::NAN
    };
    let max_osc = stats.iter().map(|s| s.max).fold(0.0, f64::max);
    Ok(ConditionReport {
        condition: "QG-probe".into(),
        params: serde_json::to_value(params).expect("params serialise"),
        table,
        verdicts: json!({
            "uniform_in_n": {
                "pass": growth <= params.growth_max,
                "p90_growth": ext(growth),
                "threshold": params.growth_max,
                "p90_vs_log_n_slope": ext(slope),
            },
            "control_zero": (!params.interaction).then_some(max_osc <= 1e-10),
            "max_osc": ext(max_osc),
        }),
        seed: params.seed,
        replicas: params.outer,
    })
}
