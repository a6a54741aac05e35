//! `sample`, `kernel-table` and `correlate`.

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use rpf_core::ensembles::sample_replicas;
use rpf_core::estimator::{cell_averages, compare_to_values, estimate_correlation, semicircle_density};
use rpf_core::special_fns::{airy, det_correlation, kernel};
use rpf_core::{Bins, EnsembleSpec, KernelKind, SamplerMethod, ScalingKind};

use super::Cmd;
use crate::output::{num, Format, Payload};
use crate::{usage, CliError};

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// raw | bulk | softedge
    #[arg(long)]
    scaling: Option<ScalingKind>,
    /// dense | tridiagonal
    #[arg(long)]
    method: Option<SamplerMethod>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    pub beta: f64,
    pub n: usize,
    pub scaling: ScalingKind,
    pub method: SamplerMethod,
    pub replicas: usize,
    pub seed: u64,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            n: 50,
            scaling: ScalingKind::Raw,
            method: SamplerMethod::Tridiagonal,
            replicas: 1,
            seed: 0,
        }
    }
}

pub struct Sample;

impl Cmd for Sample {
    const NAME: &'static str = "sample";
    const FORMATS: &'static [Format] = &[Format::Csv, Format::Json];
    type Args = SampleArgs;
    type Params = SampleParams;

    fn run(p: &mut SampleParams, format: Format) -> Result<Payload, CliError> {
        if p.replicas == 0 {
            return Err(usage("--replicas must be >= 1"));
        }
        let spec = EnsembleSpec::new(p.beta, p.n, p.scaling, p.method, p.seed)?;
        let samples = sample_replicas(&spec, p.replicas)?;
        Ok(match format {
            Format::Csv => {
                let mut s = String::from("replica,index,x\n");
                for (r, c) in samples.iter().enumerate() {
                    for (i, x) in c.reals().iter().enumerate() {
                        s.push_str(&format!("{r},{i},{}\n", num(*x)));
                    }
                }
                Payload::Csv(s)
            }
            Format::Json => Payload::Json(json!({
                "replicas": samples.iter().map(|c| c.reals()).collect::<Vec<_>>(),
            })),
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct KernelTableArgs {
    /// airy | sine
    #[arg(long)]
    kernel: Option<KernelKind>,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Tabulate K(x, x + offset).
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTableParams {
    pub kernel: KernelKind,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub offset: f64,
}

impl Default for KernelTableParams {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Airy,
            lo: -6.0,
            hi: 3.0,
            step: 0.1,
            offset: 0.0,
        }
    }
}

pub struct KernelTable;

impl Cmd for KernelTable {
    const NAME: &'static str = "kernel-table";
    const FORMATS: &'static [Format] = &[Format::Csv, Format::Json];
    type Args = KernelTableArgs;
    type Params = KernelTableParams;

    fn run(p: &mut KernelTableParams, format: Format) -> Result<Payload, CliError> {
        if !(p.step > 0.0) || !(p.hi >= p.lo) || !p.lo.is_finite() || !p.hi.is_finite() {
            return Err(usage("need lo <= hi and step > 0"));
        }
        let count = ((p.hi - p.lo) / p.step + 1e-9).floor() as usize + 1;
        let mut rows = Vec::with_capacity(count);
        for i in 0..count {
            let x = p.lo + i as f64 * p.step;
            let y = x + p.offset;
            let k = kernel(p.kernel, x, y)?;
            let ai = match p.kernel {
                KernelKind::Airy => Some(airy(x)?),
                KernelKind::Sine => None,
            };
            rows.push((x, y, k, ai));
        }
        Ok(match format {
            Format::Csv => {
                let mut s = String::from("x,y,kernel");
                if p.kernel == KernelKind::Airy {
                    s.push_str(",ai,ai_prime");
                }
                s.push('\n');
                for (x, y, k, ai) in &rows {
                    s.push_str(&format!("{},{},{}", num(*x), num(*y), num(*k)));
                    if let Some((a, d)) = ai {
                        s.push_str(&format!(",{},{}", num(*a), num(*d)));
                    }
                    s.push('\n');
                }
                Payload::Csv(s)
            }
            Format::Json => Payload::Json(json!({
                "rows": rows.iter().map(|(x, y, k, ai)| match ai {
                    Some((a, d)) => json!({"x": x, "y": y, "kernel": k, "ai": a, "ai_prime": d}),
                    None => json!({"x": x, "y": y, "kernel": k}),
                }).collect::<Vec<_>>(),
            })),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prediction {
    None,
    /// Determinantal correlations of the Airy kernel.
    Airy,
    /// Determinantal correlations of the sine kernel (unit density; no
    /// unfolding is applied).
    Sine,
    /// Order 1 only: semicircle density at the chosen scaling.
    Semicircle,
}

impl std::str::FromStr for Prediction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Prediction::None),
            "airy" => Ok(Prediction::Airy),
            "sine" => Ok(Prediction::Sine),
            "semicircle" => Ok(Prediction::Semicircle),
            other => Err(format!("unknown prediction `{other}`")),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelateArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// raw | bulk | softedge
    #[arg(long)]
    scaling: Option<ScalingKind>,
    /// dense | tridiagonal
    #[arg(long)]
    method: Option<SamplerMethod>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Correlation order, 1 or 2.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
    /// none | airy | sine | semicircle
    #[arg(long)]
    prediction: Option<Prediction>,
    /// Gauss-Legendre nodes per axis for cell-averaged predictions.
    #[arg(long)]
    quad_nodes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateParams {
    pub beta: f64,
    pub n: usize,
    pub scaling: ScalingKind,
    pub method: SamplerMethod,
    pub replicas: usize,
    pub seed: u64,
    pub order: usize,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub prediction: Prediction,
    pub quad_nodes: usize,
}

impl Default for CorrelateParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            n: 200,
            scaling: ScalingKind::SoftEdge,
            method: SamplerMethod::Tridiagonal,
            replicas: 200,
            seed: 0,
            order: 1,
            lo: -6.0,
            hi: 3.0,
            width: 0.1,
            prediction: Prediction::None,
            quad_nodes: 4,
        }
    }
}

pub struct Correlate;

/// Cell lower edges, upper edges, estimate, stderr, (prediction, z).
type Row = (Vec<f64>, Vec<f64>, f64, f64, Option<(f64, f64)>);

impl Cmd for Correlate {
    const NAME: &'static str = "correlate";
    const FORMATS: &'static [Format] = &[Format::Csv, Format::Json];
    type Args = CorrelateArgs;
    type Params = CorrelateParams;

    fn run(p: &mut CorrelateParams, format: Format) -> Result<Payload, CliError> {
        if p.quad_nodes == 0 {
            return Err(usage("--quad-nodes must be >= 1"));
        }
        let spec = EnsembleSpec::new(p.beta, p.n, p.scaling, p.method, p.seed)?;
        let bins = Bins::uniform(p.lo, p.hi, p.width)?;
        let samples = sample_replicas(&spec, p.replicas)?;
        let est = estimate_correlation(&samples, p.order, &bins)?;
        let predictions = match p.prediction {
            Prediction::None => None,
            Prediction::Airy => Some(cell_averages(
                &est,
                |x| det_correlation(KernelKind::Airy, x),
                p.quad_nodes,
            )?),
            Prediction::Sine => Some(cell_averages(
                &est,
                |x| det_correlation(KernelKind::Sine, x),
                p.quad_nodes,
            )?),
            Prediction::Semicircle => {
                if p.order != 1 {
                    return Err(usage("semicircle prediction is order 1 only"));
                }
                let n = p.n as f64;
                let rho: Box<dyn Fn(f64) -> f64 + Sync> = match p.scaling {
                    ScalingKind::Bulk => Box::new(move |x| n * semicircle_density(x)),
                    ScalingKind::Raw => Box::new(move |x| n.sqrt() * semicircle_density(x / n.sqrt())),
                    ScalingKind::SoftEdge => return Err(usage("semicircle prediction needs raw or bulk scaling")),
                };
                Some(cell_averages(&est, |x| Ok(rho(x[0])), p.quad_nodes)?)
            }
        };
        let report = predictions.as_deref().map(|v| compare_to_values(&est, v)).transpose()?;
        let rows: Vec<Row> = est
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let lo = c.bins.iter().map(|&b| bins.lo(b)).collect();
                let hi = c.bins.iter().map(|&b| bins.hi(b)).collect();
                let pz = report.as_ref().map(|r| (r.rows[i].prediction, r.rows[i].z));
                (lo, hi, c.estimate, c.stderr, pz)
            })
            .collect();
        Ok(match format {
            Format::Csv => {
                let mut s = String::from("bin_lo,bin_hi");
                if p.order == 2 {
                    s.push_str(",bin2_lo,bin2_hi");
                }
                s.push_str(",estimate,stderr,prediction,z\n");
                for (lo, hi, e, se, pz) in &rows {
                    for (l, h) in lo.iter().zip(hi) {
                        s.push_str(&format!("{},{},", num(*l), num(*h)));
                    }
                    s.push_str(&format!("{},{},", num(*e), num(*se)));
                    match pz {
                        Some((pr, z)) => s.push_str(&format!("{},{}\n", num(*pr), num(*z))),
                        None => s.push_str(",\n"),
                    }
                }
                Payload::Csv(s)
            }
            Format::Json => Payload::Json(json!({
                "order": p.order,
                "replicas": est.replicas,
                "rows": rows.iter().map(|(lo, hi, e, se, pz)| json!({
                    "lo": lo, "hi": hi, "estimate": e, "stderr": se,
                    "prediction": pz.map(|v| v.0), "z": pz.map(|v| v.1),
                })).collect::<Vec<_>>(),
                "summary": report.as_ref().map(|r| json!({
                    "fraction_within_3": r.fraction_within_3,
                    "max_abs_z": r.max_abs_z,
                    "cells": r.rows.len(),
                })),
            })),
        })
    }
}
