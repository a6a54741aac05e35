//! `simulate` and `invariance`.

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use rpf_core::dynamics::{
    default_dt, invariance_report, simulate_isde, DynamicsFlags, InvarianceParams, SdeState, SimParams,
};
use rpf_core::ensembles::sample_scaled;
use rpf_core::{EnsembleSpec, SamplerMethod, ScalingKind};

use super::Cmd;
use crate::output::{Format, Payload};
use crate::{usage, CliError};

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// raw | bulk | softedge
    #[arg(long)]
    scaling: Option<ScalingKind>,
    /// Time step; default 1e-3 (mean initial gap)^2.
    #[arg(long)]
    dt: Option<f64>,
    /// Final time T.
    #[arg(long = "t-end", alias = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial positions; default an exact ensemble sample.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init: Option<Vec<f64>>,
    /// Drop the Brownian term (deterministic gradient flow).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_noise: Option<bool>,
    /// Reverse the confinement force (negative control).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    flip_confinement: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub beta: f64,
    pub n: usize,
    pub scaling: ScalingKind,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub record_every: usize,
    pub seed: u64,
    pub init: Option<Vec<f64>>,
    pub no_noise: bool,
    pub flip_confinement: bool,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            n: 20,
            scaling: ScalingKind::Raw,
            dt: None,
            t_end: 1.0,
            record_every: 100,
            seed: 0,
            init: None,
            no_noise: false,
            flip_confinement: false,
        }
    }
}

pub struct Simulate;

impl Cmd for Simulate {
    const NAME: &'static str = "simulate";
    const FORMATS: &'static [Format] = &[Format::Csv, Format::Json];
    type Args = SimulateArgs;
    type Params = SimulateParams;

    fn run(p: &mut SimulateParams, format: Format) -> Result<Payload, CliError> {
        let init = match &p.init {
            Some(x) => {
                if x.len() != p.n {
                    return Err(usage(format!("--init has {} points, expected n = {}", x.len(), p.n)));
                }
                x.clone()
            }
            None => {
                let spec = EnsembleSpec::new(p.beta, p.n, p.scaling, SamplerMethod::Tridiagonal, p.seed)?;
                sample_scaled(&spec, 0)?.reals()
            }
        };
        let state = SdeState::new(init)?;
        let dt = *p.dt.get_or_insert_with(|| default_dt(&state.positions));
        let sim = SimParams {
            beta: p.beta,
            n: p.n,
            kind: p.scaling,
            dt,
            t_end: p.t_end,
            record_every: p.record_every,
            flags: DynamicsFlags {
                noise: !p.no_noise,
                flip_confinement: p.flip_confinement,
            },
        };
        let tr = simulate_isde(&state, &sim, p.seed, 0)?;
        Ok(match format {
            Format::Csv => Payload::Csv(tr.to_csv()),
            Format::Json => Payload::Json(json!({
                "times": tr.times,
                "states": tr.states,
                "accepted": tr.accepted,
                "halvings": tr.halvings,
            })),
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct InvarianceArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// raw | bulk | softedge
    #[arg(long)]
    scaling: Option<ScalingKind>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end", alias = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_noise: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    flip_confinement: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceCliParams {
    pub beta: f64,
    pub n: usize,
    pub scaling: ScalingKind,
    pub dt: f64,
    pub t_end: f64,
    pub replicas: usize,
    pub seed: u64,
    pub no_noise: bool,
    pub flip_confinement: bool,
}

impl Default for InvarianceCliParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            n: 20,
            scaling: ScalingKind::Raw,
            dt: 1e-3,
            t_end: 1.0,
            replicas: 500,
            seed: 0,
            no_noise: false,
            flip_confinement: false,
        }
    }
}

pub struct Invariance;

impl Cmd for Invariance {
    const NAME: &'static str = "invariance";
    const FORMATS: &'static [Format] = &[Format::Json];
    type Args = InvarianceArgs;
    type Params = InvarianceCliParams;

    fn run(p: &mut InvarianceCliParams, _: Format) -> Result<Payload, CliError> {
        let report = invariance_report(&InvarianceParams {
            beta: p.beta,
            n: p.n,
            kind: p.scaling,
            dt: p.dt,
            t_end: p.t_end,
            replicas: p.replicas,
            seed: p.seed,
            flags: DynamicsFlags {
                noise: !p.no_noise,
                flip_confinement: p.flip_confinement,
            },
        })?;
        let mut v = serde_json::to_value(&report).expect("reports serialise");
        // The resolved parameters already appear under `config`.
        v.as_object_mut().expect("object").remove("params");
        Ok(Payload::Json(v))
    }
}
