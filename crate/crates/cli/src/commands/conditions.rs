//! `check-h4`, `check-h5`, `check-h3` and `qg-probe`.

use clap::Args;
use serde::{Deserialize, Serialize};

use rpf_core::condition_checker::{
    check_h3, check_h4, check_h5, qg_report, ConditionReport, H4Params, QgParams, SweepParams, TailParams,
};
use rpf_core::{AnnulusSequence, CompensatorModel, SamplerMethod, ScalingKind};

use super::{parse_pair, Cmd};
use crate::output::{Format, Payload};
use crate::{usage, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompKind {
    /// `m_s = m_inf = beta n^{1/3}`.
    SoftEdge,
    Zero,
    /// `m_s = m_inf = m_re + i m_im`.
    Constant,
    /// Soft-edge `m_inf`, finite `m_s` centred on sample means.
    Centered,
}

impl std::str::FromStr for CompKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "soft-edge" | "soft_edge" | "softedge" => Ok(CompKind::SoftEdge),
            "zero" => Ok(CompKind::Zero),
            "constant" => Ok(CompKind::Constant),
            "centered" => Ok(CompKind::Centered),
            other => Err(format!("unknown compensator model `{other}`")),
        }
    }
}

/// Ensemble-sweep flags shared by the condition checks.
#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated ensemble sizes.
    #[arg(long, alias = "n", value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
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
    /// Explicit annulus radii b_1 < b_2 < ...; default b_r = r.
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
    /// soft-edge | zero | constant | centered
    #[arg(long)]
    comp: Option<CompKind>,
    #[arg(long, allow_hyphen_values = true)]
    m_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m_im: Option<f64>,
    /// Number of centred finite compensators.
    #[arg(long)]
    centered_s_max: Option<usize>,
}

fn seq_from(cutoffs: &Option<Vec<f64>>) -> Result<AnnulusSequence, CliError> {
    Ok(match cutoffs {
        None => AnnulusSequence::Identity,
        Some(c) => AnnulusSequence::explicit(c.clone())?,
    })
}

macro_rules! sweep_params {
    ($(#[$m:meta])* pub struct $name:ident { $($(#[$fm:meta])* pub $f:ident : $t:ty),* $(,)? }) => {
        $(#[$m])*
        pub struct $name {
            pub beta: f64,
            pub n_grid: Vec<usize>,
            pub scaling: ScalingKind,
            pub method: SamplerMethod,
            pub replicas: usize,
            pub seed: u64,
            pub cutoffs: Option<Vec<f64>>,
            pub comp: CompKind,
            pub m_re: f64,
            pub m_im: f64,
            pub centered_s_max: usize,
            $($(#[$fm])* pub $f: $t),*
        }

        impl $name {
            fn sweep(&self) -> Result<SweepParams, CliError> {
                let comp = match self.comp {
                    CompKind::SoftEdge => CompensatorModel::SoftEdge,
                    CompKind::Zero => CompensatorModel::Zero,
                    CompKind::Constant => CompensatorModel::Constant { re: self.m_re, im: self.m_im },
                    CompKind::Centered => CompensatorModel::Centered { s_max: self.centered_s_max },
                };
                Ok(SweepParams {
                    beta: self.beta,
                    n_grid: self.n_grid.clone(),
                    scaling: self.scaling,
                    method: self.method,
                    replicas: self.replicas,
                    seed: self.seed,
                    seq: seq_from(&self.cutoffs)?,
                    comp,
                })
            }
        }
    };
}

macro_rules! sweep_defaults {
    ($($f:ident : $v:expr),* $(,)?) => {
        Self {
            beta: 2.0,
            n_grid: vec![50, 100, 200, 400],
            scaling: ScalingKind::SoftEdge,
            method: SamplerMethod::Tridiagonal,
            replicas: 500,
            seed: 0,
            cutoffs: None,
            comp: CompKind::SoftEdge,
            m_re: 0.0,
            m_im: 0.0,
            centered_s_max: 8,
            $($f: $v),*
        }
    };
}

fn report_payload(report: &ConditionReport) -> Payload {
    Payload::Json(serde_json::to_value(report).expect("reports serialise"))
}

#[derive(Debug, Args, Serialize)]
pub struct H4Args {
    #[command(flatten)]
    #[serde(flatten)]
    sweep: SweepArgs,
    #[arg(long)]
    ell0: Option<usize>,
    /// Bounded annuli as `r:s`, comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pairs: Option<Vec<[usize; 2]>>,
    /// Indices s of the complement windows S_{s,inf}.
    #[arg(long, value_delimiter = ',')]
    tail_s: Option<Vec<usize>>,
    #[arg(long)]
    p_max: Option<usize>,
    #[arg(long)]
    tail_ratio_max: Option<f64>,
}

sweep_params! {
    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct H4CliParams {
        pub ell0: usize,
        pub pairs: Vec<[usize; 2]>,
        pub tail_s: Vec<usize>,
        pub p_max: usize,
        pub tail_ratio_max: f64,
    }
}

impl Default for H4CliParams {
    fn default() -> Self {
        sweep_defaults! {
            ell0: 3,
            pairs: vec![[1, 2], [1, 3], [2, 4]],
            tail_s: (2..=6).collect(),
            p_max: 64,
            tail_ratio_max: 3.0,
        }
    }
}

pub struct H4;

impl Cmd for H4 {
    const NAME: &'static str = "check-h4";
    const FORMATS: &'static [Format] = &[Format::Json];
    type Args = H4Args;
    type Params = H4CliParams;

    fn run(p: &mut H4CliParams, _: Format) -> Result<Payload, CliError> {
        let mut h = H4Params::new(p.sweep()?, p.ell0);
        h.pairs = p.pairs.iter().map(|&[r, s]| (r, s)).collect();
        h.tail_s = p.tail_s.clone();
        h.p_max = p.p_max;
        h.tail_ratio_max = p.tail_ratio_max;
        Ok(report_payload(&check_h4(&h)?))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TailArgs {
    #[command(flatten)]
    #[serde(flatten)]
    sweep: SweepArgs,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    ell0: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<f64>>,
    /// Target level for the certified tail probability (check-h3).
    #[arg(long)]
    level: Option<f64>,
}

sweep_params! {
    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct TailCliParams {
        pub r: usize,
        pub ell0: usize,
        pub k_grid: Vec<f64>,
        pub level: f64,
    }
}

impl Default for TailCliParams {
    fn default() -> Self {
        sweep_defaults! {
            r: 1,
            ell0: 3,
            k_grid: (0..=6).map(|i| 2f64.powi(i)).collect(),
            level: 0.1,
        }
    }
}

impl TailCliParams {
    fn tail(&self) -> Result<TailParams, CliError> {
        let mut t = TailParams::new(self.sweep()?, self.r, self.ell0);
        t.k_grid = self.k_grid.clone();
        t.level = self.level;
        Ok(t)
    }
}

pub struct H5;

impl Cmd for H5 {
    const NAME: &'static str = "check-h5";
    const FORMATS: &'static [Format] = &[Format::Json];
    type Args = TailArgs;
    type Params = TailCliParams;

    fn run(p: &mut TailCliParams, _: Format) -> Result<Payload, CliError> {
        Ok(report_payload(&check_h5(&p.tail()?)?))
    }
}

pub struct H3;

impl Cmd for H3 {
    const NAME: &'static str = "check-h3";
    const FORMATS: &'static [Format] = &[Format::Json];
    type Args = TailArgs;
    type Params = TailCliParams;

    fn run(p: &mut TailCliParams, _: Format) -> Result<Payload, CliError> {
        Ok(report_payload(&check_h3(&p.tail()?)?))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct QgArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, alias = "n", value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    m_inside: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Outer configurations per size.
    #[arg(long)]
    outer: Option<usize>,
    #[arg(long)]
    inner_grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// dense | tridiagonal
    #[arg(long)]
    method: Option<SamplerMethod>,
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
    /// Override m_inf (default beta n^{1/3}).
    #[arg(long, allow_hyphen_values = true)]
    m_inf: Option<f64>,
    /// Independent-particle control: no interaction, m_inf = 0.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    control: Option<bool>,
    #[arg(long)]
    growth_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QgCliParams {
    pub beta: f64,
    pub n_grid: Vec<usize>,
    pub m_inside: usize,
    pub r: usize,
    pub outer: usize,
    pub inner_grid: usize,
    pub seed: u64,
    pub method: SamplerMethod,
    pub cutoffs: Option<Vec<f64>>,
    pub m_inf: Option<f64>,
    pub control: bool,
    pub growth_max: f64,
}

impl Default for QgCliParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            n_grid: vec![50, 100, 200],
            m_inside: 1,
            r: 1,
            outer: 100,
            inner_grid: 64,
            seed: 0,
            method: SamplerMethod::Tridiagonal,
            cutoffs: None,
            m_inf: None,
            control: false,
            growth_max: 1.25,
        }
    }
}

pub struct Qg;

impl Cmd for Qg {
    const NAME: &'static str = "qg-probe";
    const FORMATS: &'static [Format] = &[Format::Json];
    type Args = QgArgs;
    type Params = QgCliParams;

    fn run(p: &mut QgCliParams, _: Format) -> Result<Payload, CliError> {
        if p.m_inf.is_some() && p.control {
            return Err(usage("--m-inf has no effect with --control"));
        }
        let mut q = QgParams::new(p.beta, p.n_grid.clone(), p.m_inside, p.r, p.outer, p.seed);
        q.inner_grid = p.inner_grid;
        q.method = p.method;
        q.seq = seq_from(&p.cutoffs)?;
        q.m_inf = p.m_inf;
        q.interaction = !p.control;
        q.growth_max = p.growth_max;
        Ok(report_payload(&qg_report(&q)?))
    }
}
