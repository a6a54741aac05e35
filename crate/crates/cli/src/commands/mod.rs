pub mod checks;
pub mod conditions;
pub mod dynamics;
pub mod sample;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{merge, ConfigFile};
use crate::output::{check_relative, render, Format, Payload, Rendered};
use crate::{usage, Cli, CliError};

pub trait Cmd {
    const NAME: &'static str;
    /// Accepted formats; the first is the default.
    const FORMATS: &'static [Format];
    type Args: Serialize;
    type Params: Serialize + DeserializeOwned + Default + Send;

    /// Run with resolved parameters. May fill in derived defaults, which
    /// are then embedded in the output.
    fn run(params: &mut Self::Params, format: Format) -> Result<Payload, CliError>;
}

pub fn dispatch<C: Cmd>(cli: &Cli, args: &C::Args, file: Option<&ConfigFile>) -> Result<Rendered, CliError> {
    if let Some(cmd) = file.and_then(|f| f.command.as_deref()) {
        if cmd != C::NAME {
            return Err(usage(format!("config is for `{cmd}`, not `{}`", C::NAME)));
        }
    }
    let flags = serde_json::to_value(args).expect("arguments serialise");
    let mut params: C::Params = merge(&C::Params::default(), file.map(|f| &f.params), flags)?;
    let format = cli.format.or(file.and_then(|f| f.format)).unwrap_or(C::FORMATS[0]);
    if !C::FORMATS.contains(&format) {
        return Err(usage(format!(
            "`{}` does not support {} output",
            C::NAME,
            format.extension()
        )));
    }
    let out = cli
        .out
        .clone()
        .or_else(|| file.and_then(|f| f.out.clone()))
        .unwrap_or_else(|| format!("{}.{}", C::NAME, format.extension()));
    check_relative(&out)?;
    let payload = match cli.workers {
        Some(0) => return Err(usage("--workers must be >= 1")),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| usage(format!("cannot start {k} workers: {e}")))?
            .install(|| C::run(&mut params, format))?,
        None => C::run(&mut params, format)?,
    };
    Ok(render(C::NAME, format, &out, &params, payload))
}

/// Parse `a:b` into a pair of indices.
pub fn parse_pair(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `r:s`, got `{s}`"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok([p(a)?, p(b)?])
}
