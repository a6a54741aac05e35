use std::io::Write;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{usage, CliError};

pub(crate) const CSV_CONFIG_PREFIX: &str = "# config: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

pub enum Payload {
    /// CSV body including its header row.
    Csv(String),
    /// A JSON object; the run config is added under `config`.
    Json(Value),
}

pub struct Rendered {
    pub out: String,
    pub text: String,
}

pub fn render<P: Serialize>(command: &str, format: Format, out: &str, params: &P, payload: Payload) -> Rendered {
    let config = json!({
        "command": command,
        "format": format,
        "out": out,
        "params": serde_json::to_value(params).expect("parameters serialise"),
    });
    let text = match payload {
        Payload::Csv(body) => format!("{CSV_CONFIG_PREFIX}{config}\n{body}"),
        Payload::Json(mut v) => {
            v.as_object_mut()
                .expect("JSON payloads are objects")
                .insert("config".into(), config);
            let mut s = serde_json::to_string_pretty(&v).expect("values serialise");
            s.push('\n');
            s
        }
    };
    Rendered {
        out: out.to_string(),
        text,
    }
}

/// Output names must stay inside the output directory.
pub fn check_relative(name: &str) -> Result<(), CliError> {
    if name == "-" {
        return Ok(());
    }
    let p = Path::new(name);
    if name.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(usage(format!(
            "output name `{name}` must be a relative path without `..`, `.` or a root"
        )));
    }
    Ok(())
}

pub fn write(out_dir: &Path, r: &Rendered) -> Result<(), CliError> {
    if r.out == "-" {
        std::io::stdout().write_all(r.text.as_bytes())?;
        return Ok(());
    }
    check_relative(&r.out)?;
    let path = out_dir.join(&r.out);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, &r.text)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Shortest round-trip rendering of a float for CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_names_are_confined() {
        assert!(check_relative("a/b.json").is_ok());
        assert!(check_relative("-").is_ok());
        for bad in ["../x", "/tmp/x", "a/../../x", "./x", ""] {
            assert!(check_relative(bad).is_err(), "{bad}");
        }
    }
}
