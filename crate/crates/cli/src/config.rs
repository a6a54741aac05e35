use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::output::{Format, CSV_CONFIG_PREFIX};
use crate::{usage, CliError};

/// Parameters read from `--config`: either a bare parameter object, an
/// object `{command, format, out, params}`, or a previous output (JSON with
/// a `config` member, or CSV with a leading `# config:` line).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub format: Option<Format>,
    pub out: Option<String>,
    pub params: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let json = match text.strip_prefix(CSV_CONFIG_PREFIX) {
            Some(rest) => rest.lines().next().unwrap_or(""),
            None => text,
        };
        let mut v: Value = serde_json::from_str(json).map_err(|e| e.to_string())?;
        if let Some(inner) = v.get("config") {
            v = inner.clone();
        }
        let Value::Object(mut obj) = v else {
            return Err("expected a JSON object".into());
        };
        let command = take_string(&mut obj, "command")?;
        let out = take_string(&mut obj, "out")?;
        let format = take_string(&mut obj, "format")?
            .map(|f| f.parse::<Format>())
            .transpose()?;
        let params = match obj.remove("params") {
            Some(Value::Object(p)) => {
                if let Some(k) = obj.keys().next() {
                    return Err(format!("unexpected key `{k}` next to `params`"));
                }
                p
            }
            Some(_) => return Err("`params` must be an object".into()),
            None => obj,
        };
        Ok(Self {
            command,
            format,
            out,
            params,
        })
    }
}

fn take_string(obj: &mut Map<String, Value>, key: &str) -> Result<Option<String>, String> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(format!("`{key}` must be a string, got {other}")),
    }
}

/// Defaults, overlaid by config-file values, overlaid by explicit flags
/// (`null` flag values are flags not given).
pub fn merge<P: Serialize + DeserializeOwned>(
    defaults: &P,
    file: Option<&Map<String, Value>>,
    flags: Value,
) -> Result<P, CliError> {
    let Value::Object(mut base) = serde_json::to_value(defaults).expect("parameters serialise") else {
        unreachable!("parameter structs serialise to objects");
    };
    if let Some(file) = file {
        for (k, v) in file {
            if !base.contains_key(k) {
                return Err(usage(format!("unknown parameter `{k}` in config")));
            }
            base.insert(k.clone(), v.clone());
        }
    }
    if let Value::Object(flags) = flags {
        for (k, v) in flags {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| usage(format!("invalid parameters: {e}")))
}
