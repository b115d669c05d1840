use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::CliError;

/// Effective key=value configuration: built-in defaults, then the config
/// file, then command-line flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Settings {
    values: Vec<(&'static str, String)>,
}

impl Settings {
    pub fn resolve(
        defaults: &[(&'static str, &str)],
        file: Option<&Path>,
        flags: &[(&'static str, Option<String>)],
    ) -> Result<Self, CliError> {
        let mut values: Vec<(&'static str, String)> = defaults.iter().map(|&(k, v)| (k, v.to_string())).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (key, value) in parse_config(&text)? {
                let slot = values.iter_mut().find(|(k, _)| *k == key).ok_or_else(|| {
                    let valid: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
                    CliError::Usage(format!("unknown config key `{key}` (valid: {})", valid.join(", ")))
                })?;
                slot.1 = value;
            }
        }
        for (key, value) in flags {
            if let Some(v) = value {
                let slot = values
                    .iter_mut()
                    .find(|(k, _)| k == key)
                    .expect("every flag has a default");
                slot.1 = v.clone();
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("setting `{key}` not declared"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| CliError::Usage(format!("invalid value `{raw}` for --{key}: {e}")))
    }

    /// A required path or name.
    pub fn required(&self, key: &str) -> Result<String, CliError> {
        match self.raw(key) {
            "" => Err(CliError::Usage(format!("missing required --{key}"))),
            v => Ok(v.to_string()),
        }
    }

    pub fn optional(&self, key: &str) -> Option<String> {
        Some(self.raw(key)).filter(|v| !v.is_empty()).map(str::to_string)
    }

    pub fn optional_parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            "" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }

    /// `# effective config` followed by one `key=value` line per setting.
    pub fn render(&self, command: &str) -> String {
        let mut s = format!("# effective config ({command})\n");
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// `key=value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        out.push((k.trim().trim_start_matches("--").to_string(), v.trim().to_string()));
    }
    Ok(out)
}
