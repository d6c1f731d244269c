use std::f64::consts::PI;
use std::path::Path;

use serde_json::{Map, Value};

use crate::CliError;

/// Parses a real literal. Besides plain numbers this accepts multiples and
/// fractions of `pi`: `pi`, `-pi/2`, `2pi`, `3*pi/4`, `pi/4`.
pub fn parse_real(text: &str) -> Result<f64, CliError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CliError::config(format!("cannot parse '{text}' as a real number"));
    if s.is_empty() {
        return Err(bad());
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (s.as_str(), None),
    };
    let num_value = if let Some(prefix) = num.strip_suffix("pi") {
        let prefix = prefix.strip_suffix('*').unwrap_or(prefix);
        let factor = match prefix {
            "" | "+" => 1.0,
            "-" => -1.0,
            p => p.parse::<f64>().map_err(|_| bad())?,
        };
        factor * PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let value = match den {
        Some(d) => {
            let d: f64 = d.parse().map_err(|_| bad())?;
            if d == 0.0 {
                return Err(bad());
            }
            num_value / d
        }
        None => num_value,
    };
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

/// Options from an optional JSON config file; command-line flags win.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: Map<String, Value>,
}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config file {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config file {} is not valid JSON: {e}", path.display())))?;
        let Value::Object(obj) = value else {
            return Err(CliError::config("config file must hold a JSON object"));
        };
        Ok(Self { values: obj.into_iter().map(|(k, v)| (normalize(&k), v)).collect() })
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.values.get(&normalize(key))
    }

    fn text_of(key: &str, v: &Value) -> Result<String, CliError> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            _ => Err(CliError::config(format!("config entry '{key}' must be a string, number or boolean"))),
        }
    }

    /// Flag value, else config value, as text.
    pub fn text(&self, key: &str, flag: &Option<String>) -> Result<Option<String>, CliError> {
        if let Some(f) = flag {
            return Ok(Some(f.clone()));
        }
        self.raw(key).map(|v| Self::text_of(key, v)).transpose()
    }

    pub fn real(&self, key: &str, flag: &Option<String>) -> Result<Option<f64>, CliError> {
        self.text(key, flag)?
            .map(|t| parse_real(&t).map_err(|e| CliError::config(format!("--{key}: {}", e.message))))
            .transpose()
    }

    pub fn real_or(&self, key: &str, flag: &Option<String>, default: f64) -> Result<f64, CliError> {
        Ok(self.real(key, flag)?.unwrap_or(default))
    }

    pub fn int(&self, key: &str, flag: &Option<String>) -> Result<Option<i64>, CliError> {
        self.text(key, flag)?
            .map(|t| t.trim().parse::<i64>().map_err(|_| CliError::config(format!("--{key}: '{t}' is not an integer"))))
            .transpose()
    }

    pub fn count_or(&self, key: &str, flag: &Option<String>, default: usize) -> Result<usize, CliError> {
        match self.int(key, flag)? {
            Some(v) if v >= 0 => Ok(v as usize),
            Some(v) => Err(CliError::config(format!("--{key} must be non-negative, got {v}"))),
            None => Ok(default),
        }
    }

    pub fn flag(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        match self.raw(key) {
            None => Ok(false),
            Some(Value::Bool(b)) => Ok(*b),
            Some(_) => Err(CliError::config(format!("config entry '{key}' must be a boolean"))),
        }
    }

    /// Comma-separated integers, e.g. `0,1,2`, or a JSON array.
    pub fn int_list(&self, key: &str, flag: &Option<String>) -> Result<Option<Vec<i64>>, CliError> {
        if flag.is_none() {
            if let Some(Value::Array(items)) = self.raw(key) {
                return items
                    .iter()
                    .map(|v| v.as_i64().ok_or_else(|| CliError::config(format!("config entry '{key}' must list integers"))))
                    .collect::<Result<Vec<_>, _>>()
                    .map(Some);
            }
        }
        let Some(text) = self.text(key, flag)? else { return Ok(None) };
        text.split(',')
            .map(|p| p.trim().parse::<i64>().map_err(|_| CliError::config(format!("--{key}: '{p}' is not an integer"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn pi_literals() {
        assert_eq!(parse_real("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_real("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_real("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_real("3*pi/4").unwrap(), 0.75 * PI);
        assert_eq!(parse_real("0.7853981634").unwrap(), 0.7853981634);
        assert_eq!(parse_real("-0.5").unwrap(), -0.5);
        assert_eq!(parse_real("1e-3").unwrap(), 1e-3);
    }

    #[test]
    fn bad_literals() {
        for s in ["", "pie", "pi/0", "1/x", "nan", "inf", "--1"] {
            assert!(parse_real(s).is_err(), "{s}");
        }
    }

    #[test]
    fn flags_override_config() {
        let mut values = Map::new();
        values.insert("alpha".into(), Value::from(2.0));
        values.insert("re-min".into(), Value::from("pi"));
        let cfg = Config { values: values.into_iter().map(|(k, v)| (normalize(&k), v)).collect() };
        assert_eq!(cfg.real("alpha", &None).unwrap(), Some(2.0));
        assert_eq!(cfg.real("alpha", &Some("1".into())).unwrap(), Some(1.0));
        assert_eq!(cfg.real("re_min", &None).unwrap(), Some(PI));
        assert_eq!(cfg.real("beta", &None).unwrap(), None);
    }
}
