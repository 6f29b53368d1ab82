//! Flat sectioned key=value configuration (INI-like), schema-validated
//! before any compute. Unknown sections or keys are rejected.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> CResult<T> {
    Err(ConfigError(msg.into()))
}

/// Parsed config: ordered sections of ordered key/value pairs, plus the
/// raw bytes for hashing.
#[derive(Debug, Clone)]
pub struct Config {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
    pub hash: u64,
}

/// FNV-1a over the raw config bytes; recorded in every artifact footer.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Config {
    pub fn parse(text: &str) -> CResult<Config> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return err(format!("line {}: unterminated section header", lineno + 1));
                };
                let name = name.trim().to_ascii_lowercase();
                if sections.contains_key(&name) {
                    return err(format!("line {}: duplicate section [{name}]", lineno + 1));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected key = value", lineno + 1));
            };
            let Some(section) = &current else {
                return err(format!("line {}: key outside any section", lineno + 1));
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            let sec = sections.get_mut(section).unwrap();
            if sec.contains_key(&key) {
                return err(format!("line {}: duplicate key '{key}'", lineno + 1));
            }
            sec.insert(key, value);
        }
        Ok(Config {
            sections,
            hash: fnv1a(text.as_bytes()),
        })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|s| s.as_str())
    }

    pub fn get_or(&self, section: &str, key: &str, default: &str) -> String {
        self.get(section, key).unwrap_or(default).to_string()
    }

    pub fn require(&self, section: &str, key: &str) -> CResult<&str> {
        self.get(section, key)
            .ok_or_else(|| ConfigError(format!("missing key '{key}' in [{section}]")))
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> CResult<f64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => parse_f64(v)
                .ok_or_else(|| ConfigError(format!("[{section}] {key}: bad number '{v}'"))),
        }
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> CResult<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("[{section}] {key}: bad integer '{v}'"))),
        }
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> CResult<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some("false") | Some("no") | Some("0") => Ok(false),
            Some(v) => err(format!("[{section}] {key}: bad boolean '{v}'")),
        }
    }

    /// Validate against the per-experiment schema: every present section and
    /// key must be allowed.
    pub fn validate(&self) -> CResult<String> {
        let kind = self.require("experiment", "kind")?.to_string();
        let schema = schema_for(&kind)
            .ok_or_else(|| ConfigError(format!("unknown experiment kind '{kind}'")))?;
        for (section, keys) in &self.sections {
            let Some(allowed) = schema.iter().find(|(s, _)| s == section) else {
                return err(format!("unknown section [{section}] for kind '{kind}'"));
            };
            for key in keys.keys() {
                if !allowed.1.contains(&key.as_str()) {
                    return err(format!("unknown key '{key}' in [{section}] for kind '{kind}'"));
                }
            }
        }
        Ok(kind)
    }

    /// Keys whose values are ranged lists `{a, b, c}`, as (section, key, values).
    pub fn ranged_keys(&self) -> Vec<(String, String, Vec<String>)> {
        let mut out = Vec::new();
        for (s, keys) in &self.sections {
            for (k, v) in keys {
                if let Some(inner) = v.strip_prefix('{').and_then(|x| x.strip_suffix('}')) {
                    let vals: Vec<String> =
                        inner.split(',').map(|p| p.trim().to_string()).collect();
                    out.push((s.clone(), k.clone(), vals));
                }
            }
        }
        out
    }

    /// A copy with one key replaced by a concrete value (for sweeps).
    pub fn with_value(&self, section: &str, key: &str, value: &str) -> Config {
        let mut c = self.clone();
        if let Some(s) = c.sections.get_mut(section) {
            s.insert(key.to_string(), value.to_string());
        }
        // hash must track the instantiated config
        let mut canon = String::new();
        for (s, keys) in &c.sections {
            canon.push_str(&format!("[{s}]\n"));
            for (k, v) in keys {
                canon.push_str(&format!("{k}={v}\n"));
            }
        }
        c.hash = fnv1a(canon.as_bytes());
        c
    }
}

pub fn parse_f64(v: &str) -> Option<f64> {
    v.trim().parse().ok()
}

type Schema = Vec<(&'static str, Vec<&'static str>)>;

const OUTPUT_KEYS: [&str; 1] = ["dir"];
const BG_KEYS: [&str; 4] = ["kind", "mass", "potential", "kerr_a"];

fn schema_for(kind: &str) -> Option<Schema> {
    let experiment = ("experiment", vec!["kind"]);
    let output = ("output", OUTPUT_KEYS.to_vec());
    let background = ("background", BG_KEYS.to_vec());
    match kind {
        "evolve" => Some(vec![
            experiment,
            output,
            background,
            (
                "grid",
                vec![
                    "scheme", "rstar_min", "rstar_max", "drstar", "cfl", "t_end", "left",
                    "u0", "v0", "h", "u_max", "v_max",
                ],
            ),
            ("data", vec!["l", "phi0", "phi1", "on_u0", "on_v0"]),
            ("forcing", vec!["chi", "fr"]),
            (
                "observers",
                vec!["radii", "stride", "rays", "radiation", "fit_target", "fit_window"],
            ),
        ]),
        "spectral" => Some(vec![
            experiment,
            output,
            background,
            (
                "spectral",
                vec![
                    "sigma_min", "sigma_max", "samples", "r_obs", "f", "support_lo",
                    "support_hi", "l",
                ],
            ),
        ]),
        "model" => Some(vec![
            experiment,
            output,
            ("model", vec!["method", "rhat_min", "rhat_max", "points"]),
        ]),
        "expansion" => Some(vec![
            experiment,
            output,
            background,
            ("expansion", vec!["f", "support_lo", "support_hi"]),
        ]),
        "fit-tail" => Some(vec![
            experiment,
            output,
            (
                "fit_tail",
                vec!["input", "target_exponent", "predicted", "window_lo", "window_hi"],
            ),
        ]),
        "ray-profile" => Some(vec![
            experiment,
            output,
            background,
            ("grid", vec!["u0", "v0", "h", "u_max", "v_max"]),
            ("forcing", vec!["chi", "fr"]),
            ("observers", vec!["rays", "stride", "window_lo"]),
        ]),
        "kerr-constant" => Some(vec![
            experiment,
            output,
            (
                "kerr",
                vec!["mass", "a", "phi1", "support_lo", "support_hi"],
            ),
        ]),
        "verify" => Some(vec![
            experiment,
            output,
            ("verify", vec!["criteria", "compare"]),
        ]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_rejects_unknown_keys() {
        let text = "[experiment]\nkind = model\n[model]\nmethod = quadrature\npoints = 10\n";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.validate().unwrap(), "model");
        assert_eq!(c.get("model", "method"), Some("quadrature"));

        let bad = "[experiment]\nkind = model\n[model]\nmathod = q\n";
        let c = Config::parse(bad).unwrap();
        assert!(c.validate().is_err());

        let bad2 = "[experiment]\nkind = model\n[grid]\nh = 1\n";
        assert!(Config::parse(bad2).unwrap().validate().is_err());
    }

    #[test]
    fn ranged_detection() {
        let text = "[experiment]\nkind = evolve\n[data]\nl = {0, 1, 2}\n";
        let c = Config::parse(text).unwrap();
        let ranged = c.ranged_keys();
        assert_eq!(ranged.len(), 1);
        assert_eq!(ranged[0].2, vec!["0", "1", "2"]);
        let inst = c.with_value("data", "l", "1");
        assert_eq!(inst.get("data", "l"), Some("1"));
        assert_ne!(inst.hash, c.hash);
    }

    #[test]
    fn hash_is_stable() {
        let a = Config::parse("[experiment]\nkind = model\n").unwrap();
        let b = Config::parse("[experiment]\nkind = model\n").unwrap();
        assert_eq!(a.hash, b.hash);
        let c = Config::parse("[experiment]\nkind = verify\n").unwrap();
        assert_ne!(a.hash, c.hash);
    }
}
