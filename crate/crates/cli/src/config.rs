//! Flat `key = value` run configuration with strict key checking.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Keys every command accepts.
const COMMON: &[(&str, &str)] = &[
    ("v1", "5"),
    ("v2", "1.56"),
    ("cutoff", "16"),
    ("dt", "0.001"),
];

/// Command-specific keys and their defaults.
pub fn command_keys(command: &str) -> &'static [(&'static str, &'static str)] {
    match command {
        "bands" => &[
            ("phi", "0,0.8pi,pi"),
            ("n_kappas", "201"),
            ("n_bands", "5"),
            ("grid_per_period", "32"),
        ],
        "fit-sweep" => &[
            ("phi", "0,0.1pi,0.2pi,0.3pi,0.4pi,0.5pi,0.6pi,0.7pi,0.8pi,0.9pi,pi"),
            ("n_kappas", "401"),
            ("window", "0.3"),
            ("grid_per_period", "32"),
        ],
        "wannier" => &[
            ("phi", "0"),
            ("bands", "0,1,2"),
            ("max_site", "3"),
            ("n_kappas", "257"),
            ("periods", "256"),
            ("grid_per_period", "64"),
        ],
        "matrix-elements" => &[
            ("phi", "0"),
            ("v1_list", "4,6,8,10"),
            ("max_offset", "2"),
            ("n_kappas", "513"),
            ("grid_per_period", "64"),
        ],
        "klein" => &[
            ("phi", "0,0.8pi,pi"),
            ("f", "0.076"),
            ("v0", "19.77"),
            ("w0", "157"),
            ("sigma", "17"),
            ("kappa0", "0.95"),
            ("band", "2"),
            ("x0", "30"),
            ("t_final", "70"),
            ("stride", "100"),
            ("n_periods", "1024"),
            ("grid_per_period", "32"),
            ("n_kappas", "257"),
            ("window", "0.3"),
        ],
        "slater-check" => &[
            ("phi", "0"),
            ("pair_phi", "pi"),
            ("band", "0"),
            ("sigmas", "8,17,34"),
            ("n_sites", "512"),
            ("grid_per_period", "32"),
        ],
        _ => &[],
    }
}

/// Fully resolved configuration: defaults, then the config file, then overrides.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        let values = COMMON
            .iter()
            .chain(command_keys(command))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { command: command.to_string(), values }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize(key);
        match self.values.get_mut(&key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(ConfigError(format!(
                "unknown key '{key}' for command '{}'",
                self.command
            ))),
        }
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn load_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Applies `--key value` pairs.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            if !flag.starts_with("--") {
                return Err(ConfigError(format!("expected --key, found '{flag}'")));
            }
            if let Some((k, v)) = flag.split_once('=') {
                self.set(k, v)?;
                continue;
            }
            let value = it
                .next()
                .ok_or_else(|| ConfigError(format!("missing value for {flag}")))?;
            self.set(flag, value)?;
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ConfigError(format!("missing key '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_number(self.raw(key)?).map_err(|e| ConfigError(format!("{key}: {e}")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| ConfigError(format!("{key}: '{v}' is not a non-negative integer")))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)?
            .split(',')
            .map(|s| parse_number(s).map_err(|e| ConfigError(format!("{key}: {e}"))))
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.raw(key)?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("{key}: '{s}' is not a non-negative integer")))
            })
            .collect()
    }

    /// `# key=value` lines for every resolved key, sorted.
    pub fn header(&self) -> Vec<String> {
        let mut out = vec![
            format!("bichroma {}", env!("CARGO_PKG_VERSION")),
            format!("command={}", self.command),
        ];
        out.extend(self.values.iter().map(|(k, v)| format!("{k}={v}")));
        out
    }
}

/// Number with an optional `pi` factor: `0.8pi`, `pi`, `-0.5*pi`, `2.5`.
pub fn parse_number(text: &str) -> std::result::Result<f64, String> {
    let s = text.trim();
    let bad = || format!("'{s}' is not a number");
    if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let factor = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| bad())?,
        };
        return Ok(factor * PI);
    }
    let v: f64 = s.parse().map_err(|_| bad())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}
