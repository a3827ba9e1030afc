//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nsul_core::evolve::{InitialCondition, Scheme, SolverConfig};
use nsul_core::GridSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} set twice")]
    Duplicate { line: usize, key: String },
    #[error("missing required key {key:?}")]
    Missing { key: String },
    #[error("{}key {key:?} = {value:?}: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, key: String, value: String, reason: String },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Known keys and their defaults. `None` marks a required key.
const KEYS: &[(&str, Option<&str>)] = &[
    ("grid.n1", Some("64")),
    ("grid.n2", Some("64")),
    ("grid.l1", Some("6.283185307179586")),
    ("grid.l2", Some("6.283185307179586")),
    ("physics.nu", None),
    ("physics.u_inf1", Some("0")),
    ("physics.u_inf2", Some("0")),
    ("ic.family", Some("taylor_green")),
    ("ic.amplitude", Some("1")),
    ("ic.mode", Some("1")),
    ("ic.value1", Some("0")),
    ("ic.value2", Some("0")),
    ("ic.circulation", Some("1")),
    ("ic.sigma0", Some("1")),
    ("ic.kmin", Some("1")),
    ("ic.kmax", Some("4")),
    ("ic.seed", Some("0")),
    ("ic.ensemble_size", Some("1")),
    ("scheme.name", Some("etd_vorticity")),
    ("scheme.dt", Some("0.001")),
    ("scheme.t_end", Some("1")),
    ("scheme.picard_tol", Some("1e-12")),
    ("scheme.picard_max_iter", Some("100")),
    ("scheme.picard_nodes", Some("64")),
    ("scheme.ladder_study", Some("taylor_green")),
    ("monitors.list", Some("")),
    ("monitors.c7", Some("1")),
    ("monitors.radius", Some("")),
    ("monitors.heat_radius", Some("1")),
    ("monitors.heat_substeps", Some("16")),
    ("output.every", Some("1")),
    ("output.csv", Some("diagnostics.csv")),
    ("output.manifest", Some("manifest.txt")),
    ("output.snapshots", Some("")),
    ("output.check_invariants", Some("false")),
];

pub const HEAT_MONITORS: [&str; 2] = ["heat_weighted", "heat_local"];

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
    lines: BTreeMap<String, usize>,
    pub grid: GridSpec,
    pub u_inf: [f64; 2],
    pub ic: InitialCondition,
    pub solver: SolverConfig,
    pub monitors: Vec<String>,
    pub c7: f64,
    pub radius: Option<f64>,
    pub heat_radius: f64,
    pub heat_substeps: usize,
    pub output_every: usize,
    pub csv: String,
    pub manifest: String,
    pub snapshots: Vec<f64>,
    pub check_invariants: bool,
    pub ensemble_size: usize,
    pub ladder_study: String,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        let mut lines = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, text: raw.to_string() })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line, text: raw.to_string() });
            }
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if lines.insert(key.to_string(), line).is_some() {
                return Err(ConfigError::Duplicate { line, key: key.to_string() });
            }
            values.insert(key.to_string(), value.to_string());
        }
        for (k, default) in KEYS {
            if !values.contains_key(*k) {
                match default {
                    Some(d) => {
                        values.insert(k.to_string(), d.to_string());
                    }
                    None => return Err(ConfigError::Missing { key: k.to_string() }),
                }
            }
        }
        Self::resolve(values, lines)
    }

    /// Copy with one key replaced, re-validated.
    pub fn with(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::UnknownKey { line: 0, key: key.to_string() });
        }
        let mut values = self.values.clone();
        values.insert(key.to_string(), value.to_string());
        let mut lines = self.lines.clone();
        lines.remove(key);
        Self::resolve(values, lines)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Every resolved key, one `key = value` line each, sorted.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn resolve(values: BTreeMap<String, String>, lines: BTreeMap<String, usize>) -> Result<Self, ConfigError> {
        let r = Reader { values: &values, lines: &lines };
        let grid = GridSpec::new(r.usize("grid.n1")?, r.usize("grid.n2")?, r.f64("grid.l1")?, r.f64("grid.l2")?)
            .map_err(|e| r.invalid("grid.n1", e.to_string()))?;
        let nu = r.f64("physics.nu")?;
        if !(nu > 0.0) {
            return Err(r.invalid("physics.nu", "viscosity must be positive".into()));
        }
        let u_inf = [r.f64("physics.u_inf1")?, r.f64("physics.u_inf2")?];
        let ic = match r.str("ic.family") {
            "constant" => InitialCondition::Constant { value: [r.f64("ic.value1")?, r.f64("ic.value2")?] },
            "shear" => InitialCondition::Shear { amplitude: r.f64("ic.amplitude")?, mode: r.usize("ic.mode")? },
            "taylor_green" => InitialCondition::TaylorGreen { amplitude: r.f64("ic.amplitude")? },
            "lamb_oseen" => {
                InitialCondition::LambOseen { circulation: r.f64("ic.circulation")?, sigma0: r.f64("ic.sigma0")? }
            }
            "random_bandlimited" => InitialCondition::RandomBandlimited {
                kmin: r.f64("ic.kmin")?,
                kmax: r.f64("ic.kmax")?,
                amplitude: r.f64("ic.amplitude")?,
                seed: r.u64("ic.seed")?,
            },
            _ => return Err(r.invalid("ic.family", "unknown initial-condition family".into())),
        };
        let mut solver = SolverConfig::new(nu, r.f64("scheme.dt")?, r.f64("scheme.t_end")?);
        solver.scheme = Scheme::parse(r.str("scheme.name")).map_err(|e| r.invalid("scheme.name", e.to_string()))?;
        solver.picard_tol = r.f64("scheme.picard_tol")?;
        solver.picard_max_iter = r.usize("scheme.picard_max_iter")?;
        solver.picard_nodes = r.usize("scheme.picard_nodes")?;
        solver.validate().map_err(|e| r.invalid("scheme.dt", e.to_string()))?;
        let monitors: Vec<String> = r
            .str("monitors.list")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        let c7 = r.f64("monitors.c7")?;
        let radius = match r.str("monitors.radius") {
            "" => None,
            _ => Some(r.f64("monitors.radius")?),
        };
        for m in &monitors {
            let heat = HEAT_MONITORS.contains(&m.as_str());
            if heat && solver.scheme != Scheme::Heat {
                return Err(r.invalid("monitors.list", format!("monitor {m} needs scheme.name = heat")));
            }
            if !heat {
                nsul_core::bounds::MonitorKind::parse(m, c7, radius)
                    .map_err(|e| r.invalid("monitors.list", e.to_string()))?;
            }
        }
        let snapshots = r
            .str("output.snapshots")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| r.invalid("output.snapshots", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let ladder_study = r.str("scheme.ladder_study").to_string();
        if !["taylor_green", "bs_truncated", "q_decomposition"].contains(&ladder_study.as_str()) {
            return Err(r.invalid("scheme.ladder_study", "expected taylor_green, bs_truncated or q_decomposition".into()));
        }
        let check_invariants = match r.str("output.check_invariants") {
            "true" => true,
            "false" => false,
            _ => return Err(r.invalid("output.check_invariants", "expected true or false".into())),
        };
        let out = Self {
            grid,
            u_inf,
            ic,
            solver,
            monitors,
            c7,
            radius,
            heat_radius: r.f64("monitors.heat_radius")?,
            heat_substeps: r.usize("monitors.heat_substeps")?,
            output_every: r.usize("output.every")?.max(1),
            csv: r.str("output.csv").to_string(),
            manifest: r.str("output.manifest").to_string(),
            snapshots,
            check_invariants,
            ensemble_size: r.usize("ic.ensemble_size")?,
            ladder_study,
            values: values.clone(),
            lines: lines.clone(),
        };
        Ok(out)
    }
}

struct Reader<'a> {
    values: &'a BTreeMap<String, String>,
    lines: &'a BTreeMap<String, usize>,
}

impl Reader<'_> {
    fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn invalid(&self, key: &str, reason: String) -> ConfigError {
        ConfigError::Invalid {
            line: self.lines.get(key).copied(),
            key: key.to_string(),
            value: self.str(key).to_string(),
            reason,
        }
    }

    fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = match self.str(key) {
            "pi" => PI,
            "2pi" => 2.0 * PI,
            s => s.parse::<f64>().map_err(|e| self.invalid(key, e.to_string()))?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(key, "must be finite".into()))
        }
    }

    fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.str(key).parse::<usize>().map_err(|e| self.invalid(key, e.to_string()))
    }

    fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.str(key).parse::<u64>().map_err(|e| self.invalid(key, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse("physics.nu = 0.1\n").unwrap();
        assert_eq!(c.grid.n1, 64);
        assert_eq!(c.solver.nu, 0.1);
        assert!(c.monitors.is_empty());
        assert_eq!(c.ic, InitialCondition::TaylorGreen { amplitude: 1.0 });
    }

    #[test]
    fn missing_viscosity_is_named() {
        let e = ExperimentConfig::parse("grid.n1 = 32\n").unwrap_err();
        assert!(e.to_string().contains("nu"), "{e}");
    }

    #[test]
    fn unknown_and_duplicate_keys_carry_lines() {
        let e = ExperimentConfig::parse("physics.nu = 1\n# c\ngrid.size = 3\n").unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey { line: 3, .. }), "{e}");
        let e = ExperimentConfig::parse("physics.nu = 1\nphysics.nu = 2\n").unwrap_err();
        assert!(matches!(e, ConfigError::Duplicate { line: 2, .. }));
        let e = ExperimentConfig::parse("physics.nu = 1\nscheme.dt = fast\n").unwrap_err();
        assert!(e.to_string().starts_with("line 2"), "{e}");
        assert!(ExperimentConfig::parse("physics.nu 1\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::parse("physics.nu = 0.5\nmonitors.list = exp_growth, linear_growth\n").unwrap();
        let d = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c.to_text(), d.to_text());
        assert_eq!(d.monitors, vec!["exp_growth", "linear_growth"]);
    }

    #[test]
    fn heat_monitors_need_heat_scheme() {
        assert!(ExperimentConfig::parse("physics.nu = 1\nmonitors.list = heat_local\n").is_err());
        assert!(ExperimentConfig::parse("physics.nu = 1\nscheme.name = heat\nmonitors.list = heat_local\n").is_ok());
    }
}
