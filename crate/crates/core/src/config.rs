//! Experiment configuration files.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! [model]
//! h = 1.0
//! q = { atoms = [[0.2, 0.5], [0.5, 0.5]] }   # or { family = "beta", params = [2.0, 3.0, 0.6], grid_points = 64 }
//! p0 = "delta_h"                             # or { atoms = [[x, w], ...] }
//!
//! [law]
//! type = "discrete"
//! params = { atoms = [[0.1, 0.5], [0.5, 0.5]] }
//!
//! [sim]
//! seed = 7
//!
//! [output]
//! format = "json"
//!
//! [[sweep.axes]]
//! key = "model.h"
//! values = [0.6, 0.8, 1.0]
//! ```
//!
//! Every `[sim]` key has a default. Overrides given as dotted keys replace
//! values of the file before it is interpreted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backward::StoppingRule;
use crate::condensation::CriterionConfig;
use crate::error::{Error, Result};
use crate::law::MutationLaw;
use crate::measure::{DiscreteMeasure, MERGE_TOL};
use crate::seed::SeedSpec;
use crate::validation::SuiteSettings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub law: MutationLaw,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub q: MeasureSpec,
    pub h: f64,
    #[serde(default)]
    pub p0: InitialSpec,
}

/// A measure given by its atoms or discretised from a density family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MeasureSpec {
    Atoms { atoms: Vec<(f64, f64)> },
    Grid { family: GridFamily, params: Vec<f64>, grid_points: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFamily {
    /// Uniform on `[lo, hi]`; params `[lo, hi]`.
    Uniform,
    /// Beta(alpha, gamma) rescaled to `[0, upper]`; params `[alpha, gamma, upper]`.
    Beta,
}

impl MeasureSpec {
    pub fn build(&self) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Atoms { atoms } => DiscreteMeasure::canonicalize(atoms.iter().copied()),
            MeasureSpec::Grid { family, params, grid_points } => {
                let bad = || Error::Config(format!("grid family {family:?} got params {params:?}"));
                match family {
                    GridFamily::Uniform => {
                        let [lo, hi] = params[..] else { return Err(bad()) };
                        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                            return Err(bad());
                        }
                        DiscreteMeasure::discretize_density(
                            |x| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 },
                            hi,
                            *grid_points,
                        )
                    }
                    GridFamily::Beta => {
                        let [alpha, gamma, upper] = params[..] else { return Err(bad()) };
                        if !(alpha > 0.0 && gamma > 0.0) {
                            return Err(bad());
                        }
                        DiscreteMeasure::discretize_density(
                            |x| {
                                let t = x / upper;
                                t.powf(alpha - 1.0) * (1.0 - t).powf(gamma - 1.0)
                            },
                            upper,
                            *grid_points,
                        )
                    }
                }
            }
        }
    }
}

/// Initial population: `"delta_h"` or explicit atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Named(String),
    Atoms { atoms: Vec<(f64, f64)> },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Named("delta_h".into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub depth_cap: usize,
    pub tol: f64,
    pub window: usize,
    pub burn_in: usize,
    pub replicas: usize,
    pub n_steps: usize,
    pub ergodic_depth: usize,
    pub batches: usize,
    pub mass_tol: f64,
    /// Depth of the scalar two-atom recursion.
    pub two_atom_depth: usize,
    pub validation_replicas: usize,
    pub repetitions: usize,
    pub fuzz_cases: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        let rule = StoppingRule::default();
        let crit = CriterionConfig::default();
        let suite = SuiteSettings::default();
        SimConfig {
            seed: 0,
            depth_cap: rule.depth_cap,
            tol: rule.tol,
            window: rule.window,
            burn_in: crit.burn_in,
            replicas: crit.replicas,
            n_steps: suite.n_steps,
            ergodic_depth: crit.ergodic_depth,
            batches: crit.batches,
            mass_tol: crit.mass_tol,
            two_atom_depth: 10_000,
            validation_replicas: suite.replicas,
            repetitions: suite.repetitions,
            fuzz_cases: suite.fuzz_cases,
        }
    }
}

impl SimConfig {
    pub fn rule(&self) -> StoppingRule {
        StoppingRule { tol: self.tol, window: self.window, depth_cap: self.depth_cap }
    }

    pub fn criterion(&self) -> CriterionConfig {
        CriterionConfig {
            replicas: self.replicas,
            ergodic_depth: self.ergodic_depth,
            burn_in: self.burn_in,
            batches: self.batches,
            rule: self.rule(),
            mass_tol: self.mass_tol,
        }
    }

    pub fn suite(&self) -> SuiteSettings {
        SuiteSettings {
            replicas: self.validation_replicas,
            n_steps: self.n_steps,
            repetitions: self.repetitions,
            fuzz_cases: self.fuzz_cases,
        }
    }

    pub fn seed_spec(&self) -> SeedSpec {
        SeedSpec::new(self.seed, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: OutputFormat,
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    pub record_measures: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<SweepAxis>,
}

/// One axis of a sweep: a dotted configuration key and the values it takes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<toml::Value>,
}

/// The model after discretisation and validation.
#[derive(Clone, Debug)]
pub struct ResolvedModel {
    pub q: DiscreteMeasure,
    pub h: f64,
    pub p0: DiscreteMeasure,
}

/// Sets `key` (dotted path) in `table`, creating intermediate tables.
pub fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Usage(format!("empty key {key:?}")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur.entry(part).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Usage(format!("key {key:?} passes through non-table {part:?}"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses the right-hand side of `--set key=value`: any TOML value, or a
/// bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    /// Reads the TOML file (if any) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        Self::from_table(table, overrides)
    }

    pub fn from_table(mut table: toml::Table, overrides: &[(String, toml::Value)]) -> Result<Self> {
        for (k, v) in overrides {
            set_dotted(&mut table, k, v.clone())?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The configuration as a TOML table, for re-applying overrides.
    pub fn to_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve()?;
        let s = &self.sim;
        let positive = [("sim.tol", s.tol), ("sim.mass_tol", s.mass_tol)];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("sim.window", s.window),
            ("sim.n_steps", s.n_steps),
            ("sim.two_atom_depth", s.two_atom_depth),
            ("sim.repetitions", s.repetitions),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if s.replicas < 2 || s.validation_replicas < 20 {
            return Err(Error::Config("sim.replicas must be >= 2 and sim.validation_replicas >= 20".into()));
        }
        if s.batches < 2 || s.ergodic_depth < 2 * s.batches {
            return Err(Error::Config("need sim.batches >= 2 and sim.ergodic_depth >= 2 * sim.batches".into()));
        }
        if s.depth_cap < 2 * s.window {
            return Err(Error::Config("sim.depth_cap must be at least twice sim.window".into()));
        }
        let e = self.law.expected_log_one_minus()?;
        if !e.is_finite() {
            return Err(Error::Config(format!("E[ln(1 - beta)] = {e} for law {}", self.law)));
        }
        Ok(())
    }

    /// Discretises `Q`, builds `P_0` and checks `h` against both.
    pub fn resolve(&self) -> Result<ResolvedModel> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        let q = self.model.q.build().map_err(cfg_err)?;
        if !q.is_probability() {
            return Err(Error::Config(format!("model.q must have total mass 1, got {}", q.total())));
        }
        if q.is_dirac_zero() {
            return Err(Error::Config("model.q must not be the point mass at 0".into()));
        }
        let h = self.model.h;
        let s_q = q.support_sup().map_err(cfg_err)?.sup_point;
        if !(h > 0.0 && h <= 1.0) || h < s_q - MERGE_TOL {
            return Err(Error::Config(format!("model.h = {h} must lie in [S_Q, 1] = [{s_q}, 1]")));
        }
        let p0 = match &self.model.p0 {
            InitialSpec::Named(name) if name == "delta_h" => DiscreteMeasure::dirac(h)?,
            InitialSpec::Named(name) => {
                return Err(Error::Config(format!("model.p0 = {name:?}; expected \"delta_h\" or atoms")))
            }
            InitialSpec::Atoms { atoms } => DiscreteMeasure::canonicalize(atoms.iter().copied()).map_err(cfg_err)?,
        };
        if !p0.is_probability() {
            return Err(Error::Config("model.p0 must have total mass 1".into()));
        }
        let top = p0.support_sup().map_err(cfg_err)?.sup_point;
        if (top - h).abs() > MERGE_TOL {
            return Err(Error::Config(format!("model.p0 tops out at {top}, not at model.h = {h}")));
        }
        Ok(ResolvedModel { q, h, p0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
h = 1.0
q = { atoms = [[0.5, 1.0]] }

[law]
type = "constant"
params = { b = 0.3 }
"#;

    fn base() -> toml::Table {
        toml::from_str(BASE).unwrap()
    }

    #[test]
    fn defaults_and_resolution() {
        let cfg = ExperimentConfig::from_table(base(), &[]).unwrap();
        assert_eq!(cfg.sim, SimConfig::default());
        assert_eq!(cfg.output.format, OutputFormat::Json);
        let m = cfg.resolve().unwrap();
        assert_eq!(m.p0, DiscreteMeasure::dirac(1.0).unwrap());
        assert_eq!(m.q, DiscreteMeasure::dirac(0.5).unwrap());
    }

    #[test]
    fn overrides_take_precedence() {
        let o = vec![
            ("sim.seed".to_string(), parse_value("42")),
            ("model.h".to_string(), parse_value("0.8")),
            ("output.format".to_string(), parse_value("csv")),
        ];
        let cfg = ExperimentConfig::from_table(base(), &o).unwrap();
        assert_eq!(cfg.sim.seed, 42);
        assert_eq!(cfg.model.h, 0.8);
        assert_eq!(cfg.output.format, OutputFormat::Csv);
    }

    #[test]
    fn rejects_top_below_mutant_support() {
        let o = vec![("model.h".to_string(), parse_value("0.4"))];
        assert!(matches!(ExperimentConfig::from_table(base(), &o), Err(Error::Config(_))));
        let o = vec![("sim.tol".to_string(), parse_value("0.0"))];
        assert!(matches!(ExperimentConfig::from_table(base(), &o), Err(Error::Config(_))));
        let o = vec![("sim.bogus".to_string(), parse_value("1"))];
        assert!(matches!(ExperimentConfig::from_table(base(), &o), Err(Error::Config(_))));
        let o = vec![("model.p0".to_string(), parse_value("{ atoms = [[0.5, 1.0]] }"))];
        assert!(matches!(ExperimentConfig::from_table(base(), &o), Err(Error::Config(_))));
    }

    #[test]
    fn grid_families() {
        let uniform = MeasureSpec::Grid { family: GridFamily::Uniform, params: vec![0.0, 0.5], grid_points: 10 };
        let q = uniform.build().unwrap();
        assert_eq!(q.len(), 10);
        assert!((q.mean() - 0.25).abs() < 1e-12);
        let beta = MeasureSpec::Grid { family: GridFamily::Beta, params: vec![2.0, 2.0, 0.6], grid_points: 200 };
        assert!((beta.build().unwrap().mean() - 0.3).abs() < 1e-9);
        let bad = MeasureSpec::Grid { family: GridFamily::Beta, params: vec![2.0], grid_points: 10 };
        assert!(bad.build().is_err());
    }

    #[test]
    fn dotted_keys_and_values() {
        let mut t = toml::Table::new();
        set_dotted(&mut t, "a.b.c", parse_value("[1, 2]")).unwrap();
        assert_eq!(t["a"]["b"]["c"], toml::Value::Array(vec![1.into(), 2.into()]));
        assert_eq!(parse_value("hello"), toml::Value::String("hello".into()));
        assert!(set_dotted(&mut t, "a.b.c.d", parse_value("1")).is_err());
    }

    #[test]
    fn round_trips_through_table() {
        let cfg = ExperimentConfig::from_table(base(), &[]).unwrap();
        let again = ExperimentConfig::from_table(cfg.to_table().unwrap(), &[]).unwrap();
        assert_eq!(cfg, again);
    }
}
