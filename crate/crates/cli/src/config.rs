//! Run configuration: JSON schema, defaults and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Reduce,
    Compare,
    Check,
    Aks,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Simulate => "simulate",
            Mode::Reduce => "reduce",
            Mode::Compare => "compare",
            Mode::Check => "check",
            Mode::Aks => "aks",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetrySpec>,
    #[serde(default)]
    pub integration: Integration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic: Option<InitialCondition>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Seed for random-sample checks; `GEOMECH_SEED` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Builtin(String),
    Custom(CustomSystem),
}

/// Expression-defined system on `q1..qn`, `v1..vn` and `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    pub dim: usize,
    pub lagrangian: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    /// One expression vector in `q1..qn` per generator.
    pub generators: Vec<Vec<String>>,
    /// `c^k_ab` flattened as `[k][a][b]`; empty means abelian.
    #[serde(default)]
    pub structure_constants: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<ConnectionSpec>,
    pub mu: Vec<f64>,
}

/// `omega^a = d q_{group[a]} + A[a][k] d s_k` over the remaining (base)
/// coordinates `s`, in increasing order. `A` may reference base coordinates
/// only.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    /// 1-based indices of the group coordinates.
    pub group: Vec<usize>,
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Integration {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
}

impl Default for Integration {
    fn default() -> Self {
        Self { t0: 0.0, t1: 10.0, dt: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub noether: f64,
    pub energy: f64,
    pub invariance: f64,
    pub residual: f64,
    /// Largest base-coordinate gap between full and reduced runs.
    pub compare: f64,
    /// Momentum drift of the full run in compare mode.
    pub compare_momentum: f64,
    pub spectral: f64,
    pub stationarity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            noether: 1e-6,
            energy: 1e-6,
            invariance: 1e-6,
            residual: 1e-5,
            compare: 1e-5,
            compare_momentum: 1e-8,
            spectral: 1e-6,
            stationarity: 1e-9,
        }
    }
}

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

pub const AKS_BUILTINS: [&str; 2] = ["aks_sl2", "aks_sl3"];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("config {}: {e}", path.display())))
    }

    /// Applies command-line overrides and defaults, then checks the
    /// structural invariants that do not need the system built.
    pub fn effective(mut self, mode: Mode, dt: Option<f64>, env_seed: Option<u64>) -> Result<Self, Failure> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(Failure::Validation(format!("config mode `{m}` conflicts with command `{mode}`")));
            }
        }
        self.mode = Some(mode);
        if let Some(dt) = dt {
            self.integration.dt = dt;
        }
        self.seed = Some(env_seed.or(self.seed).unwrap_or(DEFAULT_SEED));
        if self.outputs.csv.is_none() && matches!(mode, Mode::Simulate | Mode::Reduce | Mode::Aks) {
            self.outputs.csv = Some(format!("{mode}.csv"));
        }
        let Integration { t0, t1, dt } = self.integration;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Failure::Validation(format!("integration.dt must be positive, got {dt}")));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Failure::Validation(format!("integration needs t1 > t0, got [{t0}, {t1}]")));
        }
        let tol = self.tolerances;
        for (name, x) in [
            ("noether", tol.noether),
            ("energy", tol.energy),
            ("invariance", tol.invariance),
            ("residual", tol.residual),
            ("compare", tol.compare),
            ("compare_momentum", tol.compare_momentum),
            ("spectral", tol.spectral),
            ("stationarity", tol.stationarity),
        ] {
            if !(x > 0.0) {
                return Err(Failure::Validation(format!("tolerances.{name} must be positive, got {x}")));
            }
        }
        let is_aks = matches!(&self.system, SystemSpec::Builtin(name) if AKS_BUILTINS.contains(&name.as_str()));
        if mode == Mode::Aks && !is_aks {
            return Err(Failure::Validation(format!("aks mode needs one of {AKS_BUILTINS:?}")));
        }
        if is_aks && matches!(mode, Mode::Reduce | Mode::Compare) {
            return Err(Failure::Validation(format!("{mode} is not available for AKS systems; use aks or check")));
        }
        if is_aks && (self.ic.is_some() || self.symmetry.is_some()) {
            return Err(Failure::Validation("AKS systems take their state from the built-in parameters; drop ic and symmetry".into()));
        }
        if let (SystemSpec::Builtin(name), None) = (&self.system, &self.ic) {
            if let Some(b) = geomech::builtins::builtin(name) {
                self.ic = Some(InitialCondition { q: b.q0, v: b.v0 });
            }
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
