//! JSON experiment configuration.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use nmrb::avg_channel::DecayMode;
use nmrb::fock::{thermal_state_space, EnvSpace, EnvState, ModeSpec};
use nmrb::montecarlo::Gateset;
use nmrb::spin_boson::SpinBosonModel;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Averaged,
    Montecarlo,
    Closed,
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Nonmarkovian,
    Markovian,
    Xi,
}

impl From<ModeArg> for DecayMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Nonmarkovian => DecayMode::NonMarkovian,
            ModeArg::Markovian => DecayMode::Markovian,
            ModeArg::Xi => DecayMode::Xi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub omega: f64,
    pub cutoff: usize,
}

/// A single coupling for every (mode, qubit) pair, or a `[mode][qubit]` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coupling {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

/// Inverse temperature; JSON number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta(pub f64);

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() && self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Beta(x)),
            Raw::Text(t) if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") => Ok(Beta(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("beta must be a number or \"inf\", got {t:?}"))),
        }
    }
}

fn default_n_qubits() -> usize {
    1
}
fn default_samples() -> usize {
    1000
}
fn default_circuits() -> usize {
    1000
}
fn default_mode() -> ModeArg {
    ModeArg::Nonmarkovian
}
fn default_method() -> Method {
    Method::Averaged
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n_qubits")]
    pub n_qubits: usize,
    pub modes: Vec<ModeConfig>,
    pub g: Coupling,
    pub dt: f64,
    pub beta: Beta,
    pub depths: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: ModeArg,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Gate distribution for sampled circuits; Clifford for one qubit, Haar
    /// otherwise when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateset: Option<Gateset>,
    /// Number of witness circuits.
    #[serde(default = "default_circuits")]
    pub circuits: usize,
    /// Cutoffs swept by `photon`; applied to every mode. Defaults to the
    /// configured mode cutoffs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.n_qubits == 0 {
            return bad("n_qubits must be >= 1");
        }
        if self.modes.is_empty() {
            return bad("at least one mode is required");
        }
        if self.beta.0.is_nan() || self.beta.0 <= 0.0 {
            return bad("beta must be positive");
        }
        if self.depths.is_empty() || self.depths.windows(2).any(|w| w[0] >= w[1]) {
            return bad("depths must be non-empty and strictly increasing");
        }
        if self.samples == 0 || self.circuits == 0 {
            return bad("samples and circuits must be >= 1");
        }
        if let Some(c) = &self.cutoffs {
            if c.is_empty() || c.contains(&0) {
                return bad("cutoffs must be non-empty and >= 1");
            }
        }
        self.model()?;
        Ok(())
    }

    pub fn gateset(&self) -> Gateset {
        self.gateset.unwrap_or(if self.n_qubits == 1 {
            Gateset::Clifford1q
        } else {
            Gateset::Haar
        })
    }

    /// Depths with 0 prepended when missing.
    pub fn depths_with_zero(&self) -> Vec<usize> {
        let mut d = self.depths.clone();
        if d.first() != Some(&0) {
            d.insert(0, 0);
        }
        d
    }

    fn couplings(&self) -> Result<Vec<Vec<f64>>, CliError> {
        match &self.g {
            Coupling::Scalar(g) => Ok(vec![vec![*g; self.n_qubits]; self.modes.len()]),
            Coupling::Matrix(m) => Ok(m.clone()),
        }
    }

    pub fn model_with_cutoff(&self, cutoff: Option<usize>) -> Result<SpinBosonModel, CliError> {
        let modes = self
            .modes
            .iter()
            .map(|m| ModeSpec::new(m.omega, cutoff.unwrap_or(m.cutoff)))
            .collect::<nmrb::Result<Vec<_>>>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let env = EnvSpace::new(modes).map_err(|e| CliError::Config(e.to_string()))?;
        SpinBosonModel::new(self.n_qubits, env, self.couplings()?, self.dt).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<SpinBosonModel, CliError> {
        self.model_with_cutoff(None)
    }

    pub fn env_state(&self, model: &SpinBosonModel) -> Result<EnvState, CliError> {
        thermal_state_space(model.env(), self.beta.0).map_err(|e| CliError::Config(e.to_string()))
    }
}
