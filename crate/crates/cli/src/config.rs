//! Declarative run configuration, loadable from TOML and overridden by flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use influence_core::conductance::{ConductanceConfig, Lens, DEFAULT_LEXICAL_DIMENSION};
use influence_core::engine::{CapitalPolicy, InfluenceModel, DEFAULT_MAX_EVENTS};
use influence_core::kernel::{MarkConfig, MemoryKernel};
use influence_core::simulation::{SimulationConfig, ThetaTransform, DEFAULT_EXPONENT};

use crate::error::{usage, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub kernel: KernelSection,
    pub marks: MarkSection,
    pub conductance: ConductanceSection,
    pub capital: CapitalSection,
    pub engine: EngineSection,
    pub ranking: RankingSection,
    pub simulation: SimulationSection,
    pub service: ServiceSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Exponential,
    #[serde(alias = "power-law")]
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    #[serde(rename = "type")]
    pub kind: KernelKind,
    pub r: f64,
    /// Only read by the power-law kernel.
    pub c: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { kind: KernelKind::Exponential, r: 1.0, c: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkSection {
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LensChoice {
    None,
    Topological,
    Following,
    Lexical,
}

impl LensChoice {
    pub fn lens(self) -> Option<Lens> {
        match self {
            LensChoice::None => None,
            LensChoice::Topological => Some(Lens::Topological),
            LensChoice::Following => Some(Lens::Following),
            LensChoice::Lexical => Some(Lens::Lexical),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConductanceSection {
    pub lens: LensChoice,
    pub beta: f64,
    pub top_k: usize,
    pub dimension: usize,
}

impl Default for ConductanceSection {
    fn default() -> Self {
        Self { lens: LensChoice::None, beta: 0.18, top_k: 1000, dimension: DEFAULT_LEXICAL_DIMENSION }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disabled {
    #[serde(rename = "disabled")]
    Disabled,
}

/// Either a capital share or the word `disabled`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Share(f64),
    Off(Disabled),
}

impl Alpha {
    pub const DISABLED: Alpha = Alpha::Off(Disabled::Disabled);
}

impl FromStr for Alpha {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "disabled" | "none" | "off" => Ok(Alpha::DISABLED),
            _ => s.parse::<f64>().map(Alpha::Share).map_err(|_| format!("expected a number or `disabled`, got {s:?}")),
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Share(a) => write!(f, "{a}"),
            Alpha::Off(_) => f.write_str("disabled"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapitalSection {
    pub alpha: Alpha,
}

impl Default for CapitalSection {
    fn default() -> Self {
        Self { alpha: Alpha::Share(0.02) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub max_events: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self { max_events: DEFAULT_MAX_EVENTS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingSection {
    pub lambda: f64,
}

impl Default for RankingSection {
    fn default() -> Self {
        Self { lambda: 1.22 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n_targets: usize,
    pub budget: u64,
    pub lambda: f64,
    pub exponent: f64,
    pub runs_cap: u32,
    pub transform: ThetaTransform,
    pub replications: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let base = SimulationConfig::default();
        Self {
            n_targets: base.n_targets,
            budget: base.budget,
            lambda: base.lambda,
            exponent: DEFAULT_EXPONENT,
            runs_cap: base.runs_cap,
            transform: base.transform,
            replications: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub ban_threshold: f64,
    pub lease_timeout_secs: u64,
    pub batch_size: usize,
    pub parallelism: usize,
}

impl Default for ServiceSection {
    fn default() -> Self {
        let base = influence_annotate::ServiceConfig::new("");
        Self {
            ban_threshold: base.ban_threshold,
            lease_timeout_secs: base.lease_timeout_secs,
            batch_size: base.batch_size,
            parallelism: base.parallelism,
        }
    }
}

pub fn parse_transform(s: &str) -> std::result::Result<ThetaTransform, String> {
    ThetaTransform::ALL
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| format!("expected one of raw, log, percentile; got {s:?}"))
}

impl RunConfig {
    /// Defaults, or the contents of `path` layered over them.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn kernel(&self) -> Result<MemoryKernel> {
        let k = &self.kernel;
        Ok(match k.kind {
            KernelKind::Exponential => MemoryKernel::exponential(k.r)?,
            KernelKind::PowerLaw => MemoryKernel::power_law(k.r, k.c)?,
        })
    }

    pub fn capital(&self) -> Result<CapitalPolicy> {
        Ok(match self.capital.alpha {
            Alpha::Share(a) => CapitalPolicy::social_capital(a)?,
            Alpha::Off(_) => CapitalPolicy::None,
        })
    }

    pub fn model(&self) -> Result<InfluenceModel> {
        if self.engine.max_events < 1 {
            return Err(usage("engine.max_events must be at least 1"));
        }
        Ok(InfluenceModel {
            kernel: self.kernel()?,
            marks: MarkConfig::new(self.marks.b)?,
            policy: self.capital()?,
            max_events: self.engine.max_events,
        })
    }

    pub fn conductance(&self) -> Result<Option<ConductanceConfig>> {
        let c = &self.conductance;
        if c.top_k < 1 || c.dimension < 1 {
            return Err(usage("conductance.top_k and conductance.dimension must be positive"));
        }
        match c.lens.lens() {
            Some(lens) => Ok(Some(ConductanceConfig::new(lens, c.beta)?)),
            None => {
                ConductanceConfig::new(Lens::Topological, c.beta)?;
                Ok(None)
            }
        }
    }

    pub fn simulation(&self) -> Result<SimulationConfig> {
        let s = &self.simulation;
        let cfg = SimulationConfig {
            n_targets: s.n_targets,
            budget: s.budget,
            lambda: s.lambda,
            exponent: s.exponent,
            runs_cap: s.runs_cap,
            seed: self.seed,
            transform: s.transform,
        };
        cfg.validate()?;
        if s.replications < 1 {
            return Err(usage("simulation.replications must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn ranking_lambda(&self) -> Result<f64> {
        let l = self.ranking.lambda;
        if !(l > 0.0 && l.is_finite()) {
            return Err(usage(format!("ranking.lambda must be positive, got {l}")));
        }
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.conductance()?;
        self.simulation()?;
        self.ranking_lambda()?;
        let s = &self.service;
        if !(0.0..=1.0).contains(&s.ban_threshold) {
            return Err(usage(format!("service.ban_threshold must lie in [0, 1], got {}", s.ban_threshold)));
        }
        if s.lease_timeout_secs == 0 || s.batch_size == 0 || s.parallelism == 0 {
            return Err(usage("service.lease_timeout_secs, batch_size and parallelism must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|_| self.to_json())
    }

    /// Hex SHA-256 of the command name and the canonical JSON form.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0u8]);
        h.update(self.to_json().as_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.capital.alpha, Alpha::Share(0.02));
        assert_eq!(cfg.conductance.beta, 0.18);
        assert!(cfg.conductance().unwrap().is_none());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            seed = 7
            [kernel]
            type = "power_law"
            r = 0.5
            c = 2.0
            [conductance]
            lens = "lexical"
            beta = 0.3
            [capital]
            alpha = "disabled"
            [simulation]
            transform = "log"
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.kernel.kind, KernelKind::PowerLaw);
        assert_eq!(cfg.capital.alpha, Alpha::DISABLED);
        assert_eq!(cfg.simulation.transform, ThetaTransform::Log);
        assert_eq!(cfg.conductance.lens, LensChoice::Lexical);
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(matches!(cfg.capital().unwrap(), CapitalPolicy::None));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[kernel]\nrate = 1.0\n").is_err());
        assert!(toml::from_str::<RunConfig>("sed = 1\n").is_err());
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!("0.5".parse::<Alpha>().unwrap(), Alpha::Share(0.5));
        assert_eq!("disabled".parse::<Alpha>().unwrap(), Alpha::DISABLED);
        assert!("half".parse::<Alpha>().is_err());
        assert_eq!(Alpha::DISABLED.to_string(), "disabled");
    }

    #[test]
    fn invalid_ranges() {
        let mut cfg = RunConfig::default();
        cfg.capital.alpha = Alpha::Share(1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.conductance.beta = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.kernel.r = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.simulation.exponent = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash("influence"), b.hash("influence"));
        assert_ne!(a.hash("influence"), a.hash("simulate"));
        b.seed = 1;
        assert_ne!(a.hash("influence"), b.hash("influence"));
        assert_eq!(a.hash("x").len(), 64);
    }
}
