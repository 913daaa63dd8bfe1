//! Flat `key = value` network configuration files.
//!
//! Keys mirror [`NetworkConfig`]: `n`, `m`, `eta1`, `mu`, `tau_m`, `dt`,
//! `tau_s`, `tau_r`, `a_plus`, `a_minus`, `tau_plus`, `tau_minus`, `eta2`,
//! `lambda2`, `learning_mode` (`"rate_stdp"` or `"exact_stdp"`), `error_mu`
//! and `tied`.
//! `n` and `m` are required; every other key falls back to the
//! [`NetworkConfig::new`] defaults. `tau_m`, when given, must equal `1/mu`.
//! Lines starting with `#` are comments.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::{LearningMode, NetworkConfig};
use crate::neuron::LifParams;
use crate::{Error, Result};

/// Default threshold when a file omits `mu`.
pub const DEFAULT_MU: f64 = 0.25;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub eta1: Option<f64>,
    pub mu: Option<f64>,
    pub tau_m: Option<f64>,
    pub dt: Option<f64>,
    pub tau_s: Option<f64>,
    pub tau_r: Option<f64>,
    pub a_plus: Option<f64>,
    pub a_minus: Option<f64>,
    pub tau_plus: Option<f64>,
    pub tau_minus: Option<f64>,
    pub eta2: Option<f64>,
    pub lambda2: Option<f64>,
    pub learning_mode: Option<LearningMode>,
    pub error_mu: Option<f64>,
    pub tied: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn into_network(self) -> Result<NetworkConfig> {
        let n = self.n.ok_or_else(|| Error::Config("missing key `n`".into()))?;
        let m = self.m.ok_or_else(|| Error::Config("missing key `m`".into()))?;
        let mu = self.mu.unwrap_or(DEFAULT_MU);
        let mut cfg = NetworkConfig::new(n, m, mu)?;
        let dt = self.dt.unwrap_or(cfg.lif.dt);
        cfg.lif = LifParams::new(mu, self.tau_m.unwrap_or(1.0 / mu), dt)?;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.eta1, self.eta1);
        set(&mut cfg.tau_s, self.tau_s);
        set(&mut cfg.tau_r, self.tau_r);
        set(&mut cfg.stdp.a_plus, self.a_plus);
        set(&mut cfg.stdp.a_minus, self.a_minus);
        set(&mut cfg.stdp.tau_plus, self.tau_plus);
        set(&mut cfg.stdp.tau_minus, self.tau_minus);
        set(&mut cfg.learn.eta2, self.eta2);
        set(&mut cfg.learn.lambda2, self.lambda2);
        if let Some(mode) = self.learning_mode {
            cfg.learning_mode = mode;
        }
        if self.error_mu.is_some() {
            cfg.error_mu = self.error_mu;
        }
        if let Some(t) = self.tied {
            cfg.tied = t;
        }
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_network(cfg: &NetworkConfig) -> Self {
        ConfigFile {
            n: Some(cfg.n),
            m: Some(cfg.m),
            eta1: Some(cfg.eta1),
            mu: Some(cfg.lif.mu),
            tau_m: Some(cfg.lif.tau_m),
            dt: Some(cfg.lif.dt),
            tau_s: Some(cfg.tau_s),
            tau_r: Some(cfg.tau_r),
            a_plus: Some(cfg.stdp.a_plus),
            a_minus: Some(cfg.stdp.a_minus),
            tau_plus: Some(cfg.stdp.tau_plus),
            tau_minus: Some(cfg.stdp.tau_minus),
            eta2: Some(cfg.learn.eta2),
            lambda2: Some(cfg.learn.lambda2),
            learning_mode: Some(cfg.learning_mode),
            error_mu: cfg.error_mu,
            tied: Some(cfg.tied),
        }
    }
}

pub fn parse_network_config(text: &str) -> Result<NetworkConfig> {
    ConfigFile::parse(text)?.into_network()
}

pub fn load_network_config(path: impl AsRef<Path>) -> Result<NetworkConfig> {
    parse_network_config(&std::fs::read_to_string(path)?)
}

/// Render every key; the output parses back to the same configuration.
pub fn render_network_config(cfg: &NetworkConfig) -> Result<String> {
    toml::to_string(&ConfigFile::from_network(cfg)).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = parse_network_config("n = 4\nm = 8\n").unwrap();
        assert_eq!(cfg, NetworkConfig::new(4, 8, DEFAULT_MU).unwrap());
    }

    #[test]
    fn overrides_apply() {
        let text = "# net\nn = 2\nm = 3\nmu = 0.5\ndt = 0.001\neta2 = 0.01\nlearning_mode = \"exact_stdp\"\ntied = true\n";
        let cfg = parse_network_config(text).unwrap();
        assert_eq!(cfg.lif.tau_m, 2.0);
        assert_eq!(cfg.lif.dt, 0.001);
        assert_eq!(cfg.learn.eta2, 0.01);
        assert_eq!(cfg.learning_mode, LearningMode::ExactStdp);
        assert!(cfg.tied);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(parse_network_config("m = 3").is_err());
        assert!(parse_network_config("n = 2\nm = 3\nbogus = 1").is_err());
        assert!(parse_network_config("n = 2\nm = 3\nmu = 0.25\ntau_m = 3.0").is_err());
        assert!(parse_network_config("n = 2\nm = 3\nlearning_mode = \"hebb\"").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = NetworkConfig::new(5, 7, 0.1).unwrap();
        cfg.stdp.a_minus = 0.5;
        cfg.tied = true;
        cfg.error_mu = Some(0.3);
        let text = render_network_config(&cfg).unwrap();
        assert_eq!(parse_network_config(&text).unwrap(), cfg);
    }
}
