//! Spike-count based power estimation.
//!
//! `P = (N_spikes E_dyn + T_p P_stat + N_read E_read + N_write E_write) / T_p`
//! with `E_dyn` and `P_stat` multiplied by the overhead factor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::SimTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HwParams {
    /// Energy per spike before overhead, joules.
    pub e_dyn: f64,
    /// Static power before overhead, watts.
    pub p_stat: f64,
    /// Energy per synaptic read, joules.
    pub e_read: f64,
    /// Energy per synaptic write, joules.
    pub e_write: f64,
    /// Margin applied to `e_dyn` and `p_stat`.
    pub overhead_factor: f64,
}

impl Default for HwParams {
    /// 2.1 pJ per spike and 73 uW static with a x2 margin; memory energies
    /// are unknown and default to 0.
    fn default() -> Self {
        HwParams {
            e_dyn: 2.1e-12,
            p_stat: 73e-6,
            e_read: 0.0,
            e_write: 0.0,
            overhead_factor: 2.0,
        }
    }
}

impl HwParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.e_dyn, self.p_stat, self.e_read, self.e_write, self.overhead_factor];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param(format!("hardware parameters must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    pub fn effective_e_dyn(&self) -> f64 {
        self.e_dyn * self.overhead_factor
    }

    pub fn effective_p_stat(&self) -> f64 {
        self.p_stat * self.overhead_factor
    }

    pub fn parse(text: &str) -> Result<Self> {
        let hw: HwParams = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        hw.validate()?;
        Ok(hw)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivityCounts {
    pub n_spikes: u64,
    pub n_read: u64,
    pub n_write: u64,
    /// Duration in seconds.
    pub t_p: f64,
}

/// Power in watts.
pub fn estimate_power(c: &ActivityCounts, hw: &HwParams) -> Result<f64> {
    hw.validate()?;
    if !(c.t_p > 0.0 && c.t_p.is_finite()) {
        return Err(Error::param(format!("t_p must be > 0, got {}", c.t_p)));
    }
    if (c.n_read > 0 && hw.e_read == 0.0) || (c.n_write > 0 && hw.e_write == 0.0) {
        log::warn!("memory access energies are 0; supply e_read/e_write for absolute figures");
    }
    let energy = c.n_spikes as f64 * hw.effective_e_dyn()
        + c.n_read as f64 * hw.e_read
        + c.n_write as f64 * hw.e_write;
    Ok(energy / c.t_p + hw.effective_p_stat())
}

/// Spikes are coding plus error spikes (both sides of each pair). Every
/// broadcast spike, inputs included, reads one synapse per target. Writes
/// are the trace's STDP writes, counted only for learning runs.
pub fn count_activity(trace: &SimTrace, learning: bool) -> ActivityCounts {
    let s = &trace.spikes;
    let f = &trace.fanout;
    ActivityCounts {
        n_spikes: s.coding + s.error,
        n_read: s.input * f.input + s.coding * f.coding + s.error * f.error,
        n_write: if learning { trace.weight_writes } else { 0 },
        t_p: trace.duration(),
    }
}
