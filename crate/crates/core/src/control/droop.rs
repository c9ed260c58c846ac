//! Conventional P-f / Q-E droop, used only as a comparison baseline.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::numerics::wrap_phase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroopConfig {
    /// No-load frequency, Hz.
    pub f0: f64,
    /// No-load phase peak voltage, V.
    pub e0: f64,
    /// Frequency droop of the inverter with the largest share, Hz/W.
    pub m_p: f64,
    /// Voltage droop, V/var.
    pub n_q: f64,
    /// Cutoff of the power measurement filter, Hz.
    pub filter_hz: f64,
}

impl Default for DroopConfig {
    fn default() -> Self {
        Self {
            f0: 60.0,
            e0: 311.0,
            m_p: 1e-5,
            n_q: 1e-4,
            filter_hz: 10.0,
        }
    }
}

impl DroopConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.f0 > 0.0) {
            return Err(format!("droop.f0 must be positive, got {}", self.f0));
        }
        if !(self.m_p >= 0.0 && self.n_q >= 0.0) {
            return Err("droop.m_p and droop.n_q must be non-negative".into());
        }
        if !(self.e0 > 0.0 && self.filter_hz > 0.0) {
            return Err("droop.e0 and droop.filter_hz must be positive".into());
        }
        Ok(())
    }

    /// Coefficients for an inverter carrying `share` of the largest share;
    /// smaller shares droop proportionally harder.
    pub fn for_share(&self, share: f64) -> DroopConfig {
        DroopConfig {
            m_p: self.m_p / share,
            n_q: self.n_q / share,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopOutput {
    pub frequency: f64,
    pub amplitude: f64,
    /// Phase after advancing by `2π·f·dt`, in [0, 2π).
    pub phase: f64,
}

/// Droop law `f = f0 − m_p·P`, `E = E0 − n_q·Q`, then advance `phase`.
pub fn droop_vsi_update(p_filtered: f64, q_filtered: f64, cfg: &DroopConfig, phase: f64, dt: f64) -> DroopOutput {
    let frequency = cfg.f0 - cfg.m_p * p_filtered;
    DroopOutput {
        frequency,
        amplitude: cfg.e0 - cfg.n_q * q_filtered,
        phase: wrap_phase(phase + TAU * frequency * dt),
    }
}
