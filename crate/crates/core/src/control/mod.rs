//! Finite-control-set predictive controllers.
//!
//! Each controller enumerates its complete control set, predicts the next
//! sample with a discrete model, scores every candidate and applies the
//! argmin. Ties resolve deterministically: the boost switch prefers OFF,
//! the battery leg prefers `(0,1)`, the inverter group prefers the
//! lexicographically smallest vector tuple.

mod battery;
mod droop;
mod pv;
mod vsi;

use serde::{Deserialize, Serialize};

pub use battery::{
    battery_cost, battery_current_reference, predict_battery_current, predict_dc_bus, select_battery_switches,
    DcMeasurement,
};
pub use droop::{droop_vsi_update, DroopConfig, DroopOutput};
pub use pv::{predict_pv, select_pv_switch, PvMeasurement, PvPrediction};
pub use vsi::{
    predict_vsi_group, predict_vsi_horizon, select_vsi_vectors, switch_states, vsi_cost, vsi_voltage_vector, VsiGroup,
    VsiPrediction, VECTOR_COUNT,
};

/// How the inverter group searches its joint control set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VsiSearch {
    /// All 8^m vector tuples.
    #[default]
    Joint,
    /// One inverter at a time, the others held at their previous vectors.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// Sampling period, s.
    pub t_s: f64,
    /// Weight of PCC voltage tracking against current sharing, [0, 1].
    pub lambda: f64,
    /// Sharing ratios: filter current of inverter j over inverter j+1.
    pub betas: Vec<f64>,
    /// Peak phase voltage of the PCC reference, V.
    pub v_ref_peak: f64,
    pub v_ref_freq: f64,
    /// DC bus voltage reference, V.
    pub v_dc_ref: f64,
    /// Samples ahead at which the PCC voltage term is scored, with the
    /// candidate vectors held. 1 scores the very next sample.
    pub voltage_horizon: usize,
    pub search: VsiSearch,
    /// Weight of line-current sharing at the prediction horizon, relative
    /// to filter-current sharing one sample ahead.
    pub line_sharing_weight: f64,
    /// Apply each decision one sample late.
    pub actuation_delay: bool,
    /// Weight of battery current tracking in the battery cost, V/A. 0 scores
    /// the DC bus voltage alone.
    pub battery_current_weight: f64,
    /// Time constant of the bus voltage correction in the battery current
    /// reference, s.
    pub dc_voltage_time_constant: f64,
    /// Cutoff of the filter on the bus load feeding that reference, Hz.
    pub dc_feedforward_filter_hz: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            t_s: 20e-6,
            lambda: 0.5,
            betas: vec![0.5],
            v_ref_peak: 311.0,
            v_ref_freq: 60.0,
            v_dc_ref: 800.0,
            voltage_horizon: 6,
            search: VsiSearch::Joint,
            line_sharing_weight: 4.0,
            actuation_delay: false,
            battery_current_weight: 1.0,
            dc_voltage_time_constant: 5e-3,
            dc_feedforward_filter_hz: 200.0,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self, vsi_count: usize) -> Result<(), String> {
        if !(self.t_s > 0.0 && self.t_s.is_finite()) {
            return Err(format!("control.t_s must be positive, got {}", self.t_s));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(format!("control.lambda must lie in [0, 1], got {}", self.lambda));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(format!("control.betas entries must be positive, got {b}"));
        }
        if vsi_count > 0 && self.betas.len() != vsi_count - 1 {
            return Err(format!(
                "control.betas needs {} entries for {} inverters, got {}",
                vsi_count - 1,
                vsi_count,
                self.betas.len()
            ));
        }
        for (key, v) in [
            ("v_ref_peak", self.v_ref_peak),
            ("v_ref_freq", self.v_ref_freq),
            ("v_dc_ref", self.v_dc_ref),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("control.{key} must be positive, got {v}"));
            }
        }
        if !(self.battery_current_weight >= 0.0 && self.battery_current_weight.is_finite()) {
            return Err(format!(
                "control.battery_current_weight must be non-negative, got {}",
                self.battery_current_weight
            ));
        }
        for (key, v) in [
            ("dc_voltage_time_constant", self.dc_voltage_time_constant),
            ("dc_feedforward_filter_hz", self.dc_feedforward_filter_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("control.{key} must be positive, got {v}"));
            }
        }
        if self.voltage_horizon == 0 {
            return Err("control.voltage_horizon must be at least 1".into());
        }
        Ok(())
    }

    /// Relative output shares implied by the sharing ratios, largest = 1.
    pub fn shares(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.betas.len() + 1];
        for j in (0..self.betas.len()).rev() {
            s[j] = self.betas[j] * s[j + 1];
        }
        let max = s.iter().cloned().fold(0.0, f64::max);
        s.iter().map(|x| x / max).collect()
    }
}
