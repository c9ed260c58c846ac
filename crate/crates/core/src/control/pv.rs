use super::ControlConfig;
use crate::plant::PvSwitch;

/// Sampled PV quantities and the current MPP power reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvMeasurement {
    pub v_pv_k: f64,
    pub v_pv_km1: f64,
    pub i_pv_k: f64,
    pub p_mpp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvPrediction {
    pub i_next: f64,
    pub v_next: f64,
    pub p_next: f64,
}

/// Next-sample boost inductor current, PV voltage and power for `switch`.
///
/// The inductor charges at `v/L` while the switch conducts and is assumed
/// flat otherwise; the voltage is extrapolated linearly from the last two
/// samples.
pub fn predict_pv(meas: &PvMeasurement, cfg: &ControlConfig, l_pv: f64, switch: PvSwitch) -> PvPrediction {
    let i_next = match switch {
        PvSwitch::On => meas.i_pv_k + cfg.t_s / l_pv * meas.v_pv_k,
        PvSwitch::Off => meas.i_pv_k,
    };
    let v_next = 2.0 * meas.v_pv_k - meas.v_pv_km1;
    PvPrediction {
        i_next,
        v_next,
        p_next: i_next * v_next,
    }
}

/// Switch whose predicted power lands closest to `p_mpp`; ties go to OFF.
pub fn select_pv_switch(meas: &PvMeasurement, cfg: &ControlConfig, l_pv: f64) -> PvSwitch {
    let cost = |s| (predict_pv(meas, cfg, l_pv, s).p_next - meas.p_mpp).abs();
    if cost(PvSwitch::On) < cost(PvSwitch::Off) {
        PvSwitch::On
    } else {
        PvSwitch::Off
    }
}
