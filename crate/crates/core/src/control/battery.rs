use super::ControlConfig;
use crate::plant::{BatteryPair, DcSideParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcMeasurement {
    pub v_dc_k: f64,
    pub i_bat_k: f64,
    /// Net current leaving the DC bus through everything except the
    /// battery leg.
    pub i_o_k: f64,
    /// Switching-cycle average of `i_o_k`, from the power drawn by the
    /// converters on the bus; feeds the current reference.
    pub i_o_average: f64,
}

/// Predicted DC bus voltage for `(1,0)` and `(0,1)`, in that order.
pub fn predict_dc_bus(meas: &DcMeasurement, cfg: &ControlConfig, c_bat: f64) -> (f64, f64) {
    let k = cfg.t_s / c_bat;
    (
        meas.v_dc_k + k * (meas.i_bat_k - meas.i_o_k),
        meas.v_dc_k - k * meas.i_o_k,
    )
}

/// Predicted battery inductor current one sample ahead.
pub fn predict_battery_current(
    meas: &DcMeasurement,
    cfg: &ControlConfig,
    params: &DcSideParams,
    pair: BatteryPair,
) -> f64 {
    let v_l = params.v_bat - params.r_bat * meas.i_bat_k - pair.upper() * meas.v_dc_k;
    meas.i_bat_k + cfg.t_s / params.l_bat * v_l
}

/// Battery current that balances the average bus load and pulls the bus
/// back to its reference with time constant `cfg.dc_voltage_time_constant`.
pub fn battery_current_reference(meas: &DcMeasurement, cfg: &ControlConfig, params: &DcSideParams) -> f64 {
    let i_bus = meas.i_o_average + params.c_bat * (cfg.v_dc_ref - meas.v_dc_k) / cfg.dc_voltage_time_constant;
    meas.v_dc_k * i_bus / params.v_bat
}

/// `|v_dc_ref − v̂_dc| + w·|i_ref − î_bat|` for battery leg state `pair`.
pub fn battery_cost(meas: &DcMeasurement, cfg: &ControlConfig, params: &DcSideParams, pair: BatteryPair) -> f64 {
    let (v10, v01) = predict_dc_bus(meas, cfg, params.c_bat);
    let v = match pair {
        BatteryPair::UpperOn => v10,
        BatteryPair::LowerOn => v01,
    };
    let mut cost = (cfg.v_dc_ref - v).abs();
    if cfg.battery_current_weight > 0.0 {
        let i_ref = battery_current_reference(meas, cfg, params);
        let i = predict_battery_current(meas, cfg, params, pair);
        cost += cfg.battery_current_weight * (i_ref - i).abs();
    }
    cost
}

/// Battery leg state with the smaller [`battery_cost`]; ties go to `(0,1)`.
pub fn select_battery_switches(meas: &DcMeasurement, cfg: &ControlConfig, params: &DcSideParams) -> BatteryPair {
    let upper = battery_cost(meas, cfg, params, BatteryPair::UpperOn);
    let lower = battery_cost(meas, cfg, params, BatteryPair::LowerOn);
    if upper < lower {
        BatteryPair::UpperOn
    } else {
        BatteryPair::LowerOn
    }
}
