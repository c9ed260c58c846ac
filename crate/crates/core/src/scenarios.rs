//! Built-in scenario configurations.

use crate::pv::mpp_oracle;
use crate::sim::{ControlMode, EventKind, ScenarioEvent, SimulationConfig};

pub const SCENARIO_NAMES: [&str; 4] = ["case1", "case2", "case3", "droop-compare"];

/// DC load step 21.5 → 13 kW at 0.5 s, irradiance 1000 → 921 W/m² at 0.7 s.
pub fn case1() -> SimulationConfig {
    let mut cfg = SimulationConfig {
        name: "case1".into(),
        duration: 1.0,
        ..SimulationConfig::default()
    };
    cfg.initial.p_dcload = 21_500.0;
    cfg.initial.p_pcc = 22_500.0;
    cfg.events = vec![
        ScenarioEvent::new(0.5, EventKind::DcLoadStep(13_000.0)),
        ScenarioEvent::new(0.7, EventKind::IrradianceStep(921.0)),
    ];
    cfg
}

/// PCC load 22.5 → 33 kW at 0.5 s and → 26.4 kW at 0.8 s, β = 1/2.
pub fn case2() -> SimulationConfig {
    let mut cfg = SimulationConfig {
        name: "case2".into(),
        duration: 1.0,
        ..SimulationConfig::default()
    };
    cfg.initial.p_dcload = 13_000.0;
    cfg.initial.p_pcc = 22_500.0;
    cfg.control.betas = vec![0.5];
    cfg.events = vec![
        ScenarioEvent::new(0.5, EventKind::PccLoadStep(33_000.0)),
        ScenarioEvent::new(0.8, EventKind::PccLoadStep(26_400.0)),
    ];
    cfg
}

/// Sharing ratio 1/2 → 8/7 at 0.4 s with a 22.5 kW PCC load.
pub fn case3() -> SimulationConfig {
    let mut cfg = SimulationConfig {
        name: "case3".into(),
        duration: 0.8,
        ..SimulationConfig::default()
    };
    cfg.initial.p_dcload = 13_000.0;
    cfg.initial.p_pcc = 22_500.0;
    cfg.control.betas = vec![0.5];
    cfg.events = vec![ScenarioEvent::new(0.4, EventKind::BetaChange(1, 8.0 / 7.0))];
    cfg
}

/// The case2 timeline under predictive control and under droop control.
pub fn droop_compare() -> (SimulationConfig, SimulationConfig) {
    let mpc = SimulationConfig {
        name: "droop-compare/fcs-mpc".into(),
        ..case2()
    };
    let droop = SimulationConfig {
        name: "droop-compare/droop".into(),
        mode: ControlMode::Droop,
        ..case2()
    };
    (mpc, droop)
}

/// Constant irradiance `g` with a DC load of 30% of the array MPP.
pub fn mppt_steady(g: f64) -> SimulationConfig {
    let mut cfg = SimulationConfig {
        name: format!("mppt-{g}"),
        duration: 0.6,
        ..SimulationConfig::default()
    };
    let (_, p_mpp) = mpp_oracle(g, cfg.initial.temperature, &cfg.pv);
    cfg.initial.irradiance = g;
    cfg.initial.p_dcload = 0.3 * p_mpp;
    cfg
}

/// Single-run built-ins by name.
pub fn builtin(name: &str) -> Option<SimulationConfig> {
    match name {
        "case1" => Some(case1()),
        "case2" => Some(case2()),
        "case3" => Some(case3()),
        _ => None,
    }
}
