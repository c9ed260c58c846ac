//! Continuous-time circuit models integrated with RK4 under zero-order-hold
//! switch commands.
//!
//! DC side: PV array behind a boost stage, a battery half-bridge and the DC
//! bus capacitor. AC side: `m` inverters, each with an R-L filter, a local
//! bus capacitor and an R-L line to the common coupling point, which feeds
//! a resistive load.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_step, LowPass, StateVector, TwoAxis};

const BLOWUP_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcSideParams {
    /// Boost inductor, H.
    pub l_pv: f64,
    /// PV terminal capacitor, F.
    pub c_pv: f64,
    /// Battery leg inductor, H.
    pub l_bat: f64,
    /// DC bus capacitor, F.
    pub c_bat: f64,
    /// Series resistance of the boost inductor, Ω.
    pub r_parasitic: f64,
    /// Battery open-circuit voltage, V.
    pub v_bat: f64,
    /// Battery internal resistance, Ω.
    pub r_bat: f64,
}

impl Default for DcSideParams {
    fn default() -> Self {
        Self {
            l_pv: 1e-3,
            c_pv: 100e-6,
            l_bat: 5e-3,
            c_bat: 5e-3,
            r_parasitic: 0.0,
            v_bat: 600.0,
            r_bat: 0.05,
        }
    }
}

impl DcSideParams {
    pub fn validate(&self) -> Result<(), String> {
        for (key, v) in [
            ("l_pv", self.l_pv),
            ("c_pv", self.c_pv),
            ("l_bat", self.l_bat),
            ("c_bat", self.c_bat),
            ("v_bat", self.v_bat),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("dc.{key} must be positive, got {v}"));
            }
        }
        for (key, v) in [("r_parasitic", self.r_parasitic), ("r_bat", self.r_bat)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("dc.{key} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VsiParams {
    pub r_f: f64,
    pub l_f: f64,
    /// Local bus capacitor, F.
    pub c_f: f64,
    pub r_t: f64,
    pub l_t: f64,
    /// DC input voltage, V. Ignored for the interfacing converter, which is
    /// fed by the simulated DC bus.
    pub v_in: f64,
    /// Resistive local load per phase, Ω.
    pub local_load_ohms: Option<f64>,
}

impl Default for VsiParams {
    fn default() -> Self {
        Self {
            r_f: 0.1,
            l_f: 2e-3,
            c_f: 50e-6,
            r_t: 0.05,
            l_t: 1e-3,
            v_in: 800.0,
            local_load_ohms: None,
        }
    }
}

impl VsiParams {
    pub fn validate(&self, idx: usize) -> Result<(), String> {
        for (key, v) in [
            ("l_f", self.l_f),
            ("c_f", self.c_f),
            ("l_t", self.l_t),
            ("v_in", self.v_in),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("vsi.{idx}.{key} must be positive, got {v}"));
            }
        }
        for (key, v) in [("r_f", self.r_f), ("r_t", self.r_t)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("vsi.{idx}.{key} must be non-negative, got {v}"));
            }
        }
        if let Some(r) = self.local_load_ohms {
            if !(r > 0.0 && r.is_finite()) {
                return Err(format!("vsi.{idx}.local_load_ohms must be positive, got {r}"));
            }
        }
        Ok(())
    }

    /// Current drawn by the local load at bus voltage `v_bus`.
    #[inline]
    pub fn local_load_current(&self, v_bus: TwoAxis) -> TwoAxis {
        match self.local_load_ohms {
            Some(r) => v_bus * (1.0 / r),
            None => TwoAxis::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DcSideState {
    pub v_pv: f64,
    /// Boost inductor current.
    pub i_pv: f64,
    /// Battery inductor current, positive when discharging.
    pub i_bat: f64,
    pub v_dc: f64,
    /// Current drawn from the DC bus by the interfacing converter.
    pub i_o: f64,
}

impl DcSideState {
    fn as_array(&self) -> [f64; 4] {
        [self.v_pv, self.i_pv, self.i_bat, self.v_dc]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VsiState {
    pub i_f: TwoAxis,
    pub v_bus: TwoAxis,
    pub i_t: TwoAxis,
}

impl VsiState {
    pub fn is_finite(&self) -> bool {
        self.i_f.is_finite() && self.v_bus.is_finite() && self.i_t.is_finite()
    }

    fn max_abs(&self) -> f64 {
        [self.i_f, self.v_bus, self.i_t]
            .iter()
            .flat_map(|x| [x.alpha.abs(), x.beta.abs()])
            .fold(0.0, f64::max)
    }
}

impl StateVector for VsiState {
    fn axpy(&self, a: f64, o: &Self) -> Self {
        VsiState {
            i_f: self.i_f + o.i_f * a,
            v_bus: self.v_bus + o.v_bus * a,
            i_t: self.i_t + o.i_t * a,
        }
    }
}

/// Half-bridge state of the battery leg: `(1,0)` connects the battery
/// inductor to the DC bus, `(0,1)` shorts it to the negative rail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BatteryPair {
    UpperOn,
    LowerOn,
}

impl BatteryPair {
    /// Gate signal of the upper switch, `S_bat1`.
    pub fn upper(self) -> f64 {
        match self {
            BatteryPair::UpperOn => 1.0,
            BatteryPair::LowerOn => 0.0,
        }
    }

    pub fn gates(self) -> (u8, u8) {
        match self {
            BatteryPair::UpperOn => (1, 0),
            BatteryPair::LowerOn => (0, 1),
        }
    }
}

/// Boost switch command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PvSwitch {
    Off,
    On,
}

impl PvSwitch {
    pub fn duty(self) -> f64 {
        match self {
            PvSwitch::On => 1.0,
            PvSwitch::Off => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub dc: DcSideState,
    pub vsis: Vec<VsiState>,
    /// Resistive PCC load per phase, Ω.
    pub z_ac: f64,
    pub p_dcload: f64,
    pub irradiance: f64,
    pub temperature: f64,
}

/// Inputs to one DC-side integration step, held over `dt`.
#[derive(Debug, Clone, Copy)]
pub struct DcInputs {
    pub pv_switch: PvSwitch,
    pub bat_pair: BatteryPair,
    /// Interfacing-converter draw, A.
    pub i_o: f64,
    /// Constant-power DC load, W.
    pub p_dcload: f64,
    /// PV array current at the start of the step, A.
    pub pv_current_source: f64,
}

/// One RK4 step of the DC side.
pub fn step_dc_side(state: &DcSideState, params: &DcSideParams, inputs: &DcInputs, dt: f64) -> Result<DcSideState> {
    let s_pv = inputs.pv_switch.duty();
    let s_bat = inputs.bat_pair.upper();
    let f = |x: &[f64; 4]| {
        let [v_pv, i_pv, i_bat, v_dc] = *x;
        let i_load = if v_dc > 0.0 { inputs.p_dcload / v_dc } else { 0.0 };
        let mut di_pv = (v_pv - params.r_parasitic * i_pv - (1.0 - s_pv) * v_dc) / params.l_pv;
        // boost diode blocks reverse current while the switch is open
        let blocked = s_pv == 0.0 && i_pv <= 0.0;
        if blocked && di_pv < 0.0 {
            di_pv = 0.0;
        }
        let i_pv = if blocked { 0.0 } else { i_pv };
        [
            (inputs.pv_current_source - i_pv) / params.c_pv,
            di_pv,
            (params.v_bat - params.r_bat * i_bat - s_bat * v_dc) / params.l_bat,
            ((1.0 - s_pv) * i_pv + s_bat * i_bat - i_load - inputs.i_o) / params.c_bat,
        ]
    };
    let [v_pv, mut i_pv, i_bat, v_dc] = integrate_step(&state.as_array(), dt, f);
    if inputs.pv_switch == PvSwitch::Off && i_pv < 0.0 {
        i_pv = 0.0;
    }
    let next = DcSideState {
        v_pv,
        i_pv,
        i_bat,
        v_dc,
        i_o: inputs.i_o,
    };
    if next.as_array().iter().any(|x| !x.is_finite() || x.abs() > BLOWUP_LIMIT) {
        return Err(Error::NumericalBlowup {
            what: "dc side",
            time: f64::NAN,
        });
    }
    Ok(next)
}

/// Right-hand side of the coupled inverter network.
pub fn ac_derivative(states: &[VsiState], params: &[VsiParams], voltages: &[TwoAxis], z_ac: f64) -> Vec<VsiState> {
    let v_pcc = pcc_voltage(states, z_ac);
    states
        .iter()
        .zip(params)
        .zip(voltages)
        .map(|((x, p), &v_n)| VsiState {
            i_f: (v_n - x.i_f * p.r_f - x.v_bus) * (1.0 / p.l_f),
            v_bus: (x.i_f - x.i_t - p.local_load_current(x.v_bus)) * (1.0 / p.c_f),
            i_t: (x.v_bus - x.i_t * p.r_t - v_pcc) * (1.0 / p.l_t),
        })
        .collect()
}

/// One RK4 step of the inverter network with inverter output voltages
/// `voltages` held over `dt`.
pub fn step_ac_side(
    states: &[VsiState],
    params: &[VsiParams],
    voltages: &[TwoAxis],
    z_ac: f64,
    dt: f64,
) -> Result<Vec<VsiState>> {
    if states.len() != params.len() || states.len() != voltages.len() {
        return Err(Error::invalid(format!(
            "ac step needs equal lengths, got {} states, {} params, {} voltages",
            states.len(),
            params.len(),
            voltages.len()
        )));
    }
    let states = states.to_vec();
    let next = integrate_step(&states, dt, |x: &Vec<VsiState>| {
        ac_derivative(x, params, voltages, z_ac)
    });
    if next.iter().any(|x| !x.is_finite() || x.max_abs() > BLOWUP_LIMIT) {
        return Err(Error::NumericalBlowup {
            what: "ac side",
            time: f64::NAN,
        });
    }
    Ok(next)
}

/// PCC voltage `Z_AC · Σ i_T`.
pub fn pcc_voltage(states: &[VsiState], z_ac: f64) -> TwoAxis {
    states.iter().map(|s| s.i_t).sum::<TwoAxis>() * z_ac
}

/// Instantaneous three-phase power `(3/2)·v·i` for amplitude-invariant
/// stationary-frame quantities.
#[inline]
pub fn three_phase_power(v: TwoAxis, i: TwoAxis) -> f64 {
    1.5 * v.dot(i)
}

/// Instantaneous power flows, W. Battery power is positive when discharging.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerReport {
    pub p_pv: f64,
    pub p_bat: f64,
    pub p_dcload: f64,
    pub p_vsi: Vec<f64>,
    pub p_pcc: f64,
}

/// Unfiltered power flows of `state`. Battery power is taken at the
/// battery terminals.
pub fn instantaneous_powers(state: &NetworkState, dc: &DcSideParams) -> PowerReport {
    let v_pcc = pcc_voltage(&state.vsis, state.z_ac);
    PowerReport {
        p_pv: state.dc.v_pv * state.dc.i_pv,
        p_bat: (dc.v_bat - dc.r_bat * state.dc.i_bat) * state.dc.i_bat,
        p_dcload: state.p_dcload,
        p_vsi: state.vsis.iter().map(|x| three_phase_power(x.v_bus, x.i_t)).collect(),
        p_pcc: 1.5 * v_pcc.norm_sq() / state.z_ac,
    }
}

/// Power flows passed through 100 Hz first-order filters for reporting.
#[derive(Debug, Clone)]
pub struct PowerMeter {
    p_pv: LowPass,
    p_bat: LowPass,
    p_dcload: LowPass,
    p_vsi: Vec<LowPass>,
    p_pcc: LowPass,
}

impl PowerMeter {
    pub const CUTOFF_HZ: f64 = 100.0;

    pub fn new(initial: &PowerReport, sample_period: f64) -> Self {
        let lp = |x: f64| LowPass::new(Self::CUTOFF_HZ, sample_period, x);
        Self {
            p_pv: lp(initial.p_pv),
            p_bat: lp(initial.p_bat),
            p_dcload: lp(initial.p_dcload),
            p_vsi: initial.p_vsi.iter().map(|&p| lp(p)).collect(),
            p_pcc: lp(initial.p_pcc),
        }
    }

    pub fn update(&mut self, x: &PowerReport) -> PowerReport {
        PowerReport {
            p_pv: self.p_pv.update(x.p_pv),
            p_bat: self.p_bat.update(x.p_bat),
            p_dcload: self.p_dcload.update(x.p_dcload),
            p_vsi: self.p_vsi.iter_mut().zip(&x.p_vsi).map(|(f, &p)| f.update(p)).collect(),
            p_pcc: self.p_pcc.update(x.p_pcc),
        }
    }
}

/// Filtered power flows of a single state, as reported in traces.
pub fn power_flows(state: &NetworkState, dc: &DcSideParams, meter: &mut PowerMeter) -> PowerReport {
    meter.update(&instantaneous_powers(state, dc))
}
