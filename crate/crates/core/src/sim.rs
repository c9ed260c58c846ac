//! Closed-loop simulation: plant at `dt`, controllers every `t_s`, MPPT at
//! its own cadence, scripted events and decimated traces.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::control::{
    droop_vsi_update, select_battery_switches, select_pv_switch, select_vsi_vectors, vsi_voltage_vector, ControlConfig,
    DcMeasurement, DroopConfig, PvMeasurement, VsiGroup,
};
use crate::error::{Error, Result};
use crate::numerics::{oscillator_reference, FrequencyTracker, LowPass, ReferenceOscillator, TwoAxis};
use crate::plant::{
    instantaneous_powers, pcc_voltage, step_ac_side, step_dc_side, three_phase_power, BatteryPair, DcInputs,
    DcSideParams, DcSideState, NetworkState, PowerMeter, PowerReport, PvSwitch, VsiParams, VsiState,
};
use crate::pv::{mppt_step, pv_array_current, MpptConfig, MpptState, PvArrayParams};

/// Number of fundamental cycles in the frequency estimation window.
pub const FREQUENCY_WINDOW_CYCLES: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Predictive control of every converter.
    #[default]
    Mpc,
    /// Droop-controlled inverters fed from stiff DC sources; the DC side is
    /// frozen.
    Droop,
}

/// What a scenario event changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// New DC load power, W.
    DcLoadStep(f64),
    /// New PCC load power at nominal voltage, W.
    PccLoadStep(f64),
    /// New irradiance, W/m².
    IrradianceStep(f64),
    /// New cell temperature, °C.
    TemperatureStep(f64),
    /// New sharing ratio `β_index` (1-based).
    BetaChange(usize, f64),
    /// New DC bus voltage reference, V.
    VdcRefChange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEvent", into = "RawEvent")]
pub struct ScenarioEvent {
    pub time: f64,
    pub kind: EventKind,
}

impl ScenarioEvent {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Self { time, kind }
    }
}

/// File form of an event: `{ time, kind, value }` plus `index` for ratios.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    time: f64,
    kind: String,
    value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
}

impl TryFrom<RawEvent> for ScenarioEvent {
    type Error = String;

    fn try_from(raw: RawEvent) -> std::result::Result<Self, String> {
        let v = raw.value;
        let kind = match (raw.kind.as_str(), raw.index) {
            ("beta_change", Some(i)) => EventKind::BetaChange(i, v),
            ("beta_change", None) => return Err("beta_change events need an index".into()),
            (_, Some(_)) => return Err(format!("{} events take no index", raw.kind)),
            ("dc_load_step", None) => EventKind::DcLoadStep(v),
            ("pcc_load_step", None) => EventKind::PccLoadStep(v),
            ("irradiance_step", None) => EventKind::IrradianceStep(v),
            ("temperature_step", None) => EventKind::TemperatureStep(v),
            ("vdc_ref_change", None) => EventKind::VdcRefChange(v),
            (other, None) => {
                return Err(format!(
                    "unknown event kind `{other}`, expected one of dc_load_step, pcc_load_step, \
                     irradiance_step, temperature_step, beta_change, vdc_ref_change"
                ))
            }
        };
        Ok(ScenarioEvent { time: raw.time, kind })
    }
}

impl From<ScenarioEvent> for RawEvent {
    fn from(e: ScenarioEvent) -> Self {
        let (kind, value, index) = match e.kind {
            EventKind::DcLoadStep(v) => ("dc_load_step", v, None),
            EventKind::PccLoadStep(v) => ("pcc_load_step", v, None),
            EventKind::IrradianceStep(v) => ("irradiance_step", v, None),
            EventKind::TemperatureStep(v) => ("temperature_step", v, None),
            EventKind::BetaChange(i, v) => ("beta_change", v, Some(i)),
            EventKind::VdcRefChange(v) => ("vdc_ref_change", v, None),
        };
        RawEvent {
            time: e.time,
            kind: kind.into(),
            value,
            index,
        }
    }
}

/// Operating point at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConditions {
    /// W/m²
    pub irradiance: f64,
    /// °C
    pub temperature: f64,
    /// DC load, W.
    pub p_dcload: f64,
    /// PCC load at nominal voltage, W.
    pub p_pcc: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self {
            irradiance: 1000.0,
            temperature: 25.0,
            p_dcload: 13_000.0,
            p_pcc: 22_500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Label used in reports.
    pub name: String,
    /// Simulated time, s.
    pub duration: f64,
    /// Plant integration step, s. Must divide `control.t_s`.
    pub dt: f64,
    pub mode: ControlMode,
    /// Reserved; the simulation is deterministic.
    pub seed: u64,
    /// Keep one trace row every this many control periods.
    pub trace_decimation: usize,
    /// Initial interval excluded from metrics, s.
    pub startup: f64,
    pub initial: InitialConditions,
    pub control: ControlConfig,
    pub dc: DcSideParams,
    #[serde(with = "vsi_table")]
    pub vsi: Vec<VsiParams>,
    pub pv: PvArrayParams,
    pub mppt: MpptConfig,
    pub droop: DroopConfig,
    pub events: Vec<ScenarioEvent>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            duration: 1.0,
            dt: 2e-6,
            mode: ControlMode::Mpc,
            seed: 0,
            trace_decimation: 10,
            startup: 0.1,
            initial: InitialConditions::default(),
            control: ControlConfig::default(),
            dc: DcSideParams::default(),
            vsi: vec![VsiParams::default(), VsiParams::default()],
            pv: PvArrayParams::default(),
            mppt: MpptConfig::default(),
            droop: DroopConfig::default(),
            events: Vec::new(),
        }
    }
}

/// Inverters are written as `[vsi.1]`, `[vsi.2]`, ... in configuration files.
mod vsi_table {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[VsiParams], s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, &VsiParams> = v.iter().enumerate().map(|(i, p)| ((i + 1).to_string(), p)).collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<VsiParams>, D::Error> {
        use serde::de::Error as _;
        let map = BTreeMap::<String, VsiParams>::deserialize(d)?;
        let mut numbered = Vec::with_capacity(map.len());
        for (key, p) in map {
            let idx: usize = key
                .parse()
                .map_err(|_| D::Error::custom(format!("vsi.{key}: inverter keys must be numbers 1, 2, ...")))?;
            numbered.push((idx, p));
        }
        numbered.sort_by_key(|(i, _)| *i);
        for (pos, (idx, _)) in numbered.iter().enumerate() {
            if *idx != pos + 1 {
                return Err(D::Error::custom(format!(
                    "inverters must be numbered 1..{} without gaps, found vsi.{idx}",
                    numbered.len()
                )));
            }
        }
        Ok(numbered.into_iter().map(|(_, p)| p).collect())
    }
}

impl SimulationConfig {
    /// Plant steps per control period.
    pub fn substeps(&self) -> usize {
        (self.control.t_s / self.dt).round() as usize
    }

    /// Control periods in the run.
    pub fn control_steps(&self) -> u64 {
        (self.duration / self.control.t_s).round() as u64
    }

    /// PCC load resistance drawing `power` at the nominal reference voltage.
    pub fn load_impedance(&self, power: f64) -> f64 {
        nominal_impedance(self.control.v_ref_peak, power)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be non-negative, got {}", self.duration));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.vsi.is_empty() {
            return bad("at least one inverter ([vsi.1]) is required".into());
        }
        let m = self.vsi.len();
        self.control.validate(m).map_err(Error::ConfigInvalid)?;
        let ratio = self.control.t_s / self.dt;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return bad(format!(
                "dt = {} must divide control.t_s = {} exactly",
                self.dt, self.control.t_s
            ));
        }
        if self.trace_decimation == 0 {
            return bad("trace_decimation must be at least 1".into());
        }
        if !(self.startup >= 0.0) {
            return bad(format!("startup must be non-negative, got {}", self.startup));
        }
        self.dc.validate().map_err(Error::ConfigInvalid)?;
        for (i, v) in self.vsi.iter().enumerate() {
            v.validate(i + 1).map_err(Error::ConfigInvalid)?;
        }
        self.pv.validate().map_err(Error::ConfigInvalid)?;
        self.mppt.validate().map_err(Error::ConfigInvalid)?;
        self.droop.validate().map_err(Error::ConfigInvalid)?;
        let init = &self.initial;
        if !(init.irradiance >= 0.0 && init.p_dcload >= 0.0 && init.temperature.is_finite()) {
            return bad("initial.irradiance and initial.p_dcload must be non-negative".into());
        }
        if !(init.p_pcc > 0.0 && init.p_pcc.is_finite()) {
            return bad(format!("initial.p_pcc must be positive, got {}", init.p_pcc));
        }
        let mut last = 0.0;
        for (n, e) in self.events.iter().enumerate() {
            let key = format!("events[{n}]");
            if !(e.time >= 0.0 && e.time.is_finite()) {
                return bad(format!("{key}.time must be non-negative, got {}", e.time));
            }
            if e.time < last {
                return bad(format!("{key}: events must be sorted by time, {} < {last}", e.time));
            }
            last = e.time;
            let ok = match e.kind {
                EventKind::DcLoadStep(p) | EventKind::IrradianceStep(p) => p >= 0.0 && p.is_finite(),
                EventKind::PccLoadStep(p) | EventKind::VdcRefChange(p) => p > 0.0 && p.is_finite(),
                EventKind::TemperatureStep(t) => t.is_finite(),
                EventKind::BetaChange(i, r) => {
                    if i == 0 || i >= m {
                        return bad(format!("{key}.index must lie in 1..={}, got {i}", m - 1));
                    }
                    r > 0.0 && r.is_finite()
                }
            };
            if !ok {
                return bad(format!("{key}.value is out of range for {:?}", e.kind));
            }
        }
        Ok(())
    }
}

fn nominal_impedance(v_peak: f64, power: f64) -> f64 {
    1.5 * v_peak * v_peak / power
}

/// Replace the parameter named by `event`.
pub fn apply_event(state: &mut NetworkState, control: &mut ControlConfig, event: &EventKind) {
    match *event {
        EventKind::DcLoadStep(p) => state.p_dcload = p,
        EventKind::PccLoadStep(p) => state.z_ac = nominal_impedance(control.v_ref_peak, p),
        EventKind::IrradianceStep(g) => state.irradiance = g,
        EventKind::TemperatureStep(t) => state.temperature = t,
        EventKind::BetaChange(i, r) => control.betas[i - 1] = r,
        EventKind::VdcRefChange(v) => control.v_dc_ref = v,
    }
}

/// One decimated sample of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub v_dc: f64,
    pub v_pv: f64,
    pub i_pv: f64,
    pub p_pv: f64,
    /// Positive when the battery discharges.
    pub p_bat: f64,
    pub p_dcload: f64,
    pub p_vsi: Vec<f64>,
    /// Phase RMS.
    pub v_pcc_rms: f64,
    pub f_pcc: f64,
    pub f_bus: Vec<f64>,
    /// Applied vector per inverter; −1 for droop-controlled sources.
    pub chosen_vectors: Vec<i8>,
    pub pv_switch: u8,
    pub bat_switch: u8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub vsi_count: usize,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// Column names in file order.
    pub fn columns(&self) -> Vec<String> {
        let m = self.vsi_count;
        let mut c: Vec<String> = ["t", "v_dc", "v_pv", "i_pv", "p_pv", "p_bat", "p_dcload"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        c.extend((1..=m).map(|j| format!("p_vsi{j}")));
        c.push("v_pcc_rms".into());
        c.push("f_pcc".into());
        c.extend((1..=m).map(|j| format!("f_bus{j}")));
        c.extend((1..=m).map(|j| format!("chosen_vector{j}")));
        c.push("pv_switch".into());
        c.push("bat_switch".into());
        c
    }

    /// Row values in [`Trace::columns`] order.
    pub fn row_values(row: &TraceRow) -> Vec<f64> {
        let mut v = vec![row.t, row.v_dc, row.v_pv, row.i_pv, row.p_pv, row.p_bat, row.p_dcload];
        v.extend(&row.p_vsi);
        v.push(row.v_pcc_rms);
        v.push(row.f_pcc);
        v.extend(&row.f_bus);
        v.extend(row.chosen_vectors.iter().map(|&n| f64::from(n)));
        v.push(f64::from(row.pv_switch));
        v.push(f64::from(row.bat_switch));
        v
    }

    /// Rebuild a row from [`Trace::columns`]-ordered values.
    pub fn row_from_values(vsi_count: usize, v: &[f64]) -> Option<TraceRow> {
        let m = vsi_count;
        if v.len() != 11 + 3 * m {
            return None;
        }
        let p_vsi = v[7..7 + m].to_vec();
        let rest = &v[7 + m..];
        Some(TraceRow {
            t: v[0],
            v_dc: v[1],
            v_pv: v[2],
            i_pv: v[3],
            p_pv: v[4],
            p_bat: v[5],
            p_dcload: v[6],
            p_vsi,
            v_pcc_rms: rest[0],
            f_pcc: rest[1],
            f_bus: rest[2..2 + m].to_vec(),
            chosen_vectors: rest[2 + m..2 + 2 * m].iter().map(|&x| x as i8).collect(),
            pv_switch: rest[2 + 2 * m] as u8,
            bat_switch: rest[3 + 2 * m] as u8,
        })
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// Values of the named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns().iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| Self::row_values(r)[idx]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub control_steps: u64,
    pub final_time: f64,
    pub events_applied: usize,
    pub final_state: NetworkState,
    pub final_control: ControlConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub trace: Trace,
    pub summary: RunSummary,
}

/// Decisions held over one control period.
#[derive(Debug, Clone, PartialEq)]
struct Actuation {
    pv: PvSwitch,
    bat: BatteryPair,
    vectors: Vec<u8>,
}

#[derive(Debug, Clone)]
struct DroopUnit {
    phase: f64,
    p: LowPass,
    q: LowPass,
    voltage: TwoAxis,
}

/// Stepwise closed-loop simulator.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimulationConfig,
    control: ControlConfig,
    state: NetworkState,
    k: u64,
    next_event: usize,
    v_pv_prev: f64,
    mppt: MpptState,
    mppt_acc: (f64, f64, u32),
    p_net_filter: LowPass,
    applied: Actuation,
    pending: Option<Actuation>,
    droop: Vec<DroopUnit>,
    oscillator: ReferenceOscillator,
    meter: PowerMeter,
    reported: PowerReport,
    rms: LowPass,
    f_pcc: FrequencyTracker,
    f_bus: Vec<FrequencyTracker>,
}

impl Simulation {
    pub fn new(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let control = cfg.control.clone();
        let m = cfg.vsi.len();
        let init = &cfg.initial;

        let v_oc = cfg.pv.v_oc(init.temperature);
        let v_pv = 0.8 * v_oc;
        let i_pv = pv_array_current(v_pv, init.irradiance, init.temperature, &cfg.pv);
        let shares = control.shares();
        let p_ic = init.p_pcc * shares[0] / shares.iter().sum::<f64>();
        let i_bat = (init.p_dcload + p_ic - v_pv * i_pv) / cfg.dc.v_bat;
        let state = NetworkState {
            dc: DcSideState {
                v_pv,
                i_pv,
                i_bat,
                v_dc: control.v_dc_ref,
                i_o: 0.0,
            },
            vsis: vec![VsiState::default(); m],
            z_ac: cfg.load_impedance(init.p_pcc),
            p_dcload: init.p_dcload,
            irradiance: init.irradiance,
            temperature: init.temperature,
        };
        let t_s = control.t_s;
        let applied = Actuation {
            pv: PvSwitch::Off,
            bat: BatteryPair::LowerOn,
            vectors: vec![0; m],
        };
        let reported = instantaneous_powers(&state, &cfg.dc);
        let droop = (0..m)
            .map(|_| DroopUnit {
                phase: 0.0,
                p: LowPass::new(cfg.droop.filter_hz, t_s, 0.0),
                q: LowPass::new(cfg.droop.filter_hz, t_s, 0.0),
                voltage: TwoAxis::ZERO,
            })
            .collect();
        let window = FREQUENCY_WINDOW_CYCLES / control.v_ref_freq;
        let hysteresis = 0.05 * control.v_ref_peak;
        Ok(Self {
            mppt: MpptState::new(v_pv, i_pv, v_oc),
            mppt_acc: (0.0, 0.0, 0),
            p_net_filter: LowPass::new(control.dc_feedforward_filter_hz, t_s, init.p_dcload - v_pv * i_pv),
            v_pv_prev: v_pv,
            applied,
            pending: None,
            droop,
            oscillator: ReferenceOscillator::new(control.v_ref_freq, control.v_ref_peak),
            meter: PowerMeter::new(&reported, t_s),
            reported,
            rms: LowPass::new(PowerMeter::CUTOFF_HZ, t_s, 0.0),
            f_pcc: FrequencyTracker::new(window, hysteresis),
            f_bus: vec![FrequencyTracker::new(window, hysteresis); m],
            k: 0,
            next_event: 0,
            state,
            control,
            cfg,
        })
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.control.t_s
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn control(&self) -> &ControlConfig {
        &self.control
    }

    /// Control periods completed so far.
    pub fn steps(&self) -> u64 {
        self.k
    }

    /// Current trace sample.
    pub fn sample(&self) -> TraceRow {
        let m = self.state.vsis.len();
        let droop = self.cfg.mode == ControlMode::Droop;
        TraceRow {
            t: self.time(),
            v_dc: self.state.dc.v_dc,
            v_pv: self.state.dc.v_pv,
            i_pv: self.state.dc.i_pv,
            p_pv: self.reported.p_pv,
            p_bat: self.reported.p_bat,
            p_dcload: self.reported.p_dcload,
            p_vsi: self.reported.p_vsi.clone(),
            v_pcc_rms: self.rms.value(),
            f_pcc: self.f_pcc.frequency().unwrap_or(f64::NAN),
            f_bus: self.f_bus.iter().map(|f| f.frequency().unwrap_or(f64::NAN)).collect(),
            chosen_vectors: if droop {
                vec![-1; m]
            } else {
                self.applied.vectors.iter().map(|&n| n as i8).collect()
            },
            pv_switch: if droop { 0 } else { self.applied.pv as u8 },
            bat_switch: if droop { 0 } else { self.applied.bat.gates().0 },
        }
    }

    fn apply_due_events(&mut self) -> usize {
        let mut n = 0;
        while let Some(e) = self.cfg.events.get(self.next_event) {
            let due = (e.time / self.control.t_s).round() as u64;
            if due > self.k {
                break;
            }
            let kind = e.kind;
            apply_event(&mut self.state, &mut self.control, &kind);
            if let EventKind::TemperatureStep(t) = kind {
                self.mppt.v_max = self.cfg.pv.v_oc(t);
            }
            self.next_event += 1;
            n += 1;
        }
        n
    }

    fn input_voltages(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.cfg.vsi.iter().map(|p| p.v_in).collect();
        if self.cfg.mode == ControlMode::Mpc {
            v[0] = self.state.dc.v_dc;
        }
        v
    }

    /// Interfacing-converter DC current for vector `n1` and state `x`.
    fn interface_current(n1: u8, dc: &DcSideState, vsi1: &VsiState) -> f64 {
        if dc.v_dc <= 0.0 {
            return 0.0;
        }
        let v_n = vsi_voltage_vector(n1, dc.v_dc);
        three_phase_power(v_n, vsi1.i_f) / dc.v_dc
    }

    fn decide_mpc(&mut self) -> Result<Actuation> {
        let t = self.time();
        let cfg = &self.cfg;
        let dc = self.state.dc;

        let (sv, si, n) = &mut self.mppt_acc;
        *sv += dc.v_pv;
        *si += dc.i_pv;
        *n += 1;
        if *n >= cfg.mppt.period_steps {
            let nf = f64::from(*n);
            self.mppt = mppt_step(&self.mppt, *sv / nf, *si / nf, &cfg.mppt);
            self.mppt_acc = (0.0, 0.0, 0);
        }
        let pv_meas = PvMeasurement {
            v_pv_k: dc.v_pv,
            v_pv_km1: self.v_pv_prev,
            i_pv_k: dc.i_pv,
            p_mpp: self.mppt.power_reference(dc.v_pv, &cfg.mppt),
        };
        let pv = select_pv_switch(&pv_meas, &self.control, cfg.dc.l_pv);

        let v_in = self.input_voltages();
        let group = VsiGroup {
            states: &self.state.vsis,
            params: &cfg.vsi,
            v_in: &v_in,
            z_ac: self.state.z_ac,
        };
        let horizon = self.control.voltage_horizon as f64 * self.control.t_s;
        let v_ref = oscillator_reference(&self.oscillator, t + horizon);
        let vectors = select_vsi_vectors(&group, v_ref, &self.control, &self.applied.vectors)?;

        let i_ic = Self::interface_current(vectors[0], &dc, &self.state.vsis[0]);
        let i_load = if dc.v_dc > 0.0 {
            self.state.p_dcload / dc.v_dc
        } else {
            0.0
        };
        let i_o = i_ic + i_load - (1.0 - pv.duty()) * dc.i_pv.max(0.0);
        // lossless converters: average bus currents from terminal powers
        let vsi1 = &self.state.vsis[0];
        let p_net = three_phase_power(vsi1.v_bus, vsi1.i_t) + self.state.p_dcload - dc.v_pv * dc.i_pv;
        let dc_meas = DcMeasurement {
            v_dc_k: dc.v_dc,
            i_bat_k: dc.i_bat,
            i_o_k: i_o,
            i_o_average: if dc.v_dc > 0.0 {
                self.p_net_filter.update(p_net) / dc.v_dc
            } else {
                0.0
            },
        };
        let bat = select_battery_switches(&dc_meas, &self.control, &cfg.dc);
        Ok(Actuation { pv, bat, vectors })
    }

    fn update_droop(&mut self) {
        let shares = self.control.shares();
        let t_s = self.control.t_s;
        for ((unit, x), share) in self.droop.iter_mut().zip(&self.state.vsis).zip(shares) {
            let p = unit.p.update(three_phase_power(x.v_bus, x.i_t));
            let q = unit.q.update(1.5 * x.v_bus.cross(x.i_t));
            let out = droop_vsi_update(p, q, &self.cfg.droop.for_share(share), unit.phase, t_s);
            unit.voltage = TwoAxis::from_polar(out.amplitude, unit.phase);
            unit.phase = out.phase;
        }
    }

    /// Run one control period: events, measurements, decisions and `t_s/dt`
    /// plant steps. Returns the number of events applied.
    pub fn advance(&mut self) -> Result<usize> {
        let events = self.apply_due_events();
        let t = self.time();
        let mode = self.cfg.mode;
        let blowup = |e: Error, at: f64| match e {
            Error::NumericalBlowup { what, .. } => Error::NumericalBlowup { what, time: at },
            other => other,
        };

        if mode == ControlMode::Mpc {
            let decision = self.decide_mpc()?;
            self.applied = if self.control.actuation_delay {
                self.pending.replace(decision).unwrap_or_else(|| self.applied.clone())
            } else {
                decision
            };
        } else {
            self.update_droop();
        }
        self.v_pv_prev = self.state.dc.v_pv;

        let n_sub = self.cfg.substeps();
        let dt = self.cfg.dt;
        let m = self.state.vsis.len();
        let mut acc = PowerReport {
            p_vsi: vec![0.0; m],
            ..PowerReport::default()
        };
        let mut voltages = vec![TwoAxis::ZERO; m];
        for s in 0..n_sub {
            let at = t + s as f64 * dt;
            let v_in = self.input_voltages();
            for (j, v) in voltages.iter_mut().enumerate() {
                *v = match mode {
                    ControlMode::Mpc => vsi_voltage_vector(self.applied.vectors[j], v_in[j]),
                    ControlMode::Droop => self.droop[j].voltage,
                };
            }
            if mode == ControlMode::Mpc {
                let dc = &self.state.dc;
                let inputs = DcInputs {
                    pv_switch: self.applied.pv,
                    bat_pair: self.applied.bat,
                    i_o: Self::interface_current(self.applied.vectors[0], dc, &self.state.vsis[0]),
                    p_dcload: self.state.p_dcload,
                    pv_current_source: pv_array_current(
                        dc.v_pv,
                        self.state.irradiance,
                        self.state.temperature,
                        &self.cfg.pv,
                    ),
                };
                self.state.dc = step_dc_side(dc, &self.cfg.dc, &inputs, dt).map_err(|e| blowup(e, at))?;
            }
            self.state.vsis = step_ac_side(&self.state.vsis, &self.cfg.vsi, &voltages, self.state.z_ac, dt)
                .map_err(|e| blowup(e, at))?;
            let p = instantaneous_powers(&self.state, &self.cfg.dc);
            acc.p_pv += p.p_pv;
            acc.p_bat += p.p_bat;
            acc.p_dcload += p.p_dcload;
            acc.p_pcc += p.p_pcc;
            for (a, b) in acc.p_vsi.iter_mut().zip(&p.p_vsi) {
                *a += b;
            }
        }
        let inv = 1.0 / n_sub as f64;
        acc.p_pv *= inv;
        acc.p_bat *= inv;
        acc.p_dcload *= inv;
        acc.p_pcc *= inv;
        acc.p_vsi.iter_mut().for_each(|p| *p *= inv);
        self.reported = self.meter.update(&acc);

        self.k += 1;
        let t_next = self.time();
        let v_pcc = pcc_voltage(&self.state.vsis, self.state.z_ac);
        self.rms.update(v_pcc.magnitude() / SQRT_2);
        self.f_pcc.push(t_next, v_pcc.alpha);
        for (f, x) in self.f_bus.iter_mut().zip(&self.state.vsis) {
            f.push(t_next, x.v_bus.alpha);
        }
        Ok(events)
    }
}

/// Run `cfg` to completion.
pub fn run(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    let mut sim = Simulation::new(cfg)?;
    let n = cfg.control_steps();
    let dec = cfg.trace_decimation as u64;
    let mut rows = Vec::with_capacity((n / dec) as usize + 1);
    let mut events = 0;
    for _ in 0..n {
        events += sim.advance()?;
        if sim.steps() % dec == 0 {
            rows.push(sim.sample());
        }
    }
    Ok(SimulationOutput {
        trace: Trace {
            vsi_count: cfg.vsi.len(),
            rows,
        },
        summary: RunSummary {
            name: cfg.name.clone(),
            control_steps: sim.steps(),
            final_time: sim.time(),
            events_applied: events,
            final_state: sim.state.clone(),
            final_control: sim.control.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(duration: f64) -> SimulationConfig {
        SimulationConfig {
            duration,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn zero_duration_gives_empty_trace() {
        let out = run(&short(0.0)).unwrap();
        assert!(out.trace.rows.is_empty());
        assert_eq!(out.summary.control_steps, 0);
        assert_eq!(out.summary.final_state.dc.v_dc, 800.0);
    }

    #[test]
    fn controller_cadence() {
        let out = run(&short(0.01)).unwrap();
        assert_eq!(out.summary.control_steps, 500);
        assert_eq!(out.trace.rows.len(), 50);
        let t = out.trace.times();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn dt_must_divide_ts() {
        let cfg = SimulationConfig {
            dt: 3e-6,
            ..short(0.01)
        };
        assert!(matches!(run(&cfg), Err(Error::ConfigInvalid(m)) if m.contains("dt")));
    }

    #[test]
    fn unsorted_events_rejected() {
        let cfg = SimulationConfig {
            events: vec![
                ScenarioEvent::new(0.5, EventKind::DcLoadStep(1.0)),
                ScenarioEvent::new(0.2, EventKind::DcLoadStep(2.0)),
            ],
            ..short(0.01)
        };
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(m)) if m.contains("sorted")));
    }

    #[test]
    fn beta_index_checked() {
        let cfg = SimulationConfig {
            events: vec![ScenarioEvent::new(0.1, EventKind::BetaChange(2, 1.0))],
            ..short(0.01)
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn events_replace_parameters() {
        let cfg = SimulationConfig::default();
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut state = sim.state().clone();
        let mut control = sim.control().clone();
        apply_event(&mut state, &mut control, &EventKind::BetaChange(1, 8.0 / 7.0));
        assert_eq!(control.betas[0], 8.0 / 7.0);
        apply_event(&mut state, &mut control, &EventKind::DcLoadStep(13_000.0));
        assert_eq!(state.p_dcload, 13_000.0);
        let before = state.clone();
        apply_event(&mut state, &mut control, &EventKind::IrradianceStep(1000.0));
        assert_eq!(state, before);
        apply_event(&mut state, &mut control, &EventKind::PccLoadStep(33_000.0));
        assert!((1.5 * 311.0 * 311.0 / state.z_ac - 33_000.0).abs() < 1e-6);
        apply_event(&mut state, &mut control, &EventKind::VdcRefChange(750.0));
        assert_eq!(control.v_dc_ref, 750.0);
        // the engine applies events at their snapped control instant
        sim.cfg.events = vec![ScenarioEvent::new(3.1 * cfg.control.t_s, EventKind::DcLoadStep(1.0))];
        for _ in 0..3 {
            assert_eq!(sim.advance().unwrap(), 0);
        }
        assert_eq!(sim.advance().unwrap(), 1);
        assert_eq!(sim.state().p_dcload, 1.0);
        assert_eq!(sim.advance().unwrap(), 0);
    }

    #[test]
    fn droop_mode_freezes_dc_side() {
        let cfg = SimulationConfig {
            mode: ControlMode::Droop,
            ..short(0.005)
        };
        let out = run(&cfg).unwrap();
        let dc0 = Simulation::new(&cfg).unwrap().state().dc;
        assert_eq!(out.summary.final_state.dc, dc0);
        assert!(out.trace.rows.iter().all(|r| r.chosen_vectors == vec![-1, -1]));
    }

    #[test]
    fn trace_row_round_trip() {
        let out = run(&short(0.002)).unwrap();
        let row = &out.trace.rows[3];
        let values = Trace::row_values(row);
        let back = Trace::row_from_values(2, &values).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&Trace::row_values(&back)), bits(&values));
        assert_eq!(out.trace.columns().len(), Trace::row_values(row).len());
    }

    #[test]
    fn event_file_form() {
        let e: ScenarioEvent = toml::from_str("time = 0.4\nkind = \"beta_change\"\nindex = 1\nvalue = 1.25").unwrap();
        assert_eq!(e.kind, EventKind::BetaChange(1, 1.25));
        let e: std::result::Result<ScenarioEvent, _> =
            toml::from_str("time = 0.4\nkind = \"dc_load_step\"\nindex = 1\nvalue = 1.0");
        assert!(e.is_err());
        let e: std::result::Result<ScenarioEvent, _> = toml::from_str("time = 0.4\nkind = \"warp\"\nvalue = 1.0");
        assert!(e.unwrap_err().to_string().contains("unknown event kind"));
    }
}
