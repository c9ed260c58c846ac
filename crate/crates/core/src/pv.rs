//! PV array model and incremental-conductance maximum power point tracking.
//!
//! The array is `parallel_strings` identical strings of `series_cells` cells,
//! each string described by the single-diode equation
//!
//! ```text
//! I = Iph - I0·(exp((V + I·Rs)/(n·Ns·Vt)) - 1) - (V + I·Rs)/Rsh
//! ```
//!
//! with `I0` chosen so that the string current is exactly zero at the
//! open-circuit voltage for the given temperature.

use serde::{Deserialize, Serialize};

const BOLTZMANN: f64 = 1.380_649e-23;
const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
const STC_IRRADIANCE: f64 = 1000.0;
const STC_TEMPERATURE: f64 = 25.0;

/// String-level single-diode parameters, replicated over `parallel_strings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvArrayParams {
    /// String short-circuit current at STC, A.
    pub i_sc_stc: f64,
    /// String open-circuit voltage at STC, V.
    pub v_oc_stc: f64,
    pub diode_ideality: f64,
    pub series_cells: u32,
    pub parallel_strings: u32,
    /// A/°C
    pub temp_coeff_isc: f64,
    /// V/°C, negative for silicon.
    pub temp_coeff_voc: f64,
    /// String series resistance, Ω.
    pub r_s: f64,
    /// String shunt resistance, Ω.
    pub r_sh: f64,
}

impl Default for PvArrayParams {
    /// Calibrated so the array delivers 35.0 kW at 1000 W/m², 25 °C and
    /// 32.0 kW at 921 W/m².
    fn default() -> Self {
        Self {
            i_sc_stc: 8.518_346,
            v_oc_stc: 680.0,
            diode_ideality: 1.3,
            series_cells: 1140,
            parallel_strings: 8,
            temp_coeff_isc: 0.004,
            temp_coeff_voc: -2.2,
            r_s: 1.0,
            r_sh: 2000.0,
        }
    }
}

impl PvArrayParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("i_sc_stc", self.i_sc_stc),
            ("v_oc_stc", self.v_oc_stc),
            ("diode_ideality", self.diode_ideality),
            ("r_s", self.r_s),
            ("r_sh", self.r_sh),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("pv.{key} must be positive, got {v}"));
            }
        }
        if self.series_cells == 0 || self.parallel_strings == 0 {
            return Err("pv.series_cells and pv.parallel_strings must be positive".into());
        }
        if self.r_sh <= 10.0 * self.r_s {
            return Err("pv.r_sh must be much larger than pv.r_s".into());
        }
        Ok(())
    }

    /// Open-circuit voltage at `temperature`, V.
    pub fn v_oc(&self, temperature: f64) -> f64 {
        self.v_oc_stc + self.temp_coeff_voc * (temperature - STC_TEMPERATURE)
    }

    fn string_model(&self, irradiance: f64, temperature: f64) -> StringModel {
        let vt = BOLTZMANN * (temperature + 273.15) / ELECTRON_CHARGE;
        let a = self.diode_ideality * self.series_cells as f64 * vt;
        let i_sc_t = self.i_sc_stc + self.temp_coeff_isc * (temperature - STC_TEMPERATURE);
        let v_oc = self.v_oc(temperature);
        StringModel {
            i_ph: i_sc_t * irradiance.max(0.0) / STC_IRRADIANCE,
            i_0: (i_sc_t - v_oc / self.r_sh) / (v_oc / a).exp_m1(),
            a,
            r_s: self.r_s,
            r_sh: self.r_sh,
        }
    }
}

struct StringModel {
    i_ph: f64,
    i_0: f64,
    a: f64,
    r_s: f64,
    r_sh: f64,
}

impl StringModel {
    /// Residual of the implicit equation; strictly decreasing in `i`.
    fn residual(&self, v: f64, i: f64) -> f64 {
        let vd = v + i * self.r_s;
        self.i_ph - self.i_0 * (vd / self.a).exp_m1() - vd / self.r_sh - i
    }

    fn current(&self, v: f64) -> f64 {
        let mut hi = self.i_ph + 1.0;
        let mut lo = -1.0;
        while self.residual(v, lo) < 0.0 {
            lo *= 2.0;
            if lo < -1e9 {
                return lo;
            }
        }
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if self.residual(v, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Array terminal current at voltage `v` (bisection to 1e-9 A per string).
pub fn pv_array_current(v: f64, irradiance: f64, temperature: f64, params: &PvArrayParams) -> f64 {
    let model = params.string_model(irradiance, temperature);
    params.parallel_strings as f64 * model.current(v.max(0.0))
}

/// Maximum power point by golden-section search of `v·i(v)` over `[0, V_oc]`.
///
/// Returns `(v_mpp, p_mpp)`.
pub fn mpp_oracle(irradiance: f64, temperature: f64, params: &PvArrayParams) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let power = |v: f64| v * pv_array_current(v, irradiance, temperature, params);
    let (mut a, mut b) = (0.0, params.v_oc(temperature));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut pc, mut pd) = (power(c), power(d));
    while b - a > 1e-3 {
        if pc > pd {
            b = d;
            d = c;
            pd = pc;
            c = b - INV_PHI * (b - a);
            pc = power(c);
        } else {
            a = c;
            c = d;
            pc = pd;
            d = a + INV_PHI * (b - a);
            pd = power(d);
        }
    }
    let v = 0.5 * (a + b);
    (v, power(v))
}

/// Incremental-conductance tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpptConfig {
    /// MPPT cadence in control periods.
    pub period_steps: u32,
    /// Voltage perturbation per MPPT step, V.
    pub step: f64,
    /// Below this |ΔV| the decision is taken on ΔI alone, V.
    pub epsilon: f64,
    /// Deadband on dI/dV + I/V, S.
    pub conductance_tolerance: f64,
    /// Smoothing factor of the power estimate per MPPT step, (0, 1].
    pub filter_alpha: f64,
    /// Gain converting voltage error into extra power demand, W/V.
    pub voltage_gain: f64,
}

impl Default for MpptConfig {
    fn default() -> Self {
        Self {
            period_steps: 100,
            step: 0.5,
            epsilon: 0.01,
            conductance_tolerance: 2e-4,
            filter_alpha: 0.5,
            voltage_gain: 200.0,
        }
    }
}

impl MpptConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.period_steps == 0 {
            return Err("mppt.period_steps must be positive".into());
        }
        for (key, v) in [
            ("step", self.step),
            ("epsilon", self.epsilon),
            ("voltage_gain", self.voltage_gain),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("mppt.{key} must be positive, got {v}"));
            }
        }
        if !(self.filter_alpha > 0.0 && self.filter_alpha <= 1.0) {
            return Err("mppt.filter_alpha must lie in (0, 1]".into());
        }
        if !(self.conductance_tolerance >= 0.0) {
            return Err("mppt.conductance_tolerance must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpptState {
    pub v_prev: f64,
    pub i_prev: f64,
    /// Filtered measured power; the basis of the exported P_MPP.
    pub p_mpp_estimate: f64,
    pub v_target: f64,
    /// Upper clamp for `v_target`, normally the array open-circuit voltage.
    pub v_max: f64,
}

impl MpptState {
    /// Tracker starting at operating point `(v, i)`.
    pub fn new(v: f64, i: f64, v_max: f64) -> Self {
        Self {
            v_prev: 0.0,
            i_prev: 0.0,
            p_mpp_estimate: v * i,
            v_target: v.clamp(0.0, v_max),
            v_max,
        }
    }

    /// Power reference handed to the PV predictive controller.
    ///
    /// The filtered power estimate is biased by the voltage error so that
    /// drawing more power pulls the PV voltage down towards `v_target` and
    /// drawing less lets it rise.
    pub fn power_reference(&self, v_now: f64, cfg: &MpptConfig) -> f64 {
        (self.p_mpp_estimate + cfg.voltage_gain * (v_now - self.v_target)).max(0.0)
    }
}

/// Direction in which incremental conductance moves the operating voltage.
fn incremental_direction(state: &MpptState, v: f64, i: f64, cfg: &MpptConfig) -> f64 {
    let dv = v - state.v_prev;
    let di = i - state.i_prev;
    if dv.abs() < cfg.epsilon {
        if di.abs() <= f64::EPSILON * i.abs().max(1.0) {
            0.0
        } else {
            di.signum()
        }
    } else {
        // dI/dV + I/V has the sign of dP/dV
        let g = di / dv + if v > 0.0 { i / v } else { 0.0 };
        if g.abs() <= cfg.conductance_tolerance {
            0.0
        } else {
            g.signum()
        }
    }
}

/// One incremental-conductance update from measured `(v, i)`.
pub fn mppt_step(state: &MpptState, v: f64, i: f64, cfg: &MpptConfig) -> MpptState {
    let dir = incremental_direction(state, v, i, cfg);
    MpptState {
        v_prev: v,
        i_prev: i,
        p_mpp_estimate: state.p_mpp_estimate + cfg.filter_alpha * (v * i - state.p_mpp_estimate),
        v_target: (state.v_target + dir * cfg.step).clamp(0.0, state.v_max),
        v_max: state.v_max,
    }
}
