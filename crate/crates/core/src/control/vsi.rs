//! Inverter-group controller: space-vector set, coupled state prediction,
//! weighted tracking/sharing cost and exhaustive vector selection.

use std::f64::consts::FRAC_PI_3;

use super::{ControlConfig, VsiSearch};
use crate::error::{Error, Result};
use crate::numerics::TwoAxis;
use crate::plant::{pcc_voltage, VsiParams, VsiState};

/// Voltage vectors of a two-level three-phase bridge.
pub const VECTOR_COUNT: u8 = 8;

const MAX_JOINT_CANDIDATES: usize = 1_000_000;

/// Output voltage of switching vector `n`: zero for 0 and 7, otherwise
/// `(2/3)·v_in` at `(n-1)·60°`.
pub fn vsi_voltage_vector(n: u8, v_in: f64) -> TwoAxis {
    assert!(n < VECTOR_COUNT, "vector index {n} out of range");
    match n {
        0 | 7 => TwoAxis::ZERO,
        _ => TwoAxis::from_polar(2.0 / 3.0 * v_in, f64::from(n - 1) * FRAC_PI_3),
    }
}

/// Upper-switch states `(S_a, S_b, S_c)` of vector `n`.
pub fn switch_states(n: u8) -> [u8; 3] {
    match n {
        0 => [0, 0, 0],
        1 => [1, 0, 0],
        2 => [1, 1, 0],
        3 => [0, 1, 0],
        4 => [0, 1, 1],
        5 => [0, 0, 1],
        6 => [1, 0, 1],
        7 => [1, 1, 1],
        _ => panic!("vector index {n} out of range"),
    }
}

/// Predicted next states of every inverter plus the PCC voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct VsiPrediction {
    /// States one sample ahead.
    pub next: Vec<VsiState>,
    /// PCC voltage one sample ahead.
    pub v_pcc_next: TwoAxis,
    /// PCC voltage `horizon` samples ahead with the vectors held.
    pub v_pcc_horizon: TwoAxis,
    /// States `horizon` samples ahead with the vectors held.
    pub at_horizon: Vec<VsiState>,
    pub horizon: usize,
}

/// One forward-Euler step of the coupled inverter network, in place.
///
/// Per inverter, with `Σ i_T` taken over the whole group at sample k:
///
/// ```text
/// i_F' = (1 - Ts·R_F/L_F)·i_F - (Ts/L_F)·v_Bus + (Ts/L_F)·v_n
/// v_Bus' = v_Bus + (Ts/C)·i_F - (Ts/C)·i_o
/// i_T' = (Ts/L_T)·v_Bus + (1 - Ts·R_T/L_T)·i_T - (Ts·Z_AC/L_T)·Σ i_T
/// ```
///
/// where `i_o = i_T + i_local` is everything leaving the local bus node.
fn advance(states: &mut [VsiState], params: &[VsiParams], voltages: &[TwoAxis], z_ac: f64, t_s: f64) {
    let sum_i_t: TwoAxis = states.iter().map(|x| x.i_t).sum();
    for ((x, p), &v_n) in states.iter_mut().zip(params).zip(voltages) {
        let i_o = x.i_t + p.local_load_current(x.v_bus);
        let kf = t_s / p.l_f;
        let kc = t_s / p.c_f;
        let kt = t_s / p.l_t;
        *x = VsiState {
            i_f: x.i_f * (1.0 - t_s * p.r_f / p.l_f) - x.v_bus * kf + v_n * kf,
            v_bus: x.v_bus + x.i_f * kc - i_o * kc,
            i_t: x.v_bus * kt + x.i_t * (1.0 - t_s * p.r_t / p.l_t) - sum_i_t * (kt * z_ac),
        };
    }
}

fn fill_voltages(out: &mut [TwoAxis], choice: &[u8], v_in: &[f64]) {
    for ((v, &n), &vin) in out.iter_mut().zip(choice).zip(v_in) {
        *v = vsi_voltage_vector(n, vin);
    }
}

/// Prediction buffers reused across candidates.
struct Scratch {
    pred: VsiPrediction,
    voltages: Vec<TwoAxis>,
}

impl Scratch {
    fn new(m: usize) -> Self {
        Self {
            pred: VsiPrediction {
                next: vec![VsiState::default(); m],
                v_pcc_next: TwoAxis::ZERO,
                v_pcc_horizon: TwoAxis::ZERO,
                at_horizon: vec![VsiState::default(); m],
                horizon: 1,
            },
            voltages: vec![TwoAxis::ZERO; m],
        }
    }

    fn predict(&mut self, group: &VsiGroup<'_>, choice: &[u8], t_s: f64, horizon: usize) {
        fill_voltages(&mut self.voltages, choice, group.v_in);
        self.pred.next.copy_from_slice(group.states);
        advance(&mut self.pred.next, group.params, &self.voltages, group.z_ac, t_s);
        self.pred.v_pcc_next = pcc_voltage(&self.pred.next, group.z_ac);
        self.pred.horizon = horizon;
        self.pred.at_horizon.copy_from_slice(&self.pred.next);
        for _ in 1..horizon {
            advance(&mut self.pred.at_horizon, group.params, &self.voltages, group.z_ac, t_s);
        }
        self.pred.v_pcc_horizon = pcc_voltage(&self.pred.at_horizon, group.z_ac);
    }
}

/// Measured inverter group at sample k.
#[derive(Debug, Clone, Copy)]
pub struct VsiGroup<'a> {
    pub states: &'a [VsiState],
    pub params: &'a [VsiParams],
    /// DC input voltage of each inverter.
    pub v_in: &'a [f64],
    /// PCC load, Ω.
    pub z_ac: f64,
}

impl VsiGroup<'_> {
    fn check(&self, choice_len: usize) {
        let m = self.states.len();
        assert!(
            self.params.len() == m && self.v_in.len() == m && choice_len == m,
            "inverter group inputs differ in length"
        );
    }
}

/// One-sample prediction for the vector tuple `choice`.
pub fn predict_vsi_group(group: &VsiGroup<'_>, choice: &[u8], cfg: &ControlConfig) -> VsiPrediction {
    predict_vsi_horizon(group, choice, cfg, 1)
}

/// Prediction with the vector tuple `choice` held for `horizon` samples;
/// `next` and `v_pcc_next` are still one sample ahead.
pub fn predict_vsi_horizon(group: &VsiGroup<'_>, choice: &[u8], cfg: &ControlConfig, horizon: usize) -> VsiPrediction {
    group.check(choice.len());
    let mut s = Scratch::new(group.states.len());
    s.predict(group, choice, cfg.t_s, horizon);
    s.pred
}

/// `λ·|v_ref − v_PCC|² + (1−λ)·Σ_j |i_F,j − β_j·i_F,j+1|²`.
///
/// The voltage term uses the PCC voltage at the prediction horizon, the
/// sharing term the filter currents one sample ahead.
pub fn vsi_cost(pred: &VsiPrediction, v_ref: TwoAxis, cfg: &ControlConfig) -> f64 {
    let tracking = (v_ref - pred.v_pcc_horizon).norm_sq();
    let sharing: f64 = pred
        .next
        .windows(2)
        .zip(&cfg.betas)
        .map(|(pair, &beta)| (pair[0].i_f - pair[1].i_f * beta).norm_sq())
        .sum();
    let line: f64 = if cfg.line_sharing_weight > 0.0 {
        pred.at_horizon
            .windows(2)
            .zip(&cfg.betas)
            .map(|(pair, &beta)| (pair[0].i_t - pair[1].i_t * beta).norm_sq())
            .sum()
    } else {
        0.0
    };
    cfg.lambda * tracking + (1.0 - cfg.lambda) * (sharing + cfg.line_sharing_weight * line)
}

/// Vector tuple minimising [`vsi_cost`].
///
/// `v_ref` is the PCC reference at the prediction horizon. `previous`
/// holds the vectors applied during the last period; sequential search
/// keeps the other inverters there while it scans one.
pub fn select_vsi_vectors(
    group: &VsiGroup<'_>,
    v_ref: TwoAxis,
    cfg: &ControlConfig,
    previous: &[u8],
) -> Result<Vec<u8>> {
    let m = group.states.len();
    group.check(previous.len());
    let horizon = cfg.voltage_horizon.max(1);
    let mut scratch = Scratch::new(m);
    match cfg.search {
        VsiSearch::Joint => {
            let total = 8usize
                .checked_pow(m as u32)
                .filter(|&n| n <= MAX_JOINT_CANDIDATES)
                .ok_or(Error::ControlSetTooLarge { vsis: m })?;
            let mut choice = vec![0u8; m];
            let mut best = choice.clone();
            let mut best_cost = f64::INFINITY;
            for _ in 0..total {
                scratch.predict(group, &choice, cfg.t_s, horizon);
                let cost = vsi_cost(&scratch.pred, v_ref, cfg);
                if cost < best_cost {
                    best_cost = cost;
                    best.copy_from_slice(&choice);
                }
                increment_tuple(&mut choice);
            }
            Ok(best)
        }
        VsiSearch::Sequential => {
            let mut chosen = previous.to_vec();
            for i in 0..m {
                let mut choice = previous.to_vec();
                let mut best_cost = f64::INFINITY;
                for n in 0..VECTOR_COUNT {
                    choice[i] = n;
                    scratch.predict(group, &choice, cfg.t_s, horizon);
                    let cost = vsi_cost(&scratch.pred, v_ref, cfg);
                    if cost < best_cost {
                        best_cost = cost;
                        chosen[i] = n;
                    }
                }
            }
            Ok(chosen)
        }
    }
}

/// Next tuple in lexicographic order, first inverter most significant.
fn increment_tuple(choice: &mut [u8]) {
    for d in choice.iter_mut().rev() {
        *d += 1;
        if *d < VECTOR_COUNT {
            return;
        }
        *d = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: usize) -> Vec<VsiParams> {
        vec![VsiParams::default(); m]
    }

    #[test]
    fn vector_examples() {
        assert_eq!(vsi_voltage_vector(0, 800.0), TwoAxis::ZERO);
        assert_eq!(vsi_voltage_vector(7, 800.0), TwoAxis::ZERO);
        let v = vsi_voltage_vector(1, 800.0);
        assert!((v.alpha - 533.333_333_333).abs() < 1e-6 && v.beta == 0.0);
        let v = vsi_voltage_vector(3, 600.0);
        assert!((v.alpha + 200.0).abs() < 1e-9 && (v.beta - 346.410_161_514).abs() < 1e-6);
    }

    #[test]
    fn vector_geometry() {
        let v_in = 731.0;
        for n in 1..=6u8 {
            let v = vsi_voltage_vector(n, v_in);
            assert!((v.magnitude() - 2.0 / 3.0 * v_in).abs() < 1e-12 * v_in);
            let w = vsi_voltage_vector(n % 6 + 1, v_in);
            let angle = (v.dot(w) / (v.magnitude() * w.magnitude())).clamp(-1.0, 1.0).acos();
            assert!((angle - FRAC_PI_3).abs() < 1e-12, "n={n}: {angle}");
        }
    }

    #[test]
    fn switch_states_reproduce_vectors() {
        use crate::numerics::{clarke_forward, ThreePhase};
        for n in 0..VECTOR_COUNT {
            let [a, b, c] = switch_states(n).map(|s| f64::from(s) * 800.0);
            // pole voltages relative to the DC midpoint; Clarke drops the common mode
            let v = clarke_forward(ThreePhase::new(a, b, c));
            let w = vsi_voltage_vector(n, 800.0);
            assert!((v - w).magnitude() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn zero_state_zero_vector_predicts_zero() {
        let p = params(2);
        let states = vec![VsiState::default(); 2];
        let group = VsiGroup {
            states: &states,
            params: &p,
            v_in: &[800.0, 800.0],
            z_ac: 6.4,
        };
        let pred = predict_vsi_group(&group, &[0, 0], &ControlConfig::default());
        assert!(pred.next.iter().all(|x| *x == VsiState::default()));
        assert_eq!(pred.v_pcc_next, TwoAxis::ZERO);
    }

    #[test]
    fn single_vsi_vector_one_step() {
        let p = params(1);
        let states = vec![VsiState::default()];
        let group = VsiGroup {
            states: &states,
            params: &p,
            v_in: &[800.0],
            z_ac: 6.4,
        };
        let pred = predict_vsi_group(&group, &[1], &ControlConfig::default());
        assert!((pred.next[0].i_f.alpha - 5.333_333_333).abs() < 1e-6);
        assert_eq!(pred.next[0].i_f.beta, 0.0);
        assert_eq!(pred.next[0].v_bus, TwoAxis::ZERO);
        assert_eq!(pred.next[0].i_t, TwoAxis::ZERO);
    }

    #[test]
    fn one_step_pcc_voltage_ignores_the_vector() {
        let p = params(2);
        let x = VsiState {
            i_f: TwoAxis::new(10.0, -3.0),
            v_bus: TwoAxis::new(250.0, 120.0),
            i_t: TwoAxis::new(9.0, 4.0),
        };
        let states = vec![x; 2];
        let group = VsiGroup {
            states: &states,
            params: &p,
            v_in: &[800.0, 800.0],
            z_ac: 6.4,
        };
        let cfg = ControlConfig::default();
        let a = predict_vsi_group(&group, &[0, 0], &cfg).v_pcc_next;
        let b = predict_vsi_group(&group, &[1, 4], &cfg).v_pcc_next;
        assert_eq!(a, b);
        // three samples ahead the vector has reached the PCC
        let a = predict_vsi_horizon(&group, &[0, 0], &cfg, 3).v_pcc_horizon;
        let b = predict_vsi_horizon(&group, &[1, 1], &cfg, 3).v_pcc_horizon;
        assert!((a - b).magnitude() > 0.01);
    }

    #[test]
    fn identical_vsis_predict_identically() {
        let p = params(2);
        let x = VsiState {
            i_f: TwoAxis::new(1.0, 2.0),
            v_bus: TwoAxis::new(30.0, -40.0),
            i_t: TwoAxis::new(0.5, 0.1),
        };
        let states = vec![x; 2];
        let group = VsiGroup {
            states: &states,
            params: &p,
            v_in: &[800.0, 800.0],
            z_ac: 6.4,
        };
        let pred = predict_vsi_group(&group, &[5, 5], &ControlConfig::default());
        assert_eq!(pred.next[0], pred.next[1]);
    }

    fn prediction(v_pcc: TwoAxis, i_f: &[TwoAxis]) -> VsiPrediction {
        let next: Vec<VsiState> = i_f
            .iter()
            .map(|&i_f| VsiState {
                i_f,
                ..VsiState::default()
            })
            .collect();
        VsiPrediction {
            at_horizon: next.clone(),
            next,
            v_pcc_next: v_pcc,
            v_pcc_horizon: v_pcc,
            horizon: 1,
        }
    }

    #[test]
    fn cost_examples() {
        let cfg = ControlConfig::default();
        let exact = prediction(
            TwoAxis::new(311.0, 0.0),
            &[TwoAxis::new(10.0, 0.0), TwoAxis::new(20.0, 0.0)],
        );
        assert_eq!(vsi_cost(&exact, TwoAxis::new(311.0, 0.0), &cfg), 0.0);

        let p = prediction(
            TwoAxis::new(310.0, 0.0),
            &[TwoAxis::new(10.0, 0.0), TwoAxis::new(22.0, 0.0)],
        );
        assert_eq!(vsi_cost(&p, TwoAxis::new(311.0, 0.0), &cfg), 1.0);

        let tracking_only = ControlConfig {
            lambda: 1.0,
            ..ControlConfig::default()
        };
        assert_eq!(vsi_cost(&p, TwoAxis::new(311.0, 0.0), &tracking_only), 1.0);
        assert_eq!(vsi_cost(&p, TwoAxis::new(313.0, 1.0), &tracking_only), 10.0);
    }

    #[test]
    fn zero_state_zero_reference_picks_zero_tuple() {
        let p = params(2);
        let states = vec![VsiState::default(); 2];
        let group = VsiGroup {
            states: &states,
            params: &p,
            v_in: &[800.0, 800.0],
            z_ac: 6.4,
        };
        let v = select_vsi_vectors(&group, TwoAxis::ZERO, &ControlConfig::default(), &[3, 3]).unwrap();
        assert_eq!(v, vec![0, 0]);
    }

    #[test]
    fn single_vsi_exact_target_is_chosen() {
        // target the horizon PCC voltage that vector 4 produces
        let p = params(1);
        let states = vec![VsiState {
            i_f: TwoAxis::new(4.0, 1.0),
            v_bus: TwoAxis::new(100.0, -20.0),
            i_t: TwoAxis::new(3.0, 2.0),
        }];
        let group = VsiGroup {
            states: &states,
            params: &p,
            v_in: &[800.0],
            z_ac: 6.4,
        };
        let cfg = ControlConfig {
            lambda: 1.0,
            betas: vec![],
            ..ControlConfig::default()
        };
        let target = predict_vsi_horizon(&group, &[4], &cfg, cfg.voltage_horizon).v_pcc_horizon;
        assert_eq!(select_vsi_vectors(&group, target, &cfg, &[0]).unwrap(), vec![4]);
    }

    #[test]
    fn too_many_inverters() {
        let m = 7;
        let p = params(m);
        let states = vec![VsiState::default(); m];
        let v_in = vec![800.0; m];
        let group = VsiGroup {
            states: &states,
            params: &p,
            v_in: &v_in,
            z_ac: 6.4,
        };
        let cfg = ControlConfig {
            betas: vec![1.0; m - 1],
            ..ControlConfig::default()
        };
        assert!(matches!(
            select_vsi_vectors(&group, TwoAxis::ZERO, &cfg, &vec![0; m]),
            Err(Error::ControlSetTooLarge { vsis: 7 })
        ));
        let seq = ControlConfig {
            search: VsiSearch::Sequential,
            ..cfg
        };
        assert!(select_vsi_vectors(&group, TwoAxis::ZERO, &seq, &vec![0; m]).is_ok());
    }

    #[test]
    fn tuple_order_is_lexicographic() {
        let mut t = [0u8, 6];
        increment_tuple(&mut t);
        assert_eq!(t, [0, 7]);
        increment_tuple(&mut t);
        assert_eq!(t, [1, 0]);
        let mut t = [7u8, 7];
        increment_tuple(&mut t);
        assert_eq!(t, [0, 0]);
    }
}
