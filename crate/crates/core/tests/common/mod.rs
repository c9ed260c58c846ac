//! Independent re-implementations of the controller models, written from
//! the model equations without calling the library's predictors, plus
//! random state generators.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;

use fcs_microgrid::control::{ControlConfig, DcMeasurement, PvMeasurement};
use fcs_microgrid::numerics::TwoAxis;
use fcs_microgrid::plant::{BatteryPair, DcSideParams, PvSwitch, VsiParams, VsiState};

/// PV switch by comparing predicted powers of both states; OFF on ties.
pub fn pv_oracle(m: &PvMeasurement, t_s: f64, l_pv: f64) -> PvSwitch {
    let v_next = m.v_pv_k + (m.v_pv_k - m.v_pv_km1);
    let i_on = m.i_pv_k + m.v_pv_k * t_s / l_pv;
    let costs = [
        (PvSwitch::Off, (m.i_pv_k * v_next - m.p_mpp).abs()),
        (PvSwitch::On, (i_on * v_next - m.p_mpp).abs()),
    ];
    argmin(&costs)
}

/// Battery leg state by re-evaluating both candidates; `(0,1)` on ties.
pub fn battery_oracle(m: &DcMeasurement, cfg: &ControlConfig, p: &DcSideParams) -> BatteryPair {
    let i_ref =
        m.v_dc_k / p.v_bat * (m.i_o_average + p.c_bat / cfg.dc_voltage_time_constant * (cfg.v_dc_ref - m.v_dc_k));
    let cost = |upper: f64| {
        let v = m.v_dc_k + cfg.t_s / p.c_bat * (upper * m.i_bat_k - m.i_o_k);
        let i = m.i_bat_k + cfg.t_s / p.l_bat * (p.v_bat - p.r_bat * m.i_bat_k - upper * m.v_dc_k);
        let mut j = (cfg.v_dc_ref - v).abs();
        if cfg.battery_current_weight > 0.0 {
            j += cfg.battery_current_weight * (i_ref - i).abs();
        }
        j
    };
    argmin(&[(BatteryPair::LowerOn, cost(0.0)), (BatteryPair::UpperOn, cost(1.0))])
}

/// First entry with the smallest cost.
fn argmin<T: Copy>(costs: &[(T, f64)]) -> T {
    let mut best = costs[0];
    for &c in &costs[1..] {
        if c.1 < best.1 {
            best = c;
        }
    }
    best.0
}

/// Bridge output voltage from the upper switch states of vector `n`.
pub fn bridge_voltage(n: u8, v_in: f64) -> [f64; 2] {
    let s: [f64; 3] = match n {
        0 => [0.0, 0.0, 0.0],
        1 => [1.0, 0.0, 0.0],
        2 => [1.0, 1.0, 0.0],
        3 => [0.0, 1.0, 0.0],
        4 => [0.0, 1.0, 1.0],
        5 => [0.0, 0.0, 1.0],
        6 => [1.0, 0.0, 1.0],
        _ => [1.0, 1.0, 1.0],
    };
    [
        2.0 / 3.0 * v_in * (s[0] - 0.5 * s[1] - 0.5 * s[2]),
        2.0 / 3.0 * v_in * (3f64.sqrt() / 2.0) * (s[1] - s[2]),
    ]
}

/// Inverter state as `[i_F, v_Bus, i_T]`, each `[α, β]`.
pub type Vsi = [[f64; 2]; 3];

pub fn to_vsi(x: &VsiState) -> Vsi {
    [
        [x.i_f.alpha, x.i_f.beta],
        [x.v_bus.alpha, x.v_bus.beta],
        [x.i_t.alpha, x.i_t.beta],
    ]
}

/// One Euler step of the coupled filters with a PCC load `z`.
pub fn euler_step(x: &[Vsi], p: &[VsiParams], v_n: &[[f64; 2]], z: f64, t_s: f64) -> Vec<Vsi> {
    let mut v_pcc = [0.0; 2];
    for xi in x {
        for a in 0..2 {
            v_pcc[a] += z * xi[2][a];
        }
    }
    x.iter()
        .zip(p)
        .zip(v_n)
        .map(|((xi, pi), vi)| {
            let g_local = pi.local_load_ohms.map_or(0.0, |r| 1.0 / r);
            let mut out = [[0.0; 2]; 3];
            for a in 0..2 {
                let (i_f, v_b, i_t) = (xi[0][a], xi[1][a], xi[2][a]);
                out[0][a] = i_f + t_s / pi.l_f * (vi[a] - pi.r_f * i_f - v_b);
                out[1][a] = v_b + t_s / pi.c_f * (i_f - i_t - g_local * v_b);
                out[2][a] = i_t + t_s / pi.l_t * (v_b - pi.r_t * i_t - v_pcc[a]);
            }
            out
        })
        .collect()
}

fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Cost of holding `tuple` over the voltage horizon.
pub fn vsi_oracle_cost(
    x: &[Vsi],
    p: &[VsiParams],
    v_in: &[f64],
    z: f64,
    v_ref: [f64; 2],
    cfg: &ControlConfig,
    tuple: &[u8],
) -> f64 {
    let v_n: Vec<[f64; 2]> = tuple.iter().zip(v_in).map(|(&n, &v)| bridge_voltage(n, v)).collect();
    let next = euler_step(x, p, &v_n, z, cfg.t_s);
    let mut far = next.clone();
    for _ in 1..cfg.voltage_horizon.max(1) {
        far = euler_step(&far, p, &v_n, z, cfg.t_s);
    }
    let mut v_pcc = [0.0; 2];
    for xi in &far {
        v_pcc[0] += z * xi[2][0];
        v_pcc[1] += z * xi[2][1];
    }
    let scaled = |a: [f64; 2], b: f64| [a[0] * b, a[1] * b];
    let mut sharing = 0.0;
    let mut line = 0.0;
    for j in 0..x.len() - 1 {
        let beta = cfg.betas[j];
        sharing += dist_sq(next[j][0], scaled(next[j + 1][0], beta));
        line += dist_sq(far[j][2], scaled(far[j + 1][2], beta));
    }
    cfg.lambda * dist_sq(v_ref, v_pcc) + (1.0 - cfg.lambda) * (sharing + cfg.line_sharing_weight * line)
}

/// Exhaustive joint search; the first tuple in lexicographic order wins
/// ties.
pub fn vsi_oracle(
    states: &[VsiState],
    p: &[VsiParams],
    v_in: &[f64],
    z: f64,
    v_ref: TwoAxis,
    cfg: &ControlConfig,
) -> Vec<u8> {
    let x: Vec<Vsi> = states.iter().map(to_vsi).collect();
    let m = x.len();
    let mut best = (vec![0u8; m], f64::INFINITY);
    let mut tuple = vec![0u8; m];
    fn visit(depth: usize, tuple: &mut Vec<u8>, best: &mut (Vec<u8>, f64), eval: &dyn Fn(&[u8]) -> f64) {
        if depth == tuple.len() {
            let c = eval(tuple);
            if c < best.1 {
                *best = (tuple.clone(), c);
            }
            return;
        }
        for n in 0..8 {
            tuple[depth] = n;
            visit(depth + 1, tuple, best, eval);
        }
    }
    let eval = |t: &[u8]| vsi_oracle_cost(&x, p, v_in, z, [v_ref.alpha, v_ref.beta], cfg, t);
    visit(0, &mut tuple, &mut best, &eval);
    best.0
}

fn two_axis(rng: &mut StdRng, scale: f64) -> TwoAxis {
    TwoAxis::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

pub fn random_pv(rng: &mut StdRng) -> PvMeasurement {
    let v = rng.gen_range(0.0..700.0);
    PvMeasurement {
        v_pv_k: v,
        v_pv_km1: v + rng.gen_range(-5.0..5.0),
        i_pv_k: rng.gen_range(0.0..90.0),
        p_mpp: rng.gen_range(0.0..40_000.0),
    }
}

pub fn random_dc(rng: &mut StdRng) -> DcMeasurement {
    DcMeasurement {
        v_dc_k: rng.gen_range(700.0..900.0),
        i_bat_k: rng.gen_range(-60.0..60.0),
        i_o_k: rng.gen_range(-60.0..60.0),
        i_o_average: rng.gen_range(-60.0..60.0),
    }
}

pub fn random_vsi_state(rng: &mut StdRng) -> VsiState {
    VsiState {
        i_f: two_axis(rng, 120.0),
        v_bus: two_axis(rng, 400.0),
        i_t: two_axis(rng, 120.0),
    }
}

/// Controller settings drawn over their valid ranges.
pub fn random_control(rng: &mut StdRng, m: usize) -> ControlConfig {
    ControlConfig {
        lambda: rng.gen_range(0.0..=1.0),
        betas: (1..m).map(|_| rng.gen_range(0.2..3.0)).collect(),
        voltage_horizon: rng.gen_range(1..=8),
        line_sharing_weight: if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..10.0)
        },
        battery_current_weight: if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..5.0)
        },
        v_dc_ref: rng.gen_range(750.0..850.0),
        ..ControlConfig::default()
    }
}

/// Inverter parameters around the defaults, some with local loads.
pub fn random_vsi_params(rng: &mut StdRng) -> VsiParams {
    VsiParams {
        r_f: rng.gen_range(0.0..0.3),
        l_f: rng.gen_range(1e-3..4e-3),
        c_f: rng.gen_range(20e-6..100e-6),
        r_t: rng.gen_range(0.0..0.2),
        l_t: rng.gen_range(0.5e-3..2e-3),
        v_in: 800.0,
        local_load_ohms: if rng.gen_bool(0.3) {
            Some(rng.gen_range(10.0..100.0))
        } else {
            None
        },
    }
}

pub fn random_dc_params(rng: &mut StdRng) -> DcSideParams {
    DcSideParams {
        l_bat: rng.gen_range(1e-3..10e-3),
        c_bat: rng.gen_range(1e-3..10e-3),
        r_bat: rng.gen_range(0.0..0.2),
        v_bat: rng.gen_range(400.0..700.0),
        ..DcSideParams::default()
    }
}

/// Mismatches between the library controllers and the oracles on
/// `states` random measurement states, per controller.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleMismatches {
    pub pv: usize,
    pub battery: usize,
    pub vsi: usize,
}

pub fn controller_oracle_mismatches(states: usize, seed: u64) -> OracleMismatches {
    use fcs_microgrid::control::{select_battery_switches, select_pv_switch, select_vsi_vectors, VsiGroup};
    use rand::SeedableRng;

    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = OracleMismatches::default();
    for _ in 0..states {
        let m = if rng.gen_bool(0.25) { 3 } else { rng.gen_range(1..=2) };
        let cfg = random_control(&mut rng, m);
        let dc = random_dc_params(&mut rng);

        let pv = random_pv(&mut rng);
        let l_pv = rng.gen_range(0.5e-3..5e-3);
        if select_pv_switch(&pv, &cfg, l_pv) != pv_oracle(&pv, cfg.t_s, l_pv) {
            out.pv += 1;
        }

        let meas = random_dc(&mut rng);
        if select_battery_switches(&meas, &cfg, &dc) != battery_oracle(&meas, &cfg, &dc) {
            out.battery += 1;
        }

        let params: Vec<VsiParams> = (0..m).map(|_| random_vsi_params(&mut rng)).collect();
        let states: Vec<VsiState> = (0..m).map(|_| random_vsi_state(&mut rng)).collect();
        let v_in: Vec<f64> = (0..m).map(|_| rng.gen_range(700.0..900.0)).collect();
        let z = rng.gen_range(3.0..30.0);
        let v_ref = TwoAxis::from_polar(rng.gen_range(250.0..350.0), rng.gen_range(-3.2..3.2));
        let group = VsiGroup {
            states: &states,
            params: &params,
            v_in: &v_in,
            z_ac: z,
        };
        let chosen = select_vsi_vectors(&group, v_ref, &cfg, &vec![0; m]).expect("joint search");
        if chosen != vsi_oracle(&states, &params, &v_in, z, v_ref, &cfg) {
            out.vsi += 1;
        }
    }
    out
}

/// Largest absolute difference between two state lists.
fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const FINE_STEPS: usize = 200;

/// Battery inductor current prediction errors for both leg states.
pub fn battery_current_errors(h: f64) -> [f64; 2] {
    dc_side_errors(h).1
}

/// One-step prediction errors for sampling periods `t_s` and `t_s/2`,
/// each against a finely integrated plant with the switches frozen.
/// Returns `(name, error(t_s) / error(t_s/2))`.
pub fn prediction_error_ratios(t_s: f64) -> Vec<(&'static str, f64)> {
    let errors = |h: f64| prediction_errors(h);
    let coarse = errors(t_s);
    let fine = errors(t_s / 2.0);
    coarse.iter().zip(&fine).map(|(c, f)| (c.0, c.1 / f.1)).collect()
}

/// Prediction errors at sampling period `h`.
pub fn prediction_errors(h: f64) -> Vec<(&'static str, f64)> {
    use fcs_microgrid::control::{predict_pv, predict_vsi_group, VsiGroup};
    use fcs_microgrid::plant::{step_ac_side, step_dc_side, DcInputs, DcSideState};

    let cfg = ControlConfig {
        t_s: h,
        ..ControlConfig::default()
    };
    let dc = DcSideParams::default();
    let integrate = |x: &DcSideState, inputs: &DcInputs| {
        let mut x = *x;
        for _ in 0..FINE_STEPS {
            x = step_dc_side(&x, &dc, inputs, h / FINE_STEPS as f64).expect("finite");
        }
        x
    };

    // boost switch held ON, bus fed by the battery leg
    let on = DcInputs {
        pv_switch: PvSwitch::On,
        bat_pair: BatteryPair::UpperOn,
        i_o: 20.0,
        p_dcload: 13_000.0,
        pv_current_source: 75.0,
    };
    let x_k = DcSideState {
        v_pv: 560.0,
        i_pv: 40.0,
        i_bat: 10.0,
        v_dc: 800.0,
        i_o: 20.0,
    };
    // with the switch ON the PV node is an LC loop around the source
    // current: v(t) = v0·cos(wt) − (i0 − I)·sin(wt)/(C·w)
    let w = 1.0 / (dc.l_pv * dc.c_pv).sqrt();
    let v_prev = x_k.v_pv * (w * h).cos() + (x_k.i_pv - on.pv_current_source) * (w * h).sin() / (dc.c_pv * w);
    let x_next = integrate(&x_k, &on);
    let pv = predict_pv(
        &PvMeasurement {
            v_pv_k: x_k.v_pv,
            v_pv_km1: v_prev,
            i_pv_k: x_k.i_pv,
            p_mpp: 0.0,
        },
        &cfg,
        dc.l_pv,
        PvSwitch::On,
    );

    let (dc_errors, _) = dc_side_errors(h);

    // inverter pair at a sinusoidal operating point, vectors held
    let params = vec![VsiParams::default(); 2];
    let states = vec![
        VsiState {
            i_f: TwoAxis::new(20.0, -8.0),
            v_bus: TwoAxis::new(300.0, 60.0),
            i_t: TwoAxis::new(19.0, -6.0),
        },
        VsiState {
            i_f: TwoAxis::new(41.0, -15.0),
            v_bus: TwoAxis::new(305.0, 55.0),
            i_t: TwoAxis::new(40.0, -13.0),
        },
    ];
    let z_ac = 4.4;
    let choice = [1u8, 2];
    let v_in = [800.0, 800.0];
    let voltages: Vec<TwoAxis> = choice
        .iter()
        .zip(v_in)
        .map(|(&n, v)| fcs_microgrid::control::vsi_voltage_vector(n, v))
        .collect();
    let mut exact = states.clone();
    for _ in 0..FINE_STEPS {
        exact = step_ac_side(&exact, &params, &voltages, z_ac, h / FINE_STEPS as f64).expect("finite");
    }
    let group = VsiGroup {
        states: &states,
        params: &params,
        v_in: &v_in,
        z_ac,
    };
    let pred = predict_vsi_group(&group, &choice, &cfg);
    let flat = |s: &[VsiState]| -> Vec<f64> { s.iter().flat_map(|x| to_vsi(x).concat()).collect() };

    vec![
        ("boost inductor current (ON)", (pv.i_next - x_next.i_pv).abs()),
        ("PV voltage extrapolation", (pv.v_next - x_next.v_pv).abs()),
        ("DC bus voltage (1,0)", dc_errors[0]),
        ("DC bus voltage (0,1)", dc_errors[1]),
        ("inverter group states", max_diff(&flat(&pred.next), &flat(&exact))),
    ]
}

/// DC bus and battery current prediction errors, boost switch OFF.
fn dc_side_errors(h: f64) -> ([f64; 2], [f64; 2]) {
    use fcs_microgrid::control::{predict_battery_current, predict_dc_bus};
    use fcs_microgrid::plant::{step_dc_side, DcInputs, DcSideState};

    let cfg = ControlConfig {
        t_s: h,
        ..ControlConfig::default()
    };
    let dc = DcSideParams::default();
    let integrate = |x: &DcSideState, inputs: &DcInputs| {
        let mut x = *x;
        for _ in 0..FINE_STEPS {
            x = step_dc_side(&x, &dc, inputs, h / FINE_STEPS as f64).expect("finite");
        }
        x
    };
    let x_k = DcSideState {
        v_pv: 560.0,
        i_pv: 40.0,
        i_bat: 10.0,
        v_dc: 800.0,
        i_o: 20.0,
    };
    let on = DcInputs {
        pv_switch: PvSwitch::Off,
        bat_pair: BatteryPair::UpperOn,
        i_o: 20.0,
        p_dcload: 13_000.0,
        pv_current_source: 75.0,
    };
    let mut dc_errors = [0.0f64; 2];
    let mut bat_errors = [0.0f64; 2];
    for (k, pair) in [BatteryPair::UpperOn, BatteryPair::LowerOn].into_iter().enumerate() {
        let inputs = DcInputs {
            pv_switch: PvSwitch::Off,
            bat_pair: pair,
            ..on
        };
        let next = integrate(&x_k, &inputs);
        let i_load = inputs.p_dcload / x_k.v_dc;
        let meas = DcMeasurement {
            v_dc_k: x_k.v_dc,
            i_bat_k: x_k.i_bat,
            i_o_k: inputs.i_o + i_load - x_k.i_pv,
            i_o_average: 0.0,
        };
        let (v10, v01) = predict_dc_bus(&meas, &cfg, dc.c_bat);
        let v = if pair == BatteryPair::UpperOn { v10 } else { v01 };
        dc_errors[k] = (v - next.v_dc).abs();
        bat_errors[k] = (predict_battery_current(&meas, &cfg, &dc, pair) - next.i_bat).abs();
    }

    (dc_errors, bat_errors)
}
