//! Reference frames, waveform references, signal metrics and the fixed-step
//! integrator shared by the plant and the metrics code.

mod frames;
mod ode;
mod signal;

pub use frames::{
    clarke_forward, clarke_inverse, oscillator_reference, wrap_phase, ReferenceOscillator, ThreePhase, TwoAxis,
};
pub use ode::{integrate_step, StateVector};
pub use signal::{estimate_frequency, rising_crossings, settling_time, FrequencyTracker, LowPass};
