//! Phase-domain and stationary-frame quantities.
//!
//! The Clarke transform uses the amplitude-invariant convention, so a
//! balanced set with phase peak `A` maps to a vector of magnitude `A`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Phase-domain (a, b, c) quantity, volts or amperes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThreePhase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreePhase {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }
}

/// Stationary-frame (alpha, beta) quantity, volts or amperes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwoAxis {
    pub alpha: f64,
    pub beta: f64,
}

impl TwoAxis {
    pub const ZERO: TwoAxis = TwoAxis { alpha: 0.0, beta: 0.0 };

    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn from_polar(magnitude: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(magnitude * c, magnitude * s)
    }

    /// Squared Euclidean norm, alpha² + beta².
    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.alpha * self.alpha + self.beta * self.beta
    }

    #[inline]
    pub fn magnitude(self) -> f64 {
        self.alpha.hypot(self.beta)
    }

    #[inline]
    pub fn dot(self, other: TwoAxis) -> f64 {
        self.alpha * other.alpha + self.beta * other.beta
    }

    /// `self.beta * other.alpha - self.alpha * other.beta`; with `self` a
    /// voltage and `other` a current this is the instantaneous reactive
    /// power per 2/3.
    #[inline]
    pub fn cross(self, other: TwoAxis) -> f64 {
        self.beta * other.alpha - self.alpha * other.beta
    }

    pub fn is_finite(self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite()
    }
}

impl Add for TwoAxis {
    type Output = TwoAxis;
    #[inline]
    fn add(self, rhs: TwoAxis) -> TwoAxis {
        TwoAxis::new(self.alpha + rhs.alpha, self.beta + rhs.beta)
    }
}

impl Sub for TwoAxis {
    type Output = TwoAxis;
    #[inline]
    fn sub(self, rhs: TwoAxis) -> TwoAxis {
        TwoAxis::new(self.alpha - rhs.alpha, self.beta - rhs.beta)
    }
}

impl Neg for TwoAxis {
    type Output = TwoAxis;
    #[inline]
    fn neg(self) -> TwoAxis {
        TwoAxis::new(-self.alpha, -self.beta)
    }
}

impl Mul<f64> for TwoAxis {
    type Output = TwoAxis;
    #[inline]
    fn mul(self, k: f64) -> TwoAxis {
        TwoAxis::new(self.alpha * k, self.beta * k)
    }
}

impl Mul<TwoAxis> for f64 {
    type Output = TwoAxis;
    #[inline]
    fn mul(self, v: TwoAxis) -> TwoAxis {
        v * self
    }
}

impl AddAssign for TwoAxis {
    #[inline]
    fn add_assign(&mut self, rhs: TwoAxis) {
        self.alpha += rhs.alpha;
        self.beta += rhs.beta;
    }
}

impl SubAssign for TwoAxis {
    #[inline]
    fn sub_assign(&mut self, rhs: TwoAxis) {
        self.alpha -= rhs.alpha;
        self.beta -= rhs.beta;
    }
}

impl std::iter::Sum for TwoAxis {
    fn sum<I: Iterator<Item = TwoAxis>>(iter: I) -> TwoAxis {
        iter.fold(TwoAxis::ZERO, |acc, x| acc + x)
    }
}

/// Amplitude-invariant Clarke transform.
pub fn clarke_forward(x: ThreePhase) -> TwoAxis {
    TwoAxis::new(
        (2.0 / 3.0) * (x.a - 0.5 * x.b - 0.5 * x.c),
        (2.0 / 3.0) * SQRT3_2 * (x.b - x.c),
    )
}

/// Inverse of [`clarke_forward`] with zero sequence assumed zero.
pub fn clarke_inverse(x: TwoAxis) -> ThreePhase {
    ThreePhase::new(
        x.alpha,
        -0.5 * x.alpha + SQRT3_2 * x.beta,
        -0.5 * x.alpha - SQRT3_2 * x.beta,
    )
}

/// Fixed-frequency sinusoidal reference in the stationary frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOscillator {
    pub frequency_hz: f64,
    /// Phase-to-neutral peak.
    pub amplitude: f64,
    pub phase: f64,
}

impl ReferenceOscillator {
    pub fn new(frequency_hz: f64, amplitude: f64) -> Self {
        Self {
            frequency_hz,
            amplitude,
            phase: 0.0,
        }
    }

    /// Advance the stored phase by `dt`, wrapping into [0, 2π).
    pub fn advance(&mut self, dt: f64) {
        self.phase = wrap_phase(self.phase + TAU * self.frequency_hz * dt);
    }
}

/// Wrap an angle into [0, 2π).
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Reference vector `A·(cos(2πft+φ), sin(2πft+φ))`.
pub fn oscillator_reference(osc: &ReferenceOscillator, t: f64) -> TwoAxis {
    TwoAxis::from_polar(osc.amplitude, 2.0 * PI * osc.frequency_hz * t + osc.phase)
}
