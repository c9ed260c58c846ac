//! Fixed-step fourth-order Runge-Kutta.

use super::frames::TwoAxis;

/// A state that supports the `x + a·y` update RK4 needs.
pub trait StateVector: Clone {
    fn axpy(&self, a: f64, other: &Self) -> Self;
}

impl StateVector for f64 {
    fn axpy(&self, a: f64, other: &f64) -> f64 {
        self + a * other
    }
}

impl StateVector for TwoAxis {
    fn axpy(&self, a: f64, other: &TwoAxis) -> TwoAxis {
        *self + *other * a
    }
}

impl<const N: usize> StateVector for [f64; N] {
    fn axpy(&self, a: f64, other: &Self) -> Self {
        std::array::from_fn(|i| self[i] + a * other[i])
    }
}

impl<T: StateVector> StateVector for Vec<T> {
    fn axpy(&self, a: f64, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        self.iter().zip(other).map(|(x, y)| x.axpy(a, y)).collect()
    }
}

/// One classic RK4 step of `dx/dt = f(x)` with step `dt`.
pub fn integrate_step<S, F>(state: &S, dt: f64, mut f: F) -> S
where
    S: StateVector,
    F: FnMut(&S) -> S,
{
    debug_assert!(dt > 0.0);
    let k1 = f(state);
    let k2 = f(&state.axpy(0.5 * dt, &k1));
    let k3 = f(&state.axpy(0.5 * dt, &k2));
    let k4 = f(&state.axpy(dt, &k3));
    state
        .axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4)
}
