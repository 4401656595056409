//! Reference PDE solvers used for data generation and ground truth.

pub mod black_scholes;
pub mod kuramoto;
pub mod navier_stokes;
pub mod nls;
pub mod poisson;

pub use kuramoto::solve_ks;
pub use navier_stokes::solve_ns;
pub use nls::solve_nls;

use crate::grid::Field;

/// Time series of saved states; `times[0] == 0` holds the initial state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
}

impl Trajectory {
    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// State at the saved time closest to `t` (within 1e-9 absolute).
    pub fn state_at(&self, t: f64) -> Option<&Field> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() < 1e-9)
            .map(|i| &self.states[i])
    }
}

/// Validates that `t_final` is an integer number of steps of size `dt`.
pub(crate) fn step_count(t_final: f64, dt: f64) -> crate::error::Result<usize> {
    use crate::error::Error;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::Config(format!(
            "t_final must be positive, got {t_final}"
        )));
    }
    let steps = (t_final / dt).round();
    if ((t_final / dt) - steps).abs() > 1e-8 * steps.max(1.0) {
        return Err(Error::Config(format!(
            "t_final {t_final} is not an integer multiple of dt {dt}"
        )));
    }
    Ok(steps as usize)
}
