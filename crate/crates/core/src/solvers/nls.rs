//! Cubic nonlinear Schrodinger equation on a periodic interval:
//! i u_t + u_xx - kappa |u|^2 u = 0.
//!
//! Strang split-step Fourier integrator: half a nonlinear phase rotation,
//! a full linear step in Fourier space, half a nonlinear rotation. Both
//! substeps are exact, so mass is conserved to rounding and the splitting
//! error is O(dt^2) per unit time.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft_1d, ifft_1d, physical_wavenumbers};
use crate::grid::{BoundaryKind, Field, GridSpec};
use crate::solvers::{step_count, Trajectory};

#[derive(Debug, Clone)]
pub struct NlsConfig {
    pub grid: GridSpec,
    pub kappa: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Store every k-th step in the trajectory (the final state is always kept).
    pub save_every: usize,
}

impl NlsConfig {
    pub fn new(grid: GridSpec, kappa: f64, t_final: f64, dt: f64, save_every: usize) -> Result<Self> {
        if grid.dims() != 1 || grid.boundary() != BoundaryKind::Periodic {
            return Err(Error::Config("nls needs a 1D periodic grid".into()));
        }
        if !kappa.is_finite() {
            return Err(Error::Config("kappa must be finite".into()));
        }
        step_count(t_final, dt)?;
        let cfg = Self {
            grid,
            kappa,
            t_final,
            dt,
            save_every: save_every.max(1),
        };
        if dt > cfg.dt_accuracy_bound() {
            return Err(Error::Config(format!(
                "dt {dt} above the accuracy bound {:.3e} (one radian of linear phase at the top mode)",
                cfg.dt_accuracy_bound()
            )));
        }
        Ok(cfg)
    }

    /// Accuracy limit for the splitting: at most one radian of linear phase
    /// per step at the highest retained wavenumber.
    pub fn dt_accuracy_bound(&self) -> f64 {
        let n = self.grid.sizes()[0] as f64;
        let k_max = std::f64::consts::PI * n / self.grid.lengths()[0];
        1.0 / k_max
    }
}

/// Discrete mass integral |u|^2 dx.
pub fn mass(u: &Field) -> Result<f64> {
    let w = u.grid().cell_volume();
    Ok(u.as_complex()?.iter().map(|z| z.norm_sqr()).sum::<f64>() * w)
}

/// Discrete momentum integral Im(conj(u) u_x) dx, with u_x spectral.
pub fn momentum(u: &Field) -> Result<f64> {
    let vals = u.as_complex()?;
    let n = u.grid().sizes()[0];
    let ks = physical_wavenumbers(n, u.grid().lengths()[0]);
    let mut coeffs = vals.to_vec();
    fft_1d(&mut coeffs);
    for (c, k) in coeffs.iter_mut().zip(&ks) {
        *c *= Complex64::new(0.0, *k);
    }
    ifft_1d(&mut coeffs);
    let w = u.grid().cell_volume();
    Ok(vals
        .iter()
        .zip(&coeffs)
        .map(|(z, dz)| (z.conj() * dz).im)
        .sum::<f64>()
        * w)
}

pub fn solve_nls(cfg: &NlsConfig, u0: &Field) -> Result<Trajectory> {
    if u0.grid() != &cfg.grid || u0.channels() != 1 {
        return Err(Error::Domain("initial state does not match the config grid".into()));
    }
    let mut u = u0.as_complex()?.to_vec();
    let n = cfg.grid.sizes()[0];
    let steps = step_count(cfg.t_final, cfg.dt)?;

    // exp(-i k^2 dt) per mode for the linear full step.
    let ks = physical_wavenumbers(n, cfg.grid.lengths()[0]);
    let linear: Vec<Complex64> = ks
        .iter()
        .map(|k| {
            let phase = -k * k * cfg.dt;
            Complex64::new(phase.cos(), phase.sin())
        })
        .collect();

    let half = 0.5 * cfg.dt * cfg.kappa;
    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];

    for step in 1..=steps {
        // Nonlinear half step: u *= exp(-i kappa |u|^2 dt/2).
        for z in u.iter_mut() {
            let phase = -half * z.norm_sqr();
            *z *= Complex64::new(phase.cos(), phase.sin());
        }
        // Linear full step in Fourier space.
        fft_1d(&mut u);
        for (z, l) in u.iter_mut().zip(&linear) {
            *z *= l;
        }
        ifft_1d(&mut u);
        // Second nonlinear half step.
        for z in u.iter_mut() {
            let phase = -half * z.norm_sqr();
            *z *= Complex64::new(phase.cos(), phase.sin());
        }

        let amp = u.iter().fold(0.0f64, |m, z| m.max(z.norm_sqr()));
        if !amp.is_finite() || amp > 1e12 {
            return Err(Error::BlowUp {
                step,
                detail: format!("|u| reached {:.3e}", amp.sqrt()),
            });
        }

        if step % cfg.save_every == 0 || step == steps {
            times.push(step as f64 * cfg.dt);
            states.push(Field::from_complex(cfg.grid.clone(), 1, u.clone())?);
        }
    }

    Ok(Trajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn plane_wave_cfg(kappa: f64) -> (NlsConfig, Field) {
        let grid = GridSpec::periodic_1d(64, 2.0 * PI).unwrap();
        let cfg = NlsConfig::new(grid.clone(), kappa, 0.5, 5e-4, 1000).unwrap();
        let u0 = Field::from_fn_complex_1d(grid, |x| {
            Complex64::new((2.0 * x).cos(), (2.0 * x).sin())
        })
        .unwrap();
        (cfg, u0)
    }

    #[test]
    fn plane_wave_phase_is_exact_for_split_step() {
        // u = A exp(i(kx - w t)) with w = k^2 + kappa A^2 solves the equation,
        // and both substeps treat it exactly.
        let kappa = 1.3;
        let (cfg, u0) = plane_wave_cfg(kappa);
        let traj = solve_nls(&cfg, &u0).unwrap();
        let t = cfg.t_final;
        let w = 4.0 + kappa;
        let want = Field::from_fn_complex_1d(cfg.grid.clone(), |x| {
            let th = 2.0 * x - w * t;
            Complex64::new(th.cos(), th.sin())
        })
        .unwrap();
        let err = traj.final_state().sub(&want).unwrap().l2_norm() / want.l2_norm();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn mass_conserved_to_rounding() {
        let grid = GridSpec::periodic_1d(128, 2.0 * PI).unwrap();
        let cfg = NlsConfig::new(grid.clone(), 1.0, 0.25, 2.5e-4, 1000).unwrap();
        let u0 = Field::from_fn_complex_1d(grid, |x| {
            Complex64::new((x).sin() + 0.3 * (3.0 * x).cos(), 0.2 * (2.0 * x).sin())
        })
        .unwrap();
        let m0 = mass(&u0).unwrap();
        let traj = solve_nls(&cfg, &u0).unwrap();
        let m1 = mass(traj.final_state()).unwrap();
        assert!((m1 - m0).abs() / m0 < 1e-12, "drift {}", (m1 - m0).abs() / m0);
    }

    #[test]
    fn momentum_drift_small() {
        let grid = GridSpec::periodic_1d(128, 2.0 * PI).unwrap();
        let cfg = NlsConfig::new(grid.clone(), 0.8, 0.25, 2.5e-4, 1000).unwrap();
        let u0 = Field::from_fn_complex_1d(grid, |x| {
            Complex64::new((x).cos(), 0.5 * (2.0 * x).sin() + 0.1)
        })
        .unwrap();
        let p0 = momentum(&u0).unwrap();
        let traj = solve_nls(&cfg, &u0).unwrap();
        let p1 = momentum(traj.final_state()).unwrap();
        let scale = mass(&u0).unwrap();
        assert!((p1 - p0).abs() / scale < 1e-6, "drift {}", (p1 - p0).abs() / scale);
    }

    #[test]
    fn rejects_excessive_dt() {
        let grid = GridSpec::periodic_1d(128, 2.0 * PI).unwrap();
        // k_max = 64, bound = 1/64; dt = 0.1 is far above it.
        assert!(NlsConfig::new(grid, 1.0, 1.0, 0.1, 1).is_err());
    }

    #[test]
    fn rejects_non_integral_step_count() {
        let grid = GridSpec::periodic_1d(64, 2.0 * PI).unwrap();
        assert!(NlsConfig::new(grid, 1.0, 1.0, 0.0003, 1).is_err());
    }
}
