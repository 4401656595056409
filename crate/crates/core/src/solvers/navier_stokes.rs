//! 2D incompressible Navier-Stokes in vorticity form on a periodic box:
//! w_t + u . grad(w) = nu lap(w) + s,  u = curl^-1(w).
//!
//! Pseudospectral with 2/3-rule dealiasing. The viscous term is integrated
//! exactly through an integrating factor; the advection term advances with
//! classical RK4 applied to the transformed variable. The advective CFL
//! number is checked every step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft_2d, ifft_2d, physical_wavenumbers, signed_wavenumber};
use crate::grid::{BoundaryKind, Field, GridSpec};
use crate::solvers::{step_count, Trajectory};

#[derive(Debug, Clone)]
pub struct NsConfig {
    pub grid: GridSpec,
    pub nu: f64,
    pub t_final: f64,
    pub dt: f64,
    pub save_every: usize,
}

impl NsConfig {
    pub fn new(grid: GridSpec, nu: f64, t_final: f64, dt: f64, save_every: usize) -> Result<Self> {
        if grid.dims() != 2 || grid.boundary() != BoundaryKind::Periodic {
            return Err(Error::Config("navier-stokes needs a 2D periodic grid".into()));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::Config(format!("nu must be positive, got {nu}")));
        }
        step_count(t_final, dt)?;
        Ok(Self {
            grid,
            nu,
            t_final,
            dt,
            save_every: save_every.max(1),
        })
    }
}

struct SpectralOps {
    nx: usize,
    ny: usize,
    kx: Vec<f64>,
    ky: Vec<f64>,
    inv_ksq: Vec<f64>,
    visc_half: Vec<f64>,
    mask: Vec<f64>,
}

impl SpectralOps {
    fn new(grid: &GridSpec, nu: f64, dt: f64) -> Self {
        let (nx, ny) = (grid.sizes()[0], grid.sizes()[1]);
        let kx = physical_wavenumbers(nx, grid.lengths()[0]);
        let ky = physical_wavenumbers(ny, grid.lengths()[1]);
        let mut inv_ksq = vec![0.0; nx * ny];
        let mut visc_half = vec![0.0; nx * ny];
        let mut mask = vec![0.0; nx * ny];
        for ix in 0..nx {
            let keep_x = signed_wavenumber(ix, nx).unsigned_abs() as usize <= nx / 3;
            for iy in 0..ny {
                let idx = ix * ny + iy;
                let ksq = kx[ix] * kx[ix] + ky[iy] * ky[iy];
                inv_ksq[idx] = if ksq > 0.0 { 1.0 / ksq } else { 0.0 };
                visc_half[idx] = (-nu * ksq * dt / 2.0).exp();
                let keep_y = signed_wavenumber(iy, ny).unsigned_abs() as usize <= ny / 3;
                mask[idx] = if keep_x && keep_y { 1.0 } else { 0.0 };
            }
        }
        Self {
            nx,
            ny,
            kx,
            ky,
            inv_ksq,
            visc_half,
            mask,
        }
    }

    /// Advection plus forcing: N(w) = -FFT(u w_x + v w_y) + s, dealiased.
    /// Returns the largest velocity magnitude seen (for the CFL check).
    fn nonlinear(&self, what: &[Complex64], forcing: Option<&[Complex64]>, out: &mut [Complex64]) -> f64 {
        let n = what.len();
        let mut psi = vec![Complex64::new(0.0, 0.0); n];
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        let mut wx = vec![Complex64::new(0.0, 0.0); n];
        let mut wy = vec![Complex64::new(0.0, 0.0); n];
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                let idx = ix * self.ny + iy;
                let wm = what[idx] * self.mask[idx];
                psi[idx] = wm * self.inv_ksq[idx];
                u[idx] = Complex64::new(0.0, self.ky[iy]) * psi[idx];
                v[idx] = Complex64::new(0.0, -self.kx[ix]) * psi[idx];
                wx[idx] = Complex64::new(0.0, self.kx[ix]) * wm;
                wy[idx] = Complex64::new(0.0, self.ky[iy]) * wm;
            }
        }
        ifft_2d(&mut u, self.nx, self.ny);
        ifft_2d(&mut v, self.nx, self.ny);
        ifft_2d(&mut wx, self.nx, self.ny);
        ifft_2d(&mut wy, self.nx, self.ny);
        let mut max_vel = 0.0f64;
        for i in 0..n {
            max_vel = max_vel.max(u[i].re.abs()).max(v[i].re.abs());
            out[i] = Complex64::new(-(u[i].re * wx[i].re + v[i].re * wy[i].re), 0.0);
        }
        fft_2d(out, self.nx, self.ny);
        match forcing {
            Some(s) => {
                for i in 0..n {
                    out[i] = out[i] * self.mask[i] + s[i];
                }
            }
            None => {
                for i in 0..n {
                    out[i] *= self.mask[i];
                }
            }
        }
        max_vel
    }
}

fn spectral_zero_mean(f: &Field, what: &str) -> Result<Vec<Complex64>> {
    let vals = f.as_real()?;
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    if mean.abs() > 1e-10 {
        return Err(Error::Degenerate(format!(
            "{what} must have zero mean, got {mean:.3e}"
        )));
    }
    let mut buf: Vec<Complex64> = vals.iter().map(|&x| Complex64::new(x - mean, 0.0)).collect();
    let g = f.grid();
    fft_2d(&mut buf, g.sizes()[0], g.sizes()[1]);
    Ok(buf)
}

pub fn solve_ns(cfg: &NsConfig, omega0: &Field, forcing: Option<&Field>) -> Result<Trajectory> {
    if omega0.grid() != &cfg.grid || omega0.channels() != 1 {
        return Err(Error::Domain("initial vorticity does not match the config grid".into()));
    }
    let mut what = spectral_zero_mean(omega0, "initial vorticity")?;
    let shat = match forcing {
        Some(s) => {
            if s.grid() != &cfg.grid || s.channels() != 1 {
                return Err(Error::Domain("forcing does not match the config grid".into()));
            }
            Some(spectral_zero_mean(s, "forcing")?)
        }
        None => None,
    };

    let ops = SpectralOps::new(&cfg.grid, cfg.nu, cfg.dt);
    let shat_masked: Option<Vec<Complex64>> = shat.map(|mut s| {
        for (z, m) in s.iter_mut().zip(&ops.mask) {
            *z *= m;
        }
        s
    });
    let sref = shat_masked.as_deref();

    let n = what.len();
    let steps = step_count(cfg.t_final, cfg.dt)?;
    let dx = cfg.grid.spacing(0).min(cfg.grid.spacing(1));
    let mut times = vec![0.0];
    let mut states = vec![omega0.clone()];

    let mut k1 = vec![Complex64::new(0.0, 0.0); n];
    let mut k2 = vec![Complex64::new(0.0, 0.0); n];
    let mut k3 = vec![Complex64::new(0.0, 0.0); n];
    let mut k4 = vec![Complex64::new(0.0, 0.0); n];
    let mut stage = vec![Complex64::new(0.0, 0.0); n];

    for step in 1..=steps {
        let e = &ops.visc_half;
        let max_vel = ops.nonlinear(&what, sref, &mut k1);
        let cfl = max_vel * cfg.dt / dx;
        if cfl > 1.0 {
            return Err(Error::BlowUp {
                step,
                detail: format!("advective CFL {cfl:.2} exceeded 1"),
            });
        }
        for i in 0..n {
            stage[i] = e[i] * (what[i] + 0.5 * cfg.dt * k1[i]);
        }
        ops.nonlinear(&stage, sref, &mut k2);
        for i in 0..n {
            stage[i] = e[i] * what[i] + 0.5 * cfg.dt * k2[i];
        }
        ops.nonlinear(&stage, sref, &mut k3);
        for i in 0..n {
            stage[i] = e[i] * (e[i] * what[i] + cfg.dt * k3[i]);
        }
        ops.nonlinear(&stage, sref, &mut k4);
        for i in 0..n {
            let e2 = e[i] * e[i];
            what[i] = e2 * what[i]
                + (cfg.dt / 6.0)
                    * (e2 * k1[i] + 2.0 * e[i] * (k2[i] + k3[i]) + k4[i]);
        }

        let energy: f64 = what.iter().map(|z| z.norm_sqr()).sum();
        if !energy.is_finite() || energy > 1e18 {
            return Err(Error::BlowUp {
                step,
                detail: format!("spectral enstrophy reached {energy:.3e}"),
            });
        }

        if step % cfg.save_every == 0 || step == steps {
            let mut phys = what.clone();
            ifft_2d(&mut phys, ops.nx, ops.ny);
            let real: Vec<f64> = phys.iter().map(|z| z.re).collect();
            times.push(step as f64 * cfg.dt);
            states.push(Field::from_real(cfg.grid.clone(), 1, real)?);
        }
    }

    Ok(Trajectory { times, states })
}

/// Enstrophy integral w^2 dA / 2.
pub fn enstrophy(omega: &Field) -> Result<f64> {
    let w = omega.grid().cell_volume();
    Ok(omega.as_real()?.iter().map(|x| x * x).sum::<f64>() * w / 2.0)
}
