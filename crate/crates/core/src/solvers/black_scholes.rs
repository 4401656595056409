//! Black-Scholes pricing by finite differences, marching in time to
//! maturity tau: V_tau = 0.5 sigma^2 S^2 V_SS + r S V_S - r V from the
//! payoff at tau = 0.
//!
//! Crank-Nicolson with a Rannacher start (the first step runs as two
//! implicit-Euler half steps, damping the oscillations a kinked payoff
//! excites). Convection discretizes centrally where the scheme stays an
//! M-matrix and switches to one-sided differences on the few rows near
//! S = 0 where it would not. The S = 0 row obeys the exact ODE
//! V(0, tau) = payoff(0) exp(-r tau).

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Field, GridSpec};

/// Treatment of the S = s_max boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarField {
    /// Second derivative vanishes at s_max (payoffs that grow linearly).
    LinearExtrapolation,
    /// Discounted payoff value held at s_max (payoffs flat in the far field).
    FixedPresentValue,
}

#[derive(Debug, Clone)]
pub struct BsConfig {
    pub grid: GridSpec,
    pub sigma: f64,
    pub rate: f64,
    pub maturity: f64,
    pub dt: f64,
    pub far_field: FarField,
}

impl BsConfig {
    pub fn new(
        grid: GridSpec,
        sigma: f64,
        rate: f64,
        maturity: f64,
        dt: f64,
        far_field: FarField,
    ) -> Result<Self> {
        if grid.dims() != 1 || grid.boundary() != BoundaryKind::Dirichlet {
            return Err(Error::Config("black-scholes needs a 1D Dirichlet grid".into()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::Config(format!("rate must be non-negative, got {rate}")));
        }
        crate::solvers::step_count(maturity, dt)?;
        Ok(Self {
            grid,
            sigma,
            rate,
            maturity,
            dt,
            far_field,
        })
    }

    pub fn s_max(&self) -> f64 {
        self.grid.lengths()[0]
    }
}

/// Generator rows (lower, diag, upper) for interior nodes 1..n-2.
fn generator_rows(cfg: &BsConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = cfg.grid.sizes()[0];
    let ds = cfg.grid.spacing(0);
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    for i in 1..n - 1 {
        let s = i as f64 * ds;
        let alpha = 0.5 * cfg.sigma * cfg.sigma * s * s / (ds * ds);
        let beta = 0.5 * cfg.rate * s / ds;
        if alpha >= beta.abs() {
            lo[i] = alpha - beta;
            di[i] = -2.0 * alpha - cfg.rate;
            up[i] = alpha + beta;
        } else {
            // One-sided convection keeps the off-diagonals non-negative.
            let drift = cfg.rate * s / ds;
            lo[i] = alpha;
            di[i] = -2.0 * alpha - drift - cfg.rate;
            up[i] = alpha + drift;
        }
    }
    (lo, di, up)
}

/// Solve a tridiagonal system in place; rhs becomes the solution.
fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut denom = di[0];
    if denom.abs() < 1e-300 {
        return Err(Error::Degenerate("singular tridiagonal pivot".into()));
    }
    c[0] = up[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = di[i] - lo[i] * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::Degenerate("singular tridiagonal pivot".into()));
        }
        c[i] = up[i] / denom;
        rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// One theta-scheme step of size dt from tau to tau + dt.
fn theta_step(
    cfg: &BsConfig,
    gen: &(Vec<f64>, Vec<f64>, Vec<f64>),
    v: &mut [f64],
    payoff0: f64,
    payoff_max: f64,
    tau_new: f64,
    dt: f64,
    theta: f64,
) -> Result<()> {
    let n = v.len();
    let (lo, di, up) = gen;
    let m = n - 2;

    // Explicit side: (I + (1-theta) dt A) v, interior rows only.
    let w = 1.0 - theta;
    let mut rhs = vec![0.0; m];
    for i in 1..n - 1 {
        rhs[i - 1] =
            v[i] + w * dt * (lo[i] * v[i - 1] + di[i] * v[i] + up[i] * v[i + 1]);
    }

    // Known boundary values at the new level.
    let v0_new = payoff0 * (-cfg.rate * tau_new).exp();
    rhs[0] += theta * dt * lo[1] * v0_new;

    // Implicit tridiagonal on the interior.
    let mut tl = vec![0.0; m];
    let mut td = vec![0.0; m];
    let mut tu = vec![0.0; m];
    for i in 1..n - 1 {
        tl[i - 1] = -theta * dt * lo[i];
        td[i - 1] = 1.0 - theta * dt * di[i];
        tu[i - 1] = -theta * dt * up[i];
    }

    match cfg.far_field {
        FarField::FixedPresentValue => {
            let vmax_new = payoff_max * (-cfg.rate * tau_new).exp();
            rhs[m - 1] += theta * dt * up[n - 2] * vmax_new;
            thomas(&tl, &td, &tu, &mut rhs)?;
            v[n - 1] = vmax_new;
        }
        FarField::LinearExtrapolation => {
            // Fold V_{n-1} = 2 V_{n-2} - V_{n-3} into the last interior row.
            let u_last = tu[m - 1];
            tl[m - 1] -= u_last;
            td[m - 1] += 2.0 * u_last;
            tu[m - 1] = 0.0;
            thomas(&tl, &td, &tu, &mut rhs)?;
            v[n - 1] = 2.0 * rhs[m - 1] - rhs[m - 2];
        }
    }
    v[0] = v0_new;
    v[1..n - 1].copy_from_slice(&rhs);
    Ok(())
}

/// Price the payoff back to the valuation date; returns V(., maturity).
pub fn solve_bs(cfg: &BsConfig, payoff: &Field) -> Result<Field> {
    if payoff.grid() != &cfg.grid || payoff.channels() != 1 {
        return Err(Error::Domain("payoff does not match the config grid".into()));
    }
    let mut v = payoff.as_real()?.to_vec();
    let n = v.len();
    let payoff0 = v[0];
    let payoff_max = v[n - 1];
    let gen = generator_rows(cfg);
    let steps = crate::solvers::step_count(cfg.maturity, cfg.dt)?;

    // Rannacher start: the first step as two implicit-Euler half steps.
    let h = 0.5 * cfg.dt;
    theta_step(cfg, &gen, &mut v, payoff0, payoff_max, h, h, 1.0)?;
    theta_step(cfg, &gen, &mut v, payoff0, payoff_max, cfg.dt, h, 1.0)?;
    for step in 2..=steps {
        let tau_new = step as f64 * cfg.dt;
        theta_step(cfg, &gen, &mut v, payoff0, payoff_max, tau_new, cfg.dt, 0.5)?;
    }

    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("price surface".into()));
    }
    Field::from_real(cfg.grid.clone(), 1, v)
}

/// Vanilla call payoff max(S - strike, 0) sampled on the grid.
pub fn call_payoff(grid: &GridSpec, strike: f64) -> Result<Field> {
    Field::from_fn_1d(grid.clone(), |s| (s - strike).max(0.0))
}

/// Cash-or-nothing digital call paying 1 above the strike.
pub fn digital_payoff(grid: &GridSpec, strike: f64) -> Result<Field> {
    Field::from_fn_1d(grid.clone(), |s| if s > strike { 1.0 } else { 0.0 })
}
