//! The five operator-learning tasks: regime defaults, instance sampling,
//! ground-truth solving, and the channel encoding fed to the model.
//!
//! Each family maps a set of input functions (initial condition,
//! coefficient + source + boundary data, payoff) to one output function.
//! Scalar parameters (kappa, nu, sigma) ride along as constant input
//! channels, min-max normalized against the training range so that
//! out-of-range values are visible to the model as out-of-range channel
//! values rather than silently clipped.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fno::FnoConfig;
use crate::grid::{Field, GridSpec, ValueKind};
use crate::interp::interpolate;
use crate::sampler;
use crate::solvers::black_scholes::{self, BsConfig, FarField};
use crate::solvers::kuramoto::KsConfig;
use crate::solvers::navier_stokes::NsConfig;
use crate::solvers::nls::NlsConfig;
use crate::solvers::poisson::{solve_poisson, BoundaryTrace, PoissonConfig};
use crate::solvers::{solve_ks, solve_nls, solve_ns};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PdeFamily {
    Nls,
    Poisson,
    NavierStokes,
    BlackScholes,
    KuramotoSivashinsky,
}

pub const ALL_FAMILIES: [PdeFamily; 5] = [
    PdeFamily::Nls,
    PdeFamily::Poisson,
    PdeFamily::NavierStokes,
    PdeFamily::BlackScholes,
    PdeFamily::KuramotoSivashinsky,
];

impl PdeFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            PdeFamily::Nls => "nls",
            PdeFamily::Poisson => "poisson",
            PdeFamily::NavierStokes => "ns",
            PdeFamily::BlackScholes => "bs",
            PdeFamily::KuramotoSivashinsky => "ks",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        ALL_FAMILIES
            .into_iter()
            .find(|f| f.tag() == tag)
            .ok_or_else(|| Error::Config(format!("unknown pde tag '{tag}'")))
    }

    /// Stable numeric id used in seed derivation; never reorder.
    pub fn index(&self) -> u64 {
        match self {
            PdeFamily::Nls => 0,
            PdeFamily::Poisson => 1,
            PdeFamily::NavierStokes => 2,
            PdeFamily::BlackScholes => 3,
            PdeFamily::KuramotoSivashinsky => 4,
        }
    }

    pub fn input_channels(&self) -> usize {
        match self {
            PdeFamily::Nls => 3,
            PdeFamily::Poisson => 8,
            PdeFamily::NavierStokes => 3,
            PdeFamily::BlackScholes => 3,
            PdeFamily::KuramotoSivashinsky => 1,
        }
    }

    pub fn output_channels(&self) -> usize {
        match self {
            PdeFamily::Nls => 2,
            _ => 1,
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(
            self,
            PdeFamily::Nls | PdeFamily::NavierStokes | PdeFamily::KuramotoSivashinsky
        )
    }
}

/// Affine (or log-affine) map from a physical parameter to its constant
/// input channel: training range -> [0, 1], shifted values land outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamScale {
    pub lo: f64,
    pub hi: f64,
    pub log10: bool,
}

impl ParamScale {
    pub fn normalize(&self, v: f64) -> Result<f64> {
        let (v, lo, hi) = if self.log10 {
            if v <= 0.0 {
                return Err(Error::Domain(format!("log-scaled parameter must be positive, got {v}")));
            }
            (v.log10(), self.lo.log10(), self.hi.log10())
        } else {
            (v, self.lo, self.hi)
        };
        if hi <= lo {
            return Err(Error::Config("parameter scale has empty range".into()));
        }
        Ok((v - lo) / (hi - lo))
    }
}

/// Normalization constants for every scalar-parameter channel of a model;
/// persisted in its checkpoint so evaluation never depends on the regime
/// config being around.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputEncoding {
    pub scales: BTreeMap<String, ParamScale>,
}

impl InputEncoding {
    pub fn scale(&self, name: &str) -> Result<&ParamScale> {
        self.scales
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("encoding is missing parameter '{name}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlsRegime {
    pub grid_size: usize,
    pub domain_length: f64,
    /// Model time step: the operator maps u(0) to u(horizon).
    pub horizon: f64,
    pub solver_dt: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub ic_alpha: f64,
    pub ic_amplitude: f64,
    pub ic_max_mode: usize,
    pub fno: FnoConfig,
}

impl Default for NlsRegime {
    fn default() -> Self {
        let mut fno = FnoConfig::new(1, 3, 2);
        // Modes cover the full initial-data band so the in-distribution
        // error floor is set by optimization, not representation.
        fno.modes = 64;
        fno.width = 24;
        Self {
            grid_size: 128,
            domain_length: std::f64::consts::TAU,
            horizon: 0.25,
            solver_dt: 0.25 / 256.0,
            kappa_lo: 0.5,
            kappa_hi: 1.0,
            ic_alpha: 0.1,
            ic_amplitude: 1.8,
            ic_max_mode: 63,
            fno,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsRegime {
    pub grid_size: usize,
    pub domain_length: f64,
    pub horizon: f64,
    pub solver_dt: f64,
    /// Integration time from the random draw to the attractor; the
    /// post-spinup state is the instance's initial condition.
    pub spinup_time: f64,
    pub ic_alpha: f64,
    pub ic_amplitude: f64,
    pub ic_max_mode: usize,
    pub fno: FnoConfig,
}

impl Default for KsRegime {
    fn default() -> Self {
        let mut fno = FnoConfig::new(1, 1, 1);
        fno.modes = 32;
        fno.width = 32;
        Self {
            grid_size: 128,
            domain_length: 32.0 * std::f64::consts::PI,
            horizon: 1.0,
            solver_dt: 0.05,
            spinup_time: 40.0,
            ic_alpha: 2.0,
            ic_amplitude: 1.0,
            ic_max_mode: 8,
            fno,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsRegime {
    pub grid_size: usize,
    pub domain_length: f64,
    pub nu: f64,
    pub horizon: f64,
    pub solver_dt: f64,
    pub ic_alpha: f64,
    pub ic_amplitude: f64,
    pub ic_max_mode: usize,
    pub forcing_alpha: f64,
    pub forcing_amplitude: f64,
    pub forcing_max_mode: usize,
    /// Channel scale for nu; training uses a single value, so the range is
    /// a declared window around it rather than a min-max of observations.
    pub nu_scale_lo: f64,
    pub nu_scale_hi: f64,
    pub fno: FnoConfig,
}

impl Default for NsRegime {
    fn default() -> Self {
        let mut fno = FnoConfig::new(2, 3, 1);
        fno.modes = 12;
        fno.width = 32;
        Self {
            grid_size: 32,
            domain_length: std::f64::consts::TAU,
            nu: 1e-3,
            horizon: 0.5,
            solver_dt: 0.005,
            ic_alpha: 1.5,
            ic_amplitude: 1.5,
            ic_max_mode: 10,
            forcing_alpha: 0.0,
            forcing_amplitude: 0.08,
            forcing_max_mode: 2,
            nu_scale_lo: 1e-4,
            nu_scale_hi: 1e-2,
            fno,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonRegime {
    pub grid_size: usize,
    pub domain_length: f64,
    /// The coefficient is exp(g) with g a random field, so ellipticity
    /// holds by construction; a_log_amplitude is the rms of g.
    pub a_alpha: f64,
    pub a_log_amplitude: f64,
    pub a_max_mode: usize,
    pub f_alpha: f64,
    pub f_amplitude: f64,
    pub f_max_mode: usize,
    /// Boundary traces are band-limited loops around the perimeter; a loop
    /// mode is roughly four edge modes.
    pub boundary_alpha: f64,
    pub boundary_amplitude: f64,
    pub boundary_loop_lo: usize,
    pub boundary_loop_hi: usize,
    pub shifted_loop_lo: usize,
    pub shifted_loop_hi: usize,
    pub shifted_amplitude_factor: f64,
    pub fno: FnoConfig,
}

impl Default for PoissonRegime {
    fn default() -> Self {
        let mut fno = FnoConfig::new(2, 8, 1);
        fno.modes = 12;
        fno.width = 32;
        Self {
            grid_size: 33,
            domain_length: 1.0,
            a_alpha: 2.5,
            a_log_amplitude: 0.6,
            a_max_mode: 8,
            f_alpha: 2.0,
            f_amplitude: 1.0,
            f_max_mode: 8,
            boundary_alpha: 2.0,
            boundary_amplitude: 0.3,
            boundary_loop_lo: 1,
            boundary_loop_hi: 2,
            shifted_loop_lo: 4,
            shifted_loop_hi: 8,
            shifted_amplitude_factor: 2.0,
            fno,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsRegime {
    pub grid_size: usize,
    pub s_max: f64,
    pub rate: f64,
    pub maturity: f64,
    pub solver_dt: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub strike_lo: f64,
    pub strike_hi: f64,
    /// Probability that a training payoff is digital rather than a call.
    pub digital_mix: f64,
    pub fno: FnoConfig,
}

impl Default for BsRegime {
    fn default() -> Self {
        let mut fno = FnoConfig::new(1, 3, 1);
        fno.modes = 32;
        fno.width = 32;
        Self {
            grid_size: 128,
            s_max: 5.0,
            rate: 0.05,
            maturity: 1.0,
            solver_dt: 0.005,
            sigma_lo: 0.1,
            sigma_hi: 0.3,
            strike_lo: 0.8,
            strike_hi: 1.2,
            digital_mix: 0.05,
            fno,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Regimes {
    pub nls: NlsRegime,
    pub ks: KsRegime,
    pub ns: NsRegime,
    pub poisson: PoissonRegime,
    pub bs: BsRegime,
}

impl Regimes {
    pub fn fno_config(&self, family: PdeFamily) -> &FnoConfig {
        match family {
            PdeFamily::Nls => &self.nls.fno,
            PdeFamily::Poisson => &self.poisson.fno,
            PdeFamily::NavierStokes => &self.ns.fno,
            PdeFamily::BlackScholes => &self.bs.fno,
            PdeFamily::KuramotoSivashinsky => &self.ks.fno,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for family in ALL_FAMILIES {
            let fno = self.fno_config(family);
            fno.validate()?;
            if fno.in_channels != family.input_channels()
                || fno.out_channels != family.output_channels()
            {
                return Err(Error::Config(format!(
                    "{} model channels {}->{} do not match the task's {}->{}",
                    family.tag(),
                    fno.in_channels,
                    fno.out_channels,
                    family.input_channels(),
                    family.output_channels()
                )));
            }
            fno.check_grid(&train_grid(family, self)?)?;
            fno.check_grid(&fine_grid(family, self)?)?;
        }
        if !(self.nls.kappa_lo < self.nls.kappa_hi) {
            return Err(Error::Config("nls kappa range is empty".into()));
        }
        if !(self.bs.sigma_lo < self.bs.sigma_hi) {
            return Err(Error::Config("bs sigma range is empty".into()));
        }
        if !(self.ns.nu_scale_lo < self.ns.nu && self.ns.nu < self.ns.nu_scale_hi) {
            return Err(Error::Config("ns training nu must sit inside its channel scale window".into()));
        }
        if self.poisson.shifted_loop_lo <= self.poisson.boundary_loop_hi {
            return Err(Error::Config(
                "shifted boundary band must not overlap the training band".into(),
            ));
        }
        Ok(())
    }
}

/// One solvable problem: the sampled input functions plus scalar parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum PdeInstance {
    Nls {
        u0: Field,
        kappa: f64,
    },
    Poisson {
        a: Field,
        f: Field,
        g: BoundaryTrace,
    },
    Ns {
        omega0: Field,
        forcing: Field,
        nu: f64,
    },
    Bs {
        strike: f64,
        digital: bool,
        sigma: f64,
        /// Set only when the payoff is no longer analytic (perturbed).
        payoff_override: Option<Field>,
    },
    Ks {
        u0: Field,
    },
}

impl PdeInstance {
    pub fn family(&self) -> PdeFamily {
        match self {
            PdeInstance::Nls { .. } => PdeFamily::Nls,
            PdeInstance::Poisson { .. } => PdeFamily::Poisson,
            PdeInstance::Ns { .. } => PdeFamily::NavierStokes,
            PdeInstance::Bs { .. } => PdeFamily::BlackScholes,
            PdeInstance::Ks { .. } => PdeFamily::KuramotoSivashinsky,
        }
    }
}

/// What to sample: the training distribution or one of the shifted input
/// families. Resolution, rollout, and perturbation scenarios reuse InDist
/// instances and stress the model elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleVariant {
    InDist,
    /// Shifted scalar parameter: kappa (nls), nu (ns), sigma (bs), or the
    /// coefficient spectrum decay alpha (poisson).
    ParamShift(f64),
    /// Poisson: high-mode boundary traces at doubled amplitude.
    BoundaryShift,
    /// Black-Scholes: digital payoffs with the given probability.
    PayoffShift(f64),
}

pub fn train_grid(family: PdeFamily, regimes: &Regimes) -> Result<GridSpec> {
    match family {
        PdeFamily::Nls => GridSpec::periodic_1d(regimes.nls.grid_size, regimes.nls.domain_length),
        PdeFamily::KuramotoSivashinsky => {
            GridSpec::periodic_1d(regimes.ks.grid_size, regimes.ks.domain_length)
        }
        PdeFamily::NavierStokes => GridSpec::periodic_2d(
            regimes.ns.grid_size,
            regimes.ns.grid_size,
            regimes.ns.domain_length,
            regimes.ns.domain_length,
        ),
        PdeFamily::Poisson => GridSpec::dirichlet_2d(
            regimes.poisson.grid_size,
            regimes.poisson.grid_size,
            regimes.poisson.domain_length,
            regimes.poisson.domain_length,
        ),
        PdeFamily::BlackScholes => GridSpec::dirichlet_1d(regimes.bs.grid_size, regimes.bs.s_max),
    }
}

/// The doubled evaluation grid for resolution extrapolation: 2n points for
/// periodic grids, 2(n-1)+1 for Dirichlet grids (same spacing halving).
pub fn fine_grid(family: PdeFamily, regimes: &Regimes) -> Result<GridSpec> {
    let base = train_grid(family, regimes)?;
    let double = |n: usize| match base.boundary() {
        crate::grid::BoundaryKind::Periodic => 2 * n,
        crate::grid::BoundaryKind::Dirichlet => 2 * (n - 1) + 1,
    };
    match base.dims() {
        1 => GridSpec::new(
            vec![double(base.sizes()[0])],
            base.lengths().to_vec(),
            base.boundary(),
        ),
        _ => GridSpec::new(
            vec![double(base.sizes()[0]), double(base.sizes()[1])],
            base.lengths().to_vec(),
            base.boundary(),
        ),
    }
}

/// Channel normalization constants derived from the training regime.
pub fn encoding_for(family: PdeFamily, regimes: &Regimes) -> InputEncoding {
    let mut scales = BTreeMap::new();
    match family {
        PdeFamily::Nls => {
            scales.insert(
                "kappa".to_string(),
                ParamScale {
                    lo: regimes.nls.kappa_lo,
                    hi: regimes.nls.kappa_hi,
                    log10: false,
                },
            );
        }
        PdeFamily::NavierStokes => {
            scales.insert(
                "nu".to_string(),
                ParamScale {
                    lo: regimes.ns.nu_scale_lo,
                    hi: regimes.ns.nu_scale_hi,
                    log10: true,
                },
            );
        }
        PdeFamily::BlackScholes => {
            scales.insert(
                "sigma".to_string(),
                ParamScale {
                    lo: regimes.bs.sigma_lo,
                    hi: regimes.bs.sigma_hi,
                    log10: false,
                },
            );
        }
        PdeFamily::Poisson | PdeFamily::KuramotoSivashinsky => {}
    }
    InputEncoding { scales }
}

/// The held-fixed Navier-Stokes forcing for one model seed: shared by every
/// training and stress instance of that seed.
pub fn ns_forcing(regimes: &Regimes, rng: &mut ChaCha8Rng) -> Result<Field> {
    let grid = train_grid(PdeFamily::NavierStokes, regimes)?;
    sampler::sample_grf_2d(
        &grid,
        regimes.ns.forcing_alpha,
        regimes.ns.forcing_amplitude,
        regimes.ns.forcing_max_mode,
        rng,
    )
}

/// Draw one instance. `forcing` must be supplied for Navier-Stokes and
/// nothing else.
pub fn sample_instance(
    family: PdeFamily,
    regimes: &Regimes,
    variant: &SampleVariant,
    forcing: Option<&Field>,
    rng: &mut ChaCha8Rng,
) -> Result<PdeInstance> {
    if forcing.is_some() != (family == PdeFamily::NavierStokes) {
        return Err(Error::Config(
            "forcing is required for navier-stokes and invalid elsewhere".into(),
        ));
    }
    match family {
        PdeFamily::Nls => {
            let r = &regimes.nls;
            let kappa = match variant {
                SampleVariant::InDist => {
                    r.kappa_lo + (r.kappa_hi - r.kappa_lo) * rand::Rng::gen::<f64>(rng)
                }
                SampleVariant::ParamShift(k) => *k,
                _ => return Err(scenario_mismatch(family, variant)),
            };
            let grid = train_grid(family, regimes)?;
            let u0 = sampler::sample_grf_complex_1d(
                &grid,
                r.ic_alpha,
                r.ic_amplitude,
                r.ic_max_mode,
                rng,
            )?;
            Ok(PdeInstance::Nls { u0, kappa })
        }
        PdeFamily::KuramotoSivashinsky => {
            if !matches!(variant, SampleVariant::InDist) {
                return Err(scenario_mismatch(family, variant));
            }
            let r = &regimes.ks;
            let grid = train_grid(family, regimes)?;
            let draw =
                sampler::sample_grf_1d(&grid, r.ic_alpha, r.ic_amplitude, (1, r.ic_max_mode), rng)?;
            // Spin up to the attractor; the saved state is the instance IC.
            let steps = crate::solvers::step_count(r.spinup_time, r.solver_dt)?;
            let cfg = KsConfig::new(grid, r.spinup_time, r.solver_dt, steps)?;
            let traj = solve_ks(&cfg, &draw)?;
            Ok(PdeInstance::Ks {
                u0: traj.final_state().clone(),
            })
        }
        PdeFamily::NavierStokes => {
            let r = &regimes.ns;
            let nu = match variant {
                SampleVariant::InDist => r.nu,
                SampleVariant::ParamShift(v) => *v,
                _ => return Err(scenario_mismatch(family, variant)),
            };
            let grid = train_grid(family, regimes)?;
            let omega0 =
                sampler::sample_grf_2d(&grid, r.ic_alpha, r.ic_amplitude, r.ic_max_mode, rng)?;
            Ok(PdeInstance::Ns {
                omega0,
                forcing: forcing.unwrap().clone(),
                nu,
            })
        }
        PdeFamily::Poisson => {
            let r = &regimes.poisson;
            let grid = train_grid(family, regimes)?;
            let (a_alpha, band, amp) = match variant {
                SampleVariant::InDist => (
                    r.a_alpha,
                    (r.boundary_loop_lo, r.boundary_loop_hi),
                    r.boundary_amplitude,
                ),
                SampleVariant::ParamShift(alpha) => (
                    *alpha,
                    (r.boundary_loop_lo, r.boundary_loop_hi),
                    r.boundary_amplitude,
                ),
                SampleVariant::BoundaryShift => (
                    r.a_alpha,
                    (r.shifted_loop_lo, r.shifted_loop_hi),
                    r.boundary_amplitude * r.shifted_amplitude_factor,
                ),
                SampleVariant::PayoffShift(_) => return Err(scenario_mismatch(family, variant)),
            };
            let g_field =
                sampler::sample_grf_dirichlet(&grid, a_alpha, r.a_log_amplitude, r.a_max_mode, rng)?;
            let a_vals: Vec<f64> = g_field.as_real()?.iter().map(|g| g.exp()).collect();
            let a = Field::from_real(grid.clone(), 1, a_vals)?;
            let f =
                sampler::sample_grf_dirichlet(&grid, r.f_alpha, r.f_amplitude, r.f_max_mode, rng)?;
            let g = sampler::sample_boundary_loop(&grid, r.boundary_alpha, amp, band, rng)?;
            Ok(PdeInstance::Poisson { a, f, g })
        }
        PdeFamily::BlackScholes => {
            let r = &regimes.bs;
            let (sigma, mix) = match variant {
                SampleVariant::InDist => (
                    r.sigma_lo + (r.sigma_hi - r.sigma_lo) * rand::Rng::gen::<f64>(rng),
                    r.digital_mix,
                ),
                SampleVariant::ParamShift(s) => (*s, r.digital_mix),
                SampleVariant::PayoffShift(mix) => (
                    r.sigma_lo + (r.sigma_hi - r.sigma_lo) * rand::Rng::gen::<f64>(rng),
                    *mix,
                ),
                SampleVariant::BoundaryShift => return Err(scenario_mismatch(family, variant)),
            };
            let strike = r.strike_lo + (r.strike_hi - r.strike_lo) * rand::Rng::gen::<f64>(rng);
            let digital = rand::Rng::gen::<f64>(rng) < mix;
            Ok(PdeInstance::Bs {
                strike,
                digital,
                sigma,
                payoff_override: None,
            })
        }
    }
}

fn scenario_mismatch(family: PdeFamily, variant: &SampleVariant) -> Error {
    Error::Config(format!(
        "variant {variant:?} is not applicable to {}",
        family.tag()
    ))
}

/// The payoff function on a given S grid (analytic unless perturbed).
pub fn bs_payoff_field(inst: &PdeInstance, grid: &GridSpec) -> Result<Field> {
    let PdeInstance::Bs {
        strike,
        digital,
        payoff_override,
        ..
    } = inst
    else {
        return Err(Error::Config("payoff requested for a non-bs instance".into()));
    };
    if let Some(p) = payoff_override {
        if p.grid() != grid {
            return Err(Error::Grid("perturbed payoff lives on a different grid".into()));
        }
        return Ok(p.clone());
    }
    if *digital {
        black_scholes::digital_payoff(grid, *strike)
    } else {
        black_scholes::call_payoff(grid, *strike)
    }
}

/// The sampled input function the perturbation scenario adds noise to.
pub fn primary_input(inst: &PdeInstance, grid: &GridSpec) -> Result<Field> {
    match inst {
        PdeInstance::Nls { u0, .. } => Ok(u0.clone()),
        PdeInstance::Ks { u0 } => Ok(u0.clone()),
        PdeInstance::Ns { omega0, .. } => Ok(omega0.clone()),
        PdeInstance::Poisson { f, .. } => Ok(f.clone()),
        PdeInstance::Bs { .. } => bs_payoff_field(inst, grid),
    }
}

/// The same instance with its primary input replaced (the perturbation
/// scenario's modified problem).
pub fn with_primary_input(inst: &PdeInstance, field: Field) -> Result<PdeInstance> {
    let mut out = inst.clone();
    match &mut out {
        PdeInstance::Nls { u0, .. } => *u0 = field,
        PdeInstance::Ks { u0 } => *u0 = field,
        PdeInstance::Ns { omega0, .. } => {
            // The solver requires a mean-free vorticity; white noise has a
            // tiny nonzero mean, so project it out.
            let mut f = field;
            let vals = f.as_real_mut()?;
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter_mut().for_each(|v| *v -= mean);
            *omega0 = f;
        }
        PdeInstance::Poisson { f, .. } => *f = field,
        PdeInstance::Bs {
            payoff_override, ..
        } => *payoff_override = Some(field),
    }
    Ok(out)
}

/// Time step for solving on a grid `n` points per axis when the regime's
/// `solver_dt` was calibrated at `train_n`. Split-step NLS and the KS
/// stepper lose a fixed phase/stiffness margin per step that scales with
/// the square of the top wavenumber, so dt shrinks as (train_n/n)^2; the
/// NS advection CFL is linear in the mesh width.
fn scaled_dt(family: PdeFamily, solver_dt: f64, train_n: usize, n: usize) -> f64 {
    if n <= train_n {
        return solver_dt;
    }
    let ratio = n as f64 / train_n as f64;
    let power = match family {
        PdeFamily::Nls | PdeFamily::KuramotoSivashinsky => 2,
        PdeFamily::NavierStokes => 1,
        PdeFamily::Poisson | PdeFamily::BlackScholes => 0,
    };
    solver_dt / ratio.powi(power)
}

/// Ground-truth targets at `horizons` multiples of the model horizon, in
/// model output encoding (complex NLS states become [Re, Im] channels).
/// Stationary families accept only `[1]`.
pub fn solve_targets(
    family: PdeFamily,
    regimes: &Regimes,
    inst: &PdeInstance,
    horizons: &[usize],
) -> Result<Vec<Field>> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return Err(Error::Config("horizons must be ascending positive multiples".into()));
    }
    if !family.is_time_dependent() && horizons != [1] {
        return Err(Error::Config(format!(
            "{} is stationary; only horizon [1] exists",
            family.tag()
        )));
    }
    match (family, inst) {
        (PdeFamily::Nls, PdeInstance::Nls { u0, kappa }) => {
            let r = &regimes.nls;
            let max_h = *horizons.last().unwrap();
            let dt = scaled_dt(family, r.solver_dt, r.grid_size, u0.grid().sizes()[0]);
            let steps_per = crate::solvers::step_count(r.horizon, dt)?;
            let cfg = NlsConfig::new(
                u0.grid().clone(),
                *kappa,
                r.horizon * max_h as f64,
                dt,
                steps_per,
            )?;
            let traj = solve_nls(&cfg, u0)?;
            horizons
                .iter()
                .map(|h| {
                    let t = r.horizon * *h as f64;
                    let state = traj.state_at(t).ok_or_else(|| {
                        Error::Campaign(format!("trajectory is missing the state at t = {t}"))
                    })?;
                    complex_to_two_channel(state)
                })
                .collect()
        }
        (PdeFamily::KuramotoSivashinsky, PdeInstance::Ks { u0 }) => {
            let r = &regimes.ks;
            let max_h = *horizons.last().unwrap();
            let dt = scaled_dt(family, r.solver_dt, r.grid_size, u0.grid().sizes()[0]);
            let steps_per = crate::solvers::step_count(r.horizon, dt)?;
            let cfg = KsConfig::new(
                u0.grid().clone(),
                r.horizon * max_h as f64,
                dt,
                steps_per,
            )?;
            let traj = solve_ks(&cfg, u0)?;
            collect_horizon_states(&traj, r.horizon, horizons)
        }
        (PdeFamily::NavierStokes, PdeInstance::Ns { omega0, forcing, nu }) => {
            // Vorticity targets are solved on a once-refined grid and
            // spectrally truncated back. A direct solve at the working
            // resolution carries a systematic discretization bias that the
            // model would learn, and that bias relocates under resolution
            // changes; the refined solve keeps targets consistent with one
            // underlying map at every evaluation grid.
            let r = &regimes.ns;
            let max_h = *horizons.last().unwrap();
            let eval_grid = omega0.grid().clone();
            let n = eval_grid.sizes()[0];
            let lengths = eval_grid.lengths();
            let solve_grid = GridSpec::periodic_2d(2 * n, 2 * n, lengths[0], lengths[1])?;
            let omega0_fine = interpolate(omega0, &solve_grid)?;
            let forcing_fine = interpolate(forcing, &solve_grid)?;
            let dt = scaled_dt(family, r.solver_dt, r.grid_size, 2 * n);
            let steps_per = crate::solvers::step_count(r.horizon, dt)?;
            let cfg = NsConfig::new(
                solve_grid,
                *nu,
                r.horizon * max_h as f64,
                dt,
                steps_per,
            )?;
            let traj = solve_ns(&cfg, &omega0_fine, Some(&forcing_fine))?;
            collect_horizon_states(&traj, r.horizon, horizons)?
                .iter()
                .map(|state| interpolate(state, &eval_grid))
                .collect()
        }
        (PdeFamily::Poisson, PdeInstance::Poisson { a, f, g }) => {
            let cfg = PoissonConfig::new(a.grid().clone())?;
            Ok(vec![solve_poisson(&cfg, a, f, g)?])
        }
        (PdeFamily::BlackScholes, PdeInstance::Bs { sigma, .. }) => {
            let r = &regimes.bs;
            let grid = bs_instance_grid(inst, regimes)?;
            let payoff = bs_payoff_field(inst, &grid)?;
            let cfg = BsConfig::new(
                grid,
                *sigma,
                r.rate,
                r.maturity,
                r.solver_dt,
                FarField::LinearExtrapolation,
            )?;
            Ok(vec![black_scholes::solve_bs(&cfg, &payoff)?])
        }
        _ => Err(Error::Config("instance does not belong to the stated family".into())),
    }
}

/// The grid a BS instance is currently evaluated on: its override payoff's
/// grid if perturbed, else the training grid.
fn bs_instance_grid(inst: &PdeInstance, regimes: &Regimes) -> Result<GridSpec> {
    if let PdeInstance::Bs {
        payoff_override: Some(p),
        ..
    } = inst
    {
        return Ok(p.grid().clone());
    }
    train_grid(PdeFamily::BlackScholes, regimes)
}

fn collect_horizon_states(
    traj: &crate::solvers::Trajectory,
    horizon: f64,
    horizons: &[usize],
) -> Result<Vec<Field>> {
    horizons
        .iter()
        .map(|h| {
            let t = horizon * *h as f64;
            traj.state_at(t)
                .cloned()
                .ok_or_else(|| Error::Campaign(format!("trajectory is missing the state at t = {t}")))
        })
        .collect()
}

pub fn complex_to_two_channel(u: &Field) -> Result<Field> {
    if u.value_kind() != ValueKind::Complex || u.channels() != 1 {
        return Err(Error::Shape("expected a single complex channel".into()));
    }
    let vals = u.as_complex()?;
    let n = vals.len();
    let mut out = Vec::with_capacity(2 * n);
    out.extend(vals.iter().map(|z| z.re));
    out.extend(vals.iter().map(|z| z.im));
    Field::from_real(u.grid().clone(), 2, out)
}

pub fn two_channel_to_complex(f: &Field) -> Result<Field> {
    if f.value_kind() != ValueKind::Real || f.channels() != 2 {
        return Err(Error::Shape("expected two real channels".into()));
    }
    let re = f.channel(0)?;
    let im = f.channel(1)?;
    let vals: Vec<Complex64> = re
        .iter()
        .zip(im)
        .map(|(r, i)| Complex64::new(*r, *i))
        .collect();
    Field::from_complex(f.grid().clone(), 1, vals)
}

/// Build the model input channels for an instance whose fields live on
/// `grid`. Constant parameter channels use the stored encoding; coordinate
/// channels are rebuilt from the grid, so the same instance assembles
/// consistently at any resolution.
pub fn assemble_input(
    inst: &PdeInstance,
    encoding: &InputEncoding,
    grid: &GridSpec,
) -> Result<Field> {
    match inst {
        PdeInstance::Nls { u0, kappa } => {
            if u0.grid() != grid {
                return Err(Error::Grid("instance fields live on a different grid".into()));
            }
            let k = encoding.scale("kappa")?.normalize(*kappa)?;
            let parts = complex_to_two_channel(u0)?;
            let konst = constant_channel(grid, k);
            Field::stack(&[&parts, &konst])
        }
        PdeInstance::Ks { u0 } => {
            if u0.grid() != grid {
                return Err(Error::Grid("instance fields live on a different grid".into()));
            }
            Ok(u0.clone())
        }
        PdeInstance::Ns { omega0, forcing, nu } => {
            if omega0.grid() != grid || forcing.grid() != grid {
                return Err(Error::Grid("instance fields live on a different grid".into()));
            }
            let v = encoding.scale("nu")?.normalize(*nu)?;
            let konst = constant_channel(grid, v);
            Field::stack(&[omega0, forcing, &konst])
        }
        PdeInstance::Poisson { a, f, g } => {
            if a.grid() != grid || f.grid() != grid {
                return Err(Error::Grid("instance fields live on a different grid".into()));
            }
            let (nx, ny) = (grid.sizes()[0], grid.sizes()[1]);
            if g.bottom.len() != nx || g.left.len() != ny {
                return Err(Error::Shape("boundary trace does not match the grid".into()));
            }
            let npts = nx * ny;
            let mut chans = vec![0.0; 6 * npts];
            for ix in 0..nx {
                for iy in 0..ny {
                    let p = ix * ny + iy;
                    chans[p] = g.bottom[ix];
                    chans[npts + p] = g.top[ix];
                    chans[2 * npts + p] = g.left[iy];
                    chans[3 * npts + p] = g.right[iy];
                    chans[4 * npts + p] = grid.coordinate(0, ix) / grid.lengths()[0];
                    chans[5 * npts + p] = grid.coordinate(1, iy) / grid.lengths()[1];
                }
            }
            let rest = Field::from_real(grid.clone(), 6, chans)?;
            Field::stack(&[a, f, &rest])
        }
        PdeInstance::Bs { sigma, .. } => {
            let payoff = bs_payoff_field(inst, grid)?;
            let s = encoding.scale("sigma")?.normalize(*sigma)?;
            let konst = constant_channel(grid, s);
            let smax = grid.lengths()[0];
            let coord = Field::from_fn_1d(grid.clone(), |x| x / smax)?;
            Field::stack(&[&payoff, &konst, &coord])
        }
    }
}

fn constant_channel(grid: &GridSpec, v: f64) -> Field {
    let mut f = Field::zeros(grid.clone(), 1, ValueKind::Real);
    f.as_real_mut().unwrap().iter_mut().for_each(|x| *x = v);
    f
}

/// Reassemble a model output as the next rollout input.
pub fn rollout_reencode(
    inst: &PdeInstance,
    encoding: &InputEncoding,
    prev_output: &Field,
) -> Result<Field> {
    match inst {
        PdeInstance::Nls { kappa, .. } => {
            let k = encoding.scale("kappa")?.normalize(*kappa)?;
            let konst = constant_channel(prev_output.grid(), k);
            Field::stack(&[prev_output, &konst])
        }
        PdeInstance::Ks { .. } => Ok(prev_output.clone()),
        PdeInstance::Ns { forcing, nu, .. } => {
            let v = encoding.scale("nu")?.normalize(*nu)?;
            let konst = constant_channel(prev_output.grid(), v);
            Field::stack(&[prev_output, forcing, &konst])
        }
        _ => Err(Error::Config(format!(
            "rollout is not applicable to {}",
            inst.family().tag()
        ))),
    }
}

/// Move an instance's input functions to a finer grid of the same domain:
/// spectral for periodic fields, cubic for Dirichlet fields, per-edge cubic
/// for boundary traces; analytic payoffs are re-evaluated exactly.
pub fn interpolate_instance(
    inst: &PdeInstance,
    regimes: &Regimes,
    fine: &GridSpec,
) -> Result<PdeInstance> {
    match inst {
        PdeInstance::Nls { u0, kappa } => Ok(PdeInstance::Nls {
            u0: interpolate(u0, fine)?,
            kappa: *kappa,
        }),
        PdeInstance::Ns { omega0, forcing, nu } => Ok(PdeInstance::Ns {
            omega0: interpolate(omega0, fine)?,
            forcing: interpolate(forcing, fine)?,
            nu: *nu,
        }),
        PdeInstance::Poisson { a, f, g } => {
            let coarse = a.grid().clone();
            Ok(PdeInstance::Poisson {
                a: interpolate(a, fine)?,
                f: interpolate(f, fine)?,
                g: interpolate_trace(g, &coarse, fine)?,
            })
        }
        PdeInstance::Bs {
            strike,
            digital,
            sigma,
            payoff_override,
        } => {
            if payoff_override.is_some() {
                return Err(Error::Config(
                    "a perturbed payoff has no analytic fine-grid form".into(),
                ));
            }
            let _ = regimes;
            Ok(PdeInstance::Bs {
                strike: *strike,
                digital: *digital,
                sigma: *sigma,
                payoff_override: None,
            })
        }
        PdeInstance::Ks { .. } => Err(Error::Config(
            "resolution extrapolation is not applicable to ks".into(),
        )),
    }
}

fn interpolate_trace(
    g: &BoundaryTrace,
    coarse: &GridSpec,
    fine: &GridSpec,
) -> Result<BoundaryTrace> {
    let edge = |vals: &[f64], length: f64, n_dst: usize| -> Result<Vec<f64>> {
        let src = GridSpec::dirichlet_1d(vals.len(), length)?;
        let dst = GridSpec::dirichlet_1d(n_dst, length)?;
        let f = Field::from_real(src, 1, vals.to_vec())?;
        Ok(interpolate(&f, &dst)?.as_real()?.to_vec())
    };
    let (lx, ly) = (coarse.lengths()[0], coarse.lengths()[1]);
    let (fx, fy) = (fine.sizes()[0], fine.sizes()[1]);
    Ok(BoundaryTrace {
        bottom: edge(&g.bottom, lx, fx)?,
        top: edge(&g.top, lx, fx)?,
        left: edge(&g.left, ly, fy)?,
        right: edge(&g.right, ly, fy)?,
    })
}
