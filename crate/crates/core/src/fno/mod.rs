//! Fourier neural operator.
//!
//! Architecture: pointwise lifting to `width` channels, `n_layers` spectral
//! blocks, pointwise two-layer projection. Each block adds a spectral
//! convolution and a pointwise linear skip, then applies GeLU. The spectral
//! convolution is factorized per dimension: transform along one axis, mix
//! the lowest `modes` coefficients channel-to-channel with a complex weight
//! tensor `width x width x modes`, inverse-transform, and sum the per-axis
//! results. Truncation indices are wavenumbers, so a trained operator
//! evaluates on any grid resolving its modes.
//!
//! The backward pass is written by hand against the same buffers the
//! forward pass produces and is verified against finite differences and
//! an adjoint identity in the test suite.

mod backward;
pub mod checkpoint;
mod forward;

pub use backward::{backward, backward_from_cache};
pub use forward::{forward, forward_cached, ForwardCache};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnoConfig {
    pub dims: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Retained Fourier modes per dimension.
    pub modes: usize,
    /// Internal channel count.
    pub width: usize,
    pub n_layers: usize,
    /// Hidden width of the output projection.
    pub hidden: usize,
}

impl FnoConfig {
    pub fn new(dims: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            dims,
            in_channels,
            out_channels,
            modes: 16,
            width: 32,
            n_layers: 4,
            hidden: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.dims > 2 {
            return Err(Error::Config(format!("dims must be 1 or 2, got {}", self.dims)));
        }
        for (name, v) in [
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
            ("modes", self.modes),
            ("width", self.width),
            ("n_layers", self.n_layers),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Grid compatibility: every axis must resolve the retained modes.
    pub fn check_grid(&self, grid: &crate::grid::GridSpec) -> Result<()> {
        if grid.dims() != self.dims {
            return Err(Error::Shape(format!(
                "model is {}-dimensional, grid is {}-dimensional",
                self.dims,
                grid.dims()
            )));
        }
        for &n in grid.sizes() {
            if self.modes > n / 2 {
                return Err(Error::Shape(format!(
                    "grid size {n} cannot resolve {} modes",
                    self.modes
                )));
            }
        }
        Ok(())
    }
}

/// Offsets into the flat parameter vector. Layout order: lifting weights
/// and bias, then per layer (per dimension: spectral real block, spectral
/// imaginary block), pointwise weights and bias, then the projection pair.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub lift_w: usize,
    pub lift_b: usize,
    /// [layer][dim] -> (re_offset, im_offset)
    pub spectral: Vec<Vec<(usize, usize)>>,
    /// [layer] -> (w_offset, b_offset)
    pub point: Vec<(usize, usize)>,
    pub proj1_w: usize,
    pub proj1_b: usize,
    pub proj2_w: usize,
    pub proj2_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &FnoConfig) -> Self {
        let w = cfg.width;
        let spec_block = w * w * cfg.modes;
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let lift_w = take(w * cfg.in_channels);
        let lift_b = take(w);
        let mut spectral = Vec::with_capacity(cfg.n_layers);
        let mut point = Vec::with_capacity(cfg.n_layers);
        for _ in 0..cfg.n_layers {
            let mut dims = Vec::with_capacity(cfg.dims);
            for _ in 0..cfg.dims {
                let re = take(spec_block);
                let im = take(spec_block);
                dims.push((re, im));
            }
            spectral.push(dims);
            let pw = take(w * w);
            let pb = take(w);
            point.push((pw, pb));
        }
        let proj1_w = take(cfg.hidden * w);
        let proj1_b = take(cfg.hidden);
        let proj2_w = take(cfg.out_channels * cfg.hidden);
        let proj2_b = take(cfg.out_channels);
        Layout {
            lift_w,
            lift_b,
            spectral,
            point,
            proj1_w,
            proj1_b,
            proj2_w,
            proj2_b,
            total: off,
        }
    }
}

pub fn param_count(cfg: &FnoConfig) -> usize {
    Layout::new(cfg).total
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnoParams {
    cfg: FnoConfig,
    data: Vec<f64>,
}

impl FnoParams {
    pub fn from_flat(cfg: FnoConfig, data: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let want = param_count(&cfg);
        if data.len() != want {
            return Err(Error::Shape(format!(
                "expected {want} parameters, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        Ok(Self { cfg, data })
    }

    pub fn cfg(&self) -> &FnoConfig {
        &self.cfg
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.cfg)
    }
}

/// Seeded initialization. Pointwise maps draw uniformly within the
/// symmetric fan-in bound; spectral weights draw a complex Gaussian scaled
/// by 1/width^2. Draws happen in flat-layout order, which pins the values
/// for a given seed.
pub fn init_params(cfg: &FnoConfig, seed: u64) -> Result<FnoParams> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let mut rng = seeds::rng_from(&[seeds::stream::INIT, seed]);
    let mut data = vec![0.0; layout.total];

    fn uniform(rng: &mut rand_chacha::ChaCha8Rng, fan_in: usize, out: &mut [f64]) {
        let b = 1.0 / (fan_in as f64).sqrt();
        for v in out.iter_mut() {
            *v = rng.gen_range(-b..b);
        }
    }
    fn gaussian(rng: &mut rand_chacha::ChaCha8Rng, scale: f64, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = scale * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
    }

    let w = cfg.width;
    let spec_block = w * w * cfg.modes;
    let spec_scale = 1.0 / (w * w) as f64;
    uniform(&mut rng, cfg.in_channels, &mut data[layout.lift_w..layout.lift_w + w * cfg.in_channels]);
    uniform(&mut rng, cfg.in_channels, &mut data[layout.lift_b..layout.lift_b + w]);
    for l in 0..cfg.n_layers {
        for d in 0..cfg.dims {
            let (re, im) = layout.spectral[l][d];
            gaussian(&mut rng, spec_scale, &mut data[re..re + spec_block]);
            gaussian(&mut rng, spec_scale, &mut data[im..im + spec_block]);
        }
        let (pw, pb) = layout.point[l];
        uniform(&mut rng, w, &mut data[pw..pw + w * w]);
        uniform(&mut rng, w, &mut data[pb..pb + w]);
    }
    uniform(&mut rng, w, &mut data[layout.proj1_w..layout.proj1_w + cfg.hidden * w]);
    uniform(&mut rng, w, &mut data[layout.proj1_b..layout.proj1_b + cfg.hidden]);
    uniform(
        &mut rng,
        cfg.hidden,
        &mut data[layout.proj2_w..layout.proj2_w + cfg.out_channels * cfg.hidden],
    );
    uniform(
        &mut rng,
        cfg.hidden,
        &mut data[layout.proj2_b..layout.proj2_b + cfg.out_channels],
    );

    FnoParams::from_flat(cfg.clone(), data)
}

/// Tanh-form GeLU.
#[inline]
pub(crate) fn gelu(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

/// Derivative of the tanh-form GeLU.
#[inline]
pub(crate) fn gelu_prime(x: f64) -> f64 {
    const C: f64 = 0.7978845608028654;
    let t = (C * (x + 0.044715 * x * x * x)).tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_param_counts_sit_in_budget() {
        let c2 = FnoConfig::new(2, 3, 1);
        let n2 = param_count(&c2);
        assert!(n2 >= 100_000 && n2 <= 500_000, "2d count {n2}");
        let c1 = FnoConfig::new(1, 3, 2);
        let n1 = param_count(&c1);
        assert!(n1 >= 100_000 && n1 <= 500_000, "1d count {n1}");
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = FnoConfig {
            modes: 4,
            width: 6,
            n_layers: 2,
            hidden: 8,
            ..FnoConfig::new(1, 2, 1)
        };
        let a = init_params(&cfg, 7).unwrap();
        let b = init_params(&cfg, 7).unwrap();
        assert_eq!(a.as_flat(), b.as_flat());
        let c = init_params(&cfg, 8).unwrap();
        assert_ne!(a.as_flat(), c.as_flat());
    }

    #[test]
    fn flat_roundtrip_is_exact() {
        let cfg = FnoConfig {
            modes: 3,
            width: 4,
            n_layers: 2,
            hidden: 5,
            ..FnoConfig::new(2, 2, 2)
        };
        let p = init_params(&cfg, 1).unwrap();
        let q = FnoParams::from_flat(cfg, p.as_flat().to_vec()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn gelu_matches_reference_points() {
        assert!((gelu(0.0)).abs() < 1e-15);
        assert!((gelu(1.0) - 0.8411919906082768).abs() < 1e-12);
        assert!((gelu(-1.0) + 0.15880800939172324).abs() < 1e-12);
        // Numerical derivative agreement.
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_prime(x)).abs() < 1e-8, "x = {x}");
        }
    }
}
