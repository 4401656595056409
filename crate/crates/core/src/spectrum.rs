//! Scale-resolved error diagnostics on periodic grids.
//!
//! Error energy is |FFT(pred - truth)|^2 summed over channels, binned by
//! the integer wavenumber magnitude |k| (radial in 2D) and normalized to
//! total 1. Bins uniformly cover [0, K] where K is the largest magnitude
//! representable on the evaluation grid, so every mode lands in a bin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{dft_forward, signed_wavenumber};
use crate::grid::{BoundaryKind, Field};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralProfile {
    /// Bin edges, length `energies.len() + 1`, covering [0, K].
    pub bin_edges: Vec<f64>,
    /// Normalized error energy per bin (sums to 1 unless degenerate).
    pub energies: Vec<f64>,
    /// Set when the total error energy is numerically zero.
    pub degenerate: bool,
}

/// Largest |k| representable on the grid (Nyquist in 1D, corner radius in 2D).
pub fn max_wavenumber_magnitude(f: &Field) -> f64 {
    let sizes = f.grid().sizes();
    match sizes.len() {
        1 => (sizes[0] / 2) as f64,
        _ => {
            let kx = (sizes[0] / 2) as f64;
            let ky = (sizes[1] / 2) as f64;
            (kx * kx + ky * ky).sqrt()
        }
    }
}

fn mode_energies(pred: &Field, truth: &Field) -> Result<Vec<(f64, f64)>> {
    if pred.grid().boundary() != BoundaryKind::Periodic {
        return Err(Error::Grid("spectral profile requires a periodic grid".into()));
    }
    let err = pred.sub(truth)?;
    let coeffs = dft_forward(&err)?;
    let vals = coeffs.as_complex()?;
    let npts = err.grid().num_points();
    let sizes = err.grid().sizes().to_vec();
    let mut out = vec![(0.0, 0.0); npts];
    match sizes.len() {
        1 => {
            let n = sizes[0];
            for (i, slot) in out.iter_mut().enumerate() {
                slot.0 = signed_wavenumber(i, n).abs() as f64;
            }
        }
        _ => {
            let (nx, ny) = (sizes[0], sizes[1]);
            for ix in 0..nx {
                let kx = signed_wavenumber(ix, nx) as f64;
                for iy in 0..ny {
                    let ky = signed_wavenumber(iy, ny) as f64;
                    out[ix * ny + iy].0 = (kx * kx + ky * ky).sqrt();
                }
            }
        }
    }
    for ch in 0..err.channels() {
        for (slot, z) in out.iter_mut().zip(&vals[ch * npts..(ch + 1) * npts]) {
            slot.1 += z.norm_sqr();
        }
    }
    Ok(out)
}

pub fn spectral_error_profile(pred: &Field, truth: &Field, bins: usize) -> Result<SpectralProfile> {
    if bins == 0 {
        return Err(Error::Config("profile needs at least one bin".into()));
    }
    let modes = mode_energies(pred, truth)?;
    let kmax = max_wavenumber_magnitude(pred);
    let edges: Vec<f64> = (0..=bins).map(|i| kmax * i as f64 / bins as f64).collect();
    let mut energies = vec![0.0; bins];
    let mut total = 0.0;
    for &(k, e) in &modes {
        let mut b = ((k / kmax) * bins as f64).floor() as usize;
        if b >= bins {
            b = bins - 1;
        }
        energies[b] += e;
        total += e;
    }
    if total < 1e-300 {
        return Ok(SpectralProfile {
            bin_edges: edges,
            energies: vec![0.0; bins],
            degenerate: true,
        });
    }
    energies.iter_mut().for_each(|e| *e /= total);
    Ok(SpectralProfile {
        bin_edges: edges,
        energies,
        degenerate: false,
    })
}

/// Fraction of error energy carried by modes with |k| strictly above `k_cut`.
/// Computed mode-wise, so the answer does not depend on bin placement.
pub fn error_energy_fraction_above(pred: &Field, truth: &Field, k_cut: f64) -> Result<f64> {
    let modes = mode_energies(pred, truth)?;
    let total: f64 = modes.iter().map(|&(_, e)| e).sum();
    if total < 1e-300 {
        return Err(Error::Degenerate("zero error energy".into()));
    }
    let above: f64 = modes
        .iter()
        .filter(|&&(k, _)| k > k_cut)
        .map(|&(_, e)| e)
        .sum();
    Ok(above / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_error_lands_in_one_bin() {
        let g = GridSpec::periodic_1d(64, 1.0).unwrap();
        let truth = Field::from_fn_1d(g.clone(), |x| (2.0 * PI * x).sin()).unwrap();
        let pred = Field::from_fn_1d(g, |x| (2.0 * PI * x).sin() + 0.1 * (2.0 * PI * 20.0 * x).cos())
            .unwrap();
        let p = spectral_error_profile(&pred, &truth, 8).unwrap();
        assert!(!p.degenerate);
        // |k| = 20 over kmax = 32: bin floor(20/32*8) = 5.
        assert!((p.energies[5] - 1.0).abs() < 1e-12);
        let s: f64 = p.energies.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_error_is_degenerate() {
        let g = GridSpec::periodic_1d(32, 1.0).unwrap();
        let f = Field::from_fn_1d(g, |x| (2.0 * PI * x).cos()).unwrap();
        let p = spectral_error_profile(&f, &f, 4).unwrap();
        assert!(p.degenerate);
        assert!(p.energies.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn fraction_above_threshold() {
        let g = GridSpec::periodic_1d(128, 1.0).unwrap();
        let truth = Field::zeros(g.clone(), 1, crate::grid::ValueKind::Real);
        // Equal energy at |k| = 10 and |k| = 40.
        let pred = Field::from_fn_1d(g, |x| {
            (2.0 * PI * 10.0 * x).cos() + (2.0 * PI * 40.0 * x).cos()
        })
        .unwrap();
        let frac = error_energy_fraction_above(&pred, &truth, 32.0).unwrap();
        assert!((frac - 0.5).abs() < 1e-12);
    }

    #[test]
    fn radial_binning_in_2d() {
        let g = GridSpec::periodic_2d(32, 32, 1.0, 1.0).unwrap();
        let truth = Field::zeros(g.clone(), 1, crate::grid::ValueKind::Real);
        let pred = Field::from_fn_2d(g, |x, y| {
            (2.0 * PI * 3.0 * x).cos() * (2.0 * PI * 4.0 * y).cos()
        })
        .unwrap();
        // All error sits at |k| = 5 = sqrt(3^2+4^2).
        let frac_above = error_energy_fraction_above(&pred, &truth, 5.0).unwrap();
        assert!(frac_above < 1e-12);
        let frac_above_4 = error_energy_fraction_above(&pred, &truth, 4.9).unwrap();
        assert!((frac_above_4 - 1.0).abs() < 1e-12);
    }
}
