//! Random problem-instance ingredients: Gaussian random fields with
//! power-law spectra, boundary traces, payoffs, and input perturbations.
//!
//! Spectral coefficients at wavenumber k carry variance (1 + |k|^2)^-alpha,
//! Nyquist rows are left empty, and every field is rescaled to a target
//! root-mean-square amplitude, so draws are band-limited and scale-stable
//! across resolutions.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft::{ifft_1d, ifft_2d, signed_wavenumber};
use crate::grid::{BoundaryKind, Field, GridSpec};
use crate::solvers::poisson::BoundaryTrace;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn sigma(ksq: f64, alpha: f64) -> f64 {
    (1.0 + ksq).powf(-alpha / 2.0)
}

fn rescale_to_rms(values: &mut [f64], amplitude: f64) -> Result<()> {
    let rms = (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt();
    if rms < 1e-30 {
        return Err(Error::Degenerate("sampled field is numerically zero".into()));
    }
    let s = amplitude / rms;
    values.iter_mut().for_each(|v| *v *= s);
    Ok(())
}

/// Real periodic random field in 1D with modes in `band` (inclusive).
pub fn sample_grf_1d(
    grid: &GridSpec,
    alpha: f64,
    amplitude: f64,
    band: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> Result<Field> {
    if grid.dims() != 1 || grid.boundary() != BoundaryKind::Periodic {
        return Err(Error::Grid("sample_grf_1d needs a 1D periodic grid".into()));
    }
    let n = grid.sizes()[0];
    let (lo, hi) = band;
    if lo == 0 || lo > hi || hi >= n / 2 {
        return Err(Error::Config(format!(
            "mode band [{lo}, {hi}] invalid for n = {n}"
        )));
    }
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for k in lo..=hi {
        let s = sigma((k * k) as f64, alpha) / std::f64::consts::SQRT_2;
        let v = Complex64::new(s * normal(rng), s * normal(rng));
        c[k] = v;
        c[n - k] = v.conj();
    }
    ifft_1d(&mut c);
    let mut vals: Vec<f64> = c.iter().map(|z| z.re).collect();
    rescale_to_rms(&mut vals, amplitude)?;
    Field::from_real(grid.clone(), 1, vals)
}

/// Complex periodic random field in 1D (independent coefficients on both
/// halves of the spectrum, so the draw has traveling components).
pub fn sample_grf_complex_1d(
    grid: &GridSpec,
    alpha: f64,
    amplitude: f64,
    max_mode: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Field> {
    if grid.dims() != 1 || grid.boundary() != BoundaryKind::Periodic {
        return Err(Error::Grid("sample_grf_complex_1d needs a 1D periodic grid".into()));
    }
    let n = grid.sizes()[0];
    if max_mode == 0 || max_mode >= n / 2 {
        return Err(Error::Config(format!("max_mode {max_mode} invalid for n = {n}")));
    }
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for (i, z) in c.iter_mut().enumerate() {
        let k = signed_wavenumber(i, n);
        if k == 0 || k.unsigned_abs() as usize > max_mode {
            continue;
        }
        let s = sigma((k * k) as f64, alpha) / std::f64::consts::SQRT_2;
        *z = Complex64::new(s * normal(rng), s * normal(rng));
    }
    ifft_1d(&mut c);
    let rms = (c.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    if rms < 1e-30 {
        return Err(Error::Degenerate("sampled field is numerically zero".into()));
    }
    let s = amplitude / rms;
    let vals: Vec<Complex64> = c.iter().map(|z| z * s).collect();
    Field::from_complex(grid.clone(), 1, vals)
}

/// Real periodic random field in 2D, radially band-limited to `max_mode`.
pub fn sample_grf_2d(
    grid: &GridSpec,
    alpha: f64,
    amplitude: f64,
    max_mode: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Field> {
    if grid.dims() != 2 || grid.boundary() != BoundaryKind::Periodic {
        return Err(Error::Grid("sample_grf_2d needs a 2D periodic grid".into()));
    }
    let (nx, ny) = (grid.sizes()[0], grid.sizes()[1]);
    if max_mode == 0 || max_mode >= nx / 2 || max_mode >= ny / 2 {
        return Err(Error::Config(format!(
            "max_mode {max_mode} invalid for {nx} x {ny}"
        )));
    }
    let mut c = vec![Complex64::new(0.0, 0.0); nx * ny];
    for ix in 0..nx {
        let kx = signed_wavenumber(ix, nx);
        for iy in 0..ny {
            let ky = signed_wavenumber(iy, ny);
            let primary = kx > 0 || (kx == 0 && ky > 0);
            if !primary {
                continue;
            }
            let ksq = (kx * kx + ky * ky) as f64;
            if ksq > (max_mode * max_mode) as f64 {
                continue;
            }
            let s = sigma(ksq, alpha) / std::f64::consts::SQRT_2;
            let v = Complex64::new(s * normal(rng), s * normal(rng));
            let mirror_x = (nx - ix) % nx;
            let mirror_y = (ny - iy) % ny;
            c[ix * ny + iy] = v;
            c[mirror_x * ny + mirror_y] = v.conj();
        }
    }
    ifft_2d(&mut c, nx, ny);
    let mut vals: Vec<f64> = c.iter().map(|z| z.re).collect();
    rescale_to_rms(&mut vals, amplitude)?;
    Field::from_real(grid.clone(), 1, vals)
}

/// Random field on a Dirichlet grid: a stationary periodic field on a
/// doubled, power-of-two extension restricted to the box. Used for
/// coefficients and sources, which carry no boundary conditions.
pub fn sample_grf_dirichlet(
    grid: &GridSpec,
    alpha: f64,
    amplitude: f64,
    max_mode: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Field> {
    if grid.boundary() != BoundaryKind::Dirichlet {
        return Err(Error::Grid("sample_grf_dirichlet needs a Dirichlet grid".into()));
    }
    let ext_size = |n: usize| (2 * (n - 1)).next_power_of_two();
    match grid.dims() {
        1 => {
            let n = grid.sizes()[0];
            let m = ext_size(n);
            let ext = GridSpec::periodic_1d(m, m as f64 * grid.spacing(0))?;
            let f = sample_grf_1d(&ext, alpha, amplitude, (1, max_mode), rng)?;
            let v = f.as_real()?;
            Field::from_real(grid.clone(), 1, v[..n].to_vec())
        }
        _ => {
            let (nx, ny) = (grid.sizes()[0], grid.sizes()[1]);
            let (mx, my) = (ext_size(nx), ext_size(ny));
            let ext = GridSpec::periodic_2d(
                mx,
                my,
                mx as f64 * grid.spacing(0),
                my as f64 * grid.spacing(1),
            )?;
            let f = sample_grf_2d(&ext, alpha, amplitude, max_mode, rng)?;
            let v = f.as_real()?;
            let mut vals = Vec::with_capacity(nx * ny);
            for ix in 0..nx {
                for iy in 0..ny {
                    vals.push(v[ix * my + iy]);
                }
            }
            Field::from_real(grid.clone(), 1, vals)
        }
    }
}

/// Smooth random boundary values for a 2D Dirichlet box, built as a
/// band-limited Fourier series in arclength around the perimeter loop, so
/// the four edge traces agree at the corners by construction. `band` counts
/// loop modes (the box perimeter is roughly four edge lengths, so edge-wise
/// oscillation is about a quarter of the loop mode).
pub fn sample_boundary_loop(
    grid: &GridSpec,
    alpha: f64,
    amplitude: f64,
    band: (usize, usize),
    rng: &mut ChaCha8Rng,
) -> Result<BoundaryTrace> {
    if grid.dims() != 2 || grid.boundary() != BoundaryKind::Dirichlet {
        return Err(Error::Grid("boundary loop needs a 2D Dirichlet grid".into()));
    }
    let (lo, hi) = band;
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!("loop band [{lo}, {hi}] invalid")));
    }
    let (nx, ny) = (grid.sizes()[0], grid.sizes()[1]);
    let (lx, ly) = (grid.lengths()[0], grid.lengths()[1]);
    let perimeter = 2.0 * (lx + ly);

    let mut coeffs = Vec::with_capacity(hi - lo + 1);
    for k in lo..=hi {
        let s = sigma((k * k) as f64, alpha);
        coeffs.push((k, s * normal(rng), s * normal(rng)));
    }
    let eval = |t: f64| -> f64 {
        let mut v = 0.0;
        for &(k, a, b) in &coeffs {
            let th = 2.0 * std::f64::consts::PI * k as f64 * t / perimeter;
            v += a * th.cos() + b * th.sin();
        }
        v
    };

    // Walk the loop: bottom, right edge, top (reversed), left edge (reversed).
    let mut trace = BoundaryTrace {
        bottom: (0..nx).map(|ix| eval(grid.coordinate(0, ix))).collect(),
        right: (0..ny).map(|iy| eval(lx + grid.coordinate(1, iy))).collect(),
        top: (0..nx)
            .map(|ix| eval(lx + ly + (lx - grid.coordinate(0, ix))))
            .collect(),
        left: (0..ny)
            .map(|iy| eval(2.0 * lx + ly + (ly - grid.coordinate(1, iy))))
            .collect(),
    };
    // Arclength wraps at the bottom-left corner; pin the duplicate endpoint.
    trace.left[0] = trace.bottom[0];

    let all: Vec<f64> = trace
        .bottom
        .iter()
        .chain(&trace.right)
        .chain(&trace.top)
        .chain(&trace.left)
        .copied()
        .collect();
    let rms = (all.iter().map(|v| v * v).sum::<f64>() / all.len() as f64).sqrt();
    if rms < 1e-30 {
        return Err(Error::Degenerate("sampled trace is numerically zero".into()));
    }
    let s = amplitude / rms;
    for edge in [
        &mut trace.bottom,
        &mut trace.right,
        &mut trace.top,
        &mut trace.left,
    ] {
        edge.iter_mut().for_each(|v| *v *= s);
    }
    Ok(trace)
}

/// Independent white Gaussian noise added to every component of `f`,
/// scaled so its norm is `rel_amplitude` times the norm of `f`.
pub fn perturb_input(f: &Field, rel_amplitude: f64, rng: &mut ChaCha8Rng) -> Result<Field> {
    if !(rel_amplitude > 0.0 && rel_amplitude <= 0.1) {
        return Err(Error::Config(format!(
            "relative amplitude must lie in (0, 0.1], got {rel_amplitude}"
        )));
    }
    let base = f.l2_norm();
    if base < 1e-300 {
        return Err(Error::Degenerate("cannot scale noise against a zero field".into()));
    }
    match f.data() {
        crate::grid::FieldData::Real(v) => {
            let noise: Vec<f64> = v.iter().map(|_| normal(rng)).collect();
            let nn = {
                let sq: f64 = noise.iter().map(|x| x * x).sum();
                (sq * f.grid().cell_volume()).sqrt()
            };
            let s = rel_amplitude * base / nn;
            let out: Vec<f64> = v.iter().zip(&noise).map(|(x, e)| x + s * e).collect();
            Field::from_real(f.grid().clone(), f.channels(), out)
        }
        crate::grid::FieldData::Complex(v) => {
            let noise: Vec<Complex64> = v
                .iter()
                .map(|_| Complex64::new(normal(rng), normal(rng)))
                .collect();
            let nn = {
                let sq: f64 = noise.iter().map(|z| z.norm_sqr()).sum();
                (sq * f.grid().cell_volume()).sqrt()
            };
            let s = rel_amplitude * base / nn;
            let out: Vec<Complex64> = v.iter().zip(&noise).map(|(x, e)| x + e * s).collect();
            Field::from_complex(f.grid().clone(), f.channels(), out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn rng(label: u64) -> ChaCha8Rng {
        seeds::rng_from(&[900, label])
    }

    #[test]
    fn grf_is_deterministic_per_seed() {
        let g = GridSpec::periodic_1d(64, 1.0).unwrap();
        let a = sample_grf_1d(&g, 2.0, 1.0, (1, 8), &mut rng(1)).unwrap();
        let b = sample_grf_1d(&g, 2.0, 1.0, (1, 8), &mut rng(1)).unwrap();
        assert_eq!(a, b);
        let c = sample_grf_1d(&g, 2.0, 1.0, (1, 8), &mut rng(2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn grf_rms_matches_amplitude() {
        let g = GridSpec::periodic_2d(32, 32, 1.0, 1.0).unwrap();
        let f = sample_grf_2d(&g, 2.5, 0.7, 10, &mut rng(3)).unwrap();
        let v = f.as_real().unwrap();
        let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        assert!((rms - 0.7).abs() < 1e-12);
    }

    #[test]
    fn grf_band_is_respected() {
        let g = GridSpec::periodic_1d(128, 1.0).unwrap();
        let f = sample_grf_1d(&g, 2.0, 1.0, (16, 32), &mut rng(4)).unwrap();
        let c = crate::fft::dft_forward(&f).unwrap();
        let vals = c.as_complex().unwrap();
        for (i, z) in vals.iter().enumerate() {
            let k = signed_wavenumber(i, 128).unsigned_abs() as usize;
            if !(16..=32).contains(&k) {
                assert!(z.norm() < 1e-9, "leakage at k = {k}: {}", z.norm());
            }
        }
    }

    #[test]
    fn grf_spectrum_decays_with_alpha() {
        // Average energy over many draws: low band should dominate high band
        // by roughly (k_hi/k_lo)^(2 alpha).
        let g = GridSpec::periodic_1d(128, 1.0).unwrap();
        let mut low = 0.0;
        let mut high = 0.0;
        for i in 0..200 {
            let f = sample_grf_1d(&g, 2.0, 1.0, (1, 40), &mut rng(100 + i)).unwrap();
            let c = crate::fft::dft_forward(&f).unwrap();
            let vals = c.as_complex().unwrap();
            low += vals[2].norm_sqr();
            high += vals[32].norm_sqr();
        }
        let ratio = low / high;
        // sigma(2)^2 / sigma(32)^2 = (1025/5)^2 ~ 4.2e4; rescaling adds noise,
        // so only the order of magnitude is pinned.
        assert!(ratio > 1e3, "ratio {ratio}");
    }

    #[test]
    fn dirichlet_field_has_no_bc_bias() {
        let g = GridSpec::dirichlet_2d(33, 33, 1.0, 1.0).unwrap();
        let f = sample_grf_dirichlet(&g, 2.0, 1.0, 8, &mut rng(5)).unwrap();
        // Boundary values are generic, not forced to zero.
        let v = f.as_real().unwrap();
        let edge_rms = (0..33).map(|iy| v[iy] * v[iy]).sum::<f64>() / 33.0;
        assert!(edge_rms.sqrt() > 0.05);
    }

    #[test]
    fn boundary_loop_corners_consistent() {
        let g = GridSpec::dirichlet_2d(33, 17, 1.0, 0.5).unwrap();
        let t = sample_boundary_loop(&g, 1.5, 1.0, (1, 8), &mut rng(6)).unwrap();
        assert!((t.bottom[32] - t.right[0]).abs() < 1e-9);
        assert!((t.right[16] - t.top[32]).abs() < 1e-9);
        assert!((t.top[0] - t.left[16]).abs() < 1e-9);
        assert!((t.left[0] - t.bottom[0]).abs() < 1e-9);
    }

    #[test]
    fn perturbation_norm_is_exact() {
        let g = GridSpec::periodic_1d(64, 1.0).unwrap();
        let f = sample_grf_1d(&g, 2.0, 1.0, (1, 8), &mut rng(7)).unwrap();
        let p = perturb_input(&f, 0.02, &mut rng(8)).unwrap();
        let diff = p.sub(&f).unwrap();
        let rel = diff.l2_norm() / f.l2_norm();
        assert!((rel - 0.02).abs() < 1e-12, "rel {rel}");
    }
}
