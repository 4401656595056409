//! Discrete Fourier transforms on periodic grids.
//!
//! Convention: forward transform is unnormalized, the inverse carries the
//! 1/n factor, so `inverse(forward(f)) == f` up to rounding. Coefficient
//! index k maps to the signed integer wavenumber k for k <= n/2 and k - n
//! above; the physical wavenumber is 2*pi*k_signed / L.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Field, GridSpec, ValueKind};

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Reusable transform pair for one length, with preallocated scratch.
/// Used in hot loops that transform many lines of the same length.
pub(crate) struct AxisFft {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    inv_n: f64,
}

impl AxisFft {
    pub fn new(n: usize) -> Self {
        let fwd = plan(n, false);
        let inv = plan(n, true);
        let need = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); need],
            inv_n: 1.0 / n as f64,
        }
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        buf.iter_mut().for_each(|z| *z *= self.inv_n);
    }

    /// Inverse transform without the 1/n factor (the plain adjoint of the
    /// forward transform).
    pub fn adjoint(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
    }
}

/// In-place unnormalized forward FFT of a length-n buffer.
pub fn fft_1d(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// In-place inverse FFT with the 1/n factor applied.
pub fn ifft_1d(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, true).process(buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= s);
}

/// In-place 2D forward FFT of an x-major `nx x ny` buffer.
pub fn fft_2d(buf: &mut [Complex64], nx: usize, ny: usize) {
    transform_2d(buf, nx, ny, false);
}

/// In-place 2D inverse FFT with the 1/(nx*ny) factor applied.
pub fn ifft_2d(buf: &mut [Complex64], nx: usize, ny: usize) {
    transform_2d(buf, nx, ny, true);
    let s = 1.0 / (nx * ny) as f64;
    buf.iter_mut().for_each(|z| *z *= s);
}

fn transform_2d(buf: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), nx * ny);
    // Rows along y are contiguous in x-major layout.
    let plan_y = plan(ny, inverse);
    for row in buf.chunks_exact_mut(ny) {
        plan_y.process(row);
    }
    // Columns along x via transpose, row FFTs, transpose back.
    let mut scratch = vec![Complex64::new(0.0, 0.0); nx * ny];
    transpose(buf, &mut scratch, nx, ny);
    let plan_x = plan(nx, inverse);
    for row in scratch.chunks_exact_mut(nx) {
        plan_x.process(row);
    }
    transpose(&scratch, buf, ny, nx);
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Signed integer wavenumber for coefficient index `i` of an n-point transform.
pub fn signed_wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Physical wavenumbers 2*pi*k/L for every coefficient index.
pub fn physical_wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::PI / length;
    (0..n)
        .map(|i| scale * signed_wavenumber(i, n) as f64)
        .collect()
}

fn require_periodic(f: &Field) -> Result<()> {
    if f.grid().boundary() != BoundaryKind::Periodic {
        return Err(Error::Grid("transform requires a periodic grid".into()));
    }
    Ok(())
}

/// Per-channel forward DFT of a field; output is complex on the same grid.
pub fn dft_forward(f: &Field) -> Result<Field> {
    require_periodic(f)?;
    let g = f.grid().clone();
    let npts = g.num_points();
    let src = f.to_complex();
    let vals = src.as_complex()?;
    let mut out = vec![Complex64::new(0.0, 0.0); vals.len()];
    for ch in 0..f.channels() {
        let mut buf = vals[ch * npts..(ch + 1) * npts].to_vec();
        match g.dims() {
            1 => fft_1d(&mut buf),
            _ => fft_2d(&mut buf, g.sizes()[0], g.sizes()[1]),
        }
        out[ch * npts..(ch + 1) * npts].copy_from_slice(&buf);
    }
    Field::from_complex(g, f.channels(), out)
}

/// Per-channel inverse DFT (with 1/n normalization); output is complex.
pub fn dft_inverse(f: &Field) -> Result<Field> {
    require_periodic(f)?;
    if f.value_kind() != ValueKind::Complex {
        return Err(Error::Shape("dft_inverse expects complex coefficients".into()));
    }
    let g = f.grid().clone();
    let npts = g.num_points();
    let vals = f.as_complex()?;
    let mut out = vec![Complex64::new(0.0, 0.0); vals.len()];
    for ch in 0..f.channels() {
        let mut buf = vals[ch * npts..(ch + 1) * npts].to_vec();
        match g.dims() {
            1 => ifft_1d(&mut buf),
            _ => ifft_2d(&mut buf, g.sizes()[0], g.sizes()[1]),
        }
        out[ch * npts..(ch + 1) * npts].copy_from_slice(&buf);
    }
    Field::from_complex(g, f.channels(), out)
}

#[allow(dead_code)]
pub(crate) fn grid_of(sizes: &[usize], lengths: &[f64]) -> GridSpec {
    GridSpec::new(sizes.to_vec(), lengths.to_vec(), BoundaryKind::Periodic).unwrap()
}
