//! Forward evaluation of the operator, retaining the intermediate buffers
//! the backward pass consumes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::AxisFft;
use crate::grid::{Field, GridSpec, ValueKind};

use super::{gelu, FnoConfig, FnoParams};

/// Transform geometry for one grid axis: lines of length `n` at `stride`,
/// one per `j` in `0..lines`, starting at `j * line_step`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisPlan {
    pub n: usize,
    pub stride: usize,
    pub lines: usize,
    pub line_step: usize,
}

pub(crate) fn axis_plans(grid: &GridSpec) -> Vec<AxisPlan> {
    match grid.dims() {
        1 => vec![AxisPlan {
            n: grid.sizes()[0],
            stride: 1,
            lines: 1,
            line_step: 0,
        }],
        _ => {
            let (nx, ny) = (grid.sizes()[0], grid.sizes()[1]);
            vec![
                AxisPlan {
                    n: nx,
                    stride: ny,
                    lines: ny,
                    line_step: 1,
                },
                AxisPlan {
                    n: ny,
                    stride: 1,
                    lines: nx,
                    line_step: ny,
                },
            ]
        }
    }
}

/// Truncated spectra stored split re/im, laid out `[channel][mode][line]`
/// with the line index contiguous.
#[derive(Debug, Clone)]
pub(crate) struct CoeffBlock {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl CoeffBlock {
    pub fn zeros(len: usize) -> Self {
        Self {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }
}

/// Everything the backward pass needs from one forward evaluation.
pub struct ForwardCache {
    pub(crate) grid: GridSpec,
    pub(crate) input: Vec<f64>,
    /// Block inputs; `h[0]` is the lifted field, `h[n_layers]` feeds the projection.
    pub(crate) h: Vec<Vec<f64>>,
    /// Pre-activation of each block.
    pub(crate) z: Vec<Vec<f64>>,
    /// Truncated input spectra per block and axis.
    pub(crate) coeffs: Vec<Vec<CoeffBlock>>,
    /// Pre-activation of the projection hidden layer.
    pub(crate) p1: Vec<f64>,
}

/// dst[c][p] = bias[c] + sum_cin w[c][cin] src[cin][p]
pub(crate) fn pointwise_affine(
    out_ch: usize,
    in_ch: usize,
    npts: usize,
    w: &[f64],
    bias: Option<&[f64]>,
    src: &[f64],
    dst: &mut [f64],
) {
    for c in 0..out_ch {
        let row = &mut dst[c * npts..(c + 1) * npts];
        let b = bias.map_or(0.0, |b| b[c]);
        row.iter_mut().for_each(|v| *v = b);
        for cin in 0..in_ch {
            let a = w[c * in_ch + cin];
            if a == 0.0 {
                continue;
            }
            let s = &src[cin * npts..(cin + 1) * npts];
            for (v, x) in row.iter_mut().zip(s) {
                *v += a * x;
            }
        }
    }
}

/// Gather every line of `src` along `axis`, transform, and keep the first
/// `m` coefficients of each in `out` (layout [c][k][j]).
pub(crate) fn gather_spectra(
    axis: &AxisPlan,
    width: usize,
    m: usize,
    npts: usize,
    src: &[f64],
    fft: &mut AxisFft,
    out: &mut CoeffBlock,
) {
    let lines = axis.lines;
    let mut scratch = vec![Complex64::new(0.0, 0.0); axis.n];
    for c in 0..width {
        let base = c * npts;
        for j in 0..lines {
            let start = base + j * axis.line_step;
            for (i, z) in scratch.iter_mut().enumerate() {
                *z = Complex64::new(src[start + i * axis.stride], 0.0);
            }
            fft.forward(&mut scratch);
            for k in 0..m {
                let idx = (c * m + k) * lines + j;
                out.re[idx] = scratch[k].re;
                out.im[idx] = scratch[k].im;
            }
        }
    }
}

/// y[c][k][j] = sum_cin w[c][cin][k] x[cin][k][j] (complex).
pub(crate) fn mix_modes(
    width: usize,
    m: usize,
    lines: usize,
    wre: &[f64],
    wim: &[f64],
    x: &CoeffBlock,
    y: &mut CoeffBlock,
) {
    y.re.iter_mut().for_each(|v| *v = 0.0);
    y.im.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..width {
        for cin in 0..width {
            let wbase = (c * width + cin) * m;
            for k in 0..m {
                let ar = wre[wbase + k];
                let ai = wim[wbase + k];
                if ar == 0.0 && ai == 0.0 {
                    continue;
                }
                let xoff = (cin * m + k) * lines;
                let yoff = (c * m + k) * lines;
                let (xr, xi) = (&x.re[xoff..xoff + lines], &x.im[xoff..xoff + lines]);
                let yr = &mut y.re[yoff..yoff + lines];
                let yi = &mut y.im[yoff..yoff + lines];
                for j in 0..lines {
                    yr[j] += ar * xr[j] - ai * xi[j];
                    yi[j] += ar * xi[j] + ai * xr[j];
                }
            }
        }
    }
}

/// Rebuild a full spectrum from `m` retained coefficients with Hermitian
/// reflection, inverse-transform, and add the real part into `dst`.
pub(crate) fn scatter_accumulate(
    axis: &AxisPlan,
    width: usize,
    m: usize,
    npts: usize,
    y: &CoeffBlock,
    fft: &mut AxisFft,
    dst: &mut [f64],
) {
    let lines = axis.lines;
    let n = axis.n;
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..width {
        let base = c * npts;
        for j in 0..lines {
            scratch.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for k in 0..m {
                let idx = (c * m + k) * lines + j;
                let v = Complex64::new(y.re[idx], y.im[idx]);
                scratch[k] += v;
                if k >= 1 {
                    scratch[n - k] += v.conj();
                }
            }
            fft.inverse(&mut scratch);
            let start = base + j * axis.line_step;
            for (i, z) in scratch.iter().enumerate() {
                dst[start + i * axis.stride] += z.re;
            }
        }
    }
}

fn field_to_buffer(cfg: &FnoConfig, input: &Field) -> Result<Vec<f64>> {
    if input.channels() != cfg.in_channels {
        return Err(Error::Shape(format!(
            "model expects {} input channels, field has {}",
            cfg.in_channels,
            input.channels()
        )));
    }
    if input.value_kind() != ValueKind::Real {
        return Err(Error::Shape("operator input must be a real field".into()));
    }
    cfg.check_grid(input.grid())?;
    Ok(input.as_real()?.to_vec())
}

pub fn forward_cached(params: &FnoParams, input: &Field) -> Result<(Field, ForwardCache)> {
    let cfg = params.cfg();
    let data = params.as_flat();
    let layout = params.layout();
    let grid = input.grid().clone();
    let npts = grid.num_points();
    let w = cfg.width;
    let m = cfg.modes;
    let plans = axis_plans(&grid);
    let mut ffts: Vec<AxisFft> = plans.iter().map(|p| AxisFft::new(p.n)).collect();

    let in_buf = field_to_buffer(cfg, input)?;

    let mut h = Vec::with_capacity(cfg.n_layers + 1);
    let mut lifted = vec![0.0; w * npts];
    pointwise_affine(
        w,
        cfg.in_channels,
        npts,
        &data[layout.lift_w..layout.lift_w + w * cfg.in_channels],
        Some(&data[layout.lift_b..layout.lift_b + w]),
        &in_buf,
        &mut lifted,
    );
    h.push(lifted);

    let mut zs = Vec::with_capacity(cfg.n_layers);
    let mut coeffs = Vec::with_capacity(cfg.n_layers);

    for l in 0..cfg.n_layers {
        let hl = &h[l];
        let mut z = vec![0.0; w * npts];
        // Pointwise skip with bias.
        let (pw, pb) = layout.point[l];
        pointwise_affine(
            w,
            w,
            npts,
            &data[pw..pw + w * w],
            Some(&data[pb..pb + w]),
            hl,
            &mut z,
        );
        // Factorized spectral path, one axis at a time.
        let mut layer_coeffs = Vec::with_capacity(plans.len());
        for (d, axis) in plans.iter().enumerate() {
            let lines = axis.lines;
            let mut x = CoeffBlock::zeros(w * m * lines);
            gather_spectra(axis, w, m, npts, hl, &mut ffts[d], &mut x);
            let (re_off, im_off) = layout.spectral[l][d];
            let blk = w * w * m;
            let mut y = CoeffBlock::zeros(w * m * lines);
            mix_modes(
                w,
                m,
                lines,
                &data[re_off..re_off + blk],
                &data[im_off..im_off + blk],
                &x,
                &mut y,
            );
            scatter_accumulate(axis, w, m, npts, &y, &mut ffts[d], &mut z);
            layer_coeffs.push(x);
        }
        coeffs.push(layer_coeffs);

        let mut next = vec![0.0; w * npts];
        for (o, &v) in next.iter_mut().zip(&z) {
            *o = gelu(v);
        }
        zs.push(z);
        h.push(next);
    }

    // Projection: width -> hidden -> out, GeLU between.
    let hid = cfg.hidden;
    let mut p1 = vec![0.0; hid * npts];
    pointwise_affine(
        hid,
        w,
        npts,
        &data[layout.proj1_w..layout.proj1_w + hid * w],
        Some(&data[layout.proj1_b..layout.proj1_b + hid]),
        &h[cfg.n_layers],
        &mut p1,
    );
    let p1a: Vec<f64> = p1.iter().map(|&v| gelu(v)).collect();
    let mut out = vec![0.0; cfg.out_channels * npts];
    pointwise_affine(
        cfg.out_channels,
        hid,
        npts,
        &data[layout.proj2_w..layout.proj2_w + cfg.out_channels * hid],
        Some(&data[layout.proj2_b..layout.proj2_b + cfg.out_channels]),
        &p1a,
        &mut out,
    );

    let out_field = Field::from_real(grid.clone(), cfg.out_channels, out)?;
    let cache = ForwardCache {
        grid,
        input: in_buf,
        h,
        z: zs,
        coeffs,
        p1,
    };
    Ok((out_field, cache))
}

pub fn forward(params: &FnoParams, input: &Field) -> Result<Field> {
    forward_cached(params, input).map(|(f, _)| f)
}
