//! Reverse-mode differentiation of the operator.
//!
//! Each forward primitive has its adjoint applied in reverse order. The
//! transform adjoints follow from the unnormalized-forward / normalized-
//! inverse convention: the adjoint of truncate(FFT(h)) pads the cotangent
//! with zeros and applies the unnormalized inverse transform (real part),
//! and the adjoint of Re(IFFT(scatter(Y))) is Ybar[k] = Z[k] + conj(Z[n-k])
//! with Z = FFT(ybar) / n. Complex weight cotangents use Wbar = Ybar conj(X)
//! and Xbar = conj(W) Ybar.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::AxisFft;
use crate::grid::{Field, ValueKind};

use super::forward::{axis_plans, forward_cached, AxisPlan, CoeffBlock, ForwardCache};
use super::{gelu, gelu_prime, FnoParams};

/// Gradient of a scalar loss with respect to every parameter, plus the
/// cotangent pulled back to the input field. The forward pass is recomputed
/// internally; see `backward_from_cache` to reuse one.
pub fn backward(
    params: &FnoParams,
    input: &Field,
    output_cotangent: &Field,
) -> Result<(Vec<f64>, Field)> {
    let (_, cache) = forward_cached(params, input)?;
    backward_from_cache(params, &cache, output_cotangent)
}

/// gdst[c][cin] += sum_p gout[c][p] src[cin][p]
fn weight_grad(out_ch: usize, in_ch: usize, npts: usize, gout: &[f64], src: &[f64], gdst: &mut [f64]) {
    for c in 0..out_ch {
        let go = &gout[c * npts..(c + 1) * npts];
        for cin in 0..in_ch {
            let s = &src[cin * npts..(cin + 1) * npts];
            let mut acc = 0.0;
            for p in 0..npts {
                acc += go[p] * s[p];
            }
            gdst[c * in_ch + cin] += acc;
        }
    }
}

/// gsrc[cin][p] += sum_c w[c][cin] gout[c][p]
fn input_grad(out_ch: usize, in_ch: usize, npts: usize, w: &[f64], gout: &[f64], gsrc: &mut [f64]) {
    for c in 0..out_ch {
        let go = &gout[c * npts..(c + 1) * npts];
        for cin in 0..in_ch {
            let a = w[c * in_ch + cin];
            if a == 0.0 {
                continue;
            }
            let gs = &mut gsrc[cin * npts..(cin + 1) * npts];
            for p in 0..npts {
                gs[p] += a * go[p];
            }
        }
    }
}

fn bias_grad(out_ch: usize, npts: usize, gout: &[f64], gdst: &mut [f64]) {
    for c in 0..out_ch {
        gdst[c] += gout[c * npts..(c + 1) * npts].iter().sum::<f64>();
    }
}

/// Adjoint of scatter + Re(IFFT): Ybar[k] = Z[k] + conj(Z[n-k]), Z = FFT(gz)/n.
fn cotangent_spectra(
    axis: &AxisPlan,
    width: usize,
    m: usize,
    npts: usize,
    gz: &[f64],
    fft: &mut AxisFft,
    out: &mut CoeffBlock,
) {
    let n = axis.n;
    let lines = axis.lines;
    let inv_n = 1.0 / n as f64;
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..width {
        let base = c * npts;
        for j in 0..lines {
            let start = base + j * axis.line_step;
            for (i, z) in scratch.iter_mut().enumerate() {
                *z = Complex64::new(gz[start + i * axis.stride], 0.0);
            }
            fft.forward(&mut scratch);
            for k in 0..m {
                let mut v = scratch[k];
                if k >= 1 {
                    v += scratch[n - k].conj();
                }
                let idx = (c * m + k) * lines + j;
                out.re[idx] = v.re * inv_n;
                out.im[idx] = v.im * inv_n;
            }
        }
    }
}

/// Weight cotangent: g[c][cin][k] += sum_j ybar[c][k][j] conj(x[cin][k][j]).
fn spectral_weight_grad(
    width: usize,
    m: usize,
    lines: usize,
    ybar: &CoeffBlock,
    x: &CoeffBlock,
    gre: &mut [f64],
    gim: &mut [f64],
) {
    for c in 0..width {
        for cin in 0..width {
            let wbase = (c * width + cin) * m;
            for k in 0..m {
                let yoff = (c * m + k) * lines;
                let xoff = (cin * m + k) * lines;
                let (yr, yi) = (&ybar.re[yoff..yoff + lines], &ybar.im[yoff..yoff + lines]);
                let (xr, xi) = (&x.re[xoff..xoff + lines], &x.im[xoff..xoff + lines]);
                let mut ar = 0.0;
                let mut ai = 0.0;
                for j in 0..lines {
                    ar += yr[j] * xr[j] + yi[j] * xi[j];
                    ai += yi[j] * xr[j] - yr[j] * xi[j];
                }
                gre[wbase + k] += ar;
                gim[wbase + k] += ai;
            }
        }
    }
}

/// Input cotangent of the mixing: xbar[cin][k][j] = sum_c conj(w[c][cin][k]) ybar[c][k][j].
fn mix_modes_adjoint(
    width: usize,
    m: usize,
    lines: usize,
    wre: &[f64],
    wim: &[f64],
    ybar: &CoeffBlock,
    xbar: &mut CoeffBlock,
) {
    xbar.re.iter_mut().for_each(|v| *v = 0.0);
    xbar.im.iter_mut().for_each(|v| *v = 0.0);
    for cin in 0..width {
        for c in 0..width {
            let wbase = (c * width + cin) * m;
            for k in 0..m {
                let ar = wre[wbase + k];
                let ai = wim[wbase + k];
                if ar == 0.0 && ai == 0.0 {
                    continue;
                }
                let yoff = (c * m + k) * lines;
                let xoff = (cin * m + k) * lines;
                let (yr, yi) = (&ybar.re[yoff..yoff + lines], &ybar.im[yoff..yoff + lines]);
                let xr = &mut xbar.re[xoff..xoff + lines];
                let xi = &mut xbar.im[xoff..xoff + lines];
                for j in 0..lines {
                    xr[j] += ar * yr[j] + ai * yi[j];
                    xi[j] += ar * yi[j] - ai * yr[j];
                }
            }
        }
    }
}

/// Adjoint of gather + truncate: pad xbar with zeros and apply the
/// unnormalized inverse transform, accumulating the real part.
fn scatter_adjoint(
    axis: &AxisPlan,
    width: usize,
    m: usize,
    npts: usize,
    xbar: &CoeffBlock,
    fft: &mut AxisFft,
    dst: &mut [f64],
) {
    let n = axis.n;
    let lines = axis.lines;
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..width {
        let base = c * npts;
        for j in 0..lines {
            scratch.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for k in 0..m {
                let idx = (c * m + k) * lines + j;
                scratch[k] = Complex64::new(xbar.re[idx], xbar.im[idx]);
            }
            fft.adjoint(&mut scratch);
            let start = base + j * axis.line_step;
            for (i, z) in scratch.iter().enumerate() {
                dst[start + i * axis.stride] += z.re;
            }
        }
    }
}

pub fn backward_from_cache(
    params: &FnoParams,
    cache: &ForwardCache,
    output_cotangent: &Field,
) -> Result<(Vec<f64>, Field)> {
    let cfg = params.cfg();
    let data = params.as_flat();
    let layout = params.layout();
    let npts = cache.grid.num_points();
    let w = cfg.width;
    let m = cfg.modes;

    if output_cotangent.grid() != &cache.grid {
        return Err(Error::Domain("cotangent grid does not match the forward grid".into()));
    }
    if output_cotangent.channels() != cfg.out_channels
        || output_cotangent.value_kind() != ValueKind::Real
    {
        return Err(Error::Shape("cotangent must be real with out_channels channels".into()));
    }

    let plans = axis_plans(&cache.grid);
    let mut ffts: Vec<AxisFft> = plans.iter().map(|p| AxisFft::new(p.n)).collect();
    let mut g = vec![0.0; layout.total];
    let gout = output_cotangent.as_real()?;

    // Projection backward.
    let hid = cfg.hidden;
    let p1a: Vec<f64> = cache.p1.iter().map(|&v| gelu(v)).collect();
    bias_grad(cfg.out_channels, npts, gout, &mut g[layout.proj2_b..layout.proj2_b + cfg.out_channels]);
    weight_grad(
        cfg.out_channels,
        hid,
        npts,
        gout,
        &p1a,
        &mut g[layout.proj2_w..layout.proj2_w + cfg.out_channels * hid],
    );
    let mut gp1 = vec![0.0; hid * npts];
    input_grad(
        cfg.out_channels,
        hid,
        npts,
        &data[layout.proj2_w..layout.proj2_w + cfg.out_channels * hid],
        gout,
        &mut gp1,
    );
    for (v, &pre) in gp1.iter_mut().zip(&cache.p1) {
        *v *= gelu_prime(pre);
    }
    bias_grad(hid, npts, &gp1, &mut g[layout.proj1_b..layout.proj1_b + hid]);
    weight_grad(
        hid,
        w,
        npts,
        &gp1,
        &cache.h[cfg.n_layers],
        &mut g[layout.proj1_w..layout.proj1_w + hid * w],
    );
    let mut gh = vec![0.0; w * npts];
    input_grad(
        hid,
        w,
        npts,
        &data[layout.proj1_w..layout.proj1_w + hid * w],
        &gp1,
        &mut gh,
    );

    // Blocks in reverse.
    for l in (0..cfg.n_layers).rev() {
        let z = &cache.z[l];
        let hl = &cache.h[l];
        let mut gz = gh;
        for (v, &pre) in gz.iter_mut().zip(z) {
            *v *= gelu_prime(pre);
        }

        let (pw, pb) = layout.point[l];
        bias_grad(w, npts, &gz, &mut g[pb..pb + w]);
        weight_grad(w, w, npts, &gz, hl, &mut g[pw..pw + w * w]);
        let mut gh_prev = vec![0.0; w * npts];
        input_grad(w, w, npts, &data[pw..pw + w * w], &gz, &mut gh_prev);

        for (d, axis) in plans.iter().enumerate() {
            let lines = axis.lines;
            let mut ybar = CoeffBlock::zeros(w * m * lines);
            cotangent_spectra(axis, w, m, npts, &gz, &mut ffts[d], &mut ybar);

            let (re_off, im_off) = layout.spectral[l][d];
            let blk = w * w * m;
            {
                let (gre, gim) = {
                    let (a, b) = g.split_at_mut(im_off);
                    (&mut a[re_off..re_off + blk], &mut b[..blk])
                };
                spectral_weight_grad(w, m, lines, &ybar, &cache.coeffs[l][d], gre, gim);
            }

            let mut xbar = CoeffBlock::zeros(w * m * lines);
            mix_modes_adjoint(
                w,
                m,
                lines,
                &data[re_off..re_off + blk],
                &data[im_off..im_off + blk],
                &ybar,
                &mut xbar,
            );
            scatter_adjoint(axis, w, m, npts, &xbar, &mut ffts[d], &mut gh_prev);
        }

        gh = gh_prev;
    }

    // Lifting backward.
    bias_grad(w, npts, &gh, &mut g[layout.lift_b..layout.lift_b + w]);
    weight_grad(
        w,
        cfg.in_channels,
        npts,
        &gh,
        &cache.input,
        &mut g[layout.lift_w..layout.lift_w + w * cfg.in_channels],
    );
    let mut gin = vec![0.0; cfg.in_channels * npts];
    input_grad(
        w,
        cfg.in_channels,
        npts,
        &data[layout.lift_w..layout.lift_w + w * cfg.in_channels],
        &gh,
        &mut gin,
    );

    let input_cot = Field::from_real(cache.grid.clone(), cfg.in_channels, gin)?;
    Ok((g, input_cot))
}
