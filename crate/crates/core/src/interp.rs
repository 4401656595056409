//! Resolution transfer between grids over the same physical domain.
//!
//! Periodic fields are resampled spectrally (exact for band-limited data up
//! to the coarser Nyquist); Dirichlet fields use natural cubic splines along
//! each axis. The Nyquist coefficient is split symmetrically on upsampling
//! and the +-Nyquist pair is collapsed on downsampling, so up-then-down is
//! the identity.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft_1d, fft_2d, ifft_1d, ifft_2d};
use crate::grid::{BoundaryKind, Field, GridSpec, ValueKind};

pub fn interpolate(f: &Field, target: &GridSpec) -> Result<Field> {
    if !f.grid().same_domain(target) {
        return Err(Error::Domain(format!(
            "interpolate: source domain {:?}/{:?} does not match target {:?}/{:?}",
            f.grid().lengths(),
            f.grid().boundary(),
            target.lengths(),
            target.boundary()
        )));
    }
    if f.grid().sizes() == target.sizes() {
        return Ok(f.clone());
    }
    match f.grid().boundary() {
        BoundaryKind::Periodic => spectral_resample(f, target),
        BoundaryKind::Dirichlet => spline_resample(f, target),
    }
}

/// (dst, src, weight) coefficient moves for a 1D spectrum resize n -> m.
fn resize_map(n: usize, m: usize) -> Vec<(usize, usize, f64)> {
    let mut map = Vec::new();
    if m == n {
        for k in 0..n {
            map.push((k, k, 1.0));
        }
    } else if m > n {
        for k in 0..n / 2 {
            map.push((k, k, 1.0));
        }
        for j in 1..n / 2 {
            map.push((m - j, n - j, 1.0));
        }
        map.push((n / 2, n / 2, 0.5));
        map.push((m - n / 2, n / 2, 0.5));
    } else {
        for k in 0..m / 2 {
            map.push((k, k, 1.0));
        }
        for j in 1..m / 2 {
            map.push((m - j, n - j, 1.0));
        }
        map.push((m / 2, m / 2, 1.0));
        map.push((m / 2, n - m / 2, 1.0));
    }
    map
}

fn spectral_resample(f: &Field, target: &GridSpec) -> Result<Field> {
    let src_grid = f.grid();
    let npts_src = src_grid.num_points();
    let npts_dst = target.num_points();
    let complex_in = f.value_kind() == ValueKind::Complex;
    let src = f.to_complex();
    let vals = src.as_complex()?;

    let scale = npts_dst as f64 / npts_src as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); npts_dst * f.channels()];

    match src_grid.dims() {
        1 => {
            let (n, m) = (src_grid.sizes()[0], target.sizes()[0]);
            let map = resize_map(n, m);
            for ch in 0..f.channels() {
                let mut buf = vals[ch * npts_src..(ch + 1) * npts_src].to_vec();
                fft_1d(&mut buf);
                let mut res = vec![Complex64::new(0.0, 0.0); m];
                for &(d, s, w) in &map {
                    res[d] += buf[s] * w;
                }
                ifft_1d(&mut res);
                for (o, z) in out[ch * npts_dst..(ch + 1) * npts_dst]
                    .iter_mut()
                    .zip(&res)
                {
                    *o = z * scale;
                }
            }
        }
        _ => {
            let (nx, ny) = (src_grid.sizes()[0], src_grid.sizes()[1]);
            let (mx, my) = (target.sizes()[0], target.sizes()[1]);
            let map_x = resize_map(nx, mx);
            let map_y = resize_map(ny, my);
            for ch in 0..f.channels() {
                let mut buf = vals[ch * npts_src..(ch + 1) * npts_src].to_vec();
                fft_2d(&mut buf, nx, ny);
                let mut res = vec![Complex64::new(0.0, 0.0); mx * my];
                for &(dx, sx, wx) in &map_x {
                    for &(dy, sy, wy) in &map_y {
                        res[dx * my + dy] += buf[sx * ny + sy] * (wx * wy);
                    }
                }
                ifft_2d(&mut res, mx, my);
                for (o, z) in out[ch * npts_dst..(ch + 1) * npts_dst]
                    .iter_mut()
                    .zip(&res)
                {
                    *o = z * scale;
                }
            }
        }
    }

    let result = Field::from_complex(target.clone(), f.channels(), out)?;
    if complex_in {
        Ok(result)
    } else {
        Ok(result.real_part())
    }
}

/// Natural cubic spline through (x_i, y_i); returns second derivatives.
fn spline_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Tridiagonal system for interior second derivatives, natural ends.
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    diag[0] = 1.0;
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    diag[n - 1] = 1.0;
    // Thomas sweep with lower[i] = h0 for interior rows.
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = 0.0;
    d[0] = 0.0;
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let denom = diag[i] - h0 * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - h0 * d[i - 1]) / denom;
    }
    d[n - 1] = 0.0;
    m[n - 1] = 0.0;
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m[0] = 0.0;
    m
}

fn spline_eval(xs: &[f64], ys: &[f64], m: &[f64], x: f64) -> f64 {
    let n = xs.len();
    // Locate the interval; clamp to the domain ends.
    let mut lo = 0;
    let mut hi = n - 1;
    if x <= xs[0] {
        hi = 1;
    } else if x >= xs[n - 1] {
        lo = n - 2;
    } else {
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if xs[mid] > x {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let h = xs[hi] - xs[lo];
    let a = (xs[hi] - x) / h;
    let b = (x - xs[lo]) / h;
    a * ys[lo]
        + b * ys[hi]
        + ((a * a * a - a) * m[lo] + (b * b * b - b) * m[hi]) * (h * h) / 6.0
}

fn spline_resample_axis(values: &[f64], xs_src: &[f64], xs_dst: &[f64]) -> Vec<f64> {
    let m = spline_second_derivatives(xs_src, values);
    xs_dst
        .iter()
        .map(|&x| spline_eval(xs_src, values, &m, x))
        .collect()
}

fn axis_coords(g: &GridSpec, dim: usize) -> Vec<f64> {
    (0..g.sizes()[dim]).map(|i| g.coordinate(dim, i)).collect()
}

fn spline_resample(f: &Field, target: &GridSpec) -> Result<Field> {
    if f.value_kind() != ValueKind::Real {
        return Err(Error::Shape(
            "spline interpolation supports real fields only".into(),
        ));
    }
    let src_grid = f.grid();
    let mut out = Vec::with_capacity(target.num_points() * f.channels());
    match src_grid.dims() {
        1 => {
            let xs = axis_coords(src_grid, 0);
            let xt = axis_coords(target, 0);
            for ch in 0..f.channels() {
                out.extend(spline_resample_axis(f.channel(ch)?, &xs, &xt));
            }
        }
        _ => {
            let (nx, ny) = (src_grid.sizes()[0], src_grid.sizes()[1]);
            let (mx, my) = (target.sizes()[0], target.sizes()[1]);
            let xs = axis_coords(src_grid, 0);
            let ys = axis_coords(src_grid, 1);
            let xt = axis_coords(target, 0);
            let yt = axis_coords(target, 1);
            for ch in 0..f.channels() {
                let v = f.channel(ch)?;
                // Along y for every source row, then along x for every target column.
                let mut mid = vec![0.0; nx * my];
                for ix in 0..nx {
                    let row: Vec<f64> = (0..ny).map(|iy| v[ix * ny + iy]).collect();
                    let res = spline_resample_axis(&row, &ys, &yt);
                    mid[ix * my..(ix + 1) * my].copy_from_slice(&res);
                }
                let mut chan = vec![0.0; mx * my];
                for iy in 0..my {
                    let col: Vec<f64> = (0..nx).map(|ix| mid[ix * my + iy]).collect();
                    let res = spline_resample_axis(&col, &xs, &xt);
                    for ix in 0..mx {
                        chan[ix * my + iy] = res[ix];
                    }
                }
                out.extend(chan);
            }
        }
    }
    Field::from_real(target.clone(), f.channels(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_when_target_equals_source() {
        let g = GridSpec::periodic_1d(64, 1.0).unwrap();
        let f = Field::from_fn_1d(g.clone(), |x| (2.0 * PI * x).sin()).unwrap();
        let r = interpolate(&f, &g).unwrap();
        assert_eq!(r, f);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let g = GridSpec::periodic_1d(64, 1.0).unwrap();
        let t = GridSpec::periodic_1d(128, 2.0).unwrap();
        let f = Field::from_fn_1d(g, |x| x).unwrap();
        assert!(interpolate(&f, &t).is_err());
    }

    #[test]
    fn band_limited_upsample_is_exact() {
        let g = GridSpec::periodic_1d(64, 2.0).unwrap();
        let t = GridSpec::periodic_1d(256, 2.0).unwrap();
        let f = |x: f64| (2.0 * PI * 5.0 * x / 2.0).sin() + 0.5 * (2.0 * PI * 11.0 * x / 2.0).cos();
        let coarse = Field::from_fn_1d(g, f).unwrap();
        let fine = interpolate(&coarse, &t).unwrap();
        let want = Field::from_fn_1d(t, f).unwrap();
        let err = fine.sub(&want).unwrap().l2_norm() / want.l2_norm();
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn band_limited_downsample_is_exact() {
        let g = GridSpec::periodic_1d(256, 1.0).unwrap();
        let t = GridSpec::periodic_1d(64, 1.0).unwrap();
        let f = |x: f64| (2.0 * PI * 7.0 * x).cos() - 2.0 * (2.0 * PI * 13.0 * x).sin();
        let fine = Field::from_fn_1d(g, f).unwrap();
        let coarse = interpolate(&fine, &t).unwrap();
        let want = Field::from_fn_1d(t, f).unwrap();
        let err = coarse.sub(&want).unwrap().l2_norm() / want.l2_norm();
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn up_then_down_roundtrips() {
        let g = GridSpec::periodic_1d(32, 1.0).unwrap();
        let f = Field::from_fn_1d(g.clone(), |x| {
            (2.0 * PI * 9.0 * x).sin() + (2.0 * PI * 16.0 * x).cos()
        })
        .unwrap();
        let t = GridSpec::periodic_1d(128, 1.0).unwrap();
        let up = interpolate(&f, &t).unwrap();
        let back = interpolate(&up, &g).unwrap();
        let err = back.sub(&f).unwrap().l2_norm() / f.l2_norm();
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn spectral_2d_band_limited_exact() {
        let g = GridSpec::periodic_2d(32, 32, 2.0 * PI, 2.0 * PI).unwrap();
        let t = GridSpec::periodic_2d(64, 64, 2.0 * PI, 2.0 * PI).unwrap();
        let f = |x: f64, y: f64| (3.0 * x).cos() * (5.0 * y).sin() + (x + 0.0 * y).sin();
        let coarse = Field::from_fn_2d(g, f).unwrap();
        let fine = interpolate(&coarse, &t).unwrap();
        let want = Field::from_fn_2d(t, f).unwrap();
        let err = fine.sub(&want).unwrap().l2_norm() / want.l2_norm();
        assert!(err < 1e-11, "err {err}");
    }

    #[test]
    fn complex_field_resample() {
        let g = GridSpec::periodic_1d(64, 2.0 * PI).unwrap();
        let t = GridSpec::periodic_1d(128, 2.0 * PI).unwrap();
        let f = |x: f64| Complex64::new((3.0 * x).cos(), (2.0 * x).sin());
        let coarse = Field::from_fn_complex_1d(g, f).unwrap();
        let fine = interpolate(&coarse, &t).unwrap();
        let want = Field::from_fn_complex_1d(t, f).unwrap();
        let err = fine.sub(&want).unwrap().l2_norm() / want.l2_norm();
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn spline_constant_preserved() {
        let g = GridSpec::dirichlet_2d(17, 17, 1.0, 1.0).unwrap();
        let t = GridSpec::dirichlet_2d(33, 33, 1.0, 1.0).unwrap();
        let f = Field::from_fn_2d(g, |_, _| 3.5).unwrap();
        let r = interpolate(&f, &t).unwrap();
        for &v in r.as_real().unwrap() {
            assert!((v - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_accuracy_on_smooth_function() {
        // sin(pi x) sin(pi y) has zero second derivative at the boundary,
        // so the natural spline converges at full order.
        let g = GridSpec::dirichlet_2d(33, 33, 1.0, 1.0).unwrap();
        let t = GridSpec::dirichlet_2d(65, 65, 1.0, 1.0).unwrap();
        let f = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let coarse = Field::from_fn_2d(g, f).unwrap();
        let fine = interpolate(&coarse, &t).unwrap();
        let want = Field::from_fn_2d(t, f).unwrap();
        let err = fine.sub(&want).unwrap().l2_norm() / want.l2_norm();
        assert!(err < 1e-5, "err {err}");
    }

    #[test]
    fn spline_nested_nodes_exact() {
        let g = GridSpec::dirichlet_1d(33, 1.0).unwrap();
        let t = GridSpec::dirichlet_1d(65, 1.0).unwrap();
        let f = Field::from_fn_1d(g.clone(), |x| x * x * (1.0 - x)).unwrap();
        let fine = interpolate(&f, &t).unwrap();
        let vals = fine.as_real().unwrap();
        let src = f.as_real().unwrap();
        // Even target nodes coincide with source nodes.
        for i in 0..33 {
            assert!((vals[2 * i] - src[i]).abs() < 1e-12);
        }
    }
}
