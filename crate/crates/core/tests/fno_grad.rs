//! Gradient correctness for the operator.
//!
//! Two independent checks:
//! - central finite differences of a scalar head against the analytic
//!   gradient, over many random directions and layer configurations;
//! - an adjoint (dot-product) identity <c, J v> = <J^T c, v>, where the
//!   Jacobian-vector product comes from a dual-number re-implementation of
//!   the forward pass written from the documented parameter layout, with
//!   plain O(n^2) DFTs. The oracle shares no code with the production path.

use rand::Rng;
use stresslab_core::fno::{
    backward, forward, init_params, param_count, FnoConfig, FnoParams,
};
use stresslab_core::grid::{Field, GridSpec, ValueKind};
use stresslab_core::seeds;

// ---------------------------------------------------------------------------
// Dual numbers: value plus one directional derivative.

#[derive(Clone, Copy, Debug)]
struct D {
    v: f64,
    t: f64,
}

impl D {
    fn new(v: f64) -> Self {
        D { v, t: 0.0 }
    }
    fn add(self, o: D) -> D {
        D { v: self.v + o.v, t: self.t + o.t }
    }
    fn sub(self, o: D) -> D {
        D { v: self.v - o.v, t: self.t - o.t }
    }
    fn mul(self, o: D) -> D {
        D { v: self.v * o.v, t: self.v * o.t + self.t * o.v }
    }
    fn scale(self, c: f64) -> D {
        D { v: c * self.v, t: c * self.t }
    }
    fn tanh(self) -> D {
        let th = self.v.tanh();
        D { v: th, t: self.t * (1.0 - th * th) }
    }
}

fn gelu_dual(x: D) -> D {
    const C: f64 = 0.7978845608028654;
    const A: f64 = 0.044715;
    let x3 = x.mul(x).mul(x);
    let inner = x.add(x3.scale(A)).scale(C).tanh();
    x.scale(0.5).mul(inner.add(D::new(1.0)))
}

// ---------------------------------------------------------------------------
// Parameter layout, re-derived from its documentation: lifting weights and
// bias; per layer, per dimension a real and an imaginary w*w*modes block,
// then pointwise weights and bias; finally the two projection pairs.

struct Off {
    lift_w: usize,
    lift_b: usize,
    spectral: Vec<Vec<(usize, usize)>>,
    point: Vec<(usize, usize)>,
    p1w: usize,
    p1b: usize,
    p2w: usize,
    p2b: usize,
    total: usize,
}

fn offsets(cfg: &FnoConfig) -> Off {
    let w = cfg.width;
    let blk = w * w * cfg.modes;
    let mut off = 0;
    let mut take = |n: usize| {
        let o = off;
        off += n;
        o
    };
    let lift_w = take(w * cfg.in_channels);
    let lift_b = take(w);
    let mut spectral = Vec::new();
    let mut point = Vec::new();
    for _ in 0..cfg.n_layers {
        let mut per_dim = Vec::new();
        for _ in 0..cfg.dims {
            let re = take(blk);
            let im = take(blk);
            per_dim.push((re, im));
        }
        spectral.push(per_dim);
        point.push((take(w * w), take(w)));
    }
    let p1w = take(cfg.hidden * w);
    let p1b = take(cfg.hidden);
    let p2w = take(cfg.out_channels * cfg.hidden);
    let p2b = take(cfg.out_channels);
    Off {
        lift_w,
        lift_b,
        spectral,
        point,
        p1w,
        p1b,
        p2w,
        p2b,
        total: off,
    }
}

struct Axis {
    n: usize,
    stride: usize,
    lines: usize,
    line_step: usize,
}

fn axes(sizes: &[usize]) -> Vec<Axis> {
    match sizes {
        [n] => vec![Axis { n: *n, stride: 1, lines: 1, line_step: 0 }],
        [nx, ny] => vec![
            Axis { n: *nx, stride: *ny, lines: *ny, line_step: 1 },
            Axis { n: *ny, stride: 1, lines: *nx, line_step: *ny },
        ],
        _ => unreachable!(),
    }
}

/// dst[c][p] = b[c] + sum_i w[c*in+i] src[i][p]
fn affine_dual(
    out_ch: usize,
    in_ch: usize,
    npts: usize,
    w: &[D],
    b: &[D],
    src: &[D],
    dst: &mut Vec<D>,
) {
    dst.clear();
    for c in 0..out_ch {
        for p in 0..npts {
            let mut acc = b[c];
            for i in 0..in_ch {
                acc = acc.add(w[c * in_ch + i].mul(src[i * npts + p]));
            }
            dst.push(acc);
        }
    }
}

/// Oracle forward pass over dual numbers. `params` and `input` carry the
/// direction in their tangent slots.
fn oracle_forward(cfg: &FnoConfig, params: &[D], input: &[D], sizes: &[usize]) -> Vec<D> {
    let off = offsets(cfg);
    assert_eq!(off.total, params.len());
    let npts: usize = sizes.iter().product();
    let w = cfg.width;
    let m = cfg.modes;
    let plans = axes(sizes);

    let mut h = Vec::new();
    affine_dual(
        w,
        cfg.in_channels,
        npts,
        &params[off.lift_w..off.lift_w + w * cfg.in_channels],
        &params[off.lift_b..off.lift_b + w],
        input,
        &mut h,
    );

    for l in 0..cfg.n_layers {
        let (pw, pb) = off.point[l];
        let mut z = Vec::new();
        affine_dual(w, w, npts, &params[pw..pw + w * w], &params[pb..pb + w], &h, &mut z);

        for (d, axis) in plans.iter().enumerate() {
            let (re_off, im_off) = off.spectral[l][d];
            let n = axis.n;
            // Spectra of every channel/line: [c][k][j], k < m.
            let mut xr = vec![D::new(0.0); w * m * axis.lines];
            let mut xi = vec![D::new(0.0); w * m * axis.lines];
            for c in 0..w {
                for j in 0..axis.lines {
                    let start = c * npts + j * axis.line_step;
                    for k in 0..m {
                        let mut sr = D::new(0.0);
                        let mut si = D::new(0.0);
                        for i in 0..n {
                            let ang = -2.0 * std::f64::consts::PI * (i * k) as f64 / n as f64;
                            let u = h[start + i * axis.stride];
                            sr = sr.add(u.scale(ang.cos()));
                            si = si.add(u.scale(ang.sin()));
                        }
                        xr[(c * m + k) * axis.lines + j] = sr;
                        xi[(c * m + k) * axis.lines + j] = si;
                    }
                }
            }
            // Channel mixing with the complex weights.
            let mut yr = vec![D::new(0.0); w * m * axis.lines];
            let mut yi = vec![D::new(0.0); w * m * axis.lines];
            for c in 0..w {
                for cin in 0..w {
                    for k in 0..m {
                        let ar = params[re_off + (c * w + cin) * m + k];
                        let ai = params[im_off + (c * w + cin) * m + k];
                        for j in 0..axis.lines {
                            let xo = (cin * m + k) * axis.lines + j;
                            let yo = (c * m + k) * axis.lines + j;
                            let (vr, vi) = (xr[xo], xi[xo]);
                            yr[yo] = yr[yo].add(ar.mul(vr)).sub(ai.mul(vi));
                            yi[yo] = yi[yo].add(ar.mul(vi)).add(ai.mul(vr));
                        }
                    }
                }
            }
            // Hermitian reflection and normalized inverse transform; the
            // real part accumulates into the pre-activation.
            for c in 0..w {
                for j in 0..axis.lines {
                    let mut sr = vec![D::new(0.0); n];
                    let mut si = vec![D::new(0.0); n];
                    for k in 0..m {
                        let yo = (c * m + k) * axis.lines + j;
                        sr[k] = sr[k].add(yr[yo]);
                        si[k] = si[k].add(yi[yo]);
                        if k >= 1 {
                            sr[n - k] = sr[n - k].add(yr[yo]);
                            si[n - k] = si[n - k].sub(yi[yo]);
                        }
                    }
                    let start = c * npts + j * axis.line_step;
                    for i in 0..n {
                        let mut acc = D::new(0.0);
                        for k in 0..n {
                            let ang = 2.0 * std::f64::consts::PI * (i * k) as f64 / n as f64;
                            acc = acc.add(sr[k].scale(ang.cos())).sub(si[k].scale(ang.sin()));
                        }
                        let p = start + i * axis.stride;
                        z[p] = z[p].add(acc.scale(1.0 / n as f64));
                    }
                }
            }
        }
        h = z.iter().map(|&v| gelu_dual(v)).collect();
    }

    let mut p1 = Vec::new();
    affine_dual(
        cfg.hidden,
        w,
        npts,
        &params[off.p1w..off.p1w + cfg.hidden * w],
        &params[off.p1b..off.p1b + cfg.hidden],
        &h,
        &mut p1,
    );
    let p1a: Vec<D> = p1.iter().map(|&v| gelu_dual(v)).collect();
    let mut out = Vec::new();
    affine_dual(
        cfg.out_channels,
        cfg.hidden,
        npts,
        &params[off.p2w..off.p2w + cfg.out_channels * cfg.hidden],
        &params[off.p2b..off.p2b + cfg.out_channels],
        &p1a,
        &mut out,
    );
    out
}

// ---------------------------------------------------------------------------
// Shared scaffolding.

fn test_grid(dims: usize) -> GridSpec {
    match dims {
        1 => GridSpec::periodic_1d(16, 1.0).unwrap(),
        _ => GridSpec::periodic_2d(8, 8, 1.0, 1.0).unwrap(),
    }
}

fn small_cfg(dims: usize, n_layers: usize) -> FnoConfig {
    let mut cfg = FnoConfig::new(dims, 2, 2);
    cfg.width = 4;
    cfg.modes = 3;
    cfg.hidden = 5;
    cfg.n_layers = n_layers;
    cfg
}

fn random_field(grid: &GridSpec, channels: usize, label: u64) -> Field {
    let mut rng = seeds::rng_from(&[1000, label]);
    let vals: Vec<f64> = (0..channels * grid.num_points())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Field::from_real(grid.clone(), channels, vals).unwrap()
}

fn unit_direction(n: usize, label: u64) -> Vec<f64> {
    let mut rng = seeds::rng_from(&[1001, label]);
    let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    d.iter_mut().for_each(|v| *v /= norm);
    d
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// phi(theta) = <c, F_theta(x)>
fn head(params: &FnoParams, x: &Field, c: &[f64]) -> f64 {
    let y = forward(params, x).unwrap();
    dot(y.as_real().unwrap(), c)
}

/// Fourth-order central difference; random unit directions in a
/// thousand-dimensional space are nearly orthogonal to the gradient, so the
/// second-order stencil's cancellation noise would swamp the derivative.
fn fd4(phi: impl Fn(f64) -> f64, eps: f64) -> f64 {
    (-phi(2.0 * eps) + 8.0 * phi(eps) - 8.0 * phi(-eps) + phi(-2.0 * eps)) / (12.0 * eps)
}

// ---------------------------------------------------------------------------

#[test]
fn oracle_forward_matches_production() {
    for dims in [1, 2] {
        let cfg = small_cfg(dims, 2);
        let grid = test_grid(dims);
        let params = init_params(&cfg, 11).unwrap();
        let x = random_field(&grid, cfg.in_channels, dims as u64);

        let y = forward(&params, &x).unwrap();
        let pd: Vec<D> = params.as_flat().iter().map(|&v| D::new(v)).collect();
        let xd: Vec<D> = x.as_real().unwrap().iter().map(|&v| D::new(v)).collect();
        let yo = oracle_forward(&cfg, &pd, &xd, grid.sizes());

        let yv = y.as_real().unwrap();
        assert_eq!(yv.len(), yo.len());
        let scale = yv.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in yv.iter().zip(&yo) {
            assert!(
                (a - b.v).abs() <= 1e-11 * scale.max(1.0),
                "dims {dims}: {a} vs {}",
                b.v
            );
        }
    }
}

#[test]
fn adjoint_identity_against_oracle_jvp() {
    // <c, J v> from the dual-number oracle equals <J^T c, v> from the
    // production backward pass, for both input and parameter directions.
    for dims in [1, 2] {
        for n_layers in [1, 2] {
            let cfg = small_cfg(dims, n_layers);
            let grid = test_grid(dims);
            let params = init_params(&cfg, 21 + n_layers as u64).unwrap();
            let x = random_field(&grid, cfg.in_channels, 40 + dims as u64);
            let npts = grid.num_points();
            let n_out = cfg.out_channels * npts;
            let n_in = cfg.in_channels * npts;
            let n_par = param_count(&cfg);

            for trial in 0..5u64 {
                let cvec = unit_direction(n_out, 100 + trial);
                let cot = Field::from_real(grid.clone(), cfg.out_channels, cvec.clone()).unwrap();
                let (grad, x_cot) = backward(&params, &x, &cot).unwrap();

                // Input direction.
                let dx = unit_direction(n_in, 200 + trial);
                let pd: Vec<D> = params.as_flat().iter().map(|&v| D::new(v)).collect();
                let xd: Vec<D> = x
                    .as_real()
                    .unwrap()
                    .iter()
                    .zip(&dx)
                    .map(|(&v, &t)| D { v, t })
                    .collect();
                let jv = oracle_forward(&cfg, &pd, &xd, grid.sizes());
                let lhs: f64 = jv.iter().zip(&cvec).map(|(y, c)| y.t * c).sum();
                let rhs = dot(x_cot.as_real().unwrap(), &dx);
                let denom = lhs.abs().max(rhs.abs()).max(1e-30);
                assert!(
                    (lhs - rhs).abs() / denom < 1e-10,
                    "input dir, dims {dims} layers {n_layers}: {lhs} vs {rhs}"
                );

                // Parameter direction.
                let dp = unit_direction(n_par, 300 + trial);
                let pd: Vec<D> = params
                    .as_flat()
                    .iter()
                    .zip(&dp)
                    .map(|(&v, &t)| D { v, t })
                    .collect();
                let xd: Vec<D> = x.as_real().unwrap().iter().map(|&v| D::new(v)).collect();
                let jv = oracle_forward(&cfg, &pd, &xd, grid.sizes());
                let lhs: f64 = jv.iter().zip(&cvec).map(|(y, c)| y.t * c).sum();
                let rhs = dot(&grad, &dp);
                let denom = lhs.abs().max(rhs.abs()).max(1e-30);
                assert!(
                    (lhs - rhs).abs() / denom < 1e-10,
                    "param dir, dims {dims} layers {n_layers}: {lhs} vs {rhs}"
                );
            }
        }
    }
}

#[test]
fn finite_differences_confirm_parameter_gradients() {
    let eps = 1e-3;
    for dims in [1, 2] {
        for n_layers in [1, 2, 4] {
            let cfg = small_cfg(dims, n_layers);
            let grid = test_grid(dims);
            let params = init_params(&cfg, 31 + n_layers as u64).unwrap();
            let x = random_field(&grid, cfg.in_channels, 60 + dims as u64);
            let npts = grid.num_points();
            let cvec = unit_direction(cfg.out_channels * npts, 500 + dims as u64);
            let cot = Field::from_real(grid.clone(), cfg.out_channels, cvec.clone()).unwrap();
            let (grad, _) = backward(&params, &x, &cot).unwrap();
            let n_par = param_count(&cfg);

            for trial in 0..50u64 {
                let d = unit_direction(n_par, 1000 * dims as u64 + 10 * n_layers as u64 + trial);
                let analytic = dot(&grad, &d);

                let fd = fd4(
                    |s| {
                        let shifted: Vec<f64> = params
                            .as_flat()
                            .iter()
                            .zip(&d)
                            .map(|(v, t)| v + s * t)
                            .collect();
                        head(&FnoParams::from_flat(cfg.clone(), shifted).unwrap(), &x, &cvec)
                    },
                    eps,
                );

                let denom = analytic.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (fd - analytic).abs() / denom < 1e-5,
                    "dims {dims} layers {n_layers} trial {trial}: fd {fd} vs {analytic}"
                );
            }
        }
    }
}

#[test]
fn finite_differences_confirm_input_gradients() {
    let eps = 1e-3;
    for dims in [1, 2] {
        for n_layers in [1, 2, 4] {
            let cfg = small_cfg(dims, n_layers);
            let grid = test_grid(dims);
            let params = init_params(&cfg, 41 + n_layers as u64).unwrap();
            let x = random_field(&grid, cfg.in_channels, 80 + dims as u64);
            let npts = grid.num_points();
            let n_in = cfg.in_channels * npts;
            let cvec = unit_direction(cfg.out_channels * npts, 600 + dims as u64);
            let cot = Field::from_real(grid.clone(), cfg.out_channels, cvec.clone()).unwrap();
            let (_, x_cot) = backward(&params, &x, &cot).unwrap();
            let xg = x_cot.as_real().unwrap();

            for trial in 0..25u64 {
                let d = unit_direction(n_in, 2000 * dims as u64 + 10 * n_layers as u64 + trial);
                let analytic = dot(xg, &d);

                let xv = x.as_real().unwrap();
                let fd = fd4(
                    |s| {
                        let shifted: Vec<f64> =
                            xv.iter().zip(&d).map(|(v, t)| v + s * t).collect();
                        head(
                            &params,
                            &Field::from_real(grid.clone(), cfg.in_channels, shifted).unwrap(),
                            &cvec,
                        )
                    },
                    eps,
                );

                let denom = analytic.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (fd - analytic).abs() / denom < 1e-5,
                    "dims {dims} layers {n_layers} trial {trial}: fd {fd} vs {analytic}"
                );
            }
        }
    }
}

#[test]
fn gradients_vanish_only_for_zero_cotangent() {
    let cfg = small_cfg(1, 2);
    let grid = test_grid(1);
    let params = init_params(&cfg, 51).unwrap();
    let x = random_field(&grid, cfg.in_channels, 90);
    let zero = Field::zeros(grid.clone(), cfg.out_channels, ValueKind::Real);
    let (grad, x_cot) = backward(&params, &x, &zero).unwrap();
    assert!(grad.iter().all(|&g| g == 0.0));
    assert!(x_cot.as_real().unwrap().iter().all(|&g| g == 0.0));

    let cvec = unit_direction(cfg.out_channels * grid.num_points(), 91);
    let cot = Field::from_real(grid.clone(), cfg.out_channels, cvec).unwrap();
    let (grad, _) = backward(&params, &x, &cot).unwrap();
    assert!(grad.iter().any(|&g| g != 0.0));
}
