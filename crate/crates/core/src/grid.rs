//! Structured grids and multi-channel fields.
//!
//! A `GridSpec` describes a 1D or 2D tensor-product grid over a box.
//! Periodic grids exclude the right endpoint (spacing L/n) and require
//! power-of-two sizes so spectral transforms stay cheap; Dirichlet grids
//! include both endpoints (spacing L/(n-1)).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    sizes: Vec<usize>,
    lengths: Vec<f64>,
    boundary: BoundaryKind,
}

impl GridSpec {
    pub fn new(sizes: Vec<usize>, lengths: Vec<f64>, boundary: BoundaryKind) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > 2 {
            return Err(Error::Grid(format!(
                "dimension must be 1 or 2, got {}",
                sizes.len()
            )));
        }
        if sizes.len() != lengths.len() {
            return Err(Error::Grid(format!(
                "{} sizes but {} lengths",
                sizes.len(),
                lengths.len()
            )));
        }
        for &n in &sizes {
            if n < 8 {
                return Err(Error::Grid(format!("size {n} below minimum 8")));
            }
            if boundary == BoundaryKind::Periodic && !n.is_power_of_two() {
                return Err(Error::Grid(format!(
                    "periodic grids need power-of-two sizes, got {n}"
                )));
            }
        }
        for &l in &lengths {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::Grid(format!("length {l} must be finite and positive")));
            }
        }
        Ok(Self {
            sizes,
            lengths,
            boundary,
        })
    }

    pub fn periodic_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n], vec![length], BoundaryKind::Periodic)
    }

    pub fn periodic_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(vec![nx, ny], vec![lx, ly], BoundaryKind::Periodic)
    }

    pub fn dirichlet_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(vec![n], vec![length], BoundaryKind::Dirichlet)
    }

    pub fn dirichlet_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(vec![nx, ny], vec![lx, ly], BoundaryKind::Dirichlet)
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    pub fn num_points(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Mesh spacing along `dim`.
    pub fn spacing(&self, dim: usize) -> f64 {
        let n = self.sizes[dim] as f64;
        match self.boundary {
            BoundaryKind::Periodic => self.lengths[dim] / n,
            BoundaryKind::Dirichlet => self.lengths[dim] / (n - 1.0),
        }
    }

    /// Coordinate of node `i` along `dim`.
    pub fn coordinate(&self, dim: usize, i: usize) -> f64 {
        i as f64 * self.spacing(dim)
    }

    /// Cell volume used by discrete norms (uniform: product of spacings).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dims()).map(|d| self.spacing(d)).product()
    }

    /// Flat index of a 2D node; layout is x-major (`ix * ny + iy`).
    pub fn flat_index(&self, ix: usize, iy: usize) -> usize {
        debug_assert_eq!(self.dims(), 2);
        ix * self.sizes[1] + iy
    }

    /// True when both grids describe the same physical box (same lengths
    /// and boundary treatment), regardless of resolution.
    pub fn same_domain(&self, other: &GridSpec) -> bool {
        self.dims() == other.dims()
            && self.boundary == other.boundary
            && self
                .lengths
                .iter()
                .zip(&other.lengths)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Multi-channel sampled function on a grid. Channel-major storage:
/// `data[ch * num_points + p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    channels: usize,
    data: FieldData,
}

impl Field {
    pub fn zeros(grid: GridSpec, channels: usize, kind: ValueKind) -> Self {
        let n = grid.num_points() * channels;
        let data = match kind {
            ValueKind::Real => FieldData::Real(vec![0.0; n]),
            ValueKind::Complex => FieldData::Complex(vec![Complex64::new(0.0, 0.0); n]),
        };
        Self {
            grid,
            channels,
            data,
        }
    }

    pub fn from_real(grid: GridSpec, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points() * channels {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                grid.num_points() * channels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self {
            grid,
            channels,
            data: FieldData::Real(values),
        })
    }

    pub fn from_complex(grid: GridSpec, channels: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.num_points() * channels {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                grid.num_points() * channels,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self {
            grid,
            channels,
            data: FieldData::Complex(values),
        })
    }

    /// Sample a scalar function of the node coordinates into a 1-channel field.
    pub fn from_fn_1d(grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        if grid.dims() != 1 {
            return Err(Error::Grid("from_fn_1d needs a 1D grid".into()));
        }
        let vals: Vec<f64> = (0..grid.sizes()[0])
            .map(|i| f(grid.coordinate(0, i)))
            .collect();
        Field::from_real(grid, 1, vals)
    }

    pub fn from_fn_2d(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if grid.dims() != 2 {
            return Err(Error::Grid("from_fn_2d needs a 2D grid".into()));
        }
        let (nx, ny) = (grid.sizes()[0], grid.sizes()[1]);
        let mut vals = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                vals.push(f(grid.coordinate(0, ix), grid.coordinate(1, iy)));
            }
        }
        Field::from_real(grid, 1, vals)
    }

    pub fn from_fn_complex_1d(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        if grid.dims() != 1 {
            return Err(Error::Grid("from_fn_complex_1d needs a 1D grid".into()));
        }
        let vals: Vec<Complex64> = (0..grid.sizes()[0])
            .map(|i| f(grid.coordinate(0, i)))
            .collect();
        Field::from_complex(grid, 1, vals)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn value_kind(&self) -> ValueKind {
        match self.data {
            FieldData::Real(_) => ValueKind::Real,
            FieldData::Complex(_) => ValueKind::Complex,
        }
    }

    pub fn data(&self) -> &FieldData {
        &self.data
    }

    pub fn as_real(&self) -> Result<&[f64]> {
        match &self.data {
            FieldData::Real(v) => Ok(v),
            FieldData::Complex(_) => Err(Error::Shape("expected real field".into())),
        }
    }

    pub fn as_real_mut(&mut self) -> Result<&mut [f64]> {
        match &mut self.data {
            FieldData::Real(v) => Ok(v),
            FieldData::Complex(_) => Err(Error::Shape("expected real field".into())),
        }
    }

    pub fn as_complex(&self) -> Result<&[Complex64]> {
        match &self.data {
            FieldData::Complex(v) => Ok(v),
            FieldData::Real(_) => Err(Error::Shape("expected complex field".into())),
        }
    }

    pub fn as_complex_mut(&mut self) -> Result<&mut [Complex64]> {
        match &mut self.data {
            FieldData::Complex(v) => Ok(v),
            FieldData::Real(_) => Err(Error::Shape("expected complex field".into())),
        }
    }

    pub fn channel(&self, ch: usize) -> Result<&[f64]> {
        let n = self.grid.num_points();
        Ok(&self.as_real()?[ch * n..(ch + 1) * n])
    }

    pub fn channel_complex(&self, ch: usize) -> Result<&[Complex64]> {
        let n = self.grid.num_points();
        Ok(&self.as_complex()?[ch * n..(ch + 1) * n])
    }

    /// Field with the same grid holding one channel of `self`.
    pub fn extract_channel(&self, ch: usize) -> Result<Field> {
        if ch >= self.channels {
            return Err(Error::Shape(format!(
                "channel {ch} out of {}",
                self.channels
            )));
        }
        let n = self.grid.num_points();
        match &self.data {
            FieldData::Real(v) => {
                Field::from_real(self.grid.clone(), 1, v[ch * n..(ch + 1) * n].to_vec())
            }
            FieldData::Complex(v) => {
                Field::from_complex(self.grid.clone(), 1, v[ch * n..(ch + 1) * n].to_vec())
            }
        }
    }

    /// Stack same-grid, same-kind fields channel-wise.
    pub fn stack(parts: &[&Field]) -> Result<Field> {
        let first = parts.first().ok_or_else(|| Error::Shape("empty stack".into()))?;
        let grid = first.grid.clone();
        let kind = first.value_kind();
        let mut channels = 0;
        for p in parts {
            if p.grid != grid {
                return Err(Error::Domain("stack: grids differ".into()));
            }
            if p.value_kind() != kind {
                return Err(Error::Shape("stack: value kinds differ".into()));
            }
            channels += p.channels;
        }
        match kind {
            ValueKind::Real => {
                let mut data = Vec::with_capacity(grid.num_points() * channels);
                for p in parts {
                    data.extend_from_slice(p.as_real()?);
                }
                Field::from_real(grid, channels, data)
            }
            ValueKind::Complex => {
                let mut data = Vec::with_capacity(grid.num_points() * channels);
                for p in parts {
                    data.extend_from_slice(p.as_complex()?);
                }
                Field::from_complex(grid, channels, data)
            }
        }
    }

    /// View a real field's complex copy (imaginary part zero).
    pub fn to_complex(&self) -> Field {
        match &self.data {
            FieldData::Complex(_) => self.clone(),
            FieldData::Real(v) => Field {
                grid: self.grid.clone(),
                channels: self.channels,
                data: FieldData::Complex(v.iter().map(|&x| Complex64::new(x, 0.0)).collect()),
            },
        }
    }

    /// Real part as a real field.
    pub fn real_part(&self) -> Field {
        match &self.data {
            FieldData::Real(_) => self.clone(),
            FieldData::Complex(v) => Field {
                grid: self.grid.clone(),
                channels: self.channels,
                data: FieldData::Real(v.iter().map(|z| z.re).collect()),
            },
        }
    }

    /// Grid-weighted L2 norm over all channels: sqrt(sum |f|^2 * cell_volume).
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.cell_volume();
        let s: f64 = match &self.data {
            FieldData::Real(v) => v.iter().map(|x| x * x).sum(),
            FieldData::Complex(v) => v.iter().map(|z| z.norm_sqr()).sum(),
        };
        (s * w).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        match &self.data {
            FieldData::Real(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            FieldData::Complex(v) => v.iter().fold(0.0, |m, z| m.max(z.norm())),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.data {
            FieldData::Real(v) => v.iter().all(|x| x.is_finite()),
            FieldData::Complex(v) => v.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }

    pub fn scale(&mut self, s: f64) {
        match &mut self.data {
            FieldData::Real(v) => v.iter_mut().for_each(|x| *x *= s),
            FieldData::Complex(v) => v.iter_mut().for_each(|z| *z *= s),
        }
    }

    /// self - other, requiring identical grid, channels, and kind.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        match (&self.data, &other.data) {
            (FieldData::Real(a), FieldData::Real(b)) => Field::from_real(
                self.grid.clone(),
                self.channels,
                a.iter().zip(b).map(|(x, y)| x - y).collect(),
            ),
            (FieldData::Complex(a), FieldData::Complex(b)) => Field::from_complex(
                self.grid.clone(),
                self.channels,
                a.iter().zip(b).map(|(x, y)| x - y).collect(),
            ),
            _ => Err(Error::Shape("sub: value kinds differ".into())),
        }
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        match (&self.data, &other.data) {
            (FieldData::Real(a), FieldData::Real(b)) => Field::from_real(
                self.grid.clone(),
                self.channels,
                a.iter().zip(b).map(|(x, y)| x + y).collect(),
            ),
            (FieldData::Complex(a), FieldData::Complex(b)) => Field::from_complex(
                self.grid.clone(),
                self.channels,
                a.iter().zip(b).map(|(x, y)| x + y).collect(),
            ),
            _ => Err(Error::Shape("add: value kinds differ".into())),
        }
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Domain("fields live on different grids".into()));
        }
        if self.channels != other.channels {
            return Err(Error::Shape(format!(
                "channel mismatch: {} vs {}",
                self.channels, other.channels
            )));
        }
        Ok(())
    }
}

/// Relative L2 error ||pred - truth|| / ||truth|| with grid-weighted norms.
/// Degenerate when ||truth|| is numerically zero.
pub fn rel_l2_error(pred: &Field, truth: &Field) -> Result<f64> {
    let diff = pred.sub(truth)?;
    let denom = truth.l2_norm();
    if denom < 1e-300 {
        return Err(Error::Degenerate("rel_l2_error: zero-norm reference".into()));
    }
    Ok(diff.l2_norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_grid_rejects_non_power_of_two() {
        assert!(GridSpec::periodic_1d(96, 1.0).is_err());
        assert!(GridSpec::periodic_1d(128, 1.0).is_ok());
    }

    #[test]
    fn grid_rejects_tiny_and_bad_lengths() {
        assert!(GridSpec::periodic_1d(4, 1.0).is_err());
        assert!(GridSpec::dirichlet_1d(33, 0.0).is_err());
        assert!(GridSpec::dirichlet_1d(33, f64::NAN).is_err());
    }

    #[test]
    fn spacing_conventions() {
        let p = GridSpec::periodic_1d(8, 2.0).unwrap();
        assert_eq!(p.spacing(0), 0.25);
        let d = GridSpec::dirichlet_1d(9, 2.0).unwrap();
        assert_eq!(d.spacing(0), 0.25);
        // Dirichlet grid reaches the right endpoint, periodic stops short.
        assert_eq!(d.coordinate(0, 8), 2.0);
        assert_eq!(p.coordinate(0, 7), 1.75);
    }

    #[test]
    fn l2_norm_matches_analytic() {
        // ||sin(2 pi x)|| over [0,1) with 256 points: sqrt(1/2).
        let g = GridSpec::periodic_1d(256, 1.0).unwrap();
        let f = Field::from_fn_1d(g, |x| (2.0 * std::f64::consts::PI * x).sin()).unwrap();
        assert!((f.l2_norm() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rel_l2_error_scales() {
        let g = GridSpec::periodic_1d(64, 1.0).unwrap();
        let t = Field::from_fn_1d(g.clone(), |x| (2.0 * std::f64::consts::PI * x).cos()).unwrap();
        let mut p = t.clone();
        p.scale(1.1);
        let e = rel_l2_error(&p, &t).unwrap();
        assert!((e - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rel_l2_error_zero_reference_is_degenerate() {
        let g = GridSpec::periodic_1d(64, 1.0).unwrap();
        let z = Field::zeros(g.clone(), 1, ValueKind::Real);
        let p = Field::from_fn_1d(g, |_| 1.0).unwrap();
        assert!(rel_l2_error(&p, &z).is_err());
    }

    #[test]
    fn from_real_rejects_nan() {
        let g = GridSpec::periodic_1d(8, 1.0).unwrap();
        assert!(Field::from_real(g, 1, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn stack_and_extract_roundtrip() {
        let g = GridSpec::periodic_1d(8, 1.0).unwrap();
        let a = Field::from_fn_1d(g.clone(), |x| x).unwrap();
        let b = Field::from_fn_1d(g, |x| 2.0 * x).unwrap();
        let s = Field::stack(&[&a, &b]).unwrap();
        assert_eq!(s.channels(), 2);
        assert_eq!(s.extract_channel(0).unwrap(), a);
        assert_eq!(s.extract_channel(1).unwrap(), b);
    }
}
