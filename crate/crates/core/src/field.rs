//! Sampled complex fields, analytic beam sources, and modal
//! decomposition/synthesis over the guided LP basis.
//!
//! All integrals use the midpoint rule on a uniform, origin-centred grid
//! with square pixels.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fiber::{FiberSpec, LpMode};
use crate::special::{factorial, laguerre};
use crate::{Error, Result, Scalar};

/// Uniform sampling grid centred on the optical axis. `extent` is the
/// physical width along x; pixels are square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub width: usize,
    pub height: usize,
    pub extent: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(width: usize, height: usize, extent: T) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
        }
        if !(extent > T::zero()) || !extent.is_finite() {
            return Err(Error::InvalidParameter("grid extent must be positive".into()));
        }
        Ok(Grid {
            width,
            height,
            extent,
        })
    }

    /// Square `n × n` grid.
    pub fn square(n: usize, extent: T) -> Result<Self> {
        Self::new(n, n, extent)
    }

    pub fn pitch(&self) -> T {
        self.extent / T::from_usize_lossy(self.width)
    }

    pub fn extent_y(&self) -> T {
        self.pitch() * T::from_usize_lossy(self.height)
    }

    pub fn cell_area(&self) -> T {
        let p = self.pitch();
        p * p
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical coordinates of pixel `(col, row)`; row 0 is the top edge.
    pub fn coords(&self, col: usize, row: usize) -> (T, T) {
        let p = self.pitch();
        let half = T::lit(0.5);
        let x = (T::from_usize_lossy(col) + half - T::from_usize_lossy(self.width) * half) * p;
        let y = (T::from_usize_lossy(self.height) * half - T::from_usize_lossy(row) - half) * p;
        (x, y)
    }
}

/// Anything that can be evaluated as a complex amplitude at a point.
pub trait FieldSource<T: Scalar>: Sync {
    fn eval(&self, x: T, y: T) -> Complex<T>;
}

impl<T: Scalar, S: FieldSource<T> + ?Sized> FieldSource<T> for &S {
    fn eval(&self, x: T, y: T) -> Complex<T> {
        (**self).eval(x, y)
    }
}

/// Laguerre-Gaussian beam at its waist, analytically unit-power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgBeam<T> {
    pub charge: i32,
    pub radial: u32,
    pub waist: T,
}

impl<T: Scalar> LgBeam<T> {
    pub fn new(charge: i32, radial: u32, waist: T) -> Result<Self> {
        if !(waist > T::zero()) {
            return Err(Error::InvalidParameter("beam waist must be positive".into()));
        }
        Ok(LgBeam {
            charge,
            radial,
            waist,
        })
    }

    fn norm(&self) -> T {
        let l = self.charge.unsigned_abs();
        let num: T = T::lit(2.0) * factorial::<T>(self.radial);
        let den: T = T::PI() * factorial::<T>(self.radial + l);
        (num / den).sqrt() / self.waist
    }
}

impl<T: Scalar> FieldSource<T> for LgBeam<T> {
    fn eval(&self, x: T, y: T) -> Complex<T> {
        let l = self.charge.unsigned_abs();
        let r2 = (x * x + y * y) / (self.waist * self.waist);
        let s = (T::lit(2.0) * r2).sqrt();
        let amp = self.norm()
            * s.powi(l as i32)
            * laguerre(self.radial, T::from_u32(l).unwrap(), T::lit(2.0) * r2)
            * (-r2).exp();
        // (−ℓ)·φ == −(ℓ·φ) exactly, so ±ℓ intensities agree bit for bit
        let phase = T::from_i32_lossy(self.charge) * y.atan2(x);
        Complex::new(amp * phase.cos(), amp * phase.sin())
    }
}

/// Weighted sum of LG beams.
#[derive(Debug, Clone, PartialEq)]
pub struct Superposition<T> {
    pub terms: Vec<(Complex<T>, LgBeam<T>)>,
}

impl<T: Scalar> Superposition<T> {
    /// Equal amplitudes, zero relative phase, unit total power. An empty
    /// charge list yields the zero field.
    pub fn equal(charges: &[i32], waist: T) -> Result<Self> {
        let n = charges.len();
        let amp = if n == 0 {
            T::zero()
        } else {
            T::one() / T::from_usize_lossy(n).sqrt()
        };
        let terms = charges
            .iter()
            .map(|&c| Ok((Complex::new(amp, T::zero()), LgBeam::new(c, 0, waist)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Superposition { terms })
    }
}

impl<T: Scalar> FieldSource<T> for Superposition<T> {
    fn eval(&self, x: T, y: T) -> Complex<T> {
        self.terms
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, (c, b)| {
                acc + *c * b.eval(x, y)
            })
    }
}

/// A source translated by `(dx, dy)` meters.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<S, T> {
    pub source: S,
    pub dx: T,
    pub dy: T,
}

impl<T: Scalar, S: FieldSource<T>> FieldSource<T> for Shifted<S, T> {
    fn eval(&self, x: T, y: T) -> Complex<T> {
        self.source.eval(x - self.dx, y - self.dy)
    }
}

/// Complex amplitude sampled on a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField<T> {
    pub grid: Grid<T>,
    pub data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexField<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        ComplexField {
            grid,
            data: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub fn at(&self, col: usize, row: usize) -> Complex<T> {
        self.data[row * self.grid.width + col]
    }

    /// `∬ |Ψ|² dA`.
    pub fn power(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum::<T>() * self.grid.cell_area()
    }

    /// Scales to unit power; the zero field is left untouched.
    pub fn normalize(&mut self) {
        let p = self.power();
        if p > T::zero() {
            let s = T::one() / p.sqrt();
            self.data.iter_mut().for_each(|v| *v = *v * s);
        }
    }

    /// `⟨self|other⟩ = ∬ conj(self)·other dA`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if self.grid != other.grid {
            return Err(Error::InvalidParameter("fields live on different grids".into()));
        }
        let acc = self
            .data
            .iter()
            .zip(&other.data)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                acc + a.conj() * *b
            });
        Ok(acc * self.grid.cell_area())
    }

    pub fn intensity(&self) -> Vec<T> {
        self.data.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Writes `<stem>.json` (header) and `<stem>.bin` (real plane followed
    /// by imaginary plane, little-endian f64, row-major).
    pub fn write_planes(&self, stem: &Path) -> Result<()> {
        let bin = stem.with_extension("bin");
        let header = PlanesHeader {
            width: self.grid.width,
            height: self.grid.height,
            extent: self.grid.extent.to_f64_lossy(),
            data: bin
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            layout: PLANES_LAYOUT.to_string(),
        };
        let mut bytes = Vec::with_capacity(16 * self.data.len());
        for v in &self.data {
            bytes.extend_from_slice(&v.re.to_f64_lossy().to_le_bytes());
        }
        for v in &self.data {
            bytes.extend_from_slice(&v.im.to_f64_lossy().to_le_bytes());
        }
        fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
        let json = stem.with_extension("json");
        let text = serde_json::to_string_pretty(&header)?;
        fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }

    pub fn read_planes(stem: &Path) -> Result<Self> {
        let json = stem.with_extension("json");
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let header: PlanesHeader = serde_json::from_str(&text)?;
        if header.layout != PLANES_LAYOUT {
            return Err(Error::Format {
                kind: "field",
                detail: format!("unsupported layout {}", header.layout),
            });
        }
        let bin: PathBuf = json.with_file_name(&header.data);
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        let n = header.width * header.height;
        if bytes.len() != 16 * n {
            return Err(Error::Format {
                kind: "field",
                detail: format!("expected {} bytes, found {}", 16 * n, bytes.len()),
            });
        }
        let grid = Grid::new(header.width, header.height, T::lit(header.extent))?;
        let value = |i: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[8 * i..8 * i + 8]);
            T::lit(f64::from_le_bytes(b))
        };
        let data = (0..n).map(|i| Complex::new(value(i), value(n + i))).collect();
        Ok(ComplexField { grid, data })
    }
}

const PLANES_LAYOUT: &str = "f64le-planar-re-im";

#[derive(Debug, Serialize, Deserialize)]
struct PlanesHeader {
    width: usize,
    height: usize,
    extent: f64,
    data: String,
    layout: String,
}

/// Evaluates `source` at every pixel centre.
pub fn sample<T: Scalar, S: FieldSource<T>>(source: &S, grid: &Grid<T>) -> ComplexField<T> {
    let data = (0..grid.height)
        .into_par_iter()
        .flat_map_iter(|row| {
            (0..grid.width).map(move |col| {
                let (x, y) = grid.coords(col, row);
                source.eval(x, y)
            })
        })
        .collect();
    ComplexField { grid: *grid, data }
}

/// LP mode sampled on `grid` and scaled to unit power by grid quadrature.
pub fn lp_field<T: Scalar>(
    mode: &LpMode<T>,
    spec: &FiberSpec<T>,
    grid: &Grid<T>,
) -> Result<ComplexField<T>> {
    let required = T::lit(2.0) * spec.core_radius;
    let extent = grid.extent.min(grid.extent_y());
    if extent < required {
        return Err(Error::InsufficientSupport {
            extent: extent.to_f64_lossy(),
            required: required.to_f64_lossy(),
        });
    }
    let mut field = sample(mode, grid);
    field.normalize();
    Ok(field)
}

/// LG beam sampled on `grid` and scaled to unit power by grid quadrature.
pub fn lg_field<T: Scalar>(beam: &LgBeam<T>, grid: &Grid<T>) -> ComplexField<T> {
    let mut field = sample(beam, grid);
    field.normalize();
    field
}

/// Complex coefficients over an ordered list of LP modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalVector<T> {
    /// `(ℓ, p)` of each entry, in basis order.
    pub labels: Vec<(i32, u32)>,
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> ModalVector<T> {
    pub fn zeros(labels: Vec<(i32, u32)>) -> Self {
        let coeffs = vec![Complex::new(T::zero(), T::zero()); labels.len()];
        ModalVector { labels, coeffs }
    }

    /// Unit vector on entry `k`.
    pub fn unit(labels: Vec<(i32, u32)>, k: usize) -> Self {
        let mut v = Self::zeros(labels);
        v.coeffs[k] = Complex::new(T::one(), T::zero());
        v
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ|c|²`.
    pub fn power(&self) -> T {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.power().sqrt()
    }
}

/// The guided LP fields of a fiber sampled once on a fixed grid.
#[derive(Debug, Clone)]
pub struct LpBasis<T> {
    pub spec: FiberSpec<T>,
    pub modes: Vec<LpMode<T>>,
    pub grid: Grid<T>,
    pub fields: Vec<ComplexField<T>>,
}

impl<T: Scalar> LpBasis<T> {
    pub fn new(spec: &FiberSpec<T>, modes: &[LpMode<T>], grid: &Grid<T>) -> Result<Self> {
        let fields = modes
            .iter()
            .map(|m| lp_field(m, spec, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(LpBasis {
            spec: *spec,
            modes: modes.to_vec(),
            grid: *grid,
            fields,
        })
    }

    pub fn labels(&self) -> Vec<(i32, u32)> {
        self.modes.iter().map(|m| m.label()).collect()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `c_k = ∬ conj(LP_k)·Ψ dA`.
    pub fn decompose(&self, field: &ComplexField<T>) -> Result<ModalVector<T>> {
        let coeffs = self
            .fields
            .par_iter()
            .map(|lp| lp.inner(field))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModalVector {
            labels: self.labels(),
            coeffs,
        })
    }

    /// `Σ c_k·LP_k` on the basis grid.
    pub fn synthesize(&self, coeffs: &ModalVector<T>) -> Result<ComplexField<T>> {
        if coeffs.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let mut out = ComplexField::zeros(self.grid);
        out.data.par_iter_mut().enumerate().for_each(|(i, v)| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (c, f) in coeffs.coeffs.iter().zip(&self.fields) {
                acc = acc + *c * f.data[i];
            }
            *v = acc;
        });
        Ok(out)
    }

    /// Gram matrix `⟨LP_i|LP_j⟩`, row-major.
    pub fn gram(&self) -> Vec<Complex<T>> {
        let n = self.len();
        let mut g = vec![Complex::new(T::zero(), T::zero()); n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = self.fields[i]
                    .inner(&self.fields[j])
                    .expect("basis fields share a grid");
            }
        }
        g
    }
}

/// Projects `field` onto `modes` sampled on the field's own grid.
pub fn decompose<T: Scalar>(
    field: &ComplexField<T>,
    modes: &[LpMode<T>],
    spec: &FiberSpec<T>,
) -> Result<ModalVector<T>> {
    LpBasis::new(spec, modes, &field.grid)?.decompose(field)
}

/// `Σ c·LP` on `grid`.
pub fn synthesize<T: Scalar>(
    coeffs: &ModalVector<T>,
    modes: &[LpMode<T>],
    spec: &FiberSpec<T>,
    grid: &Grid<T>,
) -> Result<ComplexField<T>> {
    if coeffs.len() != modes.len() {
        return Err(Error::LengthMismatch {
            expected: modes.len(),
            got: coeffs.len(),
        });
    }
    LpBasis::new(spec, modes, grid)?.synthesize(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::solve_lp_modes;

    fn reference_basis(n: usize) -> LpBasis<f64> {
        let spec = FiberSpec::reference();
        let modes = solve_lp_modes(&spec).unwrap();
        let grid = Grid::square(n, 6.0 * spec.core_radius).unwrap();
        LpBasis::new(&spec, &modes, &grid).unwrap()
    }

    #[test]
    fn grid_coordinates_are_centred() {
        let g = Grid::new(4, 2, 4.0).unwrap();
        assert_eq!(g.coords(0, 0), (-1.5, 0.5));
        assert_eq!(g.coords(3, 1), (1.5, -0.5));
        assert!(Grid::new(0, 2, 1.0).is_err());
        assert!(Grid::new(2, 2, 0.0).is_err());
    }

    #[test]
    fn fundamental_is_finite_on_axis() {
        let spec = FiberSpec::<f64>::reference();
        let m = solve_lp_modes(&spec).unwrap()[0];
        let v = m.eval(0.0, 0.0);
        assert!(v.re.is_finite() && v.re > 0.0);
        assert!((v.re - m.core_norm).abs() < 1e-12 * m.core_norm);
    }

    #[test]
    fn insufficient_support_rejected() {
        let spec = FiberSpec::<f64>::reference();
        let m = solve_lp_modes(&spec).unwrap()[0];
        let g = Grid::square(64, 1.5 * spec.core_radius).unwrap();
        assert!(matches!(
            lp_field(&m, &spec, &g),
            Err(Error::InsufficientSupport { .. })
        ));
    }

    #[test]
    fn field_is_continuous_across_the_core_boundary() {
        let spec = FiberSpec::<f64>::reference();
        let a = spec.core_radius;
        for m in solve_lp_modes(&spec).unwrap() {
            let peak = (0..400)
                .map(|i| m.radial(3.0 * a * i as f64 / 400.0).abs())
                .fold(0.0, f64::max);
            let jump = (m.radial(a * (1.0 - 1e-12)) - m.radial(a)).abs();
            assert!(jump < 1e-6 * peak);
        }
    }

    #[test]
    fn lp_gram_is_identity_at_reference_resolution() {
        let basis = reference_basis(512);
        let n = basis.len();
        let g = basis.gram();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                let err = (g[i * n + j] - Complex::new(want, 0.0)).norm();
                assert!(err < 1e-4, "G[{i}][{j}] = {}", g[i * n + j]);
            }
        }
    }

    #[test]
    fn distinct_charges_cancel_on_the_centred_lattice() {
        // the square lattice annihilates exp(imφ) unless 4 | m
        let basis = reference_basis(512);
        let n = basis.len();
        let g = basis.gram();
        for i in 0..n {
            for j in 0..n {
                let dl = basis.modes[i].l - basis.modes[j].l;
                if dl == 0 {
                    continue;
                }
                let v = g[i * n + j].norm();
                if dl % 4 != 0 {
                    assert!(v < 1e-10, "{:?}/{:?}: {v:e}", basis.modes[i], basis.modes[j]);
                } else {
                    assert!(v < 1e-6, "{v:e}");
                }
            }
        }
    }

    #[test]
    fn decompose_recovers_unit_vectors() {
        let basis = reference_basis(256);
        for k in 0..basis.len() {
            let c = basis.decompose(&basis.fields[k]).unwrap();
            for (j, v) in c.coeffs.iter().enumerate() {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((v - Complex::new(want, 0.0)).norm() < 1e-6, "{k},{j}: {v}");
            }
        }
    }

    #[test]
    fn centred_high_charge_lg_does_not_couple() {
        let basis = reference_basis(256);
        let a = basis.spec.core_radius;
        let lg = lg_field(&LgBeam::new(5, 0, 0.7 * a).unwrap(), &basis.grid);
        let c = basis.decompose(&lg).unwrap();
        for v in &c.coeffs {
            assert!(v.norm() < 1e-6, "{v}");
        }
    }

    #[test]
    fn synthesis_round_trip() {
        let basis = reference_basis(256);
        let labels = basis.labels();
        let coeffs = ModalVector {
            labels: labels.clone(),
            coeffs: (0..labels.len())
                .map(|k| Complex::new(0.3 * k as f64 - 0.5, 0.1 * (k * k) as f64))
                .collect(),
        };
        let field = basis.synthesize(&coeffs).unwrap();
        assert!((field.power() - coeffs.power()).abs() < 1e-4 * coeffs.power());
        let back = basis.decompose(&field).unwrap();
        for (a, b) in back.coeffs.iter().zip(&coeffs.coeffs) {
            assert!((a - b).norm() < 1e-4);
        }
        let unit = basis.synthesize(&ModalVector::unit(labels.clone(), 2)).unwrap();
        for (a, b) in unit.data.iter().zip(&basis.fields[2].data) {
            assert!((a - b).norm() < 1e-9);
        }
        let zero = basis.synthesize(&ModalVector::zeros(labels)).unwrap();
        assert!(zero.data.iter().all(|v| v.norm() == 0.0));
        let short = ModalVector::<f64>::zeros(vec![(0, 1)]);
        assert!(matches!(
            basis.synthesize(&short),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn lg_opposite_charges_share_intensity() {
        let g = Grid::<f64>::square(128, 4.0).unwrap();
        for l in [1, 3, 10] {
            let p = lg_field(&LgBeam::new(l, 0, 1.0).unwrap(), &g).intensity();
            let m = lg_field(&LgBeam::new(-l, 0, 1.0).unwrap(), &g).intensity();
            for (a, b) in p.iter().zip(&m) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn lg_radial_maxima() {
        let g = Grid::<f64>::square(401, 8.0).unwrap();
        let step = g.pitch();
        let argmax_r = |f: &ComplexField<f64>| {
            let (mut best, mut at) = (0.0, 0.0);
            for row in 0..g.height {
                for col in 0..g.width {
                    let v = f.at(col, row).norm_sqr();
                    if v > best {
                        best = v;
                        let (x, y) = g.coords(col, row);
                        at = x.hypot(y);
                    }
                }
            }
            at
        };
        let gauss = lg_field(&LgBeam::new(0, 0, 1.0).unwrap(), &g);
        assert!(argmax_r(&gauss) < step);
        let donut = lg_field(&LgBeam::new(2, 0, 1.0).unwrap(), &g);
        assert!((argmax_r(&donut) - 1.0).abs() <= step);
    }

    #[test]
    fn planes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(7, 5, 3.0).unwrap();
        let f = sample(&LgBeam::new(1, 1, 1.0).unwrap(), &g);
        let stem = dir.path().join("field");
        f.write_planes(&stem).unwrap();
        let back = ComplexField::<f64>::read_planes(&stem).unwrap();
        assert_eq!(back, f);
    }
}
