//! Fiber channel: offset injection, strain-dependent unitary mode mixing,
//! and camera capture.
//!
//! The transfer matrix for displacement `d` is
//! `U(d, ω) = exp(i(D_β + θ_A·A + (d/d_max)·θ_B·B + ε·R_ω))` where
//! `D_β = diag(β·L)`, `A` and `B` are fixed Hermitian matrices drawn from the
//! master seed and `R_ω` is a fresh Hermitian jitter drawn from the frame's
//! own random stream. All three have unit spectral radius.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::fiber::{solve_lp_modes, FiberSpec, LpMode};
use crate::field::{sample, ComplexField, FieldSource, Grid, LpBasis, ModalVector, Shifted};
use crate::linalg::{expm_i_hermitian, random_hermitian, CMatrix};
use crate::pgm::GrayImage;
use crate::rng::stream;
use crate::{Error, Result, Scalar};

/// Reference quadrature grid: 512², 6a wide.
pub const REFERENCE_RESOLUTION: usize = 512;
pub const REFERENCE_EXTENT_RADII: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec<T> {
    pub fiber: FiberSpec<T>,
    /// Lateral misalignment of the injected beam along x (m).
    pub lateral_offset: T,
    /// Waist of the injected LG beams (m).
    pub waist: T,
    pub theta_a: T,
    pub theta_b: T,
    pub jitter: T,
    pub max_displacement_mm: T,
    pub seed: u64,
}

impl<T: Scalar> ChannelSpec<T> {
    /// Offset 0.3a, waist 0.7a, θ_A = θ_B = π, ε = 0.05, 50 mm travel.
    pub fn new(fiber: FiberSpec<T>, seed: u64) -> Self {
        let a = fiber.core_radius;
        ChannelSpec {
            fiber,
            lateral_offset: T::lit(0.3) * a,
            waist: T::lit(0.7) * a,
            theta_a: T::PI(),
            theta_b: T::PI(),
            jitter: T::lit(0.05),
            max_displacement_mm: T::lit(50.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.theta_a >= T::zero()) || !(self.theta_b >= T::zero()) {
            return bad("mixing strengths must be non-negative");
        }
        if !(self.jitter >= T::zero() && self.jitter < T::one()) {
            return bad("jitter must lie in [0, 1)");
        }
        if !(self.max_displacement_mm > T::zero()) {
            return bad("maximum displacement must be positive");
        }
        if !(self.waist > T::zero()) {
            return bad("beam waist must be positive");
        }
        if !self.lateral_offset.is_finite() {
            return bad("lateral offset must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec<T> {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u32,
    /// Additive Gaussian noise, fraction of full scale.
    pub noise_sigma: T,
    /// Physical width imaged by the sensor (m).
    pub extent: T,
}

impl<T: Scalar> CameraSpec<T> {
    /// 189×147 (9×7 tiles of 21×21), 8-bit, σ = 0.01, 4a wide.
    pub fn for_fiber(fiber: &FiberSpec<T>) -> Self {
        CameraSpec {
            width: 189,
            height: 147,
            bit_depth: 8,
            noise_sigma: T::lit(0.01),
            extent: T::lit(4.0) * fiber.core_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter("sensor dimensions must be positive".into()));
        }
        if self.bit_depth != 8 {
            return Err(Error::InvalidParameter("only 8-bit sensors are supported".into()));
        }
        if !(self.noise_sigma >= T::zero() && self.noise_sigma < T::one()) {
            return Err(Error::InvalidParameter("noise sigma must lie in [0, 1)".into()));
        }
        Grid::new(self.width, self.height, self.extent).map(|_| ())
    }

    pub fn grid(&self) -> Result<Grid<T>> {
        Grid::new(self.width, self.height, self.extent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub label: usize,
    pub displacement_mm: f64,
    pub frame_index: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub image: GrayImage,
    pub meta: FrameMeta,
}

/// `|Ψ|²` normalised to peak = full scale, plus Gaussian noise, clamped and
/// quantised to 8 bits. A zero field gives an all-zero frame.
pub fn capture<T: Scalar, R: Rng + ?Sized>(
    field: &ComplexField<T>,
    camera: &CameraSpec<T>,
    rng: &mut R,
) -> Result<GrayImage> {
    camera.validate()?;
    if field.grid.width != camera.width || field.grid.height != camera.height {
        return Err(Error::InvalidParameter(format!(
            "field is {}×{}, sensor is {}×{}",
            field.grid.width, field.grid.height, camera.width, camera.height
        )));
    }
    let intensity = field.intensity();
    let peak = intensity.iter().copied().fold(T::zero(), T::max);
    if !(peak > T::zero()) {
        return GrayImage::new(camera.width, camera.height, vec![0; intensity.len()]);
    }
    let full = T::lit(255.0);
    let pixels = intensity
        .iter()
        .map(|&v| {
            let mut s = v / peak;
            if camera.noise_sigma > T::zero() {
                let n: f64 = rng.sample(StandardNormal);
                s += camera.noise_sigma * T::lit(n);
            }
            let q = (s.max(T::zero()).min(T::one()) * full).round();
            q.to_u8().unwrap_or(0)
        })
        .collect();
    GrayImage::new(camera.width, camera.height, pixels)
}

/// A configured channel with its mode bases sampled and its fixed mixing
/// matrices drawn.
#[derive(Debug, Clone)]
pub struct Channel<T> {
    pub spec: ChannelSpec<T>,
    pub camera: CameraSpec<T>,
    reference: LpBasis<T>,
    sensor: LpBasis<T>,
    mixing: CMatrix<T>,
    strain: CMatrix<T>,
}

impl<T: Scalar> Channel<T> {
    pub fn new(spec: ChannelSpec<T>, camera: CameraSpec<T>) -> Result<Self> {
        Self::with_reference_resolution(spec, camera, REFERENCE_RESOLUTION)
    }

    pub fn with_reference_resolution(
        spec: ChannelSpec<T>,
        camera: CameraSpec<T>,
        resolution: usize,
    ) -> Result<Self> {
        spec.validate()?;
        camera.validate()?;
        let modes = solve_lp_modes(&spec.fiber)?;
        let extent = T::lit(REFERENCE_EXTENT_RADII) * spec.fiber.core_radius;
        let reference = LpBasis::new(&spec.fiber, &modes, &Grid::square(resolution, extent)?)?;
        let sensor = LpBasis::new(&spec.fiber, &modes, &camera.grid()?)?;
        let n = modes.len();
        let mixing = random_hermitian(n, &mut stream(spec.seed, "mixing", 0, 0));
        let strain = random_hermitian(n, &mut stream(spec.seed, "strain", 0, 0));
        Ok(Channel {
            spec,
            camera,
            reference,
            sensor,
            mixing,
            strain,
        })
    }

    pub fn modes(&self) -> &[LpMode<T>] {
        &self.reference.modes
    }

    pub fn labels(&self) -> Vec<(i32, u32)> {
        self.reference.labels()
    }

    pub fn reference_basis(&self) -> &LpBasis<T> {
        &self.reference
    }

    pub fn sensor_basis(&self) -> &LpBasis<T> {
        &self.sensor
    }

    /// Translates `source` by the lateral offset and projects it onto the
    /// guided modes on the reference grid.
    pub fn couple<S: FieldSource<T>>(&self, source: &S) -> Result<ModalVector<T>> {
        let shifted = Shifted {
            source,
            dx: self.spec.lateral_offset,
            dy: T::zero(),
        };
        let field = sample(&shifted, &self.reference.grid);
        self.reference.decompose(&field)
    }

    fn check_displacement(&self, d: T) -> Result<()> {
        if !(d >= T::zero() && d <= self.spec.max_displacement_mm) {
            return Err(Error::DisplacementOutOfRange {
                d: d.to_f64_lossy(),
                max: self.spec.max_displacement_mm.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Hermitian generator of the transfer matrix. Draws the jitter from
    /// `rng` even when ε = 0 so stream consumption does not depend on ε.
    pub fn generator<R: Rng + ?Sized>(&self, d: T, rng: &mut R) -> Result<CMatrix<T>> {
        self.check_displacement(d)?;
        let phases: Vec<T> = self
            .modes()
            .iter()
            .map(|m| m.beta * self.spec.fiber.length)
            .collect();
        let jitter: CMatrix<T> = random_hermitian(self.modes().len(), rng);
        let strain_weight = d / self.spec.max_displacement_mm * self.spec.theta_b;
        Ok(CMatrix::from_diagonal(&phases)
            .add(&self.mixing.scale(self.spec.theta_a))
            .add(&self.strain.scale(strain_weight))
            .add(&jitter.scale(self.spec.jitter)))
    }

    pub fn transfer_matrix<R: Rng + ?Sized>(&self, d: T, rng: &mut R) -> Result<CMatrix<T>> {
        Ok(expm_i_hermitian(&self.generator(d, rng)?))
    }

    pub fn propagate<R: Rng + ?Sized>(
        &self,
        c: &ModalVector<T>,
        d: T,
        rng: &mut R,
    ) -> Result<ModalVector<T>> {
        if c.len() != self.modes().len() {
            return Err(Error::LengthMismatch {
                expected: self.modes().len(),
                got: c.len(),
            });
        }
        let u = self.transfer_matrix(d, rng)?;
        Ok(ModalVector {
            labels: c.labels.clone(),
            coeffs: u.mul_vec(&c.coeffs),
        })
    }

    /// Output field on the sensor grid for modal coefficients `c`.
    pub fn output_field(&self, c: &ModalVector<T>) -> Result<ComplexField<T>> {
        self.sensor.synthesize(c)
    }

    /// Everything after injection: propagate, synthesise, capture.
    pub fn transmit_coupled<R: Rng + ?Sized>(
        &self,
        c_in: &ModalVector<T>,
        d: T,
        rng: &mut R,
    ) -> Result<GrayImage> {
        let c_out = self.propagate(c_in, d, rng)?;
        let field = self.output_field(&c_out)?;
        capture(&field, &self.camera, rng)
    }

    /// `capture(synthesize(propagate(couple(source), d)))` with frame
    /// randomness from `(seed, purpose, label, frame_index)`.
    pub fn transmit<S: FieldSource<T>>(
        &self,
        source: &S,
        d: T,
        purpose: &str,
        label: usize,
        frame_index: u64,
    ) -> Result<CameraFrame> {
        let c_in = self.couple(source)?;
        let mut rng = stream(self.spec.seed, purpose, label as u64, frame_index);
        let image = self.transmit_coupled(&c_in, d, &mut rng)?;
        Ok(CameraFrame {
            image,
            meta: FrameMeta {
                label,
                displacement_mm: d.to_f64_lossy(),
                frame_index,
                seed: self.spec.seed,
            },
        })
    }
}

/// Pure propagation phases `exp(iβL)`; handy as a reference.
pub fn propagation_phases<T: Scalar>(modes: &[LpMode<T>], length: T) -> Vec<Complex<T>> {
    modes
        .iter()
        .map(|m| Complex::from_polar(T::one(), m.beta * length))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{lg_field, LgBeam};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn channel(spec: ChannelSpec<f64>) -> Channel<f64> {
        let camera = CameraSpec::for_fiber(&spec.fiber);
        Channel::with_reference_resolution(spec, camera, 256).unwrap()
    }

    fn default_channel() -> Channel<f64> {
        channel(ChannelSpec::new(FiberSpec::reference(), 42))
    }

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn spec_validation() {
        let mut s = ChannelSpec::<f64>::new(FiberSpec::reference(), 1);
        assert!(s.validate().is_ok());
        s.jitter = 1.0;
        assert!(s.validate().is_err());
        s.jitter = 0.0;
        s.theta_a = -1.0;
        assert!(s.validate().is_err());
        let mut cam = CameraSpec::<f64>::for_fiber(&FiberSpec::reference());
        cam.noise_sigma = 1.0;
        assert!(cam.validate().is_err());
    }

    #[test]
    fn centred_injection_selects_azimuthal_order() {
        let mut spec = ChannelSpec::new(FiberSpec::reference(), 1);
        spec.lateral_offset = 0.0;
        let ch = channel(spec);
        let lg5 = LgBeam::new(5, 0, spec.waist).unwrap();
        assert!(ch.couple(&lg5).unwrap().norm() < 1e-6);
        for (k, mode) in ch.modes().iter().enumerate() {
            let c = ch.couple(mode).unwrap();
            for (j, v) in c.coeffs.iter().enumerate() {
                let want = if j == k { 1.0 } else { 0.0 };
                // 256² quadrature of the self overlap is accurate to ~1e-5
                assert!((v - Complex::new(want, 0.0)).norm() < 5e-5, "{k}/{j}: {v}");
            }
        }
    }

    #[test]
    fn offset_injection_couples_high_charges() {
        let ch = default_channel();
        for l in -10..=10 {
            let beam = LgBeam::new(l, 0, ch.spec.waist).unwrap();
            let c = ch.couple(&beam).unwrap();
            assert!(c.power() > 0.0 && c.power() <= 1.0 + 1e-9, "l={l}: {}", c.power());
        }
    }

    #[test]
    fn propagation_is_unitary_and_deterministic() {
        let ch = default_channel();
        let beam = LgBeam::new(3, 0, ch.spec.waist).unwrap();
        let c = ch.couple(&beam).unwrap();
        for d in [0.0, 12.5, 50.0] {
            let out = ch.propagate(&c, d, &mut rng(5)).unwrap();
            assert!((out.norm() - c.norm()).abs() < 1e-10);
            let again = ch.propagate(&c, d, &mut rng(5)).unwrap();
            assert_eq!(out, again);
            let u = ch.transfer_matrix(d, &mut rng(9)).unwrap();
            let n = u.dim();
            assert!(u.adjoint().matmul(&u).max_abs_diff(&CMatrix::identity(n)) < 1e-10);
        }
        assert!(matches!(
            ch.propagate(&c, 50.1, &mut rng(1)),
            Err(Error::DisplacementOutOfRange { .. })
        ));
        assert!(ch.propagate(&c, -0.1, &mut rng(1)).is_err());
    }

    #[test]
    fn unmixed_channel_applies_pure_phases() {
        let mut spec = ChannelSpec::new(FiberSpec::reference(), 3);
        spec.theta_a = 0.0;
        spec.theta_b = 0.0;
        spec.jitter = 0.0;
        let ch = channel(spec);
        let c = ModalVector {
            labels: ch.labels(),
            coeffs: (0..6).map(|k| Complex::new(1.0 + k as f64, -0.5)).collect(),
        };
        let out = ch.propagate(&c, 17.0, &mut rng(2)).unwrap();
        let phases = propagation_phases(ch.modes(), spec.fiber.length);
        for ((o, i), p) in out.coeffs.iter().zip(&c.coeffs).zip(&phases) {
            assert!((o - i * p).norm() < 1e-8 * i.norm());
        }
    }

    #[test]
    fn capture_contracts() {
        let ch = default_channel();
        let grid = ch.camera.grid().unwrap();
        let mut cam = ch.camera;
        cam.noise_sigma = 0.0;
        let gauss = lg_field(&LgBeam::new(0, 0, ch.spec.waist).unwrap(), &grid);
        let img = capture(&gauss, &cam, &mut rng(1)).unwrap();
        assert_eq!(*img.pixels.iter().max().unwrap(), 255);
        let centre = img.get(cam.width / 2, cam.height / 2);
        assert_eq!(centre, 255);
        assert_eq!(img.get(0, 0), 0);
        assert_eq!(img, capture(&gauss, &cam, &mut rng(2)).unwrap());

        let p = capture(&lg_field(&LgBeam::new(1, 0, 1e-6).unwrap(), &grid), &cam, &mut rng(1));
        let m = capture(&lg_field(&LgBeam::new(-1, 0, 1e-6).unwrap(), &grid), &cam, &mut rng(1));
        assert_eq!(p.unwrap(), m.unwrap());

        let zero = ComplexField::zeros(grid);
        let blank = capture(&zero, &ch.camera, &mut rng(1)).unwrap();
        assert!(blank.pixels.iter().all(|&v| v == 0));

        let wrong = ComplexField::zeros(Grid::new(10, 10, 1e-5).unwrap());
        assert!(capture(&wrong, &cam, &mut rng(1)).is_err());
    }

    #[test]
    fn transmission_depends_on_strain_and_is_reproducible() {
        let ch = default_channel();
        let beam = LgBeam::new(1, 0, ch.spec.waist).unwrap();
        let a = ch.transmit(&beam, 0.0, "test", 0, 0).unwrap();
        let b = ch.transmit(&beam, 50.0, "test", 0, 0).unwrap();
        assert_ne!(a.image, b.image);
        assert_eq!(a, ch.transmit(&beam, 0.0, "test", 0, 0).unwrap());
    }

    #[test]
    fn transmitted_power_never_grows() {
        let ch = default_channel();
        for l in [-7, 0, 2, 9] {
            let beam = LgBeam::new(l, 0, ch.spec.waist).unwrap();
            let c = ch.couple(&beam).unwrap();
            let out = ch.propagate(&c, 33.3, &mut rng(4)).unwrap();
            assert!(out.power() <= 1.0 + 1e-9);
            let field = ch.reference_basis().synthesize(&out).unwrap();
            assert!(field.power() <= 1.0 + 1e-4);
        }
    }

    #[test]
    fn opposite_charges_separate_after_the_fiber() {
        let mut spec = ChannelSpec::new(FiberSpec::reference(), 42);
        spec.jitter = 0.0;
        let mut ch = channel(spec);
        ch.camera.noise_sigma = 0.0;
        for k in [1, 5, 10] {
            let p = ch.transmit(&LgBeam::new(k, 0, spec.waist).unwrap(), 25.0, "t", 0, 0);
            let m = ch.transmit(&LgBeam::new(-k, 0, spec.waist).unwrap(), 25.0, "t", 0, 0);
            let (p, m) = (p.unwrap().image, m.unwrap().image);
            let diff = p.pixels.iter().zip(&m.pixels).map(|(a, b)| a.abs_diff(*b)).max();
            assert!(diff.unwrap() > 0, "k={k}");
        }
    }
}
