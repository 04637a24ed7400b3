//! Step-index fiber description and the weakly-guiding LP mode solver.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::field::FieldSource;
use crate::special::{bessel_j, bessel_k, bessel_k_scaled};
use crate::{Error, Result, Scalar};

/// Geometry and optical constants of a step-index fiber. SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec<T> {
    pub core_radius: T,
    pub numerical_aperture: T,
    pub wavelength: T,
    pub length: T,
    pub n_core: T,
}

impl<T: Scalar> FiberSpec<T> {
    pub fn new(
        core_radius: T,
        numerical_aperture: T,
        wavelength: T,
        length: T,
        n_core: T,
    ) -> Result<Self> {
        let spec = FiberSpec {
            core_radius,
            numerical_aperture,
            wavelength,
            length,
            n_core,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 10 µm core diameter, NA 0.1, 633 nm, 1 m of fused silica.
    pub fn reference() -> Self {
        FiberSpec {
            core_radius: T::lit(5e-6),
            numerical_aperture: T::lit(0.1),
            wavelength: T::lit(633e-9),
            length: T::lit(1.0),
            n_core: T::lit(1.457),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidFiber(m.to_string()));
        let finite = [
            self.core_radius,
            self.numerical_aperture,
            self.wavelength,
            self.length,
            self.n_core,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter");
        }
        if self.core_radius <= T::zero() {
            return bad("core radius must be positive");
        }
        if self.numerical_aperture <= T::zero() || self.numerical_aperture >= self.n_core {
            return bad("numerical aperture must satisfy 0 < NA < n_core");
        }
        if self.wavelength <= T::zero() {
            return bad("wavelength must be positive");
        }
        if self.length <= T::zero() {
            return bad("length must be positive");
        }
        Ok(())
    }

    pub fn n_cladding(&self) -> T {
        (self.n_core * self.n_core - self.numerical_aperture * self.numerical_aperture).sqrt()
    }

    /// Vacuum wavenumber `2π/λ₀`.
    pub fn k0(&self) -> T {
        T::TAU() / self.wavelength
    }

    /// Normalized frequency `V = (2π a / λ₀)·NA`.
    pub fn v_number(&self) -> Result<T> {
        self.validate()?;
        Ok(self.k0() * self.core_radius * self.numerical_aperture)
    }
}

/// Free-function form of [`FiberSpec::v_number`].
pub fn v_number<T: Scalar>(spec: &FiberSpec<T>) -> Result<T> {
    spec.v_number()
}

/// One guided LP solution.
///
/// The field follows `exp(−iℓφ)`; the radial part is
/// `core_norm·J_|ℓ|(u r/a)` inside the core and `cladding_norm·K_|ℓ|(w r/a)`
/// outside. The cladding constant is stored against the exponentially scaled
/// `K` (`cladding_norm = core_norm·J_|ℓ|(u)/(e^w K_|ℓ|(w))`) so the branches
/// meet at `r = a` without overflow. `core_norm` makes the analytic power unity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpMode<T> {
    pub l: i32,
    pub p: u32,
    pub beta: T,
    pub u: T,
    pub w: T,
    pub core_norm: T,
    pub cladding_norm: T,
    pub core_radius: T,
}

impl<T: Scalar> LpMode<T> {
    pub fn label(&self) -> (i32, u32) {
        (self.l, self.p)
    }

    /// Real radial amplitude at radius `r` (meters).
    pub fn radial(&self, r: T) -> T {
        let order = self.l.abs();
        let rho = r / self.core_radius;
        if rho < T::one() {
            self.core_norm * bessel_j(order, self.u * rho)
        } else {
            let arg = self.w * rho;
            self.cladding_norm * bessel_k_scaled(order, arg) * (self.w - arg).exp()
        }
    }
}

impl<T: Scalar> FieldSource<T> for LpMode<T> {
    fn eval(&self, x: T, y: T) -> Complex<T> {
        let r = x.hypot(y);
        let phi = y.atan2(x);
        let phase = -T::from_i32_lossy(self.l) * phi;
        Complex::from_polar(self.radial(r), phase)
    }
}

/// Characteristic function of the weakly guiding step-index fiber written
/// without poles: `u·J_{ℓ+1}(u) − w·[K_{ℓ+1}(w)/K_ℓ(w)]·J_ℓ(u)`. Its zeros
/// coincide with those of `u·J_{ℓ+1}/J_ℓ − w·K_{ℓ+1}/K_ℓ`.
pub fn characteristic<T: Scalar>(l: u32, u: T, v: T) -> T {
    let li = l as i32;
    let w2 = v * v - u * u;
    if w2 <= T::zero() {
        // w → 0 limit of w·K_{ℓ+1}(w)/K_ℓ(w): 0 for ℓ = 0, 2ℓ otherwise
        let lim = if l == 0 {
            T::zero()
        } else {
            T::from_u32(2 * l).unwrap()
        };
        return u * bessel_j(li + 1, u) - lim * bessel_j(li, u);
    }
    let w = w2.sqrt();
    let ratio = bessel_k_scaled(li + 1, w) / bessel_k_scaled(li, w);
    u * bessel_j(li + 1, u) - w * ratio * bessel_j(li, u)
}

/// Roots `u ∈ (0, V)` of the characteristic function for one `|ℓ|`.
fn roots_for_order<T: Scalar>(l: u32, v: T) -> Result<Vec<T>> {
    const SCAN_POINTS: usize = 1000;
    let step = v / T::from_usize_lossy(SCAN_POINTS);
    let tol = T::lit(1e-12).max(T::lit(8.0) * T::epsilon() * v);
    let mut roots = Vec::new();
    let mut lo = step;
    let mut f_lo = characteristic(l, lo, v);
    for k in 2..=SCAN_POINTS {
        let hi = if k == SCAN_POINTS {
            v
        } else {
            step * T::from_usize_lossy(k)
        };
        let f_hi = characteristic(l, hi, v);
        if !f_lo.is_finite() || !f_hi.is_finite() {
            return Err(Error::RootIsolation {
                order: l,
                near: lo.to_f64_lossy(),
            });
        }
        // a zero exactly at u = V sits on cutoff and is not guided
        let crosses = (f_lo < T::zero() && f_hi > T::zero())
            || (f_lo > T::zero() && f_hi < T::zero())
            || (f_lo == T::zero() && k > 2);
        if crosses {
            roots.push(bisect(l, v, lo, hi, f_lo, tol)?);
        }
        lo = hi;
        f_lo = f_hi;
    }
    Ok(roots)
}

fn bisect<T: Scalar>(l: u32, v: T, mut lo: T, mut hi: T, mut f_lo: T, tol: T) -> Result<T> {
    if f_lo == T::zero() {
        return Ok(lo);
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            return Ok((lo + hi) / T::lit(2.0));
        }
        let mid = (lo + hi) / T::lit(2.0);
        let f_mid = characteristic(l, mid, v);
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::RootIsolation {
        order: l,
        near: lo.to_f64_lossy(),
    })
}

/// Analytic `1/sqrt(∬ |radial|² dA)` for the continuity-matched profile.
fn analytic_norm<T: Scalar>(l: u32, u: T, w: T, a: T) -> T {
    let li = l as i32;
    let ju = bessel_j(li, u);
    let kw = bessel_k(li, w);
    let core = ju * ju - bessel_j(li - 1, u) * bessel_j(li + 1, u);
    let clad_scale = ju / kw;
    let clad = bessel_k(li - 1, w) * bessel_k(li + 1, w) - kw * kw;
    let power = T::PI() * a * a * (core + clad_scale * clad_scale * clad);
    T::one() / power.sqrt()
}

/// All guided LP modes, sorted by descending `β` with ties broken by
/// ascending `ℓ`. Modes with `ℓ ≠ 0` appear once for each sign.
pub fn solve_lp_modes<T: Scalar>(spec: &FiberSpec<T>) -> Result<Vec<LpMode<T>>> {
    let v = spec.v_number()?;
    let a = spec.core_radius;
    let k_core = spec.n_core * spec.k0();
    let mut modes = Vec::new();
    for l in 0u32.. {
        let roots = roots_for_order(l, v)?;
        if roots.is_empty() {
            break;
        }
        for (i, &u) in roots.iter().enumerate() {
            let w = (v * v - u * u).sqrt();
            let kt = u / a;
            let beta = (k_core * k_core - kt * kt).sqrt();
            let core_norm = analytic_norm(l, u, w, a);
            let li = l as i32;
            let cladding_norm = core_norm * bessel_j(li, u) / bessel_k_scaled(li, w);
            let signs: &[i32] = if l == 0 { &[0] } else { &[-1, 1] };
            for &s in signs {
                modes.push(LpMode {
                    l: s * li,
                    p: i as u32 + 1,
                    beta,
                    u,
                    w,
                    core_norm,
                    cladding_norm,
                    core_radius: a,
                });
            }
        }
    }
    modes.sort_by(|x, y| {
        y.beta
            .partial_cmp(&x.beta)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.l.cmp(&y.l))
    });
    Ok(modes)
}
