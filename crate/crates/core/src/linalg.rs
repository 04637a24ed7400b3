//! Small dense complex matrices: Hermitian eigendecomposition by cyclic
//! Jacobi rotations and the unitary exponential `exp(iH)`.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::Scalar;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![Complex::new(T::zero(), T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(d, T::zero());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.n, v.len());
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(Complex::new(T::zero(), T::zero()), |acc, j| {
                    acc + self[(i, j)] * v[j]
                })
            })
            .collect()
    }

    pub fn scale(&self, s: T) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|v| *v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// `max |a_ij − b_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    fn frobenius_sqr(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    fn off_diagonal_sqr(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self[(i, j)].norm_sqr();
                }
            }
        }
        s
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenvalues and unitary eigenvector matrix (columns) of a Hermitian
/// matrix, `H = V·diag(λ)·V†`. Only the upper triangle's conjugate symmetry
/// is assumed, not checked.
pub fn hermitian_eigen<T: Scalar>(h: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let n = h.dim();
    let mut a = h.clone();
    let mut v = CMatrix::identity(n);
    let tol = T::epsilon() * T::epsilon() * a.frobenius_sqr();
    let two = T::lit(2.0);
    for _sweep in 0..64 {
        if a.off_diagonal_sqr() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == T::zero() {
                    continue;
                }
                let phase = apq / mag;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (two * mag);
                let sign = if tau < T::zero() { -T::one() } else { T::one() };
                let t = sign / (tau.abs() + (T::one() + tau * tau).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // G = diag(1, e^{-iα})·[[c, s], [-s, c]] restricted to (p, q)
                let g_pp = Complex::new(c, T::zero());
                let g_pq = Complex::new(s, T::zero());
                let g_qp = phase.conj() * (-s);
                let g_qq = phase.conj() * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = Complex::new(T::zero(), T::zero());
                a[(q, p)] = Complex::new(T::zero(), T::zero());
            }
        }
    }
    let values = (0..n).map(|i| a[(i, i)].re).collect();
    (values, v)
}

/// `exp(iH)` for Hermitian `H`, unitary by construction from the spectral
/// form. The mean diagonal is factored out as a global phase before the
/// eigendecomposition so large common offsets cost no precision.
pub fn expm_i_hermitian<T: Scalar>(h: &CMatrix<T>) -> CMatrix<T> {
    let n = h.dim();
    if n == 0 {
        return CMatrix::zeros(0);
    }
    let shift = (0..n).map(|i| h[(i, i)].re).sum::<T>() / T::from_usize_lossy(n);
    let mut centred = h.clone();
    for i in 0..n {
        centred[(i, i)] = centred[(i, i)] - Complex::new(shift, T::zero());
    }
    let (values, v) = hermitian_eigen(&centred);
    let global = Complex::from_polar(T::one(), shift);
    let mut out = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (k, &lam) in values.iter().enumerate() {
                acc = acc + v[(i, k)] * Complex::from_polar(T::one(), lam) * v[(j, k)].conj();
            }
            out[(i, j)] = acc * global;
        }
    }
    out
}

/// Hermitian `(G + G†)/2` from i.i.d. standard complex Gaussian entries,
/// rescaled to unit spectral radius.
pub fn random_hermitian<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix<T> {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut g = CMatrix::<T>::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            g[(i, j)] = Complex::new(T::lit(re * half), T::lit(im * half));
        }
    }
    let h = g.add(&g.adjoint()).scale(T::lit(0.5));
    let (values, _) = hermitian_eigen(&h);
    let radius = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if radius > T::zero() {
        h.scale(T::one() / radius)
    } else {
        h
    }
}
