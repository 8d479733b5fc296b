//! Dense complex matrices of fixed dimension 2 or 3.
//!
//! Everything here is stack allocated; the master-equation right-hand side is
//! evaluated millions of times per optimization, so no heap traffic is allowed
//! on these paths.

use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (max |A - A^dag| = {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Hermiticity tolerance accepted by the eigensolvers.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Row-major `N x N` complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix<const N: usize>(pub [[C64; N]; N]);

pub type Mat2 = Matrix<2>;
pub type Mat3 = Matrix<3>;

/// Complex column vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector<const N: usize>(pub [C64; N]);

pub type Vec2 = Vector<2>;
pub type Vec3 = Vector<3>;

impl<const N: usize> Default for Matrix<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> Matrix<N> {
    pub const fn zeros() -> Self {
        Matrix([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn from_real(rows: [[f64; N]; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = C64::new(rows[i][j], 0.0);
            }
        }
        m
    }

    pub fn diagonal(diag: [f64; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = C64::new(diag[i], 0.0);
        }
        m
    }

    /// `|a><b|`
    pub fn outer(a: &Vector<N>, b: &Vector<N>) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = a.0[i] * b.0[j].conj();
            }
        }
        m
    }

    /// `|i><j|` in the computational basis.
    pub fn unit(i: usize, j: usize) -> Self {
        let mut m = Self::zeros();
        m.0[i][j] = ONE;
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..N).map(|i| self.0[i][i]).fold(ZERO, |acc, x| acc + x)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|x| *x *= s);
        m
    }

    pub fn scale_real(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|x| *x *= s);
        m
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    /// `(A + A^dag) / 2`
    pub fn hermitian_part(&self) -> Self {
        (*self + self.adjoint()).scale_real(0.5)
    }

    pub fn apply(&self, v: &Vector<N>) -> Vector<N> {
        let mut out = [ZERO; N];
        for i in 0..N {
            for j in 0..N {
                out[i] += self.0[i][j] * v.0[j];
            }
        }
        Vector(out)
    }

    /// `<v|A|v>`
    pub fn expectation(&self, v: &Vector<N>) -> C64 {
        v.inner(&self.apply(v))
    }

    fn check_hermitian(&self) -> Result<(), LinalgError> {
        let defect = self.hermiticity_defect();
        if defect < HERMITIAN_TOL && defect.is_finite() {
            Ok(())
        } else {
            Err(LinalgError::NotHermitian { defect })
        }
    }
}

impl<const N: usize> Index<(usize, usize)> for Matrix<N> {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for Matrix<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl<const N: usize> Add for Matrix<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for Matrix<N> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl<const N: usize> Sub for Matrix<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..N {
            for j in 0..N {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl<const N: usize> Neg for Matrix<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_real(-1.0)
    }
}

impl<const N: usize> Mul for Matrix<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                for j in 0..N {
                    m.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        m
    }
}

impl<const N: usize> Vector<N> {
    pub fn basis(i: usize) -> Self {
        let mut v = [ZERO; N];
        v[i] = ONE;
        Vector(v)
    }

    pub fn from_real(x: [f64; N]) -> Self {
        Vector(x.map(|r| C64::new(r, 0.0)))
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Self) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Vector(self.0.map(|x| x / n))
    }

    pub fn scale(&self, s: C64) -> Self {
        Vector(self.0.map(|x| x * s))
    }

    pub fn projector(&self) -> Matrix<N> {
        Matrix::outer(self, self)
    }
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues with
/// orthonormal eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianEigen<const N: usize> {
    pub values: [f64; N],
    pub vectors: Matrix<N>,
}

impl<const N: usize> HermitianEigen<N> {
    pub fn vector(&self, k: usize) -> Vector<N> {
        let mut v = [ZERO; N];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = self.vectors.0[i][k];
        }
        Vector(v)
    }

    /// `V diag(lambda) V^dag`
    pub fn reconstruct(&self) -> Matrix<N> {
        let mut d = Matrix::<N>::zeros();
        for k in 0..N {
            d.0[k][k] = C64::new(self.values[k], 0.0);
        }
        self.vectors * d * self.vectors.adjoint()
    }

    fn sorted(mut self) -> Self {
        // insertion sort keeps column swaps explicit for tiny N
        for i in 1..N {
            let mut j = i;
            while j > 0 && self.values[j - 1] > self.values[j] {
                self.values.swap(j - 1, j);
                for row in self.vectors.0.iter_mut() {
                    row.swap(j - 1, j);
                }
                j -= 1;
            }
        }
        self
    }
}

impl Matrix<2> {
    /// Closed-form eigen-decomposition of a 2x2 Hermitian matrix.
    pub fn hermitian_eigs(&self) -> Result<HermitianEigen<2>, LinalgError> {
        self.check_hermitian()?;
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = self.0[0][1];
        let half_gap = 0.5 * (a - d);
        let r = libm::hypot(half_gap, b.norm());
        let mean = 0.5 * (a + d);
        let values = [mean - r, mean + r];
        if b.norm() == 0.0 {
            let vectors = if a <= d {
                Matrix::identity()
            } else {
                Matrix([[ZERO, ONE], [ONE, ZERO]])
            };
            return Ok(HermitianEigen { values, vectors });
        }
        let mut vectors = Matrix::zeros();
        for (k, &lambda) in values.iter().enumerate() {
            // Two algebraically equivalent kernels of (A - lambda); use the one
            // without cancellation.
            let u = Vector([b, C64::new(lambda - a, 0.0)]);
            let w = Vector([C64::new(lambda - d, 0.0), b.conj()]);
            let v = if u.norm() >= w.norm() { u } else { w }.normalized();
            vectors.0[0][k] = v.0[0];
            vectors.0[1][k] = v.0[1];
        }
        Ok(HermitianEigen { values, vectors })
    }
}

impl Matrix<3> {
    /// Cyclic complex Jacobi eigen-decomposition of a 3x3 Hermitian matrix.
    pub fn hermitian_eigs(&self) -> Result<HermitianEigen<3>, LinalgError> {
        const MAX_SWEEPS: usize = 50;
        self.check_hermitian()?;
        let mut a = self.hermitian_part();
        let mut v = Matrix::<3>::identity();
        let scale = a.norm().max(f64::MIN_POSITIVE);

        for _ in 0..MAX_SWEEPS {
            let off = (a.0[0][1].norm_sqr() + a.0[0][2].norm_sqr() + a.0[1][2].norm_sqr()).sqrt();
            if off <= 1e-16 * scale {
                let values = [a.0[0][0].re, a.0[1][1].re, a.0[2][2].re];
                return Ok(HermitianEigen { values, vectors: v }.sorted());
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                let apq = a.0[p][q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let theta = (a.0[q][q].re - a.0[p][p].re) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag-phase * real rotation; A <- G^dag A G zeroes (p, q).
                let mut g = Matrix::<3>::identity();
                g.0[p][p] = C64::new(c, 0.0);
                g.0[p][q] = C64::new(s, 0.0);
                g.0[q][p] = -phase.conj() * s;
                g.0[q][q] = phase.conj() * c;
                a = g.adjoint() * a * g;
                a.0[p][q] = ZERO;
                a.0[q][p] = ZERO;
                for i in 0..3 {
                    a.0[i][i].im = 0.0;
                }
                v = v * g;
            }
        }
        Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS })
    }
}
