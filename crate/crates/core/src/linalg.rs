//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything here is sized for `2 <= dim <= 64`: matrices are stored row-major
//! in a flat `Vec`, and the Hermitian eigensolver is a cyclic complex Jacobi
//! iteration. The propagator and the spectral tracker both sit on top of
//! [`hermitian_eigendecompose`] and [`unitary_exponential`].

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 64;

/// Elementwise Hermiticity tolerance, relative to `max(1, max|H_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Max-norm tolerance on `U^dag U - I` for a validated [`UnitaryOperator`].
pub const UNITARY_TOL: f64 = 1e-10;
/// Jacobi stops once the off-diagonal Frobenius norm drops below this fraction of `||H||_F`.
pub const JACOBI_TOL: f64 = 1e-14;
pub const JACOBI_MAX_SWEEPS: usize = 100;

pub(crate) const I: Complex = Complex::new(0.0, 1.0);

fn check_dim(dim: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

fn is_finite(z: &Complex) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Complex amplitude vector. Used for `|psi(t)>`, eigenvectors and `|D(t)>`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex>) -> Result<Self> {
        check_dim(amps.len())?;
        if !amps.iter().all(is_finite) {
            return Err(Error::NonFinite);
        }
        Ok(StateVector { amps })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(StateVector {
            amps: vec![Complex::new(0.0, 0.0); dim],
        })
    }

    /// Standard basis vector `e_index` (0-based).
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        let mut v = Self::zeros(dim)?;
        if index >= dim {
            return Err(Error::LevelOutOfRange { index, dim });
        }
        v.amps[index] = Complex::new(1.0, 0.0);
        Ok(v)
    }

    pub(crate) fn from_vec_unchecked(amps: Vec<Complex>) -> Self {
        StateVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.amps.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: Complex) -> StateVector {
        StateVector {
            amps: self.amps.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn normalized(&self) -> Result<StateVector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(self.scaled(Complex::new(1.0 / n, 0.0)))
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex> {
        inner(self, other)
    }

    fn zip_with(
        &self,
        other: &StateVector,
        f: impl Fn(Complex, Complex) -> Complex,
    ) -> StateVector {
        assert_eq!(self.dim(), other.dim(), "state dimension mismatch");
        StateVector {
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Index<usize> for StateVector {
    type Output = Complex;
    fn index(&self, i: usize) -> &Complex {
        &self.amps[i]
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// `<u|v>`. Rejects vectors of different dimension.
pub fn inner(u: &StateVector, v: &StateVector) -> Result<Complex> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(u.amps.iter().zip(&v.amps).map(|(a, b)| a.conj() * b).sum())
}

/// General square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(CMatrix {
            dim,
            data: vec![Complex::new(0.0, 0.0); dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m[(i, i)] = Complex::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex) -> Result<Self> {
        check_dim(dim)?;
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        if !data.iter().all(is_finite) {
            return Err(Error::NonFinite);
        }
        Ok(CMatrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        let dim = rows.len();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        Self::from_fn(dim, |i, j| rows[i][j])
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_fn(values.len(), |i, j| {
            if i == j {
                Complex::new(values[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> CMatrix {
        let n = self.dim;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] = self.data[j * n + i].conj();
            }
        }
        out
    }

    pub fn scaled(&self, factor: Complex) -> CMatrix {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        let n = self.dim;
        let mut out = vec![Complex::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex::new(0.0, 0.0) {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(CMatrix { dim: n, data: out })
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        let n = self.dim;
        let amps = (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v.amplitudes())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(StateVector::from_vec_unchecked(amps))
    }

    /// Max-norm `max_ij |M_ij|`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max_ij |M_ij - conj(M_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `max_ij |(M^dag M - I)_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex::new(0.0, 0.0);
                for k in 0..n {
                    acc += self[(k, i)].conj() * self[(k, j)];
                }
                if i == j {
                    acc -= 1.0;
                }
                dev = dev.max(acc.norm());
            }
        }
        dev
    }

    /// `max_ij |M_ij - delta_ij|`.
    pub fn identity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((self[(i, j)] - target).norm());
            }
        }
        dev
    }

    fn zip_with(&self, other: &CMatrix, f: impl Fn(Complex, Complex) -> Complex) -> CMatrix {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex;
    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix dimension mismatch")
    }
}

/// Hermitian matrix; houses `H(t)` and `dH/dt`.
///
/// Construction checks Hermiticity and then replaces the matrix by its exact
/// Hermitian part, so downstream code never sees a rounding-level asymmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        let scale = m.max_abs().max(1.0);
        let deviation = m.hermitian_deviation();
        let n = m.dim();
        let diag_imag = (0..n).map(|i| m[(i, i)].im.abs()).fold(0.0, f64::max);
        let worst = deviation.max(diag_imag);
        if worst > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation: worst });
        }
        let mut h = m;
        for i in 0..n {
            h[(i, i)].im = 0.0;
            for j in (i + 1)..n {
                let avg = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
                h[(i, j)] = avg;
                h[(j, i)] = avg.conj();
            }
        }
        Ok(HermitianOperator(h))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Ok(HermitianOperator(CMatrix::zeros(dim)?))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Ok(HermitianOperator(CMatrix::diagonal(values)?))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.0.apply(v)
    }

    /// `<u|H|v>`.
    pub fn matrix_element(&self, u: &StateVector, v: &StateVector) -> Result<Complex> {
        inner(u, &self.apply(v)?)
    }

    pub fn scaled(&self, factor: f64) -> HermitianOperator {
        HermitianOperator(self.0.scaled(Complex::new(factor, 0.0)))
    }

    /// `H + shift * I`.
    pub fn shifted(&self, shift: f64) -> HermitianOperator {
        let mut m = self.0.clone();
        for i in 0..m.dim() {
            m[(i, i)] += shift;
        }
        HermitianOperator(m)
    }

    pub fn sum(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(HermitianOperator(&self.0 + &other.0))
    }

    /// Largest eigenvalue magnitude bound used for relative tolerances (Frobenius norm).
    pub fn norm(&self) -> f64 {
        self.0.frobenius_norm()
    }
}

impl Index<(usize, usize)> for HermitianOperator {
    type Output = Complex;
    fn index(&self, idx: (usize, usize)) -> &Complex {
        &self.0[idx]
    }
}

/// Unitary matrix; houses propagators `U(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        let deviation = m.unitarity_defect();
        if deviation.is_nan() || deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(UnitaryOperator(m))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        UnitaryOperator(m)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Ok(UnitaryOperator(CMatrix::identity(dim)?))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        UnitaryOperator(self.0.adjoint())
    }

    /// `self * other`; the product of unitaries is unitary up to rounding.
    pub fn compose(&self, other: &UnitaryOperator) -> Result<UnitaryOperator> {
        Ok(UnitaryOperator(self.0.matmul(&other.0)?))
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.0.apply(v)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.0.unitarity_defect()
    }
}

impl Index<(usize, usize)> for UnitaryOperator {
    type Output = Complex;
    fn index(&self, idx: (usize, usize)) -> &Complex {
        &self.0[idx]
    }
}

/// Eigenvalues in ascending order with their orthonormal eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigensystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
}

impl Eigensystem {
    /// `V diag(lambda) V^dag`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut m = CMatrix::zeros(n).expect("eigensystem dimension");
        for (lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += v[i] * v[j].conj() * *lambda;
                }
            }
        }
        m
    }

    /// Smallest gap between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation strips the phase of `a_pq` and then applies the real Jacobi
/// plane rotation that annihilates it. Sweeps continue until the off-diagonal
/// Frobenius norm is at most `JACOBI_TOL * ||H||_F`.
pub fn hermitian_eigendecompose(h: &HermitianOperator) -> Result<Eigensystem> {
    let n = h.dim();
    let mut a = h.matrix().clone();
    let mut v = CMatrix::identity(n)?;
    let scale = a.frobenius_norm();
    let target = JACOBI_TOL * scale;

    let mut converged = off_diagonal_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off_diagonal_norm(&a),
            });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        converged = off_diagonal_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    if !eigenvalues.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let eigenvectors = order
        .iter()
        .map(|&col| StateVector::from_vec_unchecked((0..n).map(|row| v[(row, col)]).collect()))
        .collect();
    Ok(Eigensystem {
        eigenvalues,
        eigenvectors,
    })
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase = apq / r;
    let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * r);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.dim();
    // A <- A G, columns p and q
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * phase.conj() * s;
        a[(k, q)] = akp * phase * s + akq * c;
    }
    // A <- G^dag A, rows p and q
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * phase.conj() * s + aqk * c;
    }
    a[(p, q)] = Complex::new(0.0, 0.0);
    a[(q, p)] = Complex::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * phase.conj() * s;
        v[(k, q)] = vkp * phase * s + vkq * c;
    }
}

/// `exp(-i s H)` via the spectral decomposition of `H`.
pub fn unitary_exponential(h: &HermitianOperator, s: f64) -> Result<UnitaryOperator> {
    let eig = hermitian_eigendecompose(h)?;
    let n = h.dim();
    let phases: Vec<Complex> = eig
        .eigenvalues
        .iter()
        .map(|&lambda| Complex::from_polar(1.0, -s * lambda))
        .collect();
    let mut u = CMatrix::zeros(n)?;
    for (k, vk) in eig.eigenvectors.iter().enumerate() {
        for i in 0..n {
            let left = vk[i] * phases[k];
            for j in 0..n {
                u[(i, j)] += left * vk[j].conj();
            }
        }
    }
    Ok(UnitaryOperator::from_matrix_unchecked(u))
}
