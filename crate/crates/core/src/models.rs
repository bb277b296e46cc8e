//! Time-dependent Hamiltonians.
//!
//! The rotating-field spin-1/2 (Schwinger) model carries closed-form
//! eigensystem and amplitudes that the test suites use as oracles. The
//! transformed model builds `H_b(t) = -U_a^dag(t) H_a(t) U_a(t)` from any base
//! model, and custom models are plain callbacks.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    unitary_exponential, CMatrix, Complex, HermitianOperator, StateVector, UnitaryOperator, I,
};
use crate::propagator::{propagator_matrix, TimeGrid};

/// A Hamiltonian `H(t)` together with its time derivative.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;
    fn hamiltonian(&self, t: f64) -> Result<HermitianOperator>;
    fn hamiltonian_derivative(&self, t: f64) -> Result<HermitianOperator>;

    /// Closed-form instantaneous eigenvectors in ascending-energy order, if known.
    fn analytic_eigenvectors(&self, _t: f64) -> Option<Vec<StateVector>> {
        None
    }
}

/// Field strength `omega0`, rotation rate `omega` and cone angle `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchwingerParams {
    pub omega0: f64,
    pub omega: f64,
    pub theta: f64,
}

impl SchwingerParams {
    pub fn new(omega0: f64, omega: f64, theta: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega0",
                reason: format!("must be finite and > 0, got {omega0}"),
            });
        }
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("must be finite and >= 0, got {omega}"),
            });
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must lie in [0, pi], got {theta}"),
            });
        }
        Ok(SchwingerParams {
            omega0,
            omega,
            theta,
        })
    }

    /// Effective Rabi frequency `sqrt(w0^2 + w^2 - 2 w0 w cos(theta))`.
    pub fn omega_tilde(&self) -> f64 {
        // same quantity written as a hypotenuse, exact at theta = 0 and theta = pi
        (self.omega0 - self.omega * self.theta.cos()).hypot(self.omega * self.theta.sin())
    }
}

pub fn schwinger_hamiltonian(p: &SchwingerParams, t: f64) -> HermitianOperator {
    let half = p.omega0 / 2.0;
    let (st, ct) = p.theta.sin_cos();
    let off = Complex::from_polar(half * st, -p.omega * t);
    let m = CMatrix::from_rows(&[
        vec![Complex::new(half * ct, 0.0), off],
        vec![off.conj(), Complex::new(-half * ct, 0.0)],
    ])
    .expect("2x2 Schwinger matrix");
    HermitianOperator::new(m).expect("Schwinger matrix is Hermitian by construction")
}

pub fn schwinger_hamiltonian_derivative(p: &SchwingerParams, t: f64) -> HermitianOperator {
    let half = p.omega0 / 2.0;
    let off = -I * p.omega * Complex::from_polar(half * p.theta.sin(), -p.omega * t);
    let zero = Complex::new(0.0, 0.0);
    let m = CMatrix::from_rows(&[vec![zero, off], vec![off.conj(), zero]]).expect("2x2 matrix");
    HermitianOperator::new(m).expect("derivative is Hermitian by construction")
}

/// Closed-form eigensystem of the Schwinger model in the phase convention
/// `|E1> = (e^{-iwt/2} sin(theta/2), -e^{iwt/2} cos(theta/2))`,
/// `|E2> = (e^{-iwt/2} cos(theta/2),  e^{iwt/2} sin(theta/2))`.
#[derive(Clone, Debug, PartialEq)]
pub struct SchwingerEigensystem {
    pub energies: [f64; 2],
    pub vectors: [StateVector; 2],
    /// Exact time derivatives of `vectors`.
    pub derivatives: [StateVector; 2],
}

pub fn schwinger_analytic_eigensystem(p: &SchwingerParams, t: f64) -> SchwingerEigensystem {
    let (s, c) = (p.theta / 2.0).sin_cos();
    let down = Complex::from_polar(1.0, -p.omega * t / 2.0);
    let up = Complex::from_polar(1.0, p.omega * t / 2.0);
    let dw = I * (p.omega / 2.0);
    let v1 = vec![down * s, -up * c];
    let v2 = vec![down * c, up * s];
    let d1 = vec![-dw * down * s, -dw * up * c];
    let d2 = vec![-dw * down * c, dw * up * s];
    SchwingerEigensystem {
        energies: [-p.omega0 / 2.0, p.omega0 / 2.0],
        vectors: [
            StateVector::from_vec_unchecked(v1),
            StateVector::from_vec_unchecked(v2),
        ],
        derivatives: [
            StateVector::from_vec_unchecked(d1),
            StateVector::from_vec_unchecked(d2),
        ],
    }
}

// sin(w t / 2) / w, continuous at w = 0
fn half_sinc(w: f64, t: f64) -> f64 {
    let x = w * t / 2.0;
    if x.abs() < 1e-8 {
        t / 2.0 * (1.0 - x * x / 6.0)
    } else {
        (w * t / 2.0).sin() / w
    }
}

/// Exact Schwinger solution for `|psi(0)> = |E1(0)>`, expanded in the
/// phase convention of [`schwinger_analytic_eigensystem`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticSolution {
    pub params: SchwingerParams,
    pub omega_tilde: f64,
}

impl AnalyticSolution {
    pub fn new(params: SchwingerParams) -> Self {
        AnalyticSolution {
            params,
            omega_tilde: params.omega_tilde(),
        }
    }

    /// `(c1(t), c2(t))`.
    pub fn amplitudes(&self, t: f64) -> (Complex, Complex) {
        let p = &self.params;
        let wt = self.omega_tilde;
        let sinc = half_sinc(wt, t);
        let c1 = Complex::new(
            (wt * t / 2.0).cos(),
            sinc * (p.omega0 - p.omega * p.theta.cos()),
        );
        let c2 = Complex::new(0.0, p.omega * p.theta.sin() * sinc);
        (c1, c2)
    }

    /// `beta_1(t) = w0 t/2 - (w t/2) cos(theta)`.
    pub fn beta_ground(&self, t: f64) -> f64 {
        let p = &self.params;
        p.omega0 * t / 2.0 - p.omega * t / 2.0 * p.theta.cos()
    }

    /// `<E2|dE1/dt> = -(i w/2) sin(theta)`.
    pub fn coupling(&self) -> Complex {
        -I * (self.params.omega / 2.0 * self.params.theta.sin())
    }

    /// `|<E2|dE1/dt>| / (E2 - E1) = (w / 2 w0) sin(theta)`.
    pub fn qac_ratio(&self) -> f64 {
        self.params.omega / (2.0 * self.params.omega0) * self.params.theta.sin()
    }

    /// `Q2(t) = e^{i beta_1} (w / 2 w0) sin(theta)`.
    pub fn q2(&self, t: f64) -> Complex {
        Complex::from_polar(self.qac_ratio(), self.beta_ground(t))
    }

    /// `R2(t) = w sin(theta) [i sin(w~ t/2)/w~ - e^{i beta_1}/(2 w0)]`.
    pub fn r2(&self, t: f64) -> Complex {
        let p = &self.params;
        let bracket = I * half_sinc(self.omega_tilde, t)
            - Complex::from_polar(1.0, self.beta_ground(t)) / (2.0 * p.omega0);
        bracket * (p.omega * p.theta.sin())
    }

    /// `max_t |c2(t)| = (w / w~) sin(theta)`.
    pub fn max_abs_c2(&self) -> f64 {
        self.params.omega * self.params.theta.sin() / self.omega_tilde
    }

    /// `|psi(t)> = c1 |E1(t)> + c2 |E2(t)>`.
    pub fn state(&self, t: f64) -> StateVector {
        let (c1, c2) = self.amplitudes(t);
        let eig = schwinger_analytic_eigensystem(&self.params, t);
        &eig.vectors[0].scaled(c1) + &eig.vectors[1].scaled(c2)
    }
}

pub fn schwinger_analytic_amplitudes(p: &SchwingerParams, t: f64) -> (Complex, Complex) {
    AnalyticSolution::new(*p).amplitudes(t)
}

/// `H_b = -U_a^dag H_a U_a`.
pub fn transformed_hamiltonian(
    u_a: &UnitaryOperator,
    h_a: &HermitianOperator,
) -> Result<HermitianOperator> {
    conjugate_negated(u_a, h_a)
}

/// `dH_b/dt = -U_a^dag (dH_a/dt) U_a`; the terms from `dU_a/dt = -i H_a U_a` cancel.
pub fn transformed_hamiltonian_derivative(
    u_a: &UnitaryOperator,
    hdot_a: &HermitianOperator,
) -> Result<HermitianOperator> {
    conjugate_negated(u_a, hdot_a)
}

fn conjugate_negated(u: &UnitaryOperator, h: &HermitianOperator) -> Result<HermitianOperator> {
    if u.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: h.dim(),
        });
    }
    let m = u
        .matrix()
        .adjoint()
        .matmul(h.matrix())?
        .matmul(u.matrix())?;
    HermitianOperator::new(m.scaled(Complex::new(-1.0, 0.0)))
}

/// `H_b(t) = -U_a^dag(t) H_a(t) U_a(t)` with `U_a` tabulated on a uniform grid.
///
/// Off-grid times are reached by one midpoint-exponential sub-step from the
/// nearest tabulated time below, which agrees with the table at the knots.
pub struct TransformedModel {
    base: ModelHandle,
    grid: TimeGrid,
    table: Vec<UnitaryOperator>,
}

impl TransformedModel {
    pub fn new(base: ModelHandle, grid: TimeGrid) -> Result<Self> {
        let table = propagator_matrix(&base, &grid)?.unitaries;
        Ok(TransformedModel { base, grid, table })
    }

    pub fn base(&self) -> &ModelHandle {
        &self.base
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `U_a(t)`.
    pub fn base_propagator(&self, t: f64) -> Result<UnitaryOperator> {
        let h = self.grid.step();
        let x = (t - self.grid.t_start) / h;
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 && nearest >= 0.0 && nearest <= self.grid.steps as f64 {
            return Ok(self.table[nearest as usize].clone());
        }
        let k = (x.floor().max(0.0) as usize).min(self.grid.steps);
        let tk = self.grid.sample(k);
        let dt = t - tk;
        let step = unitary_exponential(&self.base.hamiltonian(tk + dt / 2.0)?, dt)?;
        step.compose(&self.table[k])
    }
}

impl Model for TransformedModel {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn hamiltonian(&self, t: f64) -> Result<HermitianOperator> {
        transformed_hamiltonian(&self.base_propagator(t)?, &self.base.hamiltonian(t)?)
    }

    fn hamiltonian_derivative(&self, t: f64) -> Result<HermitianOperator> {
        transformed_hamiltonian_derivative(
            &self.base_propagator(t)?,
            &self.base.hamiltonian_derivative(t)?,
        )
    }
}

type OperatorFn = dyn Fn(f64) -> Result<HermitianOperator> + Send + Sync;

/// Callback-defined model. Without an explicit derivative, `dH/dt` is a
/// central difference with step `fd_step`.
#[derive(Clone)]
pub struct CustomModel {
    dim: usize,
    hamiltonian: Arc<OperatorFn>,
    derivative: Option<Arc<OperatorFn>>,
    fd_step: f64,
}

impl CustomModel {
    pub fn new<F>(dim: usize, hamiltonian: F) -> Self
    where
        F: Fn(f64) -> Result<HermitianOperator> + Send + Sync + 'static,
    {
        CustomModel {
            dim,
            hamiltonian: Arc::new(hamiltonian),
            derivative: None,
            fd_step: 1e-5,
        }
    }

    pub fn with_derivative<F>(mut self, derivative: F) -> Self
    where
        F: Fn(f64) -> Result<HermitianOperator> + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    fn checked(&self, h: HermitianOperator) -> Result<HermitianOperator> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: h.dim(),
            });
        }
        Ok(h)
    }
}

impl Model for CustomModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn hamiltonian(&self, t: f64) -> Result<HermitianOperator> {
        self.checked((self.hamiltonian)(t)?)
    }

    fn hamiltonian_derivative(&self, t: f64) -> Result<HermitianOperator> {
        match &self.derivative {
            Some(d) => self.checked(d(t)?),
            None => {
                let h = self.fd_step;
                let plus = self.hamiltonian(t + h)?;
                let minus = self.hamiltonian(t - h)?;
                let diff = (plus.matrix() - minus.matrix()).scaled(Complex::new(0.5 / h, 0.0));
                HermitianOperator::new(diff)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Schwinger,
    Transformed,
    Custom,
}

/// Cheaply clonable handle over the supported model families.
#[derive(Clone)]
pub enum ModelHandle {
    Schwinger(SchwingerParams),
    Transformed(Arc<TransformedModel>),
    Custom(CustomModel),
}

impl fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelHandle::Schwinger(p) => f.debug_tuple("Schwinger").field(p).finish(),
            ModelHandle::Transformed(m) => f
                .debug_struct("Transformed")
                .field("base", &m.base)
                .field("grid", &m.grid)
                .finish(),
            ModelHandle::Custom(m) => f.debug_struct("Custom").field("dim", &m.dim).finish(),
        }
    }
}

impl ModelHandle {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelHandle::Schwinger(_) => ModelKind::Schwinger,
            ModelHandle::Transformed(_) => ModelKind::Transformed,
            ModelHandle::Custom(_) => ModelKind::Custom,
        }
    }

    /// System B of the Marzlin-Sanders construction, with `U_a` tabulated on `grid`.
    pub fn transformed(base: ModelHandle, grid: TimeGrid) -> Result<Self> {
        Ok(ModelHandle::Transformed(Arc::new(TransformedModel::new(
            base, grid,
        )?)))
    }

    /// Time-independent diagonal Hamiltonian.
    pub fn static_diagonal(energies: &[f64]) -> Result<Self> {
        let h = HermitianOperator::diagonal(energies)?;
        let zero = HermitianOperator::zeros(energies.len())?;
        let dim = h.dim();
        Ok(ModelHandle::Custom(
            CustomModel::new(dim, move |_| Ok(h.clone()))
                .with_derivative(move |_| Ok(zero.clone())),
        ))
    }

    /// Smooth seeded random model
    /// `H(t) = diag(-(d-1), ..., d-1) + 0.1 (A0 + cos(0.7 t) A1 + sin(1.3 t) A2)`
    /// with `A_k` random Hermitian (entries uniform in the unit square).
    /// Levels are spaced by 2, so the spectrum stays nondegenerate.
    pub fn random_smooth(dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::with_capacity(3);
        for _ in 0..3 {
            a.push(random_hermitian(dim, &mut rng)?.scaled(0.1));
        }
        let levels: Vec<f64> = (0..dim)
            .map(|i| 2.0 * i as f64 - (dim as f64 - 1.0))
            .collect();
        let base = HermitianOperator::diagonal(&levels)?.sum(&a[0])?;
        let (a1, a2) = (a[1].clone(), a[2].clone());
        let (b1, b2) = (a1.clone(), a2.clone());
        let model = CustomModel::new(dim, move |t| {
            base.sum(&a1.scaled((0.7 * t).cos()))?
                .sum(&a2.scaled((1.3 * t).sin()))
        })
        .with_derivative(move |t| {
            b1.scaled(-0.7 * (0.7 * t).sin())
                .sum(&b2.scaled(1.3 * (1.3 * t).cos()))
        });
        Ok(ModelHandle::Custom(model))
    }

    /// `H(t) + shift(t) I`, with `rate` the derivative of `shift`.
    pub fn with_energy_shift<S, R>(&self, shift: S, rate: R) -> Self
    where
        S: Fn(f64) -> f64 + Send + Sync + 'static,
        R: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let base = self.clone();
        let base_d = self.clone();
        ModelHandle::Custom(
            CustomModel::new(self.dim(), move |t| {
                Ok(base.hamiltonian(t)?.shifted(shift(t)))
            })
            .with_derivative(move |t| Ok(base_d.hamiltonian_derivative(t)?.shifted(rate(t)))),
        )
    }
}

impl Model for ModelHandle {
    fn dim(&self) -> usize {
        match self {
            ModelHandle::Schwinger(_) => 2,
            ModelHandle::Transformed(m) => m.dim(),
            ModelHandle::Custom(m) => m.dim(),
        }
    }

    fn hamiltonian(&self, t: f64) -> Result<HermitianOperator> {
        match self {
            ModelHandle::Schwinger(p) => Ok(schwinger_hamiltonian(p, t)),
            ModelHandle::Transformed(m) => m.hamiltonian(t),
            ModelHandle::Custom(m) => m.hamiltonian(t),
        }
    }

    fn hamiltonian_derivative(&self, t: f64) -> Result<HermitianOperator> {
        match self {
            ModelHandle::Schwinger(p) => Ok(schwinger_hamiltonian_derivative(p, t)),
            ModelHandle::Transformed(m) => m.hamiltonian_derivative(t),
            ModelHandle::Custom(m) => m.hamiltonian_derivative(t),
        }
    }

    fn analytic_eigenvectors(&self, t: f64) -> Option<Vec<StateVector>> {
        match self {
            ModelHandle::Schwinger(p) => {
                Some(schwinger_analytic_eigensystem(p, t).vectors.to_vec())
            }
            _ => None,
        }
    }
}

/// Random Hermitian matrix with entries uniform in `[-1, 1]` (real and imaginary parts).
pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> Result<HermitianOperator> {
    let mut m = CMatrix::zeros(dim)?;
    for i in 0..dim {
        m[(i, i)] = Complex::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermitianOperator::new(m)
}
