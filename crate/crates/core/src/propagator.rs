//! Midpoint-exponential integration of `i d|psi>/dt = H(t)|psi>`.
//!
//! One step maps `psi(t) -> exp(-i h H(t + h/2)) psi(t)`. Every step is an
//! exact unitary, so norms are conserved to rounding without rescaling, and
//! the scheme is second order in `h`.

use crate::error::{Error, Result};
use crate::linalg::{unitary_exponential, StateVector, UnitaryOperator};
use crate::models::Model;

/// Tolerance on `| ||psi0|| - 1 |` accepted by [`evolve`].
pub const INITIAL_NORM_TOL: f64 = 1e-10;

/// Uniform grid `t_start + k h`, `k = 0..=steps`, endpoints inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if t_end <= t_start {
            return Err(Error::InvalidGrid(format!(
                "t_end ({t_end}) must exceed t_start ({t_start})"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("steps must be positive".into()));
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            steps,
        })
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Number of samples, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.step()
        }
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.sample(k)).collect()
    }
}

/// Sampled solution `|psi(t_k)>`, optionally with the propagators `U(t_k)`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<StateVector>,
    pub propagators: Option<Vec<UnitaryOperator>>,
}

impl Trajectory {
    /// `max_k | ||psi_k|| - 1 |`.
    pub fn max_norm_error(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_k ||U_k^dag U_k - I||_max`, or `None` without propagators.
    pub fn max_unitarity_defect(&self) -> Option<f64> {
        self.propagators
            .as_ref()
            .map(|us| us.iter().map(|u| u.unitarity_defect()).fold(0.0, f64::max))
    }
}

/// `U(t_k)` for every grid sample, `U(t_start) = I`.
#[derive(Clone, Debug)]
pub struct Propagators {
    pub grid: TimeGrid,
    pub unitaries: Vec<UnitaryOperator>,
}

impl Propagators {
    /// Trajectory `U(t_k) psi0`, carrying the propagators along.
    pub fn apply(&self, psi0: &StateVector) -> Result<Trajectory> {
        check_initial_state(psi0, self.unitaries[0].dim())?;
        let states = self
            .unitaries
            .iter()
            .map(|u| u.apply(psi0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            grid: self.grid,
            states,
            propagators: Some(self.unitaries.clone()),
        })
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.unitaries
            .iter()
            .map(|u| u.unitarity_defect())
            .fold(0.0, f64::max)
    }
}

fn check_initial_state(psi0: &StateVector, dim: usize) -> Result<()> {
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: psi0.dim(),
        });
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > INITIAL_NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// Single step operator `exp(-i h H(t + h/2))`.
pub fn midpoint_step<M: Model + ?Sized>(model: &M, t: f64, h: f64) -> Result<UnitaryOperator> {
    unitary_exponential(&model.hamiltonian(t + h / 2.0)?, h)
}

pub fn evolve<M: Model + ?Sized>(
    model: &M,
    psi0: &StateVector,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    check_initial_state(psi0, model.dim())?;
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.len());
    states.push(psi0.clone());
    for k in 0..grid.steps {
        let step = midpoint_step(model, grid.sample(k), h)?;
        let next = step.apply(&states[k])?;
        states.push(next);
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        propagators: None,
    })
}

/// Time-ordered propagator `U[k+1] = exp(-i h H(t_k + h/2)) U[k]`, `U[0] = I`.
pub fn propagator_matrix<M: Model + ?Sized>(model: &M, grid: &TimeGrid) -> Result<Propagators> {
    let h = grid.step();
    let mut unitaries = Vec::with_capacity(grid.len());
    unitaries.push(UnitaryOperator::identity(model.dim())?);
    for k in 0..grid.steps {
        let step = midpoint_step(model, grid.sample(k), h)?;
        let next = step.compose(&unitaries[k])?;
        unitaries.push(next);
    }
    Ok(Propagators {
        grid: *grid,
        unitaries,
    })
}
