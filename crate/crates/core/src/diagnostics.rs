//! Transition amplitudes and the exact decomposition `c_m = Q_m + R_m`.
//!
//! With `|psi_adi> = e^{i beta_n} |E_n>` and `|D> = |psi> - |psi_adi>`:
//!
//! ```text
//! Q_m = i e^{i beta_n} <E_m|dE_n/dt> / (E_m - E_n)
//! R_m = -E_n <E_m|D> / (E_m - E_n) + i <E_m|dD/dt> / (E_m - E_n)
//! ```
//!
//! `dD/dt` is composed analytically from `-i H psi` and the derivative of the
//! adiabatic state; `D` itself is never differenced.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inner, Complex, StateVector, I};
use crate::propagator::Trajectory;
use crate::spectral::{
    berry_phase, qac_ratio, BerryPhaseAccumulator, SpectralFrame, SpectralTrack,
};

/// Margin standing in for "much smaller than" in the criteria flags.
pub const DEFAULT_MARGIN: f64 = 0.1;
/// `|E_n|` at or below this fraction of `||H||_F` counts as zero energy.
pub const ZERO_ENERGY_TOL: f64 = 1e-12;

/// `e^{i beta_n} |E_n>` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct AdiabaticState {
    pub t: f64,
    pub vector: StateVector,
}

fn energy_is_zero(frame: &SpectralFrame, n: usize) -> bool {
    frame.eigenvalues[n].abs() <= ZERO_ENERGY_TOL * frame.hamiltonian.norm()
}

/// `c_i = <E_i|psi>` for every level.
pub fn amplitudes(frame: &SpectralFrame, psi: &StateVector) -> Result<Vec<Complex>> {
    frame.eigenvectors.iter().map(|e| inner(e, psi)).collect()
}

pub fn adiabatic_state(frame: &SpectralFrame, beta_n: f64, n: usize) -> Result<AdiabaticState> {
    frame.check_level(n)?;
    Ok(AdiabaticState {
        t: frame.t,
        vector: frame.eigenvectors[n].scaled(Complex::from_polar(1.0, beta_n)),
    })
}

/// `|D> = |psi> - |psi_adi>`.
pub fn difference_vector(psi: &StateVector, adi: &AdiabaticState) -> Result<StateVector> {
    if psi.dim() != adi.vector.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            found: adi.vector.dim(),
        });
    }
    Ok(psi - &adi.vector)
}

/// `dD/dt = -i H psi - e^{i beta_n} (|dE_n/dt> + i (d beta_n/dt) |E_n>)` with
/// `d beta_n/dt = -E_n + i <E_n|dE_n/dt>`.
pub fn difference_vector_derivative(
    frame: &SpectralFrame,
    psi: &StateVector,
    beta_n: f64,
    n: usize,
) -> Result<StateVector> {
    frame.check_level(n)?;
    let h_psi = frame.hamiltonian.apply(psi)?.scaled(-I);
    let en = &frame.eigenvectors[n];
    let en_dot = &frame.eigenvector_derivatives[n];
    let beta_rate = -frame.eigenvalues[n] + I * inner(en, en_dot)?;
    let phase = Complex::from_polar(1.0, beta_n);
    let adi_rate = (en_dot + &en.scaled(I * beta_rate)).scaled(phase);
    Ok(&h_psi - &adi_rate)
}

/// `Q_m = i e^{i beta_n} <E_m|dE_n/dt> / (E_m - E_n)`.
pub fn q_term(frame: &SpectralFrame, beta_n: f64, m: usize, n: usize) -> Result<Complex> {
    let gap = frame.gap(m, n)?;
    Ok(I * Complex::from_polar(1.0, beta_n) * frame.coupling(m, n)? / gap)
}

/// `R_m = (-E_n <E_m|D> + i <E_m|dD/dt>) / (E_m - E_n)`.
pub fn r_term(
    frame: &SpectralFrame,
    d: &StateVector,
    d_dot: &StateVector,
    m: usize,
    n: usize,
) -> Result<Complex> {
    let gap = frame.gap(m, n)?;
    let em = &frame.eigenvectors[m];
    Ok((-frame.eigenvalues[n] * inner(em, d)? + I * inner(em, d_dot)?) / gap)
}

/// `|c_m - Q_m - R_m|`.
pub fn decomposition_residual(c_m: Complex, q_m: Complex, r_m: Complex) -> f64 {
    (c_m - q_m - r_m).norm()
}

/// `|<E_n|dD/dt> + i E_n <E_n|D>|`, which vanishes identically.
pub fn lambda_residual(
    frame: &SpectralFrame,
    d: &StateVector,
    d_dot: &StateVector,
    n: usize,
) -> Result<f64> {
    frame.check_level(n)?;
    let en = &frame.eigenvectors[n];
    Ok((inner(en, d_dot)? + I * frame.eigenvalues[n] * inner(en, d)?).norm())
}

/// `||i dD/dt - E_n D||`; zero exactly when every `R_m` vanishes.
pub fn equivalence_residual(d: &StateVector, d_dot: &StateVector, e_n: f64) -> f64 {
    (&d_dot.scaled(I) - &d.scaled(Complex::new(e_n, 0.0))).norm()
}

/// Criteria on the size of `D` and `dD/dt` relative to the gap `E_m - E_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriteriaCheck {
    pub m: usize,
    /// `||D|| / |(E_m - E_n)/E_n|`.
    pub ratio_d: f64,
    /// `||dD/dt|| / |E_m - E_n|`.
    pub ratio_d_dot: f64,
    /// `||i dD/dt - E_n D|| / |E_m - E_n|`.
    pub ratio_general: f64,
    /// Same as `ratio_d` with `||D||` replaced by `|<E_m|D>|`.
    pub projected_ratio_d: f64,
    /// Same as `ratio_d_dot` with `|<E_m|dD/dt>|`.
    pub projected_ratio_d_dot: f64,
    /// `ratio_d < margin`; `None` when `E_n = 0`.
    pub small_d: Option<bool>,
    pub small_d_dot: bool,
    pub general: bool,
}

pub fn criteria_check(
    frame: &SpectralFrame,
    d: &StateVector,
    d_dot: &StateVector,
    m: usize,
    n: usize,
    margin: f64,
) -> Result<CriteriaCheck> {
    let gap = frame.gap(m, n)?.abs();
    let e_n = frame.eigenvalues[n];
    let em = &frame.eigenvectors[m];
    let ratio_d = d.norm() * e_n.abs() / gap;
    let ratio_d_dot = d_dot.norm() / gap;
    let ratio_general = equivalence_residual(d, d_dot, e_n) / gap;
    Ok(CriteriaCheck {
        m,
        ratio_d,
        ratio_d_dot,
        ratio_general,
        projected_ratio_d: inner(em, d)?.norm() * e_n.abs() / gap,
        projected_ratio_d_dot: inner(em, d_dot)?.norm() / gap,
        small_d: (!energy_is_zero(frame, n)).then_some(ratio_d < margin),
        small_d_dot: ratio_d_dot < margin,
        general: ratio_general < margin,
    })
}

/// `c_n = e^{i beta_n} + i <E_n|dD/dt> / E_n`; undefined for `E_n = 0`.
pub fn c_n_reconstruction(
    beta_n: f64,
    d_dot: &StateVector,
    frame: &SpectralFrame,
    n: usize,
) -> Result<Complex> {
    frame.check_level(n)?;
    if energy_is_zero(frame, n) {
        return Err(Error::ZeroEnergy { level: n });
    }
    let en = &frame.eigenvectors[n];
    Ok(Complex::from_polar(1.0, beta_n) + I * inner(en, d_dot)? / frame.eigenvalues[n])
}

/// First-order amplitude `i <E_m|dE_n/dt> / (E_m - E_n) (e^{i (E_m - E_n) t} - 1)`.
pub fn schiff_amplitude(frame: &SpectralFrame, t: f64, m: usize, n: usize) -> Result<Complex> {
    let gap = frame.gap(m, n)?;
    let bracket = Complex::from_polar(1.0, gap * t) - 1.0;
    Ok(I * frame.coupling(m, n)? / gap * bracket)
}

/// Every diagnostic quantity at one grid sample. Per-level vectors hold
/// `None` at the tracked level, where gap denominators vanish.
#[derive(Clone, Debug)]
pub struct DiagnosticsSample {
    pub t: f64,
    pub c: Vec<Complex>,
    pub beta_n: f64,
    pub q: Vec<Option<Complex>>,
    pub r: Vec<Option<Complex>>,
    pub d_norm: f64,
    pub d_dot_norm: f64,
    pub qac: Vec<Option<f64>>,
    pub decomposition_residual: Vec<Option<f64>>,
    pub lambda_residual: f64,
    pub equivalence_residual: f64,
    /// `|c_n - reconstruction|`, `None` when `E_n = 0`.
    pub c_n_reconstruction_residual: Option<f64>,
    pub schiff: Vec<Option<Complex>>,
    pub criteria: Vec<Option<CriteriaCheck>>,
    /// `| ||psi|| - 1 |`.
    pub norm_error: f64,
    /// `| sum_i |c_i|^2 - 1 |`.
    pub probability_error: f64,
    /// `|<psi_adi|psi>|`.
    pub fidelity: f64,
}

impl DiagnosticsSample {
    pub fn max_decomposition_residual(&self) -> f64 {
        self.decomposition_residual
            .iter()
            .flatten()
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// Diagnostics for one sample given the frame, state and accumulated phase.
/// `elapsed` is the time since the start of the run, used by the first-order amplitude.
pub fn diagnose_sample(
    frame: &SpectralFrame,
    psi: &StateVector,
    beta_n: f64,
    n: usize,
    elapsed: f64,
    margin: f64,
) -> Result<DiagnosticsSample> {
    let dim = frame.dim();
    frame.check_level(n)?;
    let c = amplitudes(frame, psi)?;
    let adi = adiabatic_state(frame, beta_n, n)?;
    let d = difference_vector(psi, &adi)?;
    let d_dot = difference_vector_derivative(frame, psi, beta_n, n)?;

    let mut q = vec![None; dim];
    let mut r = vec![None; dim];
    let mut qac = vec![None; dim];
    let mut residual = vec![None; dim];
    let mut schiff = vec![None; dim];
    let mut criteria = vec![None; dim];
    for m in (0..dim).filter(|&m| m != n) {
        let qm = q_term(frame, beta_n, m, n)?;
        let rm = r_term(frame, &d, &d_dot, m, n)?;
        q[m] = Some(qm);
        r[m] = Some(rm);
        residual[m] = Some(decomposition_residual(c[m], qm, rm));
        qac[m] = Some(qac_ratio(frame, m, n)?);
        schiff[m] = Some(schiff_amplitude(frame, elapsed, m, n)?);
        criteria[m] = Some(criteria_check(frame, &d, &d_dot, m, n, margin)?);
    }

    let c_n_reconstruction_residual = match c_n_reconstruction(beta_n, &d_dot, frame, n) {
        Ok(v) => Some((v - c[n]).norm()),
        Err(Error::ZeroEnergy { .. }) => None,
        Err(e) => return Err(e),
    };

    Ok(DiagnosticsSample {
        t: frame.t,
        beta_n,
        q,
        r,
        d_norm: d.norm(),
        d_dot_norm: d_dot.norm(),
        qac,
        decomposition_residual: residual,
        lambda_residual: lambda_residual(frame, &d, &d_dot, n)?,
        equivalence_residual: equivalence_residual(&d, &d_dot, frame.eigenvalues[n]),
        c_n_reconstruction_residual,
        schiff,
        criteria,
        norm_error: (psi.norm() - 1.0).abs(),
        probability_error: (c.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs(),
        fidelity: inner(&adi.vector, psi)?.norm(),
        c,
    })
}

/// Full diagnostic time series for level `n`.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub level: usize,
    pub beta: BerryPhaseAccumulator,
    pub samples: Vec<DiagnosticsSample>,
}

impl Diagnostics {
    fn max_of(&self, f: impl Fn(&DiagnosticsSample) -> f64) -> f64 {
        self.samples.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_decomposition_residual(&self) -> f64 {
        self.max_of(|s| s.max_decomposition_residual())
    }

    pub fn max_lambda_residual(&self) -> f64 {
        self.max_of(|s| s.lambda_residual)
    }

    pub fn max_c_n_reconstruction_residual(&self) -> f64 {
        self.max_of(|s| s.c_n_reconstruction_residual.unwrap_or(0.0))
    }

    pub fn max_norm_error(&self) -> f64 {
        self.max_of(|s| s.norm_error)
    }

    pub fn max_probability_error(&self) -> f64 {
        self.max_of(|s| s.probability_error)
    }

    pub fn min_fidelity(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.fidelity)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_c(&self, m: usize) -> f64 {
        self.max_of(|s| s.c[m].norm())
    }

    pub fn max_abs_q(&self, m: usize) -> f64 {
        self.max_of(|s| s.q[m].map_or(0.0, |z| z.norm()))
    }

    pub fn max_abs_r(&self, m: usize) -> f64 {
        self.max_of(|s| s.r[m].map_or(0.0, |z| z.norm()))
    }

    pub fn max_qac(&self, m: usize) -> f64 {
        self.max_of(|s| s.qac[m].unwrap_or(0.0))
    }
}

/// Runs [`diagnose_sample`] over a trajectory and its spectral track.
///
/// `beta_n` is accumulated sequentially first; the per-sample work is then
/// independent and runs in parallel.
pub fn diagnose(
    trajectory: &Trajectory,
    track: &SpectralTrack,
    n: usize,
    margin: f64,
) -> Result<Diagnostics> {
    if trajectory.states.len() != track.len() {
        return Err(Error::DimensionMismatch {
            expected: track.len(),
            found: trajectory.states.len(),
        });
    }
    let beta = berry_phase(track, n)?;
    let t0 = track.grid.t_start;
    let samples = track
        .frames
        .par_iter()
        .zip(trajectory.states.par_iter())
        .zip(beta.samples.par_iter())
        .map(|((frame, psi), &b)| diagnose_sample(frame, psi, b, n, frame.t - t0, margin))
        .collect::<Result<Vec<_>>>()?;
    Ok(Diagnostics {
        level: n,
        beta,
        samples,
    })
}
