//! Instantaneous eigensystems along a time grid.
//!
//! [`track`] diagonalizes `H(t_k)` at every sample, fixes the phase of each
//! eigenvector, and attaches eigenvector time derivatives. Off-level
//! components of `|dE_i/dt>` come from `<E_m|dH/dt|E_i> / (E_i - E_m)`; the
//! diagonal component `<E_i|dE_i/dt>` comes from finite differences of the
//! gauge-fixed vectors.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigendecompose, inner, Complex, HermitianOperator, StateVector};
use crate::models::{
    schwinger_analytic_eigensystem, schwinger_hamiltonian, schwinger_hamiltonian_derivative, Model,
    SchwingerParams,
};
use crate::propagator::TimeGrid;

/// A spectrum counts as degenerate when its smallest gap is at most this
/// fraction of `||H||_F`.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Successive overlaps below this magnitude are treated as a level crossing.
pub const CROSSING_OVERLAP: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct SpectralFrame {
    pub t: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    pub eigenvector_derivatives: Vec<StateVector>,
    pub min_gap: f64,
    pub hamiltonian: HermitianOperator,
    pub hamiltonian_derivative: HermitianOperator,
}

impl SpectralFrame {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.dim() {
            return Err(Error::LevelOutOfRange {
                index: level,
                dim: self.dim(),
            });
        }
        Ok(())
    }

    /// `E_m - E_n`, rejecting `m == n` and vanishing gaps.
    pub fn gap(&self, m: usize, n: usize) -> Result<f64> {
        self.check_level(m)?;
        self.check_level(n)?;
        if m == n {
            return Err(Error::SameLevel(m));
        }
        let gap = self.eigenvalues[m] - self.eigenvalues[n];
        if gap.abs() <= DEGENERACY_TOL * self.hamiltonian.norm() || gap == 0.0 {
            return Err(Error::ZeroGap { m, n });
        }
        Ok(gap)
    }

    /// `<E_m|dE_n/dt>`.
    pub fn coupling(&self, m: usize, n: usize) -> Result<Complex> {
        self.check_level(m)?;
        self.check_level(n)?;
        inner(&self.eigenvectors[m], &self.eigenvector_derivatives[n])
    }
}

/// Frame built entirely from the closed-form two-level eigensystem.
pub fn schwinger_analytic_frame(p: &SchwingerParams, t: f64) -> SpectralFrame {
    let e = schwinger_analytic_eigensystem(p, t);
    SpectralFrame {
        t,
        eigenvalues: e.energies.to_vec(),
        eigenvectors: e.vectors.to_vec(),
        eigenvector_derivatives: e.derivatives.to_vec(),
        min_gap: e.energies[1] - e.energies[0],
        hamiltonian: schwinger_hamiltonian(p, t),
        hamiltonian_derivative: schwinger_hamiltonian_derivative(p, t),
    }
}

/// Phase convention for the tracked eigenvectors.
#[derive(Clone, Debug, Default)]
pub enum Gauge {
    /// Each frame is rotated so that `<v_i(t_{k-1})|v_i(t_k)>` is real and
    /// positive. Frame 0 is aligned to the optional reference vectors, or else
    /// its first nonzero component is made real positive.
    #[default]
    Transport,
    TransportFrom(Vec<StateVector>),
    /// Every frame aligned to the model's closed-form eigenvectors.
    Analytic,
}

#[derive(Clone, Debug)]
pub struct SpectralTrack {
    pub grid: TimeGrid,
    pub frames: Vec<SpectralFrame>,
    /// Eigenvalues of `H(t_k + h/2)` for `k = 0..steps`, the same midpoints the
    /// propagator uses.
    pub midpoint_eigenvalues: Vec<Vec<f64>>,
}

fn align_to(v: &StateVector, reference: &StateVector) -> Result<(StateVector, f64)> {
    let z = inner(reference, v)?;
    let mag = z.norm();
    if mag == 0.0 {
        return Ok((v.clone(), 0.0));
    }
    Ok((v.scaled(z.conj() / mag), mag))
}

fn canonical_phase(v: &StateVector) -> StateVector {
    let threshold = 1e-10 * v.max_abs();
    match v.amplitudes().iter().find(|z| z.norm() > threshold) {
        Some(z) => v.scaled(z.conj() / z.norm()),
        None => v.clone(),
    }
}

pub fn track<M: Model + ?Sized>(
    model: &M,
    grid: &TimeGrid,
    gauge: &Gauge,
) -> Result<SpectralTrack> {
    if grid.steps < 2 {
        return Err(Error::InvalidGrid(
            "tracking needs at least two steps".into(),
        ));
    }
    let dim = model.dim();
    let mut frames: Vec<SpectralFrame> = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let t = grid.sample(k);
        let h = model.hamiltonian(t)?;
        let eig = hermitian_eigendecompose(&h)?;
        let min_gap = eig.min_gap();
        if min_gap.is_nan() || min_gap <= DEGENERACY_TOL * h.norm() {
            return Err(Error::Degenerate {
                sample: k,
                t,
                gap: min_gap,
            });
        }

        let mut vectors = Vec::with_capacity(dim);
        match gauge {
            Gauge::Analytic => {
                let refs = model
                    .analytic_eigenvectors(t)
                    .ok_or(Error::NoAnalyticEigenvectors)?;
                for (i, v) in eig.eigenvectors.iter().enumerate() {
                    let (aligned, overlap) = align_to(v, &refs[i])?;
                    if overlap < CROSSING_OVERLAP {
                        return Err(Error::LevelCrossing {
                            sample: k,
                            t,
                            level: i,
                            overlap,
                        });
                    }
                    vectors.push(aligned);
                }
            }
            _ if k == 0 => {
                for (i, v) in eig.eigenvectors.iter().enumerate() {
                    let aligned = match gauge {
                        Gauge::TransportFrom(refs) => {
                            if refs.len() != dim {
                                return Err(Error::DimensionMismatch {
                                    expected: dim,
                                    found: refs.len(),
                                });
                            }
                            let (aligned, overlap) = align_to(v, &refs[i])?;
                            if overlap == 0.0 {
                                canonical_phase(v)
                            } else {
                                aligned
                            }
                        }
                        _ => canonical_phase(v),
                    };
                    vectors.push(aligned);
                }
            }
            _ => {
                let previous = &frames[k - 1].eigenvectors;
                for (i, v) in eig.eigenvectors.iter().enumerate() {
                    // levels are matched by maximal overlap; a mismatch with the
                    // ascending order means the levels crossed
                    let mut best = (0, 0.0);
                    for (j, p) in previous.iter().enumerate() {
                        let o = inner(p, v)?.norm();
                        if o > best.1 {
                            best = (j, o);
                        }
                    }
                    let (aligned, overlap) = align_to(v, &previous[i])?;
                    if best.0 != i || overlap < CROSSING_OVERLAP {
                        return Err(Error::LevelCrossing {
                            sample: k,
                            t,
                            level: i,
                            overlap,
                        });
                    }
                    vectors.push(aligned);
                }
            }
        }

        frames.push(SpectralFrame {
            t,
            eigenvalues: eig.eigenvalues,
            eigenvector_derivatives: vectors.clone(),
            eigenvectors: vectors,
            min_gap,
            hamiltonian_derivative: model.hamiltonian_derivative(t)?,
            hamiltonian: h,
        });
    }

    let step = grid.step();
    let midpoint_eigenvalues = (0..grid.steps)
        .map(|k| {
            let h = model.hamiltonian(grid.sample(k) + step / 2.0)?;
            Ok(hermitian_eigendecompose(&h)?.eigenvalues)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = SpectralTrack {
        grid: *grid,
        frames,
        midpoint_eigenvalues,
    };
    out.fill_derivatives()?;
    Ok(out)
}

/// Second-order finite-difference `|dE_i/dt>` at sample `k`: central in the
/// interior, one-sided three-point stencils at the endpoints.
pub fn eigen_derivative_fd(frames: &[SpectralFrame], k: usize, i: usize) -> Result<StateVector> {
    let len = frames.len();
    if len < 3 {
        return Err(Error::InvalidGrid(
            "finite differences need at least three frames".into(),
        ));
    }
    if k >= len {
        return Err(Error::SampleOutOfRange { index: k, len });
    }
    frames[k].check_level(i)?;
    let h = (frames[len - 1].t - frames[0].t) / (len - 1) as f64;
    let v = |j: usize| &frames[j].eigenvectors[i];
    let combo = |terms: &[(f64, usize)]| {
        let mut acc = v(terms[0].1).scaled(Complex::new(terms[0].0, 0.0));
        for &(w, j) in &terms[1..] {
            acc = &acc + &v(j).scaled(Complex::new(w, 0.0));
        }
        acc.scaled(Complex::new(1.0 / (2.0 * h), 0.0))
    };
    Ok(if k == 0 {
        combo(&[(-3.0, 0), (4.0, 1), (-1.0, 2)])
    } else if k == len - 1 {
        combo(&[(3.0, k), (-4.0, k - 1), (1.0, k - 2)])
    } else {
        combo(&[(1.0, k + 1), (-1.0, k - 1)])
    })
}

/// Off-level part of `|dE_i/dt>`: `sum_{m != i} <E_m|dH/dt|E_i> / (E_i - E_m) |E_m>`.
pub fn eigen_derivative_pert(
    frame: &SpectralFrame,
    hdot: &HermitianOperator,
    i: usize,
) -> Result<StateVector> {
    frame.check_level(i)?;
    let ei = &frame.eigenvectors[i];
    let hdot_ei = hdot.apply(ei)?;
    let mut acc = StateVector::zeros(frame.dim())?;
    for m in 0..frame.dim() {
        if m == i {
            continue;
        }
        let gap = -frame.gap(m, i)?;
        let coeff = inner(&frame.eigenvectors[m], &hdot_ei)? / gap;
        acc = &acc + &frame.eigenvectors[m].scaled(coeff);
    }
    Ok(acc)
}

impl SpectralTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames[0].dim()
    }

    /// Recompute `eigenvector_derivatives` from the current eigenvectors.
    pub fn fill_derivatives(&mut self) -> Result<()> {
        let mut all = Vec::with_capacity(self.frames.len());
        for k in 0..self.frames.len() {
            let frame = &self.frames[k];
            let mut derivs = Vec::with_capacity(frame.dim());
            for i in 0..frame.dim() {
                let fd = eigen_derivative_fd(&self.frames, k, i)?;
                let diagonal = inner(&frame.eigenvectors[i], &fd)?;
                let off = eigen_derivative_pert(frame, &frame.hamiltonian_derivative, i)?;
                derivs.push(&off + &frame.eigenvectors[i].scaled(diagonal));
            }
            all.push(derivs);
        }
        for (frame, derivs) in self.frames.iter_mut().zip(all) {
            frame.eigenvector_derivatives = derivs;
        }
        Ok(())
    }

    /// Copy of the track with `|E_i(t)> -> e^{i phase(i, t)} |E_i(t)>` and
    /// derivatives recomputed.
    pub fn with_gauge_rotation(&self, phase: impl Fn(usize, f64) -> f64) -> Result<SpectralTrack> {
        let mut out = self.clone();
        for frame in &mut out.frames {
            let t = frame.t;
            for (i, v) in frame.eigenvectors.iter_mut().enumerate() {
                *v = v.scaled(Complex::from_polar(1.0, phase(i, t)));
            }
        }
        out.fill_derivatives()?;
        Ok(out)
    }

    /// `min_{i,k} Re <v_i(t_{k-1})|v_i(t_k)>`.
    pub fn min_successive_overlap(&self) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for pair in self.frames.windows(2) {
            for (a, b) in pair[0].eigenvectors.iter().zip(&pair[1].eigenvectors) {
                worst = worst.min(inner(a, b)?.re);
            }
        }
        Ok(worst)
    }

    /// `|<E_m|dH/dt|E_n>/(E_m - E_n) + <E_m|dE_n/dt>|` with the derivative taken by
    /// finite differences, at sample `k`.
    pub fn perturbative_identity_residual(&self, k: usize, m: usize, n: usize) -> Result<f64> {
        let frame = self.frames.get(k).ok_or(Error::SampleOutOfRange {
            index: k,
            len: self.frames.len(),
        })?;
        let gap = frame.gap(m, n)?;
        let element = frame
            .hamiltonian_derivative
            .matrix_element(&frame.eigenvectors[m], &frame.eigenvectors[n])?;
        let fd = eigen_derivative_fd(&self.frames, k, n)?;
        Ok((element / gap + inner(&frame.eigenvectors[m], &fd)?).norm())
    }

    /// Maximum of [`Self::perturbative_identity_residual`] over interior samples and all `m != n`.
    pub fn max_perturbative_identity_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let dim = self.dim();
        for k in 1..self.len() - 1 {
            for m in 0..dim {
                for n in 0..dim {
                    if m != n {
                        worst = worst.max(self.perturbative_identity_residual(k, m, n)?);
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// `beta_n(t_k) = -int E_n + i int <E_n|dE_n/dt>`, real by construction.
#[derive(Clone, Debug)]
pub struct BerryPhaseAccumulator {
    pub level: usize,
    pub samples: Vec<f64>,
    /// Largest magnitude of the trapezoidal `Im(i int <E_n|dE_n/dt>)`, which
    /// vanishes for normalized vectors.
    pub imag_residue: f64,
}

/// Accumulates `beta_n` on the tracking grid.
///
/// The dynamical part integrates `-E_n` with the midpoint rule at the
/// propagator's midpoints. The geometric part sums `-arg <v_k|v_{k+1}>`,
/// the discrete connection of the tracked vectors, so that a gauge change
/// `v_k -> e^{i phi_k} v_k` shifts `beta_n` by exactly `-(phi_k - phi_0)`.
pub fn berry_phase(track: &SpectralTrack, n: usize) -> Result<BerryPhaseAccumulator> {
    track.frames[0].check_level(n)?;
    let h = track.grid.step();
    let mut samples = Vec::with_capacity(track.len());
    samples.push(0.0);
    let mut beta = 0.0;
    let mut imag = 0.0;
    let mut imag_residue: f64 = 0.0;
    for k in 0..track.len() - 1 {
        let (a, b) = (&track.frames[k], &track.frames[k + 1]);
        let dynamical = -h * track.midpoint_eigenvalues[k][n];
        let geometric = -inner(&a.eigenvectors[n], &b.eigenvectors[n])?.arg();
        beta += dynamical + geometric;
        samples.push(beta);

        let ra = inner(&a.eigenvectors[n], &a.eigenvector_derivatives[n])?.re;
        let rb = inner(&b.eigenvectors[n], &b.eigenvector_derivatives[n])?.re;
        imag += 0.5 * h * (ra + rb);
        imag_residue = imag_residue.max(imag.abs());
    }
    Ok(BerryPhaseAccumulator {
        level: n,
        samples,
        imag_residue,
    })
}

/// `|<E_m|dE_n/dt>| / |E_m - E_n|`.
pub fn qac_ratio(frame: &SpectralFrame, m: usize, n: usize) -> Result<f64> {
    let gap = frame.gap(m, n)?;
    Ok(frame.coupling(m, n)?.norm() / gap.abs())
}
