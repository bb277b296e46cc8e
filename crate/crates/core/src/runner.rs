//! Scenario execution: propagate, track, diagnose, then summarize and emit.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{diagnose, Diagnostics};
use crate::error::{Error, Result};
use crate::models::{AnalyticSolution, Model, ModelHandle};
use crate::propagator::{propagator_matrix, Propagators};
use crate::scenario::{load_scenario, GaugeChoice, ModelSpec, Output, Scenario, SCHEMA_VERSION};
use crate::spectral::{track, Gauge, SpectralTrack};

pub const DECOMPOSITION_TOL: f64 = 1e-7;
pub const LAMBDA_TOL: f64 = 1e-7;
pub const RECONSTRUCTION_TOL: f64 = 1e-7;
pub const UNITARITY_TOL: f64 = 1e-9;
pub const NORM_TOL: f64 = 1e-10;
pub const PROBABILITY_TOL: f64 = 1e-8;
pub const PERTURBATIVE_TOL: f64 = 1e-6;
pub const INVERSE_TOL: f64 = 1e-6;
/// Off-level amplitudes below this count as the adiabatic approximation holding.
pub const APPROXIMATION_BOUND: f64 = 0.15;
/// QAC ratios above this count as the condition being violated.
pub const QAC_VIOLATION: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Check {
            name,
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxResiduals {
    pub decomposition: f64,
    pub lambda: f64,
    /// `None` when the tracked energy is zero throughout.
    pub c_n_reconstruction: Option<f64>,
    pub unitarity: f64,
    pub norm: f64,
    pub probability: f64,
    pub perturbative_identity: f64,
    pub berry_imaginary: f64,
}

/// Per-level maxima and criteria-flag time fractions. Level numbers are 1-based;
/// the decomposition fields are `None` for the tracked level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub max_abs_c: f64,
    pub max_abs_q: Option<f64>,
    pub max_abs_r: Option<f64>,
    pub max_qac: Option<f64>,
    pub fraction_small_d: Option<f64>,
    pub fraction_small_d_dot: Option<f64>,
    pub fraction_general: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Regime {
    pub max_off_level_amplitude: f64,
    pub max_qac: f64,
    pub adiabatic_approximation_holds: bool,
    pub qac_violated: bool,
    pub verdict: String,
}

/// Extra data for a transformed (system B) run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Companion {
    pub system_a_min_fidelity: f64,
    pub system_b_min_fidelity: f64,
    /// `max_t ||U_B(t) U_A(t) - I||_max`.
    pub max_propagator_inverse_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u64,
    pub name: String,
    pub model: &'static str,
    pub dim: usize,
    pub level: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    pub margin: f64,
    pub max_residuals: MaxResiduals,
    pub levels: Vec<LevelSummary>,
    pub min_fidelity: f64,
    pub regime: Regime,
    /// Largest `| |c_i| - |c_i exact| |` for Schwinger runs started in the ground state at `t = 0`.
    pub analytic_oracle_error: Option<f64>,
    pub companion: Option<Companion>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub first_failure: Option<String>,
}

impl RunReport {
    pub fn first_failed_check(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }
}

pub struct RunOutput {
    pub series: Diagnostics,
    pub report: RunReport,
}

fn gauge_for(model: &ModelHandle, choice: GaugeChoice, t0: f64) -> Gauge {
    match choice {
        GaugeChoice::AnalyticReference => Gauge::Analytic,
        GaugeChoice::Auto => match model.analytic_eigenvectors(t0) {
            Some(v) => Gauge::TransportFrom(v),
            None => Gauge::Transport,
        },
    }
}

struct Pipeline {
    track: SpectralTrack,
    propagators: Propagators,
    diagnostics: Diagnostics,
}

fn pipeline(model: &ModelHandle, scenario: &Scenario) -> Result<Pipeline> {
    let grid = &scenario.grid;
    let track = track(model, grid, &gauge_for(model, scenario.gauge, grid.t_start))?;
    let propagators = propagator_matrix(model, grid)?;
    let trajectory = propagators.apply(&track.frames[0].eigenvectors[scenario.level])?;
    let diagnostics = diagnose(&trajectory, &track, scenario.level, scenario.margin)?;
    Ok(Pipeline {
        track,
        propagators,
        diagnostics,
    })
}

fn build_model(spec: &ModelSpec, scenario: &Scenario) -> Result<ModelHandle> {
    match spec {
        ModelSpec::Schwinger(p) => Ok(ModelHandle::Schwinger(*p)),
        ModelSpec::MarzlinSanders(p) => {
            ModelHandle::transformed(ModelHandle::Schwinger(*p), scenario.grid)
        }
        ModelSpec::Static { energies } => ModelHandle::static_diagonal(energies),
        ModelSpec::RandomSmooth { dim, seed } => ModelHandle::random_smooth(*dim, *seed),
    }
}

fn fraction(flags: impl Iterator<Item = Option<bool>>) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for f in flags.flatten() {
        total += 1;
        hits += f as usize;
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

fn level_summaries(diag: &Diagnostics, dim: usize) -> Vec<LevelSummary> {
    let n = diag.level;
    (0..dim)
        .map(|m| {
            let off = m != n;
            let crit = |f: fn(&crate::diagnostics::CriteriaCheck) -> Option<bool>| {
                fraction(
                    diag.samples
                        .iter()
                        .map(|s| s.criteria[m].as_ref().and_then(f)),
                )
            };
            LevelSummary {
                level: m + 1,
                max_abs_c: diag.max_abs_c(m),
                max_abs_q: off.then(|| diag.max_abs_q(m)),
                max_abs_r: off.then(|| diag.max_abs_r(m)),
                max_qac: off.then(|| diag.max_qac(m)),
                fraction_small_d: crit(|c| c.small_d),
                fraction_small_d_dot: crit(|c| Some(c.small_d_dot)),
                fraction_general: crit(|c| Some(c.general)),
            }
        })
        .collect()
}

fn regime(levels: &[LevelSummary], n: usize) -> Regime {
    let (mut amp, mut amp_level) = (0.0, n);
    let (mut qac, mut qac_level) = (0.0, n);
    for l in levels.iter().filter(|l| l.level != n + 1) {
        if l.max_abs_c >= amp {
            amp = l.max_abs_c;
            amp_level = l.level;
        }
        let q = l.max_qac.unwrap_or(0.0);
        if q >= qac {
            qac = q;
            qac_level = l.level;
        }
    }
    let holds = amp < APPROXIMATION_BOUND;
    let violated = qac > QAC_VIOLATION;
    let first = if holds {
        format!("adiabatic approximation holds (max|c_{amp_level}| < {APPROXIMATION_BOUND})")
    } else {
        format!("adiabatic approximation fails (max|c_{amp_level}| >= {APPROXIMATION_BOUND})")
    };
    let second = if violated {
        format!("QAC violated (ratio_{qac_level} > {QAC_VIOLATION})")
    } else {
        format!("QAC not violated (ratio_{qac_level} <= {QAC_VIOLATION})")
    };
    Regime {
        max_off_level_amplitude: amp,
        max_qac: qac,
        adiabatic_approximation_holds: holds,
        qac_violated: violated,
        verdict: format!("{first}, {second}"),
    }
}

fn analytic_oracle_error(spec: &ModelSpec, scenario: &Scenario, diag: &Diagnostics) -> Option<f64> {
    let ModelSpec::Schwinger(p) = spec else {
        return None;
    };
    if scenario.level != 0 || scenario.grid.t_start != 0.0 {
        return None;
    }
    let sol = AnalyticSolution::new(*p);
    let worst = diag
        .samples
        .iter()
        .map(|s| {
            let (c1, c2) = sol.amplitudes(s.t);
            (s.c[0].norm() - c1.norm())
                .abs()
                .max((s.c[1].norm() - c2.norm()).abs())
        })
        .fold(0.0, f64::max);
    Some(worst)
}

fn companion(spec: &ModelSpec, scenario: &Scenario, b: &Pipeline) -> Result<Option<Companion>> {
    let ModelSpec::MarzlinSanders(p) = spec else {
        return Ok(None);
    };
    let a_model = ModelHandle::Schwinger(*p);
    let a = pipeline(&a_model, scenario)?;
    let mut inverse: f64 = 0.0;
    for (ub, ua) in b.propagators.unitaries.iter().zip(&a.propagators.unitaries) {
        inverse = inverse.max(ub.compose(ua)?.matrix().identity_deviation());
    }
    Ok(Some(Companion {
        system_a_min_fidelity: a.diagnostics.min_fidelity(),
        system_b_min_fidelity: b.diagnostics.min_fidelity(),
        max_propagator_inverse_defect: inverse,
    }))
}

/// Runs the full pipeline for one scenario.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    let spec = &scenario.model;
    let model = build_model(spec, scenario)?;
    let main = pipeline(&model, scenario)?;
    let diag = &main.diagnostics;
    let dim = model.dim();

    let c_n = diag
        .samples
        .iter()
        .filter_map(|s| s.c_n_reconstruction_residual)
        .reduce(f64::max);
    let residuals = MaxResiduals {
        decomposition: diag.max_decomposition_residual(),
        lambda: diag.max_lambda_residual(),
        c_n_reconstruction: c_n,
        unitarity: main.propagators.max_unitarity_defect(),
        norm: diag.max_norm_error(),
        probability: diag.max_probability_error(),
        perturbative_identity: main.track.max_perturbative_identity_residual()?,
        berry_imaginary: diag.beta.imag_residue,
    };
    let companion = companion(spec, scenario, &main)?;

    let mut checks = vec![
        Check::at_most("decomposition", residuals.decomposition, DECOMPOSITION_TOL),
        Check::at_most("lambda", residuals.lambda, LAMBDA_TOL),
    ];
    if let Some(v) = c_n {
        checks.push(Check::at_most("c_n_reconstruction", v, RECONSTRUCTION_TOL));
    }
    checks.extend([
        Check::at_most("unitarity", residuals.unitarity, UNITARITY_TOL),
        Check::at_most("norm", residuals.norm, NORM_TOL),
        Check::at_most("probability", residuals.probability, PROBABILITY_TOL),
        Check::at_most(
            "perturbative_identity",
            residuals.perturbative_identity,
            PERTURBATIVE_TOL,
        ),
    ]);
    if let Some(c) = &companion {
        checks.push(Check::at_most(
            "propagator_inverse",
            c.max_propagator_inverse_defect,
            INVERSE_TOL,
        ));
    }
    let first_failure = checks.iter().find(|c| !c.pass).map(|c| c.name.to_string());

    let levels = level_summaries(diag, dim);
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        name: scenario.name.clone(),
        model: spec.label(),
        dim,
        level: scenario.level + 1,
        t_start: scenario.grid.t_start,
        t_end: scenario.grid.t_end,
        steps: scenario.grid.steps,
        margin: scenario.margin,
        max_residuals: residuals,
        regime: regime(&levels, scenario.level),
        levels,
        min_fidelity: diag.min_fidelity(),
        analytic_oracle_error: analytic_oracle_error(spec, scenario, diag),
        companion,
        passed: first_failure.is_none(),
        first_failure,
        checks,
    };
    Ok(RunOutput {
        series: main.diagnostics,
        report,
    })
}

/// CSV header for a `dim`-level run tracking 0-based level `n`.
pub fn csv_header(dim: usize, n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for i in 1..=dim {
        cols.extend([
            format!("re_c_{i}"),
            format!("im_c_{i}"),
            format!("abs_c_{i}"),
        ]);
    }
    for m in (1..=dim).filter(|&m| m != n + 1) {
        cols.extend([
            format!("abs_Q_{m}"),
            format!("abs_R_{m}"),
            format!("qac_{m}"),
            format!("residual_{m}"),
        ]);
    }
    cols.extend([
        format!("beta_{}", n + 1),
        "D_norm".into(),
        "Ddot_norm".into(),
        "lambda_residual".into(),
        "norm_error".into(),
    ]);
    cols.join(",")
}

fn push_float(line: &mut String, buf: &mut ryu::Buffer, x: f64) {
    line.push(',');
    line.push_str(if x.is_finite() {
        buf.format_finite(x)
    } else {
        "NaN"
    });
}

/// Writes the series as CSV: shortest round-trip floats, LF line endings.
pub fn write_csv<W: Write>(series: &Diagnostics, mut out: W) -> io::Result<()> {
    let n = series.level;
    let dim = series.samples.first().map_or(0, |s| s.c.len());
    writeln!(out, "{}", csv_header(dim, n))?;
    let mut buf = ryu::Buffer::new();
    let mut line = String::new();
    for s in &series.samples {
        line.clear();
        line.push_str(buf.format(s.t));
        for c in &s.c {
            push_float(&mut line, &mut buf, c.re);
            push_float(&mut line, &mut buf, c.im);
            push_float(&mut line, &mut buf, c.norm());
        }
        for m in (0..dim).filter(|&m| m != n) {
            push_float(&mut line, &mut buf, s.q[m].map_or(f64::NAN, |z| z.norm()));
            push_float(&mut line, &mut buf, s.r[m].map_or(f64::NAN, |z| z.norm()));
            push_float(&mut line, &mut buf, s.qac[m].unwrap_or(f64::NAN));
            push_float(
                &mut line,
                &mut buf,
                s.decomposition_residual[m].unwrap_or(f64::NAN),
            );
        }
        for x in [
            s.beta_n,
            s.d_norm,
            s.d_dot_norm,
            s.lambda_residual,
            s.norm_error,
        ] {
            push_float(&mut line, &mut buf, x);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

pub fn emit_csv(series: &Diagnostics, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    write_csv(series, BufWriter::new(file)).map_err(|e| io_error(path, e))
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn emit_report(report: &RunReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_json(report)).map_err(|e| io_error(path, e))
}

/// Runs a scenario and writes the requested outputs into `out_dir` as
/// `<name>.csv` and `<name>.report.json`. Returns the report and the files written.
pub fn run_to_dir(scenario: &Scenario, out_dir: &Path) -> Result<(RunReport, Vec<PathBuf>)> {
    let output = run(scenario)?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let mut written = Vec::new();
    for o in &scenario.outputs {
        let path = match o {
            Output::Series => {
                let p = out_dir.join(format!("{}.csv", scenario.name));
                emit_csv(&output.series, &p)?;
                p
            }
            Output::Report => {
                let p = out_dir.join(format!("{}.report.json", scenario.name));
                emit_report(&output.report, &p)?;
                p
            }
        };
        written.push(path);
    }
    Ok((output.report, written))
}

/// Scenario files (`*.json`) directly inside `dir`, sorted by path.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every scenario file in `dir` in parallel; results follow the sorted file order.
pub fn run_batch(dir: &Path, out_dir: &Path) -> Result<Vec<(PathBuf, Result<RunReport>)>> {
    let files = scenario_files(dir)?;
    Ok(files
        .into_par_iter()
        .map(|path| {
            let result = load_scenario(&path).and_then(|s| run_to_dir(&s, out_dir).map(|(r, _)| r));
            (path, result)
        })
        .collect())
}
