//! JSON scenario documents.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "slow-pi2",
//!   "model": "schwinger",
//!   "omega0": 1.0, "omega": 0.1, "theta": 1.5707963267948966,
//!   "t_end": 40.0, "steps": 40000,
//!   "n": 1
//! }
//! ```
//!
//! Keys are checked by hand rather than through derived deserializers so that
//! every rejection names the offending key.

use std::path::Path;

use serde_json::{Map, Value};

use crate::diagnostics::DEFAULT_MARGIN;
use crate::error::{Error, Result};
use crate::linalg::{MAX_DIM, MIN_DIM};
use crate::models::SchwingerParams;
use crate::propagator::TimeGrid;

pub const SCHEMA_VERSION: u64 = 1;
pub const MIN_STEPS: usize = 10;
/// Default resolution: steps per unit of `(fastest frequency) x (time span)`.
pub const STEPS_PER_UNIT: f64 = 1000.0;

const TOP_KEYS: &[&str] = &[
    "schema_version",
    "name",
    "model",
    "omega0",
    "omega",
    "theta",
    "energies",
    "dim",
    "seed",
    "t_start",
    "t_end",
    "steps",
    "n",
    "gauge",
    "outputs",
    "thresholds",
];
const THRESHOLD_KEYS: &[&str] = &["margin"];

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Schwinger(SchwingerParams),
    /// System B built from a Schwinger system A.
    MarzlinSanders(SchwingerParams),
    Static {
        energies: Vec<f64>,
    },
    RandomSmooth {
        dim: usize,
        seed: u64,
    },
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Schwinger(_) => "schwinger",
            ModelSpec::MarzlinSanders(_) => "marzlin-sanders",
            ModelSpec::Static { .. } => "static",
            ModelSpec::RandomSmooth { .. } => "random-smooth",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Schwinger(_) | ModelSpec::MarzlinSanders(_) => 2,
            ModelSpec::Static { energies } => energies.len(),
            ModelSpec::RandomSmooth { dim, .. } => *dim,
        }
    }

    // Rough upper bound on the fastest frequency in the problem.
    fn frequency_scale(&self) -> f64 {
        match self {
            ModelSpec::Schwinger(p) | ModelSpec::MarzlinSanders(p) => p.omega0.max(p.omega),
            ModelSpec::Static { energies } => energies.iter().fold(1.0, |a, e| a.max(e.abs())),
            ModelSpec::RandomSmooth { dim, .. } => *dim as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GaugeChoice {
    /// Transported from the closed-form vectors at `t_start` when the model has them.
    #[default]
    Auto,
    /// Every frame aligned to the closed-form vectors.
    AnalyticReference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Output {
    /// Per-sample CSV.
    Series,
    /// JSON summary.
    Report,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    pub grid: TimeGrid,
    /// Tracked level, 0-based.
    pub level: usize,
    pub gauge: GaugeChoice,
    pub outputs: Vec<Output>,
    pub margin: f64,
}

fn config(msg: String) -> Error {
    Error::Config(msg)
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], prefix: &str) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(config(format!(
                "unknown key `{prefix}{key}` (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn number(obj: &Map<String, Value>, key: &'static str) -> Result<Option<f64>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| config(format!("key `{key}` must be a finite number"))),
    }
}

fn required_number(obj: &Map<String, Value>, key: &'static str) -> Result<f64> {
    number(obj, key)?.ok_or_else(|| config(format!("missing required key `{key}`")))
}

fn integer(obj: &Map<String, Value>, key: &'static str) -> Result<Option<u64>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| config(format!("key `{key}` must be a non-negative integer"))),
    }
}

fn string<'a>(obj: &'a Map<String, Value>, key: &'static str) -> Result<Option<&'a str>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_str()
            .map(Some)
            .ok_or_else(|| config(format!("key `{key}` must be a string"))),
    }
}

fn forbid(obj: &Map<String, Value>, keys: &[&str], model: &str) -> Result<()> {
    for key in keys {
        if obj.contains_key(*key) {
            return Err(config(format!(
                "key `{key}` does not apply to model `{model}`"
            )));
        }
    }
    Ok(())
}

fn schwinger_params(obj: &Map<String, Value>) -> Result<SchwingerParams> {
    SchwingerParams::new(
        required_number(obj, "omega0")?,
        required_number(obj, "omega")?,
        required_number(obj, "theta")?,
    )
}

fn parse_model(obj: &Map<String, Value>) -> Result<ModelSpec> {
    let model =
        string(obj, "model")?.ok_or_else(|| config("missing required key `model`".into()))?;
    match model {
        "schwinger" | "marzlin-sanders" => {
            forbid(obj, &["energies", "dim", "seed"], model)?;
            let p = schwinger_params(obj)?;
            Ok(if model == "schwinger" {
                ModelSpec::Schwinger(p)
            } else {
                ModelSpec::MarzlinSanders(p)
            })
        }
        "static" => {
            forbid(obj, &["omega0", "omega", "theta", "dim", "seed"], model)?;
            let raw = obj
                .get("energies")
                .ok_or_else(|| config("missing required key `energies`".into()))?;
            let energies = raw
                .as_array()
                .and_then(|a| a.iter().map(|v| v.as_f64().filter(|x| x.is_finite())).collect::<Option<Vec<_>>>())
                .ok_or_else(|| config("key `energies` must be an array of finite numbers".into()))?;
            if !(MIN_DIM..=MAX_DIM).contains(&energies.len()) {
                return Err(invalid(
                    "energies",
                    format!("needs between {MIN_DIM} and {MAX_DIM} entries, got {}", energies.len()),
                ));
            }
            Ok(ModelSpec::Static { energies })
        }
        "random-smooth" => {
            forbid(obj, &["omega0", "omega", "theta", "energies"], model)?;
            let dim = integer(obj, "dim")?.ok_or_else(|| config("missing required key `dim`".into()))? as usize;
            if !(MIN_DIM..=MAX_DIM).contains(&dim) {
                return Err(invalid("dim", format!("must lie in {MIN_DIM}..={MAX_DIM}, got {dim}")));
            }
            let seed = integer(obj, "seed")?.ok_or_else(|| config("missing required key `seed`".into()))?;
            Ok(ModelSpec::RandomSmooth { dim, seed })
        }
        other => Err(config(format!(
            "key `model` has unknown value `{other}` (expected schwinger, marzlin-sanders, static or random-smooth)"
        ))),
    }
}

/// Parses and validates one scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_named(text, "scenario")
}

fn parse_named(text: &str, default_name: &str) -> Result<Scenario> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| config(format!("malformed JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| config("top level must be a JSON object".into()))?;
    check_keys(obj, TOP_KEYS, "")?;

    if let Some(v) = integer(obj, "schema_version")? {
        if v != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {v} (expected {SCHEMA_VERSION})"),
            ));
        }
    }
    let name = string(obj, "name")?.unwrap_or(default_name).to_string();
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(invalid(
            "name",
            "must be non-empty and contain no path separators",
        ));
    }

    let model = parse_model(obj)?;

    let t_start = number(obj, "t_start")?.unwrap_or(0.0);
    let t_end = required_number(obj, "t_end")?;
    if t_end <= t_start {
        return Err(invalid(
            "t_end",
            format!("must exceed t_start ({t_start}), got {t_end}"),
        ));
    }
    let steps = match integer(obj, "steps")? {
        Some(s) => s as usize,
        None => ((STEPS_PER_UNIT * model.frequency_scale() * (t_end - t_start)).ceil() as usize)
            .max(MIN_STEPS),
    };
    if steps < MIN_STEPS {
        return Err(invalid(
            "steps",
            format!("must be at least {MIN_STEPS}, got {steps}"),
        ));
    }
    let grid = TimeGrid::new(t_start, t_end, steps)?;

    let n = integer(obj, "n")?.ok_or_else(|| config("missing required key `n`".into()))? as usize;
    if n == 0 || n > model.dim() {
        return Err(invalid(
            "n",
            format!("must lie in 1..={} (1-based level), got {n}", model.dim()),
        ));
    }

    let gauge = match string(obj, "gauge")? {
        None | Some("auto") => GaugeChoice::Auto,
        Some("analytic-reference") => {
            if !matches!(model, ModelSpec::Schwinger(_)) {
                return Err(invalid(
                    "gauge",
                    "`analytic-reference` requires model `schwinger`",
                ));
            }
            GaugeChoice::AnalyticReference
        }
        Some(other) => {
            return Err(config(format!(
                "key `gauge` has unknown value `{other}` (expected auto or analytic-reference)"
            )))
        }
    };

    let outputs = match obj.get("outputs") {
        None => vec![Output::Series, Output::Report],
        Some(v) => {
            let items = v
                .as_array()
                .ok_or_else(|| config("key `outputs` must be an array of strings".into()))?;
            let mut out = Vec::new();
            for item in items {
                let o = match item.as_str() {
                    Some("series") => Output::Series,
                    Some("report") => Output::Report,
                    _ => {
                        return Err(config(format!(
                            "key `outputs` has unknown entry {item} (expected \"series\" or \"report\")"
                        )))
                    }
                };
                if !out.contains(&o) {
                    out.push(o);
                }
            }
            out
        }
    };

    let mut margin = DEFAULT_MARGIN;
    if let Some(v) = obj.get("thresholds") {
        let th = v
            .as_object()
            .ok_or_else(|| config("key `thresholds` must be an object".into()))?;
        check_keys(th, THRESHOLD_KEYS, "thresholds.")?;
        if let Some(m) = number(th, "margin")
            .map_err(|_| config("key `thresholds.margin` must be a finite number".into()))?
        {
            if m <= 0.0 {
                return Err(invalid(
                    "thresholds.margin",
                    format!("must be positive, got {m}"),
                ));
            }
            margin = m;
        }
    }

    Ok(Scenario {
        name,
        model,
        grid,
        level: n - 1,
        gauge,
        outputs,
        margin,
    })
}

/// Reads a scenario file. A document without `name` takes the file stem.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    parse_named(&text, stem)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"model": "schwinger", "omega0": 1, "omega": 0.1, "theta": 1.5707963, "t_end": 40, "steps": 40000, "n": 1}"#;

    fn message(text: &str) -> String {
        parse_scenario(text).unwrap_err().to_string()
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn minimal_schwinger_document() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(
            s.model,
            ModelSpec::Schwinger(SchwingerParams::new(1.0, 0.1, 1.5707963).unwrap())
        );
        assert_eq!(s.grid, TimeGrid::new(0.0, 40.0, 40_000).unwrap());
        assert_eq!(s.level, 0);
        assert_eq!(s.gauge, GaugeChoice::Auto);
        assert_eq!(s.outputs, vec![Output::Series, Output::Report]);
        assert_eq!(s.margin, 0.1);
        assert_eq!(s.name, "scenario");
    }

    #[test]
    fn too_few_steps() {
        let m = message(&MINIMAL.replace("40000", "5"));
        assert!(m.contains("`steps`"), "{m}");
    }

    #[test]
    fn theta_out_of_range() {
        let m = message(&MINIMAL.replace("1.5707963", "4.0"));
        assert!(m.contains("`theta`"), "{m}");
    }

    #[test]
    fn errors_name_the_key() {
        assert!(message("{not json").contains("malformed JSON"));
        assert!(message(&MINIMAL.replace("\"t_end\": 40,", ""))
            .contains("missing required key `t_end`"));
        assert!(
            message(&MINIMAL.replace("\"n\": 1", "\"n\": 1, \"colour\": 3"))
                .contains("unknown key `colour`")
        );
        assert!(message(&MINIMAL.replace("\"n\": 1", "\"n\": 3")).contains("`n`"));
        assert!(message(&MINIMAL.replace("\"n\": 1", "\"n\": 0")).contains("`n`"));
        assert!(
            message(&MINIMAL.replace("\"omega\": 0.1", "\"omega\": \"fast\"")).contains("`omega`")
        );
        assert!(message(&MINIMAL.replace("\"omega0\": 1", "\"omega0\": -1")).contains("`omega0`"));
        assert!(message(&MINIMAL.replace("schwinger", "ising")).contains("`model`"));
        assert!(message(&MINIMAL.replace("\"n\": 1", "\"n\": 1, \"dim\": 2")).contains("`dim`"));
        assert!(
            message(&MINIMAL.replace("\"n\": 1", "\"n\": 1, \"gauge\": \"none\""))
                .contains("`gauge`")
        );
        assert!(
            message(&MINIMAL.replace("\"n\": 1", "\"n\": 1, \"thresholds\": {\"x\": 1}"))
                .contains("`thresholds.x`")
        );
        assert!(
            message(&MINIMAL.replace("\"n\": 1", "\"n\": 1, \"schema_version\": 2"))
                .contains("`schema_version`")
        );
        assert!(message(&MINIMAL.replace("\"t_end\": 40", "\"t_end\": -1")).contains("`t_end`"));
    }

    #[test]
    fn default_steps_follow_frequency_scale() {
        let s = parse_scenario(
            r#"{"model": "schwinger", "omega0": 1, "omega": 10, "theta": 0.1, "t_end": 4, "n": 1}"#,
        )
        .unwrap();
        assert_eq!(s.grid.steps, 40_000);
    }

    #[test]
    fn other_models() {
        let s = parse_scenario(r#"{"model": "static", "energies": [-1, 0.5, 2], "t_end": 5, "n": 2, "outputs": ["report"]}"#).unwrap();
        assert_eq!(s.model.dim(), 3);
        assert_eq!(s.outputs, vec![Output::Report]);
        let s = parse_scenario(r#"{"model": "random-smooth", "dim": 4, "seed": 42, "t_end": 2, "steps": 200, "n": 1, "thresholds": {"margin": 0.05}}"#).unwrap();
        assert_eq!(s.model, ModelSpec::RandomSmooth { dim: 4, seed: 42 });
        assert_eq!(s.margin, 0.05);
        let m = message(
            r#"{"model": "random-smooth", "dim": 4, "seed": 1, "t_end": 2, "n": 1, "gauge": "analytic-reference"}"#,
        );
        assert!(m.contains("`gauge`"));
        assert!(
            message(r#"{"model": "random-smooth", "dim": 65, "seed": 1, "t_end": 2, "n": 1}"#)
                .contains("`dim`")
        );
    }

    #[test]
    fn file_stem_names_unnamed_scenarios() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("slow.json");
        std::fs::write(&path, MINIMAL).unwrap();
        assert_eq!(load_scenario(&path).unwrap().name, "slow");
        std::fs::write(
            &path,
            MINIMAL.replace("\"n\": 1", "\"n\": 1, \"name\": \"x\""),
        )
        .unwrap();
        assert_eq!(load_scenario(&path).unwrap().name, "x");
    }
}
