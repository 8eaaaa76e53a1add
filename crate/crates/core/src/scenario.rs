//! Declarative run descriptions: JSON schema, defaults, presets and sweeps.
//!
//! A scenario document may start from a named preset (`"preset": "fig1_a"`);
//! keys given next to it are merged over the preset recursively. Model specs
//! accept `{"preset": "fig1"}` in the same way. After parsing, every default
//! is filled in, so serializing a [`Scenario`] gives a document that parses
//! back to the same value.

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::control::{ControlOperator, Scheme, SchemeAConfig, SchemeBConfig, DEFAULT_EPSILON, DEFAULT_F_MAX};
use crate::eigenpath::frame_at;
use crate::error::Error;
use crate::linalg::{pauli_combo, HermitianOperator, StateVector};
use crate::models::{matrix_from_pairs, InterpolatedModel, RotatingFieldModel, Schedule, TabulatedDocument, TabulatedModel, TimeDependentHamiltonian};
use crate::propagate::IntegratorConfig;

/// A scenario that failed to parse or validate, with the JSON path at fault.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioError {
    pub path: String,
    pub message: String,
}

impl ScenarioError {
    fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ScenarioError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ScenarioError {}

type SResult<T> = std::result::Result<T, ScenarioError>;

/// `[cx, cy, cz, cid]`, an explicit `[re, im]` matrix, or `s · H0(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSpec {
    Pauli([f64; 4]),
    Matrix(Vec<Vec<[f64; 2]>>),
    Drift(f64),
}

impl OperatorSpec {
    pub fn to_control(&self) -> Result<ControlOperator, Error> {
        match self {
            OperatorSpec::Drift(s) => Ok(ControlOperator::Drift(*s)),
            other => Ok(ControlOperator::Static(other.to_static()?)),
        }
    }

    pub fn to_static(&self) -> Result<HermitianOperator, Error> {
        match self {
            OperatorSpec::Pauli([x, y, z, i]) => Ok(pauli_combo(*x, *y, *z, *i)),
            OperatorSpec::Matrix(rows) => HermitianOperator::new(matrix_from_pairs(rows)?),
            OperatorSpec::Drift(_) => Err(Error::InvalidControl("a drift-proportional operator is not allowed here".into())),
        }
    }
}

impl Serialize for OperatorSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            OperatorSpec::Pauli(q) => q.serialize(s),
            OperatorSpec::Matrix(m) => json!({ "matrix": m }).serialize(s),
            OperatorSpec::Drift(x) => json!({ "drift": x }).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for OperatorSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        const EXPECTED: &str = "expected [cx, cy, cz, cid], {\"matrix\": [[[re, im], ...], ...]} or {\"drift\": s}";
        let v = Value::deserialize(d)?;
        match &v {
            Value::Array(_) => serde_json::from_value::<[f64; 4]>(v)
                .map(OperatorSpec::Pauli)
                .map_err(|e| D::Error::custom(format!("{EXPECTED}: {e}"))),
            Value::Object(map) if map.len() == 1 && map.contains_key("matrix") => {
                serde_json::from_value(map["matrix"].clone())
                    .map(OperatorSpec::Matrix)
                    .map_err(|e| D::Error::custom(format!("malformed matrix: {e}")))
            }
            Value::Object(map) if map.len() == 1 && map.contains_key("drift") => map["drift"]
                .as_f64()
                .map(OperatorSpec::Drift)
                .ok_or_else(|| D::Error::custom("drift scale must be a number")),
            _ => Err(D::Error::custom(EXPECTED)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Rotating,
    Interpolated,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleSpec {
    Linear,
    Smoothstep,
    Polyline(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "type")]
    pub kind: ModelType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_b0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, rename = "H_i", skip_serializing_if = "Option::is_none")]
    pub h_i: Option<OperatorSpec>,
    #[serde(default, rename = "H_f", skip_serializing_if = "Option::is_none")]
    pub h_f: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<[f64; 2]>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SchemeType {
    #[serde(rename = "none")]
    None,
    A,
    B,
}

fn double_option<'de, D: Deserializer<'de>, T: Deserialize<'de>>(d: D) -> Result<Option<Option<T>>, D::Error> {
    Option::<T>::deserialize(d).map(Some)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(rename = "type")]
    pub kind: SchemeType,
    #[serde(default, rename = "X", skip_serializing_if = "Option::is_none")]
    pub x: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<Vec<OperatorSpec>>,
    /// Scheme B accepts `null` for "no pivot channel".
    #[serde(default, deserialize_with = "double_option", skip_serializing_if = "Option::is_none")]
    pub pivot: Option<Option<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            level: Some(0),
            amplitudes: None,
        }
    }
}

fn default_t1() -> f64 {
    3.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_stride() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_t1")]
    pub t1: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub renormalize_every: Option<usize>,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            t0: 0.0,
            t1: default_t1(),
            dt: default_dt(),
            renormalize_every: None,
            record_stride: default_stride(),
        }
    }
}

impl IntegratorSpec {
    pub fn to_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            t0: self.t0,
            t1: self.t1,
            dt: self.dt,
            renormalize_every: self.renormalize_every,
            record_stride: self.record_stride,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    R,
    #[serde(rename = "r")]
    LowerR,
    #[serde(rename = "omega")]
    Omega,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "dt")]
    Dt,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::R => "R",
            SweepParameter::LowerR => "r",
            SweepParameter::Omega => "omega",
            SweepParameter::Theta => "theta",
            SweepParameter::Dt => "dt",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Used when the command line gives no output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Frame level the fidelity column is measured against.
    #[serde(default)]
    pub level: usize,
    #[serde(default = "yes")]
    pub fidelity_svg: bool,
    #[serde(default)]
    pub spectrum_svg: bool,
    /// Writes `states.csv` with full-precision amplitudes.
    #[serde(default)]
    pub dump_states: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: None,
            level: 0,
            fidelity_svg: true,
            spectrum_svg: false,
            dump_states: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Everything needed to call the integrator.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub model: TimeDependentHamiltonian,
    pub scheme: Scheme,
    pub psi0: StateVector,
    pub integrator: IntegratorConfig,
}

pub const PRESET_NAMES: &[&str] = &[
    "fig1_baseline",
    "fig1_a",
    "fig1_b",
    "fig1_c",
    "fig1_d",
    "fig1_e",
    "fig2_a",
    "fig2_b",
    "fig2_c",
    "fig2_d",
    "fig2_e",
    "fig3",
    "fig1_sweep",
    "fig2_sweep",
];

fn fig1_model() -> Value {
    json!({ "type": "rotating", "mu_b0": 1.0, "omega": 4.0, "theta": FRAC_PI_4 })
}

fn fig1_controlled(r_ratio: f64, name: &str) -> Value {
    json!({
        "name": name,
        "model": fig1_model(),
        "scheme": {
            "type": "A",
            "X": [1.0, 0.0, r_ratio, 0.0],
            "controls": [{ "drift": 1.0 }],
            "pivot": 0,
            "sign": 1.0,
            "combined": true
        },
        "integrator": { "dt": 5e-4, "record_stride": 20 }
    })
}

fn fig2(r: f64, name: &str) -> Value {
    json!({
        "name": name,
        "model": fig1_model(),
        "scheme": { "type": "B", "controls": [[r, 0.0, 1.0, 0.0]], "pivot": null }
    })
}

/// Raw JSON of a built-in preset.
pub fn preset_document(name: &str) -> Option<Value> {
    let fig1 = |i: usize| fig1_controlled([12.0, 9.0, 6.0, 3.0, 0.0][i], name);
    let fig2r = |i: usize| fig2([0.0, 2.0, 4.0, 6.0, 8.0][i], name);
    let doc = match name {
        "fig1_baseline" => json!({ "name": name, "model": fig1_model(), "scheme": { "type": "none" } }),
        "fig1_a" => fig1(0),
        "fig1_b" => fig1(1),
        "fig1_c" => fig1(2),
        "fig1_d" => fig1(3),
        "fig1_e" => fig1(4),
        "fig2_a" => fig2r(0),
        "fig2_b" => fig2r(1),
        "fig2_c" => fig2r(2),
        "fig2_d" => fig2r(3),
        "fig2_e" => fig2r(4),
        "fig3" => {
            let mut v = fig1(0);
            v["output"] = json!({ "spectrum_svg": true });
            v
        }
        "fig1_sweep" => {
            let mut v = fig1(0);
            v["sweep"] = json!({ "parameter": "R", "values": [0.0, 3.0, 6.0, 9.0, 12.0] });
            v
        }
        "fig2_sweep" => {
            let mut v = fig2r(4);
            v["sweep"] = json!({ "parameter": "r", "values": [0.0, 2.0, 4.0, 6.0, 8.0] });
            v
        }
        _ => return None,
    };
    Some(doc)
}

pub fn preset(name: &str) -> SResult<Scenario> {
    let doc = preset_document(name).ok_or_else(|| unknown_preset("preset", name))?;
    from_value(doc)
}

fn unknown_preset(path: &str, name: &str) -> ScenarioError {
    ScenarioError::new(path, format!("unknown preset `{name}`; known presets: {}", PRESET_NAMES.join(", ")))
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn expand_presets(mut doc: Value) -> SResult<Value> {
    let Value::Object(map) = &mut doc else {
        return Err(ScenarioError::new("", "scenario must be a JSON object"));
    };
    if let Some(p) = map.remove("preset") {
        let name = p.as_str().ok_or_else(|| ScenarioError::new("preset", "preset must be a string"))?;
        let mut base = preset_document(name).ok_or_else(|| unknown_preset("preset", name))?;
        merge(&mut base, Value::Object(std::mem::take(map)));
        doc = base;
    }
    if let Some(Value::Object(model)) = doc.get_mut("model") {
        if let Some(p) = model.remove("preset") {
            let name = p.as_str().ok_or_else(|| ScenarioError::new("model.preset", "preset must be a string"))?;
            if name != "fig1" {
                return Err(ScenarioError::new("model.preset", format!("unknown model preset `{name}`; known: fig1")));
            }
            let mut base = fig1_model();
            merge(&mut base, Value::Object(std::mem::take(model)));
            *model = match base {
                Value::Object(m) => m,
                _ => Map::new(),
            };
        }
    }
    Ok(doc)
}

/// Parses and validates a scenario document, filling in every default.
pub fn parse_scenario(text: &str) -> SResult<Scenario> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ScenarioError::new("", format!("malformed JSON: {e}")))?;
    from_value(doc)
}

pub fn from_value(doc: Value) -> SResult<Scenario> {
    let doc = expand_presets(doc)?;
    let mut s: Scenario = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::new(path, e.into_inner())
    })?;
    s.normalize()?;
    s.prepare()?;
    Ok(s)
}

fn forbid<T>(value: &Option<T>, path: &str, why: &str) -> SResult<()> {
    if value.is_some() {
        return Err(ScenarioError::new(path, format!("not allowed {why}")));
    }
    Ok(())
}

fn need<T: Clone>(value: &Option<T>, path: &str, why: &str) -> SResult<T> {
    value.clone().ok_or_else(|| ScenarioError::new(path, format!("required {why}")))
}

impl Scenario {
    /// Fills defaults and rejects keys that do not apply to the chosen types.
    fn normalize(&mut self) -> SResult<()> {
        let m = &mut self.model;
        match m.kind {
            ModelType::Rotating => {
                m.mu_b0.get_or_insert(1.0);
                need(&m.omega, "model.omega", "for a rotating model")?;
                need(&m.theta, "model.theta", "for a rotating model")?;
                for (v, p) in [(m.h_i.is_some(), "model.H_i"), (m.h_f.is_some(), "model.H_f"), (m.total_time.is_some(), "model.T"), (m.times.is_some(), "model.times"), (m.matrices.is_some(), "model.matrices"), (m.schedule.is_some(), "model.schedule")] {
                    forbid(&v.then_some(()), p, "for a rotating model")?;
                }
            }
            ModelType::Interpolated => {
                need(&m.h_i, "model.H_i", "for an interpolated model")?;
                need(&m.h_f, "model.H_f", "for an interpolated model")?;
                need(&m.total_time, "model.T", "for an interpolated model")?;
                m.schedule.get_or_insert(ScheduleSpec::Linear);
                for (v, p) in [(m.mu_b0.is_some(), "model.mu_b0"), (m.omega.is_some(), "model.omega"), (m.theta.is_some(), "model.theta"), (m.times.is_some(), "model.times"), (m.matrices.is_some(), "model.matrices")] {
                    forbid(&v.then_some(()), p, "for an interpolated model")?;
                }
            }
            ModelType::Tabulated => {
                need(&m.times, "model.times", "for a tabulated model")?;
                need(&m.matrices, "model.matrices", "for a tabulated model")?;
                for (v, p) in [(m.mu_b0.is_some(), "model.mu_b0"), (m.omega.is_some(), "model.omega"), (m.theta.is_some(), "model.theta"), (m.h_i.is_some(), "model.H_i"), (m.h_f.is_some(), "model.H_f"), (m.total_time.is_some(), "model.T"), (m.schedule.is_some(), "model.schedule")] {
                    forbid(&v.then_some(()), p, "for a tabulated model")?;
                }
            }
        }

        let drift_unit = match m.kind {
            ModelType::Rotating => 1.0 / m.mu_b0.unwrap_or(1.0),
            _ => 1.0,
        };
        let s = &mut self.scheme;
        match s.kind {
            SchemeType::None => {
                for (v, p) in [(s.x.is_some(), "scheme.X"), (s.controls.is_some(), "scheme.controls"), (s.pivot.is_some(), "scheme.pivot"), (s.sign.is_some(), "scheme.sign"), (s.combined.is_some(), "scheme.combined"), (s.strict.is_some(), "scheme.strict"), (s.target_level.is_some(), "scheme.target_level"), (s.epsilon.is_some(), "scheme.epsilon"), (s.f_max.is_some(), "scheme.f_max")] {
                    forbid(&v.then_some(()), p, "for scheme none")?;
                }
            }
            SchemeType::A => {
                need(&s.x, "scheme.X", "for scheme A")?;
                s.controls.get_or_insert_with(|| vec![OperatorSpec::Drift(drift_unit)]);
                match s.pivot {
                    None => s.pivot = Some(Some(0)),
                    Some(None) => return Err(ScenarioError::new("scheme.pivot", "scheme A needs a pivot index")),
                    Some(Some(_)) => {}
                }
                s.sign.get_or_insert(-1.0);
                s.combined.get_or_insert(false);
                s.strict.get_or_insert(false);
                s.epsilon.get_or_insert(DEFAULT_EPSILON);
                s.f_max.get_or_insert(DEFAULT_F_MAX);
                forbid(&s.target_level, "scheme.target_level", "for scheme A")?;
            }
            SchemeType::B => {
                need(&s.controls, "scheme.controls", "for scheme B")?;
                s.pivot.get_or_insert(Some(0));
                s.target_level.get_or_insert(0);
                s.epsilon.get_or_insert(DEFAULT_EPSILON);
                s.f_max.get_or_insert(DEFAULT_F_MAX);
                for (v, p) in [(s.x.is_some(), "scheme.X"), (s.sign.is_some(), "scheme.sign"), (s.combined.is_some(), "scheme.combined"), (s.strict.is_some(), "scheme.strict")] {
                    forbid(&v.then_some(()), p, "for scheme B")?;
                }
            }
        }

        match (&self.initial.level, &self.initial.amplitudes) {
            (Some(_), Some(_)) => return Err(ScenarioError::new("initial", "give either level or amplitudes, not both")),
            (None, None) => self.initial.level = Some(0),
            _ => {}
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(ScenarioError::new("sweep.values", "sweep value list is empty"));
            }
            if sw.values.iter().any(|v| !v.is_finite()) {
                return Err(ScenarioError::new("sweep.values", "sweep values must be finite"));
            }
            let mut sorted = sw.values.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(ScenarioError::new("sweep.values", "sweep values must be distinct"));
            }
        }
        Ok(())
    }

    /// Builds the model, scheme, initial state and integrator settings.
    pub fn prepare(&self) -> SResult<Prepared> {
        let model = self.build_model()?;
        let scheme = self.build_scheme(model.dim())?;
        scheme.validate(model.dim()).map_err(|e| ScenarioError::new("scheme", e))?;
        let integrator = self.integrator.to_config();
        integrator.validate().map_err(|e| ScenarioError::new("integrator", e))?;
        let psi0 = self.build_initial(&model)?;
        if let Some(sw) = &self.sweep {
            for (i, v) in sw.values.iter().enumerate() {
                self.with_sweep_value(sw.parameter, *v)
                    .map_err(|e| ScenarioError::new(format!("sweep.values[{i}]"), e))?;
            }
        }
        Ok(Prepared {
            model,
            scheme,
            psi0,
            integrator,
        })
    }

    fn build_model(&self) -> SResult<TimeDependentHamiltonian> {
        let m = &self.model;
        let model: TimeDependentHamiltonian = match m.kind {
            ModelType::Rotating => RotatingFieldModel::new(m.mu_b0.unwrap_or(1.0), m.theta.unwrap_or(0.0), m.omega.unwrap_or(0.0))
                .map_err(|e| ScenarioError::new("model", e))?
                .into(),
            ModelType::Interpolated => {
                let op = |o: &Option<OperatorSpec>, p: &str| {
                    o.as_ref()
                        .ok_or_else(|| ScenarioError::new(p, "missing"))?
                        .to_static()
                        .map_err(|e| ScenarioError::new(p, e))
                };
                let schedule = match m.schedule.clone().unwrap_or(ScheduleSpec::Linear) {
                    ScheduleSpec::Linear => Schedule::Linear,
                    ScheduleSpec::Smoothstep => Schedule::Smoothstep,
                    ScheduleSpec::Polyline(k) => Schedule::Polyline(k.into_iter().map(|[a, b]| (a, b)).collect()),
                };
                InterpolatedModel::new(op(&m.h_i, "model.H_i")?, op(&m.h_f, "model.H_f")?, schedule, m.total_time.unwrap_or(0.0))
                    .map_err(|e| ScenarioError::new("model", e))?
                    .into()
            }
            ModelType::Tabulated => {
                let doc = TabulatedDocument {
                    times: m.times.clone().unwrap_or_default(),
                    matrices: m.matrices.clone().unwrap_or_default(),
                };
                TabulatedModel::from_document(&doc).map_err(|e| ScenarioError::new("model", e))?.into()
            }
        };
        Ok(model)
    }

    fn build_scheme(&self, dim: usize) -> SResult<Scheme> {
        let s = &self.scheme;
        let controls = |path: &str| -> SResult<Vec<ControlOperator>> {
            s.controls
                .as_deref()
                .unwrap_or_default()
                .iter()
                .enumerate()
                .map(|(i, op)| op.to_control().map_err(|e| ScenarioError::new(format!("{path}[{i}]"), e)))
                .collect()
        };
        let scheme = match s.kind {
            SchemeType::None => Scheme::None,
            SchemeType::A => {
                let x = s.x.as_ref().ok_or_else(|| ScenarioError::new("scheme.X", "missing"))?;
                let x_op = x.to_static().map_err(|e| ScenarioError::new("scheme.X", e))?;
                if x_op.dim() != dim {
                    return Err(ScenarioError::new("scheme.X", Error::DimensionMismatch { left: x_op.dim(), right: dim }));
                }
                Scheme::A(SchemeAConfig {
                    x_op,
                    controls: controls("scheme.controls")?,
                    pivot: s.pivot.flatten().unwrap_or(0),
                    sign: s.sign.unwrap_or(-1.0),
                    epsilon: s.epsilon.unwrap_or(DEFAULT_EPSILON),
                    f_max: s.f_max.unwrap_or(DEFAULT_F_MAX),
                    combined: s.combined.unwrap_or(false),
                    strict: s.strict.unwrap_or(false),
                })
            }
            SchemeType::B => Scheme::B(SchemeBConfig {
                controls: controls("scheme.controls")?,
                pivot: s.pivot.unwrap_or(Some(0)),
                target_level: s.target_level.unwrap_or(0),
                epsilon: s.epsilon.unwrap_or(DEFAULT_EPSILON),
                f_max: s.f_max.unwrap_or(DEFAULT_F_MAX),
            }),
        };
        Ok(scheme)
    }

    fn build_initial(&self, model: &TimeDependentHamiltonian) -> SResult<StateVector> {
        if let Some(amps) = &self.initial.amplitudes {
            if amps.len() != model.dim() {
                return Err(ScenarioError::new(
                    "initial.amplitudes",
                    Error::DimensionMismatch { left: amps.len(), right: model.dim() },
                ));
            }
            let v = amps.iter().map(|[re, im]| crate::linalg::c(*re, *im)).collect();
            return StateVector::new(v).map_err(|e| ScenarioError::new("initial.amplitudes", e));
        }
        let level = self.initial.level.unwrap_or(0);
        let frame = frame_at(model, self.integrator.t0, None).map_err(|e| ScenarioError::new("initial.level", e))?;
        frame
            .state(level)
            .cloned()
            .map_err(|e| ScenarioError::new("initial.level", e))
    }

    /// Copy of this scenario with one sweep value applied and the sweep removed.
    pub fn with_sweep_value(&self, parameter: SweepParameter, value: f64) -> std::result::Result<Scenario, String> {
        let mut s = self.clone();
        s.sweep = None;
        match parameter {
            SweepParameter::R => {
                if s.scheme.kind != SchemeType::A {
                    return Err("sweeping R needs scheme A".into());
                }
                s.scheme.x = Some(OperatorSpec::Pauli([1.0, 0.0, value, 0.0]));
            }
            SweepParameter::LowerR => {
                if s.scheme.kind != SchemeType::B {
                    return Err("sweeping r needs scheme B".into());
                }
                let controls = s.scheme.controls.get_or_insert_with(Vec::new);
                let op = OperatorSpec::Pauli([value, 0.0, 1.0, 0.0]);
                if controls.is_empty() {
                    controls.push(op);
                } else {
                    controls[0] = op;
                }
            }
            SweepParameter::Omega | SweepParameter::Theta => {
                if s.model.kind != ModelType::Rotating {
                    return Err(format!("sweeping {} needs a rotating model", parameter.name()));
                }
                if parameter == SweepParameter::Omega {
                    s.model.omega = Some(value);
                } else {
                    s.model.theta = Some(value);
                }
            }
            SweepParameter::Dt => s.integrator.dt = value,
        }
        if let Some(name) = &s.name {
            s.name = Some(format!("{name}[{}={value}]", parameter.name()));
        }
        s.prepare().map_err(|e| e.to_string())?;
        Ok(s)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_example_fig1_a_document() {
        let s = parse_scenario(r#"{"model":{"preset":"fig1"},"scheme":{"type":"A","X":[1,0,12,0],"combined":true}}"#).unwrap();
        assert_eq!(s.model.kind, ModelType::Rotating);
        assert_eq!(s.model.omega, Some(4.0));
        assert_eq!(s.model.theta, Some(FRAC_PI_4));
        assert_eq!(s.scheme.controls, Some(vec![OperatorSpec::Drift(1.0)]));
        assert_eq!(s.integrator.dt, 1e-3);
        assert_eq!(s.integrator.t1, 3.0);
        let p = s.prepare().unwrap();
        match p.scheme {
            Scheme::A(cfg) => assert!(cfg.combined && cfg.sign == -1.0),
            _ => panic!(),
        }
    }

    #[test]
    fn baseline_document() {
        let s = parse_scenario(r#"{"model":{"preset":"fig1"},"scheme":{"type":"none"}}"#).unwrap();
        assert_eq!(s.scheme.kind, SchemeType::None);
        assert_eq!(s.prepare().unwrap().scheme, Scheme::None);
    }

    #[test]
    fn unknown_key_is_named_with_location() {
        let e = parse_scenario(r#"{"model":{"preset":"fig1"},"schme":{"type":"none"}}"#).unwrap_err();
        assert!(e.to_string().contains("schme"), "{e}");
        let e = parse_scenario(r#"{"model":{"preset":"fig1"},"scheme":{"type":"A","X":[1,0,1,0],"sgn":1}}"#).unwrap_err();
        assert_eq!(e.path, "scheme.sgn");
    }

    #[test]
    fn non_hermitian_and_malformed_matrices() {
        let e = parse_scenario(
            r#"{"model":{"preset":"fig1"},"scheme":{"type":"B","controls":[[1,0,0,0],{"matrix":[[[0,0],[1,0]],[[0,0],[0,0]]]}]}}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "scheme.controls[1]");
        assert!(e.message.contains("Hermitian"));
        let e = parse_scenario(r#"{"model":{"preset":"fig1"},"scheme":{"type":"B","controls":[{"matrix":[[[0,0]],[[0,0],[0,0]]]}]}}"#).unwrap_err();
        assert_eq!(e.path, "scheme.controls[0]");
        let e = parse_scenario(r#"{"model":{"preset":"fig1"},"scheme":{"type":"B","controls":[[1,0,0]]}}"#).unwrap_err();
        assert_eq!(e.path, "scheme.controls[0]");
    }

    #[test]
    fn empty_sweep_rejected() {
        let e = parse_scenario(r#"{"preset":"fig1_a","sweep":{"parameter":"R","values":[]}}"#).unwrap_err();
        assert_eq!(e.path, "sweep.values");
    }

    #[test]
    fn every_preset_round_trips() {
        for name in PRESET_NAMES {
            let s = preset(name).unwrap();
            let back = parse_scenario(&s.to_json_pretty()).unwrap();
            assert_eq!(s, back, "{name}");
        }
    }

    #[test]
    fn preset_key_merges_overrides() {
        let s = parse_scenario(r#"{"preset":"fig1_a","scheme":{"sign":-1},"integrator":{"t1":1.5}}"#).unwrap();
        assert_eq!(s.scheme.sign, Some(-1.0));
        assert_eq!(s.scheme.x, Some(OperatorSpec::Pauli([1.0, 0.0, 12.0, 0.0])));
        assert_eq!(s.integrator.t1, 1.5);
        assert_eq!(s.integrator.dt, 5e-4);
    }

    #[test]
    fn scheme_b_null_pivot() {
        let s = preset("fig2_e").unwrap();
        assert_eq!(s.scheme.pivot, Some(None));
        let json = s.to_json_pretty();
        assert!(json.contains("\"pivot\": null"));
        let s = parse_scenario(r#"{"model":{"preset":"fig1"},"scheme":{"type":"B","controls":[[8,0,1,0]]}}"#).unwrap();
        assert_eq!(s.scheme.pivot, Some(Some(0)));
    }

    #[test]
    fn sweep_values_apply() {
        let s = preset("fig1_sweep").unwrap();
        let r3 = s.with_sweep_value(SweepParameter::R, 3.0).unwrap();
        assert_eq!(r3.scheme.x, Some(OperatorSpec::Pauli([1.0, 0.0, 3.0, 0.0])));
        assert!(r3.sweep.is_none());
        assert!(s.with_sweep_value(SweepParameter::LowerR, 3.0).is_err());
        let w = s.with_sweep_value(SweepParameter::Omega, 2.0).unwrap();
        assert_eq!(w.model.omega, Some(2.0));
    }

    #[test]
    fn interpolated_and_amplitudes() {
        let s = parse_scenario(
            r#"{"model":{"type":"interpolated","H_i":[1,0,0,0],"H_f":[0,0,1,0],"T":2,"schedule":"smoothstep"},
                "scheme":{"type":"none"},"initial":{"amplitudes":[[1,0],[0,1]]},"integrator":{"t1":2}}"#,
        )
        .unwrap();
        let p = s.prepare().unwrap();
        assert!((p.psi0.norm() - 1.0).abs() < 1e-15);
        let e = parse_scenario(r#"{"model":{"type":"interpolated","H_i":[1,0,0,0],"H_f":[0,0,1,0],"T":2,"omega":1},"scheme":{"type":"none"}}"#).unwrap_err();
        assert_eq!(e.path, "model.omega");
    }

    #[test]
    fn misplaced_keys_rejected() {
        let e = parse_scenario(r#"{"model":{"preset":"fig1"},"scheme":{"type":"none","X":[1,0,0,0]}}"#).unwrap_err();
        assert_eq!(e.path, "scheme.X");
        let e = parse_scenario(r#"{"model":{"preset":"fig2"},"scheme":{"type":"none"}}"#).unwrap_err();
        assert_eq!(e.path, "model.preset");
        let e = parse_scenario(r#"{"preset":"nope"}"#).unwrap_err();
        assert_eq!(e.path, "preset");
    }
}
