//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! [model]
//! name = seir-classical
//!
//! [params]
//! beta = 0.95
//! ...
//!
//! [initial]
//! S = 960
//! ...
//!
//! [step]
//! dt = 0.1
//! t_end = 100
//! ```
//!
//! `[step]` also accepts `t0` (default 0). Keys are case-sensitive.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use seirkit::integrate::StepConfig;
use seirkit::{BackwardModelParams, ClassicalSeirParams, ModifiedSeirParams, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    SeirModified,
    SeirClassical,
    Backward4,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SeirModified => "seir-modified",
            ModelKind::SeirClassical => "seir-classical",
            ModelKind::Backward4 => "backward4",
        }
    }

    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::SeirModified => &["tau", "mu", "beta", "epsilon", "gamma"],
            ModelKind::SeirClassical => &["beta", "epsilon", "gamma", "n"],
            ModelKind::Backward4 => {
                &["beta1", "beta2", "epsilon", "phi", "sigma", "gamma", "delta", "alpha"]
            }
        }
    }

    pub fn state_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::SeirModified | ModelKind::SeirClassical => &["S", "E", "I", "R"],
            ModelKind::Backward4 => &["x1", "x2", "x3", "x4"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "seir-modified" => Ok(ModelKind::SeirModified),
            "seir-classical" => Ok(ModelKind::SeirClassical),
            "backward4" => Ok(ModelKind::Backward4),
            _ => Err(()),
        }
    }
}

/// 1-based position in the scenario text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioErrorKind {
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("missing key '{key}' in section [{section}]")]
    MissingKey { section: &'static str, key: String },
    #[error("value '{value}' for '{key}' is not a number")]
    NonNumeric { key: String, value: String },
    #[error("unknown model '{0}' (expected seir-modified, seir-classical or backward4)")]
    UnknownModel(String),
    #[error("parameter must be positive: {key} = {value}")]
    NonPositive { key: String, value: f64 },
    #[error("initial value must be finite and nonnegative: {key} = {value}")]
    NegativeInitial { key: String, value: f64 },
    #[error("unknown key '{key}' in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("expected 'key = value' or '[section]'")]
    Malformed,
    #[error("key outside of any section")]
    NoSection,
    #[error("invalid step: {0}")]
    Step(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{location}: {kind}")]
pub struct ScenarioError {
    pub kind: ScenarioErrorKind,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: ModelKind,
    /// Values keyed by the names in [`ModelKind::parameter_names`].
    pub parameters: BTreeMap<String, f64>,
    initial: Option<StateVector>,
    step: Option<StepConfig>,
    /// Where a missing section would have been reported.
    end: Location,
}

impl Scenario {
    pub fn initial_state(&self) -> Result<&StateVector, ScenarioError> {
        self.initial.as_ref().ok_or(ScenarioError {
            kind: ScenarioErrorKind::MissingSection("initial"),
            location: self.end,
        })
    }

    pub fn step(&self) -> Result<&StepConfig, ScenarioError> {
        self.step.as_ref().ok_or(ScenarioError {
            kind: ScenarioErrorKind::MissingSection("step"),
            location: self.end,
        })
    }

    fn param(&self, name: &str) -> f64 {
        self.parameters[name]
    }

    /// Parameters of the modified model, or `None` for another model.
    pub fn modified_params(&self) -> Option<ModifiedSeirParams> {
        (self.model == ModelKind::SeirModified).then(|| {
            let p = |k| self.param(k);
            ModifiedSeirParams::new(p("tau"), p("mu"), p("beta"), p("epsilon"), p("gamma"))
                .expect("validated when parsed")
        })
    }

    pub fn classical_params(&self) -> Option<ClassicalSeirParams> {
        (self.model == ModelKind::SeirClassical).then(|| {
            let p = |k| self.param(k);
            ClassicalSeirParams::new(p("beta"), p("epsilon"), p("gamma"), p("n"))
                .expect("validated when parsed")
        })
    }

    pub fn backward_params(&self) -> Option<BackwardModelParams> {
        (self.model == ModelKind::Backward4).then(|| {
            let p = |k| self.param(k);
            BackwardModelParams::new(
                p("beta1"),
                p("beta2"),
                p("epsilon"),
                p("phi"),
                p("sigma"),
                p("gamma"),
                p("delta"),
                p("alpha"),
            )
            .expect("validated when parsed")
        })
    }
}

struct Entry {
    value: String,
    key_at: Location,
    value_at: Location,
}

#[derive(Default)]
struct Section {
    header: Option<Location>,
    entries: BTreeMap<String, Entry>,
}

const SECTIONS: [&str; 4] = ["model", "params", "initial", "step"];

fn err(kind: ScenarioErrorKind, location: Location) -> ScenarioError {
    ScenarioError { kind, location }
}

fn number(key: &str, entry: &Entry) -> Result<f64, ScenarioError> {
    entry.value.parse::<f64>().map_err(|_| {
        err(
            ScenarioErrorKind::NonNumeric { key: key.to_string(), value: entry.value.clone() },
            entry.value_at,
        )
    })
}

fn reject_unknown(
    name: &str,
    section: &Section,
    allowed: &[&str],
) -> Result<(), ScenarioError> {
    // report the earliest offending line
    let first = section
        .entries
        .iter()
        .filter(|(k, _)| !allowed.contains(&k.as_str()))
        .min_by_key(|(_, e)| e.key_at.line);
    match first {
        Some((key, entry)) => Err(err(
            ScenarioErrorKind::UnknownKey { section: name.to_string(), key: key.clone() },
            entry.key_at,
        )),
        None => Ok(()),
    }
}

fn required<'a>(
    name: &'static str,
    section: &'a Section,
    key: &str,
    end: Location,
) -> Result<&'a Entry, ScenarioError> {
    section.entries.get(key).ok_or_else(|| {
        err(
            ScenarioErrorKind::MissingKey { section: name, key: key.to_string() },
            section.header.unwrap_or(end),
        )
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sections: BTreeMap<&'static str, Section> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    let mut line_count = 0;

    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        line_count = line_no;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let at = |offset: usize| Location { line: line_no, column: offset + 1 };

        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(ScenarioErrorKind::Malformed, at(indent)))?
                .trim();
            let known = SECTIONS
                .iter()
                .find(|s| **s == name)
                .ok_or_else(|| err(ScenarioErrorKind::UnknownSection(name.to_string()), at(indent)))?;
            let section = sections.entry(known).or_default();
            section.header.get_or_insert(at(indent));
            current = Some(known);
            continue;
        }

        let (key_part, value_part) = content
            .split_once('=')
            .ok_or_else(|| err(ScenarioErrorKind::Malformed, at(indent)))?;
        let key = key_part.trim();
        let value = value_part.trim();
        if key.is_empty() || value.is_empty() {
            return Err(err(ScenarioErrorKind::Malformed, at(indent)));
        }
        let value_offset = key_part.len() + 1 + (value_part.len() - value_part.trim_start().len());
        let name = current.ok_or_else(|| err(ScenarioErrorKind::NoSection, at(indent)))?;
        let section = sections.get_mut(name).expect("section created on its header");
        if section.entries.contains_key(key) {
            return Err(err(ScenarioErrorKind::DuplicateKey(key.to_string()), at(indent)));
        }
        section.entries.insert(
            key.to_string(),
            Entry { value: value.to_string(), key_at: at(indent), value_at: at(value_offset) },
        );
    }

    let end = Location { line: line_count + 1, column: 1 };
    let missing = |name: &'static str| err(ScenarioErrorKind::MissingSection(name), end);

    let model_section = sections.get("model").ok_or_else(|| missing("model"))?;
    reject_unknown("model", model_section, &["name"])?;
    let model_entry = required("model", model_section, "name", end)?;
    let model: ModelKind = model_entry.value.parse().map_err(|_| {
        err(ScenarioErrorKind::UnknownModel(model_entry.value.clone()), model_entry.value_at)
    })?;

    let params_section = sections.get("params").ok_or_else(|| missing("params"))?;
    reject_unknown("params", params_section, model.parameter_names())?;
    let mut parameters = BTreeMap::new();
    for &key in model.parameter_names() {
        let entry = required("params", params_section, key, end)?;
        let value = number(key, entry)?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(err(
                ScenarioErrorKind::NonPositive { key: key.to_string(), value },
                entry.value_at,
            ));
        }
        parameters.insert(key.to_string(), value);
    }

    let initial = match sections.get("initial") {
        None => None,
        Some(section) => {
            reject_unknown("initial", section, model.state_names())?;
            let mut values = Vec::with_capacity(4);
            for &key in model.state_names() {
                let entry = required("initial", section, key, end)?;
                let value = number(key, entry)?;
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(err(
                        ScenarioErrorKind::NegativeInitial { key: key.to_string(), value },
                        entry.value_at,
                    ));
                }
                values.push(value);
            }
            Some(StateVector::population(values).expect("entries checked above"))
        }
    };

    let step = match sections.get("step") {
        None => None,
        Some(section) => {
            reject_unknown("step", section, &["dt", "t0", "t_end"])?;
            let dt_entry = required("step", section, "dt", end)?;
            let dt = number("dt", dt_entry)?;
            let t0 = match section.entries.get("t0") {
                Some(entry) => number("t0", entry)?,
                None => 0.0,
            };
            let t_end = number("t_end", required("step", section, "t_end", end)?)?;
            let config = StepConfig::new(dt, t0, t_end).map_err(|e| {
                err(ScenarioErrorKind::Step(e.to_string()), section.header.unwrap_or(end))
            })?;
            Some(config)
        }
    };

    Ok(Scenario { model, parameters, initial, step, end })
}
