//! Affine unit conversion of environment variables.

use std::collections::BTreeMap;

use super::TransformError;
use crate::graph::{PropertyValue, ValueKind};

pub type Env = BTreeMap<String, PropertyValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvertDirection {
    Forward,
    Inverse,
}

impl ConvertDirection {
    pub fn name(self) -> &'static str {
        match self {
            ConvertDirection::Forward => "forward",
            ConvertDirection::Inverse => "inverse",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "forward" => Some(ConvertDirection::Forward),
            "inverse" => Some(ConvertDirection::Inverse),
            _ => None,
        }
    }
}

/// `target = cast(a * source + b)` for one named field.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRule {
    pub field: String,
    pub source: ValueKind,
    pub target: ValueKind,
    pub a: f64,
    pub b: f64,
}

fn cast(x: f64, kind: ValueKind) -> PropertyValue {
    match kind {
        ValueKind::Int => PropertyValue::Int(x.round() as i64),
        ValueKind::Float => PropertyValue::Float(x as f32),
        _ => PropertyValue::Double(x),
    }
}

impl UnitRule {
    pub fn new(
        field: impl Into<String>,
        source: ValueKind,
        target: ValueKind,
        a: f64,
        b: f64,
    ) -> Result<Self, TransformError> {
        let field = field.into();
        if !source.is_numeric() || !target.is_numeric() {
            return Err(TransformError::InvalidUnitRule(format!("{field}: both tags must be numeric")));
        }
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(TransformError::InvalidUnitRule(format!("{field}: need finite a != 0 and finite b")));
        }
        Ok(UnitRule { field, source, target, a, b })
    }

    /// The Celsius to Fahrenheit rule, double in, float out.
    pub fn celsius_to_fahrenheit(field: impl Into<String>) -> Self {
        UnitRule::new(field, ValueKind::Double, ValueKind::Float, 1.8, 32.0).expect("valid constants")
    }

    pub fn apply(&self, v: &PropertyValue, direction: ConvertDirection) -> Result<PropertyValue, TransformError> {
        let (from, to) = match direction {
            ConvertDirection::Forward => (self.source, self.target),
            ConvertDirection::Inverse => (self.target, self.source),
        };
        if v.kind() != from {
            return Err(TransformError::TypeMismatch {
                field: self.field.clone(),
                expected: from.tag(),
                found: v.kind().tag(),
            });
        }
        let x = v.as_f64().expect("numeric kind");
        let y = match direction {
            ConvertDirection::Forward => x * self.a + self.b,
            ConvertDirection::Inverse => (x - self.b) / self.a,
        };
        Ok(cast(y, to))
    }
}

/// Converts the fields named by `rules`; other fields pass through. Rules whose
/// field is absent are skipped and reported in the returned warnings.
pub fn convert_env(
    env: &Env,
    rules: &[UnitRule],
    direction: ConvertDirection,
) -> Result<(Env, Vec<String>), TransformError> {
    let mut out = env.clone();
    let mut warnings = Vec::new();
    for rule in rules {
        match env.get(&rule.field) {
            Some(v) => {
                out.insert(rule.field.clone(), rule.apply(v, direction)?);
            }
            None => warnings.push(format!("env field {:?} absent, rule skipped", rule.field)),
        }
    }
    Ok((out, warnings))
}
