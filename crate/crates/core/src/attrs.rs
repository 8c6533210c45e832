//! Person attributes and the semantic query the back-end verifies against.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttrError {
    #[error("unknown pose {0:?}")]
    UnknownPose(String),
    #[error("unknown predicate key {0:?} (expected pose, shirt_color or injured)")]
    UnknownKey(String),
    #[error("malformed predicate term {0:?} (expected key=value)")]
    MalformedTerm(String),
    #[error("invalid value {value:?} for {key}")]
    InvalidValue { key: &'static str, value: String },
    #[error("superset class must not be empty")]
    EmptySupersetClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pose {
    Standing,
    Walking,
    Running,
    LayingDown,
    Seated,
    NotDefined,
    Null,
}

impl Pose {
    pub const ALL: [Pose; 7] =
        [Pose::Standing, Pose::Walking, Pose::Running, Pose::LayingDown, Pose::Seated, Pose::NotDefined, Pose::Null];

    pub fn as_str(self) -> &'static str {
        match self {
            Pose::Standing => "standing",
            Pose::Walking => "walking",
            Pose::Running => "running",
            Pose::LayingDown => "laying_down",
            Pose::Seated => "seated",
            Pose::NotDefined => "not_defined",
            Pose::Null => "null",
        }
    }

    /// Poses whose instances were screened for injuries during annotation.
    pub fn is_injury_candidate(self) -> bool {
        matches!(self, Pose::LayingDown | Pose::NotDefined | Pose::Null | Pose::Seated)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pose {
    type Err = AttrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pose::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| AttrError::UnknownPose(s.to_owned()))
    }
}

/// Ground-truth attributes of one annotated person.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonAttrs {
    pub bbox: BBox,
    pub pose: Pose,
    pub shirt_color: String,
    pub injured: bool,
}

impl PersonAttrs {
    /// Injured under the annotation rule: labeled injured and in a candidate pose.
    pub fn counts_as_injured(&self) -> bool {
        self.injured && self.pose.is_injury_candidate()
    }
}

/// Constraint set over the attribute schema. `None` means "any".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shirt_color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injured: Option<bool>,
}

impl Predicate {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn is_any(&self) -> bool {
        self.pose.is_none() && self.shirt_color.is_none() && self.injured.is_none()
    }

    pub fn matches(&self, person: &PersonAttrs) -> bool {
        self.pose.is_none_or(|p| p == person.pose)
            && self.shirt_color.as_deref().is_none_or(|c| c == person.shirt_color)
            && self.injured.is_none_or(|i| i == person.counts_as_injured())
    }

    /// Parses `key=value` terms separated by commas, or `none` for no constraint.
    /// A value of `any` leaves the key unconstrained.
    pub fn parse(text: &str) -> Result<Self, AttrError> {
        let text = text.trim();
        let mut pred = Predicate::default();
        if text.is_empty() || text.eq_ignore_ascii_case("none") {
            return Ok(pred);
        }
        for term in text.split(',') {
            let term = term.trim();
            let (key, value) = term.split_once('=').ok_or_else(|| AttrError::MalformedTerm(term.to_owned()))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(AttrError::MalformedTerm(term.to_owned()));
            }
            let unconstrained = value == "any";
            match key {
                "pose" => pred.pose = if unconstrained { None } else { Some(value.parse()?) },
                "shirt_color" => {
                    if !is_color_token(value) {
                        return Err(AttrError::InvalidValue { key: "shirt_color", value: value.to_owned() });
                    }
                    pred.shirt_color = (!unconstrained).then(|| value.to_owned());
                }
                "injured" => {
                    pred.injured = match value {
                        "any" => None,
                        "true" => Some(true),
                        "false" => Some(false),
                        _ => return Err(AttrError::InvalidValue { key: "injured", value: value.to_owned() }),
                    }
                }
                other => return Err(AttrError::UnknownKey(other.to_owned())),
            }
        }
        Ok(pred)
    }

    /// Constrained keys as `(key, value)` pairs in schema order.
    pub fn terms(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(p) = self.pose {
            out.push(("pose", p.as_str().to_string()));
        }
        if let Some(c) = &self.shirt_color {
            out.push(("shirt_color", c.clone()));
        }
        if let Some(i) = self.injured {
            out.push(("injured", i.to_string()));
        }
        out
    }
}

/// Lowercase token: ascii lowercase letters, digits and `_`/`-`.
pub fn is_color_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        if terms.is_empty() {
            return f.write_str("none");
        }
        for (i, (k, v)) in terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// What the operator is looking for: a coarse class for the proposer, a
/// structured predicate for verification, and the free-text description that
/// external back-ends receive verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticQuery {
    pub superset_class: String,
    pub predicate: Predicate,
    pub description: String,
    #[serde(default)]
    pub system_prompt: String,
}

impl SemanticQuery {
    pub fn new(
        superset_class: impl Into<String>,
        predicate: Predicate,
        description: impl Into<String>,
    ) -> Result<Self, AttrError> {
        let superset_class = superset_class.into();
        if superset_class.trim().is_empty() {
            return Err(AttrError::EmptySupersetClass);
        }
        Ok(Self { superset_class, predicate, description: description.into(), system_prompt: String::new() })
    }

    pub fn any_person() -> Self {
        Self::new("person", Predicate::any(), "Locate any person in view.").unwrap()
    }
}
