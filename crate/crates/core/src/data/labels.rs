use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a faulty motor misbehaves after onset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultMode {
    /// Joint output frozen at its onset value.
    Stuck,
    /// Constant offset added to the tracked position.
    SteadyStateError,
}

/// The nine diagnosis classes. The integer encoding is fixed:
///
/// | id | class |
/// |----|-------|
/// | 0 | Healthy |
/// | 1 | Motor 1 Stuck |
/// | 2 | Motor 1 Steady state error |
/// | 3 | Motor 2 Stuck |
/// | 4 | Motor 2 Steady state error |
/// | 5 | Motor 3 Stuck |
/// | 6 | Motor 3 Steady state error |
/// | 7 | Motor 4 Stuck |
/// | 8 | Motor 4 Steady state error |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub struct ClassLabel(u8);

impl ClassLabel {
    pub const HEALTHY: ClassLabel = ClassLabel(0);
    pub const COUNT: usize = 9;

    pub fn new(id: usize) -> Result<Self> {
        if id < Self::COUNT {
            Ok(ClassLabel(id as u8))
        } else {
            Err(Error::Index {
                what: "class id",
                index: id,
                bound: Self::COUNT,
            })
        }
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..Self::COUNT as u8).map(ClassLabel)
    }

    /// Builds the faulty class for `motor` (0-based, 0..4).
    pub fn fault(motor: usize, mode: FaultMode) -> Result<Self> {
        if motor >= 4 {
            return Err(Error::Config(format!(
                "only motors 1-4 are diagnosed, got motor {}",
                motor + 1
            )));
        }
        let offset = match mode {
            FaultMode::Stuck => 1,
            FaultMode::SteadyStateError => 2,
        };
        Ok(ClassLabel((2 * motor + offset) as u8))
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    /// `(motor index 0..4, mode)` for faulty classes.
    pub fn fault_spec(self) -> Option<(usize, FaultMode)> {
        match self.0 {
            0 => None,
            n => {
                let motor = (n as usize - 1) / 2;
                let mode = if n % 2 == 1 {
                    FaultMode::Stuck
                } else {
                    FaultMode::SteadyStateError
                };
                Some((motor, mode))
            }
        }
    }

    pub fn name(self) -> String {
        match self.fault_spec() {
            None => "Healthy".to_string(),
            Some((m, FaultMode::Stuck)) => format!("Motor {} Stuck", m + 1),
            Some((m, FaultMode::SteadyStateError)) => format!("Motor {} Steady state error", m + 1),
        }
    }
}

impl From<ClassLabel> for u8 {
    fn from(c: ClassLabel) -> u8 {
        c.0
    }
}

impl TryFrom<u8> for ClassLabel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        ClassLabel::new(v as usize)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    /// Accepts the numeric id or the class name, case-insensitively, with
    /// "steady state error", "steady-state error" and "sse" all recognised.
    fn from_str(s: &str) -> Result<Self> {
        let raw = s.trim();
        if let Ok(id) = raw.parse::<usize>() {
            return ClassLabel::new(id);
        }
        let norm = raw.to_ascii_lowercase().replace(['-', '_'], " ");
        let words: Vec<&str> = norm.split_whitespace().collect();
        let unknown = || Error::Config(format!("unknown class label {raw:?}"));
        match words.as_slice() {
            ["healthy"] | ["normal"] => Ok(ClassLabel::HEALTHY),
            ["motor", m, rest @ ..] => {
                let motor: usize = m.parse().map_err(|_| unknown())?;
                if !(1..=4).contains(&motor) {
                    return Err(unknown());
                }
                let mode = match rest {
                    ["stuck"] => FaultMode::Stuck,
                    ["steady", "state", "error"] | ["steadystate", "error"] | ["sse"] => {
                        FaultMode::SteadyStateError
                    }
                    _ => return Err(unknown()),
                };
                ClassLabel::fault(motor - 1, mode)
            }
            _ => Err(unknown()),
        }
    }
}

/// 0 for source (simulated), 1 for target (real).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainLabel {
    Source,
    Target,
}

impl DomainLabel {
    pub fn id(self) -> usize {
        match self {
            DomainLabel::Source => 0,
            DomainLabel::Target => 1,
        }
    }
}

impl FromStr for DomainLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "source" | "sim" | "simulated" | "twin" | "0" => Ok(DomainLabel::Source),
            "target" | "real" | "1" => Ok(DomainLabel::Target),
            other => Err(Error::Config(format!("unknown domain label {other:?}"))),
        }
    }
}
