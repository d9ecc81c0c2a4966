//! Theorem identifiers and the verdict record every check returns.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geninv::{is_ep, star_dmp};
use crate::matcore::{CMatrix, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TheoremId {
    L21,
    L22,
    T23,
    C24,
    L31,
    T32,
    T33,
    C34,
    L41,
    T42,
    C43,
    T44,
    C45,
    T46,
    C47,
}

impl TheoremId {
    pub const ALL: [TheoremId; 15] = [
        TheoremId::L21,
        TheoremId::L22,
        TheoremId::T23,
        TheoremId::C24,
        TheoremId::L31,
        TheoremId::T32,
        TheoremId::T33,
        TheoremId::C34,
        TheoremId::L41,
        TheoremId::T42,
        TheoremId::C43,
        TheoremId::T44,
        TheoremId::C45,
        TheoremId::T46,
        TheoremId::C47,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TheoremId::L21 => "L2.1",
            TheoremId::L22 => "L2.2",
            TheoremId::T23 => "T2.3",
            TheoremId::C24 => "C2.4",
            TheoremId::L31 => "L3.1",
            TheoremId::T32 => "T3.2",
            TheoremId::T33 => "T3.3",
            TheoremId::C34 => "C3.4",
            TheoremId::L41 => "L4.1",
            TheoremId::T42 => "T4.2",
            TheoremId::C43 => "C4.3",
            TheoremId::T44 => "T4.4",
            TheoremId::C45 => "C4.5",
            TheoremId::T46 => "T4.6",
            TheoremId::C47 => "C4.7",
        }
    }

    /// Implications are checked one way only; the rest are equivalences.
    pub fn is_one_directional(self) -> bool {
        matches!(
            self,
            TheoremId::L21
                | TheoremId::L31
                | TheoremId::L41
                | TheoremId::T42
                | TheoremId::C43
                | TheoremId::T44
                | TheoremId::C45
                | TheoremId::T46
                | TheoremId::C47
        )
    }

    /// Instances are 2x2 block matrices rather than pairs.
    pub fn is_block(self) -> bool {
        matches!(
            self,
            TheoremId::T42
                | TheoremId::C43
                | TheoremId::T44
                | TheoremId::C45
                | TheoremId::T46
                | TheoremId::C47
        )
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TheoremId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|t| t.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown theorem id {s:?}")))
    }
}

impl Serialize for TheoremId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for TheoremId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Result of checking one theorem on one instance.
///
/// `side1` and `side2` are the two statements of an equivalence. For
/// implications `side2` is `true` and `equivalence_ok` means "hypotheses
/// fail or the conclusion `side1` holds". When hypotheses fail on an
/// equivalence, `equivalence_ok` is vacuously `true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub theorem: TheoremId,
    pub hypotheses_hold: bool,
    pub hypotheses: BTreeMap<String, bool>,
    pub side1: bool,
    pub side2: bool,
    pub witness_m: Option<usize>,
    pub equivalence_ok: bool,
    pub residuals: BTreeMap<String, f64>,
    /// Whether the sums as displayed in the theorem statement agree with the
    /// index-shifted sums derived from the block-power recurrence. `None`
    /// when the theorem has no sum conditions.
    pub statement_form_agrees: Option<bool>,
}

impl TheoremVerdict {
    pub(crate) fn equivalence(theorem: TheoremId, hyps: Hypotheses, side1: bool, side2: bool) -> Self {
        let hypotheses_hold = hyps.all_hold();
        Self {
            theorem,
            hypotheses_hold,
            equivalence_ok: !hypotheses_hold || side1 == side2,
            hypotheses: hyps.flags,
            side1,
            side2,
            witness_m: None,
            residuals: hyps.residuals,
            statement_form_agrees: None,
        }
    }

    pub(crate) fn implication(theorem: TheoremId, hyps: Hypotheses, conclusion: bool) -> Self {
        let hypotheses_hold = hyps.all_hold();
        Self {
            theorem,
            hypotheses_hold,
            equivalence_ok: !hypotheses_hold || conclusion,
            hypotheses: hyps.flags,
            side1: conclusion,
            side2: true,
            witness_m: None,
            residuals: hyps.residuals,
            statement_form_agrees: None,
        }
    }

    /// Labels of hypotheses that do not hold.
    pub fn broken_hypotheses(&self) -> Vec<String> {
        self.hypotheses
            .iter()
            .filter(|(_, &ok)| !ok)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

/// Product of spectral norms, the roundoff scale of a matrix product.
pub fn product_scale(factors: &[&CMatrix]) -> f64 {
    factors.iter().map(|f| f.norm2()).product()
}

/// Accumulates named hypothesis flags and residuals.
#[derive(Debug, Clone, Default)]
pub(crate) struct Hypotheses {
    pub flags: BTreeMap<String, bool>,
    pub residuals: BTreeMap<String, f64>,
}

impl Hypotheses {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn all_hold(&self) -> bool {
        self.flags.values().all(|&v| v)
    }

    pub fn flag(&mut self, label: &str, value: bool) -> bool {
        self.flags.insert(label.to_string(), value);
        value
    }

    pub fn star_dmp(&mut self, label: &str, m: &CMatrix, tol: &Tolerance) -> Result<bool> {
        let v = star_dmp(m, tol)?;
        Ok(self.flag(label, v))
    }

    pub fn ep(&mut self, label: &str, m: &CMatrix, tol: &Tolerance) -> Result<bool> {
        let v = is_ep(m, tol)?;
        Ok(self.flag(label, v))
    }

    /// `x == 0` with roundoff scale `scale`.
    pub fn zero(&mut self, label: &str, x: &CMatrix, scale: f64, tol: &Tolerance) -> bool {
        let r = x.norm_max();
        self.residuals.insert(label.to_string(), r);
        self.flag(label, tol.negligible(r, scale))
    }

    /// `x == y` with roundoff scale `scale`.
    pub fn equal(&mut self, label: &str, x: &CMatrix, y: &CMatrix, scale: f64, tol: &Tolerance) -> bool {
        let r = (x - y).norm_max();
        self.residuals.insert(label.to_string(), r);
        self.flag(label, tol.negligible(r, scale))
    }

    pub fn record(&mut self, label: &str, residual: f64) {
        self.residuals.insert(label.to_string(), residual);
    }
}
