//! JSON problem and report files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OperatorSpec;
use crate::scenarios::{Check, Expected};
use crate::splitting::{OperatorPair, SolveReport, SolverOptions};
use crate::vecspace::Vector;

/// A problem as read from disk. Solver settings left out fall back to
/// [`SolverOptions::default`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dim: usize,
    #[serde(rename = "A")]
    pub a: OperatorSpec,
    #[serde(rename = "B")]
    pub b: OperatorSpec,
    /// Solve the `w`-perturbed problem instead of the normal problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_fix: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vector>,
}

impl ProblemFile {
    /// Parses JSON, reporting the path of the offending field on failure.
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn pair(&self) -> Result<OperatorPair> {
        let pair = OperatorPair::new(self.a.clone(), self.b.clone(), self.dim)?;
        for v in [&self.w, &self.x0].into_iter().flatten() {
            v.check_dim(self.dim)?;
        }
        Ok(pair)
    }

    pub fn options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            tol_v: self.tol_v.unwrap_or(d.tol_v),
            tol_fix: self.tol_fix.unwrap_or(d.tol_fix),
            ..d
        }
    }

    pub fn x0(&self) -> Vector {
        self.x0.clone().unwrap_or_else(|| Vector::zeros(self.dim))
    }
}

/// Scenario context attached to a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRecord {
    pub name: String,
    pub expected: Expected,
    pub v_swapped_estimate: Option<Vector>,
    pub checks: Vec<Check>,
}

/// A solve report together with where the problem came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub source: String,
    pub report: SolveReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioRecord>,
}

impl ReportFile {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Parse(inner.to_string())
        } else {
            Error::Parse(format!("field `{path}`: {inner}"))
        }
    })
}
