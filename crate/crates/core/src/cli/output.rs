//! CSV tables and the per-experiment summary.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Flag(bool),
    Text(String),
    Missing,
}

impl Cell {
    /// Reals with 17 significant digits; flags as 1/0; missing as `none`.
    pub fn render(&self) -> String {
        match self {
            Self::Real(x) => format!("{x:.16e}"),
            Self::Int(i) => i.to_string(),
            Self::Flag(b) => u8::from(*b).to_string(),
            Self::Text(s) => s.clone(),
            Self::Missing => "none".into(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Self::Int(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Self::Flag(b)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Self::Missing, Self::Real)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", self.name)))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `|measured - target| <= tolerance`.
    Within,
    /// `measured <= target + tolerance`.
    AtMost,
    /// `measured >= target - tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    /// Non-gating checks are reported but never fail the run.
    pub gating: bool,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, measured: f64, target: f64, tolerance: f64, comparison: Comparison) -> Self {
        let passed = match comparison {
            Comparison::Within => (measured - target).abs() <= tolerance,
            Comparison::AtMost => measured <= target + tolerance,
            Comparison::AtLeast => measured >= target - tolerance,
        };
        Self { name: name.into(), measured, target, tolerance, comparison, gating: true, passed }
    }

    pub fn diagnostic(mut self) -> Self {
        self.gating = false;
        self
    }

    pub fn deviation(&self) -> f64 {
        (self.measured - self.target).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub gamma: Option<f64>,
    pub seed: u64,
    /// The first gating check is the headline one.
    pub checks: Vec<Check>,
    pub details: BTreeMap<String, serde_json::Value>,
    pub passed: bool,
}

impl Summary {
    pub fn new(kind: &str, gamma: Option<f64>, seed: u64, checks: Vec<Check>) -> Self {
        let passed = checks.iter().filter(|c| c.gating).all(|c| c.passed);
        Self { kind: kind.into(), gamma, seed, checks, details: BTreeMap::new(), passed }
    }

    pub fn detail(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(key.into(), serde_json::to_value(value).expect("detail serializes"));
        self
    }

    pub fn headline(&self) -> Option<&Check> {
        self.checks.iter().find(|c| c.gating).or(self.checks.first())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(SUMMARY_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
