use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = ">=")]
    GreaterEq,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Less => value < threshold,
            Comparison::LessEq => value <= threshold,
            Comparison::Greater => value > threshold,
            Comparison::GreaterEq => value >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Less => "<",
            Comparison::LessEq => "<=",
            Comparison::Greater => ">",
            Comparison::GreaterEq => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// NaN values never pass.
    pub fn new(name: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) -> Self {
        Self { name: name.into(), value, comparison, threshold, pass: comparison.holds(value, threshold) }
    }
}

/// Pass/fail checks and informational metrics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
}

impl Outcome {
    pub fn check(&mut self, name: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) {
        self.checks.push(Check::new(name, value, comparison, threshold));
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub wall_clock_seconds: f64,
    /// SHA-256 of `manifest.json`.
    pub manifest_hash: String,
}

impl RunReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{} {:<44} {:>14.6e} {} {:e}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.comparison.symbol(),
                c.threshold
            ));
        }
        let failed = self.failed_checks().count();
        s.push_str(&format!(
            "{}: {} checks, {} failed, {:.2}s, manifest {}\n",
            self.scenario,
            self.checks.len(),
            failed,
            self.wall_clock_seconds,
            &self.manifest_hash[..12.min(self.manifest_hash.len())]
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_fails_every_comparison() {
        for c in [Comparison::Less, Comparison::LessEq, Comparison::Greater, Comparison::GreaterEq] {
            assert!(!Check::new("x", f64::NAN, c, 0.0).pass);
        }
    }

    #[test]
    fn comparison_serializes_as_symbol() {
        let c = Check::new("x", 1.0, Comparison::Less, 2.0);
        let json = serde_json::to_value(&c).unwrap();
        assert_eq!(json["comparison"], "<");
        assert_eq!(json["pass"], true);
    }
}
