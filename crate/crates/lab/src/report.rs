use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::spec::{ExperimentId, ExperimentSpec};

/// How a measured number is compared with its threshold.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `measured ≤ tolerance`.
    AtMost,
    /// `measured ≥ tolerance`.
    AtLeast,
    /// `|measured - target| ≤ tolerance`.
    Within,
    /// `|measured - target| ≤ tolerance |target|`.
    WithinRelative,
    /// `measured` is 1 for a boolean outcome that held.
    Holds,
}

/// One pass/fail check with the number it was decided on.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub measured: f64,
    pub comparison: Comparison,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl Criterion {
    fn new(name: impl Into<String>, measured: f64, comparison: Comparison, target: Option<f64>, tolerance: f64) -> Self {
        let mut c = Self {
            name: name.into(),
            measured,
            comparison,
            target,
            tolerance,
            passed: false,
        };
        c.passed = c.evaluate();
        c
    }

    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::new(name, measured, Comparison::AtMost, None, tolerance)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::new(name, measured, Comparison::AtLeast, None, tolerance)
    }

    pub fn within(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Self::new(name, measured, Comparison::Within, Some(target), tolerance)
    }

    pub fn within_relative(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Self::new(name, measured, Comparison::WithinRelative, Some(target), tolerance)
    }

    pub fn holds(name: impl Into<String>, held: bool) -> Self {
        Self::new(name, if held { 1.0 } else { 0.0 }, Comparison::Holds, None, 0.0)
    }

    /// Recomputes the verdict from the stored numbers.
    pub fn evaluate(&self) -> bool {
        let m = self.measured;
        let t = self.target.unwrap_or(0.0);
        if !m.is_finite() {
            return false;
        }
        match self.comparison {
            Comparison::AtMost => m <= self.tolerance,
            Comparison::AtLeast => m >= self.tolerance,
            Comparison::Within => (m - t).abs() <= self.tolerance,
            Comparison::WithinRelative => (m - t).abs() <= self.tolerance * t.abs(),
            Comparison::Holds => m == 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub lab_version: String,
    pub core_version: String,
    pub seed: u64,
}

impl Provenance {
    pub fn for_spec(spec: &ExperimentSpec) -> Self {
        Self {
            config_hash: spec.config_hash(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            lab_version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: exterior_ma::VERSION.to_string(),
            seed: spec.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub id: ExperimentId,
    pub name: String,
    pub passed: bool,
    pub criteria: Vec<Criterion>,
    /// Numeric results; deterministic for a given config hash.
    pub payload: BTreeMap<String, Value>,
    /// Wall-clock seconds per stage; excluded from reproducibility.
    pub timings: BTreeMap<String, f64>,
    /// Error chain when the pipeline aborted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub error: Vec<String>,
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn new(spec: &ExperimentSpec) -> Self {
        Self {
            id: spec.id,
            name: spec.display_name(),
            passed: false,
            criteria: Vec::new(),
            payload: BTreeMap::new(),
            timings: BTreeMap::new(),
            error: Vec::new(),
            spec: spec.clone(),
            provenance: Provenance::for_spec(spec),
        }
    }

    pub fn push(&mut self, c: Criterion) {
        self.criteria.push(c);
    }

    pub fn record<T: Serialize>(&mut self, key: &str, value: T) {
        self.payload
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    /// Pass iff there is no error, at least one criterion, and every criterion holds.
    pub fn finish(&mut self) {
        self.passed = self.error.is_empty() && !self.criteria.is_empty() && self.criteria.iter().all(Criterion::evaluate);
    }

    /// Verdict recomputed from the persisted criteria alone.
    pub fn rederive(&self) -> bool {
        self.error.is_empty() && !self.criteria.is_empty() && self.criteria.iter().all(Criterion::evaluate)
    }

    /// Writes `<name>.json` and `<name>_criteria.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let stem = file_stem(&self.name);
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(self)?)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}_criteria.csv")))?;
        w.write_record(["criterion", "measured", "comparison", "target", "tolerance", "passed"])?;
        for c in &self.criteria {
            w.write_record([
                c.name.clone(),
                format!("{:e}", c.measured),
                serde_json::to_value(c.comparison)?.as_str().unwrap_or_default().to_string(),
                c.target.map_or(String::new(), |t| format!("{t:e}")),
                format!("{:e}", c.tolerance),
                c.passed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One line per criterion.
    pub fn summary(&self) -> String {
        let mut s = format!("{} [{}]: {}\n", self.name, self.id, if self.passed { "PASS" } else { "FAIL" });
        for c in &self.criteria {
            let target = c.target.map_or(String::new(), |t| format!(" target {t:.6e}"));
            s.push_str(&format!(
                "  {:<5} {:<32} measured {:.6e}{} tol {:.3e}\n",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                target,
                c.tolerance
            ));
        }
        for e in &self.error {
            s.push_str(&format!("  error: {e}\n"));
        }
        s
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SuiteReport {
    pub reports: Vec<RunReport>,
    pub passed: usize,
    pub failed: usize,
}

impl SuiteReport {
    pub fn from_reports(reports: Vec<RunReport>) -> Self {
        let passed = reports.iter().filter(|r| r.passed).count();
        Self {
            failed: reports.len() - passed,
            passed,
            reports,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    /// Writes `suite.json` and `suite.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("suite.json"), serde_json::to_string_pretty(self)?)?;
        let mut w = csv::Writer::from_path(dir.join("suite.csv"))?;
        w.write_record(["name", "id", "passed", "criteria", "failed_criteria", "error"])?;
        for r in &self.reports {
            let failed: Vec<&str> = r.criteria.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            w.write_record([
                r.name.clone(),
                r.id.to_string(),
                r.passed.to_string(),
                r.criteria.len().to_string(),
                failed.join(";"),
                r.error.first().cloned().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads every run report (`*.json` other than `suite.json`) in `dir`, sorted by name.
pub fn load_reports(dir: &Path) -> Result<Vec<RunReport>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_report = path.extension().is_some_and(|e| e == "json")
            && path.file_name().is_some_and(|n| n != "suite.json");
        if is_report {
            let text = std::fs::read_to_string(&path)?;
            if let Ok(r) = serde_json::from_str::<RunReport>(&text) {
                out.push(r);
            }
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}
