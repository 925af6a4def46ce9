//! Named violation measurements and the scenario report.

use serde::Serialize;

/// Max violation per named identity.
#[derive(Debug, Clone, Default)]
pub struct Findings {
    pub items: Vec<(String, f64)>,
}

impl Findings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, name: &str, v: f64) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        match self.items.iter_mut().find(|(n, _)| n == name) {
            Some((_, old)) => *old = old.max(v),
            None => self.items.push((name.to_string(), v)),
        }
    }

    pub fn merge(&mut self, prefix: &str, other: &Findings) {
        for (n, v) in &other.items {
            self.record(&format!("{prefix}{n}"), *v);
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.items.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn max(&self) -> f64 {
        self.items.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.items.iter().all(|(_, v)| *v <= tol)
    }

    pub fn worst(&self) -> Option<(&str, f64)> {
        self.items
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(n, v)| (n.as_str(), *v))
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub violation: f64,
    pub tol: f64,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Report { scenario: scenario.to_string(), seed, checks: vec![] }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.retain(|c| c.name != check.name);
        self.checks.push(check);
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Deterministic JSON: checks sorted by name, no timings.
    pub fn to_json(&self) -> String {
        let mut sorted = self.clone();
        sorted.checks.sort_by(|a, b| a.name.cmp(&b.name));
        let mut v = serde_json::to_value(&sorted).expect("serializable");
        if let Some(checks) = v.get_mut("checks").and_then(|c| c.as_array_mut()) {
            for c in checks {
                if let Some(x) = c.get_mut("violation") {
                    // Infinity is not valid JSON.
                    if x.is_null() {
                        *x = serde_json::Value::String("inf".into());
                    }
                }
            }
        }
        serde_json::to_string_pretty(&v).expect("serializable") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("scenario {} (seed {})\n", self.scenario, self.seed);
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {:<44} {:>10.3e} <= {:.0e}  {:>8.1} ms  {}\n",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.violation,
                c.tol,
                c.elapsed_ms,
                c.detail
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        out.push_str(&format!("  {} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}
