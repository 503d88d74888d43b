use std::collections::BTreeSet;

use serde::Serialize;

use crate::scenario::Expectation;

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// Core module that produced the value.
    pub module: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpectationResult {
    pub metric: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub value: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    pub expectations: Vec<ExpectationResult>,
    pub artifacts: Vec<String>,
    pub fault: Option<String>,
    pub passed: bool,
    pub wall_clock_s: f64,
}

/// Collects metrics, refusing duplicate names.
#[derive(Debug, Default)]
pub struct Metrics {
    items: Vec<Metric>,
    names: BTreeSet<String>,
}

impl Metrics {
    pub fn push(&mut self, module: &'static str, name: impl Into<String>, value: f64) {
        self.push_with_error(module, name, value, None);
    }

    pub fn push_with_error(
        &mut self,
        module: &'static str,
        name: impl Into<String>,
        value: f64,
        stderr: Option<f64>,
    ) {
        let name = name.into();
        assert!(
            self.names.insert(name.clone()),
            "metric `{name}` reported twice"
        );
        self.items.push(Metric {
            name,
            value,
            stderr,
            module,
        });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.items.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn into_vec(self) -> Vec<Metric> {
        self.items
    }
}

pub fn evaluate(expect: &[Expectation], metrics: &Metrics) -> Vec<ExpectationResult> {
    expect
        .iter()
        .map(|e| {
            let value = metrics.get(&e.metric);
            let passed = value
                .is_some_and(|v| e.min.is_none_or(|lo| v >= lo) && e.max.is_none_or(|hi| v <= hi));
            ExpectationResult {
                metric: e.metric.clone(),
                min: e.min,
                max: e.max,
                value,
                passed,
            }
        })
        .collect()
}
