//! Parameter sweeps: a base scenario, a Cartesian grid of JSON-pointer
//! overrides, concurrent execution up to a jobs bound, and aggregate
//! statistics with sweep-wide assertions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ScenarioConfig;
use crate::fieldio::write_atomic;
use crate::report::RunReport;
use crate::runner::run_scenario;

pub const MAX_SCENARIOS: usize = 10_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// JSON pointer into the scenario document, e.g. `/model/theta`.
    pub pointer: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AggregateAssertion {
    /// `max(metric) / median(metric) <= bound` across scenarios.
    MaxOverMedianLe { metric: String, bound: f64 },
    /// Every scenario's metric below the bound.
    AllLe { metric: String, bound: f64 },
    /// Every scenario's metric finite.
    AllFinite { metric: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: Value,
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
    #[serde(default)]
    pub aggregate: Vec<AggregateAssertion>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssertionResult {
    pub description: String,
    pub passed: bool,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub directory: String,
    pub passed: bool,
    pub failure: Option<String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub scenario_count: usize,
    pub scenarios: Vec<ScenarioSummary>,
    pub stats: BTreeMap<String, MetricStats>,
    pub assertions: Vec<AssertionResult>,
    pub passed: bool,
}

/// Set a value at a JSON pointer, inserting the final key if absent.
fn set_pointer(doc: &mut Value, pointer: &str, value: Value) -> Result<()> {
    let Some(idx) = pointer.rfind('/') else {
        bail!("pointer {pointer} must start with '/'");
    };
    let (parent_ptr, key) = (&pointer[..idx], &pointer[idx + 1..]);
    let parent = if parent_ptr.is_empty() {
        Some(doc)
    } else {
        doc.pointer_mut(parent_ptr)
    };
    match parent {
        Some(Value::Object(map)) => {
            map.insert(key.to_string(), value);
            Ok(())
        }
        Some(Value::Array(arr)) => {
            let i: usize = key.parse().context("array index in pointer")?;
            if i >= arr.len() {
                bail!("index {i} out of bounds for pointer {pointer}");
            }
            arr[i] = value;
            Ok(())
        }
        _ => bail!("pointer {parent_ptr} does not resolve to a container"),
    }
}

/// Expand the Cartesian grid into concrete scenario documents.
pub fn expand(cfg: &SweepConfig) -> Result<Vec<ScenarioConfig>> {
    let mut count = 1usize;
    for axis in &cfg.axes {
        if axis.values.is_empty() {
            bail!("axis {} has no values: empty grid", axis.pointer);
        }
        count = count.saturating_mul(axis.values.len());
    }
    if count == 0 || count > MAX_SCENARIOS {
        bail!("sweep expands to {count} scenarios (limit {MAX_SCENARIOS})");
    }
    let mut out = Vec::with_capacity(count);
    let mut indices = vec![0usize; cfg.axes.len()];
    loop {
        let mut doc = cfg.base.clone();
        for (axis, &i) in cfg.axes.iter().zip(&indices) {
            set_pointer(&mut doc, &axis.pointer, axis.values[i].clone())?;
        }
        let scenario: ScenarioConfig =
            serde_json::from_value(doc).context("scenario after overrides")?;
        scenario.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
        out.push(scenario);
        // Odometer increment.
        let mut k = cfg.axes.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            indices[k] += 1;
            if indices[k] < cfg.axes[k].values.len() {
                break;
            }
            indices[k] = 0;
        }
    }
}

/// Run every scenario (at most `jobs` concurrently) and aggregate.
pub fn run_sweep(cfg: &SweepConfig, out_dir: &Path, jobs: usize) -> Result<SweepReport> {
    let scenarios = expand(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let n = scenarios.len();
    let jobs = jobs.max(1).min(n.max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunReport>>>> = Mutex::new((0..n).map(|_| None).collect());
    let dirs: Vec<PathBuf> =
        (0..n).map(|i| out_dir.join(format!("scenario_{i:04}"))).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let report = run_scenario(&scenarios[i], &dirs[i], None);
                results.lock().unwrap()[i] = Some(report);
            });
        }
    });
    let collected = results.into_inner().unwrap();
    let mut summaries = Vec::with_capacity(n);
    let mut all_metrics: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut all_passed = true;
    for (i, slot) in collected.into_iter().enumerate() {
        let report = slot.expect("worker filled every slot")?;
        for (k, v) in &report.metrics {
            all_metrics.entry(k.clone()).or_default().push(*v);
        }
        all_passed &= report.passed;
        summaries.push(ScenarioSummary {
            directory: format!("scenario_{i:04}"),
            passed: report.passed,
            failure: report.failure.clone(),
            metrics: report.metrics.clone(),
        });
    }
    let mut stats = BTreeMap::new();
    for (k, mut vs) in all_metrics.clone() {
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let median = vs[vs.len() / 2];
        stats.insert(
            k,
            MetricStats { min: vs[0], median, max: *vs.last().unwrap() },
        );
    }
    let mut assertions = Vec::new();
    for a in &cfg.aggregate {
        let (description, passed, value) = match a {
            AggregateAssertion::MaxOverMedianLe { metric, bound } => {
                match stats.get(metric) {
                    Some(s) if s.median > 0.0 => {
                        let ratio = s.max / s.median;
                        (format!("max/median of {metric} <= {bound}"), ratio <= *bound, ratio)
                    }
                    Some(s) => (
                        format!("max/median of {metric} <= {bound} (zero median)"),
                        s.max <= 0.0,
                        f64::INFINITY,
                    ),
                    None => (format!("metric {metric} missing"), false, f64::NAN),
                }
            }
            AggregateAssertion::AllLe { metric, bound } => match stats.get(metric) {
                Some(s) => (format!("all {metric} <= {bound}"), s.max <= *bound, s.max),
                None => (format!("metric {metric} missing"), false, f64::NAN),
            },
            AggregateAssertion::AllFinite { metric } => match all_metrics.get(metric) {
                Some(vs) => (
                    format!("all {metric} finite"),
                    vs.iter().all(|v| v.is_finite()),
                    vs.len() as f64,
                ),
                None => (format!("metric {metric} missing"), false, f64::NAN),
            },
        };
        assertions.push(AssertionResult { description, passed, value });
    }
    let passed = all_passed && assertions.iter().all(|a| a.passed);
    let report = SweepReport { scenario_count: n, scenarios: summaries, stats, assertions, passed };
    write_atomic(&out_dir.join("sweep.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(report)
}
