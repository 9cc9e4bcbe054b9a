//! Plain-text run reports: `key=value` lines, then a `[records]` block with
//! one whitespace-separated `key=value` record per line.
//!
//! Wall-clock timings live in their own `[timings]` section that
//! [`RunReport::body`] leaves out, so two runs with the same inputs produce
//! byte-identical bodies.

use std::fmt::{self, Display, Write as _};

use crate::sim::{SimulationConfig, SimulationResult};
use crate::verify::{VerifyConfig, VerifyReport, EXACT_TOL};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    fields: Vec<(String, String)>,
    records: Vec<Vec<(String, String)>>,
    timings: Vec<(String, String)>,
}

impl RunReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn record(&mut self, pairs: Vec<(&str, String)>) -> &mut Self {
        self.records.push(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect());
        self
    }

    pub fn timing(&mut self, key: &str, seconds: f64) -> &mut Self {
        self.timings.push((key.to_string(), format!("{seconds:.3}")));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn records(&self) -> &[Vec<(String, String)>] {
        &self.records
    }

    /// The deterministic part of the report.
    pub fn body(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k}={v}");
        }
        out.push_str("[records]\n");
        for rec in &self.records {
            let line: Vec<String> = rec.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Body plus timings.
    pub fn render(&self) -> String {
        let mut out = self.body();
        if !self.timings.is_empty() {
            out.push_str("[timings]\n");
            for (k, v) in &self.timings {
                let _ = writeln!(out, "{k}={v}");
            }
        }
        out
    }
}

impl Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn simulation_report(cfg: &SimulationConfig, result: &SimulationResult) -> RunReport {
    let mut r = RunReport::new();
    r.field("command", "simulate")
        .field("dgp", &cfg.dgp.name)
        .field("dim", cfg.dgp.dim)
        .field("n", cfg.n)
        .field("reps", cfg.reps)
        .field("seed", cfg.seed)
        .field("m", cfg.m)
        .field("degree", cfg.degree)
        .field("true_ate", result.true_ate);
    for s in &result.summaries {
        r.field(&format!("{}.mean", s.estimator), s.mean)
            .field(&format!("{}.sd", s.estimator), s.sd)
            .field(&format!("{}.bias", s.estimator), s.bias)
            .field(&format!("{}.mc_se", s.estimator), s.mc_se);
    }
    for rep in &result.replications {
        let mut pairs = vec![
            ("rep", rep.index.to_string()),
            ("seed", rep.seed.to_string()),
            ("n1", rep.n_treated.to_string()),
            ("n0", rep.n_control.to_string()),
        ];
        for (name, tau) in crate::sim::Replication::ESTIMATORS.iter().zip(rep.estimates()) {
            pairs.push((name, tau.to_string()));
        }
        pairs.push(("max_weight", rep.max_weight.to_string()));
        r.record(pairs);
    }
    r
}

pub fn verify_report(cfg: &VerifyConfig, report: &VerifyReport) -> RunReport {
    let mut r = RunReport::new();
    r.field("command", "verify")
        .field("instances", cfg.instances)
        .field("seed", cfg.seed)
        .field("tolerance", EXACT_TOL)
        .field("fault", if cfg.fault.is_some() { "reversed_tie_break" } else { "none" });
    for s in &report.summaries {
        let name = s.suite.name();
        r.field(&format!("{name}.status"), if s.passed() { "pass" } else { "fail" })
            .field(&format!("{name}.checks"), s.checks)
            .field(&format!("{name}.exact"), s.exact)
            .field(&format!("{name}.failing_instances"), s.failing_instances)
            .field(&format!("{name}.max_gap"), s.max_gap);
    }
    r.field("status", if report.passed() { "pass" } else { "fail" });
    for rec in &report.records {
        r.record(vec![
            ("suite", rec.suite.name().to_string()),
            ("instance", rec.index.to_string()),
            ("seed", rec.seed.to_string()),
            ("d", rec.dim.to_string()),
            ("m", rec.m.to_string()),
            ("sizes", format!("{}/{}", rec.sizes.0, rec.sizes.1)),
            ("checks", rec.checks.to_string()),
            ("exact", rec.exact.to_string()),
            ("max_gap", rec.max_gap.to_string()),
        ]);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_excludes_timings() {
        let mut r = RunReport::new();
        r.field("a", 1).field("b", 0.1 + 0.2).record(vec![("i", "0".into()), ("w", "1.5".into())]).timing("wall", 1.234);
        assert_eq!(r.body(), "a=1\nb=0.30000000000000004\n[records]\ni=0 w=1.5\n");
        assert!(r.render().ends_with("[timings]\nwall=1.234\n"));
        assert_eq!(r.get("b"), Some("0.30000000000000004"));
    }
}
