//! Verification reports and their JSON / CSV serializations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub check: String,
    pub geometry: String,
    pub resolutions: Vec<usize>,
    pub residuals: Vec<f64>,
    pub order: Option<f64>,
    pub constants: BTreeMap<String, f64>,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub seed: u64,
    /// Named sub-results: per-criterion pass flags, scan curves, series.
    pub details: BTreeMap<String, Value>,
}

impl VerificationReport {
    pub fn new(check: &str, geometry: &str, seed: u64, tolerance: f64) -> Self {
        VerificationReport {
            schema_version: SCHEMA_VERSION,
            check: check.to_string(),
            geometry: geometry.to_string(),
            resolutions: Vec::new(),
            residuals: Vec::new(),
            order: None,
            constants: BTreeMap::new(),
            verdict: Verdict::Fail,
            tolerance,
            seed,
            details: BTreeMap::new(),
        }
    }

    pub fn constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    /// Records a named sub-criterion and returns its outcome.
    pub fn criterion(&mut self, key: &str, ok: bool) -> bool {
        self.detail(&format!("criterion.{key}"), ok);
        ok
    }

    /// Verdict is the conjunction of every recorded sub-criterion.
    pub fn finish(mut self) -> Self {
        let all = self
            .details
            .iter()
            .filter(|(k, _)| k.starts_with("criterion."))
            .all(|(_, v)| v.as_bool() == Some(true));
        let any = self.details.keys().any(|k| k.starts_with("criterion."));
        self.verdict = Verdict::from_bool(all && any);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Long-format CSV: one row per residual, constant and criterion.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,geometry,kind,key,value\n");
        let mut row = |kind: &str, key: &str, value: String| {
            out.push_str(&format!("{},{},{kind},{key},{value}\n", self.check, self.geometry));
        };
        for (n, r) in self.resolutions.iter().zip(&self.residuals) {
            row("residual", &n.to_string(), format!("{r:.17e}"));
        }
        if let Some(o) = self.order {
            row("order", "fit", format!("{o:.17e}"));
        }
        for (k, v) in &self.constants {
            row("constant", k, format!("{v:.17e}"));
        }
        for (k, v) in &self.details {
            if let Some(name) = k.strip_prefix("criterion.") {
                row("criterion", name, v.to_string());
            }
        }
        row("verdict", "all", format!("{:?}", self.verdict).to_lowercase());
        row("tolerance", "applied", format!("{:.17e}", self.tolerance));
        out
    }
}

/// Least-squares slope of `log r` against `log h` with `h = 1/N`.
pub fn fitted_order(resolutions: &[usize], residuals: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = resolutions
        .iter()
        .zip(residuals)
        .filter(|(_, &r)| r > 0.0 && r.is_finite())
        .map(|(&n, &r)| (-(n as f64).ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Fixed-width text table summarizing a run.
pub fn summary_table(reports: &[VerificationReport]) -> String {
    let mut out = format!("{:<20} {:<24} {:<8} {:>12}\n", "check", "geometry", "verdict", "max residual");
    for r in reports {
        let worst = r.residuals.iter().cloned().fold(0.0, f64::max);
        out.push_str(&format!(
            "{:<20} {:<24} {:<8} {:>12.3e}\n",
            r.check,
            r.geometry,
            if r.verdict.passed() { "pass" } else { "FAIL" },
            worst
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_exact_power_law() {
        let n = [8, 16, 32];
        let r: Vec<f64> = n.iter().map(|&k| 3.0 * (k as f64).powi(-4)).collect();
        assert!((fitted_order(&n, &r).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(fitted_order(&[8], &[1.0]), None);
        assert_eq!(fitted_order(&[8, 16], &[0.0, 0.0]), None);
    }

    #[test]
    fn verdict_needs_all_criteria() {
        let mut r = VerificationReport::new("x", "torus4", 1, 1e-10);
        r.criterion("a", true);
        assert!(r.clone().finish().verdict.passed());
        r.criterion("b", false);
        assert!(!r.clone().finish().verdict.passed());
        assert!(!VerificationReport::new("x", "g", 0, 0.0).finish().verdict.passed());
    }

    #[test]
    fn json_roundtrip_and_csv_header() {
        let mut r = VerificationReport::new("factorization", "torus4", 42, 1e-10);
        r.resolutions = vec![8];
        r.residuals = vec![1.5e-14];
        r.constant("kappa", 0.0);
        r.criterion("exact", true);
        let r = r.finish();
        let back: VerificationReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let csv = r.to_csv();
        assert!(csv.starts_with("check,geometry,kind,key,value\n"));
        let row = csv.lines().find(|l| l.starts_with("factorization,torus4,residual,8,")).unwrap();
        assert_eq!(row.rsplit(',').next().unwrap().parse::<f64>().unwrap(), 1.5e-14);
        assert!(r.to_json().contains("\"schema_version\": 1"));
    }
}
