//! Check reports shared by every sampled verifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Violations at or below this level count as a pass.
pub const PASS_THRESHOLD: f64 = 1e-9;

/// Named input tuple of a single sample. Matrices are stored row-major.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleRecord(pub BTreeMap<String, Vec<f64>>);

impl SampleRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, values: Vec<f64>) -> Self {
        self.0.insert(key.to_string(), values);
        self
    }

    pub fn with_scalar(self, key: &str, value: f64) -> Self {
        self.with(key, vec![value])
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.0.get(key).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulusShape {
    Linear,
    Power,
}

/// Candidate modulus `s ↦ L·s^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusFamily {
    pub shape: ModulusShape,
    pub coefficient: f64,
    pub exponent: f64,
}

impl ModulusFamily {
    pub fn linear(coefficient: f64) -> Self {
        Self { shape: ModulusShape::Linear, coefficient, exponent: 1.0 }
    }

    pub fn power(coefficient: f64, exponent: f64) -> Self {
        Self { shape: ModulusShape::Power, coefficient, exponent }
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 || self.coefficient == 0.0 {
            return 0.0;
        }
        match self.shape {
            ModulusShape::Linear => self.coefficient * s,
            ModulusShape::Power => self.coefficient * s.powf(self.exponent),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.coefficient >= 0.0
            && self.coefficient.is_finite()
            && match self.shape {
                ModulusShape::Linear => true,
                ModulusShape::Power => self.exponent > 0.0 && self.exponent <= 1.0,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub samples: usize,
    pub max_violation: f64,
    pub worst_sample: Option<SampleRecord>,
    pub fitted_modulus: Option<ModulusFamily>,
    pub seed: u64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(check: &str, seed: u64) -> Self {
        Self {
            check: check.to_string(),
            samples: 0,
            max_violation: f64::NEG_INFINITY,
            worst_sample: None,
            fitted_modulus: None,
            seed,
            pass: true,
            failed: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Fold `(violation, sample)` pairs in order. Ties keep the earliest
    /// sample, so the result does not depend on how the samples were produced.
    pub fn from_samples<I>(check: &str, seed: u64, samples: I) -> Self
    where
        I: IntoIterator<Item = (f64, SampleRecord)>,
    {
        let mut report = Self::new(check, seed);
        for (v, s) in samples {
            report.record(v, s);
        }
        report.finish()
    }

    pub fn record(&mut self, violation: f64, sample: SampleRecord) {
        self.samples += 1;
        let worse = violation > self.max_violation || (violation.is_nan() && !self.max_violation.is_nan());
        if worse || self.worst_sample.is_none() {
            self.max_violation = violation;
            self.worst_sample = Some(sample);
        }
    }

    /// Mark a named sub-check as failed.
    pub fn fail(&mut self, name: impl Into<String>) {
        self.failed.push(name.into());
        self.pass = false;
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Recompute `pass` from the violation and any named failures.
    pub fn finish(mut self) -> Self {
        let ok = !self.max_violation.is_nan() && self.max_violation <= PASS_THRESHOLD;
        self.pass = ok && self.failed.is_empty();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_keeps_first_worst() {
        let r = CheckReport::from_samples(
            "t",
            1,
            vec![
                (-1.0, SampleRecord::new().with_scalar("i", 0.0)),
                (0.5, SampleRecord::new().with_scalar("i", 1.0)),
                (0.5, SampleRecord::new().with_scalar("i", 2.0)),
            ],
        );
        assert_eq!(r.samples, 3);
        assert_eq!(r.max_violation, 0.5);
        assert_eq!(r.worst_sample.unwrap().get("i"), Some(&[1.0][..]));
        assert!(!r.pass);
    }

    #[test]
    fn json_has_contract_fields() {
        let r = CheckReport::from_samples("c", 3, vec![(0.0, SampleRecord::new())]);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["check", "samples", "max_violation", "worst_sample", "fitted_modulus", "seed", "pass"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn modulus_eval() {
        assert_eq!(ModulusFamily::linear(2.0).eval(3.0), 6.0);
        assert_eq!(ModulusFamily::power(1.0, 0.5).eval(4.0), 2.0);
        assert_eq!(ModulusFamily::power(1.0, 0.5).eval(0.0), 0.0);
    }
}
