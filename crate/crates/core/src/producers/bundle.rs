use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::frontend::SourceUnit;

/// Producer outputs before scaling. Every score lies in [0, 100].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsBundle {
    #[serde(default)]
    pub complexity: BTreeMap<String, f64>,
    #[serde(default)]
    pub vuln: BTreeMap<String, f64>,
    /// invariant id -> signature -> dependency likelihood.
    #[serde(default)]
    pub invariants: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub sequences: Vec<SequenceScore>,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceScore {
    pub calls: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Fixture {
        path: String,
    },
    Endpoint {
        endpoint: String,
        model: String,
        /// Unix seconds.
        timestamp: u64,
    },
}

impl Default for Provenance {
    fn default() -> Provenance {
        Provenance::Fixture {
            path: String::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("replies disagree on length: expected {expected}, got {got}")]
pub struct LengthMismatch {
    pub expected: usize,
    pub got: usize,
}

fn check_score(where_: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && (0.0..=100.0).contains(&v) {
        Ok(())
    } else {
        Err(format!("{where_}: score {v} is outside [0, 100]"))
    }
}

fn check_sig(unit: &SourceUnit, where_: &str, sig: &str) -> Result<(), String> {
    match unit.lookup_signature(sig) {
        Some(_) => Ok(()),
        None => Err(format!("{where_}: unknown function `{sig}`")),
    }
}

impl MetricsBundle {
    /// Checks scores are in range, signatures exist and sequences have at
    /// least two calls.
    pub fn validate(&self, unit: &SourceUnit) -> Result<(), String> {
        for (name, map) in [("complexity", &self.complexity), ("vuln", &self.vuln)] {
            for (sig, &v) in map {
                check_sig(unit, name, sig)?;
                check_score(&format!("{name}.{sig}"), v)?;
            }
        }
        for (id, map) in &self.invariants {
            for (sig, &v) in map {
                check_sig(unit, &format!("invariants.{id}"), sig)?;
                check_score(&format!("invariants.{id}.{sig}"), v)?;
            }
        }
        for (i, s) in self.sequences.iter().enumerate() {
            let at = format!("sequences[{i}]");
            if s.calls.len() < 2 {
                return Err(format!("{at}: needs at least two calls"));
            }
            for sig in &s.calls {
                check_sig(unit, &at, sig)?;
            }
            check_score(&at, s.score)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    /// Reads a fixture and validates it against `unit`.
    pub fn load(path: &Path, unit: &SourceUnit) -> Result<MetricsBundle, BundleError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| BundleError::Io {
            path: shown.clone(),
            source,
        })?;
        let bundle: MetricsBundle = serde_json::from_str(&text).map_err(|source| BundleError::Json {
            path: shown.clone(),
            source,
        })?;
        bundle
            .validate(unit)
            .map_err(|message| BundleError::Invalid { path: shown, message })?;
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<(), BundleError> {
        std::fs::write(path, self.to_json()).map_err(|source| BundleError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Whether every score of every producer is zero.
    pub fn is_zero(&self) -> bool {
        self.complexity.values().all(|&v| v == 0.0)
            && self.vuln.values().all(|&v| v == 0.0)
            && self.invariants.values().flat_map(|m| m.values()).all(|&v| v == 0.0)
            && self.sequences.iter().all(|s| s.score == 0.0)
    }
}

/// Elementwise mean of the successful replies; all zeros when none succeeded.
pub fn aggregate<E>(replies: &[Result<Vec<f64>, E>], n: usize) -> Result<Vec<f64>, LengthMismatch> {
    let ok: Vec<&Vec<f64>> = replies.iter().filter_map(|r| r.as_ref().ok()).collect();
    if let Some(bad) = ok.iter().find(|r| r.len() != n) {
        return Err(LengthMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    if ok.is_empty() {
        return Ok(vec![0.0; n]);
    }
    Ok((0..n)
        .map(|i| ok.iter().map(|r| r[i]).sum::<f64>() / ok.len() as f64)
        .collect())
}

/// Union of suggested sequences over replies; each keeps the mean of the
/// scores it received in the replies that mention it. First-seen order.
pub fn aggregate_sequences(replies: &[Vec<SequenceScore>]) -> Vec<SequenceScore> {
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut acc: BTreeMap<Vec<String>, (f64, usize)> = BTreeMap::new();
    for reply in replies {
        let mut in_reply: Vec<(&Vec<String>, f64, usize)> = Vec::new();
        for s in reply {
            match in_reply.iter_mut().find(|e| *e.0 == s.calls) {
                Some(e) => {
                    e.1 += s.score;
                    e.2 += 1;
                }
                None => in_reply.push((&s.calls, s.score, 1)),
            }
        }
        for (calls, sum, k) in in_reply {
            let e = acc.entry(calls.clone()).or_insert_with(|| {
                order.push(calls.clone());
                (0.0, 0)
            });
            e.0 += sum / k as f64;
            e.1 += 1;
        }
    }
    order
        .into_iter()
        .map(|calls| {
            let (sum, k) = acc[&calls];
            SequenceScore {
                score: sum / k as f64,
                calls,
            }
        })
        .collect()
}
