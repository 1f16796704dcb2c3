use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bundle::{aggregate, aggregate_sequences, MetricsBundle, Provenance, SequenceScore};
use super::parse::{parse_scores, parse_sequences, MalformedResponse};
use super::prompt::{
    build_prompt, build_seq_prompt, chunk, invariant_instruction, scored_functions, Prompt,
    COMPLEXITY_INSTRUCTION, DEFAULT_BUDGET_TOKENS, VULN_INSTRUCTION,
};
use super::transport::{ChatRequest, ChatTransport};
use super::Producer;
use crate::frontend::{SourceUnit, StaticSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperatures: Vec<f64>,
    /// Extra attempts per request after the first.
    pub retries: u32,
    pub timeout_secs: u64,
    pub budget_tokens: usize,
    /// Replay this cassette instead of calling the endpoint.
    pub cassette: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> ProviderConfig {
        ProviderConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "llama-2-70b-chat".into(),
            api_key_env: "GUIDEFUZZ_API_KEY".into(),
            temperatures: vec![0.9, 0.95, 1.0],
            retries: 3,
            timeout_secs: 60,
            budget_tokens: DEFAULT_BUDGET_TOKENS,
            cassette: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.temperatures.is_empty() {
            return Err("llm.temperatures must not be empty".into());
        }
        if let Some(t) = self.temperatures.iter().find(|t| !(**t > 0.0 && **t <= 2.0)) {
            return Err(format!("llm.temperatures: {t} is outside (0, 2]"));
        }
        if self.budget_tokens == 0 {
            return Err("llm.budget_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantText {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProducerCoverage {
    /// Functions with at least one successful reply.
    pub scored: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct FetchReport {
    pub bundle: MetricsBundle,
    /// Requests that still failed after all retries.
    pub failed_requests: usize,
    /// Keyed by `complexity`, `vuln`, `seq` or `invariant:<id>`.
    pub coverage: BTreeMap<String, ProducerCoverage>,
}

impl FetchReport {
    /// Some score fell back to 0 because the endpoint never answered usefully.
    pub fn is_partial(&self) -> bool {
        self.failed_requests > 0 || self.coverage.values().any(|c| c.scored < c.total)
    }
}

struct Fetcher<'a> {
    transport: &'a dyn ChatTransport,
    config: &'a ProviderConfig,
    failed: usize,
}

impl Fetcher<'_> {
    /// One reply per temperature, each retried on transport or parse failure.
    fn ask<T>(
        &mut self,
        prompt: &Prompt,
        parse: impl Fn(&str) -> Result<T, MalformedResponse>,
    ) -> Vec<Result<T, String>> {
        let mut out = Vec::new();
        for &temperature in &self.config.temperatures {
            let request = ChatRequest::user(&self.config.model, &prompt.text, temperature);
            let mut last = String::new();
            let mut reply = None;
            for _ in 0..=self.config.retries {
                match self.transport.complete(&request).map_err(|e| e.to_string()) {
                    Ok(text) => match parse(&text) {
                        Ok(v) => {
                            reply = Some(v);
                            break;
                        }
                        Err(e) => last = e.to_string(),
                    },
                    Err(e) => last = e,
                }
            }
            match reply {
                Some(v) => out.push(Ok(v)),
                None => {
                    log::warn!(
                        "{:?} prompt at temperature {temperature} failed: {last}",
                        prompt.producer
                    );
                    self.failed += 1;
                    out.push(Err(last));
                }
            }
        }
        out
    }

    fn scores(
        &mut self,
        unit: &SourceUnit,
        summary: &StaticSummary,
        producer: Producer,
        instruction: &str,
    ) -> (BTreeMap<String, f64>, ProducerCoverage) {
        let targets = scored_functions(unit);
        let budget = self.config.budget_tokens;
        let plan = chunk(unit, summary, instruction, &targets, budget);
        let mut out: BTreeMap<String, f64> = targets
            .iter()
            .map(|&f| (unit.display_signature(f), 0.0))
            .collect();
        let mut cov = ProducerCoverage {
            scored: 0,
            total: targets.len(),
        };
        for batch in &plan.batches {
            let prompt = build_prompt(unit, producer, instruction, batch, budget)
                .expect("chunking respects the budget");
            let n = prompt.targets.len();
            let replies = self.ask(&prompt, |t| parse_scores(t, n).map(|p| p.scores));
            if replies.iter().any(|r| r.is_ok()) {
                cov.scored += n;
            }
            let means = aggregate(&replies, n).expect("parse_scores returns n scores");
            for (&f, v) in prompt.targets.iter().zip(means) {
                out.insert(unit.display_signature(f), v);
            }
        }
        (out, cov)
    }
}

/// Runs all four producers against `transport`. Failures degrade to zero
/// scores instead of erroring.
pub fn fetch_metrics(
    unit: &SourceUnit,
    summary: &StaticSummary,
    config: &ProviderConfig,
    invariants: &[InvariantText],
    transport: &dyn ChatTransport,
    provenance: Provenance,
) -> FetchReport {
    let mut f = Fetcher {
        transport,
        config,
        failed: 0,
    };
    let mut bundle = MetricsBundle {
        provenance,
        ..MetricsBundle::default()
    };
    let mut coverage = BTreeMap::new();

    let (c, cov) = f.scores(unit, summary, Producer::Complexity, COMPLEXITY_INSTRUCTION);
    bundle.complexity = c;
    coverage.insert("complexity".to_string(), cov);
    let (v, cov) = f.scores(unit, summary, Producer::Vuln, VULN_INSTRUCTION);
    bundle.vuln = v;
    coverage.insert("vuln".to_string(), cov);
    for inv in invariants {
        let (m, cov) = f.scores(unit, summary, Producer::Invariant, &invariant_instruction(&inv.text));
        bundle.invariants.insert(inv.id.clone(), m);
        coverage.insert(format!("invariant:{}", inv.id), cov);
    }

    let public = scored_functions(unit).len();
    let mut seq_cov = ProducerCoverage {
        scored: 0,
        total: public,
    };
    match build_seq_prompt(unit, config.budget_tokens) {
        Ok(prompt) => {
            let replies = f.ask(&prompt, |t| {
                parse_sequences(t, unit).map(|v| {
                    v.into_iter()
                        .map(|s| SequenceScore {
                            calls: s.calls,
                            score: s.score,
                        })
                        .collect::<Vec<_>>()
                })
            });
            let ok: Vec<Vec<SequenceScore>> = replies.into_iter().filter_map(Result::ok).collect();
            if !ok.is_empty() {
                seq_cov.scored = public;
            }
            bundle.sequences = aggregate_sequences(&ok);
        }
        Err(e) => log::warn!("sequence prompt skipped: {e}"),
    }
    coverage.insert("seq".to_string(), seq_cov);

    FetchReport {
        bundle,
        failed_requests: f.failed,
        coverage,
    }
}
