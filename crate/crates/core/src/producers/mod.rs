//! Producers: prompt construction, endpoint or fixture access, and parsing of
//! replies into a [`MetricsBundle`].

mod bundle;
mod fetch;
mod parse;
pub mod prompt;
mod transport;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bundle::{
    aggregate, aggregate_sequences, BundleError, LengthMismatch, MetricsBundle, Provenance,
    SequenceScore,
};
pub use fetch::{fetch_metrics, FetchReport, InvariantText, ProducerCoverage, ProviderConfig};
pub use parse::{
    parse_scores, parse_sequences, render_scores, MalformedResponse, ParsedScores,
    SuggestedSequence,
};
pub use prompt::{
    build_complexity_prompt, build_invariant_prompt, build_seq_prompt, build_vuln_prompt, chunk,
    estimate_tokens, Chunking, OverBudget, Prompt, Snippet,
};
pub use transport::{
    Cassette, ChatMessage, ChatRequest, ChatTransport, HttpTransport, Interaction, Recorder,
    Replay, TransportError,
};

use crate::vm::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Producer {
    Complexity,
    Vuln,
    Seq,
    Invariant,
}

impl Producer {
    pub const ALL: [Producer; 4] = [
        Producer::Complexity,
        Producer::Vuln,
        Producer::Seq,
        Producer::Invariant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Producer::Complexity => "complexity",
            Producer::Vuln => "vuln",
            Producer::Seq => "seq",
            Producer::Invariant => "invariant",
        }
    }
}

impl fmt::Display for Producer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Producer {
    type Err = String;

    fn from_str(s: &str) -> Result<Producer, String> {
        Producer::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| format!("unknown producer `{s}` (expected complexity, vuln, seq or invariant)"))
    }
}

/// Parses a comma-separated producer list; the empty string is the baseline.
pub fn parse_producer_list(s: &str) -> Result<Vec<Producer>, String> {
    let mut out: Vec<Producer> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// Broadcasts function-level scores to every block of the function:
/// `[func][block]`. Unscored functions get 0.
pub fn blockify(scores: &BTreeMap<String, f64>, program: &Program) -> Vec<Vec<f64>> {
    let mut by_func = vec![0.0; program.cfgs.len()];
    for (sig, &v) in scores {
        if let Some(f) = program.lookup_signature(sig) {
            by_func[f.0] = v;
        }
    }
    program
        .cfgs
        .iter()
        .zip(by_func)
        .map(|(cfg, v)| vec![v; cfg.blocks.len()])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    #[test]
    fn producer_lists() {
        assert_eq!(parse_producer_list("").unwrap(), vec![]);
        assert_eq!(
            parse_producer_list("seq, complexity,seq").unwrap(),
            vec![Producer::Complexity, Producer::Seq]
        );
        assert!(parse_producer_list("taint").is_err());
    }

    #[test]
    fn blockify_broadcasts() {
        let unit = parse(
            "contract A {\n uint x;\n function f(uint v) public { if (v > 1) { x = 1; } require(x == 0); }\n function g() public { }\n}",
        )
        .unwrap();
        let p = Program::new(unit);
        let mut s = BTreeMap::new();
        s.insert("f(uint)".to_string(), 40.0);
        let b = blockify(&s, &p);
        assert!(b[0].len() >= 4);
        assert!(b[0].iter().all(|&v| v == 40.0));
        assert_eq!(b[1], vec![0.0]);
    }
}
