//! Reply parsing for score lists and call-sequence suggestions.

use std::sync::OnceLock;

use regex::Regex;

use crate::frontend::SourceUnit;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("malformed response: {0}")]
pub struct MalformedResponse(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScores {
    pub scores: Vec<f64>,
    /// How many values were pulled into [0, 100].
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestedSequence {
    /// Display signatures, in call order.
    pub calls: Vec<String>,
    pub score: f64,
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"-?\d+(?:\.\d+)?").expect("valid regex"))
}

fn separator_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*>?\s*,\s*<?\s*$").expect("valid regex"))
}

fn clamp(v: f64, clamped: &mut usize) -> f64 {
    if (0.0..=100.0).contains(&v) {
        v
    } else {
        *clamped += 1;
        v.clamp(0.0, 100.0)
    }
}

/// Extracts the first comma-separated run of `n` numbers from `text`. A longer
/// run is accepted (truncated to `n`) when no run of exactly `n` exists.
/// Values outside [0, 100] are clamped.
pub fn parse_scores(text: &str, n: usize) -> Result<ParsedScores, MalformedResponse> {
    assert!(n >= 1, "expected at least one score");
    let mut runs: Vec<Vec<f64>> = Vec::new();
    let mut prev_end: Option<usize> = None;
    for m in number_re().find_iter(text) {
        let v: f64 = m.as_str().parse().expect("regex matched a number");
        let joined = prev_end.is_some_and(|end| separator_re().is_match(&text[end..m.start()]));
        match runs.last_mut() {
            Some(run) if joined => run.push(v),
            _ => runs.push(vec![v]),
        }
        prev_end = Some(m.end());
    }
    let run = runs
        .iter()
        .find(|r| r.len() == n)
        .or_else(|| runs.iter().find(|r| r.len() > n))
        .ok_or_else(|| MalformedResponse(format!("no comma-separated list of {n} scores")))?;
    let mut clamped = 0;
    let scores: Vec<f64> = run[..n].iter().map(|&v| clamp(v, &mut clamped)).collect();
    if clamped > 0 {
        log::warn!("clamped {clamped} score(s) into [0, 100]");
    }
    Ok(ParsedScores { scores, clamped })
}

/// Inverse of [`parse_scores`] for well-formed lists.
pub fn render_scores(scores: &[f64]) -> String {
    scores
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn strip_marker(line: &str) -> &str {
    let line = line.trim();
    let line = line
        .strip_prefix("- ")
        .or_else(|| line.strip_prefix("* "))
        .unwrap_or(line);
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return r.trim();
        }
    }
    line
}

/// Parses `sigA=>sigB[=>sigC...]:score` lines. Lines that do not have that
/// shape are skipped silently; lines naming unknown functions are dropped with
/// a warning.
pub fn parse_sequences(text: &str, unit: &SourceUnit) -> Result<Vec<SuggestedSequence>, MalformedResponse> {
    let mut out = Vec::new();
    for raw in text.lines() {
        let cleaned = raw.replace('`', "");
        let line = strip_marker(&cleaned);
        if !line.contains("=>") {
            continue;
        }
        let Some((chain, score)) = line.rsplit_once(':') else {
            continue;
        };
        let Some(m) = number_re().find(score) else {
            continue;
        };
        let mut clamped = 0;
        let score = clamp(m.as_str().parse().expect("regex matched a number"), &mut clamped);
        if clamped > 0 {
            log::warn!("clamped sequence score in `{}`", raw.trim());
        }
        // Tolerate a label such as "Sequence 1: a()=>b():80".
        let chain = match chain.split_once("=>") {
            Some((first, _)) if first.contains(':') => &chain[first.rfind(':').map_or(0, |i| i + 1)..],
            _ => chain,
        };
        let mut calls = Vec::new();
        let mut unknown = None;
        for sig in chain.split("=>") {
            match unit.lookup_signature(sig.trim()) {
                Some(f) => calls.push(unit.display_signature(f)),
                None => {
                    unknown = Some(sig.trim().to_string());
                    break;
                }
            }
        }
        if let Some(sig) = unknown {
            log::warn!("dropping suggested sequence with unknown function `{sig}`");
            continue;
        }
        if calls.len() >= 2 {
            out.push(SuggestedSequence { calls, score });
        }
    }
    if out.is_empty() {
        return Err(MalformedResponse("no parsable sequence lines".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    #[test]
    fn plain_list() {
        let p = parse_scores("30,60,90", 3).unwrap();
        assert_eq!(p.scores, vec![30.0, 60.0, 90.0]);
        assert_eq!(p.clamped, 0);
    }

    #[test]
    fn clamps_out_of_range() {
        let p = parse_scores("Here are the scores: 10, 200, 5", 3).unwrap();
        assert_eq!(p.scores, vec![10.0, 100.0, 5.0]);
        assert_eq!(p.clamped, 1);
        assert_eq!(parse_scores("-4,7", 2).unwrap().scores, vec![0.0, 7.0]);
    }

    #[test]
    fn skips_prose_numbers() {
        let text = "I looked at the 3 snippets. Snippet 1 has 2 branches, snippet 3 is trivial.\n\
                    <45>,<80>,<12>";
        assert_eq!(parse_scores(text, 3).unwrap().scores, vec![45.0, 80.0, 12.0]);
    }

    #[test]
    fn longer_run_is_truncated() {
        assert_eq!(parse_scores("1,2,3,4", 3).unwrap().scores, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn missing_run_is_malformed() {
        assert!(parse_scores("I cannot rank these.", 2).is_err());
        assert!(parse_scores("10, 20", 3).is_err());
    }

    const UNIT: &str = "contract T {\n\
        function transfer(address to, uint v) public { }\n\
        function skim() public { }\n\
        function fund() public { }\n}";

    #[test]
    fn sequence_lines() {
        let unit = parse(UNIT).unwrap();
        let got = parse_sequences("transfer(address,uint)=>skim():80", &unit).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].calls, vec!["transfer(address,uint)", "skim()"]);
        assert_eq!(got[0].score, 80.0);
    }

    #[test]
    fn unknown_signature_is_dropped() {
        let unit = parse(UNIT).unwrap();
        let text = "1. `transfer(address,uint256) => skim() => fund()`: 90\n\
                    - burn()=>fund():70\n\
                    Sequence 3: skim()=>fund():40";
        let got = parse_sequences(text, &unit).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].calls, vec!["transfer(address,uint)", "skim()", "fund()"]);
        assert_eq!(got[1].calls, vec!["skim()", "fund()"]);
        assert_eq!(got[1].score, 40.0);
    }

    #[test]
    fn no_sequences_is_malformed() {
        let unit = parse(UNIT).unwrap();
        assert!(parse_sequences("nothing interesting", &unit).is_err());
        assert!(parse_sequences("skim():50", &unit).is_err());
    }
}
