mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use guidefuzz::frontend::{summarize, FuncId, SourceUnit};
use guidefuzz::producers::prompt::{fitted_snippet, scored_functions, COMPLEXITY_INSTRUCTION};
use guidefuzz::producers::{
    aggregate, build_complexity_prompt, build_invariant_prompt, build_seq_prompt, build_vuln_prompt, chunk,
    estimate_tokens, fetch_metrics, parse_scores, parse_sequences, render_scores, Cassette, ChatRequest,
    ChatTransport, HttpTransport, InvariantText, MetricsBundle, Provenance, ProviderConfig, Recorder, Replay,
    SequenceScore, TransportError,
};
use proptest::prelude::*;

use common::{bench_unit, golden};

const BUDGET: usize = 28_000;

fn registry() -> SourceUnit {
    bench_unit("registry.msol")
}

fn single_batch(unit: &SourceUnit, instruction: &str) -> Vec<guidefuzz::producers::Snippet> {
    let plan = chunk(unit, &summarize(unit), instruction, &scored_functions(unit), BUDGET);
    assert_eq!(plan.batches.len(), 1);
    plan.batches.into_iter().next().unwrap()
}

#[test]
fn complexity_prompt_golden() {
    let unit = registry();
    let batch = single_batch(&unit, COMPLEXITY_INSTRUCTION);
    let p = build_complexity_prompt(&unit, &batch, BUDGET).unwrap();
    assert!(p.text.starts_with(
        "How complex are the following Solidity code snippets (i.e., how hard is it to gain high test coverage by trying random arguments)? Rank within the range of 0 to 100. Output in the form of <Complexity 1>,<Complexity 2>,<Complexity 3>...\n"
    ));
    assert_eq!(p.tokens, estimate_tokens(&p.text));
    golden("prompt.complexity.txt", &p.text);
}

#[test]
fn vuln_prompt_golden() {
    let unit = registry();
    let batch = single_batch(&unit, guidefuzz::producers::prompt::VULN_INSTRUCTION);
    let p = build_vuln_prompt(&unit, &batch, BUDGET).unwrap();
    assert!(p.text.starts_with(
        "How likely are the following Solidity snippets to cause vulnerabilities (e.g., logical issue, reentrancy, etc.)? Rank each in terms of 100. Output in the form of <Likelihood 1>,<Likelihood 2>,<Likelihood 3>...\n"
    ));
    golden("prompt.vuln.txt", &p.text);
}

#[test]
fn invariant_prompt_golden() {
    let unit = registry();
    let text = "total supply never decreases";
    let instruction = guidefuzz::producers::prompt::invariant_instruction(text);
    let batch = single_batch(&unit, &instruction);
    let p = build_invariant_prompt(&unit, text, &batch, BUDGET).unwrap();
    assert!(p.text.starts_with(
        "How likely is following Solidity code snippets to cause total supply never decreases being violated? Rank each in terms of 100. Output in the form of <Likelihood 1>,<Likelihood 2>,<Likelihood 3>...\n"
    ));
    assert!(!p.text.contains("{{Invariant}}"));
    golden("prompt.invariant.txt", &p.text);
}

#[test]
fn sequence_prompt_golden() {
    let unit = registry();
    let p = build_seq_prompt(&unit, BUDGET).unwrap();
    assert!(p.text.starts_with(
        "Suggest a series of interesting sequences given following the public Solidity functions and their code. Then, rank each interestingness of the sequence within the range of 0 to 100. Output one sequence in a line with the form of <Function Signature 1>=><Function Signature 2>:<Interestingness>.\n"
    ));
    assert_eq!(p.targets, scored_functions(&unit));
    golden("prompt.seq.txt", &p.text);
}

#[test]
fn prompts_are_deterministic() {
    let a = registry();
    let b = registry();
    let ba = single_batch(&a, COMPLEXITY_INSTRUCTION);
    let bb = single_batch(&b, COMPLEXITY_INSTRUCTION);
    assert_eq!(
        build_complexity_prompt(&a, &ba, BUDGET).unwrap(),
        build_complexity_prompt(&b, &bb, BUDGET).unwrap()
    );
    assert_eq!(build_seq_prompt(&a, BUDGET).unwrap(), build_seq_prompt(&b, BUDGET).unwrap());
}

#[test]
fn sequence_prompt_over_budget_is_an_error() {
    let unit = registry();
    let err = build_seq_prompt(&unit, 50).unwrap_err();
    assert_eq!(err.budget, 50);
    assert!(err.tokens > 50);
}

/// Tokens of a prompt made of `instruction` and the given snippet bodies,
/// counted directly as ceil(chars / 4) on the expected layout.
fn hand_tokens(unit: &SourceUnit, instruction: &str, batch: &[(FuncId, Vec<FuncId>)]) -> usize {
    let mut chars = instruction.chars().count() + 2;
    for (i, (t, ctx)) in batch.iter().enumerate() {
        if i > 0 {
            chars += 1;
        }
        let header = format!("Snippet {}: {}\n```solidity\n", i + 1, unit.display_signature(*t));
        chars += header.chars().count() + unit.function_source(*t).chars().count() + 1;
        for c in ctx {
            chars += 1 + unit.function_source(*c).chars().count() + 1;
        }
        chars += 4;
    }
    chars.div_ceil(4)
}

#[test]
fn chunking_at_2000_tokens() {
    let unit = registry();
    let summary = summarize(&unit);
    let targets = scored_functions(&unit);
    let budget = 2000;
    let plan = chunk(&unit, &summary, COMPLEXITY_INSTRUCTION, &targets, budget);
    assert!(plan.oversized.is_empty());
    assert!(plan.batches.len() > 1, "registry should not fit one 2000-token prompt");

    // Every batch fits, keeps declaration order, and together they cover each
    // target once.
    let mut seen = Vec::new();
    for batch in &plan.batches {
        let b: Vec<(FuncId, Vec<FuncId>)> = batch.iter().map(|s| (s.target, s.context.clone())).collect();
        let p = build_complexity_prompt(&unit, batch, budget).unwrap();
        assert_eq!(p.tokens, hand_tokens(&unit, COMPLEXITY_INSTRUCTION, &b));
        assert!(p.tokens <= budget);
        let ids: Vec<usize> = batch.iter().map(|s| s.target.0).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        seen.extend(ids);
    }
    seen.sort_unstable();
    assert_eq!(seen, targets.iter().map(|f| f.0).collect::<Vec<_>>());

    // First fit: no snippet could have joined an earlier batch.
    for (bi, batch) in plan.batches.iter().enumerate() {
        for s in batch {
            for earlier in &plan.batches[..bi] {
                let before: Vec<_> = earlier.iter().filter(|e| e.target < s.target).cloned().collect();
                let mut trial: Vec<(FuncId, Vec<FuncId>)> =
                    before.iter().map(|e| (e.target, e.context.clone())).collect();
                trial.push((s.target, s.context.clone()));
                assert!(hand_tokens(&unit, COMPLEXITY_INSTRUCTION, &trial) > budget);
            }
        }
    }

    let layout: String = plan
        .batches
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let names: Vec<String> = b
                .iter()
                .map(|s| {
                    let ctx: Vec<String> = s.context.iter().map(|&c| unit.display_signature(c)).collect();
                    format!("{} [{}]", unit.display_signature(s.target), ctx.join(", "))
                })
                .collect();
            format!("batch {}: {}\n", i + 1, names.join("; "))
        })
        .collect();
    golden("chunks.registry.2000.txt", &layout);
}

#[test]
fn tight_budget_trims_context_then_gives_up() {
    let unit = registry();
    let summary = summarize(&unit);
    let register = unit.lookup_signature("register(uint)").unwrap();
    let full = fitted_snippet(&unit, &summary, COMPLEXITY_INSTRUCTION, register, BUDGET).unwrap();
    assert!(!full.context.is_empty());
    let alone = hand_tokens(&unit, COMPLEXITY_INSTRUCTION, &[(register, vec![])]);
    let trimmed = fitted_snippet(&unit, &summary, COMPLEXITY_INSTRUCTION, register, alone).unwrap();
    assert!(trimmed.context.is_empty());
    assert!(fitted_snippet(&unit, &summary, COMPLEXITY_INSTRUCTION, register, alone - 1).is_none());
    let plan = chunk(&unit, &summary, COMPLEXITY_INSTRUCTION, &[register], alone - 1);
    assert_eq!(plan.oversized, vec![register]);
}

#[test]
fn verbose_reply_is_parsed() {
    let reply = "Sure! Here is my assessment of the 3 snippets.\n\n\
        Snippet 1 is straightforward, snippet 2 has nested guards.\n\n\
        <40>,<75>,<10>\n\n\
        Let me know if you need a breakdown for any of the 3 functions.";
    assert_eq!(parse_scores(reply, 3).unwrap().scores, vec![40.0, 75.0, 10.0]);
    let chatty = "Complexities: 12, 88.5, 130, 7 (the third is capped)";
    let p = parse_scores(chatty, 4).unwrap();
    assert_eq!(p.scores, vec![12.0, 88.5, 100.0, 7.0]);
    assert_eq!(p.clamped, 1);
    assert!(parse_scores("no numbers here", 2).is_err());
    assert!(parse_scores("1, 2", 3).is_err());
}

#[test]
fn three_hop_sequence_reply() {
    let unit = registry();
    let reply = "Here are some interesting sequences:\n\
        1. `init(address,uint)`=>`register(uint)`=>`transferName(address)`:85\n\
        2. register(uint) => release(): 40\n\
        - advance(uint)=>renew():20\n\
        3. unknown()=>close():99\n\
        That covers the main flows.";
    let got = parse_sequences(reply, &unit).unwrap();
    let got: Vec<(Vec<String>, f64)> = got.into_iter().map(|s| (s.calls, s.score)).collect();
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    assert_eq!(
        got,
        vec![
            (s(&["init(address,uint)", "register(uint)", "transferName(address)"]), 85.0),
            (s(&["register(uint)", "release()"]), 40.0),
            (s(&["advance(uint)", "renew()"]), 20.0),
        ]
    );
}

/// Answers every prompt from its content: score lists sized to the number of
/// snippets, and a fixed sequence reply.
struct Scripted {
    calls: AtomicUsize,
}

impl Scripted {
    fn new() -> Scripted {
        Scripted { calls: AtomicUsize::new(0) }
    }
}

impl ChatTransport for Scripted {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let text = &request.messages[0].content;
        if text.starts_with("Suggest") {
            return Ok(format!(
                "register(uint)=>renew():{}\nregister(uint)=>release()=>register(uint):50\n",
                (request.temperature * 60.0).round()
            ));
        }
        let n = text.matches("\nSnippet ").count() + usize::from(text.contains("\n\nSnippet 1:"));
        let n = n.min(text.matches("```solidity").count());
        let base = if text.starts_with("How complex") { 10.0 } else { 20.0 };
        let scores: Vec<f64> = (0..n).map(|i| base + i as f64 + request.temperature * 10.0).collect();
        Ok(format!("Scores: {}", render_scores(&scores)))
    }
}

fn config() -> ProviderConfig {
    ProviderConfig {
        retries: 0,
        ..ProviderConfig::default()
    }
}

fn prov() -> Provenance {
    Provenance::Endpoint {
        endpoint: "test".into(),
        model: "llama-2-70b-chat".into(),
        timestamp: 0,
    }
}

fn invariants() -> Vec<InvariantText> {
    vec![InvariantText {
        id: "bounded".into(),
        text: "the number of registered names stays at most 8".into(),
    }]
}

#[test]
fn cassette_replay_golden() {
    let unit = registry();
    let summary = summarize(&unit);
    let cfg = config();
    let recorder = Recorder::new(Scripted::new());
    let live = fetch_metrics(&unit, &summary, &cfg, &invariants(), &recorder, prov());
    assert!(!live.is_partial());
    let cassette = recorder.cassette();
    // complexity, vuln, one invariant and the sequence prompt, three
    // temperatures each.
    assert_eq!(cassette.interactions.len(), 12);
    golden(
        "cassette.registry.json",
        &(serde_json::to_string_pretty(&cassette).unwrap() + "\n"),
    );

    let path = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/cassette.registry.json");
    let replay = Replay::new(Cassette::load(&path).unwrap());
    let replayed = fetch_metrics(&unit, &summary, &cfg, &invariants(), &replay, prov());
    assert_eq!(replayed.bundle, live.bundle);
    assert_eq!(replayed.failed_requests, 0);
    golden("bundle.registry.json", &replayed.bundle.to_json());

    // An exhausted cassette degrades to zero scores.
    let again = fetch_metrics(&unit, &summary, &cfg, &invariants(), &replay, prov());
    assert!(again.is_partial());
    assert!(again.bundle.is_zero());
}

#[test]
fn temperatures_are_averaged() {
    let unit = registry();
    let summary = summarize(&unit);
    let r = fetch_metrics(&unit, &summary, &config(), &[], &Scripted::new(), prov());
    // Snippet 1 scored 10 + 10t at t = 0.9, 0.95, 1.0.
    let first = unit.display_signature(scored_functions(&unit)[0]);
    assert!((r.bundle.complexity[&first] - (10.0 + 9.5)).abs() < 1e-9);
    let seq = &r.bundle.sequences[0];
    assert_eq!(seq.calls, vec!["register(uint)", "renew()"]);
    assert!((seq.score - (54.0 + 57.0 + 60.0) / 3.0).abs() < 1e-9);
    assert_eq!(r.bundle.sequences[1].score, 50.0);
}

struct AlwaysFails;

impl ChatTransport for AlwaysFails {
    fn complete(&self, _: &ChatRequest) -> Result<String, TransportError> {
        Err(TransportError::Http("connection refused".into()))
    }
}

#[test]
fn failing_endpoint_gives_zero_scores() {
    let unit = registry();
    let summary = summarize(&unit);
    let r = fetch_metrics(&unit, &summary, &config(), &invariants(), &AlwaysFails, prov());
    assert!(r.is_partial());
    assert_eq!(r.failed_requests, 12);
    assert!(r.bundle.is_zero());
    assert!(r.bundle.sequences.is_empty());
    let public = scored_functions(&unit).len();
    assert_eq!(r.bundle.complexity.len(), public);
    assert!(r.coverage.values().all(|c| c.scored == 0 && c.total == public));
    r.bundle.validate(&unit).unwrap();
}

/// Replies 30, garbage and 90 for the three temperatures.
struct OneMalformed;

impl ChatTransport for OneMalformed {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let text = &request.messages[0].content;
        let n = text.matches("```solidity").count();
        let v = match request.temperature {
            t if t < 0.925 => "30",
            t if t < 0.975 => return Ok("I cannot rank these.".into()),
            _ => "90",
        };
        Ok(vec![v; n].join(","))
    }
}

#[test]
fn malformed_reply_is_left_out_of_the_mean() {
    let unit = registry();
    let summary = summarize(&unit);
    let r = fetch_metrics(&unit, &summary, &config(), &[], &OneMalformed, prov());
    assert!(r.bundle.complexity.values().all(|&v| v == 60.0));
    assert!(r.bundle.vuln.values().all(|&v| v == 60.0));
    // The 30 and 90 replies hold no sequences either, so all three sequence
    // requests fail along with one complexity and one vuln request.
    assert_eq!(r.failed_requests, 5);
    assert!(r.bundle.sequences.is_empty());
    let direct: Vec<Result<Vec<f64>, ()>> = vec![Ok(vec![30.0]), Err(()), Ok(vec![90.0])];
    assert_eq!(aggregate(&direct, 1).unwrap(), vec![60.0]);
}

#[test]
fn bundle_file_round_trip() {
    let unit = bench_unit("vault.msol");
    let path = common::bench_path("vault.metrics.json");
    let b = MetricsBundle::load(&path, &unit).unwrap();
    assert_eq!(b.complexity.len(), 12);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    b.save(&out).unwrap();
    assert_eq!(MetricsBundle::load(&out, &unit).unwrap(), b);
    assert_eq!(serde_json::from_str::<MetricsBundle>(&b.to_json()).unwrap(), b);
}

#[test]
fn bundle_validation() {
    let unit = registry();
    let mut b = MetricsBundle::default();
    b.complexity.insert("register(uint)".into(), 101.0);
    assert!(b.validate(&unit).is_err());
    b.complexity.insert("register(uint)".into(), 50.0);
    b.validate(&unit).unwrap();
    b.vuln.insert("nosuch()".into(), 5.0);
    assert!(b.validate(&unit).is_err());
    b.vuln.clear();
    b.sequences.push(SequenceScore {
        calls: vec!["register(uint)".into()],
        score: 10.0,
    });
    assert!(b.validate(&unit).is_err());
}

fn read_request(stream: &mut std::net::TcpStream) -> (String, String) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut head = String::new();
    let mut len = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        head.push_str(&line);
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    (head, String::from_utf8(body).unwrap())
}

fn respond(stream: &mut std::net::TcpStream, status: &str, body: &str) {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
}

#[test]
fn http_transport_against_local_server() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let server = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (i, stream) in listener.incoming().take(3).enumerate() {
            let mut stream = stream.unwrap();
            let (head, body) = read_request(&mut stream);
            seen.push((head, body));
            match i {
                0 => respond(&mut stream, "200 OK", r#"{"choices":[{"message":{"role":"assistant","content":"10,20"}}]}"#),
                1 => respond(&mut stream, "500 Internal Server Error", "{}"),
                _ => respond(&mut stream, "200 OK", r#"{"choices":[]}"#),
            }
        }
        seen
    });
    let t = HttpTransport::new(&url, "secret", Duration::from_secs(5));
    let req = ChatRequest::user("m", "hello", 0.95);
    assert_eq!(t.complete(&req).unwrap(), "10,20");
    assert!(matches!(t.complete(&req), Err(TransportError::Http(_))));
    assert!(matches!(t.complete(&req), Err(TransportError::Shape)));
    let seen = server.join().unwrap();
    let (head, body) = &seen[0];
    assert!(head.starts_with("POST /v1/chat/completions "));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer secret"));
    let sent: ChatRequest = serde_json::from_str(body).unwrap();
    assert_eq!(sent, req);
}

proptest! {
    #[test]
    fn render_then_parse_round_trips(v in prop::collection::vec(0u32..=10_000, 1..20)) {
        let scores: Vec<f64> = v.iter().map(|&x| x as f64 / 100.0).collect();
        let text = format!("Here you go: {}", render_scores(&scores));
        prop_assert_eq!(parse_scores(&text, scores.len()).unwrap().scores, scores);
    }

    #[test]
    fn parsed_scores_are_in_range(text in "[-0-9., a-z<>\n]{0,80}", n in 1usize..5) {
        if let Ok(p) = parse_scores(&text, n) {
            prop_assert_eq!(p.scores.len(), n);
            prop_assert!(p.scores.iter().all(|s| (0.0..=100.0).contains(s)));
        }
    }
}
