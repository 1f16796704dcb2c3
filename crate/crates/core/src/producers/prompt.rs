//! Prompt templates, snippet rendering and token-budget chunking.

use crate::frontend::{dependency_closure, FuncId, SourceUnit, StaticSummary};

use super::Producer;

pub const COMPLEXITY_INSTRUCTION: &str = "How complex are the following Solidity code snippets (i.e., how hard is it to gain high test coverage by trying random arguments)? Rank within the range of 0 to 100. Output in the form of <Complexity 1>,<Complexity 2>,<Complexity 3>...";

pub const SEQUENCE_INSTRUCTION: &str = "Suggest a series of interesting sequences given following the public Solidity functions and their code. Then, rank each interestingness of the sequence within the range of 0 to 100. Output one sequence in a line with the form of <Function Signature 1>=><Function Signature 2>:<Interestingness>.";

pub const VULN_INSTRUCTION: &str = "How likely are the following Solidity snippets to cause vulnerabilities (e.g., logical issue, reentrancy, etc.)? Rank each in terms of 100. Output in the form of <Likelihood 1>,<Likelihood 2>,<Likelihood 3>...";

/// `{{Invariant}}` is replaced by the invariant's text.
pub const INVARIANT_TEMPLATE: &str = "How likely is following Solidity code snippets to cause {{Invariant}} being violated? Rank each in terms of 100. Output in the form of <Likelihood 1>,<Likelihood 2>,<Likelihood 3>...";

pub const INVARIANT_PLACEHOLDER: &str = "{{Invariant}}";

/// Default prompt budget, leaving headroom under a 32K context.
pub const DEFAULT_BUDGET_TOKENS: usize = 28_000;

/// ceil(chars / 4).
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

pub fn invariant_instruction(invariant_text: &str) -> String {
    INVARIANT_TEMPLATE.replace(INVARIANT_PLACEHOLDER, invariant_text)
}

/// One scored unit of a prompt: the target function followed by the
/// functions it depends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snippet {
    pub target: FuncId,
    /// Closure members other than the target, nearest first.
    pub context: Vec<FuncId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub producer: Producer,
    pub instruction: String,
    /// Functions scored by the reply, in the order scores are expected.
    pub targets: Vec<FuncId>,
    pub text: String,
    pub tokens: usize,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("prompt needs {tokens} tokens, budget is {budget}")]
pub struct OverBudget {
    pub tokens: usize,
    pub budget: usize,
}

fn render_snippet(unit: &SourceUnit, index: usize, s: &Snippet) -> String {
    let mut out = format!(
        "Snippet {index}: {}\n```solidity\n{}\n",
        unit.display_signature(s.target),
        unit.function_source(s.target)
    );
    for &c in &s.context {
        out.push('\n');
        out.push_str(unit.function_source(c));
        out.push('\n');
    }
    out.push_str("```\n");
    out
}

fn render(unit: &SourceUnit, instruction: &str, batch: &[Snippet]) -> String {
    let mut text = format!("{instruction}\n\n");
    for (i, s) in batch.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&render_snippet(unit, i + 1, s));
    }
    text
}

/// Builds a scoring prompt for `batch` (complexity, vulnerability or
/// invariant dependency).
pub fn build_prompt(
    unit: &SourceUnit,
    producer: Producer,
    instruction: &str,
    batch: &[Snippet],
    budget: usize,
) -> Result<Prompt, OverBudget> {
    let text = render(unit, instruction, batch);
    let tokens = estimate_tokens(&text);
    if tokens > budget {
        return Err(OverBudget { tokens, budget });
    }
    Ok(Prompt {
        producer,
        instruction: instruction.to_string(),
        targets: batch.iter().map(|s| s.target).collect(),
        text,
        tokens,
    })
}

pub fn build_complexity_prompt(unit: &SourceUnit, batch: &[Snippet], budget: usize) -> Result<Prompt, OverBudget> {
    build_prompt(unit, Producer::Complexity, COMPLEXITY_INSTRUCTION, batch, budget)
}

pub fn build_vuln_prompt(unit: &SourceUnit, batch: &[Snippet], budget: usize) -> Result<Prompt, OverBudget> {
    build_prompt(unit, Producer::Vuln, VULN_INSTRUCTION, batch, budget)
}

pub fn build_invariant_prompt(
    unit: &SourceUnit,
    invariant_text: &str,
    batch: &[Snippet],
    budget: usize,
) -> Result<Prompt, OverBudget> {
    build_prompt(
        unit,
        Producer::Invariant,
        &invariant_instruction(invariant_text),
        batch,
        budget,
    )
}

/// Sequence prompt over every public function, each with its own source only.
pub fn build_seq_prompt(unit: &SourceUnit, budget: usize) -> Result<Prompt, OverBudget> {
    let public = scored_functions(unit);
    let mut text = format!("{SEQUENCE_INSTRUCTION}\n\n");
    for (i, &f) in public.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&format!(
            "Function {}: {}\n```solidity\n{}\n```\n",
            i + 1,
            unit.display_signature(f),
            unit.function_source(f)
        ));
    }
    let tokens = estimate_tokens(&text);
    if tokens > budget {
        return Err(OverBudget { tokens, budget });
    }
    Ok(Prompt {
        producer: Producer::Seq,
        instruction: SEQUENCE_INSTRUCTION.to_string(),
        targets: public,
        text,
        tokens,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chunking {
    pub batches: Vec<Vec<Snippet>>,
    /// Targets whose own source does not fit the budget; they fall back to 0.
    pub oversized: Vec<FuncId>,
}

/// Full snippet for `target`, trimmed by dropping the deepest closure members
/// (latest first among equals) until a prompt with just this snippet fits.
pub fn fitted_snippet(
    unit: &SourceUnit,
    summary: &StaticSummary,
    instruction: &str,
    target: FuncId,
    budget: usize,
) -> Option<Snippet> {
    let mut members: Vec<_> = dependency_closure(target, summary)
        .into_iter()
        .filter(|m| m.func != target)
        .collect();
    loop {
        let s = Snippet {
            target,
            context: members.iter().map(|m| m.func).collect(),
        };
        if estimate_tokens(&render(unit, instruction, std::slice::from_ref(&s))) <= budget {
            return Some(s);
        }
        if members.is_empty() {
            return None;
        }
        let deepest = members.iter().map(|m| m.depth).max().unwrap_or(0);
        let at = members.iter().rposition(|m| m.depth == deepest).unwrap_or(members.len() - 1);
        members.remove(at);
    }
}

/// First-fit packing of `targets` (kept in the given order inside each batch).
pub fn chunk(
    unit: &SourceUnit,
    summary: &StaticSummary,
    instruction: &str,
    targets: &[FuncId],
    budget: usize,
) -> Chunking {
    let mut out = Chunking::default();
    for &t in targets {
        let Some(s) = fitted_snippet(unit, summary, instruction, t, budget) else {
            log::warn!(
                "`{}` does not fit a {budget}-token prompt; scoring it 0",
                unit.display_signature(t)
            );
            out.oversized.push(t);
            continue;
        };
        let slot = out.batches.iter().position(|b| {
            let mut trial = b.clone();
            trial.push(s.clone());
            estimate_tokens(&render(unit, instruction, &trial)) <= budget
        });
        match slot {
            Some(i) => out.batches[i].push(s),
            None => out.batches.push(vec![s]),
        }
    }
    out
}

/// Public functions in declaration order: the functions scoring prompts rank.
pub fn scored_functions(unit: &SourceUnit) -> Vec<FuncId> {
    unit.functions()
        .filter(|(_, _, f)| f.is_public())
        .map(|(id, _, _)| id)
        .collect()
}
