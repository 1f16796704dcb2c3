//! Power scheduling from producer metrics: per-test-case K values, base
//! energy from edge rarity, the capped combination, and round-robin selection.

mod corpus;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

pub use corpus::{Corpus, CorpusEntry};

use crate::frontend::FuncId;
use crate::producers::{blockify, MetricsBundle, Producer};
use crate::vm::{BlockRef, Program};

/// One K value per producer, indexed by [`slot`].
pub type KValues = [f64; 4];

pub fn slot(p: Producer) -> usize {
    match p {
        Producer::Complexity => 0,
        Producer::Vuln => 1,
        Producer::Seq => 2,
        Producer::Invariant => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub a: f64,
    pub b: f64,
    pub cap: f64,
    /// E0, mutations per visit before any scaling.
    pub base: f64,
    pub rarity_min: f64,
    pub rarity_max: f64,
    pub normalizer_window: usize,
    pub producers: Vec<Producer>,
}

impl Default for EnergyParams {
    fn default() -> EnergyParams {
        EnergyParams {
            a: 1.15,
            b: 1200.0,
            cap: 32.0,
            base: 32.0,
            rarity_min: 1.0,
            rarity_max: 16.0,
            normalizer_window: 1024,
            producers: Producer::ALL.to_vec(),
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a > 1.0) {
            return Err(format!("energy.a must be > 1, got {}", self.a));
        }
        if !(self.b >= 0.0) {
            return Err(format!("energy.b must be >= 0, got {}", self.b));
        }
        if !(self.cap >= 1.0) {
            return Err(format!("energy.cap must be >= 1, got {}", self.cap));
        }
        if !(self.base >= 1.0) || self.base.fract() != 0.0 {
            return Err(format!("energy.base must be a whole number >= 1, got {}", self.base));
        }
        if !(self.rarity_min >= 1.0 && self.rarity_min <= self.rarity_max) {
            return Err(format!(
                "energy.rarity_min/rarity_max must satisfy 1 <= min <= max, got [{}, {}]",
                self.rarity_min, self.rarity_max
            ));
        }
        if self.normalizer_window == 0 {
            return Err("energy.normalizer_window must be positive".into());
        }
        Ok(())
    }

    pub fn enabled(&self, p: Producer) -> bool {
        self.producers.contains(&p)
    }
}

/// `A^c + B`.
pub fn scale_score(c: f64, p: &EnergyParams) -> f64 {
    p.a.powf(c) + p.b
}

/// Scaled per-block scores, `[func][block]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScores(pub Vec<Vec<f64>>);

impl BlockScores {
    pub fn scaled(raw: &[Vec<f64>], p: &EnergyParams) -> BlockScores {
        BlockScores(
            raw.iter()
                .map(|f| f.iter().map(|&c| scale_score(c, p)).collect())
                .collect(),
        )
    }

    pub fn get(&self, b: BlockRef) -> f64 {
        self.0[b.func.0][b.block]
    }
}

/// Σ_{b ∈ BB(t)} Σ_{n ∈ neighbor(b)} C(n) / |BB(t)|.
pub fn k_complexity(program: &Program, blocks: &BTreeSet<BlockRef>, scores: &BlockScores) -> f64 {
    if blocks.is_empty() {
        return 0.0;
    }
    let total: f64 = blocks
        .iter()
        .map(|&b| {
            program
                .neighbors(b)
                .iter()
                .map(|&n| scores.0[b.func.0][n])
                .sum::<f64>()
        })
        .sum();
    total / blocks.len() as f64
}

/// Same shape as [`k_complexity`] with invariant-dependency scores.
pub fn k_invariant(program: &Program, blocks: &BTreeSet<BlockRef>, scores: &BlockScores) -> f64 {
    k_complexity(program, blocks, scores)
}

/// Σ over top-level calls (repeats included) of Σ_{b ∈ blocks(f)} V(b).
pub fn k_vuln(functions: &[FuncId], scores: &BlockScores) -> f64 {
    functions.iter().map(|f| scores.0[f.0].iter().sum::<f64>()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub calls: Vec<FuncId>,
    pub score: f64,
}

/// Whether `needle` occurs in order (not necessarily contiguously) in `hay`.
pub fn is_subsequence(needle: &[FuncId], hay: &[FuncId]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Σ S(s) over suggestions that are subsequences of the call sequence, each
/// counted once.
pub fn k_seq(seq: &[FuncId], suggestions: &[Suggestion]) -> f64 {
    suggestions
        .iter()
        .filter(|s| is_subsequence(&s.calls, seq))
        .fold(0.0, |acc, s| acc + s.score)
}

/// `round(E0 · clamp(mean / min, rarity bounds))`.
pub fn base_energy(mean_hits: f64, min_hits: f64, p: &EnergyParams) -> f64 {
    let ratio = if min_hits > 0.0 { mean_hits / min_hits } else { p.rarity_max };
    (p.base * ratio.clamp(p.rarity_min, p.rarity_max)).round()
}

/// `min(e' + Σ_i e'·K_i/Z_i, cap·e')` over enabled producers, rounded, at
/// least 1.
pub fn combine(e_prime: f64, k: &KValues, z: &KValues, p: &EnergyParams) -> u64 {
    let boost: f64 = Producer::ALL
        .into_iter()
        .filter(|&pr| p.enabled(pr))
        .map(|pr| {
            let i = slot(pr);
            if z[i] > 0.0 {
                e_prime * k[i] / z[i]
            } else {
                0.0
            }
        })
        .sum();
    let e = (e_prime + boost).min(p.cap * e_prime);
    (e.round() as u64).max(1)
}

/// Median of the last `window` nonzero values pushed; 1 before any.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMedian {
    window: usize,
    recent: VecDeque<f64>,
}

impl RunningMedian {
    pub fn new(window: usize) -> RunningMedian {
        RunningMedian {
            window: window.max(1),
            recent: VecDeque::new(),
        }
    }

    pub fn push(&mut self, v: f64) {
        if v > 0.0 {
            if self.recent.len() == self.window {
                self.recent.pop_front();
            }
            self.recent.push_back(v);
        }
    }

    pub fn median(&self) -> f64 {
        if self.recent.is_empty() {
            return 1.0;
        }
        let mut v: Vec<f64> = self.recent.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }
}

/// Producer metrics resolved against a program. A producer that is disabled,
/// or whose bundle scores are all zero, contributes nothing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Guidance {
    pub complexity: Option<BlockScores>,
    pub vuln: Option<BlockScores>,
    pub invariants: Vec<BlockScores>,
    pub suggestions: Vec<Suggestion>,
}

fn active(scores: &BTreeMap<String, f64>) -> bool {
    scores.values().any(|&v| v != 0.0)
}

impl Guidance {
    pub fn new(program: &Program, bundle: &MetricsBundle, p: &EnergyParams) -> Guidance {
        let mut g = Guidance::default();
        if p.enabled(Producer::Complexity) && active(&bundle.complexity) {
            g.complexity = Some(BlockScores::scaled(&blockify(&bundle.complexity, program), p));
        }
        if p.enabled(Producer::Vuln) && active(&bundle.vuln) {
            g.vuln = Some(BlockScores::scaled(&blockify(&bundle.vuln, program), p));
        }
        if p.enabled(Producer::Invariant) {
            g.invariants = bundle
                .invariants
                .values()
                .filter(|m| active(m))
                .map(|m| BlockScores::scaled(&blockify(m, program), p))
                .collect();
        }
        if p.enabled(Producer::Seq) {
            g.suggestions = bundle
                .sequences
                .iter()
                .filter(|s| s.score > 0.0)
                .filter_map(|s| {
                    let calls: Option<Vec<FuncId>> =
                        s.calls.iter().map(|c| program.lookup_signature(c)).collect();
                    calls.map(|calls| Suggestion {
                        calls,
                        score: s.score,
                    })
                })
                .collect();
        }
        g
    }

    pub fn is_empty(&self) -> bool {
        self.complexity.is_none()
            && self.vuln.is_none()
            && self.invariants.is_empty()
            && self.suggestions.is_empty()
    }

    pub fn k_values(&self, program: &Program, blocks: &BTreeSet<BlockRef>, functions: &[FuncId]) -> KValues {
        let mut k = [0.0; 4];
        if let Some(c) = &self.complexity {
            k[slot(Producer::Complexity)] = k_complexity(program, blocks, c);
        }
        if let Some(v) = &self.vuln {
            k[slot(Producer::Vuln)] = k_vuln(functions, v);
        }
        k[slot(Producer::Seq)] = k_seq(functions, &self.suggestions);
        k[slot(Producer::Invariant)] = self
            .invariants
            .iter()
            .fold(0.0, |acc, s| acc + k_invariant(program, blocks, s));
        k
    }
}

#[cfg(test)]
mod tests;
