use std::collections::{BTreeSet, HashSet};

use super::{base_energy, combine, EnergyParams, KValues, RunningMedian};
use crate::frontend::FuncId;
use crate::vm::{BlockRef, EdgeId, ExecResult, TestCase};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub case: TestCase,
    pub blocks: BTreeSet<BlockRef>,
    pub functions: Vec<FuncId>,
    pub edges: Vec<EdgeId>,
    pub k: KValues,
    /// e'(t) and e_cvs(t) as of the last selection.
    pub base_energy: f64,
    pub energy: u64,
    pub seq_no: usize,
}

/// Retained test cases plus the statistics energies are computed from.
#[derive(Debug, Clone)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
    seen: HashSet<TestCase>,
    /// Per edge: number of executions that covered it.
    edge_execs: Vec<u64>,
    covered: usize,
    total_execs: u64,
    normalizers: [RunningMedian; 4],
    cursor: usize,
}

impl Corpus {
    pub fn new(num_edges: usize, params: &EnergyParams) -> Corpus {
        let w = params.normalizer_window;
        Corpus {
            entries: Vec::new(),
            seen: HashSet::new(),
            edge_execs: vec![0; num_edges],
            covered: 0,
            total_execs: 0,
            normalizers: std::array::from_fn(|_| RunningMedian::new(w)),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &CorpusEntry {
        &self.entries[i]
    }

    pub fn contains(&self, t: &TestCase) -> bool {
        self.seen.contains(t)
    }

    /// Feeds one execution into the rarity statistics and normalizers.
    pub fn record_execution(&mut self, r: &ExecResult, k: &KValues) {
        for &(e, _) in &r.edges {
            if self.edge_execs[e] == 0 {
                self.covered += 1;
            }
            self.edge_execs[e] += 1;
            self.total_execs += 1;
        }
        for (n, &v) in self.normalizers.iter_mut().zip(k) {
            n.push(v);
        }
    }

    /// Adds `t` unless an identical call sequence is already present.
    pub fn admit(&mut self, t: TestCase, r: &ExecResult, k: KValues) -> bool {
        if self.seen.contains(&t) {
            return false;
        }
        self.seen.insert(t.clone());
        let seq_no = self.entries.len();
        self.entries.push(CorpusEntry {
            case: t,
            blocks: r.blocks.clone(),
            functions: r.functions.clone(),
            edges: r.edges.iter().map(|&(e, _)| e).collect(),
            k,
            base_energy: 0.0,
            energy: 0,
            seq_no,
        });
        true
    }

    pub fn normalizers(&self) -> KValues {
        std::array::from_fn(|i| self.normalizers[i].median())
    }

    /// Mean executions per covered edge.
    pub fn mean_edge_execs(&self) -> f64 {
        if self.covered == 0 {
            0.0
        } else {
            self.total_execs as f64 / self.covered as f64
        }
    }

    /// (e', e_cvs) for entry `i` under the current statistics.
    pub fn energy_of(&self, i: usize, params: &EnergyParams) -> (f64, u64) {
        let e = &self.entries[i];
        let min = e
            .edges
            .iter()
            .map(|&x| self.edge_execs[x])
            .min()
            .unwrap_or(0);
        let mean = self.mean_edge_execs();
        let e_prime = if min == 0 || mean == 0.0 {
            params.base
        } else {
            base_energy(mean, min as f64, params)
        };
        (e_prime, combine(e_prime, &e.k, &self.normalizers(), params))
    }

    /// Next entry in insertion order (wrapping) with its energy refreshed.
    pub fn select(&mut self, params: &EnergyParams) -> Option<usize> {
        if self.entries.is_empty() {
            return None;
        }
        let i = self.cursor % self.entries.len();
        self.cursor = i + 1;
        let (e_prime, e) = self.energy_of(i, params);
        self.entries[i].base_energy = e_prime;
        self.entries[i].energy = e;
        Some(i)
    }
}
