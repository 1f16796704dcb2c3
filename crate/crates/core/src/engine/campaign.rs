use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::CampaignSetup;
use super::mutate::Mutator;
use crate::frontend::FuncId;
use crate::producers::{MetricsBundle, Producer};
use crate::scheduler::{Corpus, EnergyParams, Guidance};
use crate::vm::{BlockRef, CoverageMap, ExecResult, OracleKind, Program, TestCase, Value, Vm};

/// Deterministic stand-in for elapsed time: a fixed cost per top-level call
/// plus one unit per interpreter step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VirtualClock {
    micros: u64,
}

impl VirtualClock {
    pub const MICROS_PER_CALL: u64 = 100;
    pub const MICROS_PER_STEP: u64 = 1;

    pub fn charge(&mut self, calls: usize, steps: u64) {
        self.micros += calls as u64 * Self::MICROS_PER_CALL + steps * Self::MICROS_PER_STEP;
    }

    pub fn micros(&self) -> u64 {
        self.micros
    }

    pub fn millis(&self) -> u64 {
        self.micros / 1000
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCall {
    pub function: String,
    pub args: Vec<Value>,
    pub sender: String,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub kind: OracleKind,
    pub location: String,
    pub elapsed_ms: u64,
    /// Executions performed up to and including the triggering one.
    pub executions: u64,
    pub call_index: usize,
    pub test_case: Vec<ReportCall>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSample {
    pub elapsed_ms: u64,
    pub executions: u64,
    pub instructions: usize,
    pub blocks: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageTotals {
    pub instructions: usize,
    pub instructions_total: usize,
    pub blocks: usize,
    pub blocks_total: usize,
    pub edges: usize,
    pub edges_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub producers: Vec<Producer>,
    pub energy: EnergyParams,
    /// Producers that had nonzero metrics to act on.
    pub active_producers: Vec<Producer>,
    pub executions: u64,
    pub elapsed_ms: u64,
    pub corpus_size: usize,
    pub stopped_on_bug: bool,
    /// The soft wall-clock cap ended the run; results are not reproducible.
    pub wall_limit_hit: bool,
    pub coverage: CoverageTotals,
    pub series: Vec<CoverageSample>,
    pub detections: Vec<Detection>,
}

impl CampaignReport {
    /// Virtual milliseconds to the first bug, assert or invariant violation.
    pub fn time_to_bug_ms(&self) -> Option<u64> {
        self.detections
            .iter()
            .filter(|d| d.kind != OracleKind::Timeout)
            .map(|d| d.elapsed_ms)
            .min()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `elapsed_ms,executions,blocks,edges` rows.
    pub fn coverage_csv(&self) -> String {
        let mut out = String::from("elapsed_ms,executions,blocks,edges\n");
        for s in &self.series {
            out.push_str(&format!("{},{},{},{}\n", s.elapsed_ms, s.executions, s.blocks, s.edges));
        }
        out
    }
}

pub fn report_case(program: &Program, t: &TestCase) -> Vec<ReportCall> {
    t.calls
        .iter()
        .map(|c| ReportCall {
            function: format!("{}.{}", program.contract_name(c.func), program.signature(c.func)),
            args: c.args.clone(),
            sender: format!("@{}", c.sender),
            value: c.value,
        })
        .collect()
}

/// Callable functions: public ones minus invariant checkers.
pub fn fuzz_pool(setup: &CampaignSetup) -> Vec<FuncId> {
    let checkers: BTreeSet<FuncId> = setup.invariants.iter().map(|i| i.func).collect();
    setup
        .program
        .public_functions()
        .iter()
        .copied()
        .filter(|f| !checkers.contains(f))
        .collect()
}

/// Seeds: one single-call case per callable function with default arguments.
pub fn seed_corpus(setup: &CampaignSetup) -> Result<Vec<TestCase>, String> {
    let pool = fuzz_pool(setup);
    if pool.is_empty() {
        return Err("no public functions to fuzz".into());
    }
    Ok(Mutator::new(&setup.program, pool, vec![]).seeds())
}

struct State<'a> {
    program: &'a Program,
    params: &'a EnergyParams,
    guidance: Guidance,
    vm: Vm<'a>,
    coverage: CoverageMap,
    blocks: BTreeSet<BlockRef>,
    instructions: usize,
    corpus: Corpus,
    clock: VirtualClock,
    executions: u64,
    series: Vec<CoverageSample>,
    detections: Vec<Detection>,
    seen_oracles: BTreeSet<OracleKind>,
}

impl State<'_> {
    fn sample(&mut self) {
        let s = CoverageSample {
            elapsed_ms: self.clock.millis(),
            executions: self.executions,
            instructions: self.instructions,
            blocks: self.blocks.len(),
            edges: self.coverage.edges_covered(),
        };
        match self.series.last_mut() {
            Some(last) if last.elapsed_ms == s.elapsed_ms => *last = s,
            _ => self.series.push(s),
        }
    }

    /// Executes one case; returns whether a new (non-timeout) oracle fired.
    fn run(&mut self, setup: &CampaignSetup, t: TestCase, force_admit: bool) -> bool {
        debug_assert!(!t.is_empty() && t.len() <= crate::vm::MAX_CALLS);
        let r: ExecResult = self
            .vm
            .execute(&setup.genesis, &t)
            .expect("mutator only builds well-typed cases");
        self.executions += 1;
        self.clock.charge(t.len(), r.steps);
        let k = self.guidance.k_values(self.program, &r.blocks, &r.functions);
        self.corpus.record_execution(&r, &k);

        let mut bug = false;
        for e in &r.events {
            if self.seen_oracles.insert(e.kind.clone()) {
                bug |= e.kind != OracleKind::Timeout;
                self.detections.push(Detection {
                    kind: e.kind.clone(),
                    location: e.location.clone(),
                    elapsed_ms: self.clock.millis(),
                    executions: self.executions,
                    call_index: e.call_index,
                    test_case: report_case(self.program, &t),
                });
            }
        }

        let novel = self.coverage.observe(&r.edges);
        if novel {
            let new_blocks: Vec<BlockRef> = r.blocks.difference(&self.blocks).copied().collect();
            if !new_blocks.is_empty() {
                self.instructions += self.program.statements_in(&new_blocks.iter().copied().collect());
                self.blocks.extend(new_blocks);
            }
        }
        if novel || force_admit {
            if log::log_enabled!(log::Level::Debug) {
                let names: Vec<String> = t
                    .calls
                    .iter()
                    .zip(&r.reverted)
                    .map(|(c, &rv)| format!("{}{}@{}", if rv { "!" } else { "" }, self.program.unit.function(c.func).1.name, c.sender))
                    .collect();
                log::debug!("admit #{} at {} ms: [{}] k={:?}", self.corpus.len(), self.clock.millis(), names.join(" "), k);
            }
            self.corpus.admit(t, &r, k);
        }
        if novel {
            self.sample();
        }
        bug
    }
}

/// Runs the select / mutate / execute / admit loop until a budget runs out
/// (or the first bug when `stop_on_first_bug` is set).
pub fn run_campaign(setup: &CampaignSetup, bundle: &MetricsBundle) -> CampaignReport {
    let cfg = &setup.config;
    let params = &cfg.energy;
    let program = &setup.program;
    let guidance = Guidance::new(program, bundle, params);
    let pool = fuzz_pool(setup);
    assert!(!pool.is_empty(), "setup guarantees a public function");
    let mutator = Mutator::new(program, pool, guidance.suggestions.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut active_producers = Vec::new();
    if guidance.complexity.is_some() {
        active_producers.push(Producer::Complexity);
    }
    if guidance.vuln.is_some() {
        active_producers.push(Producer::Vuln);
    }
    if !guidance.suggestions.is_empty() {
        active_producers.push(Producer::Seq);
    }
    if !guidance.invariants.is_empty() {
        active_producers.push(Producer::Invariant);
    }

    let mut st = State {
        program,
        params,
        guidance,
        vm: Vm::new(program).with_invariants(setup.invariants.clone()),
        coverage: CoverageMap::new(program.num_edges()),
        blocks: BTreeSet::new(),
        instructions: 0,
        corpus: Corpus::new(program.num_edges(), params),
        clock: VirtualClock::default(),
        executions: 0,
        series: Vec::new(),
        detections: Vec::new(),
        seen_oracles: BTreeSet::new(),
    };

    let max_execs = cfg.max_execs.unwrap_or(u64::MAX);
    let budget_us = cfg
        .time_budget_secs
        .map(|s| (s * 1e6) as u64)
        .unwrap_or(u64::MAX);
    let wall = cfg.wall_limit_secs.map(std::time::Duration::from_secs_f64);
    let started = Instant::now();
    let mut wall_limit_hit = false;
    let mut stopped_on_bug = false;

    st.sample();
    for seed in mutator.seeds() {
        if st.run(setup, seed, true) && cfg.stop_on_first_bug {
            stopped_on_bug = true;
        }
    }

    let mut within = |st: &State| -> bool {
        if st.executions >= max_execs || st.clock.micros() >= budget_us {
            return false;
        }
        if let Some(w) = wall {
            if st.executions.is_multiple_of(256) && started.elapsed() >= w {
                wall_limit_hit = true;
                return false;
            }
        }
        true
    };

    'outer: while !stopped_on_bug && within(&st) {
        let Some(i) = st.corpus.select(st.params) else {
            break;
        };
        let energy = st.corpus.entry(i).energy;
        log::trace!("select #{i} at {} ms e'={} energy={energy}", st.clock.millis(), st.corpus.entry(i).base_energy);
        let parent = st.corpus.entry(i).case.clone();
        for _ in 0..energy {
            if !within(&st) {
                break 'outer;
            }
            let child = mutator.mutate(&parent, &mut rng);
            if st.run(setup, child, false) && cfg.stop_on_first_bug {
                stopped_on_bug = true;
                break 'outer;
            }
        }
    }
    st.sample();

    CampaignReport {
        seed: cfg.seed,
        producers: params.producers.clone(),
        energy: params.clone(),
        active_producers,
        executions: st.executions,
        elapsed_ms: st.clock.millis(),
        corpus_size: st.corpus.len(),
        stopped_on_bug,
        wall_limit_hit,
        coverage: CoverageTotals {
            instructions: st.instructions,
            instructions_total: program
                .cfgs
                .iter()
                .map(|c| c.blocks.iter().map(|b| b.stmts.len()).sum::<usize>())
                .sum(),
            blocks: st.blocks.len(),
            blocks_total: program.num_blocks(),
            edges: st.coverage.edges_covered(),
            edges_total: program.num_edges(),
        },
        series: st.series,
        detections: st.detections,
    }
}

/// Counts of report detections by kind name, for summaries.
pub fn detection_counts(report: &CampaignReport) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for d in &report.detections {
        let k = match d.kind {
            OracleKind::AssertViolation { .. } => "assert_violation",
            OracleKind::BugHit { .. } => "bug_hit",
            OracleKind::InvariantViolation { .. } => "invariant_violation",
            OracleKind::Timeout => "timeout",
        };
        *m.entry(k).or_insert(0) += 1;
    }
    m
}
