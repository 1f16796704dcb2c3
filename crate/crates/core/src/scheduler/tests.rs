use proptest::prelude::*;

use super::*;
use crate::frontend::parse;
use crate::vm::{ExecResult, TestCase};

fn six_block() -> Program {
    Program::new(
        parse(
            "contract S {\n uint y;\n function f(uint x) public {\n  if (x > 1) { y = 1; } else { y = 2; }\n  require(y == 1);\n }\n function g() public { }\n}",
        )
        .unwrap(),
    )
}

fn br(f: usize, b: usize) -> BlockRef {
    BlockRef {
        func: FuncId(f),
        block: b,
    }
}

#[test]
fn scale_defaults() {
    let p = EnergyParams::default();
    assert_eq!((p.a, p.b, p.cap, p.base), (1.15, 1200.0, 32.0, 32.0));
    assert_eq!(scale_score(0.0, &p), 1201.0);
    assert!(scale_score(100.0, &p) > 1.17e6);
}

#[test]
fn k_complexity_on_six_blocks() {
    let p = six_block();
    assert_eq!(p.cfgs[0].blocks.len(), 6);
    let scores = BlockScores(vec![vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0], vec![0.0]]);
    // entry, then, join: only `then` has a neighbour (`else`, scored 30).
    let t: BTreeSet<_> = [br(0, 0), br(0, 1), br(0, 3)].into();
    assert_eq!(k_complexity(&p, &t, &scores), 10.0);
    // abort and pass are neighbours of each other.
    let t: BTreeSet<_> = [br(0, 4), br(0, 5)].into();
    assert_eq!(k_complexity(&p, &t, &scores), (60.0 + 50.0) / 2.0);
    let zero = BlockScores(vec![vec![0.0; 6], vec![0.0]]);
    assert_eq!(k_complexity(&p, &t, &zero), 0.0);
    let single: BTreeSet<_> = [br(1, 0)].into();
    assert_eq!(k_complexity(&p, &single, &scores), 0.0);
}

#[test]
fn k_vuln_counts_occurrences() {
    let scores = BlockScores(vec![vec![7.0; 6], vec![3.0]]);
    assert_eq!(k_vuln(&[FuncId(1)], &scores), 3.0);
    assert_eq!(k_vuln(&[FuncId(0), FuncId(1), FuncId(0)], &scores), 87.0);
    assert_eq!(k_vuln(&[FuncId(0)], &BlockScores(vec![vec![0.0; 6], vec![0.0]])), 0.0);
}

#[test]
fn k_seq_examples() {
    let (f, x, g, h) = (FuncId(0), FuncId(1), FuncId(2), FuncId(3));
    let s = |calls: Vec<FuncId>, score| Suggestion { calls, score };
    assert_eq!(k_seq(&[f, g], &[]), 0.0);
    assert_eq!(k_seq(&[f, g], &[s(vec![f, g], 80.0)]), 80.0);
    let sugg = [s(vec![f, g], 80.0), s(vec![g, h], 50.0), s(vec![h, f], 30.0)];
    assert_eq!(k_seq(&[f, x, g, h], &sugg), 130.0);
    // Each suggestion counts once even when it matches several ways.
    assert_eq!(k_seq(&[f, g, f, g], &sugg[..1]), 80.0);
}

#[test]
fn base_energy_examples() {
    let p = EnergyParams::default();
    assert_eq!(base_energy(5.0, 5.0, &p), 32.0);
    assert_eq!(base_energy(100.0, 1.0, &p), 512.0);
    assert_eq!(base_energy(1.0, 4.0, &p), 32.0);
    assert_eq!(base_energy(12.0, 4.0, &p), 96.0);
}

#[test]
fn combine_examples() {
    let p = EnergyParams::default();
    let z = [5.0, 7.0, 2.0, 3.0];
    assert_eq!(combine(32.0, &[0.0; 4], &z, &p), 32);
    assert_eq!(combine(32.0, &[31.0 * 5.0, 0.0, 0.0, 0.0], &z, &p), 1024);
    assert_eq!(combine(32.0, &[0.0, 0.0, 100.0, 0.0], &z, &p), 1024);
    assert_eq!(combine(32.0, &[10.0, 7.0, 0.0, 0.0], &z, &p), 128);
    let off = EnergyParams {
        producers: vec![],
        ..p
    };
    assert_eq!(combine(32.0, &[1e9; 4], &z, &off), 32);
}

#[test]
fn running_median() {
    let mut m = RunningMedian::new(3);
    assert_eq!(m.median(), 1.0);
    m.push(0.0);
    assert_eq!(m.median(), 1.0);
    m.push(4.0);
    assert_eq!(m.median(), 4.0);
    m.push(2.0);
    assert_eq!(m.median(), 3.0);
    m.push(10.0);
    m.push(12.0);
    // Window holds 2, 10, 12.
    assert_eq!(m.median(), 10.0);
}

#[test]
fn zero_bundle_is_inert() {
    let p = six_block();
    let mut b = MetricsBundle::default();
    b.complexity.insert("f(uint)".into(), 0.0);
    b.vuln.insert("g()".into(), 0.0);
    let g = Guidance::new(&p, &b, &EnergyParams::default());
    assert!(g.is_empty());
    let all: BTreeSet<_> = p.blocks_of(FuncId(0)).collect();
    assert_eq!(g.k_values(&p, &all, &[FuncId(0)]), [0.0; 4]);
}

#[test]
fn disabled_producers_are_ignored() {
    let p = six_block();
    let mut b = MetricsBundle::default();
    b.complexity.insert("f(uint)".into(), 50.0);
    let params = EnergyParams {
        producers: vec![Producer::Vuln],
        ..EnergyParams::default()
    };
    assert!(Guidance::new(&p, &b, &params).is_empty());
    assert!(!Guidance::new(&p, &b, &EnergyParams::default()).is_empty());
}

fn exec(edges: Vec<(usize, u32)>, functions: Vec<FuncId>) -> ExecResult {
    ExecResult {
        edges,
        blocks: BTreeSet::new(),
        functions,
        events: vec![],
        reverted: vec![],
        steps: 0,
    }
}

fn case(f: usize) -> TestCase {
    TestCase::new(vec![crate::vm::Call {
        func: FuncId(f),
        args: vec![],
        sender: 0,
        value: 0,
    }])
}

#[test]
fn select_round_robin_and_budget_ratio() {
    let params = EnergyParams::default();
    let mut c = Corpus::new(4, &params);
    assert_eq!(c.select(&params), None);
    let r0 = exec(vec![(0, 1)], vec![FuncId(0)]);
    c.admit(case(0), &r0, [0.0; 4]);
    assert_eq!(c.select(&params), Some(0));
    assert_eq!(c.select(&params), Some(0));
    let r1 = exec(vec![(1, 1)], vec![FuncId(1)]);
    assert!(c.admit(case(1), &r1, [0.0; 4]));
    assert!(!c.admit(case(1), &r1, [0.0; 4]));
    let picks: Vec<_> = (0..4).map(|_| c.select(&params).unwrap()).collect();
    assert_eq!(picks, vec![1, 0, 1, 0]);

    // Entry 1 is rare enough for 10x base energy: edge 0 ran 19 times, edge 1 once.
    let mut c = Corpus::new(4, &params);
    c.admit(case(0), &r0, [0.0; 4]);
    c.admit(case(1), &r1, [0.0; 4]);
    for _ in 0..19 {
        c.record_execution(&r0, &[0.0; 4]);
    }
    c.record_execution(&r1, &[0.0; 4]);
    // mean = 20 / 2 = 10; e'(0) = 32 · clamp(10/19) = 32, e'(1) = 32 · 10 = 320.
    let mut budget = [0u64; 2];
    for _ in 0..20 {
        let i = c.select(&params).unwrap();
        budget[i] += c.entry(i).energy;
    }
    assert_eq!(budget, [320, 3200]);
}

fn params_strategy() -> impl Strategy<Value = EnergyParams> {
    (1.01f64..2.0, 0.0f64..5000.0, 1u32..64, 1u32..128).prop_map(|(a, b, cap, base)| EnergyParams {
        a,
        b,
        cap: cap as f64,
        base: base as f64,
        ..EnergyParams::default()
    })
}

proptest! {
    #[test]
    fn combine_respects_cap(
        p in params_strategy(),
        e in 1u32..2000,
        k in proptest::array::uniform4(0.0f64..1e7),
        z in proptest::array::uniform4(1e-3f64..1e7),
    ) {
        let e = e as f64;
        let out = combine(e, &k, &z, &p) as f64;
        prop_assert!(e <= out && out <= p.cap * e);
    }

    #[test]
    fn combine_is_monotone_in_k(
        e in 1u32..500,
        k in proptest::array::uniform4(0.0f64..1e5),
        bump in 0.0f64..1e5,
        which in 0usize..4,
        z in proptest::array::uniform4(1.0f64..1e5),
    ) {
        let p = EnergyParams::default();
        let mut k2 = k;
        k2[which] += bump;
        prop_assert!(combine(e as f64, &k2, &z, &p) >= combine(e as f64, &k, &z, &p));
    }

    #[test]
    fn raising_a_block_score_never_lowers_k(
        raw in proptest::collection::vec(0.0f64..100.0, 6),
        idx in 0usize..6,
        bump in 0.0f64..50.0,
        covered in proptest::collection::btree_set(0usize..6, 1..6),
    ) {
        let p = six_block();
        let params = EnergyParams::default();
        let mut raised = raw.clone();
        raised[idx] = (raised[idx] + bump).min(100.0);
        let lo = BlockScores::scaled(&[raw, vec![0.0]], &params);
        let hi = BlockScores::scaled(&[raised, vec![0.0]], &params);
        let blocks: BTreeSet<_> = covered.into_iter().map(|b| br(0, b)).collect();
        prop_assert!(k_complexity(&p, &blocks, &hi) >= k_complexity(&p, &blocks, &lo));
        prop_assert!(k_vuln(&[FuncId(0)], &hi) >= k_vuln(&[FuncId(0)], &lo));
    }
}
