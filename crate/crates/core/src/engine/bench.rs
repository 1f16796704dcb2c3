//! Paired-seed benchmarking of producer configurations.

use std::fmt::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use super::campaign::{run_campaign, CampaignReport};
use super::config::CampaignSetup;
use crate::producers::{MetricsBundle, Producer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Variant {
    pub name: String,
    pub producers: Vec<Producer>,
}

/// Baseline, the three single-producer ablations, and full guidance.
pub fn ablation_variants() -> Vec<Variant> {
    let v = |name: &str, producers: Vec<Producer>| Variant {
        name: name.to_string(),
        producers,
    };
    vec![
        v("Baseline", vec![]),
        v("L-C", vec![Producer::Complexity]),
        v("L-V", vec![Producer::Vuln]),
        v("L-S", vec![Producer::Seq]),
        v("full", Producer::ALL.to_vec()),
    ]
}

/// Runs `jobs` on up to `threads` workers; results keep job order.
pub fn parallel_map<T: Sync, R: Send>(jobs: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let out: Vec<Mutex<Option<R>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..threads.max(1).min(jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                *out[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    out.into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("job ran"))
        .collect()
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// One campaign with the given producers and seed; stops at the first bug.
pub fn run_one(setup: &CampaignSetup, bundle: &MetricsBundle, producers: &[Producer], seed: u64) -> CampaignReport {
    let mut s = setup.clone();
    s.config.seed = seed;
    s.config.stop_on_first_bug = true;
    s.config.energy.producers = producers.to_vec();
    run_campaign(&s, bundle)
}

/// Median with misses counted as the full budget.
pub fn censored_median(times: &[Option<u64>], budget_ms: u64) -> f64 {
    let mut v: Vec<u64> = times.iter().map(|t| t.unwrap_or(budget_ms)).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantResult {
    pub variant: String,
    /// Virtual ms per seed; `None` when the bug was not found in budget.
    pub times_ms: Vec<Option<u64>>,
    pub median_ms: f64,
    pub found: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub target: String,
    pub budget_ms: u64,
    pub results: Vec<VariantResult>,
}

impl BenchRow {
    pub fn median(&self, variant: &str) -> f64 {
        self.results
            .iter()
            .find(|r| r.variant == variant)
            .map_or(f64::NAN, |r| r.median_ms)
    }
}

pub struct BenchTarget<'a> {
    pub name: String,
    pub setup: &'a CampaignSetup,
    pub bundle: &'a MetricsBundle,
}

/// Runs every variant on every target for each seed, in parallel.
pub fn run_bench(targets: &[BenchTarget], variants: &[Variant], seeds: &[u64], threads: usize) -> Vec<BenchRow> {
    let mut jobs = Vec::new();
    for (ti, _) in targets.iter().enumerate() {
        for (vi, _) in variants.iter().enumerate() {
            for &seed in seeds {
                jobs.push((ti, vi, seed));
            }
        }
    }
    let times = parallel_map(&jobs, threads, |&(ti, vi, seed)| {
        let t = &targets[ti];
        run_one(t.setup, t.bundle, &variants[vi].producers, seed).time_to_bug_ms()
    });
    let mut it = times.into_iter();
    targets
        .iter()
        .map(|t| {
            let budget_ms = t
                .setup
                .config
                .time_budget_secs
                .map_or(u64::MAX, |s| (s * 1000.0) as u64);
            let results = variants
                .iter()
                .map(|v| {
                    let times_ms: Vec<Option<u64>> = it.by_ref().take(seeds.len()).collect();
                    VariantResult {
                        variant: v.name.clone(),
                        median_ms: censored_median(&times_ms, budget_ms),
                        found: times_ms.iter().filter(|t| t.is_some()).count(),
                        times_ms,
                    }
                })
                .collect();
            BenchRow {
                target: t.name.clone(),
                budget_ms,
                results,
            }
        })
        .collect()
}

fn secs(ms: f64) -> String {
    format!("{:.1}s", ms / 1000.0)
}

/// Plain-text table: median time-to-bug per variant, with the difference to
/// the first variant in parentheses.
pub fn render_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let names: Vec<&str> = first.results.iter().map(|r| r.variant.as_str()).collect();
    let mut header = vec!["target".to_string()];
    header.extend(names.iter().map(|n| n.to_string()));
    let mut lines = vec![header];
    for row in rows {
        let base = row.results[0].median_ms;
        let mut cells = vec![row.target.clone()];
        for (i, r) in row.results.iter().enumerate() {
            let mut c = secs(r.median_ms);
            if i > 0 {
                let d = r.median_ms - base;
                c.push_str(&format!(" ({}{})", if d <= 0.0 { "-" } else { "+" }, secs(d.abs())));
            }
            c.push_str(&format!(" [{}/{}]", r.found, r.times_ms.len()));
            cells.push(c);
        }
        lines.push(cells);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|i| lines.iter().map(|l| l[i].len()).max().unwrap_or(0))
        .collect();
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
