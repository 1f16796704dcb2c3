use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use guidefuzz::engine::bench::{ablation_variants, default_threads, render_table, run_bench, BenchTarget};
use guidefuzz::engine::{run_campaign, CampaignConfig, CampaignSetup};
use guidefuzz::frontend::{parse_files, summarize};
use guidefuzz::producers::{
    fetch_metrics, parse_producer_list, Cassette, ChatTransport, HttpTransport, MetricsBundle,
    Provenance, Recorder, Replay,
};
use serde::Serialize;

use crate::{exit, AblateArgs, FetchArgs, Overrides, RunArgs, StaticArgs};

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: exit::CONFIG,
        error: e.into(),
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Failure {
        Failure {
            code: exit::FAILURE,
            error,
        }
    }
}

fn finish(r: Result<u8, Failure>) -> u8 {
    match r {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

fn apply(cfg: &mut CampaignConfig, o: &Overrides) -> Result<(), Failure> {
    if let Some(p) = &o.metrics_fixture {
        cfg.metrics_fixture = Some(p.clone());
    }
    if let Some(e) = &o.llm_endpoint {
        cfg.llm.endpoint = e.clone();
    }
    if let Some(m) = &o.llm_model {
        cfg.llm.model = m.clone();
    }
    if let Some(t) = &o.temperatures {
        cfg.llm.temperatures = t
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| config_error(anyhow::anyhow!("--temperatures: {e}")))?;
    }
    if let Some(p) = &o.producers {
        cfg.energy.producers =
            parse_producer_list(p).map_err(|e| config_error(anyhow::anyhow!("--producers: {e}")))?;
    }
    if let Some(a) = o.energy_a {
        cfg.energy.a = a;
    }
    if let Some(b) = o.energy_b {
        cfg.energy.b = b;
    }
    if let Some(c) = o.energy_cap {
        cfg.energy.cap = c;
    }
    if let Some(e) = o.base_energy {
        cfg.energy.base = e;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(n) = o.max_execs {
        cfg.max_execs = Some(n);
    }
    if let Some(t) = o.time_budget {
        cfg.time_budget_secs = Some(t);
    }
    cfg.validate().map_err(|e| config_error(anyhow::anyhow!(e)))
}

fn load_config(path: &Path, o: &Overrides) -> Result<CampaignConfig, Failure> {
    let mut cfg = CampaignConfig::load(path).map_err(config_error)?;
    apply(&mut cfg, o)?;
    Ok(cfg)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn api_key(env: &str) -> Result<String, Failure> {
    std::env::var(env)
        .ok()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| config_error(anyhow::anyhow!("environment variable {env} is not set")))
}

/// Bundle for a campaign: the fixture when one is configured, an empty
/// bundle for the baseline, otherwise a fetch from the provider.
fn campaign_bundle(setup: &CampaignSetup) -> Result<MetricsBundle, Failure> {
    let cfg = &setup.config;
    if let Some(path) = &cfg.metrics_fixture {
        return MetricsBundle::load(path, &setup.program.unit).map_err(config_error);
    }
    if cfg.energy.producers.is_empty() {
        return Ok(MetricsBundle::default());
    }
    let transport = transport_for(cfg, None)?;
    let summary = summarize(&setup.program.unit);
    let report = fetch_metrics(
        &setup.program.unit,
        &summary,
        &cfg.llm,
        &cfg.invariant_texts(),
        transport.as_ref(),
        provenance(cfg),
    );
    if report.is_partial() {
        log::warn!("metrics are partial; unscored functions fall back to 0");
    }
    Ok(report.bundle)
}

fn provenance(cfg: &CampaignConfig) -> Provenance {
    Provenance::Endpoint {
        endpoint: cfg.llm.cassette.clone().unwrap_or_else(|| cfg.llm.endpoint.clone()),
        model: cfg.llm.model.clone(),
        timestamp: unix_now(),
    }
}

fn transport_for(cfg: &CampaignConfig, cassette: Option<&Path>) -> Result<Box<dyn ChatTransport>, Failure> {
    let replay = cassette
        .map(Path::to_path_buf)
        .or_else(|| cfg.llm.cassette.as_ref().map(Into::into));
    if let Some(path) = replay {
        let c = Cassette::load(&path).map_err(config_error)?;
        return Ok(Box::new(Replay::new(c)));
    }
    let key = api_key(&cfg.llm.api_key_env)?;
    Ok(Box::new(HttpTransport::new(
        &cfg.llm.endpoint,
        &key,
        Duration::from_secs(cfg.llm.timeout_secs),
    )))
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    producers: Vec<String>,
    config: &'a CampaignConfig,
    metrics_provenance: Option<&'a Provenance>,
    started_unix: u64,
    finished_unix: u64,
    wall_ms: u128,
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(a: RunArgs) -> u8 {
    finish(run_inner(a))
}

fn run_inner(a: RunArgs) -> Result<u8, Failure> {
    let cfg = load_config(&a.config, &a.overrides)?;
    let setup = CampaignSetup::new(cfg).map_err(config_error)?;
    let bundle = campaign_bundle(&setup)?;
    let started_unix = unix_now();
    let wall = std::time::Instant::now();
    let report = run_campaign(&setup, &bundle);
    let manifest = RunManifest {
        tool: "guidefuzz",
        version: env!("CARGO_PKG_VERSION"),
        seed: setup.config.seed,
        producers: setup.config.energy.producers.iter().map(|p| p.to_string()).collect(),
        config: &setup.config,
        metrics_provenance: (setup.config.metrics_fixture.is_some() || !setup.config.energy.producers.is_empty())
            .then_some(&bundle.provenance),
        started_unix,
        finished_unix: unix_now(),
        wall_ms: wall.elapsed().as_millis(),
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write(&a.out.join("report.json"), &report.to_json())?;
    write(&a.out.join("coverage.csv"), &report.coverage_csv())?;
    let mut m = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
    m.push('\n');
    write(&a.out.join("manifest.json"), &m)?;

    println!(
        "executions={} elapsed_ms={} corpus={} blocks={}/{} edges={}/{}",
        report.executions,
        report.elapsed_ms,
        report.corpus_size,
        report.coverage.blocks,
        report.coverage.blocks_total,
        report.coverage.edges,
        report.coverage.edges_total
    );
    for d in &report.detections {
        println!(
            "detected {} at {} after {} ms ({} executions)",
            serde_json::to_string(&d.kind).unwrap_or_default(),
            d.location,
            d.elapsed_ms,
            d.executions
        );
    }
    Ok(if report.stopped_on_bug {
        exit::BUG_FOUND
    } else {
        exit::OK
    })
}

pub fn fetch(a: FetchArgs) -> u8 {
    finish(fetch_inner(a))
}

fn fetch_inner(a: FetchArgs) -> Result<u8, Failure> {
    let cfg = load_config(&a.config, &a.overrides)?;
    let unit = cfg.parse_sources().map_err(config_error)?;
    if let Some(path) = &cfg.metrics_fixture {
        let b = MetricsBundle::load(path, &unit).map_err(config_error)?;
        println!(
            "fixture ok: complexity {} vuln {} invariants {} sequences {}",
            b.complexity.len(),
            b.vuln.len(),
            b.invariants.len(),
            b.sequences.len()
        );
        return Ok(exit::OK);
    }
    let summary = summarize(&unit);
    let inner = transport_for(&cfg, a.cassette.as_deref())?;
    let recorder = Recorder::new(inner);
    let mut prov = provenance(&cfg);
    if let (Some(c), Provenance::Endpoint { endpoint, .. }) = (&a.cassette, &mut prov) {
        *endpoint = c.display().to_string();
    }
    let report = fetch_metrics(&unit, &summary, &cfg.llm, &cfg.invariant_texts(), &recorder, prov);
    report
        .bundle
        .save(&a.out)
        .map_err(|e| Failure::from(anyhow::Error::from(e)))?;
    if let Some(path) = &a.record {
        recorder
            .cassette()
            .save(path)
            .map_err(|e| Failure::from(anyhow::Error::from(e)))?;
    }
    for (name, c) in &report.coverage {
        println!("{name}: {}/{} functions scored", c.scored, c.total);
    }
    if report.is_partial() {
        eprintln!(
            "warning: {} request(s) failed; missing scores fell back to 0",
            report.failed_requests
        );
        return Ok(exit::PARTIAL_METRICS);
    }
    Ok(exit::OK)
}

pub fn static_summary(a: StaticArgs) -> u8 {
    finish(static_inner(a))
}

fn static_inner(a: StaticArgs) -> Result<u8, Failure> {
    let mut files = Vec::new();
    for p in &a.sources {
        let text = std::fs::read_to_string(p)
            .map_err(|e| config_error(anyhow::anyhow!("{}: {e}", p.display())))?;
        let name = p
            .file_name()
            .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        files.push((name, text));
    }
    let unit = parse_files(&files).map_err(config_error)?;
    let mut json = serde_json::to_string_pretty(&summarize(&unit)).context("serializing summary")?;
    json.push('\n');
    if a.dump_static == "-" {
        print!("{json}");
    } else {
        write(Path::new(&a.dump_static), &json)?;
    }
    Ok(exit::OK)
}

pub fn ablate(a: AblateArgs) -> u8 {
    finish(ablate_inner(a))
}

fn ablate_inner(a: AblateArgs) -> Result<u8, Failure> {
    let mut setups = Vec::new();
    for path in &a.configs {
        let mut cfg = CampaignConfig::load(path).map_err(config_error)?;
        if let Some(t) = a.time_budget {
            cfg.time_budget_secs = Some(t);
        }
        let Some(fixture) = cfg.metrics_fixture.clone() else {
            return Err(config_error(anyhow::anyhow!(
                "{}: ablation needs `metrics_fixture`",
                path.display()
            )));
        };
        let setup = CampaignSetup::new(cfg).map_err(config_error)?;
        let bundle = MetricsBundle::load(&fixture, &setup.program.unit).map_err(config_error)?;
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        setups.push((name, setup, bundle));
    }
    let targets: Vec<BenchTarget> = setups
        .iter()
        .map(|(name, setup, bundle)| BenchTarget {
            name: name.clone(),
            setup,
            bundle,
        })
        .collect();
    let seeds: Vec<u64> = (a.first_seed..a.first_seed + a.seeds).collect();
    let rows = run_bench(
        &targets,
        &ablation_variants(),
        &seeds,
        a.threads.unwrap_or_else(default_threads),
    );
    print!("{}", render_table(&rows));
    if let Some(path) = &a.json {
        let mut json = serde_json::to_string_pretty(&rows).context("serializing results")?;
        json.push('\n');
        write(path, &json)?;
    }
    Ok(exit::OK)
}
