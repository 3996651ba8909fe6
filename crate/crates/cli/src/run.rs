use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use qace_core::bench::{load_benchmark, load_benchmark_from, names, verify_identifiability, BenchError, BenchmarkEntry};
use qace_core::eval::{approx_vd, exact_vd, pinsker_check, random_baseline, structural_diff, StructuralDiff};
use qace_core::learner::{run_qace, LearnerConfig};
use qace_core::ppddl::{domain_text, parse_domain, parse_problem, problem_text, DomainSpec, ProblemSpec};
use qace_core::sdma::{Sdma, SdmaHandle, Transition};

use crate::config::ExperimentConfig;
use crate::Failure;

pub const BENCHMARK_ENV: &str = "QACE_BENCHMARKS";
const TEST_SEED_SALT: u64 = 0x07e5_75e7;

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(name: &str) -> Result<BenchmarkEntry, Failure> {
    let r = match std::env::var_os(BENCHMARK_ENV) {
        Some(root) => load_benchmark_from(Path::new(&root), name),
        None => load_benchmark(name),
    };
    r.map_err(|e| match e {
        BenchError::Unknown(_) => Failure::Config(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    })
}

fn benchmark_names() -> Result<Vec<String>, Failure> {
    match std::env::var_os(BENCHMARK_ENV) {
        Some(root) => {
            let p = Path::new(&root).join("manifest.json");
            let text = fs::read_to_string(&p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            let m: qace_core::bench::Manifest = serde_json::from_str(&text).map_err(runtime)?;
            Ok(m.benchmarks.into_iter().map(|b| b.name).collect())
        }
        None => Ok(names()),
    }
}

/// Held-out transitions from the benchmark's test problems.
pub fn test_set(b: &BenchmarkEntry, seed: u64, n: usize) -> Vec<Transition> {
    let mut h = SdmaHandle::new(b.domain.clone(), b.train.clone(), seed ^ TEST_SEED_SALT);
    h.sample_test_transitions(&b.tests, n)
}

pub fn learner_config(cfg: &ExperimentConfig, seed: u64) -> LearnerConfig {
    LearnerConfig {
        eta: cfg.eta,
        node_budget: cfg.node_budget,
        walk_limit: cfg.walk_limit,
        seed,
        time_limit_s: Some(cfg.time_limit_s),
        snapshot_every: Some(cfg.snapshot_every),
        ..LearnerConfig::default()
    }
}

fn header(wall: bool) -> Vec<&'static str> {
    let mut h = vec!["domain", "seed", "learner", "sdma_steps", "queries_issued", "exact_vd", "approx_vd"];
    if wall {
        h.push("wall_time_s");
    }
    h
}

#[derive(Clone, Debug)]
struct Row {
    sdma_steps: u64,
    queries: usize,
    exact_vd: f64,
    approx_vd: f64,
    wall_time_s: f64,
}

fn record(domain: &str, seed: u64, learner: &str, r: &Row, wall: bool) -> Vec<String> {
    let mut v = vec![
        domain.to_string(),
        seed.to_string(),
        learner.to_string(),
        r.sdma_steps.to_string(),
        r.queries.to_string(),
        format!("{:.6}", r.exact_vd),
        format!("{:.6}", r.approx_vd),
    ];
    if wall {
        v.push(format!("{:.3}", r.wall_time_s));
    }
    v
}

fn write_csv(path: &Path, wall: bool, rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    w.write_record(header(wall)).map_err(runtime)?;
    for r in rows {
        w.write_record(r).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

fn score(gt: &DomainSpec, m: &DomainSpec, test: &[Transition], seed: u64) -> Result<(f64, f64), Failure> {
    Ok((exact_vd(gt, m, test).map_err(runtime)?, approx_vd(m, test, seed)))
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    sdma_steps: u64,
    queries: usize,
    undetermined_initial: usize,
    unresolved: Vec<String>,
    timed_out: bool,
    structural_diff: usize,
    diff_entries: Vec<String>,
    exact_vd: f64,
    approx_vd: f64,
    non_distinguishing_queries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

struct SeedRun {
    summary: SeedSummary,
    model_text: String,
    audit: String,
    rows: Vec<Row>,
}

fn mean_std(v: &[f64]) -> serde_json::Value {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    json!({ "mean": mean, "std": var.sqrt() })
}

fn learn_seed(b: &BenchmarkEntry, cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun, Failure> {
    let test = test_set(b, seed, cfg.test_samples);
    let mut h = SdmaHandle::new(b.domain.clone(), b.train.clone(), seed);
    let s0 = h.initial_state();
    let report = run_qace(&mut h, s0, &learner_config(cfg, seed)).map_err(runtime)?;
    let mut rows = Vec::new();
    for snap in &report.snapshots {
        let (e, a) = score(&b.domain, &snap.model.domain, &test, seed)?;
        rows.push(Row { sdma_steps: snap.sdma_steps, queries: snap.queries, exact_vd: e, approx_vd: a, wall_time_s: snap.wall_time_s });
    }
    let (e, a) = score(&b.domain, &report.learned.domain, &test, seed)?;
    rows.push(Row { sdma_steps: report.steps, queries: report.queries, exact_vd: e, approx_vd: a, wall_time_s: report.wall_time_s });
    let diff = structural_diff(&b.domain, &report.learned.domain);
    let mut audit = String::new();
    for r in &report.audit {
        writeln!(audit, "{}", serde_json::to_string(r).map_err(runtime)?).unwrap();
    }
    Ok(SeedRun {
        summary: SeedSummary {
            seed,
            sdma_steps: report.steps,
            queries: report.queries,
            undetermined_initial: report.initial_undetermined,
            unresolved: report.unresolved.iter().map(|l| l.to_string()).collect(),
            timed_out: report.timed_out,
            structural_diff: diff.len(),
            diff_entries: diff.entries.iter().map(|d| d.to_string()).collect(),
            exact_vd: e,
            approx_vd: a,
            non_distinguishing_queries: report.audit.iter().filter(|r| !r.distinguishing).count(),
            wall_time_s: cfg.wall_time.then_some(report.wall_time_s),
        },
        model_text: domain_text(&report.learned.domain),
        audit,
        rows,
    })
}

fn seed_dir(root: &Path, seed: u64) -> Result<PathBuf, Failure> {
    let d = root.join(format!("seed-{seed}"));
    fs::create_dir_all(&d).map_err(|e| Failure::Runtime(format!("{}: {e}", d.display())))?;
    Ok(d)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

pub fn learn(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let name = cfg.domain.clone().unwrap();
    let b = load(&name)?;
    let seeds = cfg.seed_list()?;
    let runs: Vec<Result<SeedRun, Failure>> = seeds.par_iter().map(|&s| learn_seed(&b, cfg, s)).collect();
    let root = cfg.out.join(&name);
    fs::create_dir_all(&root).map_err(runtime)?;
    let mut all_rows = Vec::new();
    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    for (seed, run) in seeds.iter().zip(runs) {
        let run = match run {
            Ok(r) => r,
            Err(Failure::Runtime(m) | Failure::Config(m)) => {
                failed.push(format!("seed {seed}: {m}"));
                continue;
            }
        };
        let dir = seed_dir(&root, *seed)?;
        write(&dir.join("model.pddl"), &run.model_text)?;
        write(&dir.join("audit.jsonl"), &run.audit)?;
        let rows: Vec<Vec<String>> = run.rows.iter().map(|r| record(&name, *seed, "qace", r, cfg.wall_time)).collect();
        write_csv(&dir.join("snapshots.csv"), cfg.wall_time, &rows)?;
        all_rows.extend(rows);
        let s = &run.summary;
        println!(
            "{name} seed {}: steps={} queries={} diff={} exact_vd={:.4} approx_vd={:.4}{}",
            s.seed,
            s.sdma_steps,
            s.queries,
            s.structural_diff,
            s.exact_vd,
            s.approx_vd,
            if s.timed_out { " (timed out)" } else { "" }
        );
        if s.timed_out {
            failed.push(format!("seed {seed}: time limit reached"));
        }
        summaries.push(run.summary);
    }
    write_csv(&root.join("learn.csv"), cfg.wall_time, &all_rows)?;
    let col = |f: fn(&SeedSummary) -> f64| summaries.iter().map(f).collect::<Vec<_>>();
    let summary = json!({
        "domain": name,
        "learner": "qace",
        "config": cfg,
        "seeds": summaries,
        "aggregate": if summaries.is_empty() { serde_json::Value::Null } else { json!({
            "exact_vd": mean_std(&col(|s| s.exact_vd)),
            "approx_vd": mean_std(&col(|s| s.approx_vd)),
            "queries": mean_std(&col(|s| s.queries as f64)),
            "sdma_steps": mean_std(&col(|s| s.sdma_steps as f64)),
            "structurally_exact": summaries.iter().filter(|s| s.structural_diff == 0).count(),
        })},
        "failures": failed,
    });
    write(&root.join("summary.json"), &serde_json::to_string_pretty(&summary).map_err(runtime)?)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(failed.join("; ")))
    }
}

#[derive(Serialize)]
struct BaselineSummary {
    seed: u64,
    sdma_steps: u64,
    structural_diff: usize,
    qace_structural_diff: Option<usize>,
    exact_vd: f64,
    approx_vd: f64,
}

pub fn baseline(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let name = cfg.domain.clone().unwrap();
    let b = load(&name)?;
    let seeds = cfg.seed_list()?;
    let runs: Vec<Result<(BaselineSummary, String, Row), Failure>> = seeds
        .par_iter()
        .map(|&seed| {
            let (budget, qace_diff) = match cfg.step_budget {
                Some(n) => (n, None),
                None => {
                    let mut h = SdmaHandle::new(b.domain.clone(), b.train.clone(), seed);
                    let s0 = h.initial_state();
                    let lc = LearnerConfig { snapshot_every: None, ..learner_config(cfg, seed) };
                    let r = run_qace(&mut h, s0, &lc).map_err(runtime)?;
                    (r.steps, Some(structural_diff(&b.domain, &r.learned.domain).len()))
                }
            };
            let start = std::time::Instant::now();
            let mut h = SdmaHandle::new(b.domain.clone(), b.train.clone(), seed);
            let r = random_baseline(&mut h, budget, seed).map_err(runtime)?;
            let test = test_set(&b, seed, cfg.test_samples);
            let (e, a) = score(&b.domain, &r.learned.domain, &test, seed)?;
            let d = structural_diff(&b.domain, &r.learned.domain);
            let row = Row { sdma_steps: r.steps, queries: 0, exact_vd: e, approx_vd: a, wall_time_s: start.elapsed().as_secs_f64() };
            Ok((
                BaselineSummary { seed, sdma_steps: r.steps, structural_diff: d.len(), qace_structural_diff: qace_diff, exact_vd: e, approx_vd: a },
                domain_text(&r.learned.domain),
                row,
            ))
        })
        .collect();
    let root = cfg.out.join(&name).join("baseline");
    fs::create_dir_all(&root).map_err(runtime)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    for (seed, run) in seeds.iter().zip(runs) {
        match run {
            Ok((s, text, row)) => {
                write(&seed_dir(&root, *seed)?.join("model.pddl"), &text)?;
                rows.push(record(&name, *seed, "baseline", &row, cfg.wall_time));
                println!(
                    "{name} seed {seed}: baseline steps={} diff={}{} exact_vd={:.4} approx_vd={:.4}",
                    s.sdma_steps,
                    s.structural_diff,
                    s.qace_structural_diff.map(|q| format!(" (qace {q})")).unwrap_or_default(),
                    s.exact_vd,
                    s.approx_vd
                );
                summaries.push(s);
            }
            Err(Failure::Runtime(m) | Failure::Config(m)) => failed.push(format!("seed {seed}: {m}")),
        }
    }
    write_csv(&root.join("baseline.csv"), cfg.wall_time, &rows)?;
    let summary = json!({ "domain": name, "learner": "baseline", "config": cfg, "seeds": summaries, "failures": failed });
    write(&root.join("summary.json"), &serde_json::to_string_pretty(&summary).map_err(runtime)?)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(failed.join("; ")))
    }
}

#[derive(Serialize)]
struct EvalEntry {
    model: String,
    exact_vd: f64,
    approx_vd: f64,
    sample_count: usize,
    structural_diff: StructuralDiff,
    pinsker_holds: bool,
    pinsker_covered: usize,
    pinsker_skipped: usize,
}

pub fn eval(cfg: &ExperimentConfig, models: &[PathBuf]) -> Result<(), Failure> {
    let name = cfg.domain.clone().unwrap();
    let b = load(&name)?;
    let seed = cfg.seed_list()?[0];
    let test = test_set(&b, seed, cfg.test_samples);
    let mut entries = Vec::new();
    for p in models {
        let text = fs::read_to_string(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
        let m = parse_domain(&text).map_err(|e| Failure::Runtime(format!("{}:{e}", p.display())))?;
        let (e, a) = score(&b.domain, &m, &test, seed).map_err(|f| match f {
            Failure::Runtime(msg) | Failure::Config(msg) => Failure::Runtime(format!("{}: {msg}", p.display())),
        })?;
        let diff = structural_diff(&b.domain, &m);
        let pk = pinsker_check(&b.domain, &m, &test);
        println!(
            "{}: exact_vd={e:.4} approx_vd={a:.4} structural_diff={} pinsker={} ({} covered, {} skipped)",
            p.display(),
            diff.len(),
            if pk.holds { "holds" } else { "violated" },
            pk.covered,
            pk.skipped
        );
        for d in &diff.entries {
            println!("  {d}");
        }
        entries.push(EvalEntry {
            model: p.display().to_string(),
            exact_vd: e,
            approx_vd: a,
            sample_count: test.len(),
            structural_diff: diff,
            pinsker_holds: pk.holds,
            pinsker_covered: pk.covered,
            pinsker_skipped: pk.skipped,
        });
    }
    if cfg.out != ExperimentConfig::default().out || Path::new(&cfg.out).exists() {
        let root = cfg.out.join(&name);
        fs::create_dir_all(&root).map_err(runtime)?;
        let summary = json!({ "domain": name, "seed": seed, "models": entries });
        write(&root.join("eval.json"), &serde_json::to_string_pretty(&summary).map_err(runtime)?)?;
    }
    Ok(())
}

const IDENTIFIABILITY_STATES: usize = 20_000;

fn check_domain(label: &str, d: &DomainSpec, problems: &[(String, ProblemSpec)]) -> Vec<String> {
    let mut problems_found = Vec::new();
    match parse_domain(&domain_text(d)) {
        Ok(back) if back == *d => {}
        Ok(_) => problems_found.push(format!("{label}: domain round-trip changed the model")),
        Err(e) => problems_found.push(format!("{label}: serialized domain does not parse: {e}")),
    }
    for (f, p) in problems {
        match parse_problem(&problem_text(p), d) {
            Ok(back) if back == *p => {}
            Ok(_) => problems_found.push(format!("{label}/{f}: problem round-trip changed the problem")),
            Err(e) => problems_found.push(format!("{label}/{f}: serialized problem does not parse: {e}")),
        }
    }
    if let Some((_, train)) = problems.first() {
        for (cap, r) in verify_identifiability(d, train, IDENTIFIABILITY_STATES) {
            if !r.is_witness() {
                problems_found.push(format!("{label}: effects of `{cap}` are not identifiable: {r:?}"));
            }
        }
    }
    problems_found
}

fn validate_entry(b: &BenchmarkEntry) -> Vec<String> {
    let mut problems = vec![("train".to_string(), b.train.clone())];
    for (i, t) in b.tests.iter().enumerate() {
        problems.push((format!("test-{i}"), t.clone()));
    }
    check_domain(&b.name, &b.domain, &problems)
}

fn validate_plain_dir(dir: &Path) -> Result<Vec<String>, Failure> {
    let dpath = dir.join("domain.pddl");
    let text = fs::read_to_string(&dpath).map_err(|e| Failure::Runtime(format!("{}: {e}", dpath.display())))?;
    let d = parse_domain(&text).map_err(|e| Failure::Runtime(format!("{}:{e}", dpath.display())))?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(runtime)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pddl") && p.file_name().is_some_and(|n| n != "domain.pddl"))
        .collect();
    files.sort_by_key(|p| (p.file_stem().is_none_or(|s| s != "train"), p.clone()));
    let mut problems = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(runtime)?;
        let p = parse_problem(&text, &d).map_err(|e| Failure::Runtime(format!("{}:{e}", f.display())))?;
        problems.push((f.file_name().unwrap().to_string_lossy().into_owned(), p));
    }
    Ok(check_domain(&dir.display().to_string(), &d, &problems))
}

pub fn validate(domain: Option<&str>, dir: Option<&Path>) -> Result<(), Failure> {
    let mut failures = Vec::new();
    match dir {
        Some(dir) if !dir.join("manifest.json").exists() => {
            let found = validate_plain_dir(dir)?;
            if found.is_empty() {
                println!("PASS {}", dir.display());
            }
            failures.extend(found);
        }
        _ => {
            let list = match (domain, dir) {
                (Some(d), _) => vec![d.to_string()],
                (None, Some(dir)) => {
                    let text = fs::read_to_string(dir.join("manifest.json")).map_err(runtime)?;
                    let m: qace_core::bench::Manifest = serde_json::from_str(&text).map_err(runtime)?;
                    m.benchmarks.into_iter().map(|b| b.name).collect()
                }
                (None, None) => benchmark_names()?,
            };
            for name in list {
                let b = match dir {
                    Some(dir) => load_benchmark_from(dir, &name).map_err(runtime),
                    None => load(&name),
                };
                let b = match b {
                    Ok(b) => b,
                    Err(Failure::Runtime(m) | Failure::Config(m)) => {
                        failures.push(m);
                        continue;
                    }
                };
                let found = validate_entry(&b);
                if found.is_empty() {
                    println!(
                        "PASS {name}: {} predicates, {} capabilities, {} training objects",
                        b.domain.predicates.len(),
                        b.domain.capabilities.len(),
                        b.train.objects.len()
                    );
                }
                failures.extend(found);
            }
        }
    }
    for f in &failures {
        println!("FAIL {f}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} validation failure(s)", failures.len())))
    }
}
