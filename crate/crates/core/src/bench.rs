//! Bundled ground-truth domains with train and test problems.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::learner::effects::injective;
use crate::ppddl::{parse_domain, parse_problem, AbstractState, DomainSpec, ParseError, ProblemSpec};
use crate::task::{Bits, GroundedDomain};

/// Most objects a training problem may have.
pub const MAX_TRAIN_OBJECTS: usize = 7;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub dir: String,
    pub train: String,
    pub test: Vec<String>,
    pub predicates: usize,
    pub capabilities: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub benchmarks: Vec<ManifestEntry>,
}

#[derive(Clone, Debug)]
pub struct BenchmarkEntry {
    pub name: String,
    pub domain: DomainSpec,
    pub train: ProblemSpec,
    pub tests: Vec<ProblemSpec>,
    pub expected_predicates: usize,
    pub expected_capabilities: usize,
    /// Source texts: domain, train, then tests.
    pub sources: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}`")]
    Unknown(String),
    #[error("{file}:{source}")]
    Parse { file: String, source: ParseError },
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("{name}: expected {expected} {what}, found {found}")]
    SizeMismatch { name: String, what: &'static str, expected: usize, found: usize },
    #[error("{name}: training problem has {found} objects (at most {MAX_TRAIN_OBJECTS})")]
    TrainTooLarge { name: String, found: usize },
    #[error("{name}: test problem {file} has {found} objects, expected {expected}")]
    TestSize { name: String, file: String, expected: usize, found: usize },
}

const MANIFEST: &str = include_str!("../benchmarks/manifest.json");

const FILES: &[(&str, &str)] = &[
    ("cafe/domain.pddl", include_str!("../benchmarks/cafe/domain.pddl")),
    ("cafe/train.pddl", include_str!("../benchmarks/cafe/train.pddl")),
    ("cafe/test-10.pddl", include_str!("../benchmarks/cafe/test-10.pddl")),
    ("warehouse/domain.pddl", include_str!("../benchmarks/warehouse/domain.pddl")),
    ("warehouse/train.pddl", include_str!("../benchmarks/warehouse/train.pddl")),
    ("warehouse/test-12.pddl", include_str!("../benchmarks/warehouse/test-12.pddl")),
    ("driver/domain.pddl", include_str!("../benchmarks/driver/domain.pddl")),
    ("driver/train.pddl", include_str!("../benchmarks/driver/train.pddl")),
    ("driver/test-12.pddl", include_str!("../benchmarks/driver/test-12.pddl")),
    ("first-responder/domain.pddl", include_str!("../benchmarks/first-responder/domain.pddl")),
    ("first-responder/train.pddl", include_str!("../benchmarks/first-responder/train.pddl")),
    ("first-responder/test-14.pddl", include_str!("../benchmarks/first-responder/test-14.pddl")),
    ("elevator/domain.pddl", include_str!("../benchmarks/elevator/domain.pddl")),
    ("elevator/train.pddl", include_str!("../benchmarks/elevator/train.pddl")),
    ("elevator/test-14.pddl", include_str!("../benchmarks/elevator/test-14.pddl")),
];

pub fn manifest() -> Manifest {
    serde_json::from_str(MANIFEST).expect("bundled manifest")
}

pub fn names() -> Vec<String> {
    manifest().benchmarks.into_iter().map(|b| b.name).collect()
}

fn bundled(path: &str) -> Option<&'static str> {
    FILES.iter().find(|(p, _)| *p == path).map(|(_, t)| *t)
}

/// Loads a bundled benchmark and checks its sizes.
pub fn load_benchmark(name: &str) -> Result<BenchmarkEntry, BenchError> {
    let m = manifest();
    let e = m.benchmarks.iter().find(|b| b.name == name).ok_or_else(|| BenchError::Unknown(name.into()))?;
    build(e, |rel| {
        let key = format!("{}/{}", e.dir, rel);
        bundled(&key).map(str::to_string).ok_or_else(|| BenchError::Io(key.into(), std::io::ErrorKind::NotFound.into()))
    })
}

/// Loads a benchmark from a directory laid out like the bundled tree
/// (`manifest.json` at its root).
pub fn load_benchmark_from(root: &Path, name: &str) -> Result<BenchmarkEntry, BenchError> {
    let mpath = root.join("manifest.json");
    let text = std::fs::read_to_string(&mpath).map_err(|e| BenchError::Io(mpath.clone(), e))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| BenchError::Manifest(e.to_string()))?;
    let e = m.benchmarks.iter().find(|b| b.name == name).ok_or_else(|| BenchError::Unknown(name.into()))?;
    build(e, |rel| {
        let p = root.join(&e.dir).join(rel);
        std::fs::read_to_string(&p).map_err(|err| BenchError::Io(p, err))
    })
}

fn build(e: &ManifestEntry, read: impl Fn(&str) -> Result<String, BenchError>) -> Result<BenchmarkEntry, BenchError> {
    let parse_err = |file: &str| {
        let file = format!("{}/{}", e.dir, file);
        move |source| BenchError::Parse { file, source }
    };
    let dtext = read("domain.pddl")?;
    let domain = parse_domain(&dtext).map_err(parse_err("domain.pddl"))?;
    let ttext = read(&e.train)?;
    let train = parse_problem(&ttext, &domain).map_err(parse_err(&e.train))?;
    let mut sources = vec![("domain.pddl".to_string(), dtext), (e.train.clone(), ttext)];
    let mut tests = Vec::new();
    for f in &e.test {
        let text = read(f)?;
        tests.push(parse_problem(&text, &domain).map_err(parse_err(f))?);
        sources.push((f.clone(), text));
    }
    let entry = BenchmarkEntry {
        name: e.name.clone(),
        domain,
        train,
        tests,
        expected_predicates: e.predicates,
        expected_capabilities: e.capabilities,
        sources,
    };
    check_sizes(&entry, e)?;
    Ok(entry)
}

fn check_sizes(b: &BenchmarkEntry, e: &ManifestEntry) -> Result<(), BenchError> {
    let mismatch = |what, expected, found| BenchError::SizeMismatch { name: b.name.clone(), what, expected, found };
    if b.domain.predicates.len() != b.expected_predicates {
        return Err(mismatch("predicates", b.expected_predicates, b.domain.predicates.len()));
    }
    if b.domain.capabilities.len() != b.expected_capabilities {
        return Err(mismatch("capabilities", b.expected_capabilities, b.domain.capabilities.len()));
    }
    let n = b.train.objects.len();
    if n > MAX_TRAIN_OBJECTS {
        return Err(BenchError::TrainTooLarge { name: b.name.clone(), found: n });
    }
    for (t, f) in b.tests.iter().zip(&e.test) {
        if t.objects.len() != 2 * n {
            return Err(BenchError::TestSize { name: b.name.clone(), file: f.clone(), expected: 2 * n, found: t.objects.len() });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identifiability {
    /// State and arguments from which every outcome yields a distinct
    /// successor.
    Witness { state: AbstractState, args: Vec<String> },
    /// No such state among those searched.
    Counterexample { states_searched: usize, reason: String },
}

impl Identifiability {
    pub fn is_witness(&self) -> bool {
        matches!(self, Identifiability::Witness { .. })
    }
}

/// Searches states reachable from `problem.init` (at most `state_limit`)
/// for a disambiguating execution of each capability. Groundings with
/// pairwise-distinct arguments are preferred.
pub fn verify_identifiability(
    domain: &DomainSpec,
    problem: &ProblemSpec,
    state_limit: usize,
) -> BTreeMap<String, Identifiability> {
    let g = GroundedDomain::new(domain, &problem.objects);
    let mut result: BTreeMap<String, Identifiability> = BTreeMap::new();
    let mut fallback: BTreeMap<String, Identifiability> = BTreeMap::new();
    let Some(init) = g.universe.encode(&problem.init) else {
        for c in &domain.capabilities {
            result.insert(
                c.name.clone(),
                Identifiability::Counterexample { states_searched: 0, reason: "initial state outside vocabulary".into() },
            );
        }
        return result;
    };
    let mut seen: HashSet<Bits> = HashSet::from([init.clone()]);
    let mut queue = VecDeque::from([init]);
    let total = domain.capabilities.len();
    while let Some(s) = queue.pop_front() {
        for a in &g.actions {
            if !a.pre.eval(&s) {
                continue;
            }
            let succ: Vec<Bits> = a.outcomes.iter().map(|o| o.apply(&s)).collect();
            let distinct: HashSet<&Bits> = succ.iter().collect();
            if distinct.len() == succ.len() && !result.contains_key(&a.name) {
                let w = Identifiability::Witness { state: g.universe.decode(&s), args: a.args.clone() };
                if injective(&a.args) {
                    result.insert(a.name.clone(), w);
                } else {
                    fallback.entry(a.name.clone()).or_insert(w);
                }
            }
            for n in succ {
                if seen.len() < state_limit && seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        if result.len() == total {
            break;
        }
    }
    for c in &domain.capabilities {
        if !result.contains_key(&c.name) {
            let v = fallback.remove(&c.name).unwrap_or_else(|| Identifiability::Counterexample {
                states_searched: seen.len(),
                reason: "no reachable state separates its outcomes".into(),
            });
            result.insert(c.name.clone(), v);
        }
    }
    result
}
