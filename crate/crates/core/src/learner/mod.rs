//! Active learning of capability models through distinguishing queries.

pub mod effects;
pub mod explore;
pub mod mle;
pub mod model;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use effects::{discover_outcomes, lift_delta, visible, Observation, ObservationStore};
pub use explore::StatePool;
pub use mle::{fit_from_store, fit_probabilities, tally_outcomes, LearnedModel};
pub use model::{Annotation, CandidateModel, LiftedDelta, Location, ModelError, Slot};

use crate::fond::SolveOptions;
use crate::ppddl::{bind_atom, instantiated_literals, AbstractState, CapabilitySignature, LiftedAtom, Literal};
use crate::query::{co_simulate, generate_query};
use crate::sdma::{Policy, PolicyQuery, PolicyRule, QueryResponse, Sdma, SdmaError, Transition, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub eta: usize,
    pub node_budget: usize,
    /// Depth cap for query planning.
    pub query_max_depth: Option<usize>,
    pub walk_limit: usize,
    /// Injective witnesses sought per capability before querying it.
    pub witnesses_per_capability: usize,
    pub seed: u64,
    pub time_limit_s: Option<f64>,
    /// Snapshot the fitted model every this many simulator steps.
    pub snapshot_every: Option<u64>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            eta: 5,
            node_budget: 1_000_000,
            query_max_depth: Some(3),
            walk_limit: 500,
            witnesses_per_capability: 5,
            seed: 0,
            time_limit_s: Some(600.0),
            snapshot_every: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error(transparent)]
    Sdma(#[from] SdmaError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pair {
    TF,
    TI,
    FI,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::TF, Pair::TI, Pair::FI];

    pub fn modes(self) -> (Annotation, Annotation) {
        match self {
            Pair::TF => (Annotation::True, Annotation::False),
            Pair::TI => (Annotation::True, Annotation::Ignored),
            Pair::FI => (Annotation::False, Annotation::Ignored),
        }
    }

    /// Prior value of the literal needed for the two modes to disagree.
    fn required_value(self) -> Option<bool> {
        match self {
            Pair::TF => None,
            Pair::TI => Some(false),
            Pair::FI => Some(true),
        }
    }

    fn label(self) -> String {
        let (a, b) = self.modes();
        format!("{a}/{b}")
    }
}

/// One JSON line per issued query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub iteration: usize,
    pub location: String,
    pub pair: String,
    pub query_depth: usize,
    pub sdma_steps: u64,
    pub pruned: Option<String>,
    pub surviving_mode: String,
    pub goal_reached: bool,
    pub transitions: usize,
    /// Co-simulation of the policy under both models diverges.
    pub distinguishing: bool,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub sdma_steps: u64,
    pub queries: usize,
    pub wall_time_s: f64,
    pub model: LearnedModel,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub model: CandidateModel,
    pub learned: LearnedModel,
    pub store: ObservationStore,
    pub pool: StatePool,
    pub audit: Vec<AuditRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Locations left without a decisive query; annotated by fallback.
    pub unresolved: Vec<Location>,
    pub initial_undetermined: usize,
    pub queries: usize,
    pub steps: u64,
    pub iterations: usize,
    pub timed_out: bool,
    pub wall_time_s: f64,
}

/// Result of comparing a response against two models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pruned {
    First,
    Second,
    Neither,
}

fn lits_hold(lits: &[Literal<LiftedAtom>], sig: &CapabilitySignature, args: &[String], s: &AbstractState) -> bool {
    lits.iter().all(|l| s.contains(&bind_atom(&l.atom, &sig.params, args)) == l.positive)
}

/// Eliminates the model(s) whose prediction at `loc` contradicts the
/// observed transitions. Precondition locations compare predicted success
/// where the two preconditions disagree; effect locations compare the
/// literal's post-value after successful executions.
pub fn prune(response: &QueryResponse, mi: &CandidateModel, mj: &CandidateModel, loc: &Location) -> Pruned {
    let Some(sig) = mi.signature(&loc.capability) else {
        return Pruned::Neither;
    };
    let (ai, aj) = (mi.get(loc), mj.get(loc));
    let (pi, pj) = (mi.pre_literals(&sig.name), mj.pre_literals(&sig.name));
    let (mut out_i, mut out_j) = (false, false);
    for t in response.zeta.iter().filter(|t| t.capability == loc.capability) {
        match loc.slot {
            Slot::Pre => {
                let hi = lits_hold(&pi, sig, &t.args, &t.s);
                let hj = lits_hold(&pj, sig, &t.args, &t.s);
                if hi != hj {
                    out_i |= hi != t.success;
                    out_j |= hj != t.success;
                }
            }
            Slot::Eff => {
                if !t.success {
                    continue;
                }
                let g = bind_atom(&loc.literal, &sig.params, &t.args);
                let before = t.s.contains(&g);
                let after = t.s_prime.contains(&g);
                let predict = |a: Annotation| match a {
                    Annotation::True => true,
                    Annotation::False => false,
                    _ => before,
                };
                if predict(ai) != predict(aj) {
                    out_i |= predict(ai) != after;
                    out_j |= predict(aj) != after;
                }
            }
        }
    }
    match (out_i, out_j) {
        (true, false) => Pruned::First,
        (false, true) => Pruned::Second,
        _ => Pruned::Neither,
    }
}

/// Records the transitions of `zeta` and refreshes outcome sets and
/// effect annotations of the capabilities involved.
pub fn harvest_effects(store: &mut ObservationStore, m: &mut CandidateModel, zeta: &[Transition]) {
    let mut caps = BTreeSet::new();
    for t in zeta {
        if let Some(sig) = m.signature(&t.capability).cloned() {
            store.record(&sig, t);
            caps.insert(t.capability.clone());
        }
    }
    refresh_effects(store, m, &caps);
}

fn refresh_effects(store: &ObservationStore, m: &mut CandidateModel, caps: &BTreeSet<String>) {
    for cap in caps {
        let Some(sig) = m.signature(cap).cloned() else {
            continue;
        };
        let outs = discover_outcomes(&sig, store.observations(cap));
        let locs: Vec<Location> = m
            .annotations
            .keys()
            .filter(|l| l.capability == *cap && l.slot == Slot::Eff)
            .cloned()
            .collect();
        for loc in locs {
            if !matches!(m.get(&loc), Annotation::Undetermined | Annotation::Ignored) {
                continue;
            }
            if outs.iter().any(|o| o.add.contains(&loc.literal)) {
                m.set(&loc, Annotation::True);
            } else if outs.iter().any(|o| o.delete.contains(&loc.literal)) {
                m.set(&loc, Annotation::False);
            }
        }
        m.outcomes.insert(cap.clone(), outs);
    }
}

/// Literal whose predicate argument types are not all implied by the
/// capability's parameter types: never true in a well-typed state.
fn ill_typed(vocab: &Vocabulary, sig: &CapabilitySignature, lit: &LiftedAtom) -> bool {
    let Some(p) = vocab.types.predicate(&lit.predicate) else {
        return true;
    };
    lit.args.iter().zip(&p.param_types).any(|(a, t)| {
        sig.params.iter().find(|(n, _)| n == a).is_none_or(|(_, pt)| !vocab.types.is_subtype(pt, t))
    })
}

enum PairResult {
    Pruned(Annotation),
    Resolved,
    Unresolved,
}

pub(crate) struct Learner<'a, S: Sdma + ?Sized> {
    sdma: &'a mut S,
    vocab: Vocabulary,
    cfg: LearnerConfig,
    model: CandidateModel,
    store: ObservationStore,
    pool: StatePool,
    rng: ChaCha8Rng,
    groundings: BTreeMap<String, Vec<Vec<String>>>,
    dirty: BTreeSet<String>,
    audit: Vec<AuditRecord>,
    snapshots: Vec<Snapshot>,
    next_snapshot: u64,
    unresolved: Vec<Location>,
    queries: usize,
    start: Instant,
    limit: Option<Duration>,
}

impl<S: Sdma + ?Sized> Learner<'_, S> {
    fn timed_out(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() > l)
    }

    fn pre_learned(&self, cap: &str) -> bool {
        self.model
            .annotations
            .iter()
            .filter(|(l, _)| l.capability == cap && l.slot == Slot::Pre)
            .all(|(_, a)| *a != Annotation::Undetermined)
    }

    fn learned_pre_holds(&self, cap: &str, args: &[String], s: &AbstractState) -> bool {
        let sig = self.vocab.signature(cap).unwrap();
        lits_hold(&self.model.pre_literals(cap), sig, args, s)
    }

    fn absorb(&mut self, t: &Transition, step: u64) -> bool {
        let sig = self.vocab.signature(&t.capability).unwrap();
        self.store.record(sig, t);
        self.dirty.insert(t.capability.clone());
        let novel = self.pool.add(t);
        if let Some(n) = self.cfg.snapshot_every {
            while step >= self.next_snapshot {
                self.flush_effects();
                self.snapshots.push(Snapshot {
                    sdma_steps: self.next_snapshot,
                    queries: self.queries,
                    wall_time_s: self.start.elapsed().as_secs_f64(),
                    model: fit_from_store(&self.model, &self.store),
                });
                self.next_snapshot += n;
            }
        }
        novel
    }

    fn exec(&mut self, s: &AbstractState, cap: &str, args: &[String]) -> Result<(Transition, bool), LearnError> {
        let t = self.sdma.execute(s, cap, args)?;
        let novel = self.absorb(&t, self.sdma.steps());
        Ok((t, novel))
    }

    fn flush_effects(&mut self) {
        let caps = std::mem::take(&mut self.dirty);
        refresh_effects(&self.store, &mut self.model, &caps);
    }

    fn run(&mut self) -> Result<(usize, bool), LearnError> {
        // literals that can never hold are settled without queries
        let statics: Vec<Location> = self
            .model
            .annotations
            .keys()
            .filter(|l| ill_typed(&self.vocab, self.vocab.signature(&l.capability).unwrap(), &l.literal))
            .cloned()
            .collect();
        for l in statics {
            self.model.set(&l, Annotation::Ignored);
        }
        let all: BTreeSet<String> = self.vocab.capabilities.iter().map(|c| c.name.clone()).collect();
        self.directed_explore(&all)?;
        let locations: Vec<Location> = self.model.annotations.keys().cloned().collect();
        let mut iteration = 0;
        for loc in &locations {
            if self.timed_out() {
                return Ok((iteration, true));
            }
            if self.model.get(loc) != Annotation::Undetermined {
                continue;
            }
            iteration += 1;
            self.resolve(loc, iteration)?;
        }
        self.flush_effects();
        Ok((iteration, self.timed_out()))
    }

    fn distinguishable(&self, loc: &Location, pair: Pair) -> bool {
        let Some(v) = pair.required_value() else {
            return true;
        };
        match loc.slot {
            Slot::Pre => true,
            Slot::Eff => {
                let pre = Location { slot: Slot::Pre, ..loc.clone() };
                match self.model.get(&pre) {
                    Annotation::True => v,
                    Annotation::False => !v,
                    _ => true,
                }
            }
        }
    }

    fn resolve(&mut self, loc: &Location, iteration: usize) -> Result<(), LearnError> {
        let cap = loc.capability.clone();
        if self.pool.injective_count(&cap) == 0 {
            self.directed_explore(&BTreeSet::from([cap.clone()]))?;
        }
        if self.pool.injective_count(&cap) == 0 {
            self.unresolved.push(loc.clone());
            self.model.set(loc, Annotation::Ignored);
            return Ok(());
        }
        let mut alive = vec![Annotation::True, Annotation::False, Annotation::Ignored];
        let mut open = false;
        for pair in Pair::ALL {
            if self.model.get(loc) != Annotation::Undetermined {
                return Ok(());
            }
            let (x, y) = pair.modes();
            if alive.len() == 1 || !alive.contains(&x) || !alive.contains(&y) || !self.distinguishable(loc, pair) {
                continue;
            }
            match self.query_pair(loc, pair, iteration, &alive)? {
                PairResult::Pruned(z) => alive.retain(|a| *a != z),
                PairResult::Resolved => return Ok(()),
                PairResult::Unresolved => open = true,
            }
        }
        if self.model.get(loc) != Annotation::Undetermined {
            return Ok(());
        }
        let pick = [Annotation::Ignored, Annotation::True, Annotation::False]
            .into_iter()
            .find(|a| alive.contains(a))
            .unwrap();
        if open {
            self.unresolved.push(loc.clone());
        }
        self.model.set(loc, pick);
        Ok(())
    }

    /// Copy of the current model with `loc` set to `a` and the other
    /// undetermined precondition literals of the capability fixed to their
    /// values at the witness.
    fn pinned(&self, loc: &Location, a: Annotation, s_w: &AbstractState, args_w: &[String]) -> CandidateModel {
        let mut m = self.model.clone();
        m.set(loc, a);
        if loc.slot == Slot::Pre {
            let sig = self.vocab.signature(&loc.capability).unwrap();
            for (l, ann) in m.annotations.iter_mut() {
                if l.capability == loc.capability && l.slot == Slot::Pre && l != loc && *ann == Annotation::Undetermined {
                    let v = s_w.contains(&bind_atom(&l.literal, &sig.params, args_w));
                    *ann = if v { Annotation::True } else { Annotation::False };
                }
            }
        }
        m
    }

    fn query_pair(
        &mut self,
        loc: &Location,
        pair: Pair,
        iteration: usize,
        alive: &[Annotation],
    ) -> Result<PairResult, LearnError> {
        let (x, y) = pair.modes();
        let opts = SolveOptions { node_budget: self.cfg.node_budget, max_depth: self.cfg.query_max_depth, record_graph: false };
        let sig = self.vocab.signature(&loc.capability).unwrap().clone();
        for round in 0..2 {
            let cands = self.pool.injective_witnesses(&loc.capability);
            if cands.is_empty() {
                break;
            }
            let offset = self.rng.gen_range(0..cands.len());
            for k in 0..cands.len() {
                if self.timed_out() {
                    return Ok(PairResult::Unresolved);
                }
                let (si, args_w) = &cands[(offset + k) % cands.len()];
                let s_w = self.pool.states[*si].clone();
                let mut s0 = s_w.clone();
                let g = bind_atom(&loc.literal, &sig.params, args_w);
                if let Some(v) = pair.required_value() {
                    if s0.contains(&g) != v {
                        if !self.vocab.is_well_typed(&g) {
                            continue;
                        }
                        if v {
                            s0.0.insert(g.clone());
                        } else {
                            s0.0.remove(&g);
                        }
                    }
                }
                let mx = self.pinned(loc, x, &s_w, args_w);
                let my = self.pinned(loc, y, &s_w, args_w);
                let Ok(gq) = generate_query(&mx, &my, &s0, &self.vocab.objects, self.cfg.eta, &opts) else {
                    continue;
                };
                let distinguishing = co_simulate(&mx.fond_domain(), &my.fond_domain(), &gq.query);
                self.queries += 1;
                let before = self.sdma.steps();
                let resp = self.sdma.run_policy(&gq.query)?;
                for (k, t) in resp.zeta.iter().enumerate() {
                    self.absorb(t, before + k as u64 + 1);
                }
                self.flush_effects();
                let verdict = prune(&resp, &mx, &my, loc);
                let resolved = self.model.get(loc) != Annotation::Undetermined;
                let pruned = match verdict {
                    Pruned::First => Some(x),
                    Pruned::Second => Some(y),
                    Pruned::Neither => None,
                };
                let surviving: String = if resolved {
                    self.model.get(loc).to_string()
                } else {
                    alive.iter().filter(|a| Some(**a) != pruned).map(|a| a.to_string()).collect()
                };
                self.audit.push(AuditRecord {
                    iteration,
                    location: loc.to_string(),
                    pair: pair.label(),
                    query_depth: gq.depth,
                    sdma_steps: self.sdma.steps(),
                    pruned: pruned.map(|a| a.to_string()),
                    surviving_mode: surviving,
                    goal_reached: resp.goal_reached,
                    transitions: resp.zeta.len(),
                    distinguishing,
                });
                if resolved {
                    return Ok(PairResult::Resolved);
                }
                if let Some(z) = pruned {
                    return Ok(PairResult::Pruned(z));
                }
            }
            if round == 0 {
                let steps = self.cfg.walk_limit;
                self.random_walks(steps, None)?;
                self.flush_effects();
                if self.model.get(loc) != Annotation::Undetermined {
                    return Ok(PairResult::Resolved);
                }
            }
        }
        Ok(PairResult::Unresolved)
    }
}

/// Learns a model of the agent behind `sdma`, starting from `s0`.
pub fn run_qace<S: Sdma + ?Sized>(sdma: &mut S, s0: AbstractState, cfg: &LearnerConfig) -> Result<RunReport, LearnError> {
    if cfg.eta == 0 {
        return Err(LearnError::Config("eta must be at least 1".into()));
    }
    let vocab = sdma.vocabulary().clone();
    let model = CandidateModel::initialize(&vocab.types.name, &vocab.types.types, vocab.predicates(), &vocab.capabilities);
    let initial_undetermined = model.undetermined();
    let groundings = vocab.capabilities.iter().map(|c| (c.name.clone(), vocab.bindings(c))).collect();
    let base_steps = sdma.steps();
    let mut l = Learner {
        vocab,
        cfg: cfg.clone(),
        model,
        store: ObservationStore::default(),
        pool: StatePool::new(s0),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_1ea2),
        groundings,
        dirty: BTreeSet::new(),
        audit: Vec::new(),
        snapshots: Vec::new(),
        next_snapshot: base_steps + cfg.snapshot_every.unwrap_or(0),
        unresolved: Vec::new(),
        queries: 0,
        start: Instant::now(),
        limit: cfg.time_limit_s.map(Duration::from_secs_f64),
        sdma,
    };
    let (iterations, timed_out) = l.run()?;
    let learned = fit_from_store(&l.model, &l.store);
    let mut report = RunReport {
        learned,
        model: l.model,
        store: l.store,
        pool: l.pool,
        audit: l.audit,
        snapshots: l.snapshots,
        unresolved: l.unresolved,
        initial_undetermined,
        queries: l.queries,
        steps: l.sdma.steps() - base_steps,
        iterations,
        timed_out,
        wall_time_s: l.start.elapsed().as_secs_f64(),
    };
    if !timed_out {
        // every capability gets the samples a query per location pair would give it
        let preds = report.model.predicates.clone();
        let eta = cfg.eta;
        replay_until(l.sdma, &mut report, |sig| 2 * instantiated_literals(sig, &preds).len() * eta)?;
    }
    report.wall_time_s = l.start.elapsed().as_secs_f64();
    Ok(report)
}

/// Single-step policy replays of each capability at pooled states where
/// its outcomes are distinguishable, until `target(c)` tallied observations
/// are reached or no such state exists. Outcome sets are rediscovered as
/// observations arrive; the model is refitted at the end.
fn replay_until<S: Sdma + ?Sized>(
    sdma: &mut S,
    report: &mut RunReport,
    target: impl Fn(&CapabilitySignature) -> usize,
) -> Result<(), LearnError> {
    const BATCH: usize = 50;
    for sig in report.model.signatures.clone() {
        let want = target(&sig);
        let caps = BTreeSet::from([sig.name.clone()]);
        let mut outs = Vec::new();
        let mut witnesses: Vec<(AbstractState, Vec<String>)> = Vec::new();
        let mut k = 0;
        let max_batches = 10 * want / BATCH + 10;
        while k < max_batches {
            let fresh = mle::final_outcomes(&report.model, &sig);
            if fresh != outs || k == 0 {
                outs = fresh;
                let pre = report.model.pre_literals(&sig.name);
                witnesses = report
                    .pool
                    .injective_witnesses(&sig.name)
                    .into_iter()
                    .map(|(i, a)| (report.pool.states[i].clone(), a))
                    .filter(|(s, a)| lits_hold(&pre, &sig, a, s) && effects::identifying(&outs, &sig, a, s))
                    .collect();
            }
            if witnesses.is_empty() {
                break;
            }
            let have: usize = tally_outcomes(&sig, &outs, report.store.observations(&sig.name)).iter().sum();
            if have >= want {
                break;
            }
            let (s, args) = &witnesses[k % witnesses.len()];
            k += 1;
            let mut pi = Policy::default();
            pi.rules.insert(s.clone(), PolicyRule { capability: sig.name.clone(), args: args.clone(), terminal: true });
            let q = PolicyQuery {
                s_i: s.clone(),
                pi,
                goal: crate::ppddl::Formula::Or(Vec::new()),
                alpha: 1,
                eta: BATCH.min(want - have),
            };
            let resp = sdma.run_policy(&q)?;
            report.steps += resp.zeta.len() as u64;
            for t in &resp.zeta {
                report.store.record(&sig, t);
            }
            refresh_effects(&report.store, &mut report.model, &caps);
        }
    }
    report.learned = fit_from_store(&report.model, &report.store);
    Ok(())
}

/// Extra replays until every capability has `per_capability` tallied
/// observations, where a distinguishing state is known.
pub fn replay_observations<S: Sdma + ?Sized>(
    sdma: &mut S,
    report: &mut RunReport,
    per_capability: usize,
) -> Result<(), LearnError> {
    replay_until(sdma, report, |_| per_capability)
}
