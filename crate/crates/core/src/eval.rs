//! Model quality: variational distance, structural diffs and a random
//! exploration baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::learner::effects::injective;
use crate::learner::{fit_from_store, harvest_effects, Annotation, CandidateModel, LearnedModel, Location, ObservationStore, Slot};
use crate::ppddl::{
    apply_outcome, bind_atom, ground_with, holds, instantiated_literals, AbstractState, CapabilitySchema, DomainSpec,
    EffectOutcome, LiftedAtom, Literal,
};
use crate::sdma::{Sdma, SdmaError, Transition};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VDReport {
    pub exact_vd: Option<f64>,
    pub approx_vd: f64,
    pub sample_count: usize,
    pub sdma_steps_used: u64,
    pub wall_time: f64,
}

fn check_vocabulary(a: &DomainSpec, b: &DomainSpec) -> Result<(), EvalError> {
    let pa: BTreeSet<_> = a.predicates.iter().map(|p| (&p.name, p.param_types.len())).collect();
    let pb: BTreeSet<_> = b.predicates.iter().map(|p| (&p.name, p.param_types.len())).collect();
    if pa != pb {
        return Err(EvalError::VocabularyMismatch("predicate sets differ".into()));
    }
    for c in &a.capabilities {
        match b.capability(&c.name) {
            Some(d) if d.arity() == c.arity() => {}
            _ => return Err(EvalError::VocabularyMismatch(format!("capability `{}`", c.name))),
        }
    }
    Ok(())
}

fn outcome_weights(c: &CapabilitySchema) -> Vec<f64> {
    let n = c.outcomes.len() as f64;
    c.outcomes.iter().map(|o| o.probability.unwrap_or(1.0 / n)).collect()
}

/// Successor distribution of `cap(args)` in `s`; empty when the
/// precondition does not hold. Outcomes without probabilities are taken as
/// uniform.
pub fn successor_distribution(d: &DomainSpec, s: &AbstractState, cap: &str, args: &[String]) -> BTreeMap<AbstractState, f64> {
    let mut out = BTreeMap::new();
    let Some(c) = d.capability(cap) else {
        return out;
    };
    let g = ground_with(c, args);
    if !holds(s, &g.precondition) {
        return out;
    }
    for (o, w) in g.outcomes.iter().zip(outcome_weights(c)) {
        *out.entry(apply_outcome(s, o)).or_insert(0.0) += w;
    }
    out
}

/// `P(s' | s, c)`, zero when the precondition fails or no outcome maps
/// `s` to `s'`.
pub fn transition_probability(d: &DomainSpec, t: &Transition) -> f64 {
    successor_distribution(d, &t.s, &t.capability, &t.args).get(&t.s_prime).copied().unwrap_or(0.0)
}

/// Mean absolute difference of transition probabilities over `test`.
pub fn exact_vd(t_prime: &DomainSpec, m: &DomainSpec, test: &[Transition]) -> Result<f64, EvalError> {
    check_vocabulary(t_prime, m)?;
    if test.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = test.iter().map(|t| (transition_probability(t_prime, t) - transition_probability(m, t)).abs()).sum();
    Ok(sum / test.len() as f64)
}

/// Fraction of `test` where one sample from `m` misses the recorded
/// successor. A model whose precondition fails predicts no change.
pub fn approx_vd(m: &DomainSpec, test: &[Transition], seed: u64) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut miss = 0usize;
    for t in test {
        let predicted = match m.capability(&t.capability) {
            Some(c) => {
                let g = ground_with(c, &t.args);
                if holds(&t.s, &g.precondition) && !g.outcomes.is_empty() {
                    let w = outcome_weights(c);
                    let total: f64 = w.iter().sum();
                    let mut r = rng.gen::<f64>() * total;
                    let mut k = w.len() - 1;
                    for (i, p) in w.iter().enumerate() {
                        if r < *p {
                            k = i;
                            break;
                        }
                        r -= p;
                    }
                    apply_outcome(&t.s, &g.outcomes[k])
                } else {
                    t.s.clone()
                }
            }
            None => t.s.clone(),
        };
        if predicted != t.s_prime {
            miss += 1;
        }
    }
    miss as f64 / test.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinskerReport {
    pub holds: bool,
    /// Mean absolute probability gap over the covered triplets.
    pub vd: f64,
    pub mean_kl: f64,
    pub covered: usize,
    /// Triplets skipped because `m` gives zero probability to a successor
    /// the ground truth can produce.
    pub skipped: usize,
}

/// Checks `vd <= sqrt(0.5 * KL)` on the per-state successor distributions
/// behind `test`, per triplet and on average.
pub fn pinsker_check(t_prime: &DomainSpec, m: &DomainSpec, test: &[Transition]) -> PinskerReport {
    let (mut vd, mut kl, mut covered, mut skipped) = (0.0, 0.0, 0usize, 0usize);
    let mut holds = true;
    for t in test {
        let p = successor_distribution(t_prime, &t.s, &t.capability, &t.args);
        let q = successor_distribution(m, &t.s, &t.capability, &t.args);
        if p.iter().any(|(s, &pp)| pp > 0.0 && q.get(s).copied().unwrap_or(0.0) <= 0.0) {
            skipped += 1;
            continue;
        }
        let k: f64 = p.iter().filter(|(_, &pp)| pp > 0.0).map(|(s, &pp)| pp * (pp / q[s]).ln()).sum::<f64>().max(0.0);
        let d = (p.get(&t.s_prime).copied().unwrap_or(0.0) - q.get(&t.s_prime).copied().unwrap_or(0.0)).abs();
        holds &= d <= (0.5 * k).sqrt() + 1e-12;
        vd += d;
        kl += k;
        covered += 1;
    }
    if covered > 0 {
        vd /= covered as f64;
        kl /= covered as f64;
    }
    holds &= vd <= (0.5 * kl).sqrt() + 1e-12;
    PinskerReport { holds, vd, mean_kl: kl, covered, skipped }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiffKind {
    MissingCapability,
    MissingPrecondition,
    ExcessPrecondition,
    MissingOutcome,
    ExcessOutcome,
    MissingEffect,
    ExcessEffect,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiffEntry {
    pub capability: String,
    pub kind: DiffKind,
    pub detail: String,
}

impl fmt::Display for DiffEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?} {}", self.capability, self.kind, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralDiff {
    pub entries: Vec<DiffEntry>,
}

impl StructuralDiff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

fn literal_text(l: &Literal<LiftedAtom>) -> String {
    if l.positive {
        l.atom.to_string()
    } else {
        format!("(not {})", l.atom)
    }
}

fn pre_set(c: &CapabilitySchema) -> BTreeSet<Literal<LiftedAtom>> {
    c.precondition.conjunctive_literals().unwrap_or_default().into_iter().collect()
}

fn effect_set(o: &EffectOutcome) -> BTreeSet<Literal<LiftedAtom>> {
    o.add.iter().map(|a| Literal::pos(a.clone())).chain(o.delete.iter().map(|a| Literal::neg(a.clone()))).collect()
}

/// Missing and excess precondition literals, outcomes and effect literals
/// of `m` relative to `t_prime`. Outcomes are matched greedily by smallest
/// symmetric difference of their effect literals.
pub fn structural_diff(t_prime: &DomainSpec, m: &DomainSpec) -> StructuralDiff {
    let mut entries = Vec::new();
    for gt in &t_prime.capabilities {
        let push = |entries: &mut Vec<DiffEntry>, kind, detail: String| {
            entries.push(DiffEntry { capability: gt.name.clone(), kind, detail })
        };
        let Some(lc) = m.capability(&gt.name) else {
            push(&mut entries, DiffKind::MissingCapability, String::new());
            continue;
        };
        let (pg, pl) = (pre_set(gt), pre_set(lc));
        for l in pg.difference(&pl) {
            push(&mut entries, DiffKind::MissingPrecondition, literal_text(l));
        }
        for l in pl.difference(&pg) {
            push(&mut entries, DiffKind::ExcessPrecondition, literal_text(l));
        }
        let eg: Vec<_> = gt.outcomes.iter().map(effect_set).collect();
        let el: Vec<_> = lc.outcomes.iter().map(effect_set).collect();
        let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
        for (i, a) in eg.iter().enumerate() {
            for (j, b) in el.iter().enumerate() {
                pairs.push((a.symmetric_difference(b).count(), i, j));
            }
        }
        pairs.sort();
        let (mut used_g, mut used_l) = (BTreeSet::new(), BTreeSet::new());
        for (_, i, j) in pairs {
            if used_g.contains(&i) || used_l.contains(&j) {
                continue;
            }
            used_g.insert(i);
            used_l.insert(j);
            let outcome = |s: &BTreeSet<Literal<LiftedAtom>>| s.iter().map(literal_text).collect::<Vec<_>>().join(" ");
            for l in eg[i].difference(&el[j]) {
                push(&mut entries, DiffKind::MissingEffect, format!("{} in outcome [{}]", literal_text(l), outcome(&eg[i])));
            }
            for l in el[j].difference(&eg[i]) {
                push(&mut entries, DiffKind::ExcessEffect, format!("{} in outcome [{}]", literal_text(l), outcome(&eg[i])));
            }
        }
        for (i, o) in eg.iter().enumerate() {
            if !used_g.contains(&i) {
                let t: Vec<_> = o.iter().map(literal_text).collect();
                push(&mut entries, DiffKind::MissingOutcome, format!("[{}]", t.join(" ")));
            }
        }
        for (j, o) in el.iter().enumerate() {
            if !used_l.contains(&j) {
                let t: Vec<_> = o.iter().map(literal_text).collect();
                push(&mut entries, DiffKind::ExcessOutcome, format!("[{}]", t.join(" ")));
            }
        }
    }
    entries.sort();
    StructuralDiff { entries }
}

/// Result of the random-exploration baseline.
#[derive(Clone, Debug)]
pub struct BaselineReport {
    pub learned: LearnedModel,
    pub steps: u64,
}

const BASELINE_WALK: usize = 20;

/// Uniformly random grounded executions in restarting walks from the
/// initial state. Preconditions are the lifted literals constant across all
/// successes with pairwise-distinct arguments; effects come from delta
/// lifting and maximum likelihood.
pub fn random_baseline<S: Sdma + ?Sized>(h: &mut S, step_budget: u64, seed: u64) -> Result<BaselineReport, SdmaError> {
    let vocab = h.vocabulary().clone();
    let mut model = CandidateModel::initialize(&vocab.types.name, &vocab.types.types, vocab.predicates(), &vocab.capabilities);
    let mut store = ObservationStore::default();
    let groundings: Vec<(String, Vec<String>)> = vocab
        .capabilities
        .iter()
        .flat_map(|c| vocab.bindings(c).into_iter().map(move |a| (c.name.clone(), a)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = h.initial_state();
    let mut zeta = Vec::new();
    let mut s = init.clone();
    let start = h.steps();
    let mut k = 0;
    while !groundings.is_empty() && h.steps() - start < step_budget {
        if k % BASELINE_WALK == 0 {
            s = init.clone();
        }
        k += 1;
        let (cap, args) = &groundings[rng.gen_range(0..groundings.len())];
        let t = h.execute(&s, cap, args)?;
        if t.success {
            s = t.s_prime.clone();
        }
        zeta.push(t);
    }
    for sig in &vocab.capabilities {
        let lits: Vec<LiftedAtom> = instantiated_literals(sig, vocab.predicates());
        let succ: Vec<&Transition> =
            zeta.iter().filter(|t| t.success && t.capability == sig.name && injective(&t.args)).collect();
        if succ.is_empty() {
            continue;
        }
        for l in lits {
            let vals: BTreeSet<bool> = succ.iter().map(|t| t.s.contains(&bind_atom(&l, &sig.params, &t.args))).collect();
            let a = match (vals.len(), vals.contains(&true)) {
                (1, true) => Annotation::True,
                (1, false) => Annotation::False,
                _ => Annotation::Ignored,
            };
            model.set(&Location { capability: sig.name.clone(), slot: Slot::Pre, literal: l }, a);
        }
    }
    harvest_effects(&mut store, &mut model, &zeta);
    // an ill-typed literal is constantly false, never a meaningful condition
    for (l, a) in model.annotations.iter_mut() {
        if l.slot == Slot::Pre && *a == Annotation::False {
            let sig = vocab.signature(&l.capability).unwrap();
            let p = vocab.types.predicate(&l.literal.predicate).unwrap();
            let typed = l.literal.args.iter().zip(&p.param_types).all(|(x, t)| {
                sig.params.iter().find(|(n, _)| n == x).is_some_and(|(_, pt)| vocab.types.is_subtype(pt, t))
            });
            if !typed {
                *a = Annotation::Ignored;
            }
        }
    }
    Ok(BaselineReport { learned: fit_from_store(&model, &store), steps: h.steps() - start })
}
