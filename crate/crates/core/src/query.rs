//! Compilation of a candidate-model pair into a FOND problem whose strong
//! solution is a distinguishing policy.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::fond::{policy_depth, solve_strong_with, FondProblem, SolveOptions, SolveOutcome};
use crate::learner::model::CandidateModel;
use crate::ppddl::{
    apply_outcome, ground_atoms, ground_with, holds, AbstractState, CapabilitySchema, ConditionalEffect, DomainSpec,
    EffectOutcome, Formula, GroundAtom, LiftedAtom, Literal, Mode, PredicateSchema, ProblemSpec,
};
use crate::sdma::{Policy, PolicyQuery, PolicyRule};
use crate::task::GroundedDomain;

/// The 0-ary predicate marking a one-sided precondition.
pub const GOAL: &str = "goal";

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("models do not differ")]
    SameModel,
    #[error("models differ in {0} locations, expected exactly one")]
    MultipleDifferences(usize),
    #[error("capability `{0}` has a different signature or outcome count in the two models")]
    Mismatch(String),
    #[error("no distinguishing policy from this state ({0})")]
    NoQueryFromState(String),
}

pub fn tagged(name: &str, tag: &str) -> String {
    format!("{name}_{tag}")
}

fn rename_atom(a: &LiftedAtom, tag: &str) -> LiftedAtom {
    LiftedAtom { predicate: tagged(&a.predicate, tag), args: a.args.clone() }
}

fn renamed_literals(c: &CapabilitySchema, tag: &str) -> Result<Vec<Literal<LiftedAtom>>, QueryError> {
    let lits = c.precondition.conjunctive_literals().ok_or_else(|| QueryError::Mismatch(c.name.clone()))?;
    Ok(lits.into_iter().map(|l| Literal { atom: rename_atom(&l.atom, tag), positive: l.positive }).collect())
}

fn lit_formula(l: &Literal<LiftedAtom>) -> Formula<LiftedAtom> {
    if l.positive {
        Formula::Atom(l.atom.clone())
    } else {
        Formula::Not(Box::new(Formula::Atom(l.atom.clone())))
    }
}

/// `pre(own) ∧ ¬pre(other)` with the negation expanded into a disjunction
/// of negated conjuncts. `None` when the other precondition is empty, so
/// its negation is unsatisfiable.
fn one_sided(own: &[Literal<LiftedAtom>], other: &[Literal<LiftedAtom>]) -> Option<Formula<LiftedAtom>> {
    let negs: Vec<Formula<LiftedAtom>> =
        other.iter().map(|l| lit_formula(&Literal { atom: l.atom.clone(), positive: !l.positive })).collect();
    let mut parts: Vec<Formula<LiftedAtom>> = own.iter().map(lit_formula).collect();
    match negs.len() {
        0 => return None,
        1 => parts.extend(negs),
        _ => parts.push(Formula::Or(negs)),
    }
    Some(Formula::And(parts))
}

fn renamed_set(s: &BTreeSet<LiftedAtom>, tag: &str) -> BTreeSet<LiftedAtom> {
    s.iter().map(|a| rename_atom(a, tag)).collect()
}

/// The combined capability `c_ij`.
pub fn combine_capability(ci: &CapabilitySchema, cj: &CapabilitySchema) -> Result<CapabilitySchema, QueryError> {
    if ci.name != cj.name || ci.params != cj.params || ci.outcomes.len() != cj.outcomes.len() {
        return Err(QueryError::Mismatch(ci.name.clone()));
    }
    let pi = renamed_literals(ci, "i")?;
    let pj = renamed_literals(cj, "j")?;
    let conj = |ls: &[Literal<LiftedAtom>]| Formula::And(ls.iter().map(lit_formula).collect());
    let precondition = Formula::Or(vec![conj(&pi), conj(&pj)]);
    let both = Formula::And(pi.iter().chain(pj.iter()).map(lit_formula).collect());
    let goal_add: BTreeSet<LiftedAtom> = [LiftedAtom { predicate: GOAL.into(), args: Vec::new() }].into();
    let mut outcomes = Vec::new();
    for (oi, oj) in ci.outcomes.iter().zip(&cj.outcomes) {
        let mut add = renamed_set(&oi.add, "i");
        add.extend(renamed_set(&oj.add, "j"));
        let mut delete = renamed_set(&oi.delete, "i");
        delete.extend(renamed_set(&oj.delete, "j"));
        let mut conditional = vec![ConditionalEffect { condition: both.clone(), add, delete }];
        for cond in [one_sided(&pi, &pj), one_sided(&pj, &pi)].into_iter().flatten() {
            conditional.push(ConditionalEffect { condition: cond, add: goal_add.clone(), delete: BTreeSet::new() });
        }
        outcomes.push(EffectOutcome { probability: None, add: BTreeSet::new(), delete: BTreeSet::new(), conditional });
    }
    Ok(CapabilitySchema {
        name: tagged(&ci.name, "ij"),
        params: ci.params.clone(),
        precondition,
        outcomes,
        mode: Mode::Fond,
    })
}

/// Lifted combined domain over `P_i ⊎ P_j ∪ {(goal)}`.
pub fn combine_domains(mi: &DomainSpec, mj: &DomainSpec) -> Result<DomainSpec, QueryError> {
    let mut predicates = Vec::new();
    for tag in ["i", "j"] {
        for p in &mi.predicates {
            predicates.push(PredicateSchema { name: tagged(&p.name, tag), param_types: p.param_types.clone() });
        }
    }
    predicates.push(PredicateSchema { name: GOAL.into(), param_types: Vec::new() });
    let mut capabilities = Vec::new();
    for ci in &mi.capabilities {
        let cj = mj.capability(&ci.name).ok_or_else(|| QueryError::Mismatch(ci.name.clone()))?;
        capabilities.push(combine_capability(ci, cj)?);
    }
    Ok(DomainSpec {
        name: tagged(&mi.name, "ij"),
        requirements: vec![
            ":strips".into(),
            ":typing".into(),
            ":non-deterministic".into(),
            ":conditional-effects".into(),
            ":disjunctive-preconditions".into(),
            ":negative-preconditions".into(),
        ],
        types: mi.types.clone(),
        predicates,
        capabilities,
    })
}

fn tag_state(s0: &AbstractState) -> AbstractState {
    let mut out = AbstractState::new();
    for tag in ["i", "j"] {
        for a in s0.iter() {
            out.0.insert(GroundAtom { predicate: tagged(&a.predicate, tag), objects: a.objects.clone() });
        }
    }
    out
}

/// `(goal) ∨ ⋁_p (p_i ∧ ¬p_j) ∨ (¬p_i ∧ p_j)` over every well-typed ground atom.
pub fn divergence_goal(base: &DomainSpec, objects: &[(String, String)]) -> Formula<GroundAtom> {
    let mut parts = vec![Formula::Atom(GroundAtom { predicate: GOAL.into(), objects: Vec::new() })];
    for a in ground_atoms(base, objects) {
        let ai = Formula::Atom(GroundAtom { predicate: tagged(&a.predicate, "i"), objects: a.objects.clone() });
        let aj = Formula::Atom(GroundAtom { predicate: tagged(&a.predicate, "j"), objects: a.objects.clone() });
        parts.push(Formula::And(vec![ai.clone(), Formula::Not(Box::new(aj.clone()))]));
        parts.push(Formula::And(vec![Formula::Not(Box::new(ai)), aj]));
    }
    Formula::Or(parts)
}

#[derive(Clone, Debug)]
pub struct CombinedTask {
    pub domain: DomainSpec,
    pub problem: ProblemSpec,
    pub fond: FondProblem,
}

/// Requires the two models to differ at exactly one location.
pub fn combine_models(
    mi: &CandidateModel,
    mj: &CandidateModel,
    s0: &AbstractState,
    objects: &[(String, String)],
) -> Result<CombinedTask, QueryError> {
    match mi.diff(mj).len() {
        0 => return Err(QueryError::SameModel),
        1 => {}
        n => return Err(QueryError::MultipleDifferences(n)),
    }
    combine_fond_domains(&mi.fond_domain(), &mj.fond_domain(), s0, objects)
}

pub fn combine_fond_domains(
    di: &DomainSpec,
    dj: &DomainSpec,
    s0: &AbstractState,
    objects: &[(String, String)],
) -> Result<CombinedTask, QueryError> {
    let domain = combine_domains(di, dj)?;
    let problem = ProblemSpec {
        name: "query".into(),
        domain_name: domain.name.clone(),
        objects: objects.to_vec(),
        init: tag_state(s0),
        goal: divergence_goal(di, objects),
    };
    let g = GroundedDomain::new(&domain, objects);
    let initial = g
        .universe
        .encode(&problem.init)
        .ok_or_else(|| QueryError::NoQueryFromState("initial state outside vocabulary".into()))?;
    let goal = g.universe.formula(&problem.goal);
    let fond = FondProblem::new(g.universe, g.actions, initial, goal);
    Ok(CombinedTask { domain, problem, fond })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratedQuery {
    pub query: PolicyQuery,
    pub depth: usize,
    pub expansions: usize,
}

fn project_i(s: &AbstractState) -> AbstractState {
    s.iter()
        .filter_map(|a| {
            a.predicate
                .strip_suffix("_i")
                .map(|p| GroundAtom { predicate: p.to_string(), objects: a.objects.clone() })
        })
        .collect()
}

/// Plans a distinguishing policy from `s0` and projects it onto the
/// original vocabulary. `alpha = 2 * depth`.
pub fn generate_query(
    mi: &CandidateModel,
    mj: &CandidateModel,
    s0: &AbstractState,
    objects: &[(String, String)],
    eta: usize,
    opts: &SolveOptions,
) -> Result<GeneratedQuery, QueryError> {
    let task = combine_models(mi, mj, s0, objects)?;
    let report = solve_strong_with(&task.fond, opts);
    let pi = match report.outcome {
        SolveOutcome::Solved(pi) => pi,
        SolveOutcome::Unsolvable => return Err(QueryError::NoQueryFromState("unsolvable".into())),
        SolveOutcome::BudgetExceeded => return Err(QueryError::NoQueryFromState("budget exceeded".into())),
    };
    let depth = policy_depth(&task.fond, &pi);
    let mut policy = Policy::default();
    for (bits, e) in &pi.mapping {
        let a = &task.fond.actions[e.action];
        let terminal = task.fond.successors(bits, e.action).iter().all(|n| task.fond.goal.eval(n));
        let key = project_i(&task.fond.universe.decode(bits));
        policy.rules.entry(key).or_insert(PolicyRule {
            capability: a.name.strip_suffix("_ij").unwrap_or(&a.name).to_string(),
            args: a.args.clone(),
            terminal,
        });
    }
    Ok(GeneratedQuery {
        query: PolicyQuery { s_i: s0.clone(), pi: policy, goal: Formula::Or(Vec::new()), alpha: 2 * depth, eta },
        depth,
        expansions: report.expansions,
    })
}

/// Symbolic co-simulation of `q.pi` under both models with outcomes paired
/// by index: true iff every branch reaches a step where the models
/// disagree on applicability or on the successor state.
pub fn co_simulate(di: &DomainSpec, dj: &DomainSpec, q: &PolicyQuery) -> bool {
    fn walk(di: &DomainSpec, dj: &DomainSpec, q: &PolicyQuery, si: &AbstractState, sj: &AbstractState, left: usize) -> bool {
        if si != sj {
            return true;
        }
        if left == 0 {
            return false;
        }
        let Some(rule) = q.pi.rules.get(si) else {
            return false;
        };
        let (Some(ci), Some(cj)) = (di.capability(&rule.capability), dj.capability(&rule.capability)) else {
            return false;
        };
        let gi = ground_with(ci, &rule.args);
        let gj = ground_with(cj, &rule.args);
        let (pi, pj) = (holds(si, &gi.precondition), holds(sj, &gj.precondition));
        if pi != pj {
            return true;
        }
        if !pi || gi.outcomes.len() != gj.outcomes.len() {
            return false;
        }
        gi.outcomes
            .iter()
            .zip(&gj.outcomes)
            .all(|(oi, oj)| walk(di, dj, q, &apply_outcome(si, oi), &apply_outcome(sj, oj), left - 1))
    }
    walk(di, dj, q, &q.s_i, &q.s_i, q.alpha.max(1))
}
