//! Observed transitions, delta lifting and outcome-set discovery.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::model::LiftedDelta;
use crate::ppddl::{bind_atom, AbstractState, CapabilitySignature, GroundAtom, LiftedAtom};
use crate::sdma::Transition;

/// Ground add/delete sets of a transition.
pub fn ground_delta(s: &AbstractState, s_prime: &AbstractState) -> (BTreeSet<GroundAtom>, BTreeSet<GroundAtom>) {
    let add = s_prime.0.difference(&s.0).cloned().collect();
    let del = s.0.difference(&s_prime.0).cloned().collect();
    (add, del)
}

pub fn injective(args: &[String]) -> bool {
    let set: BTreeSet<&String> = args.iter().collect();
    set.len() == args.len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LiftError {
    RepeatedArguments,
    ForeignObject(GroundAtom),
}

fn lift_atom(a: &GroundAtom, sig: &CapabilitySignature, args: &[String]) -> Result<LiftedAtom, LiftError> {
    let mut out = Vec::with_capacity(a.objects.len());
    for o in &a.objects {
        let i = args.iter().position(|x| x == o).ok_or_else(|| LiftError::ForeignObject(a.clone()))?;
        out.push(sig.params[i].0.clone());
    }
    Ok(LiftedAtom { predicate: a.predicate.clone(), args: out })
}

/// Lifts the delta of a successful transition through its argument binding.
pub fn lift_delta(
    sig: &CapabilitySignature,
    args: &[String],
    s: &AbstractState,
    s_prime: &AbstractState,
) -> Result<LiftedDelta, LiftError> {
    if !injective(args) {
        return Err(LiftError::RepeatedArguments);
    }
    let (add, del) = ground_delta(s, s_prime);
    let mut d = LiftedDelta::default();
    for a in &add {
        d.add.insert(lift_atom(a, sig, args)?);
    }
    for a in &del {
        d.delete.insert(lift_atom(a, sig, args)?);
    }
    Ok(d)
}

/// The part of outcome `o` that would show up as a change from `s`.
pub fn visible(o: &LiftedDelta, sig: &CapabilitySignature, args: &[String], s: &AbstractState) -> LiftedDelta {
    let mut d = LiftedDelta::default();
    for a in &o.add {
        if !s.contains(&bind_atom(a, &sig.params, args)) {
            d.add.insert(a.clone());
        }
    }
    for a in &o.delete {
        if s.contains(&bind_atom(a, &sig.params, args)) {
            d.delete.insert(a.clone());
        }
    }
    d
}

/// Whether every outcome leaves a distinct trace from `s`.
pub fn identifying(outcomes: &[LiftedDelta], sig: &CapabilitySignature, args: &[String], s: &AbstractState) -> bool {
    let seen: BTreeSet<LiftedDelta> = outcomes.iter().map(|o| visible(o, sig, args, s)).collect();
    seen.len() == outcomes.len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub s: AbstractState,
    pub args: Vec<String>,
    pub delta: LiftedDelta,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostic {
    pub capability: String,
    pub args: Vec<String>,
    pub reason: LiftError,
}

/// Successful, liftable executions per capability.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ObservationStore {
    pub by_capability: BTreeMap<String, Vec<Observation>>,
    /// Successful executions per capability, liftable or not.
    pub successes: BTreeMap<String, usize>,
    pub failures: BTreeMap<String, usize>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ObservationStore {
    /// Records `t`; returns true if it was a liftable success.
    pub fn record(&mut self, sig: &CapabilitySignature, t: &Transition) -> bool {
        if !t.success {
            *self.failures.entry(t.capability.clone()).or_default() += 1;
            return false;
        }
        *self.successes.entry(t.capability.clone()).or_default() += 1;
        match lift_delta(sig, &t.args, &t.s, &t.s_prime) {
            Ok(delta) => {
                self.by_capability
                    .entry(t.capability.clone())
                    .or_default()
                    .push(Observation { s: t.s.clone(), args: t.args.clone(), delta });
                true
            }
            Err(reason) => {
                if self.diagnostics.len() < 1000 {
                    self.diagnostics.push(Diagnostic { capability: t.capability.clone(), args: t.args.clone(), reason });
                }
                false
            }
        }
    }

    pub fn observations(&self, cap: &str) -> &[Observation] {
        self.by_capability.get(cap).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Outcome set from maximal deltas: distinct lifted deltas in descending
/// size, each kept if some observation of it is not explained by the
/// outcomes kept so far.
pub fn discover_outcomes(sig: &CapabilitySignature, obs: &[Observation]) -> Vec<LiftedDelta> {
    let mut by_delta: BTreeMap<&LiftedDelta, Vec<&Observation>> = BTreeMap::new();
    for o in obs {
        by_delta.entry(&o.delta).or_default().push(o);
    }
    let mut deltas: Vec<&LiftedDelta> = by_delta.keys().copied().collect();
    deltas.sort_by(|a, b| b.size().cmp(&a.size()).then_with(|| a.cmp(b)));
    let mut kept: Vec<LiftedDelta> = Vec::new();
    for d in deltas {
        let unexplained = by_delta[d]
            .iter()
            .any(|o| kept.iter().all(|k| visible(k, sig, &o.args, &o.s) != o.delta));
        if unexplained {
            kept.push(d.clone());
        }
    }
    kept.sort();
    kept
}
