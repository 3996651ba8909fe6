//! Outcome tallies and maximum-likelihood probabilities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::effects::{identifying, visible, Observation, ObservationStore};
use super::model::{CandidateModel, LiftedDelta};
use crate::ppddl::{CapabilitySignature, DomainSpec, Mode};

/// Final model with probabilities plus the evidence behind them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedModel {
    pub domain: DomainSpec,
    /// count_c: tallied successful executions per capability.
    pub counts: BTreeMap<String, usize>,
    /// Per-outcome tallies, aligned with the capability's outcomes.
    pub tallies: BTreeMap<String, Vec<usize>>,
    /// Capabilities without any tallied execution; their single outcome
    /// carries no probability.
    pub unobserved: Vec<String>,
}

/// Tallies observations against `outcomes`. Only observations made where
/// every outcome leaves a distinct trace are counted; if that leaves some
/// outcome at zero, observations consistent with exactly one outcome are
/// counted instead.
pub fn tally_outcomes(sig: &CapabilitySignature, outcomes: &[LiftedDelta], obs: &[Observation]) -> Vec<usize> {
    let mut strict = vec![0; outcomes.len()];
    let mut unique = vec![0; outcomes.len()];
    for o in obs {
        let vis: Vec<LiftedDelta> = outcomes.iter().map(|k| visible(k, sig, &o.args, &o.s)).collect();
        let matches: Vec<usize> = (0..outcomes.len()).filter(|&k| vis[k] == o.delta).collect();
        if matches.len() == 1 {
            unique[matches[0]] += 1;
            if identifying(outcomes, sig, &o.args, &o.s) {
                strict[matches[0]] += 1;
            }
        }
    }
    if strict.iter().all(|&n| n > 0) {
        strict
    } else {
        unique
    }
}

/// `P(e | c) = tally(e, c) / count_c`. Outcomes never tallied are dropped.
pub fn fit_probabilities(m: &CandidateModel, tallies: &BTreeMap<String, Vec<usize>>) -> LearnedModel {
    let mut caps = Vec::new();
    let mut counts = BTreeMap::new();
    let mut kept_tallies = BTreeMap::new();
    let mut unobserved = Vec::new();
    for sig in &m.signatures {
        let mut c = m.fond_capability(sig);
        let t = tallies.get(&sig.name).filter(|t| t.len() == c.outcomes.len());
        let total: usize = t.map_or(0, |t| t.iter().sum());
        if total == 0 {
            unobserved.push(sig.name.clone());
            counts.insert(sig.name.clone(), 0);
            c.mode = Mode::Probabilistic;
            caps.push(c);
            continue;
        }
        let t = t.unwrap();
        let mut outs = Vec::new();
        let mut kept = Vec::new();
        for (o, &n) in c.outcomes.drain(..).zip(t) {
            if n > 0 {
                outs.push(crate::ppddl::EffectOutcome { probability: Some(n as f64 / total as f64), ..o });
                kept.push(n);
            }
        }
        c.outcomes = outs;
        c.mode = Mode::Probabilistic;
        counts.insert(sig.name.clone(), total);
        kept_tallies.insert(sig.name.clone(), kept);
        caps.push(c);
    }
    let requirements: Vec<String> =
        [":strips", ":typing", ":probabilistic-effects", ":negative-preconditions"].iter().map(|s| s.to_string()).collect();
    LearnedModel {
        domain: DomainSpec {
            name: m.domain_name.clone(),
            requirements,
            types: m.types.clone(),
            predicates: m.predicates.clone(),
            capabilities: caps,
        },
        counts,
        tallies: kept_tallies,
        unobserved,
    }
}

/// Outcome sets of `m` with effect annotations applied, as lifted deltas.
pub fn final_outcomes(m: &CandidateModel, sig: &CapabilitySignature) -> Vec<LiftedDelta> {
    m.fond_capability(sig)
        .outcomes
        .into_iter()
        .map(|o| LiftedDelta { add: o.add, delete: o.delete })
        .collect()
}

pub fn fit_from_store(m: &CandidateModel, store: &ObservationStore) -> LearnedModel {
    let tallies = m
        .signatures
        .iter()
        .map(|sig| {
            let outs = final_outcomes(m, sig);
            (sig.name.clone(), tally_outcomes(sig, &outs, store.observations(&sig.name)))
        })
        .collect();
    fit_probabilities(m, &tallies)
}
