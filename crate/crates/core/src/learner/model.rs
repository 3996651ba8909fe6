use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ppddl::{
    instantiated_literals, CapabilitySchema, CapabilitySignature, DomainSpec, EffectOutcome, Formula, LiftedAtom,
    Literal, Mode, PredicateSchema,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    Pre,
    Eff,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::Pre => "pre",
            Slot::Eff => "eff",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Annotation {
    True,
    False,
    Ignored,
    Undetermined,
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Annotation::True => "T",
            Annotation::False => "F",
            Annotation::Ignored => "I",
            Annotation::Undetermined => "U",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub capability: String,
    pub slot: Slot,
    pub literal: LiftedAtom,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.capability, self.slot, self.literal)
    }
}

/// Lifted add/delete sets of one observed outcome.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LiftedDelta {
    pub add: BTreeSet<LiftedAtom>,
    pub delete: BTreeSet<LiftedAtom>,
}

impl LiftedDelta {
    pub fn size(&self) -> usize {
        self.add.len() + self.delete.len()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("location {0} is already concretized")]
    AlreadyConcretized(Location),
    #[error("unknown location {0}")]
    UnknownLocation(Location),
}

/// Partial FOND model: one annotation per (capability, slot, literal)
/// plus the outcome sets discovered so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateModel {
    pub domain_name: String,
    pub types: Vec<(String, String)>,
    pub predicates: Vec<PredicateSchema>,
    pub signatures: Vec<CapabilitySignature>,
    pub annotations: BTreeMap<Location, Annotation>,
    /// Discovered outcomes per capability.
    pub outcomes: BTreeMap<String, Vec<LiftedDelta>>,
}

impl CandidateModel {
    /// Every annotation Undetermined, every capability empty.
    pub fn initialize(
        domain_name: &str,
        types: &[(String, String)],
        preds: &[PredicateSchema],
        signatures: &[CapabilitySignature],
    ) -> Self {
        let mut annotations = BTreeMap::new();
        for sig in signatures {
            let lits = instantiated_literals(sig, preds);
            for slot in [Slot::Pre, Slot::Eff] {
                for l in &lits {
                    annotations.insert(
                        Location { capability: sig.name.clone(), slot, literal: l.clone() },
                        Annotation::Undetermined,
                    );
                }
            }
        }
        CandidateModel {
            domain_name: domain_name.to_string(),
            types: types.to_vec(),
            predicates: preds.to_vec(),
            signatures: signatures.to_vec(),
            annotations,
            outcomes: BTreeMap::new(),
        }
    }

    pub fn get(&self, loc: &Location) -> Annotation {
        self.annotations.get(loc).copied().unwrap_or(Annotation::Undetermined)
    }

    pub fn set(&mut self, loc: &Location, a: Annotation) {
        self.annotations.insert(loc.clone(), a);
    }

    pub fn undetermined(&self) -> usize {
        self.annotations.values().filter(|a| **a == Annotation::Undetermined).count()
    }

    pub fn signature(&self, name: &str) -> Option<&CapabilitySignature> {
        self.signatures.iter().find(|s| s.name == name)
    }

    pub fn pre_literals(&self, cap: &str) -> Vec<Literal<LiftedAtom>> {
        self.annotations
            .iter()
            .filter(|(l, _)| l.capability == cap && l.slot == Slot::Pre)
            .filter_map(|(l, a)| match a {
                Annotation::True => Some(Literal::pos(l.literal.clone())),
                Annotation::False => Some(Literal::neg(l.literal.clone())),
                _ => None,
            })
            .collect()
    }

    /// Candidate models M_T, M_F, M_I for an Undetermined location.
    pub fn candidate_triple(&self, loc: &Location) -> Result<[CandidateModel; 3], ModelError> {
        match self.annotations.get(loc) {
            None => return Err(ModelError::UnknownLocation(loc.clone())),
            Some(Annotation::Undetermined) => {}
            Some(_) => return Err(ModelError::AlreadyConcretized(loc.clone())),
        }
        let make = |a| {
            let mut m = self.clone();
            m.set(loc, a);
            m
        };
        Ok([make(Annotation::True), make(Annotation::False), make(Annotation::Ignored)])
    }

    /// Locations whose annotations differ.
    pub fn diff(&self, other: &CandidateModel) -> Vec<Location> {
        let mut out: Vec<Location> = self
            .annotations
            .iter()
            .filter(|(l, a)| other.get(l) != **a)
            .map(|(l, _)| l.clone())
            .collect();
        for (l, a) in &other.annotations {
            if !self.annotations.contains_key(l) && *a != Annotation::Undetermined {
                out.push(l.clone());
            }
        }
        out
    }

    /// The capability as a FOND schema: annotated precondition literals and
    /// the discovered outcomes, with effect annotations applied to every
    /// outcome.
    pub fn fond_capability(&self, sig: &CapabilitySignature) -> CapabilitySchema {
        let pre = self.pre_literals(&sig.name);
        let mut outs: Vec<LiftedDelta> = self.outcomes.get(&sig.name).cloned().unwrap_or_default();
        if outs.is_empty() {
            outs.push(LiftedDelta::default());
        }
        for (l, a) in self.annotations.iter().filter(|(l, _)| l.capability == sig.name && l.slot == Slot::Eff) {
            let lit = &l.literal;
            match a {
                Annotation::True if !outs.iter().any(|o| o.add.contains(lit)) => {
                    for o in &mut outs {
                        o.delete.remove(lit);
                        o.add.insert(lit.clone());
                    }
                }
                Annotation::False if !outs.iter().any(|o| o.delete.contains(lit)) => {
                    for o in &mut outs {
                        o.add.remove(lit);
                        o.delete.insert(lit.clone());
                    }
                }
                _ => {}
            }
        }
        CapabilitySchema {
            name: sig.name.clone(),
            params: sig.params.clone(),
            precondition: Formula::from_literals(pre),
            outcomes: outs
                .into_iter()
                .map(|o| EffectOutcome { probability: None, add: o.add, delete: o.delete, conditional: Vec::new() })
                .collect(),
            mode: Mode::Fond,
        }
    }

    pub fn fond_domain(&self) -> DomainSpec {
        DomainSpec {
            name: self.domain_name.clone(),
            requirements: vec![
                ":strips".into(),
                ":typing".into(),
                ":non-deterministic".into(),
                ":negative-preconditions".into(),
            ],
            types: self.types.clone(),
            predicates: self.predicates.clone(),
            capabilities: self.signatures.iter().map(|s| self.fond_capability(s)).collect(),
        }
    }
}
