use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Root of every type hierarchy.
pub const OBJECT: &str = "object";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub name: String,
    pub param_types: Vec<String>,
}

impl PredicateSchema {
    pub fn arity(&self) -> usize {
        self.param_types.len()
    }
}

/// A predicate applied to capability parameter names (stored without `?`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LiftedAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl LiftedAtom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        LiftedAtom {
            predicate: predicate.to_string(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for LiftedAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " ?{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub objects: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: &str, objects: &[&str]) -> Self {
        GroundAtom {
            predicate: predicate.to_string(),
            objects: objects.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for o in &self.objects {
            write!(f, " {o}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal<A> {
    pub atom: A,
    pub positive: bool,
}

pub type LiftedLiteral = Literal<LiftedAtom>;

impl<A> Literal<A> {
    pub fn pos(atom: A) -> Self {
        Literal { atom, positive: true }
    }
    pub fn neg(atom: A) -> Self {
        Literal { atom, positive: false }
    }
}

/// Propositional formula over atoms of type `A`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formula<A> {
    And(Vec<Formula<A>>),
    Or(Vec<Formula<A>>),
    Not(Box<Formula<A>>),
    Atom(A),
}

impl<A> Formula<A> {
    pub fn truth() -> Self {
        Formula::And(Vec::new())
    }

    pub fn from_literals<I: IntoIterator<Item = Literal<A>>>(lits: I) -> Self {
        Formula::And(
            lits.into_iter()
                .map(|l| {
                    if l.positive {
                        Formula::Atom(l.atom)
                    } else {
                        Formula::Not(Box::new(Formula::Atom(l.atom)))
                    }
                })
                .collect(),
        )
    }

    /// The literals of a conjunction of literals, flattening nested `and`.
    /// `None` if the formula contains `or` or negates a compound formula.
    pub fn conjunctive_literals(&self) -> Option<Vec<Literal<A>>>
    where
        A: Clone,
    {
        let mut out = Vec::new();
        fn walk<A: Clone>(f: &Formula<A>, out: &mut Vec<Literal<A>>) -> bool {
            match f {
                Formula::And(items) => items.iter().all(|i| walk(i, out)),
                Formula::Atom(a) => {
                    out.push(Literal::pos(a.clone()));
                    true
                }
                Formula::Not(inner) => match inner.as_ref() {
                    Formula::Atom(a) => {
                        out.push(Literal::neg(a.clone()));
                        true
                    }
                    _ => false,
                },
                Formula::Or(_) => false,
            }
        }
        walk(self, &mut out).then_some(out)
    }

    pub fn atoms(&self) -> Vec<&A> {
        let mut out = Vec::new();
        fn walk<'a, A>(f: &'a Formula<A>, out: &mut Vec<&'a A>) {
            match f {
                Formula::And(items) | Formula::Or(items) => items.iter().for_each(|i| walk(i, out)),
                Formula::Not(inner) => walk(inner, out),
                Formula::Atom(a) => out.push(a),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn map<B>(&self, f: &mut impl FnMut(&A) -> B) -> Formula<B> {
        match self {
            Formula::And(items) => Formula::And(items.iter().map(|i| i.map(f)).collect()),
            Formula::Or(items) => Formula::Or(items.iter().map(|i| i.map(f)).collect()),
            Formula::Not(inner) => Formula::Not(Box::new(inner.map(f))),
            Formula::Atom(a) => Formula::Atom(f(a)),
        }
    }

    /// Closed-world evaluation given a truth assignment for atoms.
    pub fn eval(&self, truth: &impl Fn(&A) -> bool) -> bool {
        match self {
            Formula::And(items) => items.iter().all(|i| i.eval(truth)),
            Formula::Or(items) => items.iter().any(|i| i.eval(truth)),
            Formula::Not(inner) => !inner.eval(truth),
            Formula::Atom(a) => truth(a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEffect {
    pub condition: Formula<LiftedAtom>,
    pub add: BTreeSet<LiftedAtom>,
    pub delete: BTreeSet<LiftedAtom>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct EffectOutcome {
    /// `None` in FOND mode.
    pub probability: Option<f64>,
    pub add: BTreeSet<LiftedAtom>,
    pub delete: BTreeSet<LiftedAtom>,
    pub conditional: Vec<ConditionalEffect>,
}

impl EffectOutcome {
    pub fn is_empty(&self) -> bool {
        self.add.is_empty() && self.delete.is_empty() && self.conditional.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Probabilistic,
    Fond,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapabilitySchema {
    pub name: String,
    /// (name without `?`, type)
    pub params: Vec<(String, String)>,
    pub precondition: Formula<LiftedAtom>,
    pub outcomes: Vec<EffectOutcome>,
    pub mode: Mode,
}

impl CapabilitySchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn signature(&self) -> CapabilitySignature {
        CapabilitySignature {
            name: self.name.clone(),
            params: self.params.clone(),
        }
    }
}

/// Name and typed parameter list of a capability, the only part visible
/// through the black-box interface.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CapabilitySignature {
    pub name: String,
    pub params: Vec<(String, String)>,
}

impl CapabilitySignature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub requirements: Vec<String>,
    /// (type, parent) in declaration order; `object` is implicit.
    pub types: Vec<(String, String)>,
    pub predicates: Vec<PredicateSchema>,
    pub capabilities: Vec<CapabilitySchema>,
}

impl DomainSpec {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn capability(&self, name: &str) -> Option<&CapabilitySchema> {
        self.capabilities.iter().find(|c| c.name == name)
    }

    pub fn has_type(&self, t: &str) -> bool {
        t == OBJECT || self.types.iter().any(|(n, _)| n == t)
    }

    pub fn parent(&self, t: &str) -> Option<&str> {
        self.types.iter().find(|(n, _)| n == t).map(|(_, p)| p.as_str())
    }

    /// Whether `sub` equals `sup` or descends from it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        let mut cur = sub;
        for _ in 0..=self.types.len() + 1 {
            if cur == sup {
                return true;
            }
            match self.parent(cur) {
                Some(p) if p != cur => cur = p,
                _ => return sup == OBJECT,
            }
        }
        false
    }

    pub fn signatures(&self) -> Vec<CapabilitySignature> {
        self.capabilities.iter().map(CapabilitySchema::signature).collect()
    }
}

/// Closed-world state: the set of true ground atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbstractState(pub BTreeSet<GroundAtom>);

impl AbstractState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, a: &GroundAtom) -> bool {
        self.0.contains(a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundAtom> {
        self.0.iter()
    }
}

impl FromIterator<GroundAtom> for AbstractState {
    fn from_iter<I: IntoIterator<Item = GroundAtom>>(iter: I) -> Self {
        AbstractState(iter.into_iter().collect())
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub domain_name: String,
    /// (object, type) in declaration order.
    pub objects: Vec<(String, String)>,
    pub init: AbstractState,
    pub goal: Formula<GroundAtom>,
}

impl ProblemSpec {
    pub fn object_type(&self, o: &str) -> Option<&str> {
        self.objects.iter().find(|(n, _)| n == o).map(|(_, t)| t.as_str())
    }
}
