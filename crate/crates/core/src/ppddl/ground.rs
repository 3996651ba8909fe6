use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::types::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundConditional {
    pub condition: Formula<GroundAtom>,
    pub add: Vec<GroundAtom>,
    pub delete: Vec<GroundAtom>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundOutcome {
    pub probability: Option<f64>,
    pub add: Vec<GroundAtom>,
    pub delete: Vec<GroundAtom>,
    pub conditional: Vec<GroundConditional>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundCapability {
    pub name: String,
    pub args: Vec<String>,
    pub precondition: Formula<GroundAtom>,
    pub outcomes: Vec<GroundOutcome>,
}

/// Every positive lifted atom over `c`'s parameters, repetition allowed,
/// ignoring types. Predicates in the given order, argument tuples in
/// odometer order over the parameter list.
pub fn instantiated_literals(c: &CapabilitySignature, preds: &[PredicateSchema]) -> Vec<LiftedAtom> {
    let names: Vec<&str> = c.params.iter().map(|(n, _)| n.as_str()).collect();
    let mut out = Vec::new();
    for p in preds {
        for tuple in tuples(names.len(), p.arity()) {
            out.push(LiftedAtom {
                predicate: p.name.clone(),
                args: tuple.iter().map(|&i| names[i].to_string()).collect(),
            });
        }
    }
    out
}

/// All `len`-tuples over `0..n`.
pub fn tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![0; len];
    loop {
        out.push(cur.clone());
        let mut k = len;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < n {
                break;
            }
            cur[k] = 0;
        }
    }
}

pub fn bind_atom(a: &LiftedAtom, params: &[(String, String)], args: &[String]) -> GroundAtom {
    GroundAtom {
        predicate: a.predicate.clone(),
        objects: a
            .args
            .iter()
            .map(|v| {
                let i = params.iter().position(|(n, _)| n == v).expect("argument is a declared parameter");
                args[i].clone()
            })
            .collect(),
    }
}

pub fn objects_of_type<'a>(domain: &DomainSpec, objects: &'a [(String, String)], t: &str) -> Vec<&'a str> {
    objects
        .iter()
        .filter(|(_, ot)| domain.is_subtype(ot, t))
        .map(|(o, _)| o.as_str())
        .collect()
}

/// Type-consistent argument tuples for a parameter list.
pub fn bindings(domain: &DomainSpec, params: &[(String, String)], objects: &[(String, String)]) -> Vec<Vec<String>> {
    let pools: Vec<Vec<&str>> = params.iter().map(|(_, t)| objects_of_type(domain, objects, t)).collect();
    let mut out = vec![Vec::new()];
    for pool in &pools {
        let mut next = Vec::with_capacity(out.len() * pool.len());
        for prefix in &out {
            for o in pool {
                let mut v = prefix.clone();
                v.push(o.to_string());
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub fn ground_with(c: &CapabilitySchema, args: &[String]) -> GroundCapability {
    let bind = |a: &LiftedAtom| bind_atom(a, &c.params, args);
    let set = |s: &BTreeSet<LiftedAtom>| s.iter().map(bind).collect::<Vec<_>>();
    GroundCapability {
        name: c.name.clone(),
        args: args.to_vec(),
        precondition: c.precondition.map(&mut |a| bind(a)),
        outcomes: c
            .outcomes
            .iter()
            .map(|o| GroundOutcome {
                probability: o.probability,
                add: set(&o.add),
                delete: set(&o.delete),
                conditional: o
                    .conditional
                    .iter()
                    .map(|ce| GroundConditional {
                        condition: ce.condition.map(&mut |a| bind(a)),
                        add: set(&ce.add),
                        delete: set(&ce.delete),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// All type-consistent groundings of `c` over `objects`.
pub fn ground_capability(domain: &DomainSpec, c: &CapabilitySchema, objects: &[(String, String)]) -> Vec<GroundCapability> {
    bindings(domain, &c.params, objects).iter().map(|args| ground_with(c, args)).collect()
}

pub fn holds(s: &AbstractState, f: &Formula<GroundAtom>) -> bool {
    f.eval(&|a| s.contains(a))
}

/// `s' = (s \ deletes) ∪ adds`; conditional effects are evaluated against `s`.
pub fn apply_outcome(s: &AbstractState, o: &GroundOutcome) -> AbstractState {
    let mut next = s.clone();
    let fired: Vec<&GroundConditional> = o.conditional.iter().filter(|c| holds(s, &c.condition)).collect();
    for a in o.delete.iter().chain(fired.iter().flat_map(|c| c.delete.iter())) {
        next.0.remove(a);
    }
    for a in o.add.iter().chain(fired.iter().flat_map(|c| c.add.iter())) {
        next.0.insert(a.clone());
    }
    next
}

pub fn is_well_typed(domain: &DomainSpec, problem: &ProblemSpec, a: &GroundAtom) -> bool {
    let Some(p) = domain.predicate(&a.predicate) else {
        return false;
    };
    p.arity() == a.objects.len()
        && a.objects.iter().zip(&p.param_types).all(|(o, t)| {
            problem.object_type(o).is_some_and(|ot| domain.is_subtype(ot, t))
        })
}

/// Every well-typed ground atom of the problem.
pub fn ground_atoms(domain: &DomainSpec, objects: &[(String, String)]) -> Vec<GroundAtom> {
    let mut out = Vec::new();
    for p in &domain.predicates {
        let params: Vec<(String, String)> =
            p.param_types.iter().enumerate().map(|(i, t)| (i.to_string(), t.clone())).collect();
        for args in bindings(domain, &params, objects) {
            out.push(GroundAtom { predicate: p.name.clone(), objects: args });
        }
    }
    out
}
