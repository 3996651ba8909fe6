//! Hand-written structures for the pick-item and driver goldens.

use std::collections::BTreeSet;

use qace_core::ppddl::*;

pub const PICK_ITEM: &str = r#"
(define (domain cafe-fragment)
  (:requirements :strips :probabilistic-effects)
  (:predicates (empty-arm) (has-charge) (robot-at ?l) (at ?l ?i) (holding ?i))
  (:capability pick-item
   :parameters (?location ?item)
   :precondition (and
     (empty-arm) (has-charge)
     (robot-at ?location)
     (at ?location ?item))
   :effect (and (probabilistic
     0.7 (and (not (empty-arm))
          (not (at ?location ?item))
          (holding ?item))
     0.2 (and (not (has-charge)))
     0.1 (and))))          ; No-change
)
"#;

pub fn atom(p: &str, args: &[&str]) -> LiftedAtom {
    LiftedAtom::new(p, args)
}

pub fn set(items: &[LiftedAtom]) -> BTreeSet<LiftedAtom> {
    items.iter().cloned().collect()
}

pub fn outcome(p: f64, add: &[LiftedAtom], delete: &[LiftedAtom]) -> EffectOutcome {
    EffectOutcome { probability: Some(p), add: set(add), delete: set(delete), conditional: Vec::new() }
}

pub fn pick_item_fixture() -> CapabilitySchema {
    CapabilitySchema {
        name: "pick-item".into(),
        params: vec![("location".into(), OBJECT.into()), ("item".into(), OBJECT.into())],
        precondition: Formula::And(vec![
            Formula::Atom(atom("empty-arm", &[])),
            Formula::Atom(atom("has-charge", &[])),
            Formula::Atom(atom("robot-at", &["location"])),
            Formula::Atom(atom("at", &["location", "item"])),
        ]),
        outcomes: vec![
            outcome(0.7, &[atom("holding", &["item"])], &[atom("empty-arm", &[]), atom("at", &["location", "item"])]),
            outcome(0.2, &[], &[atom("has-charge", &[])]),
            outcome(0.1, &[], &[]),
        ],
        mode: Mode::Probabilistic,
    }
}

pub fn driver_fixture() -> DomainSpec {
    let loc = |n: &str| (n.to_string(), "location".to_string());
    DomainSpec {
        name: "driver-agent".into(),
        requirements: vec![":typing".into(), ":strips".into(), ":probabilistic-effects".into()],
        types: vec![("location".into(), OBJECT.into())],
        predicates: vec![
            PredicateSchema { name: "vehicle-at".into(), param_types: vec!["location".into()] },
            PredicateSchema { name: "spare-in".into(), param_types: vec!["location".into()] },
            PredicateSchema { name: "road".into(), param_types: vec!["location".into(), "location".into()] },
            PredicateSchema { name: "not-flattire".into(), param_types: vec![] },
        ],
        capabilities: vec![
            CapabilitySchema {
                name: "move-vehicle".into(),
                params: vec![loc("from"), loc("to")],
                precondition: Formula::And(vec![
                    Formula::Atom(atom("vehicle-at", &["from"])),
                    Formula::Atom(atom("road", &["from", "to"])),
                    Formula::Atom(atom("not-flattire", &[])),
                ]),
                outcomes: vec![
                    outcome(0.8, &[atom("vehicle-at", &["to"])], &[atom("vehicle-at", &["from"]), atom("not-flattire", &[])]),
                    outcome(0.2, &[atom("vehicle-at", &["to"])], &[atom("vehicle-at", &["from"])]),
                ],
                mode: Mode::Probabilistic,
            },
            CapabilitySchema {
                name: "change-tire".into(),
                params: vec![loc("l")],
                precondition: Formula::And(vec![
                    Formula::Atom(atom("spare-in", &["l"])),
                    Formula::Atom(atom("vehicle-at", &["l"])),
                    Formula::Not(Box::new(Formula::Atom(atom("not-flattire", &[])))),
                ]),
                outcomes: vec![outcome(1.0, &[atom("not-flattire", &[])], &[atom("spare-in", &["l"])])],
                mode: Mode::Probabilistic,
            },
        ],
    }
}

pub fn driver_problem_fixture() -> ProblemSpec {
    let gatom = |p: &str, objs: &[&str]| GroundAtom::new(p, objs);
    let locs = ["l-1-1", "l-1-2", "l-1-3", "l-2-1", "l-2-2", "l-3-1"];
    let roads = [
        ("l-1-1", "l-1-2"),
        ("l-1-2", "l-1-3"),
        ("l-1-1", "l-2-1"),
        ("l-1-2", "l-2-2"),
        ("l-2-1", "l-1-2"),
        ("l-2-2", "l-1-3"),
        ("l-2-1", "l-3-1"),
        ("l-3-1", "l-2-2"),
    ];
    let mut init: AbstractState = roads.iter().map(|(a, b)| gatom("road", &[a, b])).collect();
    init.0.insert(gatom("vehicle-at", &["l-1-1"]));
    init.0.insert(gatom("not-flattire", &[]));
    for l in ["l-2-1", "l-2-2", "l-3-1"] {
        init.0.insert(gatom("spare-in", &[l]));
    }
    ProblemSpec {
        name: "driver-agent-9".into(),
        domain_name: "driver-agent".into(),
        objects: locs.iter().map(|l| (l.to_string(), "location".to_string())).collect(),
        init,
        goal: Formula::And(vec![Formula::Atom(gatom("vehicle-at", &["l-1-3"]))]),
    }
}
