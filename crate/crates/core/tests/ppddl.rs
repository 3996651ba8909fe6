use std::collections::BTreeSet;

use qace_core::bench::{load_benchmark, names};
use qace_core::ppddl::*;

#[path = "support/goldens.rs"]
mod goldens;
use goldens::*;

#[test]
fn pick_item_matches_fixture() {
    let d = parse_domain(PICK_ITEM).unwrap();
    let c = d.capability("pick-item").unwrap();
    let expected = pick_item_fixture();
    assert_eq!(*c, expected);
}

#[test]
fn pick_item_fond_form() {
    let text = PICK_ITEM
        .replace(":probabilistic-effects", ":non-deterministic")
        .replace("(probabilistic\n     0.7 ", "(oneof\n     ")
        .replace("     0.2 ", "     ")
        .replace("     0.1 (and))))", "     )))");
    let d = parse_domain(&text).unwrap();
    let c = d.capability("pick-item").unwrap();
    assert_eq!(c.mode, Mode::Fond);
    assert_eq!(c.outcomes.len(), 2);
    assert!(c.outcomes.iter().all(|o| o.probability.is_none()));
    assert_eq!(c.outcomes[1].delete, set(&[atom("has-charge", &[])]));
}

#[test]
fn driver_domain_matches_fixture() {
    let b = load_benchmark("driver").unwrap();
    assert_eq!(b.domain, driver_fixture());
}

#[test]
fn driver_problem_matches_fixture() {
    let b = load_benchmark("driver").unwrap();
    assert_eq!(b.train, driver_problem_fixture());
    assert_eq!(b.train.init.len(), 13);
}

#[test]
fn serializer_round_trips_benchmarks() {
    for name in names() {
        let b = load_benchmark(&name).unwrap();
        let back = parse_domain(&domain_text(&b.domain)).unwrap();
        assert_eq!(back, b.domain, "{name}");
        for p in std::iter::once(&b.train).chain(&b.tests) {
            assert_eq!(parse_problem(&problem_text(p), &b.domain).unwrap(), *p, "{name}/{}", p.name);
        }
    }
}

#[test]
fn residual_branch_is_added() {
    let text = r#"(define (domain d) (:requirements :probabilistic-effects)
      (:predicates (p) (q))
      (:action a :parameters () :precondition (p) :effect (probabilistic 1/4 (q) 0.5 (not (p)))))"#;
    let d = parse_domain(text).unwrap();
    let ps: Vec<f64> = d.capabilities[0].outcomes.iter().map(|o| o.probability.unwrap()).collect();
    assert_eq!(ps, vec![0.25, 0.5, 0.25]);
    assert!(d.capabilities[0].outcomes[2].is_empty());
}

#[test]
fn nested_probabilistic_blocks_multiply() {
    let text = r#"(define (domain d) (:requirements :probabilistic-effects)
      (:predicates (p) (q) (r))
      (:action a :parameters () :precondition (and)
        :effect (and (r) (probabilistic 0.5 (p)) (probabilistic 0.4 (q)))))"#;
    let d = parse_domain(text).unwrap();
    let outs = &d.capabilities[0].outcomes;
    assert_eq!(outs.len(), 4);
    let total: f64 = outs.iter().map(|o| o.probability.unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(outs.iter().all(|o| o.add.contains(&atom("r", &[]))));
    let pq = outs.iter().find(|o| o.add.len() == 3).unwrap();
    assert!((pq.probability.unwrap() - 0.2).abs() < 1e-12);
}

fn err(text: &str) -> ParseError {
    parse_domain(text).unwrap_err()
}

#[test]
fn errors_carry_positions() {
    let e = err("(define (domain d)\n  (:predicates (p))\n  (:action a :parameters () :precondition (q) :effect (p)))");
    assert!(matches!(e, ParseError::UndeclaredPredicate { .. }), "{e:?}");
    assert_eq!(e.pos().line, 3);

    let e = err("(define (domain d) (:requirements :fluents))");
    assert!(matches!(e, ParseError::UnknownRequirement { .. }));

    let e = err("(define (domain d) (:predicates (p ?x))\n (:action a :parameters (?y) :precondition (p ?z) :effect (and)))");
    assert!(matches!(e, ParseError::UndeclaredParameter { .. }));
    assert_eq!(e.pos().line, 2);

    let e = err("(define (domain d) (:predicates (p ?x)) (:action a :parameters (?y) :precondition (p) :effect (and)))");
    assert!(matches!(e, ParseError::ArityMismatch { .. }));

    let e = err("(define (domain d) (:predicates (p ?x - thing)))");
    assert!(matches!(e, ParseError::UndeclaredType { .. }));

    let e = err("(define (domain d) (:predicates (p)");
    assert!(matches!(e, ParseError::Syntax { .. }));
}

#[test]
fn rejects_bad_probabilities_and_mixed_modes() {
    let e = err("(define (domain d) (:predicates (p)) (:action a :parameters () :effect (probabilistic 0.7 (p) 0.6 (not (p)))))");
    assert!(matches!(e, ParseError::Invalid { .. }), "{e:?}");
    let e = err("(define (domain d) (:predicates (p) (q)) (:action a :parameters () :effect (and (oneof (p) (q)) (probabilistic 0.5 (p)))))");
    assert!(matches!(e, ParseError::Invalid { .. }), "{e:?}");
}

#[test]
fn problem_checks() {
    let b = load_benchmark("driver").unwrap();
    let base = "(define (problem p) (:domain driver-agent) (:objects a b - location) (:init {}))";
    assert!(parse_problem(&base.replace("{}", "(vehicle-at a)"), &b.domain).is_ok());
    let e = parse_problem(&base.replace("{}", "(vehicle-at c)"), &b.domain).unwrap_err();
    assert!(matches!(e, ParseError::UndeclaredObject { .. }), "{e:?}");
    let e = parse_problem(&base.replace("{}", "(not (vehicle-at a))"), &b.domain).unwrap_err();
    assert!(matches!(e, ParseError::Invalid { .. } | ParseError::Syntax { .. }), "{e:?}");
    let e = parse_problem(&base.replace("driver-agent", "other"), &b.domain).unwrap_err();
    assert!(matches!(e, ParseError::Invalid { .. }), "{e:?}");
}

#[test]
fn grounding_respects_types() {
    let b = load_benchmark("warehouse").unwrap();
    for c in &b.domain.capabilities {
        for g in ground_capability(&b.domain, c, &b.train.objects) {
            for (a, (_, t)) in g.args.iter().zip(&c.params) {
                let ot = b.train.object_type(a).unwrap();
                assert!(b.domain.is_subtype(ot, t));
            }
        }
    }
    let atoms = ground_atoms(&b.domain, &b.train.objects);
    assert!(atoms.iter().all(|a| is_well_typed(&b.domain, &b.train, a)));
    assert!(atoms.len() < 1_000_000);
}

#[test]
fn instantiated_literals_follow_parameter_subsets() {
    let sig = CapabilitySignature { name: "move-vehicle".into(), params: vec![("src".into(), OBJECT.into()), ("dest".into(), OBJECT.into())] };
    let preds = vec![PredicateSchema { name: "connected".into(), param_types: vec![OBJECT.into(), OBJECT.into()] }];
    let lits: BTreeSet<String> = instantiated_literals(&sig, &preds).iter().map(|l| l.to_string()).collect();
    let want: BTreeSet<String> =
        ["(connected ?src ?dest)", "(connected ?dest ?src)", "(connected ?src ?src)", "(connected ?dest ?dest)"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    assert_eq!(lits, want);
}
