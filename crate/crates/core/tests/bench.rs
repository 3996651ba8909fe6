use std::fs;

use qace_core::bench::*;
use qace_core::ppddl::*;

const SIZES: [(&str, usize, usize); 5] =
    [("cafe", 5, 4), ("warehouse", 8, 4), ("driver", 4, 2), ("first-responder", 13, 10), ("elevator", 12, 10)];

#[test]
fn bundled_sizes() {
    assert_eq!(names().len(), 5);
    for (name, preds, caps) in SIZES {
        let b = load_benchmark(name).unwrap();
        assert_eq!(b.domain.predicates.len(), preds, "{name}");
        assert_eq!(b.domain.capabilities.len(), caps, "{name}");
        assert!(b.train.objects.len() <= MAX_TRAIN_OBJECTS);
        assert!(!b.tests.is_empty());
        for t in &b.tests {
            assert_eq!(t.objects.len(), 2 * b.train.objects.len(), "{name}");
        }
    }
}

#[test]
fn unknown_benchmark() {
    assert!(matches!(load_benchmark("blocksworld"), Err(BenchError::Unknown(_))));
}

#[test]
fn bundled_benchmarks_are_identifiable() {
    for (name, _, _) in SIZES {
        let b = load_benchmark(name).unwrap();
        let r = verify_identifiability(&b.domain, &b.train, 20_000);
        assert_eq!(r.len(), b.domain.capabilities.len());
        for (cap, v) in &r {
            assert!(v.is_witness(), "{name}/{cap}: {v:?}");
        }
    }
}

const C4: &str = r#"(define (domain c4) (:requirements :strips :probabilistic-effects)
  (:predicates (p1) (p2) (p3) (p4))
  (:action c :parameters () :precondition (and (p1) (p2) (not (p3)))
    :effect (probabilistic 0.2 (and (p3) (p4)) 0.5 (and (p3) (not (p2))) 0.3 (and (p3) (not (p4)) (not (p2))))))"#;

fn problem(d: &DomainSpec, init: &str) -> ProblemSpec {
    parse_problem(&format!("(define (problem q) (:domain c4) (:init {init}))"), d).unwrap()
}

#[test]
fn worked_identifiability_example() {
    let d = parse_domain(C4).unwrap();
    let r = verify_identifiability(&d, &problem(&d, "(p1) (p2) (p4)"), 100);
    let want: AbstractState = [GroundAtom::new("p1", &[]), GroundAtom::new("p2", &[]), GroundAtom::new("p4", &[])].into_iter().collect();
    assert_eq!(r["c"], Identifiability::Witness { state: want, args: vec![] });
    // without p4 the second and third outcomes coincide
    let r = verify_identifiability(&d, &problem(&d, "(p1) (p2)"), 100);
    assert!(!r["c"].is_witness());
}

#[test]
fn identical_outcomes_are_never_identifiable() {
    let src = r#"(define (domain same) (:requirements :strips :probabilistic-effects)
      (:predicates (p) (q))
      (:action twin :parameters () :precondition (p) :effect (probabilistic 0.5 (q) 0.5 (q))))"#;
    let d = parse_domain(src).unwrap();
    let p = parse_problem("(define (problem s) (:domain same) (:init (p)))", &d).unwrap();
    match &verify_identifiability(&d, &p, 100)["twin"] {
        Identifiability::Counterexample { states_searched, .. } => assert!(*states_searched >= 1),
        w => panic!("{w:?}"),
    }
}

fn scratch(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("qace-bench-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(dir.join("d")).unwrap();
    dir
}

fn write_tree(dir: &std::path::Path, test_objects: &str) {
    let b = load_benchmark("driver").unwrap();
    fs::write(dir.join("d/domain.pddl"), &b.sources[0].1).unwrap();
    fs::write(dir.join("d/train.pddl"), &b.sources[1].1).unwrap();
    let test = format!(
        "(define (problem t) (:domain driver-agent) (:objects {test_objects} - location) (:init (vehicle-at {})))",
        test_objects.split(' ').next().unwrap()
    );
    fs::write(dir.join("d/test.pddl"), test).unwrap();
    let m = Manifest {
        benchmarks: vec![ManifestEntry {
            name: "mine".into(),
            dir: "d".into(),
            train: "train.pddl".into(),
            test: vec!["test.pddl".into()],
            predicates: 4,
            capabilities: 2,
        }],
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string(&m).unwrap()).unwrap();
}

#[test]
fn external_tree_checks_test_size() {
    let dir = scratch("size");
    write_tree(&dir, "a b c");
    match load_benchmark_from(&dir, "mine") {
        Err(BenchError::TestSize { expected, found, .. }) => assert_eq!((expected, found), (12, 3)),
        other => panic!("{:?}", other.map(|b| b.name)),
    }
    let twelve: Vec<String> = (0..12).map(|i| format!("x{i}")).collect();
    write_tree(&dir, &twelve.join(" "));
    assert_eq!(load_benchmark_from(&dir, "mine").unwrap().tests[0].objects.len(), 12);
    fs::write(dir.join("d/domain.pddl"), "(define (domain broken)").unwrap();
    assert!(matches!(load_benchmark_from(&dir, "mine"), Err(BenchError::Parse { .. })));
    let _ = fs::remove_dir_all(&dir);
}
