use std::io::Write;
use std::sync::{Arc, Mutex};

use qace_core::bench::load_benchmark;
use qace_core::ppddl::*;
use qace_core::sdma::*;

fn driver(seed: u64) -> SdmaHandle {
    let b = load_benchmark("driver").unwrap();
    SdmaHandle::new(b.domain, b.train, seed)
}

fn args(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn vocabulary_hides_model() {
    let h = driver(1);
    let v = h.vocabulary();
    assert!(v.types.capabilities.is_empty());
    assert_eq!(v.capabilities.len(), 2);
    assert_eq!(v.predicates().len(), 4);
    assert_eq!(v.objects.len(), 6);
    assert!(v.is_well_typed(&GroundAtom::new("road", &["l-1-1", "l-1-2"])));
    assert!(!v.is_well_typed(&GroundAtom::new("road", &["l-1-1"])));
}

#[test]
fn failure_leaves_state_and_counts_a_step() {
    let mut h = driver(1);
    let s = h.initial_state();
    let t = h.execute(&s, "move-vehicle", &args(&["l-1-1", "l-1-3"])).unwrap();
    assert!(!t.success);
    assert_eq!(t.s_prime, s);
    assert_eq!(h.steps(), 1);
    let t = h.execute(&s, "move-vehicle", &args(&["l-1-1", "l-1-2"])).unwrap();
    assert!(t.success);
    assert!(t.s_prime.contains(&GroundAtom::new("vehicle-at", &["l-1-2"])));
    assert!(consistent_with_ground_truth(&h, &t));
}

#[test]
fn rejects_bad_requests() {
    let mut h = driver(1);
    let s = h.initial_state();
    assert!(matches!(h.execute(&s, "fly", &[]), Err(SdmaError::UnknownCapability(_))));
    assert!(matches!(h.execute(&s, "change-tire", &args(&["nowhere"])), Err(SdmaError::IllTypedArguments { .. })));
    let mut bad = s.clone();
    bad.0.insert(GroundAtom::new("vehicle-at", &["mars"]));
    assert!(matches!(h.execute(&bad, "change-tire", &args(&["l-1-1"])), Err(SdmaError::IllTypedState(_))));
    assert_eq!(h.steps(), 0);
}

#[test]
fn flat_tire_frequency() {
    let mut h = driver(7);
    let s = h.initial_state();
    let n = 20_000;
    let flats = (0..n)
        .filter(|_| {
            let t = h.execute(&s, "move-vehicle", &args(&["l-1-1", "l-1-2"])).unwrap();
            !t.s_prime.contains(&GroundAtom::new("not-flattire", &[]))
        })
        .count();
    let p = flats as f64 / n as f64;
    // 4.5 standard deviations at n = 20000
    assert!((p - 0.8).abs() < 0.013, "{p}");
}

fn one_rule(s: &AbstractState, cap: &str, a: &[&str], terminal: bool) -> Policy {
    let mut pi = Policy::default();
    pi.rules.insert(s.clone(), PolicyRule { capability: cap.into(), args: args(a), terminal });
    pi
}

#[test]
fn policy_attempts_and_stops() {
    let mut h = driver(2);
    let s = h.initial_state();
    let q = PolicyQuery { s_i: s.clone(), pi: one_rule(&s, "move-vehicle", &["l-1-1", "l-1-2"], true), goal: Formula::Or(vec![]), alpha: 2, eta: 4 };
    let r = h.run_policy(&q).unwrap();
    assert_eq!(r.attempt_lengths, vec![1, 1, 1, 1]);
    assert!(r.goal_reached);
    assert_eq!(r.attempts().len(), 4);
    assert_eq!(h.steps(), 4);

    // a failing rule ends the attempt
    let q = PolicyQuery { s_i: s.clone(), pi: one_rule(&s, "change-tire", &["l-1-1"], false), goal: Formula::Or(vec![]), alpha: 5, eta: 2 };
    let r = h.run_policy(&q).unwrap();
    assert_eq!(r.attempt_lengths, vec![1, 1]);
    assert!(r.zeta.iter().all(|t| !t.success));
    assert!(!r.goal_reached);

    // a goal that already holds costs nothing
    let q = PolicyQuery { s_i: s.clone(), pi: Policy::default(), goal: Formula::And(vec![]), alpha: 5, eta: 3 };
    let r = h.run_policy(&q).unwrap();
    assert!(r.goal_reached && r.zeta.is_empty());

    // alpha bounds each attempt
    let mut pi = Policy::default();
    let mut cur = s.clone();
    for (a, b) in [("l-1-1", "l-2-1"), ("l-2-1", "l-3-1")] {
        pi.rules.insert(cur.clone(), PolicyRule { capability: "move-vehicle".into(), args: args(&[a, b]), terminal: false });
        cur.0.remove(&GroundAtom::new("vehicle-at", &[a]));
        cur.0.insert(GroundAtom::new("vehicle-at", &[b]));
    }
    let q = PolicyQuery { s_i: s, pi, goal: Formula::Or(vec![]), alpha: 1, eta: 1 };
    assert_eq!(h.run_policy(&q).unwrap().zeta.len(), 1);
}

#[derive(Clone, Default)]
struct Sink(Arc<Mutex<Vec<u8>>>);

impl Write for Sink {
    fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(b);
        Ok(b.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn trace_lines_are_json() {
    let sink = Sink::default();
    let mut h = driver(1).with_trace(Box::new(sink.clone()));
    let s = h.initial_state();
    h.execute(&s, "move-vehicle", &args(&["l-1-1", "l-1-2"])).unwrap();
    h.execute(&s, "change-tire", &args(&["l-1-1"])).unwrap();
    let text = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["capability"], "move-vehicle");
    assert_eq!(lines[1]["success"], false);
    assert_eq!(lines[1]["step"], 2);
}

#[test]
fn test_transitions_are_reproducible_and_possible() {
    let b = load_benchmark("warehouse").unwrap();
    let sample = |seed| {
        let mut h = SdmaHandle::new(b.domain.clone(), b.train.clone(), seed);
        h.sample_test_transitions(&b.tests, 300)
    };
    let a = sample(5);
    assert_eq!(a, sample(5));
    assert_ne!(a, sample(6));
    assert_eq!(a.len(), 300);
    let checker = SdmaHandle::new(b.domain.clone(), b.tests[0].clone(), 0);
    assert!(a.iter().all(|t| t.success && consistent_with_ground_truth(&checker, t)));
}
