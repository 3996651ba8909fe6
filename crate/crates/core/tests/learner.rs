use std::collections::BTreeMap;

use qace_core::bench::load_benchmark;
use qace_core::eval::structural_diff;
use qace_core::learner::*;
use qace_core::ppddl::*;
use qace_core::sdma::{QueryResponse, Sdma, SdmaHandle, Transition};

fn atom(p: &str, args: &[&str]) -> LiftedAtom {
    LiftedAtom::new(p, args)
}

fn state(atoms: &[(&str, &[&str])]) -> AbstractState {
    atoms.iter().map(|(p, a)| GroundAtom::new(p, a)).collect()
}

fn driver() -> SdmaHandle {
    let b = load_benchmark("driver").unwrap();
    SdmaHandle::new(b.domain, b.train, 1)
}

fn empty_model(d: &DomainSpec) -> CandidateModel {
    let sigs: Vec<CapabilitySignature> = d.capabilities.iter().map(|c| c.signature()).collect();
    CandidateModel::initialize(&d.name, &d.types, &d.predicates, &sigs)
}

#[test]
fn initial_model_size() {
    for name in ["driver", "cafe", "warehouse", "first-responder", "elevator"] {
        let d = load_benchmark(name).unwrap().domain;
        let m = empty_model(&d);
        // two slots per literal, n^k literals per k-ary predicate
        let expected: usize = d
            .capabilities
            .iter()
            .map(|c| d.predicates.iter().map(|p| 2 * c.params.len().pow(p.arity() as u32)).sum::<usize>())
            .sum();
        assert_eq!(m.undetermined(), expected, "{name}");
        assert!(m.outcomes.is_empty());
        assert!(m.fond_domain().capabilities.iter().all(|c| c.precondition == Formula::And(vec![])));
    }
    assert_eq!(empty_model(&load_benchmark("driver").unwrap().domain).undetermined(), 26);
    let none = CandidateModel::initialize("x", &[], &[PredicateSchema { name: "p".into(), param_types: vec![] }], &[]);
    assert!(none.annotations.is_empty());
}

fn loc(cap: &str, slot: Slot, p: &str, args: &[&str]) -> Location {
    Location { capability: cap.into(), slot, literal: atom(p, args) }
}

#[test]
fn candidate_triple_differs_in_one_location() {
    let m = empty_model(&load_benchmark("driver").unwrap().domain);
    let l = loc("move-vehicle", Slot::Pre, "road", &["from", "to"]);
    let t = m.candidate_triple(&l).unwrap();
    for (k, a) in [Annotation::True, Annotation::False, Annotation::Ignored].into_iter().enumerate() {
        assert_eq!(t[k].get(&l), a);
        assert_eq!(m.diff(&t[k]), vec![l.clone()]);
    }
    assert_eq!(t[0].diff(&t[1]), vec![l.clone()]);
    assert_eq!(t[0].candidate_triple(&l).unwrap_err(), ModelError::AlreadyConcretized(l.clone()));
    let bogus = loc("move-vehicle", Slot::Pre, "road", &["x", "y"]);
    assert_eq!(m.candidate_triple(&bogus).unwrap_err(), ModelError::UnknownLocation(bogus));
}

#[test]
fn two_true_literals_become_conjunctive_precondition() {
    let mut m = empty_model(&load_benchmark("driver").unwrap().domain);
    m.set(&loc("move-vehicle", Slot::Pre, "vehicle-at", &["from"]), Annotation::True);
    m.set(&loc("move-vehicle", Slot::Pre, "not-flattire", &[]), Annotation::True);
    let pre = m.pre_literals("move-vehicle");
    assert_eq!(pre, vec![Literal::pos(atom("not-flattire", &[])), Literal::pos(atom("vehicle-at", &["from"]))]);
}

fn tr(s: &AbstractState, cap: &str, args: &[&str], s2: &AbstractState, ok: bool) -> Transition {
    Transition { s: s.clone(), capability: cap.into(), args: args.iter().map(|a| a.to_string()).collect(), s_prime: s2.clone(), success: ok }
}

fn resp(zeta: Vec<Transition>) -> QueryResponse {
    let n = zeta.len();
    QueryResponse { goal_reached: false, zeta, attempt_lengths: vec![n] }
}

fn cafe_move() -> (CandidateModel, CapabilitySignature) {
    let preds = vec![
        PredicateSchema { name: "has-charge".into(), param_types: vec![] },
        PredicateSchema { name: "robot-at".into(), param_types: vec![OBJECT.into()] },
    ];
    let sig = CapabilitySignature { name: "move-vehicle".into(), params: vec![("frm".into(), OBJECT.into()), ("to".into(), OBJECT.into())] };
    (CandidateModel::initialize("cafe", &[], &preds, std::slice::from_ref(&sig)), sig)
}

#[test]
fn prune_precondition_walkthrough() {
    let (m, _) = cafe_move();
    let hc = loc("move-vehicle", Slot::Pre, "has-charge", &[]);
    let [mt, mf, mi] = m.candidate_triple(&hc).unwrap();
    let s = state(&[("has-charge", &[]), ("robot-at", &["l1"])]);
    let s2 = state(&[("has-charge", &[]), ("robot-at", &["l2"])]);
    // success where has-charge holds: F predicted failure
    assert_eq!(prune(&resp(vec![tr(&s, "move-vehicle", &["l1", "l2"], &s2, true)]), &mt, &mf, &hc), Pruned::Second);
    // failure without has-charge: I predicted success
    let s_nc = state(&[("robot-at", &["l1"])]);
    assert_eq!(prune(&resp(vec![tr(&s_nc, "move-vehicle", &["l1", "l2"], &s_nc, false)]), &mt, &mi, &hc), Pruned::Second);
    // F predicted success there
    assert_eq!(prune(&resp(vec![tr(&s_nc, "move-vehicle", &["l1", "l2"], &s_nc, false)]), &mt, &mf, &hc), Pruned::Second);
    // where both predict the same, or another capability ran, nothing is pruned
    assert_eq!(prune(&resp(vec![tr(&s, "move-vehicle", &["l1", "l2"], &s2, true)]), &mt, &mi, &hc), Pruned::Neither);
    assert_eq!(prune(&resp(vec![tr(&s, "other", &["l1"], &s, false)]), &mt, &mf, &hc), Pruned::Neither);
    assert_eq!(prune(&resp(vec![]), &mt, &mf, &hc), Pruned::Neither);
}

#[test]
fn prune_inconclusive_when_policy_fails_elsewhere() {
    let (mut m, _) = cafe_move();
    m.set(&loc("move-vehicle", Slot::Pre, "has-charge", &[]), Annotation::True);
    let l = loc("move-vehicle", Slot::Pre, "robot-at", &["frm"]);
    let [mt, mf, _] = m.candidate_triple(&l).unwrap();
    // failure caused by the already-known literal: neither model predicted success
    let s = state(&[("robot-at", &["l1"])]);
    assert_eq!(prune(&resp(vec![tr(&s, "move-vehicle", &["l1", "l2"], &s, false)]), &mt, &mf, &l), Pruned::Neither);
}

#[test]
fn prune_effect_true_survives() {
    let (mut m, _) = cafe_move();
    m.set(&loc("move-vehicle", Slot::Pre, "has-charge", &[]), Annotation::True);
    let l = loc("move-vehicle", Slot::Eff, "robot-at", &["to"]);
    let [mt, mf, mi] = m.candidate_triple(&l).unwrap();
    let s = state(&[("has-charge", &[]), ("robot-at", &["l1"])]);
    let s2 = state(&[("has-charge", &[]), ("robot-at", &["l2"])]);
    let r = resp(vec![tr(&s, "move-vehicle", &["l1", "l2"], &s2, true)]);
    assert_eq!(prune(&r, &mt, &mi, &l), Pruned::Second);
    assert_eq!(prune(&r, &mt, &mf, &l), Pruned::Second);
    assert_eq!(prune(&r, &mf, &mi, &l), Pruned::Neither);
}

fn pick_item() -> (CandidateModel, CapabilitySignature) {
    let preds: Vec<PredicateSchema> = [("empty-arm", 0), ("has-charge", 0), ("robot-at", 1), ("at", 2), ("holding", 1)]
        .iter()
        .map(|(n, k)| PredicateSchema { name: n.to_string(), param_types: vec![OBJECT.into(); *k] })
        .collect();
    let sig = CapabilitySignature { name: "pick-item".into(), params: vec![("location".into(), OBJECT.into()), ("item".into(), OBJECT.into())] };
    (CandidateModel::initialize("cafe", &[], &preds, std::slice::from_ref(&sig)), sig)
}

#[test]
fn harvest_pick_item_trace() {
    let (mut m, _) = pick_item();
    let s = state(&[("empty-arm", &[]), ("has-charge", &[]), ("robot-at", &["kitchen"]), ("at", &["kitchen", "cup"])]);
    let picked = state(&[("has-charge", &[]), ("robot-at", &["kitchen"]), ("holding", &["cup"])]);
    let drained = state(&[("empty-arm", &[]), ("robot-at", &["kitchen"]), ("at", &["kitchen", "cup"])]);
    let a = ["kitchen", "cup"];
    let zeta = vec![
        tr(&s, "pick-item", &a, &picked, true),
        tr(&s, "pick-item", &a, &drained, true),
        tr(&s, "pick-item", &a, &s, true),
        tr(&picked, "pick-item", &a, &picked, false),
    ];
    let mut store = ObservationStore::default();
    harvest_effects(&mut store, &mut m, &zeta);
    assert_eq!(store.successes["pick-item"], 3);
    assert_eq!(store.failures["pick-item"], 1);
    let got = &m.outcomes["pick-item"];
    let with = |add: &[LiftedAtom], del: &[LiftedAtom]| LiftedDelta { add: add.iter().cloned().collect(), delete: del.iter().cloned().collect() };
    let mut want = vec![
        with(&[atom("holding", &["item"])], &[atom("empty-arm", &[]), atom("at", &["location", "item"])]),
        with(&[], &[atom("has-charge", &[])]),
        LiftedDelta::default(),
    ];
    want.sort();
    assert_eq!(got, &want);
    let eff = |p: &str, args: &[&str]| m.get(&loc("pick-item", Slot::Eff, p, args));
    assert_eq!(eff("holding", &["item"]), Annotation::True);
    assert_eq!(eff("empty-arm", &[]), Annotation::False);
    assert_eq!(eff("has-charge", &[]), Annotation::False);
    assert_eq!(eff("at", &["location", "item"]), Annotation::False);
    assert_eq!(eff("robot-at", &["location"]), Annotation::Undetermined);
}

#[test]
fn no_change_only_gives_empty_outcome() {
    let (mut m, _) = pick_item();
    let s = state(&[("empty-arm", &[])]);
    let mut store = ObservationStore::default();
    harvest_effects(&mut store, &mut m, &[tr(&s, "pick-item", &["a", "b"], &s, true)]);
    assert_eq!(m.outcomes["pick-item"], vec![LiftedDelta::default()]);
    assert_eq!(m.undetermined(), 2 * (1 + 1 + 2 + 4 + 2));
}

#[test]
fn fit_relative_frequencies() {
    let (mut m, sig) = pick_item();
    let outs = vec![
        LiftedDelta { add: [atom("holding", &["item"])].into(), delete: [atom("empty-arm", &[])].into() },
        LiftedDelta { add: Default::default(), delete: [atom("has-charge", &[])].into() },
        LiftedDelta::default(),
    ];
    m.outcomes.insert(sig.name.clone(), outs);
    let lm = fit_probabilities(&m, &BTreeMap::from([(sig.name.clone(), vec![70, 20, 10])]));
    let ps: Vec<f64> = lm.domain.capabilities[0].outcomes.iter().map(|o| o.probability.unwrap()).collect();
    for (p, q) in ps.iter().zip([0.7, 0.2, 0.1]) {
        assert!((p - q).abs() < 1e-12);
    }
    assert_eq!(lm.counts[&sig.name], 100);
    let lm = fit_probabilities(&m, &BTreeMap::from([(sig.name.clone(), vec![0, 9, 0])]));
    assert_eq!(lm.domain.capabilities[0].outcomes.len(), 1);
    assert_eq!(lm.domain.capabilities[0].outcomes[0].probability, Some(1.0));
    let lm = fit_probabilities(&m, &BTreeMap::new());
    assert_eq!(lm.unobserved, vec![sig.name.clone()]);
    assert!(parse_domain(&domain_text(&lm.domain)).is_ok());
}

fn cfg(seed: u64) -> LearnerConfig {
    LearnerConfig { seed, ..LearnerConfig::default() }
}

#[test]
fn rejects_zero_eta() {
    let mut h = driver();
    let s0 = h.initial_state();
    let e = run_qace(&mut h, s0, &LearnerConfig { eta: 0, ..cfg(1) }).unwrap_err();
    assert!(matches!(e, LearnError::Config(_)));
}

#[test]
fn driver_structure_and_probability() {
    let mut h = driver();
    let s0 = h.initial_state();
    let mut r = run_qace(&mut h, s0, &cfg(3)).unwrap();
    assert!(!r.timed_out);
    assert_eq!(r.initial_undetermined, 26);
    assert_eq!(r.model.undetermined(), 0);
    assert!(r.unresolved.is_empty());
    let truth = load_benchmark("driver").unwrap().domain;
    assert!(structural_diff(&truth, &r.learned.domain).is_empty(), "{:?}", structural_diff(&truth, &r.learned.domain));
    assert_eq!(r.steps, h.steps());

    replay_observations(&mut h, &mut r, 1000).unwrap();
    assert_eq!(r.steps, h.steps());
    let outcomes: usize = r.learned.domain.capabilities.iter().map(|c| c.outcomes.len()).sum();
    assert_eq!(outcomes, 3);
    assert!(r.learned.counts["move-vehicle"] >= 1000);
    let mv = r.learned.domain.capability("move-vehicle").unwrap();
    let flat = mv.outcomes.iter().find(|o| o.delete.contains(&atom("not-flattire", &[]))).unwrap();
    assert!((flat.probability.unwrap() - 0.8).abs() <= 0.05);
    // every counted observation is a real execution
    let executed: usize = r.store.successes.values().sum::<usize>() + r.store.failures.values().sum::<usize>();
    assert!(executed as u64 <= r.steps);
    assert!(r.learned.counts.values().sum::<usize>() <= executed);
}

#[test]
fn audit_is_monotone_and_distinguishing() {
    let b = load_benchmark("warehouse").unwrap();
    let mut h = SdmaHandle::new(b.domain, b.train, 4);
    let s0 = h.initial_state();
    let r = run_qace(&mut h, s0, &cfg(4)).unwrap();
    assert_eq!(r.queries, r.audit.len());
    assert!(r.audit.iter().all(|a| a.distinguishing));
    let mut last: BTreeMap<&str, usize> = BTreeMap::new();
    let mut prev_steps = 0;
    for a in &r.audit {
        let n = a.surviving_mode.len();
        if let Some(&m) = last.get(a.location.as_str()) {
            assert!(n <= m, "{}", a.location);
        }
        last.insert(&a.location, n);
        assert!(a.sdma_steps >= prev_steps);
        prev_steps = a.sdma_steps;
    }
    let sum: usize = r.audit.iter().map(|a| a.transitions).sum();
    assert!(sum as u64 <= r.steps);
}

const TOY: &str = r#"(define (domain toy) (:requirements :strips :negative-preconditions)
  (:predicates (p))
  (:action a :parameters () :precondition (p) :effect (not (p))))"#;

/// Success and successor of `a` under annotations (pre, eff) over one atom.
fn toy_step(pre: Annotation, eff: Annotation, p: bool) -> (bool, bool) {
    let ok = match pre {
        Annotation::True => p,
        Annotation::False => !p,
        _ => true,
    };
    let next = match eff {
        Annotation::True => true,
        Annotation::False => false,
        _ => p,
    };
    (ok, if ok { next } else { p })
}

#[test]
fn toy_domain_matches_brute_force_oracle() {
    let d = parse_domain(TOY).unwrap();
    let p = parse_problem("(define (problem t) (:domain toy) (:init (p)))", &d).unwrap();
    let truth = |s: bool| (s, if s { false } else { s });
    use Annotation::*;
    let all = [True, False, Ignored];
    let consistent: Vec<(Annotation, Annotation)> = all
        .iter()
        .flat_map(|&a| all.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| [true, false].iter().all(|&s| toy_step(a, b, s) == truth(s)))
        .collect();
    assert_eq!(consistent, vec![(True, False)]);
    for seed in 0..5 {
        let mut h = SdmaHandle::new(d.clone(), p.clone(), seed);
        let s0 = h.initial_state();
        let r = run_qace(&mut h, s0, &cfg(seed)).unwrap();
        assert!(r.iterations <= 2);
        assert!(r.queries <= 6);
        let pre = r.model.get(&loc("a", Slot::Pre, "p", &[]));
        let eff = r.model.get(&loc("a", Slot::Eff, "p", &[]));
        assert!(consistent.contains(&(pre, eff)), "{pre} {eff}");
    }
}

#[test]
fn capabilities_never_executed_stay_empty() {
    let b = load_benchmark("warehouse").unwrap();
    let m = empty_model(&b.domain);
    let fd = m.fond_domain();
    assert_eq!(fd.capabilities.len(), b.domain.capabilities.len());
    assert!(fd.capabilities.iter().all(|c| c.outcomes.len() == 1 && c.outcomes[0].add.is_empty() && c.outcomes[0].delete.is_empty()));
}

#[test]
fn exploration_finds_witnesses_for_every_capability() {
    for name in ["driver", "cafe", "warehouse"] {
        let b = load_benchmark(name).unwrap();
        let mut h = SdmaHandle::new(b.domain.clone(), b.train, 2);
        let s0 = h.initial_state();
        let r = run_qace(&mut h, s0, &cfg(2)).unwrap();
        for c in &b.domain.capabilities {
            assert!(r.pool.injective_count(&c.name) > 0, "{name} {}", c.name);
        }
        assert!(r.pool.states.len() > 1);
    }
}

#[test]
fn every_capability_reaches_sample_floor() {
    let b = load_benchmark("cafe").unwrap();
    let mut h = SdmaHandle::new(b.domain.clone(), b.train, 12);
    let s0 = h.initial_state();
    let c = cfg(12);
    let r = run_qace(&mut h, s0, &c).unwrap();
    for cap in &b.domain.capabilities {
        let floor = 2 * instantiated_literals(&cap.signature(), &b.domain.predicates).len() * c.eta;
        assert!(r.learned.counts[&cap.name] >= floor, "{}: {} < {floor}", cap.name, r.learned.counts[&cap.name]);
    }
    assert!(structural_diff(&b.domain, &r.learned.domain).is_empty());
}
