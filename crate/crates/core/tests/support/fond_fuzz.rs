//! Random FOND instances and an exhaustive solvability oracle.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use qace_core::fond::FondProblem;
use qace_core::ppddl::GroundAtom;
use qace_core::task::{Bits, IAction, IFormula, IOutcome, Universe};

pub fn universe(n: usize) -> Universe {
    Universe::new((0..n).map(|i| GroundAtom::new(&format!("p{i}"), &[])).collect())
}

pub fn conj(lits: &[(u32, bool)]) -> IFormula {
    IFormula::And(lits.iter().map(|&(a, v)| IFormula::Lit(a, v)).collect())
}

pub fn random_problem(rng: &mut ChaCha8Rng) -> FondProblem {
    let n = rng.gen_range(2..=10);
    let n_actions = rng.gen_range(1..=8);
    let mut actions = Vec::new();
    for k in 0..n_actions {
        let mut pre = Vec::new();
        for a in 0..n as u32 {
            if rng.gen_bool(0.25) {
                pre.push((a, rng.gen_bool(0.6)));
            }
        }
        let n_out = rng.gen_range(1..=3);
        let outcomes = (0..n_out)
            .map(|_| {
                let mut add = Vec::new();
                let mut del = Vec::new();
                for a in 0..n as u32 {
                    match rng.gen_range(0..6) {
                        0 => add.push(a),
                        1 => del.push(a),
                        _ => {}
                    }
                }
                IOutcome { probability: None, add, del, cond: Vec::new() }
            })
            .collect();
        actions.push(IAction { name: format!("a{k}"), args: vec![], pre: conj(&pre), outcomes });
    }
    let mut initial = Bits::new(n);
    for a in 0..n as u32 {
        initial.set(a, rng.gen_bool(0.5));
    }
    let goal_lits: Vec<(u32, bool)> = (0..rng.gen_range(1..=3)).map(|_| (rng.gen_range(0..n as u32), rng.gen_bool(0.5))).collect();
    FondProblem::new(universe(n), actions, initial, conj(&goal_lits))
}

/// Least fixpoint over all states: a state is winning if it satisfies the
/// goal or some applicable action leads only to states already winning.
pub fn oracle_solvable(p: &FondProblem) -> bool {
    let n = p.universe.len();
    let states: Vec<Bits> = (0..1u64 << n)
        .map(|m| {
            let mut b = Bits::new(n);
            for i in 0..n {
                b.set(i as u32, m >> i & 1 == 1);
            }
            b
        })
        .collect();
    let mut win: HashSet<Bits> = states.iter().filter(|s| p.goal.eval(s)).cloned().collect();
    loop {
        let mut grew = false;
        for s in &states {
            if win.contains(s) {
                continue;
            }
            let ok = (0..p.actions.len())
                .filter(|&a| p.actions[a].pre.eval(s))
                .any(|a| p.successors(s, a).iter().all(|n| win.contains(n)));
            if ok {
                win.insert(s.clone());
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    win.contains(&p.initial)
}
