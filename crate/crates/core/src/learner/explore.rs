//! State pool and directed exploration.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use rand::Rng;

use super::effects::injective;
use super::{LearnError, Learner};
use crate::ppddl::AbstractState;
use crate::sdma::{Sdma, Transition};

/// Explored states plus, per capability, the (state, args) pairs where it
/// was observed succeeding.
#[derive(Clone, Debug, Default)]
pub struct StatePool {
    pub states: Vec<AbstractState>,
    index: HashMap<AbstractState, usize>,
    /// (state index, args, args are pairwise distinct)
    pub witnesses: BTreeMap<String, Vec<(usize, Vec<String>, bool)>>,
    seen_pairs: HashSet<(String, usize)>,
    seen_witnesses: HashSet<(String, usize, Vec<String>)>,
    pub expanded: HashSet<usize>,
}

impl StatePool {
    pub fn new(s0: AbstractState) -> Self {
        let mut p = StatePool::default();
        p.intern(s0);
        p
    }

    fn intern(&mut self, s: AbstractState) -> (usize, bool) {
        if let Some(&i) = self.index.get(&s) {
            return (i, false);
        }
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s);
        (i, true)
    }

    /// Adds `t`; true if it brought a new state or a new successful
    /// (state, capability) pair.
    pub fn add(&mut self, t: &Transition) -> bool {
        let (i, mut novel) = self.intern(t.s.clone());
        if t.success {
            let (_, fresh) = self.intern(t.s_prime.clone());
            novel |= fresh;
            novel |= self.seen_pairs.insert((t.capability.clone(), i));
            if self.seen_witnesses.insert((t.capability.clone(), i, t.args.clone())) {
                self.witnesses
                    .entry(t.capability.clone())
                    .or_default()
                    .push((i, t.args.clone(), injective(&t.args)));
            }
        }
        novel
    }

    pub fn index_of(&self, s: &AbstractState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Witnesses with pairwise-distinct arguments.
    pub fn injective_witnesses(&self, cap: &str) -> Vec<(usize, Vec<String>)> {
        self.witnesses
            .get(cap)
            .map(|w| w.iter().filter(|x| x.2).map(|x| (x.0, x.1.clone())).collect())
            .unwrap_or_default()
    }

    pub fn injective_count(&self, cap: &str) -> usize {
        self.witnesses.get(cap).map_or(0, |w| w.iter().filter(|x| x.2).count())
    }

    /// States where `cap` succeeded.
    pub fn states_for(&self, cap: &str) -> Vec<&AbstractState> {
        let set: BTreeSet<usize> = self.witnesses.get(cap).map(|w| w.iter().map(|x| x.0).collect()).unwrap_or_default();
        set.into_iter().map(|i| &self.states[i]).collect()
    }
}

const WALK_LENGTH: usize = 20;

impl<S: Sdma + ?Sized> Learner<'_, S> {
    fn satisfied(&self, targets: &BTreeSet<String>) -> bool {
        targets.iter().all(|c| self.pool.injective_count(c) >= self.cfg.witnesses_per_capability)
    }

    /// Groundings to try for `cap` in `s`: all of them while its
    /// precondition is still being learned, otherwise those where the
    /// learned precondition holds.
    fn exploration_groundings(&self, cap: &str, s: &AbstractState) -> Vec<Vec<String>> {
        let all = &self.groundings[cap];
        if !self.pre_learned(cap) {
            return all.clone();
        }
        all.iter().filter(|a| self.learned_pre_holds(cap, a, s)).cloned().collect()
    }

    /// Breadth-first expansion of pooled states until every target has
    /// enough injective witnesses, switching to random walks after
    /// `walk_limit` steps without novelty.
    pub(crate) fn directed_explore(&mut self, targets: &BTreeSet<String>) -> Result<(), LearnError> {
        if self.satisfied(targets) {
            return Ok(());
        }
        let caps: Vec<String> = self.vocab.capabilities.iter().map(|c| c.name.clone()).collect();
        let mut queue: VecDeque<usize> = (0..self.pool.states.len()).filter(|i| !self.pool.expanded.contains(i)).collect();
        let mut since_novel = 0;
        'bfs: while let Some(i) = queue.pop_front() {
            if self.satisfied(targets) || since_novel >= self.cfg.walk_limit || self.timed_out() {
                break;
            }
            if !self.pool.expanded.insert(i) {
                continue;
            }
            let s = self.pool.states[i].clone();
            for cap in &caps {
                for args in self.exploration_groundings(cap, &s) {
                    let before = self.pool.states.len();
                    let (_, novel) = self.exec(&s, cap, &args)?;
                    if novel {
                        since_novel = 0;
                    } else {
                        since_novel += 1;
                    }
                    queue.extend(before..self.pool.states.len());
                    if self.satisfied(targets) {
                        break 'bfs;
                    }
                }
            }
        }
        if !self.satisfied(targets) {
            let cap = self.cfg.walk_limit * 20;
            self.random_walks(cap, Some(targets))?;
        }
        self.flush_effects();
        Ok(())
    }

    /// Uniformly random executions in restarting walks from pooled states.
    pub(crate) fn random_walks(&mut self, steps: usize, targets: Option<&BTreeSet<String>>) -> Result<(), LearnError> {
        let caps: Vec<String> = self.vocab.capabilities.iter().map(|c| c.name.clone()).filter(|c| !self.groundings[c].is_empty()).collect();
        if caps.is_empty() {
            return Ok(());
        }
        let mut done = 0;
        while done < steps && !self.timed_out() {
            let mut s = self.pool.states[self.rng.gen_range(0..self.pool.states.len())].clone();
            for _ in 0..WALK_LENGTH {
                let cap = &caps[self.rng.gen_range(0..caps.len())];
                let g = &self.groundings[cap];
                let args = g[self.rng.gen_range(0..g.len())].clone();
                let (t, _) = self.exec(&s, cap, &args)?;
                done += 1;
                if t.success {
                    s = t.s_prime;
                }
                if targets.is_some_and(|t| self.satisfied(t)) {
                    return Ok(());
                }
            }
        }
        Ok(())
    }
}
