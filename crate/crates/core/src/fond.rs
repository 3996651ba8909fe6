//! Strong (acyclic) solutions of grounded FOND problems by depth-first
//! AND/OR search with memoization and iterative deepening.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write;

use crate::ppddl::AbstractState;
use crate::task::{Bits, IAction, IFormula, Universe};

#[derive(Clone, Debug)]
pub struct FondProblem {
    pub universe: Universe,
    /// Sorted by (name, args); outcomes in declaration order.
    pub actions: Vec<IAction>,
    pub initial: Bits,
    pub goal: IFormula,
}

impl FondProblem {
    pub fn new(universe: Universe, mut actions: Vec<IAction>, initial: Bits, goal: IFormula) -> Self {
        actions.sort_by(|a, b| (&a.name, &a.args).cmp(&(&b.name, &b.args)));
        FondProblem { universe, actions, initial, goal }
    }

    pub fn successors(&self, s: &Bits, a: usize) -> Vec<Bits> {
        self.actions[a].outcomes.iter().map(|o| o.apply(s)).collect()
    }

    pub fn applicable(&self, s: &Bits) -> impl Iterator<Item = usize> + '_ {
        let s = s.clone();
        (0..self.actions.len()).filter(move |&i| self.actions[i].pre.eval(&s))
    }

    /// Reachable-state count, `None` past `limit`.
    pub fn reachable_count(&self, limit: usize) -> Option<usize> {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(self.initial.clone());
        queue.push_back(self.initial.clone());
        while let Some(s) = queue.pop_front() {
            for a in self.applicable(&s).collect::<Vec<_>>() {
                for n in self.successors(&s, a) {
                    if seen.insert(n.clone()) {
                        if seen.len() > limit {
                            return None;
                        }
                        queue.push_back(n);
                    }
                }
            }
        }
        Some(seen.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolicyEntry {
    pub action: usize,
    pub distance: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StrongPolicy {
    pub mapping: BTreeMap<Bits, PolicyEntry>,
}

impl StrongPolicy {
    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn decoded(&self, p: &FondProblem) -> Vec<(AbstractState, String, Vec<String>)> {
        self.mapping
            .iter()
            .map(|(s, e)| {
                let a = &p.actions[e.action];
                (p.universe.decode(s), a.name.clone(), a.args.clone())
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveOutcome {
    Solved(StrongPolicy),
    Unsolvable,
    BudgetExceeded,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub node_budget: usize,
    /// Bound on policy depth; deeper searches report `BudgetExceeded`.
    pub max_depth: Option<usize>,
    pub record_graph: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { node_budget: 1_000_000, max_depth: None, record_graph: false }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub outcome: SolveOutcome,
    pub expansions: usize,
    pub depth_bound: usize,
    /// AND/OR graph in DOT syntax when `record_graph` is set.
    pub dot: Option<String>,
}

enum Res {
    Solved(usize),
    Fail,
}

struct Search<'a> {
    p: &'a FondProblem,
    budget: usize,
    expansions: usize,
    solved: HashMap<Bits, PolicyEntry>,
    /// bound at which the state failed, and whether the failure is exact
    failed: HashMap<Bits, (usize, bool)>,
    hit_limit: bool,
    over_budget: bool,
    edges: Option<Vec<(Bits, usize, Vec<Bits>)>>,
}

impl Search<'_> {
    fn solve(&mut self, s: &Bits, bound: usize) -> Res {
        if self.p.goal.eval(s) {
            return Res::Solved(0);
        }
        if let Some(e) = self.solved.get(s) {
            if e.distance <= bound {
                return Res::Solved(e.distance);
            }
        }
        if let Some(&(b, exact)) = self.failed.get(s) {
            if exact {
                return Res::Fail;
            }
            if b >= bound {
                self.hit_limit = true;
                return Res::Fail;
            }
        }
        if bound == 0 {
            self.hit_limit = true;
            return Res::Fail;
        }
        if self.expansions >= self.budget {
            self.over_budget = true;
            return Res::Fail;
        }
        self.expansions += 1;
        let outer_limit = std::mem::replace(&mut self.hit_limit, false);
        let mut result = Res::Fail;
        let applicable: Vec<usize> = self.p.applicable(s).collect();
        for a in applicable {
            let succs = self.p.successors(s, a);
            if let Some(edges) = self.edges.as_mut() {
                edges.push((s.clone(), a, succs.clone()));
            }
            let mut worst = 0;
            let mut ok = true;
            for n in &succs {
                if n == s {
                    ok = false;
                    break;
                }
                match self.solve(n, bound - 1) {
                    Res::Solved(c) => worst = worst.max(c),
                    Res::Fail => {
                        ok = false;
                        break;
                    }
                }
                if self.over_budget {
                    break;
                }
            }
            if self.over_budget {
                break;
            }
            if ok {
                result = Res::Solved(worst + 1);
                let e = PolicyEntry { action: a, distance: worst + 1 };
                match self.solved.get(s) {
                    Some(old) if old.distance <= e.distance => {}
                    _ => {
                        self.solved.insert(s.clone(), e);
                    }
                }
                break;
            }
        }
        if matches!(result, Res::Fail) && !self.over_budget {
            let exact = !self.hit_limit;
            self.failed.insert(s.clone(), (bound, exact));
        }
        self.hit_limit |= outer_limit;
        result
    }
}

pub fn solve_strong(p: &FondProblem, node_budget: usize) -> SolveOutcome {
    solve_strong_with(p, &SolveOptions { node_budget, ..SolveOptions::default() }).outcome
}

pub fn solve_strong_with(p: &FondProblem, opts: &SolveOptions) -> SolveReport {
    let mut search = Search {
        p,
        budget: opts.node_budget,
        expansions: 0,
        solved: HashMap::new(),
        failed: HashMap::new(),
        hit_limit: false,
        over_budget: false,
        edges: opts.record_graph.then(Vec::new),
    };
    let mut reachable: Option<Option<usize>> = None;
    let mut bound = 0;
    let outcome = loop {
        if opts.max_depth.is_some_and(|m| bound > m) {
            break SolveOutcome::BudgetExceeded;
        }
        search.hit_limit = false;
        match search.solve(&p.initial, bound) {
            Res::Solved(_) => break SolveOutcome::Solved(extract(p, &search.solved)),
            Res::Fail if search.over_budget => break SolveOutcome::BudgetExceeded,
            Res::Fail if !search.hit_limit => break SolveOutcome::Unsolvable,
            Res::Fail => {}
        }
        bound += 1;
        // an acyclic policy never needs more steps than there are states
        if bound >= 8 {
            let count = *reachable.get_or_insert_with(|| p.reachable_count(opts.node_budget));
            if count.is_some_and(|c| bound >= c) {
                break SolveOutcome::Unsolvable;
            }
        }
    };
    let dot = search.edges.map(|edges| dot_text(p, &edges, &search.solved));
    SolveReport { outcome, expansions: search.expansions, depth_bound: bound, dot }
}

fn extract(p: &FondProblem, solved: &HashMap<Bits, PolicyEntry>) -> StrongPolicy {
    let mut policy = StrongPolicy::default();
    let mut stack = vec![p.initial.clone()];
    while let Some(s) = stack.pop() {
        if p.goal.eval(&s) || policy.mapping.contains_key(&s) {
            continue;
        }
        let e = solved[&s];
        for n in p.successors(&s, e.action) {
            stack.push(n);
        }
        policy.mapping.insert(s, e);
    }
    policy
}

fn dot_text(p: &FondProblem, edges: &[(Bits, usize, Vec<Bits>)], solved: &HashMap<Bits, PolicyEntry>) -> String {
    let mut ids: HashMap<&Bits, usize> = HashMap::new();
    let mut out = String::from("digraph andor {\n");
    let mut names: Vec<&Bits> = Vec::new();
    for (s, _, succs) in edges {
        for x in std::iter::once(s).chain(succs.iter()) {
            if !ids.contains_key(x) {
                ids.insert(x, names.len());
                names.push(x);
            }
        }
    }
    for (i, s) in names.iter().enumerate() {
        let label = p.universe.decode(s).to_string().replace('"', "'");
        let shape = if p.goal.eval(s) {
            "doublecircle"
        } else if solved.contains_key(*s) {
            "box"
        } else {
            "ellipse"
        };
        writeln!(out, "  s{i} [shape={shape}, label=\"{label}\"];").unwrap();
    }
    for (k, (s, a, succs)) in edges.iter().enumerate() {
        let act = &p.actions[*a];
        writeln!(out, "  a{k} [shape=point, xlabel=\"{} {}\"];", act.name, act.args.join(" ")).unwrap();
        writeln!(out, "  s{} -> a{k};", ids[s]).unwrap();
        for n in succs {
            writeln!(out, "  a{k} -> s{};", ids[n]).unwrap();
        }
    }
    out.push_str("}\n");
    out
}

/// True iff every outcome branch from the initial state under `pi` reaches
/// the goal without leaving `pi` and without revisiting a state on its path.
pub fn verify_strong(p: &FondProblem, pi: &StrongPolicy) -> bool {
    fn walk(p: &FondProblem, pi: &StrongPolicy, s: &Bits, path: &mut HashSet<Bits>, ok: &mut HashSet<Bits>) -> bool {
        if p.goal.eval(s) || ok.contains(s) {
            return true;
        }
        if path.contains(s) {
            return false;
        }
        let Some(e) = pi.mapping.get(s) else {
            return false;
        };
        if e.action >= p.actions.len() || !p.actions[e.action].pre.eval(s) {
            return false;
        }
        path.insert(s.clone());
        let good = p.successors(s, e.action).iter().all(|n| walk(p, pi, n, path, ok));
        path.remove(s);
        if good {
            ok.insert(s.clone());
        }
        good
    }
    walk(p, pi, &p.initial, &mut HashSet::new(), &mut HashSet::new())
}

/// Longest branch length under a verified policy.
pub fn policy_depth(p: &FondProblem, pi: &StrongPolicy) -> usize {
    fn depth(p: &FondProblem, pi: &StrongPolicy, s: &Bits, memo: &mut HashMap<Bits, usize>) -> usize {
        if p.goal.eval(s) {
            return 0;
        }
        if let Some(&d) = memo.get(s) {
            return d;
        }
        let Some(e) = pi.mapping.get(s) else {
            return 0;
        };
        let d = 1 + p.successors(s, e.action).iter().map(|n| depth(p, pi, n, memo)).max().unwrap_or(0);
        memo.insert(s.clone(), d);
        d
    }
    depth(p, pi, &p.initial, &mut HashMap::new())
}
