//! Black-box agent simulator over a hidden ground-truth model.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ppddl::{
    bindings, holds, is_well_typed, AbstractState, CapabilitySignature, DomainSpec, Formula, GroundAtom,
    PredicateSchema, ProblemSpec,
};
use crate::task::{Bits, GroundedDomain};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SdmaError {
    #[error("unknown capability `{0}`")]
    UnknownCapability(String),
    #[error("ill-typed arguments for `{name}`: {args:?}")]
    IllTypedArguments { name: String, args: Vec<String> },
    #[error("state mentions atom outside the problem vocabulary: {0}")]
    IllTypedState(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub s: AbstractState,
    pub capability: String,
    pub args: Vec<String>,
    pub s_prime: AbstractState,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub capability: String,
    pub args: Vec<String>,
    /// Executing this rule is the discriminating step: the attempt stops
    /// right after it and counts as having reached the stopping condition.
    pub terminal: bool,
}

/// Partial policy keyed by exact states.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub rules: BTreeMap<AbstractState, PolicyRule>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyQuery {
    pub s_i: AbstractState,
    pub pi: Policy,
    pub goal: Formula<GroundAtom>,
    pub alpha: usize,
    pub eta: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub goal_reached: bool,
    pub zeta: Vec<Transition>,
    /// Number of transitions contributed by each attempt, in order.
    pub attempt_lengths: Vec<usize>,
}

impl QueryResponse {
    pub fn attempts(&self) -> Vec<&[Transition]> {
        let mut out = Vec::new();
        let mut start = 0;
        for &n in &self.attempt_lengths {
            out.push(&self.zeta[start..start + n]);
            start += n;
        }
        out
    }
}

/// What crosses the black-box boundary: types, predicates, objects and
/// capability signatures. No preconditions, effects or probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Domain skeleton with an empty capability list, used for typing.
    pub types: DomainSpec,
    pub capabilities: Vec<CapabilitySignature>,
    pub objects: Vec<(String, String)>,
}

impl Vocabulary {
    pub fn of(domain: &DomainSpec, problem: &ProblemSpec) -> Self {
        Vocabulary {
            types: DomainSpec { capabilities: Vec::new(), ..domain.clone() },
            capabilities: domain.signatures(),
            objects: problem.objects.clone(),
        }
    }

    pub fn predicates(&self) -> &[PredicateSchema] {
        &self.types.predicates
    }

    pub fn signature(&self, name: &str) -> Option<&CapabilitySignature> {
        self.capabilities.iter().find(|c| c.name == name)
    }

    pub fn bindings(&self, sig: &CapabilitySignature) -> Vec<Vec<String>> {
        bindings(&self.types, &sig.params, &self.objects)
    }

    pub fn object_type(&self, o: &str) -> Option<&str> {
        self.objects.iter().find(|(n, _)| n == o).map(|(_, t)| t.as_str())
    }

    pub fn is_well_typed(&self, a: &GroundAtom) -> bool {
        let Some(p) = self.types.predicate(&a.predicate) else {
            return false;
        };
        p.arity() == a.objects.len()
            && a.objects
                .iter()
                .zip(&p.param_types)
                .all(|(o, t)| self.object_type(o).is_some_and(|ot| self.types.is_subtype(ot, t)))
    }
}

/// The interface a learner may use.
pub trait Sdma {
    fn vocabulary(&self) -> &Vocabulary;
    fn initial_state(&self) -> AbstractState;
    fn execute(&mut self, s: &AbstractState, capability: &str, args: &[String]) -> Result<Transition, SdmaError>;
    fn run_policy(&mut self, q: &PolicyQuery) -> Result<QueryResponse, SdmaError>;
    /// Total `execute` calls so far.
    fn steps(&self) -> u64;
}

#[derive(Serialize)]
struct TraceLine<'a> {
    attempt: Option<usize>,
    step: u64,
    state: Vec<String>,
    capability: &'a str,
    args: &'a [String],
    next_state: Vec<String>,
    success: bool,
}

pub struct SdmaHandle {
    domain: DomainSpec,
    problem: ProblemSpec,
    vocab: Vocabulary,
    grounded: GroundedDomain,
    rng: ChaCha8Rng,
    step_counter: u64,
    trace: Option<Box<dyn Write + Send>>,
}

impl SdmaHandle {
    pub fn new(domain: DomainSpec, problem: ProblemSpec, seed: u64) -> Self {
        let vocab = Vocabulary::of(&domain, &problem);
        let grounded = GroundedDomain::new(&domain, &problem.objects);
        SdmaHandle {
            domain,
            problem,
            vocab,
            grounded,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step_counter: 0,
            trace: None,
        }
    }

    /// Writes one JSON line per executed transition to `w`.
    pub fn with_trace(mut self, w: Box<dyn Write + Send>) -> Self {
        self.trace = Some(w);
        self
    }

    fn log(&mut self, attempt: Option<usize>, t: &Transition) {
        let step = self.step_counter;
        if let Some(w) = self.trace.as_mut() {
            let line = TraceLine {
                attempt,
                step,
                state: t.s.iter().map(|a| a.to_string()).collect(),
                capability: &t.capability,
                args: &t.args,
                next_state: t.s_prime.iter().map(|a| a.to_string()).collect(),
                success: t.success,
            };
            let _ = serde_json::to_writer(&mut *w, &line);
            let _ = w.write_all(b"\n");
        }
    }

    fn exec_inner(&mut self, s: &AbstractState, capability: &str, args: &[String]) -> Result<Transition, SdmaError> {
        if self.domain.capability(capability).is_none() {
            return Err(SdmaError::UnknownCapability(capability.to_string()));
        }
        let Some(ai) = self.grounded.find(capability, args) else {
            return Err(SdmaError::IllTypedArguments { name: capability.to_string(), args: args.to_vec() });
        };
        let Some(bits) = self.grounded.universe.encode(s) else {
            let bad = s.iter().find(|a| self.grounded.universe.id(a).is_none()).unwrap();
            return Err(SdmaError::IllTypedState(bad.to_string()));
        };
        self.step_counter += 1;
        let action = &self.grounded.actions[ai];
        let (success, next) = if action.pre.eval(&bits) {
            let r: f64 = self.rng.gen();
            let mut acc = 0.0;
            let mut chosen = action.outcomes.len() - 1;
            for (i, o) in action.outcomes.iter().enumerate() {
                acc += o.probability.unwrap_or(1.0 / action.outcomes.len() as f64);
                if r < acc {
                    chosen = i;
                    break;
                }
            }
            (true, self.grounded.universe.decode(&action.outcomes[chosen].apply(&bits)))
        } else {
            (false, s.clone())
        };
        Ok(Transition {
            s: s.clone(),
            capability: capability.to_string(),
            args: args.to_vec(),
            s_prime: next,
            success,
        })
    }

    /// Ground-truth access for evaluation and white-box tests only.
    pub fn ground_truth(&self) -> (&DomainSpec, &ProblemSpec) {
        (&self.domain, &self.problem)
    }

    /// Random-walk test transitions over the given problems: restarting
    /// walks of at most `WALK` steps, each step a uniformly chosen
    /// applicable grounding, problems visited round-robin.
    pub fn sample_test_transitions(&mut self, problems: &[ProblemSpec], n: usize) -> Vec<Transition> {
        const WALK: usize = 20;
        let worlds: Vec<(GroundedDomain, Bits)> = problems
            .iter()
            .map(|p| {
                let g = GroundedDomain::new(&self.domain, &p.objects);
                let init = g.universe.encode(&p.init).expect("problem init is well-typed");
                (g, init)
            })
            .collect();
        let mut out = Vec::with_capacity(n);
        let mut wi = 0;
        let mut stuck_restarts = 0;
        while out.len() < n {
            let (g, init) = &worlds[wi % worlds.len()];
            wi += 1;
            let mut s = init.clone();
            let before = out.len();
            for _ in 0..WALK {
                if out.len() >= n {
                    break;
                }
                let applicable: Vec<usize> = (0..g.actions.len()).filter(|&i| g.actions[i].pre.eval(&s)).collect();
                if applicable.is_empty() {
                    break;
                }
                let a = &g.actions[applicable[self.rng.gen_range(0..applicable.len())]];
                let r: f64 = self.rng.gen();
                let mut acc = 0.0;
                let mut chosen = a.outcomes.len() - 1;
                for (i, o) in a.outcomes.iter().enumerate() {
                    acc += o.probability.unwrap_or(1.0 / a.outcomes.len() as f64);
                    if r < acc {
                        chosen = i;
                        break;
                    }
                }
                let next = a.outcomes[chosen].apply(&s);
                out.push(Transition {
                    s: g.universe.decode(&s),
                    capability: a.name.clone(),
                    args: a.args.clone(),
                    s_prime: g.universe.decode(&next),
                    success: true,
                });
                s = next;
            }
            if out.len() == before {
                stuck_restarts += 1;
                assert!(stuck_restarts < 10 * worlds.len(), "no applicable capability in any test problem");
            }
        }
        out
    }
}

impl Sdma for SdmaHandle {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn initial_state(&self) -> AbstractState {
        self.problem.init.clone()
    }

    fn execute(&mut self, s: &AbstractState, capability: &str, args: &[String]) -> Result<Transition, SdmaError> {
        let t = self.exec_inner(s, capability, args)?;
        self.log(None, &t);
        Ok(t)
    }

    fn run_policy(&mut self, q: &PolicyQuery) -> Result<QueryResponse, SdmaError> {
        let mut resp = QueryResponse::default();
        for attempt in 0..q.eta {
            let mut s = q.s_i.clone();
            let mut len = 0;
            loop {
                if holds(&s, &q.goal) {
                    resp.goal_reached = true;
                    break;
                }
                if len >= q.alpha {
                    break;
                }
                let Some(rule) = q.pi.rules.get(&s) else {
                    break;
                };
                let t = self.exec_inner(&s, &rule.capability, &rule.args)?;
                self.log(Some(attempt), &t);
                len += 1;
                let next = t.s_prime.clone();
                let ok = t.success;
                resp.zeta.push(t);
                if rule.terminal {
                    resp.goal_reached = true;
                    break;
                }
                if !ok {
                    break;
                }
                s = next;
            }
            resp.attempt_lengths.push(len);
        }
        Ok(resp)
    }

    fn steps(&self) -> u64 {
        self.step_counter
    }
}

/// Whole-state check used by white-box tests: `t` is possible under the
/// ground truth the handle wraps.
pub fn consistent_with_ground_truth(h: &SdmaHandle, t: &Transition) -> bool {
    let (d, p) = h.ground_truth();
    let Some(c) = d.capability(&t.capability) else {
        return false;
    };
    let g = crate::ppddl::ground_with(c, &t.args);
    if !t.s.iter().all(|a| is_well_typed(d, p, a)) {
        return false;
    }
    if !holds(&t.s, &g.precondition) {
        return !t.success && t.s_prime == t.s;
    }
    t.success && g.outcomes.iter().any(|o| crate::ppddl::apply_outcome(&t.s, o) == t.s_prime)
}
