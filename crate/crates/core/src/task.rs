//! Interned grounded task: atoms are numbered, states are bitsets and
//! formulas are in negation normal form over atom ids.

use std::collections::HashMap;

use crate::ppddl::{
    bindings, ground_atoms, AbstractState, CapabilitySchema, DomainSpec, Formula, GroundAtom, GroundCapability,
    GroundOutcome,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(pub Vec<u64>);

impl Bits {
    pub fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    #[inline]
    pub fn get(&self, i: u32) -> bool {
        self.0[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: u32, v: bool) {
        let w = &mut self.0[(i / 64) as usize];
        if v {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| (wi * 64 + b) as u32)
        })
    }
}

/// Formula in negation normal form.
#[derive(Clone, Debug, PartialEq)]
pub enum IFormula {
    True,
    False,
    Lit(u32, bool),
    And(Vec<IFormula>),
    Or(Vec<IFormula>),
}

impl IFormula {
    #[inline]
    pub fn eval(&self, s: &Bits) -> bool {
        match self {
            IFormula::True => true,
            IFormula::False => false,
            IFormula::Lit(a, pos) => s.get(*a) == *pos,
            IFormula::And(items) => items.iter().all(|i| i.eval(s)),
            IFormula::Or(items) => items.iter().any(|i| i.eval(s)),
        }
    }

    fn simplify(self) -> IFormula {
        match self {
            IFormula::And(items) => {
                let mut out = Vec::new();
                for i in items.into_iter().map(IFormula::simplify) {
                    match i {
                        IFormula::True => {}
                        IFormula::False => return IFormula::False,
                        IFormula::And(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                match out.len() {
                    0 => IFormula::True,
                    1 => out.pop().unwrap(),
                    _ => IFormula::And(out),
                }
            }
            IFormula::Or(items) => {
                let mut out = Vec::new();
                for i in items.into_iter().map(IFormula::simplify) {
                    match i {
                        IFormula::False => {}
                        IFormula::True => return IFormula::True,
                        IFormula::Or(inner) => out.extend(inner),
                        other => out.push(other),
                    }
                }
                match out.len() {
                    0 => IFormula::False,
                    1 => out.pop().unwrap(),
                    _ => IFormula::Or(out),
                }
            }
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ICond {
    pub condition: IFormula,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IOutcome {
    pub probability: Option<f64>,
    pub add: Vec<u32>,
    pub del: Vec<u32>,
    pub cond: Vec<ICond>,
}

impl IOutcome {
    pub fn apply(&self, s: &Bits) -> Bits {
        let mut next = s.clone();
        let fired: Vec<&ICond> = self.cond.iter().filter(|c| c.condition.eval(s)).collect();
        for &a in self.del.iter().chain(fired.iter().flat_map(|c| c.del.iter())) {
            next.set(a, false);
        }
        for &a in self.add.iter().chain(fired.iter().flat_map(|c| c.add.iter())) {
            next.set(a, true);
        }
        next
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre: IFormula,
    pub outcomes: Vec<IOutcome>,
}

/// Numbering of a fixed set of ground atoms.
#[derive(Clone, Debug, Default)]
pub struct Universe {
    pub atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, u32>,
}

impl Universe {
    pub fn new(atoms: Vec<GroundAtom>) -> Self {
        let mut u = Universe::default();
        for a in atoms {
            u.intern(a);
        }
        u
    }

    pub fn intern(&mut self, a: GroundAtom) -> u32 {
        if let Some(&i) = self.index.get(&a) {
            return i;
        }
        let i = self.atoms.len() as u32;
        self.index.insert(a.clone(), i);
        self.atoms.push(a);
        i
    }

    pub fn id(&self, a: &GroundAtom) -> Option<u32> {
        self.index.get(a).copied()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `None` if the state mentions an atom outside the universe.
    pub fn encode(&self, s: &AbstractState) -> Option<Bits> {
        let mut b = Bits::new(self.len());
        for a in s.iter() {
            b.set(self.id(a)?, true);
        }
        Some(b)
    }

    pub fn decode(&self, b: &Bits) -> AbstractState {
        b.ones().map(|i| self.atoms[i as usize].clone()).collect()
    }

    /// Atoms outside the universe are constant false.
    pub fn formula(&self, f: &Formula<GroundAtom>) -> IFormula {
        self.nnf(f, true).simplify()
    }

    fn nnf(&self, f: &Formula<GroundAtom>, pos: bool) -> IFormula {
        match f {
            Formula::Atom(a) => match self.id(a) {
                Some(i) => IFormula::Lit(i, pos),
                None if pos => IFormula::False,
                None => IFormula::True,
            },
            Formula::Not(inner) => self.nnf(inner, !pos),
            Formula::And(items) => {
                let v = items.iter().map(|i| self.nnf(i, pos)).collect();
                if pos { IFormula::And(v) } else { IFormula::Or(v) }
            }
            Formula::Or(items) => {
                let v = items.iter().map(|i| self.nnf(i, pos)).collect();
                if pos { IFormula::Or(v) } else { IFormula::And(v) }
            }
        }
    }

    /// Effect atoms outside the universe are dropped.
    fn atoms_of(&self, v: &[GroundAtom]) -> Vec<u32> {
        v.iter().filter_map(|a| self.id(a)).collect()
    }

    pub fn outcome(&self, o: &GroundOutcome) -> IOutcome {
        IOutcome {
            probability: o.probability,
            add: self.atoms_of(&o.add),
            del: self.atoms_of(&o.delete),
            cond: o
                .conditional
                .iter()
                .map(|c| ICond {
                    condition: self.formula(&c.condition),
                    add: self.atoms_of(&c.add),
                    del: self.atoms_of(&c.delete),
                })
                .collect(),
        }
    }

    pub fn action(&self, g: &GroundCapability) -> IAction {
        IAction {
            name: g.name.clone(),
            args: g.args.clone(),
            pre: self.formula(&g.precondition),
            outcomes: g.outcomes.iter().map(|o| self.outcome(o)).collect(),
        }
    }
}

/// All groundings of a domain's capabilities over the well-typed atoms of
/// an object set, sorted by (name, args).
pub struct GroundedDomain {
    pub universe: Universe,
    pub actions: Vec<IAction>,
    index: HashMap<(String, Vec<String>), usize>,
}

impl GroundedDomain {
    pub fn new(domain: &DomainSpec, objects: &[(String, String)]) -> Self {
        let universe = Universe::new(ground_atoms(domain, objects));
        let mut caps: Vec<&CapabilitySchema> = domain.capabilities.iter().collect();
        caps.sort_by(|a, b| a.name.cmp(&b.name));
        let mut actions = Vec::new();
        for c in caps {
            for args in bindings(domain, &c.params, objects) {
                actions.push(universe.action(&crate::ppddl::ground_with(c, &args)));
            }
        }
        let index = actions.iter().enumerate().map(|(i, a)| ((a.name.clone(), a.args.clone()), i)).collect();
        GroundedDomain { universe, actions, index }
    }

    pub fn find(&self, name: &str, args: &[String]) -> Option<usize> {
        self.index.get(&(name.to_string(), args.to_vec())).copied()
    }
}
