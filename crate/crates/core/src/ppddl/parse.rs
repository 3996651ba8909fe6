use std::collections::BTreeSet;

use super::sexpr::{read_all, Pos, Sexpr};
use super::types::*;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: unknown requirement `{name}`")]
    UnknownRequirement { pos: Pos, name: String },
    #[error("{pos}: undeclared predicate `{name}`")]
    UndeclaredPredicate { pos: Pos, name: String },
    #[error("{pos}: undeclared type `{name}`")]
    UndeclaredType { pos: Pos, name: String },
    #[error("{pos}: `{name}` expects {expected} arguments, found {found}")]
    ArityMismatch { pos: Pos, name: String, expected: usize, found: usize },
    #[error("{pos}: undeclared parameter `?{name}`")]
    UndeclaredParameter { pos: Pos, name: String },
    #[error("{pos}: undeclared object `{name}`")]
    UndeclaredObject { pos: Pos, name: String },
    #[error("{pos}: ill-typed atom {atom}")]
    IllTyped { pos: Pos, atom: String },
    #[error("{pos}: {message}")]
    Invalid { pos: Pos, message: String },
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::UnknownRequirement { pos, .. }
            | ParseError::UndeclaredPredicate { pos, .. }
            | ParseError::UndeclaredType { pos, .. }
            | ParseError::ArityMismatch { pos, .. }
            | ParseError::UndeclaredParameter { pos, .. }
            | ParseError::UndeclaredObject { pos, .. }
            | ParseError::IllTyped { pos, .. }
            | ParseError::Invalid { pos, .. } => *pos,
        }
    }
}

pub const REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":probabilistic-effects",
    ":non-deterministic",
    ":conditional-effects",
    ":disjunctive-preconditions",
    ":negative-preconditions",
];

/// Probability tolerance for outcome normalization.
pub const PROB_TOL: f64 = 1e-9;

pub(crate) fn round_prob(p: f64) -> f64 {
    (p * 1e12).round() / 1e12
}

fn syntax(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { pos, message: message.into() }
}

fn invalid(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError::Invalid { pos, message: message.into() }
}

fn list<'a>(e: &'a Sexpr, what: &str) -> Result<&'a [Sexpr], ParseError> {
    e.as_list().ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

fn sym<'a>(e: &'a Sexpr, what: &str) -> Result<&'a str, ParseError> {
    e.as_sym().ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

fn read_single(text: &str) -> Result<Sexpr, ParseError> {
    let mut exprs = read_all(text).map_err(|e| syntax(e.pos, e.message))?;
    match exprs.len() {
        1 => Ok(exprs.pop().unwrap()),
        0 => Err(syntax(Pos { line: 1, col: 1 }, "empty input")),
        _ => Err(syntax(exprs[1].pos(), "trailing input after definition")),
    }
}

/// Splits `(define (kind name) sections...)`.
fn header<'a>(e: &'a Sexpr, kind: &str) -> Result<(&'a str, &'a [Sexpr]), ParseError> {
    let items = list(e, "(define ...)")?;
    if items.first().and_then(Sexpr::as_sym) != Some("define") {
        return Err(syntax(e.pos(), "expected `define`"));
    }
    let head = items.get(1).ok_or_else(|| syntax(e.pos(), format!("missing ({kind} name)")))?;
    let h = list(head, "header")?;
    if h.len() != 2 || h[0].as_sym() != Some(kind) {
        return Err(syntax(head.pos(), format!("expected ({kind} name)")));
    }
    Ok((sym(&h[1], "name")?, &items[2..]))
}

/// `a b - t c` style list. Returns (name, type) pairs; untyped entries get `object`.
fn typed_list(items: &[Sexpr]) -> Result<Vec<(String, String, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = sym(&items[i], "name")?;
        if s == "-" {
            let t = items.get(i + 1).ok_or_else(|| syntax(items[i].pos(), "missing type after `-`"))?;
            let t = sym(t, "type name")?;
            if pending.is_empty() {
                return Err(syntax(items[i].pos(), "`-` without names"));
            }
            for (n, p) in pending.drain(..) {
                out.push((n, t.to_string(), p));
            }
            i += 2;
        } else {
            pending.push((s.to_string(), items[i].pos()));
            i += 1;
        }
    }
    for (n, p) in pending {
        out.push((n, OBJECT.to_string(), p));
    }
    Ok(out)
}

pub fn parse_domain(text: &str) -> Result<DomainSpec, ParseError> {
    let root = read_single(text)?;
    let (name, sections) = header(&root, "domain")?;
    let mut dom = DomainSpec {
        name: name.to_string(),
        requirements: Vec::new(),
        types: Vec::new(),
        predicates: Vec::new(),
        capabilities: Vec::new(),
    };
    for sec in sections {
        let items = list(sec, "domain section")?;
        let key = items.first().and_then(Sexpr::as_sym).ok_or_else(|| syntax(sec.pos(), "empty section"))?;
        match key {
            ":requirements" => {
                for r in &items[1..] {
                    let r_name = sym(r, "requirement")?;
                    if !REQUIREMENTS.contains(&r_name) {
                        return Err(ParseError::UnknownRequirement { pos: r.pos(), name: r_name.into() });
                    }
                    dom.requirements.push(r_name.to_string());
                }
            }
            ":types" => {
                let declared = typed_list(&items[1..])?;
                for (n, _, p) in &declared {
                    if n == OBJECT || dom.types.iter().any(|(t, _)| t == n) {
                        return Err(invalid(*p, format!("duplicate type `{n}`")));
                    }
                    dom.types.push((n.clone(), String::new()));
                }
                let start = dom.types.len() - declared.len();
                for (k, (_, parent, p)) in declared.into_iter().enumerate() {
                    if !dom.has_type(&parent) {
                        return Err(ParseError::UndeclaredType { pos: p, name: parent });
                    }
                    dom.types[start + k].1 = parent;
                }
            }
            ":predicates" => {
                for pe in &items[1..] {
                    let pl = list(pe, "predicate declaration")?;
                    let pname = sym(pl.first().ok_or_else(|| syntax(pe.pos(), "empty predicate"))?, "predicate name")?;
                    if dom.predicate(pname).is_some() {
                        return Err(invalid(pe.pos(), format!("duplicate predicate `{pname}`")));
                    }
                    let mut param_types = Vec::new();
                    for (v, t, p) in typed_list(&pl[1..])? {
                        if !v.starts_with('?') {
                            return Err(syntax(p, format!("expected variable, found `{v}`")));
                        }
                        if !dom.has_type(&t) {
                            return Err(ParseError::UndeclaredType { pos: p, name: t });
                        }
                        param_types.push(t);
                    }
                    dom.predicates.push(PredicateSchema { name: pname.to_string(), param_types });
                }
            }
            ":action" | ":capability" => {
                let cap = parse_capability(&dom, sec, &items[1..])?;
                if dom.capability(&cap.name).is_some() {
                    return Err(invalid(sec.pos(), format!("duplicate capability `{}`", cap.name)));
                }
                dom.capabilities.push(cap);
            }
            ":constants" => return Err(invalid(sec.pos(), "`:constants` is not supported")),
            other => return Err(syntax(sec.pos(), format!("unexpected section `{other}`"))),
        }
    }
    Ok(dom)
}

struct CapCtx<'a> {
    dom: &'a DomainSpec,
    params: &'a [(String, String)],
}

impl CapCtx<'_> {
    fn atom(&self, e: &Sexpr) -> Result<LiftedAtom, ParseError> {
        let items = list(e, "atom")?;
        let pname = sym(items.first().ok_or_else(|| syntax(e.pos(), "empty atom"))?, "predicate name")?;
        let pred = self
            .dom
            .predicate(pname)
            .ok_or_else(|| ParseError::UndeclaredPredicate { pos: e.pos(), name: pname.into() })?;
        if pred.arity() != items.len() - 1 {
            return Err(ParseError::ArityMismatch {
                pos: e.pos(),
                name: pname.into(),
                expected: pred.arity(),
                found: items.len() - 1,
            });
        }
        let mut args = Vec::new();
        for a in &items[1..] {
            let s = sym(a, "argument")?;
            let Some(v) = s.strip_prefix('?') else {
                return Err(invalid(a.pos(), format!("constant `{s}` in capability body")));
            };
            if !self.params.iter().any(|(n, _)| n == v) {
                return Err(ParseError::UndeclaredParameter { pos: a.pos(), name: v.into() });
            }
            args.push(v.to_string());
        }
        Ok(LiftedAtom { predicate: pname.to_string(), args })
    }

    fn formula(&self, e: &Sexpr) -> Result<Formula<LiftedAtom>, ParseError> {
        formula_with(e, &mut |a| self.atom(a))
    }
}

fn formula_with<A>(
    e: &Sexpr,
    atom: &mut impl FnMut(&Sexpr) -> Result<A, ParseError>,
) -> Result<Formula<A>, ParseError> {
    let items = list(e, "formula")?;
    match items.first().and_then(Sexpr::as_sym) {
        Some("and") => Ok(Formula::And(items[1..].iter().map(|i| formula_with(i, atom)).collect::<Result<_, _>>()?)),
        Some("or") => Ok(Formula::Or(items[1..].iter().map(|i| formula_with(i, atom)).collect::<Result<_, _>>()?)),
        Some("not") => {
            if items.len() != 2 {
                return Err(syntax(e.pos(), "`not` takes one argument"));
            }
            Ok(Formula::Not(Box::new(formula_with(&items[1], atom)?)))
        }
        Some("imply") | Some("exists") | Some("forall") | Some("=") => {
            Err(invalid(e.pos(), format!("unsupported connective `{}`", items[0].as_sym().unwrap())))
        }
        _ => Ok(Formula::Atom(atom(e)?)),
    }
}

#[derive(Clone, Debug)]
struct Branch {
    p: f64,
    add: BTreeSet<LiftedAtom>,
    del: BTreeSet<LiftedAtom>,
    cond: Vec<ConditionalEffect>,
}

impl Branch {
    fn unit() -> Self {
        Branch { p: 1.0, add: BTreeSet::new(), del: BTreeSet::new(), cond: Vec::new() }
    }

    fn merge(&self, other: &Branch) -> Branch {
        let mut b = self.clone();
        b.p *= other.p;
        b.add.extend(other.add.iter().cloned());
        b.del.extend(other.del.iter().cloned());
        b.cond.extend(other.cond.iter().cloned());
        b
    }
}

#[derive(Default)]
struct EffectFlags {
    probabilistic: bool,
    oneof: bool,
}

fn parse_probability(e: &Sexpr) -> Result<f64, ParseError> {
    let s = sym(e, "probability")?;
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.parse().map_err(|_| syntax(e.pos(), format!("bad probability `{s}`")))?;
            let b: f64 = b.parse().map_err(|_| syntax(e.pos(), format!("bad probability `{s}`")))?;
            if b == 0.0 {
                return Err(syntax(e.pos(), "zero denominator"));
            }
            a / b
        }
        None => s.parse().map_err(|_| syntax(e.pos(), format!("bad probability `{s}`")))?,
    };
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(e.pos(), format!("probability {v} outside [0,1]")));
    }
    Ok(v)
}

fn effect(ctx: &CapCtx, e: &Sexpr, flags: &mut EffectFlags) -> Result<Vec<Branch>, ParseError> {
    let items = list(e, "effect")?;
    match items.first().and_then(Sexpr::as_sym) {
        Some("and") => {
            let mut cur = vec![Branch::unit()];
            for child in &items[1..] {
                let sub = effect(ctx, child, flags)?;
                cur = cur.iter().flat_map(|b| sub.iter().map(move |c| b.merge(c))).collect();
            }
            Ok(cur)
        }
        Some("not") => {
            if items.len() != 2 {
                return Err(syntax(e.pos(), "`not` takes one argument"));
            }
            let mut b = Branch::unit();
            b.del.insert(ctx.atom(&items[1])?);
            Ok(vec![b])
        }
        Some("probabilistic") => {
            flags.probabilistic = true;
            if items.len() % 2 != 1 {
                return Err(syntax(e.pos(), "`probabilistic` expects probability/effect pairs"));
            }
            let mut out = Vec::new();
            let mut total = 0.0;
            for pair in items[1..].chunks(2) {
                let p = parse_probability(&pair[0])?;
                total += p;
                for b in effect(ctx, &pair[1], flags)? {
                    out.push(Branch { p: p * b.p, ..b });
                }
            }
            if total > 1.0 + PROB_TOL {
                return Err(invalid(e.pos(), format!("probabilities sum to {total} > 1")));
            }
            if total < 1.0 - PROB_TOL {
                out.push(Branch { p: round_prob(1.0 - total), ..Branch::unit() });
            }
            Ok(out)
        }
        Some("oneof") => {
            flags.oneof = true;
            if items.len() < 2 {
                return Err(syntax(e.pos(), "`oneof` needs at least one branch"));
            }
            let mut out = Vec::new();
            for child in &items[1..] {
                out.extend(effect(ctx, child, flags)?);
            }
            Ok(out)
        }
        Some("when") => {
            if items.len() != 3 {
                return Err(syntax(e.pos(), "`when` takes a condition and an effect"));
            }
            let condition = ctx.formula(&items[1])?;
            let mut inner_flags = EffectFlags::default();
            let body = effect(ctx, &items[2], &mut inner_flags)?;
            if body.len() != 1 || inner_flags.oneof || inner_flags.probabilistic || !body[0].cond.is_empty() {
                return Err(invalid(e.pos(), "`when` body must be a deterministic conjunction"));
            }
            let b = body.into_iter().next().unwrap();
            let mut out = Branch::unit();
            out.cond.push(ConditionalEffect { condition, add: b.add, delete: b.del });
            Ok(vec![out])
        }
        _ => {
            let mut b = Branch::unit();
            b.add.insert(ctx.atom(e)?);
            Ok(vec![b])
        }
    }
}

fn parse_capability(dom: &DomainSpec, whole: &Sexpr, items: &[Sexpr]) -> Result<CapabilitySchema, ParseError> {
    let name = sym(items.first().ok_or_else(|| syntax(whole.pos(), "missing capability name"))?, "capability name")?;
    let mut params: Vec<(String, String)> = Vec::new();
    let mut pre_expr = None;
    let mut eff_expr = None;
    let mut i = 1;
    while i < items.len() {
        let key = sym(&items[i], "keyword")?;
        let val = items.get(i + 1).ok_or_else(|| syntax(items[i].pos(), format!("missing value for {key}")))?;
        match key {
            ":parameters" => {
                for (v, t, p) in typed_list(list(val, "parameter list")?)? {
                    let Some(v) = v.strip_prefix('?') else {
                        return Err(syntax(p, format!("expected variable, found `{v}`")));
                    };
                    if !dom.has_type(&t) {
                        return Err(ParseError::UndeclaredType { pos: p, name: t });
                    }
                    if params.iter().any(|(n, _)| n == v) {
                        return Err(invalid(p, format!("duplicate parameter `?{v}`")));
                    }
                    params.push((v.to_string(), t));
                }
            }
            ":precondition" => pre_expr = Some(val),
            ":effect" => eff_expr = Some(val),
            other => return Err(syntax(items[i].pos(), format!("unexpected keyword `{other}`"))),
        }
        i += 2;
    }
    let ctx = CapCtx { dom, params: &params };
    let precondition = match pre_expr {
        Some(e) => ctx.formula(e)?,
        None => Formula::truth(),
    };
    let mut flags = EffectFlags::default();
    let branches = match eff_expr {
        Some(e) => effect(&ctx, e, &mut flags)?,
        None => vec![Branch::unit()],
    };
    if flags.oneof && flags.probabilistic {
        return Err(invalid(whole.pos(), "mixing `oneof` and `probabilistic` is not supported"));
    }
    let mode = if flags.oneof { Mode::Fond } else { Mode::Probabilistic };
    let mut outcomes = Vec::new();
    for b in branches {
        if let Some(a) = b.add.intersection(&b.del).next() {
            return Err(invalid(whole.pos(), format!("outcome of `{name}` both adds and deletes {a}")));
        }
        outcomes.push(EffectOutcome {
            probability: (mode == Mode::Probabilistic).then(|| round_prob(b.p)),
            add: b.add,
            delete: b.del,
            conditional: b.cond,
        });
    }
    Ok(CapabilitySchema { name: name.to_string(), params, precondition, outcomes, mode })
}

pub fn parse_problem(text: &str, domain: &DomainSpec) -> Result<ProblemSpec, ParseError> {
    let root = read_single(text)?;
    let (name, sections) = header(&root, "problem")?;
    let mut prob = ProblemSpec {
        name: name.to_string(),
        domain_name: String::new(),
        objects: Vec::new(),
        init: AbstractState::new(),
        goal: Formula::truth(),
    };
    let mut goal_expr = None;
    let mut init_exprs: &[Sexpr] = &[];
    for sec in sections {
        let items = list(sec, "problem section")?;
        let key = items.first().and_then(Sexpr::as_sym).ok_or_else(|| syntax(sec.pos(), "empty section"))?;
        match key {
            ":domain" => {
                let d = sym(items.get(1).ok_or_else(|| syntax(sec.pos(), "missing domain name"))?, "domain name")?;
                if d != domain.name {
                    return Err(invalid(sec.pos(), format!("problem is for domain `{d}`, not `{}`", domain.name)));
                }
                prob.domain_name = d.to_string();
            }
            ":objects" => {
                for (o, t, p) in typed_list(&items[1..])? {
                    if !domain.has_type(&t) {
                        return Err(ParseError::UndeclaredType { pos: p, name: t });
                    }
                    if prob.object_type(&o).is_some() {
                        return Err(invalid(p, format!("duplicate object `{o}`")));
                    }
                    prob.objects.push((o, t));
                }
            }
            ":init" => init_exprs = &items[1..],
            ":goal" => goal_expr = items.get(1),
            other => return Err(syntax(sec.pos(), format!("unexpected section `{other}`"))),
        }
    }
    if prob.domain_name.is_empty() {
        return Err(syntax(root.pos(), "missing (:domain ...)"));
    }
    for e in init_exprs {
        if e.head() == Some("not") {
            return Err(invalid(e.pos(), "negative literal in closed-world :init"));
        }
        prob.init.0.insert(ground_atom(domain, &prob, e)?);
    }
    if let Some(g) = goal_expr {
        prob.goal = formula_with(g, &mut |a| ground_atom(domain, &prob, a))?;
    }
    Ok(prob)
}

fn ground_atom(domain: &DomainSpec, prob: &ProblemSpec, e: &Sexpr) -> Result<GroundAtom, ParseError> {
    let items = list(e, "atom")?;
    let pname = sym(items.first().ok_or_else(|| syntax(e.pos(), "empty atom"))?, "predicate name")?;
    let pred = domain
        .predicate(pname)
        .ok_or_else(|| ParseError::UndeclaredPredicate { pos: e.pos(), name: pname.into() })?;
    if pred.arity() != items.len() - 1 {
        return Err(ParseError::ArityMismatch {
            pos: e.pos(),
            name: pname.into(),
            expected: pred.arity(),
            found: items.len() - 1,
        });
    }
    let mut objects = Vec::new();
    for (a, want) in items[1..].iter().zip(&pred.param_types) {
        let o = sym(a, "object")?;
        let t = prob
            .object_type(o)
            .ok_or_else(|| ParseError::UndeclaredObject { pos: a.pos(), name: o.into() })?;
        if !domain.is_subtype(t, want) {
            let atom = format!("({} {})", pname, items[1..].iter().filter_map(Sexpr::as_sym).collect::<Vec<_>>().join(" "));
            return Err(ParseError::IllTyped { pos: a.pos(), atom });
        }
        objects.push(o.to_string());
    }
    Ok(GroundAtom { predicate: pname.to_string(), objects })
}
