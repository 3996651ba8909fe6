//! Deterministic PPDDL serializer: lowercase, two-space indentation.

use std::fmt::Write;

use super::types::*;

pub trait AtomText {
    fn text(&self) -> String;
}

impl AtomText for LiftedAtom {
    fn text(&self) -> String {
        self.to_string()
    }
}

impl AtomText for GroundAtom {
    fn text(&self) -> String {
        self.to_string()
    }
}

pub fn formula_text<A: AtomText>(f: &Formula<A>) -> String {
    match f {
        Formula::Atom(a) => a.text(),
        Formula::Not(inner) => format!("(not {})", formula_text(inner)),
        Formula::And(items) | Formula::Or(items) => {
            let head = if matches!(f, Formula::And(_)) { "and" } else { "or" };
            let mut s = format!("({head}");
            for i in items {
                s.push(' ');
                s.push_str(&formula_text(i));
            }
            s.push(')');
            s
        }
    }
}

fn outcome_text(o: &EffectOutcome) -> String {
    let mut parts: Vec<String> = o.add.iter().map(|a| a.to_string()).collect();
    parts.extend(o.delete.iter().map(|a| format!("(not {a})")));
    for c in &o.conditional {
        let mut body: Vec<String> = c.add.iter().map(|a| a.to_string()).collect();
        body.extend(c.delete.iter().map(|a| format!("(not {a})")));
        let body = if body.is_empty() { "(and)".to_string() } else { format!("(and {})", body.join(" ")) };
        parts.push(format!("(when {} {})", formula_text(&c.condition), body));
    }
    if parts.is_empty() {
        "(and)".into()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

fn typed(items: &[(String, String)], var: bool) -> String {
    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let t = &items[i].1;
        let mut j = i;
        while j < items.len() && &items[j].1 == t {
            out.push(if var { format!("?{}", items[j].0) } else { items[j].0.clone() });
            j += 1;
        }
        out.push(format!("- {t}"));
        i = j;
    }
    out.join(" ")
}

pub fn capability_text(c: &CapabilitySchema, indent: &str) -> String {
    let mut s = String::new();
    writeln!(s, "{indent}(:action {}", c.name).unwrap();
    writeln!(s, "{indent}  :parameters ({})", typed(&c.params, true)).unwrap();
    writeln!(s, "{indent}  :precondition {}", formula_text(&c.precondition)).unwrap();
    let eff = match (c.mode, c.outcomes.as_slice()) {
        (_, []) => "(and)".to_string(),
        (Mode::Probabilistic, [o]) if o.probability.is_none_or(|p| p == 1.0) => outcome_text(o),
        (Mode::Probabilistic, outs) => {
            let mut e = String::from("(probabilistic");
            for o in outs {
                write!(e, "\n{indent}    {} {}", o.probability.unwrap_or(0.0), outcome_text(o)).unwrap();
            }
            e.push(')');
            e
        }
        (Mode::Fond, outs) => {
            let mut e = String::from("(oneof");
            for o in outs {
                write!(e, "\n{indent}    {}", outcome_text(o)).unwrap();
            }
            e.push(')');
            e
        }
    };
    writeln!(s, "{indent}  :effect {eff})").unwrap();
    s
}

pub fn domain_text(d: &DomainSpec) -> String {
    let mut s = String::new();
    writeln!(s, "(define (domain {})", d.name).unwrap();
    if !d.requirements.is_empty() {
        writeln!(s, "  (:requirements {})", d.requirements.join(" ")).unwrap();
    }
    if !d.types.is_empty() {
        let ts: Vec<String> = d
            .types
            .iter()
            .map(|(t, p)| if p == OBJECT { t.clone() } else { format!("{t} - {p}") })
            .collect();
        writeln!(s, "  (:types {})", ts.join(" ")).unwrap();
    }
    writeln!(s, "  (:predicates").unwrap();
    for p in &d.predicates {
        let params: Vec<(String, String)> =
            p.param_types.iter().enumerate().map(|(i, t)| (format!("x{i}"), t.clone())).collect();
        if params.is_empty() {
            writeln!(s, "    ({})", p.name).unwrap();
        } else {
            writeln!(s, "    ({} {})", p.name, typed(&params, true)).unwrap();
        }
    }
    writeln!(s, "  )").unwrap();
    for c in &d.capabilities {
        s.push_str(&capability_text(c, "  "));
    }
    s.push_str(")\n");
    s
}

pub fn problem_text(p: &ProblemSpec) -> String {
    let mut s = String::new();
    writeln!(s, "(define (problem {})", p.name).unwrap();
    writeln!(s, "  (:domain {})", p.domain_name).unwrap();
    writeln!(s, "  (:objects {})", typed(&p.objects, false)).unwrap();
    writeln!(s, "  (:init").unwrap();
    for a in p.init.iter() {
        writeln!(s, "    {a}").unwrap();
    }
    writeln!(s, "  )").unwrap();
    writeln!(s, "  (:goal {})", formula_text(&p.goal)).unwrap();
    s.push_str(")\n");
    s
}
