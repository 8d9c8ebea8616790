//! CPLEX-style LP text export.
//!
//! Coefficients with a terminating decimal expansion are written exactly.
//! Anything else is written with 17 significant digits and the exact
//! fraction is recorded in a `\ exact:` comment under the affected line.

use std::fmt::Write;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::model::{Bounds, LinExpr, MilpModel, Relation, Sense, VarKind};
use crate::rational::Rational;

fn terminates(q: &Rational) -> bool {
    let mut d = q.denom();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while d.is_even() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    d.is_one()
}

struct Writer<'a> {
    names: Vec<&'a str>,
    notes: Vec<String>,
}

impl Writer<'_> {
    fn number(&mut self, what: &str, q: &Rational) -> String {
        if terminates(q) {
            q.to_decimal_string(64)
        } else {
            self.notes.push(format!("{what} = {q}"));
            format!("{:.17e}", q.to_f64())
        }
    }

    fn expr(&mut self, e: &LinExpr) -> String {
        if e.is_empty() {
            return "0 __zero".to_string();
        }
        let mut s = String::new();
        for (v, c) in e.terms() {
            let name = self.names[v.0];
            let sign = if c.is_negative() { '-' } else { '+' };
            let mag = self.number(&format!("coef({name})"), &c.abs());
            let _ = write!(s, "{sign} {mag} {name} ");
        }
        s.trim_end().to_string()
    }

    fn flush_notes(&mut self, out: &mut String) {
        if !self.notes.is_empty() {
            let _ = writeln!(out, "\\ exact: {}", self.notes.join(", "));
            self.notes.clear();
        }
    }
}

/// Renders `model` in LP format. Output is a pure function of the model.
pub fn export_lp(model: &MilpModel) -> String {
    let mut w = Writer { names: model.variables().iter().map(|v| v.name.as_str()).collect(), notes: Vec::new() };
    let mut out = String::new();
    let _ = writeln!(out, "\\ Model {}", model.name);
    let _ = writeln!(out, "\\ {} variables, {} constraints", model.variables().len(), model.constraints().len());
    let _ = writeln!(
        out,
        "{}",
        match model.objective().sense {
            Sense::Maximize => "Maximize",
            Sense::Minimize => "Minimize",
        }
    );
    let obj = w.expr(&model.objective().expr);
    let _ = writeln!(out, " obj: {obj}");
    w.flush_notes(&mut out);

    let _ = writeln!(out, "Subject To");
    for c in model.constraints() {
        let lhs = w.expr(&c.expr);
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let rhs = w.number("rhs", &c.rhs);
        let _ = writeln!(out, " {}: {lhs} {rel} {rhs}", c.name);
        w.flush_notes(&mut out);
    }

    let _ = writeln!(out, "Bounds");
    let mut mentions_zero = model.objective().expr.is_empty();
    mentions_zero |= model.constraints().iter().any(|c| c.expr.is_empty());
    for v in model.variables() {
        if v.kind == VarKind::Binary && v.bounds == Bounds::binary() {
            continue;
        }
        if v.kind == VarKind::Continuous && v.bounds == Bounds::non_negative() {
            continue;
        }
        let line = match (&v.bounds.lower, &v.bounds.upper) {
            (None, None) => format!(" {} free", v.name),
            (Some(l), Some(u)) if l == u => {
                let l = w.number(&v.name, l);
                format!(" {} = {l}", v.name)
            }
            (l, u) => {
                let l = match l {
                    Some(l) => w.number(&format!("lower({})", v.name), l),
                    None => "-inf".to_string(),
                };
                let u = match u {
                    Some(u) => w.number(&format!("upper({})", v.name), u),
                    None => "+inf".to_string(),
                };
                format!(" {l} <= {} <= {u}", v.name)
            }
        };
        let _ = writeln!(out, "{line}");
        w.flush_notes(&mut out);
    }
    if mentions_zero {
        let _ = writeln!(out, " __zero = 0");
    }

    let binaries: Vec<&str> =
        model.variables().iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        let _ = writeln!(out, "Binaries");
        for chunk in binaries.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    let _ = writeln!(out, "End");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_smoke() {
        let mut m = MilpModel::new("one", Sense::Maximize);
        let x = m.add_binary("x");
        m.add_constraint("c1", LinExpr::new().term(x, 1), Relation::Le, 1);
        m.set_objective(LinExpr::new().term(x, 1));
        let text = export_lp(&m);
        assert!(text.contains("Maximize"));
        assert!(text.contains(" c1: + 1 x <= 1"));
        assert!(text.contains("Binaries\n x\n"));
        assert!(text.ends_with("End\n"));
        assert_eq!(text, export_lp(&m));
    }

    #[test]
    fn non_terminating_fractions_get_exact_notes() {
        let mut m = MilpModel::new("third", Sense::Minimize);
        let d = m.add_continuous("d", Bounds::range(Rational::ZERO, Rational::new(7, 2)));
        m.add_constraint("dev", LinExpr::new().term(d, 1), Relation::Ge, Rational::new(1, 3));
        m.set_objective(LinExpr::new().term(d, 1));
        let text = export_lp(&m);
        assert!(text.contains("\\ exact: rhs = 1/3"), "{text}");
        assert!(text.contains(" 0 <= d <= 3.5"), "{text}");
    }
}
