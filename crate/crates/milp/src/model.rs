use std::collections::BTreeMap;

use crate::rational::Rational;
use crate::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A variable bound; `None` means unbounded in that direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl Bounds {
    pub fn new(lower: Option<Rational>, upper: Option<Rational>) -> Self {
        Bounds { lower, upper }
    }

    pub fn binary() -> Self {
        Bounds::new(Some(Rational::ZERO), Some(Rational::ONE))
    }

    pub fn non_negative() -> Self {
        Bounds::new(Some(Rational::ZERO), None)
    }

    pub fn free() -> Self {
        Bounds::new(None, None)
    }

    pub fn range(lower: Rational, upper: Rational) -> Self {
        Bounds::new(Some(lower), Some(upper))
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub bounds: Bounds,
}

/// Sparse linear expression; duplicate variables are merged on insertion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinExpr {
    terms: BTreeMap<VarId, Rational>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, var: VarId, coef: impl Into<Rational>) -> Self {
        self.add_term(var, coef.into());
        self
    }

    pub fn add_term(&mut self, var: VarId, coef: Rational) {
        if coef.is_zero() {
            return;
        }
        let slot = self.terms.entry(var).or_insert(Rational::ZERO);
        *slot += &coef;
        if slot.is_zero() {
            self.terms.remove(&var);
        }
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: &Rational) {
        for (v, c) in &other.terms {
            self.add_term(*v, c * scale);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarId, &Rational)> {
        self.terms.iter().map(|(v, c)| (*v, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, values: &[Rational]) -> Rational {
        self.terms.iter().map(|(v, c)| c * &values[v.0]).sum()
    }
}

impl FromIterator<(VarId, Rational)> for LinExpr {
    fn from_iter<T: IntoIterator<Item = (VarId, Rational)>>(iter: T) -> Self {
        let mut e = LinExpr::new();
        for (v, c) in iter {
            e.add_term(v, c);
        }
        e
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn is_satisfied(&self, values: &[Rational]) -> bool {
        let lhs = self.expr.evaluate(values);
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
            Relation::Ge => lhs >= self.rhs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub sense: Sense,
    pub expr: LinExpr,
}

/// A mixed binary linear program with exact rational data.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Objective,
}

impl MilpModel {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        MilpModel {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective { sense, expr: LinExpr::new() },
        }
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.push_var(Variable { name: name.into(), kind: VarKind::Binary, bounds: Bounds::binary() })
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, bounds: Bounds) -> VarId {
        self.push_var(Variable { name: name.into(), kind: VarKind::Continuous, bounds })
    }

    fn push_var(&mut self, v: Variable) -> VarId {
        self.variables.push(v);
        VarId(self.variables.len() - 1)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        relation: Relation,
        rhs: impl Into<Rational>,
    ) {
        self.constraints.push(Constraint { name: name.into(), expr, relation, rhs: rhs.into() });
    }

    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective.expr = expr;
    }

    pub fn set_sense(&mut self, sense: Sense) {
        self.objective.sense = sense;
    }

    pub fn set_bounds(&mut self, var: VarId, bounds: Bounds) {
        self.variables[var.0].bounds = bounds;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn find_variable(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    /// Checks the structural invariants: every term names a declared
    /// variable, binaries are boxed in `[0, 1]`, and bounds are ordered.
    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.kind == VarKind::Binary && v.bounds != Bounds::binary() {
                let ok = matches!(
                    (&v.bounds.lower, &v.bounds.upper),
                    (Some(l), Some(u)) if *l >= Rational::ZERO && *u <= Rational::ONE && l.is_integer() && u.is_integer()
                );
                if !ok {
                    return Err(MilpError::Malformed(format!("binary `{}` must lie in [0, 1]", v.name)));
                }
            }
            if let (Some(l), Some(u)) = (&v.bounds.lower, &v.bounds.upper) {
                if l > u {
                    return Err(MilpError::Malformed(format!("variable `{}` has lower > upper", v.name)));
                }
            }
        }
        let check = |e: &LinExpr, what: &str| -> Result<(), MilpError> {
            match e.terms().find(|(v, _)| v.0 >= n) {
                Some((v, _)) => Err(MilpError::Malformed(format!("{what} references undeclared variable #{}", v.0))),
                None => Ok(()),
            }
        };
        for c in &self.constraints {
            check(&c.expr, &format!("constraint `{}`", c.name))?;
        }
        check(&self.objective.expr, "objective")
    }

    /// Exact feasibility of a full assignment, including bounds and integrality.
    pub fn is_feasible(&self, values: &[Rational]) -> bool {
        if values.len() != self.variables.len() {
            return false;
        }
        let in_bounds = self.variables.iter().zip(values).all(|(v, x)| {
            v.bounds.lower.as_ref().is_none_or(|l| x >= l)
                && v.bounds.upper.as_ref().is_none_or(|u| x <= u)
                && (v.kind != VarKind::Binary || x.is_integer())
        });
        in_bounds && self.constraints.iter().all(|c| c.is_satisfied(values))
    }
}
