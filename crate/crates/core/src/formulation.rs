//! Integer programming formulations of maximum cycle packing.

use ikep_milp::{Bounds, LinExpr, MilpModel, Rational, Relation, Sense, VarId};

use crate::graph::CompatibilityGraph;
use crate::packing::{packing_from_successors, CyclePacking, ExchangeBound};

#[derive(Debug, Clone, Copy)]
enum Choice {
    /// Arc variable `e_uv` (local indices).
    Arc(usize, usize),
    /// Two-cycle variable `y_uv` with `u < v`.
    Pair(usize, usize),
}

/// A packing model whose first variables are the arc (or 2-cycle) choices.
/// Callers add further variables, rows and an objective.
#[derive(Debug, Clone)]
pub struct PackingModel {
    pub model: MilpModel,
    choices: Vec<(VarId, Choice)>,
}

impl PackingModel {
    pub fn for_bound(g: &CompatibilityGraph, bound: ExchangeBound, name: &str) -> Self {
        match bound {
            ExchangeBound::Infinity => PackingModel::edge(g, name),
            ExchangeBound::Two => PackingModel::matching(g, name),
        }
    }

    /// Edge formulation: one binary per arc, flow conservation and unit
    /// in-degree capacity at every vertex.
    pub fn edge(g: &CompatibilityGraph, name: &str) -> Self {
        let mut model = MilpModel::new(name, Sense::Maximize);
        let mut choices = Vec::with_capacity(g.arc_count());
        let mut inflow = vec![LinExpr::new(); g.vertex_count()];
        let mut outflow = vec![LinExpr::new(); g.vertex_count()];
        for (u, v) in g.local_arcs() {
            let e = model.add_binary(format!("e_{}_{}", g.id(u), g.id(v)));
            choices.push((e, Choice::Arc(u, v)));
            outflow[u].add_term(e, Rational::ONE);
            inflow[v].add_term(e, Rational::ONE);
        }
        for v in 0..g.vertex_count() {
            let mut kirchhoff = inflow[v].clone();
            kirchhoff.add_expr(&outflow[v], &-Rational::ONE);
            model.add_constraint(format!("flow_{}", g.id(v)), kirchhoff, Relation::Eq, 0);
        }
        for (v, expr) in inflow.into_iter().enumerate() {
            model.add_constraint(format!("indeg_{}", g.id(v)), expr, Relation::Le, 1);
        }
        PackingModel { model, choices }
    }

    /// Matching formulation over reciprocated arcs.
    pub fn matching(g: &CompatibilityGraph, name: &str) -> Self {
        let mut model = MilpModel::new(name, Sense::Maximize);
        let mut choices = Vec::new();
        let mut degree = vec![LinExpr::new(); g.vertex_count()];
        for (u, v) in g.local_arcs() {
            if u < v && g.has_local_arc(v, u) {
                let y = model.add_binary(format!("y_{}_{}", g.id(u), g.id(v)));
                choices.push((y, Choice::Pair(u, v)));
                degree[u].add_term(y, Rational::ONE);
                degree[v].add_term(y, Rational::ONE);
            }
        }
        for (v, expr) in degree.into_iter().enumerate() {
            if !expr.is_empty() {
                model.add_constraint(format!("deg_{}", g.id(v)), expr, Relation::Le, 1);
            }
        }
        PackingModel { model, choices }
    }

    pub fn choice_count(&self) -> usize {
        self.choices.len()
    }

    /// Fixes arcs between distinct strongly connected components to zero;
    /// no cycle can use them.
    pub fn fix_acyclic_arcs(&mut self, g: &CompatibilityGraph) {
        let comp = g.strongly_connected_components();
        for &(var, choice) in &self.choices {
            if let Choice::Arc(u, v) = choice {
                if comp[u] != comp[v] {
                    self.model.set_bounds(var, Bounds::range(Rational::ZERO, Rational::ZERO));
                }
            }
        }
    }

    /// Number of arcs in the packing.
    pub fn size_expr(&self) -> LinExpr {
        let mut e = LinExpr::new();
        for &(var, choice) in &self.choices {
            let w = match choice {
                Choice::Arc(..) => 1,
                Choice::Pair(..) => 2,
            };
            e.add_term(var, Rational::from(w));
        }
        e
    }

    /// `s_p` for every country.
    pub fn received_exprs(&self, g: &CompatibilityGraph) -> Vec<LinExpr> {
        let mut s = vec![LinExpr::new(); g.country_count()];
        for &(var, choice) in &self.choices {
            match choice {
                Choice::Arc(_, v) => s[g.country_of_local(v)].add_term(var, Rational::ONE),
                Choice::Pair(u, v) => {
                    s[g.country_of_local(u)].add_term(var, Rational::ONE);
                    s[g.country_of_local(v)].add_term(var, Rational::ONE);
                }
            }
        }
        s
    }

    pub fn decode(&self, g: &CompatibilityGraph, values: &[Rational]) -> CyclePacking {
        let mut succ: Vec<usize> = (0..g.vertex_count()).collect();
        for &(var, choice) in &self.choices {
            if values[var.0] != Rational::ONE {
                continue;
            }
            match choice {
                Choice::Arc(u, v) => succ[u] = v,
                Choice::Pair(u, v) => {
                    succ[u] = v;
                    succ[v] = u;
                }
            }
        }
        packing_from_successors(g, &succ)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::three_country;
    use ikep_milp::{export_lp, solve, SolveLimits};

    #[test]
    fn three_country_edge_formulation_shape() {
        let g = three_country();
        let mut pm = PackingModel::edge(&g, "three_country");
        pm.model.set_objective(pm.size_expr());
        assert_eq!(pm.model.variables().len(), 9);
        assert_eq!(pm.model.constraints().len(), 12);
        let text = export_lp(&pm.model);
        assert!(text.contains(" flow_0: - 1 e_0_1 + 1 e_2_0 = 0"), "{text}");
        let sol = solve(&pm.model, &SolveLimits::default()).unwrap();
        assert_eq!(sol.objective, Some(Rational::from(5)));
        assert_eq!(pm.decode(&g, &sol.values), crate::packing::max_cycle_packing(&g));
    }

    #[test]
    fn acyclic_arc_fixing_keeps_optimum() {
        let g = three_country();
        let mut pm = PackingModel::edge(&g, "three_country");
        pm.fix_acyclic_arcs(&g);
        pm.model.set_objective(pm.size_expr());
        let sol = solve(&pm.model, &SolveLimits::default()).unwrap();
        assert_eq!(sol.objective, Some(Rational::from(5)));
    }
}
