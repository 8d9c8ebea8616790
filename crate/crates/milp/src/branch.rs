//! Depth-first branch-and-bound over binary variables.

use std::time::{Duration, Instant};

use crate::model::{Bounds, MilpModel, Sense, VarKind};
use crate::rational::Rational;
use crate::simplex::{solve_relaxation, LpOutcome};
use crate::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveLimits {
    pub max_nodes: usize,
    /// Wall-clock cap. Leave `None` for reproducible runs.
    pub time_limit: Option<Duration>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { max_nodes: 200_000, time_limit: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    CapExceeded,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_solves: usize,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Objective of the best assignment found (the optimum when `Optimal`).
    pub objective: Option<Rational>,
    /// One value per model variable; empty unless an assignment was found.
    pub values: Vec<Rational>,
    pub stats: SolveStats,
}

impl MilpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, var: crate::VarId) -> &Rational {
        &self.values[var.0]
    }
}

struct Node {
    fixings: Vec<(usize, bool)>,
    parent_bound: Option<Rational>,
}

/// Solves `model` to proven optimality (or reports infeasibility).
///
/// Branches on the fractional binary closest to 1/2, lowest index on ties,
/// exploring the child nearer the relaxation value first.
pub fn solve(model: &MilpModel, limits: &SolveLimits) -> Result<MilpSolution, MilpError> {
    model.validate()?;
    let started = Instant::now();
    let base: Vec<Bounds> = model.variables().iter().map(|v| v.bounds.clone()).collect();
    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let maximize = model.objective().sense == Sense::Maximize;
    // Internal objective is minimized: z' = sign * z.
    let to_internal = |z: &Rational| if maximize { -z } else { z.clone() };
    let integral_objective = model.objective().expr.terms().all(|(v, c)| {
        c.is_integer() && model.variable(v).kind == VarKind::Binary
    });
    let half = Rational::new(1, 2);

    let mut stats = SolveStats::default();
    let mut incumbent: Option<(Rational, Vec<Rational>)> = None;
    let mut stack = vec![Node { fixings: Vec::new(), parent_bound: None }];

    while let Some(node) = stack.pop() {
        if let (Some(pb), Some((inc, _))) = (&node.parent_bound, &incumbent) {
            if pb >= inc {
                continue;
            }
        }
        let out_of_time = limits.time_limit.is_some_and(|t| started.elapsed() > t);
        if stats.nodes >= limits.max_nodes || out_of_time {
            return Ok(finish(SolveStatus::CapExceeded, incumbent, maximize, stats));
        }
        stats.nodes += 1;

        let mut bounds = base.clone();
        for &(var, up) in &node.fixings {
            let v = if up { Rational::ONE } else { Rational::ZERO };
            bounds[var] = Bounds::range(v.clone(), v);
        }
        stats.lp_solves += 1;
        let (z, values) = match solve_relaxation(model, &bounds) {
            LpOutcome::Optimal { objective, values } => (to_internal(&objective), values),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => return Err(MilpError::Unbounded),
            LpOutcome::PivotLimit => return Ok(finish(SolveStatus::CapExceeded, incumbent, maximize, stats)),
        };
        let bound = if integral_objective { z.ceil() } else { z.clone() };
        if let Some((inc, _)) = &incumbent {
            if bound >= *inc {
                continue;
            }
        }

        let mut branch: Option<(usize, Rational)> = None;
        for &j in &binaries {
            let x = &values[j];
            if x.is_integer() {
                continue;
            }
            let dist = (x - &half).abs();
            if branch.as_ref().is_none_or(|(_, d)| dist < *d) {
                branch = Some((j, dist));
            }
        }
        match branch {
            None => incumbent = Some((z, values)),
            Some((j, _)) => {
                let up_first = values[j] >= half;
                for up in [!up_first, up_first] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, up));
                    stack.push(Node { fixings, parent_bound: Some(bound.clone()) });
                }
            }
        }
    }

    let status = if incumbent.is_some() { SolveStatus::Optimal } else { SolveStatus::Infeasible };
    Ok(finish(status, incumbent, maximize, stats))
}

fn finish(
    status: SolveStatus,
    incumbent: Option<(Rational, Vec<Rational>)>,
    maximize: bool,
    stats: SolveStats,
) -> MilpSolution {
    match incumbent {
        Some((z, values)) => MilpSolution {
            status,
            objective: Some(if maximize { -z } else { z }),
            values,
            stats,
        },
        None => MilpSolution { status, objective: None, values: Vec::new(), stats },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, Relation};

    #[test]
    fn two_binaries_sharing_capacity() {
        let mut m = MilpModel::new("t", Sense::Maximize);
        let a = m.add_binary("x1");
        let b = m.add_binary("x2");
        m.add_constraint("cap", LinExpr::new().term(a, 1).term(b, 1), Relation::Le, 1);
        m.set_objective(LinExpr::new().term(a, 1).term(b, 1));
        let s = solve(&m, &SolveLimits::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(Rational::ONE));
        assert!(m.is_feasible(&s.values));
    }

    #[test]
    fn relaxation_fractional_integer_optimum_lower() {
        // Odd cycle matching: LP gives 3/2, ILP gives 1.
        let mut m = MilpModel::new("tri", Sense::Maximize);
        let e: Vec<_> = (0..3).map(|i| m.add_binary(format!("e{i}"))).collect();
        for v in 0..3 {
            let expr = LinExpr::new().term(e[v], 1).term(e[(v + 2) % 3], 1);
            m.add_constraint(format!("v{v}"), expr, Relation::Le, 1);
        }
        m.set_objective(e.iter().map(|x| (*x, Rational::ONE)).collect());
        let s = solve(&m, &SolveLimits::default()).unwrap();
        assert_eq!(s.objective, Some(Rational::ONE));
        assert!(s.stats.nodes > 1);
    }

    #[test]
    fn infeasible_is_a_status() {
        let mut m = MilpModel::new("t", Sense::Minimize);
        let a = m.add_binary("a");
        m.add_constraint("half", LinExpr::new().term(a, 2), Relation::Eq, 1);
        let s = solve(&m, &SolveLimits::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.values.is_empty());
    }

    #[test]
    fn node_cap_reports_cap_exceeded() {
        let mut m = MilpModel::new("tri", Sense::Maximize);
        let e: Vec<_> = (0..3).map(|i| m.add_binary(format!("e{i}"))).collect();
        for v in 0..3 {
            let expr = LinExpr::new().term(e[v], 1).term(e[(v + 2) % 3], 1);
            m.add_constraint(format!("v{v}"), expr, Relation::Le, 1);
        }
        m.set_objective(e.iter().map(|x| (*x, Rational::ONE)).collect());
        let s = solve(&m, &SolveLimits { max_nodes: 1, time_limit: None }).unwrap();
        assert_eq!(s.status, SolveStatus::CapExceeded);
    }
}
