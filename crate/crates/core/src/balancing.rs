//! Maximum cycle packings that are weakly or strongly close to a target
//! allocation, found by a ladder of integer programs.
//!
//! Level `t` first minimizes the largest deviation `d_t` over countries not
//! fixed at earlier levels (`ilp_d{t}`), then minimizes how many countries
//! attain it (`ilp_N{t}`). Countries are fixed through binaries `z^i_p` whose
//! per-level counts are pinned, so no particular set of fixed countries is
//! ever committed to.

use std::path::PathBuf;

use ikep_milp::{export_lp, solve, Bounds, LinExpr, MilpError, MilpModel, Relation, Sense, SolveLimits, SolveStatus, VarId};
use serde::Serialize;
use thiserror::Error;

use crate::formulation::PackingModel;
use crate::graph::CompatibilityGraph;
use crate::packing::{max_packing_size, max_packing_support, transplant_vector, CyclePacking, ExchangeBound, PackingError};
use crate::Rational;

#[derive(Debug, Error)]
pub enum BalancingError {
    #[error(transparent)]
    Packing(#[from] PackingError),
    #[error(transparent)]
    Solver(#[from] MilpError),
    #[error("model {0} is infeasible")]
    Infeasible(String),
    #[error("model {0} hit the solver node limit")]
    SolverLimit(String),
    #[error("target has {got} entries for {expected} countries")]
    Length { expected: usize, got: usize },
    #[error("cannot write model dump: {0}")]
    Export(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct BalancingOptions {
    pub bound: ExchangeBound,
    pub limits: SolveLimits,
    /// Writes every ladder model as `ilp_d{t}.lp` / `ilp_N{t}.lp` here.
    pub export_dir: Option<PathBuf>,
    pub solve: LadderSolve,
}

impl Default for BalancingOptions {
    fn default() -> Self {
        BalancingOptions {
            bound: ExchangeBound::Infinity,
            limits: SolveLimits::default(),
            export_dir: None,
            solve: LadderSolve::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationLevel {
    pub deviation: Rational,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Terminal {
    AllCountriesFixed,
    HalfThreshold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviationProfile {
    pub levels: Vec<DeviationLevel>,
    pub terminal: Terminal,
}

#[derive(Debug, Clone)]
pub struct WeaklyClose {
    pub packing: CyclePacking,
    pub deviation: Rational,
}

#[derive(Debug, Clone)]
pub struct StronglyClose {
    pub packing: CyclePacking,
    pub profile: DeviationProfile,
    /// Ladder models resolved, one per `ilp_d{t}` or `ilp_N{t}`.
    pub solver_calls: usize,
    /// Branch-and-bound runs behind those models. An `ilp_N{t}` settled by
    /// its `ilp_d{t}` witness needs none.
    pub milp_solves: usize,
}

/// Half the smallest positive gap among `{frac(x_p), 1 − frac(x_p)} ∪ {1}`.
/// Deviations `|x_p − s_p|` have fractional part `frac(x_p)` or
/// `1 − frac(x_p)`, so distinct deviations differ by more than this.
pub fn epsilon_for(x: &[Rational]) -> Rational {
    let mut cands = vec![Rational::ONE];
    for xp in x {
        let f = xp.fract_floor();
        cands.push(&Rational::ONE - &f);
        cands.push(f);
    }
    cands.sort();
    cands.dedup();
    let delta = cands.windows(2).map(|w| &w[1] - &w[0]).min().unwrap_or(Rational::ONE);
    delta * Rational::new(1, 2)
}

/// `|x_p − s_p(C)|` sorted non-increasingly.
pub fn sorted_deviation_vector(
    c: &CyclePacking,
    g: &CompatibilityGraph,
    x: &[Rational],
) -> Result<Vec<Rational>, PackingError> {
    let s = transplant_vector(c, g)?;
    let mut d: Vec<Rational> = x.iter().zip(&s.0).map(|(xp, &sp)| (xp - &Rational::from(sp)).abs()).collect();
    d.sort_by(|a, b| b.cmp(a));
    Ok(d)
}

/// How each ladder model is solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LadderSolve {
    /// Transplant counts are integral, so every deviation bound becomes an
    /// integer window on `s_p`. `ilp_d{t}` is then a search over the finite
    /// set of attainable deviations with one feasibility program per probe,
    /// and `ilp_N{t}` is solved over integral windows. Same optima as the
    /// literal models with much tighter relaxations.
    #[default]
    Tightened,
    /// Branch-and-bound directly on the exported models.
    Literal,
}

/// Integers `k ∈ [0, cap]` with `|x − k| ≤ c`, or `< c` when `strict`.
/// The window is empty when `lo > hi`.
fn window(x: &Rational, c: &Rational, strict: bool, cap: usize) -> (i64, i64) {
    let int = |r: Rational| r.to_i64().expect("window bounds fit in i64");
    let (lo, hi) = if strict {
        (int((x - c).floor()) + 1, int((x + c).ceil()) - 1)
    } else {
        (int((x - c).ceil()), int((x + c).floor()))
    };
    (lo.max(0), hi.min(cap as i64))
}

struct Ladder<'a> {
    g: &'a CompatibilityGraph,
    /// Graph the windowed models are built on: `g` itself, or for ℓ = ∞
    /// only the arcs that can occur in a maximum packing.
    support: CompatibilityGraph,
    x: &'a [Rational],
    opts: &'a BalancingOptions,
    m_star: usize,
    dev_ub: Rational,
    sizes: Vec<usize>,
    calls: usize,
    solves: usize,
}

struct Built {
    pm: PackingModel,
    received: Vec<LinExpr>,
}

enum Probe {
    Found(Vec<Rational>),
    Infeasible,
}

impl Ladder<'_> {
    fn base(&self, g: &CompatibilityGraph, name: &str) -> Built {
        let mut pm = PackingModel::for_bound(g, self.opts.bound, name);
        pm.fix_acyclic_arcs(g);
        let size = pm.size_expr();
        pm.model.add_constraint("size", size, Relation::Eq, self.m_star);
        let received = pm.received_exprs(g);
        Built { pm, received }
    }

    fn export(&self, model: &MilpModel) -> Result<(), BalancingError> {
        if let Some(dir) = &self.opts.export_dir {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{}.lp", model.name)), export_lp(model))?;
        }
        Ok(())
    }

    fn probe(&mut self, model: &MilpModel) -> Result<Probe, BalancingError> {
        self.solves += 1;
        let sol = solve(model, &self.opts.limits)?;
        match sol.status {
            SolveStatus::Optimal => Ok(Probe::Found(sol.values)),
            SolveStatus::Infeasible => Ok(Probe::Infeasible),
            SolveStatus::CapExceeded => Err(BalancingError::SolverLimit(model.name.clone())),
        }
    }

    fn run(&mut self, model: &MilpModel) -> Result<Vec<Rational>, BalancingError> {
        match self.probe(model)? {
            Probe::Found(values) => Ok(values),
            Probe::Infeasible => Err(BalancingError::Infeasible(model.name.clone())),
        }
    }

    fn level_binaries(m: &mut MilpModel, level: usize, n: usize) -> Vec<VarId> {
        (0..n).map(|p| m.add_binary(format!("z{level}_{}", p + 1))).collect()
    }

    /// Rows shared by both models: each country is fixed at most once,
    /// fixed countries stay within their level deviation, and every earlier
    /// level fixes exactly its recorded number of countries.
    fn fixing_rows(&self, m: &mut MilpModel, z: &[Vec<VarId>], devs: &[Rational], l_big: &Rational, s: &[LinExpr], counts: &[usize]) {
        let n = self.g.country_count();
        for p in 0..n {
            if z.len() >= 2 {
                let once: LinExpr = z.iter().map(|zi| (zi[p], Rational::ONE)).collect();
                m.add_constraint(format!("once_{}", p + 1), once, Relation::Le, 1);
            }
            if z.is_empty() {
                continue;
            }
            // |s_p − x_p| ≤ Σ_i z^i_p d_i + (1 − Σ_i z^i_p) L
            let mut slack = LinExpr::new();
            for (zi, d) in z.iter().zip(devs) {
                slack.add_term(zi[p], l_big - d);
            }
            let mut up = s[p].clone();
            up.add_expr(&slack, &Rational::ONE);
            m.add_constraint(format!("capup_{}", p + 1), up, Relation::Le, &self.x[p] + l_big);
            let mut down = slack;
            down.add_expr(&s[p], &-Rational::ONE);
            m.add_constraint(format!("capdown_{}", p + 1), down, Relation::Le, l_big - &self.x[p]);
        }
        pin_counts(m, z, counts);
    }

    /// Literal `ilp_d{t}`: minimize the largest deviation among unfixed
    /// countries.
    fn literal_ilp_d(&self, levels: &[DeviationLevel], l_big: &Rational) -> (PackingModel, VarId) {
        let t = levels.len() + 1;
        let n = self.g.country_count();
        let Built { mut pm, received: s } = self.base(self.g, &format!("ilp_d{t}"));
        let m = &mut pm.model;
        let z: Vec<Vec<VarId>> = (1..t).map(|i| Self::level_binaries(m, i, n)).collect();
        let d = m.add_continuous(format!("d{t}"), Bounds::range(Rational::ZERO, self.dev_ub.clone()));
        let devs: Vec<Rational> = levels.iter().map(|l| l.deviation.clone()).collect();
        for p in 0..n {
            // ±(s_p − x_p) − d − Σ_i z^i_p d_i ≤ 0
            let mut fixed = LinExpr::new().term(d, -1);
            for (zi, di) in z.iter().zip(&devs) {
                fixed.add_term(zi[p], -di);
            }
            let mut up = s[p].clone();
            up.add_expr(&fixed, &Rational::ONE);
            m.add_constraint(format!("up_{}", p + 1), up, Relation::Le, self.x[p].clone());
            let mut down = fixed;
            down.add_expr(&s[p], &-Rational::ONE);
            m.add_constraint(format!("down_{}", p + 1), down, Relation::Le, -&self.x[p]);
        }
        let counts: Vec<usize> = levels.iter().map(|l| l.count).collect();
        self.fixing_rows(m, &z, &devs, l_big, &s, &counts);
        m.set_objective(LinExpr::new().term(d, 1));
        m.set_sense(Sense::Minimize);
        (pm, d)
    }

    /// Literal `ilp_N{t}`: minimize the number of unfixed countries whose
    /// deviation cannot be pushed to `d_t − ε` or below.
    fn literal_ilp_n(&self, levels: &[DeviationLevel], d_t: &Rational, eps: &Rational, l_big: &Rational) -> (PackingModel, LinExpr) {
        let t = levels.len() + 1;
        let n = self.g.country_count();
        let Built { mut pm, received: s } = self.base(self.g, &format!("ilp_N{t}"));
        let m = &mut pm.model;
        let z: Vec<Vec<VarId>> = (1..=t).map(|i| Self::level_binaries(m, i, n)).collect();
        for p in 0..n {
            // ±(s_p − x_p) − ε z^t_p − L Σ_{i<t} z^i_p ≤ d_t − ε
            let mut relief = LinExpr::new().term(z[t - 1][p], -eps);
            for zi in &z[..t - 1] {
                relief.add_term(zi[p], -l_big);
            }
            let rhs = d_t - eps;
            let mut up = s[p].clone();
            up.add_expr(&relief, &Rational::ONE);
            m.add_constraint(format!("up_{}", p + 1), up, Relation::Le, &rhs + &self.x[p]);
            let mut down = relief;
            down.add_expr(&s[p], &-Rational::ONE);
            m.add_constraint(format!("down_{}", p + 1), down, Relation::Le, &rhs - &self.x[p]);
        }
        if t >= 2 {
            let mut devs: Vec<Rational> = levels.iter().map(|l| l.deviation.clone()).collect();
            devs.push(d_t.clone());
            let counts: Vec<usize> = levels.iter().map(|l| l.count).collect();
            self.fixing_rows(m, &z, &devs, l_big, &s, &counts);
        }
        let objective: LinExpr = z[t - 1].iter().map(|v| (*v, Rational::ONE)).collect();
        m.set_objective(objective.clone());
        m.set_sense(Sense::Minimize);
        (pm, objective)
    }

    /// Packing model where country `p` is either open, with `s_p` in
    /// `open[p]`, or fixed at exactly one level `i` with `s_p` in
    /// `fixed[i][p]`. Levels below `counts.len()` fix exactly `counts[i]`.
    fn windowed(&self, name: &str, open: &[(i64, i64)], fixed: &[Vec<(i64, i64)>], counts: &[usize]) -> (PackingModel, Vec<Vec<VarId>>) {
        let n = self.g.country_count();
        let Built { mut pm, received: s } = self.base(&self.support, name);
        let m = &mut pm.model;
        let z: Vec<Vec<VarId>> = (1..=fixed.len()).map(|i| Self::level_binaries(m, i, n)).collect();
        for p in 0..n {
            let (lo0, hi0) = open[p];
            // a country with an empty window cannot sit at that level, and
            // one with an empty open window must be fixed somewhere
            for (zi, w) in z.iter().zip(fixed) {
                if w[p].0 > w[p].1 {
                    m.set_bounds(zi[p], Bounds::range(Rational::ZERO, Rational::ZERO));
                }
            }
            if !z.is_empty() && (z.len() >= 2 || lo0 > hi0) {
                let once: LinExpr = z.iter().map(|zi| (zi[p], Rational::ONE)).collect();
                let rel = if lo0 > hi0 { Relation::Eq } else { Relation::Le };
                m.add_constraint(format!("once_{}", p + 1), once, rel, 1);
            }
            // s_p ≤ hi0 + Σ_i z^i_p (hi_i − hi0), s_p ≥ lo0 + Σ_i z^i_p (lo_i − lo0)
            let mut up = s[p].clone();
            let mut down = LinExpr::new();
            down.add_expr(&s[p], &-Rational::ONE);
            for (zi, w) in z.iter().zip(fixed) {
                up.add_term(zi[p], Rational::from(hi0 - w[p].1));
                down.add_term(zi[p], Rational::from(w[p].0 - lo0));
            }
            m.add_constraint(format!("hi_{}", p + 1), up, Relation::Le, hi0);
            m.add_constraint(format!("lo_{}", p + 1), down, Relation::Le, -lo0);
        }
        pin_counts(m, &z, counts);
        m.set_sense(Sense::Minimize);
        (pm, z)
    }

    fn windows(&self, c: &Rational, strict: bool) -> Vec<(i64, i64)> {
        self.x.iter().zip(&self.sizes).map(|(xp, &cap)| window(xp, c, strict, cap)).collect()
    }

    /// Also returns, for the tightened models, how many unfixed countries
    /// sit exactly at the optimum in the returned packing.
    fn ilp_d(
        &mut self,
        levels: &[DeviationLevel],
        l_big: &Rational,
    ) -> Result<(Rational, CyclePacking, Option<usize>), BalancingError> {
        let (literal, d) = self.literal_ilp_d(levels, l_big);
        self.export(&literal.model)?;
        self.calls += 1;
        if self.opts.solve == LadderSolve::Literal {
            let values = self.run(&literal.model)?;
            return Ok((values[d.0].clone(), literal.decode(self.g, &values), None));
        }
        let t = levels.len() + 1;
        let fixed: Vec<Vec<(i64, i64)>> = levels.iter().map(|l| self.windows(&l.deviation, false)).collect();
        let counts: Vec<usize> = levels.iter().map(|l| l.count).collect();
        // the optimum is the deviation of some country, strictly below the
        // previous level
        let mut cands: Vec<Rational> = self
            .x
            .iter()
            .zip(&self.sizes)
            .flat_map(|(xp, &cap)| (0..=cap).map(move |k| (xp - &Rational::from(k)).abs()))
            .filter(|c| levels.last().is_none_or(|l| *c < l.deviation))
            .collect();
        cands.sort();
        cands.dedup();
        let (mut lo, mut hi) = (0usize, cands.len());
        let mut best: Option<(Rational, CyclePacking, Option<usize>)> = None;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (pm, z) = self.windowed(&format!("ilp_d{t}_probe"), &self.windows(&cands[mid], false), &fixed, &counts);
            match self.probe(&pm.model)? {
                Probe::Found(values) => {
                    let packing = pm.decode(self.g, &values);
                    let s = transplant_vector(&packing, self.g)?;
                    let at_optimum = (0..self.x.len())
                        .filter(|&p| z.iter().all(|zi| values[zi[p].0].is_zero()))
                        .filter(|&p| (&self.x[p] - &Rational::from(s.0[p])).abs() == cands[mid])
                        .count();
                    best = Some((cands[mid].clone(), packing, Some(at_optimum)));
                    hi = mid;
                }
                Probe::Infeasible => lo = mid + 1,
            }
        }
        best.ok_or_else(|| BalancingError::Infeasible(literal.model.name.clone()))
    }

    /// `witness` is the `ilp_d` packing with its count of unfixed countries
    /// at `d_t`. At least one unfixed country always reaches `d_t`, so a
    /// witness count of 1 is already optimal.
    fn ilp_n(
        &mut self,
        levels: &[DeviationLevel],
        d_t: &Rational,
        eps: &Rational,
        l_big: &Rational,
        witness: (&CyclePacking, Option<usize>),
    ) -> Result<(usize, CyclePacking), BalancingError> {
        let (literal, objective) = self.literal_ilp_n(levels, d_t, eps, l_big);
        self.export(&literal.model)?;
        self.calls += 1;
        if witness.1 == Some(1) {
            return Ok((1, witness.0.clone()));
        }
        let count_of = |expr: &LinExpr, values: &[Rational]| {
            expr.evaluate(values).to_i64().expect("count of binaries is integral") as usize
        };
        if self.opts.solve == LadderSolve::Literal {
            let values = self.run(&literal.model)?;
            return Ok((count_of(&objective, &values), literal.decode(self.g, &values)));
        }
        let mut fixed: Vec<Vec<(i64, i64)>> = levels.iter().map(|l| self.windows(&l.deviation, false)).collect();
        fixed.push(self.windows(d_t, false));
        let counts: Vec<usize> = levels.iter().map(|l| l.count).collect();
        let (mut pm, z) = self.windowed(&literal.model.name, &self.windows(d_t, true), &fixed, &counts);
        let objective: LinExpr = z[levels.len()].iter().map(|v| (*v, Rational::ONE)).collect();
        // some unfixed country reaches d_t, or d_t would not be minimal
        pm.model.add_constraint("reach", objective.clone(), Relation::Ge, 1);
        pm.model.set_objective(objective.clone());
        let values = self.run(&pm.model)?;
        Ok((count_of(&objective, &values), pm.decode(self.g, &values)))
    }
}

fn pin_counts(m: &mut MilpModel, z: &[Vec<VarId>], counts: &[usize]) {
    for (i, &count) in counts.iter().enumerate() {
        let sum: LinExpr = z[i].iter().map(|v| (*v, Rational::ONE)).collect();
        m.add_constraint(format!("count_{}", i + 1), sum, Relation::Eq, count);
    }
}

fn ladder<'a>(
    g: &'a CompatibilityGraph,
    x: &'a [Rational],
    m_star: usize,
    opts: &'a BalancingOptions,
) -> Result<Ladder<'a>, BalancingError> {
    if x.len() != g.country_count() {
        return Err(BalancingError::Length { expected: g.country_count(), got: x.len() });
    }
    let max_abs = x.iter().map(Rational::abs).max().unwrap_or(Rational::ZERO);
    let support = match (opts.solve, opts.bound) {
        (LadderSolve::Tightened, ExchangeBound::Infinity) => max_packing_support(g),
        _ => g.clone(),
    };
    Ok(Ladder {
        g,
        support,
        x,
        opts,
        m_star,
        dev_ub: max_abs + Rational::from(m_star),
        sizes: g.country_sizes(),
        calls: 0,
        solves: 0,
    })
}

/// A maximum packing minimizing the largest country deviation.
pub fn weakly_close(
    g: &CompatibilityGraph,
    x: &[Rational],
    opts: &BalancingOptions,
) -> Result<WeaklyClose, BalancingError> {
    let m_star = max_packing_size(g, opts.bound)?;
    weakly_close_with_optimum(g, x, m_star, opts)
}

/// As [`weakly_close`] with the maximum packing size `m_star` supplied.
pub fn weakly_close_with_optimum(
    g: &CompatibilityGraph,
    x: &[Rational],
    m_star: usize,
    opts: &BalancingOptions,
) -> Result<WeaklyClose, BalancingError> {
    let mut l = ladder(g, x, m_star, opts)?;
    let (deviation, packing, _) = l.ilp_d(&[], &Rational::ZERO)?;
    Ok(WeaklyClose { packing, deviation })
}

/// A maximum packing whose sorted deviation vector is lexicographically
/// minimal.
pub fn strongly_close(
    g: &CompatibilityGraph,
    x: &[Rational],
    opts: &BalancingOptions,
) -> Result<StronglyClose, BalancingError> {
    let m_star = max_packing_size(g, opts.bound)?;
    strongly_close_with_optimum(g, x, m_star, opts)
}

pub fn strongly_close_with_optimum(
    g: &CompatibilityGraph,
    x: &[Rational],
    m_star: usize,
    opts: &BalancingOptions,
) -> Result<StronglyClose, BalancingError> {
    let mut l = ladder(g, x, m_star, opts)?;
    let n = g.country_count();
    if g.is_empty() || n == 0 {
        return Ok(StronglyClose {
            packing: CyclePacking::empty(),
            profile: DeviationProfile { levels: Vec::new(), terminal: Terminal::AllCountriesFixed },
            solver_calls: 0,
            milp_solves: 0,
        });
    }
    let eps = epsilon_for(x);
    let half = Rational::new(1, 2);
    let mut levels: Vec<DeviationLevel> = Vec::new();
    let mut l_big = Rational::ZERO;
    loop {
        let (d_t, packing_d, at_optimum) = l.ilp_d(&levels, &l_big)?;
        if levels.is_empty() {
            l_big = &d_t + &Rational::ONE;
        }
        let (n_t, packing_n) = l.ilp_n(&levels, &d_t, &eps, &l_big, (&packing_d, at_optimum))?;
        levels.push(DeviationLevel { deviation: d_t.clone(), count: n_t });
        let fixed: usize = levels.iter().map(|lv| lv.count).sum();
        let (packing, terminal) = if d_t <= half {
            (packing_d, Terminal::HalfThreshold)
        } else if fixed >= n {
            (packing_n, Terminal::AllCountriesFixed)
        } else {
            continue;
        };
        return Ok(StronglyClose {
            packing,
            profile: DeviationProfile { levels, terminal },
            solver_calls: l.calls,
            milp_solves: l.solves,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{three_country, shared_hub, vid};
    use crate::packing::max_cycle_packing;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn dec(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_for(&[q(3, 2), q(7, 2), q(0, 1)]), q(1, 4));
        assert_eq!(epsilon_for(&[q(3, 1), q(-2, 1)]), q(1, 2));
        assert_eq!(epsilon_for(&[dec("0.4"), q(1, 1), dec("0.6")]), q(1, 10));
        assert_eq!(epsilon_for(&[]), q(1, 2));
    }

    #[test]
    fn sorted_deviation_examples() {
        let g = three_country();
        let p = max_cycle_packing(&g);
        assert_eq!(sorted_deviation_vector(&p, &g, &[q(3, 2), q(7, 2), q(0, 1)]).unwrap(), vec![q(3, 2), q(3, 2), q(0, 1)]);
        assert_eq!(sorted_deviation_vector(&p, &g, &[q(3, 1), q(2, 1), q(0, 1)]).unwrap(), vec![q(0, 1); 3]);
        let h = shared_hub();
        let ab = CyclePacking::new(vec![vec![vid('a'), vid('b')]]);
        let x = [dec("0.4"), q(1, 1), dec("0.6")];
        assert_eq!(sorted_deviation_vector(&ab, &h, &x).unwrap(), vec![dec("0.6"), dec("0.6"), q(0, 1)]);
    }

    #[test]
    fn shared_hub_prefers_b_c() {
        let h = shared_hub();
        let x = [dec("0.4"), q(1, 1), dec("0.6")];
        let opts = BalancingOptions::default();
        let w = weakly_close(&h, &x, &opts).unwrap();
        assert_eq!(w.packing, CyclePacking::new(vec![vec![vid('b'), vid('c')]]));
        assert_eq!(w.deviation, dec("0.4"));
        let s = strongly_close(&h, &x, &opts).unwrap();
        assert_eq!(s.packing, w.packing);
        assert_eq!(s.profile.levels, vec![DeviationLevel { deviation: dec("0.4"), count: 2 }]);
        assert_eq!(s.profile.terminal, Terminal::HalfThreshold);
        assert!(s.solver_calls <= 6);
    }

    #[test]
    fn three_country_with_shapley_target() {
        let g = three_country();
        let x = [q(3, 2), q(7, 2), q(0, 1)];
        let s = strongly_close(&g, &x, &BalancingOptions::default()).unwrap();
        assert_eq!(s.packing, max_cycle_packing(&g));
        assert_eq!(
            s.profile.levels,
            vec![DeviationLevel { deviation: q(3, 2), count: 2 }, DeviationLevel { deviation: q(0, 1), count: 1 }]
        );
        assert_eq!(s.profile.terminal, Terminal::HalfThreshold);
        assert_eq!(s.solver_calls, 4);
        let w = weakly_close(&g, &[q(7, 1), q(-1, 1), q(1, 3)], &BalancingOptions::default()).unwrap();
        assert_eq!(w.deviation, q(4, 1));
    }

    #[test]
    fn degenerate_inputs() {
        let acyclic = CompatibilityGraph::new(1, [(vid('a'), 0)], []).unwrap();
        let w = weakly_close(&acyclic, &[q(0, 1)], &BalancingOptions::default()).unwrap();
        assert!(w.packing.is_empty());
        assert_eq!(w.deviation, q(0, 1));
        let s = strongly_close(&CompatibilityGraph::empty(2), &[q(0, 1), q(0, 1)], &BalancingOptions::default()).unwrap();
        assert!(s.packing.is_empty());
        assert!(s.profile.levels.is_empty());
        assert_eq!(s.profile.terminal, Terminal::AllCountriesFixed);
        assert!(matches!(
            strongly_close(&three_country(), &[q(1, 1)], &BalancingOptions::default()),
            Err(BalancingError::Length { .. })
        ));
    }

    #[test]
    fn integer_targets_reach_all_fixed() {
        // two disjoint 2-cycles a<->b (country 1) and c<->d (country 2), x far off
        let g = CompatibilityGraph::new(
            2,
            [(vid('a'), 0), (vid('b'), 0), (vid('c'), 1), (vid('d'), 1)],
            [(vid('a'), vid('b')), (vid('b'), vid('a')), (vid('c'), vid('d')), (vid('d'), vid('c'))],
        )
        .unwrap();
        let s = strongly_close(&g, &[q(4, 1), q(0, 1)], &BalancingOptions::default()).unwrap();
        assert_eq!(s.profile.levels, vec![DeviationLevel { deviation: q(2, 1), count: 2 }]);
        assert_eq!(s.profile.terminal, Terminal::AllCountriesFixed);
    }

    #[test]
    fn ladder_models_are_exported() {
        let dir = std::env::temp_dir().join(format!("ikep-ladder-{}", std::process::id()));
        let opts = BalancingOptions { export_dir: Some(dir.clone()), ..BalancingOptions::default() };
        strongly_close(&three_country(), &[q(3, 2), q(7, 2), q(0, 1)], &opts).unwrap();
        for f in ["ilp_d1.lp", "ilp_N1.lp", "ilp_d2.lp", "ilp_N2.lp"] {
            let text = std::fs::read_to_string(dir.join(f)).unwrap();
            assert!(text.contains("Minimize") && text.contains(" size: "), "{f}");
        }
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn tightened_ladder_agrees_with_literal_models() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for case in 0..40 {
            let n = rng.random_range(1..=3);
            let nv: u32 = rng.random_range(2..=8);
            let mut arcs = Vec::new();
            for u in 0..nv {
                for v in 0..nv {
                    if u != v && rng.random_bool(0.35) {
                        arcs.push((crate::graph::VertexId(u), crate::graph::VertexId(v)));
                    }
                }
            }
            let verts = (0..nv).map(|i| (crate::graph::VertexId(i), rng.random_range(0..n)));
            let g = CompatibilityGraph::new(n, verts, arcs).unwrap();
            let m = max_cycle_packing(&g).size() as i64;
            // random target with denominators up to 6, summing to M*
            let mut x: Vec<Rational> = (0..n - 1).map(|_| q(rng.random_range(-6..=6 * m.max(1)), 6)).collect();
            let rest = x.iter().fold(Rational::from(m), |acc, v| &acc - v);
            x.push(rest);
            for bound in [ExchangeBound::Infinity, ExchangeBound::Two] {
                let tight = BalancingOptions { bound, ..BalancingOptions::default() };
                let literal = BalancingOptions { solve: LadderSolve::Literal, ..tight.clone() };
                let a = strongly_close(&g, &x, &tight).unwrap();
                let b = strongly_close(&g, &x, &literal).unwrap();
                assert_eq!(a.profile, b.profile, "case {case}");
                assert_eq!(a.solver_calls, b.solver_calls);
                assert_eq!(
                    sorted_deviation_vector(&a.packing, &g, &x).unwrap(),
                    sorted_deviation_vector(&b.packing, &g, &x).unwrap()
                );
                assert_eq!(weakly_close(&g, &x, &tight).unwrap().deviation, weakly_close(&g, &x, &literal).unwrap().deviation);
            }
        }
    }

    #[test]
    fn two_cycle_bound() {
        let g = three_country();
        let opts = BalancingOptions { bound: ExchangeBound::Two, ..BalancingOptions::default() };
        let s = strongly_close(&g, &[q(1, 1), q(1, 1), q(0, 1)], &opts).unwrap();
        assert_eq!(s.packing, CyclePacking::new(vec![vec![vid('d'), vid('e')]]));
    }
}
