//! Solution concepts, core construction and core membership tests.

use ikep_milp::{solve_relaxation, Bounds, LinExpr, LpOutcome, MilpModel, Relation, Sense, VarId};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::game::{Coalition, GameOracle, TuGame};
use crate::graph::CompatibilityGraph;
use crate::packing::max_cycle_packing_with_duals;
use crate::Rational;

/// Player cap of the sequential-LP nucleolus.
pub const NUCLEOLUS_MAX_PLAYERS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AllocationError {
    #[error("{players} players exceed the cap of {cap}")]
    CapExceeded { players: usize, cap: usize },
    #[error("the Banzhaf values sum to zero")]
    DegenerateGame,
    #[error("the {0} value is undefined: its denominator is zero")]
    ZeroDenominator(&'static str),
    #[error("partition width is {width}, but this test needs width at most 1")]
    WidthViolation { width: usize },
    #[error("no individually rational allocation exists")]
    EmptyImputationSet,
    #[error("allocation has {got} entries for {expected} countries")]
    Length { expected: usize, got: usize },
    #[error("linear program failed: {0}")]
    Lp(String),
}

/// One rational amount per country (0-based index).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Allocation(pub Vec<Rational>);

impl Allocation {
    pub fn zeros(n: usize) -> Self {
        Allocation(vec![Rational::ZERO; n])
    }

    pub fn from_integers(xs: &[i64]) -> Self {
        Allocation(xs.iter().map(|&x| Rational::from(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> Rational {
        self.0.iter().sum()
    }

    pub fn sum_over(&self, s: Coalition) -> Rational {
        s.members().take_while(|&p| p < self.0.len()).map(|p| &self.0[p]).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("allocation serialization cannot fail")
    }
}

#[derive(Serialize)]
struct Entry<'a> {
    exact: &'a Rational,
    decimal: f64,
}

impl Serialize for Allocation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (p, x) in self.0.iter().enumerate() {
            map.serialize_entry(&(p + 1).to_string(), &Entry { exact: x, decimal: x.to_f64() })?;
        }
        map.end()
    }
}

fn check_players(n: usize, cap: usize) -> Result<(), AllocationError> {
    if n > cap {
        return Err(AllocationError::CapExceeded { players: n, cap });
    }
    Ok(())
}

fn factorial(k: usize) -> i128 {
    (1..=k as i128).product()
}

/// Exact Shapley value.
pub fn shapley<G: TuGame + ?Sized>(game: &G) -> Result<Allocation, AllocationError> {
    let n = game.players();
    check_players(n, crate::game::MAX_PLAYERS)?;
    let weight: Vec<i128> = (0..n).map(|k| factorial(k) * factorial(n - k - 1)).collect();
    let total = factorial(n);
    let mut x = Vec::with_capacity(n);
    for p in 0..n {
        let mut acc: i128 = 0;
        for s in Coalition::all(n).filter(|s| !s.contains(p)) {
            let marginal = game.value(s.with(p)) - game.value(s);
            acc += weight[s.len()] * marginal as i128;
        }
        x.push(Rational::from_i128(acc, total));
    }
    Ok(Allocation(x))
}

/// Unnormalized Banzhaf value: average marginal contribution over all
/// coalitions not containing the player.
pub fn banzhaf_unnormalized<G: TuGame + ?Sized>(game: &G) -> Result<Vec<Rational>, AllocationError> {
    let n = game.players();
    check_players(n, crate::game::MAX_PLAYERS)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let denom = 1i128 << (n - 1);
    Ok((0..n)
        .map(|p| {
            let acc: i128 = Coalition::all(n)
                .filter(|s| !s.contains(p))
                .map(|s| (game.value(s.with(p)) - game.value(s)) as i128)
                .sum();
            Rational::from_i128(acc, denom)
        })
        .collect())
}

/// Banzhaf value rescaled to sum to `v(N)`.
pub fn banzhaf_normalized<G: TuGame + ?Sized>(game: &G) -> Result<Allocation, AllocationError> {
    let psi = banzhaf_unnormalized(game)?;
    let sum: Rational = psi.iter().sum();
    if sum.is_zero() {
        return Err(AllocationError::DegenerateGame);
    }
    let vn = Rational::from(game.value(Coalition::grand(game.players())));
    Ok(Allocation(psi.iter().map(|p| &(p * &vn) / &sum).collect()))
}

fn surplus_split<G: TuGame + ?Sized>(
    game: &G,
    what: &'static str,
    numerator: impl Fn(i64, i64, i64) -> i64,
) -> Result<Allocation, AllocationError> {
    let n = game.players();
    check_players(n, crate::game::MAX_PLAYERS)?;
    let grand = Coalition::grand(n);
    let vn = game.value(grand);
    let single: Vec<i64> = (0..n).map(|p| game.value(Coalition::singleton(p))).collect();
    let nums: Vec<i64> = (0..n).map(|p| numerator(vn, game.value(grand.without(p)), single[p])).collect();
    let denom: i64 = nums.iter().sum();
    if denom == 0 {
        return Err(AllocationError::ZeroDenominator(what));
    }
    let surp = vn - single.iter().sum::<i64>();
    Ok(Allocation(
        (0..n).map(|p| Rational::from(single[p]) + Rational::from_i128(nums[p] as i128 * surp as i128, denom as i128)).collect(),
    ))
}

/// `v({p}) + α_p · surp` with `α_p ∝ v(N) − v(N∖p) − v({p})`.
pub fn benefit_value<G: TuGame + ?Sized>(game: &G) -> Result<Allocation, AllocationError> {
    surplus_split(game, "benefit", |vn, rest, single| vn - rest - single)
}

/// `v({p}) + α_p · surp` with `α_p ∝ v(N) − v(N∖p)`.
pub fn contribution_value<G: TuGame + ?Sized>(game: &G) -> Result<Allocation, AllocationError> {
    surplus_split(game, "contribution", |vn, rest, _| vn - rest)
}

/// Excesses `x(S) − v(S)` of all non-empty proper coalitions, sorted
/// non-decreasingly.
pub fn excess_vector<G: TuGame + ?Sized>(game: &G, x: &Allocation) -> Vec<Rational> {
    let n = game.players();
    let grand = Coalition::grand(n);
    let mut e: Vec<Rational> = Coalition::all(n)
        .filter(|s| !s.is_empty() && *s != grand)
        .map(|s| x.sum_over(s) - Rational::from(game.value(s)))
        .collect();
    e.sort();
    e
}

/// Incremental row-echelon basis used to track which coalitions have a
/// determined value.
struct Span {
    rows: Vec<(usize, Vec<Rational>)>,
}

impl Span {
    fn reduce(&self, mut v: Vec<Rational>) -> Vec<Rational> {
        for (pivot, row) in &self.rows {
            if v[*pivot].is_zero() {
                continue;
            }
            let f = v[*pivot].clone();
            for (a, b) in v.iter_mut().zip(row) {
                a.sub_mul_assign(&f, b);
            }
        }
        v
    }

    fn contains(&self, v: Vec<Rational>) -> bool {
        self.reduce(v).iter().all(Rational::is_zero)
    }

    fn insert(&mut self, v: Vec<Rational>) -> bool {
        let mut r = self.reduce(v);
        let Some(pivot) = r.iter().position(|a| !a.is_zero()) else {
            return false;
        };
        let inv = r[pivot].recip();
        for a in r.iter_mut() {
            *a = &*a * &inv;
        }
        for (_, row) in self.rows.iter_mut() {
            if !row[pivot].is_zero() {
                let f = row[pivot].clone();
                for (a, b) in row.iter_mut().zip(&r) {
                    a.sub_mul_assign(&f, b);
                }
            }
        }
        self.rows.push((pivot, r));
        true
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }
}

fn indicator(s: Coalition, n: usize) -> Vec<Rational> {
    (0..n).map(|p| if s.contains(p) { Rational::ONE } else { Rational::ZERO }).collect()
}

struct NucleolusLp {
    model: MilpModel,
    x: Vec<VarId>,
}

fn coalition_expr(x: &[VarId], s: Coalition) -> LinExpr {
    s.members().map(|p| (x[p], Rational::ONE)).collect()
}

fn nucleolus_lp<G: TuGame + ?Sized>(
    game: &G,
    fixed: &[(Coalition, Rational)],
    free: &[Coalition],
    t_fixed: Option<&Rational>,
) -> NucleolusLp {
    let n = game.players();
    let mut model = MilpModel::new("nucleolus", Sense::Maximize);
    let x: Vec<VarId> = (0..n)
        .map(|p| {
            let lo = Rational::from(game.value(Coalition::singleton(p)));
            model.add_continuous(format!("x{}", p + 1), Bounds::new(Some(lo), None))
        })
        .collect();
    let t_bounds = match t_fixed {
        Some(t) => Bounds::range(t.clone(), t.clone()),
        None => Bounds::free(),
    };
    let t = model.add_continuous("t", t_bounds);
    let grand = Coalition::grand(n);
    model.add_constraint("efficiency", coalition_expr(&x, grand), Relation::Eq, game.value(grand));
    for (s, e) in fixed {
        let rhs = Rational::from(game.value(*s)) + e;
        model.add_constraint(format!("fixed_{}", s.0), coalition_expr(&x, *s), Relation::Eq, rhs);
    }
    for s in free {
        let expr = coalition_expr(&x, *s).term(t, -1);
        model.add_constraint(format!("free_{}", s.0), expr, Relation::Ge, game.value(*s));
    }
    model.set_objective(LinExpr::new().term(t, 1));
    NucleolusLp { model, x }
}

fn lp_optimum(model: &MilpModel) -> Result<(Rational, Vec<Rational>), AllocationError> {
    let bounds: Vec<Bounds> = model.variables().iter().map(|v| v.bounds.clone()).collect();
    match solve_relaxation(model, &bounds) {
        LpOutcome::Optimal { objective, values } => Ok((objective, values)),
        LpOutcome::Infeasible => Err(AllocationError::EmptyImputationSet),
        other => Err(AllocationError::Lp(format!("{other:?}"))),
    }
}

/// Nucleolus over individually rational allocations, by sequential LPs.
///
/// Each stage maximizes the smallest excess `t` among coalitions whose
/// excess is not yet determined. A coalition tight at the optimum is fixed
/// when maximizing its own excess with `t` held at the optimum cannot raise
/// it. Coalitions whose indicator lies in the span of the fixed ones drop
/// out; the loop ends when that span has full rank.
pub fn nucleolus<G: TuGame + ?Sized>(game: &G) -> Result<Allocation, AllocationError> {
    let n = game.players();
    check_players(n, NUCLEOLUS_MAX_PLAYERS)?;
    let grand = Coalition::grand(n);
    let singles: Rational = (0..n).map(|p| Rational::from(game.value(Coalition::singleton(p)))).sum();
    if singles > Rational::from(game.value(grand)) {
        return Err(AllocationError::EmptyImputationSet);
    }
    if n <= 1 {
        return Ok(Allocation((0..n).map(|_| Rational::from(game.value(grand))).collect()));
    }
    let mut span = Span { rows: Vec::new() };
    span.insert(indicator(grand, n));
    let mut fixed: Vec<(Coalition, Rational)> = Vec::new();
    let mut free: Vec<Coalition> = Coalition::all(n).filter(|s| !s.is_empty() && *s != grand).collect();
    let mut x_last: Vec<Rational> = Vec::new();

    while span.rank() < n {
        let lp = nucleolus_lp(game, &fixed, &free, None);
        let (t_star, values) = lp_optimum(&lp.model)?;
        x_last = lp.x.iter().map(|v| values[v.0].clone()).collect();
        let current = Allocation(x_last.clone());
        let mut newly = Vec::new();
        for &s in &free {
            let excess = current.sum_over(s) - Rational::from(game.value(s));
            if excess != t_star {
                continue;
            }
            let mut probe = nucleolus_lp(game, &fixed, &free, Some(&t_star));
            probe.model.set_objective(coalition_expr(&probe.x, s));
            let (best, _) = lp_optimum(&probe.model)?;
            if best == Rational::from(game.value(s)) + &t_star {
                newly.push(s);
            }
        }
        if newly.is_empty() {
            return Err(AllocationError::Lp("no coalition could be fixed at the current stage".into()));
        }
        for s in newly {
            span.insert(indicator(s, n));
            fixed.push((s, t_star.clone()));
        }
        free.retain(|s| !span.contains(indicator(*s, n)));
    }
    if x_last.is_empty() {
        return Err(AllocationError::Lp("nucleolus loop did not run".into()));
    }
    Ok(Allocation(x_last))
}

/// Core allocation assembled from optimal assignment duals: each vertex gets
/// `1 − u_w − v_w` and each country the sum over its vertices.
pub fn core_allocation(oracle: &GameOracle) -> Allocation {
    let g = oracle.graph();
    let (_, duals) = max_cycle_packing_with_duals(g);
    let mut x = vec![0i64; g.country_count()];
    for (w, d) in duals.into_iter().enumerate() {
        x[g.country_of_local(w)] += d;
    }
    Allocation::from_integers(&x)
}

/// Core membership for width-1 games.
///
/// With arc weights `x(u) − 1`, `x` is in the core iff every country gets a
/// non-negative amount and no directed cycle has negative weight, which is
/// decided by Bellman-Ford from a virtual source.
pub fn core_membership_width1(g: &CompatibilityGraph, x: &Allocation) -> Result<bool, AllocationError> {
    if g.width() > 1 {
        return Err(AllocationError::WidthViolation { width: g.width() });
    }
    if x.len() != g.country_count() {
        return Err(AllocationError::Length { expected: g.country_count(), got: x.len() });
    }
    if x.0.iter().any(Rational::is_negative) {
        return Ok(false);
    }
    let n = g.vertex_count();
    let weight: Vec<Rational> = (0..n).map(|u| &x.0[g.country_of_local(u)] - &Rational::ONE).collect();
    let mut dist = vec![Rational::ZERO; n];
    for _ in 0..n {
        let mut changed = false;
        for (u, v) in g.local_arcs() {
            let cand = &dist[u] + &weight[u];
            if cand < dist[v] {
                dist[v] = cand;
                changed = true;
            }
        }
        if !changed {
            return Ok(true);
        }
    }
    Ok(!g.local_arcs().any(|(u, v)| &dist[u] + &weight[u] < dist[v]))
}

/// `x(S) ≥ v(S)` for every non-empty proper coalition, by enumeration.
pub fn core_membership_bruteforce<G: TuGame + ?Sized>(game: &G, x: &Allocation) -> Result<bool, AllocationError> {
    let n = game.players();
    check_players(n, crate::game::MAX_PLAYERS)?;
    if x.len() != n {
        return Err(AllocationError::Length { expected: n, got: x.len() });
    }
    let grand = Coalition::grand(n);
    Ok(Coalition::all(n)
        .filter(|s| !s.is_empty() && *s != grand)
        .all(|s| x.sum_over(s) >= Rational::from(game.value(s))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{three_country, triangle, two_double_arcs};
    use crate::game::ValueTable;
    use crate::par::Execution;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn three_country_table() -> ValueTable {
        GameOracle::new(three_country()).unwrap().all_coalition_values(Execution::Sequential)
    }

    fn symmetric_pair() -> ValueTable {
        ValueTable::new(2, vec![0, 0, 0, 2]).unwrap()
    }

    #[test]
    fn three_country_concepts() {
        let t = three_country_table();
        let expected = Allocation(vec![q(3, 2), q(7, 2), q(0, 1)]);
        assert_eq!(shapley(&t).unwrap(), expected);
        assert_eq!(banzhaf_unnormalized(&t).unwrap(), expected.0);
        assert_eq!(banzhaf_normalized(&t).unwrap(), expected);
        assert_eq!(nucleolus(&t).unwrap(), expected);
        assert_eq!(benefit_value(&t).unwrap(), expected);
        assert_eq!(contribution_value(&t).unwrap(), Allocation(vec![q(9, 8), q(31, 8), q(0, 1)]));
    }

    #[test]
    fn symmetric_two_player_game() {
        let t = symmetric_pair();
        let one = Allocation::from_integers(&[1, 1]);
        assert_eq!(shapley(&t).unwrap(), one);
        assert_eq!(banzhaf_normalized(&t).unwrap(), one);
        assert_eq!(nucleolus(&t).unwrap(), one);
        assert_eq!(benefit_value(&t).unwrap(), one);
        assert_eq!(contribution_value(&t).unwrap(), one);
    }

    #[test]
    fn inessential_game_nucleolus() {
        // v(S) = sum of member indices (1-based)
        let t = ValueTable::from_fn(3, |s| s.members().map(|p| p as i64 + 1).sum()).unwrap();
        assert_eq!(nucleolus(&t).unwrap(), Allocation::from_integers(&[1, 2, 3]));
        assert_eq!(shapley(&t).unwrap(), Allocation::from_integers(&[1, 2, 3]));
        assert_eq!(benefit_value(&t).unwrap_err(), AllocationError::ZeroDenominator("benefit"));
    }

    #[test]
    fn degenerate_games() {
        let zero = ValueTable::new(2, vec![0; 4]).unwrap();
        assert_eq!(banzhaf_normalized(&zero).unwrap_err(), AllocationError::DegenerateGame);
        assert_eq!(contribution_value(&zero).unwrap_err(), AllocationError::ZeroDenominator("contribution"));
        assert_eq!(shapley(&zero).unwrap(), Allocation::zeros(2));
        assert_eq!(nucleolus(&zero).unwrap(), Allocation::zeros(2));
    }

    #[test]
    fn core_allocations_of_small_graphs() {
        let o = GameOracle::new(triangle()).unwrap();
        let x = core_allocation(&o);
        assert_eq!(x.total(), Rational::from(3));
        assert!(x.0.iter().all(|v| !v.is_negative()));
        assert!(core_membership_bruteforce(&o, &x).unwrap());

        let acyclic = CompatibilityGraph::new(2, [(crate::fixtures::vid('a'), 0), (crate::fixtures::vid('b'), 1)], [(crate::fixtures::vid('a'), crate::fixtures::vid('b'))]).unwrap();
        assert_eq!(core_allocation(&GameOracle::new(acyclic).unwrap()), Allocation::zeros(2));

        let o = GameOracle::new(three_country()).unwrap();
        let x = core_allocation(&o);
        assert_eq!(x.0[2], Rational::ZERO);
        assert_eq!(&x.0[0] + &x.0[1], Rational::from(5));
        assert!(x.0[1] >= Rational::from(2));
        assert!(core_membership_bruteforce(&o, &x).unwrap());
    }

    #[test]
    fn width1_membership_examples() {
        let g = two_double_arcs();
        let half = Allocation(vec![q(1, 2), q(1, 2), q(3, 2), q(3, 2)]);
        assert!(!core_membership_width1(&g, &half).unwrap());
        assert!(core_membership_width1(&g, &Allocation::from_integers(&[1, 1, 1, 1])).unwrap());
        let t = triangle();
        for x in [vec![q(3, 1), q(0, 1), q(0, 1)], vec![q(1, 3), q(5, 3), q(1, 1)]] {
            assert!(core_membership_width1(&t, &Allocation(x)).unwrap());
        }
        assert_eq!(
            core_membership_width1(&three_country(), &Allocation::zeros(3)).unwrap_err(),
            AllocationError::WidthViolation { width: 3 }
        );
    }

    #[test]
    fn bruteforce_membership_examples() {
        let t = three_country_table();
        assert!(core_membership_bruteforce(&t, &Allocation(vec![q(3, 2), q(7, 2), q(0, 1)])).unwrap());
        assert!(!core_membership_bruteforce(&t, &Allocation::from_integers(&[5, 0, 0])).unwrap());
    }

    #[test]
    fn allocation_json() {
        let x = Allocation(vec![q(3, 2), q(0, 1)]);
        assert_eq!(x.to_json(), r#"{"1":{"exact":"3/2","decimal":1.5},"2":{"exact":"0","decimal":0.0}}"#);
    }

    #[test]
    fn excess_vector_is_sorted() {
        let t = three_country_table();
        let e = excess_vector(&t, &Allocation(vec![q(3, 2), q(7, 2), q(0, 1)]));
        assert_eq!(e.len(), 6);
        assert!(e.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(e[0], Rational::ZERO);
    }
}
