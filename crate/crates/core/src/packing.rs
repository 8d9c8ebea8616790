//! Cycle packings and the solvers that produce them.

use std::fmt;

use ikep_milp::MilpError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use petgraph::algo::matching::maximum_matching;
use petgraph::graph::{NodeIndex, UnGraph};

use crate::assignment::min_cost_perfect_assignment;
use crate::graph::{CompatibilityGraph, VertexId};

/// Default arc cap of the exhaustive packing enumerator.
pub const BRUTE_FORCE_ARC_CAP: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PackingError {
    #[error("partition width is {width}, but this operation needs width 1")]
    WidthViolation { width: usize },
    #[error("{what} is {size}, above the cap of {cap}")]
    CapExceeded { what: &'static str, size: usize, cap: usize },
    #[error("packing references unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("not a cycle packing: {0}")]
    Invalid(String),
    #[error("expected {expected} interval constraints, got {got}")]
    IntervalCount { expected: usize, got: usize },
    #[error(transparent)]
    Solver(#[from] MilpError),
    #[error("solver stopped at its node limit before proving optimality")]
    SolverLimit,
}

/// Maximum permitted cycle length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeBound {
    Two,
    Infinity,
}

impl fmt::Display for ExchangeBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExchangeBound::Two => "two",
            ExchangeBound::Infinity => "infinity",
        })
    }
}

impl std::str::FromStr for ExchangeBound {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "two" | "2" => Ok(ExchangeBound::Two),
            "infinity" | "inf" => Ok(ExchangeBound::Infinity),
            other => Err(format!("unknown exchange bound `{other}` (expected two or infinity)")),
        }
    }
}

/// Vertex-disjoint directed cycles, kept in canonical form: each cycle starts
/// at its smallest vertex id and cycles are sorted by that vertex.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CyclePacking {
    cycles: Vec<Vec<VertexId>>,
}

impl CyclePacking {
    pub fn new(cycles: Vec<Vec<VertexId>>) -> Self {
        let mut cycles: Vec<Vec<VertexId>> = cycles
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|mut c| {
                let start = c.iter().enumerate().min_by_key(|(_, v)| **v).map(|(i, _)| i).unwrap_or(0);
                c.rotate_left(start);
                c
            })
            .collect();
        cycles.sort();
        CyclePacking { cycles }
    }

    pub fn empty() -> Self {
        CyclePacking::default()
    }

    pub fn cycles(&self) -> &[Vec<VertexId>] {
        &self.cycles
    }

    /// Number of arcs (equivalently, transplants) in the packing.
    pub fn size(&self) -> usize {
        self.cycles.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.cycles.iter().flat_map(|c| (0..c.len()).map(move |i| (c[i], c[(i + 1) % c.len()])))
    }

    pub fn covered(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.cycles.iter().flatten().copied()
    }

    pub fn cycle_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.cycles.iter().map(Vec::len)
    }

    pub fn max_cycle_length(&self) -> usize {
        self.cycle_lengths().max().unwrap_or(0)
    }

    /// Checks that this is a packing of `g`.
    pub fn validate(&self, g: &CompatibilityGraph) -> Result<(), PackingError> {
        let mut seen = vec![false; g.vertex_count()];
        for c in &self.cycles {
            if c.len() < 2 {
                return Err(PackingError::Invalid(format!("cycle of length {}", c.len())));
            }
            for &v in c {
                let l = g.local(v).ok_or(PackingError::UnknownVertex(v))?;
                if std::mem::replace(&mut seen[l], true) {
                    return Err(PackingError::Invalid(format!("vertex {v} used twice")));
                }
            }
        }
        for (u, v) in self.arcs() {
            if !g.has_arc(u, v) {
                return Err(PackingError::Invalid(format!("{u} -> {v} is not an arc")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("packing serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct PackingRecord {
    cycles: Vec<Vec<VertexId>>,
    size: usize,
}

impl Serialize for CyclePacking {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PackingRecord { cycles: self.cycles.clone(), size: self.size() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CyclePacking {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PackingRecord::deserialize(d)?;
        let p = CyclePacking::new(r.cycles);
        if p.size() != r.size {
            return Err(serde::de::Error::custom("size does not match the cycles"));
        }
        Ok(p)
    }
}

/// Transplants received per country: `s[p]` counts packing arcs entering V_p.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransplantVector(pub Vec<usize>);

impl TransplantVector {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

pub fn transplant_vector(c: &CyclePacking, g: &CompatibilityGraph) -> Result<TransplantVector, PackingError> {
    let mut s = vec![0; g.country_count()];
    for (_, v) in c.arcs() {
        let p = g.country_of(v).ok_or(PackingError::UnknownVertex(v))?;
        s[p] += 1;
    }
    Ok(TransplantVector(s))
}

/// Decomposes a successor map over local vertices (`succ[u] == u` means
/// uncovered) into a packing.
pub(crate) fn packing_from_successors(g: &CompatibilityGraph, succ: &[usize]) -> CyclePacking {
    let mut seen = vec![false; succ.len()];
    let mut cycles = Vec::new();
    for start in 0..succ.len() {
        if seen[start] || succ[start] == start {
            continue;
        }
        let mut cycle = Vec::new();
        let mut v = start;
        while !seen[v] {
            seen[v] = true;
            cycle.push(g.id(v));
            v = succ[v];
        }
        cycles.push(cycle);
    }
    CyclePacking::new(cycles)
}

/// Bipartite graph H: row u, column v' with cost 0 for arcs (u, v) and cost
/// 1 for the slack edge u u'. Rows flagged in `forced` get no slack edge.
fn assignment_graph(g: &CompatibilityGraph, forced: &[bool]) -> Vec<Vec<(usize, i64)>> {
    (0..g.vertex_count())
        .map(|u| {
            let mut edges: Vec<(usize, i64)> = g.successors(u).iter().map(|&v| (v, 0)).collect();
            if !forced[u] {
                edges.push((u, 1));
                edges.sort_unstable();
            }
            edges
        })
        .collect()
}

/// Maximum packing together with the vertex values `1 - u_w - v_w` read off
/// the optimal assignment duals. The values sum to the packing size and
/// dominate the packing value of every vertex subset.
pub fn max_cycle_packing_with_duals(g: &CompatibilityGraph) -> (CyclePacking, Vec<i64>) {
    let adj = assignment_graph(g, &vec![false; g.vertex_count()]);
    let a = min_cost_perfect_assignment(&adj).expect("slack edges make H perfectly matchable");
    let duals = (0..g.vertex_count()).map(|w| 1 - a.row_pot[w] - a.col_pot[w]).collect();
    (packing_from_successors(g, &a.col_of_row), duals)
}

/// `g` restricted to the arcs that can occur in a maximum packing.
///
/// An arc with positive reduced cost under the optimal assignment duals is
/// unused by every optimal assignment; arcs between strongly connected
/// components of what is left lie on no cycle. Both graphs have the same
/// vertices and the same maximum packings.
pub fn max_packing_support(g: &CompatibilityGraph) -> CompatibilityGraph {
    let adj = assignment_graph(g, &vec![false; g.vertex_count()]);
    let a = min_cost_perfect_assignment(&adj).expect("slack edges make H perfectly matchable");
    let tight = g.with_arcs_where(|u, v| a.row_pot[u] + a.col_pot[v] == 0);
    let comp = tight.strongly_connected_components();
    tight.with_arcs_where(|u, v| comp[u] == comp[v])
}

/// Maximum cycle packing with unbounded cycle length.
pub fn max_cycle_packing(g: &CompatibilityGraph) -> CyclePacking {
    max_cycle_packing_with_duals(g).0
}

/// Size of a maximum packing under the given exchange bound.
pub fn max_packing_size(g: &CompatibilityGraph, bound: ExchangeBound) -> Result<usize, PackingError> {
    Ok(match bound {
        ExchangeBound::Infinity => max_cycle_packing(g).size(),
        ExchangeBound::Two => max_2cycle_packing(g)?.size(),
    })
}

pub fn max_packing(g: &CompatibilityGraph, bound: ExchangeBound) -> Result<CyclePacking, PackingError> {
    match bound {
        ExchangeBound::Infinity => Ok(max_cycle_packing(g)),
        ExchangeBound::Two => max_2cycle_packing(g),
    }
}

/// Maximum packing of 2-cycles: a maximum matching (Gabow's blossom
/// algorithm) on the undirected graph of reciprocated arcs.
pub fn max_2cycle_packing(g: &CompatibilityGraph) -> Result<CyclePacking, PackingError> {
    let mut und: UnGraph<(), ()> = UnGraph::with_capacity(g.vertex_count(), 0);
    for _ in 0..g.vertex_count() {
        und.add_node(());
    }
    for (u, v) in g.local_arcs() {
        if u < v && g.has_local_arc(v, u) {
            und.add_edge(NodeIndex::new(u), NodeIndex::new(v), ());
        }
    }
    let matching = maximum_matching(&und);
    let cycles = matching.edges().map(|(a, b)| vec![g.id(a.index()), g.id(b.index())]).collect();
    Ok(CyclePacking::new(cycles))
}

/// Admissible number of transplants for one country.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: usize,
    /// `None` is +∞.
    pub hi: Option<usize>,
}

impl Interval {
    pub fn new(lo: usize, hi: Option<usize>) -> Self {
        Interval { lo, hi }
    }

    pub fn exactly(k: usize) -> Self {
        Interval { lo: k, hi: Some(k) }
    }

    pub fn contains(&self, k: usize) -> bool {
        k >= self.lo && self.hi.is_none_or(|h| k <= h)
    }
}

/// One interval per country, indexed like the graph's countries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalConstraints(pub Vec<Interval>);

impl IntervalConstraints {
    pub fn admits(&self, s: &TransplantVector) -> bool {
        self.0.iter().zip(&s.0).all(|(i, &k)| i.contains(k))
    }
}

/// Maximum packing with `s_p ∈ I_p` for every country on width-1 graphs,
/// or `None` when no maximum packing satisfies the constraints.
pub fn constrained_max_packing_width1(
    g: &CompatibilityGraph,
    intervals: &IntervalConstraints,
) -> Result<Option<CyclePacking>, PackingError> {
    if g.width() > 1 {
        return Err(PackingError::WidthViolation { width: g.width() });
    }
    if intervals.0.len() != g.country_count() {
        return Err(PackingError::IntervalCount { expected: g.country_count(), got: intervals.0.len() });
    }
    let sizes = g.country_sizes();
    for (p, i) in intervals.0.iter().enumerate() {
        let ok = if sizes[p] == 0 { i.contains(0) } else { i.contains(0) || i.contains(1) };
        if !ok {
            return Ok(None);
        }
    }
    let optimum = max_cycle_packing(g).size();
    let reduced = g.induced_by(|l| intervals.0[g.country_of_local(l)].contains(1));
    if max_cycle_packing(&reduced).size() < optimum {
        return Ok(None);
    }
    let forced: Vec<bool> =
        (0..reduced.vertex_count()).map(|l| !intervals.0[reduced.country_of_local(l)].contains(0)).collect();
    let adj = assignment_graph(&reduced, &forced);
    let Some(a) = min_cost_perfect_assignment(&adj) else {
        return Ok(None);
    };
    let weight = reduced.vertex_count() as i64 - a.cost;
    if weight != optimum as i64 {
        return Ok(None);
    }
    Ok(Some(packing_from_successors(&reduced, &a.col_of_row)))
}

struct Enumerator<'a> {
    g: &'a CompatibilityGraph,
    used: Vec<bool>,
    current: Vec<Vec<usize>>,
    current_size: usize,
    best: usize,
    found: Vec<Vec<Vec<usize>>>,
}

impl Enumerator<'_> {
    fn rec(&mut self, v: usize) {
        let n = self.g.vertex_count();
        let free = (v..n).filter(|&w| !self.used[w]).count();
        if self.current_size + free < self.best {
            return;
        }
        if v == n {
            if self.current_size > self.best {
                self.best = self.current_size;
                self.found.clear();
            }
            self.found.push(self.current.clone());
            return;
        }
        if self.used[v] {
            self.rec(v + 1);
            return;
        }
        self.rec(v + 1);
        self.used[v] = true;
        let mut path = vec![v];
        self.extend(v, &mut path);
        self.used[v] = false;
    }

    fn extend(&mut self, start: usize, path: &mut Vec<usize>) {
        let last = *path.last().expect("path starts at the root");
        for &w in self.g.successors(last) {
            if w == start && path.len() >= 2 {
                self.current.push(path.clone());
                self.current_size += path.len();
                self.rec(start + 1);
                self.current_size -= path.len();
                self.current.pop();
            } else if w > start && !self.used[w] {
                self.used[w] = true;
                path.push(w);
                self.extend(start, path);
                path.pop();
                self.used[w] = false;
            }
        }
    }
}

/// Every maximum packing of `g`, canonically ordered, by exhaustive search.
pub fn brute_force_max_packings(g: &CompatibilityGraph) -> Result<Vec<CyclePacking>, PackingError> {
    brute_force_max_packings_capped(g, BRUTE_FORCE_ARC_CAP)
}

pub fn brute_force_max_packings_capped(
    g: &CompatibilityGraph,
    arc_cap: usize,
) -> Result<Vec<CyclePacking>, PackingError> {
    if g.arc_count() > arc_cap {
        return Err(PackingError::CapExceeded { what: "arc count", size: g.arc_count(), cap: arc_cap });
    }
    let mut e = Enumerator {
        g,
        used: vec![false; g.vertex_count()],
        current: Vec::new(),
        current_size: 0,
        best: 0,
        found: Vec::new(),
    };
    e.rec(0);
    let mut out: Vec<CyclePacking> = e
        .found
        .into_iter()
        .map(|cs| CyclePacking::new(cs.into_iter().map(|c| c.into_iter().map(|l| g.id(l)).collect()).collect()))
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{three_country, shared_hub, triangle, two_double_arcs, vid};

    fn packing(cycles: &[&str]) -> CyclePacking {
        CyclePacking::new(cycles.iter().map(|c| c.chars().map(vid).collect()).collect())
    }

    fn single_country(n: usize, arcs: &[(char, char)]) -> CompatibilityGraph {
        CompatibilityGraph::new(
            1,
            (0..n).map(|i| (crate::graph::VertexId(i as u32), 0)),
            arcs.iter().map(|&(u, v)| (vid(u), vid(v))),
        )
        .unwrap()
    }

    #[test]
    fn three_country_optimum_is_the_five_cycle() {
        let g = three_country();
        let p = max_cycle_packing(&g);
        assert_eq!(p, packing(&["abdec"]));
        assert_eq!(p.size(), 5);
        assert_eq!(transplant_vector(&p, &g).unwrap().0, vec![3, 2, 0]);
        p.validate(&g).unwrap();
    }

    #[test]
    fn support_keeps_every_maximum_packing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..80 {
            let v = rng.random_range(1..=8);
            let verts = (0..v).map(|i| (VertexId(i as u32), i % 3));
            let mut arcs = Vec::new();
            for a in 0..v {
                for b in 0..v {
                    if a != b && rng.random_bool(0.3) {
                        arcs.push((VertexId(a as u32), VertexId(b as u32)));
                    }
                }
            }
            let g = CompatibilityGraph::new(3, verts, arcs).unwrap();
            let support = max_packing_support(&g);
            assert_eq!(support.ids(), g.ids());
            let full = brute_force_max_packings(&g).unwrap();
            assert_eq!(brute_force_max_packings(&support).unwrap(), full);
        }
    }

    #[test]
    fn blossom_matches_the_matching_ilp() {
        use ikep_milp::{solve, SolveLimits};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..60 {
            let nv: u32 = rng.random_range(0..=12);
            let mut arcs = Vec::new();
            for u in 0..nv {
                for v in 0..nv {
                    if u != v && rng.random_bool(0.5) {
                        arcs.push((crate::graph::VertexId(u), crate::graph::VertexId(v)));
                    }
                }
            }
            let g = CompatibilityGraph::new(2, (0..nv).map(|i| (crate::graph::VertexId(i), (i % 2) as usize)), arcs).unwrap();
            let p = max_2cycle_packing(&g).unwrap();
            p.validate(&g).unwrap();
            assert!(p.cycle_lengths().all(|l| l == 2));
            let pm = crate::formulation::PackingModel::matching(&g, "m");
            let mut model = pm.model.clone();
            model.set_objective(pm.size_expr());
            let ilp = solve(&model, &SolveLimits::default()).unwrap();
            let best = ilp.objective.map_or(0, |z| z.to_i64().unwrap() as usize);
            assert_eq!(p.size(), best);
        }
    }

    #[test]
    fn trivial_graphs() {
        assert_eq!(max_cycle_packing(&single_country(3, &[])).size(), 0);
        assert_eq!(max_cycle_packing(&three_country().induced_subgraph([1])).size(), 2);
        assert_eq!(max_cycle_packing(&CompatibilityGraph::empty(2)).size(), 0);
    }

    #[test]
    fn two_cycle_packings() {
        assert_eq!(max_2cycle_packing(&three_country()).unwrap(), packing(&["de"]));
        assert_eq!(max_2cycle_packing(&two_double_arcs()).unwrap().size(), 4);
        assert_eq!(max_2cycle_packing(&triangle()).unwrap().size(), 0);
    }

    #[test]
    fn transplant_vectors() {
        let g = three_country();
        assert_eq!(transplant_vector(&CyclePacking::empty(), &g).unwrap().0, vec![0, 0, 0]);
        assert_eq!(transplant_vector(&packing(&["de"]), &g).unwrap().0, vec![0, 2, 0]);
        assert_eq!(
            transplant_vector(&packing(&["xy"]), &g).unwrap_err(),
            PackingError::UnknownVertex(vid('y'))
        );
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_max_packings(&three_country()).unwrap(), vec![packing(&["abdec"])]);
        assert_eq!(brute_force_max_packings(&triangle()).unwrap(), vec![packing(&["abc"])]);
        assert_eq!(brute_force_max_packings(&shared_hub()).unwrap(), vec![packing(&["ab"]), packing(&["bc"])]);
        let dense = single_country(6, &[]);
        assert_eq!(brute_force_max_packings(&dense).unwrap(), vec![CyclePacking::empty()]);
        assert!(matches!(
            brute_force_max_packings_capped(&three_country(), 8),
            Err(PackingError::CapExceeded { .. })
        ));
    }

    fn width1(n: usize, arcs: &[(char, char)]) -> CompatibilityGraph {
        CompatibilityGraph::new(
            n,
            (0..n).map(|i| (crate::graph::VertexId(i as u32), i)),
            arcs.iter().map(|&(u, v)| (vid(u), vid(v))),
        )
        .unwrap()
    }

    #[test]
    fn lemma1_examples() {
        let e = Interval::exactly;
        // a <-> b plus an isolated vertex c
        let g = width1(3, &[('a', 'b'), ('b', 'a')]);
        let got = constrained_max_packing_width1(&g, &IntervalConstraints(vec![e(1), e(1), e(0)])).unwrap();
        assert_eq!(got, Some(packing(&["ab"])));
        let got = constrained_max_packing_width1(&g, &IntervalConstraints(vec![e(0), e(1), e(0)])).unwrap();
        assert_eq!(got, None);

        let g = two_double_arcs();
        let got = constrained_max_packing_width1(&g, &IntervalConstraints(vec![e(1), e(1), e(0), e(0)])).unwrap();
        assert_eq!(got, None);
        let any = IntervalConstraints(vec![Interval::new(0, None); 4]);
        assert_eq!(constrained_max_packing_width1(&g, &any).unwrap().unwrap().size(), 4);

        assert_eq!(
            constrained_max_packing_width1(&three_country(), &IntervalConstraints(vec![e(0); 3])).unwrap_err(),
            PackingError::WidthViolation { width: 3 }
        );
    }

    #[test]
    fn packing_json_is_canonical() {
        let p = CyclePacking::new(vec![vec![vid('e'), vid('c'), vid('a'), vid('b'), vid('d')]]);
        assert_eq!(p.to_json(), r#"{"cycles":[[0,1,3,4,2]],"size":5}"#);
        let back: CyclePacking = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }
}
