//! Reductions between balanced packing and colored exact perfect matching,
//! with exhaustive oracles for small instances.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balancing::sorted_deviation_vector;
use crate::graph::{CompatibilityGraph, VertexId};
use crate::packing::{brute_force_max_packings_capped, max_cycle_packing, transplant_vector, PackingError};
use crate::Rational;

pub const EPM_LEFT_CAP: usize = 14;
pub const DEVIATION_VERTEX_CAP: usize = 12;
pub const DEVIATION_COUNTRY_CAP: usize = 4;
/// Arc cap used when enumerating packings for deviation vectors.
pub const DEVIATION_ARC_CAP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("{what} is {size}, above the cap of {cap}")]
    CapExceeded { what: &'static str, size: usize, cap: usize },
    #[error(transparent)]
    Packing(#[from] PackingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColoredEdge {
    pub u: usize,
    pub w: usize,
    /// Colors are 1-based.
    pub color: usize,
}

/// Bipartite graph with sides `0..left` and `0..right` and colored edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoredBipartiteGraph {
    #[serde(rename = "U")]
    pub left: usize,
    #[serde(rename = "W")]
    pub right: usize,
    pub edges: Vec<ColoredEdge>,
}

/// Required number of matching edges per color; `k[c - 1]` is color `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorCountVector(pub Vec<usize>);

#[derive(Serialize)]
struct ColoredInstance<'a> {
    #[serde(rename = "U")]
    left: usize,
    #[serde(rename = "W")]
    right: usize,
    edges: &'a [ColoredEdge],
    k: &'a [usize],
}

pub fn colored_instance_json(b: &ColoredBipartiteGraph, k: &ColorCountVector) -> String {
    serde_json::to_string(&ColoredInstance { left: b.left, right: b.right, edges: &b.edges, k: &k.0 })
        .expect("colored instance serialization cannot fail")
}

/// Builds `B` with `v^in ∈ U` and `v^out ∈ W` per vertex: a slack edge
/// `v^in v^out` of color `n + 1` and, per arc `(u, v)`, an edge `v^in u^out`
/// colored by the country of `v`. The count vector is `(d′, |V| − v(N))`.
pub fn to_colored_instance(g: &CompatibilityGraph, d_prime: &[usize]) -> (ColoredBipartiteGraph, ColorCountVector) {
    let n = g.country_count();
    let v_n = max_cycle_packing(g).size();
    let mut edges: Vec<ColoredEdge> =
        (0..g.vertex_count()).map(|v| ColoredEdge { u: v, w: v, color: n + 1 }).collect();
    for (u, v) in g.local_arcs() {
        edges.push(ColoredEdge { u: v, w: u, color: g.country_of_local(v) + 1 });
    }
    let mut k: Vec<usize> = d_prime.to_vec();
    k.resize(n, 0);
    k.push(g.vertex_count().saturating_sub(v_n));
    (ColoredBipartiteGraph { left: g.vertex_count(), right: g.vertex_count(), edges }, ColorCountVector(k))
}

/// Does `b` have a perfect matching with exactly `k_c` edges of color `c`?
pub fn brute_force_colored_epm(b: &ColoredBipartiteGraph, k: &ColorCountVector) -> Result<bool, ReductionError> {
    if b.left > EPM_LEFT_CAP {
        return Err(ReductionError::CapExceeded { what: "left side", size: b.left, cap: EPM_LEFT_CAP });
    }
    if b.left != b.right || k.0.iter().sum::<usize>() != b.left {
        return Ok(false);
    }
    if b.edges.iter().any(|e| e.color == 0 || e.color > k.0.len()) {
        return Ok(false);
    }
    let mut adj = vec![Vec::new(); b.left];
    for e in &b.edges {
        adj[e.u].push((e.w, e.color - 1));
    }
    fn rec(u: usize, adj: &[Vec<(usize, usize)>], used: &mut [bool], left: &mut [usize]) -> bool {
        if u == adj.len() {
            return true;
        }
        for &(w, c) in &adj[u] {
            if !used[w] && left[c] > 0 {
                used[w] = true;
                left[c] -= 1;
                let ok = rec(u + 1, adj, used, left);
                used[w] = false;
                left[c] += 1;
                if ok {
                    return true;
                }
            }
        }
        false
    }
    let mut left = k.0.clone();
    Ok(rec(0, &adj, &mut vec![false; b.right], &mut left))
}

/// Does some maximum packing of `g` give exactly `s_p = d′_p` everywhere?
pub fn packing_realizes(g: &CompatibilityGraph, d_prime: &[usize]) -> Result<bool, ReductionError> {
    for c in brute_force_max_packings_capped(g, DEVIATION_ARC_CAP)? {
        if transplant_vector(&c, g)?.0 == d_prime {
            return Ok(true);
        }
    }
    Ok(false)
}

/// All unordered deviation vectors `(|x_p − s_p(C)|)_p` over maximum packings.
pub fn enumerate_deviation_vectors(
    g: &CompatibilityGraph,
    x: &[Rational],
) -> Result<BTreeSet<Vec<Rational>>, ReductionError> {
    if g.vertex_count() > DEVIATION_VERTEX_CAP {
        return Err(ReductionError::CapExceeded { what: "vertex count", size: g.vertex_count(), cap: DEVIATION_VERTEX_CAP });
    }
    if g.country_count() > DEVIATION_COUNTRY_CAP {
        return Err(ReductionError::CapExceeded { what: "country count", size: g.country_count(), cap: DEVIATION_COUNTRY_CAP });
    }
    let mut out = BTreeSet::new();
    for c in brute_force_max_packings_capped(g, DEVIATION_ARC_CAP)? {
        let s = transplant_vector(&c, g)?;
        out.insert(x.iter().zip(&s.0).map(|(xp, &sp)| (xp - &Rational::from(sp)).abs()).collect());
    }
    Ok(out)
}

/// Lexicographically smallest sorted deviation vector over all maximum
/// packings, by enumeration.
pub fn brute_force_lexmin(g: &CompatibilityGraph, x: &[Rational]) -> Result<Vec<Rational>, ReductionError> {
    let mut best: Option<Vec<Rational>> = None;
    for c in brute_force_max_packings_capped(g, DEVIATION_ARC_CAP)? {
        let d = sorted_deviation_vector(&c, g, x)?;
        if best.as_ref().is_none_or(|b| d < *b) {
            best = Some(d);
        }
    }
    Ok(best.unwrap_or_default())
}

/// Replaces every edge `e = uw` of a red/blue bipartite graph with the
/// 3-cycle `u → w_e → w → u`. Red edge vertices form country 1, all other
/// vertices country 2. The target is `s_1 = k`, `s_2 = 3m − k`.
pub fn epm_to_cycle_packing(b: &ColoredBipartiteGraph, k: usize) -> (CompatibilityGraph, [usize; 2]) {
    let m = b.left;
    let w_id = |w: usize| VertexId((m + w) as u32);
    let e_id = |i: usize| VertexId((m + b.right + i) as u32);
    let mut vertices: Vec<(VertexId, usize)> = (0..m + b.right).map(|v| (VertexId(v as u32), 1)).collect();
    let mut arcs = BTreeSet::new();
    for (i, e) in b.edges.iter().enumerate() {
        vertices.push((e_id(i), if e.color == 1 { 0 } else { 1 }));
        let u = VertexId(e.u as u32);
        arcs.insert((u, e_id(i)));
        arcs.insert((e_id(i), w_id(e.w)));
        arcs.insert((w_id(e.w), u));
    }
    let g = CompatibilityGraph::new(2, vertices, arcs).expect("gadget graph is well formed");
    (g, [k, (3 * m).saturating_sub(k)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{three_country, shared_hub, vid};

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn three_country_colored_instances() {
        let g = three_country();
        let (b, k) = to_colored_instance(&g, &[3, 2, 0]);
        assert_eq!((b.left, b.right), (6, 6));
        assert_eq!(b.edges.iter().filter(|e| e.color == 4).count(), 6);
        assert_eq!(b.edges.len(), 15);
        assert_eq!(k.0, vec![3, 2, 0, 1]);
        assert!(brute_force_colored_epm(&b, &k).unwrap());
        let (b, k) = to_colored_instance(&g, &[5, 0, 0]);
        assert_eq!(k.0, vec![5, 0, 0, 1]);
        assert!(!brute_force_colored_epm(&b, &k).unwrap());
        assert!(colored_instance_json(&b, &k).starts_with(r#"{"U":6,"W":6,"edges":[{"u":0,"w":0,"color":4}"#));
    }

    #[test]
    fn empty_and_single_edge() {
        let g = CompatibilityGraph::empty(2);
        let (b, k) = to_colored_instance(&g, &[0, 0]);
        assert_eq!(k.0, vec![0, 0, 0]);
        assert!(brute_force_colored_epm(&b, &k).unwrap());
        let one = ColoredBipartiteGraph { left: 1, right: 1, edges: vec![ColoredEdge { u: 0, w: 0, color: 1 }] };
        assert!(brute_force_colored_epm(&one, &ColorCountVector(vec![1])).unwrap());
        let big = ColoredBipartiteGraph { left: 15, right: 15, edges: vec![] };
        assert!(brute_force_colored_epm(&big, &ColorCountVector(vec![15])).is_err());
    }

    #[test]
    fn deviation_vector_examples() {
        let d = |s: &str| s.parse::<Rational>().unwrap();
        let got = enumerate_deviation_vectors(&shared_hub(), &[d("0.4"), q(1, 1), d("0.6")]).unwrap();
        let want: BTreeSet<Vec<Rational>> =
            [vec![d("0.6"), q(0, 1), d("0.6")], vec![d("0.4"), q(0, 1), d("0.4")]].into();
        assert_eq!(got, want);
        let got = enumerate_deviation_vectors(&three_country(), &[q(3, 1), q(2, 1), q(0, 1)]).unwrap();
        assert_eq!(got, [vec![q(0, 1); 3]].into());
        let acyclic = CompatibilityGraph::new(2, [(vid('a'), 0), (vid('b'), 1)], [(vid('a'), vid('b'))]).unwrap();
        assert_eq!(enumerate_deviation_vectors(&acyclic, &[q(0, 1), q(0, 1)]).unwrap(), [vec![q(0, 1); 2]].into());
    }

    fn red_blue(edges: &[(usize, usize, usize)], m: usize) -> ColoredBipartiteGraph {
        ColoredBipartiteGraph {
            left: m,
            right: m,
            edges: edges.iter().map(|&(u, w, color)| ColoredEdge { u, w, color }).collect(),
        }
    }

    fn realizable_any_packing(g: &CompatibilityGraph, target: [usize; 2]) -> bool {
        // packings reaching 3m arcs are maximum, so maximum packings suffice
        packing_realizes(g, &target).unwrap()
    }

    #[test]
    fn epm_gadget_examples() {
        let b = red_blue(&[(0, 0, 1)], 1);
        let (g, target) = epm_to_cycle_packing(&b, 1);
        assert_eq!((g.vertex_count(), g.arc_count()), (3, 3));
        assert_eq!(target, [1, 2]);
        assert!(realizable_any_packing(&g, target));

        let b = red_blue(&[(0, 0, 1), (1, 1, 2)], 2);
        let (g, target) = epm_to_cycle_packing(&b, 1);
        assert!(realizable_any_packing(&g, target));
        let (g, target) = epm_to_cycle_packing(&b, 2);
        assert!(!realizable_any_packing(&g, target));
    }
}
