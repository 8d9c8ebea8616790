//! Small named instances used in examples, tests and the CLI.

use crate::graph::{CompatibilityGraph, VertexId};

/// Vertex id for a letter label: `a` is 0, `b` is 1 and so on.
pub fn vid(label: char) -> VertexId {
    VertexId(label as u32 - 'a' as u32)
}

fn build(countries: usize, vertices: &[(char, usize)], arcs: &[(char, char)]) -> CompatibilityGraph {
    CompatibilityGraph::new(
        countries,
        vertices.iter().map(|&(v, c)| (vid(v), c)),
        arcs.iter().map(|&(u, v)| (vid(u), vid(v))),
    )
    .expect("fixture is well formed")
}

/// The three-country example: V1 = {a,b,c}, V2 = {d,e}, V3 = {f}.
pub fn three_country() -> CompatibilityGraph {
    build(
        3,
        &[('a', 0), ('b', 0), ('c', 0), ('d', 1), ('e', 1), ('f', 2)],
        &[
            ('a', 'b'),
            ('b', 'd'),
            ('d', 'e'),
            ('e', 'd'),
            ('b', 'e'),
            ('c', 'a'),
            ('e', 'c'),
            ('c', 'f'),
            ('e', 'f'),
        ],
    )
}

/// a↔b and b↔c with a, b, c in countries 1, 2, 3.
pub fn shared_hub() -> CompatibilityGraph {
    build(3, &[('a', 0), ('b', 1), ('c', 2)], &[('a', 'b'), ('b', 'a'), ('b', 'c'), ('c', 'b')])
}

/// a↔b and c↔d, one country per vertex.
pub fn two_double_arcs() -> CompatibilityGraph {
    build(4, &[('a', 0), ('b', 1), ('c', 2), ('d', 3)], &[('a', 'b'), ('b', 'a'), ('c', 'd'), ('d', 'c')])
}

/// a→b→c→a, one country per vertex.
pub fn triangle() -> CompatibilityGraph {
    build(3, &[('a', 0), ('b', 1), ('c', 2)], &[('a', 'b'), ('b', 'c'), ('c', 'a')])
}
