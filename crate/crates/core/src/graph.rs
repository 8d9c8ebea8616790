//! Compatibility graphs, country partitions and the synthetic pair generator.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a patient-donor pair. Stable across induced subgraphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl std::fmt::Display for VertexId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop on vertex {0}")]
    SelfLoop(VertexId),
    #[error("duplicate arc {0} -> {1}")]
    DuplicateArc(VertexId, VertexId),
    #[error("duplicate vertex {0}")]
    DuplicateVertex(VertexId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("vertex {vertex} assigned to country {country}, but only {countries} countries exist")]
    CountryOutOfRange { vertex: VertexId, country: usize, countries: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("malformed graph file: {0}")]
    Format(String),
}

/// Directed compatibility graph with a partition of its vertices into countries.
///
/// Countries are indexed `0..countries()` internally; serialized files use
/// `1..=n`. Vertices are stored sorted by id and addressed by their local
/// index in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatibilityGraph {
    countries: usize,
    ids: Vec<VertexId>,
    country: Vec<usize>,
    succ: Vec<Vec<usize>>,
    arc_count: usize,
}

impl CompatibilityGraph {
    pub fn new(
        countries: usize,
        vertices: impl IntoIterator<Item = (VertexId, usize)>,
        arcs: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Self, GraphError> {
        let mut verts: Vec<(VertexId, usize)> = vertices.into_iter().collect();
        verts.sort();
        for w in verts.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(GraphError::DuplicateVertex(w[0].0));
            }
        }
        for &(v, c) in &verts {
            if c >= countries {
                return Err(GraphError::CountryOutOfRange { vertex: v, country: c, countries });
            }
        }
        let ids: Vec<VertexId> = verts.iter().map(|v| v.0).collect();
        let country: Vec<usize> = verts.iter().map(|v| v.1).collect();
        let mut succ = vec![Vec::new(); ids.len()];
        let mut arc_count = 0;
        for (u, v) in arcs {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let lu = ids.binary_search(&u).map_err(|_| GraphError::UnknownVertex(u))?;
            let lv = ids.binary_search(&v).map_err(|_| GraphError::UnknownVertex(v))?;
            succ[lu].push(lv);
            arc_count += 1;
        }
        for (lu, s) in succ.iter_mut().enumerate() {
            s.sort_unstable();
            if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::DuplicateArc(ids[lu], ids[w[0]]));
            }
        }
        Ok(CompatibilityGraph { countries, ids, country, succ, arc_count })
    }

    pub fn empty(countries: usize) -> Self {
        CompatibilityGraph { countries, ids: Vec::new(), country: Vec::new(), succ: Vec::new(), arc_count: 0 }
    }

    pub fn country_count(&self) -> usize {
        self.countries
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn id(&self, local: usize) -> VertexId {
        self.ids[local]
    }

    pub fn local(&self, id: VertexId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn country_of_local(&self, local: usize) -> usize {
        self.country[local]
    }

    pub fn country_of(&self, id: VertexId) -> Option<usize> {
        self.local(id).map(|l| self.country[l])
    }

    pub fn successors(&self, local: usize) -> &[usize] {
        &self.succ[local]
    }

    pub fn has_local_arc(&self, u: usize, v: usize) -> bool {
        self.succ[u].binary_search(&v).is_ok()
    }

    pub fn has_arc(&self, u: VertexId, v: VertexId) -> bool {
        match (self.local(u), self.local(v)) {
            (Some(a), Some(b)) => self.has_local_arc(a, b),
            _ => false,
        }
    }

    /// Arcs as local index pairs, lexicographically sorted.
    pub fn local_arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(u, s)| s.iter().map(move |&v| (u, v)))
    }

    /// Arcs by vertex id, lexicographically sorted.
    pub fn arcs(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.local_arcs().map(|(u, v)| (self.ids[u], self.ids[v]))
    }

    pub fn country_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.countries];
        for &c in &self.country {
            sizes[c] += 1;
        }
        sizes
    }

    /// Largest country block; 0 for the empty graph.
    pub fn width(&self) -> usize {
        self.country_sizes().into_iter().max().unwrap_or(0)
    }

    pub fn vertices_of_country(&self, country: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.ids.len()).filter(move |&l| self.country[l] == country)
    }

    /// Induced subgraph on the local vertices for which `keep` holds.
    /// The country set and vertex ids are preserved.
    pub fn induced_by(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut new_index = vec![usize::MAX; self.ids.len()];
        let mut ids = Vec::new();
        let mut country = Vec::new();
        for l in 0..self.ids.len() {
            if keep(l) {
                new_index[l] = ids.len();
                ids.push(self.ids[l]);
                country.push(self.country[l]);
            }
        }
        let mut succ = vec![Vec::new(); ids.len()];
        let mut arc_count = 0;
        for (u, s) in self.succ.iter().enumerate() {
            if new_index[u] == usize::MAX {
                continue;
            }
            for &v in s {
                if new_index[v] != usize::MAX {
                    succ[new_index[u]].push(new_index[v]);
                    arc_count += 1;
                }
            }
        }
        CompatibilityGraph { countries: self.countries, ids, country, succ, arc_count }
    }

    /// Same vertices, keeping the arcs `(u, v)` (local indices) accepted by
    /// `keep`.
    pub fn with_arcs_where(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let succ: Vec<Vec<usize>> =
            self.succ.iter().enumerate().map(|(u, s)| s.iter().copied().filter(|&v| keep(u, v)).collect()).collect();
        let arc_count = succ.iter().map(Vec::len).sum();
        CompatibilityGraph { succ, arc_count, ..self.clone() }
    }

    /// `G[∪_{p∈S} V_p]` for the given set of (0-based) countries.
    pub fn induced_subgraph(&self, countries: impl IntoIterator<Item = usize>) -> Self {
        let mut selected = vec![false; self.countries];
        for c in countries {
            if c < self.countries {
                selected[c] = true;
            }
        }
        self.induced_by(|l| selected[self.country[l]])
    }

    /// Strongly connected component index of every local vertex
    /// (iterative Tarjan; components numbered in completion order).
    pub fn strongly_connected_components(&self) -> Vec<usize> {
        let n = self.ids.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut comp = vec![usize::MAX; n];
        let mut stack = Vec::new();
        let mut next_index = 0;
        let mut next_comp = 0;
        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if *pos < self.succ[v].len() {
                    let w = self.succ[v][*pos];
                    *pos += 1;
                    if index[w] == usize::MAX {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        while let Some(w) = stack.pop() {
                            on_stack[w] = false;
                            comp[w] = next_comp;
                            if w == v {
                                break;
                            }
                        }
                        next_comp += 1;
                    }
                }
            }
        }
        comp
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile::from_graph(self, None);
        serde_json::to_string_pretty(&file).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        file.into_graph()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BloodType {
    O,
    A,
    B,
    AB,
}

impl BloodType {
    pub const ALL: [BloodType; 4] = [BloodType::O, BloodType::A, BloodType::B, BloodType::AB];

    /// ABO compatibility of a donor of type `self` with a patient of type `patient`.
    pub fn can_donate_to(self, patient: BloodType) -> bool {
        use BloodType::*;
        matches!(
            (self, patient),
            (O, _) | (A, A) | (A, AB) | (B, B) | (B, AB) | (AB, AB)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAttributes {
    pub patient_bt: BloodType,
    pub donor_bt: BloodType,
    /// Probability that a positive crossmatch rules out an offered kidney.
    pub pra: f64,
    /// First round (1-based) in which the pair is in the pool.
    pub arrival: u32,
}

pub const DEFAULT_EXPIRY_WINDOW: u32 = 4;

impl PairAttributes {
    /// Last round in which an unmatched pair is still in the pool.
    pub fn last_active_round(&self, window: u32) -> u32 {
        self.arrival + window.max(1) - 1
    }

    pub fn expiry_round(&self) -> u32 {
        self.last_active_round(DEFAULT_EXPIRY_WINDOW)
    }
}

/// All pairs that ever join the programme, with their arrival rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePool {
    pub graph: CompatibilityGraph,
    /// Indexed by local vertex index of `graph`.
    pub attributes: Vec<PairAttributes>,
    pub rounds: u32,
    pub seed: u64,
}

/// Settings of the synthetic pool generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub pairs: usize,
    pub countries: usize,
    pub rounds: u32,
    /// Share of all pairs present in round 1.
    pub initial_fraction: f64,
    /// Frequencies of O, A, B, AB among patients.
    pub patient_blood: [f64; 4],
    /// Frequencies of O, A, B, AB among donors.
    pub donor_blood: [f64; 4],
    /// Discrete PRA distribution as (pra, probability) pairs.
    pub pra_levels: Vec<(f64, f64)>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            pairs: 60,
            countries: 4,
            rounds: 24,
            initial_fraction: 0.25,
            patient_blood: [0.4814, 0.3373, 0.1428, 0.0385],
            donor_blood: [0.4814, 0.3373, 0.1428, 0.0385],
            pra_levels: vec![(0.05, 0.7019), (0.45, 0.2), (0.9, 0.0981)],
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: &str| Err(GraphError::InvalidConfig(m.to_string()));
        if self.countries < 1 {
            return bad("at least one country is required");
        }
        if self.rounds < 1 {
            return bad("at least one round is required");
        }
        if !(self.initial_fraction > 0.0 && self.initial_fraction <= 1.0) {
            return bad("initial fraction must lie in (0, 1]");
        }
        let dist_ok = |d: &[f64]| d.iter().all(|p| p.is_finite() && *p >= 0.0) && d.iter().sum::<f64>() > 0.0;
        if !dist_ok(&self.patient_blood) || !dist_ok(&self.donor_blood) {
            return bad("blood-type frequencies must be non-negative with positive sum");
        }
        let weights: Vec<f64> = self.pra_levels.iter().map(|l| l.1).collect();
        if self.pra_levels.is_empty() || !dist_ok(&weights) {
            return bad("PRA distribution must be non-empty with positive total weight");
        }
        if self.pra_levels.iter().any(|l| !(0.0..=1.0).contains(&l.0)) {
            return bad("PRA levels must lie in [0, 1]");
        }
        Ok(())
    }
}

fn sample_index(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut r = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if r < w {
                return i;
            }
            r -= w;
        }
    }
    last
}

/// Draws a deterministic synthetic pool.
///
/// Pair `i` belongs to country `i mod n`. A fixed share of pairs (rounded)
/// arrives in round 1; every other pair draws its arrival round uniformly
/// from `2..=rounds`. Arc `(u, v)` exists when the donor of `u` is ABO
/// compatible with the patient of `v` and a crossmatch succeeds with
/// probability `1 - pra(v)`.
pub fn generate_pool(config: &GeneratorConfig, seed: u64) -> Result<InstancePool, GraphError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.pairs;
    let mut attributes = Vec::with_capacity(n);
    for _ in 0..n {
        let patient_bt = BloodType::ALL[sample_index(&mut rng, config.patient_blood.iter().copied())];
        let donor_bt = BloodType::ALL[sample_index(&mut rng, config.donor_blood.iter().copied())];
        let pra = config.pra_levels[sample_index(&mut rng, config.pra_levels.iter().map(|l| l.1))].0;
        attributes.push(PairAttributes { patient_bt, donor_bt, pra, arrival: 1 });
    }
    let initial = ((config.initial_fraction * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for &i in &order[initial..] {
        attributes[i].arrival = if config.rounds >= 2 { rng.random_range(2..=config.rounds) } else { 1 };
    }
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v || !attributes[u].donor_bt.can_donate_to(attributes[v].patient_bt) {
                continue;
            }
            if rng.random::<f64>() < 1.0 - attributes[v].pra {
                arcs.push((VertexId(u as u32), VertexId(v as u32)));
            }
        }
    }
    let vertices = (0..n).map(|i| (VertexId(i as u32), i % config.countries));
    let graph = CompatibilityGraph::new(config.countries, vertices, arcs)?;
    Ok(InstancePool { graph, attributes, rounds: config.rounds, seed })
}

impl InstancePool {
    pub fn attributes_of(&self, id: VertexId) -> Option<&PairAttributes> {
        self.graph.local(id).map(|l| &self.attributes[l])
    }

    pub fn arrivals_in(&self, round: u32) -> Vec<VertexId> {
        self.graph
            .ids()
            .iter()
            .zip(&self.attributes)
            .filter(|(_, a)| a.arrival == round)
            .map(|(id, _)| *id)
            .collect()
    }

    /// Per-round compatibility graph on the `active` pairs.
    pub fn snapshot(&self, active: &BTreeSet<VertexId>) -> Result<CompatibilityGraph, GraphError> {
        let mut keep = vec![false; self.graph.vertex_count()];
        for id in active {
            let l = self.graph.local(*id).ok_or(GraphError::UnknownVertex(*id))?;
            keep[l] = true;
        }
        Ok(self.graph.induced_by(|l| keep[l]))
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile::from_graph(&self.graph, Some(self));
        serde_json::to_string_pretty(&file).expect("pool serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        let rounds = file.rounds.ok_or_else(|| GraphError::Format("pool file lacks `rounds`".into()))?;
        let seed = file.seed.unwrap_or(0);
        let graph = file.clone().into_graph()?;
        let mut attributes = vec![None; graph.vertex_count()];
        for v in &file.vertices {
            let (Some(patient_bt), Some(donor_bt), Some(pra), Some(arrival)) =
                (v.patient_bt, v.donor_bt, v.pra, v.arrival)
            else {
                return Err(GraphError::Format(format!("vertex {} lacks pair attributes", v.id)));
            };
            if arrival < 1 || arrival > rounds {
                return Err(GraphError::Format(format!("vertex {} arrives outside 1..={rounds}", v.id)));
            }
            let l = graph.local(v.id).expect("vertex registered above");
            attributes[l] = Some(PairAttributes { patient_bt, donor_bt, pra, arrival });
        }
        let attributes = attributes.into_iter().map(|a| a.expect("one record per vertex")).collect();
        Ok(InstancePool { graph, attributes, rounds, seed })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VertexRecord {
    id: VertexId,
    country: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    patient_bt: Option<BloodType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    donor_bt: Option<BloodType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pra: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival: Option<u32>,
}

/// On-disk form shared by plain graphs and pools (countries are 1-based).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    vertices: Vec<VertexRecord>,
    arcs: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rounds: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl GraphFile {
    fn from_graph(g: &CompatibilityGraph, pool: Option<&InstancePool>) -> Self {
        let vertices = (0..g.vertex_count())
            .map(|l| {
                let a = pool.map(|p| p.attributes[l]);
                VertexRecord {
                    id: g.id(l),
                    country: g.country_of_local(l) + 1,
                    patient_bt: a.map(|a| a.patient_bt),
                    donor_bt: a.map(|a| a.donor_bt),
                    pra: a.map(|a| a.pra),
                    arrival: a.map(|a| a.arrival),
                }
            })
            .collect();
        GraphFile {
            n: g.country_count(),
            vertices,
            arcs: g.arcs().map(|(u, v)| [u, v]).collect(),
            rounds: pool.map(|p| p.rounds),
            seed: pool.map(|p| p.seed),
        }
    }

    fn into_graph(self) -> Result<CompatibilityGraph, GraphError> {
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            if v.country == 0 || v.country > self.n {
                return Err(GraphError::CountryOutOfRange { vertex: v.id, country: v.country, countries: self.n });
            }
            vertices.push((v.id, v.country - 1));
        }
        CompatibilityGraph::new(self.n, vertices, self.arcs.into_iter().map(|[u, v]| (u, v)))
    }
}
