//! Partitioned permutation games: coalition values over the packing solver.

use std::fmt::Write;
use std::sync::OnceLock;

use thiserror::Error;

use crate::graph::CompatibilityGraph;
use crate::packing::{max_2cycle_packing, max_cycle_packing, ExchangeBound, PackingError};
use crate::par::{map_ordered, Execution};

/// Hard cap on the number of players of a coalition game.
pub const MAX_PLAYERS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("{players} players exceed the cap of {cap}")]
    CapExceeded { players: usize, cap: usize },
    #[error("value table for {players} players needs {expected} entries, got {got}")]
    TableSize { players: usize, expected: usize, got: usize },
    #[error(transparent)]
    Packing(#[from] PackingError),
}

/// A set of players as a bitmask; bit `p` is (0-based) country `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(pub u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn grand(n: usize) -> Self {
        Coalition(if n >= 32 { u32::MAX } else { (1u32 << n) - 1 })
    }

    pub fn singleton(p: usize) -> Self {
        Coalition(1 << p)
    }

    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Self {
        Coalition(members.into_iter().fold(0, |m, p| m | 1 << p))
    }

    pub fn contains(self, p: usize) -> bool {
        self.0 >> p & 1 == 1
    }

    pub fn with(self, p: usize) -> Self {
        Coalition(self.0 | 1 << p)
    }

    pub fn without(self, p: usize) -> Self {
        Coalition(self.0 & !(1 << p))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&p| self.contains(p))
    }

    /// All coalitions of `n` players in bitmask order.
    pub fn all(n: usize) -> impl Iterator<Item = Coalition> {
        (0..1u32 << n).map(Coalition)
    }
}

/// A transferable-utility game with integer values.
pub trait TuGame: Sync {
    fn players(&self) -> usize;
    fn value(&self, s: Coalition) -> i64;
}

/// Complete coalition-value table indexed by bitmask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueTable {
    n: usize,
    values: Vec<i64>,
}

impl ValueTable {
    pub fn new(n: usize, values: Vec<i64>) -> Result<Self, GameError> {
        if n > MAX_PLAYERS {
            return Err(GameError::CapExceeded { players: n, cap: MAX_PLAYERS });
        }
        if values.len() != 1 << n {
            return Err(GameError::TableSize { players: n, expected: 1 << n, got: values.len() });
        }
        Ok(ValueTable { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(Coalition) -> i64) -> Result<Self, GameError> {
        if n > MAX_PLAYERS {
            return Err(GameError::CapExceeded { players: n, cap: MAX_PLAYERS });
        }
        Ok(ValueTable { n, values: Coalition::all(n).map(f).collect() })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Audit dump: one `bitmask,value` row per coalition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitmask,value\n");
        for (mask, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{mask},{v}");
        }
        out
    }
}

impl TuGame for ValueTable {
    fn players(&self) -> usize {
        self.n
    }

    fn value(&self, s: Coalition) -> i64 {
        self.values[s.0 as usize]
    }
}

/// Memoized `v(S)` = maximum cycle packing size of `G[∪_{p∈S} V_p]`.
#[derive(Debug)]
pub struct GameOracle {
    graph: CompatibilityGraph,
    cache: Vec<OnceLock<i64>>,
}

impl GameOracle {
    pub fn new(graph: CompatibilityGraph) -> Result<Self, GameError> {
        let n = graph.country_count();
        if n > MAX_PLAYERS {
            return Err(GameError::CapExceeded { players: n, cap: MAX_PLAYERS });
        }
        let cache = (0..1usize << n).map(|_| OnceLock::new()).collect();
        Ok(GameOracle { graph, cache })
    }

    pub fn graph(&self) -> &CompatibilityGraph {
        &self.graph
    }

    pub fn coalition_value(&self, s: Coalition) -> i64 {
        *self.cache[s.0 as usize].get_or_init(|| self.evaluate(s))
    }

    fn evaluate(&self, s: Coalition) -> i64 {
        max_cycle_packing(&self.graph.induced_subgraph(s.members())).size() as i64
    }

    pub fn all_coalition_values(&self, exec: Execution) -> ValueTable {
        self.all_coalition_values_capped(MAX_PLAYERS, exec).expect("player count checked on construction")
    }

    pub fn all_coalition_values_capped(&self, cap: usize, exec: Execution) -> Result<ValueTable, GameError> {
        let n = self.graph.country_count();
        if n > cap {
            return Err(GameError::CapExceeded { players: n, cap });
        }
        let values = map_ordered(exec, Coalition::all(n).collect(), |s| self.coalition_value(s));
        Ok(ValueTable { n, values })
    }
}

impl TuGame for GameOracle {
    fn players(&self) -> usize {
        self.graph.country_count()
    }

    fn value(&self, s: Coalition) -> i64 {
        self.coalition_value(s)
    }
}

/// Value table of the game whose `v(S)` is the maximum 2-cycle packing size.
pub fn two_cycle_game(graph: &CompatibilityGraph, exec: Execution) -> Result<ValueTable, GameError> {
    let n = graph.country_count();
    if n > MAX_PLAYERS {
        return Err(GameError::CapExceeded { players: n, cap: MAX_PLAYERS });
    }
    let values = map_ordered(exec, Coalition::all(n).collect(), |s| {
        max_2cycle_packing(&graph.induced_subgraph(s.members())).map(|p| p.size() as i64)
    });
    let values = values.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ValueTable { n, values })
}

/// Full value table of the game for exchange bound `bound`.
pub fn coalition_table(graph: &CompatibilityGraph, bound: ExchangeBound, exec: Execution) -> Result<ValueTable, GameError> {
    match bound {
        ExchangeBound::Infinity => Ok(GameOracle::new(graph.clone())?.all_coalition_values(exec)),
        ExchangeBound::Two => two_cycle_game(graph, exec),
    }
}
