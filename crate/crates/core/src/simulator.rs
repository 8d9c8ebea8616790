//! Multi-round simulation of a credit-based international programme.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ikep_milp::SolveLimits;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{
    banzhaf_normalized, benefit_value, contribution_value, nucleolus, shapley, Allocation, AllocationError,
};
use crate::balancing::{strongly_close_with_optimum, weakly_close_with_optimum, BalancingError, BalancingOptions};
use crate::game::{coalition_table, Coalition, GameError, TuGame, ValueTable};
use crate::graph::{GraphError, InstancePool, DEFAULT_EXPIRY_WINDOW};
use crate::packing::{max_packing, transplant_vector, CyclePacking, ExchangeBound, PackingError, TransplantVector};
use crate::par::{map_ordered, Execution};
use crate::Rational;

pub const DEFAULT_ROUNDS: u32 = 24;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Balancing(#[from] BalancingError),
    #[error(transparent)]
    Packing(#[from] PackingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Concept {
    Shapley,
    Banzhaf,
    Nucleolus,
    Benefit,
    Contribution,
}

impl Concept {
    pub const ALL: [Concept; 5] =
        [Concept::Shapley, Concept::Banzhaf, Concept::Nucleolus, Concept::Benefit, Concept::Contribution];

    pub fn name(self) -> &'static str {
        match self {
            Concept::Shapley => "shapley",
            Concept::Banzhaf => "banzhaf",
            Concept::Nucleolus => "nucleolus",
            Concept::Benefit => "benefit",
            Concept::Contribution => "contribution",
        }
    }

    pub fn allocate<G: TuGame + ?Sized>(self, game: &G) -> Result<Allocation, AllocationError> {
        match self {
            Concept::Shapley => shapley(game),
            Concept::Banzhaf => banzhaf_normalized(game),
            Concept::Nucleolus => nucleolus(game),
            Concept::Benefit => benefit_value(game),
            Concept::Contribution => contribution_value(game),
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Concept {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Concept::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown concept `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Selection {
    /// The deterministic optimum of the packing solver, ignoring the target.
    Arbitrary,
    WeaklyClose,
    StronglyClose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scenario {
    pub selection: Selection,
    pub credits: bool,
}

impl Scenario {
    pub const ARBITRARY: Scenario = Scenario { selection: Selection::Arbitrary, credits: false };
    pub const D1: Scenario = Scenario { selection: Selection::WeaklyClose, credits: false };
    pub const D1_CREDITS: Scenario = Scenario { selection: Selection::WeaklyClose, credits: true };
    pub const LEXMIN: Scenario = Scenario { selection: Selection::StronglyClose, credits: false };
    pub const LEXMIN_CREDITS: Scenario = Scenario { selection: Selection::StronglyClose, credits: true };
    pub const ALL: [Scenario; 5] =
        [Scenario::ARBITRARY, Scenario::D1, Scenario::D1_CREDITS, Scenario::LEXMIN, Scenario::LEXMIN_CREDITS];

    pub fn name(self) -> &'static str {
        match (self.selection, self.credits) {
            (Selection::Arbitrary, false) => "arbitrary",
            (Selection::Arbitrary, true) => "arbitrary+c",
            (Selection::WeaklyClose, false) => "d1",
            (Selection::WeaklyClose, true) => "d1+c",
            (Selection::StronglyClose, false) => "lexmin",
            (Selection::StronglyClose, true) => "lexmin+c",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (base, credits) = match s.strip_suffix("+c") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let selection = match base {
            "arbitrary" => Selection::Arbitrary,
            "d1" => Selection::WeaklyClose,
            "lexmin" => Selection::StronglyClose,
            _ => return Err(format!("unknown scenario `{s}`")),
        };
        Ok(Scenario { selection, credits })
    }
}

impl Serialize for Scenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub concept: Concept,
    pub scenario: Scenario,
    pub bound: ExchangeBound,
    pub rounds: u32,
    /// Rounds an unmatched pair stays in the pool, counting its arrival round.
    pub expiry_window: u32,
    pub limits: SolveLimits,
    /// Mode for the per-round coalition table.
    pub exec: Execution,
}

impl ScenarioConfig {
    pub fn new(concept: Concept, scenario: Scenario, bound: ExchangeBound) -> Self {
        ScenarioConfig {
            concept,
            scenario,
            bound,
            rounds: DEFAULT_ROUNDS,
            expiry_window: DEFAULT_EXPIRY_WINDOW,
            limits: SolveLimits::default(),
            exec: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundLog {
    pub round: u32,
    pub pool_size: usize,
    pub value: i64,
    pub initial: Allocation,
    pub credits: Allocation,
    pub target: Allocation,
    pub packing: CyclePacking,
    pub transplants: TransplantVector,
    /// `|x_p − s_p|` per country.
    pub deviations: Vec<Rational>,
    pub cycle_histogram: BTreeMap<usize, usize>,
    /// Set when the concept was undefined and the surplus was split evenly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RoundLog {
    pub fn max_cycle_len(&self) -> usize {
        self.packing.max_cycle_length()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub total_transplants: usize,
    pub total_relative_deviation: Rational,
    pub max_relative_deviation: Rational,
    pub cycle_histogram: BTreeMap<usize, usize>,
    pub max_cycle_len: usize,
    /// First round whose packing contains a cycle of length `max_cycle_len`.
    pub max_cycle_round: Option<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationRun {
    pub logs: Vec<RoundLog>,
    pub metrics: RunMetrics,
}

/// Transplants per cycle length: each chosen cycle of length `L` adds `L`.
pub fn cycle_length_histogram(logs: &[RoundLog]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for log in logs {
        for (len, count) in &log.cycle_histogram {
            *h.entry(*len).or_insert(0) += count;
        }
    }
    h
}

fn packing_histogram(p: &CyclePacking) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for len in p.cycle_lengths() {
        *h.entry(len).or_insert(0) += len;
    }
    h
}

/// Initial allocation for one round. Games with `v(N) = 0` get the zero
/// vector. When a benefit or contribution denominator vanishes, the surplus
/// is split evenly on top of the stand-alone values.
fn initial_allocation(table: &ValueTable, concept: Concept) -> Result<(Allocation, Option<String>), SimulationError> {
    let n = table.players();
    if table.value(Coalition::grand(n)) == 0 {
        return Ok((Allocation::zeros(n), None));
    }
    match concept.allocate(table) {
        Ok(y) => Ok((y, None)),
        Err(AllocationError::ZeroDenominator(what)) => {
            let single: Vec<i64> = (0..n).map(|p| table.value(Coalition::singleton(p))).collect();
            let surp = table.value(Coalition::grand(n)) - single.iter().sum::<i64>();
            let share = Rational::new(surp, n as i64);
            let y = single.iter().map(|&v| Rational::from(v) + &share).collect();
            Ok((Allocation(y), Some(format!("{what} value undefined; surplus split evenly"))))
        }
        Err(e) => Err(e.into()),
    }
}

/// Runs one scenario over the pool's arrival trace.
///
/// Each round builds the graph of arrived, unmatched and unexpired pairs,
/// allocates `y` by the concept, sets `x = y + c`, selects a packing by the
/// scenario, removes matched pairs and updates credits to `x − s` (or zero
/// without credits). Pairs leave after their last active round, which is
/// checked after matching.
pub fn run(pool: &InstancePool, cfg: &ScenarioConfig) -> Result<SimulationRun, SimulationError> {
    if cfg.rounds == 0 {
        return Err(SimulationError::Config("at least one round is required".into()));
    }
    if cfg.rounds > pool.rounds {
        return Err(SimulationError::Config(format!(
            "{} rounds requested but the pool covers {}",
            cfg.rounds, pool.rounds
        )));
    }
    if cfg.expiry_window == 0 {
        return Err(SimulationError::Config("expiry window must be at least one round".into()));
    }
    let n = pool.graph.country_count();
    let opts = BalancingOptions { bound: cfg.bound, limits: cfg.limits, ..BalancingOptions::default() };
    let mut matched = vec![false; pool.graph.vertex_count()];
    let mut carried = Allocation::zeros(n);
    let mut logs = Vec::with_capacity(cfg.rounds as usize);

    for round in 1..=cfg.rounds {
        let g = pool.graph.induced_by(|l| {
            let a = &pool.attributes[l];
            !matched[l] && a.arrival <= round && round <= a.last_active_round(cfg.expiry_window)
        });
        let table = coalition_table(&g, cfg.bound, cfg.exec)?;
        let value = table.value(Coalition::grand(n));
        let (initial, note) = initial_allocation(&table, cfg.concept)?;
        let credits = if cfg.scenario.credits { carried.clone() } else { Allocation::zeros(n) };
        let target = Allocation(initial.0.iter().zip(&credits.0).map(|(y, c)| y + c).collect());
        let m_star = value as usize;
        let packing = match cfg.scenario.selection {
            Selection::Arbitrary => max_packing(&g, cfg.bound)?,
            Selection::WeaklyClose => weakly_close_with_optimum(&g, &target.0, m_star, &opts)?.packing,
            Selection::StronglyClose => strongly_close_with_optimum(&g, &target.0, m_star, &opts)?.packing,
        };
        let transplants = transplant_vector(&packing, &g)?;
        for v in packing.covered() {
            matched[pool.graph.local(v).expect("packing vertices come from the pool")] = true;
        }
        let signed: Vec<Rational> =
            target.0.iter().zip(&transplants.0).map(|(x, &s)| x - &Rational::from(s)).collect();
        carried = if cfg.scenario.credits { Allocation(signed.clone()) } else { Allocation::zeros(n) };
        logs.push(RoundLog {
            round,
            pool_size: g.vertex_count(),
            value,
            cycle_histogram: packing_histogram(&packing),
            initial,
            credits,
            target,
            packing,
            transplants,
            deviations: signed.iter().map(Rational::abs).collect(),
            note,
        });
    }
    let metrics = run_metrics(&logs, n);
    Ok(SimulationRun { logs, metrics })
}

fn run_metrics(logs: &[RoundLog], n: usize) -> RunMetrics {
    let total: usize = logs.iter().map(|l| l.transplants.total()).sum();
    let mut gap = vec![Rational::ZERO; n];
    for log in logs {
        for p in 0..n {
            gap[p] += &log.initial.0[p];
            gap[p] -= Rational::from(log.transplants.0[p]);
        }
    }
    let (total_rel, max_rel) = if total == 0 {
        (Rational::ZERO, Rational::ZERO)
    } else {
        let t = Rational::from(total);
        let abs: Vec<Rational> = gap.iter().map(Rational::abs).collect();
        let sum: Rational = abs.iter().sum();
        let max = abs.into_iter().max().unwrap_or(Rational::ZERO);
        (&sum / &t, &max / &t)
    };
    let max_cycle_len = logs.iter().map(RoundLog::max_cycle_len).max().unwrap_or(0);
    let max_cycle_round =
        logs.iter().find(|l| max_cycle_len > 0 && l.max_cycle_len() == max_cycle_len).map(|l| l.round);
    RunMetrics {
        total_transplants: total,
        total_relative_deviation: total_rel,
        max_relative_deviation: max_rel,
        cycle_histogram: cycle_length_histogram(logs),
        max_cycle_len,
        max_cycle_round,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub bound: ExchangeBound,
    pub run: SimulationRun,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedRuns {
    pub concept: Concept,
    pub outcomes: Vec<ScenarioOutcome>,
}

impl PairedRuns {
    pub fn metrics(&self, scenario: Scenario, bound: ExchangeBound) -> Option<&RunMetrics> {
        self.outcomes.iter().find(|o| o.scenario == scenario && o.bound == bound).map(|o| &o.run.metrics)
    }

    /// Transplant totals of the same scenario under both bounds, when run.
    pub fn bound_totals(&self, scenario: Scenario) -> Option<(usize, usize)> {
        let two = self.metrics(scenario, ExchangeBound::Two)?.total_transplants;
        let inf = self.metrics(scenario, ExchangeBound::Infinity)?.total_transplants;
        Some((two, inf))
    }
}

/// All five scenarios (times each requested bound) on the same pool.
pub fn paired_scenario_runs(
    pool: &InstancePool,
    concept: Concept,
    bounds: &[ExchangeBound],
    template: &ScenarioConfig,
    exec: Execution,
) -> Result<PairedRuns, SimulationError> {
    let jobs: Vec<(Scenario, ExchangeBound)> =
        bounds.iter().flat_map(|&b| Scenario::ALL.into_iter().map(move |s| (s, b))).collect();
    let results = map_ordered(exec, jobs, |(scenario, bound)| {
        let cfg = ScenarioConfig { concept, scenario, bound, ..template.clone() };
        run(pool, &cfg).map(|run| ScenarioOutcome { scenario, bound, run })
    });
    Ok(PairedRuns { concept, outcomes: results.into_iter().collect::<Result<_, _>>()? })
}
