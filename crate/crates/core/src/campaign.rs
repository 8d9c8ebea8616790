//! Simulation campaigns over a grid of seeds, country counts, concepts,
//! scenarios and exchange bounds, with CSV/JSON reporting.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use ikep_milp::SolveLimits;
use serde::{Deserialize, Serialize};

use crate::graph::{generate_pool, GeneratorConfig, InstancePool, DEFAULT_EXPIRY_WINDOW};
use crate::packing::ExchangeBound;
use crate::par::{map_ordered, Execution};
use crate::simulator::{run, Concept, Scenario, ScenarioConfig, SimulationRun, DEFAULT_ROUNDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub seeds: Vec<u64>,
    pub countries: Vec<usize>,
    pub pairs: usize,
    pub concepts: Vec<Concept>,
    pub scenarios: Vec<Scenario>,
    pub bounds: Vec<ExchangeBound>,
    pub rounds: u32,
    pub expiry_window: u32,
    pub initial_fraction: f64,
    /// Branch-and-bound node cap per integer program.
    pub max_nodes: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seeds: (1..=5).collect(),
            countries: vec![4],
            pairs: 60,
            concepts: Concept::ALL.to_vec(),
            scenarios: Scenario::ALL.to_vec(),
            bounds: vec![ExchangeBound::Infinity],
            rounds: DEFAULT_ROUNDS,
            expiry_window: DEFAULT_EXPIRY_WINDOW,
            initial_fraction: 0.25,
            max_nodes: SolveLimits::default().max_nodes,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, empty) in [
            ("seeds", self.seeds.is_empty()),
            ("countries", self.countries.is_empty()),
            ("concepts", self.concepts.is_empty()),
            ("scenarios", self.scenarios.is_empty()),
            ("bounds", self.bounds.is_empty()),
        ] {
            if empty {
                return Err(format!("`{name}` must not be empty"));
            }
        }
        if self.rounds == 0 || self.expiry_window == 0 {
            return Err("rounds and expiry window must be positive".into());
        }
        for &n in &self.countries {
            self.generator(n).validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn generator(&self, countries: usize) -> GeneratorConfig {
        GeneratorConfig {
            pairs: self.pairs,
            countries,
            rounds: self.rounds,
            initial_fraction: self.initial_fraction,
            ..GeneratorConfig::default()
        }
    }

    pub fn combinations(&self) -> usize {
        self.seeds.len() * self.countries.len() * self.concepts.len() * self.scenarios.len() * self.bounds.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunKey {
    pub seed: u64,
    pub countries: usize,
    pub concept: Concept,
    pub scenario: Scenario,
    pub bound: ExchangeBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignRun {
    pub key: RunKey,
    pub run: SimulationRun,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignFailure {
    pub key: RunKey,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignResult {
    pub pairs: usize,
    pub runs: Vec<CampaignRun>,
    pub failures: Vec<CampaignFailure>,
}

/// Runs every combination. Each (seed, country count) pool is generated
/// once and shared by all its runs; failures are collected, not fatal.
pub fn run_campaign(cfg: &CampaignConfig, exec: Execution) -> Result<CampaignResult, String> {
    cfg.validate()?;
    let mut pools: Vec<(u64, usize, Result<InstancePool, String>)> = Vec::new();
    for &seed in &cfg.seeds {
        for &n in &cfg.countries {
            pools.push((seed, n, generate_pool(&cfg.generator(n), seed).map_err(|e| e.to_string())));
        }
    }
    let mut jobs = Vec::with_capacity(cfg.combinations());
    for (i, (seed, countries, _)) in pools.iter().enumerate() {
        for &concept in &cfg.concepts {
            for &scenario in &cfg.scenarios {
                for &bound in &cfg.bounds {
                    jobs.push((i, RunKey { seed: *seed, countries: *countries, concept, scenario, bound }));
                }
            }
        }
    }
    let limits = SolveLimits { max_nodes: cfg.max_nodes, time_limit: None };
    let outcomes = map_ordered(exec, jobs, |(i, key)| {
        let pool = match &pools[i].2 {
            Ok(pool) => pool,
            Err(e) => return (key, Err(e.clone())),
        };
        let sc = ScenarioConfig {
            rounds: cfg.rounds,
            expiry_window: cfg.expiry_window,
            limits,
            ..ScenarioConfig::new(key.concept, key.scenario, key.bound)
        };
        (key, run(pool, &sc).map_err(|e| e.to_string()))
    });
    let mut result = CampaignResult { pairs: cfg.pairs, runs: Vec::new(), failures: Vec::new() };
    for (key, outcome) in outcomes {
        match outcome {
            Ok(run) => result.runs.push(CampaignRun { key, run }),
            Err(error) => result.failures.push(CampaignFailure { key, error }),
        }
    }
    Ok(result)
}

fn csv_string(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn key_fields(k: &RunKey) -> Vec<String> {
    vec![
        k.seed.to_string(),
        k.countries.to_string(),
        k.concept.to_string(),
        k.scenario.to_string(),
        k.bound.to_string(),
    ]
}

fn header(fields: &[&str]) -> Vec<String> {
    ["seed", "countries", "concept", "scenario", "bound"].iter().chain(fields).map(|s| s.to_string()).collect()
}

impl CampaignResult {
    /// One row per successful combination.
    pub fn metrics_csv(&self) -> String {
        let head = header(&[
            "pairs",
            "total_transplants",
            "total_relative_deviation",
            "total_relative_deviation_exact",
            "max_relative_deviation",
            "max_relative_deviation_exact",
            "max_cycle_len",
            "max_cycle_round",
        ]);
        let rows = self.runs.iter().map(|r| {
            let m = &r.run.metrics;
            let mut row = key_fields(&r.key);
            row.extend([
                self.pairs.to_string(),
                m.total_transplants.to_string(),
                format!("{:.6}", m.total_relative_deviation.to_f64()),
                m.total_relative_deviation.to_string(),
                format!("{:.6}", m.max_relative_deviation.to_f64()),
                m.max_relative_deviation.to_string(),
                m.max_cycle_len.to_string(),
                m.max_cycle_round.map_or(String::new(), |r| r.to_string()),
            ]);
            row
        });
        csv_string(&head, rows)
    }

    /// One row per round of every run. Per-country columns are padded to
    /// the largest country count in the campaign.
    pub fn rounds_csv(&self) -> String {
        let width = self.runs.iter().map(|r| r.key.countries).max().unwrap_or(0);
        let mut fields: Vec<String> = ["round", "pool_size", "vN"].iter().map(|s| s.to_string()).collect();
        for prefix in ["y", "c", "x", "s"] {
            fields.extend((1..=width).map(|p| format!("{prefix}_{p}")));
        }
        fields.push("max_cycle_len".into());
        let field_refs: Vec<&str> = fields.iter().map(String::as_str).collect();
        let head = header(&field_refs);
        let rows = self.runs.iter().flat_map(|r| {
            r.run.logs.iter().map(move |log| {
                let mut row = key_fields(&r.key);
                row.extend([log.round.to_string(), log.pool_size.to_string(), log.value.to_string()]);
                let pad = |mut v: Vec<String>| {
                    v.resize(width, String::new());
                    v
                };
                for alloc in [&log.initial, &log.credits, &log.target] {
                    row.extend(pad(alloc.0.iter().map(|q| q.to_string()).collect()));
                }
                row.extend(pad(log.transplants.0.iter().map(|s| s.to_string()).collect()));
                row.push(log.max_cycle_len().to_string());
                row
            })
        });
        csv_string(&head, rows)
    }

    /// Transplants per (round, cycle length) for every run.
    pub fn histogram_csv(&self) -> String {
        let head = header(&["round", "cycle_length", "transplants"]);
        let rows = self.runs.iter().flat_map(|r| {
            r.run.logs.iter().flat_map(move |log| {
                log.cycle_histogram.iter().map(move |(len, count)| {
                    let mut row = key_fields(&r.key);
                    row.extend([log.round.to_string(), len.to_string(), count.to_string()]);
                    row
                })
            })
        });
        csv_string(&head, rows)
    }

    /// Transplant totals under both bounds for every combination run with
    /// both. Empty when only one bound was requested.
    pub fn paired_csv(&self) -> String {
        let mut by_key: BTreeMap<(u64, usize, Concept, Scenario), [Option<usize>; 2]> = BTreeMap::new();
        for r in &self.runs {
            let k = &r.key;
            let slot = match k.bound {
                ExchangeBound::Two => 0,
                ExchangeBound::Infinity => 1,
            };
            by_key.entry((k.seed, k.countries, k.concept, k.scenario)).or_default()[slot] =
                Some(r.run.metrics.total_transplants);
        }
        let head: Vec<String> =
            ["seed", "countries", "concept", "scenario", "transplants_two", "transplants_infinity", "infinity_ge_two"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        let rows = by_key.into_iter().filter_map(|((seed, n, concept, scenario), totals)| match totals {
            [Some(two), Some(inf)] => Some(vec![
                seed.to_string(),
                n.to_string(),
                concept.to_string(),
                scenario.to_string(),
                two.to_string(),
                inf.to_string(),
                (inf >= two).to_string(),
            ]),
            _ => None,
        });
        csv_string(&head, rows)
    }

    pub fn failures_csv(&self) -> String {
        let head = header(&["error"]);
        let rows = self.failures.iter().map(|f| {
            let mut row = key_fields(&f.key);
            row.push(f.error.clone());
            row
        });
        csv_string(&head, rows)
    }

    /// Writes `metrics.csv`, `rounds.csv`, `histogram.csv`, `failures.csv`,
    /// `paired.csv` (when both bounds ran) and optionally `runs.json`.
    pub fn write_to(&self, dir: &Path, bounds: &[ExchangeBound], json: bool) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            ("metrics.csv", self.metrics_csv()),
            ("rounds.csv", self.rounds_csv()),
            ("histogram.csv", self.histogram_csv()),
            ("failures.csv", self.failures_csv()),
        ];
        if bounds.contains(&ExchangeBound::Two) && bounds.contains(&ExchangeBound::Infinity) {
            files.push(("paired.csv", self.paired_csv()));
        }
        if json {
            files.push(("runs.json", serde_json::to_string_pretty(self).map_err(io::Error::other)?));
        }
        let mut written = Vec::new();
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CampaignConfig {
        CampaignConfig {
            seeds: vec![1, 2],
            pairs: 24,
            countries: vec![3],
            concepts: vec![Concept::Shapley, Concept::Benefit],
            rounds: 6,
            ..CampaignConfig::default()
        }
    }

    #[test]
    fn row_count_contract() {
        let cfg = small();
        let res = run_campaign(&cfg, Execution::Parallel).unwrap();
        assert!(res.failures.is_empty());
        assert_eq!(res.runs.len(), cfg.combinations());
        assert_eq!(res.metrics_csv().lines().count(), 1 + 2 * 2 * 5);
        assert_eq!(res.rounds_csv().lines().count(), 1 + 2 * 2 * 5 * 6);
        assert!(res.paired_csv().lines().count() == 1);
    }

    #[test]
    fn paired_bounds_and_determinism() {
        let cfg = CampaignConfig { bounds: vec![ExchangeBound::Two, ExchangeBound::Infinity], ..small() };
        let a = run_campaign(&cfg, Execution::Parallel).unwrap();
        let b = run_campaign(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a.metrics_csv(), b.metrics_csv());
        assert_eq!(a.rounds_csv(), b.rounds_csv());
        let paired = a.paired_csv();
        assert_eq!(paired.lines().count(), 1 + 2 * 2 * 5);
        assert!(paired.lines().skip(1).all(|l| l.ends_with(",true")));
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg: CampaignConfig = serde_json::from_str(r#"{"seeds":[7],"scenarios":["lexmin+c","d1"]}"#).unwrap();
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.scenarios, vec![Scenario::LEXMIN_CREDITS, Scenario::D1]);
        assert_eq!(cfg.rounds, 24);
        assert!(serde_json::from_str::<CampaignConfig>(r#"{"seed":[7]}"#).is_err());
        assert!(CampaignConfig { seeds: vec![], ..CampaignConfig::default() }.validate().is_err());
        assert!(CampaignConfig { countries: vec![0], ..CampaignConfig::default() }.validate().is_err());
    }
}
