//! Iterated local search over a genotype space, logging accepted local
//! optima and the escape transitions between them.
//!
//! Counting conventions:
//!
//! - every sampled local-search neighbour and every perturbation is one
//!   attempted mutation;
//! - a local-search neighbour or an ILS candidate that is at least as fit as
//!   the incumbent (within the equality tolerance) is an accepted mutation,
//!   and an accepted design change when its design hash differs;
//! - stall counters reset only on strict improvement, so neutral moves
//!   still count towards termination.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encodings::{random_genotype, Encoding, Genotype, MutationRates};
use crate::evaluate::{EvalError, Evaluator, Fitness};
use crate::hash::hex_id;
use crate::model::{hash_design, hash_phenotype};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlsConfig {
    pub encoding: Encoding,
    pub runs: usize,
    pub ls_stall_budget: usize,
    pub perturbation_strength: usize,
    pub run_stall_limit: usize,
    pub run_iteration_limit: usize,
    pub rates: MutationRates,
    pub base_seed: u64,
    pub fitness_equality_tolerance: f64,
}

impl IlsConfig {
    pub fn new(encoding: Encoding) -> Self {
        Self {
            encoding,
            runs: 30,
            ls_stall_budget: 100,
            perturbation_strength: 3,
            run_stall_limit: 30,
            run_iteration_limit: 100,
            rates: MutationRates::for_encoding(encoding),
            base_seed: 0,
            fitness_equality_tolerance: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.runs == 0 || self.ls_stall_budget == 0 || self.run_stall_limit == 0 || self.run_iteration_limit == 0 {
            return Err("runs and all search budgets must be positive".into());
        }
        if !(self.fitness_equality_tolerance >= 0.0) {
            return Err("fitness_equality_tolerance must be non-negative".into());
        }
        self.rates.validate()
    }

    pub fn seed_for(&self, run_id: u32) -> u64 {
        self.base_seed.wrapping_add(u64::from(run_id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub node_index: usize,
    pub fitness: Fitness,
    #[serde(with = "hex_id")]
    pub genotype_hash: u64,
    #[serde(with = "hex_id")]
    pub phenotype_hash: u64,
    #[serde(with = "hex_id")]
    pub design_hash: u64,
    pub genotype: Genotype,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounters {
    pub attempted_mutations: u64,
    pub accepted_mutations: u64,
    pub accepted_design_changes: u64,
    pub evaluations: u64,
    #[serde(with = "hex_set")]
    pub unique_designs: BTreeSet<u64>,
}

mod hex_set {
    use std::collections::BTreeSet;

    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::hash::{from_hex, to_hex};

    pub fn serialize<S: Serializer>(set: &BTreeSet<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(set.iter().map(|&id| to_hex(id)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<u64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| from_hex(s).ok_or_else(|| D::Error::custom(format!("invalid 64-bit hex id {s:?}"))))
            .collect()
    }
}

/// One ILS trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub run_id: u32,
    pub encoding: Encoding,
    pub seed: u64,
    pub entries: Vec<TrajectoryEntry>,
    /// `(src, dst)` entry indices, in the order they were followed.
    pub transitions: Vec<(usize, usize)>,
    pub counters: RunCounters,
}

impl RunLog {
    pub fn max_fitness(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.fitness.value).reduce(f64::max)
    }
}

/// A genotype together with everything learned by evaluating it.
#[derive(Debug, Clone)]
pub struct Scored {
    pub genotype: Genotype,
    pub fitness: Fitness,
    pub phenotype_hash: u64,
    pub design_hash: u64,
}

/// Shared machinery of local search and ILS: one RNG, one evaluator, one
/// set of counters.
pub struct Search<'a> {
    cfg: &'a IlsConfig,
    evaluator: &'a mut dyn Evaluator,
    pub rng: RngStream,
    pub counters: RunCounters,
}

impl<'a> Search<'a> {
    pub fn new(cfg: &'a IlsConfig, evaluator: &'a mut dyn Evaluator, rng: RngStream) -> Self {
        Self {
            cfg,
            evaluator,
            rng,
            counters: RunCounters::default(),
        }
    }

    pub fn score(&mut self, genotype: Genotype) -> Result<Scored, EvalError> {
        let tree = genotype
            .express()
            .map_err(|e| EvalError::Backend(format!("genotype failed to express: {e}")))?;
        let fitness = self.evaluator.evaluate(&tree)?;
        let design_hash = hash_design(&tree)?;
        self.counters.evaluations += 1;
        self.counters.unique_designs.insert(design_hash);
        Ok(Scored {
            phenotype_hash: hash_phenotype(&tree)?,
            design_hash,
            fitness,
            genotype,
        })
    }

    fn at_least_as_good(&self, candidate: &Fitness, incumbent: &Fitness) -> bool {
        candidate.value >= incumbent.value - self.cfg.fitness_equality_tolerance
    }

    fn strictly_better(&self, candidate: &Fitness, incumbent: &Fitness) -> bool {
        candidate.value > incumbent.value + self.cfg.fitness_equality_tolerance
    }

    /// First-improvement hill climbing until `ls_stall_budget` consecutive
    /// neighbours bring no strict improvement.
    pub fn local_search(&mut self, start: Scored) -> Result<Scored, EvalError> {
        let mut incumbent = start;
        let mut stall = 0;
        while stall < self.cfg.ls_stall_budget {
            let neighbour = incumbent.genotype.mutate(&self.cfg.rates, &mut self.rng);
            self.counters.attempted_mutations += 1;
            let scored = self.score(neighbour)?;
            stall += 1;
            if self.at_least_as_good(&scored.fitness, &incumbent.fitness) {
                self.counters.accepted_mutations += 1;
                if scored.design_hash != incumbent.design_hash {
                    self.counters.accepted_design_changes += 1;
                }
                if self.strictly_better(&scored.fitness, &incumbent.fitness) {
                    stall = 0;
                }
                incumbent = scored;
            }
        }
        Ok(incumbent)
    }

    pub fn perturb(&mut self, g: &Genotype) -> Genotype {
        perturb(g, self.cfg, &mut self.rng)
    }
}

/// The mutation bundle applied `perturbation_strength` times in sequence.
pub fn perturb(g: &Genotype, cfg: &IlsConfig, rng: &mut RngStream) -> Genotype {
    let mut out = g.clone();
    for _ in 0..cfg.perturbation_strength {
        out = out.mutate(&cfg.rates, rng);
    }
    out
}

/// Hill-climb from `g`; returns the local optimum and its fitness.
pub fn local_search(
    g: Genotype,
    cfg: &IlsConfig,
    evaluator: &mut dyn Evaluator,
    rng: &mut RngStream,
) -> Result<(Genotype, Fitness), EvalError> {
    let mut search = Search::new(cfg, evaluator, rng.clone());
    let start = search.score(g)?;
    let optimum = search.local_search(start)?;
    *rng = search.rng;
    Ok((optimum.genotype, optimum.fitness))
}

/// One full ILS run seeded with `base_seed + run_id`.
pub fn ils_run(run_id: u32, cfg: &IlsConfig, evaluator: &mut dyn Evaluator) -> Result<RunLog, EvalError> {
    let seed = cfg.seed_for(run_id);
    let mut search = Search::new(cfg, evaluator, RngStream::new(seed));

    let initial = random_genotype(cfg.encoding, &mut search.rng);
    let start = search.score(initial)?;
    let mut incumbent = search.local_search(start)?;

    let mut entries = Vec::new();
    let mut index_of: HashMap<u64, usize> = HashMap::new();
    let mut intern = |s: &Scored, entries: &mut Vec<TrajectoryEntry>| -> usize {
        let genotype_hash = s.genotype.hash();
        *index_of.entry(genotype_hash).or_insert_with(|| {
            entries.push(TrajectoryEntry {
                node_index: entries.len(),
                fitness: s.fitness,
                genotype_hash,
                phenotype_hash: s.phenotype_hash,
                design_hash: s.design_hash,
                genotype: s.genotype.clone(),
            });
            entries.len() - 1
        })
    };
    let mut current = intern(&incumbent, &mut entries);
    let mut transitions = Vec::new();

    let mut iterations = 0;
    let mut stall = 0;
    while iterations < cfg.run_iteration_limit && stall < cfg.run_stall_limit {
        iterations += 1;
        let perturbed = search.perturb(&incumbent.genotype);
        search.counters.attempted_mutations += 1;
        let start = search.score(perturbed)?;
        let candidate = search.local_search(start)?;

        if search.at_least_as_good(&candidate.fitness, &incumbent.fitness) {
            let improved = search.strictly_better(&candidate.fitness, &incumbent.fitness);
            search.counters.accepted_mutations += 1;
            if candidate.design_hash != incumbent.design_hash {
                search.counters.accepted_design_changes += 1;
            }
            let next = intern(&candidate, &mut entries);
            transitions.push((current, next));
            current = next;
            incumbent = candidate;
            stall = if improved { 0 } else { stall + 1 };
        } else {
            stall += 1;
        }
    }

    Ok(RunLog {
        run_id,
        encoding: cfg.encoding,
        seed,
        entries,
        transitions,
        counters: search.counters,
    })
}

/// Draw `samples` fresh neighbours of `g` with the local-search operator and
/// count those strictly fitter than `g` (beyond the equality tolerance).
pub fn resample_neighbourhood(
    g: &Genotype,
    samples: usize,
    cfg: &IlsConfig,
    evaluator: &mut dyn Evaluator,
    rng: &mut RngStream,
) -> Result<usize, EvalError> {
    let base = evaluator.evaluate(&g.express().map_err(|e| EvalError::Backend(e.to_string()))?)?;
    let mut better = 0;
    for _ in 0..samples {
        let n = g.mutate(&cfg.rates, rng);
        let tree = n.express().map_err(|e| EvalError::Backend(e.to_string()))?;
        if evaluator.evaluate(&tree)?.value > base.value + cfg.fitness_equality_tolerance {
            better += 1;
        }
    }
    Ok(better)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    /// Accepted over attempted mutations, in percent.
    pub mutation_acceptance: f64,
    /// Accepted design changes over accepted mutations, in percent.
    pub design_acceptance: f64,
    pub unique_designs: u64,
    pub attempted_mutations: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsInputError {
    #[error("no run logs given")]
    EmptyInput,
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn run_statistics(logs: &[RunLog]) -> Result<RunStatistics, StatsInputError> {
    if logs.is_empty() {
        return Err(StatsInputError::EmptyInput);
    }
    let sets: Vec<&BTreeSet<u64>> = logs.iter().map(|l| &l.counters.unique_designs).collect();
    Ok(aggregate_counters(logs.iter().map(|l| &l.counters), &sets))
}

pub(crate) fn aggregate_counters<'a>(
    counters: impl Iterator<Item = &'a RunCounters>,
    design_sets: &[&BTreeSet<u64>],
) -> RunStatistics {
    let (mut attempted, mut accepted, mut design) = (0u64, 0u64, 0u64);
    for c in counters {
        attempted += c.attempted_mutations;
        accepted += c.accepted_mutations;
        design += c.accepted_design_changes;
    }
    let union: BTreeSet<u64> = design_sets.iter().flat_map(|s| s.iter().copied()).collect();
    RunStatistics {
        mutation_acceptance: percent(accepted, attempted),
        design_acceptance: percent(design, accepted),
        unique_designs: union.len() as u64,
        attempted_mutations: attempted,
    }
}

// ---------------------------------------------------------------------------
// Line-delimited JSON persistence

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LogRecord {
    Header {
        schema: u32,
        run_id: u32,
        encoding: Encoding,
        seed: u64,
    },
    Entry(TrajectoryEntry),
    Transition {
        src: usize,
        dst: usize,
    },
    Counters(RunCounters),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported run log schema {0}")]
    Schema(u32),
    #[error("run log is missing its {0} record")]
    Missing(&'static str),
}

impl RunLog {
    /// Header, entries, transitions, then counters; one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut put = |rec: &LogRecord| -> std::io::Result<()> {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")
        };
        put(&LogRecord::Header {
            schema: crate::SCHEMA_VERSION,
            run_id: self.run_id,
            encoding: self.encoding,
            seed: self.seed,
        })?;
        for e in &self.entries {
            put(&LogRecord::Entry(e.clone()))?;
        }
        for &(src, dst) in &self.transitions {
            put(&LogRecord::Transition { src, dst })?;
        }
        put(&LogRecord::Counters(self.counters.clone()))
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<RunLog, LogError> {
        let mut header = None;
        let mut counters = None;
        let mut entries = Vec::new();
        let mut transitions = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| LogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            match rec {
                LogRecord::Header {
                    schema,
                    run_id,
                    encoding,
                    seed,
                } => {
                    if schema != crate::SCHEMA_VERSION {
                        return Err(LogError::Schema(schema));
                    }
                    header = Some((run_id, encoding, seed));
                }
                LogRecord::Entry(e) => entries.push(e),
                LogRecord::Transition { src, dst } => transitions.push((src, dst)),
                LogRecord::Counters(c) => counters = Some(c),
            }
        }
        let (run_id, encoding, seed) = header.ok_or(LogError::Missing("header"))?;
        Ok(RunLog {
            run_id,
            encoding,
            seed,
            entries,
            transitions,
            counters: counters.ok_or(LogError::Missing("counters"))?,
        })
    }
}
