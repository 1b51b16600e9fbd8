//! Fixtures shared by the criterion benchmarks in `benches/`.

use lonscape::encodings::random_genotype;
use lonscape::evaluate::SurrogateEvaluator;
use lonscape::sampler::ils_run;
use lonscape::{Encoding, Genotype, IlsConfig, PhenotypeTree, RngStream, RunLog};

/// `count` random genotypes drawn from a fixed seed.
pub fn genotypes(encoding: Encoding, count: usize) -> Vec<Genotype> {
    let mut rng = RngStream::new(7);
    (0..count).map(|_| random_genotype(encoding, &mut rng)).collect()
}

pub fn trees(encoding: Encoding, count: usize) -> Vec<PhenotypeTree> {
    genotypes(encoding, count)
        .iter()
        .map(|g| g.express().expect("random genotypes express"))
        .collect()
}

/// Short ILS runs, enough to give a LON a few hundred nodes.
pub fn run_logs(encoding: Encoding, runs: u32) -> Vec<RunLog> {
    let mut cfg = IlsConfig::new(encoding);
    cfg.ls_stall_budget = 30;
    cfg.run_stall_limit = 8;
    (0..runs)
        .map(|r| ils_run(r, &cfg, &mut SurrogateEvaluator::default()).expect("surrogate never fails"))
        .collect()
}
