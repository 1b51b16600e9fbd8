//! Genotype representations and their mapping onto [`PhenotypeTree`]s.

pub mod cppn;
pub mod direct;
pub mod lsystem;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a64;
use crate::model::{PhenotypeTree, TreeError};
use crate::rng::RngStream;

pub use cppn::{cppn_forward, express_cppn, mutate_cppn, CppnGenotype};
pub use direct::{express_direct, mutate_direct, DirectGenotype};
pub use lsystem::{express_lsystem, mutate_lsystem, LSystemGenotype};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Direct,
    LSystem,
    Cppn,
}

impl Encoding {
    pub const ALL: [Encoding; 3] = [Encoding::Direct, Encoding::LSystem, Encoding::Cppn];

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Direct => "direct",
            Encoding::LSystem => "lsystem",
            Encoding::Cppn => "cppn",
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Encoding::Direct),
            "lsystem" | "l-system" => Ok(Encoding::LSystem),
            "cppn" => Ok(Encoding::Cppn),
            other => Err(format!("unknown encoding {other:?} (expected direct, lsystem or cppn)")),
        }
    }
}

/// Per-encoding mutation probabilities and Gaussian step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub controller_rate: f64,
    pub design_rate: f64,
    pub gaussian_sigma: f64,
}

impl MutationRates {
    pub const DEFAULT_SIGMA: f64 = 0.2;

    /// Tuned rates for each encoding.
    pub fn for_encoding(encoding: Encoding) -> Self {
        let (controller_rate, design_rate) = match encoding {
            Encoding::Direct => (0.32, 0.16),
            Encoding::LSystem => (0.16, 0.04),
            Encoding::Cppn => (0.02, 0.02),
        };
        Self {
            controller_rate,
            design_rate,
            gaussian_sigma: Self::DEFAULT_SIGMA,
        }
    }

    pub fn zero() -> Self {
        Self {
            controller_rate: 0.0,
            design_rate: 0.0,
            gaussian_sigma: Self::DEFAULT_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.controller_rate) || !unit.contains(&self.design_rate) {
            return Err("mutation rates must lie in [0, 1]".into());
        }
        if !(self.gaussian_sigma > 0.0) {
            return Err("gaussian_sigma must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenotypeError {
    #[error("invalid genotype: {0}")]
    Invalid(String),
    #[error("CPPN contains a cycle among enabled connections")]
    CycleDetected,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "lowercase")]
pub enum Genotype {
    Direct(DirectGenotype),
    LSystem(LSystemGenotype),
    Cppn(CppnGenotype),
}

/// Versioned JSON form of a genotype: `{"schema": 1, "encoding": ..., ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenotypeDocument {
    pub schema: u32,
    #[serde(flatten)]
    pub genotype: Genotype,
}

impl Genotype {
    pub fn encoding(&self) -> Encoding {
        match self {
            Genotype::Direct(_) => Encoding::Direct,
            Genotype::LSystem(_) => Encoding::LSystem,
            Genotype::Cppn(_) => Encoding::Cppn,
        }
    }

    pub fn express(&self) -> Result<PhenotypeTree, GenotypeError> {
        match self {
            Genotype::Direct(g) => express_direct(g),
            Genotype::LSystem(g) => express_lsystem(g),
            Genotype::Cppn(g) => express_cppn(g),
        }
    }

    /// Design mutation for the encoding (structure plus module-list geometry).
    pub fn mutate_design(&self, rates: &MutationRates, rng: &mut RngStream) -> Genotype {
        match self {
            Genotype::Direct(g) => Genotype::Direct(mutate_direct(g, rates, rng)),
            Genotype::LSystem(g) => Genotype::LSystem(mutate_lsystem(g, rates, rng)),
            Genotype::Cppn(g) => Genotype::Cppn(mutate_cppn(g, rates, rng)),
        }
    }

    /// One neighbour draw: a design pass followed by a controller pass.
    pub fn mutate(&self, rates: &MutationRates, rng: &mut RngStream) -> Genotype {
        let designed = self.mutate_design(rates, rng);
        mutate_controllers(&designed, rates, rng)
    }

    pub fn to_document(&self) -> GenotypeDocument {
        GenotypeDocument {
            schema: crate::SCHEMA_VERSION,
            genotype: self.clone(),
        }
    }

    /// Stable identity of the genotype: FNV-1a over its JSON serialisation.
    pub fn hash(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("genotype serialises");
        fnv1a64(&bytes)
    }
}

/// Gaussian perturbation of the module-list controllers. CPPN controllers are
/// network outputs, so CPPN genotypes pass through unchanged.
pub fn mutate_controllers(g: &Genotype, rates: &MutationRates, rng: &mut RngStream) -> Genotype {
    let mut out = g.clone();
    match &mut out {
        Genotype::Direct(d) => d
            .module_list
            .mutate_controllers(rates.controller_rate, rates.gaussian_sigma, rng),
        Genotype::LSystem(l) => l
            .module_list
            .mutate_controllers(rates.controller_rate, rates.gaussian_sigma, rng),
        Genotype::Cppn(_) => {}
    }
    out
}

pub fn random_genotype(encoding: Encoding, rng: &mut RngStream) -> Genotype {
    match encoding {
        Encoding::Direct => Genotype::Direct(DirectGenotype::random(rng)),
        Encoding::LSystem => Genotype::LSystem(LSystemGenotype::random(rng)),
        Encoding::Cppn => Genotype::Cppn(CppnGenotype::random(rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_tree, ModuleKind};

    #[test]
    fn table_rates() {
        let d = MutationRates::for_encoding(Encoding::Direct);
        assert_eq!((d.controller_rate, d.design_rate), (0.32, 0.16));
        let l = MutationRates::for_encoding(Encoding::LSystem);
        assert_eq!((l.controller_rate, l.design_rate), (0.16, 0.04));
        let c = MutationRates::for_encoding(Encoding::Cppn);
        assert_eq!((c.controller_rate, c.design_rate), (0.02, 0.02));
        assert_eq!(d.gaussian_sigma, 0.2);
    }

    #[test]
    fn encoding_parse() {
        assert_eq!("L-System".parse::<Encoding>(), Ok(Encoding::LSystem));
        assert!("voxel".parse::<Encoding>().is_err());
    }

    #[test]
    fn random_genotypes_are_seeded() {
        for enc in Encoding::ALL {
            let a = random_genotype(enc, &mut RngStream::new(5));
            let b = random_genotype(enc, &mut RngStream::new(5));
            assert_eq!(a, b);
            assert_eq!(a.hash(), b.hash());
            assert!(validate_tree(&a.express().unwrap()).is_empty());
        }
    }

    #[test]
    fn document_round_trip_carries_schema() {
        let g = random_genotype(Encoding::Cppn, &mut RngStream::new(2));
        let json = serde_json::to_value(g.to_document()).unwrap();
        assert_eq!(json["schema"], 1);
        assert_eq!(json["encoding"], "cppn");
        let back: GenotypeDocument = serde_json::from_value(json).unwrap();
        assert_eq!(back.genotype, g);
    }

    #[test]
    fn controller_mutation_properties() {
        let mut rng = RngStream::new(9);
        let g = random_genotype(Encoding::Direct, &mut rng);
        let zero = mutate_controllers(&g, &MutationRates::zero(), &mut rng);
        assert_eq!(zero, g);

        let tiny = MutationRates {
            controller_rate: 1.0,
            design_rate: 0.0,
            gaussian_sigma: 1e-12,
        };
        let nudged = mutate_controllers(&g, &tiny, &mut rng);
        let (Genotype::Direct(a), Genotype::Direct(b)) = (&g, &nudged) else {
            unreachable!()
        };
        assert_eq!(
            crate::model::hash_phenotype(&express_direct(a).unwrap()).unwrap(),
            crate::model::hash_phenotype(&express_direct(b).unwrap()).unwrap()
        );

        let big = MutationRates {
            controller_rate: 1.0,
            design_rate: 0.0,
            gaussian_sigma: 5.0,
        };
        let wild = mutate_controllers(&g, &big, &mut rng);
        let Genotype::Direct(w) = wild else { unreachable!() };
        assert!(w.module_list.modules().iter().all(|m| m.controller.within_bounds()));
        assert!(w.module_list.modules()[..4]
            .iter()
            .all(|m| m.kind() == ModuleKind::Circle));

        let c = random_genotype(Encoding::Cppn, &mut rng);
        assert_eq!(mutate_controllers(&c, &big, &mut rng), c);
    }
}
