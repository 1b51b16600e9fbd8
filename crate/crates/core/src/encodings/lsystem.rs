//! L-System encoding: one symbol per module, one rule per symbol, three
//! substitution slots per rule (one per connection site).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{GenotypeError, MutationRates};
use crate::model::{ModuleList, PhenotypeNode, PhenotypeTree, MAX_DEPTH, MAX_NODES, MODULE_COUNT, SITES_PER_NODE};
use crate::rng::RngStream;

pub type Rule = [Option<usize>; SITES_PER_NODE];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LSystemGenotype {
    pub axiom: usize,
    pub rules: [Rule; MODULE_COUNT],
    pub module_list: ModuleList,
}

impl LSystemGenotype {
    /// Uniform axiom; each slot empty with probability 1/2, else a uniform symbol.
    pub fn random(rng: &mut RngStream) -> Self {
        let module_list = ModuleList::random(rng);
        let axiom = rng.index(MODULE_COUNT);
        let rules = std::array::from_fn(|_| {
            std::array::from_fn(|_| {
                if rng.chance(0.5) {
                    None
                } else {
                    Some(rng.index(MODULE_COUNT))
                }
            })
        });
        Self {
            axiom,
            rules,
            module_list,
        }
    }

    fn check(&self) -> Result<(), GenotypeError> {
        let bad = |s: usize| s >= MODULE_COUNT;
        if bad(self.axiom) || self.rules.iter().flatten().flatten().any(|&s| bad(s)) {
            return Err(GenotypeError::Invalid("L-System symbol out of range".into()));
        }
        Ok(())
    }
}

/// Breadth-first growth from the axiom. Each node with symbol `s` receives a
/// child at site `k` for every filled slot `rules[s][k]`, until the depth or
/// size cap. Once the size cap is hit no further nodes are added.
pub fn express_lsystem(g: &LSystemGenotype) -> Result<PhenotypeTree, GenotypeError> {
    g.check()?;
    let mut nodes = vec![PhenotypeNode::from_module(
        0,
        g.axiom,
        None,
        0,
        0,
        g.module_list.get(g.axiom),
    )];
    let mut queue = VecDeque::from([0usize]);
    'grow: while let Some(p) = queue.pop_front() {
        let (symbol, depth) = (nodes[p].module, nodes[p].depth);
        if depth >= MAX_DEPTH {
            continue;
        }
        for (site, slot) in g.rules[symbol].iter().enumerate() {
            let Some(child) = *slot else { continue };
            if nodes.len() >= MAX_NODES {
                break 'grow;
            }
            let i = nodes.len();
            nodes.push(PhenotypeNode::from_module(
                i,
                child,
                Some(p),
                site,
                depth + 1,
                g.module_list.get(child),
            ));
            queue.push_back(i);
        }
    }
    Ok(PhenotypeTree::new(nodes))
}

/// Every slot toggles with the design rate (empty slots get a uniform
/// symbol, filled slots are cleared); module geometry and angles receive
/// Gaussian noise.
pub fn mutate_lsystem(g: &LSystemGenotype, rates: &MutationRates, rng: &mut RngStream) -> LSystemGenotype {
    let mut out = g.clone();
    for slot in out.rules.iter_mut().flatten() {
        if rng.chance(rates.design_rate) {
            *slot = match slot {
                Some(_) => None,
                None => Some(rng.index(MODULE_COUNT)),
            };
        }
    }
    out.module_list
        .mutate_design(rates.design_rate, rates.gaussian_sigma, rng);
    out
}
