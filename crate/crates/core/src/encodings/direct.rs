//! Direct encoding: the genotype is the tree itself.

use serde::{Deserialize, Serialize};

use super::{GenotypeError, MutationRates};
use crate::model::{
    validate_tree, ModuleList, PhenotypeNode, PhenotypeTree, TreeError, MAX_DEPTH, MAX_NODES, MODULE_COUNT,
    SITES_PER_NODE,
};
use crate::rng::RngStream;

/// Node record; its tree index is its position in [`DirectGenotype::nodes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectNode {
    pub module: usize,
    pub parent: Option<usize>,
    pub site: usize,
}

/// Nodes are kept in topological order: the root first and every parent
/// before its children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectGenotype {
    pub nodes: Vec<DirectNode>,
    pub module_list: ModuleList,
}

impl DirectGenotype {
    /// A root plus each of its three sites filled with probability 1/2.
    pub fn random(rng: &mut RngStream) -> Self {
        let module_list = ModuleList::random(rng);
        let mut nodes = vec![DirectNode {
            module: rng.index(MODULE_COUNT),
            parent: None,
            site: 0,
        }];
        for site in 0..SITES_PER_NODE {
            if rng.chance(0.5) {
                nodes.push(DirectNode {
                    module: rng.index(MODULE_COUNT),
                    parent: Some(0),
                    site,
                });
            }
        }
        Self { nodes, module_list }
    }

    fn depths(&self) -> Result<Vec<usize>, GenotypeError> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let d = match (i, n.parent) {
                (0, None) => 0,
                (_, Some(p)) if p < i => depths[p] + 1,
                _ => {
                    return Err(GenotypeError::Invalid(format!(
                        "node {i} breaks root-first topological order"
                    )))
                }
            };
            depths.push(d);
        }
        Ok(depths)
    }
}

pub fn express_direct(g: &DirectGenotype) -> Result<PhenotypeTree, GenotypeError> {
    if g.nodes.is_empty() {
        return Err(GenotypeError::Invalid("direct genotype has no nodes".into()));
    }
    if let Some(n) = g.nodes.iter().find(|n| n.module >= MODULE_COUNT) {
        return Err(GenotypeError::Invalid(format!(
            "module index {} out of range",
            n.module
        )));
    }
    let depths = g.depths()?;
    let nodes = g
        .nodes
        .iter()
        .zip(&depths)
        .enumerate()
        .map(|(i, (n, &d))| PhenotypeNode::from_module(i, n.module, n.parent, n.site, d, g.module_list.get(n.module)))
        .collect();
    let tree = PhenotypeTree::new(nodes);
    let violations = validate_tree(&tree);
    if violations.is_empty() {
        Ok(tree)
    } else {
        Err(TreeError::Invalid(violations).into())
    }
}

/// Subtree removal at half the design rate, then node addition at every open
/// site, then Gaussian perturbation of module geometry and angles.
pub fn mutate_direct(g: &DirectGenotype, rates: &MutationRates, rng: &mut RngStream) -> DirectGenotype {
    let rate = rates.design_rate;

    let mut removed = vec![false; g.nodes.len()];
    for i in 1..g.nodes.len() {
        let parent = g.nodes[i].parent.expect("non-root node has a parent");
        removed[i] = removed[parent] || rng.chance(rate / 2.0);
    }
    let mut remap = vec![usize::MAX; g.nodes.len()];
    let mut nodes = Vec::with_capacity(g.nodes.len());
    for (i, n) in g.nodes.iter().enumerate() {
        if removed[i] {
            continue;
        }
        remap[i] = nodes.len();
        nodes.push(DirectNode {
            parent: n.parent.map(|p| remap[p]),
            ..*n
        });
    }

    let mut depths: Vec<usize> = Vec::with_capacity(nodes.len());
    let mut occupied = vec![[false; SITES_PER_NODE]; nodes.len()];
    for n in &nodes {
        let d = n.parent.map_or(0, |p| depths[p] + 1);
        depths.push(d);
        if let Some(p) = n.parent {
            occupied[p][n.site] = true;
        }
    }
    let existing = nodes.len();
    for p in 0..existing {
        if depths[p] >= MAX_DEPTH {
            continue;
        }
        for (site, &taken) in occupied[p].iter().enumerate() {
            if taken || nodes.len() >= MAX_NODES {
                continue;
            }
            if rng.chance(rate) {
                nodes.push(DirectNode {
                    module: rng.index(MODULE_COUNT),
                    parent: Some(p),
                    site,
                });
            }
        }
    }

    let mut module_list = g.module_list.clone();
    module_list.mutate_design(rate, rates.gaussian_sigma, rng);
    DirectGenotype { nodes, module_list }
}
