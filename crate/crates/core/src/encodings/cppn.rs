//! CPPN encoding: a feed-forward network queried once per connection site.
//!
//! Inputs are `(site depth, parent module index, site angle)`; outputs are
//! `(attach gate, module type, alpha, theta, delta, epsilon)`. A site is
//! attached iff the gate output is positive. The module type is binned from
//! `sigmoid(o1)` into eight buckets and the four controller outputs are
//! squashed with the logistic function and mapped linearly onto their ranges.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{GenotypeError, MutationRates};
use crate::model::{
    site_angle, ControllerParams, ModuleList, PhenotypeNode, PhenotypeTree, MAX_DEPTH, MAX_NODES, MODULE_COUNT,
    SITES_PER_NODE,
};
use crate::rng::RngStream;

pub const INPUTS: usize = 3;
pub const OUTPUTS: usize = 6;
pub const WEIGHT_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gaussian,
    Sine,
    Sigmoid,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Gaussian,
        Activation::Sine,
        Activation::Sigmoid,
        Activation::Identity,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gaussian => (-x * x).exp(),
            Activation::Sine => x.sin(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Input,
    Hidden,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CppnNode {
    pub id: u32,
    pub role: NodeRole,
    pub activation: Activation,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub from: u32,
    pub to: u32,
    pub weight: f64,
    pub enabled: bool,
}

/// Input nodes are read in the order they appear in `nodes`, as are outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CppnGenotype {
    pub nodes: Vec<CppnNode>,
    pub connections: Vec<Connection>,
    pub module_list: ModuleList,
}

impl CppnGenotype {
    /// Three inputs fully connected to six identity outputs, no hidden nodes;
    /// weights and output biases uniform in `[-1, 1]`.
    pub fn random(rng: &mut RngStream) -> Self {
        let module_list = ModuleList::random(rng);
        let mut nodes = Vec::with_capacity(INPUTS + OUTPUTS);
        for id in 0..INPUTS as u32 {
            nodes.push(CppnNode {
                id,
                role: NodeRole::Input,
                activation: Activation::Identity,
                bias: 0.0,
            });
        }
        for k in 0..OUTPUTS as u32 {
            nodes.push(CppnNode {
                id: INPUTS as u32 + k,
                role: NodeRole::Output,
                activation: Activation::Identity,
                bias: rng.uniform(-1.0, 1.0),
            });
        }
        let mut connections = Vec::with_capacity(INPUTS * OUTPUTS);
        for from in 0..INPUTS as u32 {
            for to in 0..OUTPUTS as u32 {
                connections.push(Connection {
                    from,
                    to: INPUTS as u32 + to,
                    weight: rng.uniform(-1.0, 1.0),
                    enabled: true,
                });
            }
        }
        Self {
            nodes,
            connections,
            module_list,
        }
    }

    pub fn hidden_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.role == NodeRole::Hidden).count()
    }

    fn next_id(&self) -> u32 {
        self.nodes.iter().map(|n| n.id).max().map_or(0, |m| m + 1)
    }

    /// Whether `to` can reach `from` along enabled connections, i.e. whether
    /// adding `from -> to` would close a cycle.
    #[cfg(test)]
    fn creates_cycle(&self, from: u32, to: u32) -> bool {
        if from == to {
            return true;
        }
        let mut stack = vec![to];
        let mut seen = vec![to];
        while let Some(n) = stack.pop() {
            for c in self.connections.iter().filter(|c| c.enabled && c.from == n) {
                if c.to == from {
                    return true;
                }
                if !seen.contains(&c.to) {
                    seen.push(c.to);
                    stack.push(c.to);
                }
            }
        }
        false
    }

    /// Topologically sorted evaluation plan.
    pub fn compile(&self) -> Result<CompiledCppn, GenotypeError> {
        let n = self.nodes.len();
        let mut ids: Vec<(u32, usize)> = self.nodes.iter().enumerate().map(|(i, node)| (node.id, i)).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(GenotypeError::Invalid("duplicate CPPN node id".into()));
        }
        let lookup = |id: u32| ids.binary_search_by_key(&id, |&(k, _)| k).ok().map(|p| ids[p].1);
        let inputs: Vec<usize> = (0..n).filter(|&i| self.nodes[i].role == NodeRole::Input).collect();
        let outputs: Vec<usize> = (0..n).filter(|&i| self.nodes[i].role == NodeRole::Output).collect();
        if inputs.len() != INPUTS || outputs.len() != OUTPUTS {
            return Err(GenotypeError::Invalid(format!(
                "CPPN needs {INPUTS} inputs and {OUTPUTS} outputs, found {} and {}",
                inputs.len(),
                outputs.len()
            )));
        }

        let mut links = Vec::with_capacity(self.connections.len());
        for c in self.connections.iter().filter(|c| c.enabled) {
            let (Some(f), Some(t)) = (lookup(c.from), lookup(c.to)) else {
                return Err(GenotypeError::Invalid(format!(
                    "connection {} -> {} has a missing endpoint",
                    c.from, c.to
                )));
            };
            links.push((f, t, c.weight));
        }
        // compressed adjacency in both directions; connection order is kept
        // within each node so sums are accumulated in a fixed order
        let csr = |key: fn(&(usize, usize, f64)) -> usize| {
            let mut starts = vec![0usize; n + 1];
            for l in &links {
                starts[key(l) + 1] += 1;
            }
            for i in 0..n {
                starts[i + 1] += starts[i];
            }
            let mut fill = starts.clone();
            let mut slots = vec![0usize; links.len()];
            for (li, l) in links.iter().enumerate() {
                slots[fill[key(l)]] = li;
                fill[key(l)] += 1;
            }
            (starts, slots)
        };
        let (in_starts, in_slots) = csr(|l| l.1);
        let (out_starts, out_slots) = csr(|l| l.0);

        let mut indegree: Vec<usize> = (0..n).map(|i| in_starts[i + 1] - in_starts[i]).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &li in &out_slots[out_starts[i]..out_starts[i + 1]] {
                let t = links[li].1;
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    queue.push_back(t);
                }
            }
        }
        if order.len() != n {
            return Err(GenotypeError::CycleDetected);
        }
        // nodes that cannot reach an output do not affect the result
        let mut live = vec![false; n];
        for &o in &outputs {
            live[o] = true;
        }
        for &i in order.iter().rev() {
            if !live[i]
                && out_slots[out_starts[i]..out_starts[i + 1]]
                    .iter()
                    .any(|&li| live[links[li].1])
            {
                live[i] = true;
            }
        }
        order.retain(|&i| live[i] || self.nodes[i].role == NodeRole::Input);

        let mut starts = Vec::with_capacity(order.len() + 1);
        let mut edges = Vec::with_capacity(links.len());
        starts.push(0);
        for &i in &order {
            edges.extend(
                in_slots[in_starts[i]..in_starts[i + 1]]
                    .iter()
                    .map(|&li| (links[li].0, links[li].2)),
            );
            starts.push(edges.len());
        }
        let mut input_slot = vec![None; n];
        for (k, &i) in inputs.iter().enumerate() {
            input_slot[i] = Some(k);
        }
        Ok(CompiledCppn {
            activation: order.iter().map(|&i| self.nodes[i].activation).collect(),
            bias: order.iter().map(|&i| self.nodes[i].bias).collect(),
            input_slot: order.iter().map(|&i| input_slot[i]).collect(),
            starts,
            edges,
            order,
            outputs,
            values: RefCell::new(vec![0.0; n]),
        })
    }
}

/// A CPPN flattened for repeated queries. Per-node arrays are stored in
/// evaluation order; `edges[starts[k]..starts[k + 1]]` feed the k-th node.
#[derive(Debug, Clone)]
pub struct CompiledCppn {
    order: Vec<usize>,
    starts: Vec<usize>,
    edges: Vec<(usize, f64)>,
    activation: Vec<Activation>,
    bias: Vec<f64>,
    input_slot: Vec<Option<usize>>,
    outputs: Vec<usize>,
    values: RefCell<Vec<f64>>,
}

impl CompiledCppn {
    pub fn eval(&self, inputs: [f64; INPUTS]) -> [f64; OUTPUTS] {
        let mut values = self.values.borrow_mut();
        for (k, &i) in self.order.iter().enumerate() {
            values[i] = match self.input_slot[k] {
                Some(slot) => inputs[slot],
                None => {
                    let sum: f64 = self.edges[self.starts[k]..self.starts[k + 1]]
                        .iter()
                        .map(|&(f, w)| w * values[f])
                        .sum();
                    self.activation[k].apply(self.bias[k] + sum)
                }
            };
        }
        std::array::from_fn(|k| values[self.outputs[k]])
    }
}

/// Evaluate the network once. Input nodes pass their value through; every
/// other node computes `activation(bias + sum(weight * source))`.
pub fn cppn_forward(g: &CppnGenotype, inputs: [f64; INPUTS]) -> Result<[f64; OUTPUTS], GenotypeError> {
    Ok(g.compile()?.eval(inputs))
}

fn module_from_output(o: f64) -> usize {
    ((sigmoid(o) * MODULE_COUNT as f64).floor() as usize).min(MODULE_COUNT - 1)
}

fn controller_from_outputs(o: &[f64; OUTPUTS]) -> ControllerParams {
    ControllerParams::from_unit([sigmoid(o[2]), sigmoid(o[3]), sigmoid(o[4]), sigmoid(o[5])])
}

pub fn express_cppn(g: &CppnGenotype) -> Result<PhenotypeTree, GenotypeError> {
    let net = g.compile()?;

    let root_out = net.eval([0.0, 0.0, 0.0]);
    let mut root = PhenotypeNode::from_module(0, 0, None, 0, 0, g.module_list.get(0));
    root.controller = controller_from_outputs(&root_out);
    let mut nodes = vec![root];

    let mut queue = VecDeque::from([0usize]);
    'grow: while let Some(p) = queue.pop_front() {
        let parent = nodes[p];
        if parent.depth >= MAX_DEPTH {
            continue;
        }
        for site in 0..SITES_PER_NODE {
            if nodes.len() >= MAX_NODES {
                break 'grow;
            }
            let depth = parent.depth + 1;
            let out = net.eval([
                depth as f64,
                parent.module as f64,
                site_angle(site, parent.connection_angle),
            ]);
            if out[0] <= 0.0 {
                continue;
            }
            let module = module_from_output(out[1]);
            let i = nodes.len();
            let mut node = PhenotypeNode::from_module(i, module, Some(p), site, depth, g.module_list.get(module));
            node.controller = controller_from_outputs(&out);
            nodes.push(node);
            queue.push_back(i);
        }
    }
    Ok(PhenotypeTree::new(nodes))
}

/// Structural NEAT-style operators, each firing with the design rate, then
/// weight noise and module-list geometry noise.
pub fn mutate_cppn(g: &CppnGenotype, rates: &MutationRates, rng: &mut RngStream) -> CppnGenotype {
    let rate = rates.design_rate;
    let mut out = g.clone();
    if rng.chance(rate) {
        add_connection(&mut out, rng);
    }
    if rng.chance(rate) {
        delete_connection(&mut out, rng);
    }
    if rng.chance(rate) {
        add_node(&mut out, rng);
    }
    if rng.chance(rate) {
        delete_node(&mut out, rng);
    }
    if rng.chance(rate) {
        replace_bias(&mut out, rng);
    }
    for c in &mut out.connections {
        if rng.chance(rate) {
            c.weight = (c.weight + rng.gaussian(rates.gaussian_sigma)).clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT);
        }
    }
    out.module_list.mutate_design(rate, rates.gaussian_sigma, rng);
    out
}

/// Connect a random source (input or hidden) to a random target (hidden or
/// output) that is not already connected and would not close a cycle.
pub(crate) fn add_connection(g: &mut CppnGenotype, rng: &mut RngStream) {
    let candidates = connection_candidates(g);
    if candidates.is_empty() {
        return;
    }
    let (from, to) = candidates[rng.index(candidates.len())];
    let weight = rng.uniform(-1.0, 1.0);
    g.connections.push(Connection {
        from,
        to,
        weight,
        enabled: true,
    });
}

/// Admissible new connections as `(from, to)` ids, ordered by source node
/// position then target node position.
fn connection_candidates(g: &CppnGenotype) -> Vec<(u32, u32)> {
    let index: HashMap<u32, usize> = g.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    let mut existing = HashSet::new();
    for c in &g.connections {
        existing.insert((c.from, c.to));
        if c.enabled {
            if let (Some(&f), Some(&t)) = (index.get(&c.from), index.get(&c.to)) {
                succ[f].push(t);
            }
        }
    }
    let mut candidates = Vec::new();
    for (di, dst) in g.nodes.iter().enumerate() {
        if dst.role == NodeRole::Input {
            continue;
        }
        // src -> dst closes a cycle iff src is dst or one of its descendants
        let mut reach = vec![false; g.nodes.len()];
        reach[di] = true;
        let mut stack = vec![di];
        while let Some(n) = stack.pop() {
            for &t in &succ[n] {
                if !reach[t] {
                    reach[t] = true;
                    stack.push(t);
                }
            }
        }
        for (si, src) in g.nodes.iter().enumerate() {
            if src.role != NodeRole::Output && !reach[si] && !existing.contains(&(src.id, dst.id)) {
                candidates.push((si, di));
            }
        }
    }
    candidates.sort_unstable();
    candidates
        .into_iter()
        .map(|(si, di)| (g.nodes[si].id, g.nodes[di].id))
        .collect()
}

pub(crate) fn delete_connection(g: &mut CppnGenotype, rng: &mut RngStream) {
    if !g.connections.is_empty() {
        let i = rng.index(g.connections.len());
        g.connections.remove(i);
    }
}

/// Split a random enabled connection with a new hidden node.
pub(crate) fn add_node(g: &mut CppnGenotype, rng: &mut RngStream) {
    let enabled: Vec<usize> = (0..g.connections.len()).filter(|&i| g.connections[i].enabled).collect();
    if enabled.is_empty() {
        return;
    }
    let ci = enabled[rng.index(enabled.len())];
    let old = g.connections[ci];
    g.connections[ci].enabled = false;
    let id = g.next_id();
    let activation = Activation::ALL[rng.index(Activation::ALL.len())];
    g.nodes.push(CppnNode {
        id,
        role: NodeRole::Hidden,
        activation,
        bias: 0.0,
    });
    g.connections.push(Connection {
        from: old.from,
        to: id,
        weight: 1.0,
        enabled: true,
    });
    g.connections.push(Connection {
        from: id,
        to: old.to,
        weight: old.weight,
        enabled: true,
    });
}

pub(crate) fn delete_node(g: &mut CppnGenotype, rng: &mut RngStream) {
    let hidden: Vec<usize> = (0..g.nodes.len())
        .filter(|&i| g.nodes[i].role == NodeRole::Hidden)
        .collect();
    if hidden.is_empty() {
        return;
    }
    let victim = g.nodes.remove(hidden[rng.index(hidden.len())]).id;
    g.connections.retain(|c| c.from != victim && c.to != victim);
}

pub(crate) fn replace_bias(g: &mut CppnGenotype, rng: &mut RngStream) {
    let eligible: Vec<usize> = (0..g.nodes.len())
        .filter(|&i| g.nodes[i].role != NodeRole::Input)
        .collect();
    if eligible.is_empty() {
        return;
    }
    let i = eligible[rng.index(eligible.len())];
    g.nodes[i].bias = rng.uniform(-1.0, 1.0);
}
