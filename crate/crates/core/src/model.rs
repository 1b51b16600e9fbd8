//! Robot body parts, controllers and the phenotype tree every encoding
//! expresses into.
//!
//! # Canonical byte layout
//!
//! [`canonical_bytes`] serialises a tree so that alternate implementations can
//! reproduce [`hash_phenotype`] and [`hash_design`] bit for bit. Reals are
//! quantised to fixed point with six decimals, `q(x) = round_half_away(x * 1e6)`,
//! and written as little-endian `i64`. Nodes are visited in preorder starting
//! at the root, children in site order 0, 1, 2. Each node emits:
//!
//! | field            | encoding                                         |
//! |------------------|--------------------------------------------------|
//! | kind             | `u8`: 0 = circle, 1 = rectangle                  |
//! | geometry         | circle: `q(radius)`; rectangle: `q(width)`, `q(height)` |
//! | connection angle | `q(connection_angle)`                            |
//! | site             | `u8` (root: 0)                                   |
//! | child mask       | `u8`, bit k set iff a child occupies site k      |
//! | controller       | only with controllers: `q(alpha)`, `q(theta)`, `q(delta)`, `q(epsilon)` |
//!
//! The child mask makes the preorder sequence decode to a unique tree shape.
//! Hashes are 64-bit FNV-1a over these bytes.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a64;
use crate::rng::RngStream;

/// Levels a tree may span: depths `0..MAX_DEPTH_LEVELS`.
pub const MAX_DEPTH_LEVELS: usize = 7;
pub const MAX_DEPTH: usize = MAX_DEPTH_LEVELS - 1;
pub const MAX_NODES: usize = 40;
pub const SITES_PER_NODE: usize = 3;
pub const MODULE_COUNT: usize = 8;
pub const CIRCLE_COUNT: usize = 4;

pub const ALPHA_RANGE: (f64, f64) = (-1.0, 1.0);
pub const THETA_RANGE: (f64, f64) = (-0.1, 0.1);
pub const DELTA_RANGE: (f64, f64) = (-1.0, 1.0);
pub const EPSILON_RANGE: (f64, f64) = (-PI, PI);
pub const RADIUS_RANGE: (f64, f64) = (0.25, 0.5);
pub const SIDE_RANGE: (f64, f64) = (0.5, 1.0);
pub const ANGLE_RANGE: (f64, f64) = (-PI, PI);

const QUANTUM: f64 = 1e6;

fn in_range(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

fn clamp_to(x: f64, (lo, hi): (f64, f64)) -> f64 {
    x.clamp(lo, hi)
}

/// Gaussian step applied with probability `rate`, clamped back into `range`.
pub(crate) fn perturb_value(x: f64, range: (f64, f64), rate: f64, sigma: f64, rng: &mut RngStream) -> f64 {
    if rng.chance(rate) {
        clamp_to(x + rng.gaussian(sigma), range)
    } else {
        x
    }
}

/// Sine-wave actuator: `alpha * sin(theta * t + delta) + epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub alpha: f64,
    pub theta: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl ControllerParams {
    pub fn new(alpha: f64, theta: f64, delta: f64, epsilon: f64) -> Self {
        Self {
            alpha,
            theta,
            delta,
            epsilon,
        }
    }

    pub fn random(rng: &mut RngStream) -> Self {
        Self {
            alpha: rng.uniform(ALPHA_RANGE.0, ALPHA_RANGE.1),
            theta: rng.uniform(THETA_RANGE.0, THETA_RANGE.1),
            delta: rng.uniform(DELTA_RANGE.0, DELTA_RANGE.1),
            epsilon: rng.uniform(EPSILON_RANGE.0, EPSILON_RANGE.1),
        }
    }

    /// Map four values in `[0, 1]` linearly onto the parameter ranges.
    pub fn from_unit(u: [f64; 4]) -> Self {
        let lerp = |t: f64, (lo, hi): (f64, f64)| lo + t.clamp(0.0, 1.0) * (hi - lo);
        Self {
            alpha: lerp(u[0], ALPHA_RANGE),
            theta: lerp(u[1], THETA_RANGE),
            delta: lerp(u[2], DELTA_RANGE),
            epsilon: lerp(u[3], EPSILON_RANGE),
        }
    }

    pub fn wave(&self, t: f64) -> f64 {
        self.alpha * (self.theta * t + self.delta).sin() + self.epsilon
    }

    pub fn within_bounds(&self) -> bool {
        in_range(self.alpha, ALPHA_RANGE)
            && in_range(self.theta, THETA_RANGE)
            && in_range(self.delta, DELTA_RANGE)
            && in_range(self.epsilon, EPSILON_RANGE)
    }

    /// Each parameter independently receives `N(0, sigma^2)` noise with
    /// probability `rate`, then is clamped to its range.
    pub fn perturbed(&self, rate: f64, sigma: f64, rng: &mut RngStream) -> Self {
        Self {
            alpha: perturb_value(self.alpha, ALPHA_RANGE, rate, sigma, rng),
            theta: perturb_value(self.theta, THETA_RANGE, rate, sigma, rng),
            delta: perturb_value(self.delta, DELTA_RANGE, rate, sigma, rng),
            epsilon: perturb_value(self.epsilon, EPSILON_RANGE, rate, sigma, rng),
        }
    }

    fn quantized(&self) -> [i64; 4] {
        [
            quantize(self.alpha),
            quantize(self.theta),
            quantize(self.delta),
            quantize(self.epsilon),
        ]
    }
}

/// Evaluate a controller at time `t`.
pub fn controller_wave(c: &ControllerParams, t: f64) -> f64 {
    c.wave(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleKind {
    Circle,
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Circle { radius: f64 },
    Rectangle { width: f64, height: f64 },
}

impl Shape {
    pub fn kind(&self) -> ModuleKind {
        match self {
            Shape::Circle { .. } => ModuleKind::Circle,
            Shape::Rectangle { .. } => ModuleKind::Rectangle,
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Circle { radius } => PI * radius * radius,
            Shape::Rectangle { width, height } => width * height,
        }
    }

    pub fn within_bounds(&self) -> bool {
        match *self {
            Shape::Circle { radius } => in_range(radius, RADIUS_RANGE),
            Shape::Rectangle { width, height } => in_range(width, SIDE_RANGE) && in_range(height, SIDE_RANGE),
        }
    }

    pub(crate) fn perturbed(&self, rate: f64, sigma: f64, rng: &mut RngStream) -> Self {
        match *self {
            Shape::Circle { radius } => Shape::Circle {
                radius: perturb_value(radius, RADIUS_RANGE, rate, sigma, rng),
            },
            Shape::Rectangle { width, height } => Shape::Rectangle {
                width: perturb_value(width, SIDE_RANGE, rate, sigma, rng),
                height: perturb_value(height, SIDE_RANGE, rate, sigma, rng),
            },
        }
    }
}

/// One reusable body part of the module list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Module {
    pub shape: Shape,
    pub connection_angle: f64,
    pub controller: ControllerParams,
}

impl Module {
    pub fn kind(&self) -> ModuleKind {
        self.shape.kind()
    }

    pub fn within_bounds(&self) -> bool {
        self.shape.within_bounds() && in_range(self.connection_angle, ANGLE_RANGE) && self.controller.within_bounds()
    }
}

/// The eight modules available to a robot: four circles then four rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Module>", into = "Vec<Module>")]
pub struct ModuleList([Module; MODULE_COUNT]);

impl ModuleList {
    pub fn new(modules: [Module; MODULE_COUNT]) -> Result<Self, ModelError> {
        for (i, m) in modules.iter().enumerate() {
            let expected = if i < CIRCLE_COUNT {
                ModuleKind::Circle
            } else {
                ModuleKind::Rectangle
            };
            if m.kind() != expected {
                return Err(ModelError::ModuleOrder { index: i });
            }
        }
        Ok(Self(modules))
    }

    pub fn random(rng: &mut RngStream) -> Self {
        let modules = std::array::from_fn(|i| {
            let shape = if i < CIRCLE_COUNT {
                Shape::Circle {
                    radius: rng.uniform(RADIUS_RANGE.0, RADIUS_RANGE.1),
                }
            } else {
                Shape::Rectangle {
                    width: rng.uniform(SIDE_RANGE.0, SIDE_RANGE.1),
                    height: rng.uniform(SIDE_RANGE.0, SIDE_RANGE.1),
                }
            };
            let connection_angle = rng.uniform(ANGLE_RANGE.0, ANGLE_RANGE.1);
            let controller = ControllerParams::random(rng);
            Module {
                shape,
                connection_angle,
                controller,
            }
        });
        Self(modules)
    }

    pub fn modules(&self) -> &[Module; MODULE_COUNT] {
        &self.0
    }

    pub fn get(&self, index: usize) -> &Module {
        &self.0[index]
    }

    /// Geometry and connection angles, each perturbed with probability `rate`.
    pub fn mutate_design(&mut self, rate: f64, sigma: f64, rng: &mut RngStream) {
        for m in &mut self.0 {
            m.shape = m.shape.perturbed(rate, sigma, rng);
            m.connection_angle = perturb_value(m.connection_angle, ANGLE_RANGE, rate, sigma, rng);
        }
    }

    pub fn mutate_controllers(&mut self, rate: f64, sigma: f64, rng: &mut RngStream) {
        for m in &mut self.0 {
            m.controller = m.controller.perturbed(rate, sigma, rng);
        }
    }
}

impl TryFrom<Vec<Module>> for ModuleList {
    type Error = ModelError;

    fn try_from(v: Vec<Module>) -> Result<Self, ModelError> {
        let len = v.len();
        let arr: [Module; MODULE_COUNT] = v.try_into().map_err(|_| ModelError::ModuleCount(len))?;
        ModuleList::new(arr)
    }
}

impl From<ModuleList> for Vec<Module> {
    fn from(l: ModuleList) -> Self {
        l.0.to_vec()
    }
}

/// Generate a fresh module list with every field uniform within its bounds.
pub fn random_module_list(rng: &mut RngStream) -> ModuleList {
    ModuleList::random(rng)
}

/// Absolute angle of connection site `site` on a parent whose module has the
/// given connection angle: `(site - 1) * pi/2 + connection_angle`.
pub fn site_angle(site: usize, connection_angle: f64) -> f64 {
    (site as f64 - 1.0) * (PI / 2.0) + connection_angle
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeNode {
    pub index: usize,
    pub module: usize,
    pub parent: Option<usize>,
    pub site: usize,
    pub depth: usize,
    pub shape: Shape,
    pub connection_angle: f64,
    pub controller: ControllerParams,
}

impl PhenotypeNode {
    /// Node that copies geometry and controller from `module`.
    pub fn from_module(
        index: usize,
        module_index: usize,
        parent: Option<usize>,
        site: usize,
        depth: usize,
        module: &Module,
    ) -> Self {
        Self {
            index,
            module: module_index,
            parent,
            site,
            depth,
            shape: module.shape,
            connection_angle: module.connection_angle,
            controller: module.controller,
        }
    }
}

/// Directed tree of placed modules. Nodes are stored in creation order; the
/// root is the node without a parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeTree {
    pub nodes: Vec<PhenotypeNode>,
}

impl PhenotypeTree {
    pub fn new(nodes: Vec<PhenotypeNode>) -> Self {
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn root(&self) -> Option<&PhenotypeNode> {
        self.nodes.iter().find(|n| n.parent.is_none())
    }

    /// Child slots per node, indexed by site. Assumes a valid tree.
    fn child_table(&self) -> Vec<[Option<usize>; SITES_PER_NODE]> {
        let mut table = vec![[None; SITES_PER_NODE]; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                table[p][n.site] = Some(i);
            }
        }
        table
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let violations = validate_tree(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(TreeError::Invalid(violations))
        }
    }
}

/// JSON form of a tree on the wire and in logs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhenotypeDocument {
    pub schema: u32,
    pub nodes: Vec<PhenotypeNode>,
}

impl From<&PhenotypeTree> for PhenotypeDocument {
    fn from(t: &PhenotypeTree) -> Self {
        Self {
            schema: crate::SCHEMA_VERSION,
            nodes: t.nodes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeViolation {
    Empty,
    IndexMismatch { position: usize, index: usize },
    ModuleIndexOutOfRange { node: usize },
    ModuleOutOfBounds { node: usize },
    SiteOutOfRange { node: usize },
    RootCount(usize),
    ParentOutOfRange { node: usize },
    Cycle { node: usize },
    DepthMismatch { node: usize },
    DepthExceeded { node: usize, depth: usize },
    SizeExceeded(usize),
    ChildrenExceeded { node: usize, children: usize },
    DuplicateSite { parent: usize, site: usize },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeViolation::Empty => write!(f, "tree has no nodes"),
            TreeViolation::IndexMismatch { position, index } => {
                write!(f, "node at position {position} has index {index}")
            }
            TreeViolation::ModuleIndexOutOfRange { node } => write!(f, "node {node} references a module outside 0..8"),
            TreeViolation::ModuleOutOfBounds { node } => {
                write!(f, "node {node} has geometry or controller out of bounds")
            }
            TreeViolation::SiteOutOfRange { node } => write!(f, "node {node} uses a site outside 0..3"),
            TreeViolation::RootCount(n) => write!(f, "expected exactly one root, found {n}"),
            TreeViolation::ParentOutOfRange { node } => write!(f, "node {node} has a parent index out of range"),
            TreeViolation::Cycle { node } => write!(f, "node {node} is on a parent cycle"),
            TreeViolation::DepthMismatch { node } => write!(f, "node {node} depth is not parent depth + 1"),
            TreeViolation::DepthExceeded { node, depth } => {
                write!(f, "node {node} at depth {depth} exceeds {MAX_DEPTH}")
            }
            TreeViolation::SizeExceeded(n) => write!(f, "{n} nodes exceeds the limit of {MAX_NODES}"),
            TreeViolation::ChildrenExceeded { node, children } => write!(f, "node {node} has {children} children"),
            TreeViolation::DuplicateSite { parent, site } => {
                write!(f, "node {parent} has more than one child at site {site}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("invalid tree: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<TreeViolation>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("module list must hold exactly {MODULE_COUNT} modules, got {0}")]
    ModuleCount(usize),
    #[error("module {index} has the wrong kind (expected 4 circles followed by 4 rectangles)")]
    ModuleOrder { index: usize },
}

/// Every invariant the tree violates. An empty list means the tree is valid.
pub fn validate_tree(tree: &PhenotypeTree) -> Vec<TreeViolation> {
    let mut out = Vec::new();
    let n = tree.nodes.len();
    if n == 0 {
        out.push(TreeViolation::Empty);
        return out;
    }
    if n > MAX_NODES {
        out.push(TreeViolation::SizeExceeded(n));
    }

    let roots = tree.nodes.iter().filter(|x| x.parent.is_none()).count();
    if roots != 1 {
        out.push(TreeViolation::RootCount(roots));
    }

    let mut parents_ok = true;
    for (pos, node) in tree.nodes.iter().enumerate() {
        if node.index != pos {
            out.push(TreeViolation::IndexMismatch {
                position: pos,
                index: node.index,
            });
        }
        if node.module >= MODULE_COUNT {
            out.push(TreeViolation::ModuleIndexOutOfRange { node: pos });
        }
        let expected_kind = if node.module < CIRCLE_COUNT {
            ModuleKind::Circle
        } else {
            ModuleKind::Rectangle
        };
        if (node.module < MODULE_COUNT && node.shape.kind() != expected_kind)
            || !node.shape.within_bounds()
            || !node.controller.within_bounds()
            || !in_range(node.connection_angle, ANGLE_RANGE)
        {
            out.push(TreeViolation::ModuleOutOfBounds { node: pos });
        }
        if node.parent.is_some() && node.site >= SITES_PER_NODE {
            out.push(TreeViolation::SiteOutOfRange { node: pos });
        }
        if let Some(p) = node.parent {
            if p >= n || p == pos {
                out.push(TreeViolation::ParentOutOfRange { node: pos });
                parents_ok = false;
            }
        }
        if node.depth > MAX_DEPTH {
            out.push(TreeViolation::DepthExceeded {
                node: pos,
                depth: node.depth,
            });
        }
    }

    if parents_ok {
        // Walk up from each node; a walk longer than n steps means a cycle.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = tree.nodes[cur].parent {
                cur = p;
                steps += 1;
                if steps > n {
                    out.push(TreeViolation::Cycle { node: start });
                    break;
                }
            }
        }
        for (pos, node) in tree.nodes.iter().enumerate() {
            let expected = match node.parent {
                None => 0,
                Some(p) => tree.nodes[p].depth + 1,
            };
            if node.depth != expected {
                out.push(TreeViolation::DepthMismatch { node: pos });
            }
        }
    }

    let mut children = vec![0usize; n];
    let mut used = vec![[0usize; SITES_PER_NODE]; n];
    for node in &tree.nodes {
        if let Some(p) = node.parent.filter(|&p| p < n) {
            children[p] += 1;
            if node.site < SITES_PER_NODE {
                used[p][node.site] += 1;
            }
        }
    }
    for (pos, &c) in children.iter().enumerate() {
        if c > SITES_PER_NODE {
            out.push(TreeViolation::ChildrenExceeded { node: pos, children: c });
        }
        for (site, &k) in used[pos].iter().enumerate() {
            if k > 1 {
                out.push(TreeViolation::DuplicateSite { parent: pos, site });
            }
        }
    }
    out
}

fn quantize(x: f64) -> i64 {
    (x * QUANTUM).round() as i64
}

/// Deterministic serialisation used for hashing; see the module docs for the
/// exact layout.
pub fn canonical_bytes(tree: &PhenotypeTree, include_controllers: bool) -> Result<Vec<u8>, TreeError> {
    tree.validate()?;
    let children = tree.child_table();
    let root = tree
        .nodes
        .iter()
        .position(|n| n.parent.is_none())
        .expect("validated tree has a root");

    let mut out = Vec::with_capacity(tree.len() * 64);
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        let node = &tree.nodes[i];
        match node.shape {
            Shape::Circle { radius } => {
                out.push(0u8);
                out.extend_from_slice(&quantize(radius).to_le_bytes());
            }
            Shape::Rectangle { width, height } => {
                out.push(1u8);
                out.extend_from_slice(&quantize(width).to_le_bytes());
                out.extend_from_slice(&quantize(height).to_le_bytes());
            }
        }
        out.extend_from_slice(&quantize(node.connection_angle).to_le_bytes());
        out.push(if node.parent.is_some() { node.site as u8 } else { 0 });
        let mask = children[i]
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some())
            .fold(0u8, |m, (k, _)| m | (1 << k));
        out.push(mask);
        if include_controllers {
            for q in node.controller.quantized() {
                out.extend_from_slice(&q.to_le_bytes());
            }
        }
        // Reverse so site 0 is popped first.
        stack.extend(children[i].iter().rev().flatten());
    }
    Ok(out)
}

/// Identity of the full phenotype: body plus controllers.
pub fn hash_phenotype(tree: &PhenotypeTree) -> Result<u64, TreeError> {
    canonical_bytes(tree, true).map(|b| fnv1a64(&b))
}

/// Identity of the body alone; controller changes leave it unchanged.
pub fn hash_design(tree: &PhenotypeTree) -> Result<u64, TreeError> {
    canonical_bytes(tree, false).map(|b| fnv1a64(&b))
}
