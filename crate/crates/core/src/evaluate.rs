//! Fitness evaluation.
//!
//! Two backends share one kill-switch mapping onto the 0-100 distance scale:
//!
//! - [`SurrogateEvaluator`], a deterministic locomotion proxy computed from the
//!   tree's geometry and controllers;
//! - [`ExternalEvaluator`], a child process speaking line-delimited JSON:
//!
//! ```text
//! backend  -> {"protocol": "lonscape-eval", "version": 1}          (handshake, first line)
//! client   -> {"id": 7, "op": "evaluate", "phenotype": {"schema": 1, "nodes": [...]}}
//! backend  -> {"id": 7, "distance": 42.5, "killed": false}
//! backend  -> {"id": 7, "error": "..."}                            (per-request failure)
//! ```

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PhenotypeDocument, PhenotypeTree, TreeError, THETA_RANGE};

pub const MAX_FITNESS: f64 = 100.0;
pub const KILLED_FITNESS: f64 = 5.0;
pub const PROTOCOL_NAME: &str = "lonscape-eval";
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    pub value: f64,
    pub killed: bool,
}

impl Fitness {
    pub fn killed() -> Self {
        Self {
            value: KILLED_FITNESS,
            killed: true,
        }
    }

    /// Kill-switch mapping: strictly below `kill_speed` the attempt is
    /// terminated; otherwise the scaled speed, capped at 100.
    pub fn from_speed(speed: f64, kill_speed: f64, scale: f64) -> Self {
        if !(speed >= kill_speed) {
            return Self::killed();
        }
        Self {
            value: (scale * speed).min(MAX_FITNESS),
            killed: false,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=MAX_FITNESS).contains(&self.value) && (!self.killed || self.value == KILLED_FITNESS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Surrogate,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorConfig {
    pub kind: EvaluatorKind,
    pub kill_speed: f64,
    pub scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external_command: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        Self {
            kind: EvaluatorKind::Surrogate,
            kill_speed: 0.04,
            scale: 25.0,
            external_command: None,
            timeout_secs: 120,
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.kill_speed > 0.0) {
            return Err("kill_speed must be positive".into());
        }
        if !(self.scale > 0.0) {
            return Err("scale must be positive".into());
        }
        if self.timeout_secs == 0 {
            return Err("timeout_secs must be positive".into());
        }
        if self.kind == EvaluatorKind::External && self.external_command.as_deref().is_none_or(str::is_empty) {
            return Err("external evaluator requires external_command".into());
        }
        Ok(())
    }

    /// Instantiate a backend. External backends spawn their process here.
    pub fn connect(&self) -> Result<Box<dyn Evaluator>, EvalError> {
        match self.kind {
            EvaluatorKind::Surrogate => Ok(Box::new(SurrogateEvaluator::new(self.clone()))),
            EvaluatorKind::External => Ok(Box::new(ExternalEvaluator::spawn(self.clone())?)),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    InvalidTree(#[from] TreeError),
    #[error("evaluator timed out after {0:?}")]
    Timeout(Duration),
    #[error("evaluator protocol error: {0}")]
    Protocol(String),
    #[error("evaluator backend failure: {0}")]
    Backend(String),
}

pub trait Evaluator: Send {
    fn evaluate(&mut self, tree: &PhenotypeTree) -> Result<Fitness, EvalError>;
}

/// Mean per-node propulsion:
/// `area * |alpha| * (|theta| / 0.1) * (1 - |epsilon| / pi) * sync`, where
/// `sync` is 1 for the root and `cos^2((delta - delta_parent) / 2)` otherwise.
pub fn surrogate_velocity(tree: &PhenotypeTree) -> Result<f64, TreeError> {
    tree.validate()?;
    let theta_max = THETA_RANGE.1;
    let total: f64 = tree
        .nodes
        .iter()
        .map(|n| {
            let c = &n.controller;
            let sync = match n.parent {
                None => 1.0,
                Some(p) => ((c.delta - tree.nodes[p].controller.delta) / 2.0).cos().powi(2),
            };
            n.shape.area()
                * c.alpha.abs()
                * (c.theta.abs() / theta_max)
                * (1.0 - c.epsilon.abs() / std::f64::consts::PI)
                * sync
        })
        .sum();
    Ok(total / tree.len() as f64)
}

#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    cfg: EvaluatorConfig,
}

impl SurrogateEvaluator {
    pub fn new(cfg: EvaluatorConfig) -> Self {
        Self { cfg }
    }
}

impl Default for SurrogateEvaluator {
    fn default() -> Self {
        Self::new(EvaluatorConfig::default())
    }
}

impl Evaluator for SurrogateEvaluator {
    fn evaluate(&mut self, tree: &PhenotypeTree) -> Result<Fitness, EvalError> {
        let v = surrogate_velocity(tree)?;
        Ok(Fitness::from_speed(v, self.cfg.kill_speed, self.cfg.scale))
    }
}

/// One-shot evaluation. External configurations spawn a fresh backend for
/// the call; long-running callers should hold an [`Evaluator`] instead.
pub fn evaluate(tree: &PhenotypeTree, cfg: &EvaluatorConfig) -> Result<Fitness, EvalError> {
    cfg.connect()?.evaluate(tree)
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    op: &'static str,
    phenotype: &'a PhenotypeDocument,
}

#[derive(Deserialize)]
struct Handshake {
    protocol: String,
    version: u32,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    distance: Option<f64>,
    killed: Option<bool>,
    error: Option<String>,
}

/// Client for a backend process; owns the process for its lifetime.
pub struct ExternalEvaluator {
    cfg: EvaluatorConfig,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

impl ExternalEvaluator {
    pub fn spawn(cfg: EvaluatorConfig) -> Result<Self, EvalError> {
        let command = cfg
            .external_command
            .clone()
            .filter(|c| !c.is_empty())
            .ok_or_else(|| EvalError::Backend("no external command configured".into()))?;
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Backend(format!("cannot spawn {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut eval = Self {
            cfg,
            child,
            stdin,
            lines: rx,
            next_id: 0,
        };
        let first = eval.read_line()?;
        let hs: Handshake =
            serde_json::from_str(&first).map_err(|e| EvalError::Protocol(format!("bad handshake {first:?}: {e}")))?;
        if hs.protocol != PROTOCOL_NAME || hs.version != PROTOCOL_VERSION {
            return Err(EvalError::Protocol(format!(
                "unsupported backend protocol {} v{}",
                hs.protocol, hs.version
            )));
        }
        Ok(eval)
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs(self.cfg.timeout_secs)
    }

    fn read_line(&mut self) -> Result<String, EvalError> {
        let timeout = self.timeout();
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(EvalError::Backend(format!("reading backend output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(EvalError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(EvalError::Backend("backend closed its output".into())),
        }
    }

    fn interpret(&self, id: u64, line: &str) -> Result<Fitness, EvalError> {
        let resp: Response =
            serde_json::from_str(line).map_err(|e| EvalError::Protocol(format!("malformed response {line:?}: {e}")))?;
        if resp.id != id {
            return Err(EvalError::Protocol(format!(
                "expected response id {id}, got {}",
                resp.id
            )));
        }
        if let Some(err) = resp.error {
            return Err(EvalError::Backend(err));
        }
        if resp.killed == Some(true) {
            return Ok(Fitness::killed());
        }
        match resp.distance {
            Some(d) if d.is_finite() => Ok(Fitness::from_speed(d, self.cfg.kill_speed, 1.0)),
            Some(d) => Err(EvalError::Protocol(format!("non-finite distance {d}"))),
            None => Err(EvalError::Protocol("response lacks distance".into())),
        }
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&mut self, tree: &PhenotypeTree) -> Result<Fitness, EvalError> {
        tree.validate()?;
        let id = self.next_id;
        self.next_id += 1;
        let doc = PhenotypeDocument::from(tree);
        let mut line = serde_json::to_string(&Request {
            id,
            op: "evaluate",
            phenotype: &doc,
        })
        .expect("request serialises");
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| EvalError::Backend(format!("writing request: {e}")))?;
        let reply = self.read_line()?;
        self.interpret(id, &reply)
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
