//! The hybrid quantum graph network: a sigmoid input layer lifts each hit to
//! a hidden coordinate, then a quantum edge network (QEN) and a quantum node
//! network (QNoN) alternate for `n_iterations` rounds before a final QEN pass
//! scores every segment.
//!
//! Gradients are exact: each circuit call contributes its parameter-shift
//! Jacobian, and the classical glue (sigmoid, weighted averaging) is
//! differentiated in reverse order. QEN/QNoN parameters are shared across
//! iterations, so their gradients sum over every use.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::autodiff::CircuitJacobian;
use crate::error::{QgnnError, Result};
use crate::graph::SubGraph;
use crate::par;
use crate::train::AdamState;
use crate::ttn::{Backend, TtnParams, TtnTopology};

pub const SPATIAL_DIM: usize = 3;
/// Only a single hidden coordinate is supported.
pub const HIDDEN_DIM: usize = 1;
pub const STATE_DIM: usize = SPATIAL_DIM + HIDDEN_DIM;
pub const QEN_QUBITS: usize = 2 * STATE_DIM;
pub const QNON_QUBITS: usize = 3 * STATE_DIM;
/// Regularizer in the weighted-average denominators.
pub const AGGREGATION_EPS: f64 = 1e-8;

/// Spatial `(r′, φ′, z′)` followed by the hidden coordinate.
pub type NodeState = [f64; STATE_DIM];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Circuit topologies and evaluation settings shared by every pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub qen: TtnTopology,
    pub qnon: TtnTopology,
    pub backend: Backend,
    /// When set, forward scores are binomially sampled with this many shots
    /// (gradients always use exact expectations).
    pub shots: Option<ShotSampling>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotSampling {
    pub shots: u64,
    pub seed: u64,
}

impl Architecture {
    pub fn new(backend: Backend) -> Self {
        Self {
            qen: TtnTopology::build(QEN_QUBITS).expect("valid width"),
            qnon: TtnTopology::build(QNON_QUBITS).expect("valid width"),
            backend,
            shots: None,
        }
    }

    fn sample(&self, p: f64, stage: u64, index: usize) -> Result<f64> {
        let Some(ShotSampling { shots, seed }) = self.shots else {
            return Ok(p);
        };
        let stream = seed ^ (stage << 48) ^ index as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let ones = Binomial::new(shots, p.clamp(0.0, 1.0))
            .map_err(|e| QgnnError::Numeric(format!("shot sampler: {e}")))?
            .sample(&mut rng);
        Ok(ones as f64 / shots as f64)
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Self::new(Backend::default())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Row-major `HIDDEN_DIM × SPATIAL_DIM`.
    pub input_w: Vec<f64>,
    pub input_b: Vec<f64>,
    pub qen: TtnParams,
    pub qnon: TtnParams,
    pub d_hid: usize,
    pub n_iterations: usize,
}

impl ModelParams {
    pub fn zeros(arch: &Architecture, n_iterations: usize) -> Result<Self> {
        check_iterations(n_iterations)?;
        Ok(Self {
            input_w: vec![0.0; HIDDEN_DIM * SPATIAL_DIM],
            input_b: vec![0.0; HIDDEN_DIM],
            qen: TtnParams::zeros(&arch.qen),
            qnon: TtnParams::zeros(&arch.qnon),
            d_hid: HIDDEN_DIM,
            n_iterations,
        })
    }

    /// Circuit angles uniform on `[0, 2π)`, input layer weights uniform on `[−1, 1)`.
    pub fn random(arch: &Architecture, n_iterations: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        check_iterations(n_iterations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_w = (0..HIDDEN_DIM * SPATIAL_DIM)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let input_b = (0..HIDDEN_DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        Ok(Self {
            input_w,
            input_b,
            qen: TtnParams::random(&arch.qen, &mut rng),
            qnon: TtnParams::random(&arch.qnon, &mut rng),
            d_hid: HIDDEN_DIM,
            n_iterations,
        })
    }

    pub fn n_params(&self) -> usize {
        self.input_w.len() + self.input_b.len() + self.qen.len() + self.qnon.len()
    }

    /// Parameters flattened in declared order: input_w, input_b, qen, qnon.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.input_w);
        v.extend_from_slice(&self.input_b);
        v.extend_from_slice(&self.qen.thetas);
        v.extend_from_slice(&self.qnon.thetas);
        v
    }

    /// Overwrites every parameter from a flat vector in [`Self::to_flat`] order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(QgnnError::Dimension {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut rest = flat;
        for block in [
            &mut self.input_w,
            &mut self.input_b,
            &mut self.qen.thetas,
            &mut self.qnon.thetas,
        ] {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Checks shapes against an architecture.
    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        if self.d_hid != HIDDEN_DIM {
            return Err(QgnnError::Config(format!(
                "hidden dimension {} unsupported (only {HIDDEN_DIM})",
                self.d_hid
            )));
        }
        check_iterations(self.n_iterations)?;
        let shapes = [
            (self.input_w.len(), HIDDEN_DIM * SPATIAL_DIM),
            (self.input_b.len(), HIDDEN_DIM),
            (self.qen.len(), arch.qen.n_params()),
            (self.qnon.len(), arch.qnon.n_params()),
        ];
        for (got, expected) in shapes {
            if got != expected {
                return Err(QgnnError::Dimension { expected, got });
            }
        }
        if self.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(QgnnError::Numeric("model parameters".into()));
        }
        Ok(())
    }
}

fn check_iterations(n: usize) -> Result<()> {
    if n == 0 {
        return Err(QgnnError::Config("n_iterations must be at least 1".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Layers

pub fn input_network(graph: &SubGraph, params: &ModelParams) -> Result<Vec<NodeState>> {
    if params.input_w.len() != SPATIAL_DIM || params.input_b.len() != HIDDEN_DIM {
        return Err(QgnnError::Dimension {
            expected: SPATIAL_DIM + HIDDEN_DIM,
            got: params.input_w.len() + params.input_b.len(),
        });
    }
    Ok(graph
        .node_features()
        .iter()
        .map(|x| {
            let z: f64 = params.input_b[0] + x.iter().zip(&params.input_w).map(|(a, w)| a * w).sum::<f64>();
            [x[0], x[1], x[2], sigmoid(z)]
        })
        .collect())
}

fn edge_features(states: &[NodeState], (j, k): (usize, usize)) -> [f64; QEN_QUBITS] {
    let mut f = [0.0; QEN_QUBITS];
    f[..STATE_DIM].copy_from_slice(&states[j]);
    f[STATE_DIM..].copy_from_slice(&states[k]);
    f
}

/// QEN score of every edge, in edge order.
pub fn edge_network(
    arch: &Architecture,
    states: &[NodeState],
    edges: &[(usize, usize)],
    qen: &TtnParams,
) -> Result<Vec<f64>> {
    par::try_map_range(edges.len(), |e| {
        let f = edge_features(states, edges[e]);
        arch.backend
            .score_angles(&arch.qen, &qen.thetas, &crate::ttn::encode_features(&f)?)
    })
}

/// Weighted-average messages of one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Messages {
    pub m_in: NodeState,
    pub m_out: NodeState,
    /// `Σ e + ε` over incoming / outgoing edges.
    pub in_denom: f64,
    pub out_denom: f64,
}

/// Incident edge indices per node, in edge order.
#[derive(Clone, Debug)]
struct Adjacency {
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(n_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut incoming = vec![Vec::new(); n_nodes];
        let mut outgoing = vec![Vec::new(); n_nodes];
        for (e, &(j, k)) in edges.iter().enumerate() {
            outgoing[j].push(e);
            incoming[k].push(e);
        }
        Self { incoming, outgoing }
    }
}

fn weighted_average(states: &[NodeState], members: impl Iterator<Item = (usize, f64)>) -> (NodeState, f64) {
    let mut acc = [0.0; STATE_DIM];
    let mut total = 0.0;
    for (node, w) in members {
        total += w;
        for (a, s) in acc.iter_mut().zip(&states[node]) {
            *a += w * s;
        }
    }
    let denom = total + AGGREGATION_EPS;
    (acc.map(|a| a / denom), denom)
}

fn aggregate(states: &[NodeState], edges: &[(usize, usize)], weights: &[f64], adj: &Adjacency) -> Vec<Messages> {
    (0..states.len())
        .map(|k| {
            let (m_in, in_denom) = weighted_average(states, adj.incoming[k].iter().map(|&e| (edges[e].0, weights[e])));
            let (m_out, out_denom) =
                weighted_average(states, adj.outgoing[k].iter().map(|&e| (edges[e].1, weights[e])));
            Messages {
                m_in,
                m_out,
                in_denom,
                out_denom,
            }
        })
        .collect()
}

/// Messages of every node given the current edge weights.
pub fn node_messages(states: &[NodeState], edges: &[(usize, usize)], weights: &[f64]) -> Result<Vec<Messages>> {
    if weights.len() != edges.len() {
        return Err(QgnnError::Dimension {
            expected: edges.len(),
            got: weights.len(),
        });
    }
    let adj = Adjacency::new(states.len(), edges);
    Ok(aggregate(states, edges, weights, &adj))
}

fn node_features(msg: &Messages, state: &NodeState) -> [f64; QNON_QUBITS] {
    let mut f = [0.0; QNON_QUBITS];
    f[..STATE_DIM].copy_from_slice(&msg.m_in);
    f[STATE_DIM..2 * STATE_DIM].copy_from_slice(&msg.m_out);
    f[2 * STATE_DIM..].copy_from_slice(state);
    f
}

/// QNoN update of every node's hidden coordinate; spatial parts are copied.
pub fn node_network(
    arch: &Architecture,
    states: &[NodeState],
    edges: &[(usize, usize)],
    weights: &[f64],
    qnon: &TtnParams,
) -> Result<Vec<NodeState>> {
    let messages = node_messages(states, edges, weights)?;
    par::try_map_range(states.len(), |k| {
        let f = node_features(&messages[k], &states[k]);
        let h = arch
            .backend
            .score_angles(&arch.qnon, &qnon.thetas, &crate::ttn::encode_features(&f)?)?;
        let s = states[k];
        Ok([s[0], s[1], s[2], h])
    })
}

fn check_finite(values: &[f64], name: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(QgnnError::Numeric(name.to_string()));
    }
    Ok(())
}

/// Segment probabilities for every edge of `graph`.
pub fn qgnn_forward(graph: &SubGraph, params: &ModelParams, arch: &Architecture) -> Result<Vec<f64>> {
    params.validate(arch)?;
    if graph.n_edges() == 0 {
        return Ok(Vec::new());
    }
    let edges = graph.edges();
    let mut states = input_network(graph, params)?;
    for t in 0..params.n_iterations {
        let weights = sample_all(arch, edge_network(arch, &states, edges, &params.qen)?, 2 * t as u64)?;
        check_finite(&weights, &format!("edge weights (iteration {})", t + 1))?;
        states = node_network(arch, &states, edges, &weights, &params.qnon)?;
        let hidden: Vec<f64> = states.iter().map(|s| s[3]).collect();
        let hidden = sample_all(arch, hidden, 2 * t as u64 + 1)?;
        for (s, h) in states.iter_mut().zip(hidden) {
            s[3] = h;
        }
    }
    let probs = sample_all(arch, edge_network(arch, &states, edges, &params.qen)?, u64::MAX >> 16)?;
    check_finite(&probs, "final edge probabilities")?;
    Ok(probs)
}

fn sample_all(arch: &Architecture, values: Vec<f64>, stage: u64) -> Result<Vec<f64>> {
    if arch.shots.is_none() {
        return Ok(values);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, p)| arch.sample(p, stage, i))
        .collect()
}

// ---------------------------------------------------------------------------
// Gradient

/// Gradient of the loss with respect to every parameter block.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGradient {
    pub input_w: Vec<f64>,
    pub input_b: Vec<f64>,
    pub qen: Vec<f64>,
    pub qnon: Vec<f64>,
}

impl ModelGradient {
    fn zeros(params: &ModelParams) -> Self {
        Self {
            input_w: vec![0.0; params.input_w.len()],
            input_b: vec![0.0; params.input_b.len()],
            qen: vec![0.0; params.qen.len()],
            qnon: vec![0.0; params.qnon.len()],
        }
    }

    /// Same order as [`ModelParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        [&self.input_w, &self.input_b, &self.qen, &self.qnon]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    fn check(&self) -> Result<()> {
        for (name, block) in [
            ("input_w gradient", &self.input_w),
            ("input_b gradient", &self.input_b),
            ("qen gradient", &self.qen),
            ("qnon gradient", &self.qnon),
        ] {
            check_finite(block, name)?;
        }
        Ok(())
    }
}

fn axpy(acc: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += alpha * v;
    }
}

struct IterationTrace {
    /// States entering the iteration.
    states: Vec<NodeState>,
    weights: Vec<f64>,
    edge_jac: Vec<CircuitJacobian>,
    messages: Vec<Messages>,
    node_jac: Vec<CircuitJacobian>,
}

fn edge_jacobians(
    arch: &Architecture,
    states: &[NodeState],
    edges: &[(usize, usize)],
    qen: &TtnParams,
) -> Result<(Vec<f64>, Vec<CircuitJacobian>)> {
    let out = par::try_map_range(edges.len(), |e| {
        CircuitJacobian::compute(&arch.qen, qen, &edge_features(states, edges[e]), arch.backend)
    })?;
    Ok(out.into_iter().unzip())
}

/// Loss value, final probabilities and exact gradient of the weighted BCE.
pub fn qgnn_gradient(
    graph: &SubGraph,
    params: &ModelParams,
    arch: &Architecture,
    clamp_eps: f64,
) -> Result<(f64, Vec<f64>, ModelGradient)> {
    params.validate(arch)?;
    if graph.n_edges() == 0 {
        return Err(QgnnError::Domain("cannot differentiate a graph without edges".into()));
    }
    let edges = graph.edges();
    let adj = Adjacency::new(graph.n_nodes(), edges);

    // forward, keeping every circuit Jacobian
    let initial = input_network(graph, params)?;
    let mut states = initial.clone();
    let mut trace = Vec::with_capacity(params.n_iterations);
    for t in 0..params.n_iterations {
        let (weights, edge_jac) = edge_jacobians(arch, &states, edges, &params.qen)?;
        check_finite(&weights, &format!("edge weights (iteration {})", t + 1))?;
        let messages = aggregate(&states, edges, &weights, &adj);
        let node_out = par::try_map_range(states.len(), |k| {
            CircuitJacobian::compute(
                &arch.qnon,
                &params.qnon,
                &node_features(&messages[k], &states[k]),
                arch.backend,
            )
        })?;
        let (hidden, node_jac): (Vec<f64>, Vec<CircuitJacobian>) = node_out.into_iter().unzip();
        check_finite(&hidden, &format!("node hidden states (iteration {})", t + 1))?;
        let next = states
            .iter()
            .zip(&hidden)
            .map(|(s, &h)| [s[0], s[1], s[2], h])
            .collect();
        trace.push(IterationTrace {
            states: std::mem::replace(&mut states, next),
            weights,
            edge_jac,
            messages,
            node_jac,
        });
    }
    let (probs, final_jac) = edge_jacobians(arch, &states, edges, &params.qen)?;
    check_finite(&probs, "final edge probabilities")?;

    let (loss, d_probs) = crate::train::weighted_bce_with_grad(&probs, graph.labels(), clamp_eps)?;

    let mut grad = ModelGradient::zeros(params);
    let mut g_states = vec![[0.0; STATE_DIM]; states.len()];
    backprop_edges(edges, &d_probs, &final_jac, &mut grad.qen, &mut g_states);

    for it in trace.iter().rev() {
        let mut g_prev = vec![[0.0; STATE_DIM]; states.len()];
        let mut g_weights = vec![0.0; edges.len()];
        for k in 0..g_states.len() {
            let g_h = g_states[k][SPATIAL_DIM];
            if g_h == 0.0 {
                continue;
            }
            let jac = &it.node_jac[k];
            axpy(&mut grad.qnon, g_h, &jac.d_params);
            let gf: Vec<f64> = jac.d_inputs.iter().map(|d| g_h * d).collect();
            let (g_in, rest) = gf.split_at(STATE_DIM);
            let (g_out, g_self) = rest.split_at(STATE_DIM);
            axpy(&mut g_prev[k], 1.0, g_self);
            let msg = &it.messages[k];
            for &e in &adj.incoming[k] {
                let j = edges[e].0;
                let w = it.weights[e];
                axpy(&mut g_prev[j], w / msg.in_denom, g_in);
                g_weights[e] += dot_diff(g_in, &it.states[j], &msg.m_in) / msg.in_denom;
            }
            for &e in &adj.outgoing[k] {
                let l = edges[e].1;
                let w = it.weights[e];
                axpy(&mut g_prev[l], w / msg.out_denom, g_out);
                g_weights[e] += dot_diff(g_out, &it.states[l], &msg.m_out) / msg.out_denom;
            }
        }
        backprop_edges(edges, &g_weights, &it.edge_jac, &mut grad.qen, &mut g_prev);
        g_states = g_prev;
    }

    for (x, (s, g)) in graph.node_features().iter().zip(initial.iter().zip(&g_states)) {
        let h = s[SPATIAL_DIM];
        let dz = g[SPATIAL_DIM] * h * (1.0 - h);
        axpy(&mut grad.input_w, dz, x);
        grad.input_b[0] += dz;
    }
    grad.check()?;
    Ok((loss, probs, grad))
}

/// `Σ_i g_i (s_i − m_i)`
fn dot_diff(g: &[f64], s: &NodeState, m: &NodeState) -> f64 {
    g.iter().zip(s.iter().zip(m)).map(|(g, (s, m))| g * (s - m)).sum()
}

fn backprop_edges(
    edges: &[(usize, usize)],
    upstream: &[f64],
    jacobians: &[CircuitJacobian],
    g_qen: &mut [f64],
    g_states: &mut [NodeState],
) {
    for ((&(j, k), &g), jac) in edges.iter().zip(upstream).zip(jacobians) {
        if g == 0.0 {
            continue;
        }
        axpy(g_qen, g, &jac.d_params);
        axpy(&mut g_states[j], g, &jac.d_inputs[..STATE_DIM]);
        axpy(&mut g_states[k], g, &jac.d_inputs[STATE_DIM..]);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

const CHECKPOINT_HEADER: &str = "qgnn-checkpoint 1";

/// Model parameters plus optional optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub optimizer: Option<AdamState>,
}

fn write_array(out: &mut String, name: &str, values: &[f64]) {
    let _ = write!(out, "{name} {}", values.len());
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_HEADER}");
        let _ = writeln!(out, "d_hid {}", p.d_hid);
        let _ = writeln!(out, "n_iterations {}", p.n_iterations);
        write_array(&mut out, "input_w", &p.input_w);
        write_array(&mut out, "input_b", &p.input_b);
        write_array(&mut out, "qen", &p.qen.thetas);
        write_array(&mut out, "qnon", &p.qnon.thetas);
        if let Some(adam) = &self.optimizer {
            let _ = writeln!(out, "adam_t {}", adam.t);
            write_array(&mut out, "adam_m", &adam.m);
            write_array(&mut out, "adam_v", &adam.v);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| QgnnError::Checkpoint(msg);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next() != Some(CHECKPOINT_HEADER) {
            return Err(bad(format!("missing `{CHECKPOINT_HEADER}` header")));
        }
        let mut scalar = |key: &str| -> Result<u64> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => v.trim().parse().map_err(|_| bad(format!("bad value for {key}: {v:?}"))),
                _ => Err(bad(format!("expected {key}, found {line:?}"))),
            }
        };
        let d_hid = scalar("d_hid")? as usize;
        let n_iterations = scalar("n_iterations")? as usize;
        let mut arrays = std::collections::HashMap::new();
        let mut adam_t = None;
        for line in lines {
            let mut tok = line.split_whitespace();
            let key = tok.next().unwrap_or_default();
            if key == "adam_t" {
                let t = tok.next().and_then(|v| v.parse().ok());
                adam_t = Some(t.ok_or_else(|| bad("bad adam_t".into()))?);
                continue;
            }
            let len: usize = tok
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("array {key} lacks a length")))?;
            let values = tok
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("array {key}: {e}")))?;
            if values.len() != len {
                return Err(bad(format!(
                    "array {key}: declared {len} values, found {}",
                    values.len()
                )));
            }
            if arrays.insert(key.to_string(), values).is_some() {
                return Err(bad(format!("duplicate array {key}")));
            }
        }
        let mut take = |key: &str| arrays.remove(key).ok_or_else(|| bad(format!("missing array {key}")));
        let params = ModelParams {
            input_w: take("input_w")?,
            input_b: take("input_b")?,
            qen: TtnParams { thetas: take("qen")? },
            qnon: TtnParams { thetas: take("qnon")? },
            d_hid,
            n_iterations,
        };
        let optimizer = match adam_t {
            Some(t) => Some(AdamState {
                t,
                m: take("adam_m")?,
                v: take("adam_v")?,
            }),
            None => None,
        };
        if let Some(extra) = arrays.keys().next() {
            return Err(bad(format!("unknown array {extra}")));
        }
        let arch = Architecture::default();
        params
            .validate(&arch)
            .map_err(|e| bad(format!("shape check failed: {e}")))?;
        if let Some(adam) = &optimizer {
            if adam.m.len() != params.n_params() || adam.v.len() != params.n_params() {
                return Err(bad("optimizer moments do not match parameter count".into()));
            }
        }
        Ok(Self { params, optimizer })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| QgnnError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QgnnError::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Largest `|exact − finite difference|` over every model parameter of the
/// weighted-BCE loss on `graph`, with central step `h`.
pub fn gradient_check(
    graph: &SubGraph,
    params: &ModelParams,
    arch: &Architecture,
    clamp_eps: f64,
    h: f64,
) -> Result<f64> {
    let (_, _, grad) = qgnn_gradient(graph, params, arch, clamp_eps)?;
    let loss_at = |flat: &[f64]| -> f64 {
        let mut p = params.clone();
        if p.set_flat(flat).is_err() {
            return f64::NAN;
        }
        qgnn_forward(graph, &p, arch)
            .and_then(|probs| crate::train::weighted_bce(&probs, graph.labels(), clamp_eps))
            .unwrap_or(f64::NAN)
    };
    let fd = crate::autodiff::finite_diff_oracle(loss_at, &params.to_flat(), h)?;
    Ok(grad
        .to_flat()
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
