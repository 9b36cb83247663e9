//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the simulator or gradient code under test: the
//! circuit oracle multiplies explicit dense gate matrices, AUC is counted
//! pairwise, and gradients come from central differences.

#![allow(dead_code)]

use num_complex::Complex64;
use qgnn::graph::{Provenance, SubGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect())
        .collect()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (na, nb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0); na * nb]; na * nb];
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[i * nb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn ry_matrix(theta: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    vec![vec![c(co), c(-s)], vec![c(s), c(co)]]
}

/// Full `2^n` operator for a single-qubit gate; qubit 0 is the least
/// significant index bit, so it is the rightmost Kronecker factor.
pub fn single_qubit_operator(n: usize, qubit: usize, gate: &Matrix) -> Matrix {
    let mut op = identity(1);
    for q in (0..n).rev() {
        let factor = if q == qubit { gate.clone() } else { identity(2) };
        op = kron(&op, &factor);
    }
    op
}

/// Permutation matrix of a CNOT built from its truth table.
pub fn cnot_operator(n: usize, control: usize, target: usize) -> Matrix {
    let dim = 1 << n;
    let image = |col: usize| {
        if col >> control & 1 == 1 {
            col ^ (1 << target)
        } else {
            col
        }
    };
    (0..dim)
        .map(|row| {
            (0..dim)
                .map(|col| c(if image(col) == row { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

pub fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Gate list of the TTN classifier written out independently of the library:
/// encoding rotations, then per block Ry, Ry, CNOT.
pub enum Gate {
    Ry(usize, f64),
    Cnot(usize, usize),
}

/// Independent re-derivation of the pairing tree: (first, second) per block.
pub fn ttn_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut active: Vec<usize> = (0..n).collect();
    let mut pairs = Vec::new();
    while active.len() > 1 {
        let mut next = Vec::new();
        let mut i = 0;
        while i < active.len() {
            if i + 1 < active.len() {
                pairs.push((active[i], active[i + 1]));
                next.push(active[i + 1]);
            } else {
                next.push(active[i]);
            }
            i += 2;
        }
        active = next;
    }
    pairs
}

pub fn ttn_gates(n: usize, thetas: &[f64], features: &[f64]) -> (Vec<Gate>, usize) {
    let mut gates: Vec<Gate> = features
        .iter()
        .enumerate()
        .map(|(q, f)| Gate::Ry(q, 2.0 * std::f64::consts::PI * f))
        .collect();
    let pairs = ttn_pairs(n);
    for (b, &(first, second)) in pairs.iter().enumerate() {
        gates.push(Gate::Ry(first, thetas[2 * b]));
        gates.push(Gate::Ry(second, thetas[2 * b + 1]));
        gates.push(Gate::Cnot(first, second));
    }
    (gates, pairs.last().unwrap().1)
}

/// Final amplitudes from dense matrix products over `|0…0⟩`.
pub fn dense_run(n: usize, gates: &[Gate]) -> Vec<Complex64> {
    let mut state = vec![c(0.0); 1 << n];
    state[0] = c(1.0);
    for g in gates {
        let op = match *g {
            Gate::Ry(q, t) => single_qubit_operator(n, q, &ry_matrix(t)),
            Gate::Cnot(ctl, tgt) => cnot_operator(n, ctl, tgt),
        };
        state = mat_vec(&op, &state);
    }
    state
}

pub fn dense_prob_one(state: &[Complex64], qubit: usize) -> f64 {
    state
        .iter()
        .enumerate()
        .filter(|(i, _)| i >> qubit & 1 == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

pub fn dense_ttn_score(n: usize, thetas: &[f64], features: &[f64]) -> f64 {
    let (gates, out) = ttn_gates(n, thetas, features);
    dense_prob_one(&dense_run(n, &gates), out)
}

/// Exhaustive pairwise AUC: wins count 1, ties ½.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                twice += 2;
            } else if scores[i] == scores[j] {
                twice += 1;
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Central differences of `f` at `x`, coordinate by coordinate.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = p[i];
            p[i] = x0 + h;
            let fp = f(&p);
            p[i] = x0 - h;
            let fm = f(&p);
            p[i] = x0;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Random layered toy graph: `n_nodes` spread over increasing r with edges
/// only between consecutive r groups, mixed labels.
pub fn random_toy_graph(seed: u64, n_nodes: usize, max_edges: usize) -> SubGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = 4;
    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let layer = i % layers;
        nodes.push([
            0.1 + 0.2 * layer as f64 + rng.random_range(0.0..0.05),
            rng.random::<f64>(),
            rng.random::<f64>(),
        ]);
    }
    let mut edges = Vec::new();
    for i in 0..n_nodes {
        for j in 0..n_nodes {
            if j % layers == i % layers + 1 && edges.len() < max_edges && rng.random::<f64>() < 0.6 {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    let mut labels: Vec<u8> = edges.iter().map(|_| u8::from(rng.random::<bool>())).collect();
    labels[0] = 1;
    if labels.len() > 1 {
        labels[1] = 0;
    }
    SubGraph::new(
        nodes,
        edges,
        labels,
        Provenance {
            event_id: seed,
            phi_sector: 0,
            z_sector: 0,
        },
    )
    .unwrap()
}
