//! Tree Tensor Network classifier circuits.
//!
//! A circuit angle-encodes one feature per qubit with `Ry(2π·x)`, then merges
//! active qubits pairwise, layer by layer, until a single readout qubit
//! remains. Each merge block is `Ry(θ) ⊗ Ry(θ')` followed by a CNOT from the
//! retiring qubit onto the surviving one. The score is `P(|1⟩)` on the readout
//! qubit, i.e. `(1 − ⟨Z⟩) / 2`.

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{QgnnError, Result};
use crate::statevector::{StateVector, MAX_QUBITS};

/// Tolerance on the `[0, 1]` feature domain before encoding.
pub const FEATURE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub layer: usize,
    pub first: usize,
    pub second: usize,
    pub survivor: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TtnTopology {
    n_qubits: usize,
    blocks: Vec<Block>,
    output_qubit: usize,
}

impl TtnTopology {
    /// Builds the pairing tree: adjacent active qubits are merged left to
    /// right, an odd trailing qubit is carried to the next layer unpaired.
    pub fn build(n_qubits: usize) -> Result<Self> {
        if !(2..=MAX_QUBITS).contains(&n_qubits) {
            return Err(QgnnError::Config(format!(
                "ttn width {n_qubits} outside 2..={MAX_QUBITS}"
            )));
        }
        let mut active: Vec<usize> = (0..n_qubits).collect();
        let mut blocks = Vec::with_capacity(n_qubits - 1);
        let mut layer = 0;
        while active.len() > 1 {
            let mut next = Vec::with_capacity(active.len().div_ceil(2));
            for pair in active.chunks(2) {
                match *pair {
                    [first, second] => {
                        blocks.push(Block {
                            layer,
                            first,
                            second,
                            survivor: second,
                        });
                        next.push(second);
                    }
                    [carry] => next.push(carry),
                    _ => unreachable!(),
                }
            }
            active = next;
            layer += 1;
        }
        Ok(Self {
            n_qubits,
            blocks,
            output_qubit: active[0],
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn output_qubit(&self) -> usize {
        self.output_qubit
    }

    pub fn n_params(&self) -> usize {
        2 * self.blocks.len()
    }

    /// Number of blocks in each layer, bottom up.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let n_layers = self.blocks.last().map_or(0, |b| b.layer + 1);
        let mut sizes = vec![0; n_layers];
        for b in &self.blocks {
            sizes[b.layer] += 1;
        }
        sizes
    }
}

/// Trainable rotation angles, two per block in block order.
#[derive(Clone, Debug, PartialEq)]
pub struct TtnParams {
    pub thetas: Vec<f64>,
}

impl TtnParams {
    pub fn new(topology: &TtnTopology, thetas: Vec<f64>) -> Result<Self> {
        if thetas.len() != topology.n_params() {
            return Err(QgnnError::Dimension {
                expected: topology.n_params(),
                got: thetas.len(),
            });
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(QgnnError::Domain("non-finite circuit parameter".into()));
        }
        Ok(Self { thetas })
    }

    pub fn zeros(topology: &TtnTopology) -> Self {
        Self {
            thetas: vec![0.0; topology.n_params()],
        }
    }

    /// Independent uniform draws from `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(topology: &TtnTopology, rng: &mut R) -> Self {
        Self {
            thetas: (0..topology.n_params()).map(|_| rng.random_range(0.0..TAU)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }
}

/// Maps `[0, 1]` features onto `[0, 2π]` rotation angles.
pub fn encode_features(features: &[f64]) -> Result<Vec<f64>> {
    features
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !(-FEATURE_TOLERANCE..=1.0 + FEATURE_TOLERANCE).contains(&x) {
                return Err(QgnnError::Domain(format!("feature {i} = {x} outside [0, 1]")));
            }
            Ok(TAU * x)
        })
        .collect()
}

/// How circuit scores are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    /// Full `2^n` amplitude simulation.
    StateVector,
    /// Exact reduced-state contraction along the tree.
    ///
    /// The two qubits entering any block come from disjoint subtrees of a
    /// product input, so their joint state is `ρ_a ⊗ ρ_b`. Tracing out the
    /// retiring qubit after the CNOT leaves `ρ_a[0][0]·ρ_b + ρ_a[1][1]·Xρ_bX`
    /// on the survivor. Cost is linear in the width.
    #[default]
    TreeContraction,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::StateVector => "statevector",
            Backend::TreeContraction => "tree",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "statevector" => Ok(Backend::StateVector),
            "tree" => Ok(Backend::TreeContraction),
            other => Err(QgnnError::Config(format!(
                "unknown backend {other:?} (expected statevector or tree)"
            ))),
        }
    }

    /// `P(|1⟩)` on the readout qubit for raw encoding angles.
    ///
    /// Angles are unconstrained here so that shift-rule evaluations may step
    /// outside the encoder's image.
    pub fn score_angles(self, topology: &TtnTopology, thetas: &[f64], angles: &[f64]) -> Result<f64> {
        if angles.len() != topology.n_qubits {
            return Err(QgnnError::Dimension {
                expected: topology.n_qubits,
                got: angles.len(),
            });
        }
        if thetas.len() != topology.n_params() {
            return Err(QgnnError::Dimension {
                expected: topology.n_params(),
                got: thetas.len(),
            });
        }
        match self {
            Backend::StateVector => score_statevector(topology, thetas, angles),
            Backend::TreeContraction => Ok(score_contracted(topology, thetas, angles)),
        }
    }
}

fn score_statevector(topology: &TtnTopology, thetas: &[f64], angles: &[f64]) -> Result<f64> {
    let mut state = StateVector::ry_product(angles)?;
    for (b, block) in topology.blocks.iter().enumerate() {
        state.apply_ry(block.first, thetas[2 * b])?;
        state.apply_ry(block.second, thetas[2 * b + 1])?;
        state.apply_cnot(block.first, block.second)?;
    }
    let z = state.expectation_z(topology.output_qubit)?;
    Ok(((1.0 - z) / 2.0).clamp(0.0, 1.0))
}

/// Real symmetric single-qubit density matrix `[[p00, p01], [p01, p11]]`.
#[derive(Clone, Copy, Debug)]
struct Rho {
    p00: f64,
    p01: f64,
    p11: f64,
}

impl Rho {
    fn rotated(self, theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        // R ρ Rᵀ with R = [[c, −s], [s, c]]
        let (cc, ss, cs) = (c * c, s * s, c * s);
        Rho {
            p00: cc * self.p00 - 2.0 * cs * self.p01 + ss * self.p11,
            p01: cs * (self.p00 - self.p11) + (cc - ss) * self.p01,
            p11: ss * self.p00 + 2.0 * cs * self.p01 + cc * self.p11,
        }
    }
}

fn score_contracted(topology: &TtnTopology, thetas: &[f64], angles: &[f64]) -> f64 {
    let mut rho: Vec<Rho> = angles
        .iter()
        .map(|&a| {
            let (s, c) = (a / 2.0).sin_cos();
            Rho {
                p00: c * c,
                p01: c * s,
                p11: s * s,
            }
        })
        .collect();
    for (b, block) in topology.blocks.iter().enumerate() {
        let ctrl = rho[block.first].rotated(thetas[2 * b]);
        let tgt = rho[block.second].rotated(thetas[2 * b + 1]);
        rho[block.second] = Rho {
            p00: ctrl.p00 * tgt.p00 + ctrl.p11 * tgt.p11,
            p01: (ctrl.p00 + ctrl.p11) * tgt.p01,
            p11: ctrl.p00 * tgt.p11 + ctrl.p11 * tgt.p00,
        };
    }
    rho[topology.output_qubit].p11.clamp(0.0, 1.0)
}

/// A TTN classifier: topology plus its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TtnCircuit {
    pub topology: TtnTopology,
    pub params: TtnParams,
}

impl TtnCircuit {
    pub fn new(topology: TtnTopology, params: TtnParams) -> Result<Self> {
        let params = TtnParams::new(&topology, params.thetas)?;
        Ok(Self { topology, params })
    }

    pub fn score(&self, features: &[f64], backend: Backend) -> Result<f64> {
        ttn_forward_with(&self.topology, &self.params, features, backend)
    }
}

/// Full statevector evaluation of the classifier score for `[0, 1]` features.
pub fn ttn_forward(topology: &TtnTopology, params: &TtnParams, features: &[f64]) -> Result<f64> {
    ttn_forward_with(topology, params, features, Backend::StateVector)
}

pub fn ttn_forward_with(topology: &TtnTopology, params: &TtnParams, features: &[f64], backend: Backend) -> Result<f64> {
    if features.len() != topology.n_qubits {
        return Err(QgnnError::Dimension {
            expected: topology.n_qubits,
            got: features.len(),
        });
    }
    let angles = encode_features(features)?;
    backend.score_angles(topology, &params.thetas, &angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn tree_shapes() {
        let t = TtnTopology::build(2).unwrap();
        assert_eq!(t.blocks().len(), 1);
        assert_eq!(t.output_qubit(), 1);
        assert_eq!(t.n_params(), 2);

        let t = TtnTopology::build(8).unwrap();
        assert_eq!(t.layer_sizes(), vec![4, 2, 1]);
        assert_eq!(t.n_params(), 14);
        assert_eq!(t.output_qubit(), 7);

        let t = TtnTopology::build(12).unwrap();
        assert_eq!(t.layer_sizes(), vec![6, 3, 1, 1]);
        assert_eq!(t.n_params(), 22);

        assert!(matches!(TtnTopology::build(1), Err(QgnnError::Config(_))));
        assert!(matches!(TtnTopology::build(15), Err(QgnnError::Config(_))));
    }

    #[test]
    fn topology_invariants_all_widths() {
        for n in 2..=MAX_QUBITS {
            let t = TtnTopology::build(n).unwrap();
            assert_eq!(t.blocks().len(), n - 1);
            assert_eq!(t.n_params(), 2 * (n - 1));
            for layer in 0..t.layer_sizes().len() {
                let mut seen = std::collections::HashSet::new();
                for b in t.blocks().iter().filter(|b| b.layer == layer) {
                    assert!(seen.insert(b.first) && seen.insert(b.second));
                    assert_eq!(b.survivor, b.second);
                }
            }
            assert_eq!(t.output_qubit(), t.blocks().last().unwrap().survivor);
        }
    }

    #[test]
    fn encoding() {
        assert_eq!(encode_features(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(encode_features(&[0.5]).unwrap(), vec![PI]);
        assert_eq!(
            encode_features(&[0.25, 0.75]).unwrap(),
            vec![FRAC_PI_2, 3.0 * FRAC_PI_2]
        );
        assert!(encode_features(&[1.0 + 5e-10]).is_ok());
        assert!(matches!(encode_features(&[1.01]), Err(QgnnError::Domain(_))));
        assert!(matches!(encode_features(&[-1e-6]), Err(QgnnError::Domain(_))));
    }

    #[test]
    fn two_qubit_truth_table() {
        let t = TtnTopology::build(2).unwrap();
        let p = TtnParams::zeros(&t);
        assert_eq!(ttn_forward(&t, &p, &[0.0, 0.0]).unwrap(), 0.0);
        assert!((ttn_forward(&t, &p, &[0.5, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            ttn_forward(&t, &p, &[0.5]),
            Err(QgnnError::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn backends_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=12 {
            let t = TtnTopology::build(n).unwrap();
            for _ in 0..5 {
                let p = TtnParams::random(&t, &mut rng);
                let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let a = ttn_forward_with(&t, &p, &x, Backend::StateVector).unwrap();
                let b = ttn_forward_with(&t, &p, &x, Backend::TreeContraction).unwrap();
                assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn params_validation() {
        let t = TtnTopology::build(4).unwrap();
        assert!(TtnParams::new(&t, vec![0.0; 5]).is_err());
        assert!(TtnParams::new(&t, vec![f64::INFINITY; 6]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = TtnParams::random(&t, &mut rng);
        assert!(p.thetas.iter().all(|&x| (0.0..TAU).contains(&x)));
        assert_eq!(Backend::parse("tree").unwrap(), Backend::TreeContraction);
        assert!(Backend::parse("gpu").is_err());
    }
}
