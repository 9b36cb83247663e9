//! Dense statevector simulation for the Ry / CNOT / Z-expectation gate set.
//!
//! Qubit 0 is the least significant bit of the amplitude index.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{QgnnError, Result};

pub const MAX_QUBITS: usize = 14;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// All-zero register `|0…0⟩`.
    pub fn init_zero(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Product state `⊗_q Ry(angles[q])|0⟩`, built in a single pass.
    ///
    /// Equivalent to `init_zero` followed by one `apply_ry` per qubit.
    pub fn ry_product(angles: &[f64]) -> Result<Self> {
        let n_qubits = angles.len();
        check_width(n_qubits)?;
        if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
            return Err(QgnnError::Domain(format!("non-finite rotation angle {a}")));
        }
        let halves: Vec<(f64, f64)> = angles.iter().map(|a| ((a / 2.0).cos(), (a / 2.0).sin())).collect();
        let mut amps = vec![Complex64::new(1.0, 0.0); 1 << n_qubits];
        // amplitude of basis index i is the product of per-qubit cos/sin factors
        for (q, &(c, s)) in halves.iter().enumerate() {
            let bit = 1usize << q;
            for (i, amp) in amps.iter_mut().enumerate() {
                *amp *= if i & bit == 0 { c } else { s };
            }
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(QgnnError::Index {
                index: qubit,
                len: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies `Ry(theta) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]` to `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        if !theta.is_finite() {
            return Err(QgnnError::Domain(format!("non-finite rotation angle {theta}")));
        }
        let (s, c) = (theta / 2.0).sin_cos();
        let stride = 1usize << qubit;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a0, *a1);
                *a0 = x0 * c - x1 * s;
                *a1 = x0 * s + x1 * c;
            }
        }
        Ok(())
    }

    /// Flips `target` on every basis state whose `control` bit is set.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(QgnnError::Config(format!(
                "cnot control and target are both qubit {control}"
            )));
        }
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        for i in 0..self.amps.len() {
            // visit each swapped pair once, from its target-bit-0 member
            if i & cbit != 0 && i & tbit == 0 {
                self.amps.swap(i, i | tbit);
            }
        }
        Ok(())
    }

    /// Probability of reading `|1⟩` on `qubit`.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Exact `⟨Z⟩` on `qubit`: +1 weight for bit 0, −1 for bit 1.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// Shot-sampled `⟨Z⟩` estimate: draws `shots` binomial measurements of `qubit`.
    pub fn sample_z<R: Rng + ?Sized>(&self, qubit: usize, shots: u64, rng: &mut R) -> Result<f64> {
        if shots == 0 {
            return Err(QgnnError::Config("shot count must be positive".into()));
        }
        let p1 = self.prob_one(qubit)?.clamp(0.0, 1.0);
        let ones = Binomial::new(shots, p1)
            .map_err(|e| QgnnError::Numeric(format!("binomial sampler: {e}")))?
            .sample(rng);
        Ok(1.0 - 2.0 * ones as f64 / shots as f64)
    }
}

fn check_width(n_qubits: usize) -> Result<()> {
    if !(1..=MAX_QUBITS).contains(&n_qubits) {
        return Err(QgnnError::Config(format!(
            "register width {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}
