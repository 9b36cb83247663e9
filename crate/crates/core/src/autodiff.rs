//! Parameter-shift derivatives of TTN scores, plus a central-difference
//! oracle for verification.
//!
//! Every trainable angle and every encoding angle enters the circuit through
//! a single `Ry`, so `∂score/∂φ = [score(φ + π/2) − score(φ − π/2)] / 2` is
//! exact. Input derivatives pick up the `2π` factor of the feature encoding.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{QgnnError, Result};
use crate::par;
use crate::ttn::{encode_features, Backend, TtnParams, TtnTopology};

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitJacobian {
    /// `∂score/∂θ_k`
    pub d_params: Vec<f64>,
    /// `∂score/∂feature_i`
    pub d_inputs: Vec<f64>,
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(QgnnError::Index { index, len });
    }
    Ok(())
}

fn shifted(values: &[f64], index: usize, delta: f64) -> Vec<f64> {
    let mut v = values.to_vec();
    v[index] += delta;
    v
}

fn param_slot(backend: Backend, topology: &TtnTopology, thetas: &[f64], angles: &[f64], k: usize) -> Result<f64> {
    let plus = backend.score_angles(topology, &shifted(thetas, k, FRAC_PI_2), angles)?;
    let minus = backend.score_angles(topology, &shifted(thetas, k, -FRAC_PI_2), angles)?;
    Ok((plus - minus) / 2.0)
}

fn input_slot(backend: Backend, topology: &TtnTopology, thetas: &[f64], angles: &[f64], i: usize) -> Result<f64> {
    let plus = backend.score_angles(topology, thetas, &shifted(angles, i, FRAC_PI_2))?;
    let minus = backend.score_angles(topology, thetas, &shifted(angles, i, -FRAC_PI_2))?;
    Ok(TAU * (plus - minus) / 2.0)
}

/// `∂score/∂θ_k` by the ±π/2 shift rule.
pub fn shift_grad_param(
    topology: &TtnTopology,
    params: &TtnParams,
    features: &[f64],
    k: usize,
    backend: Backend,
) -> Result<f64> {
    check_index(k, params.len())?;
    let angles = encode_features(features)?;
    param_slot(backend, topology, &params.thetas, &angles, k)
}

/// `∂score/∂feature_i`, chain-ruled through the `2π` encoding.
pub fn shift_grad_input(
    topology: &TtnTopology,
    params: &TtnParams,
    features: &[f64],
    i: usize,
    backend: Backend,
) -> Result<f64> {
    check_index(i, features.len())?;
    let angles = encode_features(features)?;
    input_slot(backend, topology, &params.thetas, &angles, i)
}

impl CircuitJacobian {
    /// Score and full Jacobian, evaluated sequentially.
    ///
    /// This is the variant used inside per-edge / per-node parallel loops.
    pub fn compute(
        topology: &TtnTopology,
        params: &TtnParams,
        features: &[f64],
        backend: Backend,
    ) -> Result<(f64, Self)> {
        let angles = encode_features(features)?;
        let score = backend.score_angles(topology, &params.thetas, &angles)?;
        let d_params = (0..params.len())
            .map(|k| param_slot(backend, topology, &params.thetas, &angles, k))
            .collect::<Result<Vec<_>>>()?;
        let d_inputs = (0..angles.len())
            .map(|i| input_slot(backend, topology, &params.thetas, &angles, i))
            .collect::<Result<Vec<_>>>()?;
        Ok((score, Self { d_params, d_inputs }))
    }

    /// Full Jacobian with every shift evaluation fanned out in parallel.
    ///
    /// Slots are pre-assigned, so the result is identical to [`Self::compute`].
    pub fn compute_par(topology: &TtnTopology, params: &TtnParams, features: &[f64], backend: Backend) -> Result<Self> {
        let angles = encode_features(features)?;
        let n_params = params.len();
        let slots = par::try_map_range(n_params + angles.len(), |slot| {
            if slot < n_params {
                param_slot(backend, topology, &params.thetas, &angles, slot)
            } else {
                input_slot(backend, topology, &params.thetas, &angles, slot - n_params)
            }
        })?;
        let mut d_params = slots;
        let d_inputs = d_params.split_off(n_params);
        Ok(Self { d_params, d_inputs })
    }
}

/// Central differences `[f(x + h·e_i) − f(x − h·e_i)] / 2h` for every coordinate.
pub fn finite_diff_oracle<F>(f: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(1e-8..=1e-2).contains(&h) {
        return Err(QgnnError::Config(format!(
            "finite-difference step {h} outside [1e-8, 1e-2]"
        )));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let x0 = x[i];
        x[i] = x0 + h;
        let fp = f(&x);
        x[i] = x0 - h;
        let fm = f(&x);
        x[i] = x0;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(QgnnError::Numeric(format!("finite difference at coordinate {i}")));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ttn::ttn_forward_with;
    use std::f64::consts::PI;

    #[test]
    fn param_shift_closed_form() {
        // all features zero: the block acts on |00⟩, so only the Ry on the
        // retiring qubit moves the survivor, score = (1 − cos θ0)/2
        let t = TtnTopology::build(2).unwrap();
        for (theta, expected) in [(0.0, 0.0), (FRAC_PI_2, 0.5)] {
            let p = TtnParams::new(&t, vec![theta, 0.0]).unwrap();
            for backend in [Backend::StateVector, Backend::TreeContraction] {
                let g = shift_grad_param(&t, &p, &[0.0, 0.0], 0, backend).unwrap();
                assert!((g - expected).abs() < 1e-12, "{g}");
            }
        }
    }

    #[test]
    fn input_shift_closed_form() {
        let t = TtnTopology::build(2).unwrap();
        let p = TtnParams::zeros(&t);
        for (f0, expected) in [(0.0, 0.0), (0.25, PI)] {
            let g = shift_grad_input(&t, &p, &[f0, 0.0], 0, Backend::StateVector).unwrap();
            assert!((g - expected).abs() < 1e-12, "{g}");
        }
    }

    #[test]
    fn index_errors() {
        let t = TtnTopology::build(2).unwrap();
        let p = TtnParams::zeros(&t);
        assert!(matches!(
            shift_grad_param(&t, &p, &[0.0, 0.0], 2, Backend::StateVector),
            Err(QgnnError::Index { index: 2, len: 2 })
        ));
        assert!(matches!(
            shift_grad_input(&t, &p, &[0.0, 0.0], 5, Backend::StateVector),
            Err(QgnnError::Index { index: 5, len: 2 })
        ));
    }

    #[test]
    fn oracle_examples() {
        let g = finite_diff_oracle(|x| x[0] * x[0], &[3.0], 1e-4).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-7);
        let g = finite_diff_oracle(|x| x[0].cos(), &[0.0], 1e-4).unwrap();
        assert!(g[0].abs() < 1e-8);
        assert!(finite_diff_oracle(|x| x[0], &[0.0], 1.0).is_err());
        assert!(matches!(
            finite_diff_oracle(|x| 1.0 / x[0], &[0.0], 1e-3).map(|_| ()),
            Ok(())
        ));
        assert!(finite_diff_oracle(|x| x[0].ln(), &[0.0], 1e-3).is_err());
    }

    #[test]
    fn parallel_and_sequential_jacobians_match() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t = TtnTopology::build(8).unwrap();
        let p = TtnParams::random(&t, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let (score, seq) = CircuitJacobian::compute(&t, &p, &x, Backend::StateVector).unwrap();
        let par = CircuitJacobian::compute_par(&t, &p, &x, Backend::StateVector).unwrap();
        assert_eq!(seq, par);
        assert_eq!(score, ttn_forward_with(&t, &p, &x, Backend::StateVector).unwrap());
        assert!(seq.d_params.iter().all(|g| g.abs() <= 0.5 + 1e-12));
    }
}
