//! Dense state-vector reference for two-site gate sequences.

#![allow(dead_code)]

use chainmps::mps::{Truncation, TwoSiteGate, VidalMps};
use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    let m = Array2::from_shape_fn((n, n), |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let (u, _, vt) = m.svd(true, true).unwrap();
    u.unwrap().dot(&vt.unwrap())
}

/// Applies `gate` to sites `bond`, `bond+1` of a dense state, then swaps the
/// two sites if asked.
pub fn dense_apply(psi: &Array1<C64>, dims: &mut [usize], bond: usize, gate: &Array2<C64>, swap: bool) -> Array1<C64> {
    let left: usize = dims[..bond].iter().product();
    let right: usize = dims[bond + 2..].iter().product();
    let (d1, d2) = (dims[bond], dims[bond + 1]);
    let mut out = Array1::zeros(psi.len());
    for l in 0..left {
        for r in 0..right {
            for ip in 0..d1 {
                for jp in 0..d2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..d1 {
                        for j in 0..d2 {
                            acc += gate[[ip * d2 + jp, i * d2 + j]] * psi[((l * d1 + i) * d2 + j) * right + r];
                        }
                    }
                    let idx = if swap { ((l * d2 + jp) * d1 + ip) * right + r } else { ((l * d1 + ip) * d2 + jp) * right + r };
                    out[idx] = acc;
                }
            }
        }
    }
    if swap {
        dims.swap(bond, bond + 1);
    }
    out
}

/// Deviations of an untruncated MPS from the dense reference after a gate
/// sequence.
#[derive(Clone, Copy, Debug)]
pub struct SequenceError {
    pub amplitude: f64,
    pub norm: f64,
    pub population: f64,
    pub dims_match: bool,
}

impl SequenceError {
    pub fn worst(&self) -> f64 {
        if self.dims_match {
            self.amplitude.max(self.norm).max(self.population)
        } else {
            f64::INFINITY
        }
    }
}

pub fn gate_sequence_error(dims: &[usize], basis_seed: u64, steps: &[(usize, bool)], seed: u64) -> SequenceError {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis: Vec<usize> = dims.iter().enumerate().map(|(k, &d)| ((basis_seed >> (4 * k)) as usize) % d).collect();
    let mut mps = VidalMps::product_state(dims, &basis, Truncation::none()).unwrap();
    let mut dense_dims = dims.to_vec();
    let mut psi = mps.to_state_vector().unwrap();
    let mut dims_match = true;
    for &(b, swap) in steps {
        let bond = b % (dims.len() - 1);
        let (d1, d2) = (dense_dims[bond], dense_dims[bond + 1]);
        let u = random_unitary(d1 * d2, &mut rng);
        let gate = TwoSiteGate::from_dense(u.clone(), d1, d2).unwrap();
        mps.apply_two_site_gate(bond, &gate, swap).unwrap();
        psi = dense_apply(&psi, &mut dense_dims, bond, &u, swap);
        dims_match &= mps.site_dims() == dense_dims.as_slice();
    }
    let got = mps.to_state_vector().unwrap();
    let rest = psi.len() / dense_dims[0];
    let p_dense: f64 = psi.iter().take(rest).map(|v| v.norm_sqr()).sum();
    SequenceError {
        amplitude: (&got - &psi).iter().fold(0.0f64, |m, v| m.max(v.norm())),
        norm: (mps.norm_squared() - 1.0).abs(),
        population: (mps.local_populations(0).unwrap()[0] - p_dense).abs(),
        dims_match,
    }
}
