//! Local operators and exponentiation of two-site Hamiltonians.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::mps::{GateBlock, TwoSiteGate};

/// Truncated bosonic annihilation operator on `d` levels.
pub fn annihilation(d: usize) -> Array2<C64> {
    let mut b = Array2::zeros((d, d));
    for n in 1..d {
        b[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    b
}

pub fn creation(d: usize) -> Array2<C64> {
    annihilation(d).t().to_owned()
}

pub fn number(d: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_iter((0..d).map(|n| C64::new(n as f64, 0.0))))
}

pub fn sigma_x() -> Array2<C64> {
    let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    ndarray::array![[z, o], [o, z]]
}

pub fn sigma_z() -> Array2<C64> {
    let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    ndarray::array![[o, z], [z, -o]]
}

pub fn identity(d: usize) -> Array2<C64> {
    Array2::eye(d)
}

/// Sparse operator on two sites with composite index `i·d2 + j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TwoSiteHamiltonian {
    d1: usize,
    d2: usize,
    entries: BTreeMap<(usize, usize), C64>,
}

impl TwoSiteHamiltonian {
    pub fn new(d1: usize, d2: usize) -> Self {
        Self { d1, d2, entries: BTreeMap::new() }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn from_dense(h: &Array2<C64>, d1: usize, d2: usize) -> Result<Self> {
        let n = d1 * d2;
        if h.dim() != (n, n) {
            return Err(Error::Domain(format!("operator of shape {:?} does not act on ({d1}, {d2})", h.dim())));
        }
        let mut out = Self::new(d1, d2);
        for ((i, j), &v) in h.indexed_iter() {
            if v != C64::new(0.0, 0.0) {
                out.entries.insert((i, j), v);
            }
        }
        Ok(out)
    }

    /// Adds `coeff · left ⊗ right`.
    pub fn add_product(&mut self, coeff: C64, left: &Array2<C64>, right: &Array2<C64>) -> &mut Self {
        assert_eq!(left.dim(), (self.d1, self.d1), "left factor has wrong dimension");
        assert_eq!(right.dim(), (self.d2, self.d2), "right factor has wrong dimension");
        if coeff == C64::new(0.0, 0.0) {
            return self;
        }
        let zero = C64::new(0.0, 0.0);
        let rnz: Vec<_> = right.indexed_iter().filter(|(_, v)| **v != zero).collect();
        for ((i, ip), &l) in left.indexed_iter() {
            if l == zero {
                continue;
            }
            for &((j, jp), &r) in &rnz {
                let key = (i * self.d2 + j, ip * self.d2 + jp);
                *self.entries.entry(key).or_insert(zero) += coeff * l * r;
            }
        }
        self
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.d1 * self.d2;
        let mut m = Array2::zeros((n, n));
        for (&(i, j), &v) in &self.entries {
            m[[i, j]] = v;
        }
        m
    }

    fn check_hermitian(&self) -> Result<()> {
        let scale = self.entries.values().fold(1.0f64, |m, v| m.max(v.norm()));
        for (&(i, j), &v) in &self.entries {
            let mirror = self.entries.get(&(j, i)).copied().unwrap_or_default();
            if (v - mirror.conj()).norm() > 1e-12 * scale {
                return Err(Error::Domain(format!("two-site Hamiltonian is not Hermitian at ({i}, {j})")));
            }
        }
        Ok(())
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// `exp(−i h τ)`, exponentiated block by block over the connected components
/// of the sparsity pattern of `h`.
pub fn gate_from_hamiltonian(h: &TwoSiteHamiltonian, tau: f64) -> Result<TwoSiteGate> {
    h.check_hermitian()?;
    let (d1, d2) = h.dims();
    let n = d1 * d2;
    let mut parent: Vec<usize> = (0..n).collect();
    for &(i, j) in h.entries.keys() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        components.entry(root).or_default().push(i);
    }

    let mut blocks = Vec::with_capacity(components.len());
    for indices in components.into_values() {
        let k = indices.len();
        let mut block = Array2::<C64>::zeros((k, k));
        for (r, &i) in indices.iter().enumerate() {
            for (c, &j) in indices.iter().enumerate() {
                if let Some(&v) = h.entries.get(&(i, j)) {
                    block[[r, c]] = v;
                }
            }
        }
        let matrix = if k == 1 {
            Array2::from_elem((1, 1), C64::from_polar(1.0, -block[[0, 0]].re * tau))
        } else {
            let (evals, vecs) = block.eigh(UPLO::Lower)?;
            let mut scaled = vecs.clone();
            for (mut col, &e) in scaled.columns_mut().into_iter().zip(&evals) {
                col *= C64::from_polar(1.0, -e * tau);
            }
            scaled.dot(&vecs.t().mapv(|v| v.conj()))
        };
        blocks.push(GateBlock { indices, matrix });
    }
    TwoSiteGate::from_blocks(d1, d2, blocks)
}

/// Dense-matrix front end to [`gate_from_hamiltonian`].
pub fn gate_from_dense_hamiltonian(h: &Array2<C64>, d1: usize, d2: usize, tau: f64) -> Result<TwoSiteGate> {
    gate_from_hamiltonian(&TwoSiteHamiltonian::from_dense(h, d1, d2)?, tau)
}
