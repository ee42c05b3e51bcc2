//! Brute-force state-vector propagation for small truncated models.
//!
//! Sites are ordered (spin, mode 0, …, mode N) with the spin index most
//! significant, matching [`crate::mps::VidalMps::to_state_vector`].

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::chainmap::{ChainCoefficients, StarDecomposition};
use crate::error::{Error, Result};
use crate::propagate::gates::{annihilation, creation, number};
use crate::propagate::{Scheme, SpinBosonSystem};

/// Largest Hilbert space a model may be built on.
pub const MAX_MODEL_DIM: usize = 2_000_000;

/// Largest Hamiltonian that is diagonalized densely.
pub const MAX_EIGEN_DIM: usize = 16_384;

/// Row-compressed sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    fn from_entries(dim: usize, entries: BTreeMap<(usize, usize), C64>) -> Self {
        let mut row_start = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for ((r, c), v) in entries {
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            row_start[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..dim {
            row_start[r + 1] += row_start[r];
        }
        Self { dim, row_start, cols, vals }
    }

    /// Σ coeff · ⊗_site op, with identities on the unlisted sites.
    pub fn from_local_terms(dims: &[usize], terms: &[(C64, Vec<(usize, Array2<C64>)>)]) -> Self {
        let dim: usize = dims.iter().product();
        let mut strides = vec![1; dims.len()];
        for s in (0..dims.len().saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * dims[s + 1];
        }
        let zero = C64::new(0.0, 0.0);
        let mut entries: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for (coeff, factors) in terms {
            for col in 0..dim {
                // expand the column through every factor in turn
                let mut partial = vec![(col, *coeff)];
                for (site, op) in factors {
                    let d = dims[*site];
                    let stride = strides[*site];
                    let mut next = Vec::with_capacity(partial.len() * d);
                    for &(idx, amp) in &partial {
                        let local = (idx / stride) % d;
                        let base = idx - local * stride;
                        for out in 0..d {
                            let v = op[[out, local]];
                            if v != zero {
                                next.push((base + out * stride, amp * v));
                            }
                        }
                    }
                    partial = next;
                }
                for (row, amp) in partial {
                    *entries.entry((row, col)).or_insert(zero) += amp;
                }
            }
        }
        Self::from_entries(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out += alpha · A x`
    pub fn apply_add(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o += alpha * acc;
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut entries = BTreeMap::new();
        for r in 0..self.dim {
            for k in self.row_start[r]..self.row_start[r + 1] {
                entries.insert((self.cols[k], r), self.vals[k].conj());
            }
        }
        Self::from_entries(self.dim, entries)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for r in 0..self.dim {
            for k in self.row_start[r]..self.row_start[r + 1] {
                m[[r, self.cols[k]]] += self.vals[k];
            }
        }
        m
    }

    /// max |A_ij − conj(A_ji)|
    pub fn hermiticity_error(&self) -> f64 {
        let dense = self.to_dense();
        let mut err = 0.0f64;
        for ((i, j), v) in dense.indexed_iter() {
            err = err.max((v - dense[[j, i]].conj()).norm());
        }
        err
    }
}

/// A truncated spin-boson model and the initial state |↑⟩ ⊗ |0…0⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseModel {
    pub dims: Vec<usize>,
    pub hamiltonian: SparseOperator,
    pub psi0: Array1<C64>,
}

fn guard_dims(modes: usize, local_dim: usize) -> Result<Vec<usize>> {
    if local_dim < 2 {
        return Err(Error::config("local_dim", format!("need at least 2 levels, got {local_dim}")));
    }
    let mut dim = 2usize;
    for _ in 0..modes {
        dim = dim
            .checked_mul(local_dim)
            .filter(|&d| d <= MAX_MODEL_DIM)
            .ok_or_else(|| Error::config("N", format!("{modes} modes of {local_dim} levels exceed {MAX_MODEL_DIM} states")))?;
    }
    let mut dims = vec![local_dim; modes + 1];
    dims[0] = SpinBosonSystem::DIM;
    Ok(dims)
}

fn up_vacuum(dim: usize) -> Array1<C64> {
    let mut psi = Array1::zeros(dim);
    psi[0] = C64::new(1.0, 0.0);
    psi
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Chain Hamiltonian
/// `Δσ_x + κ_0 σ_z(b_0 + b_0†) + Σ ω_n b_n†b_n + Σ κ_n (b_n†b_{n−1} + h.c.)`
/// on the first `n_chain + 1` modes of `coeffs`.
pub fn dense_hamiltonian(
    coeffs: &ChainCoefficients,
    sys: &SpinBosonSystem,
    n_chain: usize,
    local_dim: usize,
) -> Result<DenseModel> {
    let coeffs = coeffs.truncated(n_chain + 1)?;
    let dims = guard_dims(n_chain + 1, local_dim)?;
    let d = local_dim;
    let (b, bd, nb) = (annihilation(d), creation(d), number(d));
    let mut terms = vec![
        (real(1.0), vec![(0, sys.system_hamiltonian())]),
        (real(coeffs.kappas[0]), vec![(0, sys.coupling_operator()), (1, &b + &bd)]),
    ];
    for n in 0..=n_chain {
        terms.push((real(coeffs.omegas[n]), vec![(n + 1, nb.clone())]));
        if n > 0 {
            terms.push((real(coeffs.kappas[n]), vec![(n, b.clone()), (n + 1, bd.clone())]));
            terms.push((real(coeffs.kappas[n]), vec![(n, bd.clone()), (n + 1, b.clone())]));
        }
    }
    let hamiltonian = SparseOperator::from_local_terms(&dims, &terms);
    Ok(DenseModel { psi0: up_vacuum(hamiltonian.dim()), dims, hamiltonian })
}

/// Star Hamiltonian `Δσ_x + Σ_k g_k σ_z(a_k + a_k†) + λ_k a_k†a_k` with the
/// modes placed in `order`.
pub fn dense_star_hamiltonian(
    dec: &StarDecomposition,
    sys: &SpinBosonSystem,
    order: &[usize],
    local_dim: usize,
) -> Result<DenseModel> {
    let dims = guard_dims(order.len(), local_dim)?;
    let d = local_dim;
    let (b, bd, nb) = (annihilation(d), creation(d), number(d));
    let g = dec.couplings_star();
    let mut terms = vec![(real(1.0), vec![(0, sys.system_hamiltonian())])];
    for (pos, &k) in order.iter().enumerate() {
        terms.push((real(g[k]), vec![(0, sys.coupling_operator()), (pos + 1, &b + &bd)]));
        terms.push((real(dec.lambdas[k]), vec![(pos + 1, nb.clone())]));
    }
    let hamiltonian = SparseOperator::from_local_terms(&dims, &terms);
    Ok(DenseModel { psi0: up_vacuum(hamiltonian.dim()), dims, hamiltonian })
}

impl DenseModel {
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// ‖P_↑ ψ‖², the spin being the most significant index.
    pub fn population_up(psi: &Array1<C64>) -> f64 {
        psi.iter().take(psi.len() / 2).map(|v| v.norm_sqr()).sum()
    }

    pub fn energy(&self, psi: &Array1<C64>) -> f64 {
        let mut hpsi = vec![C64::new(0.0, 0.0); self.dim()];
        self.hamiltonian.apply_add(real(1.0), psi.as_slice().expect("contiguous"), &mut hpsi);
        psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Divide-and-conquer eigendecomposition of a real symmetric matrix; the
/// eigenvectors are the columns of the returned matrix.
fn symmetric_eigh(a: Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    let ni = i32::try_from(n).map_err(|_| Error::Domain(format!("dimension {n} too large for LAPACK")))?;
    // symmetric, so the row-major buffer is also the column-major matrix
    let mut buf = a.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
    let mut w = vec![0.0; n];
    let (jobz, uplo) = (b'V' as std::ffi::c_char, b'L' as std::ffi::c_char);
    let mut info = 0;
    let (mut work_q, mut iwork_q) = (0.0f64, 0i32);
    // SAFETY: every pointer refers to a live buffer of the size LAPACK expects
    unsafe {
        lapack_sys::dsyevd_(&jobz, &uplo, &ni, buf.as_mut_ptr(), &ni, w.as_mut_ptr(), &mut work_q, &-1, &mut iwork_q, &-1, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dsyevd workspace query failed with info {info}")));
    }
    let (lwork, liwork) = (work_q as i32, iwork_q);
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        lapack_sys::dsyevd_(&jobz, &uplo, &ni, buf.as_mut_ptr(), &ni, w.as_mut_ptr(), work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!("eigensolver failed with info {info}")));
    }
    // column-major output: row k of the buffer is eigenvector k
    let vt = Array2::from_shape_vec((n, n), buf).expect("square buffer");
    Ok((Array1::from(w), vt.reversed_axes()))
}

/// Exact propagator `exp(−iHt)` from a full Hermitian eigendecomposition.
/// Real Hamiltonians are diagonalized in real arithmetic.
#[derive(Clone, Debug)]
pub struct ExactPropagator {
    evals: Array1<f64>,
    evecs: Eigenvectors,
    /// Initial state in the eigenbasis.
    coeffs0: Array1<C64>,
}

#[derive(Clone, Debug)]
enum Eigenvectors {
    Real(Array2<f64>),
    Complex(Array2<C64>),
}

impl Eigenvectors {
    fn to_eigenbasis(&self, psi: &Array1<C64>) -> Array1<C64> {
        match self {
            Eigenvectors::Real(v) => {
                let re = v.t().dot(&psi.mapv(|x| x.re));
                let im = v.t().dot(&psi.mapv(|x| x.im));
                Array1::from_iter(re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)))
            }
            Eigenvectors::Complex(v) => v.t().mapv(|x| x.conj()).dot(psi),
        }
    }

    fn from_eigenbasis(&self, c: &Array1<C64>) -> Array1<C64> {
        match self {
            Eigenvectors::Real(v) => {
                let re = v.dot(&c.mapv(|x| x.re));
                let im = v.dot(&c.mapv(|x| x.im));
                Array1::from_iter(re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)))
            }
            Eigenvectors::Complex(v) => v.dot(c),
        }
    }
}

impl ExactPropagator {
    pub fn new(model: &DenseModel) -> Result<Self> {
        let n = model.dim();
        if n > MAX_EIGEN_DIM {
            return Err(Error::Domain(format!("dimension {n} too large for a dense eigendecomposition")));
        }
        let h = model.hamiltonian.to_dense();
        let fail = |e: ndarray_linalg::error::LinalgError| Error::Numerical(format!("eigensolver failed: {e}"));
        let (evals, evecs) = if h.iter().all(|v| v.im == 0.0) {
            let (evals, v) = symmetric_eigh(h.mapv(|x| x.re))?;
            (evals, Eigenvectors::Real(v))
        } else {
            let (evals, v) = h.eigh(UPLO::Lower).map_err(fail)?;
            (evals, Eigenvectors::Complex(v))
        };
        let coeffs0 = evecs.to_eigenbasis(&model.psi0);
        Ok(Self { evals, evecs, coeffs0 })
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.evals
    }

    pub fn state_at(&self, t: f64) -> Array1<C64> {
        self.evolve_coeffs(&self.coeffs0, t)
    }

    /// `exp(−iHt) ψ` for an arbitrary ψ.
    pub fn apply(&self, psi: &Array1<C64>, t: f64) -> Array1<C64> {
        self.evolve_coeffs(&self.evecs.to_eigenbasis(psi), t)
    }

    fn evolve_coeffs(&self, c: &Array1<C64>, t: f64) -> Array1<C64> {
        let phased = Array1::from_iter(c.iter().zip(&self.evals).map(|(c, &e)| c * C64::from_polar(1.0, -e * t)));
        self.evecs.from_eigenbasis(&phased)
    }

    pub fn populations(&self, times: &[f64]) -> Vec<f64> {
        times.par_iter().map(|&t| DenseModel::population_up(&self.state_at(t))).collect()
    }
}

/// Population of |↑⟩ at each of `times` under exact propagation.
pub fn exact_populations(model: &DenseModel, times: &[f64]) -> Result<Vec<f64>> {
    Ok(ExactPropagator::new(model)?.populations(times))
}

/// Classical fourth-order Runge–Kutta for `dψ/dt = −i H(t) ψ`, stepping
/// through `times` (ascending, from 0) with steps no longer than `max_dt`.
fn rk4_sample<F>(psi0: &Array1<C64>, times: &[f64], max_dt: f64, apply_h: F) -> Result<Vec<Array1<C64>>>
where
    F: Fn(f64, &[C64], &mut [C64]),
{
    if !(max_dt > 0.0) {
        return Err(Error::Domain(format!("integrator step must be positive, got {max_dt}")));
    }
    let n = psi0.len();
    let mut psi = psi0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n]);
    let minus_i = C64::new(0.0, -1.0);
    let deriv = |t: f64, x: &[C64], k: &mut [C64]| {
        k.iter_mut().for_each(|v| *v = C64::default());
        apply_h(t, x, k);
        k.iter_mut().for_each(|v| *v *= minus_i);
    };
    for &target in times {
        if target < t - 1e-12 {
            return Err(Error::Domain("sample times must be ascending and non-negative".into()));
        }
        let span = target - t;
        let steps = (span / max_dt).ceil().max(0.0) as usize;
        let h = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            deriv(t, &psi, &mut k1);
            for i in 0..n {
                tmp[i] = psi[i] + 0.5 * h * k1[i];
            }
            deriv(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = psi[i] + 0.5 * h * k2[i];
            }
            deriv(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = psi[i] + h * k3[i];
            }
            deriv(t + h, &tmp, &mut k4);
            for i in 0..n {
                psi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        t = target;
        out.push(Array1::from(psi.clone()));
    }
    Ok(out)
}

/// Populations of a time-independent model from the fixed-step integrator.
pub fn rk4_populations(model: &DenseModel, times: &[f64], max_dt: f64) -> Result<Vec<f64>> {
    let h = &model.hamiltonian;
    let states = rk4_sample(&model.psi0, times, max_dt, |_, x, out| h.apply_add(real(1.0), x, out))?;
    Ok(states.iter().map(DenseModel::population_up).collect())
}

/// Interaction-picture chain model
/// `H_I(t) = Δσ_x + σ_z Σ_n (d_n(t) b_n + d_n*(t) b_n†)` with truncated ladder
/// operators.
#[derive(Clone, Debug)]
pub struct InteractionModel {
    dec: StarDecomposition,
    dims: Vec<usize>,
    system: SparseOperator,
    /// σ_z b_n and its adjoint per mode.
    lowering: Vec<(SparseOperator, SparseOperator)>,
}

impl InteractionModel {
    pub fn new(coeffs: &ChainCoefficients, sys: &SpinBosonSystem, n_chain: usize, local_dim: usize) -> Result<Self> {
        let coeffs = coeffs.truncated(n_chain + 1)?;
        let dec = StarDecomposition::from_chain(&coeffs)?;
        let dims = guard_dims(n_chain + 1, local_dim)?;
        let system = SparseOperator::from_local_terms(&dims, &[(real(1.0), vec![(0, sys.system_hamiltonian())])]);
        let lowering = (0..=n_chain)
            .map(|n| {
                let op = SparseOperator::from_local_terms(
                    &dims,
                    &[(real(1.0), vec![(0, sys.coupling_operator()), (n + 1, annihilation(local_dim))])],
                );
                let adj = op.adjoint();
                (op, adj)
            })
            .collect();
        Ok(Self { dec, dims, system, lowering })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn apply(&self, t: f64, x: &[C64], out: &mut [C64]) {
        self.system.apply_add(real(1.0), x, out);
        let d = self.dec.couplings_ic(t);
        for ((op, adj), dn) in self.lowering.iter().zip(d.iter()) {
            op.apply_add(*dn, x, out);
            adj.apply_add(dn.conj(), x, out);
        }
    }

    pub fn populations(&self, times: &[f64], max_dt: f64) -> Result<Vec<f64>> {
        let dim: usize = self.dims.iter().product();
        let states = rk4_sample(&up_vacuum(dim), times, max_dt, |t, x, out| self.apply(t, x, out))?;
        Ok(states.iter().map(DenseModel::population_up).collect())
    }
}

/// Default integrator step for the interaction-picture reference.
pub const IC_REFERENCE_DT: f64 = 1e-3;

/// Reference populations for `scheme` on the truncated model it propagates:
/// the chain Hamiltonian for C, the star Hamiltonian in star order for S and
/// the interaction-picture Hamiltonian for IC.
pub fn scheme_reference(
    scheme: Scheme,
    coeffs: &ChainCoefficients,
    sys: &SpinBosonSystem,
    n_chain: usize,
    local_dim: usize,
    times: &[f64],
) -> Result<Vec<f64>> {
    match scheme {
        Scheme::Chain => exact_populations(&dense_hamiltonian(coeffs, sys, n_chain, local_dim)?, times),
        Scheme::Star => {
            let dec = StarDecomposition::from_chain(&coeffs.truncated(n_chain + 1)?)?;
            let model = dense_star_hamiltonian(&dec, sys, &dec.star_order(), local_dim)?;
            exact_populations(&model, times)
        }
        Scheme::InteractionChain => {
            let scale = sys.delta.abs().max(coeffs.kappas.iter().chain(&coeffs.omegas).fold(0.0f64, |m, v| m.max(v.abs())));
            let max_dt = IC_REFERENCE_DT / scale.max(1.0);
            InteractionModel::new(coeffs, sys, n_chain, local_dim)?.populations(times, max_dt)
        }
    }
}
