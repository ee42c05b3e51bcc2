//! Matrix product states in Vidal form.
//!
//! ```text
//! Γ[0] -- s[0] -- Γ[1] -- s[1] -- ... -- s[n-2] -- Γ[n-1]
//!  |               |                                |
//! σ_0             σ_1                            σ_{n-1}
//! ```
//!
//! Every Γ tensor is stored with index order (left bond, physical, right
//! bond); the singular-value vector `s[b]` sits on bond `b` between sites `b`
//! and `b+1`. Boundary bonds have dimension one and carry no vector.
//!
//! A two-site update on bond `b` contracts
//! `Θ = s[b-1] Γ[b] s[b] Γ[b+1] s[b+1]`, applies the gate, optionally
//! exchanges the two physical legs, splits `Θ` by SVD, truncates, and restores
//! the Γ tensors by dividing out the outer singular values `s[b-1]`, `s[b+1]`.

use std::time::Instant;

use ndarray::{s, Array1, Array2, Array3, Axis};
use ndarray_linalg::{JobSvd, SVDDC, SVD};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outer singular values below this cannot be inverted when restoring Γ;
/// freshly computed singular values below it are always discarded.
pub const SV_FLOOR: f64 = 1e-14;

/// Rows and columns of Θ lighter than `(sv_threshold · PRUNE_FACTOR)²` of
/// its weight are left out of the SVD.
pub const PRUNE_FACTOR: f64 = 1e-2;

/// Largest state vector [`VidalMps::to_state_vector`] will build.
pub const MAX_DENSE_DIM: usize = 1 << 24;

/// Singular-value truncation policy: drop values below `sv_threshold`, then
/// keep at most `max_bond`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub sv_threshold: f64,
    pub max_bond: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { sv_threshold: 1e-3, max_bond: 1000 }
    }
}

impl Truncation {
    /// Keeps everything above [`SV_FLOOR`].
    pub fn none() -> Self {
        Self { sv_threshold: 0.0, max_bond: usize::MAX }
    }
}

/// Outcome of one two-site update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TruncationReport {
    /// `1 − Σ retained s²` with `s` normalized to the norm of Θ.
    pub discarded_weight: f64,
    pub bond_dim: usize,
    pub svd_seconds: f64,
}

/// One diagonal block of a gate: `matrix` acts on the composite indices
/// `indices` and leaves the others untouched.
#[derive(Clone, Debug, PartialEq)]
pub struct GateBlock {
    pub indices: Vec<usize>,
    pub matrix: Array2<C64>,
}

/// A two-site operator `M_{ij}^{i'j'}`, stored as a matrix with row index
/// `i'·d2 + j'` and column index `i·d2 + j`. Operators that conserve a
/// quantum number are kept as a set of disjoint blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSiteGate {
    dims: (usize, usize),
    blocks: Vec<GateBlock>,
}

impl TwoSiteGate {
    pub fn from_dense(matrix: Array2<C64>, d1: usize, d2: usize) -> Result<Self> {
        let n = d1 * d2;
        if matrix.dim() != (n, n) {
            return Err(Error::Domain(format!(
                "gate of shape {:?} does not act on dimensions ({d1}, {d2})",
                matrix.dim()
            )));
        }
        Ok(Self { dims: (d1, d2), blocks: vec![GateBlock { indices: (0..n).collect(), matrix }] })
    }

    /// `blocks` must partition `0..d1·d2`.
    pub fn from_blocks(d1: usize, d2: usize, blocks: Vec<GateBlock>) -> Result<Self> {
        let n = d1 * d2;
        let mut seen = vec![false; n];
        for b in &blocks {
            if b.matrix.dim() != (b.indices.len(), b.indices.len()) {
                return Err(Error::Domain("gate block shape does not match its index set".into()));
            }
            for &i in &b.indices {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Domain(format!("gate block index {i} out of range or repeated")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Domain("gate blocks do not cover the two-site space".into()));
        }
        Ok(Self { dims: (d1, d2), blocks })
    }

    pub fn identity(d1: usize, d2: usize) -> Self {
        let blocks = (0..d1 * d2)
            .map(|i| GateBlock { indices: vec![i], matrix: Array2::eye(1) })
            .collect();
        Self { dims: (d1, d2), blocks }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn blocks(&self) -> &[GateBlock] {
        &self.blocks
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.dims.0 * self.dims.1;
        let mut m = Array2::zeros((n, n));
        for b in &self.blocks {
            for (r, &i) in b.indices.iter().enumerate() {
                for (c, &j) in b.indices.iter().enumerate() {
                    m[[i, j]] = b.matrix[[r, c]];
                }
            }
        }
        m
    }

    /// The gate `self · first` (apply `first`, then `self`) as one dense block.
    pub fn compose(&self, first: &TwoSiteGate) -> Result<TwoSiteGate> {
        if self.dims != first.dims {
            return Err(Error::Domain("cannot compose gates on different dimensions".into()));
        }
        TwoSiteGate::from_dense(self.to_dense().dot(&first.to_dense()), self.dims.0, self.dims.1)
    }

    /// max |G†G − 1| over all blocks.
    pub fn unitarity_error(&self) -> f64 {
        let mut err = 0.0f64;
        for b in &self.blocks {
            let g = &b.matrix;
            let gg = g.t().mapv(|x| x.conj()).dot(g);
            for ((i, j), v) in gg.indexed_iter() {
                let e = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                err = err.max((v - e).norm());
            }
        }
        err
    }

    /// Applies the gate to `phi`, whose rows are composite physical indices.
    fn apply_rows(&self, phi: &Array2<C64>) -> Array2<C64> {
        let cols = phi.ncols();
        let mut out = Array2::<C64>::zeros(phi.raw_dim());
        for b in &self.blocks {
            if b.indices.len() == 1 {
                let i = b.indices[0];
                let g = b.matrix[[0, 0]];
                out.row_mut(i).zip_mut_with(&phi.row(i), |o, &x| *o = g * x);
                continue;
            }
            let mut gathered = Array2::<C64>::zeros((b.indices.len(), cols));
            for (r, &i) in b.indices.iter().enumerate() {
                gathered.row_mut(r).assign(&phi.row(i));
            }
            let res = b.matrix.dot(&gathered);
            for (r, &i) in b.indices.iter().enumerate() {
                out.row_mut(i).assign(&res.row(r));
            }
        }
        out
    }
}

/// Vidal-form matrix product state.
#[derive(Clone, Debug, PartialEq)]
pub struct VidalMps {
    site_dims: Vec<usize>,
    gammas: Vec<Array3<C64>>,
    svals: Vec<Array1<f64>>,
    pub truncation: Truncation,
}

impl VidalMps {
    /// The product state `|basis[0]⟩ ⊗ |basis[1]⟩ ⊗ …`.
    pub fn product_state(site_dims: &[usize], basis: &[usize], truncation: Truncation) -> Result<Self> {
        if site_dims.is_empty() || site_dims.len() != basis.len() {
            return Err(Error::Domain(format!(
                "need one basis index per site, got {} dims and {} indices",
                site_dims.len(),
                basis.len()
            )));
        }
        let mut gammas = Vec::with_capacity(site_dims.len());
        for (site, (&d, &k)) in site_dims.iter().zip(basis).enumerate() {
            if k >= d {
                return Err(Error::Domain(format!("basis index {k} out of range for site {site} of dimension {d}")));
            }
            let mut g = Array3::zeros((1, d, 1));
            g[[0, k, 0]] = C64::new(1.0, 0.0);
            gammas.push(g);
        }
        let svals = vec![Array1::ones(1); site_dims.len() - 1];
        Ok(Self { site_dims: site_dims.to_vec(), gammas, svals, truncation })
    }

    pub fn num_sites(&self) -> usize {
        self.site_dims.len()
    }

    pub fn site_dims(&self) -> &[usize] {
        &self.site_dims
    }

    pub fn gamma(&self, site: usize) -> &Array3<C64> {
        &self.gammas[site]
    }

    pub fn singular_values(&self, bond: usize) -> &Array1<f64> {
        &self.svals[bond]
    }

    /// Retained singular values per bond, in site order.
    pub fn bond_profile(&self) -> Vec<usize> {
        self.svals.iter().map(|s| s.len()).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.svals.iter().map(|s| s.len()).max().unwrap_or(1)
    }

    fn left_svals(&self, site: usize) -> Array1<f64> {
        if site == 0 {
            Array1::ones(1)
        } else {
            self.svals[site - 1].clone()
        }
    }

    fn right_svals(&self, site: usize) -> Array1<f64> {
        if site + 1 == self.num_sites() {
            Array1::ones(1)
        } else {
            self.svals[site].clone()
        }
    }

    /// Applies `gate` to sites `bond`, `bond+1`; with `swap` the two physical
    /// legs are exchanged afterwards, so the sites trade places.
    pub fn apply_two_site_gate(&mut self, bond: usize, gate: &TwoSiteGate, swap: bool) -> Result<TruncationReport> {
        if bond + 1 >= self.num_sites() {
            return Err(Error::Domain(format!("bond {bond} out of range for {} sites", self.num_sites())));
        }
        let (d1, d2) = (self.site_dims[bond], self.site_dims[bond + 1]);
        if gate.dims() != (d1, d2) {
            return Err(Error::Domain(format!(
                "gate dims {:?} do not match sites ({d1}, {d2}) at bond {bond}",
                gate.dims()
            )));
        }
        let left = self.left_svals(bond);
        let right = self.right_svals(bond + 1);
        if let Some(&v) = left.iter().find(|&&v| v < SV_FLOOR) {
            return Err(Error::GaugeDegeneracy { bond: bond - 1, value: v });
        }
        if let Some(&v) = right.iter().find(|&&v| v < SV_FLOOR) {
            return Err(Error::GaugeDegeneracy { bond: bond + 1, value: v });
        }
        let mid = &self.svals[bond];
        let (dl, _, dm) = self.gammas[bond].dim();
        let (_, _, dr) = self.gammas[bond + 1].dim();

        // Θ[(a,i),(j,c)]
        let mut a = self.gammas[bond].clone();
        for (mut sl, &l) in a.axis_iter_mut(Axis(0)).zip(&left) {
            sl *= C64::new(l, 0.0);
        }
        for (mut sl, &m) in a.axis_iter_mut(Axis(2)).zip(mid) {
            sl *= C64::new(m, 0.0);
        }
        let mut b = self.gammas[bond + 1].clone();
        for (mut sl, &r) in b.axis_iter_mut(Axis(2)).zip(&right) {
            sl *= C64::new(r, 0.0);
        }
        let a = a.into_shape_with_order((dl * d1, dm)).expect("contiguous");
        let b = b.into_shape_with_order((dm, d2 * dr)).expect("contiguous");
        let theta = a.dot(&b);

        // Φ[(i,j),(a,c)]
        let theta4 = theta.into_shape_with_order((dl, d1, d2, dr)).expect("contiguous");
        let phi = theta4
            .permuted_axes([1, 2, 0, 3])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((d1 * d2, dl * dr))
            .expect("contiguous");
        let phi = gate.apply_rows(&phi);
        let phi4 = phi.into_shape_with_order((d1, d2, dl, dr)).expect("contiguous");
        let (da, db) = if swap { (d2, d1) } else { (d1, d2) };
        let order = if swap { [2, 1, 0, 3] } else { [2, 0, 1, 3] };
        let theta = phi4
            .permuted_axes(order)
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((dl * da, db * dr))
            .expect("contiguous");

        let start = Instant::now();
        let (u, s, vt, pruned) = self.pruned_svd(&theta)?;
        let svd_seconds = start.elapsed().as_secs_f64();

        let total = s.iter().map(|x| x * x).sum::<f64>() + pruned;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical(format!("two-site state on bond {bond} has norm² {total}")));
        }
        let norm = total.sqrt();
        let keep = s
            .iter()
            .take_while(|&&x| x / norm >= self.truncation.sv_threshold && x / norm > SV_FLOOR)
            .count()
            .min(self.truncation.max_bond)
            .max(1);
        let discarded = s.iter().skip(keep).map(|x| (x / norm).powi(2)).sum::<f64>() + pruned / total;
        let kept_norm = s.iter().take(keep).map(|x| x * x).sum::<f64>().sqrt();
        let new_s = s.slice(s![..keep]).mapv(|x| x / kept_norm);

        let u = u.slice(s![.., ..keep]).to_owned();
        let mut g1 = u.into_shape_with_order((dl, da, keep)).expect("contiguous");
        for (mut sl, &l) in g1.axis_iter_mut(Axis(0)).zip(&left) {
            sl *= C64::new(1.0 / l, 0.0);
        }
        let vt = vt.slice(s![..keep, ..]).to_owned();
        let mut g2 = vt.into_shape_with_order((keep, db, dr)).expect("contiguous");
        for (mut sl, &r) in g2.axis_iter_mut(Axis(2)).zip(&right) {
            sl *= C64::new(1.0 / r, 0.0);
        }
        self.gammas[bond] = g1;
        self.gammas[bond + 1] = g2;
        self.svals[bond] = new_s;
        if swap {
            self.site_dims.swap(bond, bond + 1);
        }
        Ok(TruncationReport { discarded_weight: discarded, bond_dim: keep, svd_seconds })
    }

    /// SVD of Θ restricted to the rows and columns whose weight exceeds
    /// `(sv_threshold · PRUNE_FACTOR)²` of the total; returns the weight
    /// left out as the last element.
    fn pruned_svd(&self, theta: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>, f64)> {
        let (m, n) = theta.dim();
        let row_w: Vec<f64> = theta.rows().into_iter().map(|r| r.iter().map(|v| v.norm_sqr()).sum()).collect();
        let total: f64 = row_w.iter().sum();
        let cut = total * (self.truncation.sv_threshold * PRUNE_FACTOR).powi(2);
        let rows: Vec<usize> = (0..m).filter(|&i| row_w[i] > cut).collect();
        let mut col_w = vec![0.0; n];
        for &i in &rows {
            for (w, v) in col_w.iter_mut().zip(theta.row(i)) {
                *w += v.norm_sqr();
            }
        }
        let cols: Vec<usize> = (0..n).filter(|&j| col_w[j] > cut).collect();
        if rows.is_empty() || cols.is_empty() || (rows.len() == m && cols.len() == n) {
            let (u, s, vt) = svd(theta)?;
            return Ok((u, s, vt, 0.0));
        }
        let sub = theta.select(Axis(0), &rows).select(Axis(1), &cols);
        let kept: f64 = sub.iter().map(|v| v.norm_sqr()).sum();
        let (us, s, vts) = svd(&sub)?;
        let k = s.len();
        let mut u = Array2::zeros((m, k));
        for (r, &i) in rows.iter().enumerate() {
            u.row_mut(i).assign(&us.row(r));
        }
        let mut vt = Array2::zeros((k, n));
        for (c, &j) in cols.iter().enumerate() {
            vt.column_mut(j).assign(&vts.column(c));
        }
        Ok((u, s, vt, (total - kept).max(0.0)))
    }

    /// Γ tensor with both neighbouring singular-value vectors absorbed.
    fn site_tensor(&self, site: usize) -> Array3<C64> {
        let left = self.left_svals(site);
        let right = self.right_svals(site);
        let mut a = self.gammas[site].clone();
        for (mut sl, &l) in a.axis_iter_mut(Axis(0)).zip(&left) {
            sl *= C64::new(l, 0.0);
        }
        for (mut sl, &r) in a.axis_iter_mut(Axis(2)).zip(&right) {
            sl *= C64::new(r, 0.0);
        }
        a
    }

    /// Single-site reduced density matrix from the Vidal-gauge environment.
    pub fn reduced_density_matrix(&self, site: usize) -> Result<Array2<C64>> {
        if site >= self.num_sites() {
            return Err(Error::Domain(format!("site {site} out of range")));
        }
        let a = self.site_tensor(site);
        let (dl, d, dr) = a.dim();
        let x = a
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((d, dl * dr))
            .expect("contiguous");
        Ok(x.dot(&x.t().mapv(|v| v.conj())))
    }

    /// ⟨ψ| op_site |ψ⟩ for a Hermitian `op`.
    pub fn local_expectation(&self, site: usize, op: &Array2<C64>) -> Result<f64> {
        if site >= self.num_sites() {
            return Err(Error::Domain(format!("site {site} out of range")));
        }
        let d = self.site_dims[site];
        if op.dim() != (d, d) {
            return Err(Error::Domain(format!("operator of shape {:?} on site of dimension {d}", op.dim())));
        }
        let scale = op.iter().fold(1.0f64, |m, v| m.max(v.norm()));
        for i in 0..d {
            for j in 0..=i {
                if (op[[i, j]] - op[[j, i]].conj()).norm() > 1e-12 * scale {
                    return Err(Error::Domain("observable is not Hermitian".into()));
                }
            }
        }
        let rho = self.reduced_density_matrix(site)?;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += rho[[i, j]] * op[[j, i]];
            }
        }
        Ok(acc.re)
    }

    /// Diagonal of the reduced density matrix at `site`.
    pub fn local_populations(&self, site: usize) -> Result<Vec<f64>> {
        let rho = self.reduced_density_matrix(site)?;
        Ok(rho.diag().iter().map(|v| v.re).collect())
    }

    /// ⟨ψ|ψ⟩ by full transfer-matrix contraction.
    pub fn norm_squared(&self) -> f64 {
        let mut env = Array2::<C64>::eye(1);
        for site in 0..self.num_sites() {
            let mut m = self.gammas[site].clone();
            for (mut sl, &r) in m.axis_iter_mut(Axis(2)).zip(&self.right_svals(site)) {
                sl *= C64::new(r, 0.0);
            }
            let (dl, d, dr) = m.dim();
            let m2 = m.into_shape_with_order((dl, d * dr)).expect("contiguous");
            let t = env.dot(&m2).into_shape_with_order((dl * d, dr)).expect("contiguous");
            let m_rows = m2.into_shape_with_order((dl * d, dr)).expect("contiguous");
            env = m_rows.t().mapv(|v| v.conj()).dot(&t);
        }
        env[[0, 0]].re
    }

    /// Dense state vector, first site most significant.
    pub fn to_state_vector(&self) -> Result<Array1<C64>> {
        let dim: usize = self.site_dims.iter().product();
        if dim > MAX_DENSE_DIM {
            return Err(Error::Domain(format!("state dimension {dim} too large for a dense vector")));
        }
        let mut psi = Array2::<C64>::eye(1);
        for site in 0..self.num_sites() {
            let mut m = self.gammas[site].clone();
            for (mut sl, &r) in m.axis_iter_mut(Axis(2)).zip(&self.right_svals(site)) {
                sl *= C64::new(r, 0.0);
            }
            let (dl, d, dr) = m.dim();
            let m2 = m.into_shape_with_order((dl, d * dr)).expect("contiguous");
            let rows = psi.nrows();
            psi = psi.dot(&m2).into_shape_with_order((rows * d, dr)).expect("contiguous");
        }
        Ok(psi.column(0).to_owned())
    }
}

/// Thin SVD; falls back to the QR-iteration driver if divide-and-conquer
/// fails.
fn svd(theta: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    if let Ok((Some(u), s, Some(vt))) = theta.svddc(JobSvd::Some) {
        if s.iter().all(|x| x.is_finite()) {
            return Ok((u, s, vt));
        }
    }
    let (u, s, vt) = theta.svd(true, true)?;
    let k = s.len();
    let u = u.ok_or_else(|| Error::Numerical("SVD returned no left vectors".into()))?;
    let vt = vt.ok_or_else(|| Error::Numerical("SVD returned no right vectors".into()))?;
    Ok((u.slice(s![.., ..k]).to_owned(), s, vt.slice(s![..k, ..]).to_owned()))
}
