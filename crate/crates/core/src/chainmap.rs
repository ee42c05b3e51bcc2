//! Chain mapping of a bosonic bath.
//!
//! The weight h²(ω) defines a family of orthonormal polynomials p_n whose
//! three-term recurrence
//!
//! ```text
//! κ_{n+1} p_{n+1}(x) = (x − ω_n) p_n(x) − κ_n p_{n−1}(x),   p_{−1} = 0,  p_0 = 1/κ_0
//! ```
//!
//! supplies the on-site frequencies ω_n and hoppings κ_n of the equivalent
//! nearest-neighbour chain, with κ_0² = ∫h². The coefficients are obtained by
//! discretizing the weight with a composite Gauss–Legendre rule and running
//! the Stieltjes procedure on the discrete measure (a Lanczos iteration on
//! diag(nodes) with full reorthogonalization).
//!
//! Truncating the chain after N+1 modes gives the tridiagonal bath matrix
//! `M` with `H_b = b† M b`. Its eigendecomposition `M = Pᵀ Λ P` (rows of `P`
//! are eigenvectors) yields the star couplings `g_k = κ_0 P_{k,0}` and the
//! interaction-picture couplings `d_n(t) = κ_0 Σ_k P_{k,0} P_{k,n} e^{−iλ_k t}`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_gauss_legendre, QuadratureRule};
use crate::spectral::Weight;

/// Points per Gauss–Legendre panel in [`discretize_measure`].
pub const PANEL_ORDER: usize = 16;

/// Default number of discretization points for a chain of `modes` sites.
pub fn default_quad_points(modes: usize) -> usize {
    2000usize.max(20 * modes)
}

/// Discretizes `weight` into at least `num_points` nodes of a composite
/// Gauss–Legendre rule, scaling each quadrature weight by h²(node).
///
/// `modes` is the requested chain length N+1; at least `2·modes` points are
/// required.
pub fn discretize_measure<W: Weight + ?Sized>(
    weight: &W,
    num_points: usize,
    modes: usize,
) -> Result<QuadratureRule> {
    if modes == 0 {
        return Err(Error::config("N", "chain needs at least one mode"));
    }
    if num_points < 2 * modes {
        return Err(Error::config(
            "quad_points",
            format!("{num_points} points cannot resolve {modes} chain modes (need >= {})", 2 * modes),
        ));
    }
    let (lo, hi) = weight.domain();
    if !(hi > lo) {
        return Err(Error::Domain(format!("empty weight domain [{lo}, {hi}]")));
    }
    let (panels, order) = if num_points <= PANEL_ORDER {
        (1, num_points)
    } else {
        (num_points.div_ceil(PANEL_ORDER), PANEL_ORDER)
    };
    let mut rule = composite_gauss_legendre(lo, hi, panels, order);
    for (w, &x) in rule.weights.iter_mut().zip(&rule.nodes) {
        let h2 = weight.density(x);
        if !(h2 >= 0.0 && h2.is_finite()) {
            return Err(Error::Domain(format!("weight h²({x}) = {h2} is not a finite non-negative value")));
        }
        *w *= h2;
    }
    Ok(rule)
}

/// On-site frequencies ω_0..ω_N and couplings κ_0..κ_N of a truncated chain.
/// κ_0 couples the system to mode 0; κ_n (n ≥ 1) couples modes n−1 and n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCoefficients {
    pub omegas: Vec<f64>,
    pub kappas: Vec<f64>,
}

impl ChainCoefficients {
    pub fn new(omegas: Vec<f64>, kappas: Vec<f64>) -> Result<Self> {
        let c = Self { omegas, kappas };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omegas.is_empty() || self.omegas.len() != self.kappas.len() {
            return Err(Error::Domain(format!(
                "chain needs matching non-empty omegas/kappas, got {} and {}",
                self.omegas.len(),
                self.kappas.len()
            )));
        }
        if let Some(i) = self.omegas.iter().position(|w| !w.is_finite()) {
            return Err(Error::Domain(format!("omega_{i} is not finite")));
        }
        if let Some(i) = self.kappas.iter().position(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::Domain(format!("kappa_{i} = {} is not a finite non-negative value", self.kappas[i])));
        }
        Ok(())
    }

    /// Number of chain modes, N+1.
    pub fn modes(&self) -> usize {
        self.omegas.len()
    }

    pub fn kappa0(&self) -> f64 {
        self.kappas[0]
    }

    /// First `modes` sites of the chain.
    pub fn truncated(&self, modes: usize) -> Result<Self> {
        if modes == 0 || modes > self.modes() {
            return Err(Error::Domain(format!("cannot truncate a {}-mode chain to {modes}", self.modes())));
        }
        Ok(Self { omegas: self.omegas[..modes].to_vec(), kappas: self.kappas[..modes].to_vec() })
    }

    /// Recurrence coefficients of `p_{n+1} = (C_n x − A_n) p_n − B_n p_{n−1}`,
    /// returned as `(A_n, B_n, C_n)` for `n < N`.
    pub fn recurrence(&self, n: usize) -> Option<(f64, f64, f64)> {
        let next = *self.kappas.get(n + 1)?;
        Some((self.omegas[n] / next, self.kappas[n] / next, 1.0 / next))
    }

    /// Orthonormal polynomial values p_0(x)..p_N(x) from the recurrence.
    pub fn polynomials(&self, x: f64) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.modes());
        let mut prev = 0.0;
        let mut cur = 1.0 / self.kappas[0];
        p.push(cur);
        for n in 0..self.modes() - 1 {
            let (a, b, c) = self.recurrence(n).unwrap();
            let next = (c * x - a) * cur - b * prev;
            prev = cur;
            cur = next;
            p.push(cur);
        }
        p
    }
}

/// Stieltjes procedure on a discrete measure, producing `N+1` chain modes.
pub fn stieltjes_recurrence(rule: &QuadratureRule, modes: usize) -> Result<ChainCoefficients> {
    let m = rule.len();
    if modes == 0 {
        return Err(Error::config("N", "chain needs at least one mode"));
    }
    if 2 * modes > m {
        return Err(Error::config(
            "quad_points",
            format!("{m} quadrature points cannot resolve {modes} modes"),
        ));
    }
    if let Some(i) = rule.weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::Domain(format!("quadrature weight {i} is negative or non-finite")));
    }
    let total: f64 = rule.weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Breakdown { index: 0, msg: format!("total weight {total} is not positive") });
    }
    let kappa0 = total.sqrt();
    let x = &rule.nodes;

    // q_n(x_i) sqrt(w_i): orthonormal in the Euclidean inner product
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(modes);
    basis.push(rule.weights.iter().map(|w| w.sqrt() / kappa0).collect());
    let mut omegas = Vec::with_capacity(modes);
    let mut kappas = vec![kappa0];
    for n in 0..modes {
        let v = &basis[n];
        let alpha: f64 = v.iter().zip(x).map(|(vi, xi)| xi * vi * vi).sum();
        if !alpha.is_finite() {
            return Err(Error::Breakdown { index: n, msg: "non-finite on-site frequency".into() });
        }
        omegas.push(alpha);
        if n + 1 == modes {
            break;
        }
        let mut r: Vec<f64> = v.iter().zip(x).map(|(vi, xi)| (xi - alpha) * vi).collect();
        if n > 0 {
            let beta = kappas[n];
            for (ri, pi) in r.iter_mut().zip(&basis[n - 1]) {
                *ri -= beta * pi;
            }
        }
        // two passes of classical Gram–Schmidt against every previous vector
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&r).map(|(a, b)| a * b).sum();
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= c * qi;
                }
            }
        }
        let kappa = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(kappa > 0.0 && kappa.is_finite()) || kappa <= 1e-13 * kappas[n].max(alpha.abs()) {
            return Err(Error::Breakdown { index: n + 1, msg: format!("hopping {kappa:e} is not positive") });
        }
        kappas.push(kappa);
        basis.push(r.into_iter().map(|v| v / kappa).collect());
    }
    ChainCoefficients::new(omegas, kappas)
}

/// Chain coefficients for `modes` sites from a discretization of `weight`
/// with `quad_points` nodes, defaulting to [`default_quad_points`].
pub fn chain_coefficients<W: Weight + ?Sized>(
    weight: &W,
    modes: usize,
    quad_points: Option<usize>,
) -> Result<ChainCoefficients> {
    let rule = discretize_measure(weight, quad_points.unwrap_or_else(|| default_quad_points(modes)), modes)?;
    stieltjes_recurrence(&rule, modes)
}

/// Symmetric tridiagonal matrix stored by its diagonal and sub-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalMatrix {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::Domain(format!(
                "tridiagonal matrix needs n diagonal and n-1 off-diagonal entries, got {} and {}",
                diag.len(),
                offdiag.len()
            )));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.dim();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            m[[i, i]] = self.diag[i];
        }
        for (i, &e) in self.offdiag.iter().enumerate() {
            m[[i, i + 1]] = e;
            m[[i + 1, i]] = e;
        }
        m
    }

    /// Eigenvalues (ascending) and the matrix whose rows are the matching
    /// unit eigenvectors, from implicit-shift QL iteration.
    pub fn eigen(&self) -> Result<(Vec<f64>, Array2<f64>)> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = vec![0.0; n];
        e[..n - 1].copy_from_slice(&self.offdiag);
        // columns of v accumulate the eigenvectors
        let mut v = Array2::<f64>::eye(n);
        tql2(&mut d, &mut e, &mut v)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let lambdas: Vec<f64> = order.iter().map(|&k| d[k]).collect();
        let mut p = Array2::zeros((n, n));
        for (row, &k) in order.iter().enumerate() {
            let col = v.column(k);
            let scale = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let lead = col.iter().copied().find(|x| x.abs() > 1e-10 * scale).unwrap_or(1.0);
            let sign = if lead < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                p[[row, j]] = sign * col[j];
            }
        }
        Ok((lambdas, p))
    }
}

/// QL iteration with implicit shifts on a symmetric tridiagonal matrix.
/// On entry `d` is the diagonal and `e[..n-1]` the sub-diagonal; on exit `d`
/// holds the eigenvalues and the columns of `v` the eigenvectors.
fn tql2(d: &mut [f64], e: &mut [f64], v: &mut Array2<f64>) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Numerical(format!("QL iteration did not converge for eigenvalue {l}")));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// The bath matrix M: diagonal ω_0..ω_N, off-diagonal κ_1..κ_N.
pub fn build_tridiagonal(coeffs: &ChainCoefficients) -> Result<TridiagonalMatrix> {
    coeffs.validate()?;
    TridiagonalMatrix::new(coeffs.omegas.clone(), coeffs.kappas[1..].to_vec())
}

/// Normal modes of the truncated chain.
#[derive(Clone, Debug, PartialEq)]
pub struct StarDecomposition {
    /// Normal-mode frequencies, ascending.
    pub lambdas: Vec<f64>,
    /// Orthogonal matrix with `M = Pᵀ diag(λ) P`; row k is normal mode k
    /// expressed in chain modes.
    pub p: Array2<f64>,
    pub kappa0: f64,
}

/// Diagonalizes M; the first non-negligible component of every eigenvector is
/// made positive so the decomposition is reproducible.
pub fn diagonalize_tridiagonal(m: &TridiagonalMatrix, kappa0: f64) -> Result<StarDecomposition> {
    let (lambdas, p) = m.eigen()?;
    Ok(StarDecomposition { lambdas, p, kappa0 })
}

impl StarDecomposition {
    pub fn from_chain(coeffs: &ChainCoefficients) -> Result<Self> {
        diagonalize_tridiagonal(&build_tridiagonal(coeffs)?, coeffs.kappa0())
    }

    pub fn modes(&self) -> usize {
        self.lambdas.len()
    }

    /// `Pᵀ diag(λ) P`
    pub fn reconstruct(&self) -> Array2<f64> {
        let mut scaled = self.p.clone();
        for (mut row, &l) in scaled.rows_mut().into_iter().zip(&self.lambdas) {
            row *= l;
        }
        self.p.t().dot(&scaled)
    }

    /// Interaction-picture couplings d_n(t), n = 0..N.
    pub fn couplings_ic(&self, t: f64) -> Array1<C64> {
        let n = self.modes();
        let mut d = Array1::<C64>::zeros(n);
        for k in 0..n {
            let phase = C64::from_polar(self.kappa0 * self.p[[k, 0]], -self.lambdas[k] * t);
            for (dn, &pkn) in d.iter_mut().zip(self.p.row(k)) {
                *dn += phase * pkn;
            }
        }
        d
    }

    /// Star couplings g_k = κ_0 P_{k,0}.
    pub fn couplings_star(&self) -> Vec<f64> {
        self.p.column(0).iter().map(|&x| self.kappa0 * x).collect()
    }

    /// Normal modes ordered by |λ_k| ascending (ties by index).
    pub fn star_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.modes()).collect();
        order.sort_by(|&a, &b| self.lambdas[a].abs().total_cmp(&self.lambdas[b].abs()).then(a.cmp(&b)));
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::FlatWeight;

    fn legendre_chain(modes: usize) -> ChainCoefficients {
        let w = FlatWeight { lower: -1.0, upper: 1.0 };
        let rule = discretize_measure(&w, 256, modes).unwrap();
        stieltjes_recurrence(&rule, modes).unwrap()
    }

    #[test]
    fn flat_measure_gives_legendre_coefficients() {
        let c = legendre_chain(3);
        assert!(c.omegas.iter().all(|w| w.abs() < 1e-12));
        let expected = [2f64.sqrt(), 1.0 / 3f64.sqrt(), 2.0 / 15f64.sqrt()];
        for (k, e) in c.kappas.iter().zip(expected) {
            assert!((k - e).abs() < 1e-12, "{k} vs {e}");
        }
    }

    #[test]
    fn too_few_points_is_a_configuration_error() {
        let w = FlatWeight { lower: -1.0, upper: 1.0 };
        assert!(matches!(discretize_measure(&w, 1, 4), Err(Error::Config { .. })));
        let rule = discretize_measure(&w, 8, 4).unwrap();
        assert!(matches!(stieltjes_recurrence(&rule, 5), Err(Error::Config { .. })));
    }

    #[test]
    fn exhausted_measure_breaks_down_with_index() {
        // a 3-point measure supports only 3 orthogonal polynomials
        let rule = QuadratureRule { nodes: vec![-1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], weights: vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0] };
        match stieltjes_recurrence(&rule, 4) {
            Err(Error::Breakdown { index, .. }) => assert_eq!(index, 3),
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    #[test]
    fn polynomials_are_orthonormal_under_the_measure() {
        let w = FlatWeight { lower: -1.0, upper: 1.0 };
        let rule = discretize_measure(&w, 256, 6).unwrap();
        let c = stieltjes_recurrence(&rule, 6).unwrap();
        let mut gram = Array2::<f64>::zeros((6, 6));
        for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let p = c.polynomials(x);
            for i in 0..6 {
                for j in 0..6 {
                    gram[[i, j]] += wt * p[i] * p[j];
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - e).abs() < 1e-12);
            }
        }
        let (a, b, cc) = c.recurrence(0).unwrap();
        assert!((cc - 1.0 / c.kappas[1]).abs() < 1e-15);
        assert!((b - c.kappas[0] / c.kappas[1]).abs() < 1e-15);
        assert!(a.abs() < 1e-12);
        assert!(c.recurrence(5).is_none());
    }

    #[test]
    fn tridiagonal_placement() {
        let c = ChainCoefficients::new(vec![0.0, 0.0], vec![3.0, 1.0]).unwrap();
        let m = build_tridiagonal(&c).unwrap().to_dense();
        assert_eq!(m, ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
        let single = ChainCoefficients::new(vec![0.7], vec![2.0]).unwrap();
        assert_eq!(build_tridiagonal(&single).unwrap().to_dense(), ndarray::array![[0.7]]);
        let leg = legendre_chain(3);
        let m = build_tridiagonal(&leg).unwrap();
        assert!((m.offdiag[0] - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((m.offdiag[1] - 2.0 / 15f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_eigenpairs() {
        let m = TridiagonalMatrix::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        let dec = diagonalize_tridiagonal(&m, 1.0).unwrap();
        assert!((dec.lambdas[0] + 1.0).abs() < 1e-15 && (dec.lambdas[1] - 1.0).abs() < 1e-15);
        let r = 0.5f64.sqrt();
        assert!((dec.p[[0, 0]] - r).abs() < 1e-15 && (dec.p[[0, 1]] + r).abs() < 1e-15);
        assert!((dec.p[[1, 0]] - r).abs() < 1e-15 && (dec.p[[1, 1]] - r).abs() < 1e-15);
    }

    #[test]
    fn diagonal_matrix_gives_permutation() {
        let m = TridiagonalMatrix::new(vec![3.0, -1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let dec = diagonalize_tridiagonal(&m, 1.0).unwrap();
        assert_eq!(dec.lambdas, vec![-1.0, 2.0, 3.0]);
        let expected = ndarray::array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        assert_eq!(dec.p, expected);
    }

    #[test]
    fn couplings_two_mode_analytic() {
        let kappa = 0.8;
        let kappa0 = 1.3;
        let c = ChainCoefficients::new(vec![0.0, 0.0], vec![kappa0, kappa]).unwrap();
        let dec = StarDecomposition::from_chain(&c).unwrap();
        for &t in &[0.0, 0.3, 1.7, 12.0] {
            let d = dec.couplings_ic(t);
            assert!((d[0] - C64::new(kappa0 * (kappa * t).cos(), 0.0)).norm() < 1e-14);
            assert!((d[1] - C64::new(0.0, -kappa0 * (kappa * t).sin())).norm() < 1e-14);
        }
        let g = dec.couplings_star();
        let r = kappa0 * 0.5f64.sqrt();
        assert!((g[0].abs() - r).abs() < 1e-14 && (g[1].abs() - r).abs() < 1e-14);
    }

    #[test]
    fn single_mode_star_coupling() {
        let c = ChainCoefficients::new(vec![0.4], vec![1.5]).unwrap();
        let dec = StarDecomposition::from_chain(&c).unwrap();
        assert_eq!(dec.couplings_star(), vec![1.5]);
        assert_eq!(dec.lambdas, vec![0.4]);
    }

    #[test]
    fn star_order_sorts_by_absolute_frequency() {
        let dec = StarDecomposition {
            lambdas: vec![-3.0, -0.5, 0.2, 1.0, 2.5],
            p: Array2::eye(5),
            kappa0: 1.0,
        };
        assert_eq!(dec.star_order(), vec![2, 1, 3, 4, 0]);
    }
}
