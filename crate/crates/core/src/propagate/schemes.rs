//! One-step propagators for the three geometries.
//!
//! Site layout at the start and end of every step is `(spin, bath_0, …, bath_N)`.
//! The star and interaction-picture steps carry the spin through the chain
//! with swap gates and bring it back, so each of their steps is a palindromic
//! product of spin–mode gates:
//!
//! ```text
//! [S]G_0  [S]G_1 … [S]G_{N−1}  G_N G_N  G_{N−1}[S] … G_1[S]  G_0[S]
//! ```

use num_complex::Complex64 as C64;

use crate::chainmap::{ChainCoefficients, StarDecomposition};
use crate::error::Result;
use crate::mps::{TwoSiteGate, VidalMps};

use super::gates::{annihilation, creation, gate_from_hamiltonian, identity, number, TwoSiteHamiltonian};
use super::SpinBosonSystem;

/// Accumulated cost and truncation of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub discarded_weight: f64,
    pub svd_seconds: f64,
    pub gates: usize,
}

impl StepStats {
    fn record(&mut self, report: crate::mps::TruncationReport) {
        self.discarded_weight += report.discarded_weight;
        self.svd_seconds += report.svd_seconds;
        self.gates += 1;
    }
}

pub trait Stepper: Send {
    /// Advances `state` from `t` to `t + dt`.
    fn step(&mut self, state: &mut VidalMps, t: f64) -> Result<StepStats>;
}

/// `h_s·H_s ⊗ 1 + A_s ⊗ (c b + c* b†) + ω 1 ⊗ b†b` on (spin, mode), or the
/// same operator with the factors exchanged when `spin_first` is false.
pub(crate) fn spin_mode_hamiltonian(
    sys: &SpinBosonSystem,
    with_hs: bool,
    coupling: C64,
    onsite: f64,
    d: usize,
    spin_first: bool,
) -> TwoSiteHamiltonian {
    let (hs, a_s) = (sys.system_hamiltonian(), sys.coupling_operator());
    let one = C64::new(1.0, 0.0);
    let b = annihilation(d);
    let bd = creation(d);
    let bath_op = b.mapv(|v| v * coupling) + bd.mapv(|v| v * coupling.conj());
    let mut h = if spin_first { TwoSiteHamiltonian::new(2, d) } else { TwoSiteHamiltonian::new(d, 2) };
    if spin_first {
        if with_hs {
            h.add_product(one, &hs, &identity(d));
        }
        h.add_product(one, &a_s, &bath_op);
        h.add_product(C64::new(onsite, 0.0), &identity(2), &number(d));
    } else {
        if with_hs {
            h.add_product(one, &identity(d), &hs);
        }
        h.add_product(one, &bath_op, &a_s);
        h.add_product(C64::new(onsite, 0.0), &number(d), &identity(2));
    }
    h
}

/// Schrödinger-picture chain: nearest-neighbour Strang splitting, half steps
/// on odd bonds around a full step on even bonds.
pub struct ChainStepper {
    odd: Vec<(usize, TwoSiteGate)>,
    even: Vec<(usize, TwoSiteGate)>,
}

impl ChainStepper {
    pub fn new(coeffs: &ChainCoefficients, sys: &SpinBosonSystem, d: usize, dt: f64) -> Result<Self> {
        let modes = coeffs.modes();
        // mode n is shared between bonds n and n+1 except the last one
        let share = |n: usize| if n + 1 == modes { 1.0 } else { 0.5 };
        let mut odd = Vec::new();
        let mut even = Vec::new();
        for bond in 0..modes {
            let h = if bond == 0 {
                spin_mode_hamiltonian(sys, true, C64::new(coeffs.kappas[0], 0.0), share(0) * coeffs.omegas[0], d, true)
            } else {
                let (left, right) = (bond - 1, bond);
                let kappa = C64::new(coeffs.kappas[bond], 0.0);
                let mut h = TwoSiteHamiltonian::new(d, d);
                h.add_product(kappa, &annihilation(d), &creation(d))
                    .add_product(kappa, &creation(d), &annihilation(d))
                    .add_product(C64::new(share(left) * coeffs.omegas[left], 0.0), &number(d), &identity(d))
                    .add_product(C64::new(share(right) * coeffs.omegas[right], 0.0), &identity(d), &number(d));
                h
            };
            if bond % 2 == 0 {
                even.push((bond, gate_from_hamiltonian(&h, dt)?));
            } else {
                odd.push((bond, gate_from_hamiltonian(&h, 0.5 * dt)?));
            }
        }
        Ok(Self { odd, even })
    }
}

impl Stepper for ChainStepper {
    fn step(&mut self, state: &mut VidalMps, _t: f64) -> Result<StepStats> {
        let mut stats = StepStats::default();
        for (bond, gate) in self.odd.iter().chain(&self.even).chain(&self.odd) {
            stats.record(state.apply_two_site_gate(*bond, gate, false)?);
        }
        Ok(stats)
    }
}

fn sweep(
    state: &mut VidalMps,
    forward: &[TwoSiteGate],
    center: &TwoSiteGate,
    backward: &[TwoSiteGate],
) -> Result<StepStats> {
    let mut stats = StepStats::default();
    for (bond, gate) in forward.iter().enumerate() {
        stats.record(state.apply_two_site_gate(bond, gate, true)?);
    }
    stats.record(state.apply_two_site_gate(forward.len(), center, false)?);
    for (bond, gate) in backward.iter().enumerate().rev() {
        stats.record(state.apply_two_site_gate(bond, gate, true)?);
    }
    Ok(stats)
}

/// Schrödinger-picture star geometry, normal modes ordered by |λ_k| with the
/// slowest next to the spin. Each spin–mode gate carries the mode's free
/// evolution `λ_k a†a`.
pub struct StarStepper {
    order: Vec<usize>,
    forward: Vec<TwoSiteGate>,
    center: TwoSiteGate,
    backward: Vec<TwoSiteGate>,
}

impl StarStepper {
    pub fn new(dec: &StarDecomposition, sys: &SpinBosonSystem, d: usize, dt: f64) -> Result<Self> {
        let order = dec.star_order();
        let g = dec.couplings_star();
        let term = |pos: usize, spin_first: bool| {
            let k = order[pos];
            spin_mode_hamiltonian(sys, pos == 0, C64::new(g[k], 0.0), dec.lambdas[k], d, spin_first)
        };
        let last = order.len() - 1;
        let mut forward = Vec::with_capacity(last);
        let mut backward = Vec::with_capacity(last);
        for pos in 0..last {
            forward.push(gate_from_hamiltonian(&term(pos, true), 0.5 * dt)?);
            backward.push(gate_from_hamiltonian(&term(pos, false), 0.5 * dt)?);
        }
        let center = gate_from_hamiltonian(&term(last, true), dt)?;
        Ok(Self { order, forward, center, backward })
    }

    /// Normal-mode index held by bath site `pos`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl Stepper for StarStepper {
    fn step(&mut self, state: &mut VidalMps, _t: f64) -> Result<StepStats> {
        sweep(state, &self.forward, &self.center, &self.backward)
    }
}

/// Interaction-picture chain: spin coupled to every chain mode through
/// d_n(t). The outward sweep uses d_n(t + dt/4), the return sweep
/// d_n(t + 3dt/4).
pub struct InteractionStepper {
    dec: StarDecomposition,
    sys: SpinBosonSystem,
    d: usize,
    dt: f64,
}

impl InteractionStepper {
    pub fn new(dec: &StarDecomposition, sys: &SpinBosonSystem, d: usize, dt: f64) -> Self {
        Self { dec: dec.clone(), sys: *sys, d, dt }
    }

    /// Gates of the step starting at `t`: outward, turning, return.
    pub fn gates(&self, t: f64) -> Result<(Vec<TwoSiteGate>, TwoSiteGate, Vec<TwoSiteGate>)> {
        let out = self.dec.couplings_ic(t + 0.25 * self.dt);
        let back = self.dec.couplings_ic(t + 0.75 * self.dt);
        let half = 0.5 * self.dt;
        let last = self.dec.modes() - 1;
        let gate = |n: usize, c: C64, spin_first: bool| {
            gate_from_hamiltonian(&spin_mode_hamiltonian(&self.sys, n == 0, c, 0.0, self.d, spin_first), half)
        };
        let mut forward = Vec::with_capacity(last);
        let mut backward = Vec::with_capacity(last);
        for n in 0..last {
            forward.push(gate(n, out[n], true)?);
            backward.push(gate(n, back[n], false)?);
        }
        let center = gate(last, back[last], true)?.compose(&gate(last, out[last], true)?)?;
        Ok((forward, center, backward))
    }
}

impl Stepper for InteractionStepper {
    fn step(&mut self, state: &mut VidalMps, t: f64) -> Result<StepStats> {
        let (forward, center, backward) = self.gates(t)?;
        sweep(state, &forward, &center, &backward)
    }
}
