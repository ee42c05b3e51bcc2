//! Trotterized time evolution of the spin-boson model in the chain (C),
//! interaction-picture chain (IC) and star (S) geometries.

pub mod gates;
pub mod schemes;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chainmap::{ChainCoefficients, StarDecomposition};
use crate::error::{Error, Result};
use crate::mps::{Truncation, VidalMps};

pub use schemes::{ChainStepper, InteractionStepper, StarStepper, StepStats, Stepper};

/// Zero-bias spin: `H_s = Δσ_x`, coupled to the bath through `A_s = σ_z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinBosonSystem {
    pub delta: f64,
}

impl SpinBosonSystem {
    pub const DIM: usize = 2;

    pub fn new(delta: f64) -> Self {
        Self { delta }
    }

    pub fn system_hamiltonian(&self) -> Array2<C64> {
        gates::sigma_x().mapv(|v| v * self.delta)
    }

    pub fn coupling_operator(&self) -> Array2<C64> {
        gates::sigma_z()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "C")]
    Chain,
    #[serde(rename = "IC")]
    InteractionChain,
    #[serde(rename = "S")]
    Star,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::InteractionChain, Scheme::Chain, Scheme::Star];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Chain => "C",
            Scheme::InteractionChain => "IC",
            Scheme::Star => "S",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C" => Ok(Scheme::Chain),
            "IC" => Ok(Scheme::InteractionChain),
            "S" => Ok(Scheme::Star),
            other => Err(Error::config("scheme", format!("unknown scheme `{other}` (expected C, IC or S)"))),
        }
    }
}

/// Placement of normal modes along the MPS in the star geometry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StarOrdering {
    #[default]
    AbsFrequencyAscending,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Index of the last chain mode; the bath has `n_chain + 1` modes.
    pub n_chain: usize,
    pub local_dim: usize,
    pub dt: f64,
    pub t_final: f64,
    pub truncation: Truncation,
    pub record_stride: usize,
    pub star_ordering: StarOrdering,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, n_chain: usize, local_dim: usize, dt: f64, t_final: f64) -> Self {
        Self {
            scheme,
            n_chain,
            local_dim,
            dt,
            t_final,
            truncation: Truncation::default(),
            record_stride: 1,
            star_ordering: StarOrdering::default(),
        }
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn modes(&self) -> usize {
        self.n_chain + 1
    }

    pub fn num_steps(&self) -> usize {
        if self.t_final <= 0.0 {
            0
        } else {
            (self.t_final / self.dt - 1e-9).ceil() as usize
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("t_final", format!("final time must be non-negative, got {}", self.t_final)));
        }
        if self.local_dim < 2 {
            return Err(Error::config("local_dim", format!("need at least 2 levels, got {}", self.local_dim)));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride", "stride must be at least 1"));
        }
        let t = &self.truncation;
        if !(t.sv_threshold >= 0.0 && t.sv_threshold < 1.0) {
            return Err(Error::config("sv_threshold", format!("threshold must lie in [0, 1), got {}", t.sv_threshold)));
        }
        if t.max_bond == 0 {
            return Err(Error::config("max_bond", "bond cap must be at least 1"));
        }
        Ok(())
    }
}

/// Observables sampled along one trajectory. Site `n+1` of the MPS holds
/// chain mode `n` in the C and IC schemes and the `n`-th mode of the star
/// ordering in the S scheme; `occupations` follow the site order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub scheme: Option<Scheme>,
    pub times: Vec<f64>,
    pub population_up: Vec<f64>,
    pub norm_sq: Vec<f64>,
    pub max_bond: Vec<usize>,
    pub bond_profiles: Vec<Vec<usize>>,
    pub occupations: Vec<Vec<f64>>,
    pub discarded_weight_cum: Vec<f64>,
    /// Wall time spent since the previous sample, in milliseconds.
    pub wall_ms: Vec<f64>,
    pub total_wall_seconds: f64,
    pub total_svd_seconds: f64,
    pub gates_applied: usize,
    /// Normal-mode index per bath site, S scheme only.
    pub star_order: Option<Vec<usize>>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_max_bond(&self) -> usize {
        self.max_bond.last().copied().unwrap_or(1)
    }

    /// Largest bond dimension seen at any sample.
    pub fn peak_bond(&self) -> usize {
        self.max_bond.iter().copied().max().unwrap_or(1)
    }

    /// Mean SVD seconds per Trotter step.
    pub fn svd_seconds_per_step(&self) -> f64 {
        let steps = self.times.last().zip(self.times.get(1)).map(|(t, dt)| (t / dt).round()).unwrap_or(0.0);
        if steps > 0.0 {
            self.total_svd_seconds / steps
        } else {
            0.0
        }
    }

    fn sample(&mut self, state: &VidalMps, t: f64, discarded: f64, wall_ms: f64) -> Result<()> {
        let pops = state.local_populations(0)?;
        let nb = gates::number(state.site_dims()[1]);
        let occupations = (1..state.num_sites()).map(|s| state.local_expectation(s, &nb)).collect::<Result<_>>()?;
        self.times.push(t);
        self.population_up.push(pops[0]);
        self.norm_sq.push(state.norm_squared());
        self.max_bond.push(state.max_bond_dim());
        self.bond_profiles.push(state.bond_profile());
        self.occupations.push(occupations);
        self.discarded_weight_cum.push(discarded);
        self.wall_ms.push(wall_ms);
        Ok(())
    }
}

/// Builds the stepper for `config.scheme` on the first `config.modes()` chain
/// modes of `coeffs`.
pub fn build_stepper(
    config: &SchemeConfig,
    system: &SpinBosonSystem,
    coeffs: &ChainCoefficients,
) -> Result<(Box<dyn Stepper>, Option<Vec<usize>>)> {
    config.validate()?;
    let coeffs = coeffs.truncated(config.modes())?;
    let d = config.local_dim;
    Ok(match config.scheme {
        Scheme::Chain => (Box::new(ChainStepper::new(&coeffs, system, d, config.dt)?), None),
        Scheme::InteractionChain => {
            let dec = StarDecomposition::from_chain(&coeffs)?;
            (Box::new(InteractionStepper::new(&dec, system, d, config.dt)), None)
        }
        Scheme::Star => {
            let dec = StarDecomposition::from_chain(&coeffs)?;
            let stepper = StarStepper::new(&dec, system, d, config.dt)?;
            let order = stepper.order().to_vec();
            (Box::new(stepper), Some(order))
        }
    })
}

/// The initial state |↑⟩ ⊗ |0…0⟩.
pub fn initial_state(config: &SchemeConfig) -> Result<VidalMps> {
    let mut dims = vec![config.local_dim; config.modes() + 1];
    dims[0] = SpinBosonSystem::DIM;
    VidalMps::product_state(&dims, &vec![0; dims.len()], config.truncation)
}

/// Propagates |↑⟩ ⊗ |0…0⟩ to `t_final`, sampling every `record_stride` steps
/// and after the last one.
pub fn run(config: &SchemeConfig, system: &SpinBosonSystem, coeffs: &ChainCoefficients) -> Result<TrajectoryRecord> {
    let clock = Instant::now();
    let (mut stepper, star_order) = build_stepper(config, system, coeffs)?;
    let mut state = initial_state(config)?;
    let mut record = TrajectoryRecord { scheme: Some(config.scheme), star_order, ..Default::default() };
    let steps = config.num_steps();
    let mut discarded = 0.0;
    record.sample(&state, 0.0, discarded, 0.0)?;
    let mut since = Instant::now();
    for k in 0..steps {
        let t = k as f64 * config.dt;
        let stats = stepper
            .step(&mut state, t)
            .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        discarded += stats.discarded_weight;
        record.total_svd_seconds += stats.svd_seconds;
        record.gates_applied += stats.gates;
        if (k + 1) % config.record_stride == 0 || k + 1 == steps {
            let wall = since.elapsed().as_secs_f64() * 1e3;
            record
                .sample(&state, (k + 1) as f64 * config.dt, discarded, wall)
                .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
            since = Instant::now();
        }
    }
    record.total_wall_seconds = clock.elapsed().as_secs_f64();
    Ok(record)
}
