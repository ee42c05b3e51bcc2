//! Physical limits and splitting properties of the three propagators.

use chainmps::chainmap::ChainCoefficients;
use chainmps::config::ExperimentConfig;
use chainmps::mps::Truncation;
use chainmps::oracle::{dense_hamiltonian, dense_star_hamiltonian, exact_populations, DenseModel};
use chainmps::chainmap::StarDecomposition;
use chainmps::propagate::{build_stepper, initial_state, run, Scheme, SchemeConfig, SpinBosonSystem};

fn small_bath(eta0: f64, modes: usize) -> ChainCoefficients {
    let cfg = ExperimentConfig::resolve(&[
        ("eta0".into(), eta0.to_string()),
        ("N".into(), (modes - 1).to_string()),
    ])
    .unwrap();
    cfg.chain_coefficients().unwrap()
}

#[test]
fn uncoupled_spin_oscillates_freely() {
    let coeffs = small_bath(0.0, 4);
    assert_eq!(coeffs.kappa0(), 0.0);
    let sys = SpinBosonSystem::new(1.0);
    for scheme in Scheme::ALL {
        let cfg = SchemeConfig::new(scheme, 3, 6, 1e-3, 1.0);
        let rec = run(&cfg, &sys, &coeffs).unwrap();
        let t = *rec.times.last().unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let p = *rec.population_up.last().unwrap();
        assert!((p - t.cos().powi(2)).abs() < 1e-6, "{scheme}: {p}");
    }
}

#[test]
fn pure_dephasing_keeps_the_spin_up() {
    let coeffs = small_bath(1.0, 4);
    let sys = SpinBosonSystem::new(0.0);
    for scheme in Scheme::ALL {
        let cfg = SchemeConfig::new(scheme, 3, 6, 0.05, 3.0);
        let rec = run(&cfg, &sys, &coeffs).unwrap();
        for p in &rec.population_up {
            assert!((p - 1.0).abs() < 1e-10, "{scheme}: {p}");
        }
    }
}

#[test]
fn single_star_mode_matches_dense_model() {
    let coeffs = small_bath(1.0, 1);
    let sys = SpinBosonSystem::new(1.0);
    let dec = StarDecomposition::from_chain(&coeffs).unwrap();
    let model = dense_star_hamiltonian(&dec, &sys, &[0], 8).unwrap();
    let cfg = SchemeConfig::new(Scheme::Star, 0, 8, 5e-4, 2.0).with_truncation(Truncation::none());
    let rec = run(&cfg, &sys, &coeffs).unwrap();
    let exact = exact_populations(&model, &rec.times).unwrap();
    let err = rec.population_up.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn chain_energy_drift_is_second_order() {
    let coeffs = small_bath(1.0, 3);
    let sys = SpinBosonSystem::new(1.0);
    let model = dense_hamiltonian(&coeffs, &sys, 2, 4).unwrap();
    let drift = |dt: f64| {
        let cfg = SchemeConfig::new(Scheme::Chain, 2, 4, dt, std::f64::consts::PI).with_truncation(Truncation::none());
        let (mut stepper, _) = build_stepper(&cfg, &sys, &coeffs).unwrap();
        let mut state = initial_state(&cfg).unwrap();
        let e0 = model.energy(&state.to_state_vector().unwrap());
        let mut worst = 0.0f64;
        for k in 0..cfg.num_steps() {
            stepper.step(&mut state, k as f64 * dt).unwrap();
            worst = worst.max((model.energy(&state.to_state_vector().unwrap()) - e0).abs());
        }
        worst
    };
    let (coarse, fine) = (drift(0.04), drift(0.02));
    assert!(coarse < 20.0 * 0.04 * 0.04, "{coarse:e}");
    let ratio = coarse / fine;
    assert!((3.0..5.0).contains(&ratio), "{ratio}");
}

#[test]
fn populations_stay_physical() {
    let coeffs = small_bath(1.0, 5);
    let sys = SpinBosonSystem::new(1.0);
    for scheme in Scheme::ALL {
        let cfg = SchemeConfig::new(scheme, 4, 5, 0.05, 2.0);
        let rec = run(&cfg, &sys, &coeffs).unwrap();
        let eps = rec.discarded_weight_cum.last().unwrap() + 1e-12;
        for (p, n) in rec.population_up.iter().zip(&rec.norm_sq) {
            assert!(*p >= -eps && *p <= 1.0 + eps, "{scheme}: {p}");
            assert!((n - 1.0).abs() < 1e-8, "{scheme}: {n}");
        }
        let dt = rec.times[1] - rec.times[0];
        for w in rec.times.windows(2) {
            assert!((w[1] - w[0] - dt).abs() < 1e-12);
        }
    }
}

#[test]
fn chain_and_interaction_pictures_agree_when_converged() {
    let coeffs = small_bath(1.0, 4);
    let sys = SpinBosonSystem::new(1.0);
    let dt = 0.01;
    let trunc = Truncation { sv_threshold: 1e-6, max_bond: 1000 };
    let c = run(&SchemeConfig::new(Scheme::Chain, 3, 16, dt, 2.0).with_truncation(trunc), &sys, &coeffs).unwrap();
    let ic = run(&SchemeConfig::new(Scheme::InteractionChain, 3, 16, dt, 2.0).with_truncation(trunc), &sys, &coeffs).unwrap();
    let trunc_err = c.discarded_weight_cum.last().unwrap() + ic.discarded_weight_cum.last().unwrap();
    for ((t, a), b) in c.times.iter().zip(&c.population_up).zip(&ic.population_up) {
        let bound = (5.0 * trunc_err).max(10.0 * dt * dt * t).max(1e-6);
        assert!((a - b).abs() <= bound, "t={t}: {a} vs {b}, bound {bound:e}");
    }
}

#[test]
fn dense_chain_model_conserves_norm() {
    let coeffs = small_bath(1.0, 2);
    let model = dense_hamiltonian(&coeffs, &SpinBosonSystem::new(1.0), 1, 5).unwrap();
    let p = chainmps::oracle::ExactPropagator::new(&model).unwrap();
    for t in [0.3, 1.0, 7.5] {
        let psi = p.state_at(t);
        assert!((psi.iter().map(|v| v.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(DenseModel::population_up(&psi) <= 1.0 + 1e-12);
    }
}
