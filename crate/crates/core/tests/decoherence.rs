use liouvillian::evolvers::EvolverConfig;
use liouvillian::potentials::Potential;
use liouvillian::state::make_cat_state;
use liouvillian::stochastic::{
    compare_ensemble_vs_lindblad, decay_predict, ensemble_evolve, lindblad_evolve, NoiseMode, NoiseSpec,
};
use liouvillian::{DensityGrid, GridSpec};
use num_complex::Complex64;

fn cat() -> DensityGrid {
    make_cat_state(3.0, 0.5, GridSpec::new(32, 8.0).unwrap()).unwrap()
}

/// Grid-scale noise roughens the state quickly once the kinetic term is on.
fn hamiltonian_cfg(dt: f64, n_steps: usize, every: usize) -> EvolverConfig {
    let mut cfg = EvolverConfig::new(dt, n_steps).recording_every(every);
    cfg.tail_threshold = 1e-2;
    cfg
}

#[test]
fn short_time_discrepancy_with_hamiltonian_is_cubic() {
    // Same noise with H off is a control variate whose exact mean is the closed form,
    // so (on - off) - (lindblad - closed form) keeps the bias and sheds most noise.
    let f0 = cat();
    let nu = vec![1.0; 32];
    let h = Potential::Harmonic { omega: 1.0 };
    let free = Potential::Constant { value: 0.0 };
    let cfg = hamiltonian_cfg(0.005, 60, 20);
    let spec = NoiseSpec::new(nu.clone(), 5).unwrap();
    let m = 8000;
    let on = ensemble_evolve(&f0, &h, &spec, m, NoiseMode::Quenched, &cfg).unwrap();
    let off = ensemble_evolve(&f0, &free, &spec, m, NoiseMode::Quenched, &cfg.clone().without_kinetic()).unwrap();
    let lind = lindblad_evolve(&f0, &h, &nu, &cfg).unwrap();
    let residual = |r: usize| {
        let closed = decay_predict(&f0, &nu, on.times[r]).unwrap();
        let mut worst: f64 = 0.0;
        for ((a, b), z) in on.mean[r].values().indexed_iter() {
            if a != b {
                let d = (z - off.mean[r].values()[[a, b]]) - (lind.states[r].values()[[a, b]] - closed.values()[[a, b]]);
                worst = worst.max(d.norm());
            }
        }
        worst
    };
    assert!((on.times[1] - 0.1).abs() < 1e-12 && (on.times[3] - 0.3).abs() < 1e-12);
    let growth = residual(3) / residual(1);
    assert!((growth - 27.0).abs() <= 13.5, "tripling t grew the discrepancy {growth}x");
}

#[test]
fn hamiltonian_ensemble_agrees_with_lindblad_at_short_times() {
    let f0 = cat();
    let nu = vec![1.0; 32];
    let h = Potential::Harmonic { omega: 1.0 };
    // by t = 0.1 the cubic bias exceeds 3 SE in the far tails of the state
    let cfg = hamiltonian_cfg(0.005, 10, 2);
    let spec = NoiseSpec::new(nu.clone(), 8).unwrap();
    let ens = ensemble_evolve(&f0, &h, &spec, 400, NoiseMode::Quenched, &cfg).unwrap();
    let lind = lindblad_evolve(&f0, &h, &nu, &cfg).unwrap();
    let cmp = compare_ensemble_vs_lindblad(&ens, &lind).unwrap();
    assert!(cmp.judged.iter().all(|&j| j));
    assert!(cmp.pass(), "{cmp:?}");
}

#[test]
fn ensemble_average_is_linear_in_the_initial_state() {
    let g = GridSpec::new(32, 8.0).unwrap();
    let a = make_cat_state(3.0, 0.5, g).unwrap();
    let b = make_cat_state(2.0, 0.6, g).unwrap();
    let (wa, wb) = (0.3, 0.7);
    let mix = DensityGrid::new(g, a.values() * Complex64::from(wa) + b.values() * Complex64::from(wb), 0.0).unwrap();
    let h = Potential::Harmonic { omega: 1.0 };
    let cfg = hamiltonian_cfg(0.005, 20, 10);
    let spec = NoiseSpec::uniform(&g, 0.8, 3).unwrap();
    let run = |f: &DensityGrid| ensemble_evolve(f, &h, &spec, 30, NoiseMode::Quenched, &cfg).unwrap();
    let (ra, rb, rm) = (run(&a), run(&b), run(&mix));
    for r in 0..rm.times.len() {
        let combined = ra.mean[r].values() * Complex64::from(wa) + rb.mean[r].values() * Complex64::from(wb);
        let err = combined.iter().zip(rm.mean[r].values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "record {r}: {err}");
    }
}

#[test]
fn lindblad_dissipator_leaves_the_trace_alone() {
    let f0 = cat();
    let nu: Vec<f64> = (0..32).map(|i| 0.2 + 0.05 * i as f64).collect();
    let cfg = EvolverConfig::new(0.01, 200).recording_every(10).without_kinetic();
    let traj = lindblad_evolve(&f0, &Potential::Constant { value: 0.0 }, &nu, &cfg).unwrap();
    for s in &traj.states {
        assert!((s.trace() - f0.trace()).norm() <= 1e-12);
    }
}
