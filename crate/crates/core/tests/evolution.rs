use std::f64::consts::PI;

use nsul_core::evolve::{
    lamb_oseen_vorticity, picard_local_solve, run_vorticity, EnergyLedger, InitialCondition, RunOptions,
    SolverConfig, SolverState, VorticityIntegrator,
};
use nsul_core::ulnorm::LocalizationBump;
use nsul_core::GridSpec;

#[test]
fn lamb_oseen_core_spreads_linearly() {
    let l = 24.0 * PI;
    let g = GridSpec::square(256, l).unwrap();
    let (gamma, nu, s0, t) = (1.0, 1.0, 1.0, 0.5);
    let s = InitialCondition::LambOseen { circulation: gamma, sigma0: s0 }.state(&g, [0.0, 0.0]).unwrap();
    let cfg = SolverConfig::new(nu, 0.01, t);
    let traj = run_vorticity(&s, &cfg, &RunOptions { output_every: 50, ..Default::default() }, |_| Ok(())).unwrap();
    let exact = lamb_oseen_vorticity(&g, gamma, s0 + nu * t, g.center()).unwrap();
    let err = traj.final_state.omega.zip_map(&exact, |a, b| a - b).sup_norm() / exact.sup_norm();
    assert!(err < 1e-6, "relative error {err}");
}

#[test]
fn picard_agrees_with_vorticity_integrator() {
    let g = GridSpec::square(32, 2.0 * PI).unwrap();
    let s = InitialCondition::RandomBandlimited { kmin: 1.0, kmax: 3.0, amplitude: 0.5, seed: 3 }
        .state(&g, [0.0, 0.0])
        .unwrap();
    let nu = 1.0;
    let horizon = 0.02;
    let mut cfg = SolverConfig::new(nu, 1e-4, horizon);
    cfg.picard_nodes = 64;
    let pic = picard_local_solve(&s.u, &cfg, horizon).unwrap();
    assert!(pic.kappa < 1.0);
    for r in pic.ratios() {
        assert!(r <= pic.kappa + 1e-9, "ratio {r} above {}", pic.kappa);
    }
    let traj = run_vorticity(&s, &cfg, &RunOptions { output_every: 1000, ..Default::default() }, |_| Ok(())).unwrap();
    let diff = pic.final_state().sub(&traj.final_state.u).sup_norm();
    assert!(diff <= 1e-5 * s.u.sup_norm(), "difference {diff}");
    assert!(pic.quadrature_error < 1e-5);
}

#[test]
fn vorticity_lp_norms_and_sup_are_lyapunov() {
    let g = GridSpec::square(64, 2.0 * PI).unwrap();
    let s = InitialCondition::RandomBandlimited { kmin: 1.0, kmax: 6.0, amplitude: 5.0, seed: 9 }
        .state(&g, [0.2, 0.0])
        .unwrap();
    let cfg = SolverConfig::new(0.05, 2e-3, 0.4);
    let mut l2 = Vec::new();
    let mut l4 = Vec::new();
    let mut sup = Vec::new();
    run_vorticity(&s, &cfg, &RunOptions { output_every: 5, check_invariants: true, ..Default::default() }, |st| {
        l2.push(st.omega.lp_norm(2.0));
        l4.push(st.omega.lp_norm(4.0));
        sup.push(st.refined_sup_omega()?);
        Ok(())
    })
    .unwrap();
    for series in [&l2, &l4] {
        for w in series.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10), "{} > {}", w[1], w[0]);
        }
    }
    assert!(sup.iter().all(|v| *v <= sup[0] * (1.0 + 1e-6)));
}

#[test]
fn energy_ledger_constant_and_zero_fields() {
    let g = GridSpec::square(32, 8.0).unwrap();
    for value in [[0.0, 0.0], [1.0, 2.0]] {
        let s = InitialCondition::Constant { value }.state(&g, [0.0, 0.0]).unwrap();
        let cfg = SolverConfig::new(0.1, 0.01, 0.1);
        let traj = run_vorticity(&s, &cfg, &RunOptions::default(), |_| Ok(())).unwrap();
        assert_eq!(traj.ledger.dissipation, 0.0);
        assert_eq!(traj.ledger.residual(), 0.0);
    }
}

#[test]
fn local_energy_balance_closes() {
    let g = GridSpec::square(64, 16.0).unwrap();
    let s = InitialCondition::RandomBandlimited { kmin: 2.0, kmax: 8.0, amplitude: 1.0, seed: 5 }
        .state(&g, [0.0, 0.0])
        .unwrap();
    let bump = LocalizationBump::new(g.center(), 3.0).unwrap();
    let cfg = SolverConfig::new(0.1, 5e-3, 0.5);
    let opts = RunOptions { output_every: 100, bumps: vec![bump], ..Default::default() };
    let traj = run_vorticity(&s, &cfg, &opts, |_| Ok(())).unwrap();
    let local = &traj.ledger.locals[0];
    assert!(local.residual() < 1e-4, "local residual {}", local.residual());
    assert!(traj.ledger.residual() < 1e-6);
}

#[test]
fn ledger_tracks_taylor_green_decay() {
    let g = GridSpec::square(32, 2.0 * PI).unwrap();
    let nu = 0.1;
    let s = InitialCondition::TaylorGreen { amplitude: 1.0 }.state(&g, [0.0, 0.0]).unwrap();
    let cfg = SolverConfig::new(nu, 1e-2, 1.0);
    let mut it = VorticityIntegrator::new(&s, &cfg).unwrap();
    let mut ledger = EnergyLedger::new(&s, nu, &[]).unwrap();
    for _ in 0..100 {
        it.step().unwrap();
        ledger.update(&it.state()).unwrap();
    }
    let e0 = s.u.energy();
    let decay = (-4.0 * nu).exp();
    assert!((ledger.energy - e0 * decay).abs() < 1e-10 * e0);
    assert!((ledger.dissipation - e0 * (1.0 - decay)).abs() < 1e-6 * e0);
    let _: &SolverState = &s;
}
