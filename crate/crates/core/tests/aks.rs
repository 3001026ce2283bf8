use geomech::aks::feher::FeherSystem;
use geomech::aks::phi::equivalence_run;
use geomech::aks::unreduced::UnreducedSystem;
use geomech::aks::AksParams;
use geomech::integrate::TimeSpan;

#[test]
fn mapped_reduced_trajectories_are_feher_trajectories() {
    let span = TimeSpan::new(0.0, 5.0, 1e-3).unwrap();
    let r = equivalence_run(&AksParams::sl2_generic(), &span).unwrap();
    assert!(r.max_deviation <= 1e-4, "deviation {:e}", r.max_deviation);
    assert!(r.max_pullback_defect <= 1e-8, "pullback {:e}", r.max_pullback_defect);
    // The K+ stabilizer is trivial, so the Fehér alpha vanishes.
    assert!(r.mapped.samples.iter().all(|s| s.state.alpha.max_abs() < 1e-6));
}

#[test]
fn spectral_invariants_are_conserved_and_match_a_fine_reference() {
    for p in [AksParams::sl2(), AksParams::sl3()] {
        let sys = FeherSystem::new(p);
        let s0 = sys.initial_state().unwrap();
        let span = TimeSpan::new(0.0, 10.0, 1e-3).unwrap();
        let fine = TimeSpan::new(0.0, 10.0, 1e-5).unwrap();
        let (run, reference) = std::thread::scope(|s| {
            let h = s.spawn(|| sys.simulate_lax(&s0, &fine, 100).unwrap());
            (sys.simulate(&s0, &span).unwrap(), h.join().unwrap())
        });
        let (a, b) = run.invariant_drift();
        assert!(a <= 1e-6 && b <= 1e-6, "drift {a:e} {b:e}");
        let gap = run.max_gap(&reference).unwrap();
        assert!(gap <= 1e-8, "reference gap {gap:e}");
    }
}

#[test]
fn unreduced_exact_flow_and_momentum() {
    let sys = UnreducedSystem::new(AksParams::sl3());
    let s0 = sys.initial_state().unwrap();
    let span = TimeSpan::new(0.0, 10.0, 1e-3).unwrap();
    let traj = sys.exact_trajectory(&s0, &span).unwrap();
    assert!(sys.residuals(&traj).unwrap().max() <= 1e-9);
    assert!(sys.momentum_drift(&traj).unwrap() <= 1e-8);
    let still = geomech::aks::unreduced::UnreducedState { zeta: geomech::linalg::Matrix::zeros(3, 3), ..s0 };
    let traj = sys.exact_trajectory(&still, &TimeSpan::new(0.0, 1.0, 1e-2).unwrap()).unwrap();
    assert!(traj.iter().all(|(_, s)| (&s.g - &still.g).max_abs() == 0.0));
}
