use std::f64::consts::PI;

use degparlog_core::experiments::{
    coincidence_convergence, coincidence_convergence_from, commuting_diagram, longtime_study, p_sweep, setup,
    ExperimentConfig, Regime, Seed,
};
use degparlog_core::obstacle::{stationary_vi_solve, ObstacleSpec};
use degparlog_core::{AxisBox, Exec};

fn small() -> ExperimentConfig {
    ExperimentConfig { n: vec![63], dt: 2e-3, t_end: 1.0, t_max: 50.0, ..Default::default() }
}

fn refined(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { n: vec![2 * cfg.n[0] + 1], dt: cfg.dt / 2.0, ..cfg.clone() }
}

#[test]
fn pure_heat_decays_at_the_implicit_euler_rate() {
    let cfg = ExperimentConfig { a: 0.0, ..ExperimentConfig { t_end: 2.0, ..small() } };
    let r = longtime_study(&ExperimentConfig { omega0: vec![], ..cfg }, Regime::Subcritical).unwrap();
    let (rate, want) = (r.scalar("decay_rate").unwrap(), r.scalar("implicit_euler_rate").unwrap());
    assert!((rate - want).abs() <= 1e-6 * want, "{rate} vs {want}");
}

#[test]
fn subcritical_rate_is_shifted_by_a() {
    let r = longtime_study(&ExperimentConfig { a: 5.0, ..small() }, Regime::Subcritical).unwrap();
    let gap = r.scalar("lambda1_minus_a").unwrap();
    // O(dt) below the continuous rate, exactly the implicit Euler one
    assert!((r.scalar("decay_rate").unwrap() - gap).abs() <= 2e-3 * gap * gap);
    assert!((r.scalar("decay_rate").unwrap() - r.scalar("implicit_euler_rate").unwrap()).abs() <= 1e-6 * gap);
}

#[test]
fn supercritical_run_crosses_the_threshold() {
    let r = longtime_study(&ExperimentConfig { a: 300.0, ..small() }, Regime::Supercritical).unwrap();
    let hit = r.scalar("hit_time").unwrap();
    assert!(hit.is_finite() && hit <= small().t_end);
    assert!(r.metric("sup").unwrap().last().unwrap() > &2.0);
}

#[test]
fn starting_at_the_stationary_solution_keeps_the_coincidence_set() {
    let cfg = ExperimentConfig { a: 4.0 * PI * PI, n: vec![127], ..small() };
    let cfg = ExperimentConfig { omega0: vec![], b: degparlog_core::BKind::Constant { b0: 1.0 }, ..cfg };
    let s = setup(&cfg).unwrap();
    let w = stationary_vi_solve(&ObstacleSpec::from_domain(&s.spec), cfg.a, &s.u0, &cfg.stationary_options()).unwrap();
    let r = coincidence_convergence_from(&cfg, Some(&w.u)).unwrap();
    let cell = s.spec.grid().cell_volume();
    assert!(r.metric("symdiff").unwrap().iter().all(|&m| m <= cell + 1e-15));
}

#[test]
fn near_critical_growth_is_flagged() {
    let base = ExperimentConfig { omega0: vec![], b: degparlog_core::BKind::Constant { b0: 1.0 }, ..small() };
    let lambda = setup(&base).unwrap().omega.lambda1;
    let r = coincidence_convergence(&ExperimentConfig { a: 1.05 * lambda, ..base }).unwrap();
    assert_eq!(r.scalar("near_critical"), Some(1.0));
    // the plateau [π/(2√a), 1 − π/(2√a)] is thin but present
    let width = 1.0 - PI / (1.05 * lambda).sqrt();
    let h = 1.0 / 64.0;
    assert!((r.scalar("w_coincidence_measure").unwrap() - width).abs() <= 2.0 * h);
    assert!((r.scalar("w_sup").unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn coincidence_study_needs_nondegenerate_data() {
    assert!(coincidence_convergence(&small()).is_err());
}

#[test]
fn zero_data_gives_a_trivial_diagram() {
    let r = commuting_diagram(&ExperimentConfig { seed: Seed::Constant { value: 0.0 }, ..small() }).unwrap();
    assert!(r.is_complete());
    assert!(r.scalar("discrepancy_l2").unwrap() <= 10.0 * small().vi_tol);
    assert_eq!(r.scalar("transient_l2_distance"), Some(0.0));
}

#[test]
fn absorption_free_diagram_collapses_to_the_linear_limit() {
    let cfg = ExperimentConfig { omega0: vec![AxisBox::interval(0.0, 1.0)], a: 5.0, ..small() };
    let r = commuting_diagram(&cfg).unwrap();
    // both corners stop at ‖∂ₜu‖₂ ≤ steady_tol, i.e. ‖u‖₂ ≲ steady_tol/(λ₁ − a)
    let gap = r.metadata.lambda1_omega - cfg.a;
    assert!(r.scalar("discrepancy_l2").unwrap() <= 2.0 * cfg.steady_tol / gap);
}

#[test]
fn supercritical_diagram_reports_the_failed_corner() {
    let r = commuting_diagram(&ExperimentConfig { a: 300.0, t_max: 5.0, ..small() }).unwrap();
    let err = r.error.as_deref().unwrap();
    assert!(err.contains("B:"), "{err}");
    assert!(r.notes.iter().any(|n| n.contains("Supercritical")));
}

#[test]
fn divergent_sweep_returns_a_partial_report() {
    let cfg = ExperimentConfig { n: vec![31], a: 300.0, dt: 2e-3, t_end: 5.0, p_list: vec![2.0, 4.0], ..small() };
    let r = p_sweep(&cfg).unwrap();
    assert!(!r.is_complete());
    assert!(r.values.len() < 2);
}

#[test]
fn sweeps_are_reproducible_across_executors() {
    let cfg = ExperimentConfig { t_end: 0.3, p_list: vec![2.0, 16.0, 128.0], ..small() };
    let seq = p_sweep(&ExperimentConfig { exec: Exec::Sequential, ..cfg.clone() }).unwrap();
    let par = p_sweep(&ExperimentConfig { exec: Exec::Parallel, ..cfg.clone() }).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq, p_sweep(&cfg).unwrap());
}

#[test]
fn refinement_does_not_increase_the_errors() {
    let cfg = ExperimentConfig { t_end: 0.5, p_list: vec![8.0, 64.0], p_max: 64.0, ..small() };
    let fine = refined(&cfg);
    let e = |c: &ExperimentConfig| *p_sweep(c).unwrap().metric("E").unwrap().last().unwrap();
    let (e0, e1) = (e(&cfg), e(&fine));
    assert!(e1 <= 1.1 * e0, "E(p_max): {e0} -> {e1}");

    let d = |c: &ExperimentConfig| commuting_diagram(c).unwrap().scalar("discrepancy_l2").unwrap();
    let (d0, d1) = (d(&cfg), d(&fine));
    assert!(d1 <= 1.1 * d0, "diagram: {d0} -> {d1}");

    let nondeg = ExperimentConfig { omega0: vec![], b: degparlog_core::BKind::Constant { b0: 1.0 }, a: 4.0 * PI * PI, ..cfg };
    let c = |c: &ExperimentConfig| coincidence_convergence(c).unwrap().scalar("terminal_symdiff").unwrap();
    let (c0, c1) = (c(&nondeg), c(&refined(&nondeg)));
    assert!(c1 <= 1.1 * c0 + 1e-15, "symmetric difference: {c0} -> {c1}");
}
