mod common;

use damage_core::grid::{face_gradient_sq, integrate, Field, Grid};
use damage_core::potentials::t0_formula;
use damage_core::simulator::{
    convergence_study, energy, read_ledger_csv, run, write_trajectory, Backend, Scenario, SimConfig,
};
use damage_core::{Execution, TruncationParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn base(nodes: usize, tau: f64, horizon: f64, amplitude: f64) -> SimConfig {
    let mut c = SimConfig::default();
    c.grid.nodes = nodes;
    c.time.tau = tau;
    c.time.horizon = horizon;
    c.experiment.g_amplitude = amplitude;
    c
}

#[test]
fn strong_load_degenerates_irreversibly() {
    let sc = Scenario::new(&base(65, 1e-2, 0.3, 9.0)).unwrap();
    let traj = run(&sc).unwrap();
    let t_deg = traj
        .events
        .t_deg
        .expect("strong load should reach the truncation region");
    let three_delta = 3.0 * sc.delta();
    for w in traj.ledger.windows(2) {
        assert!(w[1].z_min <= w[0].z_min);
        assert!(w[1].dissipation_cum >= w[0].dissipation_cum);
    }
    for d in &traj.diagnostics {
        assert!(d.max_increase <= 0.0);
        assert!(d.xi_min >= 0.0);
    }
    let first = traj.ledger.iter().find(|e| e.z_min <= three_delta).unwrap();
    assert_eq!(first.t, t_deg);
    assert!(first.truncation_active);
    assert!(traj.in_extended_regime(first));
    assert!(!traj.in_extended_regime(&traj.ledger[0]));
    assert!(traj.snapshots.iter().any(|s| s.t == t_deg));
}

#[test]
fn yosida_backend_tracks_projected_run() {
    let mut cfg = base(65, 1e-2, 0.2, 6.0);
    let a = run(&Scenario::new(&cfg).unwrap()).unwrap();
    cfg.solver.backend = Backend::Yosida;
    cfg.solver.lambda = 1e-5;
    let b = run(&Scenario::new(&cfg).unwrap()).unwrap();
    let gap = a
        .final_snapshot()
        .z
        .max_abs_diff(&b.final_snapshot().z)
        .unwrap();
    assert!(gap < 1e-3, "gap {gap}");
    // the penalty only enforces irreversibility up to O(λ)
    let worst = b
        .diagnostics
        .iter()
        .fold(0.0f64, |m, d| m.max(d.max_increase));
    assert!(worst <= 1e-5, "increase {worst}");
}

#[test]
fn coupled_scheme_converges_under_refinement() {
    let cfg = base(33, 2e-2, 0.5, 5.5);
    let table = convergence_study(&cfg, 3).unwrap();
    assert!(table.monotone, "{table:?}");
    let p = table.observed_order.unwrap();
    assert!((0.8..=2.2).contains(&p), "order {p}");
}

#[test]
fn energy_is_bounded_below_by_the_coercivity_floor() {
    // E ≥ δ/2‖∇u‖² + ½‖z‖_V² − c/δ with c = C_P²‖g‖²/2 + δ²w²|Ω|/2,
    // from T ≥ 2δ, Young's inequality and ψ(r) ≥ r²/2 − w²/2.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for dim in [1usize, 2] {
        let mut cfg = base(if dim == 1 { 65 } else { 17 }, 1e-2, 0.1, 8.0);
        cfg.grid.dim = dim;
        let sc = Scenario::new(&cfg).unwrap();
        let g = sc.grid;
        let delta = sc.delta();
        let w = 3.0;
        let lambda1: f64 = (0..dim)
            .map(|a| {
                let h = g.spacing(a);
                4.0 / (h * h)
                    * (std::f64::consts::PI * h / (2.0 * g.extent(a)))
                        .sin()
                        .powi(2)
            })
            .sum();
        let g_sq = integrate(&sc.g.map(|v| v * v));
        let c = g_sq / (2.0 * lambda1) + delta * delta * w * w * g.volume() / 2.0;
        for _ in 0..50 {
            let zs: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let us: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let z = Field::new(g, zs).unwrap();
            let u = Field::new(g, us).unwrap().with_zero_boundary();
            let grad_u = integrate(&face_gradient_sq(&u));
            let v_sq = integrate(&z.map(|r| r * r)) + integrate(&face_gradient_sq(&z));
            let floor = 0.5 * delta * grad_u + 0.5 * v_sq - c / delta;
            let e = energy(&z, &u, &sc).unwrap();
            assert!(
                e >= floor - 1e-9 * e.abs().max(1.0),
                "dim {dim}: {e} < {floor}"
            );
        }
    }
}

#[test]
fn existence_time_matches_reference_quadrature() {
    for (eps, delta, c3) in [
        (0.25, 1.0 / 12.0, 1.0),
        (0.1, 1.0 / 24.0, 1e-20),
        (0.4, 1.0 / 16.0, 1e-25),
    ] {
        let p = TruncationParams::new(delta).unwrap();
        let lib = t0_formula(eps, &p, c3, 1.0).unwrap();
        let reference = common::t0(eps, delta, c3, 1.0);
        assert!(
            (lib - reference).abs() <= 1e-9 * reference,
            "{lib} vs {reference}"
        );
    }
}

#[test]
fn policies_give_identical_trajectories() {
    let mut cfg = base(129, 1e-2, 0.03, 8.0);
    cfg.grid.dim = 2;
    let sc = Scenario::new(&cfg).unwrap();
    let seq = run(&sc.clone().with_execution(Execution::Sequential)).unwrap();
    let par = run(&sc.with_execution(Execution::Parallel)).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn written_ledger_reads_back() {
    let sc = Scenario::new(&base(33, 2e-2, 0.2, 7.0)).unwrap();
    let traj = run(&sc).unwrap();
    let dir = tempdir();
    let files = write_trajectory(&dir, &traj).unwrap();
    assert!(files.iter().any(|f| f.ends_with("ledger.csv")));
    let back = read_ledger_csv(std::fs::File::open(dir.join("ledger.csv")).unwrap()).unwrap();
    assert_eq!(back, traj.ledger);
    let z = Field::load_csv(&dir.join("snapshots/z_000000.csv")).unwrap();
    assert_eq!(z, traj.snapshots[0].z);
    assert_eq!(*z.grid(), Grid::unit_interval(33).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("damage-core-sim-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
