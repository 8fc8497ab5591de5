//! Multi-run experiments: continuous dependence on the initial damage,
//! space-time refinement, and parameter sweeps.

use super::{run_many, Events, InitialPreset, Scenario, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{self, Field, Grid};
use crate::par::{self, Execution};

/// Finest 1D grid a convergence study may request.
pub const MAX_NODES_1D: usize = 4097;
/// Finest 2D grid (per axis) a convergence study may request.
pub const MAX_NODES_2D: usize = 257;

/// `η = −(1 + Π cos(π x_i / L_i)) / 2`, so `z₀ + sη ≤ z₀` for `s ≥ 0`.
pub fn perturbation_profile(grid: &Grid) -> Field {
    let g = *grid;
    Field::from_fn(g, |x, y| {
        let mut p = (std::f64::consts::PI * x / g.extent(0)).cos();
        if g.dim() == 2 {
            p *= (std::f64::consts::PI * y / g.extent(1)).cos();
        }
        -0.5 * (1.0 + p)
    })
}

fn grad_sq_integral(v: &Field) -> f64 {
    grid::integrate(&grid::face_gradient_sq(v)).max(0.0)
}

fn v_norm(z: &Field) -> f64 {
    (grid::l2_norm(z).powi(2) + grad_sq_integral(z)).sqrt()
}

fn v0_norm(u: &Field) -> f64 {
    grad_sq_integral(&u.with_zero_boundary()).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependenceRow {
    pub size: f64,
    /// `(t, (‖Z‖_V + ‖U‖_{V₀}) / ‖Z(0)‖_V)` at the snapshot times; empty for
    /// a zero perturbation.
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: Option<f64>,
    /// Every snapshot and ledger entry equal bit for bit to the base run.
    pub identical: bool,
}

impl DependenceRow {
    pub fn bounded(&self) -> bool {
        self.ratios.iter().all(|(_, r)| r.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependenceTable {
    pub rows: Vec<DependenceRow>,
    pub base_events: Events,
    /// The base run never entered the truncated range.
    pub nondegenerate: bool,
}

impl DependenceTable {
    /// Largest over smallest max ratio among the nonzero sizes.
    pub fn ratio_spread(&self) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter_map(|r| r.max_ratio).collect();
        if vals.is_empty() {
            return None;
        }
        let hi = vals.iter().copied().fold(f64::MIN, f64::max);
        let lo = vals.iter().copied().fold(f64::MAX, f64::min);
        Some(hi / lo)
    }
}

fn identical(a: &Trajectory, b: &Trajectory) -> bool {
    a.ledger == b.ledger && a.snapshots == b.snapshots
}

fn compare(base: &Trajectory, other: &Trajectory, size: f64) -> DependenceRow {
    let same = identical(base, other);
    if size == 0.0 {
        return DependenceRow {
            size,
            ratios: Vec::new(),
            max_ratio: None,
            identical: same,
        };
    }
    let diff = |a: &Field, b: &Field| a.zip_map(b, |x, y| x - y).expect("shared grid");
    let z0 = v_norm(&diff(&base.snapshots[0].z, &other.snapshots[0].z));
    let ratios: Vec<(f64, f64)> = base
        .snapshots
        .iter()
        .zip(&other.snapshots)
        .map(|(p, q)| {
            let num = v_norm(&diff(&p.z, &q.z)) + v0_norm(&diff(&p.u, &q.u));
            (p.t, num / z0)
        })
        .collect();
    let max_ratio = ratios
        .iter()
        .map(|r| r.1)
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    DependenceRow {
        size,
        ratios,
        max_ratio,
        identical: same,
    }
}

/// Twin runs from `z₀` and `z₀ + sη` for every `s` in `sizes`.
pub fn continuous_dependence_experiment(sc: &Scenario, sizes: &[f64]) -> Result<DependenceTable> {
    let eta = perturbation_profile(&sc.grid);
    let mut scenarios = vec![sc.clone()];
    for &s in sizes {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "perturbation sizes must be nonnegative, got {s}"
            )));
        }
        let z = sc.z0.zip_map(&eta, |a, e| a + s * e)?;
        scenarios.push(sc.with_initial(z)?);
    }
    let mut runs = run_many(sc.exec, &scenarios).into_iter();
    let base = runs.next().expect("base run")?;
    let mut rows = Vec::with_capacity(sizes.len());
    for (&s, r) in sizes.iter().zip(runs) {
        rows.push(compare(&base, &r?, s));
    }
    Ok(DependenceTable {
        rows,
        nondegenerate: base.events.t_deg.is_none(),
        base_events: base.events,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub nodes: usize,
    pub tau: f64,
    pub z_min_final: f64,
    /// `‖z_{k+1}(T) − z_k(T)‖` on level `k`'s nodes.
    pub diff_to_next: Option<f64>,
    /// `log₂(d_{k−1} / d_k)`.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Successive differences strictly decrease (or all vanish).
    pub monotone: bool,
    /// Order from the two finest differences.
    pub observed_order: Option<f64>,
}

/// Restrict a field on a grid refined `factor` times to the coarse grid.
fn inject(fine: &Field, coarse: &Grid, factor: usize) -> Field {
    let fg = fine.grid();
    let vals = (0..coarse.len())
        .map(|k| {
            let (i, j) = coarse.ij(k);
            fine.values()[fg.index(i * factor, j * factor)]
        })
        .collect();
    Field::new(*coarse, vals).expect("injected values are finite")
}

pub fn convergence_study(cfg: &SimConfig, levels: usize) -> Result<ConvergenceTable> {
    convergence_study_with(Execution::default(), cfg, levels)
}

pub fn convergence_study_with(
    exec: Execution,
    cfg: &SimConfig,
    levels: usize,
) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::InvalidArgument(format!(
            "a convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let e = &cfg.experiment;
    if e.g_file.is_some() && e.g == super::SourcePreset::File
        || e.z0_file.is_some() && e.z0 == InitialPreset::File
    {
        return Err(Error::Config(
            "file snapshots cannot be refined; use analytic presets".into(),
        ));
    }
    let cap = if cfg.grid.dim == 1 {
        MAX_NODES_1D
    } else {
        MAX_NODES_2D
    };
    // the probe estimate shifts slightly with h; pin it to the coarse value
    let c_omega = match cfg.solver.c_omega {
        Some(c) => c,
        None => Scenario::new(cfg)?.c_omega,
    };
    let mut scenarios = Vec::with_capacity(levels);
    for k in 0..levels {
        let f = 1usize << k;
        let mut c = cfg.clone();
        c.grid.nodes = (cfg.grid.nodes - 1) * f + 1;
        c.grid.nodes_y = cfg.grid.nodes_y.map(|n| (n - 1) * f + 1);
        if c.grid.nodes.max(c.grid.nodes_y.unwrap_or(0)) > cap {
            return Err(Error::InvalidArgument(format!(
                "resource cap exceeded: level {k} needs {} nodes per axis (cap {cap})",
                c.grid.nodes
            )));
        }
        c.time.tau = cfg.time.tau / f as f64;
        // only the final state is compared
        c.time.snapshot_every = usize::MAX;
        c.solver.c_omega = Some(c_omega);
        scenarios.push(Scenario::new(&c)?);
    }
    let runs: Vec<Trajectory> = run_many(exec, &scenarios)
        .into_iter()
        .collect::<Result<_>>()?;

    let finals: Vec<&Field> = runs.iter().map(|r| &r.final_snapshot().z).collect();
    let diffs: Vec<f64> = (0..levels - 1)
        .map(|k| {
            let coarse = finals[k].grid();
            let fine = inject(finals[k + 1], coarse, 2);
            grid::l2_norm(&fine.zip_map(finals[k], |a, b| a - b).expect("same grid"))
        })
        .collect();
    let mut rows = Vec::with_capacity(levels);
    for k in 0..levels {
        let order = if k >= 1 && k < levels - 1 && diffs[k] > 0.0 && diffs[k - 1] > 0.0 {
            Some((diffs[k - 1] / diffs[k]).log2())
        } else {
            None
        };
        rows.push(ConvergenceRow {
            level: k,
            nodes: scenarios[k].grid.nodes(0),
            tau: scenarios[k].config.time.tau,
            z_min_final: finals[k].min(),
            diff_to_next: diffs.get(k).copied(),
            order,
        });
    }
    let all_zero = diffs.iter().all(|&d| d == 0.0);
    let monotone = all_zero || diffs.windows(2).all(|w| w[1] < w[0]);
    let observed_order = rows.iter().rev().find_map(|r| r.order);
    Ok(ConvergenceTable {
        rows,
        monotone,
        observed_order,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub z0_amplitude: f64,
    pub g_amplitude: f64,
    pub eps: Option<f64>,
    pub t_deg: Option<f64>,
    pub c3_fitted: Option<f64>,
    /// Continuous-dependence max ratio at the configured perturbation size.
    pub max_ratio: Option<f64>,
    /// Why the combination could not be run.
    pub error: Option<String>,
}

/// Runs the grid `sweep_delta × sweep_z0_amplitude × sweep_g_amplitude`.
///
/// A nonzero `z₀` amplitude with the constant preset switches the initial
/// damage to the raised-cosine preset.
pub fn sweep(exec: Execution, cfg: &SimConfig) -> Vec<SweepRow> {
    let e = &cfg.experiment;
    let mut combos = Vec::new();
    for &d in &e.sweep_delta {
        for &a in &e.sweep_z0_amplitude {
            for &ga in &e.sweep_g_amplitude {
                combos.push((d, a, ga));
            }
        }
    }
    par::map_items(exec, &combos, |&(d, a, ga)| {
        let mut c = cfg.clone();
        c.truncation.delta = d;
        c.experiment.z0_amplitude = a;
        if a != 0.0 && c.experiment.z0 == InitialPreset::Constant {
            c.experiment.z0 = InitialPreset::Cosine;
        }
        c.experiment.g_amplitude = ga;
        let mut row = SweepRow {
            delta: d,
            z0_amplitude: a,
            g_amplitude: ga,
            eps: None,
            t_deg: None,
            c3_fitted: None,
            max_ratio: None,
            error: None,
        };
        let outcome = Scenario::new(&c).and_then(|sc| {
            let sc = sc.with_execution(Execution::Sequential);
            row.eps = Some(sc.eps);
            continuous_dependence_experiment(&sc, &[cfg.experiment.sweep_perturbation])
        });
        match outcome {
            Ok(t) => {
                row.t_deg = t.base_events.t_deg;
                row.c3_fitted = Some(t.base_events.c3_fitted);
                row.max_ratio = t.rows[0].max_ratio;
            }
            Err(err) => row.error = Some(err.to_string()),
        }
        row
    })
}
