//! Coupled evolution: staggered displacement solves and damage steps, the
//! energy ledger, the non-degeneration certificate and the experiment suites.

mod certificate;
mod config;
mod experiments;
mod output;

pub use certificate::{certificate_monitor, fit_c3, CertificateReport};
pub use config::{
    Backend, ExperimentSection, GridSection, InitialPreset, LoadStencil, PotentialFamily,
    PotentialSection, SimConfig, SolverSection, SourcePreset, TimeSection, TruncationLaw,
    TruncationSection,
};
pub use experiments::{
    continuous_dependence_experiment, convergence_study, perturbation_profile, sweep,
    ConvergenceRow, ConvergenceTable, DependenceRow, DependenceTable, SweepRow,
};
pub use output::{
    check_ledger, read_events, read_ledger_csv, write_events, write_ledger_csv, write_trajectory,
    Events, LedgerViolation, LEDGER_COLUMNS,
};

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elliptic::EllipticSolver;
use crate::error::{Error, Result};
use crate::grid::{self, BoundaryMode, Field, Grid};
use crate::par::Execution;
use crate::potentials::{
    t0_formula, CoefficientLaw, IdentityFloor, PotentialSpec, Stiffness, TruncationParams,
};
use crate::vi_stepper::{self, StepInput, StepResult};

/// Safety factor applied to the probe-family estimate of `c_Ω`.
pub const C_OMEGA_SAFETY: f64 = 1.5;
/// Highest probe wavenumber per axis.
pub const C_OMEGA_MAX_MODE: usize = 8;
/// Largest `c_Ω‖1 − z₀‖_W` accepted.
pub const EPS_MAX: f64 = 0.5;

/// A configuration resolved into fields on a grid.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: SimConfig,
    pub grid: Grid,
    pub g: Field,
    pub z0: Field,
    pub truncation: TruncationParams,
    pub law: CoefficientLaw,
    pub psi: PotentialSpec,
    pub c_omega: f64,
    /// `c_Ω‖1 − z₀‖_W`.
    pub eps: f64,
    pub exec: Execution,
}

fn build_grid(s: &GridSection) -> Result<Grid> {
    match s.dim {
        1 => Grid::new_1d(s.extent, s.nodes),
        2 => Grid::new_2d(
            [s.extent, s.extent_y.unwrap_or(s.extent)],
            [s.nodes, s.nodes_y.unwrap_or(s.nodes)],
        ),
        d => Err(Error::Config(format!("grid.dim must be 1 or 2, got {d}"))),
    }
}

fn load_snapshot(path: &str, grid: &Grid, what: &str) -> Result<Field> {
    let f = Field::load_csv(Path::new(path))
        .map_err(|e| Error::Config(format!("{what} file {path}: {e}")))?;
    if f.grid() != grid {
        return Err(Error::GridMismatch(format!(
            "{what} file {path} has grid {} but the configuration asks for {}",
            f.grid().metadata(),
            grid.metadata()
        )));
    }
    Ok(f)
}

/// `(1 + Π cos(m π x_i / L_i)) / 2`, which lies in `[0, 1]`.
fn raised_cosine(grid: &Grid, mode: u32, x: f64, y: f64) -> f64 {
    let m = mode as f64;
    let mut p = (m * PI * x / grid.extent(0)).cos();
    if grid.dim() == 2 {
        p *= (m * PI * y / grid.extent(1)).cos();
    }
    0.5 * (1.0 + p)
}

fn gaussian(grid: &Grid, center: f64, width: f64, x: f64, y: f64) -> f64 {
    let dx = x - center * grid.extent(0);
    let mut r2 = dx * dx;
    if grid.dim() == 2 {
        let dy = y - center * grid.extent(1);
        r2 += dy * dy;
    }
    (-r2 / (2.0 * width * width)).exp()
}

fn build_source(e: &ExperimentSection, grid: &Grid) -> Result<Field> {
    let a = e.g_amplitude;
    let gr = *grid;
    Ok(match e.g {
        SourcePreset::Constant => Field::constant(gr, a),
        SourcePreset::Sine => {
            let m = e.g_mode as f64;
            Field::from_fn(gr, |x, y| {
                let mut v = (m * PI * x / gr.extent(0)).sin();
                if gr.dim() == 2 {
                    v *= (m * PI * y / gr.extent(1)).sin();
                }
                a * v
            })
        }
        SourcePreset::Bump => {
            if !(e.g_width > 0.0) {
                return Err(Error::Config("experiment.g_width must be positive".into()));
            }
            Field::from_fn(gr, |x, y| a * gaussian(&gr, e.g_center, e.g_width, x, y))
        }
        SourcePreset::File => load_snapshot(e.g_file.as_deref().unwrap_or(""), grid, "g")?,
    })
}

fn build_initial(e: &ExperimentSection, grid: &Grid) -> Result<Field> {
    let (v, a) = (e.z0_value, e.z0_amplitude);
    let gr = *grid;
    Ok(match e.z0 {
        InitialPreset::Constant => Field::constant(gr, v),
        InitialPreset::Cosine => {
            Field::from_fn(gr, |x, y| v - a * raised_cosine(&gr, e.z0_mode, x, y))
        }
        InitialPreset::Bump => {
            if !(e.z0_width > 0.0) {
                return Err(Error::Config("experiment.z0_width must be positive".into()));
            }
            Field::from_fn(gr, |x, y| {
                v - a * gaussian(&gr, e.z0_center, e.z0_width, x, y)
            })
        }
        InitialPreset::File => load_snapshot(e.z0_file.as_deref().unwrap_or(""), grid, "z0")?,
    })
}

/// `‖1 − z‖_W` with the Neumann Laplacian.
pub fn distance_w(z: &Field) -> f64 {
    grid::norms(&z.map(|v| 1.0 - v), BoundaryMode::Neumann).w
}

/// Discrete sup of `‖v‖_∞ / ‖v‖_W` over the span of the cosine modes
/// `cos(m₁πx/L₁) cos(m₂πy/L₂)`, `m_i ≤ 8`, without the safety factor.
///
/// The modes are eigenvectors of the Neumann Laplacian and orthogonal under
/// the trapezoid weights, so the sup over their span is attained by the
/// Riesz representer of point evaluation and equals
/// `max_x (Σ_m φ_m(x)² / ‖φ_m‖_W²)^½`.
pub fn probe_sup_ratio(grid: &Grid) -> f64 {
    let gr = *grid;
    let top = |axis: usize| C_OMEGA_MAX_MODE.min(gr.nodes(axis) - 1);
    let my = if gr.dim() == 2 { top(1) } else { 0 };
    let mut acc = vec![0.0; gr.len()];
    for m2 in 0..=my {
        for m1 in 0..=top(0) {
            let phi = Field::from_fn(gr, |x, y| {
                let mut v = (m1 as f64 * PI * x / gr.extent(0)).cos();
                if gr.dim() == 2 {
                    v *= (m2 as f64 * PI * y / gr.extent(1)).cos();
                }
                v
            });
            let w2 = grid::norms(&phi, BoundaryMode::Neumann).w.powi(2);
            for (a, p) in acc.iter_mut().zip(phi.values()) {
                *a += p * p / w2;
            }
        }
    }
    acc.iter().copied().fold(0.0, f64::max).sqrt()
}

/// Default embedding constant: [`probe_sup_ratio`] times [`C_OMEGA_SAFETY`].
pub fn estimate_c_omega(grid: &Grid) -> f64 {
    C_OMEGA_SAFETY * probe_sup_ratio(grid)
}

impl Scenario {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let grid = build_grid(&config.grid)?;
        let g = build_source(&config.experiment, &grid)?;
        let z0 = build_initial(&config.experiment, &grid)?;
        Self::assemble(config.clone(), grid, g, z0)
    }

    /// Same configuration with a different initial damage.
    pub fn with_initial(&self, z0: Field) -> Result<Self> {
        if z0.grid() != &self.grid {
            return Err(Error::GridMismatch(format!(
                "{} vs {}",
                z0.grid().metadata(),
                self.grid.metadata()
            )));
        }
        let mut config = self.config.clone();
        config.solver.c_omega = Some(self.c_omega);
        let mut sc = Self::assemble(config, self.grid, self.g.clone(), z0)?;
        sc.config.solver.c_omega = self.config.solver.c_omega;
        sc.exec = self.exec;
        Ok(sc)
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    fn assemble(config: SimConfig, grid: Grid, g: Field, z0: Field) -> Result<Self> {
        let truncation = TruncationParams::new(config.truncation.delta)?;
        let law = match config.truncation.law {
            TruncationLaw::Smooth => CoefficientLaw::Truncated(truncation),
            TruncationLaw::IdentityFloor => {
                CoefficientLaw::IdentityFloor(IdentityFloor::new(truncation))
            }
        };
        let psi = config.potential.spec();
        psi.validate()?;
        let c_omega = config
            .solver
            .c_omega
            .unwrap_or_else(|| estimate_c_omega(&grid));
        if z0.max() > 1.0 {
            return Err(Error::Assumption(format!(
                "A3: z0 ≤ 1 violated, max z0 = {}",
                z0.max()
            )));
        }
        let eps = c_omega * distance_w(&z0);
        if !(eps <= EPS_MAX) {
            return Err(Error::Assumption(format!("A3: eps = {eps:.4} > 1/2")));
        }
        Ok(Scenario {
            config,
            grid,
            g,
            z0,
            truncation,
            law,
            psi,
            c_omega,
            eps,
            exec: Execution::default(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.truncation.delta()
    }

    fn solver(&self) -> Result<EllipticSolver> {
        Ok(
            EllipticSolver::new(self.config.solver.elliptic_tol, self.config.solver.epsilon)?
                .with_execution(self.exec),
        )
    }

    /// Displacement for damage `z`, warm-started from `guess`.
    pub fn displacement(&self, z: &Field, guess: Option<&Field>) -> Result<Field> {
        Ok(self.solver()?.solve(z, &self.g, &self.law, guess)?.u)
    }

    /// `ℓ = −½ T′(z)|∇u|²` with the configured stencil.
    pub fn load(&self, u: &Field, z: &Field) -> Result<Field> {
        match self.config.solver.load_stencil {
            LoadStencil::Variational => vi_stepper::assemble_load_variational(u, z, &self.law),
            LoadStencil::Centered => vi_stepper::assemble_load(u, z, &self.law),
        }
    }

    fn step(&self, z_prev: &Field, load: Field, tau: f64) -> Result<StepResult> {
        let input = StepInput::new(z_prev.clone(), load, tau)?;
        let tol = self.config.solver.step_tol;
        match self.config.solver.backend {
            Backend::Projected => {
                vi_stepper::step_projected_with(self.exec, &input, &self.psi, tol)
            }
            Backend::Yosida => vi_stepper::step_yosida_with(
                self.exec,
                &input,
                &self.psi,
                self.config.solver.lambda,
                tol,
            ),
        }
    }

    /// Theoretical existence time with the configured `c₃`.
    pub fn t0_theoretical(&self) -> Result<f64> {
        t0_formula(
            self.eps,
            &self.truncation,
            self.config.solver.c3,
            self.config.time.horizon,
        )
    }
}

/// The terms of the discrete energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParts {
    /// `½∫T(z)|∇u|²`.
    pub elastic: f64,
    /// `∫g u`.
    pub work: f64,
    /// `½∫|∇z|²`.
    pub interface: f64,
    /// `∫ψ(z)`.
    pub potential: f64,
    /// `ε/2 ∫|Δu|²`.
    pub biharmonic: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.elastic - self.work + self.interface + self.potential + self.biharmonic
    }
}

/// Discrete energy terms. Gradients are taken on cell faces so that the
/// elastic term matches the operator used by the solver.
pub fn energy_parts(z: &Field, u: &Field, sc: &Scenario) -> Result<EnergyParts> {
    grid::check_same(z, u)?;
    grid::check_same(z, &sc.g)?;
    let u0 = u.with_zero_boundary();
    let coeff = z.map(|r| sc.law.value(r));
    let elastic = 0.5 * grid::inner(&coeff, &grid::face_gradient_sq(&u0))?;
    let work = grid::inner(&sc.g, &u0)?;
    let interface = 0.5 * grid::integrate(&grid::face_gradient_sq(z));
    let potential = grid::integrate(&z.map(|r| sc.psi.psi(r)));
    let eps = sc.config.solver.epsilon;
    let biharmonic = if eps > 0.0 {
        0.5 * eps * grid::l2_norm(&grid::neg_laplacian_dirichlet(&u0)).powi(2)
    } else {
        0.0
    };
    Ok(EnergyParts {
        elastic,
        work,
        interface,
        potential,
        biharmonic,
    })
}

pub fn energy(z: &Field, u: &Field, sc: &Scenario) -> Result<f64> {
    Ok(energy_parts(z, u, sc)?.total())
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub z0: Field,
    pub u0: Field,
    pub e0: f64,
}

pub fn initial_state(sc: &Scenario) -> Result<InitialState> {
    let u0 = sc.displacement(&sc.z0, None)?;
    let e0 = energy(&sc.z0, &u0, sc)?;
    Ok(InitialState {
        z0: sc.z0.clone(),
        u0,
        e0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedgerEntry {
    pub t: f64,
    pub energy: f64,
    pub dissipation_cum: f64,
    pub balance_residual: f64,
    pub z_min: f64,
    pub y: f64,
    pub sqrt_y: f64,
    pub grad_u_l2: f64,
    pub laplace_u_l2: f64,
    pub laplace_u_l3: f64,
    pub comp_residual: f64,
    pub truncation_active: bool,
}

/// Per-step quantities that the ledger does not carry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub substeps: usize,
    pub newton_iterations: usize,
    /// `max (zⁿ − zⁿ⁻¹)₊`.
    pub max_increase: f64,
    pub xi_min: f64,
    /// `max |ξ (zⁿ − zⁿ⁻¹)|`.
    pub xi_gap_product: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub z: Field,
    pub u: Field,
    pub xi: Field,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    /// Entry `n` describes the state after step `n`; entry 0 is the initial state.
    pub ledger: Vec<EnergyLedgerEntry>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub snapshots: Vec<Snapshot>,
    pub events: Events,
}

impl Trajectory {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("a trajectory always has snapshots")
    }

    /// Ledger entries at or past the first degenerate time, i.e. states the
    /// local existence result does not cover.
    pub fn in_extended_regime(&self, entry: &EnergyLedgerEntry) -> bool {
        self.events.t_deg.is_some_and(|t| entry.t >= t)
    }
}

struct StepOutcome {
    z: Field,
    u: Field,
    xi: Field,
    dissipation: f64,
    comp_residual: f64,
    diag: StepDiagnostics,
}

fn l2_sq_diff(a: &Field, b: &Field) -> f64 {
    let g = a.grid();
    a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .map(|(k, (x, y))| g.weight(k) * (x - y) * (x - y))
        .sum()
}

/// One step of size `tau` from `(z_prev, u_prev = u(z_prev))`.
fn coupled_step(sc: &Scenario, z_prev: &Field, u_prev: &Field, tau: f64) -> Result<StepOutcome> {
    let mut load = sc.load(u_prev, z_prev)?;
    let mut res = sc.step(z_prev, load, tau)?;
    let mut u = sc.displacement(&res.z_new, Some(u_prev))?;
    let mut newton = res.newton_iterations;
    for _ in 1..sc.config.time.picard_iters {
        load = sc.load(&u, &res.z_new)?;
        res = sc.step(z_prev, load, tau)?;
        newton += res.newton_iterations;
        u = sc.displacement(&res.z_new, Some(&u))?;
    }
    let z = res.z_new;
    let d = l2_sq_diff(&z, z_prev);
    let mut max_increase: f64 = 0.0;
    let mut xi_gap: f64 = 0.0;
    for ((zn, zp), xi) in z.values().iter().zip(z_prev.values()).zip(res.xi.values()) {
        max_increase = max_increase.max(zn - zp);
        xi_gap = xi_gap.max((xi * (zn - zp)).abs());
    }
    Ok(StepOutcome {
        diag: StepDiagnostics {
            substeps: 1,
            newton_iterations: newton,
            max_increase,
            xi_min: res.xi.min(),
            xi_gap_product: xi_gap,
        },
        z,
        u,
        xi: res.xi,
        dissipation: d / tau,
        comp_residual: res.comp_residual,
    })
}

/// Advance by `tau`, splitting the step in two on failure.
fn advance(
    sc: &Scenario,
    z_prev: &Field,
    u_prev: &Field,
    tau: f64,
    depth: u32,
    t: f64,
) -> Result<StepOutcome> {
    match coupled_step(sc, z_prev, u_prev, tau) {
        Ok(out) => Ok(out),
        Err(e) if depth >= sc.config.time.max_halvings => Err(Error::StepRejected {
            t,
            tau_min: tau,
            source: Box::new(e),
        }),
        Err(_) => {
            let half = 0.5 * tau;
            let a = advance(sc, z_prev, u_prev, half, depth + 1, t)?;
            let b = advance(sc, &a.z, &a.u, half, depth + 1, t + half)?;
            Ok(StepOutcome {
                diag: StepDiagnostics {
                    substeps: a.diag.substeps + b.diag.substeps,
                    newton_iterations: a.diag.newton_iterations + b.diag.newton_iterations,
                    max_increase: a.diag.max_increase.max(b.diag.max_increase),
                    xi_min: a.diag.xi_min.min(b.diag.xi_min),
                    xi_gap_product: a.diag.xi_gap_product.max(b.diag.xi_gap_product),
                },
                dissipation: a.dissipation + b.dissipation,
                comp_residual: a.comp_residual.max(b.comp_residual),
                z: b.z,
                u: b.u,
                xi: b.xi,
            })
        }
    }
}

fn ledger_entry(
    sc: &Scenario,
    t: f64,
    z: &Field,
    u: &Field,
    dissipation_cum: f64,
    e0: f64,
    comp_residual: f64,
) -> Result<EnergyLedgerEntry> {
    let e = energy(z, u, sc)?;
    let y = (sc.c_omega * distance_w(z)).powi(2);
    let lap = grid::neg_laplacian_dirichlet(&u.with_zero_boundary());
    let z_min = z.min();
    Ok(EnergyLedgerEntry {
        t,
        energy: e,
        dissipation_cum,
        balance_residual: (e + dissipation_cum - e0).abs(),
        z_min,
        y,
        sqrt_y: y.sqrt(),
        grad_u_l2: grid::integrate(&grid::face_gradient_sq(&u.with_zero_boundary()))
            .max(0.0)
            .sqrt(),
        laplace_u_l2: grid::l2_norm(&lap),
        laplace_u_l3: grid::lp_norm(&lap, 3.0),
        comp_residual,
        truncation_active: z_min < 3.0 * sc.delta(),
    })
}

/// Number of steps and the length of the last one.
fn schedule(tau: f64, horizon: f64) -> (usize, f64) {
    let ratio = horizon / tau;
    let n = ratio.round();
    if (ratio - n).abs() <= 1e-9 * ratio.max(1.0) {
        (n.max(1.0) as usize, tau)
    } else {
        let n = ratio.ceil() as usize;
        (n, horizon - (n - 1) as f64 * tau)
    }
}

pub fn run(sc: &Scenario) -> Result<Trajectory> {
    let init = initial_state(sc)?;
    let tcfg = &sc.config.time;
    let (steps, last_tau) = schedule(tcfg.tau, tcfg.horizon);
    let three_delta = 3.0 * sc.delta();

    let mut z = init.z0;
    let mut u = init.u0;
    let mut xi = Field::zeros(sc.grid);
    let mut t = 0.0;
    let mut dissipation = 0.0;
    let mut ledger = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::with_capacity(steps);
    let mut snapshots = vec![Snapshot {
        step: 0,
        t,
        z: z.clone(),
        u: u.clone(),
        xi: xi.clone(),
    }];
    let first = ledger_entry(sc, t, &z, &u, 0.0, init.e0, 0.0)?;
    let mut t_deg = if first.truncation_active {
        Some(0.0)
    } else {
        None
    };
    ledger.push(first);

    for n in 1..=steps {
        let tau = if n == steps { last_tau } else { tcfg.tau };
        let out = advance(sc, &z, &u, tau, 0, t)?;
        t = if n == steps {
            tcfg.horizon
        } else {
            n as f64 * tcfg.tau
        };
        dissipation += out.dissipation;
        z = out.z;
        u = out.u;
        xi = out.xi;
        diagnostics.push(out.diag);
        let entry = ledger_entry(sc, t, &z, &u, dissipation, init.e0, out.comp_residual)?;
        let crossed = t_deg.is_none() && z.min() < three_delta;
        if crossed {
            t_deg = Some(t);
        }
        ledger.push(entry);
        if crossed || n % tcfg.snapshot_every == 0 || n == steps {
            snapshots.push(Snapshot {
                step: n,
                t,
                z: z.clone(),
                u: u.clone(),
                xi: xi.clone(),
            });
        }
    }

    let eps2 = sc.eps * sc.eps;
    let c3_fitted = fit_c3(&ledger, &sc.truncation, eps2)?;
    Ok(Trajectory {
        grid: sc.grid,
        ledger,
        diagnostics,
        snapshots,
        events: Events {
            t_deg,
            t0_theoretical: sc.t0_theoretical()?,
            c3_fitted,
            delta: sc.delta(),
            c_omega: sc.c_omega,
            eps: sc.eps,
        },
    })
}

/// Run several scenarios concurrently; results keep the input order.
pub fn run_many(exec: Execution, scenarios: &[Scenario]) -> Vec<Result<Trajectory>> {
    crate::par::map_items(exec, scenarios, |sc| {
        run(&sc.clone().with_execution(Execution::Sequential))
    })
}
