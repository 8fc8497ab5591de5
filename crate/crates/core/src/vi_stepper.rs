//! One implicit Euler step of the damage inclusion
//!
//! ```text
//! α(z_t) + z_t − Δz + ψ′(z) ∋ ℓ,    α = ∂I_{(−∞,0]},
//! ```
//!
//! with the load `ℓ` frozen over the step. Writing `ξ ∈ α(z_t)` for the
//! multiplier, the discrete problem at every node is the complementarity
//! system
//!
//! ```text
//! (z − z_prev)/τ − Δ_N z + ψ′(z) + ξ = ℓ,   ξ ≥ 0,   z ≤ z_prev,   ξ (z_prev − z) = 0,
//! ```
//!
//! solved by semismooth Newton on `min(ξ, (z_prev − z)/τ) = 0`. The Yosida
//! backend replaces `α` by `α_λ(r) = r₊/λ` and solves a single-valued
//! equation instead.
//!
//! The Neumann Laplacian is symmetric in the trapezoid-weighted inner product,
//! so every Newton system is solved by CG after multiplying by the weights.

use crate::error::{Error, Result};
use crate::grid::{self, check_same, Field, Grid};
use crate::linalg::pcg;
use crate::par::Execution;
use crate::potentials::{PotentialSpec, Stiffness};

pub const NEWTON_MAX_ITER: usize = 100;
const LINE_SEARCH_HALVINGS: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct StepInput {
    pub z_prev: Field,
    /// `ℓ = −½ T′(z)|∇u|²`.
    pub load: Field,
    pub tau: f64,
}

impl StepInput {
    pub fn new(z_prev: Field, load: Field, tau: f64) -> Result<Self> {
        check_same(&z_prev, &load)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {tau}"
            )));
        }
        Ok(StepInput { z_prev, load, tau })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub z_new: Field,
    /// Nodal selection of `α(z_t)` (or `α_λ(z_t)` for the Yosida backend).
    pub xi: Field,
    pub newton_iterations: usize,
    /// Projected backend: `max |min(ξ, (z_prev − z_new)/τ)|`.
    /// Yosida backend: max nodal residual of the regularised equation.
    pub comp_residual: f64,
    /// `max (z_new − z_prev)₊`.
    pub max_violation: f64,
}

/// Nodal residual `(z − z_prev)/τ − Δ_N z + ψ′(z) − ℓ`.
fn pde_residual(input: &StepInput, spec: &PotentialSpec, z: &[f64], exec: Execution) -> Vec<f64> {
    let g = input.z_prev.grid();
    let mut lap = vec![0.0; z.len()];
    grid::laplacian_neumann_raw(g, exec, z, &mut lap);
    let zp = input.z_prev.values();
    let l = input.load.values();
    (0..z.len())
        .map(|k| (z[k] - zp[k]) / input.tau - lap[k] + spec.psi_prime(z[k]) - l[k])
        .collect()
}

/// Solve `(diag − Δ_N) x = rhs` on the nodes where `free[k]`, with `x = 0`
/// elsewhere.
fn solve_newton_system(
    g: &Grid,
    exec: Execution,
    diag: &[f64],
    free: &[bool],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = g.len();
    let w = g.weights();
    let lap_diag: Vec<f64> = (0..n)
        .map(|_| {
            (0..g.dim())
                .map(|a| 2.0 / g.spacing(a).powi(2))
                .sum::<f64>()
        })
        .collect();
    let precond: Vec<f64> = (0..n)
        .map(|k| {
            if free[k] {
                1.0 / (w[k] * (diag[k] + lap_diag[k]))
            } else {
                0.0
            }
        })
        .collect();
    let b: Vec<f64> = (0..n)
        .map(|k| if free[k] { w[k] * rhs[k] } else { 0.0 })
        .collect();
    let mut lap = vec![0.0; n];
    let apply = |x: &[f64], out: &mut [f64]| {
        grid::laplacian_neumann_raw(g, exec, x, &mut lap);
        for k in 0..n {
            out[k] = if free[k] {
                w[k] * (diag[k] * x[k] - lap[k])
            } else {
                0.0
            };
        }
    };
    let mut x = vec![0.0; n];
    pcg(apply, &precond, &b, &mut x, 1e-14, 20 * n + 200)?;
    Ok(x)
}

/// Residual level below which rounding dominates: the residual is a sum of
/// terms of size up to `stiffness · max|z|`.
fn rounding_floor(g: &Grid, stiffness: f64, z: &[f64]) -> f64 {
    let lap: f64 = (0..g.dim()).map(|a| 4.0 / g.spacing(a).powi(2)).sum();
    64.0 * f64::EPSILON * (stiffness + lap) * max_abs(z).max(1.0)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn complementarity(
    input: &StepInput,
    spec: &PotentialSpec,
    z: &[f64],
    exec: Execution,
) -> (Vec<f64>, Vec<f64>) {
    let r = pde_residual(input, spec, z, exec);
    let zp = input.z_prev.values();
    let xi_candidate: Vec<f64> = r.iter().map(|v| -v).collect();
    let phi = (0..z.len())
        .map(|k| xi_candidate[k].min((zp[k] - z[k]) / input.tau))
        .collect();
    (phi, xi_candidate)
}

/// Exact complementarity step (the irreversibility constraint holds to
/// rounding).
pub fn step_projected(input: &StepInput, spec: &PotentialSpec, tol: f64) -> Result<StepResult> {
    step_projected_with(Execution::default(), input, spec, tol)
}

pub fn step_projected_with(
    exec: Execution,
    input: &StepInput,
    spec: &PotentialSpec,
    tol: f64,
) -> Result<StepResult> {
    let grid = *input.z_prev.grid();
    let n = grid.len();
    let zp = input.z_prev.values();
    let tau = input.tau;
    let mut z = zp.to_vec();
    let (mut phi, mut xi_c) = complementarity(input, spec, &z, exec);
    let mut iterations = 0;
    let tol = tol.max(rounding_floor(
        &grid,
        1.0 / tau + spec.second_derivative_bound(),
        zp,
    ));

    while max_abs(&phi) > tol {
        if iterations == NEWTON_MAX_ITER {
            return Err(Error::NewtonStagnation {
                iterations,
                residual: max_abs(&phi),
            });
        }
        iterations += 1;
        let gap: Vec<f64> = (0..n).map(|k| (zp[k] - z[k]) / tau).collect();
        let active: Vec<bool> = (0..n).map(|k| gap[k] <= xi_c[k]).collect();
        let free: Vec<bool> = active.iter().map(|a| !a).collect();

        // active rows pin z to z_prev; the rest solve the linearised PDE
        let mut dz_active = vec![0.0; n];
        for k in 0..n {
            if active[k] {
                dz_active[k] = zp[k] - z[k];
            }
        }
        let diag: Vec<f64> = z.iter().map(|&v| 1.0 / tau + spec.psi_second(v)).collect();
        let mut lap = vec![0.0; n];
        grid::laplacian_neumann_raw(&grid, exec, &dz_active, &mut lap);
        let rhs: Vec<f64> = (0..n)
            .map(|k| xi_c[k] - (diag[k] * dz_active[k] - lap[k]))
            .collect();
        let dz_free = solve_newton_system(&grid, exec, &diag, &free, &rhs)?;

        let merit = norm(&phi);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..LINE_SEARCH_HALVINGS {
            let trial: Vec<f64> = (0..n)
                .map(|k| {
                    if active[k] && t == 1.0 {
                        zp[k]
                    } else {
                        z[k] + t * (dz_active[k] + dz_free[k])
                    }
                })
                .collect();
            let (phi_t, xi_t) = complementarity(input, spec, &trial, exec);
            if norm(&phi_t) <= (1.0 - 1e-4 * t) * merit || max_abs(&phi_t) <= tol {
                z = trial;
                phi = phi_t;
                xi_c = xi_t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonStagnation {
                iterations,
                residual: max_abs(&phi),
            });
        }
    }

    // clamp rounding-level excursions above the obstacle
    for k in 0..n {
        if z[k] > zp[k] {
            z[k] = zp[k];
        }
    }
    let (phi, xi_c) = complementarity(input, spec, &z, exec);
    let comp_residual = max_abs(&phi);
    if comp_residual > tol {
        return Err(Error::NewtonStagnation {
            iterations,
            residual: comp_residual,
        });
    }
    let xi: Vec<f64> = (0..n)
        .map(|k| if z[k] == zp[k] { xi_c[k].max(0.0) } else { 0.0 })
        .collect();
    Ok(StepResult {
        z_new: Field::from_raw(grid, z),
        xi: Field::from_raw(grid, xi),
        newton_iterations: iterations,
        comp_residual,
        max_violation: 0.0,
    })
}

fn yosida_residual(
    input: &StepInput,
    spec: &PotentialSpec,
    lambda: f64,
    z: &[f64],
    exec: Execution,
) -> Vec<f64> {
    let zp = input.z_prev.values();
    let mut r = pde_residual(input, spec, z, exec);
    for k in 0..z.len() {
        r[k] += ((z[k] - zp[k]) / input.tau).max(0.0) / lambda;
    }
    r
}

/// Step with the Yosida approximation `α_λ(r) = r₊/λ` in place of `α`.
pub fn step_yosida(
    input: &StepInput,
    spec: &PotentialSpec,
    lambda: f64,
    tol: f64,
) -> Result<StepResult> {
    step_yosida_with(Execution::default(), input, spec, lambda, tol)
}

pub fn step_yosida_with(
    exec: Execution,
    input: &StepInput,
    spec: &PotentialSpec,
    lambda: f64,
    tol: f64,
) -> Result<StepResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Yosida parameter must be positive, got {lambda}"
        )));
    }
    let grid = *input.z_prev.grid();
    let n = grid.len();
    let zp = input.z_prev.values();
    let tau = input.tau;
    let mut z = zp.to_vec();
    let mut r = yosida_residual(input, spec, lambda, &z, exec);
    let mut iterations = 0;
    let stiffness = (1.0 + 1.0 / lambda) / tau + spec.second_derivative_bound();
    let tol = tol.max(rounding_floor(&grid, stiffness, zp));
    let free = vec![true; n];

    while max_abs(&r) > tol {
        if iterations == NEWTON_MAX_ITER {
            return Err(Error::NewtonStagnation {
                iterations,
                residual: max_abs(&r),
            });
        }
        iterations += 1;
        // generalized derivative of r₊ taken as 1 at r = 0 for rows
        // approaching from above
        let diag: Vec<f64> = (0..n)
            .map(|k| {
                let stiff = if z[k] > zp[k] {
                    1.0 / (lambda * tau)
                } else {
                    0.0
                };
                1.0 / tau + stiff + spec.psi_second(z[k])
            })
            .collect();
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let dz = solve_newton_system(&grid, exec, &diag, &free, &rhs)?;
        let merit = norm(&r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..LINE_SEARCH_HALVINGS {
            let trial: Vec<f64> = (0..n).map(|k| z[k] + t * dz[k]).collect();
            let r_t = yosida_residual(input, spec, lambda, &trial, exec);
            if norm(&r_t) <= (1.0 - 1e-4 * t) * merit || max_abs(&r_t) <= tol {
                z = trial;
                r = r_t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonStagnation {
                iterations,
                residual: max_abs(&r),
            });
        }
    }
    let xi: Vec<f64> = (0..n)
        .map(|k| ((z[k] - zp[k]) / tau).max(0.0) / lambda)
        .collect();
    let max_violation = (0..n).fold(0.0f64, |m, k| m.max(z[k] - zp[k]));
    Ok(StepResult {
        z_new: Field::from_raw(grid, z),
        xi: Field::from_raw(grid, xi),
        newton_iterations: iterations,
        comp_residual: max_abs(&r),
        max_violation,
    })
}

/// `−½ T′(z) |∇u|²` with the centered-difference [`grid::gradient_sq`].
pub fn assemble_load<S: Stiffness + ?Sized>(u: &Field, z: &Field, law: &S) -> Result<Field> {
    check_same(u, z)?;
    load_from(z, &grid::gradient_sq(u), law)
}

/// `−½ T′(z) |∇u|²` with the face-based [`grid::face_gradient_sq`]; this is
/// minus the nodal derivative of the discrete elastic energy, which keeps the
/// discrete energy balance free of an `O(h)` boundary defect.
pub fn assemble_load_variational<S: Stiffness + ?Sized>(
    u: &Field,
    z: &Field,
    law: &S,
) -> Result<Field> {
    check_same(u, z)?;
    load_from(z, &grid::face_gradient_sq(&u.with_zero_boundary()), law)
}

fn load_from<S: Stiffness + ?Sized>(z: &Field, grad_sq: &Field, law: &S) -> Result<Field> {
    z.zip_map(grad_sq, |zz, gs| {
        let v = -0.5 * law.derivative(zz) * gs;
        // avoid −0.0 so snapshots print cleanly
        if v == 0.0 {
            0.0
        } else {
            v
        }
    })
}

/// `½⟨−Δ_N z, z⟩ + ∫ψ(z) − ∫ℓ z`: the functional whose constrained
/// minimizing movement is one projected step.
pub fn free_energy(z: &Field, load: &Field, spec: &PotentialSpec) -> Result<f64> {
    let lap = grid::laplacian_neumann(z);
    let interface = -0.5 * grid::inner(&lap, z)?;
    let potential = grid::integrate(&z.map(|r| spec.psi(r)));
    let work = grid::inner(load, z)?;
    Ok(interface + potential - work)
}
