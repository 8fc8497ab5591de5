//! Displacement solves: `−div(T(z)∇u) = g` with `u = 0` on the boundary, and
//! the fourth-order variant `εΔ²u − div(T(z)∇u) = g` with `u = Δu = 0`.
//!
//! The fourth-order operator is assembled in mixed form: with `v = −Δ_D u`
//! the Navier conditions become homogeneous Dirichlet data for both `u` and
//! `v`, and the composite operator `A_T + ε D²` stays symmetric positive
//! definite, so a single CG solve covers both problems.

use crate::error::{Error, Result};
use crate::grid::{self, check_same, Field, Grid};
use crate::linalg::{self, pcg};
use crate::par::Execution;
use crate::potentials::Stiffness;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticSolveReport {
    pub u: Field,
    pub iterations: usize,
    /// Relative residual `‖(A u − g)|_interior‖ / ‖g|_interior‖`.
    pub residual_l2: f64,
    /// `min T(z)`.
    pub coeff_min: f64,
}

/// Reusable solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticSolver {
    pub tol: f64,
    /// Biharmonic weight; `0` gives the second-order problem.
    pub epsilon: f64,
    pub exec: Execution,
}

impl Default for EllipticSolver {
    fn default() -> Self {
        EllipticSolver {
            tol: DEFAULT_TOL,
            epsilon: 0.0,
            exec: Execution::default(),
        }
    }
}

/// `50·N^{1/dim}` iterations for `N` nodes.
pub fn iteration_cap(g: &Grid) -> usize {
    let n = g.len() as f64;
    (50.0 * n.powf(1.0 / g.dim() as f64)).ceil() as usize
}

impl EllipticSolver {
    pub fn new(tol: f64, epsilon: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must be positive, got {tol}"
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(EllipticSolver {
            tol,
            epsilon,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Solve with an optional initial guess (boundary values are ignored).
    pub fn solve<S: Stiffness + ?Sized>(
        &self,
        z: &Field,
        g: &Field,
        law: &S,
        guess: Option<&Field>,
    ) -> Result<EllipticSolveReport> {
        check_same(z, g)?;
        if let Some(u0) = guess {
            check_same(z, u0)?;
        }
        let grid = *z.grid();
        let coeff: Vec<f64> = z.values().iter().map(|&r| law.value(r)).collect();
        let coeff_min = coeff.iter().copied().fold(f64::INFINITY, f64::min);
        debug_assert!(coeff_min >= law.floor() * (1.0 - 1e-15));

        let n = grid.len();
        let rhs: Vec<f64> = (0..n)
            .map(|k| {
                if grid.is_boundary(k) {
                    0.0
                } else {
                    g.values()[k]
                }
            })
            .collect();
        let diag = operator_diagonal(&grid, &coeff, self.epsilon);
        let precond: Vec<f64> = diag
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
            .collect();
        let mut x = match guess {
            Some(u0) => u0.with_zero_boundary().into_values(),
            None => vec![0.0; n],
        };
        let exec = self.exec;
        let eps = self.epsilon;
        let mut tmp = vec![0.0; n];
        let mut dd = vec![0.0; n];
        let apply = |v: &[f64], out: &mut [f64]| {
            grid::div_coeff_grad_raw(&grid, exec, &coeff, v, out);
            if eps > 0.0 {
                grid::neg_laplacian_dirichlet_raw(&grid, exec, v, &mut tmp);
                grid::neg_laplacian_dirichlet_raw(&grid, exec, &tmp, &mut dd);
                for (o, d) in out.iter_mut().zip(&dd) {
                    *o += eps * d;
                }
            }
        };
        let outcome = pcg(
            apply,
            &precond,
            &rhs,
            &mut x,
            self.tol,
            iteration_cap(&grid),
        )?;

        let u = Field::from_raw(grid, x);
        let residual_l2 = self.relative_residual(&u, &coeff, &rhs);
        Ok(EllipticSolveReport {
            u,
            iterations: outcome.iterations,
            residual_l2,
            coeff_min,
        })
    }

    fn relative_residual(&self, u: &Field, coeff: &[f64], rhs: &[f64]) -> f64 {
        let grid = *u.grid();
        let mut au = vec![0.0; grid.len()];
        grid::div_coeff_grad_raw(&grid, self.exec, coeff, u.values(), &mut au);
        if self.epsilon > 0.0 {
            let d = grid::neg_laplacian_dirichlet(u);
            let dd = grid::neg_laplacian_dirichlet(&d);
            for (a, x) in au.iter_mut().zip(dd.values()) {
                *a += self.epsilon * x;
            }
        }
        let r: Vec<f64> = au.iter().zip(rhs).map(|(a, b)| a - b).collect();
        let b = linalg::norm2(rhs);
        if b == 0.0 {
            linalg::norm2(&r)
        } else {
            linalg::norm2(&r) / b
        }
    }
}

/// Diagonal of `A_a + ε D²` on interior nodes, zero on the boundary.
fn operator_diagonal(grid: &Grid, coeff: &[f64], epsilon: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            if grid.is_boundary(k) {
                return 0.0;
            }
            let (i, j) = grid.ij(k);
            let mut a_diag = 0.0;
            let mut d_diag = 0.0;
            let mut off_sq = 0.0;
            for axis in 0..grid.dim() {
                let h2 = grid.spacing(axis).powi(2);
                let s = if axis == 0 { 1 } else { grid.nodes(0) };
                a_diag += (0.5 * (coeff[k] + coeff[k - s]) + 0.5 * (coeff[k] + coeff[k + s])) / h2;
                d_diag += 2.0 / h2;
                let (a, n) = if axis == 0 {
                    (i, grid.nodes(0))
                } else {
                    (j, grid.nodes(1))
                };
                if a >= 2 {
                    off_sq += 1.0 / (h2 * h2);
                }
                if a + 2 < n {
                    off_sq += 1.0 / (h2 * h2);
                }
            }
            a_diag + epsilon * (d_diag * d_diag + off_sq)
        })
        .collect()
}

/// Conjugate-gradient solve of `−div(T(z)∇u) = g`.
pub fn solve_elliptic<S: Stiffness + ?Sized>(
    z: &Field,
    g: &Field,
    law: &S,
    tol: f64,
) -> Result<EllipticSolveReport> {
    EllipticSolver::new(tol, 0.0)?.solve(z, g, law, None)
}

/// Solve `εΔ²u − div(T(z)∇u) = g` with `u = Δu = 0` on the boundary.
/// `epsilon = 0` is exactly [`solve_elliptic`].
pub fn solve_elliptic_regularized<S: Stiffness + ?Sized>(
    z: &Field,
    g: &Field,
    law: &S,
    epsilon: f64,
    tol: f64,
) -> Result<EllipticSolveReport> {
    EllipticSolver::new(tol, epsilon)?.solve(z, g, law, None)
}

/// `|⟨T(z)∇u, ∇u⟩ − ⟨g, u⟩| / max(1, |⟨g, u⟩|)` in the discrete inner
/// products the solver is built on.
pub fn energy_identity_check<S: Stiffness + ?Sized>(
    z: &Field,
    u: &Field,
    g: &Field,
    law: &S,
) -> Result<f64> {
    check_same(z, u)?;
    check_same(z, g)?;
    let u0 = u.with_zero_boundary();
    let coeff = z.map(|r| law.value(r));
    let elastic = grid::inner(&coeff, &grid::face_gradient_sq(&u0))?;
    let work = grid::inner(g, &u0)?;
    Ok((elastic - work).abs() / work.abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::TruncationParams;
    use std::f64::consts::PI;

    fn setup(n: usize) -> (Grid, Field) {
        let g = Grid::unit_interval(n).unwrap();
        let rhs = Field::from_fn(g, |x, _| PI * PI * (PI * x).sin());
        (g, rhs)
    }

    #[test]
    fn manufactured_sine_is_recovered() {
        let p = TruncationParams::default();
        let (g, rhs) = setup(129);
        let rep = solve_elliptic(&Field::constant(g, 1.0), &rhs, &p, 1e-12).unwrap();
        let exact = Field::from_fn(g, |x, _| (PI * x).sin());
        let err = rep.u.max_abs_diff(&exact).unwrap();
        assert!(err < 1e-4, "err {err}");
        assert!(rep.residual_l2 <= 1e-12);
        assert_eq!(rep.coeff_min, 1.0);
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let p = TruncationParams::default();
        let g = Grid::unit_interval(33).unwrap();
        let rep = solve_elliptic(&Field::constant(g, 0.7), &Field::zeros(g), &p, 1e-10).unwrap();
        assert_eq!(rep.u.max_abs(), 0.0);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn constant_coefficient_scales_solution() {
        let p = TruncationParams::default();
        let (g, rhs) = setup(65);
        let u1 = solve_elliptic(&Field::constant(g, 1.0), &rhs, &p, 1e-12)
            .unwrap()
            .u;
        let c = 0.4;
        let uc = solve_elliptic(&Field::constant(g, c), &rhs, &p, 1e-12)
            .unwrap()
            .u;
        let scaled = u1.map(|v| v / c);
        assert!(uc.max_abs_diff(&scaled).unwrap() < 1e-9);
    }

    #[test]
    fn coefficient_floor_holds_for_fully_damaged_state() {
        let p = TruncationParams::new(1.0 / 24.0).unwrap();
        let (g, rhs) = setup(33);
        let rep = solve_elliptic(&Field::constant(g, -0.5), &rhs, &p, 1e-10).unwrap();
        assert!((rep.coeff_min - 2.0 * p.delta()).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_manufactured_solution() {
        let p = TruncationParams::default();
        let err = |n: usize| {
            let g = Grid::new_2d([1.0, 1.0], [n, n]).unwrap();
            let z = Field::from_fn(g, |x, y| 0.8 + 0.1 * x * y);
            let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
            // g = −div(z∇u) for z = 0.8 + 0.1xy
            let src = Field::from_fn(g, |x, y| {
                let zz = 0.8 + 0.1 * x * y;
                let ux = PI * (PI * x).cos() * (PI * y).sin();
                let uy = PI * (PI * x).sin() * (PI * y).cos();
                2.0 * PI * PI * zz * exact(x, y) - 0.1 * y * ux - 0.1 * x * uy
            });
            let rep = solve_elliptic(&z, &src, &p, 1e-12).unwrap();
            rep.u.max_abs_diff(&Field::from_fn(g, exact)).unwrap()
        };
        let ratio = err(17) / err(33);
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn regularized_reduces_at_zero_epsilon() {
        let p = TruncationParams::default();
        let (g, rhs) = setup(65);
        let z = Field::from_fn(g, |x, _| 0.9 - 0.2 * x);
        let a = solve_elliptic(&z, &rhs, &p, 1e-11).unwrap();
        let b = solve_elliptic_regularized(&z, &rhs, &p, 0.0, 1e-11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regularized_fourier_mode() {
        let p = TruncationParams::default();
        let eps = 1e-3;
        let (g, rhs) = setup(129);
        let rep =
            solve_elliptic_regularized(&Field::constant(g, 1.0), &rhs, &p, eps, 1e-12).unwrap();
        let exact = Field::from_fn(g, |x, _| (PI * x).sin() / (1.0 + eps * PI * PI));
        assert!(rep.u.max_abs_diff(&exact).unwrap() < 1e-4);
    }

    #[test]
    fn identity_check_detects_corruption() {
        let p = TruncationParams::default();
        let (g, rhs) = setup(65);
        let z = Field::from_fn(g, |x, _| 1.0 - 0.3 * x * x);
        let tol = 1e-10;
        let rep = solve_elliptic(&z, &rhs, &p, tol).unwrap();
        let ok = energy_identity_check(&z, &rep.u, &rhs, &p).unwrap();
        assert!(ok <= 10.0 * tol, "{ok}");
        let mut bad = rep.u.clone().into_values();
        bad[20] += 1.0;
        let bad = Field::new(g, bad).unwrap();
        assert!(energy_identity_check(&z, &bad, &rhs, &p).unwrap() > tol);
        let zero = Field::zeros(g);
        assert_eq!(energy_identity_check(&z, &zero, &zero, &p).unwrap(), 0.0);
    }

    #[test]
    fn cap_scales_with_axis_length() {
        assert_eq!(iteration_cap(&Grid::unit_interval(129).unwrap()), 6450);
        assert_eq!(
            iteration_cap(&Grid::new_2d([1.0, 1.0], [129, 129]).unwrap()),
            6450
        );
    }
}
