//! Scalar functions of the model: the truncation `T_δ` of the elastic
//! coefficient, the configuration potential `ψ`, the reciprocal `φ_δ`, the
//! barrier `B_δ` with its inverse, and the explicit local-existence time `T₀`.

use crate::error::{Error, Result};

/// Largest admissible truncation parameter.
pub const DELTA_MAX: f64 = 1.0 / 12.0;

/// Elastic stiffness law `r ↦ T(r)` applied to the damage field.
pub trait Stiffness: Sync {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    /// Guaranteed lower bound of [`Stiffness::value`].
    fn floor(&self) -> f64;
    fn delta(&self) -> f64;
}

/// The `C^{1,1}` truncation `T_δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationParams {
    delta: f64,
}

impl TruncationParams {
    pub fn new(delta: f64) -> Result<Self> {
        // 1/12 is accepted up to rounding of user input such as "0.0833333333333333"
        if !(delta > 0.0 && delta <= DELTA_MAX * (1.0 + 1e-12)) {
            return Err(Error::Assumption(format!(
                "δ ∈ (0,1/12] violated: delta = {delta}"
            )));
        }
        Ok(TruncationParams {
            delta: delta.min(DELTA_MAX),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Default for TruncationParams {
    fn default() -> Self {
        TruncationParams { delta: DELTA_MAX }
    }
}

pub fn t_delta(r: f64, p: &TruncationParams) -> f64 {
    let d = p.delta;
    if r >= 3.0 * d {
        r
    } else if r <= d {
        2.0 * d
    } else {
        2.0 * d + (r - d) * (r - d) / (4.0 * d)
    }
}

pub fn t_delta_prime(r: f64, p: &TruncationParams) -> f64 {
    let d = p.delta;
    if r >= 3.0 * d {
        1.0
    } else if r <= d {
        0.0
    } else {
        (r - d) / (2.0 * d)
    }
}

impl Stiffness for TruncationParams {
    fn value(&self, r: f64) -> f64 {
        t_delta(r, self)
    }
    fn derivative(&self, r: f64) -> f64 {
        t_delta_prime(r, self)
    }
    fn floor(&self) -> f64 {
        2.0 * self.delta
    }
    fn delta(&self) -> f64 {
        self.delta
    }
}

/// `max(r, 2δ)`: the untruncated coefficient with only a safety floor.
///
/// On states with `z ≥ 3δ` it coincides with [`TruncationParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityFloor {
    delta: f64,
}

impl IdentityFloor {
    pub fn new(p: TruncationParams) -> Self {
        IdentityFloor { delta: p.delta }
    }
}

impl Stiffness for IdentityFloor {
    fn value(&self, r: f64) -> f64 {
        r.max(2.0 * self.delta)
    }
    fn derivative(&self, r: f64) -> f64 {
        if r > 2.0 * self.delta {
            1.0
        } else {
            0.0
        }
    }
    fn floor(&self) -> f64 {
        2.0 * self.delta
    }
    fn delta(&self) -> f64 {
        self.delta
    }
}

/// Either stiffness law, as a concrete value that can be stored in configs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoefficientLaw {
    Truncated(TruncationParams),
    IdentityFloor(IdentityFloor),
}

impl CoefficientLaw {
    fn inner(&self) -> &dyn Stiffness {
        match self {
            CoefficientLaw::Truncated(p) => p,
            CoefficientLaw::IdentityFloor(p) => p,
        }
    }
}

impl Stiffness for CoefficientLaw {
    fn value(&self, r: f64) -> f64 {
        self.inner().value(r)
    }
    fn derivative(&self, r: f64) -> f64 {
        self.inner().derivative(r)
    }
    fn floor(&self) -> f64 {
        self.inner().floor()
    }
    fn delta(&self) -> f64 {
        self.inner().delta()
    }
}

/// Configuration potential `ψ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialSpec {
    /// `ψ(r) = r² − w r`.
    Quadratic { w: f64 },
    /// `r² − w r + a₃ r³` on `[−2, 2]`, continued outside by its second
    /// order Taylor polynomial at `±2` so that `ψ ∈ C²` with bounded `ψ″`.
    CubicCore { w: f64, a3: f64 },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Quadratic { w: 3.0 }
    }
}

const CORE_RADIUS: f64 = 2.0;

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        let (w, a3) = match *self {
            PotentialSpec::Quadratic { w } => (w, 0.0),
            PotentialSpec::CubicCore { w, a3 } => (w, a3),
        };
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::Assumption(format!(
                "A1: threshold w must be finite and nonnegative, got {w}"
            )));
        }
        // ψ″(±2) ≥ 1 keeps the quadratic tails coercive
        if !(a3.is_finite() && a3.abs() <= 1.0 / 12.0) {
            return Err(Error::Assumption(format!(
                "A1: cubic coefficient must satisfy |a3| ≤ 1/12, got {a3}"
            )));
        }
        Ok(())
    }

    fn core(w: f64, a3: f64, r: f64) -> (f64, f64, f64) {
        (
            r * r - w * r + a3 * r * r * r,
            2.0 * r - w + 3.0 * a3 * r * r,
            2.0 + 6.0 * a3 * r,
        )
    }

    /// `(ψ, ψ′, ψ″)` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            PotentialSpec::Quadratic { w } => (r * r - w * r, 2.0 * r - w, 2.0),
            PotentialSpec::CubicCore { w, a3 } => {
                if r.abs() <= CORE_RADIUS {
                    Self::core(w, a3, r)
                } else {
                    let r0 = CORE_RADIUS.copysign(r);
                    let (q, dq, ddq) = Self::core(w, a3, r0);
                    let s = r - r0;
                    (q + dq * s + 0.5 * ddq * s * s, dq + ddq * s, ddq)
                }
            }
        }
    }

    pub fn psi(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    pub fn psi_prime(&self, r: f64) -> f64 {
        self.eval(r).1
    }

    pub fn psi_second(&self, r: f64) -> f64 {
        self.eval(r).2
    }

    /// Bound on `|ψ″|`.
    pub fn second_derivative_bound(&self) -> f64 {
        match *self {
            PotentialSpec::Quadratic { .. } => 2.0,
            PotentialSpec::CubicCore { a3, .. } => 2.0 + 6.0 * a3.abs() * CORE_RADIUS,
        }
    }

    /// `c` with `ψ(r) ≥ r²/2 − c` on all of ℝ, when known in closed form.
    pub fn coercivity_constant(&self) -> Option<f64> {
        match *self {
            // r² − wr − r²/2 = ½(r − w)² − w²/2
            PotentialSpec::Quadratic { w } => Some(0.5 * w * w),
            PotentialSpec::CubicCore { .. } => None,
        }
    }

    pub fn is_convex(&self) -> bool {
        match *self {
            PotentialSpec::Quadratic { .. } => true,
            PotentialSpec::CubicCore { a3, .. } => a3 == 0.0,
        }
    }
}

/// `φ_δ(r) = 1 / T_δ(1 − r)`.
pub fn phi_delta(r: f64, p: &TruncationParams) -> f64 {
    1.0 / t_delta(1.0 - r, p)
}

/// Integrand of the barrier `B_δ`.
pub fn b_integrand(r: f64, p: &TruncationParams) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "barrier integrand needs r ≥ 0, got {r}"
        )));
    }
    Ok(integrand(r, p))
}

fn integrand(r: f64, p: &TruncationParams) -> f64 {
    let phi = phi_delta(r.sqrt(), p);
    let phi2 = phi * phi;
    1.0 / ((1.0 + r.powi(5)) * (1.0 + phi2 * phi2))
}

/// `1 / (1 + φ_δ⁴(√r))`, the integrand of the bounds sandwiching `B_δ`.
pub fn sandwich_integrand(r: f64, p: &TruncationParams) -> f64 {
    let phi = phi_delta(r.max(0.0).sqrt(), p);
    let phi2 = phi * phi;
    1.0 / (1.0 + phi2 * phi2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierEval {
    pub s: f64,
    pub value: f64,
    pub quadrature_error_bound: f64,
}

/// Absolute tolerance of the barrier quadrature.
pub const BARRIER_TOL: f64 = 1e-12;

/// Upper end of the bracket searched by [`b_inverse`].
pub const BARRIER_S_MAX: f64 = 4.0;

fn barrier_breakpoints(s: f64, p: &TruncationParams) -> Vec<f64> {
    let d = p.delta;
    let mut pts = vec![0.0];
    for kink in [(1.0 - 3.0 * d).powi(2), (1.0 - d).powi(2)] {
        if kink < s {
            pts.push(kink);
        }
    }
    pts.push(s);
    pts
}

/// Integrate `f` over `[0, s]` split at the kinks of `T_δ(1 − √r)`.
pub fn integrate_barrier_like(s: f64, p: &TruncationParams, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let pts = barrier_breakpoints(s, p);
    let mut value = 0.0;
    let mut err = 0.0;
    for w in pts.windows(2) {
        let share = BARRIER_TOL * (w[1] - w[0]) / s;
        let (v, e) = adaptive_simpson(&f, w[0], w[1], share.max(1e-16));
        value += v;
        err += e;
    }
    (value, err)
}

/// `B_δ(s) = ∫₀^s dr / ((1 + r⁵)(1 + φ_δ⁴(√r)))`.
pub fn b_delta(s: f64, p: &TruncationParams) -> Result<BarrierEval> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "barrier needs finite s ≥ 0, got {s}"
        )));
    }
    if s == 0.0 {
        return Ok(BarrierEval {
            s,
            value: 0.0,
            quadrature_error_bound: 0.0,
        });
    }
    let (value, err) = integrate_barrier_like(s, p, |r| integrand(r, p));
    Ok(BarrierEval {
        s,
        value,
        quadrature_error_bound: err,
    })
}

/// Inverse of `B_δ` on `[0, BARRIER_S_MAX]` by bisection.
pub fn b_inverse(y: f64, p: &TruncationParams) -> Result<f64> {
    b_inverse_bounded(y, p, BARRIER_S_MAX)
}

pub fn b_inverse_bounded(y: f64, p: &TruncationParams, s_max: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.0);
    }
    let top = b_delta(s_max, p)?.value;
    if !(y > 0.0 && y <= top) {
        return Err(Error::InvalidArgument(format!(
            "B⁻¹ argument {y} outside attainable range [0, {top}]"
        )));
    }
    let (mut lo, mut hi) = (0.0, s_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
        if b_delta(mid, p)?.value < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Explicit local-existence time
/// `T₀ = min(T, ((B((1−3δ)²) − B(ε²)) δ¹⁰ / c₃)³)`.
pub fn t0_formula(eps: f64, p: &TruncationParams, c3: f64, horizon: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::Assumption(format!("A3: eps = {eps} > 1/2")));
    }
    if !(c3 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "c3 must be positive, got {c3}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let d = p.delta;
    let gap = b_delta((1.0 - 3.0 * d).powi(2), p)?.value - b_delta(eps * eps, p)?.value;
    Ok((gap * d.powi(10) / c3).powi(3).min(horizon))
}

/// Adaptive Simpson quadrature; returns the Richardson-corrected value and
/// the accumulated error estimate.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return (left + right + diff / 15.0, diff.abs() / 15.0);
    }
    let (lv, le) = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let (rv, re) = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    (lv + rv, le + re)
}
