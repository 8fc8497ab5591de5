//! Non-degeneration certificate `y(t) = c_Ω²‖1 − z(t)‖_W²` against the
//! growth envelope `B⁻¹(B(ε²) + c₃ δ⁻¹⁰ t^{1/3})`.

use super::{probe_sup_ratio, EnergyLedgerEntry, Scenario, Trajectory};
use crate::error::Result;
use crate::potentials::{b_delta, t0_formula, TruncationParams};

/// Relative slack allowed when re-checking the fitted envelope.
const FIT_SLACK: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    /// Smallest `ĉ₃` whose envelope dominates every observed `y(t)`.
    pub c3_fitted: f64,
    pub t0_configured: f64,
    /// Existence time from the same formula with `ĉ₃` (the horizon when
    /// `ĉ₃ = 0`).
    pub t0_fitted: f64,
    /// `min(T_deg, T₀(ĉ₃))`, the end of the window checked by
    /// [`CertificateReport::window_ok`].
    pub window_end: f64,
    pub window_samples: usize,
    /// `√y ≤ 1 − 3δ` at every ledger time up to `window_end` and up to
    /// `min(T_deg, T₀(c₃))`.
    pub window_ok: bool,
    /// Times where `B(y) − B(ε²)` exceeds `ĉ₃ δ⁻¹⁰ t^{1/3}` beyond the slack.
    pub envelope_violations: Vec<f64>,
    /// `√y ≤ 1 − 3δ ⇒ z_min ≥ 3δ` at every ledger entry, with the run's `c_Ω`.
    pub implication_ok: bool,
    /// The same implication with the unscaled probe estimate of `c_Ω`.
    pub implication_raw_ok: bool,
    pub c_omega_raw: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.window_ok
            && self.envelope_violations.is_empty()
            && self.implication_ok
            && self.implication_raw_ok
    }
}

/// `max_t (B(y(t)) − B(ε²))₊ δ¹⁰ / t^{1/3}` over ledger entries with `t > 0`.
pub fn fit_c3(ledger: &[EnergyLedgerEntry], p: &TruncationParams, eps2: f64) -> Result<f64> {
    let b0 = b_delta(eps2, p)?.value;
    let d10 = p.delta().powi(10);
    let mut c3: f64 = 0.0;
    for e in ledger.iter().filter(|e| e.t > 0.0) {
        let gain = b_delta(e.y, p)?.value - b0;
        if gain > 0.0 {
            c3 = c3.max(gain * d10 / e.t.cbrt());
        }
    }
    Ok(c3)
}

pub fn certificate_monitor(traj: &Trajectory, sc: &Scenario) -> Result<CertificateReport> {
    let p = &sc.truncation;
    let d = p.delta();
    let horizon = sc.config.time.horizon;
    let eps2 = sc.eps * sc.eps;
    let bound = 1.0 - 3.0 * d;

    let c3_fitted = fit_c3(&traj.ledger, p, eps2)?;
    let t0_configured = sc.t0_theoretical()?;
    let t0_fitted = if c3_fitted > 0.0 {
        t0_formula(sc.eps, p, c3_fitted, horizon)?
    } else {
        horizon
    };
    let t_deg = traj.events.t_deg.unwrap_or(f64::INFINITY);
    let window_end = t_deg.min(t0_fitted);
    let configured_end = t_deg.min(t0_configured);

    let mut window_ok = true;
    let mut window_samples = 0;
    for e in &traj.ledger {
        if e.t <= window_end || e.t <= configured_end {
            window_samples += 1;
            window_ok &= e.sqrt_y <= bound;
        }
    }

    let b0 = b_delta(eps2, p)?.value;
    let scale = d.powi(-10);
    let mut envelope_violations = Vec::new();
    for e in traj.ledger.iter().filter(|e| e.t > 0.0) {
        let gain = b_delta(e.y, p)?.value - b0;
        let allowed = c3_fitted * scale * e.t.cbrt();
        if gain > allowed * (1.0 + FIT_SLACK) + 1e-14 {
            envelope_violations.push(e.t);
        }
    }

    let c_omega_raw = probe_sup_ratio(&sc.grid);
    let ratio = c_omega_raw / sc.c_omega;
    let three_d = 3.0 * d;
    let implication_ok = traj
        .ledger
        .iter()
        .all(|e| e.sqrt_y > bound || e.z_min >= three_d);
    let implication_raw_ok = traj
        .ledger
        .iter()
        .all(|e| e.sqrt_y * ratio > bound || e.z_min >= three_d);

    Ok(CertificateReport {
        c3_fitted,
        t0_configured,
        t0_fitted,
        window_end,
        window_samples,
        window_ok,
        envelope_violations,
        implication_ok,
        implication_raw_ok,
        c_omega_raw,
    })
}
