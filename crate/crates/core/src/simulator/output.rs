//! On-disk trajectory layout: `ledger.csv`, `events.txt` and per-snapshot
//! field files under `snapshots/`.

use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use super::{EnergyLedgerEntry, Trajectory};
use crate::error::{Error, Result};

pub const LEDGER_COLUMNS: [&str; 12] = [
    "t",
    "energy",
    "dissipation_cum",
    "balance_residual",
    "z_min",
    "y",
    "sqrt_y",
    "grad_u_l2",
    "laplace_u_l2",
    "laplace_u_l3",
    "comp_residual",
    "truncation_active",
];

pub fn write_ledger_csv<W: Write>(ledger: &[EnergyLedgerEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in ledger {
        w.serialize(e)?;
    }
    if ledger.is_empty() {
        w.write_record(LEDGER_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ledger_csv<R: Read>(input: R) -> Result<Vec<EnergyLedgerEntry>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != LEDGER_COLUMNS {
        return Err(Error::Format(format!(
            "ledger header {header:?} does not match {LEDGER_COLUMNS:?}"
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Scalar run events.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Events {
    /// First time with `z_min < 3δ`; later entries are the extended regime.
    pub t_deg: Option<f64>,
    pub t0_theoretical: f64,
    pub c3_fitted: f64,
    pub delta: f64,
    pub c_omega: f64,
    pub eps: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_owned(), |t| t.to_string())
}

pub fn write_events<W: Write>(ev: &Events, mut out: W) -> Result<()> {
    let mut s = String::new();
    // writing to a String cannot fail
    let _ = writeln!(s, "t_deg={}", opt(ev.t_deg));
    let _ = writeln!(s, "t0_theoretical={}", ev.t0_theoretical);
    let _ = writeln!(s, "c3_fitted={}", ev.c3_fitted);
    let _ = writeln!(s, "delta={}", ev.delta);
    let _ = writeln!(s, "c_omega={}", ev.c_omega);
    let _ = writeln!(s, "eps={}", ev.eps);
    let _ = writeln!(s, "extended_regime_from={}", opt(ev.t_deg));
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_events<R: BufRead>(input: R) -> Result<Events> {
    let mut t_deg = None;
    let mut fields = [None; 5];
    const KEYS: [&str; 5] = ["t0_theoretical", "c3_fitted", "delta", "c_omega", "eps"];
    let num = |k: &str, v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::Format(format!("events: {k} = {v:?} is not a number")))
    };
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("events: expected key=value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "t_deg" => t_deg = if v == "none" { None } else { Some(num(k, v)?) },
            "extended_regime_from" => {}
            _ => match KEYS.iter().position(|&key| key == k) {
                Some(i) => fields[i] = Some(num(k, v)?),
                None => return Err(Error::Format(format!("events: unknown key {k:?}"))),
            },
        }
    }
    let get =
        |i: usize| fields[i].ok_or_else(|| Error::Format(format!("events: missing {}", KEYS[i])));
    Ok(Events {
        t_deg,
        t0_theoretical: get(0)?,
        c3_fitted: get(1)?,
        delta: get(2)?,
        c_omega: get(3)?,
        eps: get(4)?,
    })
}

/// Write the whole trajectory under `dir`; returns the artifact paths
/// relative to `dir`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir.join("snapshots"))?;
    let mut artifacts = Vec::new();

    let ledger = PathBuf::from("ledger.csv");
    write_ledger_csv(
        &traj.ledger,
        std::io::BufWriter::new(std::fs::File::create(dir.join(&ledger))?),
    )?;
    artifacts.push(ledger);

    let events = PathBuf::from("events.txt");
    write_events(&traj.events, std::fs::File::create(dir.join(&events))?)?;
    artifacts.push(events);

    for snap in &traj.snapshots {
        for (name, field) in [("z", &snap.z), ("u", &snap.u), ("xi", &snap.xi)] {
            let rel = PathBuf::from("snapshots").join(format!("{name}_{:06}.csv", snap.step));
            field.save_csv(&dir.join(&rel))?;
            artifacts.push(rel);
        }
    }
    Ok(artifacts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerViolation {
    pub row: usize,
    pub t: f64,
    pub what: String,
}

/// Relative tolerance for the energy monotonicity check.
const ENERGY_TOL: f64 = 1e-8;

/// Invariants that can be read off a ledger alone. `delta` enables the
/// truncation-flag consistency check.
pub fn check_ledger(ledger: &[EnergyLedgerEntry], delta: Option<f64>) -> Vec<LedgerViolation> {
    let mut out = Vec::new();
    let mut flag = |row: usize, t: f64, what: String| out.push(LedgerViolation { row, t, what });
    for (i, e) in ledger.iter().enumerate() {
        let finite = [
            e.t,
            e.energy,
            e.dissipation_cum,
            e.balance_residual,
            e.z_min,
            e.y,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            flag(i, e.t, "non-finite entry".into());
            continue;
        }
        if e.dissipation_cum < 0.0 {
            flag(
                i,
                e.t,
                format!("negative dissipation {}", e.dissipation_cum),
            );
        }
        if e.y < 0.0 {
            flag(i, e.t, format!("negative certificate y = {}", e.y));
        }
        if e.z_min > 1.0 {
            flag(i, e.t, format!("z_min = {} exceeds 1", e.z_min));
        }
        if (e.sqrt_y - e.y.max(0.0).sqrt()).abs() > 1e-12 * e.sqrt_y.max(1.0) {
            flag(i, e.t, "sqrt_y inconsistent with y".into());
        }
        if let Some(d) = delta {
            if e.truncation_active != (e.z_min < 3.0 * d) {
                flag(i, e.t, "truncation flag inconsistent with z_min".into());
            }
        }
        if i == 0 {
            continue;
        }
        let p = &ledger[i - 1];
        if e.t <= p.t {
            flag(i, e.t, "time is not increasing".into());
        }
        if e.dissipation_cum < p.dissipation_cum {
            flag(i, e.t, "dissipation decreased".into());
        }
        if e.z_min > p.z_min {
            flag(i, e.t, "z_min increased (irreversibility)".into());
        }
        if !p.truncation_active
            && !e.truncation_active
            && e.energy > p.energy + ENERGY_TOL * p.energy.abs().max(1.0)
        {
            flag(
                i,
                e.t,
                format!("energy increased from {} to {}", p.energy, e.energy),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(t: f64, energy: f64, diss: f64) -> EnergyLedgerEntry {
        EnergyLedgerEntry {
            t,
            energy,
            dissipation_cum: diss,
            balance_residual: 0.0,
            z_min: 0.9,
            y: 0.04,
            sqrt_y: 0.2,
            grad_u_l2: 1.0,
            laplace_u_l2: 2.0,
            laplace_u_l3: 2.5,
            comp_residual: 1e-12,
            truncation_active: false,
        }
    }

    #[test]
    fn ledger_round_trips_with_exact_header() {
        let ledger = vec![entry(0.0, -1.0, 0.0), entry(0.1, -1.5, 0.3)];
        let mut buf = Vec::new();
        write_ledger_csv(&ledger, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), LEDGER_COLUMNS.join(","));
        assert_eq!(read_ledger_csv(buf.as_slice()).unwrap(), ledger);
    }

    #[test]
    fn events_round_trip() {
        let ev = Events {
            t_deg: Some(0.25),
            t0_theoretical: 1.5e-38,
            c3_fitted: 3.0e-11,
            delta: 1.0 / 12.0,
            c_omega: 1.5,
            eps: 0.0,
        };
        let mut buf = Vec::new();
        write_events(&ev, &mut buf).unwrap();
        assert_eq!(read_events(buf.as_slice()).unwrap(), ev);
        let none = Events { t_deg: None, ..ev };
        let mut buf = Vec::new();
        write_events(&none, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .contains("t_deg=none"));
        assert_eq!(read_events(buf.as_slice()).unwrap(), none);
        assert!(read_events("bogus=1\n".as_bytes()).is_err());
    }

    #[test]
    fn checker_flags_negative_dissipation_and_energy_growth() {
        let good = vec![entry(0.0, -1.0, 0.0), entry(0.1, -1.5, 0.3)];
        assert!(check_ledger(&good, Some(1.0 / 12.0)).is_empty());
        let mut bad = good.clone();
        bad[1].dissipation_cum = -0.3;
        let v = check_ledger(&bad, None);
        assert!(v.iter().any(|x| x.what.contains("negative dissipation")));
        let mut up = good;
        up[1].energy = 0.0;
        assert!(check_ledger(&up, None)
            .iter()
            .any(|x| x.what.contains("energy increased")));
    }
}
