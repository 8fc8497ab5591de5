//! Subcommand bodies. Each writes its artifacts under an output directory,
//! lists them in `manifest.txt` and returns a short summary for stdout.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use damage_core::potentials::{b_delta, t0_formula};
use damage_core::simulator::{
    check_ledger, continuous_dependence_experiment, convergence_study, read_events,
    read_ledger_csv, run, sweep, Scenario, SimConfig,
};
use damage_core::{Execution, TruncationParams};
use serde::Serialize;

use crate::config::serialize;
use crate::CliError;

/// Rows in the tabulated barrier.
pub const B_TABLE_ROWS: usize = 201;

fn write_manifest(dir: &Path, artifacts: &[PathBuf]) -> Result<(), CliError> {
    let mut text = String::new();
    for a in artifacts {
        // forward slashes keep manifests identical across platforms
        let rel: Vec<String> = a.iter().map(|c| c.to_string_lossy().into_owned()).collect();
        writeln!(text, "{}", rel.join("/")).expect("writing to a string");
    }
    text.push_str("manifest.txt\n");
    fs::write(dir.join("manifest.txt"), text)?;
    Ok(())
}

fn write_config(dir: &Path, cfg: &SimConfig, artifacts: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(dir.join("config.toml"), serialize(cfg))?;
    artifacts.push("config.toml".into());
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_owned(), |x| format!("{x:e}"))
}

pub fn run_command(cfg: &SimConfig, out: &Path) -> Result<String, CliError> {
    let sc = Scenario::new(cfg)?;
    let traj = run(&sc)?;
    fs::create_dir_all(out)?;
    let mut artifacts = damage_core::simulator::write_trajectory(out, &traj)?;
    write_config(out, cfg, &mut artifacts)?;
    write_manifest(out, &artifacts)?;
    let last = traj.ledger.last().expect("ledger has the initial entry");
    Ok(format!(
        "steps = {}\nenergy = {:e} -> {:e}\ndissipation = {:e}\nz_min = {}\nt_deg = {}\nt0 = {:e}\neps = {}\nc_omega = {}",
        traj.ledger.len() - 1,
        traj.ledger[0].energy,
        last.energy,
        last.dissipation_cum,
        last.z_min,
        opt(traj.events.t_deg),
        traj.events.t0_theoretical,
        sc.eps,
        sc.c_omega,
    ))
}

#[derive(Serialize)]
struct BRow {
    s: f64,
    #[serde(rename = "B(s)")]
    b: f64,
}

pub fn t0_command(
    delta: f64,
    eps: f64,
    c3: f64,
    horizon: f64,
    out: &Path,
) -> Result<String, CliError> {
    let p = TruncationParams::new(delta)?;
    let t0 = t0_formula(eps, &p, c3, horizon)?;
    let top = (1.0 - 3.0 * delta).powi(2);
    let rows = (0..B_TABLE_ROWS)
        .map(|k| {
            let s = top * k as f64 / (B_TABLE_ROWS - 1) as f64;
            Ok(BRow {
                s,
                b: b_delta(s, &p)?.value,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    fs::create_dir_all(out)?;
    write_rows(&out.join("b_table.csv"), &rows)?;
    write_manifest(out, &["b_table.csv".into()])?;
    Ok(format!("T0 = {t0:e}"))
}

pub fn verify_command(dir: &Path) -> Result<String, CliError> {
    let open = |name: &str| {
        File::open(dir.join(name))
            .map_err(|e| CliError::Parse(format!("cannot open {}: {e}", dir.join(name).display())))
    };
    let ledger = read_ledger_csv(BufReader::new(open("ledger.csv")?))?;
    let delta = match open("events.txt") {
        Ok(f) => Some(read_events(BufReader::new(f))?.delta),
        Err(_) => None,
    };
    let violations = check_ledger(&ledger, delta);
    if violations.is_empty() {
        return Ok(format!("ok: {} ledger rows", ledger.len()));
    }
    let mut msg = format!("{} invariant violation(s)", violations.len());
    for v in &violations {
        write!(msg, "\n  row {} (t = {}): {}", v.row, v.t, v.what).expect("writing to a string");
    }
    Err(CliError::Invariant(msg))
}

#[derive(Serialize)]
struct SweepCsv {
    delta: f64,
    z0_amplitude: f64,
    g_amplitude: f64,
    eps: Option<f64>,
    t_deg: Option<f64>,
    c3_fitted: Option<f64>,
    max_ratio: Option<f64>,
    error: Option<String>,
}

pub fn sweep_command(cfg: &SimConfig, out: &Path) -> Result<String, CliError> {
    let rows: Vec<SweepCsv> = sweep(Execution::Parallel, cfg)
        .into_iter()
        .map(|r| SweepCsv {
            delta: r.delta,
            z0_amplitude: r.z0_amplitude,
            g_amplitude: r.g_amplitude,
            eps: r.eps,
            t_deg: r.t_deg,
            c3_fitted: r.c3_fitted,
            max_ratio: r.max_ratio,
            error: r.error,
        })
        .collect();
    fs::create_dir_all(out)?;
    write_rows(&out.join("sweep.csv"), &rows)?;
    let mut artifacts = vec!["sweep.csv".into()];
    write_config(out, cfg, &mut artifacts)?;
    write_manifest(out, &artifacts)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(format!("{} combinations, {failed} failed", rows.len()))
}

#[derive(Serialize)]
struct ConvergenceCsv {
    level: usize,
    nodes: usize,
    tau: f64,
    z_min_final: f64,
    diff_to_next: Option<f64>,
    order: Option<f64>,
}

pub fn convergence_command(cfg: &SimConfig, out: &Path) -> Result<String, CliError> {
    let table = convergence_study(cfg, cfg.experiment.levels)?;
    let rows: Vec<ConvergenceCsv> = table
        .rows
        .iter()
        .map(|r| ConvergenceCsv {
            level: r.level,
            nodes: r.nodes,
            tau: r.tau,
            z_min_final: r.z_min_final,
            diff_to_next: r.diff_to_next,
            order: r.order,
        })
        .collect();
    fs::create_dir_all(out)?;
    write_rows(&out.join("convergence.csv"), &rows)?;
    let mut artifacts = vec!["convergence.csv".into()];
    write_config(out, cfg, &mut artifacts)?;
    write_manifest(out, &artifacts)?;
    Ok(format!(
        "observed order = {}\nmonotone = {}",
        table
            .observed_order
            .map_or_else(|| "none".to_owned(), |p| format!("{p:.3}")),
        table.monotone
    ))
}

#[derive(Serialize)]
struct DependenceCsv {
    size: f64,
    t: f64,
    ratio: f64,
}

pub fn stability_command(cfg: &SimConfig, out: &Path) -> Result<String, CliError> {
    let sc = Scenario::new(cfg)?;
    let table = continuous_dependence_experiment(&sc, &cfg.experiment.perturbation_sizes)?;
    let rows: Vec<DependenceCsv> = table
        .rows
        .iter()
        .flat_map(|r| {
            r.ratios.iter().map(|&(t, ratio)| DependenceCsv {
                size: r.size,
                t,
                ratio,
            })
        })
        .collect();
    fs::create_dir_all(out)?;
    write_rows(&out.join("stability.csv"), &rows)?;
    let mut artifacts = vec!["stability.csv".into()];
    write_config(out, cfg, &mut artifacts)?;
    write_manifest(out, &artifacts)?;
    let mut msg = String::new();
    for r in &table.rows {
        writeln!(msg, "size {:e}: max ratio {}", r.size, opt(r.max_ratio))
            .expect("writing to a string");
    }
    write!(
        msg,
        "spread = {}\nnondegenerate = {}",
        table
            .ratio_spread()
            .map_or_else(|| "none".to_owned(), |s| format!("{s:.4}")),
        table.nondegenerate
    )
    .expect("writing to a string");
    Ok(msg)
}
