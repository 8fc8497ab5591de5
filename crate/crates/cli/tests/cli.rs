use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use damage_core::grid::{Field, Grid};
use damage_core::potentials::t0_formula;
use damage_core::simulator::read_ledger_csv;
use damage_core::TruncationParams;
use tempfile::TempDir;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_damage-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "\
[grid]
nodes = 33

[time]
tau = 0.02
horizon = 0.2

[experiment]
g_amplitude = 8.0
";

fn write_config(dir: &TempDir, text: &str) -> std::path::PathBuf {
    let p = dir.path().join("sim.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn stationary_run_has_constant_energy() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = sim(&["run", "--output-dir", path(&out), "tau=1e-2", "horizon=0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ledger = read_ledger_csv(fs::File::open(out.join("ledger.csv")).unwrap()).unwrap();
    assert_eq!(ledger.len(), 11);
    for e in &ledger {
        assert_eq!(e.energy, ledger[0].energy);
        assert_eq!(e.dissipation_cum, 0.0);
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    for line in manifest.lines() {
        assert!(out.join(line).exists(), "{line}");
    }
}

#[test]
fn out_of_range_delta_is_an_assumption_violation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[truncation]\ndelta = 0.2\n");
    let o = sim(&[
        "run",
        "--config",
        path(&cfg),
        "--output-dir",
        path(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1/12"));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(&dir, "[grid\nnodes = 3");
    assert_eq!(
        code(&sim(&[
            "run",
            "--config",
            path(&cfg),
            "--output-dir",
            path(&out)
        ])),
        2
    );
    assert_eq!(code(&sim(&["run", "--output-dir", path(&out), "tau"])), 2);
    assert_eq!(
        code(&sim(&["run", "--output-dir", path(&out), "grid.tau=1"])),
        2
    );
    assert_eq!(code(&sim(&["frobnicate"])), 2);
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        code(&sim(&[
            "run",
            "--config",
            path(&missing),
            "--output-dir",
            path(&out)
        ])),
        2
    );
}

#[test]
fn verify_flags_a_negative_dissipation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL);
    let out = dir.path().join("out");
    assert_eq!(
        code(&sim(&[
            "run",
            "--config",
            path(&cfg),
            "--output-dir",
            path(&out)
        ])),
        0
    );
    assert_eq!(code(&sim(&["verify", path(&out)])), 0);

    let ledger = out.join("ledger.csv");
    let text = fs::read_to_string(&ledger).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut cells: Vec<String> = lines[3].split(',').map(str::to_owned).collect();
    cells[2] = "-0.5".into();
    lines[3] = cells.join(",");
    fs::write(&ledger, lines.join("\n") + "\n").unwrap();
    let o = sim(&["verify", path(&out)]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dissipation"));
}

#[test]
fn t0_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let o = sim(&[
        "t0",
        "--delta",
        "1/12",
        "--eps",
        "0.25",
        "--c3",
        "1",
        "--output-dir",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    let printed: f64 = stdout
        .trim()
        .strip_prefix("T0 = ")
        .unwrap()
        .parse()
        .unwrap();
    let expected = t0_formula(0.25, &TruncationParams::new(1.0 / 12.0).unwrap(), 1.0, 1.0).unwrap();
    assert_eq!(printed, expected);
    assert!((printed - 1.220313e-37).abs() < 1e-42);

    let table = fs::read_to_string(dir.path().join("b_table.csv")).unwrap();
    let mut rows = table.lines();
    assert_eq!(rows.next(), Some("s,B(s)"));
    let vals: Vec<(f64, f64)> = rows
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert!(vals.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
    assert!((vals.last().unwrap().0 - 0.5625).abs() < 1e-15);

    let bad = sim(&[
        "t0",
        "--delta",
        "0.2",
        "--eps",
        "0.25",
        "--output-dir",
        path(dir.path()),
    ]);
    assert_eq!(code(&bad), 3);
}

#[test]
fn command_line_overrides_replace_file_values() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL);
    let out = dir.path().join("out");
    let o = sim(&[
        "run",
        "--config",
        path(&cfg),
        "--output-dir",
        path(&out),
        "tau=0.05",
        "time.horizon=0.1",
    ]);
    assert_eq!(code(&o), 0);
    let ledger = read_ledger_csv(fs::File::open(out.join("ledger.csv")).unwrap()).unwrap();
    assert_eq!(ledger.len(), 3);
    let resolved = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(resolved.contains("tau = 0.05"), "{resolved}");
    assert!(resolved.contains("nodes = 33"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(
            code(&sim(&[
                "run",
                "--config",
                path(&cfg),
                "--output-dir",
                path(out)
            ])),
            0
        );
    }
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert_eq!(
        manifest,
        fs::read_to_string(b.join("manifest.txt")).unwrap()
    );
    for f in manifest.lines() {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn relative_snapshot_paths_follow_the_config_file() {
    let dir = TempDir::new().unwrap();
    let g = Field::from_fn(Grid::unit_interval(33).unwrap(), |x, _| {
        7.0 * (3.0 * x).sin()
    });
    g.save_csv(&dir.path().join("g.csv")).unwrap();
    let cfg = write_config(&dir, &format!("{SMALL}g = \"file\"\ng_file = \"g.csv\"\n"));
    let o = Command::new(env!("CARGO_BIN_EXE_damage-sim"))
        .current_dir(std::env::temp_dir())
        .args([
            "run",
            "--config",
            path(&cfg),
            "--output-dir",
            path(&dir.path().join("o")),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn experiment_subcommands_write_their_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "[grid]\nnodes = 17\n[time]\ntau = 0.05\nhorizon = 0.2\n[experiment]\ng_amplitude = 6.0\n\
         sweep_delta = [0.08333333333333333]\nsweep_z0_amplitude = [0.0]\nsweep_g_amplitude = [5.0, 7.0]\n",
    );
    for (cmd, table, rows) in [
        ("sweep", "sweep.csv", 2),
        ("convergence", "convergence.csv", 3),
        ("stability", "stability.csv", 0),
    ] {
        let out = dir.path().join(cmd);
        let o = Command::new(env!("CARGO_BIN_EXE_damage-sim"))
            .env("DAMAGE_SIM_THREADS", "2")
            .args([cmd, "--config", path(&cfg), "--output-dir", path(&out)])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(out.join(table)).unwrap();
        let n = text.lines().count() - 1;
        if rows > 0 {
            assert_eq!(n, rows, "{cmd}");
        } else {
            assert!(n > 0, "{cmd}");
        }
        assert!(fs::read_to_string(out.join("manifest.txt"))
            .unwrap()
            .contains(table));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_damage-sim"))
        .env("DAMAGE_SIM_THREADS", "zero")
        .args([
            "sweep",
            "--config",
            path(&cfg),
            "--output-dir",
            path(&dir.path().join("x")),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
