use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use subquantum::cli::{parse_config_str, RunConfig};

fn subq(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subq"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SUBQ_SEED")
        .output()
        .expect("spawn subq")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const FREE_UNDERDAMPED: [&str; 8] = [
    "--set",
    "params.canonical_coupling=false",
    "--set",
    "params.gamma=0.1",
    "--set",
    "params.zeta=0.1",
    "--set",
    "params.f0=1.0",
];

#[test]
fn verify_with_defaults_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = subq(&["verify"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["overall_pass"], true);
    assert!(report["timing"].is_object());
}

#[test]
fn sweep_peak_lies_within_one_grid_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--omega", "0:2:201"];
    args.extend(FREE_UNDERDAMPED);
    let o = subq(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        header(&dir.path().join("sweep.csv")),
        "omega,amplitude,phase"
    );
    let s = json(&dir.path().join("sweep.json"));
    let peak = s["omega_peak"].as_f64().unwrap();
    let step = s["grid_step"].as_f64().unwrap();
    assert!((step - 0.01).abs() < 1e-15);
    assert!((peak - 0.98995).abs() <= step, "peak {peak}");
    assert!((s["omega_peak_analytic"].as_f64().unwrap() - 0.98f64.sqrt()).abs() < 1e-12);
}

#[test]
fn unforced_bouncer_does_no_work() {
    let dir = tempfile::tempdir().unwrap();
    let o = subq(&["bouncer", "--F0", "0", "--x0", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&dir.path().join("bouncer.csv")), "t,x,v,ekin,epot,h");
    let s = json(&dir.path().join("bouncer.json"));
    assert_eq!(s["work_analytic"].as_f64(), Some(0.0));
    if let Some(w) = s["work_quadrature"].as_f64() {
        assert!(w.abs() < 1e-12, "quadrature work {w}");
    }
}

#[test]
fn walker_and_ensemble_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = subq(&["walker", "--set", "run.ensemble_size=2000"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        header(&dir.path().join("walker_summary.csv")),
        "t,msv,msv_stderr,msd,msd_stderr"
    );
    assert_eq!(header(&dir.path().join("walker.csv")), "t,x,u");
    assert!(json(&dir.path().join("walker.json")).is_object());

    let o = subq(
        &["ensemble", "--snapshots", "--set", "ensemble.size=5000"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for label in ["0.5", "1", "2"] {
        let path = dir.path().join(format!("spread_sigma0_{label}.csv"));
        assert_eq!(
            header(&path),
            "t,var_emp,var_stderr,var_ballistic,var_restframe"
        );
    }
    assert!(dir.path().join("crossover.csv").exists());
    let snapshots: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("snapshot_"))
        .collect();
    assert!(!snapshots.is_empty());
    assert_eq!(header(&snapshots[0].path()), "x,u");
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = subq(&["verify", "--set", "params.hbar=2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[params]\nhbar = 2.0\n").unwrap();
    let o = subq(&["verify", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_subq"))
        .args(["walker", "--set", "run.ensemble_size=500", "--out"])
        .arg(dir.path())
        .env("SUBQ_SEED", "1234")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["seed"], 1234);
    assert_eq!(manifest["config"]["run"]["seed"], 1234);
}

#[test]
fn tables_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["1", "4"]
        .iter()
        .map(|threads| {
            let out = dir.path().join(format!("t{threads}"));
            let o = subq(
                &[
                    "ensemble",
                    "--threads",
                    threads,
                    "--set",
                    "ensemble.size=20000",
                ],
                &out,
            );
            assert!(o.status.success());
            let o = subq(
                &[
                    "walker",
                    "--threads",
                    threads,
                    "--set",
                    "run.ensemble_size=3000",
                ],
                &out,
            );
            assert!(o.status.success());
            out
        })
        .collect();
    for name in [
        "spread_sigma0_1.csv",
        "crossover.csv",
        "walker_summary.csv",
        "walker.csv",
    ] {
        let a = fs::read(runs[0].join(name)).unwrap();
        let b = fs::read(runs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs between thread counts");
    }
}

#[test]
fn config_echo_reparses_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--seed", "7"];
    args.extend(FREE_UNDERDAMPED);
    let o = subq(&args, dir.path());
    assert!(o.status.success());
    let echoed = json(&dir.path().join("manifest.json"))["config"].clone();
    let cfg: RunConfig = serde_json::from_value(echoed.clone()).unwrap();
    let as_toml = toml::to_string(&cfg).unwrap();
    let reparsed = parse_config_str(&as_toml, &[]).unwrap();
    assert_eq!(serde_json::to_value(&reparsed).unwrap(), echoed);
    assert_eq!(reparsed.run.seed, 7);
    assert_eq!(reparsed.params.gamma, Some(0.1));
}
