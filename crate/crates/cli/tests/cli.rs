use std::path::Path;
use std::process::{Command, Output};

fn fluxsquid(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxsquid"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn successful_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[two_level]\nphi_s_points = 3\n");
    let o = fluxsquid(&["two-level", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("two_level.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let o = fluxsquid(&["spectrum", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(dir.path(), "[squid]\nbogus = 1\n");
    let o = fluxsquid(&["spectrum", "--strict", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let cfg = write_config(dir.path(), "[squid]\ne_j_sigma = 7.0\n");
    let o = fluxsquid(&["spectrum", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("e_j_sigma_ghz"));

    let o = fluxsquid(&["spectrum", "--d", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_only_warns_without_strict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[two_level]\nphi_s_points = 2\nshade = 3\n");
    let o = fluxsquid(&["two-level", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn runtime_failure_exits_one_with_error_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "design = \"floating\"\n[capacitance]\nc_ff = 40.0\nc_c_ff = 2.0\nc_g_ff = 5.0\n");
    let o = fluxsquid(&["jc-star", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("error.json").exists());
}

#[test]
fn symmetric_override_gives_zero_shunt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[jc_star]\ne_j_sigma_min_ghz = 7.0\ne_j_sigma_points = 1\nd_points = 1\n");
    let o = fluxsquid(&["jc-star", "--config", &cfg, "--d", "0"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("jc_star.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
}
