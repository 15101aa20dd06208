use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn curvlaw(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvlaw"))
        .env("CURVLAW_OUT", out)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_passes_and_verify_agrees() {
    let out = tempfile::tempdir().unwrap();
    let cfg = scenario("contraction_pair.cfg");
    let o = curvlaw(out.path(), &["--threads", "2", "run", cfg.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let dir = out.path().join("contraction_pair");
    let report = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    let pairs: Vec<&str> = report.lines().filter(|l| l.contains(",l1_contraction,")).collect();
    assert_eq!(pairs.len(), 10);
    assert!(
        pairs.iter().all(|l| l.contains(",l1_contraction,true,true,")),
        "{report}"
    );
    let v = curvlaw(out.path(), &["verify", dir.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    let c = curvlaw(
        out.path(),
        &["compare", dir.to_str().unwrap(), dir.to_str().unwrap(), "--p", "inf"],
    );
    assert_eq!(c.status.code(), Some(0));
    let text = stdout(&c);
    assert!(text.starts_with("time,distance\n"));
    assert!(
        text.lines().skip(1).all(|l| l.ends_with(",0.0000000000000000e0")),
        "{text}"
    );
}

#[test]
fn invalid_config_exits_with_two() {
    let out = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("burgers_torus.cfg"))
        .unwrap()
        .replace("cfl = 0.9", "cfl = 2");
    let cfg = out.path().join("bad.cfg");
    std::fs::write(&cfg, text).unwrap();
    let o = curvlaw(out.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cfl"));
    assert!(!out.path().join("burgers_torus").exists());
}

#[test]
fn oracle_writes_table() {
    let out = tempfile::tempdir().unwrap();
    let o = curvlaw(
        out.path(),
        &["oracle", scenario("oracle_weighted.cfg").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.path().join("oracle_weighted/oracle.csv")).unwrap();
    assert!(table.starts_with("x,u_exact,u_fv,abs_diff\n"));
    assert_eq!(table.lines().count(), 257);
}

#[test]
fn mesh_dump_lists_every_cell() {
    let out = tempfile::tempdir().unwrap();
    let o = curvlaw(
        out.path(),
        &["mesh-dump", scenario("sphere_band_zonal.cfg").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("cell,i,j,x0,x1,volume\n"));
    assert_eq!(text.lines().count(), 1 + 32 * 64);
}
