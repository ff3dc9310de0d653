use std::path::Path;
use std::process::Command;

fn modred() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modred"))
}

fn write_spec(dir: &Path) -> std::path::PathBuf {
    let spec = "\
case = additive
capital_lambda = 8
n_active = 3
n_truth = 300
n_kernel = 2000
n_amrs = 300
n_mz = 300
t_end = 1
lag_step = 0.1
t0 = 0.2
noise_horizon = 10
";
    let p = dir.join("spec.txt");
    std::fs::write(&p, spec).unwrap();
    p
}

#[test]
fn gen_couplings_writes_only_its_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path());
    let out = tmp.path().join("exp");
    let status = modred()
        .args(["gen-couplings", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "3", "--threads", "1"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("couplings/coupling.txt")).unwrap();
    assert!(text.contains("1|yz"));
    assert!(!out.join("truth").exists());
    assert!(std::fs::read_to_string(out.join("manifest.txt")).unwrap().contains("seed = 3"));
}

#[test]
fn all_produces_reports_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path());
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = modred()
            .arg("all")
            .arg("--spec")
            .arg(&spec)
            .arg("--out")
            .arg(&out)
            .args(["--threads", "1"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("x1.mz.max_relerr"));
        std::fs::read_to_string(out.join("compare/report_x1.csv")).unwrap()
    };
    let a = run("a");
    assert!(a.starts_with("lag,truth,truth_stderr,amrs,amrs_stderr,amrs_relerr,mz,"));
    assert_eq!(a, run("b"));
}

#[test]
fn bad_spec_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.txt");
    std::fs::write(&p, "case = sideways\n").unwrap();
    let o = modred().arg("truth").arg("--spec").arg(&p).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown model case"));
}
