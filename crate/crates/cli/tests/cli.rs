use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn hlx(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hlx"));
    cmd.args(args);
    if let Some(text) = config {
        let p = dir.join("run.ini");
        fs::write(&p, text).unwrap();
        cmd.arg("--config").arg(p);
    }
    cmd.output().unwrap()
}

fn manifest(dir: &Path) -> ini::Ini {
    ini::Ini::load_from_file(dir.join("manifest.ini")).unwrap()
}

const SMALL_SOLVE: &str = "[run]\nseed = 4\n[hamiltonian]\nfamily = euclidean\n[grid]\nn = 17\n[data]\nfamily = random\namplitude = 0.5\n[flow]\nt = 0.25\n";

#[test]
fn unknown_task_exits_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = hlx(&["nonsense", "--out", out.to_str().unwrap()], None, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unreadable_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = hlx(&["solve", "--out", out.to_str().unwrap()], Some("[run]\nseed = minus one\n"), tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn legendre_writes_table_and_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = hlx(&["legendre", "--out", out.to_str().unwrap()], Some("[legendre]\nn = 257\n"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("max_error"));
    assert!(out.join("conjugate.csv").exists());
    let xy = fs::read_to_string(out.join("biconjugate.xy")).unwrap();
    assert_eq!(xy.lines().filter(|l| !l.starts_with('#')).count(), 257);
}

#[test]
fn reruns_are_byte_identical_and_hashed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = hlx(&["solve", "--out", d.to_str().unwrap()], Some(SMALL_SOLVE), tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let m = manifest(&a);
    let arts = m.section(Some("artifacts")).unwrap();
    assert!(arts.len() >= 2);
    for (name, hash) in arts.iter() {
        let bytes = fs::read(a.join(name)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), hash);
        assert_eq!(bytes, fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(fs::read(a.join("manifest.ini")).unwrap(), fs::read(b.join("manifest.ini")).unwrap());
    assert_eq!(m.get_from(Some("run"), "seed"), Some("4"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    hlx(&["flow", "--out", a.to_str().unwrap()], Some(SMALL_SOLVE), tmp.path());
    hlx(&["flow", "--seed", "5", "--out", b.to_str().unwrap()], Some(SMALL_SOLVE), tmp.path());
    assert_eq!(manifest(&b).get_from(Some("run"), "seed"), Some("5"));
    assert_ne!(fs::read(a.join("data.csv")).unwrap(), fs::read(b.join("data.csv")).unwrap());
}

#[test]
fn module_error_exits_1_and_lands_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = hlx(&["validate", "--out", out.to_str().unwrap()], Some("[hamiltonian]\nfamily = diagonal\n"), tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(&out);
    assert_eq!(m.get_from(Some("run"), "status"), Some("error"));
    assert!(m.get_from(Some("run"), "error").unwrap().contains("weights"));
}

#[test]
fn verdicts_set_the_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = "[grid]\nn = 65\n[data]\nfamily = affine\nslope = 0.3, -0.2\n[aronsson]\nrho = 0.1\nsamples = 10\n";
    let o = hlx(&["aronsson", "--out", out.to_str().unwrap()], Some(cfg), tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(out.join("residuals.csv")).unwrap().lines().count(), 11);
    let cfg = "[grid]\nn = 9\n[solve]\nmax_iter = 1\n[data]\nfamily = random\n";
    let o = hlx(&["solve", "--out", out.to_str().unwrap()], Some(cfg), tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(manifest(&out).get_from(Some("verdicts"), "converged"), Some("fail"));
}
