use std::path::Path;
use std::process::{Command, Output};

fn zoprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zoprox")).args(args).output().unwrap()
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_exits_zero() {
    let o = zoprox(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("selftest"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["frobnicate"][..], &["tune", "--seed", "abc"], &[]] {
        let o = zoprox(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: kind=usage message="));
    }
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        &["phase-retrieval", "--solvers", "newton", "--out", out][..],
        &["tune", "--equation", "heat", "--out", out],
        &["phase-retrieval", "--sizes", "10-30", "--out", out],
        &["selftest", "--replicates", "0", "--out", out],
        &["selftest", "--config", "/nonexistent/zoprox.toml", "--out", out],
    ] {
        let o = zoprox(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.starts_with("error: kind="), "{err}");
        assert!(err.contains(" message="), "{err}");
    }
}

#[test]
fn selftest_is_reproducible_across_output_dirs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = zoprox(&["selftest", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("wrote "));
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
}
