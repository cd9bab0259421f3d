//! Exit codes and output shape of the command-line tool.

use std::process::Command;

fn gradfit(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gradfit")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn rates_prints_csv() {
    let (code, out, err) = gradfit(&["rates", "--function", "sine", "--degree", "1", "--levels", "3"]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(lines[0], "level,h,elements,dofs,E,local_sum,ratio,apriori_bound,eoc");
    assert_eq!(lines.len(), 4);
}

#[test]
fn mesh_info_is_json() {
    let (code, out, _) = gradfit(&["mesh-info", "--mesh", "l-shape"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "gradfit/v1");
}

#[test]
fn tree_writes_csv_and_log() {
    let dir = std::env::temp_dir().join(format!("gradfit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("tree.csv");
    let (code, _, err) =
        gradfit(&["tree", "--function", "lshape", "--budget", "96", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("control,"));
    let log = std::fs::read_to_string(csv.with_extension("jsonl")).unwrap();
    assert!(log.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn configuration_errors_exit_with_2() {
    for args in [
        vec!["rates", "--function", "nope"],
        vec!["rates", "--degree", "7"],
        vec!["rates", "--bc", "robin"],
        vec!["rates", "--function", "lshape", "--bc", "dirichlet0"],
        vec!["rates", "--mesh", "/nonexistent/mesh.txt"],
        vec!["tree", "--budget", "1"],
        vec!["bogus"],
        vec!["rates", "--levels", "3..1"],
    ] {
        let (code, _, err) = gradfit(&args);
        assert_eq!(code, 2, "{args:?}: {err}");
    }
}

#[test]
fn help_exits_with_0() {
    let (code, out, _) = gradfit(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("Exit codes"));
}
