use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use lagmesh::edge_quadrature::QuadratureRule;
use lagmesh::nodal_solver::BoundaryMode;
use lagmesh::study::{Case, RuleChoice};
use lagmesh_cli::config::{resolve, Args};
use lagmesh_cli::output::execute;

fn parse(argv: &[&str]) -> lagmesh_cli::Result<lagmesh::study::RunConfig> {
    let args = Args::try_parse_from(std::iter::once("lagmesh").chain(argv.iter().copied()))
        .map_err(|e| lagmesh_cli::CliError::Usage(e.to_string()))?;
    resolve(args, None)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lagmesh"));
    c.env_remove("LAGMESH_OUT");
    c
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn empty_args_give_defaults() {
    let c = parse(&[]).unwrap();
    assert_eq!(c.case, Case::Isentropic);
    assert_eq!(c.nx, 50);
    assert_eq!(c.rule, RuleChoice::Single(QuadratureRule::Lobatto3));
    assert_eq!(c.t_final, 0.1);
    assert_eq!(c.output_dir, PathBuf::from("out"));
}

#[test]
fn study_flag() {
    let c = parse(&["--case", "taylor-green", "--study", "25,50,100,200"]).unwrap();
    assert_eq!(c.study, Some(vec![25, 50, 100, 200]));
    assert_eq!(c.boundary(), BoundaryMode::Slide);
    assert!(parse(&["--study", "25,25"]).is_err());
    assert!(parse(&["--study", "25"]).is_err());
}

#[test]
fn validation_errors() {
    assert_eq!(parse(&["--cfl", "0"]).unwrap_err().kind(), "invalid_config");
    assert_eq!(parse(&["--nx", "0"]).unwrap_err().kind(), "invalid_config");
    assert_eq!(parse(&["--case", "vortex"]).unwrap_err().kind(), "usage");
    assert_eq!(parse(&["--case", "custom"]).unwrap_err().kind(), "invalid_config");
    assert_eq!(
        parse(&["--case", "taylor-green", "--domain", "-1,1,-1,1"]).unwrap_err().kind(),
        "invalid_config"
    );
    let c = parse(&["--case", "custom", "--domain", "-1,1,-2,2", "--field", "rotation"]).unwrap();
    assert_eq!(c.domain().y0, -2.0);
}

#[test]
fn flags_override_file_and_env_is_last() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "case = \"taylor-green\"\nnx = 12\ncfl = 0.25\noutput_dir = \"from-file\"\n").unwrap();
    let p = path.to_str().unwrap();

    let c = parse(&["--config", p, "--nx", "20"]).unwrap();
    assert_eq!((c.case, c.nx, c.cfl), (Case::TaylorGreen, 20, 0.25));
    assert_eq!(c.output_dir, PathBuf::from("from-file"));

    let args = Args::try_parse_from(["lagmesh"]).unwrap();
    assert_eq!(resolve(args, Some("env-dir".into())).unwrap().output_dir, PathBuf::from("env-dir"));
    let args = Args::try_parse_from(["lagmesh", "--config", p]).unwrap();
    assert_eq!(resolve(args, Some("env-dir".into())).unwrap().output_dir, PathBuf::from("from-file"));
}

#[test]
fn unknown_and_malformed_file_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "resolution = 10\n").unwrap();
    let e = parse(&["--config", path.to_str().unwrap()]).unwrap_err();
    assert_eq!(e.kind(), "config_file");
    assert!(e.to_string().contains("resolution"), "{e}");

    fs::write(&path, "rule = \"simpson\"\n").unwrap();
    let e = parse(&["--config", path.to_str().unwrap()]).unwrap_err();
    assert_eq!(e.kind(), "bad_value");
    assert!(e.to_string().contains("'rule'"), "{e}");
}

#[test]
fn single_run_writes_summary_and_no_snapshots_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let c = parse(&["--case", "taylor-green", "--nx", "8", "--out", out]).unwrap();
    let files = execute(&c, &mut Vec::new()).unwrap();
    assert_eq!(files.len(), 1);
    assert_eq!(names(dir.path()), ["taylor-green_n8_lobatto_summary.json"]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(v["t"], 0.1);
    assert!(v["l_inf"].as_f64().unwrap() > 0.0);
}

#[test]
fn snapshots_are_readable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let c = parse(&["--case", "taylor-green", "--nx", "8", "--snapshot-every", "1", "--out", out]).unwrap();
    execute(&c, &mut Vec::new()).unwrap();
    let snaps: Vec<String> = names(dir.path()).into_iter().filter(|n| n.ends_with(".mesh")).collect();
    assert!(!snaps.is_empty());
    assert_eq!(snaps[0], "taylor-green_n8_lobatto_step000001.mesh");
    let f = fs::File::open(dir.path().join(&snaps[0])).unwrap();
    let s = lagmesh::mesh::read_snapshot(std::io::BufReader::new(f)).unwrap();
    assert_eq!((s.points.len(), s.cells.len()), (81, 64));
}

#[test]
fn study_tables_are_byte_identical_across_runs() {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let c = parse(&["--case", "taylor-green", "--study", "8,16", "--rule", "both", "--out", out]).unwrap();
        execute(&c, &mut Vec::new()).unwrap();
        let n = names(dir.path());
        let bytes: Vec<Vec<u8>> = n.iter().map(|f| fs::read(dir.path().join(f)).unwrap()).collect();
        (n, bytes)
    };
    let (n1, b1) = run();
    let (n2, b2) = run();
    assert_eq!(
        n1,
        [
            "taylor-green_legendre_table.csv",
            "taylor-green_legendre_table.txt",
            "taylor-green_lobatto_table.csv",
            "taylor-green_lobatto_table.txt"
        ]
    );
    assert_eq!(n1, n2);
    assert_eq!(b1, b2);
}

#[test]
fn binary_exit_codes_and_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--case", "taylor-green", "--nx", "6", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for argv in [&["--cfl", "0"][..], &["--nx", "abc"], &["--bogus"]] {
        let out = bin().args(argv).output().unwrap();
        assert!(!out.status.success());
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert!(v["error"].is_string() && v["message"].is_string());
    }
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["--case", "taylor-green", "--nx", "4"])
        .env("LAGMESH_OUT", dir.path())
        .current_dir(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("taylor-green_n4_lobatto_summary.json").exists());
}

#[test]
fn theorem1_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let c = parse(&[
        "--case", "custom", "--field", "affine:1,2,3,4,5,-2", "--domain", "0,1,0,1",
        "--nx", "4", "--verify-theorem1", "--out", out,
    ])
    .unwrap();
    execute(&c, &mut Vec::new()).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("custom_lobatto_theorem1.json")).unwrap()).unwrap();
    assert_eq!(v["slopes"]["smoothness"], "exact");
    assert_eq!(v["samples"].as_array().unwrap().len(), 4);
}
