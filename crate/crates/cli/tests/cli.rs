use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use unrectify::graph::file::{read_network, write_network};
use unrectify::graph::modules::{build_branching_example, build_resnet_block, random_fusion_stack};
use unrectify::graph::ops;
use unrectify::stability::certify;
use unrectify::{Dag, Matrix};

fn unrectify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unrectify"))
        .args(args)
        .env("UNRECTIFY_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, dag: &Dag) -> String {
    let p = dir.join(name);
    write_network(&p, dag).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn levels_of_branching_example() {
    let dir = tempfile::tempdir().unwrap();
    let ex = build_branching_example::<f64>(3, 7).unwrap();
    let net = write(dir.path(), "branching.json", &ex.dag);
    let out = unrectify(&["levels", &net]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text
        .lines()
        .find(|l| l.split_whitespace().next() == Some(&ex.a.to_string()))
        .unwrap();
    let fields: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(fields[1], "relay");
    assert_eq!(fields[2], "4");
    assert!(text.contains(&format!("max level {}", ex.dag.max_level())));

    let v = unrectify(&["validate", &net]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).contains("valid"));
}

#[test]
fn malformed_and_cyclic_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"input_dim\": 2,\n  \"nodes\": [,]\n}").unwrap();
    let out = unrectify(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    let cyclic = dir.path().join("cyclic.json");
    fs::write(
        &cyclic,
        r#"{"input_dim": 1,
      "nodes": [{"id": 0, "role": "input"}, {"id": 1, "role": "relay"}, {"id": 2, "role": "relay"}],
      "arcs": [
        {"src": 0, "dst": 1, "in_dim": 1, "out_dim": 1, "elem": {"kind": "identity"}},
        {"src": 1, "dst": 2, "in_dim": 1, "out_dim": 1, "elem": {"kind": "identity"}},
        {"src": 2, "dst": 1, "in_dim": 1, "out_dim": 1, "elem": {"kind": "identity"}}],
      "output": 2}"#,
    )
    .unwrap();
    let out = unrectify(&["validate", cyclic.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("cycle"));
    assert_eq!(unrectify(&["levels", cyclic.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn eval_identity_echoes() {
    let dir = tempfile::tempdir().unwrap();
    let net = write(dir.path(), "id.json", &ops::identity::<f64>(3).unwrap());
    let out = unrectify(&["eval", &net, "--input", "-1.5,0,2.25"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "-1.5,0,2.25");
    assert_eq!(unrectify(&["eval", &net, "--input", "1,2"]).status.code(), Some(2));
    assert_eq!(unrectify(&["eval", &net, "--input", "1,x,2"]).status.code(), Some(2));
}

#[test]
fn certify_exit_codes_and_rescale() {
    let dir = tempfile::tempdir().unwrap();
    let stack = random_fusion_stack::<f64>(6, 3, 2).unwrap();
    let net = write(dir.path(), "stack.json", &stack.dag);
    assert!(!certify(&stack.dag).unwrap().certified());
    assert_eq!(unrectify(&["certify", &net]).status.code(), Some(1));

    let scaled = dir.path().join("scaled.json");
    let out = unrectify(&["rescale", &net, "--out", scaled.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let back = read_network(&scaled).unwrap();
    assert!(certify(&back).unwrap().certified());
    let out = unrectify(&["certify", scaled.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("\ncertified: "));

    let block = build_resnet_block(Matrix::identity(2), Matrix::zeros(2, 2)).unwrap();
    let out = unrectify(&["certify", &write(dir.path(), "block.json", &block)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("residual at node"));

    assert_eq!(unrectify(&["certify", "/nonexistent/net.json"]).status.code(), Some(2));
}

#[test]
fn experiments_write_deterministic_csv() {
    let runs = [
        vec!["fusion-stack", "--dims", "4", "--layers", "2", "--samples", "200", "--seed", "3"],
        vec!["stability-gain", "--dims", "4", "--layers", "3", "--samples", "60", "--scaled"],
        vec!["lenet-partition", "--synthetic", "--subset", "8"],
        vec!["regions-2d", "--grid", "101"],
    ];
    for args in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut outputs = Vec::new();
        for dir in [&a, &b] {
            let mut full = args.clone();
            full.extend(["--out", dir.path().to_str().unwrap()]);
            let out = unrectify(&full);
            assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
            outputs.push(stdout(&out));
        }
        assert_eq!(outputs[0], outputs[1], "{args:?}");
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty(), "{args:?}");
        for name in names {
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
        }
    }
}

#[test]
fn regions_match_planar_counts() {
    let out = unrectify(&["regions-2d", "--grid", "401"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let count = |net: &str, probe: &str| -> u64 {
        text.lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
            .find(|f| f.len() == 3 && f[0] == net && f[1] == probe)
            .unwrap()[2]
            .parse()
            .unwrap()
    };
    assert_eq!(count("relu", "output"), 4);
    assert_eq!(count("max2", "output"), 2);
    assert_eq!(count("maxlu2", "output"), 3);
    assert_eq!(count("fusion_example", "fusion"), 8);
}

#[test]
fn bad_thread_count_is_an_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_unrectify"))
        .args(["regions-2d", "--grid", "11"])
        .env("UNRECTIFY_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UNRECTIFY_THREADS"));
}
