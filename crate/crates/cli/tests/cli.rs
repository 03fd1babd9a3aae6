use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy.toml")
}

fn decum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decum"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn constant_weight_in_frozen_market() {
    let toy = toy();
    let out = stdout(&decum(&[
        "simulate",
        "-c",
        toy.to_str().unwrap(),
        "--weight",
        "0.5",
    ]));
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("engine,strategy"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], ["synthetic", "constant-weight", "0.5"]);
    // six withdrawals of 40 from 1000 with every return equal to one
    assert!(row.contains(&"760"), "{out}");
    assert!(row.contains(&"40"), "{out}");
}

#[test]
fn solve_then_simulate_and_export_controls() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy();
    let ctl = dir.path().join("ctl.json");
    let msg = stdout(&decum(&[
        "solve",
        "-c",
        toy.to_str().unwrap(),
        "--out",
        ctl.to_str().unwrap(),
    ]));
    assert!(msg.contains("W*="), "{msg}");

    let sim = stdout(&decum(&[
        "simulate",
        "-c",
        toy.to_str().unwrap(),
        "--control",
        ctl.to_str().unwrap(),
    ]));
    assert!(
        sim.lines()
            .nth(1)
            .unwrap()
            .starts_with("synthetic,optimal,1"),
        "{sim}"
    );

    let heat = dir.path().join("heat.csv");
    stdout(&decum(&[
        "heatmap",
        "--control",
        ctl.to_str().unwrap(),
        "--w-max",
        "1500",
        "--out",
        heat.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(heat).unwrap();
    assert!(text.starts_with("t,w,p\n"));
    assert!(text.lines().count() > 10);
}

#[test]
fn run_writes_outputs_under_overridden_dir() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy();
    let set = format!("output.dir={}", dir.path().display());
    let summary = stdout(&decum(&["run", "-c", toy.to_str().unwrap(), "--set", &set]));
    assert!(summary.lines().count() >= 4, "{summary}");
    assert!(std::fs::read_dir(dir.path()).unwrap().count() >= 3);
}

#[test]
fn schedule_has_one_row_per_date() {
    let toy = toy();
    let out = stdout(&decum(&["schedule", "-c", toy.to_str().unwrap()]));
    assert_eq!(out.lines().count(), 1 + 6);
}

#[test]
fn exit_codes_follow_error_kind() {
    let toy = toy();
    let toy = toy.to_str().unwrap();
    let code = |o: Output| o.status.code().unwrap();

    assert_eq!(
        code(decum(&[
            "simulate",
            "-c",
            toy,
            "--weight",
            "0.5",
            "--set",
            "grid.bogus=1"
        ])),
        2
    );
    assert_eq!(
        code(decum(&[
            "simulate",
            "-c",
            "/no/such/config.toml",
            "--weight",
            "0.5"
        ])),
        2
    );

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(
        &csv,
        "date,stock_index,bill_index,cpi\n1926-01,1,1,1\n1926-02,-1,1,1\n",
    )
    .unwrap();
    assert_eq!(
        code(decum(&["calibrate", "--data", csv.to_str().unwrap()])),
        3
    );

    // the toy optimum sits far above this search bracket
    let ctl = dir.path().join("ctl.json");
    let o = decum(&[
        "solve",
        "-c",
        toy,
        "--set",
        "objective.search.hi=100",
        "--out",
        ctl.to_str().unwrap(),
    ]);
    assert_eq!(code(o), 4);
}
