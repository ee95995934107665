use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--n",
    "50",
    "--holdout-n",
    "60",
    "--hidden",
    "6",
    "--max-epochs",
    "20",
    "--batch-size",
    "25",
    "--validation-fraction",
    "0",
    "--ensemble-size",
    "2",
    "--splits",
    "2",
];

fn piven(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_piven"))
        .args(args)
        .env("PIVEN_OUT_DIR", out)
        .output()
        .unwrap()
}

#[test]
fn bench_writes_report_and_report_reads_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["bench", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let res = piven(&args, &out);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(out.join("report.json").exists());
    assert!(out.join("predictions.csv").exists());
    assert!(out.join("metric_picp.csv").exists());

    let res = piven(&["report", out.to_str().unwrap()], &out);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("PICP"), "{text}");
}

#[test]
fn sweep_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let mut args = vec![
        "sweep-hparam",
        "--betas",
        "0.5",
        "--lambdas",
        "1,15",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL);
    let res = piven(&args, &out);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(out.join("sweep.json").exists());
    assert!(out.join("series.csv").exists());
}

#[test]
fn out_dir_env_sets_base_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["bench"];
    args.extend_from_slice(SMALL);
    let res = piven(&args, dir.path());
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(dir.path().join("bench-sine").join("report.json").exists());
}

#[test]
fn gen_data_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sine.csv");
    let res = piven(
        &[
            "gen-data",
            "--kind",
            "skew-normal",
            "--n",
            "25",
            "--out",
            file.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let rows = csv::Reader::from_path(&file).unwrap().records().count();
    assert_eq!(rows, 25);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let res = piven(&["bench", "--alpha", "1.5"], dir.path());
    assert_eq!(res.status.code(), Some(2));
    let res = piven(&["bench", "--data", "/nonexistent/file.csv"], dir.path());
    assert_eq!(res.status.code(), Some(5));
    let res = piven(
        &["report", dir.path().join("missing").to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(5));
}
