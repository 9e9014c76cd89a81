use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn actdiag(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actdiag"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_theorem_prints_pass_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = actdiag(dir.path(), &["verify-theorem", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines.iter().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn train_without_dataset_fails_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = actdiag(dir.path(), &["train", "--out", "m.bin"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--data"), "{}", stderr(&o));

    let o = actdiag(dir.path(), &["train", "--data", "missing.csv", "--out", "m.bin"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--data"), "{}", stderr(&o));
    assert!(!dir.path().join("m.bin").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = actdiag(dir.path(), &["eval", "--domain", "battleship", "--strategy", "rand", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus"));
    let o = actdiag(dir.path(), &["eval", "--domain", "chess", "--strategy", "rand"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_pairing_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = actdiag(dir.path(), &["eval", "--domain", "preference", "--strategy", "sink", "--out", "c.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not available"), "{}", stderr(&o));
    assert!(!dir.path().join("c.csv").exists());
}

#[test]
fn eval_rand_at_zero_is_default_miss() {
    let dir = tempfile::tempdir().unwrap();
    let o = actdiag(
        dir.path(),
        &["eval", "--domain", "battleship", "--strategy", "rand", "--budget-grid", "0", "--trials", "200"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("budget,mean,stderr,trials"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mean: f64 = row[1].parse().unwrap();
    assert!((mean - 0.78).abs() <= 0.01);
    assert_eq!(row[3], "200");
}

#[test]
fn pipeline_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let o = actdiag(d, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };
    run(&["gen-topology", "--out", "topo.txt"]);
    let topo = fs::read_to_string(d.join("topo.txt")).unwrap();
    assert!(topo.starts_with("V=100\n"));
    assert_eq!(topo.lines().filter(|l| l.starts_with("edge ")).count(), 99);
    assert_eq!(topo.lines().filter(|l| l.starts_with("pair ")).count(), 300);

    run(&["gen-data", "--domain", "network", "--topology", "topo.txt", "--count", "200", "--out", "net.csv"]);
    run(&["train", "--data", "net.csv", "--epochs", "1", "--hidden", "8", "--out", "net.model"]);
    assert_eq!(&fs::read(d.join("net.model")).unwrap()[..4], b"IMPM");

    let o = run(&[
        "collect", "--domain", "network", "--model", "net.model", "--topology", "topo.txt", "--budget", "10",
    ]);
    let trace = stdout(&o);
    assert!(trace.starts_with("step,index,value,entropy,prob\n"));
    assert_eq!(trace.lines().count(), 11);

    run(&[
        "eval", "--domain", "network", "--strategy", "oc", "--model", "net.model", "--topology", "topo.txt",
        "--trials", "10", "--budget-grid", "0,20", "--out", "curve.csv", "--trials-out", "trials.csv",
    ]);
    assert_eq!(fs::read_to_string(d.join("curve.csv")).unwrap().lines().count(), 3);
    assert_eq!(fs::read_to_string(d.join("trials.csv")).unwrap().lines().count(), 21);

    let o = run(&["dep-report", "--topology", "topo.txt", "--model", "net.model", "--trials", "10"]);
    assert!(stdout(&o).starts_with("bin_lo,bin_hi,center,links,accuracy\n"));
    assert!(stderr(&o).contains("spearman"));

    // inputs are untouched
    assert_eq!(fs::read_to_string(d.join("topo.txt")).unwrap(), topo);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "# eval settings\ndomain = battleship\nstrategy = rand\ntrials = 7\nbudget-grid = 0,10\n")
        .unwrap();
    let o = actdiag(d, &["eval", "--config", "run.cfg", "--trials", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().ends_with(",3"));

    fs::write(d.join("bad.cfg"), "trials: 5\n").unwrap();
    let o = actdiag(d, &["eval", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("key = value"));
}
