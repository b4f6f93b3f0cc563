use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn model(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/models")
        .join(name)
}

fn codiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codiag"))
        .args(args)
        .env_remove("CODIAG_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn codiagnosable_model_exits_zero() {
    let m = model("split_detection.sdes");
    let o = codiag(&[path_str(&m), "--check"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "codiagnosable: true\n");
}

#[test]
fn shared_blind_spot_exits_one_with_a_witness() {
    let m = model("shared_blind_spot.sdes");
    let o = codiag(&[path_str(&m), "--check"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(
        stdout(&o),
        "codiagnosable: false\nwitness cycle:\n  ({2F,3F,4N},{2F,3F,4N,5F},{2F,3F,4N}) --(a,a,a)-->\n"
    );
}

#[test]
fn site_flag_switches_the_exit_status_to_the_centralized_check() {
    let m = model("split_detection.sdes");
    let o = codiag(&[path_str(&m), "--check", "--site", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("site 1 centrally diagnosable: false"));
    assert_eq!(codiag(&[path_str(&m), "--site", "3"]).status.code(), Some(2));
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sdes");
    fs::write(&bad, "sites 1\nstates 0\ninit 7\n").unwrap();
    let o = codiag(&[path_str(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));

    assert_eq!(
        codiag(&[path_str(&dir.path().join("missing.sdes"))]).status.code(),
        Some(2)
    );
    let m = model("split_detection.sdes");
    assert_eq!(codiag(&[path_str(&m), "--class", "Z"]).status.code(), Some(2));
}

#[test]
fn report_is_deterministic_and_matches_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("split_detection.sdes");
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    codiag(&[path_str(&m), "--report", path_str(&a)]);
    codiag(&[path_str(&m), "--report", path_str(&b)]);
    let first = fs::read_to_string(&a).unwrap();
    assert_eq!(first, fs::read_to_string(&b).unwrap());

    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/split_detection.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &first).unwrap();
    }
    assert_eq!(first, fs::read_to_string(golden).unwrap());
}

#[test]
fn dot_directory_holds_one_graph_per_machine() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("shared_blind_spot.sdes");
    codiag(&[path_str(&m), "--dot", path_str(dir.path())]);
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "automaton.dot",
            "codiagnoser.dot",
            "global_diagnoser.dot",
            "site1_diagnoser.dot",
            "site1_stochastic.dot",
            "site2_diagnoser.dot",
            "site2_stochastic.dot",
        ]
    );
    for n in names {
        let text = fs::read_to_string(dir.path().join(n)).unwrap();
        assert!(text.starts_with("digraph \"") && text.trim_end().ends_with('}'));
    }
}

#[test]
fn csv_has_a_row_per_seed_site_and_step() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("split_detection.sdes");
    let path = dir.path().join("curves.csv");
    codiag(&[path_str(&m), "--csv", path_str(&path)]);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,site,n,probability"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // two failure seeds, two sites, n = 1..=25
    assert_eq!(rows.len(), 2 * 2 * 25);
    for r in &rows {
        let p: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn simulation_follows_the_seed_flag_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("split_detection.sdes");
    let run = |name: &str, extra: &[&str], env: Option<&str>| {
        let path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_codiag"));
        cmd.arg(&m)
            .args(["--simulate", "--n", "6", "--trials", "500", "--csv"])
            .arg(&path)
            .args(extra);
        match env {
            Some(v) => cmd.env("CODIAG_SEED", v),
            None => cmd.env_remove("CODIAG_SEED"),
        };
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        fs::read_to_string(path).unwrap()
    };
    let flag = run("flag.csv", &["--seed", "9"], None);
    assert_eq!(flag, run("env.csv", &[], Some("9")));
    assert_ne!(flag, run("other.csv", &["--seed", "10"], None));
    assert_eq!(flag.lines().count(), 1 + 2 * 2 * 6);
}
