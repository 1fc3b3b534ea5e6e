use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn plp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plp")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = plp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(name: &str) -> String {
    data(name).to_str().unwrap().to_string()
}

#[test]
fn alarm_evidence_probability() {
    let out = stdout(&["evid", "--program", &path("alarm.pl"), "--evidence", &path("alarm_evidence.pl"), "--oracle-check"]);
    assert_eq!(out, "p_evidence\t0.196000000000\n");
}

#[test]
fn marginals_are_sorted_and_match_json() {
    let program = path("alarm.pl");
    let evidence = path("alarm_evidence.pl");
    let args = ["marg", "--program", &program, "--evidence", &evidence, "--query", "earthquake", "--query", "burglary"];
    let text = stdout(&args);
    assert_eq!(text, "burglary\t0.357142857143\nearthquake\t0.714285714286\n");
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let doc: Value = serde_json::from_str(&stdout(&json_args)).unwrap();
    assert_eq!(doc["task"], "marg");
    let results = doc["results"].as_array().unwrap();
    for (line, r) in text.lines().zip(results) {
        let (atom, p) = line.split_once('\t').unwrap();
        assert_eq!(r["atom"], atom);
        assert!((r["p"].as_f64().unwrap() - p.parse::<f64>().unwrap()).abs() < 1e-11);
    }
}

#[test]
fn mpe_matches_oracle_output() {
    let program = path("alarm.pl");
    let evidence = path("alarm_evidence.pl");
    let engine = stdout(&["mpe", "--program", &program, "--evidence", &evidence]);
    let brute = stdout(&["oracle", "--task", "mpe", "--program", &program, "--evidence", &evidence]);
    assert_eq!(engine, brute);
    assert!(engine.starts_with("mpe_probability\t0.0882000000000\n"));
    assert!(engine.contains("calls(mary)\ttrue\n"));
    assert!(!engine.contains("calls(john)"));
}

#[test]
fn dimacs_header_for_alarm() {
    let out = stdout(&["cnf", "--program", &path("alarm.pl"), "--evidence", &path("alarm_evidence.pl")]);
    assert!(out.starts_with("p cnf 5 "), "{out}");
    let nnf = stdout(&["compile", "--program", &path("alarm.pl"), "--evidence", &path("alarm_evidence.pl")]);
    assert!(nnf.starts_with("nnf "));
}

#[test]
fn learn_sample_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("data.txt");
    let sampled = stdout(&["sample", "--program", &path("alarm.pl"), "-n", "300", "--fraction", "1.0", "--seed", "3"]);
    std::fs::write(&dataset, sampled).unwrap();
    let learned = stdout(&[
        "learn",
        "--program",
        &path("alarm_learnable.pl"),
        "--dataset",
        dataset.to_str().unwrap(),
        "--fully-observable",
    ]);
    let learned_path = dir.path().join("learned.pl");
    std::fs::write(&learned_path, &learned).unwrap();
    let out = stdout(&["kl", "--truth", &path("alarm.pl"), "--learned", learned_path.to_str().unwrap()]);
    let kl: f64 = out.lines().next().unwrap().split_once('\t').unwrap().1.parse().unwrap();
    assert!((0.0..0.05).contains(&kl), "{out}");

    let em = stdout(&["learn", "--program", &path("alarm_learnable.pl"), "--dataset", &path("alarm_data.txt"), "--seed", "1"]);
    let trace: Vec<f64> = em
        .lines()
        .filter_map(|l| l.strip_prefix("% ll "))
        .map(|l| l.split_once(' ').unwrap().1.parse().unwrap())
        .collect();
    assert!(trace.len() > 2);
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    assert_eq!(plp(&["evid"]).status.code(), Some(1));
    assert_eq!(plp(&["evid", "--program", "/nonexistent/x.pl"]).status.code(), Some(2));
    let bad = write("bad.pl", "0.3::a :- .");
    assert_eq!(plp(&["evid", "--program", &bad]).status.code(), Some(2));
    let unsound = write("u.pl", "a :- \\+b. b :- \\+a.");
    assert_eq!(plp(&["marg", "--program", &unsound, "--query", "a"]).status.code(), Some(3));
    let zero = write("z.pl", "evidence(calls(john),true). evidence(alarm,false).");
    let out = plp(&["marg", "--program", &path("alarm.pl"), "--evidence", &zero, "--query", "burglary"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
