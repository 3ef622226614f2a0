use std::path::Path;
use std::process::{Command, Output};

fn dghomog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dghomog"))
        .args(args)
        .env_remove("DGHOMOG_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn constant_panel_gives_p_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "c.csv",
        "market,period,state,action\n1,1,2,1\n1,2,2,1\n2,1,2,1\n2,2,2,1\n",
    );
    for stat in ["tau1", "tau2"] {
        let out = dghomog(&["run", "--input", &input, "--stat", stat, "--K", "25", "--seed", "4"]);
        assert!(out.status.success());
        let v = json(&out);
        assert_eq!(v["p_value"], 1.0);
        assert_eq!(v["reject"], false);
        assert_eq!(v["K"], 25);
        assert_eq!(v["stat"], stat);
    }
}

#[test]
fn run_is_deterministic_and_seed_env_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("p.csv");
    let panel = panel.to_str().unwrap();
    let sim = dghomog(&["simulate", "--n", "6", "--T", "10", "--lambda", "0.5", "--seed", "8", "--output", panel]);
    assert!(sim.status.success());

    let args = ["run", "--input", panel, "--K", "300", "--seed", "5"];
    let strip = |mut v: serde_json::Value| {
        v.as_object_mut().unwrap().remove("elapsed_ms");
        v
    };
    let a = strip(json(&dghomog(&args)));
    let b = strip(json(&dghomog(&args)));
    assert_eq!(a, b);
    assert_eq!(a["seed"], 5);

    let env = Command::new(env!("CARGO_BIN_EXE_dghomog"))
        .args(args)
        .env("DGHOMOG_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(json(&env)["seed"], 11);
}

#[test]
fn run_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "c.csv", "market,period,state,action\n1,1,1,1\n1,2,1,2\n");
    let output = dir.path().join("r.json");
    let out = dghomog(&["run", "--input", &input, "--K", "5", "--output", output.to_str().unwrap()]);
    assert!(out.status.success());
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(saved["K"], 5);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "market,period,state\n1,1,1\n");
    assert_eq!(dghomog(&["run", "--input", &bad]).status.code(), Some(2));
    let missing = dir.path().join("nope.csv");
    assert_eq!(
        dghomog(&["run", "--input", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let good = write(dir.path(), "g.csv", "market,period,state,action\n1,1,1,1\n1,2,1,1\n");
    assert_eq!(dghomog(&["run", "--input", &good, "--alpha", "1.5"]).status.code(), Some(2));
    assert_eq!(dghomog(&["run", "--input", &good, "--K", "0"]).status.code(), Some(2));
    let out = dir.path().join("x.csv");
    assert_eq!(
        dghomog(&["simulate", "--n", "2", "--T", "5", "--lambda", "1.5", "--output", out.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(dghomog(&["bogus"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let path = out.to_str().unwrap();
    let run = || dghomog(&["simulate", "--n", "2", "--T", "5", "--lambda", "1", "--seed", "1", "--output", path]);
    assert!(run().status.success());
    let first = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "market,period,state,action");
    assert_eq!(lines.len(), 11);
    let rows: Vec<Vec<u32>> = lines[1..]
        .iter()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    for pair in rows.windows(2) {
        if pair[0][0] == pair[1][0] {
            assert_eq!(pair[1][2], pair[0][3], "state follows the previous action");
        }
    }
    assert!(run().status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn study_inline_and_spec_agree() {
    let dir = tempfile::tempdir().unwrap();
    let inline = dghomog(&[
        "study", "--n", "5", "--T", "6", "--lambda", "0.5", "--replications", "3", "--K", "40",
        "--seed", "2", "--jobs", "2",
    ]);
    assert!(inline.status.success());
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"cells":[{"n":5,"T":6,"lambda":0.5}],"replications":3,"K":40,"alpha":0.05,
            "stats":["tau1","tau2"],"master_seed":2}"#,
    );
    let from_spec = dghomog(&["study", "--spec", &spec, "--jobs", "1"]);
    assert!(from_spec.status.success());
    let drop_time = |o: &Output| -> Vec<String> {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(drop_time(&inline), drop_time(&from_spec));
    assert_eq!(drop_time(&inline).len(), 3);
}

#[test]
fn study_single_replication_rate_is_zero_or_one() {
    let out = dghomog(&[
        "study", "--n", "4", "--T", "6", "--lambda", "1", "--replications", "1", "--K", "30",
        "--stats", "tau1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert!(row[6] == "0" || row[6] == "1", "{row:?}");
}

#[test]
fn verify_presets_and_fault_injection() {
    let ok = dghomog(&["verify", "--preset", "tiny1", "--steps", "1000"]);
    assert!(ok.status.success());
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.contains("orbit 1") && text.contains("TV 0.0000"), "{text}");

    assert!(dghomog(&["verify", "--preset", "tiny2", "--steps", "50000"]).status.success());
    let broken = dghomog(&["verify", "--preset", "tiny2", "--steps", "1000", "--inject-fault"]);
    assert_eq!(broken.status.code(), Some(1));
    assert_eq!(dghomog(&["verify", "--preset", "giant"]).status.code(), Some(2));
}

#[test]
fn discretize_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "cap.txt", "0\n249.9\n250\n\n1e7\n");
    let out = dghomog(&["discretize", "--input", &input]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1\n1\n2\n50\n");
    let bad = write(dir.path(), "neg.txt", "-3\n");
    assert_eq!(dghomog(&["discretize", "--input", &bad]).status.code(), Some(2));
}
