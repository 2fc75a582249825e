use std::path::Path;
use std::process::{Command, Output};

fn absaga(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_absaga"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn absaga")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(graph: &str, problem: &str, algorithm: &str, run: &str, trace: &str) -> String {
    format!(
        "schema_version = 1\n[graph]\n{graph}\n[problem]\n{problem}\n[algorithm]\n{algorithm}\n[run]\n{run}\n[output]\ntrace = \"{trace}\"\n"
    )
}

const LOGISTIC: &str = "kind = \"logistic\"\ndim = 5\nper_node = 40\nseed = 1";
const EXP8: &str = "type = \"exponential\"\nn = 8";

#[test]
fn graph_gen_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = absaga(
        dir.path(),
        &["graph", "gen", "--type", "geometric", "--n", "12", "--radius", "0.5", "--reverse-drop", "0.3", "--seed", "4", "--out", "g.txt"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let check = absaga(dir.path(), &["graph", "check", "g.txt"]);
    assert!(check.status.success());
    assert!(stdout(&check).contains("strongly_connected=true"));

    let again = absaga(
        dir.path(),
        &["graph", "gen", "--type", "geometric", "--n", "12", "--radius", "0.5", "--reverse-drop", "0.3", "--seed", "4", "--out", "h.txt"],
    );
    assert!(again.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("g.txt")).unwrap(),
        std::fs::read(dir.path().join("h.txt")).unwrap()
    );
}

#[test]
fn disconnected_graph_check_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "3\n0 0\n1 1\n2 2\n0 1\n").unwrap();
    let out = absaga(dir.path(), &["graph", "check", "g.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("strongly_connected=false"));
}

#[test]
fn malformed_edge_list_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "2\n0 1\n1 x\n").unwrap();
    let out = absaga(dir.path(), &["theory", "weights", "g.txt"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn weights_report_directivity() {
    let dir = tempfile::tempdir().unwrap();
    absaga(dir.path(), &["graph", "gen", "--type", "exponential", "--n", "8", "--out", "g.txt"]);
    let out = absaga(dir.path(), &["theory", "weights", "g.txt", "--csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    let psi = values[header.iter().position(|&h| h == "psi").unwrap()];
    assert!((psi.parse::<f64>().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(EXP8, LOGISTIC, "name = \"absaga\"\nalpha = 0.5", "epochs = 20", "out/trace.csv");
    std::fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let out = absaga(dir.path(), &["run", "--config", "run.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = stdout(&out);
    assert!(summary.contains("grads_computed=6400"), "{summary}");
    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iteration,epoch,optimality_gap,consensus_error,tracking_error,aux_gap,grads_computed,comm_rounds"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.last().unwrap().starts_with("800,2.0000000000000000e1,"));
}

#[test]
fn identical_configs_give_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let cfg = config(EXP8, LOGISTIC, "name = \"absaga\"\nalpha = 0.5", "epochs = 5\nseed = 3", &format!("{name}.csv"));
        std::fs::write(dir.path().join(format!("{name}.toml")), cfg).unwrap();
        assert!(absaga(dir.path(), &["run", "--config", &format!("{name}.toml")]).status.success());
    }
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn single_node_absaga_matches_saga() {
    let dir = tempfile::tempdir().unwrap();
    let problem = "kind = \"quadratic\"\ndim = 3\nper_node = 20\nseed = 2";
    for name in ["absaga", "saga"] {
        let cfg = config(
            "type = \"complete\"\nn = 1",
            problem,
            &format!("name = \"{name}\"\nalpha = 0.2"),
            "iterations = 300\nrecord_every = 1\nseed = 8",
            &format!("{name}.csv"),
        );
        std::fs::write(dir.path().join(format!("{name}.toml")), cfg).unwrap();
        let out = absaga(dir.path(), &["run", "--config", &format!("{name}.toml")]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(
        std::fs::read(dir.path().join("absaga.csv")).unwrap(),
        std::fs::read(dir.path().join("saga.csv")).unwrap()
    );
}

#[test]
fn configuration_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (config(EXP8, LOGISTIC, "name = \"absaga\"\nalpha = -1.0", "epochs = 5", "t.csv"), "algorithm.alpha"),
        (config(EXP8, LOGISTIC, "name = \"absaga\"\nalpha = 0.1", "epochs = 5\niterations = 5", "t.csv"), "run"),
        (config(EXP8, LOGISTIC, "name = \"absaga\"\nalpha = 0.1\nstep = 2", "epochs = 5", "t.csv"), "algorithm"),
        (config(EXP8, LOGISTIC, "name = \"adam\"\nalpha = 0.1", "epochs = 5", "t.csv"), "algorithm.name"),
    ];
    for (text, key) in cases {
        std::fs::write(dir.path().join("bad.toml"), text).unwrap();
        let out = absaga(dir.path(), &["run", "--config", "bad.toml"]);
        assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
        assert!(stderr(&out).contains(&format!("`{key}")), "{}", stderr(&out));
    }
}

#[test]
fn missing_config_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = absaga(dir.path(), &["run", "--config", "nope.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn divergence_exits_3_and_keeps_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(EXP8, LOGISTIC, "name = \"ab\"\nalpha = 1e200", "iterations = 50\nrecord_every = 1", "t.csv");
    std::fs::write(dir.path().join("div.toml"), cfg).unwrap();
    let out = absaga(dir.path(), &["run", "--config", "div.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("diverged"));
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(trace.lines().count() >= 2);
}

#[test]
fn auto_alpha_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(EXP8, LOGISTIC, "name = \"absaga\"\nalpha = \"auto\"", "iterations = 10", "t.csv");
    std::fs::write(dir.path().join("auto.toml"), cfg).unwrap();
    let out = absaga(dir.path(), &["run", "--config", "auto.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("alpha_source=auto"));
}

#[test]
fn certify_passes_at_certified_parameters() {
    let dir = tempfile::tempdir().unwrap();
    absaga(dir.path(), &["graph", "gen", "--type", "exponential", "--n", "8", "--out", "g.txt"]);
    let cfg = config(EXP8, "kind = \"quadratic\"\ndim = 2\nper_node = 10\nseed = 1", "name = \"absaga\"\nalpha = \"auto\"", "epochs = 1", "t.csv");
    std::fs::write(dir.path().join("p.toml"), cfg).unwrap();
    let out = absaga(dir.path(), &["theory", "certify", "--graph", "g.txt", "--problem-config", "p.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("certificate=pass"), "{text}");
    assert!(text.contains("g_delta_le_gamma_delta=pass"));

    let out = absaga(dir.path(), &["theory", "certify", "--graph", "g.txt", "--problem-config", "p.toml", "--d", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("not applicable"));
}

#[test]
fn compare_merges_on_a_shared_epoch_grid() {
    let dir = tempfile::tempdir().unwrap();
    // many samples per node favour the stochastic methods per epoch
    let problem = "kind = \"logistic\"\ndim = 5\nper_node = 200\nseed = 4";
    let mut names = Vec::new();
    for name in ["absaga", "sab", "ab"] {
        let cfg = config(EXP8, problem, &format!("name = \"{name}\"\nalpha = 0.5"), "epochs = 15", "unused.csv");
        let file = format!("{name}.toml");
        std::fs::write(dir.path().join(&file), cfg).unwrap();
        names.push(file);
    }
    let list = names.join(",");
    let out = absaga(dir.path(), &["compare", "--configs", &list, "--out", "cmp"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let merged = std::fs::read_to_string(dir.path().join("cmp/merged.csv")).unwrap();
    let rows: Vec<Vec<&str>> = merged.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], vec!["epoch", "gap_absaga", "gap_sab", "gap_ab"]);
    assert_eq!(rows.len(), 17);
    for (e, row) in rows[1..].iter().enumerate() {
        assert_eq!(row[0], e.to_string());
    }
    let last = rows.last().unwrap();
    let gap = |i: usize| last[i].parse::<f64>().unwrap();
    assert!(gap(1) < gap(3), "absaga {} vs ab {}", gap(1), gap(3));

    // the deterministic method reproduces exactly
    let out = absaga(dir.path(), &["compare", "--configs", &list, "--out", "cmp2"]);
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("cmp/ab.csv")).unwrap(),
        std::fs::read(dir.path().join("cmp2/ab.csv")).unwrap()
    );
}

#[test]
fn compare_rejects_mismatched_problems() {
    let dir = tempfile::tempdir().unwrap();
    let a = config(EXP8, LOGISTIC, "name = \"absaga\"\nalpha = 0.5", "epochs = 2", "a.csv");
    let b = config(EXP8, &LOGISTIC.replace("seed = 1", "seed = 2"), "name = \"sab\"\nalpha = 0.5", "epochs = 2", "b.csv");
    std::fs::write(dir.path().join("a.toml"), a).unwrap();
    std::fs::write(dir.path().join("b.toml"), b).unwrap();
    let out = absaga(dir.path(), &["compare", "--configs", "a.toml,b.toml", "--out", "cmp"]);
    assert_eq!(out.status.code(), Some(2));
}
