use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coopt::model::games;
use coopt::{ProblemFile, SweepReport};
use coopt_cli::documents::{parse_json, to_json, NashDoc, QuantumDoc, SolveDoc, VerifyDoc};

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn coopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopt")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn assert_round_trip<T: serde::Serialize + serde::de::DeserializeOwned>(text: &str) -> T {
    let doc: T = parse_json(text).unwrap();
    assert_eq!(to_json(&doc).unwrap(), text);
    doc
}

#[test]
fn bundled_games_match_constructors() {
    let load = |n: &str| parse_json::<ProblemFile>(&std::fs::read_to_string(example(n)).unwrap()).unwrap();
    assert_eq!(load("prisoners_dilemma.json"), games::prisoners_dilemma(5.0, 3.0, 1.0, 0.0));
    assert_eq!(load("matching_pennies.json"), games::matching_pennies());
    assert_eq!(load("coordination.json"), games::coordination());
    let chain = coopt::GameModel::validate(load("pairwise_chain.json")).unwrap();
    assert_eq!(chain.num_agents(), 3);
}

#[test]
fn solve_pd_high_alpha_defects() {
    let pd = example("prisoners_dilemma.json");
    let out = coopt(&["solve", "--problem", pd.to_str().unwrap(), "--alpha", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: SolveDoc = assert_round_trip(&stdout(&out));
    assert!(doc.converged);
    for a in &doc.agents {
        assert!(a.probabilities[1] > 0.99, "{a:?}");
    }
    assert!(doc.epsilon.unwrap().epsilon < 1e-3);
}

#[test]
fn solve_energy_model_has_no_certificate() {
    let chain = example("pairwise_chain.json");
    let out = coopt(&["solve", "--problem", chain.to_str().unwrap(), "--alpha", "1", "--init", "random", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: SolveDoc = assert_round_trip(&stdout(&out));
    assert_eq!(doc.seed, Some(3));
    assert!(doc.epsilon.is_none());
    assert_eq!(doc.agents.len(), 3);
}

#[test]
fn solve_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let (res, trace, detail) = (dir.path().join("r.json"), dir.path().join("t.csv"), dir.path().join("d.csv"));
    let pd = example("prisoners_dilemma.json");
    let out = coopt(&[
        "solve",
        "--problem",
        pd.to_str().unwrap(),
        "--alpha",
        "1",
        "--out",
        res.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--trace-detail",
        detail.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let doc: SolveDoc = parse_json(&std::fs::read_to_string(&res).unwrap()).unwrap();
    let trace = std::fs::read_to_string(&trace).unwrap();
    assert!(trace.starts_with("step,max_change\n"));
    assert_eq!(trace.lines().count(), doc.iterations + 1);
    let detail = std::fs::read_to_string(&detail).unwrap();
    assert!(detail.starts_with("step,agent,action,p,psi\n"));
    assert_eq!(detail.lines().count(), doc.iterations * 4 + 1);
}

#[test]
fn non_convergence_exits_two_with_results() {
    let pd = example("prisoners_dilemma.json");
    let out = coopt(&["solve", "--problem", pd.to_str().unwrap(), "--alpha", "1", "--max-iter", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let doc: SolveDoc = assert_round_trip(&stdout(&out));
    assert!(!doc.converged);
    assert_eq!(doc.iterations, 2);
}

#[test]
fn nash_documents() {
    let run = |name: &str| {
        let out = coopt(&["nash", "--problem", example(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert_round_trip::<NashDoc>(&stdout(&out)).equilibria
    };
    assert_eq!(run("prisoners_dilemma.json"), vec![vec![1, 1]]);
    assert!(run("matching_pennies.json").is_empty());
    assert_eq!(run("coordination.json"), vec![vec![0, 0], vec![1, 1]]);

    let out = coopt(&["nash", "--problem", example("pairwise_chain.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_accepts_solve_output() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("r.json");
    let pd = example("prisoners_dilemma.json");
    let pd = pd.to_str().unwrap();
    let out = coopt(&["solve", "--problem", pd, "--alpha", "1", "--out", res.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let solved: SolveDoc = parse_json(&std::fs::read_to_string(&res).unwrap()).unwrap();

    let out = coopt(&["verify", "--problem", pd, "--profile", res.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: VerifyDoc = assert_round_trip(&stdout(&out));
    assert_eq!(doc.certificate.epsilon, solved.epsilon.unwrap().epsilon);

    let pure = dir.path().join("pure.json");
    std::fs::write(
        &pure,
        r#"{"agents": [{"name": "player2", "probabilities": [0, 1]}, {"name": "player1", "probabilities": [0, 1]}]}"#,
    )
    .unwrap();
    let out = coopt(&["verify", "--problem", pd, "--profile", pure.to_str().unwrap()]);
    let doc: VerifyDoc = parse_json(&stdout(&out)).unwrap();
    assert_eq!(doc.certificate.epsilon, 0.0);

    std::fs::write(&pure, r#"{"agents": [{"name": "player1", "probabilities": [0, 1]}]}"#).unwrap();
    let out = coopt(&["verify", "--problem", pd, "--profile", pure.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("player2"), "{}", stderr(&out));
}

#[test]
fn sweep_csv_round_trips() {
    let pd = example("prisoners_dilemma.json");
    let out = coopt(&["sweep", "--problem", pd.to_str().unwrap(), "--alpha-grid", "1:32:log:6", "--restarts", "2", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let report = SweepReport::read_csv(text.as_bytes()).unwrap();
    assert_eq!(report.rows.len(), 12);
    let mut again = Vec::new();
    report.write_csv(&mut again).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), text);
}

#[test]
fn quantum_harmonic_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("traj.csv");
    let ho = example("harmonic_oscillator.json");
    let out = coopt(&["quantum", "--hamiltonian", ho.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: QuantumDoc = assert_round_trip(&stdout(&out));
    let s = &doc.states[0];
    assert!((s.lambda - 0.5).abs() < 5e-3, "{}", s.lambda);
    assert!(s.residual <= 1e-8);
    assert_eq!(s.matched_eigenvalue_index, Some(0));
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("t,agent,action,psi,lambda,residual\n"));
}

#[test]
fn quantum_deflated_states() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    std::fs::write(&h, r#"{"dense": [[2, -1, 0, 0], [-1, 2, -1, 0], [0, -1, 2, -1], [0, 0, -1, 2]]}"#).unwrap();
    let out = coopt(&["quantum", "--hamiltonian", h.to_str().unwrap(), "--states", "3", "--dt", "0.1", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: QuantumDoc = assert_round_trip(&stdout(&out));
    for (k, s) in doc.states.iter().enumerate() {
        assert_eq!(s.matched_eigenvalue_index, Some(k));
        // Path-graph Laplacian: 2 - 2cos(k pi / 5).
        let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 5.0).cos();
        assert!((s.lambda - exact).abs() < 1e-6, "{k}: {} vs {exact}", s.lambda);
    }

    let out = coopt(&["quantum", "--hamiltonian", h.to_str().unwrap(), "--t-max", "0.5", "--dt", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let doc: QuantumDoc = parse_json(&stdout(&out)).unwrap();
    assert!(!doc.states[0].converged);
}

#[test]
fn malformed_variables_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"mode\": \"utility\",\n  \"variables\": [\n    {\"name\": \"x\", \"cardinality\": \"two\"}\n  ],\n  \"agents\": []\n}\n",
    )
    .unwrap();
    let out = coopt(&["nash", "--problem", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("variables[0].cardinality"), "{msg}");
    assert!(msg.contains("line 4"), "{msg}");

    std::fs::write(&bad, r#"{"mode": "utility", "variables": [{"name": "x", "cardinality": 0}], "agents": []}"#).unwrap();
    let out = coopt(&["solve", "--problem", bad.to_str().unwrap(), "--alpha", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("variables[0].cardinality"), "{}", stderr(&out));
}

#[test]
fn bad_arguments_exit_nonzero() {
    let pd = example("prisoners_dilemma.json");
    let out = coopt(&["sweep", "--problem", pd.to_str().unwrap(), "--alpha-grid", "0:1:log:3"]);
    assert_eq!(out.status.code(), Some(1));
    let out = coopt(&["solve", "--problem", pd.to_str().unwrap(), "--alpha=-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));
    let out = coopt(&["solve", "--problem", pd.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = coopt(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let out = coopt(&["solve", "--problem", "/nonexistent.json", "--alpha", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
