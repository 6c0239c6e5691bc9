use std::path::Path;
use std::process::{Command, Output};

fn edgenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgenet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn arma_paramcount_is_128() {
    let o = edgenet(&["paramcount", "--family", "arma", "--poles", "2", "--order", "3", "--features", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "128");
}

#[test]
fn edge_varying_paramcount_uses_graph_sizes() {
    let o = edgenet(&[
        "paramcount", "--family", "edge-varying", "--order", "2", "--nodes", "5", "--edge-count", "8",
    ]);
    assert_eq!(stdout(&o).trim(), (2 * (8 + 5) + 5).to_string());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = edgenet(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_config_is_a_runtime_error() {
    let o = edgenet(&["train", "--config", "/nonexistent.json", "--model", "m", "--metrics", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn default_gradcheck_passes() {
    let o = edgenet(&["gradcheck"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 11);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn spectrum_and_centrality_on_a_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let edges = write(dir.path(), "k3.edges", "0 1\n1 2\n0 2\n");
    let o = edgenet(&["spectrum", "--edges", &edges, "--coeffs", "1,-1"]);
    assert!(o.status.success());
    let rows: Vec<Vec<f64>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    // S = K3 / 2 has eigenvalues -1/2, -1/2, 1; response 1 - λ
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!((r[1] - (1.0 - r[0])).abs() < 1e-12);
    }
    assert!((rows[2][0] - 1.0).abs() < 1e-9);

    let o = edgenet(&["centrality", "--edges", &edges, "--normalization", "none", "--order", "1"]);
    assert_eq!(stdout(&o), "node,centrality\n0,3\n1,3\n2,3\n");
}

#[test]
fn generate_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "cfg.json",
        r#"{
            "task": {"type": "sbm_source_localization", "nodes": 15, "communities": 3,
                     "train": 60, "val": 20, "test": 20, "max_diffusion": 5},
            "architecture": {"family": "polynomial", "order": 2, "features": 4},
            "training": {"epochs": 3, "batch_size": 20, "learning_rate": 0.01},
            "seed": 4
        }"#,
    );
    let d = dir.path();
    let p = |n: &str| d.join(n).to_string_lossy().into_owned();
    let o = edgenet(&["generate", "--config", &config, "--edges", &p("g.edges"), "--signals", &p("s.csv")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(p("s.csv")).unwrap().lines().count(), 100);

    let o = edgenet(&["train", "--config", &config, "--model", &p("m.json"), "--metrics", &p("m.csv")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(p("m.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);

    let o = edgenet(&["eval", "--config", &config, "--model", &p("m.json")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("samples 20"));

    // a different seed builds a different graph, which the saved model refuses
    let o = edgenet(&["eval", "--config", &config, "--seed", "5", "--model", &p("m.json")]);
    assert_eq!(o.status.code(), Some(1));
}
