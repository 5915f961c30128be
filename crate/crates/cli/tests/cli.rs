//! In-process tests of the command functions.

use std::fs;
use std::path::Path;

use memsim::{cmd_graph_check, cmd_graph_query, cmd_graph_render, cmd_simulate, cmd_sweep, CSV_HEADER};

const BASE_CONFIG: &str = r#"
[policy]
variant = "w_tiny_lfu"
capacity = 10
window = 9
main = 1

[stream]
distribution = "zipf"
exponent = 1.0
pool_size = 100
length = 2000
seed = 7

[sweep]
policies = ["fifo[10]", "w_tiny_lfu[9,1]", "w_tiny_lfu[5,5]", "w_tiny_lfu[1,9]"]
seeds = [1]
"#;

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn simulate_prints_header_row_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, BASE_CONFIG);
    let output = cmd_simulate(&config, None, false, None).unwrap();
    let mut lines = output.stdout.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let row = lines.next().unwrap();
    assert!(row.starts_with("w_tiny_lfu,10,9,1,7,"), "row: {row}");
    assert!(output.stdout.contains("hit rate"));
}

#[test]
fn simulate_is_deterministic_and_respects_force() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, BASE_CONFIG);
    let out = dir.path().join("row.csv");
    cmd_simulate(&config, Some(&out), false, None).unwrap();
    let first = fs::read(&out).unwrap();

    // Existing output without --force is refused with a config error.
    let err = cmd_simulate(&config, Some(&out), false, None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.message().contains("--force"));

    cmd_simulate(&config, Some(&out), true, None).unwrap();
    assert_eq!(fs::read(&out).unwrap(), first);
}

#[test]
fn simulate_seed_override_changes_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, BASE_CONFIG);
    let default_run = cmd_simulate(&config, None, false, None).unwrap();
    let overridden = cmd_simulate(&config, None, false, Some(99)).unwrap();
    assert_ne!(default_run.stdout, overridden.stdout);
    assert!(overridden.stdout.contains("w_tiny_lfu,10,9,1,99,"));
}

#[test]
fn missing_config_is_a_config_error() {
    let err = cmd_simulate(Path::new("/nonexistent/run.toml"), None, false, None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn sweep_writes_grid_and_series_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, BASE_CONFIG);
    let out = dir.path().join("sweep.csv");
    cmd_sweep(&config, &out, false, 1, None).unwrap();

    let grid = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 5, "header plus four grid rows");

    // One hit-rate series file per grid point.
    let series: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.contains("_series_").then_some(name)
        })
        .collect();
    assert_eq!(series.len(), 4, "series files: {series:?}");
    for name in &series {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("step,hit_rate\n"));
        assert_eq!(text.lines().count(), 2001, "{name}");
    }
}

#[test]
fn sweep_parallel_output_is_identical_to_serial() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(
        &config,
        &BASE_CONFIG.replace("seeds = [1]", "seeds = [1, 2, 3]"),
    );
    let serial = dir.path().join("serial.csv");
    let parallel = dir.path().join("parallel.csv");
    cmd_sweep(&config, &serial, false, 1, None).unwrap();
    cmd_sweep(&config, &parallel, false, 4, None).unwrap();
    assert_eq!(fs::read(&serial).unwrap(), fs::read(&parallel).unwrap());
}

#[test]
fn sweep_refuses_existing_output_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    write(&config, BASE_CONFIG);
    let out = dir.path().join("sweep.csv");
    write(&out, "old");
    let err = cmd_sweep(&config, &out, false, 1, None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert_eq!(fs::read_to_string(&out).unwrap(), "old", "output untouched");
}

fn sample_graph_file(dir: &Path) -> std::path::PathBuf {
    use dualmem::scene_graph::ObjectAttributes;
    use dualmem::{Position, SceneGraph};
    let mut graph = SceneGraph::new();
    graph
        .add_area("node_1", Position::new(2.34, 0.0, 2.23), None)
        .unwrap();
    graph
        .add_area("node_2", Position::new(5.0, 0.0, 2.0), None)
        .unwrap();
    graph
        .add_area("node_8", Position::new(1.0, 0.0, 6.0), None)
        .unwrap();
    for (area, object, x, z) in [
        ("node_1", "bed", 2.0_f64, 2.0_f64),
        ("node_1", "table", 2.5, 2.5),
        ("node_1", "window", 2.4, 1.9),
    ] {
        graph
            .add_object(
                area,
                object,
                ObjectAttributes {
                    position: Position::new(x, 0.0, z),
                    volume: None,
                },
            )
            .unwrap();
    }
    graph.add_edge("node_1", "node_2").unwrap();
    graph.add_edge("node_1", "node_8").unwrap();
    let path = dir.join("scene.graph");
    graph.save(&path).unwrap();
    path
}

#[test]
fn graph_render_prints_the_prompt_serialization() {
    let dir = tempfile::tempdir().unwrap();
    let path = sample_graph_file(dir.path());
    let output = cmd_graph_render(&path).unwrap();
    assert!(output.stdout.lines().any(|l| l
        == "{name: node_1, type: Area, contains: [bed, table, window], adjacent nodes: [node_2, node_8], position: [2.34, 0.00, 2.23]}"),
        "output:\n{}", output.stdout);
    assert!(output.stdout.contains("node_1 \u{2194} node_2"));
}

#[test]
fn graph_check_accepts_valid_and_rejects_dangling() {
    let dir = tempfile::tempdir().unwrap();
    let path = sample_graph_file(dir.path());
    let output = cmd_graph_check(&path).unwrap();
    assert!(output.stdout.starts_with("ok:"));

    let bad = dir.path().join("bad.graph");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("edge\tnode_1\tnode_99\n");
    fs::write(&bad, text).unwrap();
    let err = cmd_graph_check(&bad).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn graph_query_reports_navigability() {
    let dir = tempfile::tempdir().unwrap();
    let path = sample_graph_file(dir.path());
    assert_eq!(cmd_graph_query(&path, "node_2", "node_8").unwrap().stdout, "true\n");

    // Disconnect node_8 by rebuilding without edges to it.
    let isolated = dir.path().join("isolated.graph");
    let text = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .filter(|l| *l != "edge\tnode_1\tnode_8")
        .map(|l| format!("{l}\n"))
        .collect::<String>();
    fs::write(&isolated, text).unwrap();
    assert_eq!(
        cmd_graph_query(&isolated, "node_2", "node_8").unwrap().stdout,
        "false\n"
    );
    assert!(cmd_graph_query(&isolated, "node_2", "node_99").is_err());
}
