use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sketchclust(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchclust"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = sketchclust(
        dir.path(),
        &["bounds", "--n-min", "100", "--n-nodes", "1000"],
    );
    assert!(o.status.success(), "{o:?}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    let f = json[0]["f"].as_f64().unwrap();
    assert!((f - 10.0).abs() < 1e-12);
    assert!(stdout(&o).contains("\"gamma\""));
}

#[test]
fn run_once_recovers_ideal_graph() {
    let dir = tempfile::tempdir().unwrap();
    let o = sketchclust(
        dir.path(),
        &[
            "run-once",
            "--cluster-sizes",
            "30,20,10",
            "--p",
            "1",
            "--q",
            "0",
            "--rho",
            "1",
            "--n-samples",
            "24",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["success"], true);
    assert_eq!(summary["clusters"], 3);
    let part = fs::read_to_string(dir.path().join("partition.txt")).unwrap();
    assert_eq!(part.lines().count(), 60);
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn run_once_reads_edge_list_and_partition() {
    let dir = tempfile::tempdir().unwrap();
    let mut edges = String::from("# nodes=8\n");
    let labels = [0, 0, 0, 0, 1, 1, 1, 1];
    for i in 0..8 {
        for j in i + 1..8 {
            let s = u8::from(labels[i] == labels[j]);
            edges += &format!("{} {} {s}\n", i + 1, j + 1);
        }
    }
    let edge_path = dir.path().join("g.txt");
    fs::write(&edge_path, edges).unwrap();
    let part_path = dir.path().join("truth.txt");
    let truth: String = labels
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{} {}\n", i + 1, c + 1))
        .collect();
    fs::write(&part_path, truth).unwrap();
    let o = sketchclust(
        dir.path(),
        &[
            "run-once",
            "--edge-list",
            edge_path.to_str().unwrap(),
            "--partition",
            part_path.to_str().unwrap(),
            "--n-samples",
            "8",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["success"], true);
}

#[test]
fn phase_grid_writes_csv_and_config_file_wins_over_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "trials = 2\n[grid]\nn_prime_values = [30]\n").unwrap();
    let o = sketchclust(
        dir.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--trials",
            "5",
            "--n-nodes",
            "120",
            "--parallelism",
            "2",
            "phase-grid",
            "--n-min-values",
            "20,30",
            "--n-prime-values",
            "40,50",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let grid = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(grid.lines().next().unwrap(), "n_min\\n_prime,30");
    assert_eq!(grid.lines().count(), 3);
    let details = fs::read_to_string(dir.path().join("grid_details.csv")).unwrap();
    let row: Vec<&str> = details.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "2", "trials from the config file");
    assert!(dir.path().join("bounds.json").exists());
}

#[test]
fn timing_and_balance_run_on_tiny_settings() {
    let dir = tempfile::tempdir().unwrap();
    let o = sketchclust(
        dir.path(),
        &[
            "timing",
            "--n-values",
            "60,90",
            "--n-prime",
            "30",
            "--runs",
            "1",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let timing = fs::read_to_string(dir.path().join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 3);

    let o = sketchclust(
        dir.path(),
        &[
            "--trials",
            "3",
            "--n-nodes",
            "200",
            "balance",
            "--n-min-values",
            "20,40",
            "--n-prime",
            "50",
            "--strategies",
            "urs,sbs",
        ],
    );
    assert!(o.status.success(), "{o:?}");
    let balance = fs::read_to_string(dir.path().join("balance.csv")).unwrap();
    assert_eq!(balance.lines().count(), 5);
}

#[test]
fn configuration_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad_p = sketchclust(dir.path(), &["bounds", "--p", "1.5"]);
    assert_eq!(bad_p.status.code(), Some(2));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[solver]\nmax_iterations = 0\n").unwrap();
    let bad_solver = sketchclust(dir.path(), &["--config", cfg.to_str().unwrap(), "bounds"]);
    assert_eq!(bad_solver.status.code(), Some(2));

    fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    let unknown = sketchclust(dir.path(), &["--config", cfg.to_str().unwrap(), "bounds"]);
    assert_eq!(unknown.status.code(), Some(2));

    let missing = sketchclust(dir.path(), &["--config", "/nonexistent/c.toml", "bounds"]);
    assert_ne!(missing.status.code(), Some(0));

    let bad_flag = sketchclust(dir.path(), &["phase-grid", "--lambda-mode", "sideways"]);
    assert_ne!(bad_flag.status.code(), Some(0));

    let bad_grid = sketchclust(dir.path(), &["--trials", "0", "phase-grid"]);
    assert_eq!(bad_grid.status.code(), Some(2));
}
