use std::path::Path;
use std::process::{Command, Output};

fn phasealign(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phasealign"));
    cmd.args(args).env_remove("PHASEALIGN_OUTPUT_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{stdout}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

const TINY: &str = r#"
task = "S2L"
methods = ["source-only", "ops-dann-hard"]
seeds = [0, 1]
output_dir = "tiny"

[data]
kind = "synthetic"
units_per_class = 2
seed = 3

[data.degradation]
total_cycles = [8, 10]
cycle_stride = 4

[train]
epochs = 1

[eval]
max_points = 200

[eval.probe]
epochs = 5
seeds = 1
"#;

#[test]
fn gen_writes_csv_sidecar_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let deg = dir.path().join("deg.toml");
    std::fs::write(&deg, "total_cycles = [6, 8]\ncycle_stride = 3\n").unwrap();
    let csv = dir.path().join("fleet/short.csv");
    let out = phasealign(
        &[
            "gen",
            "--class",
            "short",
            "--units",
            "2",
            "--seed",
            "4",
            "--degradation",
            deg.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
        ],
        &[],
    );
    assert!(ok(&out).contains("wrote 2 short units"));
    assert!(csv.exists());
    assert!(dir.path().join("fleet/short.meta.toml").exists());
    assert!(dir.path().join("fleet/short.truth.csv").exists());

    let long = dir.path().join("fleet/long.csv");
    ok(&phasealign(
        &[
            "gen",
            "--class",
            "long",
            "--units",
            "1",
            "--degradation",
            deg.to_str().unwrap(),
            "--out",
            long.to_str().unwrap(),
        ],
        &[],
    ));
    let cache = dir.path().join("cache");
    let out = phasealign(
        &[
            "prep",
            "--source",
            csv.to_str().unwrap(),
            "--target",
            long.to_str().unwrap(),
            "--window-stride",
            "25",
            "--out",
            cache.to_str().unwrap(),
        ],
        &[],
    );
    assert!(ok(&out).contains("target windows written"));
    assert!(cache.join("source.bin").exists() && cache.join("target.bin").exists());
}

#[test]
fn run_rerun_compare_pad_pca() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();

    // Relative output directories resolve against the output root.
    let stdout = ok(&phasealign(
        &["run", "--config", cfg.to_str().unwrap()],
        &[("PHASEALIGN_OUTPUT_ROOT", dir.path())],
    ));
    assert!(stdout.contains("ops-dann-hard"));
    let run = dir.path().join("tiny");
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 4);
    for f in [
        "metrics.csv",
        "trace.csv",
        "predictions.csv",
        "embeddings.csv",
        "embeddings.bin",
        "model.bin",
        "summary.txt",
    ] {
        assert!(run.join("ops-dann-hard/seed-1").join(f).exists(), "{f}");
    }

    let again = dir.path().join("again");
    ok(&phasealign(
        &[
            "run",
            "--manifest",
            run.join("manifest.toml").to_str().unwrap(),
            "--output",
            again.to_str().unwrap(),
        ],
        &[],
    ));
    assert_eq!(std::fs::read(again.join("metrics.csv")).unwrap(), metrics.as_bytes());

    let table = dir.path().join("cmp.csv");
    let stdout = ok(&phasealign(
        &[
            "compare",
            run.to_str().unwrap(),
            again.to_str().unwrap(),
            "--out",
            table.to_str().unwrap(),
        ],
        &[],
    ));
    assert!(stdout.contains("source-only"));
    let rows = std::fs::read_to_string(&table).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.lines().next().unwrap().contains("rmse_improvement_pct"));

    let emb = run.join("source-only/seed-0/embeddings.bin");
    let stdout = ok(&phasealign(&["pad", emb.to_str().unwrap(), "--probes", "1"], &[]));
    assert!(stdout.starts_with("pad "));
    let proj = dir.path().join("proj.csv");
    ok(&phasealign(
        &[
            "pca",
            emb.to_str().unwrap(),
            "--max-points",
            "50",
            "--out",
            proj.to_str().unwrap(),
        ],
        &[],
    ));
    let text = std::fs::read_to_string(&proj).unwrap();
    assert!(text.starts_with("x1,x2,domain,phase\n"));
}

#[test]
fn compare_rejects_runs_on_different_data() {
    let dir = tempfile::tempdir().unwrap();
    for (name, seed) in [("a", 3), ("b", 4)] {
        let cfg = dir.path().join(format!("{name}.toml"));
        let text = TINY
            .replace("seed = 3", &format!("seed = {seed}"))
            .replace("seeds = [0, 1]", "seeds = [0]")
            .replace("\"source-only\", \"ops-dann-hard\"", "\"source-only\"");
        std::fs::write(&cfg, text).unwrap();
        let out = dir.path().join(name);
        ok(&phasealign(
            &[
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--output",
                out.to_str().unwrap(),
            ],
            &[],
        ));
    }
    let out = phasealign(
        &[
            "compare",
            dir.path().join("a").to_str().unwrap(),
            dir.path().join("b").to_str().unwrap(),
        ],
        &[],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("different data"));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, TINY.replace("epochs = 1\n", "epochs = 1\nmomentum = 1.5\n")).unwrap();
    let out = phasealign(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("train.momentum"), "{err}");

    let out = phasealign(&["run", "--task", "S2L"], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--method"));
}
