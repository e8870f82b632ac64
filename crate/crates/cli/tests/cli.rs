use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatialqa"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SPATIALQA_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SIZES: [&str; 8] = [
    "--train",
    "12",
    "--dev",
    "3",
    "--test-seen",
    "0",
    "--test-unseen",
    "4",
];

#[test]
fn generate_stats_verify() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["generate", "--out", "data", "--seed", "9"];
    args.extend(SIZES);
    let o = run(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty(), "data goes to files only");
    for f in [
        "train.jsonl",
        "dev.jsonl",
        "test_unseen.jsonl",
        "manifest.json",
    ] {
        assert!(dir.path().join("data").join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("data/test_seen.jsonl").exists());

    let o = run(&["stats", "data/train.jsonl", "--json"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stats"]["records"], 12);
    assert_eq!(v["stats"]["questions"]["YN"], 24);

    let o = run(&["verify", "data"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| !l.starts_with("FAIL")));
}

#[test]
fn verify_fails_on_a_corrupted_gold() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "generate",
            "--out",
            ".",
            "--train",
            "4",
            "--dev",
            "0",
            "--test-seen",
            "0",
            "--test-unseen",
            "0",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let path = dir.path().join("train.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    rec["questions"][0]["gold"]["labels"] = serde_json::json!(["Left", "Right"]);
    lines[2] = rec.to_string();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = run(&["verify", "."], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL  solver matches gold"), "{out}");
    assert!(out.contains("train #2"), "{out}");
}

#[test]
fn solve_reads_the_texts() {
    let dir = tempfile::tempdir().unwrap();
    let story = "A blue circle is above a big triangle. To the left of the big triangle, there is a square.";
    let o = run(
        &[
            "solve",
            "--story-text",
            story,
            "--question",
            "Is the square to the left of the blue circle?",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "[\"DK\"]");
    let o = run(
        &[
            "solve",
            "--story-text",
            "The cat sat.",
            "--question",
            "Is the square above the circle?",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sentence 1"));
}

#[test]
fn perturb_and_import_scene() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "generate",
            "--out",
            ".",
            "--train",
            "3",
            "--dev",
            "0",
            "--test-seen",
            "0",
            "--test-unseen",
            "0",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let o = run(
        &["perturb", "train.jsonl", "--out", "unseen.jsonl"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["verify", "unseen.jsonl"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));

    let first = std::fs::read_to_string(dir.path().join("train.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    std::fs::write(dir.path().join("scene.json"), rec["scene"].to_string()).unwrap();
    let o = run(
        &["import-scene", "scene.json", "--out", "imported.jsonl"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["verify", "imported.jsonl"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));

    std::fs::write(dir.path().join("bad.json"), "{\"blocks\": []}").unwrap();
    let o = run(
        &["import-scene", "bad.json", "--out", "x.jsonl"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_env_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "seed = 3\noutput_dir = \"out\"\n[splits]\ntrain = 2\ndev = 0\ntest_seen = 0\ntest_unseen = 0\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_spatialqa"))
        .args(["generate", "--set", "questions.per_type=1"])
        .current_dir(dir.path())
        .env("SPATIALQA_CONFIG", "c.toml")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["splits"]["train"]["total_questions"], 8);

    let o = run(&["generate", "--set", "sampler.nope=1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
