use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn covsum(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covsum"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn train_summarize_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.conf"),
        "representations = BOW, DBOW\nmethods = RELEVANCE_ONLY, JXDTD\nout = out\nembed.dim = 8\nembed.epochs = 3\n",
    )
    .unwrap();
    for cmd in ["train", "summarize", "evaluate"] {
        let out = covsum(&[cmd, "--config", "run.conf"], dir.path());
        assert!(out.status.success(), "{cmd}: {}", text(&out.stderr));
    }
    assert!(dir.path().join("out/models/dbow.bin").exists());
    assert!(!dir.path().join("out/models/dm.bin").exists());
    let tsv = fs::read_to_string(dir.path().join("out/evaluation.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(
        lines[0],
        "method\trepresentation\trouge1_f\trouge2_f\trougeL_f"
    );
    assert_eq!(lines.len(), 1 + 2 * 2);
    let summaries = fs::read_to_string(dir.path().join("out/summaries.jsonl")).unwrap();
    assert_eq!(summaries.lines().count(), 2 * 2 * 20);
    let first: serde_json::Value = serde_json::from_str(summaries.lines().next().unwrap()).unwrap();
    for key in [
        "id",
        "method",
        "representation",
        "alpha",
        "selected",
        "scores",
        "budget_words",
        "words_used",
    ] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn flags_override_config_and_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        for cmd in ["summarize", "evaluate"] {
            let o = covsum(
                &[
                    cmd, "--repr", "BOW", "--method", "MMR,XDTD", "--alpha", "0.5", "--split",
                    "0:6", "--out", out,
                ],
                dir.path(),
            );
            assert!(o.status.success(), "{}", text(&o.stderr));
        }
        (
            fs::read(dir.path().join(out).join("evaluation.tsv")).unwrap(),
            fs::read(dir.path().join(out).join("summaries.jsonl")).unwrap(),
        )
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert_eq!(text(&a.1).lines().count(), 2 * 6);
    assert!(text(&a.1).contains("\"alpha\":0.5"));
}

#[test]
fn trained_models_are_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["train", "--repr", "DM", "--seed", "4", "--out", out];
    for out in ["a", "b"] {
        let o = covsum(&args(out), dir.path());
        assert!(o.status.success(), "{}", text(&o.stderr));
    }
    let read = |out: &str| fs::read(dir.path().join(out).join("models/dm.bin")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = covsum(&["train", "--corpus", "missing.jsonl"], dir.path());
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("missing.jsonl"));

    fs::write(dir.path().join("bad.conf"), "embed.dims = 3\n").unwrap();
    let o = covsum(&["train", "--config", "bad.conf"], dir.path());
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("embed.dims"));

    let o = covsum(&["summarize", "--repr", "BOW+DM"], dir.path());
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("BOW+DM"));

    let o = covsum(&["selftest", "--corpus", "missing.jsonl"], dir.path());
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("missing.jsonl"));
}

#[test]
fn selftest_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = covsum(&["selftest"], dir.path());
    let b = covsum(&["selftest"], dir.path());
    assert_eq!(a.stdout, b.stdout);
    let report = text(&a.stdout);
    assert_eq!(
        report
            .lines()
            .filter(|l| l.starts_with("criterion "))
            .count(),
        9
    );
    // exit status mirrors the report
    assert_eq!(a.status.success(), report.contains("9/9 criteria passed"));
}
