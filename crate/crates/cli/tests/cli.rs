use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mixnoise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixnoise"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mixnoise(args);
    assert!(
        out.status.success(),
        "mixnoise {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}.{suffix}", path.display()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    corpus: PathBuf,
    dict: PathBuf,
}

fn synth(sentences: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    let dict = dir.path().join("syna-synb.txt");
    ok(&[
        "synth", "--sentences", sentences, "--seed", "3", "--out", p(&corpus), "--dict", p(&dict),
    ]);
    Fixture { dir, corpus, dict }
}

#[test]
fn generate_writes_dataset_report_and_manifest() {
    let fx = synth("300");
    let out = fx.dir.path().join("data.jsonl");
    ok(&["generate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict), "--out", p(&out)]);

    let lines = fs::read_to_string(&out).unwrap();
    assert_eq!(lines.lines().count(), 300);
    let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["id"], 1);
    assert!(first.get("actions").is_none());
    for key in ["replaced", "deleted", "masked", "tokens"] {
        assert!(first["meta"][key].is_u64(), "meta.{key}");
    }

    let report = json(&with_suffix(&out, "report.json"));
    assert_eq!(report["paragraph_count"], 300);
    assert_eq!(report["direction_label"], "syna->synb");
    let manifest = json(&with_suffix(&out, "manifest.json"));
    assert_eq!(manifest["subcommand"], "generate");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["config"]["noise"]["mask_fraction"], 0.35);
}

#[test]
fn reruns_are_byte_identical() {
    let fx = synth("200");
    let a = fx.dir.path().join("a.jsonl");
    let b = fx.dir.path().join("b.jsonl");
    let base = ["generate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict), "--seed", "11"];
    ok(&[&base[..], &["--workers", "1", "--out", p(&a)]].concat());
    ok(&[&base[..], &["--workers", "3", "--out", p(&b)]].concat());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = fx.dir.path().join("c.jsonl");
    ok(&["generate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict), "--seed", "12", "--out", p(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn stats_recovers_the_generate_report_from_an_audited_dataset() {
    let fx = synth("250");
    let data = fx.dir.path().join("data.jsonl");
    ok(&["generate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict), "--audit", "--out", p(&data)]);
    let stats_out = fx.dir.path().join("stats.json");
    let table = ok(&["stats", p(&data), "--out", p(&stats_out)]);
    assert!(table.contains("mixing ratio"), "{table}");

    let mut generated = json(&with_suffix(&data, "report.json"));
    generated.as_object_mut().unwrap().remove("direction_label");
    assert_eq!(json(&stats_out), generated);
}

#[test]
fn stats_without_audit_leaves_coverage_unknown() {
    let fx = synth("50");
    let data = fx.dir.path().join("data.jsonl");
    ok(&["generate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict), "--out", p(&data)]);
    let stats_out = fx.dir.path().join("stats.json");
    ok(&["stats", p(&data), "--out", p(&stats_out)]);
    let report = json(&stats_out);
    assert!(report["coverage"].is_null());
    assert!(report["mixing_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_and_overrides_apply() {
    let fx = synth("100");
    let cfg = fx.dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"noise": {"mask_fraction": 0.1}, "seed": 4}"#).unwrap();
    let out = fx.dir.path().join("data.jsonl");
    ok(&[
        "generate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict), "--config", p(&cfg),
        "--set", "mix.delete_prob=0", "--out", p(&out),
    ]);
    let manifest = json(&with_suffix(&out, "manifest.json"));
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["config"]["noise"]["mask_fraction"], 0.1);
    let report = json(&with_suffix(&out, "report.json"));
    assert_eq!(report["deleted"], 0);
}

#[test]
fn bad_configuration_fails_with_nonzero_exit() {
    let fx = synth("20");
    let out = fx.dir.path().join("data.jsonl");
    let base = ["generate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict), "--out", p(&out)];
    for bad in [
        ["--set", "noise.bogus=1"],
        ["--set", "mix.replace_prob=1.5"],
        ["--set", "noise.mask_fraction"],
    ] {
        let res = mixnoise(&[&base[..], &bad[..]].concat());
        assert!(!res.status.success(), "{bad:?} was accepted");
        assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    }

    let cfg = fx.dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"noise": {"mask_fraction": 0.1, "typo": 1}}"#).unwrap();
    assert!(!mixnoise(&[&base[..], &["--config", p(&cfg)]].concat()).status.success());
}

#[test]
fn missing_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let out = dir.path().join("o.jsonl");
    let res = mixnoise(&["generate", "--corpus", p(&missing), "--dict", p(&missing), "--out", p(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("nope.txt"));
}

#[test]
fn invalid_utf8_aborts_unless_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    fs::write(&corpus, b"good line\nbad \xff line\nanother good one\n").unwrap();
    let dict = dir.path().join("en-fr.txt");
    fs::write(&dict, "good bon\n").unwrap();
    let out = dir.path().join("o.jsonl");
    let args = ["generate", "--corpus", p(&corpus), "--dict", p(&dict), "--out", p(&out)];

    let res = mixnoise(&args);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));

    ok(&[&args[..], &["--skip-invalid"]].concat());
    let ids: Vec<u64> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, [1, 3]);
}

#[test]
fn pretokenizer_segments_lines() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    fs::write(&corpus, "abc def\nabc\n").unwrap();
    let dict = dir.path().join("xx-yy.txt");
    fs::write(&dict, "a z\n").unwrap();
    let out = dir.path().join("o.jsonl");
    ok(&[
        "generate", "--corpus", p(&corpus), "--dict", p(&dict), "--no-noise", "--no-deletion",
        "--no-replacement", "--pretokenizer", "sed -e 's/abc/a b c/g'", "--out", p(&out),
    ]);
    let first: Value = serde_json::from_str(fs::read_to_string(&out).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["target"], "a b c def");
    assert_eq!(first["meta"]["tokens"], 4);

    let res = mixnoise(&[
        "generate", "--corpus", p(&corpus), "--dict", p(&dict), "--pretokenizer", "exit 3", "--out", p(&out),
    ]);
    assert!(!res.status.success());
}

#[test]
fn build_dict_composes_through_a_pivot() {
    let dir = tempfile::tempdir().unwrap();
    let left = dir.path().join("id-en.txt");
    let right = dir.path().join("en-fr.txt");
    fs::write(&left, "anjing dog\nanjing hound\nkucing cat\nikan fish\n").unwrap();
    fs::write(&right, "dog chien\nhound chien\nhound limier\ncat chat\n").unwrap();
    let out = dir.path().join("id-fr.txt");
    ok(&["build-dict", "--dict", p(&left), "--pivot", p(&right), "--out", p(&out)]);
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "anjing chien\nanjing limier\nkucing chat\n"
    );
    let manifest = json(&with_suffix(&out, "manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);

    let wrong = dir.path().join("de-fr.txt");
    fs::write(&wrong, "hund chien\n").unwrap();
    let res = mixnoise(&["build-dict", "--dict", p(&left), "--pivot", p(&wrong), "--out", p(&out)]);
    assert!(!res.status.success());

    // explicit tags override the file name
    ok(&[
        "build-dict", "--dict", p(&left), "--pivot", p(&wrong), "--pivot-langs", "en-fr", "--out", p(&out),
    ]);
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn malformed_dictionary_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let dict = dir.path().join("en-fr.txt");
    fs::write(&dict, "dog chien\ncat\n").unwrap();
    let out = dir.path().join("o.txt");
    let res = mixnoise(&["build-dict", "--dict", p(&dict), "--out", p(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));
}

#[test]
fn calibrate_then_probe() {
    let fx = synth("2000");
    let cal = fx.dir.path().join("cal.json");
    let stdout = ok(&["calibrate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict), "--out", p(&cal)]);
    assert!(stdout.starts_with("recommended replace_prob:"), "{stdout}");
    let result = json(&cal);
    assert_eq!(result["feasible"], true);
    let ratio = result["achieved_ratio"].as_f64().unwrap();
    assert!((ratio - 0.30).abs() <= 0.005, "{ratio}");
    let rp = result["replace_prob"].as_f64().unwrap();

    let data = fx.dir.path().join("data.jsonl");
    ok(&[
        "generate", "--corpus", p(&fx.corpus), "--dict", p(&fx.dict),
        "--set", &format!("mix.replace_prob={rp}"), "--out", p(&data),
    ]);
    let probe = fx.dir.path().join("probe.json");
    ok(&["probe", "--data", p(&data), "--dict", p(&fx.dict), "--iterations", "3", "--out", p(&probe)]);
    let report = json(&probe);
    assert_eq!(report["log_likelihood_per_iteration"].as_array().unwrap().len(), 4);
    assert!(report["precision_at_1"].as_f64().unwrap() > 0.0);
}

#[test]
fn calibrate_flags_an_unreachable_target() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    fs::write(&corpus, "a b c d\nb c d e\n").unwrap();
    let dict = dir.path().join("xx-yy.txt");
    fs::write(&dict, "a z\n").unwrap();
    let stdout = ok(&["calibrate", "--corpus", p(&corpus), "--dict", p(&dict), "--no-noise"]);
    assert!(stdout.contains("exceeds coverage"), "{stdout}");
}
