//! End-to-end checks of the command-line interface: output shapes, exit
//! codes, and byte-stable JSON across runs.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctlcalc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn eval_corpus_m_ref_prints_pair() {
    let out = run(&["eval", "--calculus", "ref", "corpus:M_ref"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "(pair (inj A ()) (inj B ()))");
}

#[test]
fn eval_exit_codes_match_outcomes() {
    assert_eq!(
        run(&["eval", "corpus:M_del"]).status.code(),
        Some(2),
        "bottom"
    );
    assert_eq!(
        run(&["eval", "--calculus", "mam", "--fuel", "100", "corpus:omega"])
            .status
            .code(),
        Some(4),
        "fuel exhausted"
    );
    let stuck = run(&["eval", "--calculus", "del", "-"]);
    assert_eq!(stuck.status.code(), Some(1), "stdin empty is a parse error");
}

#[test]
fn eval_stuck_exit_code() {
    let dir = std::env::temp_dir().join("ctlcalc-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("stuck.ctl");
    std::fs::write(&path, ";; calculus: del\n(shift0 k (return ()))\n").unwrap();
    let out = run(&["eval", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn translate_then_eval_naive_image_succeeds_incorrectly() {
    let dir = std::env::temp_dir().join("ctlcalc-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("naive.ctl");
    let out = run(&[
        "translate",
        "--from",
        "del",
        "--to",
        "ac",
        "--variant",
        "naive",
        "corpus:M_del",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    // The translated file carries a calculus header, so no flag is needed.
    let eval = run(&["eval", path.to_str().unwrap()]);
    assert_eq!(eval.status.code(), Some(0), "incorrect success, documented");

    let counter_path = dir.join("counter.ctl");
    run(&[
        "translate",
        "--from",
        "del",
        "--to",
        "ac",
        "corpus:M_del",
        "--out",
        counter_path.to_str().unwrap(),
    ]);
    let eval = run(&["eval", counter_path.to_str().unwrap()]);
    assert_eq!(
        eval.status.code(),
        Some(2),
        "counter image fails like the source"
    );
}

#[test]
fn eval_json_is_stable() {
    let a = run(&["eval", "--json", "corpus:M_ref"]);
    let b = run(&["eval", "--json", "corpus:M_ref"]);
    assert_eq!(stdout(&a), stdout(&b));
    let doc: serde_json::Value = serde_json::from_str(stdout(&a).trim()).unwrap();
    assert_eq!(doc["outcome"], "value");
    assert!(doc["steps"].is_u64());
    assert!(doc.get("value_observation").is_some());
}

#[test]
fn difftest_json_is_stable_and_clean() {
    let args = [
        "difftest",
        "--translation",
        "del_to_ac_counter",
        "--seed",
        "7",
        "--count",
        "40",
        "--json",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b), "reports must be byte-identical");
    let last = stdout(&a);
    let summary = last.lines().last().unwrap();
    let doc: serde_json::Value = serde_json::from_str(summary).unwrap();
    assert_eq!(doc["totals"].get("disagree"), None);
}

#[test]
fn difftest_flags_mismatched_source() {
    let out = run(&[
        "difftest",
        "--translation",
        "eff_to_del",
        "--from",
        "del",
        "--count",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corpus_listing_and_dump() {
    let out = run(&["corpus", "--list"]);
    let text = stdout(&out);
    for name in [
        "M_del",
        "M_ref",
        "L_ref",
        "double_throw_del",
        "double_throw_eff",
        "omega",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
    let dump = run(&["corpus", "M_del"]);
    let text = stdout(&dump);
    assert!(text.starts_with(";; calculus: del"));
    assert!(text.contains("(dollar "));
}

#[test]
fn trace_renders_records() {
    let out = run(&["trace", "--calculus", "del", "corpus:double_throw_del"]);
    assert_eq!(out.status.code(), Some(2), "bottom");
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.contains("shift")));
    assert!(text.lines().any(|l| l.contains("#d0:+del-cont")));
    assert!(text.lines().last().unwrap().contains("bottom"));
}

#[test]
fn fuel_env_variable_is_honoured() {
    let out = bin()
        .args(["eval", "--calculus", "mam", "corpus:omega"])
        .env("CTLCALC_FUEL", "50")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(stdout(&out).contains("50 steps"));
}
