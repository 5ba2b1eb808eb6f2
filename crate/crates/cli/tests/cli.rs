//! End-to-end tests of the `imdp` binary.

use std::io::Write;
use std::process::{Command, Output, Stdio};

fn imdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn imdp_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_imdp"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary spawns");
    child
        .stdin
        .as_mut()
        .expect("stdin piped")
        .write_all(stdin.as_bytes())
        .expect("stdin written");
    child.wait_with_output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

#[test]
fn minimize_example1_cooperative_prints_the_t_block() {
    let model = stdout(&imdp(&["generate", "example1"]));
    let out = imdp_with_stdin(&["minimize", "--semantics", "coop"], &model);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.lines().any(|l| l.ends_with(": t tbar")),
        "missing merged block in:\n{text}"
    );
    assert!(text.contains("quotientStates=7"), "{text}");
}

#[test]
fn wsn_pipeline_reports_five_quotient_states() {
    let model = stdout(&imdp(&[
        "generate", "wsn", "--sensors", "4", "--p", "0.1,0.2",
    ]));
    let out = imdp_with_stdin(&["minimize", "--semantics", "coop"], &model);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("quotientStates=5"));
}

#[test]
fn validate_rejects_garbage_with_position() {
    let out = imdp_with_stdin(&["validate"], "this is not a model\n");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("1:1"), "{}", stderr(&out));
}

#[test]
fn validate_accepts_generated_models() {
    for gen_args in [
        vec!["generate", "example1"],
        vec!["generate", "wsn", "--sensors", "3", "--p", "1/10,1/5"],
        vec![
            "generate", "csma", "--nodes", "2", "--max-collisions", "1", "--p-send", "0.5,0.75",
            "--p-collide", "0.1,0.3",
        ],
    ] {
        let model = stdout(&imdp(&gen_args));
        let out = imdp_with_stdin(&["validate"], &model);
        assert!(out.status.success(), "{gen_args:?}: {}", stderr(&out));
        assert_eq!(stdout(&out), "valid\n");
    }
}

#[test]
fn mc_prints_exact_separation_values() {
    let model = stdout(&imdp(&["generate", "example1"]));
    let out = imdp_with_stdin(
        &[
            "mc",
            "--formula",
            r#"P>=7/10 [ true U<=1 "right" ] mode=maximin"#,
        ],
        &model,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("t true 4/5"), "{text}");
    assert!(text.contains("tbar false 3/5"), "{text}");
}

#[test]
fn mc_rejects_unbounded_until() {
    let model = stdout(&imdp(&["generate", "example1"]));
    let out = imdp_with_stdin(
        &["mc", "--formula", r#"P>=0.5 [ true U "right" ] mode=minmin"#],
        &model,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unbounded until"), "{}", stderr(&out));
}

#[test]
fn quotient_emits_a_parseable_model_and_report_reads_it() {
    let dir = std::env::temp_dir().join(format!("imdp-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let original = dir.join("wsn.imdp");
    let minimised = dir.join("wsn-min.imdp");

    let out = imdp(&[
        "generate", "wsn", "--sensors", "5", "--p", "0.1,0.2", "--out",
        original.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = imdp(&[
        "quotient",
        original.to_str().unwrap(),
        "--semantics",
        "coop",
        "--out",
        minimised.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let check = imdp(&["validate", minimised.to_str().unwrap()]);
    assert!(check.status.success());

    let report = imdp(&[
        "report",
        original.to_str().unwrap(),
        minimised.to_str().unwrap(),
    ]);
    assert!(report.status.success());
    let text = stdout(&report);
    assert!(text.contains("originalStates=32"), "{text}");
    assert!(text.contains("quotientStates=6"), "{text}");
    assert!(text.contains("stateReductionFactor=13/16"), "{text}");

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn oracle_check_agrees_and_respects_the_bound() {
    let model = stdout(&imdp(&["generate", "example1"]));
    for semantics in ["coop", "comp"] {
        let out = imdp_with_stdin(&["oracle-check", "--semantics", semantics], &model);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("agreement blocks=7"));
    }
    // a tightened bound refuses the 8-state model
    let mut child = Command::new(env!("CARGO_BIN_EXE_imdp"))
        .args(["oracle-check", "--semantics", "coop"])
        .env("IMDP_ORACLE_BOUND", "4")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(model.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("oracle bound"), "{}", stderr(&out));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let model = stdout(&imdp(&[
        "generate", "wsn", "--sensors", "3", "--p", "0.1,0.2",
    ]));
    let a = imdp_with_stdin(&["minimize", "--semantics", "coop"], &model);
    let b = imdp_with_stdin(&["minimize", "--semantics", "coop"], &model);
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn jobs_flag_does_not_change_results() {
    let model = stdout(&imdp(&["generate", "example1"]));
    let default = imdp_with_stdin(&["minimize", "--semantics", "coop"], &model);
    let single = imdp_with_stdin(&["--jobs", "1", "minimize", "--semantics", "coop"], &model);
    assert!(single.status.success(), "{}", stderr(&single));
    assert_eq!(stdout(&default), stdout(&single));
}

#[test]
fn minimize_writes_the_quotient_when_asked() {
    let dir = std::env::temp_dir().join(format!("imdp-cli-min-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("q.imdp");
    let model = stdout(&imdp(&["generate", "example1"]));
    let out = imdp_with_stdin(
        &[
            "minimize", "--semantics", "comp", "--out",
            out_path.to_str().unwrap(),
        ],
        &model,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("quotientStates=7"));
    let written = std::fs::read_to_string(&out_path).unwrap();
    assert!(written.starts_with("imdp\n"));
    // the competitive quotient keeps u (representative) and drops ubar
    assert!(written.contains("states: l r s sbar t tbar u\n"), "{written}");
    std::fs::remove_dir_all(&dir).ok();
}
