use std::path::PathBuf;

use serde_json::Value;

use cellsem_cli::{run, EXIT_FAILURE, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_USAGE};

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(name)
        .display()
        .to_string()
}

struct Outcome {
    code: i32,
    out: String,
    err: String,
}

impl Outcome {
    fn json(&self) -> Value {
        serde_json::from_str(&self.out).unwrap_or_else(|e| panic!("{e}: {}", self.out))
    }
}

fn cellsem(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("cellsem").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("elapsed_ms");
    v
}

#[test]
fn eval_identity_application() {
    let cbn = corpus("cbn.sig");
    let o = cellsem(&[
        "--json",
        "eval",
        &cbn,
        "app(lam(x. x), lam(y. y))",
        "--label",
        "eval",
        "--fuel",
        "3",
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    let v = o.json();
    assert_eq!(v["targets"], serde_json::json!(["var 1"]));
    assert_eq!(v["fuel_exhausted"], false);
}

#[test]
fn eval_trace_lists_both_premises() {
    let cbn = corpus("cbn.sig");
    let o = cellsem(&["--json", "eval", &cbn, "app(I, I)", "--fuel", "3", "--trace"]);
    assert_eq!(o.code, EXIT_OK);
    let d = &o.json()["derivations"][0];
    assert_eq!(d["rule"], "beta");
    assert_eq!(d["premises"].as_array().unwrap().len(), 2);
}

#[test]
fn divergence_is_inconclusive() {
    let o = cellsem(&["--json", "eval", &corpus("cbn.sig"), "Omega", "--fuel", "10"]);
    assert_eq!(o.code, EXIT_INCONCLUSIVE);
    let v = o.json();
    assert_eq!(v["targets"], serde_json::json!([]));
    assert_eq!(v["fuel_exhausted"], true);
}

#[test]
fn value_pool_relates_the_cbv_pair() {
    let o = cellsem(&[
        "--json",
        "bisim",
        &corpus("cbv.sig"),
        "lam(x. I)",
        "lam(x. app(lam(y. I), x))",
        "--depth",
        "4",
        "--values-only",
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.out);
    assert_eq!(o.json()["verdict"], "holds");
}

#[test]
fn divergent_argument_separates_the_cbv_pair() {
    let o = cellsem(&[
        "--json",
        "bisim",
        &corpus("cbv.sig"),
        "lam(x. I)",
        "lam(x. app(lam(y. I), x))",
        "--depth",
        "4",
        "--pool-size",
        "5",
        "--pool-term",
        "Omega",
    ]);
    assert_ne!(o.code, EXIT_OK);
    let v = o.json();
    assert_ne!(v["verdict"], "holds");
    let closings: Vec<&Value> = v["witness"]["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| c["closing"].as_array().unwrap())
        .collect();
    assert!(closings.iter().any(|c| *c == "Omega"), "{v}");
}

#[test]
fn naive_howe_rules_fail_validation() {
    let o = cellsem(&["validate", &corpus("cbn-howe-naive.sig")]);
    assert_eq!(o.code, EXIT_FAILURE);
    assert!(o.out.contains("non-metavariable target pattern"), "{}", o.out);
}

#[test]
fn shipped_signatures_validate() {
    for name in ["cbn.sig", "cbv.sig", "nondet.sig", "cbn-howe.sig"] {
        let o = cellsem(&["validate", &corpus(name)]);
        assert_eq!(o.code, EXIT_OK, "{name}: {}{}", o.out, o.err);
    }
}

#[test]
fn rigidified_file_validates() {
    let path = std::env::temp_dir().join(format!("cellsem-rigid-{}.sig", std::process::id()));
    let target = path.display().to_string();
    let o = cellsem(&["--json", "rigidify", &corpus("cbn-howe.sig"), "-o", &target]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    let mapping = o.json()["mapping"].clone();
    let canonical = mapping
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["original"] == "(canonical)")
        .unwrap();
    assert_eq!(canonical["generated"].as_array().unwrap().len(), 2);
    let v = cellsem(&["validate", &target]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(v.code, EXIT_OK, "{}", v.out);
}

#[test]
fn rigidify_reports_invalid_howe_rules() {
    let o = cellsem(&["rigidify", &corpus("cbn-howe-naive.sig")]);
    assert_eq!(o.code, EXIT_FAILURE);
    assert!(o.out.contains("cannot rigidify"));
}

fn relation_file(tag: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("cellsem-{tag}-{}.rel", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn check_rel_accepts_a_bisimulation_and_rejects_a_non_closed_one() {
    let cbn = corpus("cbn.sig");
    let good = relation_file("good", "# beta-equal\nI ~ app(I, I)\n");
    let o = cellsem(&["--json", "check-rel", &cbn, good.to_str().unwrap(), "--values-only"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.out);
    assert_eq!(o.json()["bisimulation"], true);
    let bad = relation_file("bad", "p: I ~ lam(x. app(I, x))\n");
    let o = cellsem(&["--json", "check-rel", &cbn, bad.to_str().unwrap(), "--values-only"]);
    assert_eq!(o.code, EXIT_FAILURE, "{}", o.out);
    assert!(!o.json()["violations"].as_array().unwrap().is_empty());
    std::fs::remove_file(good).unwrap();
    std::fs::remove_file(bad).unwrap();
}

#[test]
fn relation_parse_errors_are_located() {
    let bad = relation_file("syntax", "I ~ I\nI ~ lam(x. \n");
    let o = cellsem(&["check-rel", &corpus("cbn.sig"), bad.to_str().unwrap()]);
    std::fs::remove_file(&bad).unwrap();
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.err.contains(":2:"), "{}", o.err);
}

#[test]
fn signature_parse_errors_are_located() {
    let path = std::env::temp_dir().join(format!("cellsem-broken-{}.sig", std::process::id()));
    std::fs::write(&path, "sort p\nbinding p\nop lam : (p[1] -> p\n").unwrap();
    let o = cellsem(&["validate", path.to_str().unwrap()]);
    std::fs::remove_file(&path).unwrap();
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.err.contains(":3:"), "{}", o.err);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(cellsem(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(cellsem(&["eval", &corpus("cbn.sig")]).code, EXIT_USAGE);
    assert_eq!(cellsem(&["eval", &corpus("cbn.sig"), "lam(x. "]).code, EXIT_USAGE);
    assert_eq!(
        cellsem(&["eval", &corpus("cbn.sig"), "I", "--label", "nope"]).code,
        EXIT_USAGE
    );
    assert_eq!(cellsem(&["validate", "/nonexistent/cbn.sig"]).code, EXIT_USAGE);
    let h = cellsem(&["--help"]);
    assert_eq!(h.code, EXIT_OK);
    assert!(h.out.contains("congruence"));
}

#[test]
fn builtin_names_stand_in_for_missing_files() {
    let o = cellsem(&["--json", "eval", "cbn", "app(I, I)"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    assert_eq!(o.json()["targets"], serde_json::json!(["var 1"]));
}

/// Lambda terms over `k` free variables with exactly `n` nodes.
fn lambda_terms(n: usize, k: usize) -> usize {
    match n {
        0 => 0,
        1 => k,
        _ => {
            lambda_terms(n - 1, k + 1)
                + (1..n - 1)
                    .map(|a| lambda_terms(a, k) * lambda_terms(n - 1 - a, k))
                    .sum::<usize>()
        }
    }
}

#[test]
fn enumeration_matches_the_counting_recurrence() {
    for (ctx, k) in [("0", 0), ("1", 1), ("2", 2)] {
        for size in 1..=5 {
            let o = cellsem(&[
                "--json",
                "enumerate",
                &corpus("cbn.sig"),
                "--sort",
                "p",
                "--ctx",
                ctx,
                "--size",
                &size.to_string(),
            ]);
            assert_eq!(o.code, EXIT_OK);
            let expected: usize = (1..=size).map(|n| lambda_terms(n, k)).sum();
            assert_eq!(o.json()["count"], expected, "ctx {ctx} size {size}");
        }
    }
}

#[test]
fn howe_basic_checks_pass_and_replay() {
    let cbn = corpus("cbn.sig");
    let args = [
        "--json",
        "howe",
        &cbn,
        "--size",
        "4",
        "--ctx-bound",
        "1",
        "--depth",
        "2",
        "--pool-size",
        "3",
        "--checks",
        "basic",
    ];
    let first = cellsem(&args);
    assert_eq!(first.code, EXIT_OK, "{}", first.out);
    let v = first.json();
    assert_eq!(v["exact_ok"], true);
    let echoed: Vec<String> = v["command"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a.as_str().unwrap().to_string())
        .collect();
    let echoed: Vec<&str> = echoed.iter().map(String::as_str).collect();
    let second = cellsem(&echoed);
    assert_eq!(without_timing(second.json()), without_timing(v));
}

#[test]
fn congruence_sweep_is_reproducible() {
    let cbv = corpus("cbv.sig");
    let args = [
        "--json",
        "congruence",
        &cbv,
        "--samples",
        "40",
        "--seed",
        "3",
        "--depth",
        "2",
        "--pool-size",
        "4",
    ];
    let a = cellsem(&args);
    assert_ne!(a.code, EXIT_FAILURE, "{}", a.out);
    let b = cellsem(&args);
    let (a, b) = (without_timing(a.json()), without_timing(b.json()));
    assert_eq!(a, b);
    assert_eq!(a["samples"], 40);
    assert_eq!(a["counterexamples"], serde_json::json!([]));
}

#[test]
fn catalog_lists_the_instances() {
    let o = cellsem(&["--json", "catalog"]);
    assert_eq!(o.code, EXIT_OK);
    let names: Vec<String> = o.json()["instances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names, ["cbn", "cbv", "nondet", "cbn-howe"]);
}
