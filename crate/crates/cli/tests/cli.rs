mod common;

use std::path::PathBuf;

use common::stormlet;

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn assert_golden(name: &str, args: &[&str]) {
    let out = stormlet(args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{name}: {stderr}");
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden(name), "{name}");
}

fn exit_code(args: &[&str]) -> i32 {
    stormlet(args).status.code().expect("exited normally")
}

#[test]
fn die_exact() {
    assert_golden("die_exact.txt", &["--prism", "die.pm", "--prop", "die.props", "--exact"]);
}

#[test]
fn die_float() {
    assert_golden("die_float.txt", &["--prism", "die.pm", "--prop", "die.props"]);
}

#[test]
fn detour_exact_json() {
    assert_golden(
        "detour_exact.json",
        &["--prism", "detour.nm", "--prop", "detour.props", "--exact", "--json"],
    );
}

#[test]
fn cycle_rewards() {
    assert_golden("cycle.txt", &["--prism", "cycle.nm", "--prop", "cycle.props"]);
}

#[test]
fn coin_truth_values_json() {
    assert_golden("coin.json", &["--prism", "coin.pm", "--prop", "coin.props", "--json"]);
}

#[test]
fn herman_on_quotient() {
    assert_golden(
        "herman3_bisim.txt",
        &["--prism", "herman3.pm", "--prop", "herman3.props", "--exact", "--bisim"],
    );
}

#[test]
fn erlang_time_bounds() {
    assert_golden("erlang2.txt", &["--prism", "erlang2.sm", "--prop", "erlang2.props"]);
}

#[test]
fn markov_automaton() {
    assert_golden("race_exact.txt", &["--prism", "race.ma", "--prop", "race.props", "--exact"]);
}

#[test]
fn explicit_input() {
    assert_golden(
        "three_explicit.txt",
        &[
            "--explicit",
            "three.tra",
            "three.lab",
            "--staterew",
            "three.rew",
            "--prop",
            "P=?[F \"t\"];R=?[F \"t\"]",
            "--exact",
        ],
    );
}

#[test]
fn parametric_function() {
    assert_golden("pdie_function.txt", &["--prism", "pdie.pm", "--prop", "pdie.props", "--parametric"]);
}

#[test]
fn parametric_point() {
    assert_golden(
        "pdie_point.txt",
        &["--prism", "pdie.pm", "--prop", "pdie.props", "--parametric", "--point", "p=1/3"],
    );
}

#[test]
fn parametric_region_json() {
    assert_golden(
        "twoparam_region.json",
        &[
            "--prism",
            "twoparam.pm",
            "--prop",
            "twoparam.props",
            "--parametric",
            "--region",
            "0.1<=p<=0.2,0.3<=q<=0.4",
            "--json",
        ],
    );
}

#[test]
fn solvers_print_the_same_exact_value() {
    for solver in ["exact", "elimination", "pi", "rs"] {
        let out = stormlet(&["--prism", "die.pm", "--prop", "P=?[F \"three\"]", "--exact", "--eqsolver", solver]);
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("Result (for initial states): 1/6"), "{solver}: {text}");
    }
}

#[test]
fn parse_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.pm");
    std::fs::write(&broken, "dtmc\nmodule m\n s : [0..1] init 0;\n [] s=0 -> (s'=1)\nendmodule\n").unwrap();
    let broken = broken.to_str().unwrap();
    assert_eq!(exit_code(&["--prism", broken, "--prop", "P=?[F s=1]"]), 1);
    assert_eq!(exit_code(&["--prism", "die.pm", "--prop", "P=?[F \"one\""]), 1);
    assert_eq!(exit_code(&["--prism", "die.pm", "--prop", "P=?[F \"nope\"]"]), 1);
    assert_eq!(exit_code(&["--prism", "missing.pm", "--prop", "P=?[F \"one\"]"]), 1);
    assert_eq!(exit_code(&["--prism", "die.pm", "--prop", "die.props", "--eqsolver", "foo"]), 1);
    assert_eq!(exit_code(&["--prism", "die.pm", "--bogus"]), 1);
    assert_eq!(exit_code(&["--prism", "brp.pm", "--prop", "brp.props"]), 1);
}

#[test]
fn unsupported_exits_2() {
    assert_eq!(exit_code(&["--prism", "die.pm", "--prop", "S=?[\"one\"]"]), 2);
    assert_eq!(exit_code(&["--prism", "single.sm", "--prop", "single.props", "--exact"]), 2);
    assert_eq!(exit_code(&["--prism", "race.ma", "--prop", "Pmax=?[F<=1 \"t\"]"]), 2);
    assert_eq!(exit_code(&["--prism", "die.pm", "--prop", "die.props", "--eqsolver", "vi", "--exact"]), 2);
}

#[test]
fn timeout_exits_3() {
    let args = [
        "--prism",
        "brp.pm",
        "--prop",
        "P=?[F \"error\"]",
        "--constants",
        "N=300,MAX=10",
        "--exact",
        "--eqsolver",
        "rs",
        "--timeout",
        "0.2",
    ];
    let out = stormlet(&args);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("timeout"));
}

#[test]
fn json_is_valid() {
    let out = stormlet(&["--prism", "herman3.pm", "--prop", "herman3.props", "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["model"]["states"], 8);
    assert_eq!(doc["results"].as_array().unwrap().len(), 4);
    assert_eq!(doc["results"][1]["kind"], "range");
}
