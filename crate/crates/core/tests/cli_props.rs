use curvkit::cli::{execute, main_with_args, Cli, Status};
use curvkit::spec::parse_spec;
use clap::Parser;
use proptest::prelude::*;
use serde_json::Value;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curvkit"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).env_remove("CURVKIT_BUDGET").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = run(args);
    assert!(!out.is_empty(), "{err}");
    (code, serde_json::from_str(&out).unwrap())
}

fn write_tmp(name: &str, text: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("curvkit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn term() -> impl Strategy<Value = String> {
    // coefficient, x-exponents, t-exponent ≥ 1
    (-4i64..=4, 1i64..=3, 0u32..=2, 0u32..=2, 1u32..=3, 0u32..=1).prop_filter_map("zero", |(c, d, e1, e2, f1, f2)| {
        (c != 0).then(|| format!("{c}/{d}*x1^{e1}*x2^{e2}*t1^{f1}*t2^{f2}"))
    })
}

fn spec_text() -> impl Strategy<Value = String> {
    (proptest::collection::vec(proptest::collection::vec(term(), 0..4), 2), proptest::option::of(1u32..6)).prop_map(|(comps, order)| {
        let mut s = String::from("name = random\nn = 2\nk = 2\nbase = 1/2, -1\n");
        if let Some(o) = order {
            s.push_str(&format!("order = {o}\n"));
        }
        for (i, terms) in comps.iter().enumerate() {
            s.push_str(&format!("gamma{} = x{}", i + 1, i + 1));
            for t in terms {
                s.push_str(" + ");
                s.push_str(t);
            }
            s.push('\n');
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spec_pretty_print_round_trips(text in spec_text()) {
        let spec = parse_spec(&text).unwrap();
        let again = parse_spec(&spec.pretty()).unwrap();
        prop_assert_eq!(&spec, &again);
        prop_assert_eq!(spec.pretty(), again.pretty());
    }
}

#[test]
fn sheared_parabola_is_flat_with_a_manifold() {
    let (code, r) = json(&["check", "sheared_parabola"]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "complete");
    assert_eq!(r["results"]["curved"], false);
    let nf = &r["results"]["normal_form"];
    assert_eq!(nf["outcome"], "InvariantManifold");
    let cert = &nf["certificate"]["InvariantManifold"];
    assert_eq!(cert["phi"][1], "x2 - x1^2");
    assert_eq!(cert["weights"], serde_json::json!(["1", "inf"]));
    for v in r["results"]["verdicts"].as_array().unwrap() {
        assert!(v["outcome"]["FlatToOrder"].is_number(), "{v}");
    }
}

#[test]
fn parabola_is_curved_with_a_witness() {
    let (code, r) = json(&["check", "parabola"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["curved"], true);
    let cj = &r["results"]["verdicts"][2];
    assert_eq!(cj["outcome"], "CurvedCertified");
    assert!(cj["certificate"]["Jacobian"].is_object(), "{cj}");
    assert!(r["results"].get("normal_form").is_none());
}

#[test]
fn nilpotent_dump_of_the_heisenberg_algebra() {
    let (code, r) = json(&["nilpotent", "2", "--degrees", "1,1", "--order", "2"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["dim"], 3);
    assert_eq!(r["results"]["homogeneous_dimension"], 4);
    let (_, csv, _) = run(&["nilpotent", "3", "--order", "2", "--format", "csv"]);
    assert!(csv.starts_with("# basis\nindex,label,degree\n"), "{csv}");
    // 3 generators + 3 brackets
    assert_eq!(csv.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 6 + 3);
}

#[test]
fn lift_reports_an_exact_frame() {
    let (code, r) = json(&["lift", "parabola", "--order", "2"]);
    assert_eq!(code, 0);
    assert_eq!(r["results"]["check"]["pushforward_exact"], true);
    assert_eq!(r["results"]["d"], 2);
}

#[test]
fn reports_are_byte_identical_and_keys_sorted() {
    let a = run(&["check", "sheared_cubic", "--seed", "3"]).1;
    let b = run(&["check", "sheared_cubic", "--seed", "3"]).1;
    assert_eq!(a, b);
    let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, Value>>(&a).unwrap().keys().cloned().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    // top-level keys appear in sorted order in the text as well
    let pos: Vec<usize> = keys.iter().map(|k| a.find(&format!("\n  \"{k}\"")).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    let r: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(r["input_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["check", "parabola", "--format", "csv"]).0, 0);
    let cfg = write_tmp("steps.toml", "normal_form_steps = 1\n");
    let (code, r) = json(&["--config", cfg.to_str().unwrap(), "check", "sheared_parabola"]);
    assert_eq!(code, 2);
    assert_eq!(r["status"], "inconclusive");
    assert_eq!(r["results"]["normal_form"]["outcome"], "Inconclusive");
    let bad = write_tmp("bad.spec", "n = 2\nk = 1\ngamma1 = x1 + 1\ngamma2 = x2 + t1\n");
    let (code, out, err) = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("component 1"), "{err}");
    assert_eq!(run(&["check", "no_such_family"]).0, 1);
    assert_eq!(run(&["--grid", "100", "oplab", "vdc"]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn settings_precedence() {
    // flag > env > config file > spec file > default
    let spec = write_tmp("p.spec", "n = 2\nk = 1\nbudget = 3\norder = 2\ngamma1 = x1 + t1\ngamma2 = x2 + t1^2\n");
    let cfg = write_tmp("c.toml", "budget = 4\n");
    let p = spec.to_str().unwrap();
    let c = cfg.to_str().unwrap();
    let budget = |args: &[&str], env: Option<&str>| {
        let mut cmd = bin();
        cmd.args(args).env_remove("CURVKIT_BUDGET");
        if let Some(e) = env {
            cmd.env("CURVKIT_BUDGET", e);
        }
        let r: Value = serde_json::from_slice(&cmd.output().unwrap().stdout).unwrap();
        (r["settings"]["budget"].as_u64().unwrap(), r["settings"]["order"].as_u64().unwrap())
    };
    assert_eq!(budget(&["check", "parabola"], None), (6, 4));
    assert_eq!(budget(&["check", p], None), (3, 2));
    assert_eq!(budget(&["--config", c, "check", p], None), (4, 2));
    assert_eq!(budget(&["--config", c, "check", p], Some("5")), (5, 2));
    assert_eq!(budget(&["--config", c, "check", p, "--budget", "7", "--order", "3"], Some("5")), (7, 3));
}

#[test]
fn library_entry_points_agree_with_the_binary() {
    let cli = Cli::try_parse_from(["curvkit", "check", "shear"]).unwrap();
    let r = execute(&cli).unwrap();
    assert_eq!(r.status, Status::Complete);
    assert_eq!(r.to_json(), run(&["check", "shear"]).1);
    assert_eq!(main_with_args(["curvkit", "check", "/nonexistent/dir/"]), 1);
}

#[test]
fn oplab_experiments_run_from_the_command_line() {
    let (code, r) = json(&["oplab", "vdc"]);
    assert_eq!(code, 0);
    for f in r["results"]["fits"].as_array().unwrap() {
        let e = f["exponent"].as_f64().unwrap();
        let p = f["predicted"].as_f64().unwrap();
        assert!((e - p).abs() < 0.05, "{f}");
    }
    let (_, csv, _) = run(&["oplab", "pushforward", "--format", "csv", "--seed", "1"]);
    assert!(csv.contains("# modulus\nz,omega\n"));
    let (code, r) = json(&["oplab", "symbol", "--grid", "512"]);
    assert_eq!(code, 0);
    assert!(r["results"]["pi_gap"].as_f64().unwrap() < 1e-2);
}
