use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn chanmix(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chanmix"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CHANMIX_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const EXAMPLE_ONE: &str = r#"
[system]
dimension = 2

[[component]]
weight = 0.3333333333333333
basis = 1
p = { kind = "exp_relax", scale = 0.75, rate = 1.0 }

[[component]]
weight = 0.3333333333333333
basis = 2
p = { kind = "exp_relax", scale = 0.75, rate = 1.0 }

[[component]]
weight = 0.3333333333333334
basis = 3
p = { kind = "exp_relax", scale = 0.75, rate = 1.0 }
"#;

#[test]
fn example_one_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ex1.toml"), EXAMPLE_ONE).unwrap();
    let o = chanmix(&["analyze", "ex1.toml", "--out-dir", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j = read_json(&dir.path().join("out/classification.json"));
    assert_eq!(j["is_semigroup"], true);
    assert_eq!(j["singular_times"].as_array().unwrap().len(), 0);
    for input in j["inputs"].as_array().unwrap() {
        assert_eq!(input["invertible"], false);
        let t = input["singular_times"][0].as_f64().unwrap();
        assert!((t - 3f64.ln()).abs() < 1e-9);
    }
    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,lambda_1,lambda_2,lambda_3,gamma_1,gamma_2,gamma_3\n"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ex1.toml"), EXAMPLE_ONE).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_chanmix"))
        .args(["analyze", "ex1.toml"])
        .current_dir(dir.path())
        .env("CHANMIX_OUT_DIR", "envout")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("envout/classification.json").exists());
}

#[test]
fn two_semigroup_mix_is_not_markovian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[system]
dimension = 2
[[component]]
weight = 0.5
basis = 1
p = { kind = "exp_relax", scale = 0.5, rate = 1.0 }
[[component]]
weight = 0.5
basis = 2
p = { kind = "exp_relax", scale = 0.5, rate = 1.0 }
"#;
    fs::write(dir.path().join("two.toml"), cfg).unwrap();
    let o = chanmix(&["analyze", "two.toml", "--out-dir", "."], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let j = read_json(&dir.path().join("classification.json"));
    assert_eq!(j["is_semigroup"], false);
    assert_eq!(j["is_cp_divisible"], false);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_sum = "[system]\ndimension = 2\n[[component]]\nweight = 0.9\nbasis = 1\np = { kind = \"exp_relax\", scale = 0.5, rate = 1.0 }\n";
    fs::write(dir.path().join("sum.toml"), bad_sum).unwrap();
    let o = chanmix(&["analyze", "sum.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("simplex"), "{}", stderr(&o));

    let o = chanmix(&["analyze", "missing.toml"], dir.path());
    assert_eq!(code(&o), 2);

    fs::write(dir.path().join("syntax.toml"), "[system\ndimension = 2\n").unwrap();
    let o = chanmix(&["analyze", "syntax.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));

    let domain = "[system]\ndimension = 2\n[grid]\nt_max = 3.0\npoints = 64\n[[component]]\nweight = 1.0\nbasis = 1\np = { kind = \"expression\", expr = \"0.1*t + 0*ln(1-t/2)\" }\n";
    fs::write(dir.path().join("domain.toml"), domain).unwrap();
    let o = chanmix(&["analyze", "domain.toml"], dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    let composite = "[system]\ndimension = 4\n[[component]]\nweight = 1.0\nbasis = 1\np = { kind = \"exp_relax\", scale = 0.5, rate = 1.0 }\n";
    fs::write(dir.path().join("d4.toml"), composite).unwrap();
    assert_eq!(code(&chanmix(&["analyze", "d4.toml"], dir.path())), 2);

    let out_of_range = "[system]\ndimension = 2\n[[component]]\nweight = 1.0\nbasis = 1\np = { kind = \"expression\", expr = \"1.2*t\" }\n";
    fs::write(dir.path().join("range.toml"), out_of_range).unwrap();
    let o = chanmix(&["analyze", "range.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("leaves [0, 1]"), "{}", stderr(&o));
}

#[test]
fn construct_examples() {
    let dir = tempfile::tempdir().unwrap();
    let o = chanmix(&["construct", "2", "1.0", "0.3333333", "0.3333333", "0.3333334"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.matches("noninvertible, t* = 1.09861").count(), 3, "{text}");
    let cfg: toml::Value = toml::from_str(&text).unwrap();
    for c in cfg["component"].as_array().unwrap() {
        assert!((c["p"]["scale"].as_float().unwrap() - 0.75).abs() < 1e-6);
    }

    let o = chanmix(&["construct", "3", "1.0", "0.25", "0.25", "0.25", "0.25"], dir.path());
    assert_eq!(code(&o), 0);
    let cfg: toml::Value = toml::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    for c in cfg["component"].as_array().unwrap() {
        assert!((c["p"]["scale"].as_float().unwrap() - 8.0 / 9.0).abs() < 1e-15);
    }

    let o = chanmix(&["construct", "3", "1.0", "0.1", "0.3", "0.3", "0.3"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("(d-1)/d^2 = 0.2222"), "{}", stderr(&o));
}

#[test]
fn construct_then_analyze_is_semigroup() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["construct", "2", "1.0", "0.3333333", "0.3333333", "0.3333334"],
        &["construct", "3", "1.7", "0.3", "0.25", "0.225", "0.225"],
        &["construct", "5", "0.6", "0.2", "0.16", "0.16", "0.16", "0.16", "0.16"],
        &["construct", "2", "1.0", "--same", "0.5", "--q", "0.3*sin(t)^2"],
        &["construct", "3", "1.0", "--same", "0.25", "--q", "(1-exp(-2*t))/3", "--basis", "2"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let file = format!("c{i}.toml");
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", &file]);
        let o = chanmix(&full, dir.path());
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        let out = format!("o{i}");
        let o = chanmix(&["analyze", &file, "--out-dir", &out], dir.path());
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        let j = read_json(&dir.path().join(&out).join("classification.json"));
        assert_eq!(j["is_semigroup"], true, "{args:?}");
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ex1.toml"), EXAMPLE_ONE).unwrap();
    chanmix(&["analyze", "ex1.toml", "--out-dir", "a"], dir.path());
    chanmix(&["analyze", "ex1.toml", "--out-dir", "b"], dir.path());
    for f in ["classification.json", "trajectory.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    chanmix(&["verify", "theorem2", "--d", "3", "--trials", "120", "--seed", "3", "--out", "r1.json"], dir.path());
    chanmix(&["verify", "theorem2", "--d", "3", "--trials", "120", "--seed", "3", "--out", "r2.json"], dir.path());
    assert_eq!(fs::read(dir.path().join("r1.json")).unwrap(), fs::read(dir.path().join("r2.json")).unwrap());
}

#[test]
fn verify_commands() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&chanmix(&["verify", "mub", "--d", "5"], dir.path())), 0);
    let o = chanmix(&["verify", "theorem1", "--trials", "1000", "--seed", "7", "--out", "t1.json"], dir.path());
    assert_eq!(code(&o), 0);
    let j = read_json(&dir.path().join("t1.json"));
    assert_eq!(j["pass"], true);
    assert_eq!(j["counterexamples"].as_array().unwrap().len(), 0);
    assert_eq!(j["seed"], 7);
    let o = chanmix(&["verify", "theorem2", "--d", "3", "--trials", "500", "--seed", "7"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(code(&chanmix(&["verify", "cptp", "--d", "3", "--trials", "60"], dir.path())), 0);
    assert_eq!(code(&chanmix(&["verify", "theorem1", "--trials", "20"], dir.path())), 1);
    assert_eq!(code(&chanmix(&["verify", "mub", "--d", "6"], dir.path())), 2);
}

fn scan_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn scan_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = chanmix(
        &["scan", "--d", "2", "--step", "0.05", "--family", "semigroup", "--out", "s.csv", "--summary", "s.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_json(&dir.path().join("s.json"))["semigroup_fraction"], 0.0);
    let rows = scan_rows(&fs::read_to_string(dir.path().join("s.csv")).unwrap());
    assert_eq!(rows.len(), 231);
    // a vertex is the single semigroup input itself
    let vertex = rows.iter().find(|r| r[0].starts_with("1.0000000000000000e0")).unwrap();
    assert_eq!(&vertex[3..7], &["1", "true", "true", "true"]);

    let o = chanmix(&["scan", "--d", "2", "--step", "0.05", "--family", "forced", "--out", "f.csv"], dir.path());
    assert_eq!(code(&o), 0);
    let rows = scan_rows(&fs::read_to_string(dir.path().join("f.csv")).unwrap());
    let semis: Vec<&Vec<String>> = rows.iter().filter(|r| r[5] == "true").collect();
    assert_eq!(semis.len(), 1);
    for w in &semis[0][..3] {
        assert!((w.parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
    // the degenerate point (1,0,0) is the noninvertible input channel alone
    let vertex = rows.iter().find(|r| r[0].starts_with("1.0000000000000000e0")).unwrap();
    assert_eq!(&vertex[5..7], &["false", "false"]);

    assert_eq!(code(&chanmix(&["scan", "--d", "2", "--step", "0.3"], dir.path())), 2);
}

#[test]
fn dump_mub_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = chanmix(&["dump-mub", "--d", "3", "--out-dir", "m"], dir.path());
    assert_eq!(code(&o), 0);
    let bases = fs::read_to_string(dir.path().join("m/mub_d3_bases.csv")).unwrap();
    assert_eq!(bases.lines().count(), 1 + 4 * 3 * 3);
    assert!(dir.path().join("m/mub_d3_unitaries.csv").exists());
}
