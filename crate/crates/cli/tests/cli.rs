use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_relbel"));
    c.env_remove("RELBEL_SEED");
    c
}

fn diabetes() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/diabetes.csv")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no {key} in {report}"))
        .parse()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn write_groups(dir: &Path) -> PathBuf {
    let p = dir.join("groups.csv");
    let xbar = [0.3, -0.5, 0.1, 0.8, -0.2, 2.9, 3.4, -0.7, 0.05, 3.1];
    let mut s = String::from("group_id,xbar\n");
    for (i, x) in xbar.iter().enumerate() {
        s.push_str(&format!("g{i},{x}\n"));
    }
    std::fs::write(&p, s).unwrap();
    p
}

#[test]
fn elicit_normal_and_regression() {
    let o = run(&["elicit", "--model", "normal", "--lower", "-5", "--upper", "5"]);
    assert!(o.status.success());
    assert!((value(&stdout(&o), "lambda0") - 1.9411).abs() < 5e-4);

    let o = run(&["elicit", "--model", "laplace", "--lower", "-5", "--upper", "5"]);
    assert!((value(&stdout(&o), "lambda0") - 1.5355).abs() < 5e-4);

    let o = run(&["elicit", "--model", "regression", "--m0", "100", "--s1", "75", "--s2", "200", "--tau0", "1.05"]);
    let r = stdout(&o);
    assert!((value(&r, "lambda0") - 0.4762).abs() < 5e-5);
    assert!((value(&r, "alpha1") - 7.29).abs() < 5e-3);
    assert!((value(&r, "alpha2") - 13641.35).abs() < 5e-3);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "group_id,xbar\n").unwrap();
    let o = run(&["analyze", "--model", "normal", "--data", empty.to_str().unwrap(), "--lambda0", "2"]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(run(&["reproduce", "table9"]).status.code(), Some(2));
    assert_eq!(run(&["elicit", "--model", "normal", "--lower", "5", "--upper", "-5"]).status.code(), Some(2));
    assert_eq!(run(&["elicit", "--model", "normal", "--lower", "-5", "--upper", "5", "--workers", "0"]).status.code(), Some(2));
}

#[test]
fn diabetes_analysis() {
    let d = diabetes();
    let o = run(&[
        "analyze", "--model", "regression", "--data", d.to_str().unwrap(), "--center", "150", "--lambda0", "5",
        "--alpha1", "7.29", "--alpha2", "13641.35",
    ]);
    assert!(o.status.success());
    let report = stdout(&o);
    let mut rejected: Vec<&str> = report
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",rejected"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    rejected.sort();
    assert_eq!(rejected, ["bmi", "ltg", "map", "sex"]);
}

#[test]
fn conflict_exit_code() {
    let d = diabetes();
    let base = [
        "check-prior", "--data", d.to_str().unwrap(), "--center", "150", "--alpha1", "7.29", "--alpha2", "13641.35",
        "--draws", "5000", "--fail-on-conflict", "--lambda0",
    ];
    let mut args = base.to_vec();
    args.push("0.48");
    let o = run(&args);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).starts_with("check,tail_probability"));

    let mut args = base.to_vec();
    args.push("5");
    assert_eq!(run(&args).status.code(), Some(0));
}

#[test]
fn bundles_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_groups(dir.path());
    let mut outputs = Vec::new();
    for w in ["1", "4"] {
        let out = dir.path().join(format!("w{w}"));
        let o = run(&[
            "analyze", "--model", "normal", "--data", data.to_str().unwrap(), "--n", "5", "--sigma", "1", "--lower", "-5", "--upper", "5", "--xi",
            "--draws", "30000", "--seed", "11", "--workers", w, "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(["report.csv", "plot.csv", "manifest.toml"].map(|f| std::fs::read(out.join(f)).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn manifest_replays_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = diabetes();
    let first = dir.path().join("first");
    let o = run(&[
        "bias", "--model", "regression", "--data", d.to_str().unwrap(), "--center", "150", "--lambda0", "5",
        "--alpha1", "7.29", "--alpha2", "13641.35", "--draws", "400", "--seed", "5", "--out", first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = read(&first, "manifest.toml");
    assert!(manifest.contains("seed = 5"));
    assert!(!manifest.contains("workers"));

    let second = dir.path().join("second");
    let m = first.join("manifest.toml");
    let o = run(&["bias", "--config", m.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&first, "report.csv"), read(&second, "report.csv"));
    assert_eq!(manifest, read(&second, "manifest.toml"));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_groups(dir.path());
    let go = |tag: &str, flag: Option<&str>, env: Option<&str>| {
        let out = dir.path().join(tag);
        let mut c = bin();
        c.args(["analyze", "--model", "normal", "--data", data.to_str().unwrap(), "--n", "5", "--sigma", "1", "--lambda0", "2"]);
        c.args(["--xi", "--draws", "20000", "--out", out.to_str().unwrap()]);
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        if let Some(e) = env {
            c.env("RELBEL_SEED", e);
        }
        assert!(c.output().unwrap().status.success());
        (read(&out, "plot.csv"), read(&out, "manifest.toml"))
    };
    let env = go("env", None, Some("42"));
    let flag = go("flag", Some("42"), None);
    let both = go("both", Some("42"), Some("43"));
    let default = go("default", None, None);
    assert!(env.1.contains("seed = 42"));
    assert_eq!(env, flag);
    assert_eq!(both, flag);
    assert!(default.1.contains("seed = 1\n"));
    assert_ne!(default.0, flag.0);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "model = \"normal\"\nlower = -5\nupper = 5\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = run(&["elicit", "--config", c]);
    assert!((value(&stdout(&o), "lambda0") - 1.9411).abs() < 5e-4);
    let o = run(&["elicit", "--config", c, "--upper", "3", "--lower", "-3"]);
    let r = stdout(&o);
    assert_eq!(value(&r, "upper"), 3.0);
    assert!(value(&r, "lambda0") < 1.9);
}

#[test]
fn rank_deficient_design_uses_moore_penrose() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(diabetes()).unwrap();
    let mut lines = text.lines();
    let mut s = format!("{},age2\n", lines.next().unwrap());
    for l in lines {
        let age: f64 = l.split(',').next().unwrap().parse().unwrap();
        s.push_str(&format!("{l},{}\n", 2.0 * age));
    }
    let p = dir.path().join("rd.csv");
    std::fs::write(&p, s).unwrap();
    let o = run(&[
        "analyze", "--model", "regression", "--data", p.to_str().unwrap(), "--center", "150", "--lambda0", "5",
        "--alpha1", "7.29", "--alpha2", "13641.35",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Moore-Penrose"));
    let r = stdout(&o);
    assert!(r.starts_with("variable,mp_mean,rb,strength,verdict"));
    assert!(r.lines().any(|l| l.starts_with("bmi,") && l.ends_with(",rejected")));
}

#[test]
fn select_reads_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_groups(dir.path());
    let out = dir.path().join("a");
    let o = run(&[
        "analyze", "--model", "normal", "--data", data.to_str().unwrap(), "--n", "5", "--sigma", "1", "--lower", "-5", "--upper", "5",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rep = out.join("report.csv");
    let o = run(&["select", "--data", rep.to_str().unwrap(), "--xi", "0.7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout(&o);
    let accepted = r.lines().filter(|l| l.ends_with(",accepted")).count();
    assert_eq!(accepted, 7);
}

#[test]
fn reproduce_table6_single_k() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t6");
    let o = run(&["reproduce", "table6", "--k", "10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read(&out, "report.csv");
    assert!(r.starts_with("k,decision,true_positive,true_negative"));
    let total: u64 = r
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(2).map(|c| c.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 10);
    assert!(read(&out, "manifest.toml").contains("command = \"reproduce\""));
}
