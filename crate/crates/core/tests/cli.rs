use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const EXAMPLE2: &str = r#"
seed = 2

[scheme]
variant = "block"
field = "2^4"
n = 6
k = 2
t = 1
m = 3
ell = 4
N = 3
epsilon = 1
J = [4, 5, 6]
desired = 2

[channel]
erasures = "exhaustive"
"#;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: Option<&Path>, out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pirstream"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_example2_every_burst() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ex2.toml", EXAMPLE2);
    let out = dir.path().join("ex2.csv");
    let o = run(&["simulate"], Some(&cfg), Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "trial,seed,erased_blocks,error_weight,guaranteed,recovered,downloaded");
    assert_eq!(lines.len(), 6);
    let erased: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(erased, ["1", "2", "3", "4", "5"]);
    assert!(lines[1..].iter().all(|l| l.ends_with("true,true,30")));
}

#[test]
fn identical_seed_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "byz.toml", &EXAMPLE2.replace("erasures = \"exhaustive\"", "erasures = \"random\"\nerasure_count = 4"));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(run(&["simulate", "--trials", "6", "--workers", "1"], Some(&cfg), Some(&a)).status.success());
    assert!(run(&["simulate", "--trials", "6", "--workers", "3"], Some(&cfg), Some(&b)).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    assert!(run(&["simulate", "--trials", "6", "--seed", "99"], Some(&cfg), Some(&c)).status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn config_errors_exit_2_with_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.toml", &EXAMPLE2.replace("epsilon = 1", "epsilon = 3"));
    let o = run(&["simulate"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 12"), "{}", stderr(&o));
    let cfg = write(&dir, "syntax.toml", "seed = [\n");
    let o = run(&["simulate"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line "), "{}", stderr(&o));
    let o = run(&["simulate"], None, None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rates_default_sweeps() {
    let o = run(&["rates"], None, None);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("panel,N,epsilon,R_PIR_b,upper_bound,R_PIR_b_exact,upper_bound_exact\n"));
    assert!(csv.lines().any(|l| l.starts_with("a,30,3,") && l.contains(",45/206,")), "{csv}");
    assert_eq!(csv.lines().count(), 1 + 27 + 15 + 12);
}

#[test]
fn search_tolerance_miss_exits_4() {
    let dir = TempDir::new().unwrap();
    let ok = "seed = 3\ntrials = 300\n[search]\nrows = [{ k = 2, M = 1, q = 16, min = 0.95 }]\n";
    let cfg = write(&dir, "ok.toml", ok);
    let out = dir.path().join("s.csv");
    let o = run(&["recovering-search"], Some(&cfg), Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some("k,M,N,q,gamma,trials,p_full"));
    assert!(csv.contains("2,1,3,16,3,300,"));
    let cfg = write(&dir, "miss.toml", &ok.replace("k = 2, M = 1", "k = 3, M = 2").replace("min = 0.95", "min = 0.99"));
    let o = run(&["recovering-search"], Some(&cfg), None);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn audits() {
    let dir = TempDir::new().unwrap();
    let base = "[scheme]\nvariant = \"plain\"\nq = 5\nn = 4\nk = 2\nt = 1\nm = 2\nell = 1\nM = 0\n[audit]\ncolluding = [[1], [2], [3], [4]]\n";
    let o = run(&["privacy-audit"], Some(&write(&dir, "a.toml", base)), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().matches(",PASS,").count(), 4);

    let broken = format!("{base}broken = true\n");
    let o = run(&["privacy-audit"], Some(&write(&dir, "b.toml", &broken)), None);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("FAIL {3}"), "{}", stderr(&o));
    let o = run(&["privacy-audit"], Some(&write(&dir, "c.toml", &format!("{broken}expect = \"fail\"\n"))), None);
    assert_eq!(o.status.code(), Some(0));

    let large = "[scheme]\nvariant = \"plain\"\nq = 16\nn = 8\nk = 2\nt = 2\nm = 3\nell = 2\nM = 2\n[audit]\ncolluding = [[1, 2]]\n";
    let o = run(&["privacy-audit"], Some(&write(&dir, "l.toml", large)), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("audit"), "{}", stderr(&o));
}

#[test]
fn byzantine_budget_simulation() {
    let dir = TempDir::new().unwrap();
    let text = "seed = 4\ntrials = 40\n[scheme]\nvariant = \"byzantine\"\nq = 16\nn = 10\nk = 2\nt = 2\nm = 2\nell = 4\n[channel]\nerrors = \"budget\"\n";
    let o = run(&["simulate"], Some(&write(&dir, "b.toml", text)), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("recovered: 40"), "{}", stderr(&o));
}
