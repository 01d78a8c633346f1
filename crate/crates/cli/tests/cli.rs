use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spillover"));
    c.arg("--threads").arg("1");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Eight units on a path of five and a triangle of three.
const EDGES: &str = "from,to\n1,2\n2,3\n3,4\n4,5\n6,7\n8,6\n7,8\n";
const UNITS: &str = "id,Y,Z,D\n1,4,1,1\n2,3,0,0\n3,7,1,0\n4,8,1,1\n5,2,0,0\n6,3,0,0\n7,5,1,1\n8,1,0,0\n";

fn run_test(dir: &TempDir, config: &str, edges: &str, units: &str) -> Output {
    let c = write(dir.path(), "run.toml", config);
    let e = write(dir.path(), "edges.csv", edges);
    let u = write(dir.path(), "units.csv", units);
    bin().args(["test", "--config"]).arg(c).arg("--edges").arg(e).arg("--units").arg(u).output().unwrap()
}

#[test]
fn test_command_reports_statistics() {
    let dir = TempDir::new().unwrap();
    let cfg = "e0 = \"any_neighborhood\"\ne1 = \"own_any_peer\"\ndraws = 200\nseed = 3\n[focal]\nkappa = 3\n";
    let out = run_test(&dir, cfg, EDGES, UNITS);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "statistic,t_obs,p_hat,R,focal_size,kappa,method,acceptance_rate,seed");
    assert_eq!(lines.len(), 5);
    for (line, name) in lines[1..].iter().zip(["kw", "acd", "olsf", "simes"]) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], name);
        assert_eq!(f[3], "200");
        assert_eq!(f[4], "3");
        assert_eq!(f[5], "3");
        let p: f64 = f[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    // identical inputs give identical bytes
    assert_eq!(run_test(&dir, cfg, EDGES, UNITS).stdout, out.stdout);
}

#[test]
fn output_file_and_seed_override() {
    let dir = TempDir::new().unwrap();
    let c = write(dir.path(), "run.toml", "draws = 50\n");
    let e = write(dir.path(), "edges.csv", EDGES);
    let u = write(dir.path(), "units.csv", UNITS);
    let target = dir.path().join("result.csv");
    let out = bin()
        .args(["test", "--seed", "42", "--config"])
        .arg(&c)
        .arg("--edges")
        .arg(&e)
        .arg("--units")
        .arg(&u)
        .arg("--out")
        .arg(&target)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(target).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",42")), "{text}");
}

#[test]
fn support_violation_is_validation_error() {
    let dir = TempDir::new().unwrap();
    let out = run_test(&dir, "[mechanism]\ntreated = 3\n", EDGES, UNITS);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("observed Z impossible under declared mechanism"), "{}", stderr(&out));
}

#[test]
fn zero_draws_rejected() {
    let dir = TempDir::new().unwrap();
    let out = run_test(&dir, "R = 0\n", EDGES, UNITS);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("draws"), "{}", stderr(&out));
}

#[test]
fn unknown_exposure_lists_options() {
    let dir = TempDir::new().unwrap();
    let out = run_test(&dir, "e1 = \"friends\"\n", EDGES, UNITS);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("own_peer_count") && err.contains("any_neighborhood"), "{err}");
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = TempDir::new().unwrap();
    let bad = UNITS.replace("5,2,0,0", "5,two,0,0");
    let out = run_test(&dir, "", EDGES, &bad);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 6"), "{}", stderr(&out));
}

#[test]
fn empty_pool_is_degenerate() {
    let dir = TempDir::new().unwrap();
    let out = run_test(&dir, "", "from,to\n", UNITS);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn exhausted_rejection_sampler() {
    let dir = TempDir::new().unwrap();
    let cfg = "e0 = \"any_neighborhood\"\nmax_attempts = 1\ndraws = 200\n[focal]\nkappa = 3\n";
    let out = run_test(&dir, cfg, EDGES, UNITS);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn stratified_units() {
    let dir = TempDir::new().unwrap();
    let units = "id,Y,Z,stratum\n1,4,1,1\n2,3,0,1\n3,7,1,1\n4,8,1,2\n5,2,0,2\n6,3,0,2\n7,5,1,2\n8,1,0,1\n";
    let out = run_test(&dir, "draws = 50\n[mechanism]\nkind = \"stratified\"\n", EDGES, units);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run_test(&dir, "[mechanism]\nkind = \"stratified\"\nstrata = { 1 = 1, 2 = 2 }\n", EDGES, units);
    assert_eq!(out.status.code(), Some(2));
}

fn simulate(dir: &TempDir, config: &str) -> Output {
    let c = write(dir.path(), "sim.toml", config);
    bin().args(["simulate", "--config"]).arg(c).output().unwrap()
}

#[test]
fn simulate_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = "stats = [\"kw\"]\ndraws = 50\n[simulate]\nn = 60\nreps = 3\ntaus = [0, 1, 2]\n";
    let out = simulate(&dir, cfg);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "tau,statistic,method,exposure_pair,rejection_rate,mean_focal_size,mean_acceptance_rate,degenerate_reps"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,kw,mis,own/own_any_peer,"));
    assert_eq!(simulate(&dir, cfg).stdout, out.stdout);
}

#[test]
fn simulate_single_cell() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, "stats = [\"acd\"]\ndraws = 20\n[simulate]\nn = 40\nreps = 1\ntaus = [2]\n");
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let rate: f64 = rows[0].split(',').nth(4).unwrap().parse().unwrap();
    assert!(rate == 0.0 || rate == 1.0);
}

#[test]
fn simulate_rejects_unknown_exposure() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, "e0 = \"x\"\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("own_any_peer"));
}

fn gen(dir: &TempDir, name: &str, n: &str, p: &str) -> String {
    let target = dir.path().join(name);
    let out = bin().args(["gen-network", "--n", n, "--p", p, "--seed", "1", "--out"]).arg(&target).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    fs::read_to_string(target).unwrap()
}

#[test]
fn gen_network_cases() {
    let dir = TempDir::new().unwrap();
    assert_eq!(gen(&dir, "empty.csv", "5", "0"), "from,to\n");
    assert_eq!(gen(&dir, "full.csv", "3", "1"), "from,to\n1,2\n1,3\n2,3\n");
    assert_eq!(gen(&dir, "a.csv", "50", "0.1"), gen(&dir, "b.csv", "50", "0.1"));
    let out =
        bin().args(["gen-network", "--n", "5", "--p", "0.5", "--out", "/nonexistent/dir/x.csv"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["gen-network", "--n", "5", "--p", "1.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generated_network_feeds_test() {
    let dir = TempDir::new().unwrap();
    let edges = gen(&dir, "net.csv", "40", "0.08");
    let units: String = std::iter::once("id,Y,Z".to_string())
        .chain((1..=40).map(|i| format!("{i},{},{}", (i * 7 % 11) as f64 / 3.0, i % 2)))
        .collect::<Vec<_>>()
        .join("\n");
    let out = run_test(&dir, "draws = 100\n", &edges, &units);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 5);
}
