use std::fs;
use std::path::Path;
use std::process::Command;

fn epinet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_epinet")).args(args).output().unwrap()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let out = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", out.to_str().unwrap()]);
    let o = epinet(&full);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    fs::read_to_string(out).unwrap()
}

#[test]
fn ode_full_csv_conserves_mass() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "full.csv", &["ode-full", "--t-end", "40"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,s,qS,x,qI,r"));
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 6);
        assert!((v[1..].iter().sum::<f64>() - 1.0).abs() < 1e-6, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 81);
    let manifest = fs::read_to_string(dir.path().join("full.csv.manifest")).unwrap();
    for key in ["command=ode-full", "alpha=0.4", "beta=0.15", "rtol=", "kmax=1000", "wall_clock_seconds="] {
        assert!(manifest.contains(key), "missing {key} in manifest");
    }
}

#[test]
fn reduced_compare_emits_ratio_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "red.csv", &["ode-reduced", "--compare", "--t-end", "5", "--kmax", "200"]);
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "t,u,s_node,s_edge,qS,v,qI,r,ratio_s,ratio_qS,ratio_v,ratio_qI,ratio_r");
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((first[8] - 1.0).abs() < 1e-9);
}

#[test]
fn netstat_reads_generated_graph() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let g = graph.to_str().unwrap();
    let o = epinet(&["gen-graph", "--mean", "4", "--kmax", "40", "--n", "1000", "--seed", "7", "--out", g]);
    assert!(o.status.success());
    let before = fs::read(&graph).unwrap();
    let map = dir.path().join("ids.txt");
    let csv = run_to(dir.path(), "stats.csv", &["netstat", "--graph", g, "--id-map", map.to_str().unwrap()]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,m,K0,rho,C,C_local"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 6);
    let k0: f64 = row[2].parse().unwrap();
    assert!((k0 - 4.0).abs() < 0.4, "K0 = {k0}");
    assert_eq!(fs::read(&graph).unwrap(), before);
    assert!(fs::read_to_string(map).unwrap().lines().count() > 1);
}

#[test]
fn simulate_reports_runs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let g = graph.to_str().unwrap();
    assert!(epinet(&["gen-graph", "--mean", "5", "--kmax", "40", "--n", "300", "--out", g]).status.success());
    let csv = run_to(dir.path(), "sim.csv", &["simulate", "--graph", g, "--runs", "5", "--eta", "0.9", "--period", "7"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "run,seed,S,R,Q_max,I_max,t_q,t_i");
    assert_eq!(lines.len(), 1 + 5 + 2);
    assert!(lines[6].starts_with("mean,,"));
    assert!(lines[7].starts_with("std,,"));
}

#[test]
fn stability_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "stab.csv", &["stability", "--xi", "0.8", "--verify", "400"]);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    let get = |k: &str| row[header.iter().position(|h| *h == k).unwrap()];
    assert_eq!(get("classification"), "stable");
    assert_eq!(get("within_interval"), "true");
}

#[test]
fn error_exit_codes() {
    assert_eq!(epinet(&["early-time", "--eta", "2.0"]).status.code(), Some(2));
    assert_eq!(epinet(&["simulate", "--graph", "/nonexistent/g.txt"]).status.code(), Some(3));
    // xi with vanishing g1'(xi) cannot be linearised
    let o = epinet(&["stability", "--dist", "powerlaw", "--kmin", "3", "--xi", "1e-300"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "# nothing\n").unwrap();
    assert_eq!(epinet(&["netstat", "--graph", empty.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn stdout_when_no_out_flag() {
    let o = epinet(&["early-time", "--t-end", "1", "--dt", "0.5"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}
