use std::path::PathBuf;
use std::process::{Command, Output};

fn smeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smeq")).args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("smeq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, text: &str) -> String {
    let p = tmp(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_builtins_names_all_four() {
    let o = smeq(&["list-builtins"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for n in ["s1_trace_m2", "s2_pinching_d2", "s3_corner_s1", "s4_tower_bimodule"] {
        assert!(out.contains(n), "{out}");
    }
}

#[test]
fn verify_s2_passes_with_stable_report() {
    let (r1, r2, dot) = (tmp("s2a.json"), tmp("s2b.json"), tmp("s2.dot"));
    let o = smeq(&["verify", "s2_pinching_d2", "--report", r1.to_str().unwrap(), "--dot", dot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let o = smeq(&["--sequential", "verify", "s2_pinching_d2", "--report", r2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (a, b) = (std::fs::read_to_string(&r1).unwrap(), std::fs::read_to_string(&r2).unwrap());
    assert_eq!(a, b);
    assert!(a.contains("\"downward.rebuilt_dim_X\""));
    let d = std::fs::read_to_string(&dot).unwrap();
    assert!(d.starts_with("digraph") && d.trim_end().ends_with('}'), "{d}");
}

#[test]
fn non_projection_morita_corner_fails() {
    let f = write(
        "badp.toml",
        "name = \"badp\"\nambient_dim = 2\n[morita]\nn = 1\np = [[1, 0.5], [0.5, 1]]\n",
    );
    let o = smeq(&["verify", &f, "--filter", "build"]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("[FAIL]"), "{}", stdout(&o));
}

#[test]
fn parse_error_reports_line() {
    let f = write("broken.toml", "name = \"x\"\nambient_dim = 2\ngenerators_A = [[[1, 0]]]\n");
    let o = smeq(&["verify", &f]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_file_and_empty_filter_are_input_errors() {
    assert_eq!(smeq(&["verify", "no_such_scenario"]).status.code(), Some(2));
    assert_eq!(smeq(&["verify", "s2_pinching_d2", "--filter", "zzz"]).status.code(), Some(2));
}

#[test]
fn size_cap_keeps_partial_tower() {
    let f = write("big.toml", "name = \"big\"\nambient_dim = 4\ndepth = 3\nduality = false\n");
    let dot = tmp("big.dot");
    let o = smeq(&["verify", &f, "--filter", "paragroup", "--dot", dot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.to_lowercase().contains("size"), "{out}");
    assert!(out.contains("[pass] paragroup.left_tower.level1"), "partial levels should still be checked: {out}");
}

#[test]
fn compare_distinguishes_and_identifies() {
    let o = smeq(&["compare", "s1_trace_m2", "s2_pinching_d2", "--depth", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("level 0"), "{}", stdout(&o));
    let dot = tmp("cmp.dot");
    let o = smeq(&["compare", "s1_trace_m2", "s3_corner_s1", "--depth", "1", "--dot", dot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let d = std::fs::read_to_string(&dot).unwrap();
    assert!(d.starts_with("// verdict:") && d.contains("subgraph"), "{d}");
}
