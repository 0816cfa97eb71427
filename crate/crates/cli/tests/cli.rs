use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsched")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bsched-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Cells of the first data row, keyed by header.
fn row(text: &str) -> Vec<(String, String)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    let cells: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(header.len(), cells.len());
    header.into_iter().zip(cells).map(|(h, c)| (h.to_string(), c.to_string())).collect()
}

fn cell<'a>(row: &'a [(String, String)], key: &str) -> &'a str {
    &row.iter().find(|(h, _)| h == key).unwrap().1
}

#[test]
fn demo_lp_fifo_twelve() {
    let o = bsched(&["demo-lp-fifo", "--n", "12"]);
    assert!(o.status.success());
    let r = row(&stdout(&o));
    assert_eq!(cell(&r, "lp_fifo_max_flow"), "12");
    assert_eq!(cell(&r, "fractional_max_flow"), "7");
}

#[test]
fn one_request_has_flow_one() {
    let path = scratch("one.txt");
    fs::write(&path, "pages 1\nreq 0 0 0\n").unwrap();
    let o = bsched(&["solve-maxflow", "--instance", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = row(&stdout(&o));
    assert_eq!(cell(&r, "bound"), "1");
    assert_eq!(cell(&r, "max_flow"), "1");
    assert_eq!(cell(&r, "oracle"), "1");
}

#[test]
fn bench_is_deterministic() {
    let a = bsched(&["bench", "--objective", "maxflow", "--seed", "7"]);
    let b = bsched(&["bench", "--objective", "maxflow", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 21);

    let args = ["bench", "--objective", "throughput", "--seed", "3", "--count", "3", "--trials", "10"];
    let a = bsched(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, bsched(&args).stdout);
}

#[test]
fn generate_round_trips_through_solvers() {
    let path = scratch("gen.txt");
    let o = bsched(&["generate", "--gen", "n=3,m=6,span=5", "--seed", "4", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("pages 3"));
    let o = bsched(&["oracle", "--instance", path.to_str().unwrap()]);
    let opt = cell(&row(&stdout(&o)), "optimum").to_string();
    let sched = scratch("gen.sched");
    let o = bsched(&["solve-maxflow", "--instance", path.to_str().unwrap(), "--out", sched.to_str().unwrap()]);
    let r = row(&stdout(&o));
    assert_eq!(cell(&r, "oracle"), opt);
    assert!(!fs::read_to_string(&sched).unwrap().is_empty());
}

#[test]
fn throughput_run_writes_columns_and_trials() {
    let inst = scratch("tp.txt");
    fs::write(&inst, "pages 2\nreq 0 0 0 3 2\nreq 1 0 1 3 5\n").unwrap();
    let dump = scratch("tp.out");
    let o = bsched(&[
        "solve-throughput",
        "--instance",
        inst.to_str().unwrap(),
        "--eps",
        "0.5",
        "--H",
        "4",
        "--trials",
        "5",
        "--out",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = row(&stdout(&o));
    assert_eq!(cell(&r, "lp_bound"), "7.000000");
    let text = fs::read_to_string(&dump).unwrap();
    assert!(text.lines().any(|l| l.starts_with("col ")));
    assert_eq!(text.lines().filter(|l| l.starts_with("trial ")).count(), 10);
}

#[test]
fn exit_codes() {
    assert_eq!(bsched(&["--help"]).status.code(), Some(0));
    assert_eq!(bsched(&["--version"]).status.code(), Some(0));
    assert_eq!(bsched(&["solve-maxflow"]).status.code(), Some(1));
    assert_eq!(bsched(&["solve-maxflow", "--gen", "n=2", "--eps", "0.4"]).status.code(), Some(1));
    assert_eq!(bsched(&["solve-maxflow", "--instance", "/nonexistent/x"]).status.code(), Some(1));
    // Two pages requested together cannot both go out at time 1.
    let path = scratch("tight.txt");
    fs::write(&path, "pages 2\nreq 0 0 0\nreq 1 0 1\n").unwrap();
    let o = bsched(&["solve-maxflow", "--instance", path.to_str().unwrap(), "--L", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
