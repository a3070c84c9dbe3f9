use std::path::Path;
use std::process::{Command, Output};

fn timectl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timectl"))
        .args(args)
        .current_dir(dir)
        .env_remove("TIMECTL_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_writes_trace_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = timectl(&["run", "--capacity-bits", "0.4", "--out", "t.csv", "--svg", "t.svg"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# timectl-trace v1"));
    assert_eq!(lines.next(), Some("m,x,u,x_hat,decode_event,decode_correct,bits_resolved"));
    assert_eq!(lines.count(), 251);
    let svg = std::fs::read_to_string(dir.path().join("t.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn flags_override_the_config_file_and_env_sets_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "runs = 7\ncapacity_bits = 0.1\n").unwrap();
    let o = timectl(&["sweep", "--config", "c.toml", "--grid", "0.5"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().nth(2).unwrap().starts_with("0.5,7,"), "{out}");

    let with_env = |seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_timectl"))
            .args(["run"])
            .env("TIMECTL_SEED", seed)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(o.status.success());
        stdout(&o)
    };
    assert_eq!(with_env("9"), with_env("9"));
    assert_ne!(with_env("9"), with_env("10"));
    assert_eq!(with_env("9"), stdout(&timectl(&["run", "--seed", "9"], dir.path())));
}

#[test]
fn capacity_codec_and_estimate_print_versioned_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cap = timectl(&["capacity", "--delay", "geometric", "--mean-s", "2"], dir.path());
    assert!(cap.status.success());
    assert!(stdout(&cap).starts_with(
        "# timectl-capacity v1\ndelay,mean_s,grid_step,closed_form_nats,numeric_nats,optimal_chi,iterations,converged,bound_gap\ngeometric,"
    ));

    let codec = timectl(&["codec-bench", "--n", "4", "--ratio", "0.5,1.5", "--trials", "50"], dir.path());
    assert!(codec.status.success());
    let text = stdout(&codec);
    assert!(text.starts_with("# timectl-codec v1\nn,n_prime,rate_nats,capacity_nats,trials,errors,error_rate\n"));
    assert_eq!(text.lines().count(), 4);

    let est = timectl(&["estimate", "--trials", "40", "--n-values", "2,4", "--svg", "e.svg"], dir.path());
    assert!(est.status.success());
    assert_eq!(stdout(&est).lines().count(), 2 + 4);
    assert!(dir.path().join("e.svg").exists());
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "bogus = 1\n").unwrap();
    for args in [
        &["sweep", "--config", "bad.toml"][..],
        &["run", "--config", "missing.toml"],
        &["run", "--a", "0.5"],
        &["run", "--mode", "bogus"],
        &["codec-bench", "--ratio", "-1"],
        &["run", "--mode", "full-coding", "--capacity-bits", "1.0", "--max-depth", "40"],
    ] {
        let o = timectl(args, dir.path());
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(!o.stderr.is_empty());
    }
}
