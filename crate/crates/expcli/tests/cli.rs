use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ledbat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ledbat")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = ledbat(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let o = ledbat(args);
    assert!(!o.status.success(), "{args:?} succeeded");
    String::from_utf8(o.stderr).unwrap()
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn run_preset_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let msg = ok(&["run", "--preset", "fig1-two-flow", "--out", out.to_str().unwrap()]);
    assert!(msg.contains("jain_long = "), "{msg}");
    assert!(read(&out.join("trace.csv")).starts_with("t,flow_id,cwnd_pkts,rate_pps,queue_pkts\n"));
    assert!(read(&out.join("events.csv")).starts_with("t,flow_id,event,detail\n"));
    let metrics = read(&out.join("metrics.csv"));
    assert!(metrics.starts_with("scenario_id,variant,param,seed,eta,jain_long\nfig1-two-flow,plain,,1,"));
    assert!(read(&out.join("manifest.conf")).contains("flow_starts = 0, 10\n"));
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let conf = dir.path().join("c.conf");
    fs::write(&conf, "n_flows = 3\nstart_gap = 2\njitter = 0.001\nduration = 12\nvariant = random-drop\ndrop_prob_p = 0.001\n").unwrap();
    ok(&["run", "--config", conf.to_str().unwrap(), "--seed", "42", "--out", a.to_str().unwrap()]);
    let manifest = a.join("manifest.conf");
    assert!(read(&manifest).contains("seed = 42\n"));
    ok(&["run", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    for f in ["trace.csv", "events.csv", "metrics.csv", "manifest.conf", "short_term.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
}

#[test]
fn diagnostics_name_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "duration = 10\nbogus_key = 1\n").unwrap();
    let err = fails(&["run", "--config", conf.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(err.contains("bogus_key"), "{err}");
    fs::write(&conf, "flow_starts =\n").unwrap();
    let err = fails(&["run", "--config", conf.to_str().unwrap()]);
    assert!(err.contains("flow_starts"), "{err}");
    fs::write(&conf, "capacity = fast\n").unwrap();
    let err = fails(&["run", "--config", conf.to_str().unwrap()]);
    assert!(err.contains("capacity"), "{err}");
    let err = fails(&["run", "--preset", "fig9"]);
    assert!(err.contains("fig9") && err.contains("fig1-two-flow"), "{err}");
    fails(&["run"]);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    fs::write(&file, "x").unwrap();
    let err = fails(&["run", "--preset", "fig1-two-flow", "--out", file.join("sub").to_str().unwrap()]);
    assert!(err.contains("plain-file"), "{err}");
}

#[test]
fn sweep_is_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("s.conf");
    fs::write(
        &conf,
        "n_flows = 2\nstart_gap = 3\njitter = 0.001\nduration = 15\nsweep_parameter = beta\nsweep_values = 0.5, 0.9\nreplications = 3\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("serial"), dir.path().join("parallel"));
    let c = conf.to_str().unwrap();
    ok(&["sweep", "--config", c, "--seed", "9", "--jobs", "1", "--out", a.to_str().unwrap()]);
    ok(&["sweep", "--config", c, "--seed", "9", "--jobs", "3", "--out", b.to_str().unwrap()]);
    for f in ["runs.csv", "aggregate.csv", "manifest.conf"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    assert_eq!(read(&a.join("runs.csv")).lines().count(), 7);
    let files = ok(&["plotdata", a.to_str().unwrap()]);
    assert!(files.contains("metric_vs_beta.csv") && files.contains("metric_vs_one_minus_beta.csv"));
    let t = read(&a.join("metric_vs_one_minus_beta.csv"));
    assert!(t.starts_with("one_minus_beta,eta_mean,eta_var,F_mean,F_var\n0.5,"), "{t}");
    assert!(t.lines().nth(2).unwrap().starts_with("0.09999999999999998,"), "{t}");
}

#[test]
fn sweep_manifest_reruns_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&["sweep", "--preset", "fig3-psweep", "--reps", "1", "--seed", "5", "--out", a.to_str().unwrap()]);
    let b = dir.path().join("b");
    ok(&["sweep", "--config", a.join("manifest.conf").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(read(&a.join("runs.csv")), read(&b.join("runs.csv")));
    let files = ok(&["plotdata", a.to_str().unwrap(), "--out", dir.path().join("plots").to_str().unwrap()]);
    assert!(files.contains("metric_vs_p.csv"));
    let t = read(&dir.path().join("plots/metric_vs_p.csv"));
    assert!(t.starts_with("p,eta_mean,eta_var,F_mean,F_var\n0.00001,"), "{t}");
    assert_eq!(t.lines().count(), 6);
}

#[test]
fn plotdata_for_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    ok(&["run", "--preset", "fig1-two-flow", "--out", out.to_str().unwrap()]);
    ok(&["plotdata", out.to_str().unwrap()]);
    let cwnd = read(&out.join("cwnd.csv"));
    assert!(cwnd.starts_with("t,flow_1,flow_2\n"));
    assert_eq!(cwnd.lines().count(), 601);
    assert!(read(&out.join("queue.csv")).starts_with("t,queue_pkts\n"));
    let err = fails(&["plotdata", dir.path().join("missing").to_str().unwrap()]);
    assert!(err.contains("missing"), "{err}");
}

#[test]
fn fluid_preset_reports_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let msg = ok(&["fluid", "--preset", "fluid-two-flow", "--out", dir.path().to_str().unwrap()]);
    assert!(msg.contains("holds = true"), "{msg}");
    assert!(msg.contains("t_star = 10.5\n"), "{msg}");
    assert!(read(&dir.path().join("fluid.csv")).starts_with("t,flow_id,W,q_i\n"));
    let conf = dir.path().join("f.conf");
    fs::write(&conf, "fluid_windows = 10, 10, 10, 10, 10, 10\n").unwrap();
    let err = fails(&["fluid", "--config", conf.to_str().unwrap()]);
    assert!(err.contains("fluid"), "{err}");
}
