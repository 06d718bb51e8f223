use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn kvlink(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvlink"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn header(path: &Path) -> String {
    let text = fs::read_to_string(path).expect("csv exists");
    text.lines().next().expect("header row").to_string()
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn every_producer_writes_its_schema() {
    let dir = TempDir::new().unwrap();
    let out = dir.path();
    ok(&kvlink(&["compare", "--axis", "aa_count"], out));
    ok(&kvlink(&["threshold"], out));
    ok(&kvlink(&["jmsra", "--agents", "6", "--seed", "3"], out));
    ok(&kvlink(
        &[
            "sweep", "--axis", "agents", "--grid", "4,6", "--trials", "2", "--seed", "3",
        ],
        out,
    ));
    ok(&kvlink(
        &[
            "multiround",
            "--rounds",
            "4",
            "--policy",
            "jmsra",
            "--seed",
            "3",
        ],
        out,
    ));

    let expect = [
        (
            "ratio_aa_count.csv",
            "axis_name,axis_value,t_nl_s,t_kv_s,ratio,bottleneck_aa_nl,bottleneck_aa_kv",
        ),
        ("threshold_curve.csv", "rho,f_s"),
        ("threshold_surface.csv", "xi,alpha,rho_star"),
        ("jmsra_trace.csv", "direction,step,flipped_agent,J_s"),
        (
            "topology.csv",
            "agent_id,distance_m,tx_power_dbm,snr_db,mode",
        ),
        ("strategies.csv", "strategy,J_s,tau_s,prefill_s,kv_agents"),
        (
            "sweep_agents.csv",
            "axis_name,axis_value,strategy,j_median_s,j_mean_s,trials",
        ),
        (
            "multiround_trace_jmsra.csv",
            "round,agent_id,active,mode,rho,prefill_s,decode_s,comm_s,theta,xi",
        ),
        (
            "ea_breakdown.csv",
            "policy,round,theta0,prefill_s,decode_s,total_s",
        ),
    ];
    for (file, cols) in expect {
        let path = out.join(file);
        assert_eq!(header(&path), cols, "{file}");
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'), "{file} uses LF endings");
        assert!(text.lines().count() > 1, "{file} has rows");

        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join(format!("{file}.json"))).unwrap())
                .unwrap();
        assert_eq!(side["tool"], "kvlink");
        assert_eq!(side["file"], file);
        assert!(side["config"].is_object());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["jmsra", "--agents", "8", "--c0-tflops", "5", "--seed", "11"];
    ok(&kvlink(&args, a.path()));
    ok(&kvlink(&args, b.path()));
    let margs = [
        "multiround",
        "--rounds",
        "6",
        "--policy",
        "jmsra",
        "--policy",
        "all_kv",
        "--seed",
        "2",
    ];
    ok(&kvlink(&margs, a.path()));
    ok(&kvlink(&margs, b.path()));
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for n in names {
        let x = fs::read(a.path().join(&n)).unwrap();
        let y = fs::read(b.path().join(&n)).unwrap();
        // The sidecar records the output directory, which differs between the two runs.
        if n.to_string_lossy().ends_with(".csv") {
            assert_eq!(x, y, "{n:?}");
        }
    }
}

#[test]
fn floats_round_trip() {
    let dir = TempDir::new().unwrap();
    ok(&kvlink(
        &["compare", "--axis", "snr", "--grid", "0.1,5.3"],
        dir.path(),
    ));
    let mut r = csv::Reader::from_path(dir.path().join("ratio_snr.csv")).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        let t_nl: f64 = rec[2].parse().unwrap();
        let t_kv: f64 = rec[3].parse().unwrap();
        let ratio: f64 = rec[4].parse().unwrap();
        assert_eq!(ratio, t_nl / t_kv);
    }
}

#[test]
fn config_file_drives_run() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{ "seed": 5, "agent_sweep": { "grid": [3.0], "trials": 1 } }"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = kvlink(&["run", "--config", cfg.to_str().unwrap()], &out);
    ok(&o);
    assert!(out.join("sweep_agents.csv").exists());
}

#[test]
fn exit_codes_are_distinct() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"seed\": 1, ").unwrap();
    let code = |o: Output| o.status.code().expect("exited");

    assert_eq!(
        code(kvlink(
            &["run", "--config", bad.to_str().unwrap()],
            dir.path()
        )),
        3
    );

    let two = dir.path().join("two.json");
    fs::write(&two, r#"{ "threshold": {}, "multiround": {} }"#).unwrap();
    assert_eq!(
        code(kvlink(
            &["run", "--config", two.to_str().unwrap()],
            dir.path()
        )),
        3
    );

    assert_eq!(
        code(kvlink(&["compare", "--preset", "gpt-9"], dir.path())),
        4
    );

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(code(kvlink(&["compare"], &blocker.join("sub"))), 5);

    assert_eq!(code(kvlink(&["jmsra"], dir.path())), 6);
    assert_eq!(
        code(kvlink(
            &["jmsra", "--agents", "0", "--seed", "1"],
            dir.path()
        )),
        6
    );
    assert_eq!(code(kvlink(&["compare", "--axis", "nope"], dir.path())), 2);
}

#[test]
fn diagnostics_are_one_line() {
    let dir = TempDir::new().unwrap();
    let o = kvlink(&["compare", "--preset", "gpt-9"], dir.path());
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("gpt-9"));
}
