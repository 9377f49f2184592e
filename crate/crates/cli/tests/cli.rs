use std::path::PathBuf;
use std::process::{Command, Output};

use qad_cli::{RunReport, SweepRow};

fn qad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn run_x_cos_log_x() {
    let o = qad(&[
        "run",
        "--expr",
        "x*cos(log(x))",
        "--x0",
        "2",
        "--int-bits",
        "8",
        "--frac-bits",
        "32",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: RunReport = serde_json::from_str(&stdout(&o)).unwrap();
    let want = 2f64.ln().cos() - 2f64.ln().sin();
    assert!((r.result.derivative - want).abs() <= r.error_analysis.bound_deriv);
    assert!((r.result.derivative - 0.130278).abs() < 1e-6);
    assert_eq!(r.oracle.derivative, want);
    assert_eq!(r.error_analysis.cost_bound.total, 21);
}

#[test]
fn run_identity_uses_defaults() {
    let o = qad(&["run", "--expr", "x", "--x0", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("Q(8,24)"), "{out}");
    assert!(out.contains("reset hybrid"), "{out}");

    let o = qad(&["run", "--expr", "x", "--x0", "5", "--json"]);
    let r: RunReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((r.result.value, r.result.derivative), (5.0, 1.0));
}

#[test]
fn exit_codes_follow_error_kind() {
    let o = qad(&["run", "--expr", "log(x)", "--x0", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("log"), "{}", stderr(&o));
    assert!(stderr(&o).contains("s_2"), "{}", stderr(&o));

    let o = qad(&["run", "--expr", "sin(", "--x0", "1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = qad(&["run", "--expr", "exp(x)", "--x0", "6"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("exp"));

    let o = qad(&[
        "run",
        "--expr",
        "x",
        "--x0",
        "1",
        "--reset-mode",
        "teleport",
    ]);
    assert_eq!(o.status.code(), Some(qad_cli::EXIT_USAGE));
}

#[test]
fn graph_prints_dot() {
    let o = qad(&["graph", "--expr", "x*cos(log(x))"]);
    assert_eq!(o.status.code(), Some(0));
    let dot = stdout(&o);
    assert_eq!(dot.matches("[label=").count(), 4);
    for edge in ["n0 -> n1", "n1 -> n2", "n2 -> n3", "n0 -> n3"] {
        assert!(dot.contains(edge), "{dot}");
    }
    assert!(dot.contains("s_3 ≡ cos(s_2)"));

    let o = qad(&["graph", "--expr", "x"]);
    assert_eq!(stdout(&o).matches("[label=").count(), 1);

    let o = qad(&["graph", "--expr", "sin("]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("position 4"), "{}", stderr(&o));
}

#[test]
fn sweep_envelope_is_non_increasing() {
    let o = qad(&[
        "sweep",
        "--expr",
        "x*cos(log(x))",
        "--x0",
        "2",
        "--sweep-frac-bits",
        "32,8,24,16",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<SweepRow> = serde_json::from_str(&stdout(&o)).unwrap();
    let bits: Vec<u32> = rows.iter().map(|r| r.frac_bits).collect();
    assert_eq!(bits, vec![8, 16, 24, 32]);
    for w in rows.windows(2) {
        assert!(w[1].bound_deriv.unwrap() <= w[0].bound_deriv.unwrap());
        assert!(w[1].observed_deriv_error.unwrap() <= w[0].observed_deriv_error.unwrap());
    }
    for r in &rows {
        assert!(r.observed_deriv_error.unwrap() <= r.bound_deriv.unwrap());
    }
}

#[test]
fn singleton_sweep_matches_run() {
    let base = ["--expr", "sin(x)*exp(x)", "--x0", "0.3", "--json"];
    let run = qad(&[&["run"], &base[..], &["--frac-bits", "20"]].concat());
    let sweep = qad(&[&["sweep"], &base[..], &["--sweep-frac-bits", "20"]].concat());
    let r: RunReport = serde_json::from_str(&stdout(&run)).unwrap();
    let rows: Vec<SweepRow> = serde_json::from_str(&stdout(&sweep)).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row.observed_value_error, Some(r.observed.value_error));
    assert_eq!(row.observed_deriv_error, Some(r.observed.derivative_error));
    assert_eq!(row.bound_value, Some(r.error_analysis.bound_value));
    assert_eq!(row.bound_deriv, Some(r.error_analysis.bound_deriv));
    assert_eq!(row.gates, Some(r.result.gate_counts.values().sum()));
}

#[test]
fn failed_sweep_row_leaves_others_intact() {
    // At b = 8 the input floors to -128 and its negation overflows.
    let o = qad(&[
        "sweep",
        "--expr",
        "-x",
        "--x0",
        "-127.999",
        "--sweep-frac-bits",
        "8,16",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let rows: Vec<SweepRow> = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(!rows[0].ok);
    assert!(rows[0].error.as_deref().unwrap().contains("minus"));
    assert!(rows[1].ok);
    assert!(rows[1].bound_deriv.is_some());
}

#[test]
fn output_and_trace_are_deterministic() {
    let args = |path: &str| {
        vec![
            "run".to_string(),
            "--expr".into(),
            "x*x*sin(log(x))".into(),
            "--x0".into(),
            "1.7".into(),
            "--reset-mode".into(),
            "swap".into(),
            "--json".into(),
            "--trace".into(),
            path.into(),
        ]
    };
    let (p1, p2) = (scratch("trace_a.jsonl"), scratch("trace_b.jsonl"));
    let a1 = args(p1.to_str().unwrap());
    let a2 = args(p2.to_str().unwrap());
    let o1 = qad(&a1.iter().map(String::as_str).collect::<Vec<_>>());
    let o2 = qad(&a2.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o1.status.code(), Some(0), "{}", stderr(&o1));
    assert_eq!(o1.stdout, o2.stdout);
    let t1 = std::fs::read(&p1).unwrap();
    assert_eq!(t1, std::fs::read(&p2).unwrap());

    let r: RunReport = serde_json::from_slice(&o1.stdout).unwrap();
    let lines = t1.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count() as u64;
    assert_eq!(lines, r.result.gate_counts.values().sum::<u64>());
    for line in String::from_utf8(t1).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("kind").is_some(), "{line}");
    }
}

#[test]
fn json_report_round_trips() {
    let o = qad(&["run", "--expr", "atan(x) + 1/x", "--x0", "0.8", "--json"]);
    let text = stdout(&o);
    let r: RunReport = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&r).unwrap() + "\n";
    assert_eq!(again, text);
}

#[test]
fn sweep_writes_one_trace_per_row() {
    let p = scratch("sweep.jsonl");
    let o = qad(&[
        "sweep",
        "--expr",
        "cos(x)",
        "--x0",
        "0.4",
        "--sweep-frac-bits",
        "8,12",
        "--trace",
        p.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(scratch("sweep.b8.jsonl").exists());
    assert!(scratch("sweep.b12.jsonl").exists());
}
