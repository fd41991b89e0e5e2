use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
c = 1.0
t_end = 60.0
snapshot_every = 0.5

[reaction]
kind = "reference"
k = 1.0
theta = 0.3

[domain]
x_lo = -40.0
x_hi = 40.0

[initial]
kind = "plateau_bump"
height = 0.9
width = 10.0
center = 0.0
shoulder = 2.0

[analysis]
levels = [0.5]
"#;

fn front_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_front-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_analyse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let run = dir.path().join("run");
    let out = front_lab(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out-dir",
        s(&run),
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "snapshots.csv",
        "meta.json",
        "events.log",
        "manifest.json",
        "fronts.csv",
        "fits.csv",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }

    let fronts = dir.path().join("left.csv");
    let out = front_lab(&[
        "fronts",
        "--traj",
        s(&run),
        "--side",
        "left",
        "--out",
        s(&fronts),
        "--fit",
        "speed",
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&fronts).unwrap();
    assert!(text.starts_with("t,position\n"));
    assert!(text
        .lines()
        .last()
        .unwrap()
        .starts_with("# fit=speed,speed=-"));

    let report = dir.path().join("classify.json");
    let out = front_lab(&["classify", "--traj", s(&run), "--out", s(&report)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["outcome"]["kind"], "blocking_right");

    let trace = dir.path().join("trace.csv");
    let out = front_lab(&[
        "plot-data",
        "--run",
        s(&run),
        "--kind",
        "trace",
        "--out",
        s(&trace),
    ]);
    assert!(out.status.success());
    assert!(fs::read_to_string(&trace)
        .unwrap()
        .starts_with("t,position\n"));

    let out = front_lab(&[
        "plot-data",
        "--run",
        s(&run),
        "--kind",
        "heatmap",
        "--out",
        s(&trace),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, CONFIG.replace("snapshot_every", "snapshot_period")).unwrap();
    let out = front_lab(&["simulate", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshot_period"));
}

#[test]
fn wave_header_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("wave.csv");
    let out = front_lab(&[
        "wave",
        "--reaction",
        "cubic_bistable:k=1,theta=0.3",
        "--out",
        s(&out_csv),
        "--quiet",
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&out_csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let speed: f64 = header
        .split(',')
        .next()
        .unwrap()
        .trim_start_matches("# speed=")
        .parse()
        .unwrap();
    assert!((speed - 0.5f64.sqrt() * 0.4).abs() < 1e-6);
    assert_eq!(lines.next(), Some("s,phi,residual"));

    let out = front_lab(&[
        "wave",
        "--reaction",
        "cubic_bistable:k=1,theta=0.3",
        "--speed",
        "1",
        "--out",
        s(&out_csv),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stationary_profile_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out_csv = dir.path().join("u.csv");
    let out = front_lab(&[
        "stationary",
        "--config",
        s(&cfg),
        "--out",
        s(&out_csv),
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with("# eta="));
    assert!(text.lines().nth(1) == Some("x,U,residual"));

    fs::write(&cfg, CONFIG.replace("c = 1.0", "c = 0.0")).unwrap();
    let out = front_lab(&[
        "stationary",
        "--config",
        s(&cfg),
        "--out",
        s(&out_csv),
        "--quiet",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "c below c_b is outside the blocking regime"
    );
}

#[test]
fn barrier_cases_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("static.json");
    let out = front_lab(&[
        "verify-barriers",
        "--case",
        "static",
        "--out",
        s(&rep),
        "--quiet",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .all(|q| q["worst_margin"].is_number()));

    let out = front_lab(&[
        "verify-barriers",
        "--case",
        "rightward-omega-tenth",
        "--out",
        s(&rep),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(4));

    let out = front_lab(&["verify-barriers", "--case", "sideways", "--out", s(&rep)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_cells_and_merged_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(
        &cfg,
        "[settings]\nt_end = 120.0\n\n[[cells]]\nc = -0.7\ntheta = 0.95\nk = 1.0\n\n[cells.datum]\nkind = \"plateau_bump\"\nheight = 0.9\nwidth = 10.0\ncenter = 0.0\nshoulder = 2.0\n",
    )
    .unwrap();
    let out = front_lab(&[
        "sweep",
        "--config",
        s(&cfg),
        "--out-dir",
        s(dir.path()),
        "--jobs",
        "1",
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("c,theta,k,r,c_m,c_b,predicted_kind,predicted_left,predicted_right,measured_kind,measured_left,measured_right,agreement")
    );
    assert!(lines
        .next()
        .unwrap()
        .ends_with("extinction,,,extinction,,,agree"));
    assert!(dir.path().join("cell_000").join("row.json").exists());
}
