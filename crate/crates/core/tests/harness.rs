use std::fs;

use frontlab::harness::{load_meta, run_sweep_dirs, verify_run_dir, PlotOptions, SweepConfig};
use frontlab::*;

fn short_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::example();
    cfg.t_end = 8.0;
    cfg.snapshot_every = 2.0;
    cfg
}

#[test]
fn run_then_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config();
    let manifest = run(&cfg, dir.path()).unwrap();
    assert_eq!(manifest.config_digest, cfg.digest().unwrap());
    assert!(manifest.files.iter().all(|f| f.name != "manifest.json"));

    let direct = integrate(
        &cfg.problem().unwrap(),
        &cfg.initial,
        cfg.t_end,
        cfg.snapshot_every,
    )
    .unwrap();
    let loaded = load_trajectory(dir.path()).unwrap();
    assert_eq!(loaded.snapshots.len(), direct.snapshots.len());
    for (a, b) in loaded.snapshots.iter().zip(&direct.snapshots) {
        assert!((a.t - b.t).abs() < 1e-9);
        assert_eq!(a.values.len(), b.values.len());
        let gap = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-12, "t = {}: {gap:e}", a.t);
    }
    let meta = load_meta(dir.path()).unwrap();
    assert_eq!(meta.config, cfg);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short_config();
    cfg.analysis = Some(toml::from_str("levels = [0.3, 0.5]").unwrap());
    let a = run(&cfg, &dir.path().join("a")).unwrap();
    let b = run(&cfg, &dir.path().join("b")).unwrap();
    assert!(a.same_outputs(&b));
    for f in &a.files {
        let x = fs::read(dir.path().join("a").join(&f.name)).unwrap();
        let y = fs::read(dir.path().join("b").join(&f.name)).unwrap();
        assert_eq!(x, y, "{}", f.name);
    }
}

#[test]
fn incomplete_or_tampered_runs_are_detected() {
    let dir = tempfile::tempdir().unwrap();
    run(&short_config(), dir.path()).unwrap();
    assert!(verify_run_dir(dir.path()).is_ok());

    let snaps = dir.path().join("snapshots.csv");
    let mut text = fs::read_to_string(&snaps).unwrap();
    text.push_str("99,0,0\n");
    fs::write(&snaps, text).unwrap();
    assert!(verify_run_dir(dir.path()).is_err());

    fs::remove_file(dir.path().join("manifest.json")).unwrap();
    let err = verify_run_dir(dir.path()).unwrap_err();
    assert!(err.to_string().contains("incomplete"));
    assert!(load_trajectory(dir.path()).is_err());
}

#[test]
fn plot_data_kinds() {
    let dir = tempfile::tempdir().unwrap();
    run(&short_config(), dir.path()).unwrap();

    let mut heat = Vec::new();
    emit_plot_data(
        dir.path(),
        PlotKind::SpacetimeHeat,
        &PlotOptions::default(),
        &mut heat,
    )
    .unwrap();
    let heat = String::from_utf8(heat).unwrap();
    assert!(heat.contains("\n\n"));

    let mut trace = Vec::new();
    emit_plot_data(
        dir.path(),
        PlotKind::Trace,
        &PlotOptions::default(),
        &mut trace,
    )
    .unwrap();
    let trace = String::from_utf8(trace).unwrap();
    assert!(trace.starts_with("t,position\n"));
    assert!(trace.lines().count() > 2);

    let mut overlay = Vec::new();
    emit_plot_data(
        dir.path(),
        PlotKind::ProfileOverlay,
        &PlotOptions::default(),
        &mut overlay,
    )
    .unwrap();
    let overlay = String::from_utf8(overlay).unwrap();
    let header = overlay.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header.split(',').count(), 3);
}

#[test]
fn malformed_configs_name_the_problem() {
    let mut text = short_config().to_toml().unwrap();
    assert_eq!(ExperimentConfig::parse(&text).unwrap(), short_config());
    text = text.replace("t_end", "t_stop");
    let err = ExperimentConfig::parse(&text).unwrap_err();
    assert!(err.to_string().contains("t_stop"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn sweep_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig::parse(
        "[settings]\nt_end = 100.0\n\n[grid]\nc = [-0.7]\ntheta = [0.95]\n\n[grid.datum]\nkind = \"plateau_bump\"\nheight = 0.9\nwidth = 10.0\ncenter = 0.0\nshoulder = 2.0\n",
    )
    .unwrap();
    let cells = cfg.all_cells();
    assert_eq!(cells.len(), 1);
    let rows = run_sweep_dirs(&cells, &cfg.settings, 2, dir.path()).unwrap();
    assert_eq!(rows[0].agreement, Agreement::Agree);
    for f in ["cell.json", "row.json", "fronts.csv", "diagnostics.csv"] {
        assert!(dir.path().join("cell_000").join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn shipped_configs_parse() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let sweep = SweepConfig::load(&root.join("acceptance_sweep.toml")).unwrap();
    assert_eq!(sweep.all_cells(), acceptance_cells());
    assert_eq!(sweep.settings, SweepSettings::default());
    let single = ExperimentConfig::load(&root.join("blocking.toml")).unwrap();
    assert_eq!(single.c, 1.0);
}
