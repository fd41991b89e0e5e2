//! Experiment configuration, run directories, manifests and plot data.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fronts::{
    fit_log_delay, fit_speed_with_log, level_position, match_profile, trace_level, FrontTrace,
    Orientation, Side,
};
use crate::phase::{run_cell_detailed, SweepCell, SweepRow, SweepSettings};
use crate::reactions::{build_blend, reference_field, HeterogeneousField, Reaction};
use crate::solver::{
    integrate_with, BoundaryCondition, Diagnostic, GrowPolicy, InitialDatum, Problem, RunOptions,
    Snapshot, Trajectory, DEFAULT_MARGIN, GROW_TRIGGER, UNDERSHOOT_CLAMP,
};
use crate::waves::bistable_front;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

/// Reaction block of a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionBlock {
    /// `f_m = k (1 - theta) u (1 - u)`, `f_b = k u (1 - u)(u - theta)`.
    Reference {
        k: f64,
        theta: f64,
    },
    Blend {
        left: Reaction,
        right: Reaction,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub x_lo: f64,
    pub x_hi: f64,
    #[serde(default = "default_dx")]
    pub dx: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub bc: BoundaryCondition,
    #[serde(default)]
    pub grow: GrowPolicy,
}

fn default_dx() -> f64 {
    0.1
}

fn default_dt() -> f64 {
    0.02
}

fn default_half_width() -> f64 {
    5.0
}

fn default_stride() -> usize {
    1
}

fn default_levels() -> Vec<f64> {
    vec![0.5]
}

/// Optional front analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    /// Speed-fit window; the last half of the run when absent.
    pub fit_window: Option<(f64, f64)>,
    #[serde(default)]
    pub left_log_term: f64,
    #[serde(default)]
    pub right_log_term: f64,
    /// Window of the `a t + b ln t + c` fit; skipped when absent.
    pub log_delay_window: Option<(f64, f64)>,
    pub frozen_a: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub reaction: ReactionBlock,
    pub c: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    /// Keep every `snapshot_stride`-th node in `snapshots.csv`.
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    pub domain: DomainBlock,
    pub initial: InitialDatum,
    pub analysis: Option<AnalysisBlock>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> Result<String> {
        Ok(sha256_hex(self.to_toml()?.as_bytes()))
    }

    fn check(&self) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        if !(self.snapshot_every > 0.0) {
            return Err(Error::Config("snapshot_every must be positive".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be at least 1".into()));
        }
        if let Some(a) = &self.analysis {
            if a.levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
                return Err(Error::Config("analysis levels must lie in (0,1)".into()));
            }
        }
        Ok(())
    }

    pub fn field(&self) -> Result<HeterogeneousField> {
        match &self.reaction {
            ReactionBlock::Reference { k, theta } => reference_field(*k, *theta, self.half_width),
            ReactionBlock::Blend { left, right } => {
                build_blend(left.clone(), right.clone(), self.half_width)
            }
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let d = &self.domain;
        let p = Problem::new(self.field()?, self.c, d.x_lo, d.x_hi)
            .with_steps(d.dx, d.dt)
            .with_bc(d.bc)
            .with_grow(d.grow);
        Ok(p)
    }

    /// A small runnable config: reference family, `theta = 0.3`, `c = 0`.
    pub fn example() -> Self {
        Self {
            reaction: ReactionBlock::Reference { k: 1.0, theta: 0.3 },
            c: 0.0,
            half_width: 5.0,
            t_end: 20.0,
            snapshot_every: 1.0,
            snapshot_stride: 1,
            domain: DomainBlock {
                x_lo: -40.0,
                x_hi: 40.0,
                dx: 0.1,
                dt: 0.02,
                bc: BoundaryCondition::Neumann,
                grow: GrowPolicy::ExpandNearEdge {
                    margin: DEFAULT_MARGIN,
                },
            },
            initial: InitialDatum::plateau(0.9, 10.0, 0.0, 2.0),
            analysis: None,
        }
    }
}

/// Parses `kind:key=value,...`, e.g. `kpp:r=0.7` or `cubic_bistable:k=1,theta=0.3`.
pub fn parse_reaction_spec(spec: &str) -> Result<Reaction> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = BTreeMap::new();
    for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("reaction parameter '{kv}' is not key=value")))?;
        let v = f64::from_str(v.trim())
            .map_err(|_| Error::Config(format!("reaction parameter '{kv}' is not a number")))?;
        params.insert(k.trim().to_string(), v);
    }
    let mut take = |name: &str| {
        params
            .remove(name)
            .ok_or_else(|| Error::Config(format!("reaction '{kind}' needs parameter '{name}'")))
    };
    let reaction = match kind.trim() {
        "kpp" => Reaction::Kpp { r: take("r")? },
        "cubic_bistable" | "bistable" => Reaction::CubicBistable {
            k: take("k")?,
            theta: take("theta")?,
        },
        "modified" => {
            let (k, theta, eps) = (take("k")?, take("theta")?, take("eps")?);
            crate::reactions::build_modified(k, theta, eps)?
        }
        "inert" => Reaction::Inert,
        other => return Err(Error::Config(format!("unknown reaction kind '{other}'"))),
    };
    if let Some(extra) = params.keys().next() {
        return Err(Error::Config(format!(
            "unknown reaction parameter '{extra}' for '{kind}'"
        )));
    }
    reaction.validate()?;
    Ok(reaction)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub version: String,
    pub files: Vec<FileEntry>,
    pub wall_clock_s: f64,
    pub warnings: Vec<String>,
}

impl RunManifest {
    /// Equality ignoring the wall clock.
    pub fn same_outputs(&self, other: &RunManifest) -> bool {
        self.config_digest == other.config_digest
            && self.version == other.version
            && self.files == other.files
            && self.warnings == other.warnings
    }
}

/// Scheme constants recorded in `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeInfo {
    pub name: String,
    pub grow_trigger: f64,
    pub undershoot_clamp: f64,
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub scheme: SchemeInfo,
    /// Node spacing of `snapshots.csv`.
    pub output_dx: f64,
    pub frame_speed: f64,
    pub u0_sup: f64,
    pub t_end: f64,
    pub steps: usize,
    pub stopped_early: bool,
    pub snapshots: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// Writes a file and records its checksum.
struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            name: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn snapshots_csv(traj: &Trajectory, stride: usize) -> Result<Vec<u8>> {
    csv_bytes(&["t", "x", "u"], |w| {
        for s in &traj.snapshots {
            for i in (0..s.values.len()).step_by(stride) {
                w.write_record([
                    format!("{}", s.t),
                    format!("{}", s.x(i, traj.dx)),
                    format!("{}", s.values[i]),
                ])?;
            }
        }
        Ok(())
    })
}

fn diagnostics_csv(d: &[Diagnostic]) -> Result<Vec<u8>> {
    csv_bytes(&["t", "max_u", "mass"], |w| {
        for x in d {
            w.write_record([
                format!("{}", x.t),
                format!("{}", x.max_u),
                format!("{}", x.mass),
            ])?;
        }
        Ok(())
    })
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Left => "left",
        Side::Right => "right",
    }
}

fn fronts_csv(traces: &[FrontTrace]) -> Result<Vec<u8>> {
    csv_bytes(&["level", "side", "t", "position"], |w| {
        for tr in traces {
            for (t, p) in tr.times.iter().zip(&tr.positions) {
                w.write_record([
                    format!("{}", tr.level),
                    side_name(tr.side).into(),
                    format!("{t}"),
                    fmt_opt(*p),
                ])?;
            }
        }
        Ok(())
    })
}

fn fits_csv(traj: &Trajectory, a: &AnalysisBlock) -> Result<Vec<u8>> {
    let window = a.fit_window.unwrap_or((0.5 * traj.t_end, traj.t_end));
    csv_bytes(
        &[
            "level",
            "side",
            "fit",
            "window_lo",
            "window_hi",
            "a",
            "b",
            "c0",
            "stderr_or_rms",
            "samples",
            "status",
        ],
        |w| {
            for tr in &traj.traces {
                let log_term = match tr.side {
                    Side::Left => a.left_log_term,
                    Side::Right => a.right_log_term,
                };
                let lv = format!("{}", tr.level);
                let sd = side_name(tr.side).to_string();
                match fit_speed_with_log(tr, window, log_term) {
                    Ok(f) => w.write_record([
                        lv.clone(),
                        sd.clone(),
                        "speed".into(),
                        format!("{}", window.0),
                        format!("{}", window.1),
                        format!("{}", f.speed),
                        format!("{}", f.log_term),
                        format!("{}", f.intercept),
                        format!("{}", f.stderr),
                        format!("{}", f.samples),
                        "ok".into(),
                    ])?,
                    Err(e) => w.write_record([
                        lv.clone(),
                        sd.clone(),
                        "speed".into(),
                        format!("{}", window.0),
                        format!("{}", window.1),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        e.to_string(),
                    ])?,
                }
                if let Some(lw) = a.log_delay_window {
                    let rec = match fit_log_delay(tr, lw, a.frozen_a) {
                        Ok(f) => {
                            let (a_, b_, c_, rms) = match f.frozen {
                                Some(z) => (z.a, z.b, z.c0, z.rms),
                                None => (f.a, f.b, f.c0, f.rms),
                            };
                            [
                                format!("{a_}"),
                                format!("{b_}"),
                                format!("{c_}"),
                                format!("{rms}"),
                                format!("{}", f.samples),
                                "ok".to_string(),
                            ]
                        }
                        Err(e) => [
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            e.to_string(),
                        ],
                    };
                    let kind = if a.frozen_a.is_some() {
                        "log_delay_frozen"
                    } else {
                        "log_delay"
                    };
                    let mut row = vec![
                        lv.clone(),
                        sd.clone(),
                        kind.into(),
                        format!("{}", lw.0),
                        format!("{}", lw.1),
                    ];
                    row.extend(rec);
                    w.write_record(row)?;
                }
            }
            Ok(())
        },
    )
}

fn events_log(traj: &Trajectory, error: Option<&Error>) -> Vec<u8> {
    let mut s = String::new();
    for e in &traj.events {
        s.push_str(&format!("t={} {} {}\n", e.t, e.kind, e.detail));
    }
    for w in &traj.warnings {
        s.push_str(&format!("warning {w}\n"));
    }
    if let Some(e) = error {
        s.push_str(&format!("error {e}\n"));
    }
    s.into_bytes()
}

/// Runs a config and writes its directory. The manifest is written last, so a run
/// directory without one is incomplete.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let clock = Instant::now();
    cfg.check()?;
    let problem = cfg.problem()?;
    fs::create_dir_all(out_dir)?;
    let _ = fs::remove_file(out_dir.join(MANIFEST_FILE));
    let levels = cfg
        .analysis
        .as_ref()
        .map_or_else(default_levels, |a| a.levels.clone());
    let opts = RunOptions::new(cfg.snapshot_every).levels(&levels);
    let traj = match integrate_with(&problem, &cfg.initial, cfg.t_end, &opts, |_| false) {
        Ok(t) => t,
        Err(e) => {
            let mut f = fs::File::create(out_dir.join("events.log"))?;
            writeln!(f, "error {e}")?;
            return Err(e);
        }
    };
    let mut out = Outputs {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    out.put("snapshots.csv", &snapshots_csv(&traj, cfg.snapshot_stride)?)?;
    out.put("diagnostics.csv", &diagnostics_csv(&traj.diagnostics)?)?;
    let meta = RunMeta {
        version: VERSION.into(),
        config: cfg.clone(),
        problem: problem.clone(),
        scheme: SchemeInfo {
            name: "imex: implicit diffusion and centered advection, explicit reaction".into(),
            grow_trigger: GROW_TRIGGER,
            undershoot_clamp: UNDERSHOOT_CLAMP,
        },
        output_dx: traj.dx * cfg.snapshot_stride as f64,
        frame_speed: traj.frame_speed,
        u0_sup: traj.u0_sup,
        t_end: traj.t_end,
        steps: traj.steps,
        stopped_early: traj.stopped_early,
        snapshots: traj.snapshots.len(),
    };
    out.put("meta.json", serde_json::to_string_pretty(&meta)?.as_bytes())?;
    out.put("events.log", &events_log(&traj, None))?;
    if let Some(a) = &cfg.analysis {
        out.put("fronts.csv", &fronts_csv(&traj.traces)?)?;
        out.put("fits.csv", &fits_csv(&traj, a)?)?;
    }
    let manifest = RunManifest {
        config_digest: cfg.digest()?,
        version: VERSION.into(),
        files: out.files,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        warnings: traj.warnings.clone(),
    };
    fs::write(
        out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Reads the manifest and checks every listed checksum.
pub fn verify_run_dir(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} has no manifest; the run is incomplete",
            dir.display()
        )));
    }
    let m: RunManifest = serde_json::from_slice(&fs::read(path)?)?;
    for f in &m.files {
        let bytes = fs::read(dir.join(&f.name))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(Error::Config(format!("checksum mismatch for {}", f.name)));
        }
    }
    Ok(m)
}

pub fn load_meta(dir: &Path) -> Result<RunMeta> {
    let path = dir.join("meta.json");
    let bytes = fs::read(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn parse_f64(s: &str) -> Result<f64> {
    f64::from_str(s).map_err(|_| Error::Config(format!("bad number '{s}' in run directory")))
}

/// Rebuilds a trajectory from a completed run directory. Traces come from `fronts.csv`
/// when present, otherwise from the stored snapshots at level 0.5.
pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    verify_run_dir(dir)?;
    let meta = load_meta(dir)?;
    let dx = meta.output_dx;
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut rd = csv::Reader::from_path(dir.join("snapshots.csv"))?;
    for rec in rd.records() {
        let rec = rec?;
        let (t, x, u) = (
            parse_f64(&rec[0])?,
            parse_f64(&rec[1])?,
            parse_f64(&rec[2])?,
        );
        match snapshots.last_mut() {
            Some(s) if s.t == t => s.values.push(u),
            _ => snapshots.push(Snapshot {
                t,
                x_lo: x,
                values: vec![u],
            }),
        }
    }
    if snapshots.is_empty() {
        return Err(Error::Config("run directory has no snapshots".into()));
    }
    let mut diagnostics = Vec::new();
    let mut rd = csv::Reader::from_path(dir.join("diagnostics.csv"))?;
    for rec in rd.records() {
        let rec = rec?;
        diagnostics.push(Diagnostic {
            t: parse_f64(&rec[0])?,
            max_u: parse_f64(&rec[1])?,
            mass: parse_f64(&rec[2])?,
        });
    }
    let mut traj = Trajectory {
        problem: meta.problem.clone(),
        dx,
        snapshots,
        warnings: Vec::new(),
        events: Vec::new(),
        traces: Vec::new(),
        diagnostics,
        frame_speed: meta.frame_speed,
        u0_sup: meta.u0_sup,
        t_end: meta.t_end,
        stopped_early: meta.stopped_early,
        steps: meta.steps,
    };
    let fronts = dir.join("fronts.csv");
    if fronts.exists() {
        let mut rd = csv::Reader::from_path(fronts)?;
        for rec in rd.records() {
            let rec = rec?;
            let level = parse_f64(&rec[0])?;
            let side = Side::from_str(&rec[1])?;
            let t = parse_f64(&rec[2])?;
            let p = if rec[3].is_empty() {
                None
            } else {
                Some(parse_f64(&rec[3])?)
            };
            match traj
                .traces
                .iter_mut()
                .find(|tr| tr.level == level && tr.side == side)
            {
                Some(tr) => tr.push(t, p),
                None => {
                    let mut tr = FrontTrace::new(level, side);
                    tr.push(t, p);
                    traj.traces.push(tr);
                }
            }
        }
    } else {
        for side in [Side::Left, Side::Right] {
            let tr = trace_level(&traj, 0.5, side)?;
            traj.traces.push(tr);
        }
    }
    Ok(traj)
}

/// Kinds of plot data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    SpacetimeHeat,
    Trace,
    ProfileOverlay,
}

impl FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spacetime_heat" => Ok(PlotKind::SpacetimeHeat),
            "trace" => Ok(PlotKind::Trace),
            "profile_overlay" => Ok(PlotKind::ProfileOverlay),
            other => Err(Error::Config(format!(
                "unknown plot kind '{other}' (expected spacetime_heat, trace or profile_overlay)"
            ))),
        }
    }
}

/// Options of [`emit_plot_data`].
#[derive(Clone, Debug)]
pub struct PlotOptions {
    pub level: f64,
    pub side: Side,
    /// Time of the profile overlay; the last snapshot when absent.
    pub t: Option<f64>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            level: 0.5,
            side: Side::Right,
            t: None,
        }
    }
}

/// Gnuplot-ready CSV. `spacetime_heat` gives `(t, x, u)` with a blank line between
/// snapshots, `trace` gives `(t, position)`, `profile_overlay` gives `(x, u, phi_shifted)`
/// with the bistable wave fitted on `[L + 5, E+_0.01(t)]`.
pub fn emit_plot_data<W: Write>(
    dir: &Path,
    kind: PlotKind,
    opts: &PlotOptions,
    mut w: W,
) -> Result<()> {
    let traj = load_trajectory(dir)?;
    match kind {
        PlotKind::SpacetimeHeat => {
            writeln!(w, "t,x,u")?;
            for s in &traj.snapshots {
                for (i, u) in s.values.iter().enumerate() {
                    writeln!(w, "{},{},{}", s.t, s.x(i, traj.dx), u)?;
                }
                writeln!(w)?;
            }
        }
        PlotKind::Trace => {
            let tr = match traj.trace(opts.level, opts.side) {
                Some(tr) => tr.clone(),
                None => trace_level(&traj, opts.level, opts.side)?,
            };
            writeln!(w, "t,position")?;
            for (t, p) in tr.times.iter().zip(&tr.positions) {
                if let Some(p) = p {
                    writeln!(w, "{t},{p}")?;
                }
            }
        }
        PlotKind::ProfileOverlay => {
            let t = opts.t.unwrap_or(traj.t_end);
            let snap = traj.nearest(t).clone();
            let field = &traj.problem.field;
            let phi = bistable_front(&field.right, 1e-8)?;
            let l = field.half_width;
            let e_plus = level_position(snap.x_lo, traj.dx, &snap.values, 0.01, Side::Right)
                .ok_or_else(|| Error::Inconclusive("no 0.01 crossing on the right".into()))?;
            let sigma = phi.speed - traj.problem.c;
            let m = match_profile(
                &traj,
                snap.t,
                &phi,
                sigma,
                (l + 5.0, e_plus),
                Orientation::Direct,
            )?;
            writeln!(w, "x,u,phi_shifted")?;
            for (i, u) in snap.values.iter().enumerate() {
                let x = snap.x(i, traj.dx);
                let p = phi.eval(x - sigma * snap.t + m.shift);
                writeln!(w, "{x},{u},{p}")?;
            }
        }
    }
    Ok(())
}

/// Sweep input: shared settings plus explicit cells and/or a `c x theta x k` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub settings: SweepSettings,
    #[serde(default)]
    pub cells: Vec<SweepCell>,
    pub grid: Option<SweepGrid>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub c: Vec<f64>,
    pub theta: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: Vec<f64>,
    pub datum: Option<InitialDatum>,
}

fn default_k() -> Vec<f64> {
    vec![1.0]
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Explicit cells first, then the grid in `theta`, `k`, `c` order.
    pub fn all_cells(&self) -> Vec<SweepCell> {
        let mut cells = self.cells.clone();
        if let Some(g) = &self.grid {
            for &theta in &g.theta {
                for &k in &g.k {
                    for &c in &g.c {
                        let mut cell = SweepCell::standard(c, theta, k);
                        if let Some(d) = &g.datum {
                            cell.datum = d.clone();
                        }
                        cells.push(cell);
                    }
                }
            }
        }
        cells
    }
}

/// Runs a sweep with one directory per cell (`cell_NNN/` holding `row.json`,
/// `fronts.csv` and `diagnostics.csv`) and the merged CSV `sweep.csv`.
pub fn run_sweep_dirs(
    cells: &[SweepCell],
    st: &SweepSettings,
    jobs: usize,
    out_dir: &Path,
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let rows: Vec<Result<SweepRow>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| {
                let (row, traj) = run_cell_detailed(cell, st);
                let dir = out_dir.join(format!("cell_{i:03}"));
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("cell.json"), serde_json::to_string_pretty(cell)?)?;
                fs::write(dir.join("row.json"), serde_json::to_string_pretty(&row)?)?;
                if let Some(t) = traj {
                    fs::write(dir.join("fronts.csv"), fronts_csv(&t.traces)?)?;
                    fs::write(
                        dir.join("diagnostics.csv"),
                        diagnostics_csv(&t.diagnostics)?,
                    )?;
                }
                Ok(row)
            })
            .collect()
    });
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_>>()?;
    crate::phase::write_sweep_file(&rows, &out_dir.join("sweep.csv"))?;
    Ok(rows)
}
