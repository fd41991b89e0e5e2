//! Outcome prediction from the closed-form speed tables, classification of runs,
//! parameter sweeps and the conditional-propagation width threshold.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fronts::{fit_speed_with_log, level_position, Side, SpeedFit};
use crate::reactions::{build_cubic_bistable, build_kpp, reference_field};
use crate::solver::{
    integrate_with, BoundaryCondition, GrowPolicy, InitialDatum, Problem, RunOptions, Trajectory,
};
use crate::stationary::{semi_persistence_check, solve_blocking_profile};
use crate::waves::{bistable_front, kpp_min_speed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Extinction,
    BlockingRight,
    Propagation,
}

impl OutcomeKind {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::Extinction => "extinction",
            OutcomeKind::BlockingRight => "blocking_right",
            OutcomeKind::Propagation => "propagation",
        }
    }
}

/// Which side of a conditional cell a datum falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    LargeData,
    SmallData,
}

/// A table cell: outcome and asymptotic speeds (left speed counts leftward motion as positive).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Expectation {
    pub kind: OutcomeKind,
    pub left: Option<f64>,
    pub right: Option<f64>,
    /// The speed involves `c_m`, so a KPP logarithmic lag applies.
    pub left_kpp: bool,
    pub right_kpp: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Prediction {
    Definite {
        cell: &'static str,
        expect: Expectation,
    },
    /// Initial-data dependent: large data propagate, small data go extinct.
    Conditional {
        cell: &'static str,
        large: Expectation,
        small: Expectation,
    },
    /// `c_b = 0` and `c <= -c_m`.
    Open { cell: &'static str },
}

impl Prediction {
    pub fn cell(&self) -> &'static str {
        match self {
            Prediction::Definite { cell, .. }
            | Prediction::Conditional { cell, .. }
            | Prediction::Open { cell } => cell,
        }
    }

    pub fn expectation(&self, branch: Option<Branch>) -> Option<&Expectation> {
        match (self, branch) {
            (Prediction::Definite { expect, .. }, _) => Some(expect),
            (Prediction::Conditional { large, .. }, Some(Branch::LargeData)) => Some(large),
            (Prediction::Conditional { small, .. }, Some(Branch::SmallData)) => Some(small),
            _ => None,
        }
    }
}

fn extinct() -> Expectation {
    Expectation {
        kind: OutcomeKind::Extinction,
        left: None,
        right: None,
        left_kpp: false,
        right_kpp: false,
    }
}

pub fn predict(c: f64, c_m: f64, c_b: f64) -> Result<Prediction> {
    if !(c_m > 0.0) || !(c_m > c_b) {
        return Err(Error::InconsistentSpeeds { c_m, c_b });
    }
    if c > -c_m {
        let left = c_m + c;
        let right = (c_b - c).max(0.0).min(c_m - c);
        let (cell, kind) = if c >= c_m {
            ("c >= c_m: retreat", OutcomeKind::Propagation)
        } else if c > c_b {
            ("c_b < c < c_m: blocking", OutcomeKind::BlockingRight)
        } else if c == c_b {
            ("c = c_b: virtual blocking", OutcomeKind::Propagation)
        } else {
            ("-c_m < c < c_b: propagation", OutcomeKind::Propagation)
        };
        let right = if kind == OutcomeKind::BlockingRight {
            None
        } else {
            Some(right)
        };
        return Ok(Prediction::Definite {
            cell,
            expect: Expectation {
                kind,
                left: Some(left),
                right,
                left_kpp: true,
                right_kpp: c >= c_m,
            },
        });
    }
    if c_b > 0.0 {
        Ok(Prediction::Conditional {
            cell: "c <= -c_m, c_b > 0: conditional propagation",
            large: Expectation {
                kind: OutcomeKind::Propagation,
                left: Some(c_b + c),
                right: Some(c_b - c),
                left_kpp: false,
                right_kpp: false,
            },
            small: extinct(),
        })
    } else if c_b < 0.0 {
        Ok(Prediction::Definite {
            cell: "c <= -c_m, c_b < 0: extinction",
            expect: extinct(),
        })
    } else {
        Ok(Prediction::Open {
            cell: "c <= -c_m, c_b = 0: open",
        })
    }
}

/// Knobs of [`classify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub eps_ext: f64,
    pub blocking_variation: f64,
    /// Below this sup, a still-decaying run is undecided rather than persistent.
    pub undecided_ceiling: f64,
    pub level: f64,
    /// Fraction of the run (from the end) used for speed fits and variation.
    pub late_fraction: f64,
    /// `ln t` coefficients removed from the left/right traces before the fits.
    pub left_log_term: f64,
    pub right_log_term: f64,
    /// Window for the reported local minimum and the distance to the blocking profile.
    pub local_window: (f64, f64),
    /// A run settles when the right-trace drift over the last quarter is at most this
    /// fraction of the drift over the quarter before.
    pub settle_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            eps_ext: 1e-3,
            blocking_variation: 1.0,
            undecided_ceiling: 0.1,
            level: 0.5,
            late_fraction: 0.5,
            left_log_term: 0.0,
            right_log_term: 0.0,
            local_window: (-20.0, 20.0),
            settle_ratio: 0.5,
        }
    }
}

impl Thresholds {
    /// Frozen `3 / c_m` lags on the sides whose expected speed involves `c_m`.
    pub fn with_kpp_lags(mut self, expect: &Expectation, c_m: f64) -> Self {
        let lag = 3.0 / c_m;
        self.left_log_term = if expect.left_kpp { lag } else { 0.0 };
        self.right_log_term = if expect.right_kpp { -lag } else { 0.0 };
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub left_speed: Option<SpeedFit>,
    pub right_speed: Option<SpeedFit>,
    pub final_max: f64,
    pub right_variation: Option<f64>,
    pub semi_persistent: bool,
    pub right_settling: bool,
    /// `min u(T)` on the local window.
    pub local_min: f64,
    pub max_u_trace: Vec<(f64, f64)>,
    pub mass_trace: Vec<(f64, f64)>,
}

impl Outcome {
    /// Leftward speed (positive when the left edge moves left).
    pub fn measured_left(&self) -> Option<f64> {
        self.left_speed.map(|f| -f.speed)
    }

    pub fn measured_right(&self) -> Option<f64> {
        self.right_speed.map(|f| f.speed)
    }
}

fn trace_of(traj: &Trajectory, level: f64, side: Side) -> crate::fronts::FrontTrace {
    match traj.trace(level, side) {
        Some(t) => t.clone(),
        None => crate::fronts::trace_level(traj, level, side).expect("valid level"),
    }
}

/// Classifies a finished run. Extinction when `max u(T) < eps_ext`; blocking when the
/// right trace varies by less than `blocking_variation` over the late window, the run is
/// semi-persistent and the right trace is settling; propagation otherwise, with both
/// speed fits required. A creeping right edge with zero speed is propagation.
pub fn classify(traj: &Trajectory, th: &Thresholds) -> Result<Outcome> {
    let last = traj.last();
    let final_max = last.max();
    let max_u_trace: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t, d.max_u)).collect();
    let mass_trace: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t, d.mass)).collect();
    let t_end = traj.t_end;
    let dx = traj.dx;
    let mut out = Outcome {
        kind: OutcomeKind::Extinction,
        left_speed: None,
        right_speed: None,
        final_max,
        right_variation: None,
        semi_persistent: false,
        right_settling: false,
        local_min: 0.0,
        max_u_trace,
        mass_trace,
    };
    if final_max < th.eps_ext {
        return Ok(out);
    }
    let decaying = {
        let tail: Vec<f64> = out
            .max_u_trace
            .iter()
            .filter(|(t, _)| *t >= 0.9 * t_end)
            .map(|p| p.1)
            .collect();
        tail.len() >= 2 && tail.last() < tail.first()
    };
    if final_max < th.undecided_ceiling && decaying {
        return Err(Error::Undecided(format!(
            "max u(T) = {final_max:e} is between {} and {} and still decaying; extend T",
            th.eps_ext, th.undecided_ceiling
        )));
    }
    let window = ((1.0 - th.late_fraction) * t_end, t_end);
    let right = trace_of(traj, th.level, Side::Right);
    let left = trace_of(traj, th.level, Side::Left);
    let (_, rx) = right.samples_in(window.0, window.1);
    out.right_variation = if rx.is_empty() {
        None
    } else {
        Some(
            rx.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - rx.iter().cloned().fold(f64::INFINITY, f64::min),
        )
    };
    let l = traj.problem.field.half_width;
    let anchor = traj.nearest(0.75 * t_end);
    let x_bar = level_position(anchor.x_lo, dx, &anchor.values, th.level, Side::Right)
        .map_or(l, |x| x.min(l));
    out.semi_persistent = semi_persistence_check(traj, x_bar);
    out.local_min = (0..last.values.len())
        .filter(|&i| {
            let x = last.x(i, dx);
            x >= th.local_window.0 && x <= th.local_window.1
        })
        .map(|i| last.values[i])
        .fold(f64::INFINITY, f64::min);
    let settling = {
        let at = |t: f64| right.at(t);
        match (at(0.5 * t_end), at(0.75 * t_end), at(t_end)) {
            (Some(a), Some(b), Some(c)) => {
                let (d1, d2) = ((b - a).abs(), (c - b).abs());
                d2 < 1e-6 || d2 <= th.settle_ratio * d1
            }
            _ => false,
        }
    };
    out.right_settling = settling;
    out.left_speed = fit_speed_with_log(&left, window, th.left_log_term).ok();
    out.right_speed = fit_speed_with_log(&right, window, th.right_log_term).ok();
    let still = out
        .right_variation
        .is_some_and(|v| v < th.blocking_variation);
    if still && out.semi_persistent && settling {
        out.kind = OutcomeKind::BlockingRight;
        return Ok(out);
    }
    if out.left_speed.is_none() || out.right_speed.is_none() {
        return Err(Error::Undecided(
            "a front trace has too few samples for a speed fit; extend T".into(),
        ));
    }
    out.kind = OutcomeKind::Propagation;
    Ok(out)
}

/// Numerical settings shared by every sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub t_end: f64,
    pub dx: f64,
    pub dt: f64,
    pub half_width: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub thresholds: Thresholds,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            t_end: 300.0,
            dx: 0.1,
            dt: 0.02,
            half_width: 5.0,
            x_lo: -60.0,
            x_hi: 60.0,
            thresholds: Thresholds::default(),
        }
    }
}

/// One `(c, theta, k)` cell with its initial datum; the KPP rate is `r = k (1 - theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub c: f64,
    pub theta: f64,
    pub k: f64,
    pub datum: InitialDatum,
}

impl SweepCell {
    pub fn standard(c: f64, theta: f64, k: f64) -> Self {
        Self {
            c,
            theta,
            k,
            datum: InitialDatum::plateau(0.9, 10.0, 0.0, 2.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Agree,
    Disagree,
    Undecided,
    Open,
    Error,
}

impl Agreement {
    pub fn name(self) -> &'static str {
        match self {
            Agreement::Agree => "agree",
            Agreement::Disagree => "disagree",
            Agreement::Undecided => "undecided",
            Agreement::Open => "open",
            Agreement::Error => "error",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub theta: f64,
    pub k: f64,
    pub r: f64,
    pub c_m: f64,
    pub c_b: f64,
    pub cell: String,
    pub branch: Option<Branch>,
    pub predicted_kind: String,
    pub predicted_left: Option<f64>,
    pub predicted_right: Option<f64>,
    pub measured_kind: String,
    pub measured_left: Option<f64>,
    pub measured_right: Option<f64>,
    pub agreement: Agreement,
    pub right_variation: Option<f64>,
    /// `sup |u(T) - U|` on the local window, blocking cells only.
    pub blocking_distance: Option<f64>,
    pub final_max: Option<f64>,
    pub detail: String,
}

/// `max(5% of |expected|, 0.02)`.
pub fn speed_matches(expected: f64, measured: f64) -> bool {
    (expected - measured).abs() <= (0.05 * expected.abs()).max(0.02)
}

/// The branch of a conditional cell that a datum selects: small data stay below
/// `theta` with support in the bistable region; large data exceed `theta + 0.05` on an
/// interval of length at least 50 there.
pub fn conditional_branch(datum: &InitialDatum, theta: f64, half_width: f64) -> Option<Branch> {
    let (lo, hi) = datum.support()?;
    if lo <= half_width {
        return None;
    }
    if datum.sup() < theta {
        return Some(Branch::SmallData);
    }
    let n = ((hi - lo) / 0.05).ceil() as usize;
    let long = (0..=n)
        .filter(|&i| datum.eval(lo + 0.05 * i as f64) >= theta + 0.05)
        .count() as f64
        * 0.05;
    if long >= 50.0 {
        Some(Branch::LargeData)
    } else {
        None
    }
}

fn cell_problem(cell: &SweepCell, st: &SweepSettings) -> Result<Problem> {
    let field = reference_field(cell.k, cell.theta, st.half_width)?;
    let (lo, hi) = match cell.datum.support() {
        Some((a, b)) => (st.x_lo.min(a - 30.0), st.x_hi.max(b + 30.0)),
        None => (st.x_lo, st.x_hi),
    };
    Ok(Problem::new(field, cell.c, lo, hi)
        .with_steps(st.dx, st.dt)
        .with_bc(BoundaryCondition::DirichletFarfield)
        .with_grow(GrowPolicy::ExpandNearEdge {
            margin: crate::solver::DEFAULT_MARGIN,
        }))
}

/// Runs one cell and compares with the prediction.
pub fn run_cell(cell: &SweepCell, st: &SweepSettings) -> SweepRow {
    run_cell_detailed(cell, st).0
}

/// [`run_cell`], also returning the trajectory when the cell was simulated.
pub fn run_cell_detailed(cell: &SweepCell, st: &SweepSettings) -> (SweepRow, Option<Trajectory>) {
    let r = cell.k * (1.0 - cell.theta);
    let mut row = SweepRow {
        c: cell.c,
        theta: cell.theta,
        k: cell.k,
        r,
        c_m: f64::NAN,
        c_b: f64::NAN,
        cell: String::new(),
        branch: None,
        predicted_kind: String::new(),
        predicted_left: None,
        predicted_right: None,
        measured_kind: String::new(),
        measured_left: None,
        measured_right: None,
        agreement: Agreement::Error,
        right_variation: None,
        blocking_distance: None,
        final_max: None,
        detail: String::new(),
    };
    let mut traj = None;
    if let Err(e) = run_cell_into(cell, st, &mut row, &mut traj) {
        row.agreement = match e {
            Error::Undecided(_) => Agreement::Undecided,
            _ => Agreement::Error,
        };
        if row.measured_kind.is_empty() {
            row.measured_kind = row.agreement.name().into();
        }
        row.detail = e.to_string();
    }
    (row, traj)
}

fn run_cell_into(
    cell: &SweepCell,
    st: &SweepSettings,
    row: &mut SweepRow,
    keep: &mut Option<Trajectory>,
) -> Result<()> {
    let fm = build_kpp(row.r)?;
    let fb = build_cubic_bistable(cell.k, cell.theta)?;
    let c_m = kpp_min_speed(&fm)?;
    let c_b = bistable_front(&fb, 1e-8)?.speed;
    row.c_m = c_m;
    row.c_b = c_b;
    // A cell entered with c_b rounded runs at the computed c_b.
    let c_eff = if (cell.c - c_b).abs() < 1e-4 {
        c_b
    } else {
        cell.c
    };
    let pred = predict(c_eff, c_m, c_b)?;
    row.cell = pred.cell().into();
    row.branch = match pred {
        Prediction::Conditional { .. } => {
            conditional_branch(&cell.datum, cell.theta, st.half_width)
        }
        _ => None,
    };
    let expect = match (&pred, pred.expectation(row.branch)) {
        (Prediction::Open { .. }, _) => {
            row.predicted_kind = "open".into();
            row.agreement = Agreement::Open;
            return Ok(());
        }
        (_, Some(e)) => e.clone(),
        (_, None) => {
            row.predicted_kind = "conditional".into();
            return Err(Error::Undecided(
                "datum is neither small nor large for the conditional cell".into(),
            ));
        }
    };
    row.predicted_kind = expect.kind.name().into();
    row.predicted_left = expect.left;
    row.predicted_right = expect.right;
    let snapped = SweepCell {
        c: c_eff,
        ..cell.clone()
    };
    let problem = cell_problem(&snapped, st)?;
    let opts = RunOptions::new(st.t_end / 1000.0);
    let traj = keep.insert(integrate_with(
        &problem,
        &cell.datum,
        st.t_end,
        &opts,
        |_| false,
    )?);
    let th = st.thresholds.clone().with_kpp_lags(&expect, c_m);
    let outcome = classify(traj, &th)?;
    row.measured_kind = outcome.kind.name().into();
    row.final_max = Some(outcome.final_max);
    row.right_variation = outcome.right_variation;
    if outcome.kind != OutcomeKind::Extinction {
        row.measured_left = outcome.measured_left();
        row.measured_right = outcome.measured_right();
    }
    let mut ok = outcome.kind == expect.kind;
    if outcome.kind == OutcomeKind::BlockingRight {
        let u = solve_blocking_profile(&problem, 0.0, 1e-10)?;
        let last = traj.last();
        let (a, b) = th.local_window;
        let d = (0..last.values.len())
            .filter(|&i| {
                let x = last.x(i, traj.dx);
                x >= a && x <= b
            })
            .map(|i| (last.values[i] - u.eval(last.x(i, traj.dx))).abs())
            .fold(0.0, f64::max);
        row.blocking_distance = Some(d);
    }
    if ok {
        for (e, m) in [
            (expect.left, row.measured_left),
            (expect.right, row.measured_right),
        ] {
            if let Some(e) = e {
                ok &= m.is_some_and(|m| speed_matches(e, m));
            }
        }
    }
    row.agreement = if ok {
        Agreement::Agree
    } else {
        Agreement::Disagree
    };
    Ok(())
}

/// Runs every cell on `jobs` worker threads; rows come back in cell order.
pub fn sweep(cells: &[SweepCell], st: &SweepSettings, jobs: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(c, st)).collect()))
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "c",
    "theta",
    "k",
    "r",
    "c_m",
    "c_b",
    "predicted_kind",
    "predicted_left",
    "predicted_right",
    "measured_kind",
    "measured_left",
    "measured_right",
    "agreement",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        wr.write_record([
            format!("{}", r.c),
            format!("{}", r.theta),
            format!("{}", r.k),
            format!("{}", r.r),
            format!("{}", r.c_m),
            format!("{}", r.c_b),
            r.predicted_kind.clone(),
            opt(r.predicted_left),
            opt(r.predicted_right),
            r.measured_kind.clone(),
            opt(r.measured_left),
            opt(r.measured_right),
            r.agreement.name().to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_sweep_file(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_sweep_csv(rows, std::fs::File::create(path)?)
}

/// The twelve acceptance cells.
pub fn acceptance_cells() -> Vec<SweepCell> {
    let mut cells: Vec<SweepCell> = [3.0, 2.0, 1.0, 0.2828, 0.0, -1.0]
        .iter()
        .map(|&c| SweepCell::standard(c, 0.3, 1.0))
        .collect();
    cells.push(SweepCell {
        c: -2.0,
        theta: 0.3,
        k: 1.0,
        datum: InitialDatum::plateau(0.9, 50.0, 100.0, 2.0),
    });
    cells.push(SweepCell {
        c: -2.0,
        theta: 0.3,
        k: 1.0,
        datum: InitialDatum::plateau(0.25, 50.0, 100.0, 2.0),
    });
    cells.push(SweepCell::standard(0.0, 0.6, 1.0));
    cells.push(SweepCell::standard(-1.5, 0.6, 1.0));
    cells.push(SweepCell::standard(0.0, 0.95, 1.0));
    cells.push(SweepCell::standard(-0.7, 0.95, 1.0));
    cells
}

/// Fate of one threshold run.
#[derive(Clone, Debug, Serialize)]
pub struct WidthRun {
    pub width: f64,
    pub propagating: bool,
    pub decided_at: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdResult {
    pub width: f64,
    pub extinct: WidthRun,
    pub propagating: WidthRun,
    pub runs: Vec<WidthRun>,
}

/// Settings of [`threshold_width`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSettings {
    pub w_min: f64,
    pub w_max: f64,
    pub t_max: f64,
    pub dx: f64,
    pub dt: f64,
    pub half_width: f64,
    pub center: f64,
    /// Growth of the `u >= 0.8` set that counts as propagation.
    pub growth: f64,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        Self {
            w_min: 1.0,
            w_max: 200.0,
            t_max: 300.0,
            dx: 0.1,
            dt: 0.02,
            half_width: 5.0,
            center: 100.0,
            growth: 40.0,
        }
    }
}

/// Runs a plateau of the given width until it dies out (`max u < 1e-3`) or its
/// `u >= 0.8` set has grown by `growth` beyond `max(w, 20)`.
pub fn width_fate(
    c: f64,
    k: f64,
    theta: f64,
    height: f64,
    width: f64,
    st: &ThresholdSettings,
) -> Result<WidthRun> {
    let field = reference_field(k, theta, st.half_width)?;
    let shoulder = 2.0;
    let center = st.center.max(st.half_width + 5.0 + width / 2.0 + shoulder);
    let u0 = InitialDatum::plateau(height, width, center, shoulder);
    let (lo, hi) = u0.support().expect("nonempty");
    let problem = Problem::new(field, c, (lo - 40.0).min(-st.half_width - 20.0), hi + 40.0)
        .with_steps(st.dx, st.dt)
        .with_bc(BoundaryCondition::DirichletFarfield)
        .with_grow(GrowPolicy::ExpandNearEdge {
            margin: crate::solver::DEFAULT_MARGIN,
        });
    let target = width.max(20.0) + st.growth;
    let mut fate: Option<bool> = None;
    let opts = RunOptions {
        snapshot_every: st.t_max,
        track_levels: Vec::new(),
        diagnostic_every: st.t_max,
    };
    let traj = integrate_with(&problem, &u0, st.t_max, &opts, |s| {
        let max = s.u.iter().cloned().fold(0.0, f64::max);
        if max < 1e-3 {
            fate = Some(false);
            return true;
        }
        let a = level_position(s.x_lo, s.dx, s.u, 0.8, Side::Left);
        let b = level_position(s.x_lo, s.dx, s.u, 0.8, Side::Right);
        if let (Some(a), Some(b)) = (a, b) {
            if b - a >= target {
                fate = Some(true);
                return true;
            }
        }
        false
    })?;
    match fate {
        Some(p) => Ok(WidthRun {
            width,
            propagating: p,
            decided_at: traj.t_end,
        }),
        None => Err(Error::Undecided(format!(
            "width {width}: neither extinct nor spreading by t = {}",
            st.t_max
        ))),
    }
}

/// Bisection on the plateau width between an extinct and a propagating run, down to `tol_w`.
pub fn threshold_width(
    c: f64,
    k: f64,
    theta: f64,
    height: f64,
    tol_w: f64,
    st: &ThresholdSettings,
) -> Result<ThresholdResult> {
    let fm = build_kpp(k * (1.0 - theta))?;
    let fb = build_cubic_bistable(k, theta)?;
    let c_m = kpp_min_speed(&fm)?;
    let c_b = bistable_front(&fb, 1e-8)?.speed;
    if !(c <= -c_m && c_b > 0.0) {
        return Err(Error::WrongRegime(format!(
            "threshold needs c <= -c_m and c_b > 0, got c = {c}, c_b = {c_b}"
        )));
    }
    if !(tol_w > 0.0) {
        return Err(Error::InvalidParameter(
            "width tolerance must be positive".into(),
        ));
    }
    let mut runs = Vec::new();
    let lo_run = width_fate(c, k, theta, height, st.w_min, st)?;
    runs.push(lo_run.clone());
    if lo_run.propagating {
        return Err(Error::NoThresholdFound(format!(
            "already propagating at the smallest width {}",
            st.w_min
        )));
    }
    let mut lo = lo_run;
    let mut hi: Option<WidthRun> = None;
    let mut w = (8.0 * st.w_min).min(st.w_max);
    loop {
        let run = width_fate(c, k, theta, height, w, st)?;
        runs.push(run.clone());
        if run.propagating {
            hi = Some(run);
            break;
        }
        lo = run;
        if w >= st.w_max {
            break;
        }
        w = (2.0 * w).min(st.w_max);
    }
    let mut hi = hi.ok_or_else(|| {
        Error::NoThresholdFound(format!("all widths up to {} go extinct", st.w_max))
    })?;
    while hi.width - lo.width > 2.0 * tol_w {
        let mid = 0.5 * (lo.width + hi.width);
        let run = width_fate(c, k, theta, height, mid, st)?;
        runs.push(run.clone());
        if run.propagating {
            hi = run;
        } else {
            lo = run;
        }
    }
    Ok(ThresholdResult {
        width: 0.5 * (lo.width + hi.width),
        extinct: lo,
        propagating: hi,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CM: f64 = 1.6733200530681511;
    const CB: f64 = 0.28284271247461906;

    #[test]
    fn table_examples() {
        let p = predict(3.0, 2.0, CB).unwrap();
        let e = p.expectation(None).unwrap();
        assert_eq!(e.kind, OutcomeKind::Propagation);
        assert_eq!((e.left, e.right), (Some(5.0), Some(-1.0)));

        let p = predict(1.0, CM, CB).unwrap();
        let e = p.expectation(None).unwrap();
        assert_eq!(e.kind, OutcomeKind::BlockingRight);
        assert!((e.left.unwrap() - 2.6733).abs() < 1e-4);

        let p = predict(-2.0, CM, CB).unwrap();
        let large = p.expectation(Some(Branch::LargeData)).unwrap();
        assert!(
            (large.left.unwrap() + 1.7172).abs() < 1e-4
                && (large.right.unwrap() - 2.2828).abs() < 1e-4
        );
        assert_eq!(
            p.expectation(Some(Branch::SmallData)).unwrap().kind,
            OutcomeKind::Extinction
        );
    }

    #[test]
    fn inconsistent_and_open_cells() {
        assert!(matches!(
            predict(0.0, 0.2, 0.3),
            Err(Error::InconsistentSpeeds { .. })
        ));
        assert!(matches!(
            predict(-2.0, 1.0, 0.0),
            Ok(Prediction::Open { .. })
        ));
        assert!(matches!(
            predict(-2.0, 1.0, -0.1),
            Ok(Prediction::Definite { .. })
        ));
    }

    #[test]
    fn prediction_is_total() {
        for i in 0..200 {
            let c = -4.0 + 0.04 * i as f64;
            for &(cm, cb) in &[(1.0, 0.5), (1.0, -0.5), (2.0, 0.0), (0.5, -2.0)] {
                let p = predict(c, cm, cb).unwrap();
                let open = matches!(p, Prediction::Open { .. });
                assert_eq!(open, cb == 0.0 && c <= -cm);
            }
        }
    }

    #[test]
    fn branch_selection() {
        let big = InitialDatum::plateau(0.9, 50.0, 100.0, 2.0);
        let small = InitialDatum::plateau(0.25, 50.0, 100.0, 2.0);
        let mixed = InitialDatum::plateau(0.9, 10.0, 0.0, 2.0);
        assert_eq!(conditional_branch(&big, 0.3, 5.0), Some(Branch::LargeData));
        assert_eq!(
            conditional_branch(&small, 0.3, 5.0),
            Some(Branch::SmallData)
        );
        assert_eq!(conditional_branch(&mixed, 0.3, 5.0), None);
    }

    #[test]
    fn speed_tolerance() {
        assert!(speed_matches(2.0, 2.09));
        assert!(!speed_matches(2.0, 2.11));
        assert!(speed_matches(0.0, 0.019));
        assert!(!speed_matches(0.0, 0.021));
    }

    #[test]
    fn empty_sweep() {
        let rows = sweep(&[], &SweepSettings::default(), 2).unwrap();
        assert!(rows.is_empty());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            SWEEP_COLUMNS.join(",")
        );
    }
}
