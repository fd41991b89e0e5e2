//! IMEX time stepping of `u_t = u_xx + c u_x + f(x, u)` on a uniform, optionally growing grid.
//!
//! Diffusion and centered advection are implicit (one tridiagonal solve per step),
//! the reaction is explicit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fronts::{level_position, FrontTrace, Side};
use crate::numerics::{smoothstep, Tridiagonal};
use crate::reactions::{HeterogeneousField, ReactionClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    #[default]
    Neumann,
    DirichletFarfield,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrowPolicy {
    Fixed,
    /// Expand by 25% on a side when a node within `margin` of that boundary exceeds `GROW_TRIGGER`.
    ExpandNearEdge {
        margin: f64,
    },
}

impl Default for GrowPolicy {
    fn default() -> Self {
        GrowPolicy::ExpandNearEdge {
            margin: DEFAULT_MARGIN,
        }
    }
}

pub const DEFAULT_MARGIN: f64 = 20.0;
pub const GROW_TRIGGER: f64 = 1e-6;
pub const UNDERSHOOT_CLAMP: f64 = 1e-12;
pub const MAX_SNAPSHOTS: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub field: HeterogeneousField,
    pub c: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub dx: f64,
    pub dt: f64,
    pub bc: BoundaryCondition,
    pub grow: GrowPolicy,
}

impl Problem {
    /// Default grid `dx = 0.1`, `dt = 0.02`, Neumann, growing.
    pub fn new(field: HeterogeneousField, c: f64, x_lo: f64, x_hi: f64) -> Self {
        Self {
            field,
            c,
            x_lo,
            x_hi,
            dx: 0.1,
            dt: 0.02,
            bc: BoundaryCondition::Neumann,
            grow: GrowPolicy::default(),
        }
    }

    pub fn with_steps(mut self, dx: f64, dt: f64) -> Self {
        self.dx = dx;
        self.dt = dt;
        self
    }

    pub fn with_grow(mut self, grow: GrowPolicy) -> Self {
        self.grow = grow;
        self
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bc = bc;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.field.half_width;
        if !(self.dx > 0.0 && self.dt > 0.0) {
            return Err(Error::InvalidParameter("dx and dt must be positive".into()));
        }
        if !(self.x_lo < -l - 10.0 && self.x_hi > l + 10.0) {
            return Err(Error::InvalidParameter(format!(
                "domain [{}, {}] must contain [-L-10, L+10] = [{}, {}]",
                self.x_lo,
                self.x_hi,
                -l - 10.0,
                l + 10.0
            )));
        }
        if !self.c.is_finite() {
            return Err(Error::InvalidParameter(
                "advection rate must be finite".into(),
            ));
        }
        if let GrowPolicy::ExpandNearEdge { margin } = self.grow {
            if !(margin > 0.0) {
                return Err(Error::InvalidParameter(
                    "grow margin must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Stability conditions of the scheme: an M-matrix implicit operator and a monotone explicit reaction.
    pub fn stability_check(&self, u_sup: f64) -> Result<()> {
        if self.c.abs() * self.dx / 2.0 > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "cell Peclet number |c| dx / 2 = {} exceeds 1",
                self.c.abs() * self.dx / 2.0
            )));
        }
        let lip = self.field.lipschitz(u_sup.max(1.5));
        if self.dt * lip >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "dt * Lip(f) = {} must be below 1",
                self.dt * lip
            )));
        }
        Ok(())
    }

    fn node_count(&self) -> usize {
        ((self.x_hi - self.x_lo) / self.dx).round() as usize + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauBump {
    pub height: f64,
    pub width: f64,
    pub center: f64,
    /// Width of each C² shoulder.
    pub shoulder: f64,
}

impl PlateauBump {
    pub fn eval(&self, x: f64) -> f64 {
        let d = (x - self.center).abs() - self.width / 2.0;
        if d <= 0.0 {
            self.height
        } else if self.shoulder <= 0.0 {
            0.0
        } else {
            self.height * smoothstep(1.0 - d / self.shoulder)
        }
    }
}

/// Initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    PlateauBump(PlateauBump),
    /// Nodal values on `x0 + i dx`, linear in between, zero outside.
    Sampled {
        x0: f64,
        dx: f64,
        values: Vec<f64>,
    },
    Zero,
}

impl InitialDatum {
    pub fn plateau(height: f64, width: f64, center: f64, shoulder: f64) -> Self {
        InitialDatum::PlateauBump(PlateauBump {
            height,
            width,
            center,
            shoulder,
        })
    }

    /// Samples `g` on `[lo, hi]` with spacing `dx`.
    pub fn sample<F: Fn(f64) -> f64>(lo: f64, hi: f64, dx: f64, g: F) -> Self {
        let n = ((hi - lo) / dx).round() as usize + 1;
        InitialDatum::Sampled {
            x0: lo,
            dx,
            values: (0..n).map(|i| g(lo + dx * i as f64)).collect(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialDatum::PlateauBump(b) => b.eval(x),
            InitialDatum::Sampled { x0, dx, values } => {
                let pos = (x - x0) / dx;
                if pos < 0.0 || pos > (values.len() - 1) as f64 {
                    return 0.0;
                }
                let i = (pos.floor() as usize).min(values.len().saturating_sub(2));
                let t = pos - i as f64;
                if values.len() == 1 {
                    return values[0];
                }
                values[i] * (1.0 - t) + values[i + 1] * t
            }
            InitialDatum::Zero => 0.0,
        }
    }

    /// Closed interval outside of which the datum vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            InitialDatum::PlateauBump(b) => {
                let half = b.width / 2.0 + b.shoulder.max(0.0);
                Some((b.center - half, b.center + half))
            }
            InitialDatum::Sampled { x0, dx, values } => {
                let first = values.iter().position(|v| *v != 0.0)?;
                let last = values.iter().rposition(|v| *v != 0.0)?;
                Some((
                    x0 + dx * first.saturating_sub(1) as f64,
                    x0 + dx * (last + 1).min(values.len() - 1) as f64,
                ))
            }
            InitialDatum::Zero => None,
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            InitialDatum::PlateauBump(b) => b.height.max(0.0),
            InitialDatum::Sampled { values, .. } => values.iter().cloned().fold(0.0, f64::max),
            InitialDatum::Zero => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            InitialDatum::PlateauBump(b) => {
                if !(b.height >= 0.0 && b.width >= 0.0 && b.shoulder >= 0.0) {
                    return Err(Error::InvalidParameter(
                        "plateau bump needs height, width, shoulder >= 0".into(),
                    ));
                }
            }
            InitialDatum::Sampled { dx, values, .. } => {
                if !(*dx > 0.0) || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidParameter(
                        "sampled datum must be finite and nonnegative".into(),
                    ));
                }
            }
            InitialDatum::Zero => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// Position of the first node; nodes sit at `x_lo + i dx`.
    pub x_lo: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn x_hi(&self, dx: f64) -> f64 {
        self.x_lo + dx * (self.values.len() - 1) as f64
    }

    pub fn x(&self, i: usize, dx: f64) -> f64 {
        self.x_lo + dx * i as f64
    }

    /// Linear interpolation, constant extension beyond the ends.
    pub fn value_at(&self, x: f64, dx: f64) -> f64 {
        let n = self.values.len();
        let pos = (x - self.x_lo) / dx;
        if pos <= 0.0 {
            return self.values[0];
        }
        if pos >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: String,
    pub detail: String,
}

/// Sampled scalar diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub t: f64,
    pub max_u: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub problem: Problem,
    pub dx: f64,
    pub snapshots: Vec<Snapshot>,
    pub warnings: Vec<String>,
    pub events: Vec<Event>,
    /// Level traces recorded at every accepted step.
    pub traces: Vec<FrontTrace>,
    pub diagnostics: Vec<Diagnostic>,
    /// Speed of the frame the abscissae refer to (`0` for the lab frame).
    pub frame_speed: f64,
    pub u0_sup: f64,
    pub t_end: f64,
    pub stopped_early: bool,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("trajectory has at least one snapshot")
    }

    /// Snapshot with time closest to `t`.
    pub fn nearest(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap())
            .expect("nonempty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn trace(&self, level: f64, side: Side) -> Option<&FrontTrace> {
        self.traces
            .iter()
            .find(|tr| tr.level == level && tr.side == side)
    }
}

/// Per-run tuning of what gets recorded.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub snapshot_every: f64,
    pub track_levels: Vec<f64>,
    pub diagnostic_every: f64,
}

impl RunOptions {
    pub fn new(snapshot_every: f64) -> Self {
        Self {
            snapshot_every,
            track_levels: vec![0.5],
            diagnostic_every: 0.1,
        }
    }

    pub fn levels(mut self, levels: &[f64]) -> Self {
        self.track_levels = levels.to_vec();
        self
    }
}

/// State handed to a stop predicate after each step.
pub struct StepState<'a> {
    pub t: f64,
    pub x_lo: f64,
    pub dx: f64,
    pub u: &'a [f64],
}

/// Integrates to `t_end`, tracking level 0.5 on both sides.
pub fn integrate(
    problem: &Problem,
    u0: &InitialDatum,
    t_end: f64,
    snapshot_every: f64,
) -> Result<Trajectory> {
    integrate_with(problem, u0, t_end, &RunOptions::new(snapshot_every), |_| {
        false
    })
}

struct Stepper {
    x_lo: f64,
    dx: f64,
    u: Vec<f64>,
    chi: Vec<f64>,
    lu: Tridiagonal,
}

impl Stepper {
    fn build(problem: &Problem, x_lo: f64, u: Vec<f64>) -> Result<Self> {
        let n = u.len();
        let (dx, dt, c) = (problem.dx, problem.dt, problem.c);
        let chi: Vec<f64> = (0..n)
            .map(|i| problem.field.chi(x_lo + dx * i as f64))
            .collect();
        let dif = dt / (dx * dx);
        let adv = dt * c / (2.0 * dx);
        let mut lower = vec![-(dif - adv); n];
        let mut diag = vec![1.0 + 2.0 * dif; n];
        let mut upper = vec![-(dif + adv); n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        match problem.bc {
            BoundaryCondition::Neumann => {
                upper[0] = -2.0 * dif;
                lower[n - 1] = -2.0 * dif;
            }
            BoundaryCondition::DirichletFarfield => {
                upper[0] = 0.0;
                diag[0] = 1.0;
                lower[n - 1] = 0.0;
                diag[n - 1] = 1.0;
            }
        }
        let lu = Tridiagonal::factor(&lower, &diag, &upper)
            .ok_or_else(|| Error::InvalidParameter("singular implicit operator".into()))?;
        Ok(Self {
            x_lo,
            dx,
            u,
            chi,
            lu,
        })
    }

    fn step(&mut self, problem: &Problem) {
        let field = &problem.field;
        let dt = problem.dt;
        let (left, right) = (&field.left, &field.right);
        let mono = left == right;
        for (ui, &chi) in self.u.iter_mut().zip(&self.chi) {
            let s = *ui;
            let f = if mono || chi == 0.0 {
                left.eval(s)
            } else if chi == 1.0 {
                right.eval(s)
            } else {
                (1.0 - chi) * left.eval(s) + chi * right.eval(s)
            };
            *ui = s + dt * f;
        }
        if problem.bc == BoundaryCondition::DirichletFarfield {
            let n = self.u.len();
            self.u[0] = 0.0;
            self.u[n - 1] = 0.0;
        }
        self.lu.solve_in_place(&mut self.u);
    }

    fn x_hi(&self) -> f64 {
        self.x_lo + self.dx * (self.u.len() - 1) as f64
    }
}

/// Trapezoid-weighted discrete mass.
pub fn discrete_mass(u: &[f64], dx: f64) -> f64 {
    let n = u.len();
    if n == 0 {
        return 0.0;
    }
    let inner: f64 = u.iter().sum();
    dx * (inner - 0.5 * (u[0] + u[n - 1]))
}

/// Integrates to `t_end` or until `stop` returns true.
pub fn integrate_with<F>(
    problem: &Problem,
    u0: &InitialDatum,
    t_end: f64,
    opts: &RunOptions,
    mut stop: F,
) -> Result<Trajectory>
where
    F: FnMut(&StepState) -> bool,
{
    problem.validate()?;
    u0.validate()?;
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(
            "final time must be nonnegative".into(),
        ));
    }
    let u0_sup = u0.sup();
    problem.stability_check(u0_sup)?;
    if let Some((lo, hi)) = u0.support() {
        if lo < problem.x_lo || hi > problem.x_hi {
            return Err(Error::InvalidParameter(format!(
                "initial support [{lo}, {hi}] not inside the domain [{}, {}]",
                problem.x_lo, problem.x_hi
            )));
        }
    }
    let dx = problem.dx;
    let n = problem.node_count();
    let u: Vec<f64> = (0..n)
        .map(|i| u0.eval(problem.x_lo + dx * i as f64))
        .collect();
    let mut st = Stepper::build(problem, problem.x_lo, u)?;

    let n_steps = (t_end / problem.dt).round() as usize;
    let snap_dt = opts
        .snapshot_every
        .max(t_end / MAX_SNAPSHOTS as f64)
        .max(problem.dt);
    let snap_stride = ((snap_dt / problem.dt).round() as usize).max(1);
    let diag_stride = ((opts.diagnostic_every / problem.dt).round() as usize).max(1);
    let mut traces: Vec<FrontTrace> = opts
        .track_levels
        .iter()
        .flat_map(|&rho| {
            [
                FrontTrace::new(rho, Side::Left),
                FrontTrace::new(rho, Side::Right),
            ]
        })
        .collect();

    let mut traj = Trajectory {
        problem: problem.clone(),
        dx,
        snapshots: Vec::new(),
        warnings: Vec::new(),
        events: Vec::new(),
        traces: Vec::new(),
        diagnostics: Vec::new(),
        frame_speed: 0.0,
        u0_sup,
        t_end,
        stopped_early: false,
        steps: 0,
    };
    let bound = u0_sup.max(1.0) * (1.0 + 1e-9);
    let mut escaped = [false, false];
    let record =
        |traj: &mut Trajectory, traces: &mut Vec<FrontTrace>, st: &Stepper, t: f64, step: usize| {
            for tr in traces.iter_mut() {
                tr.push(t, level_position(st.x_lo, st.dx, &st.u, tr.level, tr.side));
            }
            if step % diag_stride == 0 {
                let max_u = st.u.iter().cloned().fold(0.0, f64::max);
                traj.diagnostics.push(Diagnostic {
                    t,
                    max_u,
                    mass: discrete_mass(&st.u, st.dx),
                });
            }
        };
    traj.snapshots.push(Snapshot {
        t: 0.0,
        x_lo: st.x_lo,
        values: st.u.clone(),
    });
    record(&mut traj, &mut traces, &st, 0.0, 0);

    for step in 1..=n_steps {
        st.step(problem);
        let t = step as f64 * problem.dt;
        let mut worst = 0.0f64;
        for v in st.u.iter_mut() {
            if !v.is_finite() {
                return Err(Error::NumericalInstability {
                    step,
                    t,
                    detail: "non-finite value".into(),
                });
            }
            if *v < 0.0 {
                worst = worst.min(*v);
                *v = 0.0;
            }
        }
        if worst < -UNDERSHOOT_CLAMP {
            return Err(Error::NumericalInstability {
                step,
                t,
                detail: format!("undershoot {worst:e}"),
            });
        }
        if st.u.iter().any(|&v| v > 10.0 * bound) {
            return Err(Error::NumericalInstability {
                step,
                t,
                detail: "blow-up".into(),
            });
        }
        let margin = match problem.grow {
            GrowPolicy::ExpandNearEdge { margin } => margin,
            GrowPolicy::Fixed => DEFAULT_MARGIN,
        };
        let m = ((margin / dx).round() as usize).min(st.u.len() / 2);
        let near_left = st.u[..m].iter().any(|&v| v > GROW_TRIGGER);
        let near_right = st.u[st.u.len() - m..].iter().any(|&v| v > GROW_TRIGGER);
        if near_left || near_right {
            match problem.grow {
                GrowPolicy::ExpandNearEdge { .. } => {
                    let len = st.x_hi() - st.x_lo;
                    let add = ((0.25 * len / dx).ceil() as usize).max(1);
                    let (pre, post) = (
                        if near_left { add } else { 0 },
                        if near_right { add } else { 0 },
                    );
                    let mut u = vec![0.0; pre];
                    u.extend_from_slice(&st.u);
                    u.extend(std::iter::repeat(0.0).take(post));
                    let x_lo = st.x_lo - dx * pre as f64;
                    st = Stepper::build(problem, x_lo, u)?;
                    traj.events.push(Event {
                        t,
                        kind: "grow".into(),
                        detail: format!(
                            "domain now [{}, {}] with {} nodes",
                            st.x_lo,
                            st.x_hi(),
                            st.u.len()
                        ),
                    });
                }
                GrowPolicy::Fixed => {
                    for (k, near) in [near_left, near_right].into_iter().enumerate() {
                        if near && !escaped[k] {
                            escaped[k] = true;
                            let side = if k == 0 { "left" } else { "right" };
                            let msg = format!(
                                "front-escape: solution reached the {side} margin at t = {t}"
                            );
                            traj.events.push(Event {
                                t,
                                kind: "warning".into(),
                                detail: msg.clone(),
                            });
                            traj.warnings.push(msg);
                        }
                    }
                }
            }
        }
        record(&mut traj, &mut traces, &st, t, step);
        let done = stop(&StepState {
            t,
            x_lo: st.x_lo,
            dx,
            u: &st.u,
        });
        if step % snap_stride == 0 || step == n_steps || done {
            traj.snapshots.push(Snapshot {
                t,
                x_lo: st.x_lo,
                values: st.u.clone(),
            });
        }
        traj.steps = step;
        if done {
            traj.stopped_early = step < n_steps;
            traj.t_end = t;
            break;
        }
    }
    if traj
        .snapshots
        .iter()
        .any(|s| s.values.iter().any(|&v| v > bound))
    {
        traj.warnings
            .push(format!("values above max(1, sup u0) = {}", u0_sup.max(1.0)));
    }
    traj.traces = traces;
    Ok(traj)
}

/// Logistic super-solution `xi' = r xi (1 - xi)` started at `xi0`.
pub fn logistic_envelope(r: f64, xi0: f64, t: f64) -> f64 {
    1.0 / (1.0 + (1.0 / xi0 - 1.0) * (-r * t).exp())
}

/// Resamples every snapshot to the moving frame `y = x + c t` with `c = problem.c`.
pub fn frame_shift(traj: &Trajectory) -> Trajectory {
    shift_frame(traj, traj.problem.c)
}

/// Resamples to `y = x + speed t` on the lattice of the original grid.
pub fn shift_frame(traj: &Trajectory, speed: f64) -> Trajectory {
    if speed == 0.0 {
        return traj.clone();
    }
    let dx = traj.dx;
    let anchor = traj.problem.x_lo;
    let snapshots = traj
        .snapshots
        .iter()
        .map(|s| {
            let lo = s.x_lo + speed * s.t;
            let hi = s.x_hi(dx) + speed * s.t;
            let k_lo = ((lo - anchor) / dx - 1e-9).ceil() as i64;
            let k_hi = ((hi - anchor) / dx + 1e-9).floor() as i64;
            let x_lo = anchor + dx * k_lo as f64;
            let values = (k_lo..=k_hi)
                .map(|k| s.value_at(anchor + dx * k as f64 - speed * s.t, dx))
                .collect();
            Snapshot {
                t: s.t,
                x_lo,
                values,
            }
        })
        .collect();
    let traces = traj
        .traces
        .iter()
        .map(|tr| {
            let mut out = FrontTrace::new(tr.level, tr.side);
            for (t, p) in tr.times.iter().zip(&tr.positions) {
                out.push(*t, p.map(|x| x + speed * t));
            }
            out
        })
        .collect();
    Trajectory {
        snapshots,
        traces,
        frame_speed: traj.frame_speed + speed,
        ..traj.clone()
    }
}

/// Excess of one snapshot over the Gaussian envelopes.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeExcess {
    pub t: f64,
    pub evaluated: bool,
    pub max_excess: f64,
    pub at_x: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViolationReport {
    pub snapshots: Vec<EnvelopeExcess>,
    pub max_excess: f64,
    pub passed: bool,
}

/// Envelope is degenerate as `t -> 0`; earlier snapshots are not evaluated.
pub const ENVELOPE_MIN_TIME: f64 = 1.0;
pub const ENVELOPE_TOL: f64 = 1e-8;

/// Compares `u` with `M e^{Kt} exp(-(x + ct + L1)^2 / 4t)` on `x <= -ct - L1` and the mirrored envelope on `x >= L2 - ct`.
pub fn gaussian_bound_check(
    traj: &Trajectory,
    k: f64,
    l1: f64,
    l2: f64,
    m: f64,
) -> ViolationReport {
    let c = traj.problem.c;
    let dx = traj.dx;
    let mut rows = Vec::with_capacity(traj.snapshots.len());
    let mut overall = f64::NEG_INFINITY;
    for s in &traj.snapshots {
        let t = s.t;
        if t < ENVELOPE_MIN_TIME {
            rows.push(EnvelopeExcess {
                t,
                evaluated: false,
                max_excess: f64::NAN,
                at_x: f64::NAN,
            });
            continue;
        }
        let amp = m * (k * t).exp();
        let mut worst = f64::NEG_INFINITY;
        let mut at = f64::NAN;
        for (i, &u) in s.values.iter().enumerate() {
            let x = s.x(i, dx) - traj.frame_speed * t;
            let env = if x <= -c * t - l1 {
                amp * (-(x + c * t + l1).powi(2) / (4.0 * t)).exp()
            } else if x >= l2 - c * t {
                amp * (-(x + c * t - l2).powi(2) / (4.0 * t)).exp()
            } else {
                continue;
            };
            if u - env > worst {
                worst = u - env;
                at = x;
            }
        }
        overall = overall.max(worst);
        rows.push(EnvelopeExcess {
            t,
            evaluated: true,
            max_excess: worst,
            at_x: at,
        });
    }
    ViolationReport {
        passed: overall <= ENVELOPE_TOL,
        max_excess: overall,
        snapshots: rows,
    }
}

/// Checks the field is homogeneous KPP or blended; used by envelope callers.
pub fn kpp_rate(field: &HeterogeneousField) -> Option<f64> {
    if field.left.class() == ReactionClass::Kpp {
        Some(field.left.deriv(0.0))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reactions::{build_kpp, reference_field, Reaction};

    fn inert() -> HeterogeneousField {
        HeterogeneousField::uniform(Reaction::Inert, 5.0)
    }

    #[test]
    fn pure_diffusion_conserves_mass() {
        let p = Problem::new(inert(), 0.0, -60.0, 60.0).with_grow(GrowPolicy::Fixed);
        let u0 = InitialDatum::sample(-60.0, 60.0, 0.1, |x| (-x * x / 4.0).exp());
        let traj = integrate_with(&p, &u0, 20.0, &RunOptions::new(1.0), |_| false).unwrap();
        let m0 = traj.diagnostics[0].mass;
        for w in traj.diagnostics.windows(2) {
            assert!((w[1].mass - w[0].mass).abs() < 1e-10);
        }
        assert!((traj.diagnostics.last().unwrap().mass - m0).abs() < 1e-9);
    }

    #[test]
    fn zero_datum_stays_zero() {
        let p = Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), 0.5, -50.0, 50.0);
        let traj = integrate(&p, &InitialDatum::Zero, 10.0, 1.0).unwrap();
        assert!(traj
            .snapshots
            .iter()
            .all(|s| s.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn plateau_bump_shape() {
        let b = InitialDatum::plateau(0.9, 10.0, 3.0, 2.0);
        assert_eq!(b.eval(3.0), 0.9);
        assert_eq!(b.eval(8.0), 0.9);
        assert_eq!(b.eval(10.0), 0.0);
        assert!((b.eval(9.0) - 0.45).abs() < 1e-12);
        assert_eq!(b.support(), Some((-4.0, 10.0)));
    }

    #[test]
    fn stability_preconditions() {
        let p = Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), 30.0, -50.0, 50.0);
        assert!(integrate(&p, &InitialDatum::Zero, 1.0, 1.0).is_err());
        let q = Problem::new(reference_field(1.0, 0.3, 5.0).unwrap(), 0.0, -10.0, 50.0);
        assert!(q.validate().is_err());
    }

    #[test]
    fn grid_grows_and_keeps_nodes() {
        let field = HeterogeneousField::uniform(build_kpp(1.0).unwrap(), 5.0);
        let p = Problem::new(field, 0.0, -30.0, 30.0);
        let traj = integrate(&p, &InitialDatum::plateau(1.0, 4.0, 0.0, 1.0), 20.0, 1.0).unwrap();
        assert!(traj.events.iter().any(|e| e.kind == "grow"));
        for s in &traj.snapshots {
            let k = (s.x_lo - p.x_lo) / p.dx;
            assert!((k - k.round()).abs() < 1e-9);
            assert!(s.values[0] < 1e-8 && *s.values.last().unwrap() < 1e-8);
        }
    }

    #[test]
    fn fixed_policy_records_escape() {
        let field = HeterogeneousField::uniform(build_kpp(1.0).unwrap(), 5.0);
        let p = Problem::new(field, 0.0, -30.0, 30.0).with_grow(GrowPolicy::Fixed);
        let traj = integrate(&p, &InitialDatum::plateau(1.0, 4.0, 0.0, 1.0), 15.0, 1.0).unwrap();
        assert!(traj.warnings.iter().any(|w| w.contains("front-escape")));
    }

    #[test]
    fn frame_shift_identity_and_constants() {
        let p = Problem::new(inert(), 0.0, -20.0, 20.0).with_grow(GrowPolicy::Fixed);
        let traj = integrate(&p, &InitialDatum::plateau(0.5, 4.0, 0.0, 1.0), 2.0, 0.5).unwrap();
        let same = frame_shift(&traj);
        assert_eq!(same.snapshots, traj.snapshots);

        let q = Problem::new(inert(), 0.7, -20.0, 20.0).with_grow(GrowPolicy::Fixed);
        let flat = InitialDatum::sample(-20.0, 20.0, 0.1, |_| 0.4);
        let traj = integrate(&q, &flat, 2.0, 0.5).unwrap();
        let moved = frame_shift(&traj);
        for s in &moved.snapshots {
            assert!(s.values.iter().all(|v| (v - 0.4).abs() < 1e-12));
        }
        let back = shift_frame(&moved, -0.7);
        assert_eq!(back.frame_speed, 0.0);
    }

    #[test]
    fn logistic_envelope_limits() {
        assert_eq!(logistic_envelope(0.7, 1.0, 5.0), 1.0);
        assert!(logistic_envelope(0.7, 2.0, 50.0) < 1.0 + 1e-12);
        assert!(logistic_envelope(0.7, 2.0, 1.0) > 1.0);
    }
}
