//! Stationary states of `U'' + c U' + f(x, U) = 0`: the blocking profile connecting
//! 1 to 0, a probe of uniqueness through long-time limits, and a semi-persistence test.

use serde::Serialize;

use crate::barriers::{bump_admissible, modification_below, static_blocking_supersolution};
use crate::error::{Error, Result};
use crate::fronts::{level_position, Side};
use crate::numerics::Tridiagonal;
use crate::reactions::Reaction;
use crate::solver::{integrate_with, GrowPolicy, InitialDatum, Problem, RunOptions, Trajectory};
use crate::waves::{bistable_front, kpp_min_speed};

/// Sampled blocking profile on `[-X, X]` with exponential tails outside.
#[derive(Clone, Debug, Serialize)]
pub struct StationaryProfile {
    pub x_lo: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub c: f64,
    pub residual_max: f64,
    /// `1 - U ~ e^{eta x}` at `-inf`.
    pub eta: f64,
    /// `U ~ e^{-zeta x}` at `+inf`.
    pub zeta: f64,
    pub half_length: f64,
    pub newton_iterations: usize,
    /// `1 - U` at every node, resolved below machine epsilon in the KPP region.
    pub complement: Vec<f64>,
}

impl StationaryProfile {
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + self.dx * i as f64
    }

    pub fn x_hi(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    pub fn abscissa(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.x(i)).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        if x <= self.x_lo {
            return 1.0 - self.complement[0] * (self.eta * (x - self.x_lo)).exp();
        }
        if x >= self.x_hi() {
            return self.values[n - 1] * (-self.zeta * (x - self.x_hi())).exp();
        }
        let pos = (x - self.x_lo) / self.dx;
        let i = (pos.floor() as usize).min(n - 2);
        let w = pos - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    /// Discrete residual at every node, with the Robin closures at the ends.
    pub fn residuals(&self, field_eval: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        discrete_residual(
            &self.values,
            self.x_lo,
            self.dx,
            self.c,
            self.eta,
            self.zeta,
            &field_eval,
        )
    }
}

fn discrete_residual(
    u: &[f64],
    x_lo: f64,
    dx: f64,
    c: f64,
    eta: f64,
    zeta: f64,
    f: &impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let n = u.len();
    let (h2, h) = (dx * dx, 2.0 * dx);
    (0..n)
        .map(|i| {
            // Ghost values from U' = -eta (1 - U) at the left and U' = -zeta U at the right.
            let left = if i == 0 {
                u[1] + h * eta * (1.0 - u[0])
            } else {
                u[i - 1]
            };
            let right = if i == n - 1 {
                u[n - 2] - h * zeta * u[n - 1]
            } else {
                u[i + 1]
            };
            (right - 2.0 * u[i] + left) / h2
                + c * (right - left) / h
                + f(x_lo + dx * i as f64, u[i])
        })
        .collect()
}

/// Bistable speed `c_b` and KPP speed `c_m` of a heterogeneous problem.
pub fn problem_speeds(problem: &Problem) -> Result<(f64, f64)> {
    let c_m = kpp_min_speed(&problem.field.left)?;
    let c_b = bistable_front(&problem.field.right, 1e-8)?.speed;
    Ok((c_m, c_b))
}

/// `(eta, zeta)` tail rates of the blocking profile.
pub fn tail_rates(fm: &Reaction, fb: &Reaction, c: f64) -> (f64, f64) {
    let eta = 0.5 * (-c + (c * c - 4.0 * fm.deriv(1.0)).sqrt());
    let zeta = 0.5 * (c + (c * c - 4.0 * fb.deriv(0.0)).sqrt());
    (eta, zeta)
}

/// Smallest admissible half-length of the computational interval.
pub fn min_half_length(eta: f64, zeta: f64) -> f64 {
    40.0 / eta.min(zeta)
}

const NEWTON_MAX: usize = 100;
const PTC_MAX: usize = 2000;

/// Damped Newton solve of the two-point problem on `[-X, X]` with exponential
/// tail matching at both ends. `X` is raised to `40 / min(eta, zeta)` when smaller.
pub fn solve_blocking_profile(
    problem: &Problem,
    half_length: f64,
    tol: f64,
) -> Result<StationaryProfile> {
    let (c_m, c_b) = problem_speeds(problem)?;
    let c = problem.c;
    if !(c > c_b.max(-c_m) && c < c_m) {
        return Err(Error::WrongRegime(format!(
            "blocking profile needs max(c_b, -c_m) < c < c_m, got c = {c} with c_b = {c_b}, c_m = {c_m}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let phi = bistable_front(&problem.field.right, 1e-8)?;
    newton_profile(problem, half_length, tol, |x| phi.eval(x))
}

fn newton_profile(
    problem: &Problem,
    half_length: f64,
    tol: f64,
    guess: impl Fn(f64) -> f64,
) -> Result<StationaryProfile> {
    let field = &problem.field;
    let c = problem.c;
    let (eta, zeta) = tail_rates(&field.left, &field.right, c);
    let x_half = half_length.max(min_half_length(eta, zeta));
    let dx = problem.dx;
    let n = (2.0 * x_half / dx).round() as usize + 1;
    let x_lo = -dx * ((n - 1) / 2) as f64;
    let n = 2 * ((n - 1) / 2) + 1;
    let f = |x: f64, s: f64| field.eval(x, s);
    let u0: Vec<f64> = (0..n).map(|i| guess(x_lo + dx * i as f64)).collect();
    let (h2, h) = (dx * dx, 2.0 * dx);
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Jacobian of the discrete residual, shifted by `-shift` on the diagonal.
    let factor = |u: &[f64], shift: f64| {
        let mut lower = vec![1.0 / h2 - c / h; n];
        let mut upper = vec![1.0 / h2 + c / h; n];
        let mut diag: Vec<f64> = (0..n)
            .map(|i| -2.0 / h2 - shift + field.deriv_s(x_lo + dx * i as f64, u[i]))
            .collect();
        lower[0] = 0.0;
        upper[0] = 2.0 / h2;
        diag[0] += -2.0 * eta / dx + c * eta;
        upper[n - 1] = 0.0;
        lower[n - 1] = 2.0 / h2;
        diag[n - 1] += -2.0 * zeta / dx - c * zeta;
        Tridiagonal::factor(&lower, &diag, &upper)
            .ok_or_else(|| Error::NoConvergence("singular Newton matrix".into()))
    };
    let start = u0.clone();
    let mut u = u0;
    let mut res = discrete_residual(&u, x_lo, dx, c, eta, zeta, &f);
    let mut rn = norm(&res);
    let mut iters = 0;
    let mut newton_failed = false;
    while rn > tol {
        if iters == NEWTON_MAX {
            newton_failed = true;
            break;
        }
        iters += 1;
        let lu = factor(&u, 0.0)?;
        let mut step: Vec<f64> = res.iter().map(|r| -r).collect();
        lu.solve_in_place(&mut step);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + lambda * b).collect();
            let tr = discrete_residual(&trial, x_lo, dx, c, eta, zeta, &f);
            let tn = norm(&tr);
            if tn < rn {
                u = trial;
                res = tr;
                rn = tn;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                newton_failed = true;
                break;
            }
        }
        if newton_failed {
            break;
        }
    }
    if newton_failed {
        // Pseudo-transient continuation: implicit Euler on u_t = F(u) with a growing step.
        u = start;
        res = discrete_residual(&u, x_lo, dx, c, eta, zeta, &f);
        rn = norm(&res);
        let mut tau = 1.0;
        let mut steps = 0;
        while rn > tol {
            if steps == PTC_MAX {
                return Err(Error::NoConvergence(format!(
                    "pseudo-transient continuation stalled at residual {rn:e}"
                )));
            }
            steps += 1;
            let lu = factor(&u, 1.0 / tau)?;
            let mut step: Vec<f64> = res.iter().map(|r| -r).collect();
            lu.solve_in_place(&mut step);
            for (a, b) in u.iter_mut().zip(&step) {
                *a += b;
            }
            let tr = discrete_residual(&u, x_lo, dx, c, eta, zeta, &f);
            let tn = norm(&tr);
            tau = (tau * (rn / tn).clamp(0.5, 4.0)).min(1e12);
            res = tr;
            rn = tn;
        }
        iters += steps;
    }
    Ok(StationaryProfile {
        x_lo,
        dx,
        values: u,
        c,
        residual_max: rn,
        eta,
        zeta,
        half_length: -x_lo,
        newton_iterations: iters,
        complement: Vec::new(),
    })
    .map(|mut p| {
        p.complement = complement(&p, &field.left, field.half_width);
        p
    })
}

/// `1 - U` on the KPP side `x <= -L - 1`, from a Newton solve of
/// `w'' + c w' - f_m(1 - w) = 0` with `w' = eta w` at `-X` and `w` pinned at the split node.
fn complement(p: &StationaryProfile, fm: &Reaction, half_width: f64) -> Vec<f64> {
    let mut w: Vec<f64> = p.values.iter().map(|v| 1.0 - v).collect();
    let r = match *fm {
        Reaction::Kpp { r } => r,
        _ => return w,
    };
    let split = (((-half_width - 1.0) - p.x_lo) / p.dx).floor();
    if split < 3.0 {
        return w;
    }
    let m = split as usize;
    let (dx, c, eta) = (p.dx, p.c, p.eta);
    let (h2, h) = (dx * dx, 2.0 * dx);
    let wm = w[m];
    let mut v: Vec<f64> = (0..m)
        .map(|i| wm * (eta * dx * (i as f64 - m as f64)).exp())
        .collect();
    let g = |x: f64| r * x * (1.0 - x);
    let dg = |x: f64| r * (1.0 - 2.0 * x);
    for _ in 0..50 {
        let res: Vec<f64> = (0..m)
            .map(|i| {
                let left = if i == 0 {
                    v[1] - h * eta * v[0]
                } else {
                    v[i - 1]
                };
                let right = if i + 1 == m { wm } else { v[i + 1] };
                (right - 2.0 * v[i] + left) / h2 + c * (right - left) / h - g(v[i])
            })
            .collect();
        let scale = v
            .iter()
            .zip(&res)
            .fold(0.0f64, |a, (x, r)| a.max(r.abs() / x.abs().max(1e-300)));
        let mut lower = vec![1.0 / h2 - c / h; m];
        let mut upper = vec![1.0 / h2 + c / h; m];
        let mut diag: Vec<f64> = v.iter().map(|&x| -2.0 / h2 - dg(x)).collect();
        lower[0] = 0.0;
        upper[0] = 2.0 / h2;
        diag[0] += -2.0 * eta / dx + c * eta;
        upper[m - 1] = 0.0;
        let Some(lu) = Tridiagonal::factor(&lower, &diag, &upper) else {
            break;
        };
        let mut step: Vec<f64> = res.iter().map(|x| -x).collect();
        lu.solve_in_place(&mut step);
        for (a, b) in v.iter_mut().zip(&step) {
            *a += b;
        }
        if scale < 1e-12 {
            break;
        }
    }
    w[..m].copy_from_slice(&v);
    w
}

/// Shape checks on a computed profile.
#[derive(Clone, Debug, Serialize)]
pub struct ProfileShape {
    pub within_unit_interval: bool,
    pub strictly_decreasing: bool,
}

pub fn profile_shape(p: &StationaryProfile) -> ProfileShape {
    let n = p.values.len();
    ProfileShape {
        within_unit_interval: (1..n - 1).all(|i| p.values[i] > 0.0 && p.complement[i] > 0.0),
        strictly_decreasing: (0..n - 1).all(|i| {
            p.values[i + 1] < p.values[i]
                || (p.complement[i + 1] > p.complement[i] && p.values[i] > 0.5)
        }),
    }
}

/// Least-squares slope of `ln series` against `x` over nodes in `[a, b]`.
pub fn log_slope(p: &StationaryProfile, a: f64, b: f64, series: &[f64]) -> Option<f64> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &y) in series.iter().enumerate() {
        let x = p.x(i);
        if x >= a && x <= b && y > 0.0 {
            xs.push(x);
            ys.push(y.ln());
        }
    }
    crate::numerics::ols_line(&xs, &ys).map(|(s, _, _)| s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeRegime {
    /// `max(c_b, -c_m) < c < c_m`: limits should all equal the blocking profile.
    Blocking,
    /// `-c_m < c <= c_b`: limits should all be 1 on compacts.
    Invasion,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRun {
    pub label: String,
    pub settled_at: f64,
    pub cluster: usize,
    /// Sup distance on the window to the reference state (`U` or 1).
    pub distance_to_reference: f64,
    pub trivial: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub regime: ProbeRegime,
    pub window: (f64, f64),
    pub runs: Vec<ProbeRun>,
    pub clusters: usize,
    pub max_distance_to_reference: f64,
    /// A single nontrivial cluster within `1e-3` of the reference.
    pub consistent: bool,
}

pub const SETTLE_INTERVAL: f64 = 10.0;
pub const SETTLE_TOL: f64 = 1e-6;
pub const CLUSTER_TOL: f64 = 1e-3;
const PROBE_T_MAX: f64 = 4000.0;

/// Runs `u0` on a fixed Neumann domain until `||u(t) - u(t - 10)|| <= 1e-6` on the window.
fn settle(
    problem: &Problem,
    u0: &InitialDatum,
    window: (f64, f64),
    t_max: f64,
) -> Result<(Trajectory, bool)> {
    let mut prev: Option<Vec<f64>> = None;
    let mut next_check = SETTLE_INTERVAL;
    let mut settled = false;
    let lo = window.0;
    let hi = window.1;
    let opts = RunOptions {
        snapshot_every: t_max,
        track_levels: Vec::new(),
        diagnostic_every: SETTLE_INTERVAL,
    };
    let traj = integrate_with(problem, u0, t_max, &opts, |st| {
        if st.t + 1e-9 < next_check {
            return false;
        }
        next_check += SETTLE_INTERVAL;
        let cur: Vec<f64> = (0..st.u.len())
            .filter(|&i| {
                let x = st.x_lo + st.dx * i as f64;
                x >= lo && x <= hi
            })
            .map(|i| st.u[i])
            .collect();
        let done = match &prev {
            Some(p) => {
                p.iter()
                    .zip(&cur)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                    <= SETTLE_TOL
            }
            None => false,
        };
        prev = Some(cur);
        settled = done;
        done
    })?;
    Ok((traj, settled))
}

fn window_sup(traj: &Trajectory, window: (f64, f64), g: impl Fn(f64) -> f64) -> f64 {
    let s = traj.last();
    let mut m = 0.0f64;
    for (i, &v) in s.values.iter().enumerate() {
        let x = s.x(i, traj.dx);
        if x >= window.0 && x <= window.1 {
            m = m.max((v - g(x)).abs());
        }
    }
    m
}

/// Long-time limits from ordered initial data: a small KPP bump, an upper datum and
/// `n_inits - 2` intermediate plateaus, clustered at sup distance `1e-3` on the window.
pub fn uniqueness_probe(problem: &Problem, n_inits: usize) -> Result<UniquenessReport> {
    if n_inits < 3 {
        return Err(Error::InvalidParameter(
            "uniqueness probe needs at least 3 initial data".into(),
        ));
    }
    let (c_m, c_b) = problem_speeds(problem)?;
    let c = problem.c;
    if !(c > -c_m && c < c_m) {
        return Err(Error::WrongRegime(format!(
            "probe needs -c_m < c < c_m, got c = {c}"
        )));
    }
    let field = &problem.field;
    let l = field.half_width;
    let regime = if c > c_b {
        ProbeRegime::Blocking
    } else {
        ProbeRegime::Invasion
    };
    let (eta, zeta) = tail_rates(&field.left, &field.right, c);
    let (x_half, reference): (f64, Option<StationaryProfile>) = match regime {
        ProbeRegime::Blocking => {
            let u = solve_blocking_profile(problem, 0.0, 1e-10)?;
            (u.half_length, Some(u))
        }
        ProbeRegime::Invasion => (min_half_length(eta, zeta).clamp(60.0, 200.0), None),
    };
    let window = match regime {
        ProbeRegime::Blocking => (-x_half / 2.0, x_half / 2.0),
        ProbeRegime::Invasion => (-20.0, 20.0),
    };
    let probe = Problem {
        x_lo: -x_half,
        x_hi: x_half,
        grow: GrowPolicy::Fixed,
        ..problem.clone()
    };
    let dx = probe.dx;

    let mut data: Vec<(String, InitialDatum)> = Vec::new();
    let rate = field.left.deriv(0.0);
    let bump = bump_admissible(c, &field.left, 0.1 * (rate - 0.25 * c * c).max(1e-6))?;
    let center = -l - bump.r_half - 5.0;
    data.push((
        format!("bump(eta={:.3e}, R={:.4})", bump.eta, bump.r_half),
        bump.datum(center, dx),
    ));
    for j in 0..n_inits - 2 {
        let h = 0.35 + 0.6 * (j + 1) as f64 / (n_inits - 1) as f64;
        data.push((
            format!("plateau(h={h:.3})"),
            InitialDatum::plateau(h, 20.0, 0.0, 2.0),
        ));
    }
    match regime {
        ProbeRegime::Blocking => {
            let eps = modification_below(&field.right, c)?;
            let sup = static_blocking_supersolution(&field.right, eps, c, l, None)?;
            data.push((
                format!("static_supersolution(eps={eps})"),
                sup.datum(probe.x_lo, probe.x_hi, dx),
            ));
        }
        ProbeRegime::Invasion => {
            let w = 2.0 * x_half - 20.0;
            data.push((
                "plateau(h=1, full)".into(),
                InitialDatum::plateau(1.0, w, 0.0, 2.0),
            ));
        }
    }

    let target = |x: f64| reference.as_ref().map_or(1.0, |u| u.eval(x));
    let mut runs = Vec::new();
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for (label, u0) in data {
        let (traj, settled) = settle(&probe, &u0, window, PROBE_T_MAX)?;
        if !settled {
            return Err(Error::Inconclusive(format!(
                "run {label} did not settle by t = {PROBE_T_MAX}"
            )));
        }
        let last = traj.last();
        let trivial = last.max() < 1e-3;
        let vals: Vec<f64> = (0..last.values.len())
            .filter(|&i| {
                let x = last.x(i, dx);
                x >= window.0 && x <= window.1
            })
            .map(|i| last.values[i])
            .collect();
        let cluster = if trivial {
            usize::MAX
        } else {
            match reps.iter().position(|r| {
                r.iter()
                    .zip(&vals)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                    <= CLUSTER_TOL
            }) {
                Some(k) => k,
                None => {
                    reps.push(vals);
                    reps.len() - 1
                }
            }
        };
        runs.push(ProbeRun {
            label,
            settled_at: traj.t_end,
            cluster,
            distance_to_reference: window_sup(&traj, window, target),
            trivial,
        });
    }
    let max_distance_to_reference = runs
        .iter()
        .filter(|r| !r.trivial)
        .map(|r| r.distance_to_reference)
        .fold(0.0, f64::max);
    let clusters = reps.len();
    Ok(UniquenessReport {
        regime,
        window,
        runs,
        clusters,
        max_distance_to_reference,
        consistent: clusters == 1 && max_distance_to_reference <= CLUSTER_TOL,
    })
}

/// Semi-persistence on `x <= x_bar`: the minimum of `u` over `[l, x_bar]` stays above
/// `1e-3` over the last quarter of the run and does not decay there, where `l` is the
/// left 1/2-level point at three quarters of the run (the left edge when `u >= 1/2` there).
pub fn semi_persistence_check(traj: &Trajectory, x_bar: f64) -> bool {
    let t_end = traj.t_end;
    if t_end <= 0.0 || traj.snapshots.len() < 2 {
        return false;
    }
    let tq = 0.75 * t_end;
    let dx = traj.dx;
    let anchor = traj.nearest(tq);
    let left = if anchor.values.first().is_some_and(|&v| v >= 0.5) {
        anchor.x_lo
    } else {
        match level_position(anchor.x_lo, dx, &anchor.values, 0.5, Side::Left) {
            Some(x) => x,
            None => return false,
        }
    };
    if left > x_bar {
        return false;
    }
    let floor = |s: &crate::solver::Snapshot| {
        let mut m = f64::INFINITY;
        for (i, &v) in s.values.iter().enumerate() {
            let x = s.x(i, dx);
            if x >= left && x <= x_bar {
                m = m.min(v);
            }
        }
        m
    };
    let late: Vec<f64> = traj
        .snapshots
        .iter()
        .filter(|s| s.t >= anchor.t - 1e-9)
        .map(floor)
        .collect();
    let (first, last) = match (late.first(), late.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return false,
    };
    let min = late.iter().cloned().fold(f64::INFINITY, f64::min);
    min.is_finite() && min > 1e-3 && last >= 0.9 * first
}
