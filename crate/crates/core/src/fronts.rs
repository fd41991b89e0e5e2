//! Level sets, spreading-speed fits, the logarithmic-delay fit and profile matching.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{golden_section, ols_line};
use crate::solver::{Snapshot, Trajectory};
use crate::waves::WaveProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Leftmost crossing `E^-`.
    Left,
    /// Rightmost crossing `E^+`.
    Right,
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::Config(format!(
                "unknown side '{other}' (expected left or right)"
            ))),
        }
    }
}

/// Position time series of one level on one side; `None` marks a gap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontTrace {
    pub level: f64,
    pub side: Side,
    pub times: Vec<f64>,
    pub positions: Vec<Option<f64>>,
}

impl FrontTrace {
    pub fn new(level: f64, side: Side) -> Self {
        Self {
            level,
            side,
            times: Vec::new(),
            positions: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, position: Option<f64>) {
        self.times.push(t);
        self.positions.push(position);
    }

    /// Gap-free samples with `t` in `[t1, t2]`.
    pub fn samples_in(&self, t1: f64, t2: f64) -> (Vec<f64>, Vec<f64>) {
        self.times
            .iter()
            .zip(&self.positions)
            .filter_map(|(&t, p)| match p {
                Some(x) if t >= t1 && t <= t2 => Some((t, *x)),
                _ => None,
            })
            .unzip()
    }

    pub fn last_position(&self) -> Option<f64> {
        self.positions.iter().rev().flatten().next().copied()
    }

    /// Position at the sample nearest to `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())?
            .0;
        self.positions[i]
    }
}

/// Leftmost or rightmost crossing of `rho` on the grid `x_lo + i dx`, linearly interpolated.
pub fn level_position(x_lo: f64, dx: f64, u: &[f64], rho: f64, side: Side) -> Option<f64> {
    let n = u.len();
    match side {
        Side::Left => {
            let i = u.iter().position(|&v| v >= rho)?;
            if i == 0 {
                return None;
            }
            let (a, b) = (u[i - 1], u[i]);
            Some(x_lo + dx * ((i - 1) as f64 + (rho - a) / (b - a)))
        }
        Side::Right => {
            let i = u.iter().rposition(|&v| v >= rho)?;
            if i + 1 == n {
                return None;
            }
            let (a, b) = (u[i], u[i + 1]);
            Some(x_lo + dx * (i as f64 + (a - rho) / (a - b)))
        }
    }
}

/// Per-snapshot crossing of `rho`.
pub fn trace_level(traj: &Trajectory, rho: f64, side: Side) -> Result<FrontTrace> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "level must lie in (0,1), got {rho}"
        )));
    }
    let mut tr = FrontTrace::new(rho, side);
    for s in &traj.snapshots {
        tr.push(s.t, level_position(s.x_lo, traj.dx, &s.values, rho, side));
    }
    Ok(tr)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedFit {
    /// `d position / dt`.
    pub speed: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Coefficient of `ln t` removed before the line fit.
    pub log_term: f64,
}

pub const MIN_SPEED_SAMPLES: usize = 50;
pub const MIN_SPEED_WINDOW: f64 = 10.0;

/// Least-squares line through `(t, position)` on `window`.
pub fn fit_speed(trace: &FrontTrace, window: (f64, f64)) -> Result<SpeedFit> {
    fit_speed_with_log(trace, window, 0.0)
}

/// Line fit of `position - log_term ln t`.
pub fn fit_speed_with_log(
    trace: &FrontTrace,
    window: (f64, f64),
    log_term: f64,
) -> Result<SpeedFit> {
    let (t1, t2) = window;
    if t2 - t1 < MIN_SPEED_WINDOW {
        return Err(Error::InsufficientSamples(format!(
            "window [{t1}, {t2}] shorter than {MIN_SPEED_WINDOW}"
        )));
    }
    let (ts, xs) = trace.samples_in(t1, t2);
    if ts.len() < MIN_SPEED_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "{} gap-free samples in [{t1}, {t2}]",
            ts.len()
        )));
    }
    let ys: Vec<f64> = if log_term == 0.0 {
        xs.clone()
    } else {
        ts.iter()
            .zip(&xs)
            .map(|(t, x)| x - log_term * t.ln())
            .collect()
    };
    let (speed, intercept, stderr) = ols_line(&ts, &ys)
        .ok_or_else(|| Error::InsufficientSamples("degenerate time samples".into()))?;
    Ok(SpeedFit {
        speed,
        intercept,
        stderr,
        window,
        samples: ts.len(),
        log_term,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrozenLogFit {
    pub a: f64,
    pub b: f64,
    pub c0: f64,
    pub rms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogDelayFit {
    pub a: f64,
    pub b: f64,
    pub c0: f64,
    pub rms: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub frozen: Option<FrozenLogFit>,
}

pub const MIN_LOG_WINDOW_START: f64 = 50.0;
pub const MIN_LOG_SAMPLES: usize = 200;

fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = y.len();
    let p = columns.len();
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300))
        .collect();
    let a = DMatrix::from_fn(n, p, |i, j| columns[j][i] / scales[j]);
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || smax / smin > 1e10 {
        return Err(Error::FitDegenerate(format!(
            "condition number {:e}",
            smax / smin
        )));
    }
    let b = DVector::from_column_slice(y);
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::FitDegenerate(e.to_string()))?;
    let resid = &a * &x - &b;
    let rms = (resid.norm_squared() / n as f64).sqrt();
    Ok(((0..p).map(|j| x[j] / scales[j]).collect(), rms))
}

/// Fits `position ~ a t + b ln t + c0`; with `frozen_a`, also the fit with `a` fixed.
pub fn fit_log_delay(
    trace: &FrontTrace,
    window: (f64, f64),
    frozen_a: Option<f64>,
) -> Result<LogDelayFit> {
    let (t1, t2) = window;
    if t1 < MIN_LOG_WINDOW_START {
        return Err(Error::InvalidParameter(format!(
            "log-delay window must start at t >= {MIN_LOG_WINDOW_START}"
        )));
    }
    let (ts, xs) = trace.samples_in(t1, t2);
    if ts.len() < MIN_LOG_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "{} gap-free samples in [{t1}, {t2}]",
            ts.len()
        )));
    }
    let logs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ones = vec![1.0; ts.len()];
    let (coef, rms) = least_squares(&[ts.clone(), logs.clone(), ones.clone()], &xs)?;
    let frozen = match frozen_a {
        Some(a) => {
            let y: Vec<f64> = ts.iter().zip(&xs).map(|(t, x)| x - a * t).collect();
            let (c, rms) = least_squares(&[logs, ones], &y)?;
            Some(FrozenLogFit {
                a,
                b: c[0],
                c0: c[1],
                rms,
            })
        }
        None => None,
    };
    Ok(LogDelayFit {
        a: coef[0],
        b: coef[1],
        c0: coef[2],
        rms,
        window,
        samples: ts.len(),
        frozen,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `phi(x - sigma t + xi)`.
    Direct,
    /// `phi(-x - sigma t + xi)`.
    Mirrored,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileMatch {
    pub shift: f64,
    pub sup_error: f64,
    pub window: (f64, f64),
    pub sigma: f64,
    pub t: f64,
    pub orientation: Orientation,
}

/// Snapshot at `t`, linearly interpolated in time between bracketing snapshots when needed.
pub fn snapshot_at(traj: &Trajectory, t: f64) -> Snapshot {
    let snaps = &traj.snapshots;
    let j = snaps.partition_point(|s| s.t < t);
    if j == 0 {
        return snaps[0].clone();
    }
    if j >= snaps.len() {
        return snaps[snaps.len() - 1].clone();
    }
    let (a, b) = (&snaps[j - 1], &snaps[j]);
    if (b.t - t).abs() < 1e-12 {
        return b.clone();
    }
    let w = (t - a.t) / (b.t - a.t);
    let values = (0..b.values.len())
        .map(|i| {
            let x = b.x(i, traj.dx);
            (1.0 - w) * a.value_at(x, traj.dx) + w * b.values[i]
        })
        .collect();
    Snapshot {
        t,
        x_lo: b.x_lo,
        values,
    }
}

/// Best shift `xi` of the wave against the snapshot at `t` over the window `[x_a, x_b]`.
pub fn match_profile(
    traj: &Trajectory,
    t: f64,
    wave: &WaveProfile,
    sigma: f64,
    window: (f64, f64),
    orientation: Orientation,
) -> Result<ProfileMatch> {
    let snap = snapshot_at(traj, t);
    let dx = traj.dx;
    let (xa, xb) = window;
    if !(xa < xb) || xa < snap.x_lo - 1e-9 || xb > snap.x_hi(dx) + 1e-9 {
        return Err(Error::WindowOutsideDomain { lo: xa, hi: xb });
    }
    let nodes: Vec<(f64, f64)> = snap
        .values
        .iter()
        .enumerate()
        .map(|(i, &u)| (snap.x(i, dx), u))
        .filter(|(x, _)| *x >= xa - 1e-9 && *x <= xb + 1e-9)
        .collect();
    if nodes.is_empty() {
        return Err(Error::WindowOutsideDomain { lo: xa, hi: xb });
    }
    let arg = |x: f64, xi: f64| match orientation {
        Orientation::Direct => x - sigma * t + xi,
        Orientation::Mirrored => -x - sigma * t + xi,
    };
    let err = |xi: f64| {
        nodes
            .iter()
            .map(|&(x, u)| (u - wave.eval(arg(x, xi))).abs())
            .fold(0.0, f64::max)
    };
    let pad = (xb - xa) + 20.0;
    let (lo, hi) = match orientation {
        Orientation::Direct => (sigma * t - xb - pad, sigma * t - xa + pad),
        Orientation::Mirrored => (xa + sigma * t - pad, xb + sigma * t + pad),
    };
    let (k_lo, k_hi) = ((lo / dx).floor() as i64, (hi / dx).ceil() as i64);
    let mut best = (f64::NAN, f64::INFINITY);
    for k in k_lo..=k_hi {
        let xi = k as f64 * dx;
        let e = err(xi);
        if e < best.1 {
            best = (xi, e);
        }
    }
    let refined = golden_section(err, best.0 - dx, best.0 + dx, 1e-4 * dx);
    let (shift, sup_error) = if refined.1 < best.1 { refined } else { best };
    Ok(ProfileMatch {
        shift,
        sup_error,
        window,
        sigma,
        t,
        orientation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, t1: f64, t2: f64, n: usize) -> FrontTrace {
        let mut tr = FrontTrace::new(0.5, Side::Left);
        for i in 0..n {
            let t = t1 + (t2 - t1) * i as f64 / (n - 1) as f64;
            tr.push(t, Some(f(t)));
        }
        tr
    }

    #[test]
    fn crossing_of_monotone_snapshot() {
        let u: Vec<f64> = (0..21).map(|i| 1.0 - i as f64 / 20.0).collect();
        let l = level_position(0.0, 0.5, &u, 0.3, Side::Left);
        let r = level_position(0.0, 0.5, &u, 0.3, Side::Right);
        assert!(l.is_none());
        assert!((r.unwrap() - 7.0).abs() < 1e-12);
        let bump: Vec<f64> = (0..41)
            .map(|i| 1.0 - ((i as f64 - 20.0) / 10.0).powi(2))
            .collect();
        let l = level_position(-10.0, 0.5, &bump, 0.75, Side::Left).unwrap();
        let r = level_position(-10.0, 0.5, &bump, 0.75, Side::Right).unwrap();
        assert!((l + 2.5).abs() < 0.05 && (r - 2.5).abs() < 0.05);
    }

    #[test]
    fn gap_when_below_level() {
        let u = vec![0.1; 10];
        assert!(level_position(0.0, 1.0, &u, 0.5, Side::Left).is_none());
        assert!(level_position(0.0, 1.0, &u, 0.5, Side::Right).is_none());
    }

    #[test]
    fn translation_equivariance() {
        let u: Vec<f64> = (0..50)
            .map(|i| (-((i as f64 - 25.0) * 0.2).powi(2)).exp())
            .collect();
        let a = level_position(0.0, 0.2, &u, 0.4, Side::Right).unwrap();
        let b = level_position(3.4, 0.2, &u, 0.4, Side::Right).unwrap();
        assert!((b - a - 3.4).abs() < 1e-12);
    }

    #[test]
    fn speed_of_synthetic_line() {
        let tr = synthetic(|t| 3.0 * t + 1.0, 0.0, 20.0, 100);
        let fit = fit_speed(&tr, (0.0, 20.0)).unwrap();
        assert!(
            (fit.speed - 3.0).abs() < 1e-10 && fit.stderr < 1e-8,
            "{fit:?}"
        );
        assert!(matches!(
            fit_speed(&tr, (0.0, 5.0)),
            Err(Error::InsufficientSamples(_))
        ));
        let sparse = synthetic(|t| t, 0.0, 20.0, 30);
        assert!(matches!(
            fit_speed(&sparse, (0.0, 20.0)),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn log_delay_exact_recovery() {
        let tr = synthetic(|t| -2.0 * t + 1.5 * t.ln() + 7.0, 50.0, 800.0, 2000);
        let fit = fit_log_delay(&tr, (100.0, 800.0), Some(-2.0)).unwrap();
        assert!(
            (fit.a + 2.0).abs() < 1e-6 && (fit.b - 1.5).abs() < 1e-6 && (fit.c0 - 7.0).abs() < 1e-6
        );
        let frozen = fit.frozen.unwrap();
        assert!((frozen.b - 1.5).abs() < 1e-6);
        assert!(fit_log_delay(&tr, (10.0, 800.0), None).is_err());
    }

    #[test]
    fn degenerate_design_is_reported() {
        let mut tr = FrontTrace::new(0.5, Side::Left);
        for _ in 0..300 {
            tr.push(100.0, Some(1.0));
        }
        assert!(matches!(
            fit_log_delay(&tr, (60.0, 800.0), None),
            Err(Error::FitDegenerate(_))
        ));
    }

    #[test]
    fn log_fit_without_log_term() {
        let tr = synthetic(
            |t| 0.4 * t - 3.0 + 0.05 * (t * 0.37).sin(),
            100.0,
            700.0,
            3000,
        );
        let fit = fit_log_delay(&tr, (100.0, 700.0), None).unwrap();
        assert!(fit.b.abs() <= 0.1, "{}", fit.b);
    }
}
