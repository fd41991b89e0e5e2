//! Explicit sub- and supersolutions: the compactly supported KPP bump, the
//! Fife-McLeod front barriers and the static blocking supersolution, with
//! pointwise residual certification on grids.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reactions::{build_modified, Reaction};
use crate::solver::InitialDatum;
use crate::waves::{bistable_front, kpp_min_speed, WaveProfile};

/// Sign tolerance of every residual certificate.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Multiplicative slack applied to each recipe inequality.
pub const SLACK: f64 = 0.8;

/// `eta * Psi` with `Psi(x) = exp(-c x / 2) cos(pi x / (2R))` on `[-R, R]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BumpSpec {
    pub r_half: f64,
    pub r_min: f64,
    pub eta: f64,
    pub c: f64,
    pub eps: f64,
}

impl BumpSpec {
    fn wavenumber(&self) -> f64 {
        std::f64::consts::PI / (2.0 * self.r_half)
    }

    /// `(Psi, Psi', Psi'')` at `x`, zero outside `[-R, R]`.
    pub fn psi(&self, x: f64) -> (f64, f64, f64) {
        if x.abs() >= self.r_half {
            return (0.0, 0.0, 0.0);
        }
        let k = self.wavenumber();
        let h = 0.5 * self.c;
        let e = (-h * x).exp();
        let (co, si) = ((k * x).cos(), (k * x).sin());
        let p = e * co;
        let d1 = e * (-h * co - k * si);
        let d2 = e * ((h * h - k * k) * co + 2.0 * h * k * si);
        (p, d1, d2)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eta * self.psi(x).0
    }

    /// `-(eta Psi)'' - c (eta Psi)' - f_m(eta Psi)`; nonpositive for a subsolution.
    pub fn residual(&self, fm: &Reaction, x: f64) -> f64 {
        residual_at(fm, self.c, self.eta, self.psi(x))
    }

    /// Largest residual over `n` interior grid points of `(-R, R)`.
    pub fn max_residual(&self, fm: &Reaction, n: usize) -> (f64, f64) {
        interior_grid(self.r_half, n)
            .map(|x| (self.residual(fm, x), x))
            .fold(
                (f64::NEG_INFINITY, 0.0),
                |a, b| if b.0 > a.0 { b } else { a },
            )
    }

    /// The bump centered at `center`, sampled on a lattice of spacing `dx`.
    pub fn datum(&self, center: f64, dx: f64) -> InitialDatum {
        let lo = center - self.r_half;
        InitialDatum::sample(lo, center + self.r_half, dx, |x| {
            self.value(x - center).max(0.0)
        })
    }
}

fn residual_at(fm: &Reaction, c: f64, eta: f64, (p, d1, d2): (f64, f64, f64)) -> f64 {
    -eta * d2 - c * eta * d1 - fm.eval(eta * p)
}

fn interior_grid(r: f64, n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |i| -r + 2.0 * r * i as f64 / (n + 1) as f64)
}

const BUMP_GRID: usize = 4001;

/// The admissible bump: `R` is the smallest admissible half-width plus 10%, and
/// `eta` the largest amplitude (by bisection) for which the subsolution inequality
/// holds on the grid.
pub fn bump_admissible(c: f64, fm: &Reaction, eps: f64) -> Result<BumpSpec> {
    let c_m = kpp_min_speed(fm)?;
    let rate = fm.deriv(0.0);
    if !(eps > 0.0 && eps < rate) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, f'(0)) = (0, {rate})"
        )));
    }
    if c.abs() >= c_m {
        return Err(Error::NoAdmissibleBump(format!(
            "|c| = {} >= c_m = {c_m}",
            c.abs()
        )));
    }
    let rad = rate - eps - 0.25 * c * c;
    if rad <= 0.0 {
        return Err(Error::NoAdmissibleBump(format!(
            "f'(0) - eps - c^2/4 = {rad} <= 0"
        )));
    }
    let r_min = 0.5 * std::f64::consts::PI / rad.sqrt();
    let mut spec = BumpSpec {
        r_half: 1.1 * r_min,
        r_min,
        eta: 1.0,
        c,
        eps,
    };
    let ok = |eta: f64| {
        let s = BumpSpec { eta, ..spec };
        s.max_residual(fm, BUMP_GRID).0 <= 0.0
    };
    if ok(1.0) {
        return Ok(spec);
    }
    let (mut lo, mut hi) = (1e-12, 1.0);
    if !ok(lo) {
        return Err(Error::NoAdmissibleBump(
            "no amplitude satisfies the inequality".into(),
        ));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    spec.eta = lo;
    Ok(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Rightward,
    Leftward,
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rightward" => Ok(Direction::Rightward),
            "leftward" => Ok(Direction::Leftward),
            _ => Err(Error::InvalidParameter(format!("unknown direction {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierKind {
    Super,
    Sub,
}

/// Constants of a Fife-McLeod barrier `phi(xi) +/- delta e^{-delta tau} +/- delta e^{-mu y}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FifeMcLeodParams {
    pub direction: Direction,
    pub c: f64,
    pub c_b: f64,
    pub c_m: f64,
    pub mu: f64,
    pub delta: f64,
    /// Plateau half-width `C` of the profile.
    pub c_plateau: f64,
    pub kappa: f64,
    pub omega: f64,
    /// Envelope offset: `B` rightward, `A` leftward.
    pub offset: f64,
    /// `max |f_b'|` over the recipe range.
    pub fmax: f64,
    pub t0: f64,
    pub x0: f64,
}

/// One recipe inequality with its margin (nonnegative when it holds).
#[derive(Clone, Debug, Serialize)]
pub struct RecipeCheck {
    pub name: &'static str,
    pub margin: f64,
    pub holds: bool,
}

fn max_abs_deriv(f: &Reaction, lo: f64, hi: f64) -> f64 {
    let n = 2000;
    (0..=n)
        .map(|i| f.deriv(lo + (hi - lo) * i as f64 / n as f64).abs())
        .fold(0.0, f64::max)
}

fn max_deriv(f: &Reaction, lo: f64, hi: f64) -> f64 {
    let n = 2000;
    (0..=n)
        .map(|i| f.deriv(lo + (hi - lo) * i as f64 / n as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

impl FifeMcLeodParams {
    /// Range of `u` on which the slope bounds are taken.
    fn range(&self) -> (f64, f64) {
        match self.direction {
            Direction::Rightward => (-2.0 * self.delta, 1.0 + 2.0 * self.delta),
            Direction::Leftward => (0.0, 1.0 + 2.0 * self.delta),
        }
    }

    /// Re-checks every recipe inequality against `fb` and `phi`, independently of the construction.
    pub fn recipe_checks(&self, fb: &Reaction, phi: &WaveProfile) -> Vec<RecipeCheck> {
        let (d, mu, c) = (self.delta, self.mu, self.c);
        let (f0, f1) = (fb.deriv(0.0), fb.deriv(1.0));
        let (lo, hi) = self.range();
        let m = max_abs_deriv(fb, lo, hi);
        let mut out = Vec::new();
        let mut push = |name, margin: f64| {
            out.push(RecipeCheck {
                name,
                margin,
                holds: margin >= 0.0,
            })
        };
        let root = 0.5 * (c + (c * c + 2.0 * f0.abs().min(f1.abs())).sqrt());
        match self.direction {
            Direction::Rightward => {
                push("mu_bound", (m / self.c_m).min(root) - mu);
                push("mu_positive", mu);
                push(
                    "delta_bound",
                    (mu * (self.c_b - c))
                        .min(0.5)
                        .min(f0.abs() / 2.0)
                        .min(f1.abs() / 2.0)
                        - d,
                );
                push(
                    "slope_near_zero",
                    0.5 * f0 - max_deriv(fb, -2.0 * d, 3.0 * d),
                );
                push(
                    "slope_near_one",
                    0.5 * f1 - max_deriv(fb, 1.0 - 3.0 * d, 1.0 + 2.0 * d),
                );
            }
            Direction::Leftward => {
                push("mu_bound", root - mu);
                push("mu_positive", mu);
                push(
                    "delta_bound",
                    (-mu * (self.c_b + c))
                        .min(0.2)
                        .min(f0.abs() / 2.0)
                        .min(f1.abs() / 2.0)
                        - d,
                );
                push("slope_near_zero", 0.5 * f0 - max_deriv(fb, 0.0, 3.0 * d));
                push(
                    "slope_near_one",
                    0.5 * f1 - max_deriv(fb, 1.0 - d, 1.0 + 2.0 * d),
                );
            }
        }
        push("delta_positive", d);
        let cp = self.c_plateau;
        let upper_plateau = cp_grid(cp)
            .map(|s| phi.eval(-s) - (1.0 - d / 2.0))
            .fold(f64::INFINITY, f64::min);
        let lower_plateau = cp_grid(cp)
            .map(|s| d - phi.eval(s))
            .fold(f64::INFINITY, f64::min);
        push("plateau_left", upper_plateau);
        push("plateau_right", lower_plateau);
        let steep = (0..=4000)
            .map(|i| -phi.slope(-cp + 2.0 * cp * i as f64 / 4000.0))
            .fold(f64::INFINITY, f64::min);
        push("kappa_bound", steep - self.kappa);
        push("omega_bound", self.kappa * self.omega - 2.0 * d - m);
        let g = m + mu * mu - c * mu;
        match self.direction {
            Direction::Rightward => {
                push("offset_above_omega", self.offset - self.omega);
                push("envelope", d - g * (-mu * (self.offset - self.omega)).exp());
            }
            Direction::Leftward => {
                push("offset_above_omega", self.offset - self.omega - cp);
                push(
                    "envelope",
                    d - g * (-mu * (self.offset - self.omega - cp)).exp(),
                );
            }
        }
        out
    }

    /// Barrier value and its residual `N w = w_t - w_xx - c w_x - f_b(w)` at `(t, x)`,
    /// plus the shifted front coordinate.
    fn evaluate(
        &self,
        fb: &Reaction,
        phi: &WaveProfile,
        kind: BarrierKind,
        t: f64,
        x: f64,
    ) -> (f64, f64, f64) {
        let tau = t - self.t0;
        let y = x - self.x0;
        let (d, mu, om, c) = (self.delta, self.mu, self.omega, self.c);
        let et = (-d * tau).exp();
        let ey = (-mu * y).exp();
        let sg = match kind {
            BarrierKind::Super => 1.0,
            BarrierKind::Sub => -1.0,
        };
        // xi = orient * y - v tau + sg * omega (e^{-delta tau} - 1) - shift
        let (orient, v, shift) = match (self.direction, kind) {
            (Direction::Rightward, BarrierKind::Super) => {
                (1.0, self.c_b - c, self.offset + self.c_plateau)
            }
            (Direction::Rightward, BarrierKind::Sub) => {
                (1.0, self.c_b - c, self.offset + self.c_plateau)
            }
            (Direction::Leftward, _) => (-1.0, self.c_b + c, -self.offset),
        };
        let xi = orient * y - v * tau + sg * om * (et - 1.0) - shift;
        let (p, p1) = phi.eval_with_slope(xi);
        let p2 = phi.second(xi);
        let xi_t = -v - sg * om * d * et;
        let xi_x = orient;
        let w = p + sg * d * (et + ey);
        let w_t = p1 * xi_t - sg * d * d * et;
        let w_x = p1 * xi_x - sg * d * mu * ey;
        let w_xx = p2 * xi_x * xi_x + sg * d * mu * mu * ey;
        (w, w_t - w_xx - c * w_x - fb.eval(w), xi)
    }

    /// Position `y = x - x0` of the front `xi = 0` of the supersolution at time `tau = t - t0`.
    pub fn front_track(&self, tau: f64) -> f64 {
        let e = (-self.delta * tau).exp();
        match self.direction {
            Direction::Rightward => {
                (self.c_b - self.c) * tau + self.omega * (1.0 - e) + self.offset + self.c_plateau
            }
            Direction::Leftward => {
                -(self.c_b + self.c) * tau - self.omega * (1.0 - e) + self.offset
            }
        }
    }

    /// Grids with spacing `h` on `[t0, t0 + t_span] x [x0, x0 + y_max]`, where `y_max`
    /// clears the front track by `margin`.
    pub fn certification_grid(&self, t_span: f64, h: f64, margin: f64) -> (Vec<f64>, Vec<f64>) {
        let t_grid = grid(self.t0, self.t0 + t_span, h);
        let y_max = t_grid
            .iter()
            .map(|&t| self.front_track(t - self.t0))
            .fold(0.0, f64::max)
            + self.c_plateau
            + margin;
        (t_grid, grid(self.x0, self.x0 + y_max, h))
    }

    pub fn barrier_value(
        &self,
        fb: &Reaction,
        phi: &WaveProfile,
        kind: BarrierKind,
        t: f64,
        x: f64,
    ) -> f64 {
        self.evaluate(fb, phi, kind, t, x).0
    }

    /// Lower bound on `sg * N w` from the case estimate at `(tau, y, xi)`.
    fn certificate(&self, fb: &Reaction, case: usize, tau: f64, y: f64) -> f64 {
        let (d, mu, c) = (self.delta, self.mu, self.c);
        let et = d * (-d * tau).exp();
        let ey = d * (-mu * y).exp();
        match case {
            0 => {
                let h = -0.5 * fb.deriv(1.0);
                (h - d) * et + (h - mu * mu + c * mu) * ey
            }
            2 => {
                let h = -0.5 * fb.deriv(0.0);
                (h - d) * et + (h - mu * mu + c * mu) * ey
            }
            _ => (self.kappa * self.omega - 2.0 * d - self.fmax) * et,
        }
    }
}

fn cp_grid(cp: f64) -> impl Iterator<Item = f64> + Clone {
    (0..=400).map(move |i| cp + 40.0 * i as f64 / 400.0)
}

/// Fife-McLeod constants with every recipe inequality satisfied with 20% slack.
///
/// `c_m` enters only the rightward bound on `mu`.
pub fn fm_params(
    phi: &WaveProfile,
    c: f64,
    c_m: f64,
    direction: Direction,
) -> Result<FifeMcLeodParams> {
    let fb = &phi.reaction;
    if !fb.is_bistable_type() {
        return Err(Error::WrongClass {
            expected: "bistable",
            got: fb.class().name(),
        });
    }
    let c_b = phi.speed;
    match direction {
        Direction::Rightward if !(c < c_b) => {
            return Err(Error::WrongRegime(format!(
                "rightward barrier needs c < c_b = {c_b}, got {c}"
            )))
        }
        Direction::Leftward if !(c <= -c_m && c + c_b < 0.0) => {
            return Err(Error::WrongRegime(format!(
                "leftward barrier needs c <= -c_m and c + c_b < 0, got c = {c}"
            )))
        }
        _ => {}
    }
    let (f0, f1) = (fb.deriv(0.0), fb.deriv(1.0));
    let root = 0.5 * (c + (c * c + 2.0 * f0.abs().min(f1.abs())).sqrt());
    let mu = match direction {
        // the max|f_b'| bound is evaluated on [0, 1], which is contained in the final range
        Direction::Rightward => SLACK * (max_abs_deriv(fb, 0.0, 1.0) / c_m).min(root),
        Direction::Leftward => SLACK * root,
    };
    let cap = match direction {
        Direction::Rightward => (mu * (c_b - c)).min(0.5),
        Direction::Leftward => (-mu * (c_b + c)).min(0.2),
    }
    .min(f0.abs() / 2.0)
    .min(f1.abs() / 2.0);
    // Largest delta with the slope conditions, by bisection.
    let slopes_ok = |d: f64| match direction {
        Direction::Rightward => {
            max_deriv(fb, -2.0 * d, 3.0 * d) <= 0.5 * f0
                && max_deriv(fb, 1.0 - 3.0 * d, 1.0 + 2.0 * d) <= 0.5 * f1
        }
        Direction::Leftward => {
            max_deriv(fb, 0.0, 3.0 * d) <= 0.5 * f0
                && max_deriv(fb, 1.0 - d, 1.0 + 2.0 * d) <= 0.5 * f1
        }
    };
    let (mut lo, mut hi) = (0.0, cap);
    if slopes_ok(hi) {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slopes_ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let delta = SLACK * lo.min(cap);
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("no admissible delta".into()));
    }
    let fmax = match direction {
        Direction::Rightward => max_abs_deriv(fb, -2.0 * delta, 1.0 + 2.0 * delta),
        Direction::Leftward => max_abs_deriv(fb, 0.0, 1.0 + 2.0 * delta),
    };
    let s_hi = phi
        .crossing(1.0 - SLACK * delta / 2.0)
        .ok_or_else(|| Error::NoConnection("profile misses 1 - delta/2".into()))?;
    let s_lo = phi
        .crossing(SLACK * delta)
        .ok_or_else(|| Error::NoConnection("profile misses delta".into()))?;
    let c_plateau = s_hi.abs().max(s_lo.abs());
    let steep = (0..=4000)
        .map(|i| -phi.slope(-c_plateau + 2.0 * c_plateau * i as f64 / 4000.0))
        .fold(f64::INFINITY, f64::min);
    let kappa = SLACK * steep;
    let omega = (2.0 * delta + fmax) / (SLACK * kappa);
    let g = fmax + mu * mu - c * mu;
    let gap = if g > delta {
        (g / delta).ln() / mu / SLACK
    } else {
        1.0
    };
    let offset = match direction {
        Direction::Rightward => omega + gap,
        Direction::Leftward => omega + c_plateau + gap,
    };
    Ok(FifeMcLeodParams {
        direction,
        c,
        c_b,
        c_m,
        mu,
        delta,
        c_plateau,
        kappa,
        omega,
        offset,
        fmax,
        t0: 0.0,
        x0: 0.0,
    })
}

/// Worst point of one proof case.
#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub name: &'static str,
    pub points: usize,
    /// Smallest signed residual `sg * N w` (nonnegative when the sign is right).
    pub worst_residual: f64,
    pub worst_at: (f64, f64),
    /// Smallest lower bound delivered by the case estimate.
    pub worst_certificate: f64,
    pub residual_pass: bool,
    pub certificate_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub kind: BarrierKind,
    pub direction: Direction,
    pub points: usize,
    pub cases: Vec<CaseReport>,
    pub worst_residual: f64,
    pub worst_at: (f64, f64),
    pub passed: bool,
}

impl ResidualReport {
    pub fn case(&self, name: &str) -> Option<&CaseReport> {
        self.cases.iter().find(|c| c.name == name)
    }

    pub fn failing_cases(&self) -> Vec<&'static str> {
        self.cases
            .iter()
            .filter(|c| !(c.residual_pass && c.certificate_pass))
            .map(|c| c.name)
            .collect()
    }
}

const CASE_NAMES: [&str; 3] = ["xi_below_minus_c", "xi_within_c", "xi_above_c"];

/// Evaluates the barrier residual at every grid point, sorted into the three proof cases.
///
/// A point passes when `N w >= -1e-10` (super) or `N w <= 1e-10` (sub); each case also
/// carries the lower bound of its analytic estimate, which must be nonnegative.
pub fn check_barrier_residual(
    params: &FifeMcLeodParams,
    fb: &Reaction,
    phi: &WaveProfile,
    t_grid: &[f64],
    x_grid: &[f64],
    kind: BarrierKind,
) -> ResidualReport {
    let sg = match kind {
        BarrierKind::Super => 1.0,
        BarrierKind::Sub => -1.0,
    };
    let cp = params.c_plateau;
    let blank = || CaseAcc {
        points: 0,
        worst: f64::INFINITY,
        at: (0.0, 0.0),
        cert: f64::INFINITY,
    };
    let acc = t_grid
        .par_iter()
        .map(|&t| {
            let mut acc = [blank(), blank(), blank()];
            for &x in x_grid {
                let (_, n, xi) = params.evaluate(fb, phi, kind, t, x);
                let case = if xi <= -cp {
                    0
                } else if xi >= cp {
                    2
                } else {
                    1
                };
                let a = &mut acc[case];
                a.points += 1;
                let r = sg * n;
                if r < a.worst {
                    a.worst = r;
                    a.at = (t, x);
                }
                let cert = params.certificate(fb, case, t - params.t0, x - params.x0);
                a.cert = a.cert.min(cert);
            }
            acc
        })
        .reduce(
            || [blank(), blank(), blank()],
            |a, b| {
                let mut out = a;
                for (o, b) in out.iter_mut().zip(b) {
                    o.points += b.points;
                    if b.worst < o.worst {
                        o.worst = b.worst;
                        o.at = b.at;
                    }
                    o.cert = o.cert.min(b.cert);
                }
                out
            },
        );
    let cases: Vec<CaseReport> = acc
        .iter()
        .zip(CASE_NAMES)
        .map(|(a, name)| CaseReport {
            name,
            points: a.points,
            worst_residual: if a.points == 0 { 0.0 } else { a.worst },
            worst_at: a.at,
            worst_certificate: if a.points == 0 { 0.0 } else { a.cert },
            residual_pass: a.points == 0 || a.worst >= -RESIDUAL_TOL,
            certificate_pass: a.points == 0 || a.cert >= -RESIDUAL_TOL,
        })
        .collect();
    let (worst_residual, worst_at) = cases
        .iter()
        .filter(|c| c.points > 0)
        .map(|c| (c.worst_residual, c.worst_at))
        .fold(
            (f64::INFINITY, (0.0, 0.0)),
            |a, b| if b.0 < a.0 { b } else { a },
        );
    let passed = cases.iter().all(|c| c.residual_pass && c.certificate_pass);
    ResidualReport {
        kind,
        direction: params.direction,
        points: t_grid.len() * x_grid.len(),
        cases,
        worst_residual,
        worst_at,
        passed,
    }
}

struct CaseAcc {
    points: usize,
    worst: f64,
    at: (f64, f64),
    cert: f64,
}

/// Uniform grid `lo, lo + h, ..., hi`.
pub fn grid(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let n = ((hi - lo) / h).round() as usize;
    (0..=n).map(|i| lo + h * i as f64).collect()
}

/// `u(x) = phibar_eps(max(x - L, 0) - A)`: constant at least 1 left of `L`, the modified front beyond.
#[derive(Clone, Debug, Serialize)]
pub struct StaticSupersolution {
    pub eps: f64,
    pub a_shift: f64,
    pub half_width: f64,
    pub c: f64,
    pub c_b: f64,
    pub c_b_eps: f64,
    pub flat_value: f64,
    pub min_residual: f64,
    pub min_residual_at: f64,
    pub flat_at_least_one: bool,
    pub passed: bool,
    #[serde(skip)]
    pub profile: WaveProfile,
}

impl StaticSupersolution {
    pub fn value(&self, x: f64) -> f64 {
        self.profile
            .eval((x - self.half_width).max(0.0) - self.a_shift)
    }

    pub fn datum(&self, lo: f64, hi: f64, dx: f64) -> InitialDatum {
        InitialDatum::sample(lo, hi, dx, |x| self.value(x))
    }
}

/// Smallest shift `A` with `phibar_eps(-A) >= 1 + eps/2`.
pub fn static_shift(profile: &WaveProfile, eps: f64) -> Option<f64> {
    profile.crossing(1.0 + 0.5 * eps).map(|s| -s)
}

/// Builds and certifies the static supersolution for the blocking regime `c > c_b`.
///
/// Passing `a_shift = None` picks the smallest shift that lifts the flat part to `1 + eps/2`.
pub fn static_blocking_supersolution(
    fb: &Reaction,
    eps: f64,
    c: f64,
    half_width: f64,
    a_shift: Option<f64>,
) -> Result<StaticSupersolution> {
    let (k, theta) = match *fb {
        Reaction::CubicBistable { k, theta } => (k, theta),
        _ => {
            return Err(Error::WrongClass {
                expected: "bistable",
                got: fb.class().name(),
            })
        }
    };
    let c_b = bistable_front(fb, 1e-8)?.speed;
    if !(c > c_b) {
        return Err(Error::WrongRegime(format!(
            "static supersolution needs c > c_b = {c_b}, got {c}"
        )));
    }
    let modified = build_modified(k, theta, eps)?;
    let profile = bistable_front(&modified, 1e-8)?;
    let c_b_eps = profile.speed;
    let a = match a_shift {
        Some(a) => a,
        None => static_shift(&profile, eps)
            .ok_or_else(|| Error::NoConnection("modified profile misses 1 + eps/2".into()))?,
    };
    let flat_value = profile.eval(-a);
    let mut worst = (f64::INFINITY, half_width);
    let n = 8000;
    let span = a + 60.0;
    for i in 1..=n {
        let x = half_width + span * i as f64 / n as f64;
        let s = x - half_width - a;
        let (p, p1) = profile.eval_with_slope(s);
        let p2 = profile.second(s);
        let r = -p2 - c * p1 - fb.eval(p);
        if r < worst.0 {
            worst = (r, x);
        }
    }
    let flat_residual = -fb.eval(flat_value);
    if flat_residual < worst.0 {
        worst = (flat_residual, half_width);
    }
    let flat_at_least_one = flat_value >= 1.0;
    let passed = worst.0 >= -RESIDUAL_TOL && flat_at_least_one && c_b_eps < c;
    Ok(StaticSupersolution {
        eps,
        a_shift: a,
        half_width,
        c,
        c_b,
        c_b_eps,
        flat_value,
        min_residual: worst.0,
        min_residual_at: worst.1,
        flat_at_least_one,
        passed,
        profile,
    })
}

/// Largest `eps` on the ladder `(1-theta)/4 / 2^j` whose modified speed stays below `c`.
pub fn modification_below(fb: &Reaction, c: f64) -> Result<f64> {
    let theta = fb.theta().ok_or(Error::WrongClass {
        expected: "bistable",
        got: fb.class().name(),
    })?;
    let k = match *fb {
        Reaction::CubicBistable { k, .. } => k,
        _ => {
            return Err(Error::WrongClass {
                expected: "bistable",
                got: fb.class().name(),
            })
        }
    };
    let mut eps = 0.25 * (1.0 - theta);
    for _ in 0..12 {
        let m = build_modified(k, theta, eps)?;
        if bistable_front(&m, 1e-8)?.speed < c {
            return Ok(eps);
        }
        eps *= 0.5;
    }
    Err(Error::BadModification(format!(
        "no modification keeps the speed below c = {c}"
    )))
}

/// Named certification runs of the command line and the acceptance suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierCase {
    RightwardSuper,
    RightwardSub,
    LeftwardSuper,
    /// Rightward supersolution with `omega` divided by 10; expected to fail.
    RightwardOmegaTenth,
    Bump,
    Static,
}

impl BarrierCase {
    pub const ALL: [BarrierCase; 6] = [
        BarrierCase::RightwardSuper,
        BarrierCase::RightwardSub,
        BarrierCase::LeftwardSuper,
        BarrierCase::RightwardOmegaTenth,
        BarrierCase::Bump,
        BarrierCase::Static,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BarrierCase::RightwardSuper => "rightward-super",
            BarrierCase::RightwardSub => "rightward-sub",
            BarrierCase::LeftwardSuper => "leftward-super",
            BarrierCase::RightwardOmegaTenth => "rightward-omega-tenth",
            BarrierCase::Bump => "bump",
            BarrierCase::Static => "static",
        }
    }

    /// Advection used when none is given.
    pub fn default_c(self) -> f64 {
        match self {
            BarrierCase::LeftwardSuper => -2.0,
            BarrierCase::Static => 1.0,
            _ => 0.0,
        }
    }
}

impl std::str::FromStr for BarrierCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BarrierCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = BarrierCase::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!(
                    "unknown barrier case '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// One checked inequality; `worst_margin >= 0` when it holds.
#[derive(Clone, Debug, Serialize)]
pub struct Inequality {
    pub name: String,
    pub worst_margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub case: BarrierCase,
    pub k: f64,
    pub theta: f64,
    pub c: f64,
    pub grid_points: usize,
    pub inequalities: Vec<Inequality>,
    pub passed: bool,
    pub residual: Option<ResidualReport>,
    pub params: Option<FifeMcLeodParams>,
    pub bump: Option<BumpSpec>,
    pub static_supersolution: Option<StaticSupersolution>,
}

impl VerifyReport {
    pub fn inequality(&self, name: &str) -> Option<&Inequality> {
        self.inequalities.iter().find(|q| q.name == name)
    }
}

/// Time span, spacing and margin of the Fife-McLeod certification grids.
pub const CERT_T_SPAN: f64 = 200.0;
pub const CERT_H: f64 = 0.25;
pub const CERT_MARGIN: f64 = 40.0;
/// Duration, snapshot spacing and decrease tolerance of the bump monotonicity run.
pub const BUMP_RUN_T: f64 = 50.0;
pub const BUMP_RUN_EVERY: f64 = 0.5;
pub const MONOTONE_TOL: f64 = 1e-10;

/// Runs a named case for the reference family with `k`, `theta` and advection `c`.
pub fn verify_case(case: BarrierCase, k: f64, theta: f64, c: Option<f64>) -> Result<VerifyReport> {
    let c = c.unwrap_or(case.default_c());
    let fb = crate::reactions::build_cubic_bistable(k, theta)?;
    let fm = crate::reactions::build_kpp(k * (1.0 - theta))?;
    let c_m = kpp_min_speed(&fm)?;
    let mut rep = VerifyReport {
        case,
        k,
        theta,
        c,
        grid_points: 0,
        inequalities: Vec::new(),
        passed: false,
        residual: None,
        params: None,
        bump: None,
        static_supersolution: None,
    };
    let push = |rep: &mut VerifyReport, name: String, margin: f64, holds: bool| {
        rep.inequalities.push(Inequality {
            name,
            worst_margin: margin,
            holds,
        });
    };
    match case {
        BarrierCase::RightwardSuper
        | BarrierCase::RightwardSub
        | BarrierCase::LeftwardSuper
        | BarrierCase::RightwardOmegaTenth => {
            let phi = bistable_front(&fb, 1e-8)?;
            let direction = if case == BarrierCase::LeftwardSuper {
                Direction::Leftward
            } else {
                Direction::Rightward
            };
            let mut p = fm_params(&phi, c, c_m, direction)?;
            if case == BarrierCase::RightwardOmegaTenth {
                p.omega /= 10.0;
            }
            let kind = if case == BarrierCase::RightwardSub {
                BarrierKind::Sub
            } else {
                BarrierKind::Super
            };
            for r in p.recipe_checks(&fb, &phi) {
                push(&mut rep, format!("recipe:{}", r.name), r.margin, r.holds);
            }
            let (tg, xg) = p.certification_grid(CERT_T_SPAN, CERT_H, CERT_MARGIN);
            let res = check_barrier_residual(&p, &fb, &phi, &tg, &xg, kind);
            rep.grid_points = res.points;
            for cr in &res.cases {
                push(
                    &mut rep,
                    format!("residual:{}", cr.name),
                    cr.worst_residual,
                    cr.residual_pass,
                );
                push(
                    &mut rep,
                    format!("certificate:{}", cr.name),
                    cr.worst_certificate,
                    cr.certificate_pass,
                );
            }
            rep.params = Some(p);
            rep.residual = Some(res);
        }
        BarrierCase::Bump => {
            let spec = bump_admissible(c, &fm, 0.05 * fm.deriv(0.0))?;
            let (worst, _) = spec.max_residual(&fm, BUMP_GRID);
            rep.grid_points = BUMP_GRID;
            push(
                &mut rep,
                "subsolution_residual".into(),
                -worst,
                worst <= 0.0,
            );
            let drop = bump_run_min_increment(&spec, k, theta)?;
            push(
                &mut rep,
                "time_monotone".into(),
                drop,
                drop >= -MONOTONE_TOL,
            );
            rep.bump = Some(spec);
        }
        BarrierCase::Static => {
            let eps = modification_below(&fb, c)?;
            let s = static_blocking_supersolution(&fb, eps, c, 5.0, None)?;
            push(
                &mut rep,
                "residual".into(),
                s.min_residual,
                s.min_residual >= -RESIDUAL_TOL,
            );
            push(
                &mut rep,
                "flat_at_least_one".into(),
                s.flat_value - 1.0,
                s.flat_at_least_one,
            );
            push(
                &mut rep,
                "modified_speed_below_c".into(),
                c - s.c_b_eps,
                s.c_b_eps < c,
            );
            rep.grid_points = 8001;
            rep.static_supersolution = Some(s);
        }
    }
    rep.passed = rep.inequalities.iter().all(|q| q.holds);
    Ok(rep)
}

/// Smallest change of `u` at a fixed node between consecutive snapshots of the
/// bump-started run over `[0, BUMP_RUN_T]`.
pub fn bump_run_min_increment(spec: &BumpSpec, k: f64, theta: f64) -> Result<f64> {
    let half_width = 5.0;
    let field = crate::reactions::reference_field(k, theta, half_width)?;
    let center = -half_width - spec.r_half - 5.0;
    let dx = 0.1;
    let problem = crate::solver::Problem::new(field, spec.c, center - 60.0, 60.0);
    let traj = crate::solver::integrate(
        &problem,
        &spec.datum(center, dx),
        BUMP_RUN_T,
        BUMP_RUN_EVERY,
    )?;
    let mut worst = f64::INFINITY;
    for w in traj.snapshots.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let shift = ((a.x_lo - b.x_lo) / traj.dx).round() as usize;
        for (i, &ua) in a.values.iter().enumerate() {
            if let Some(&ub) = b.values.get(i + shift) {
                worst = worst.min(ub - ua);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reactions::{build_cubic_bistable, build_kpp};

    #[test]
    fn bump_half_width_policy() {
        let fm = build_kpp(0.7).unwrap();
        let b = bump_admissible(0.0, &fm, 0.07).unwrap();
        assert!((b.r_min - 1.9790).abs() < 1e-4, "{}", b.r_min);
        assert!((b.r_half - 2.1769).abs() < 1e-4, "{}", b.r_half);
        assert!(b.max_residual(&fm, 4001).0 <= 1e-10);
        assert!(b.eta > 0.0 && b.eta <= 1.0);
    }

    #[test]
    fn bump_rejected_at_minimal_speed() {
        let fm = build_kpp(0.7).unwrap();
        let c_m = 2.0 * 0.7f64.sqrt();
        assert!(matches!(
            bump_admissible(c_m, &fm, 0.01),
            Err(Error::NoAdmissibleBump(_))
        ));
        assert!(matches!(
            bump_admissible(-c_m - 0.1, &fm, 0.01),
            Err(Error::NoAdmissibleBump(_))
        ));
    }

    #[test]
    fn bump_with_drift_is_subsolution() {
        let fm = build_kpp(0.7).unwrap();
        for c in [-1.2, -0.5, 0.8, 1.5] {
            let b = bump_admissible(c, &fm, 0.02).unwrap();
            assert!(b.max_residual(&fm, 4001).0 <= 1e-10, "c = {c}");
        }
    }

    #[test]
    fn rightward_params_satisfy_recipe() {
        let fb = build_cubic_bistable(1.0, 0.3).unwrap();
        let phi = bistable_front(&fb, 1e-8).unwrap();
        let p = fm_params(&phi, 0.0, 2.0 * 0.7f64.sqrt(), Direction::Rightward).unwrap();
        for chk in p.recipe_checks(&fb, &phi) {
            assert!(chk.holds, "{} margin {}", chk.name, chk.margin);
        }
        assert!(p.delta <= (p.mu * 0.2828).min(0.15));
    }

    #[test]
    fn rightward_rejects_c_equal_c_b() {
        let fb = build_cubic_bistable(1.0, 0.3).unwrap();
        let phi = bistable_front(&fb, 1e-8).unwrap();
        let r = fm_params(&phi, phi.speed, 1.6733, Direction::Rightward);
        assert!(matches!(r, Err(Error::WrongRegime(_))));
    }

    #[test]
    fn leftward_mu_bound() {
        let fb = build_cubic_bistable(1.0, 0.3).unwrap();
        let phi = bistable_front(&fb, 1e-8).unwrap();
        let p = fm_params(&phi, -2.0, 2.0 * 0.7f64.sqrt(), Direction::Leftward).unwrap();
        assert!(p.mu <= (-2.0 + 4.6f64.sqrt()) / 2.0);
        assert!(((-2.0 + 4.6f64.sqrt()) / 2.0 - 0.07238).abs() < 1e-5);
        for chk in p.recipe_checks(&fb, &phi) {
            assert!(chk.holds, "{} margin {}", chk.name, chk.margin);
        }
    }

    #[test]
    fn zero_delta_barrier_is_the_wave() {
        let fb = build_cubic_bistable(1.0, 0.3).unwrap();
        let phi = bistable_front(&fb, 1e-8).unwrap();
        let mut p = fm_params(&phi, 0.0, 1.6733, Direction::Rightward).unwrap();
        p.delta = 0.0;
        p.omega = 0.0;
        for t in [0.0, 3.0, 17.0] {
            for x in [-5.0, 0.0, 2.5, 40.0] {
                let (_, n, _) = p.evaluate(&fb, &phi, BarrierKind::Super, t, x);
                assert!(n.abs() < 1e-12, "{n}");
            }
        }
    }

    #[test]
    fn static_supersolution_passes() {
        let fb = build_cubic_bistable(1.0, 0.3).unwrap();
        let s = static_blocking_supersolution(&fb, 0.05, 1.0, 5.0, None).unwrap();
        assert!(s.passed, "{s:?}");
        assert!(s.c_b_eps > s.c_b && s.c_b_eps < s.c_b + 0.1);
        assert!(static_blocking_supersolution(&fb, 0.05, 0.1, 5.0, None).is_err());
    }

    #[test]
    fn modified_speed_tends_to_base() {
        let fb = build_cubic_bistable(1.0, 0.3).unwrap();
        let c_b = bistable_front(&fb, 1e-8).unwrap().speed;
        let speeds: Vec<f64> = [0.05, 0.02, 0.01]
            .iter()
            .map(|&e| {
                bistable_front(&build_modified(1.0, 0.3, e).unwrap(), 1e-8)
                    .unwrap()
                    .speed
            })
            .collect();
        assert!(speeds[0] > speeds[1] && speeds[1] > speeds[2]);
        assert!((speeds[2] - c_b).abs() < 1e-3, "{speeds:?}");
    }
}
