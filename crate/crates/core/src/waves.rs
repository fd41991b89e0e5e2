//! Traveling fronts `phi'' + nu phi' + f(phi) = 0`: the KPP minimal speed and
//! decay rates, and the bistable speed `c_b` with its profile, both by phase-plane
//! shooting from the saddle at the upper zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::reactions::{Reaction, ReactionClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    PhiAtZeroEqualsTheta,
    LevelHalfAtZero,
}

/// Behavior of the profile beyond the last sample at `+inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RightTail {
    /// `phi_e exp(-rate (s - s_e))`.
    Exponential { rate: f64 },
    /// `(a + b (s - s_e)) exp(-rate (s - s_e))`, the double-root tail at the minimal speed.
    LinearExponential { rate: f64, b: f64 },
}

/// A sampled monotone front with exponential tails attached at both ends.
#[derive(Clone, Debug, Serialize)]
pub struct WaveProfile {
    pub speed: f64,
    /// First abscissa; samples sit at `s0 + i * ds`.
    pub s0: f64,
    pub ds: f64,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Rate at `+inf` (`alpha` or `lambda_nu`).
    pub decay_plus: f64,
    /// Rate at `-inf` (`beta`).
    pub decay_minus: f64,
    pub normalization: Normalization,
    /// Limit at `-inf`.
    pub upper: f64,
    /// Fitted constants: `phi ~ amp_plus exp(-decay_plus s)` and `upper - phi ~ amp_minus exp(decay_minus s)`.
    pub amp_plus: f64,
    pub amp_minus: f64,
    pub right_tail: RightTail,
    #[serde(skip)]
    pub reaction: Reaction,
}

impl WaveProfile {
    pub fn s_min(&self) -> f64 {
        self.s0
    }

    pub fn s_max(&self) -> f64 {
        self.s0 + self.ds * (self.values.len() - 1) as f64
    }

    pub fn abscissa(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| self.s0 + self.ds * i as f64)
            .collect()
    }

    fn second_from_ode(&self, phi: f64, dphi: f64) -> f64 {
        -self.speed * dphi - self.reaction.eval(phi)
    }

    /// `(phi, phi')` at `s`, Hermite-interpolated inside, analytic tails outside.
    pub fn eval_with_slope(&self, s: f64) -> (f64, f64) {
        let n = self.values.len();
        let s_end = self.s_max();
        if s < self.s0 {
            let gap = self.upper - self.values[0];
            let e = (self.decay_minus * (s - self.s0)).exp();
            return (self.upper - gap * e, -gap * self.decay_minus * e);
        }
        if s > s_end {
            let a = self.values[n - 1];
            let d = s - s_end;
            return match self.right_tail {
                RightTail::Exponential { rate } => {
                    let e = a * (-rate * d).exp();
                    (e, -rate * e)
                }
                RightTail::LinearExponential { rate, b } => {
                    let e = (-rate * d).exp();
                    let v = (a + b * d) * e;
                    (v, (b - rate * (a + b * d)) * e)
                }
            };
        }
        let pos = (s - self.s0) / self.ds;
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        let h = self.ds;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
        // Slope: Hermite on (phi', phi'') with phi'' from the ODE.
        let (q0, q1) = (self.second_from_ode(y0, m0), self.second_from_ode(y1, m1));
        let d = h00 * m0 + h10 * h * q0 + h01 * m1 + h11 * h * q1;
        (v, d)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.eval_with_slope(s).0
    }

    pub fn slope(&self, s: f64) -> f64 {
        self.eval_with_slope(s).1
    }

    /// `phi''` from the profile equation.
    pub fn second(&self, s: f64) -> f64 {
        let (v, d) = self.eval_with_slope(s);
        self.second_from_ode(v, d)
    }

    /// Point where `phi(s) = level`, by bisection on the interpolant.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        let (mut a, mut b) = (self.s_min(), self.s_max());
        if !(self.eval(a) >= level && self.eval(b) <= level) {
            return None;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.eval(m) > level {
                a = m;
            } else {
                b = m;
            }
        }
        Some(0.5 * (a + b))
    }

    /// Second-order finite-difference residual of the profile equation at interior nodes.
    pub fn residuals(&self) -> Vec<f64> {
        let n = self.values.len();
        let h = self.ds;
        let mut out = vec![0.0; n];
        for (i, w) in self.values.windows(3).enumerate() {
            let (a, b, c) = (w[0], w[1], w[2]);
            out[i + 1] = (c - 2.0 * b + a) / (h * h)
                + self.speed * (c - a) / (2.0 * h)
                + self.reaction.eval(b);
        }
        out
    }

    /// Shifts the abscissa so that `phi(s_new) = phi(s_new + shift)`.
    fn shift_origin(&mut self, shift: f64) {
        self.s0 -= shift;
    }
}

/// `c_m = 2 sqrt(f_m'(0))`.
pub fn kpp_min_speed(fm: &Reaction) -> Result<f64> {
    if fm.class() != ReactionClass::Kpp {
        return Err(Error::WrongClass {
            expected: "kpp",
            got: fm.class().name(),
        });
    }
    Ok(2.0 * fm.deriv(0.0).sqrt())
}

/// `lambda_nu = (nu - sqrt(nu^2 - 4 f_m'(0))) / 2`.
pub fn kpp_decay_rate(fm: &Reaction, nu: f64) -> Result<f64> {
    let c_m = kpp_min_speed(fm)?;
    if nu < c_m {
        return Err(Error::SubcriticalSpeed { nu, c_min: c_m });
    }
    if nu == c_m {
        return Ok(c_m / 2.0);
    }
    let disc = (nu * nu - 4.0 * fm.deriv(0.0)).max(0.0);
    Ok((nu - disc.sqrt()) / 2.0)
}

/// Rate of approach to the stable zero `0`, `(nu + sqrt(nu^2 - 4 f'(0))) / 2`.
pub fn decay_at_zero(f: &Reaction, nu: f64) -> f64 {
    (nu + (nu * nu - 4.0 * f.deriv(0.0)).sqrt()) / 2.0
}

/// Unstable rate at the upper saddle, `(-nu + sqrt(nu^2 - 4 f'(u+))) / 2`.
pub fn decay_at_upper(f: &Reaction, nu: f64) -> f64 {
    let fp = f.deriv(f.upper_zero());
    (-nu + (nu * nu - 4.0 * fp).sqrt()) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shot {
    /// Crossed `phi = 0` while decreasing: speed too small.
    Overshoot,
    /// `phi'` returned to zero above `0`: speed too large.
    Turn,
}

struct Path {
    values: Vec<f64>,
    slopes: Vec<f64>,
    outcome: Shot,
}

/// Offset from the upper saddle along its unstable eigenvector.
const SADDLE_OFFSET: f64 = 1e-7;

fn rk4_step(f: &Reaction, nu: f64, h: f64, y: (f64, f64)) -> (f64, f64) {
    let rhs = |(u, p): (f64, f64)| (p, -nu * p - f.eval(u));
    let k1 = rhs(y);
    let k2 = rhs((y.0 + 0.5 * h * k1.0, y.1 + 0.5 * h * k1.1));
    let k3 = rhs((y.0 + 0.5 * h * k2.0, y.1 + 0.5 * h * k2.1));
    let k4 = rhs((y.0 + h * k3.0, y.1 + h * k3.1));
    (
        y.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Follows the unstable manifold of the upper saddle downward.
fn shoot(f: &Reaction, nu: f64, h: f64, s_max: f64, record: bool, floor: f64) -> Path {
    let top = f.upper_zero();
    let beta = decay_at_upper(f, nu);
    let alpha = decay_at_zero(f, nu);
    let mut y = (top - SADDLE_OFFSET, -beta * SADDLE_OFFSET);
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    if record {
        values.push(y.0);
        slopes.push(y.1);
    }
    let steps = (s_max / h).ceil() as usize;
    for _ in 0..steps {
        y = rk4_step(f, nu, h, y);
        if y.0 < 0.0 {
            return Path {
                values,
                slopes,
                outcome: Shot::Overshoot,
            };
        }
        if y.1 >= 0.0 {
            return Path {
                values,
                slopes,
                outcome: Shot::Turn,
            };
        }
        if record {
            values.push(y.0);
            slopes.push(y.1);
        }
        if y.0 < floor {
            break;
        }
    }
    // Undecided within the budget: the unstable component at the origin decides.
    let outcome = if y.1 + alpha * y.0 > 0.0 {
        Shot::Turn
    } else {
        Shot::Overshoot
    };
    Path {
        values,
        slopes,
        outcome,
    }
}

/// Step size and integration budget for a shot at speed `nu`.
fn shooting_budget(f: &Reaction, nu: f64) -> (f64, f64) {
    let alpha = decay_at_zero(f, nu);
    let beta = decay_at_upper(f, nu);
    let window = 40.0 / alpha.min(beta);
    let h = (1e-3 * window).min(0.01);
    let s_max = (1.0 / SADDLE_OFFSET).ln() / beta + 2.0 * window;
    (h, s_max)
}

fn tail_amplitudes(
    s0: f64,
    ds: f64,
    values: &[f64],
    upper: f64,
    rate_plus: f64,
    rate_minus: f64,
) -> (f64, f64) {
    let n = values.len();
    let k = (n / 20).max(1);
    let plus: f64 = (n - k..n)
        .map(|i| values[i] * (rate_plus * (s0 + ds * i as f64)).exp())
        .sum::<f64>()
        / k as f64;
    let minus: f64 = (0..k)
        .map(|i| (upper - values[i]) * (-rate_minus * (s0 + ds * i as f64)).exp())
        .sum::<f64>()
        / k as f64;
    (plus, minus)
}

/// The bistable front: speed `c_b` and profile with `phi(0) = theta`.
///
/// Works for any bistable-type reaction with stable zeros `0` and `upper_zero()`.
pub fn bistable_front(fb: &Reaction, tol: f64) -> Result<WaveProfile> {
    if !fb.is_bistable_type() {
        return Err(Error::WrongClass {
            expected: "bistable",
            got: fb.class().name(),
        });
    }
    if !(tol > 1e-12 && tol < 1e-4) {
        return Err(Error::InvalidParameter(format!(
            "tol must lie in (1e-12, 1e-4), got {tol}"
        )));
    }
    let theta = fb.theta().expect("bistable reaction has theta");
    let top = fb.upper_zero();
    let lip = (0..=200)
        .map(|i| fb.deriv(top * i as f64 / 200.0).abs())
        .fold(0.0, f64::max);
    let bound = 2.0 * lip.sqrt() + 1.0;
    let run = |nu: f64| {
        let (h, s_max) = shooting_budget(fb, nu);
        shoot(fb, nu, h, s_max, false, 0.0).outcome
    };
    let (mut lo, mut hi) = (-bound, bound);
    if run(lo) != Shot::Overshoot || run(hi) != Shot::Turn {
        return Err(Error::NoConnection(format!(
            "no sign change of the shooting outcome on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match run(mid) {
            Shot::Overshoot => lo = mid,
            Shot::Turn => hi = mid,
        }
        if hi - lo < 1e-3 * tol.min(1e-10) {
            break;
        }
    }
    let speed = 0.5 * (lo + hi);
    let (h, s_max) = shooting_budget(fb, speed);
    let a = shoot(fb, lo, h, s_max, true, 0.0);
    let b = shoot(fb, hi, h, s_max, true, 0.0);
    let mid = shoot(fb, speed, h, s_max, true, 0.0);
    let alpha = decay_at_zero(fb, speed);
    let beta = decay_at_upper(fb, speed);
    // Keep the part where the bracketing shots still agree.
    let common = a.values.len().min(b.values.len()).min(mid.values.len());
    let cut = (0..common)
        .find(|&i| (a.values[i] - b.values[i]).abs() > 1e-8 || mid.values[i] < 1e-12)
        .unwrap_or(common);
    if cut < 10 || mid.values[cut - 1] > 1e-2 * theta {
        return Err(Error::NoConnection(format!(
            "shooting lost the connection early (phi = {})",
            mid.values[cut.max(1) - 1]
        )));
    }
    let values = mid.values[..cut].to_vec();
    let slopes = mid.slopes[..cut].to_vec();
    let (amp_plus, amp_minus) = tail_amplitudes(0.0, h, &values, top, alpha, beta);
    let mut wave = WaveProfile {
        speed,
        s0: 0.0,
        ds: h,
        values,
        slopes,
        decay_plus: alpha,
        decay_minus: beta,
        normalization: Normalization::PhiAtZeroEqualsTheta,
        upper: top,
        amp_plus,
        amp_minus,
        right_tail: RightTail::Exponential { rate: alpha },
        reaction: fb.clone(),
    };
    let s_theta = wave
        .crossing(theta)
        .ok_or_else(|| Error::NoConnection("profile misses theta".into()))?;
    wave.shift_origin(s_theta);
    refit_amplitudes(&mut wave);
    Ok(wave)
}

fn refit_amplitudes(w: &mut WaveProfile) {
    let (p, m) = tail_amplitudes(w.s0, w.ds, &w.values, w.upper, w.decay_plus, w.decay_minus);
    w.amp_plus = p;
    w.amp_minus = m;
}

/// The KPP front at speed `nu >= c_m`, normalized by `phi(0) = 1/2`.
pub fn kpp_front(fm: &Reaction, nu: f64, tol: f64) -> Result<WaveProfile> {
    let c_m = kpp_min_speed(fm)?;
    let lambda = kpp_decay_rate(fm, nu)?;
    if !(tol > 1e-12 && tol < 1e-4) {
        return Err(Error::InvalidParameter(format!(
            "tol must lie in (1e-12, 1e-4), got {tol}"
        )));
    }
    let beta = decay_at_upper(fm, nu);
    let window = 40.0 / lambda.min(beta);
    let h = (1e-3 * window).min(0.01);
    let s_max = (1.0 / SADDLE_OFFSET).ln() / beta + 4.0 * window;
    let path = shoot(fm, nu, h, s_max, true, 1e-13);
    let n = path.values.len();
    if n < 10 || path.values[n - 1] > 1e-6 {
        return Err(Error::NoConnection(format!(
            "KPP shot did not reach the origin (outcome {:?})",
            path.outcome
        )));
    }
    let critical = (nu - c_m).abs() <= 1e-12 * c_m.max(1.0);
    let right_tail = if critical {
        RightTail::LinearExponential {
            rate: lambda,
            b: path.slopes[n - 1] + lambda * path.values[n - 1],
        }
    } else {
        RightTail::Exponential { rate: lambda }
    };
    let mut wave = WaveProfile {
        speed: nu,
        s0: 0.0,
        ds: h,
        values: path.values,
        slopes: path.slopes,
        decay_plus: lambda,
        decay_minus: beta,
        normalization: Normalization::LevelHalfAtZero,
        upper: 1.0,
        amp_plus: 0.0,
        amp_minus: 0.0,
        right_tail,
        reaction: fm.clone(),
    };
    let s_half = wave
        .crossing(0.5)
        .ok_or_else(|| Error::NoConnection("profile misses 1/2".into()))?;
    wave.shift_origin(s_half);
    refit_amplitudes(&mut wave);
    Ok(wave)
}

/// Outcome of the `c_m > c_b` comparison for one pair.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpeedOrdering {
    pub holds: bool,
    pub c_m: f64,
    pub c_b: f64,
    /// Whether `f_m >= f_b` on `[0, 1.5]`, which makes the blend decreasing in `x`; report only.
    pub blend_monotone: bool,
}

pub fn speed_ordering_check(fm: &Reaction, fb: &Reaction) -> Result<SpeedOrdering> {
    let c_m = kpp_min_speed(fm)?;
    let c_b = bistable_front(fb, 1e-8)?.speed;
    let blend_monotone = (0..=300).all(|i| {
        let s = 1.5 * i as f64 / 300.0;
        fm.eval(s) - fb.eval(s) >= -1e-12
    });
    Ok(SpeedOrdering {
        holds: c_m > c_b,
        c_m,
        c_b,
        blend_monotone,
    })
}
