//! Nonlinearities `f_m` (KPP), `f_b` (bistable), the modified bistable `f_{b,eps}`,
//! and the heterogeneous blend `f(x, u)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{smoothstep, smoothstep_d1, smoothstep_d2};

/// A scalar reaction term `s -> f(s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reaction {
    /// `r u (1 - u)`.
    Kpp { r: f64 },
    /// `k u (1 - u)(u - theta)`.
    CubicBistable { k: f64, theta: f64 },
    /// Cubic bistable term lifted near `u = 1` so that its upper zero moves to `1 + eps`.
    ///
    /// `f(u) = f_b(u - eps S((u - 1 + eps) / (2 eps)))` with `S` the quintic smoothstep.
    Modified { k: f64, theta: f64, eps: f64 },
    /// `f = 0`.
    Inert,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionClass {
    Kpp,
    Bistable,
    Modified,
    Inert,
}

impl ReactionClass {
    pub fn name(self) -> &'static str {
        match self {
            ReactionClass::Kpp => "kpp",
            ReactionClass::Bistable => "bistable",
            ReactionClass::Modified => "modified",
            ReactionClass::Inert => "inert",
        }
    }
}

pub fn build_kpp(r: f64) -> Result<Reaction> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "KPP rate r must be positive, got {r}"
        )));
    }
    Ok(Reaction::Kpp { r })
}

pub fn build_cubic_bistable(k: f64, theta: f64) -> Result<Reaction> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bistable amplitude k must be positive, got {k}"
        )));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in (0,1), got {theta}"
        )));
    }
    Ok(Reaction::CubicBistable { k, theta })
}

/// Builds `f_{b,eps}` and grid-validates its defining properties.
pub fn build_modified(k: f64, theta: f64, eps: f64) -> Result<Reaction> {
    build_cubic_bistable(k, theta)?;
    if !(eps > 0.0 && eps < (1.0 - theta) / 2.0) {
        return Err(Error::BadModification(format!(
            "eps = {eps} outside (0, (1 - theta)/2) = (0, {})",
            (1.0 - theta) / 2.0
        )));
    }
    let m = Reaction::Modified { k, theta, eps };
    m.validate_modification()?;
    Ok(m)
}

fn cubic(k: f64, theta: f64, u: f64) -> f64 {
    k * u * (1.0 - u) * (u - theta)
}

fn cubic_d1(k: f64, theta: f64, u: f64) -> f64 {
    // d/du of k(-u^3 + (1+theta)u^2 - theta u)
    k * (-3.0 * u * u + 2.0 * (1.0 + theta) * u - theta)
}

fn cubic_d2(k: f64, theta: f64, u: f64) -> f64 {
    k * (-6.0 * u + 2.0 * (1.0 + theta))
}

/// Argument map of the modified reaction and its first two derivatives.
fn lift(eps: f64, u: f64) -> (f64, f64, f64) {
    let t = (u - 1.0 + eps) / (2.0 * eps);
    (
        u - eps * smoothstep(t),
        1.0 - 0.5 * smoothstep_d1(t),
        -smoothstep_d2(t) / (4.0 * eps),
    )
}

impl Reaction {
    pub fn class(&self) -> ReactionClass {
        match self {
            Reaction::Kpp { .. } => ReactionClass::Kpp,
            Reaction::CubicBistable { .. } => ReactionClass::Bistable,
            Reaction::Modified { .. } => ReactionClass::Modified,
            Reaction::Inert => ReactionClass::Inert,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Reaction::Kpp { r } => r * s * (1.0 - s),
            Reaction::CubicBistable { k, theta } => cubic(k, theta, s),
            Reaction::Modified { k, theta, eps } => cubic(k, theta, lift(eps, s).0),
            Reaction::Inert => 0.0,
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match *self {
            Reaction::Kpp { r } => r * (1.0 - 2.0 * s),
            Reaction::CubicBistable { k, theta } => cubic_d1(k, theta, s),
            Reaction::Modified { k, theta, eps } => {
                let (v, dv, _) = lift(eps, s);
                cubic_d1(k, theta, v) * dv
            }
            Reaction::Inert => 0.0,
        }
    }

    pub fn deriv2(&self, s: f64) -> f64 {
        match *self {
            Reaction::Kpp { r } => -2.0 * r,
            Reaction::CubicBistable { k, theta } => cubic_d2(k, theta, s),
            Reaction::Modified { k, theta, eps } => {
                let (v, dv, d2v) = lift(eps, s);
                cubic_d2(k, theta, v) * dv * dv + cubic_d1(k, theta, v) * d2v
            }
            Reaction::Inert => 0.0,
        }
    }

    /// Intermediate zero of a bistable-type reaction.
    pub fn theta(&self) -> Option<f64> {
        match *self {
            Reaction::CubicBistable { theta, .. } | Reaction::Modified { theta, .. } => Some(theta),
            _ => None,
        }
    }

    /// Stable upper zero: `1`, or `1 + eps` for the modified reaction.
    pub fn upper_zero(&self) -> f64 {
        match *self {
            Reaction::Modified { eps, .. } => 1.0 + eps,
            _ => 1.0,
        }
    }

    /// The unmodified cubic behind a modified reaction (or `self`).
    pub fn base_bistable(&self) -> Reaction {
        match *self {
            Reaction::Modified { k, theta, .. } => Reaction::CubicBistable { k, theta },
            ref other => other.clone(),
        }
    }

    pub fn is_bistable_type(&self) -> bool {
        matches!(
            self.class(),
            ReactionClass::Bistable | ReactionClass::Modified
        )
    }

    /// Checks parameters and the class invariants on a sample grid.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Reaction::Kpp { r } => {
                build_kpp(r)?;
            }
            Reaction::CubicBistable { k, theta } => {
                build_cubic_bistable(k, theta)?;
            }
            Reaction::Modified { k, theta, eps } => {
                build_modified(k, theta, eps)?;
            }
            Reaction::Inert => return Ok(()),
        }
        self.check_class_invariants()
    }

    fn check_class_invariants(&self) -> Result<()> {
        let n = 2000;
        let top = self.upper_zero();
        let fail = |msg: String| {
            Err(Error::InvalidParameter(format!(
                "{} invariant violated: {msg}",
                self.class().name()
            )))
        };
        if self.eval(0.0).abs() > 1e-12 || self.eval(top).abs() > 1e-12 {
            return fail("f(0) = f(1) = 0".into());
        }
        if self.deriv(top) >= 0.0 {
            return fail("f'(1) < 0".into());
        }
        for i in 1..n {
            let s = top * i as f64 / n as f64;
            let f = self.eval(s);
            match self.class() {
                ReactionClass::Kpp => {
                    if !(f > 0.0 && f <= self.deriv(0.0) * s + 1e-12) {
                        return fail(format!("0 < f(s) <= f'(0) s at s = {s}"));
                    }
                }
                _ => {
                    let theta = self.theta().unwrap_or(0.5);
                    let sign_ok = if s < theta - 1e-9 {
                        f < 0.0
                    } else if s > theta + 1e-9 {
                        f > 0.0
                    } else {
                        true
                    };
                    if !sign_ok {
                        return fail(format!("sign pattern at s = {s}"));
                    }
                }
            }
            let s_out = top + 2.0 * i as f64 / n as f64;
            if self.eval(s_out) >= 0.0 {
                return fail(format!("f < 0 beyond the upper zero, at s = {s_out}"));
            }
        }
        if let Some(theta) = self.theta() {
            if self.eval(theta).abs() > 1e-12 || self.deriv(0.0) >= 0.0 || self.deriv(theta) <= 0.0
            {
                return fail("f(theta) = 0, f'(0) < 0, f'(theta) > 0".into());
            }
        }
        Ok(())
    }

    fn validate_modification(&self) -> Result<()> {
        let Reaction::Modified { k, theta, eps } = *self else {
            return Ok(());
        };
        let base = Reaction::CubicBistable { k, theta };
        let bad = |msg: String| Err(Error::BadModification(msg));
        for z in [0.0, theta, 1.0 + eps] {
            if self.eval(z).abs() > 1e-12 {
                return bad(format!("f_eps({z}) = {} is not a zero", self.eval(z)));
            }
        }
        let n = 4000;
        for i in 0..=n {
            let s = -0.5 + 2.5 * i as f64 / n as f64;
            let (f, g) = (self.eval(s), base.eval(s));
            if f < g - 1e-14 {
                return bad(format!("f_eps < f_b at s = {s}"));
            }
            if s <= 1.0 - eps && f != g {
                return bad(format!("f_eps != f_b at s = {s} <= 1 - eps"));
            }
            if s >= 1.0 - eps && s <= 1.0 + eps && self.deriv(s) >= 0.0 {
                return bad(format!("f_eps not decreasing at s = {s}"));
            }
            let sign_ok = if s > 0.0 && s < theta {
                f < 0.0
            } else if s > theta && s < 1.0 + eps {
                f > 0.0
            } else if s > 1.0 + eps {
                f < 0.0
            } else {
                true
            };
            if !sign_ok {
                return bad(format!("sign pattern broken at s = {s}"));
            }
        }
        Ok(())
    }
}

/// The blended nonlinearity `f(x, s) = (1 - chi(x)) f_m(s) + chi(x) f_b(s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeterogeneousField {
    pub left: Reaction,
    pub right: Reaction,
    /// Transition half-width `L`.
    pub half_width: f64,
}

pub fn build_blend(fm: Reaction, fb: Reaction, half_width: f64) -> Result<HeterogeneousField> {
    if fm.class() != ReactionClass::Kpp {
        return Err(Error::WrongClass {
            expected: "kpp",
            got: fm.class().name(),
        });
    }
    if !fb.is_bistable_type() {
        return Err(Error::WrongClass {
            expected: "bistable",
            got: fb.class().name(),
        });
    }
    fm.validate()?;
    fb.validate()?;
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "half-width L must be positive, got {half_width}"
        )));
    }
    Ok(HeterogeneousField {
        left: fm,
        right: fb,
        half_width,
    })
}

/// Reference pair `f_m = r u(1-u)`, `f_b = k u(1-u)(u-theta)` with `r = k(1 - theta)`.
pub fn reference_field(k: f64, theta: f64, half_width: f64) -> Result<HeterogeneousField> {
    build_blend(
        build_kpp(k * (1.0 - theta))?,
        build_cubic_bistable(k, theta)?,
        half_width,
    )
}

impl HeterogeneousField {
    /// Same reaction on both sides.
    pub fn uniform(reaction: Reaction, half_width: f64) -> Self {
        Self {
            left: reaction.clone(),
            right: reaction,
            half_width,
        }
    }

    pub fn chi(&self, x: f64) -> f64 {
        let l = self.half_width;
        smoothstep((x + l) / (2.0 * l))
    }

    pub fn chi_d1(&self, x: f64) -> f64 {
        let l = self.half_width;
        smoothstep_d1((x + l) / (2.0 * l)) / (2.0 * l)
    }

    pub fn eval(&self, x: f64, s: f64) -> f64 {
        let l = self.half_width;
        if x <= -l {
            self.left.eval(s)
        } else if x >= l {
            self.right.eval(s)
        } else {
            let chi = self.chi(x);
            (1.0 - chi) * self.left.eval(s) + chi * self.right.eval(s)
        }
    }

    pub fn deriv_s(&self, x: f64, s: f64) -> f64 {
        let chi = self.chi(x);
        (1.0 - chi) * self.left.deriv(s) + chi * self.right.deriv(s)
    }

    pub fn deriv_x(&self, x: f64, s: f64) -> f64 {
        self.chi_d1(x) * (self.right.eval(s) - self.left.eval(s))
    }

    /// Lipschitz bound of `s -> f(x, s)` over `[0, s_max]`, sampled.
    pub fn lipschitz(&self, s_max: f64) -> f64 {
        let n = 400;
        (0..=n)
            .map(|i| {
                let s = s_max * i as f64 / n as f64;
                self.left.deriv(s).abs().max(self.right.deriv(s).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// One hypothesis row of a [`ValidationReport`].
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub max_violation: f64,
    pub at_x: f64,
    pub at_s: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const VALIDATION_TOL: f64 = 1e-12;

/// Samples the standing hypotheses of the blend on `[-2L, 2L] x [0, s_max]`.
pub fn validate_hypotheses(
    field: &HeterogeneousField,
    s_max: f64,
    n_x: usize,
    n_s: usize,
) -> Result<ValidationReport> {
    if s_max < 1.5 {
        return Err(Error::InvalidParameter(format!(
            "s_max must be >= 1.5, got {s_max}"
        )));
    }
    if n_x < 64 || n_s < 64 {
        return Err(Error::InvalidParameter("grid sizes must be >= 64".into()));
    }
    let l = field.half_width;
    let xs: Vec<f64> = (0..n_x)
        .map(|i| -2.0 * l + 4.0 * l * i as f64 / (n_x - 1) as f64)
        .collect();
    let ss: Vec<f64> = (0..n_s)
        .map(|j| s_max * j as f64 / (n_s - 1) as f64)
        .collect();

    struct Acc {
        v: f64,
        x: f64,
        s: f64,
    }
    let mut zeros = Acc {
        v: 0.0,
        x: f64::NAN,
        s: f64::NAN,
    };
    let mut slope = Acc {
        v: 0.0,
        x: f64::NAN,
        s: 1.0,
    };
    let mut above = Acc {
        v: 0.0,
        x: f64::NAN,
        s: f64::NAN,
    };
    let mut mono = Acc {
        v: 0.0,
        x: f64::NAN,
        s: f64::NAN,
    };
    let bump = |acc: &mut Acc, v: f64, x: f64, s: f64| {
        if v > acc.v || acc.x.is_nan() {
            *acc = Acc {
                v: v.max(acc.v),
                x,
                s,
            };
        }
    };
    for &x in &xs {
        for s in [0.0, 1.0] {
            bump(&mut zeros, field.eval(x, s).abs(), x, s);
        }
        bump(&mut slope, field.deriv_s(x, 1.0).max(0.0), x, 1.0);
        for &s in &ss {
            if s >= 1.0 {
                bump(&mut above, field.eval(x, s).max(0.0), x, s);
            }
            if x.abs() <= l {
                bump(&mut mono, field.deriv_x(x, s).max(0.0), x, s);
            }
        }
    }
    // Strict inequality f_s(x, 1) < 0: a zero slope counts as a violation.
    if field.left.deriv(1.0) >= 0.0 || field.right.deriv(1.0) >= 0.0 {
        slope.v = slope.v.max(f64::MIN_POSITIVE);
    }
    let row = |name, a: Acc| HypothesisCheck {
        name,
        max_violation: a.v,
        at_x: a.x,
        at_s: a.s,
        passed: a.v <= VALIDATION_TOL,
    };
    let checks = vec![
        row("zeros_at_0_and_1", zeros),
        row("negative_slope_at_1", slope),
        row("nonpositive_above_1", above),
        row("monotone_in_x", mono),
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kpp_values() {
        let f = build_kpp(1.0).unwrap();
        assert_eq!(f.eval(0.5), 0.25);
        assert_eq!(f.deriv(0.0), 1.0);
        assert_eq!(build_kpp(0.7).unwrap().deriv(0.0), 0.7);
        assert!(matches!(build_kpp(0.0), Err(Error::InvalidParameter(_))));
        assert!(build_kpp(0.7).unwrap().validate().is_ok());
    }

    #[test]
    fn cubic_values() {
        let f = build_cubic_bistable(1.0, 0.3).unwrap();
        assert!((f.deriv(0.0) + 0.3).abs() < 1e-15);
        assert!((f.deriv(1.0) + 0.7).abs() < 1e-15);
        assert!((build_cubic_bistable(20.0, 0.9).unwrap().deriv(0.0) + 18.0).abs() < 1e-12);
        assert!(build_cubic_bistable(1.0, 1.0).is_err());
        assert!(build_cubic_bistable(-1.0, 0.5).is_err());
        assert!(f.validate().is_ok());
        // Balanced cubic integrates to zero (Simpson is exact for polynomials of degree 3).
        let g = build_cubic_bistable(1.0, 0.5).unwrap();
        let integral = (g.eval(0.0) + 4.0 * g.eval(0.5) + g.eval(1.0)) / 6.0;
        assert!(integral.abs() < 1e-15);
    }

    #[test]
    fn blend_matches_sides() {
        let field = reference_field(1.0, 0.3, 5.0).unwrap();
        for i in 0..50 {
            let s = 1.5 * i as f64 / 49.0;
            assert_eq!(field.eval(-6.0, s), field.left.eval(s));
            assert_eq!(field.eval(6.0, s), field.right.eval(s));
            let mid = 0.5 * (field.left.eval(s) + field.right.eval(s));
            assert!((field.eval(0.0, s) - mid).abs() < 1e-15);
        }
    }

    #[test]
    fn blend_rejects_swapped_classes() {
        let fm = build_kpp(0.7).unwrap();
        let fb = build_cubic_bistable(1.0, 0.3).unwrap();
        assert!(matches!(
            build_blend(fb.clone(), fm.clone(), 5.0),
            Err(Error::WrongClass { .. })
        ));
    }

    #[test]
    fn reference_blend_passes_validation() {
        let field = reference_field(1.0, 0.3, 5.0).unwrap();
        let rep = validate_hypotheses(&field, 1.5, 201, 301).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn unconstrained_blend_violates_monotonicity_above_one() {
        let field = build_blend(
            build_kpp(1.0).unwrap(),
            build_cubic_bistable(1.0, 0.3).unwrap(),
            5.0,
        )
        .unwrap();
        let rep = validate_hypotheses(&field, 1.5, 201, 301).unwrap();
        assert!(!rep.passed);
        let mono = rep.check("monotone_in_x").unwrap();
        assert!(!mono.passed);
        // f_m - f_b = u(1-u)(r - k(u - theta)) changes sign at u = theta + r/k.
        assert!(mono.at_s > 1.0 && mono.at_s < 0.3 + 1.0);
        assert!(rep.check("zeros_at_0_and_1").unwrap().passed);
    }

    #[test]
    fn validation_preconditions() {
        let field = reference_field(1.0, 0.3, 5.0).unwrap();
        assert!(validate_hypotheses(&field, 1.2, 100, 100).is_err());
        assert!(validate_hypotheses(&field, 1.5, 10, 100).is_err());
    }

    #[test]
    fn modified_reaction_properties() {
        let m = build_modified(1.0, 0.3, 0.05).unwrap();
        assert_eq!(m.upper_zero(), 1.05);
        assert!(m.eval(1.05).abs() < 1e-15);
        assert!(m.deriv(1.05) < 0.0);
        assert_eq!(
            m.eval(0.9),
            build_cubic_bistable(1.0, 0.3).unwrap().eval(0.9)
        );
        assert!(m.validate().is_ok());
        assert!(matches!(
            build_modified(1.0, 0.3, 0.4),
            Err(Error::BadModification(_))
        ));
    }

    #[test]
    fn modified_derivatives_match_differences() {
        let m = build_modified(1.0, 0.3, 0.05).unwrap();
        let h = 1e-6;
        for i in 0..200 {
            let s = 0.9 + 0.2 * i as f64 / 199.0;
            let d1 = (m.eval(s + h) - m.eval(s - h)) / (2.0 * h);
            let d2 = (m.deriv(s + h) - m.deriv(s - h)) / (2.0 * h);
            assert!((d1 - m.deriv(s)).abs() < 1e-7);
            assert!((d2 - m.deriv2(s)).abs() < 1e-4 * (1.0 + m.deriv2(s).abs()));
        }
    }

    #[test]
    fn config_round_trip() {
        let field = reference_field(1.0, 0.3, 5.0).unwrap();
        let text = toml::to_string(&field).unwrap();
        let back: HeterogeneousField = toml::from_str(&text).unwrap();
        assert_eq!(back, field);
        let bad =
            "half_width = 5.0\n[left]\nkind = \"kpp\"\nr = 0.7\nq = 1\n[right]\nkind = \"inert\"\n";
        assert!(toml::from_str::<HeterogeneousField>(bad).is_err());
    }
}
