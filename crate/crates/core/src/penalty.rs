//! Closed-form penalty functions.
//!
//! Every penalty is written as `J(|t|) = ∫_0^|t| grad(s) ds` and split as
//!
//! ```text
//! J(|t|) = kappa·|t| + (c/2)·t² + D(t)
//! ```
//!
//! where `kappa` is the right derivative of `J` at the origin, `c` is the
//! convex curvature ([`PenaltySpec::convex_curvature`], nonzero only for the
//! sparse ridge penalty whose tail grows like a ridge) and `D` is concave.
//! The solver keeps `kappa·|t| + (c/2)·t²` in the convex part of the problem
//! and linearizes `D` through [`PenaltySpec::d_subgrad`].
//!
//! Piecewise branches are half-open intervals `[a, b)`, so every function is
//! defined at its breakpoints.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Lasso,
    Scad,
    Mcp,
    /// Truncated L1.
    Tlp,
    /// Moderately clipped lasso.
    Classo,
    /// Sparse ridge.
    Sridge,
    /// Modified log, linear on `(0, tau)`.
    Mlog,
    /// Modified bridge (exponent 1/2), linear on `(0, tau)`.
    Mbridge,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 8] = [
        PenaltyKind::Lasso,
        PenaltyKind::Scad,
        PenaltyKind::Mcp,
        PenaltyKind::Tlp,
        PenaltyKind::Classo,
        PenaltyKind::Sridge,
        PenaltyKind::Mlog,
        PenaltyKind::Mbridge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::Scad => "scad",
            PenaltyKind::Mcp => "mcp",
            PenaltyKind::Tlp => "tlp",
            PenaltyKind::Classo => "classo",
            PenaltyKind::Sridge => "sridge",
            PenaltyKind::Mlog => "mlog",
            PenaltyKind::Mbridge => "mbridge",
        }
    }

    /// Default concave scale used when the caller does not supply one.
    pub fn default_tau(self) -> f64 {
        match self {
            PenaltyKind::Scad => 3.7,
            PenaltyKind::Mcp | PenaltyKind::Classo | PenaltyKind::Sridge => 3.0,
            PenaltyKind::Lasso | PenaltyKind::Tlp | PenaltyKind::Mlog | PenaltyKind::Mbridge => 1.0,
        }
    }

    /// Maps a target origin slope back to the lambda that produces it.
    pub fn lambda_for_kappa(self, tau: f64, kappa: f64) -> f64 {
        match self {
            PenaltyKind::Mlog => tau * kappa,
            PenaltyKind::Mbridge => 2.0 * tau.sqrt() * kappa,
            _ => kappa,
        }
    }

    fn check_tau(self, tau: f64) -> Result<()> {
        let (ok, constraint) = match self {
            PenaltyKind::Lasso => (tau.is_finite(), "a finite tau"),
            PenaltyKind::Scad => (tau > 2.0, "tau > 2"),
            PenaltyKind::Mcp | PenaltyKind::Classo | PenaltyKind::Sridge => (tau > 1.0, "tau > 1"),
            PenaltyKind::Tlp | PenaltyKind::Mlog | PenaltyKind::Mbridge => (tau > 0.0, "tau > 0"),
        };
        if ok && tau.is_finite() {
            Ok(())
        } else {
            Err(Error::PenaltyDomain {
                kind: self,
                constraint,
            })
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PenaltyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown penalty `{s}`")))
    }
}

/// A penalty family without its regularization level: kind plus the
/// concave scale `tau` and the secondary scale `gamma`.
///
/// Path fitting instantiates it at each grid value with [`Penalty::at`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub kind: PenaltyKind,
    pub tau: f64,
    pub gamma: f64,
}

impl Penalty {
    pub fn new(kind: PenaltyKind, tau: f64, gamma: f64) -> Result<Self> {
        kind.check_tau(tau)?;
        if !(gamma >= 0.0 && gamma.is_finite()) {
            let constraint = match kind {
                PenaltyKind::Classo => "0 <= gamma <= lambda",
                _ => "gamma >= 0",
            };
            return Err(Error::PenaltyDomain { kind, constraint });
        }
        Ok(Penalty { kind, tau, gamma })
    }

    /// Penalty with the kind's default `tau` and `gamma = 0`.
    pub fn with_defaults(kind: PenaltyKind) -> Self {
        Penalty {
            kind,
            tau: kind.default_tau(),
            gamma: 0.0,
        }
    }

    /// Instantiates the penalty at `lambda`. For the clipped lasso the
    /// secondary scale is clipped to `min(gamma, lambda)` so that a fixed
    /// `gamma` stays admissible along a decreasing grid.
    pub fn at(&self, lambda: f64) -> Result<PenaltySpec> {
        let gamma = match self.kind {
            PenaltyKind::Classo => self.gamma.min(lambda),
            _ => self.gamma,
        };
        PenaltySpec::new(self.kind, lambda, self.tau, gamma)
    }

    pub fn lambda_for_kappa(&self, kappa: f64) -> f64 {
        self.kind.lambda_for_kappa(self.tau, kappa)
    }
}

/// A fully specified penalty `J_λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    kind: PenaltyKind,
    lambda: f64,
    tau: f64,
    gamma: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64, tau: f64, gamma: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::PenaltyDomain {
                kind,
                constraint: "lambda > 0",
            });
        }
        kind.check_tau(tau)?;
        let gamma_ok = match kind {
            PenaltyKind::Classo => gamma >= 0.0 && gamma <= lambda,
            _ => gamma >= 0.0 && gamma.is_finite(),
        };
        if !gamma_ok {
            let constraint = match kind {
                PenaltyKind::Classo => "0 <= gamma <= lambda",
                _ => "gamma >= 0",
            };
            return Err(Error::PenaltyDomain { kind, constraint });
        }
        Ok(PenaltySpec {
            kind,
            lambda,
            tau,
            gamma,
        })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn shape(&self) -> Penalty {
        Penalty {
            kind: self.kind,
            tau: self.tau,
            gamma: self.gamma,
        }
    }

    /// Origin slope `κ = lim_{t→0+} grad(t)`.
    pub fn kappa(&self) -> f64 {
        let (l, tau) = (self.lambda, self.tau);
        match self.kind {
            PenaltyKind::Mlog => l / tau,
            PenaltyKind::Mbridge => l / (2.0 * tau.sqrt()),
            _ => l,
        }
    }

    /// Curvature of the quadratic piece kept in the convex part. Only the
    /// sparse ridge tail `gamma·t` grows with `t`; every other penalty has a
    /// non-increasing derivative and returns zero.
    pub fn convex_curvature(&self) -> f64 {
        match self.kind {
            PenaltyKind::Sridge => self.gamma,
            _ => 0.0,
        }
    }

    /// True when the concave part vanishes identically.
    pub fn is_convex(&self) -> bool {
        match self.kind {
            PenaltyKind::Lasso => true,
            PenaltyKind::Classo => self.gamma == self.lambda,
            _ => false,
        }
    }

    /// Points where the derivative changes branch.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (l, tau, g) = (self.lambda, self.tau, self.gamma);
        match self.kind {
            PenaltyKind::Lasso => vec![],
            PenaltyKind::Scad => vec![l, tau * l],
            PenaltyKind::Mcp => vec![tau * l],
            PenaltyKind::Tlp | PenaltyKind::Mlog | PenaltyKind::Mbridge => vec![tau],
            PenaltyKind::Classo => vec![tau * (l - g)],
            PenaltyKind::Sridge => vec![tau * l / (tau * g + 1.0)],
        }
    }

    /// Derivative `grad(t)` for `t >= 0`; at the origin this is `κ`.
    pub fn grad(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        if t == 0.0 {
            return self.kappa();
        }
        let (l, tau, g) = (self.lambda, self.tau, self.gamma);
        match self.kind {
            PenaltyKind::Lasso => l,
            PenaltyKind::Scad => {
                if t < l {
                    l
                } else if t < tau * l {
                    (tau * l - t) / (tau - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyKind::Mcp => {
                if t < tau * l {
                    l - t / tau
                } else {
                    0.0
                }
            }
            PenaltyKind::Tlp => {
                if t < tau {
                    l
                } else {
                    0.0
                }
            }
            PenaltyKind::Classo => {
                if t < tau * (l - g) {
                    l - t / tau
                } else {
                    g
                }
            }
            PenaltyKind::Sridge => {
                if t < tau * l / (tau * g + 1.0) {
                    l - t / tau
                } else {
                    g * t
                }
            }
            PenaltyKind::Mlog => {
                if t < tau {
                    l / tau
                } else {
                    l / t
                }
            }
            PenaltyKind::Mbridge => {
                if t < tau {
                    l / (2.0 * tau.sqrt())
                } else {
                    l / (2.0 * t.sqrt())
                }
            }
        }
    }

    /// Penalty value `J(t)` for `t >= 0`.
    pub fn value(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let (l, tau, g) = (self.lambda, self.tau, self.gamma);
        let mcp_head = |t: f64| l * t - t * t / (2.0 * tau);
        match self.kind {
            PenaltyKind::Lasso => l * t,
            PenaltyKind::Scad => {
                if t < l {
                    l * t
                } else if t < tau * l {
                    (2.0 * tau * l * t - t * t - l * l) / (2.0 * (tau - 1.0))
                } else {
                    l * l * (tau + 1.0) / 2.0
                }
            }
            PenaltyKind::Mcp => {
                if t < tau * l {
                    mcp_head(t)
                } else {
                    tau * l * l / 2.0
                }
            }
            PenaltyKind::Tlp => l * t.min(tau),
            PenaltyKind::Classo => {
                let t0 = tau * (l - g);
                if t < t0 {
                    mcp_head(t)
                } else {
                    mcp_head(t0) + g * (t - t0)
                }
            }
            PenaltyKind::Sridge => {
                let t0 = tau * l / (tau * g + 1.0);
                if t < t0 {
                    mcp_head(t)
                } else {
                    mcp_head(t0) + g * (t * t - t0 * t0) / 2.0
                }
            }
            PenaltyKind::Mlog => {
                if t < tau {
                    l * t / tau
                } else {
                    l + l * (t / tau).ln()
                }
            }
            PenaltyKind::Mbridge => {
                if t < tau {
                    l * t / (2.0 * tau.sqrt())
                } else {
                    l * t.sqrt() - l * tau.sqrt() / 2.0
                }
            }
        }
    }

    /// Concave remainder `D(t) = J(|t|) − κ|t| − (c/2)t²`.
    pub fn concave_part(&self, t: f64) -> f64 {
        let a = t.abs();
        self.value(a) - self.kappa() * a - 0.5 * self.convex_curvature() * t * t
    }

    /// Supergradient of the concave remainder, selecting 0 at the origin.
    pub fn d_subgrad(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let a = t.abs();
        t.signum() * (self.grad(a) - self.kappa()) - self.convex_curvature() * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(kind: PenaltyKind, lambda: f64, tau: f64, gamma: f64) -> PenaltySpec {
        PenaltySpec::new(kind, lambda, tau, gamma).unwrap()
    }

    /// Every kind at a representative admissible parameter set.
    fn all_specs() -> Vec<PenaltySpec> {
        vec![
            spec(PenaltyKind::Lasso, 0.8, 1.0, 0.0),
            spec(PenaltyKind::Scad, 0.8, 3.7, 0.0),
            spec(PenaltyKind::Mcp, 0.8, 3.0, 0.0),
            spec(PenaltyKind::Tlp, 0.8, 1.5, 0.0),
            spec(PenaltyKind::Classo, 0.8, 3.0, 0.3),
            spec(PenaltyKind::Sridge, 0.8, 3.0, 0.5),
            spec(PenaltyKind::Mlog, 0.8, 1.2, 0.0),
            spec(PenaltyKind::Mbridge, 0.8, 1.2, 0.0),
        ]
    }

    /// Composite Simpson on each smooth piece of the derivative.
    fn quadrature(pen: &PenaltySpec, t: f64) -> f64 {
        let mut knots = vec![0.0];
        knots.extend(pen.breakpoints().into_iter().filter(|&b| b > 0.0 && b < t));
        knots.push(t);
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let m = 2000;
            let h = (b - a) / m as f64;
            // evaluate strictly inside the piece so the branch is the interior one
            let f = |s: f64| pen.grad(s.clamp(a + 1e-14 * (b - a), b - 1e-14 * (b - a)));
            let mut s = f(a) + f(b);
            for i in 1..m {
                let x = a + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            total += s * h / 3.0;
        }
        total
    }

    #[test]
    fn grad_examples() {
        assert_eq!(spec(PenaltyKind::Scad, 1.0, 3.7, 0.0).grad(0.5), 1.0);
        assert_abs_diff_eq!(
            spec(PenaltyKind::Scad, 1.0, 3.7, 0.0).grad(2.0),
            1.7 / 2.7,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            spec(PenaltyKind::Scad, 1.0, 3.7, 0.0).grad(2.0),
            0.6296296,
            epsilon = 1e-7
        );
        assert_eq!(spec(PenaltyKind::Mcp, 1.0, 3.0, 0.0).grad(3.5), 0.0);
        assert_abs_diff_eq!(
            spec(PenaltyKind::Mlog, 1.0, 3.0, 0.0).grad(6.0),
            0.1666667,
            epsilon = 1e-7
        );
        assert_eq!(spec(PenaltyKind::Lasso, 0.7, 1.0, 0.0).grad(42.0), 0.7);
    }

    #[test]
    fn value_examples() {
        for s in all_specs() {
            assert_eq!(s.value(0.0), 0.0, "{}", s.kind);
        }
        let mcp = spec(PenaltyKind::Mcp, 1.0, 3.0, 0.0);
        assert_abs_diff_eq!(mcp.value(5.0), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(quadrature(&mcp, 5.0), 1.5, epsilon = 1e-10);
        let tlp = spec(PenaltyKind::Tlp, 1.0, 3.0, 0.0);
        assert_abs_diff_eq!(tlp.value(2.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(quadrature(&tlp, 2.0), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(spec(PenaltyKind::Scad, 2.0, 3.7, 0.0).kappa(), 2.0);
        assert_eq!(spec(PenaltyKind::Mlog, 1.0, 4.0, 0.0).kappa(), 0.25);
        assert_eq!(spec(PenaltyKind::Mbridge, 1.0, 4.0, 0.0).kappa(), 0.25);
        for kind in [
            PenaltyKind::Lasso,
            PenaltyKind::Scad,
            PenaltyKind::Mcp,
            PenaltyKind::Tlp,
            PenaltyKind::Classo,
            PenaltyKind::Sridge,
        ] {
            let s = spec(kind, 1.3, 3.0, 0.2);
            assert_eq!(s.kappa(), 1.3);
        }
        // kappa is the right limit of the derivative
        for s in all_specs() {
            assert_abs_diff_eq!(s.kappa(), s.grad(1e-12), epsilon = 1e-11);
        }
    }

    #[test]
    fn lambda_for_kappa_inverts_kappa() {
        for s in all_specs() {
            let l = s.shape().lambda_for_kappa(s.kappa());
            assert_abs_diff_eq!(l, s.lambda(), epsilon = 1e-14);
        }
    }

    #[test]
    fn d_subgrad_examples() {
        for s in all_specs() {
            assert_eq!(s.d_subgrad(0.0), 0.0);
        }
        let scad = spec(PenaltyKind::Scad, 1.0, 3.7, 0.0);
        assert_abs_diff_eq!(scad.d_subgrad(2.0), -0.3703704, epsilon = 1e-7);
        assert_abs_diff_eq!(scad.d_subgrad(-2.0), 0.3703704, epsilon = 1e-7);
    }

    #[test]
    fn parameter_domains() {
        let err = PenaltySpec::new(PenaltyKind::Scad, 1.0, 1.5, 0.0).unwrap_err();
        assert_eq!(err.to_string(), "scad requires tau > 2");
        assert!(PenaltySpec::new(PenaltyKind::Mcp, 1.0, 1.0, 0.0).is_err());
        assert!(PenaltySpec::new(PenaltyKind::Classo, 1.0, 3.0, 1.5).is_err());
        assert!(PenaltySpec::new(PenaltyKind::Sridge, 1.0, 3.0, -0.1).is_err());
        assert!(PenaltySpec::new(PenaltyKind::Tlp, 1.0, 0.0, 0.0).is_err());
        assert!(PenaltySpec::new(PenaltyKind::Lasso, 0.0, 1.0, 0.0).is_err());
        assert!(PenaltySpec::new(PenaltyKind::Mlog, 1.0, f64::NAN, 0.0).is_err());
        // clipping keeps a fixed gamma admissible along a path
        let p = Penalty::new(PenaltyKind::Classo, 3.0, 0.5).unwrap();
        assert_eq!(p.at(0.2).unwrap().gamma(), 0.2);
        assert_eq!(p.at(2.0).unwrap().gamma(), 0.5);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("SCAD".parse::<PenaltyKind>().unwrap(), PenaltyKind::Scad);
        assert!("ridge".parse::<PenaltyKind>().is_err());
    }

    #[test]
    fn grad_is_nonincreasing_after_removing_convex_curvature() {
        for s in all_specs() {
            let hi = 5.0 * s.tau() * s.lambda() + 5.0;
            let mut prev = f64::INFINITY;
            for i in 1..=1000 {
                let t = hi * i as f64 / 1000.0;
                let g = s.grad(t) - s.convex_curvature() * t;
                assert!(g <= prev + 1e-15, "{} at {t}", s.kind);
                assert!(s.grad(t) >= 0.0);
                prev = g;
            }
        }
    }

    #[test]
    fn grad_is_nonincreasing_except_sridge_tail() {
        for s in all_specs()
            .into_iter()
            .filter(|s| s.kind() != PenaltyKind::Sridge)
        {
            let hi = 5.0 * s.tau() * s.lambda() + 5.0;
            let mut prev = f64::INFINITY;
            for i in 1..=1000 {
                let t = hi * i as f64 / 1000.0;
                assert!(s.grad(t) <= prev, "{} at {t}", s.kind);
                prev = s.grad(t);
            }
        }
    }

    #[test]
    fn value_matches_quadrature() {
        for s in all_specs() {
            let hi = 5.0 * s.tau() * s.lambda();
            for i in 0..=60 {
                let t = hi * i as f64 / 60.0 + 1e-3;
                assert_abs_diff_eq!(s.value(t), quadrature(&s, t), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn grad_matches_finite_differences_off_breakpoints() {
        for s in all_specs() {
            let hi = 5.0 * s.tau() * s.lambda();
            let bps = s.breakpoints();
            for i in 1..400 {
                let t = hi * i as f64 / 400.0;
                if bps.iter().any(|b| (t - b).abs() < 1e-3) {
                    continue;
                }
                let h = 1e-6;
                let fd = (s.value(t + h) - s.value(t - h)) / (2.0 * h);
                assert_abs_diff_eq!(fd, s.grad(t), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn reassembly_of_decomposition() {
        for s in all_specs() {
            for &t in &[-3.1f64, -0.4, -1e-3, 0.0, 2e-3, 0.5, 1.7, 4.2] {
                let sgn = if t == 0.0 { 0.0 } else { t.signum() };
                let lhs = s.d_subgrad(t) + s.kappa() * sgn + s.convex_curvature() * t;
                let rhs = sgn * s.grad(t.abs());
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn concave_part_has_nonincreasing_slope() {
        for s in all_specs() {
            let hi = 5.0 * s.tau() * s.lambda();
            let mut prev = f64::INFINITY;
            for i in -500..=500 {
                let t = hi * i as f64 / 500.0;
                let d = s.d_subgrad(t);
                assert!(d <= prev + 1e-15, "{} at {t}", s.kind);
                prev = d;
                // supergradient inequality at a few reference points
                for &u in &[-1.3, 0.0, 0.6, 2.9] {
                    let bound = s.concave_part(u) + s.d_subgrad(u) * (t - u);
                    assert!(s.concave_part(t) <= bound + 1e-12, "{} t={t} u={u}", s.kind);
                }
            }
        }
    }

    #[test]
    fn clipped_lasso_and_sparse_ridge_match_mcp_near_origin() {
        for s in all_specs()
            .into_iter()
            .filter(|s| matches!(s.kind(), PenaltyKind::Classo | PenaltyKind::Sridge))
        {
            let b = s.breakpoints()[0];
            for i in 1..100 {
                let t = b * i as f64 / 100.0;
                assert_eq!(s.grad(t), s.lambda() - t / s.tau());
            }
        }
    }

    #[test]
    fn breakpoint_branches_are_lower_closed() {
        let scad = spec(PenaltyKind::Scad, 1.0, 3.7, 0.0);
        assert_eq!(scad.grad(1.0), 2.7 / 2.7);
        assert_eq!(scad.grad(3.7), 0.0);
        let tlp = spec(PenaltyKind::Tlp, 1.0, 3.0, 0.0);
        assert_eq!(tlp.grad(3.0), 0.0);
        assert_eq!(tlp.d_subgrad(3.0), -1.0);
    }
}
