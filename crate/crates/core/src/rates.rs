//! Rate functions for every regime, as total functions into `[0, +∞]`.
//!
//! `M` below is `M_p(2)`, the second moment of the p-generalized Gaussian,
//! and `m_p = M`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Error, Result};
use crate::optim;
use crate::specfun::{self, ln_gamma_pos};

/// Which limit theorem governs the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `p ≥ 2`, critical scale.
    CriticalA,
    /// `1 ≤ p < 2`, `k = o(n^{p/2})`. `literal` evaluates the printed
    /// normalization `(x² − M)/2` instead of `(x² − M)/(2M)`.
    CriticalB1 { literal: bool },
    /// `1 ≤ p < 2`, `k ≍ n^{p/2}`.
    CriticalB2,
    /// `1 ≤ p < 2`, `k = ω(n^{p/2})`.
    CriticalB3,
    /// `p ≥ 2`, subcritical scales `t = o(√k)`.
    SubcriticalMdp,
    /// Crosspolytope LDP at speed `√n`.
    CrosspolytopeLdp,
}

/// Speed `s_n` attached to a regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speed {
    K,
    NPowHalfP,
    TSquared,
    SqrtN,
}

impl Speed {
    /// Numeric speed for dimensions `n`, `k`, exponent `p` and scale `t`.
    pub fn value(&self, n: usize, k: usize, p: f64, t: f64) -> f64 {
        match self {
            Speed::K => k as f64,
            Speed::NPowHalfP => (n as f64).powf(p / 2.0),
            Speed::TSquared => t * t,
            Speed::SqrtN => (n as f64).sqrt(),
        }
    }
}

/// Exponent, regime, aspect ratio and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub p: f64,
    pub regime: Regime,
    pub lambda: f64,
    pub speed: Speed,
}

impl RegimeSpec {
    /// Checks the regime against `p` and derives the speed. `lambda` is only
    /// read by the subcritical regime.
    pub fn new(p: f64, regime: Regime, lambda: f64) -> Result<Self> {
        let speed = match regime {
            Regime::CriticalA => {
                if !(p >= 2.0) {
                    return usage(format!("critical case (a) needs p >= 2, got p={p}"));
                }
                Speed::K
            }
            Regime::CriticalB1 { .. } | Regime::CriticalB2 | Regime::CriticalB3 => {
                if !(1.0..2.0).contains(&p) {
                    return usage(format!("critical cases (b1)-(b3) need 1 <= p < 2, got p={p}"));
                }
                if matches!(regime, Regime::CriticalB1 { .. }) {
                    Speed::K
                } else {
                    Speed::NPowHalfP
                }
            }
            Regime::SubcriticalMdp => {
                if !(p >= 2.0) {
                    return usage(format!("subcritical MDP needs p >= 2, got p={p}"));
                }
                if !(0.0..=1.0).contains(&lambda) {
                    return usage(format!("lambda must lie in [0, 1], got {lambda}"));
                }
                Speed::TSquared
            }
            Regime::CrosspolytopeLdp => Speed::SqrtN,
        };
        if !p.is_finite() {
            return usage(format!("p must be finite, got {p}"));
        }
        Ok(Self {
            p,
            regime,
            lambda,
            speed,
        })
    }
}

/// Evaluable rate function with its regime and LLN point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunction {
    pub spec: RegimeSpec,
    /// Argument tolerance of the b2 infimum.
    pub tol: f64,
    m: f64,
    alpha: f64,
}

/// Anything that can be probed as a rate function.
pub trait Rate {
    fn eval(&self, x: f64) -> f64;
    /// The unique zero of the rate.
    fn lln_point(&self) -> f64;
    /// Whether values are exact (as opposed to estimated from samples).
    fn closed_form(&self) -> bool {
        true
    }
}

impl RateFunction {
    pub fn new(spec: RegimeSpec) -> Result<Self> {
        Self::with_tol(spec, 1e-10)
    }

    pub fn with_tol(spec: RegimeSpec, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return usage(format!("tolerance must be positive, got {tol}"));
        }
        let m = match spec.regime {
            Regime::CrosspolytopeLdp => 1.0,
            _ => specfun::m_p(spec.p)?,
        };
        let alpha = match spec.regime {
            Regime::SubcriticalMdp => specfun::alpha(spec.p, spec.lambda)?,
            _ => f64::NAN,
        };
        Ok(Self {
            spec,
            tol,
            m,
            alpha,
        })
    }

    /// Interval on which the rate is finite.
    pub fn domain(&self) -> (f64, f64) {
        match self.spec.regime {
            Regime::CriticalA | Regime::CriticalB1 { .. } | Regime::CriticalB2 => (0.0, f64::INFINITY),
            Regime::CriticalB3 => (self.m.sqrt(), f64::INFINITY),
            Regime::SubcriticalMdp => (f64::NEG_INFINITY, f64::INFINITY),
            Regime::CrosspolytopeLdp => (1.0, f64::INFINITY),
        }
    }
}

impl Rate for RateFunction {
    fn eval(&self, x: f64) -> f64 {
        let p = self.spec.p;
        let m = self.m;
        match self.spec.regime {
            Regime::CriticalA | Regime::CriticalB1 { literal: false } => critical_a_form(m, x),
            Regime::CriticalB1 { literal: true } => {
                if x > 0.0 {
                    (x * x - m) / 2.0 - (x / m.sqrt()).ln()
                } else {
                    f64::INFINITY
                }
            }
            Regime::CriticalB2 => b2_infimum(p, m, x, self.tol).0,
            Regime::CriticalB3 => b3_form(p, m, x),
            Regime::SubcriticalMdp => self.alpha * x * x,
            Regime::CrosspolytopeLdp => rate_crosspolytope(x),
        }
    }

    fn lln_point(&self) -> f64 {
        match self.spec.regime {
            Regime::SubcriticalMdp => 0.0,
            Regime::CrosspolytopeLdp => 1.0,
            _ => self.m.sqrt(),
        }
    }
}

/// Closure-backed rate, e.g. for synthetic controls.
pub struct CustomRate<F: Fn(f64) -> f64> {
    pub f: F,
    pub lln: f64,
}

impl<F: Fn(f64) -> f64> Rate for CustomRate<F> {
    fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn lln_point(&self) -> f64 {
        self.lln
    }
}

/// The singular rate: 0 at 1, `+∞` elsewhere.
pub fn singular_rate(x: f64) -> f64 {
    if x == 1.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Cramér rate of `n⁻¹ Σ g_i²`: `(x − 1)/2 − ½ log x`.
pub fn rate_chi(x: f64) -> f64 {
    if x > 0.0 {
        // ln_1p keeps full accuracy near the zero at x = 1.
        let d = x - 1.0;
        (d - d.ln_1p()) / 2.0
    } else {
        f64::INFINITY
    }
}

fn critical_a_form(m: f64, x: f64) -> f64 {
    if x > 0.0 {
        rate_chi(x * x / m)
    } else {
        f64::INFINITY
    }
}

fn b3_form(p: f64, m: f64, x: f64) -> f64 {
    let s = m.sqrt();
    if x >= s {
        // Factored so that the left endpoint gives exactly 0.
        ((x - s) * (x + s)).powf(p / 2.0) / p
    } else {
        f64::INFINITY
    }
}

/// Rates for the critical regimes (a), (b1) and (b3).
pub fn rate_critical(spec: &RegimeSpec, x: f64) -> Result<f64> {
    match spec.regime {
        Regime::CriticalA | Regime::CriticalB1 { .. } | Regime::CriticalB3 => {
            Ok(RateFunction::new(*spec)?.eval(x))
        }
        other => usage(format!("rate_critical does not cover {other:?}")),
    }
}

fn b2_objective(p: f64, m: f64, x: f64, y: f64) -> f64 {
    rate_chi((x / y).powi(2)) + b3_form(p, m, y)
}

/// Returns `(infimum, minimizing y)`.
fn b2_infimum(p: f64, m: f64, x: f64, tol: f64) -> (f64, f64) {
    if !(x > 0.0) {
        return (f64::INFINITY, f64::NAN);
    }
    let lo = m.sqrt();
    // For y > x both summands increase in y, so the minimizer lies in [√M, max(x, √M)].
    let hi = x.max(lo);
    if hi == lo {
        return (b2_objective(p, m, x, lo), lo);
    }
    let r = optim::scan_then_golden(|y| b2_objective(p, m, x, y), lo, hi, 256, tol);
    (r.value.max(0.0), r.arg)
}

/// Rate of case (b2): `inf_{y ≥ √M} [ ((x/y)² − 1)/2 − log(x/y) + (1/p)(y² − M)^{p/2} ]`.
pub fn rate_critical_b2(p: f64, x: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return usage(format!("tolerance must be positive, got {tol}"));
    }
    if !(1.0..2.0).contains(&p) {
        return domain(format!("case (b2) needs 1 <= p < 2, got p={p}"));
    }
    Ok(b2_infimum(p, specfun::m_p(p)?, x, tol).0)
}

/// `α_{p,λ} x²`.
pub fn rate_subcritical(p: f64, lambda: f64, x: f64) -> Result<f64> {
    Ok(specfun::alpha(p, lambda)? * x * x)
}

/// Quadratic MDP rate of `(ξ_{p,2}, ξ_{p,p})`:
/// `(1/(2A_p)) [p x₁² + b x₂² − 4 p^{2/p} (Γ(3/p)/Γ(1/p)) x₁x₂]`.
pub fn rate_bivariate(p: f64, x1: f64, x2: f64) -> Result<f64> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::Degenerate(format!(
            "bivariate rate needs p > 2 (covariance is singular at p = 2), got p={p}"
        )));
    }
    let a = specfun::a_p(p)?;
    let (l1, l3, l5) = (
        ln_gamma_pos(1.0 / p),
        ln_gamma_pos(3.0 / p),
        ln_gamma_pos(5.0 / p),
    );
    let b = (4.0 / p * p.ln() + l5 - l1).exp() - (4.0 / p * p.ln() + 2.0 * l3 - 2.0 * l1).exp();
    let c = 4.0 * (2.0 / p * p.ln() + l3 - l1).exp();
    Ok((p * x1 * x1 + b * x2 * x2 - c * x1 * x2) / (2.0 * a))
}

/// `√(x² − 1)` for `x ≥ 1`.
pub fn rate_crosspolytope(x: f64) -> f64 {
    if x >= 1.0 {
        ((x - 1.0) * (x + 1.0)).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Cramér rate of `n⁻¹ Σ |Z_i|^p`: `(x^p − 1)/p − log x`.
pub fn rate_pth_power(p: f64, x: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return domain(format!("p must be >= 1, got {p}"));
    }
    Ok(if x > 0.0 {
        let l = x.ln();
        (p * l).exp_m1() / p - l
    } else {
        f64::INFINITY
    })
}
