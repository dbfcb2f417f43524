//! Numerical checks of the two sufficient conditions for a counterexample to
//! the KLS conjecture, and a fit of the concentration constant `C` in
//! `P[|‖ξ‖₂/√k − 1| > t] ≤ 2 e^{−C t √k}`.
//!
//! Condition (a): the speed is `o(√k)` and the rate is not the singular rate
//! `𝕀₀`. Condition (b): `inf_{t>t₀} inf_{x>t} 𝕀(x) / t = 0` for some `t₀ > 1`.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::mc::{Direction, Estimator, Statistic, TailEstimate};
use crate::rates::Rate;
use crate::serde_ext::{ext_f64, ext_f64_vec};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    ASingularity,
    BInfCriterion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    WouldDisproveKls,
    ConsistentWithKls,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::WouldDisproveKls => "would-disprove-KLS",
            Verdict::ConsistentWithKls => "consistent-with-KLS",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Growth of the speed relative to `√k`, as declared by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedClass {
    /// `s = o(√k)`.
    SubSqrtK,
    /// `s ≍ √k`.
    SqrtK,
    /// Faster than `√k`.
    SuperSqrtK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlsVerdict {
    pub condition: Condition,
    pub verdict: Verdict,
    pub speed_class: Option<SpeedClass>,
    pub t0: Option<f64>,
    /// Points at which the rate (or `g(t)`) was evaluated.
    #[serde(with = "ext_f64_vec")]
    pub grid: Vec<f64>,
    #[serde(with = "ext_f64_vec")]
    pub values: Vec<f64>,
    /// `inf_t g(t)` for condition (b).
    #[serde(with = "ext_f64", default = "nan")]
    pub infimum: f64,
    pub closed_form: bool,
    pub notes: Vec<String>,
}

fn nan() -> f64 {
    f64::NAN
}

fn is_lln(x: f64, lln: f64) -> bool {
    (x - lln).abs() <= 1e-12 * lln.abs().max(1.0)
}

/// Condition (a) on a grid of arguments.
///
/// Would-disprove when the rate is finite and above `tol` somewhere off its
/// LLN point; inconclusive when it is finite but within `tol` of 0 there;
/// consistent when it is `+∞` everywhere off the LLN point.
pub fn check_condition_a(rate: &dyn Rate, speed: SpeedClass, grid: &[f64], tol: f64) -> Result<KlsVerdict> {
    if grid.is_empty() {
        return usage("condition (a) needs a non-empty grid");
    }
    if speed != SpeedClass::SubSqrtK {
        return usage("condition (a) applies only to speeds declared o(sqrt k) (speed class sub-sqrt-k)");
    }
    let lln = rate.lln_point();
    let values: Vec<f64> = grid.iter().map(|&x| rate.eval(x)).collect();
    let off: Vec<f64> = grid
        .iter()
        .zip(&values)
        .filter(|(x, _)| !is_lln(**x, lln))
        .map(|(_, v)| *v)
        .collect();
    let mut notes = Vec::new();
    let mut verdict = if off.iter().any(|v| v.is_finite() && *v > tol) {
        Verdict::WouldDisproveKls
    } else if off.iter().any(|v| v.is_finite()) {
        notes.push(format!("finite rate values off the LLN point are all within tol={tol} of 0"));
        Verdict::Inconclusive
    } else {
        Verdict::ConsistentWithKls
    };
    if verdict == Verdict::WouldDisproveKls && !rate.closed_form() {
        notes.push("rate is estimated from samples; a finite-sample rate cannot certify a limit".into());
        verdict = Verdict::Inconclusive;
    }
    Ok(KlsVerdict {
        condition: Condition::ASingularity,
        verdict,
        speed_class: Some(speed),
        t0: None,
        grid: grid.to_vec(),
        values,
        infimum: f64::NAN,
        closed_form: rate.closed_form(),
        notes,
    })
}

/// Settings for condition (b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionB {
    pub t0: f64,
    pub tmax: f64,
    pub points: usize,
    pub tol: f64,
}

impl ConditionB {
    pub fn new(t0: f64) -> Self {
        Self {
            t0,
            tmax: 1e8,
            points: 400,
            tol: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ConditionB { t0, tmax, points, .. } = *self;
        if !(t0 > 1.0) {
            return usage(format!(
                "condition (b) needs t0 > 1 strictly; it cannot be relaxed to t0 in [1, inf) (got t0={t0})"
            ));
        }
        if !(tmax > t0) || !tmax.is_finite() {
            return usage(format!("need t0 < tmax < inf, got t0={t0}, tmax={tmax}"));
        }
        if points < 2 {
            return usage("condition (b) needs at least 2 grid points");
        }
        Ok(())
    }
}

/// Condition (b): `g(t) = inf_{x>t} 𝕀(x) / t` on a geometric grid of
/// `[t₀, t_max]`. Would-disprove when `g` ends below `tol` and its tail is
/// decreasing; otherwise consistent.
pub fn check_condition_b(rate: &dyn Rate, cfg: &ConditionB) -> Result<KlsVerdict> {
    cfg.validate()?;
    let ConditionB { t0, tmax, points, tol } = *cfg;
    let ratio = (tmax / t0).ln() / (points - 1) as f64;
    let ts: Vec<f64> = (0..points)
        .map(|i| if i == 0 { t0 } else { t0 * (ratio * i as f64).exp() })
        .collect();

    // Monotone right tail lets the inner infimum be read off at t⁺.
    let start = t0;
    let probe_grid: Vec<f64> = (0..=2000)
        .map(|i| start * ((2.0 * tmax / start).ln() * i as f64 / 2000.0).exp())
        .collect();
    let probe_vals: Vec<f64> = probe_grid.iter().map(|&x| rate.eval(x)).collect();
    let monotone = probe_vals
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0) || w[0].is_infinite());
    let mut notes = Vec::new();
    let inner = |t: f64| -> f64 {
        if monotone {
            let v = rate.eval(t);
            if v.is_finite() {
                v
            } else {
                rate.eval(t * (1.0 + 1e-12))
            }
        } else {
            probe_grid
                .iter()
                .zip(&probe_vals)
                .filter(|(x, _)| **x > t)
                .map(|(_, v)| *v)
                .fold(f64::INFINITY, f64::min)
        }
    };
    if !monotone {
        notes.push("rate is not nondecreasing on the right tail; inner infimum by grid minimization".into());
    }
    let g: Vec<f64> = ts.iter().map(|&t| inner(t) / t).collect();
    let infimum = g.iter().copied().fold(f64::INFINITY, f64::min);
    let tail = &g[g.len() - g.len().div_ceil(10).max(2)..];
    let decreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    let last = g[g.len() - 1];
    let mut verdict = if last < tol && decreasing {
        Verdict::WouldDisproveKls
    } else {
        Verdict::ConsistentWithKls
    };
    if verdict == Verdict::WouldDisproveKls && !rate.closed_form() {
        notes.push("rate is estimated from samples; a finite-sample rate cannot certify a limit".into());
        verdict = Verdict::Inconclusive;
    }
    Ok(KlsVerdict {
        condition: Condition::BInfCriterion,
        verdict,
        speed_class: None,
        t0: Some(t0),
        grid: ts,
        values: g,
        infimum,
        closed_form: rate.closed_form(),
        notes,
    })
}

/// A rate known only at sample points, e.g. empirical rates from a scan.
/// Evaluated by linear interpolation; `+∞` outside the sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRate {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub lln: f64,
}

impl Rate for SampledRate {
    fn eval(&self, x: f64) -> f64 {
        let i = self.xs.partition_point(|v| *v < x);
        if i < self.xs.len() && self.xs[i] == x {
            return self.values[i];
        }
        if i == 0 || i == self.xs.len() {
            return f64::INFINITY;
        }
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }
    fn lln_point(&self) -> f64 {
        self.lln
    }
    fn closed_form(&self) -> bool {
        false
    }
}

/// One `(k, t)` cell of a concentration fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub k: usize,
    pub t: f64,
    pub p_hat: f64,
    /// Lower confidence bound on the probability.
    pub p_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationFit {
    pub c_hat: f64,
    /// Cells whose lower bound exceeds `2 e^{−Ĉ t √k}`.
    pub violations: Vec<Cell>,
    /// Largest `C` that no cell violates.
    #[serde(with = "ext_f64")]
    pub c_max_consistent: f64,
    pub used: usize,
    /// `log p̂ − (log 2 − Ĉ t√k)` per used cell.
    pub residuals: Vec<f64>,
}

/// Least-squares fit of `log p̂ ≈ log 2 − C t √k` over cells with `p̂ > 0`.
pub fn fit_concentration_cells(cells: &[Cell]) -> Result<ConcentrationFit> {
    let usable: Vec<&Cell> = cells.iter().filter(|c| c.p_hat > 0.0 && c.t > 0.0).collect();
    if usable.len() < 3 {
        return usage(format!(
            "concentration fit needs at least 3 cells with hits, got {}",
            usable.len()
        ));
    }
    let ln2 = std::f64::consts::LN_2;
    let u = |c: &Cell| c.t * (c.k as f64).sqrt();
    let num: f64 = usable.iter().map(|c| u(c) * (ln2 - c.p_hat.ln())).sum();
    let den: f64 = usable.iter().map(|c| u(c) * u(c)).sum();
    let c_hat = num / den;
    let residuals = usable
        .iter()
        .map(|c| c.p_hat.ln() - (ln2 - c_hat * u(c)))
        .collect();
    let violations = cells
        .iter()
        .filter(|c| c.p_lower > 2.0 * (-c_hat * u(c)).exp() * (1.0 + 1e-9))
        .copied()
        .collect();
    let c_max_consistent = cells
        .iter()
        .filter(|c| c.p_lower > 0.0)
        .map(|c| (ln2 - c.p_lower.ln()) / u(c))
        .fold(f64::INFINITY, f64::min);
    Ok(ConcentrationFit {
        c_hat,
        violations,
        c_max_consistent,
        used: usable.len(),
        residuals,
    })
}

/// Fit from Monte-Carlo estimates of `P[|k^{-1/2}𝒵 − c| > x]`. Dividing by
/// the centre `c` gives the isotropic deviation `|‖ξ‖₂/√k − 1| > t` with
/// `t = x/c`.
pub fn fit_concentration_constant(estimates: &[TailEstimate]) -> Result<ConcentrationFit> {
    let mut cells = Vec::with_capacity(estimates.len());
    for e in estimates {
        let q = &e.query;
        if q.direction != Direction::TwoSidedAbs || q.statistic != Statistic::ZOverSqrtK || !(q.center > 0.0) {
            return usage(
                "concentration fit needs two-sided deviations of the projected norm over sqrt(k) about a positive centre",
            );
        }
        let p_lower = match q.estimator {
            Estimator::Plain => stats::clopper_pearson_lower(e.acc.hits, e.acc.samples, 0.95),
            Estimator::Tilted(_) => (e.p_hat - 1.645 * e.stderr).max(0.0),
        };
        cells.push(Cell {
            k: q.cfg.k,
            t: q.x / q.center,
            p_hat: e.p_hat,
            p_lower,
        });
    }
    fit_concentration_cells(&cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{singular_rate, CustomRate, RateFunction, Regime, RegimeSpec};

    fn crosspoly() -> RateFunction {
        RateFunction::new(RegimeSpec::new(1.0, Regime::CrosspolytopeLdp, 0.0).unwrap()).unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect()
    }

    #[test]
    fn singular_rate_is_consistent() {
        let r = CustomRate { f: singular_rate, lln: 1.0 };
        let g: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
        let v = check_condition_a(&r, SpeedClass::SubSqrtK, &g, 1e-6).unwrap();
        assert_eq!(v.verdict, Verdict::ConsistentWithKls);
    }

    #[test]
    fn quadratic_rate_would_disprove() {
        let r = RateFunction::new(RegimeSpec::new(3.0, Regime::SubcriticalMdp, 0.5).unwrap()).unwrap();
        let v = check_condition_a(&r, SpeedClass::SubSqrtK, &grid(), 1e-6).unwrap();
        assert_eq!(v.verdict, Verdict::WouldDisproveKls);
    }

    #[test]
    fn small_noise_is_inconclusive() {
        let r = CustomRate {
            f: |x: f64| if (x - 1.0).abs() < 0.25 { 1e-9 } else { f64::INFINITY },
            lln: 1.0,
        };
        let g: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let v = check_condition_a(&r, SpeedClass::SubSqrtK, &g, 1e-6).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn condition_a_usage_errors() {
        let r = crosspoly();
        assert!(check_condition_a(&r, SpeedClass::SubSqrtK, &[], 1e-6).is_err());
        assert!(check_condition_a(&r, SpeedClass::SqrtK, &grid(), 1e-6).is_err());
    }

    #[test]
    fn sampled_rates_are_downgraded() {
        let r = SampledRate {
            xs: vec![0.0, 0.5, 1.0],
            values: vec![0.0, 0.3, 0.9],
            lln: 0.0,
        };
        let v = check_condition_a(&r, SpeedClass::SubSqrtK, &[0.0, 0.5, 1.0], 1e-6).unwrap();
        assert_eq!(v.verdict, Verdict::Inconclusive);
        assert!((r.eval(0.75) - 0.6).abs() < 1e-15);
        assert_eq!(r.eval(2.0), f64::INFINITY);
    }

    #[test]
    fn crosspolytope_infimum() {
        for &t0 in &[1.1, 1.5, 2.0, 5.0] {
            let v = check_condition_b(&crosspoly(), &ConditionB::new(t0)).unwrap();
            assert_eq!(v.verdict, Verdict::ConsistentWithKls);
            let want = (1.0 - 1.0 / (t0 * t0)).sqrt();
            assert!((v.infimum - want).abs() <= 1e-10, "t0={t0}: {}", v.infimum);
        }
        let v = check_condition_b(&crosspoly(), &ConditionB::new(2.0)).unwrap();
        assert!((v.infimum - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn square_root_rate_would_disprove() {
        let r = CustomRate { f: |x: f64| if x >= 0.0 { x.sqrt() } else { f64::INFINITY }, lln: 0.0 };
        let v = check_condition_b(&r, &ConditionB::new(2.0)).unwrap();
        assert_eq!(v.verdict, Verdict::WouldDisproveKls);
        assert!(v.infimum < 1e-3);
    }

    #[test]
    fn non_monotone_tail_uses_grid_minimum() {
        // Vanishes on [9, 11]: inf_{x>t} 𝕀 is 0 for t < 11.
        let r = CustomRate { f: |x: f64| ((x - 10.0).abs() - 1.0).max(0.0).sqrt(), lln: 10.0 };
        let v = check_condition_b(&r, &ConditionB { t0: 2.0, tmax: 1e6, points: 100, tol: 1e-2 }).unwrap();
        assert!(v.notes.iter().any(|n| n.contains("grid")));
        assert_eq!(v.values[0], 0.0);
    }

    #[test]
    fn t0_must_exceed_one() {
        for t0 in [1.0, 0.5] {
            assert!(check_condition_b(&crosspoly(), &ConditionB::new(t0)).is_err());
        }
    }

    #[test]
    fn planted_constant_is_recovered() {
        let mut cells = Vec::new();
        for &k in &[10usize, 50, 200] {
            for &t in &[0.1, 0.2, 0.4] {
                let p = 2.0 * (-0.7 * t * (k as f64).sqrt()).exp();
                cells.push(Cell { k, t, p_hat: p, p_lower: p });
            }
        }
        let fit = fit_concentration_cells(&cells).unwrap();
        assert!((fit.c_hat - 0.7).abs() < 0.007, "{}", fit.c_hat);
        assert!(fit.violations.is_empty());
        assert!((fit.c_max_consistent - 0.7).abs() < 1e-9);
        assert!(fit_concentration_cells(&cells[..2]).is_err());
    }
}
