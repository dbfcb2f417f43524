//! Gamma-function machinery and the closed-form moment constants of
//! p-generalized Gaussian laws.
//!
//! A p-generalized Gaussian `Z` has density
//! `f_p(x) = exp(-|x|^p / p) / (2 p^{1/p} Γ(1 + 1/p))`, so `p = 2` is the
//! standard normal and `p = 1` the Laplace law. Its absolute moments are
//!
//! ```text
//! E|Z|^q = M_p(q) = p^{q/p} / (q + 1) · Γ(1 + (q + 1)/p) / Γ(1 + 1/p)
//! ```
//!
//! Every Γ expression here is evaluated in log space and exponentiated once.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `zeta(k) - 1` for `k = 2, 3, ...`; coefficients of the Taylor series of
/// `ln Γ(1 + z)` once the `-ln(1 + z)` part is split off.
const ZETA_MINUS_ONE: [f64; 39] = [
    0.644_934_066_848_226_4,
    0.202_056_903_159_594_3,
    0.082_323_233_711_138_19,
    0.036_927_755_143_369_93,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_827,
    0.004_077_356_197_944_339,
    0.002_008_392_826_082_214,
    0.000_994_575_127_818_085_3,
    0.000_494_188_604_119_464_6,
    0.000_246_086_553_308_048_3,
    0.000_122_713_347_578_489_1,
    6.124_813_505_870_483e-5,
    3.058_823_630_702_049e-5,
    1.528_225_940_865_187e-5,
    7.637_197_637_899_762e-6,
    3.817_293_264_999_840e-6,
    1.908_212_716_553_939e-6,
    9.539_620_338_727_961e-7,
    4.769_329_867_878_065e-7,
    2.384_505_027_277_330e-7,
    1.192_199_259_653_111e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504e-8,
    7.450_711_789_835_429e-9,
    3.725_334_024_788_457e-9,
    1.862_659_723_513_049e-9,
    9.313_274_324_196_682e-10,
    4.656_629_065_033_784e-10,
    2.328_311_833_676_505e-10,
    1.164_155_017_270_052e-10,
    5.820_772_087_902_701e-11,
    2.910_385_044_497_100e-11,
    1.455_192_189_104_198e-11,
    7.275_959_835_057_481e-12,
    3.637_979_547_378_651e-12,
    1.818_989_650_307_066e-12,
    9.094_947_840_263_889e-13,
];

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(1 + z)` for `|z| <= 0.5`.
fn ln_gamma_1p_series(z: f64) -> f64 {
    let mut acc = 0.0;
    let mut zk = -z;
    for (i, c) in ZETA_MINUS_ONE.iter().enumerate() {
        // (-z)^k with k = i + 2
        zk *= -z;
        acc += c * zk / (i + 2) as f64;
    }
    -(z).ln_1p() + z * (1.0 - EULER_GAMMA) + acc
}

fn ln_gamma_lanczos(x: f64) -> f64 {
    let x = x - 1.0;
    let mut series = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        series += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Natural logarithm of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma requires x > 0, got {x}"));
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        ln_gamma_1p_series(x) - x.ln()
    } else if x <= 1.5 {
        ln_gamma_1p_series(x - 1.0)
    } else if x <= 2.5 {
        (x - 1.0).ln() + ln_gamma_1p_series(x - 2.0)
    } else {
        ln_gamma_lanczos(x)
    }
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 200_000;

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("incomplete gamma requires a > 0, got {a}"));
    }
    if !(x >= 0.0) {
        return domain(format!("incomplete gamma requires x >= 0, got {x}"));
    }
    Ok(())
}

fn ln_p_series(a: f64, x: f64) -> Result<f64> {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..GAMMA_MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            return Ok(-x + a * x.ln() - ln_gamma_pos(a) + sum.ln());
        }
    }
    Err(Error::Numerical {
        what: "incomplete gamma series did not converge".into(),
        diagnostics: format!("a={a}, x={x}"),
    })
}

fn ln_q_continued_fraction(a: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            return Ok(-x + a * x.ln() - ln_gamma_pos(a) + h.ln());
        }
    }
    Err(Error::Numerical {
        what: "incomplete gamma continued fraction did not converge".into(),
        diagnostics: format!("a={a}, x={x}"),
    })
}

/// `ln P(a, x)`, the log of the regularized lower incomplete gamma function.
///
/// Stays finite where `P` itself underflows, which the chi-square tail
/// oracles rely on.
pub fn ln_gamma_p(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x < a + 1.0 {
        ln_p_series(a, x)
    } else {
        let lq = ln_q_continued_fraction(a, x)?;
        Ok((-lq.exp()).ln_1p())
    }
}

/// `ln Q(a, x)` with `Q = 1 - P` the regularized upper incomplete gamma.
pub fn ln_gamma_q(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        let lp = ln_p_series(a, x)?;
        Ok((-lp.exp()).ln_1p())
    } else {
        ln_q_continued_fraction(a, x)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return domain(format!("exponent p must satisfy 1 <= p < inf, got {p}"));
    }
    Ok(())
}

fn check_order(q: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return domain(format!("moment order must satisfy q >= 1, got {q}"));
    }
    Ok(())
}

fn ln_moment(p: f64, q: f64) -> f64 {
    (q / p) * p.ln() - (q + 1.0).ln() + ln_gamma_pos(1.0 + (q + 1.0) / p)
        - ln_gamma_pos(1.0 + 1.0 / p)
}

/// Absolute moment `M_p(q) = E|Z|^q` of a p-generalized Gaussian.
pub fn moment(p: f64, q: f64) -> Result<f64> {
    check_exponent(p)?;
    check_order(q)?;
    Ok(ln_moment(p, q).exp())
}

/// `Cov(|Z|^r, |Z|^s) = M_p(r + s) - M_p(r) M_p(s)`.
pub fn covariance(p: f64, r: f64, s: f64) -> Result<f64> {
    Ok(moment(p, r + s)? - moment(p, r)? * moment(p, s)?)
}

/// The constant `m_p`, taken to be `M_p(2)`: the squared law-of-large-numbers
/// limit of `(n^{-1} Σ Z_i^2)^{1/2}`.
pub fn m_p(p: f64) -> Result<f64> {
    moment(p, 2.0)
}

/// Exponent together with a cache of the moments requested so far.
///
/// Cache keys are the exact bit patterns of `q`; no rounding is applied.
#[derive(Debug)]
pub struct PggParams {
    p: f64,
    cache: RwLock<HashMap<u64, f64>>,
}

impl PggParams {
    pub fn new(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(Self {
            p,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn moment(&self, q: f64) -> Result<f64> {
        check_order(q)?;
        let key = q.to_bits();
        if let Some(v) = self.cache.read().expect("moment cache poisoned").get(&key) {
            return Ok(*v);
        }
        let v = ln_moment(self.p, q).exp();
        self.cache
            .write()
            .expect("moment cache poisoned")
            .insert(key, v);
        Ok(v)
    }

    /// Number of distinct moment orders cached.
    pub fn cached(&self) -> usize {
        self.cache.read().expect("moment cache poisoned").len()
    }
}

impl Clone for PggParams {
    fn clone(&self) -> Self {
        Self {
            p: self.p,
            cache: RwLock::new(self.cache.read().expect("moment cache poisoned").clone()),
        }
    }
}

/// Covariance matrix of `(Z^2 - M_p(2), |Z|^p - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateCov {
    pub c11: f64,
    pub c12: f64,
    pub c22: f64,
    pub det: f64,
}

impl BivariateCov {
    /// `p = 2` makes `Z^2 = |Z|^p` and the matrix singular.
    pub fn is_degenerate(&self) -> bool {
        self.det <= 0.0
    }

    /// Inverse matrix as `[[i11, i12], [i12, i22]]`.
    pub fn inverse(&self) -> Result<[[f64; 2]; 2]> {
        if self.is_degenerate() {
            return Err(Error::Degenerate(
                "bivariate covariance is singular (p = 2); use the one-dimensional reduction"
                    .into(),
            ));
        }
        let d = self.det;
        Ok([[self.c22 / d, -self.c12 / d], [-self.c12 / d, self.c11 / d]])
    }

    /// `½ ⟨x, C⁻¹ x⟩`.
    pub fn quadratic_rate(&self, x1: f64, x2: f64) -> Result<f64> {
        let inv = self.inverse()?;
        Ok(0.5 * (inv[0][0] * x1 * x1 + 2.0 * inv[0][1] * x1 * x2 + inv[1][1] * x2 * x2))
    }
}

/// Covariance of `(Z^2, |Z|^p)` for `p >= 2`, entries from `M_p`.
pub fn bivariate_cov(p: f64) -> Result<BivariateCov> {
    check_exponent(p)?;
    if p < 2.0 {
        return domain(format!("bivariate covariance requires p >= 2, got {p}"));
    }
    let params = PggParams::new(p)?;
    let m2 = params.moment(2.0)?;
    let c11 = params.moment(4.0)? - m2 * m2;
    let c12 = params.moment(p + 2.0)? - m2;
    let mp = params.moment(p)?;
    let c22 = params.moment(2.0 * p)? - mp * mp;
    let mut det = c11 * c22 - c12 * c12;
    if det.abs() <= 64.0 * f64::EPSILON * c11 * c22 {
        det = 0.0;
    }
    Ok(BivariateCov { c11, c12, c22, det })
}

/// Closed-form determinant
/// `A_p = p^{4/p} (Γ(5/p)/Γ(1+1/p) - (p+4) Γ(3/p)^2 / Γ(1/p)^2)`.
pub fn a_p(p: f64) -> Result<f64> {
    check_exponent(p)?;
    let g1 = ln_gamma_pos(1.0 / p);
    let g3 = ln_gamma_pos(3.0 / p);
    let g5 = ln_gamma_pos(5.0 / p);
    let g1p = ln_gamma_pos(1.0 + 1.0 / p);
    let scale = (4.0 / p) * p.ln();
    Ok((scale + g5 - g1p).exp() - (p + 4.0) * (scale + 2.0 * g3 - 2.0 * g1).exp())
}

/// The subcritical MDP constant
///
/// ```text
/// α_{p,λ} = 2 Γ(1/p) Γ(3/p)^2
///           / [(2p - λ(4+3p)) Γ(1+1/p) Γ(3/p)^2 + λ Γ(1/p)^2 Γ(5/p)]
/// ```
///
/// A non-positive denominator (e.g. `p = 2, λ = 1`) means the Gaussian limit
/// has zero variance and the rate is infinite off the origin; that case is
/// reported as [`Error::Degenerate`].
pub fn alpha(p: f64, lambda: f64) -> Result<f64> {
    check_exponent(p)?;
    if p < 2.0 {
        return domain(format!("alpha requires p >= 2, got {p}"));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return domain(format!("alpha requires lambda in [0, 1], got {lambda}"));
    }
    // Divide through by Γ(1/p) Γ(3/p)^2; Γ(1+1/p)/Γ(1/p) = 1/p.
    let first = (2.0 * p - lambda * (4.0 + 3.0 * p)) / p;
    let ratio = (ln_gamma_pos(1.0 / p) + ln_gamma_pos(5.0 / p) - 2.0 * ln_gamma_pos(3.0 / p)).exp();
    let second = lambda * ratio;
    let denom = first + second;
    if denom <= 1e-12 * (first.abs() + second.abs()) {
        return Err(Error::Degenerate(format!(
            "alpha denominator vanishes at p={p}, lambda={lambda}: deterministic limit, infinite rate"
        )));
    }
    Ok(2.0 / denom)
}

/// `sqrt(Γ(1/p) / (p^{2/p} Γ(3/p)))`, the centring prefactor of the
/// subcritical statistic. Equals `1 / sqrt(M_p(2))`.
pub fn centring_prefactor(p: f64) -> Result<f64> {
    check_exponent(p)?;
    let ln = ln_gamma_pos(1.0 / p) - (2.0 / p) * p.ln() - ln_gamma_pos(3.0 / p);
    Ok((0.5 * ln).exp())
}
