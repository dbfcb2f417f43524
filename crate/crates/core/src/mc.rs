//! Parallel Monte-Carlo estimation of tail probabilities, with optional
//! exponential tilting of the chi-square and power-sum components.
//!
//! The budget is split into units of `batch` draws; unit `u` draws from
//! `RngStream(seed, stream_start + u)` and the per-unit accumulators are
//! reduced in unit order. The result therefore does not depend on the number
//! of worker threads.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Error, Result};
use crate::rates::Rate;
use crate::sampling::{sample_w, x_statistic_from_z, ProjectionConfig, ReprParts, RngStream};
use crate::serde_ext::ext_f64;
use crate::specfun;
use crate::stats;

/// Draws per work unit unless the query says otherwise.
pub const DEFAULT_BATCH: u64 = 1 << 16;

/// Which scalar is thresholded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `k^{-1/2} 𝒵_{n,p}`.
    ZOverSqrtK,
    /// `t⁻¹ 𝒳_{n,p}`.
    XOverT,
    /// `k⁻¹ Σ_{i≤k} g_i²`.
    ChiMean,
    /// `(M_p(2) k⁻¹ Σ_{i≤k} g_i²)^{1/2}`, the chi-square surrogate of the
    /// critical statistic.
    ChiRoot,
    /// `n⁻¹ Σ_{i≤n} |Z_i|^p`.
    PowerMean,
}

/// Event `{S > x}`, `{S < x}` or `{|S − center| > x}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Upper,
    Lower,
    TwoSidedAbs,
}

/// Tilt parameters; each `θ` multiplies the matching sum in the exponent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tilt {
    /// On `Σ_{i≤k} g_i²`; must be `< 1/2`.
    pub head: f64,
    /// On `Σ_{k<i≤n} g_i²`; must be `< 1/2`.
    pub tail: f64,
    /// On `Σ |Z_i|^p`; must be `< 1/p`.
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Plain,
    Tilted(Tilt),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailQuery {
    pub cfg: ProjectionConfig,
    pub statistic: Statistic,
    pub x: f64,
    pub direction: Direction,
    /// Centre for two-sided events.
    pub center: f64,
    /// Scale `t` of the subcritical statistic.
    pub t: f64,
    /// Speed `s` dividing `−log p̂`.
    pub speed: f64,
    pub budget: u64,
    pub estimator: Estimator,
    pub batch: u64,
}

impl TailQuery {
    pub fn new(cfg: ProjectionConfig, statistic: Statistic, x: f64, speed: f64, budget: u64) -> Self {
        Self {
            cfg,
            statistic,
            x,
            direction: Direction::Upper,
            center: 0.0,
            t: 1.0,
            speed,
            budget,
            estimator: Estimator::Plain,
            batch: DEFAULT_BATCH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.budget < 1 {
            return usage("sample budget must be at least 1");
        }
        if self.batch < 1 {
            return usage("batch size must be at least 1");
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return usage(format!("speed must be positive, got {}", self.speed));
        }
        if !self.x.is_finite() {
            return usage(format!("threshold must be finite, got {}", self.x));
        }
        if self.statistic == Statistic::XOverT && !(self.t > 0.0) {
            return usage(format!("scale t must be positive, got {}", self.t));
        }
        if let Estimator::Tilted(t) = self.estimator {
            if !(t.head < 0.5 && t.tail < 0.5) {
                return domain("chi-square tilts must be below 1/2");
            }
            if !(t.power < 1.0 / self.cfg.p) {
                return domain(format!("power-sum tilt must be below 1/p = {}", 1.0 / self.cfg.p));
            }
            let chi_ok = matches!(
                self.statistic,
                Statistic::ZOverSqrtK | Statistic::XOverT | Statistic::ChiMean | Statistic::ChiRoot
            );
            let power_ok = matches!(
                self.statistic,
                Statistic::ZOverSqrtK | Statistic::XOverT | Statistic::PowerMean
            );
            if (t.head != 0.0 && !chi_ok)
                || (t.tail != 0.0 && !matches!(self.statistic, Statistic::ZOverSqrtK | Statistic::XOverT))
                || (t.power != 0.0 && !power_ok)
            {
                return usage(format!(
                    "tilt components do not apply to statistic {:?}",
                    self.statistic
                ));
            }
        }
        Ok(())
    }

    fn units(&self) -> u64 {
        self.budget.div_ceil(self.batch)
    }

    fn hit(&self, v: f64) -> bool {
        match self.direction {
            Direction::Upper => v > self.x,
            Direction::Lower => v < self.x,
            Direction::TwoSidedAbs => (v - self.center).abs() > self.x,
        }
    }
}

/// Exact-count accumulator of one or more work units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub samples: u64,
    pub hits: u64,
    /// `Σ w·1_A`, with `w ≡ 1` for plain sampling.
    pub sum_w: f64,
    /// `Σ (w·1_A)²`.
    pub sum_w2: f64,
}

impl Accumulator {
    pub fn merge(&mut self, o: &Accumulator) {
        self.samples += o.samples;
        self.hits += o.hits;
        self.sum_w += o.sum_w;
        self.sum_w2 += o.sum_w2;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub query: TailQuery,
    pub seed: u64,
    pub streams: Range<u64>,
    pub acc: Accumulator,
    pub p_hat: f64,
    #[serde(with = "ext_f64")]
    pub stderr: f64,
    /// `−log(p̂)/s`.
    #[serde(with = "ext_f64")]
    pub rate: f64,
    /// Delta-method standard error of the rate, `se(p̂)/(p̂ s)`.
    #[serde(with = "ext_f64")]
    pub rate_stderr: f64,
    /// Set when no draw hit the event: `p̂ = 0` is a budget limit, not a measurement.
    pub budget_limited: bool,
    /// One-sided 95% Clopper–Pearson upper bound on the hit frequency.
    pub p_upper: f64,
    /// `−log(p_upper)/s`, a finite lower bound on the rate.
    pub rate_lower_bound: f64,
}

impl TailEstimate {
    fn from_acc(query: TailQuery, seed: u64, streams: Range<u64>, acc: Accumulator) -> Self {
        let n = acc.samples as f64;
        let p_hat = acc.sum_w / n;
        let stderr = match query.estimator {
            Estimator::Plain => (p_hat * (1.0 - p_hat) / n).sqrt(),
            Estimator::Tilted(_) => {
                if acc.samples < 2 {
                    f64::NAN
                } else {
                    ((acc.sum_w2 - n * p_hat * p_hat).max(0.0) / (n - 1.0) / n).sqrt()
                }
            }
        };
        let s = query.speed;
        let budget_limited = acc.hits == 0;
        let rate = if budget_limited { f64::INFINITY } else { -p_hat.ln() / s };
        let rate_stderr = if budget_limited { f64::NAN } else { stderr / (p_hat * s) };
        let p_upper = stats::clopper_pearson_upper(acc.hits, acc.samples, 0.95);
        Self {
            query,
            seed,
            streams,
            acc,
            p_hat,
            stderr,
            rate,
            rate_stderr,
            budget_limited,
            p_upper,
            rate_lower_bound: -p_upper.ln() / s,
        }
    }

    /// Combine estimates of the same query over adjacent stream ranges.
    pub fn merge(&self, other: &TailEstimate) -> Result<TailEstimate> {
        let mut a = self.query;
        let mut b = other.query;
        a.budget = 0;
        b.budget = 0;
        if a != b || self.seed != other.seed {
            return usage("can only merge estimates of the same query and seed");
        }
        let streams = if self.streams.end == other.streams.start {
            self.streams.start..other.streams.end
        } else if other.streams.end == self.streams.start {
            other.streams.start..self.streams.end
        } else {
            return usage("merged stream ranges must be adjacent and disjoint");
        };
        let mut acc = self.acc;
        acc.merge(&other.acc);
        let mut q = self.query;
        q.budget = acc.samples;
        Ok(Self::from_acc(q, self.seed, streams, acc))
    }
}

/// One draw of `Σg²` on `k` degrees of freedom under the tilted law
/// `Gamma(k/2, scale 2/(1 − 2θ))`, with the log likelihood ratio
/// `−θ·value − (k/2) log(1 − 2θ)` of the original law against the tilted one.
pub fn tilt_chi_square(k: f64, theta: f64, rng: &mut RngStream) -> Result<(f64, f64)> {
    if !(theta < 0.5) {
        return domain(format!("chi-square tilt must be below 1/2, got {theta}"));
    }
    Ok(tilted_chi(k, theta, rng))
}

#[inline]
fn tilted_chi(k: f64, theta: f64, rng: &mut RngStream) -> (f64, f64) {
    if theta == 0.0 {
        return (rng.chi_square(k), 0.0);
    }
    let c = 1.0 - 2.0 * theta;
    let v = rng.chi_square(k) / c;
    (v, -theta * v - 0.5 * k * c.ln())
}

/// `(Σ Z_i², Σ |Z_i|^p, log LR)` with `Σ|Z_i|^p` tilted by `θ`.
#[inline]
fn tilted_z_sums(n: usize, p: f64, theta: f64, rng: &mut RngStream) -> (f64, f64, f64) {
    let c = 1.0 - p * theta;
    let (s2, sp) = if p == 2.0 {
        let s = rng.chi_square(n as f64) / c;
        (s, s)
    } else {
        let mut s2 = 0.0;
        let mut sp = 0.0;
        let scale = p / c;
        let two_over_p = 2.0 / p;
        for _ in 0..n {
            let a = scale * rng.gamma(1.0 / p);
            sp += a;
            s2 += a.powf(two_over_p);
        }
        (s2, sp)
    };
    let llr = if theta == 0.0 { 0.0 } else { -theta * sp - (n as f64 / p) * c.ln() };
    (s2, sp, llr)
}

/// Per-query constants hoisted out of the sampling loop.
struct Prepared {
    q: TailQuery,
    tilt: Tilt,
    m2: f64,
    prefactor: f64,
}

impl Prepared {
    fn new(q: &TailQuery) -> Result<Self> {
        let tilt = match q.estimator {
            Estimator::Plain => Tilt::default(),
            Estimator::Tilted(t) => t,
        };
        Ok(Self {
            q: *q,
            tilt,
            m2: specfun::m_p(q.cfg.p)?,
            prefactor: specfun::centring_prefactor(q.cfg.p)?,
        })
    }

    /// One draw: `(statistic, log LR)`.
    #[inline]
    fn draw(&self, rng: &mut RngStream) -> (f64, f64) {
        let cfg = &self.q.cfg;
        let (n, k, p) = (cfg.n, cfg.k, cfg.p);
        match self.q.statistic {
            Statistic::ChiMean | Statistic::ChiRoot => {
                let (h, l) = tilted_chi(k as f64, self.tilt.head, rng);
                let mean = h / k as f64;
                let v = if self.q.statistic == Statistic::ChiMean {
                    mean
                } else {
                    (self.m2 * mean).sqrt()
                };
                (v, l)
            }
            Statistic::PowerMean => {
                let (_, sp, l) = tilted_z_sums(n, p, self.tilt.power, rng);
                (sp / n as f64, l)
            }
            Statistic::ZOverSqrtK | Statistic::XOverT => {
                let (chi_head, l1) = tilted_chi(k as f64, self.tilt.head, rng);
                let (chi_tail, l2) = tilted_chi((n - k) as f64, self.tilt.tail, rng);
                let (sum_sq, sum_p, l3) = tilted_z_sums(n, p, self.tilt.power, rng);
                let w = sample_w(&cfg.w, p, rng);
                let z = ReprParts {
                    chi_head,
                    chi_tail,
                    sum_sq,
                    sum_p,
                    w,
                }
                .z_norm(n, p);
                let v = if self.q.statistic == Statistic::ZOverSqrtK {
                    z / (k as f64).sqrt()
                } else {
                    x_statistic_from_z(z, self.prefactor, k, self.q.t)
                };
                (v, l1 + l2 + l3)
            }
        }
    }

    fn run_unit(&self, seed: u64, stream: u64, draws: u64) -> Accumulator {
        let mut rng = RngStream::new(seed, stream);
        let mut acc = Accumulator {
            samples: draws,
            ..Default::default()
        };
        let tilted = matches!(self.q.estimator, Estimator::Tilted(_));
        for _ in 0..draws {
            let (v, llr) = self.draw(&mut rng);
            if self.q.hit(v) {
                acc.hits += 1;
                let w = if tilted { llr.exp() } else { 1.0 };
                acc.sum_w += w;
                acc.sum_w2 += w * w;
            }
        }
        acc
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical {
            what: "thread pool".into(),
            diagnostics: e.to_string(),
        })
}

/// Estimate `P[statistic ∈ event]` with the query's budget, using streams
/// `0..⌈budget/batch⌉`. `workers = 0` uses all cores.
pub fn estimate_tail(q: &TailQuery, seed: u64, workers: usize) -> Result<TailEstimate> {
    q.validate()?;
    let units = q.units();
    let last = q.budget - (units - 1) * q.batch;
    run(q, seed, 0..units, last, workers)
}

/// Estimate over an explicit stream range, `batch` draws per stream. Estimates
/// over adjacent ranges merge exactly into the estimate over their union.
pub fn estimate_tail_streams(
    q: &TailQuery,
    seed: u64,
    streams: Range<u64>,
    workers: usize,
) -> Result<TailEstimate> {
    if streams.is_empty() {
        return usage("stream range must be non-empty");
    }
    let mut q = *q;
    q.budget = (streams.end - streams.start) * q.batch;
    q.validate()?;
    let batch = q.batch;
    run(&q, seed, streams, batch, workers)
}

fn run(q: &TailQuery, seed: u64, streams: Range<u64>, last: u64, workers: usize) -> Result<TailEstimate> {
    let prep = Prepared::new(q)?;
    let end = streams.end;
    let units: Vec<Accumulator> = pool(workers)?.install(|| {
        streams
            .clone()
            .into_par_iter()
            .map(|s| prep.run_unit(seed, s, if s + 1 == end { last } else { q.batch }))
            .collect()
    });
    let mut acc = Accumulator::default();
    for u in &units {
        acc.merge(u);
    }
    Ok(TailEstimate::from_acc(*q, seed, streams, acc))
}

/// One row of a rate scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n: usize,
    pub k: usize,
    pub x: f64,
    pub p_hat: f64,
    #[serde(with = "ext_f64")]
    pub rate: f64,
    #[serde(with = "ext_f64")]
    pub rate_stderr: f64,
    pub budget_limited: bool,
    /// Finite rate value for plotting: `rate`, or its lower bound when budget-limited.
    pub rate_plot: f64,
    #[serde(with = "ext_f64")]
    pub theory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    /// `(n, r̂)` for threshold `x`, ordered by `n`.
    pub fn trend(&self, x: f64) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .rows
            .iter()
            .filter(|r| r.x == x)
            .map(|r| (r.n, r.rate_plot))
            .collect();
        v.sort_by_key(|e| e.0);
        v
    }

    /// Whether `|r̂ − 𝕀(x)|` is non-increasing along the `n` ladder.
    pub fn gap_non_increasing(&self, x: f64) -> bool {
        let mut rows: Vec<&ScanRow> = self.rows.iter().filter(|r| r.x == x).collect();
        rows.sort_by_key(|r| r.n);
        rows.windows(2)
            .all(|w| (w[1].rate_plot - w[1].theory).abs() <= (w[0].rate_plot - w[0].theory).abs())
    }
}

/// Estimates every query (query `i` uses seed `seed + i`) and pairs each
/// empirical rate with the theoretical one when given.
pub fn rate_scan(
    qs: &[TailQuery],
    seed: u64,
    workers: usize,
    theory: Option<&dyn Rate>,
) -> Result<ScanTable> {
    let Some(first) = qs.first() else {
        return usage("rate scan needs at least one query");
    };
    if qs.iter().any(|q| q.statistic != first.statistic) {
        return usage("all queries of a rate scan must share the statistic");
    }
    let mut rows = Vec::with_capacity(qs.len());
    for (i, q) in qs.iter().enumerate() {
        let e = estimate_tail(q, seed.wrapping_add(i as u64), workers)?;
        rows.push(ScanRow {
            n: q.cfg.n,
            k: q.cfg.k,
            x: q.x,
            p_hat: e.p_hat,
            rate: e.rate,
            rate_stderr: e.rate_stderr,
            budget_limited: e.budget_limited,
            rate_plot: if e.budget_limited { e.rate_lower_bound } else { e.rate },
            theory: theory.map_or(f64::NAN, |r| r.eval(q.x)),
        });
    }
    Ok(ScanTable { rows })
}
