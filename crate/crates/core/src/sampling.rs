//! Exact samplers: p-generalized Gaussians, the W-mixture family on the
//! `ℓ_p^n` ball, Haar projections and the projected-norm representation.
//!
//! A point of the ball with mixing law `W` is
//! `X = Z / (Σ|Z_i|^p + W)^{1/p}` for i.i.d. p-generalized Gaussians `Z_i`,
//! and the norm of its projection onto a Haar-random `k`-subspace satisfies
//!
//! ```text
//! n^{1/p} ‖P_E X‖₂  =d  n^{1/p} · sqrt(G_k / (G_k + G_rest)) · sqrt(Σ Z_i²) / (Σ|Z_i|^p + W)^{1/p}
//! ```
//!
//! with `G_k ~ χ²_k`, `G_rest ~ χ²_{n-k}` independent of everything else.

use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Error, Result};
use crate::specfun::{self, PggParams};

/// Largest ambient dimension accepted by [`project_norm_direct`].
pub const DIRECT_MAX_N: usize = 200;

/// Counter-based random stream: ChaCha8 keyed by `seed`, with the 64-bit
/// `stream` selecting an independent keystream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn words_consumed(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.inner.next_u32() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Gamma variate with the given shape and unit scale.
    ///
    /// Marsaglia–Tsang squeeze for `shape ≥ 1`; smaller shapes use
    /// `Γ(a) = Γ(a + 1) · U^{1/a}`. Shape 0 is the point mass at 0.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape >= 0.0);
        if shape == 0.0 {
            return 0.0;
        }
        if shape == 1.0 {
            return self.exponential();
        }
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0);
            return g * (self.uniform().ln() / shape).exp();
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// `χ²` variate with `dof` degrees of freedom.
    #[inline]
    pub fn chi_square(&mut self, dof: f64) -> f64 {
        2.0 * self.gamma(0.5 * dof)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Mixing law selecting a member of the ball-measure family. Rates are tied
/// to `1/p` of the enclosing configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum WLaw {
    /// Cone measure on the sphere.
    Dirac0,
    /// Uniform measure on the ball; rate `1/p`.
    Exponential,
    /// Beta-type measure; shape `alpha`, rate `1/p`.
    Gamma { alpha: f64 },
}

impl WLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WLaw::Gamma { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                domain(format!("gamma mixing shape must be positive, got {alpha}"))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self, p: f64) -> f64 {
        match *self {
            WLaw::Dirac0 => 0.0,
            WLaw::Exponential => p,
            WLaw::Gamma { alpha } => alpha * p,
        }
    }

    /// Natural log of `P[W > w]`.
    pub fn ln_tail(&self, p: f64, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        match *self {
            WLaw::Dirac0 => f64::NEG_INFINITY,
            WLaw::Exponential => -w / p,
            WLaw::Gamma { alpha } => specfun::ln_gamma_q(alpha, w / p).unwrap_or(f64::NAN),
        }
    }
}

impl std::fmt::Display for WLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WLaw::Dirac0 => f.write_str("cone"),
            WLaw::Exponential => f.write_str("uniform"),
            WLaw::Gamma { alpha } => write!(f, "gamma:{alpha}"),
        }
    }
}

impl FromStr for WLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let law = match s {
            "cone" | "dirac0" => WLaw::Dirac0,
            "uniform" | "exponential" => WLaw::Exponential,
            _ => match s.strip_prefix("gamma:") {
                Some(a) => WLaw::Gamma {
                    alpha: a
                        .parse()
                        .map_err(|_| Error::Usage(format!("bad gamma shape in {s:?}")))?,
                },
                None => return usage(format!("unknown mixing law {s:?}; expected uniform, cone or gamma:ALPHA")),
            },
        };
        law.validate()?;
        Ok(law)
    }
}

/// Ambient dimension, subspace dimension, exponent and mixing law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub w: WLaw,
}

impl ProjectionConfig {
    pub fn new(n: usize, k: usize, p: f64, w: WLaw) -> Result<Self> {
        let cfg = Self { n, k, p, w };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return domain(format!("p must be >= 1, got {}", self.p));
        }
        if self.k < 1 || self.k > self.n {
            return domain(format!("need 1 <= k <= n, got k={} n={}", self.k, self.n));
        }
        self.w.validate()
    }

    pub fn lambda(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

/// One draw of a p-generalized Gaussian.
pub fn sample_pgg(params: &PggParams, rng: &mut RngStream) -> f64 {
    pgg(params.p(), rng)
}

#[inline]
fn pgg(p: f64, rng: &mut RngStream) -> f64 {
    if p == 2.0 {
        return rng.normal();
    }
    rng.sign() * pgg_abs_pow(p, rng).powf(1.0 / p)
}

/// `|Z|^p` for a p-generalized Gaussian `Z`, i.e. `p·G` with `G ~ Gamma(1/p)`.
#[inline]
fn pgg_abs_pow(p: f64, rng: &mut RngStream) -> f64 {
    if p == 1.0 {
        rng.exponential()
    } else {
        p * rng.gamma(1.0 / p)
    }
}

/// One draw of the mixing variable.
pub fn sample_w(w: &WLaw, p: f64, rng: &mut RngStream) -> f64 {
    match *w {
        WLaw::Dirac0 => 0.0,
        WLaw::Exponential => p * rng.exponential(),
        WLaw::Gamma { alpha } => p * rng.gamma(alpha),
    }
}

/// A point of the `ℓ_p^n` ball distributed according to the mixing law.
pub fn sample_ball_point(cfg: &ProjectionConfig, rng: &mut RngStream) -> Vec<f64> {
    let p = cfg.p;
    let mut x = Vec::with_capacity(cfg.n);
    let mut sum_p = 0.0;
    for _ in 0..cfg.n {
        let a = pgg_abs_pow(p, rng);
        sum_p += a;
        x.push(rng.sign() * a.powf(1.0 / p));
    }
    let scale = (sum_p + sample_w(&cfg.w, p, rng)).powf(-1.0 / p);
    for v in &mut x {
        *v *= scale;
    }
    x
}

/// `‖x‖_p`.
pub fn p_norm(x: &[f64], p: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Orthonormal basis (column-major, `n×k`) of a Haar-distributed `k`-subspace:
/// a Gaussian matrix orthonormalized by Gram–Schmidt with one
/// reorthogonalization pass. Returns `None` on numerical rank deficiency.
pub fn haar_frame(n: usize, k: usize, rng: &mut RngStream) -> Option<Vec<f64>> {
    let mut q: Vec<f64> = (0..n * k).map(|_| rng.normal()).collect();
    for j in 0..k {
        let (done, rest) = q.split_at_mut(j * n);
        let col = &mut rest[..n];
        let norm0 = dot(col, col).sqrt();
        for _ in 0..2 {
            for i in 0..j {
                let qi = &done[i * n..(i + 1) * n];
                let r = dot(qi, col);
                for (c, b) in col.iter_mut().zip(qi) {
                    *c -= r * b;
                }
            }
        }
        let norm = dot(col, col).sqrt();
        if !(norm > 1e-10 * norm0) {
            return None;
        }
        for c in col.iter_mut() {
            *c /= norm;
        }
    }
    Some(q)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `n^{1/p} ‖P_E X‖₂` by explicit projection onto a Haar subspace.
///
/// Draws the ball point first and the frame second. Reference path only;
/// rejects `n > DIRECT_MAX_N`.
pub fn project_norm_direct(cfg: &ProjectionConfig, rng: &mut RngStream) -> Result<f64> {
    if cfg.n > DIRECT_MAX_N {
        return usage(format!(
            "direct sampler is capped at n <= {DIRECT_MAX_N}, got n={}",
            cfg.n
        ));
    }
    let x = sample_ball_point(cfg, rng);
    let frame = loop {
        if let Some(f) = haar_frame(cfg.n, cfg.k, rng) {
            break f;
        }
    };
    let sq: f64 = frame
        .chunks_exact(cfg.n)
        .map(|col| dot(col, &x).powi(2))
        .sum();
    Ok((cfg.n as f64).powf(1.0 / cfg.p) * sq.sqrt())
}

/// The independent ingredients of the representation of `𝒵_{n,p}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprParts {
    /// `Σ_{i≤k} g_i²`
    pub chi_head: f64,
    /// `Σ_{k<i≤n} g_i²`
    pub chi_tail: f64,
    /// `Σ Z_i²`
    pub sum_sq: f64,
    /// `Σ |Z_i|^p`
    pub sum_p: f64,
    pub w: f64,
}

impl ReprParts {
    pub fn draw(cfg: &ProjectionConfig, rng: &mut RngStream) -> Self {
        let n = cfg.n as f64;
        let k = cfg.k as f64;
        let p = cfg.p;
        let chi_head = rng.chi_square(k);
        let chi_tail = rng.chi_square(n - k);
        let (sum_sq, sum_p) = z_sums(cfg.n, p, rng);
        let w = sample_w(&cfg.w, p, rng);
        Self {
            chi_head,
            chi_tail,
            sum_sq,
            sum_p,
            w,
        }
    }

    /// `n^{1/p} · sqrt(head/(head+tail)) · sqrt(Σ Z²) / (Σ|Z|^p + W)^{1/p}`.
    #[inline]
    pub fn z_norm(&self, n: usize, p: f64) -> f64 {
        let ratio = self.chi_head / (self.chi_head + self.chi_tail);
        let radial = if p == 2.0 {
            (self.sum_sq / (self.sum_p + self.w)).sqrt()
        } else {
            self.sum_sq.sqrt() * (self.sum_p + self.w).powf(-1.0 / p)
        };
        (n as f64).powf(1.0 / p) * ratio.sqrt() * radial
    }
}

/// `(Σ Z_i², Σ |Z_i|^p)` over `n` i.i.d. p-generalized Gaussians. At `p = 2`
/// both sums coincide and are drawn as a single `χ²_n`.
#[inline]
fn z_sums(n: usize, p: f64, rng: &mut RngStream) -> (f64, f64) {
    if p == 2.0 {
        let s = rng.chi_square(n as f64);
        return (s, s);
    }
    let mut sum_sq = 0.0;
    let mut sum_p = 0.0;
    let two_over_p = 2.0 / p;
    for _ in 0..n {
        let a = pgg_abs_pow(p, rng);
        sum_p += a;
        sum_sq += a.powf(two_over_p);
    }
    (sum_sq, sum_p)
}

/// One draw of `𝒵_{n,p}` through the representation (O(n), no factorization;
/// O(1) at `p = 2`).
pub fn project_norm_repr(cfg: &ProjectionConfig, rng: &mut RngStream) -> f64 {
    ReprParts::draw(cfg, rng).z_norm(cfg.n, cfg.p)
}

/// `t⁻¹ 𝒳_{n,p} = t⁻¹ (𝒵_{n,p} / sqrt(M_p(2)) − √k)` given `1/sqrt(M_p(2))`.
#[inline]
pub fn x_statistic_from_z(z: f64, prefactor: f64, k: usize, t: f64) -> f64 {
    (prefactor * z - (k as f64).sqrt()) / t
}

/// One draw of `t⁻¹ 𝒳_{n,p}`.
pub fn sample_x_statistic(cfg: &ProjectionConfig, t: f64, rng: &mut RngStream) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("scale t must be positive, got {t}"));
    }
    let pre = specfun::centring_prefactor(cfg.p)?;
    Ok(x_statistic_from_z(project_norm_repr(cfg, rng), pre, cfg.k, t))
}

/// One joint draw of the standardized sums `ξ_{p,2}, ξ_{p,p}, ζ₁, ζ₂, ζ₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizedSums {
    pub xi_2: f64,
    pub xi_p: f64,
    pub zeta_1: f64,
    /// Absent when `k = n`.
    pub zeta_2: Option<f64>,
    pub zeta_3: f64,
}

/// Centred, `t√·`-scaled sums of `Z_i²`, `|Z_i|^p` (over `n`) and `g_i²`
/// (over the first `k`, the remaining `n − k`, and all `n`).
pub fn sample_standardized_sums(
    n: usize,
    k: usize,
    p: f64,
    t: f64,
    rng: &mut RngStream,
) -> Result<StandardizedSums> {
    if !(p >= 2.0 && p.is_finite()) {
        return domain(format!("standardized sums need p >= 2, got {p}"));
    }
    if k < 1 || k > n {
        return domain(format!("need 1 <= k <= n, got k={k} n={n}"));
    }
    if !(t > 0.0) {
        return domain(format!("scale t must be positive, got {t}"));
    }
    let m2 = specfun::m_p(p)?;
    let (nf, kf) = (n as f64, k as f64);
    let (sum_sq, sum_p) = z_sums(n, p, rng);
    let head = rng.chi_square(kf);
    let tail = rng.chi_square(nf - kf);
    let tn = t * nf.sqrt();
    Ok(StandardizedSums {
        xi_2: (sum_sq - nf * m2) / tn,
        xi_p: (sum_p - nf) / tn,
        zeta_1: (head - kf) / (t * kf.sqrt()),
        zeta_2: (k < n).then(|| (tail - (nf - kf)) / (t * (nf - kf).sqrt())),
        zeta_3: ((head - kf) + (tail - (nf - kf))) / tn,
    })
}

/// Run `per_stream` draws of `f` on each stream in `streams`, in parallel.
/// Output is ordered by stream index, then draw index, independent of the
/// thread count.
pub fn batch<T, F>(seed: u64, streams: Range<u64>, per_stream: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync,
{
    streams
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = RngStream::new(seed, s);
            (0..per_stream).map(|_| f(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// `count` representation draws of `𝒵_{n,p}` split over streams of
/// `per_stream` draws.
pub fn batch_project_norm_repr(
    cfg: &ProjectionConfig,
    seed: u64,
    count: usize,
    per_stream: usize,
) -> Vec<f64> {
    let per_stream = per_stream.max(1);
    let streams = count.div_ceil(per_stream) as u64;
    let mut out = batch(seed, 0..streams, per_stream, |r| project_norm_repr(cfg, r));
    out.truncate(count);
    out
}

/// `count` direct draws of `𝒵_{n,p}`, split like [`batch_project_norm_repr`].
pub fn batch_project_norm_direct(
    cfg: &ProjectionConfig,
    seed: u64,
    count: usize,
    per_stream: usize,
) -> Result<Vec<f64>> {
    let per_stream = per_stream.max(1);
    let streams = count.div_ceil(per_stream) as u64;
    let mut out: Vec<f64> = batch(seed, 0..streams, per_stream, |r| project_norm_direct(cfg, r))
        .into_iter()
        .collect::<Result<_>>()?;
    out.truncate(count);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn streams_replay_and_differ() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        assert_eq!(a.words_consumed(), 16);
    }

    #[test]
    fn uniform_is_open() {
        let mut r = RngStream::new(1, 0);
        for _ in 0..100_000 {
            let u = r.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn gamma_moments() {
        let mut r = RngStream::new(11, 0);
        for &a in &[0.2, 0.5, 1.0, 1.5, 7.0, 250.0] {
            let xs: Vec<f64> = (0..200_000).map(|_| r.gamma(a)).collect();
            let (m, se) = mean_se(&xs);
            assert!((m - a).abs() < 4.0 * se, "shape {a}: mean {m} se {se}");
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
            assert!((v - a).abs() / a < 0.05, "shape {a}: var {v}");
        }
    }

    #[test]
    fn w_law_parsing() {
        assert_eq!("cone".parse::<WLaw>().unwrap(), WLaw::Dirac0);
        assert_eq!("uniform".parse::<WLaw>().unwrap(), WLaw::Exponential);
        assert_eq!(
            "gamma:1.5".parse::<WLaw>().unwrap(),
            WLaw::Gamma { alpha: 1.5 }
        );
        assert!("gamma:-1".parse::<WLaw>().is_err());
        assert!("beta".parse::<WLaw>().is_err());
        for w in [WLaw::Dirac0, WLaw::Exponential, WLaw::Gamma { alpha: 2.5 }] {
            assert_eq!(w.to_string().parse::<WLaw>().unwrap(), w);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ProjectionConfig::new(10, 0, 2.0, WLaw::Dirac0).is_err());
        assert!(ProjectionConfig::new(10, 11, 2.0, WLaw::Dirac0).is_err());
        assert!(ProjectionConfig::new(10, 3, 0.5, WLaw::Dirac0).is_err());
        assert!(ProjectionConfig::new(10, 10, 1.0, WLaw::Exponential).is_ok());
    }

    #[test]
    fn haar_frame_is_orthonormal() {
        let mut r = RngStream::new(5, 0);
        let (n, k) = (30, 7);
        let q = haar_frame(n, k, &mut r).unwrap();
        for i in 0..k {
            for j in 0..k {
                let d = dot(&q[i * n..(i + 1) * n], &q[j * n..(j + 1) * n]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn direct_with_full_subspace_is_scaled_norm() {
        let cfg = ProjectionConfig::new(12, 12, 1.5, WLaw::Exponential).unwrap();
        for s in 0..20 {
            let mut r = RngStream::new(9, s);
            let mut r2 = r.clone();
            let z = project_norm_direct(&cfg, &mut r).unwrap();
            let x = sample_ball_point(&cfg, &mut r2);
            let want = 12f64.powf(1.0 / 1.5) * p_norm(&x, 2.0);
            assert!((z - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn direct_with_one_dim_subspace() {
        let cfg = ProjectionConfig::new(9, 1, 3.0, WLaw::Dirac0).unwrap();
        let mut r = RngStream::new(2, 0);
        let mut r2 = r.clone();
        let z = project_norm_direct(&cfg, &mut r).unwrap();
        let x = sample_ball_point(&cfg, &mut r2);
        let theta = haar_frame(9, 1, &mut r2).unwrap();
        let want = 9f64.powf(1.0 / 3.0) * dot(&x, &theta).abs();
        assert!((z - want).abs() < 1e-13);
    }

    #[test]
    fn direct_cap() {
        let cfg = ProjectionConfig::new(201, 3, 2.0, WLaw::Dirac0).unwrap();
        let mut r = RngStream::new(0, 0);
        assert!(matches!(project_norm_direct(&cfg, &mut r), Err(Error::Usage(_))));
    }

    #[test]
    fn repr_is_deterministic() {
        let cfg = ProjectionConfig::new(300, 40, 1.3, WLaw::Gamma { alpha: 2.0 }).unwrap();
        let a = batch_project_norm_repr(&cfg, 42, 1000, 64);
        let b = batch_project_norm_repr(&cfg, 42, 1000, 64);
        assert_eq!(a.len(), 1000);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn repr_full_subspace_cone_bound() {
        // k = n and W = 0 gives n^{1/p}‖X‖₂ with ‖X‖_p = 1; for p=2 that is √n.
        let cfg = ProjectionConfig::new(25, 25, 2.0, WLaw::Dirac0).unwrap();
        let mut r = RngStream::new(1, 1);
        for _ in 0..50 {
            let z = project_norm_repr(&cfg, &mut r);
            assert!((z - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn repr_concentrates_at_root_k() {
        let cfg = ProjectionConfig::new(20_000, 2_000, 2.0, WLaw::Exponential).unwrap();
        let xs = batch_project_norm_repr(&cfg, 3, 2000, 100);
        let (m, _) = mean_se(&xs);
        assert!((m / (2000f64).sqrt() - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn x_statistic_scales_with_t() {
        let cfg = ProjectionConfig::new(500, 50, 3.0, WLaw::Exponential).unwrap();
        for s in 0..20 {
            let a = sample_x_statistic(&cfg, 1.0, &mut RngStream::new(4, s)).unwrap();
            let b = sample_x_statistic(&cfg, 2.5, &mut RngStream::new(4, s)).unwrap();
            assert!((b / a - 1.0 / 2.5).abs() < 1e-15);
        }
        assert!(sample_x_statistic(&cfg, 0.0, &mut RngStream::new(4, 0)).is_err());
    }

    #[test]
    fn standardized_sums_identity_and_absent_zeta2() {
        let mut r = RngStream::new(8, 0);
        for &(n, k) in &[(100, 30), (1000, 1), (50, 49)] {
            for _ in 0..200 {
                let s = sample_standardized_sums(n, k, 3.0, 1.7, &mut r).unwrap();
                let lam = k as f64 / n as f64;
                let rhs = lam.sqrt() * s.zeta_1 + (1.0 - lam).sqrt() * s.zeta_2.unwrap();
                assert!((s.zeta_3 - rhs).abs() <= 1e-12 * (1.0 + s.zeta_3.abs()));
            }
        }
        let s = sample_standardized_sums(10, 10, 2.0, 1.0, &mut r).unwrap();
        assert!(s.zeta_2.is_none());
        assert!(sample_standardized_sums(10, 3, 1.5, 1.0, &mut r).is_err());
    }

    #[test]
    fn w_tail_is_closed_form() {
        assert_eq!(WLaw::Exponential.ln_tail(2.0, 6.0), -3.0);
        assert_eq!(WLaw::Dirac0.ln_tail(2.0, 0.5), f64::NEG_INFINITY);
        // Gamma(1) with rate 1/p is exponential.
        let g = WLaw::Gamma { alpha: 1.0 }.ln_tail(3.0, 4.5);
        assert!((g + 1.5).abs() < 1e-13);
    }
}
