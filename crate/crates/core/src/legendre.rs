//! Cumulant-generating functions, Legendre–Fenchel transforms and the
//! constrained quadratic behind the subcritical rate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::error::{domain, usage, Error, Result};
use crate::optim;
use crate::quad;
use crate::specfun::{self, ln_gamma_pos};

/// `log E[e^{θ|Z|^r}]` for a p-generalized Gaussian `Z`, by quadrature.
///
/// Returns `+∞` outside the finiteness domain: for `r < p` every `θ`, for
/// `r = p` only `θ < 1/p`, and for `r > p` only `θ ≤ 0`.
pub fn cgf_pgg_power(p: f64, r: f64, theta: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return domain(format!("p must be >= 1, got {p}"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return domain(format!("power must be positive, got {r}"));
    }
    if theta == 0.0 {
        return Ok(0.0);
    }
    let finite = theta < 0.0 || r < p || (r == p && theta < 1.0 / p);
    if !finite {
        return Ok(f64::INFINITY);
    }
    // Exponent h(x) = θx^r − x^p/p; shift by its maximum over x ≥ 0.
    let h = |x: f64| theta * x.powf(r) - x.powf(p) / p;
    let x_star = if theta > 0.0 && r < p {
        (r * theta).powf(1.0 / (p - r))
    } else {
        0.0
    };
    let shift = h(x_star).max(0.0);
    let q = quad::integrate_half_line(|x| (h(x) - shift).exp(), 1e-13)?;
    let norm = p.ln() / p + ln_gamma_pos(1.0 + 1.0 / p);
    Ok(shift + q.value.ln() - norm)
}

/// Closed forms of the CGF where they exist: `r = p` and `(p, r) = (2, 2)`.
pub fn cgf_closed_form(p: f64, r: f64, theta: f64) -> Option<f64> {
    if r != p {
        return None;
    }
    Some(if theta < 1.0 / p {
        -(1.0 - p * theta).ln() / p
    } else {
        f64::INFINITY
    })
}

type Cgf = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex CGF together with its finiteness domain and a tabulation on a
/// grid inside it.
#[derive(Clone)]
pub struct CgfTable {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub theta_min: f64,
    pub theta_max: f64,
    cgf: Cgf,
}

impl fmt::Debug for CgfTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CgfTable")
            .field("theta_min", &self.theta_min)
            .field("theta_max", &self.theta_max)
            .field("points", &self.thetas.len())
            .finish()
    }
}

impl CgfTable {
    /// Tabulates `cgf` on `points` equispaced nodes of `[lo, hi]`, which must
    /// lie inside the domain `[theta_min, theta_max]` and contain 0.
    /// Checks `Λ(0) = 0` and discrete convexity.
    pub fn new<F>(cgf: F, theta_min: f64, theta_max: f64, lo: f64, hi: f64, points: usize) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(theta_min < theta_max) || !(theta_min <= lo && lo < hi && hi <= theta_max) {
            return usage(format!(
                "grid [{lo}, {hi}] must lie inside the domain ({theta_min}, {theta_max})"
            ));
        }
        if !(lo <= 0.0 && 0.0 <= hi) {
            return usage("CGF grid must contain 0");
        }
        let points = points.max(3);
        let thetas: Vec<f64> = (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let values: Vec<f64> = thetas.iter().map(|&t| cgf(t)).collect();
        let at0 = cgf(0.0);
        if at0.abs() > 1e-12 {
            return domain(format!("CGF must vanish at 0, got {at0}"));
        }
        for w in values.windows(3) {
            let d2 = w[0] - 2.0 * w[1] + w[2];
            if !(d2 >= -1e-9) {
                return domain(format!("CGF is not convex on the grid (second difference {d2})"));
            }
        }
        Ok(Self {
            thetas,
            values,
            theta_min,
            theta_max,
            cgf: Arc::new(cgf),
        })
    }

    /// `θ²/2`.
    pub fn gaussian() -> Self {
        Self::new(|t| 0.5 * t * t, f64::NEG_INFINITY, f64::INFINITY, -5.0, 5.0, 101)
            .expect("valid table")
    }

    /// `−½ log(1 − 2θ)`, the CGF of `χ²₁`.
    pub fn chi_square() -> Self {
        Self::new(
            |t| if t < 0.5 { -0.5 * (-2.0 * t).ln_1p() } else { f64::INFINITY },
            f64::NEG_INFINITY,
            0.5,
            -5.0,
            0.45,
            101,
        )
        .expect("valid table")
    }

    /// CGF of `|Z|^r` for a p-generalized Gaussian, evaluated by quadrature.
    pub fn pgg_power(p: f64, r: f64) -> Result<Self> {
        cgf_pgg_power(p, r, 0.0)?;
        let theta_max = if r < p {
            f64::INFINITY
        } else if r == p {
            1.0 / p
        } else {
            0.0
        };
        let hi = if theta_max.is_finite() { 0.9 * theta_max } else { 1.0 };
        let lo = -2.0;
        let f = move |t: f64| cgf_pgg_power(p, r, t).unwrap_or(f64::NAN);
        Self::new(f, f64::NEG_INFINITY, theta_max, lo, hi, 41)
    }

    /// `Λ(θ)`, `+∞` outside the domain.
    pub fn eval(&self, theta: f64) -> f64 {
        if theta < self.theta_min || theta > self.theta_max {
            f64::INFINITY
        } else {
            (self.cgf)(theta)
        }
    }

    fn interior(&self, theta: f64) -> bool {
        theta > self.theta_min && theta < self.theta_max
    }

    /// Central-difference `Λ'(θ)`, with the step pulled in near a finite edge.
    fn derivative(&self, theta: f64) -> f64 {
        let mut h = 1e-5 * theta.abs().max(1.0);
        h = h.min(0.5 * (self.theta_max - theta)).min(0.5 * (theta - self.theta_min));
        (self.eval(theta + h) - self.eval(theta - h)) / (2.0 * h)
    }
}

/// Walks from `from` towards the domain edge in direction `dir` until
/// `Λ' − x` changes sign. Returns the bracket or `None` if the edge is hit.
fn bracket(cgf: &CgfTable, x: f64, from: f64, dir: f64) -> Option<(f64, f64)> {
    let edge = if dir > 0.0 { cgf.theta_max } else { cgf.theta_min };
    let mut a = from;
    let mut step = 1.0;
    for _ in 0..400 {
        let b = if edge.is_finite() {
            a + 0.5 * (edge - a)
        } else {
            a + dir * step
        };
        if !cgf.interior(b) || b == a {
            return None;
        }
        let d = cgf.derivative(b) - x;
        if (dir > 0.0 && d >= 0.0) || (dir < 0.0 && d <= 0.0) {
            return Some(if a < b { (a, b) } else { (b, a) });
        }
        a = b;
        step *= 2.0;
    }
    None
}

/// `sup_θ {θx − Λ(θ)}` by bisection on `Λ'(θ) = x`.
///
/// Returns `+∞` when `x` is outside the range of `Λ'` on an unbounded side of
/// the domain. On a bounded side with `Λ' < x` throughout, the supremum is
/// taken at the edge.
pub fn legendre_transform(cgf: &CgfTable, x: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return usage(format!("tolerance must be positive, got {tol}"));
    }
    if !x.is_finite() {
        return Ok(f64::INFINITY);
    }
    let phi = |t: f64| t * x - cgf.eval(t);
    let start = if cgf.interior(0.0) { 0.0 } else { 0.5 * (cgf.thetas[0] + cgf.thetas[cgf.thetas.len() - 1]) };
    let d0 = cgf.derivative(start) - x;
    if d0 == 0.0 {
        return Ok(phi(start).max(0.0));
    }
    let dir = if d0 < 0.0 { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = match bracket(cgf, x, start, dir) {
        Some(b) => b,
        None => {
            let edge = if dir > 0.0 { cgf.theta_max } else { cgf.theta_min };
            if !edge.is_finite() {
                return Ok(f64::INFINITY);
            }
            let v = phi(edge);
            return Ok(if v.is_nan() { f64::INFINITY } else { v.max(0.0) });
        }
    };
    let d_lo = cgf.derivative(lo) - x;
    let d_hi = cgf.derivative(hi) - x;
    if d_lo > 0.0 || d_hi < 0.0 || d_hi - d_lo <= 1e-14 * x.abs().max(1.0) {
        // Flat or non-monotone derivative: maximize the concave objective directly.
        let r = optim::golden_section(|t| -phi(t), lo, hi, tol);
        return Ok((-r.value).max(0.0));
    }
    let theta_tol = tol * 1e-2;
    for _ in 0..200 {
        if hi - lo <= theta_tol * lo.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cgf.derivative(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = phi(lo).max(phi(hi)).max(phi(0.5 * (lo + hi)));
    Ok(v.max(0.0))
}

/// Minimize `G̃(x) = (1/(2A))(a x₁² + b x₂² + c x₁x₂) + (x₃² + x₄²)/4`
/// subject to `α x₁ + β x₂ + γ x₃ + δ x₄ = y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionProblem {
    /// The normalizing constant `A`.
    pub big_a: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub y: f64,
}

impl ContractionProblem {
    /// The problem whose value is the subcritical rate at `y`: the quadratic
    /// form is the bivariate MDP rate of `(ξ_{p,2}, ξ_{p,p})` plus the
    /// `(ζ₁, ζ₂)` rate, and the constraint is the linear limit map
    /// `√λ/(2M) x₁ − √λ/p x₂ + (1−λ)/2 x₃ − √(λ(1−λ))/2 x₄`.
    pub fn subcritical(p: f64, lambda: f64, y: f64) -> Result<Self> {
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::Degenerate(format!(
                "the four-variable problem needs p > 2, got p={p}"
            )));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return domain(format!("lambda must lie in [0, 1], got {lambda}"));
        }
        let big_a = specfun::a_p(p)?;
        let (l1, l3, l5) = (ln_gamma_pos(1.0 / p), ln_gamma_pos(3.0 / p), ln_gamma_pos(5.0 / p));
        let lp = p.ln();
        let b = (4.0 / p * lp + l5 - l1).exp() - (4.0 / p * lp + 2.0 * l3 - 2.0 * l1).exp();
        let c = -4.0 * (2.0 / p * lp + l3 - l1).exp();
        let m2 = specfun::m_p(p)?;
        let sl = lambda.sqrt();
        Ok(Self {
            big_a,
            a: p,
            b,
            c,
            alpha: sl / (2.0 * m2),
            beta: -sl / p,
            gamma: (1.0 - lambda) / 2.0,
            delta: -(lambda * (1.0 - lambda)).sqrt() / 2.0,
            y,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.big_a > 0.0) {
            return domain(format!("A must be positive, got {}", self.big_a));
        }
        let disc = 4.0 * self.a * self.b - self.c * self.c;
        if !(self.a > 0.0 && disc > 0.0) {
            return domain(format!(
                "quadratic block is not positive definite (a={}, 4ab-c^2={disc})",
                self.a
            ));
        }
        Ok(())
    }

    /// `G̃(x)`.
    pub fn objective(&self, x: &[f64; 4]) -> f64 {
        (self.a * x[0] * x[0] + self.b * x[1] * x[1] + self.c * x[0] * x[1]) / (2.0 * self.big_a)
            + (x[2] * x[2] + x[3] * x[3]) / 4.0
    }

    /// `α x₁ + β x₂ + γ x₃ + δ x₄`.
    pub fn constraint(&self, x: &[f64; 4]) -> f64 {
        self.alpha * x[0] + self.beta * x[1] + self.gamma * x[2] + self.delta * x[3]
    }

    fn hessian(&self) -> Matrix4<f64> {
        let s = 1.0 / self.big_a;
        Matrix4::new(
            self.a * s, 0.5 * self.c * s, 0.0, 0.0,
            0.5 * self.c * s, self.b * s, 0.0, 0.0,
            0.0, 0.0, 0.5, 0.0,
            0.0, 0.0, 0.0, 0.5,
        )
    }
}

/// Lagrange solution: returns `(min G̃, x⁰)`.
///
/// With multiplier
/// `λ = y(c² − 4ab) / [4A(α²b + β²a − αβc) + 2(4ab − c²)(δ² + γ²)]`
/// the minimizer is `x₁⁰ = 2Aλ(βc − 2αb)/(4ab − c²)`,
/// `x₂⁰ = 2Aλ(αc − 2βa)/(4ab − c²)`, `x₃⁰ = −2γλ`, `x₄⁰ = −2δλ`.
pub fn contract_min_closed_form(prob: &ContractionProblem) -> Result<(f64, [f64; 4])> {
    prob.validate()?;
    let ContractionProblem {
        big_a,
        a,
        b,
        c,
        alpha,
        beta,
        gamma,
        delta,
        y,
    } = *prob;
    let disc = 4.0 * a * b - c * c;
    let quad = alpha * alpha * b + beta * beta * a - alpha * beta * c;
    let gd = delta * delta + gamma * gamma;
    let denom = 4.0 * big_a * quad + 2.0 * disc * gd;
    if !(denom > 0.0) {
        if y == 0.0 {
            return Ok((0.0, [0.0; 4]));
        }
        return domain("constraint has no feasible point (all weights vanish)");
    }
    let lam = -y * disc / denom;
    let x = [
        2.0 * big_a * lam * (beta * c - 2.0 * alpha * b) / disc,
        2.0 * big_a * lam * (alpha * c - 2.0 * beta * a) / disc,
        -2.0 * gamma * lam,
        -2.0 * delta * lam,
    ];
    let min = y * y * disc / (4.0 * (2.0 * big_a * quad + disc * gd));
    Ok((min, x))
}

/// Minimum of the same problem by a null-space method: parametrize the
/// constraint hyperplane with a Householder basis and solve the reduced
/// 3×3 system by conjugate gradients to residual `tol`.
pub fn contract_min_numeric(prob: &ContractionProblem, tol: f64) -> Result<f64> {
    prob.validate()?;
    if !(tol > 0.0) {
        return usage(format!("tolerance must be positive, got {tol}"));
    }
    let w = Vector4::new(prob.alpha, prob.beta, prob.gamma, prob.delta);
    let wn = w.norm();
    if wn == 0.0 {
        if prob.y == 0.0 {
            return Ok(0.0);
        }
        return domain("constraint has no feasible point (all weights vanish)");
    }
    let h = prob.hessian();
    let x_p = w * (prob.y / (wn * wn));
    // Householder reflector mapping w to a multiple of e₁; its last three
    // columns span w⊥.
    let mut v = w;
    v[0] += wn.copysign(w[0]);
    let refl = Matrix4::identity() - v * v.transpose() * (2.0 / v.norm_squared());
    let basis = refl.fixed_columns::<3>(1).into_owned();
    let m = basis.transpose() * h * basis;
    let rhs = -(basis.transpose() * h * x_p);
    let z = conjugate_gradient(&m, &rhs, tol)?;
    let x = x_p + basis * z;
    Ok(prob.objective(&[x[0], x[1], x[2], x[3]]))
}

fn conjugate_gradient(
    m: &nalgebra::Matrix3<f64>,
    b: &Vector3<f64>,
    tol: f64,
) -> Result<Vector3<f64>> {
    let mut x = Vector3::zeros();
    let mut r = b - m * x;
    let mut d = r;
    let target = tol * b.norm().max(f64::MIN_POSITIVE);
    for _ in 0..50 {
        if r.norm() <= target {
            return Ok(x);
        }
        let md = m * d;
        let step = r.norm_squared() / d.dot(&md);
        x += d * step;
        let r_new = r - md * step;
        let beta = r_new.norm_squared() / r.norm_squared();
        d = r_new + d * beta;
        r = r_new;
    }
    if r.norm() <= target.max(1e-14 * b.norm()) {
        return Ok(x);
    }
    Err(Error::Numerical {
        what: "conjugate gradients".into(),
        diagnostics: format!("residual {} above target {target}", r.norm()),
    })
}

/// Variance `wᵀΣw` of the Gaussian limit of the linear limit map applied to
/// `(ξ_{p,2}, ξ_{p,p}, ζ₁, ζ₂)`, with `Σ = diag(C, 2, 2)`.
pub fn gaussian_limit_variance(p: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return domain(format!("lambda must lie in [0, 1], got {lambda}"));
    }
    let cov = specfun::bivariate_cov(p)?;
    let m2 = specfun::m_p(p)?;
    let sl = lambda.sqrt();
    let (w1, w2) = (sl / (2.0 * m2), -sl / p);
    let (w3, w4) = ((1.0 - lambda) / 2.0, -(lambda * (1.0 - lambda)).sqrt() / 2.0);
    Ok(w1 * w1 * cov.c11 + 2.0 * w1 * w2 * cov.c12 + w2 * w2 * cov.c22 + 2.0 * (w3 * w3 + w4 * w4))
}
