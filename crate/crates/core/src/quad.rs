//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals and on `[0, ∞)`.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SUBDIVISIONS: usize = 2000;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Integral estimate together with its error bound and the number of
/// integrand evaluations spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Globally adaptive integration of `f` over `[a, b]`.
///
/// Bisects the segment with the largest error estimate until the summed error
/// is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    let mut segs = vec![gk15(&mut f, a, b)];
    let mut evaluations = 15;
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Numerical {
                what: "quadrature".into(),
                diagnostics: format!("non-finite integrand on [{a}, {b}]: value={value}"),
            });
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Quadrature {
                value,
                error,
                evaluations,
            });
        }
        if segs.len() >= MAX_SUBDIVISIONS {
            return Err(Error::Numerical {
                what: "quadrature".into(),
                diagnostics: format!(
                    "no convergence on [{a}, {b}] after {} segments: value={value}, error={error}",
                    segs.len()
                ),
            });
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let s = segs.swap_remove(worst);
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            // Segment cannot be split further in floating point.
            return Ok(Quadrature {
                value,
                error,
                evaluations,
            });
        }
        segs.push(gk15(&mut f, s.a, m));
        segs.push(gk15(&mut f, m, s.b));
        evaluations += 30;
    }
}

/// Integrate `f` over `[0, ∞)` by summing adaptive integrals over `[0, 1]`,
/// `[1, 2]`, `[2, 4]`, ... until a doubling piece adds less than `rel_tol`
/// relative to the running total.
///
/// Intended for integrands with light (at least exponential) tails.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, rel_tol: f64) -> Result<Quadrature> {
    let mut total = integrate(&mut f, 0.0, 1.0, 0.0, rel_tol)?;
    let mut lo = 1.0;
    for _ in 0..1100 {
        let piece = integrate(&mut f, lo, 2.0 * lo, rel_tol * total.value.abs() * 1e-3, rel_tol)?;
        total.value += piece.value;
        total.error += piece.error;
        total.evaluations += piece.evaluations;
        let small = rel_tol * 1e-2 * total.value.abs();
        if piece.value.abs() <= small && (f(2.0 * lo) * lo).abs() <= small {
            return Ok(total);
        }
        lo *= 2.0;
    }
    Err(Error::Numerical {
        what: "half-line quadrature".into(),
        diagnostics: format!("tail did not decay: partial value={}, last cut={lo}", total.value),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 0.0, 1e-14).unwrap();
        assert!((q.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_half_line() {
        let q = integrate_half_line(|x| (-x * x / 2.0).exp(), 1e-12).unwrap();
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        assert!((q.value - exact).abs() / exact < 1e-12, "{}", q.value);
    }

    #[test]
    fn gamma_integral() {
        // ∫ x^{4.5} e^{-x} dx = Γ(5.5)
        let q = integrate_half_line(|x| x.powf(4.5) * (-x).exp(), 1e-12).unwrap();
        let exact = 52.342_777_784_553_52;
        assert!((q.value - exact).abs() / exact < 1e-11, "{}", q.value);
    }

    #[test]
    fn divergent_tail_is_an_error() {
        assert!(integrate_half_line(|x| (0.1 * x).exp(), 1e-10).is_err());
    }
}
